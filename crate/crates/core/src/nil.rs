//! Nilpotent factorizations of singular matrices and families.
//!
//! A matrix is split as `U1 ⊕ U2 ⊕ U3` with `U1` in the kernel and `U3` in
//! the kernel of the adjoint, so that it takes the block shape
//! `[[0, A, 0], [0, C, D], [0, 0, 0]]`. The identity blocks in the factors
//! need three parts of equal size; the matrix is padded with zero
//! coordinates until that is possible.

use serde::{Deserialize, Serialize};

use crate::decompose::{PartLabel, TripleDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{assemble, fro, identity, kernel_basis, norm2, pad_with_zero, range_basis, svd_full_right, zeros, Matrix, SubspaceBasis};

pub const DEFAULT_NIL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NilOptions {
    /// Relative singular-value cut for kernels.
    pub tol: f64,
    /// Largest number of zero coordinates that may be appended; `None` for
    /// no limit.
    pub budget: Option<usize>,
}

impl Default for NilOptions {
    fn default() -> Self {
        NilOptions { tol: DEFAULT_NIL_TOL, budget: None }
    }
}

impl NilOptions {
    pub fn no_padding() -> Self {
        NilOptions { budget: Some(0), ..Default::default() }
    }
}

/// Where the padded coordinates went.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddingRecord {
    pub total: usize,
    pub to_u1: usize,
    pub to_u2: usize,
    pub to_u3: usize,
}

#[derive(Clone, Debug)]
pub struct NilBlocks {
    pub a: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

#[derive(Clone, Debug)]
pub struct NilDecomposition {
    /// Lives in the padded space.
    pub decomposition: TripleDecomposition,
    pub padding: PaddingRecord,
    pub padded: Vec<Matrix>,
    pub blocks: Vec<NilBlocks>,
    /// `max ‖T_i·U1‖`.
    pub kernel_residual: f64,
    /// `max ‖U3*·T_i‖`.
    pub cokernel_residual: f64,
    /// `max ‖U1*·T_i·U3‖` before it was dropped.
    pub upper_right: f64,
}

impl NilDecomposition {
    pub fn part_dim(&self) -> usize {
        self.decomposition.dims()[0]
    }

    /// The unitary `[U1 U2 U3]`.
    pub fn unitary(&self) -> Matrix {
        self.decomposition.unitary()
    }
}

/// Right null vectors of `a` with singular value at most `cut` (absolute).
fn null_abs(a: &Matrix, cut: f64) -> Result<Matrix> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return Ok(identity(n));
    }
    let (sv, right) = svd_full_right(a)?;
    let start = sv.iter().position(|&x| x <= cut).unwrap_or(n);
    Ok(right.matrix().columns(start, n - start).into_owned())
}

fn vstack(ms: &[Matrix]) -> Matrix {
    let cols = ms[0].ncols();
    let rows: usize = ms.iter().map(|m| m.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut r = 0;
    for m in ms {
        out.rows_mut(r, m.nrows()).copy_from(m);
        r += m.nrows();
    }
    out
}

/// Removes a tiny overlap with `against` and re-orthonormalizes.
fn orthogonalize(v: &Matrix, against: &Matrix) -> Result<Matrix> {
    if v.ncols() == 0 {
        return Ok(v.clone());
    }
    let w = v - against * (against.adjoint() * v);
    Ok(range_basis(&w, 0.5)?.into_matrix())
}

struct Plan {
    u1: Matrix,
    u3: Matrix,
    d: usize,
    record: PaddingRecord,
    kernel_dim: usize,
    cokernel_dim: usize,
}

fn same_square(ts: &[Matrix]) -> Result<usize> {
    let n = ts.first().ok_or_else(|| Error::ShapeMismatch("empty family".into()))?.nrows();
    if ts.iter().any(|t| t.shape() != (n, n)) {
        return Err(Error::ShapeMismatch("family members must be square of one size".into()));
    }
    Ok(n)
}

/// Finds the smallest part size `d` for which the real kernel, the real
/// cokernel and zero padding can fill three parts of size `d`.
fn plan(ts: &[Matrix], tol: f64) -> Result<Plan> {
    let n = same_square(ts)?;
    let scale = ts.iter().map(norm2).fold(0.0, f64::max);
    let ker = kernel_basis(&vstack(ts), tol)?.into_matrix();
    let adj: Vec<Matrix> = ts.iter().map(|t| t.adjoint()).collect();
    let cok = kernel_basis(&vstack(&adj), tol)?.into_matrix();
    let (a, b) = (ker.ncols(), cok.ncols());
    let overlap_cut = 1e-8;
    let block_cut = tol * scale;

    // candidate (U1, U3) pairs with vanishing upper-right block, for a given
    // number of kernel vectors
    let candidates = |d1: usize| -> Result<Vec<(Matrix, Matrix)>> {
        let u1 = ker.columns(0, d1).into_owned();
        let c3 = &cok * null_abs(&(u1.adjoint() * &cok), overlap_cut)?;
        let c3 = orthogonalize(&c3, &u1)?;
        if d1 == 0 || c3.ncols() == 0 {
            return Ok(vec![(u1, c3)]);
        }
        let bs: Vec<Matrix> = ts.iter().map(|t| u1.adjoint() * t * &c3).collect();
        let shrink_u3 = (u1.clone(), &c3 * null_abs(&vstack(&bs), block_cut)?);
        let bs_adj: Vec<Matrix> = bs.iter().map(|b| b.adjoint()).collect();
        let shrink_u1 = (&u1 * null_abs(&vstack(&bs_adj), block_cut)?, c3);
        Ok(vec![shrink_u3, shrink_u1])
    };

    // cokernel vectors killed by every T_i come first, so that U3 costs the
    // kernel side nothing
    let cok_first = if b == 0 || a == 0 {
        cok.clone()
    } else {
        let tc: Vec<Matrix> = ts.iter().map(|t| t * &cok).collect();
        let z = &cok * null_abs(&vstack(&tc), block_cut)?;
        let rest = &cok * null_abs(&(z.adjoint() * &cok), overlap_cut)?;
        let rest = orthogonalize(&rest, &z)?;
        let mut both = zeros(n, z.ncols() + rest.ncols());
        both.columns_mut(0, z.ncols()).copy_from(&z);
        both.columns_mut(z.ncols(), rest.ncols()).copy_from(&rest);
        both
    };
    // U3 first, then the kernel vectors orthogonal to it with B_i = 0
    let u3_first = |d: usize, k3: usize| -> Result<(Matrix, Matrix)> {
        let u3 = cok_first.columns(0, k3).into_owned();
        if u3.ncols() == 0 || a == 0 {
            return Ok((ker.columns(0, a.min(d)).into_owned(), u3));
        }
        let k1 = &ker * null_abs(&(u3.adjoint() * &ker), overlap_cut)?;
        let k1 = orthogonalize(&k1, &u3)?;
        let bs_adj: Vec<Matrix> = ts.iter().map(|t| (k1.adjoint() * t * &u3).adjoint()).collect();
        let u1 = if k1.ncols() == 0 { k1 } else { &k1 * null_abs(&vstack(&bs_adj), block_cut)? };
        Ok((u1.columns(0, u1.ncols().min(d)).into_owned(), u3))
    };

    let d_min = n.div_ceil(3).max(1);
    let mut cached: Option<(usize, Vec<(Matrix, Matrix)>)> = None;
    for d in d_min..=n.max(d_min) {
        let d1 = a.min(d);
        if cached.as_ref().map(|c| c.0) != Some(d1) {
            cached = Some((d1, candidates(d1)?));
        }
        let first = cached.as_ref().unwrap().1.clone();
        // fewer U3 vectors leave more room for U1
        let extra = (1..=b.min(d)).rev().map(|k3| u3_first(d, k3));
        for pair in first.into_iter().map(Ok).chain(extra) {
            let (u1, u3) = pair?;
            let k1 = u1.ncols();
            let k3 = u3.ncols().min(d);
            let k2 = n - k1 - k3;
            if k2 <= d {
                let record = PaddingRecord { total: 3 * d - n, to_u1: d - k1, to_u2: d - k2, to_u3: d - k3 };
                return Ok(Plan {
                    u1,
                    u3: u3.columns(0, k3).into_owned(),
                    d,
                    record,
                    kernel_dim: a,
                    cokernel_dim: b,
                });
            }
        }
    }
    unreachable!("d = n always balances")
}

fn check_budget(p: &Plan, opts: &NilOptions) -> Result<()> {
    if opts.budget == Some(0) && p.kernel_dim == 0 {
        return Err(Error::KernelEmpty);
    }
    match opts.budget {
        Some(budget) if p.record.total > budget => Err(Error::BudgetExceeded { needed: p.record.total, budget }),
        _ => Ok(()),
    }
}

/// `T ⊕ 0_p` with the least `p` that balances the three parts.
pub fn pad_for_balance(t: &Matrix, opts: &NilOptions) -> Result<(Matrix, PaddingRecord)> {
    let p = plan(std::slice::from_ref(t), opts.tol)?;
    check_budget(&p, opts)?;
    Ok((pad_with_zero(t, p.record.total), p.record))
}

pub fn nil_decomposition(t: &Matrix, opts: &NilOptions) -> Result<NilDecomposition> {
    joint_nil_decomposition(std::slice::from_ref(t), opts)
}

/// Shared `U1 ⊆ ∩ ker T_i`, `U3 ⊆ ∩ ker T_i*` with every upper-right block
/// zero.
pub fn joint_nil_decomposition(ts: &[Matrix], opts: &NilOptions) -> Result<NilDecomposition> {
    let p = plan(ts, opts.tol)?;
    check_budget(&p, opts).map_err(|e| match e {
        Error::BudgetExceeded { needed, budget } => {
            Error::Infeasible(format!("balancing needs {needed} padded coordinates, budget is {budget}"))
        }
        other => other,
    })?;
    let n = ts[0].nrows();
    let r = p.record.clone();
    let total = n + r.total;
    let pad_cols = |first: usize, count: usize| {
        let mut m = zeros(total, count);
        for k in 0..count {
            m[(n + first + k, k)] = crate::linalg::c(1.0, 0.0);
        }
        m
    };
    let join = |real: &Matrix, pad: Matrix| -> Result<SubspaceBasis> {
        let mut m = zeros(total, real.ncols() + pad.ncols());
        m.view_mut((0, 0), real.shape()).copy_from(real);
        m.columns_mut(real.ncols(), pad.ncols()).copy_from(&pad);
        SubspaceBasis::new(m)
    };
    let u1 = join(&p.u1, pad_cols(0, r.to_u1))?;
    let u3 = join(&p.u3, pad_cols(r.to_u1 + r.to_u2, r.to_u3))?;
    let real_outer = SubspaceBasis::concat(&[&SubspaceBasis::new(p.u1.clone())?, &SubspaceBasis::new(p.u3.clone())?])?;
    let u2 = join(real_outer.complement().matrix(), pad_cols(r.to_u1, r.to_u2))?;
    let decomposition = TripleDecomposition::new(u1, u2, u3, [PartLabel::Kernel, PartLabel::Middle, PartLabel::Cokernel])?;

    let padded: Vec<Matrix> = ts.iter().map(|t| pad_with_zero(t, r.total)).collect();
    let mut kernel_residual = 0.0f64;
    let mut cokernel_residual = 0.0f64;
    let mut upper_right = 0.0f64;
    let blocks = padded
        .iter()
        .map(|t| {
            let [u1, u2, u3] = [0, 1, 2].map(|i| decomposition.part(i).matrix());
            kernel_residual = kernel_residual.max(norm2(&(t * u1)));
            cokernel_residual = cokernel_residual.max(norm2(&(u3.adjoint() * t)));
            upper_right = upper_right.max(norm2(&(u1.adjoint() * t * u3)));
            NilBlocks { a: u1.adjoint() * t * u2, c: u2.adjoint() * t * u2, d: u2.adjoint() * t * u3 }
        })
        .collect();
    debug_assert_eq!(p.d, decomposition.dims()[0]);
    Ok(NilDecomposition { decomposition, padding: r, padded, blocks, kernel_residual, cokernel_residual, upper_right })
}

/// Least `k` with `‖X^k‖_F ≤ 1e-12·(1 + ‖X‖₂)^k`, if one exists up to the
/// dimension.
pub fn nilpotency_index(x: &Matrix) -> Option<usize> {
    let n = x.nrows();
    if n == 0 {
        return Some(0);
    }
    let s = 1.0 + norm2(x);
    let mut power = identity(n);
    for k in 1..=n {
        power = &power * x;
        if fro(&power) <= 1e-12 * s.powi(k as i32) {
            return Some(k);
        }
    }
    None
}

/// `‖X³‖_F / (1 + ‖X‖₂)³`.
pub fn cube_ratio(x: &Matrix) -> f64 {
    fro(&(x * x * x)) / (1.0 + norm2(x)).powi(3)
}

/// `‖product − target‖_F / ‖target‖_F`, or the absolute value when the
/// target is zero.
pub fn relative_residual(product: &Matrix, target: &Matrix) -> f64 {
    let diff = fro(&(product - target));
    let t = fro(target);
    if t > 0.0 {
        diff / t
    } else {
        diff
    }
}

fn conj(w: &Matrix, x: &Matrix) -> Matrix {
    w * x * w.adjoint()
}

#[derive(Clone, Debug)]
pub struct TwoNilpotents {
    pub decomposition: NilDecomposition,
    /// Factors in the padded coordinates.
    pub m: Matrix,
    pub n: Matrix,
    pub indices: [Option<usize>; 2],
    pub cube_ratios: [f64; 2],
    /// `‖MN − T_pad‖_F / ‖T‖_F`.
    pub residual: f64,
}

impl TwoNilpotents {
    pub fn is_valid(&self) -> bool {
        self.residual <= 1e-10
            && self.cube_ratios.iter().all(|r| *r <= 1e-12)
            && self.indices.iter().all(|i| i.is_some_and(|k| k <= 3))
    }
}

/// `T ⊕ 0 = M·N` with `M³ = N³ = 0`.
pub fn factor_two_nilpotents(t: &Matrix, opts: &NilOptions) -> Result<TwoNilpotents> {
    let dec = nil_decomposition(t, opts)?;
    let d = dec.part_dim();
    let (z, id) = (zeros(d, d), identity(d));
    let b = &dec.blocks[0];
    let m_blk = assemble(&[
        vec![z.clone(), z.clone(), b.a.clone()],
        vec![id.clone(), z.clone(), b.c.clone()],
        vec![z.clone(), z.clone(), z.clone()],
    ]);
    let n_blk = assemble(&[
        vec![z.clone(), z.clone(), b.d.clone()],
        vec![z.clone(), z.clone(), z.clone()],
        vec![z.clone(), id, z],
    ]);
    let w = dec.unitary();
    let m = conj(&w, &m_blk);
    let n = conj(&w, &n_blk);
    let residual = relative_residual(&(&m * &n), &dec.padded[0]);
    Ok(TwoNilpotents {
        indices: [nilpotency_index(&m), nilpotency_index(&n)],
        cube_ratios: [cube_ratio(&m), cube_ratio(&n)],
        residual,
        m,
        n,
        decomposition: dec,
    })
}

#[derive(Clone, Debug)]
pub struct NilSandwich {
    pub decomposition: NilDecomposition,
    pub n: Matrix,
    pub inner: Vec<Matrix>,
    pub index: Option<usize>,
    pub inner_indices: Vec<Option<usize>>,
    /// `N` first, then each `N_i`.
    pub cube_ratios: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl NilSandwich {
    pub fn is_valid(&self) -> bool {
        self.residuals.iter().all(|r| *r <= 1e-10) && self.cube_ratios.iter().all(|r| *r <= 1e-12)
    }
}

/// `T_i ⊕ 0 = N·N_i·N` with one shared `N`.
pub fn common_nilpotent_sandwich(ts: &[Matrix], opts: &NilOptions) -> Result<NilSandwich> {
    let dec = joint_nil_decomposition(ts, opts)?;
    let d = dec.part_dim();
    let (z, id) = (zeros(d, d), identity(d));
    let w = dec.unitary();
    let n = conj(
        &w,
        &assemble(&[
            vec![z.clone(), id.clone(), z.clone()],
            vec![z.clone(), z.clone(), id],
            vec![z.clone(), z.clone(), z.clone()],
        ]),
    );
    let inner: Vec<Matrix> = dec
        .blocks
        .iter()
        .map(|b| {
            conj(
                &w,
                &assemble(&[
                    vec![z.clone(), z.clone(), z.clone()],
                    vec![b.a.clone(), z.clone(), z.clone()],
                    vec![b.c.clone(), b.d.clone(), z.clone()],
                ]),
            )
        })
        .collect();
    let residuals = inner.iter().zip(&dec.padded).map(|(ni, t)| relative_residual(&(&n * ni * &n), t)).collect();
    let mut cube_ratios = vec![cube_ratio(&n)];
    cube_ratios.extend(inner.iter().map(cube_ratio));
    Ok(NilSandwich {
        index: nilpotency_index(&n),
        inner_indices: inner.iter().map(nilpotency_index).collect(),
        cube_ratios,
        residuals,
        n,
        inner,
        decomposition: dec,
    })
}

#[derive(Clone, Debug)]
pub struct NilTwoSided {
    pub decomposition: NilDecomposition,
    pub n1: Matrix,
    pub n2: Matrix,
    pub inner: Vec<Matrix>,
    pub indices: [Option<usize>; 2],
    /// For `N1` and `N2`.
    pub cube_ratios: [f64; 2],
    /// Cube ratios of `N1·S_i` and `S_i·N2`.
    pub product_cube_ratios: Vec<[f64; 2]>,
    pub residuals: Vec<f64>,
}

impl NilTwoSided {
    pub fn is_valid(&self) -> bool {
        self.residuals.iter().all(|r| *r <= 1e-10)
            && self.cube_ratios.iter().all(|r| *r <= 1e-12)
            && self.product_cube_ratios.iter().flatten().all(|r| *r <= 1e-12)
    }
}

/// `T_i ⊕ 0 = N1·S_i·N2` with `N1·S_i` and `S_i·N2` nilpotent as well.
pub fn common_nilpotent_two_sided(ts: &[Matrix], opts: &NilOptions) -> Result<NilTwoSided> {
    let dec = joint_nil_decomposition(ts, opts)?;
    let d = dec.part_dim();
    let (z, id) = (zeros(d, d), identity(d));
    let w = dec.unitary();
    let n1 = conj(
        &w,
        &assemble(&[
            vec![z.clone(), z.clone(), id.clone()],
            vec![id.clone(), z.clone(), z.clone()],
            vec![z.clone(), z.clone(), z.clone()],
        ]),
    );
    let n2 = conj(
        &w,
        &assemble(&[
            vec![z.clone(), z.clone(), id.clone()],
            vec![z.clone(), z.clone(), z.clone()],
            vec![z.clone(), id, z.clone()],
        ]),
    );
    let inner: Vec<Matrix> = dec
        .blocks
        .iter()
        .map(|b| {
            conj(
                &w,
                &assemble(&[
                    vec![b.d.clone(), z.clone(), b.c.clone()],
                    vec![z.clone(), z.clone(), z.clone()],
                    vec![z.clone(), z.clone(), b.a.clone()],
                ]),
            )
        })
        .collect();
    let residuals = inner.iter().zip(&dec.padded).map(|(s, t)| relative_residual(&(&n1 * s * &n2), t)).collect();
    let product_cube_ratios = inner.iter().map(|s| [cube_ratio(&(&n1 * s)), cube_ratio(&(s * &n2))]).collect();
    Ok(NilTwoSided {
        indices: [nilpotency_index(&n1), nilpotency_index(&n2)],
        cube_ratios: [cube_ratio(&n1), cube_ratio(&n2)],
        product_cube_ratios,
        residuals,
        n1,
        n2,
        inner,
        decomposition: dec,
    })
}

/// Kernel and cokernel sizes at truncation scale. This is a heuristic for
/// the finite construction only; it does not decide anything about the
/// operator the matrix stands in for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecessityReport {
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    pub feasible_without_padding: bool,
    pub padding_needed: usize,
    pub note: String,
}

pub fn check_nilpotent_product_necessity(t: &Matrix, tol: f64) -> Result<NecessityReport> {
    let p = plan(std::slice::from_ref(t), tol)?;
    Ok(NecessityReport {
        kernel_dim: p.kernel_dim,
        cokernel_dim: p.cokernel_dim,
        feasible_without_padding: p.record.total == 0,
        padding_needed: p.record.total,
        note: "truncation heuristic: reports whether the finite construction balances, not a property of the underlying operator".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(r, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn singular(n: usize, k: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random(n, n - k, &mut rng) * random(n - k, n, &mut rng)
    }

    #[test]
    fn zero_splits_evenly() {
        let dec = nil_decomposition(&zeros(6, 6), &NilOptions::default()).unwrap();
        assert_eq!(dec.decomposition.dims(), [2, 2, 2]);
        assert_eq!(dec.padding.total, 0);
        let b = &dec.blocks[0];
        assert_eq!(fro(&b.a) + fro(&b.c) + fro(&b.d), 0.0);
        let f = factor_two_nilpotents(&zeros(6, 6), &NilOptions::default()).unwrap();
        assert_eq!(f.residual, 0.0);
    }

    #[test]
    fn rank_one_with_upper_right_block() {
        let mut t = zeros(3, 3);
        t[(0, 2)] = c(1.0, 0.0);
        let dec = nil_decomposition(&t, &NilOptions::default()).unwrap();
        assert!(dec.kernel_residual < 1e-14 && dec.cokernel_residual < 1e-14 && dec.upper_right < 1e-14);
        let f = factor_two_nilpotents(&t, &NilOptions::default()).unwrap();
        assert!(f.is_valid(), "{f:?}");
    }

    #[test]
    fn invertible_needs_padding() {
        let t = identity(4);
        assert!(matches!(nil_decomposition(&t, &NilOptions::no_padding()), Err(Error::KernelEmpty)));
        let (padded, rec) = pad_for_balance(&t, &NilOptions::default()).unwrap();
        assert_eq!(rec.total, 8);
        assert_eq!(padded.nrows(), 12);
        assert_eq!((rec.to_u1, rec.to_u2, rec.to_u3), (4, 0, 4));
        let opts = NilOptions { budget: Some(3), ..Default::default() };
        assert!(matches!(pad_for_balance(&t, &opts), Err(Error::BudgetExceeded { needed: 8, budget: 3 })));
        assert!(matches!(nil_decomposition(&t, &opts), Err(Error::Infeasible(_))));
        let f = factor_two_nilpotents(&t, &NilOptions::default()).unwrap();
        assert!(f.is_valid());
    }

    #[test]
    fn padding_matches_integer_program() {
        // generic kernel of dim k: U1 takes it all, U3 meets it trivially,
        // so the middle keeps n - k and sets the part size
        for (n, k) in [(12, 5), (9, 3), (30, 2)] {
            let t = singular(n, k, n as u64);
            let (_, rec) = pad_for_balance(&t, &NilOptions::default()).unwrap();
            let d = (n - k).max(n.div_ceil(3));
            assert_eq!(rec.total, 3 * d - n, "n={n} k={k}");
        }
    }

    #[test]
    fn random_singular_factors() {
        for seed in 0..20 {
            let n = 6 + (seed as usize * 7) % 30;
            let k = 1 + seed as usize % 5;
            let t = singular(n, k, seed);
            let f = factor_two_nilpotents(&t, &NilOptions::default()).unwrap();
            assert!(f.is_valid(), "seed {seed}: {} {:?} {:?}", f.residual, f.cube_ratios, f.indices);
        }
    }

    fn joint_family(d: usize, ops: usize, seed: u64) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = crate::linalg::svd(&random(3 * d, 3 * d, &mut rng)).unwrap();
        let w = q.left.into_matrix() * q.right.into_matrix().adjoint();
        (0..ops)
            .map(|_| {
                let z = zeros(d, d);
                let blk = assemble(&[
                    vec![z.clone(), random(d, d, &mut rng), z.clone()],
                    vec![z.clone(), random(d, d, &mut rng), random(d, d, &mut rng)],
                    vec![z.clone(), z.clone(), z.clone()],
                ]);
                conj(&w, &blk)
            })
            .collect()
    }

    #[test]
    fn sandwich_and_two_sided() {
        let z = vec![zeros(9, 9); 2];
        let s = common_nilpotent_sandwich(&z, &NilOptions::default()).unwrap();
        assert!(s.inner.iter().all(|m| fro(m) == 0.0));
        let ts = joint_family(4, 2, 3);
        let s = common_nilpotent_sandwich(&ts, &NilOptions::default()).unwrap();
        assert_eq!(s.decomposition.padding.total, 0);
        assert!(s.is_valid(), "{:?}", s.residuals);
        let n = s.decomposition.part_dim();
        assert_eq!(n, 4);
        let two = common_nilpotent_two_sided(&ts, &NilOptions::default()).unwrap();
        assert!(two.is_valid(), "{:?} {:?}", two.residuals, two.product_cube_ratios);
    }

    #[test]
    fn necessity_report() {
        let r = check_nilpotent_product_necessity(&zeros(3, 3), DEFAULT_NIL_TOL).unwrap();
        assert!(r.feasible_without_padding);
        let r = check_nilpotent_product_necessity(&identity(3), DEFAULT_NIL_TOL).unwrap();
        assert!(!r.feasible_without_padding);
        assert_eq!(r.kernel_dim, 0);
        let r = check_nilpotent_product_necessity(&singular(10, 3, 1), DEFAULT_NIL_TOL).unwrap();
        assert_eq!((r.kernel_dim, r.cokernel_dim), (3, 3));
    }
}
