//! Almost-null sequences, triple decompositions and the canonical
//! `[[0, A, 0], [K, C, D], [0, L, 0]]` form with small corners `K`, `L`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    assemble, fro, identity, norm2, psd_sqrt, range_basis, smallest_singular_pair, svd, svd_full_right,
    zeros, Matrix, SubspaceBasis,
};

/// What a part of a [`TripleDecomposition`] is known to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartLabel {
    /// `T·U = 0`.
    Kernel,
    /// `‖T·u‖` is small for every basis vector.
    AlmostKernel,
    Middle,
    /// `U*·T` is small for every basis vector.
    AlmostCokernel,
    /// `U*·T = 0`.
    Cokernel,
}

/// Orthogonal splitting `U1 ⊕ U2 ⊕ U3` of the ambient space.
#[derive(Clone, Debug)]
pub struct TripleDecomposition {
    parts: [SubspaceBasis; 3],
    labels: [PartLabel; 3],
}

impl TripleDecomposition {
    pub fn new(u1: SubspaceBasis, u2: SubspaceBasis, u3: SubspaceBasis, labels: [PartLabel; 3]) -> Result<Self> {
        let n = u1.ambient_dim();
        if u2.ambient_dim() != n || u3.ambient_dim() != n {
            return Err(Error::ShapeMismatch("parts live in different spaces".into()));
        }
        if u1.dim() + u2.dim() + u3.dim() != n {
            return Err(Error::ShapeMismatch(format!(
                "part dims {} + {} + {} do not add up to {n}",
                u1.dim(),
                u2.dim(),
                u3.dim()
            )));
        }
        SubspaceBasis::concat(&[&u1, &u2, &u3])?;
        Ok(TripleDecomposition { parts: [u1, u2, u3], labels })
    }

    /// Takes the outer parts and fills the middle with their joint complement.
    pub fn from_outer(u1: SubspaceBasis, u3: SubspaceBasis, labels: [PartLabel; 3]) -> Result<Self> {
        let outer = SubspaceBasis::concat(&[&u1, &u3])?;
        TripleDecomposition::new(u1, outer.complement(), u3, labels)
    }

    /// Part `i`, counted from zero.
    pub fn part(&self, i: usize) -> &SubspaceBasis {
        &self.parts[i]
    }

    pub fn labels(&self) -> [PartLabel; 3] {
        self.labels
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.parts[0].dim(), self.parts[1].dim(), self.parts[2].dim()]
    }

    pub fn ambient_dim(&self) -> usize {
        self.parts[0].ambient_dim()
    }

    /// The unitary `[U1 U2 U3]`.
    pub fn unitary(&self) -> Matrix {
        SubspaceBasis::concat(&[&self.parts[0], &self.parts[1], &self.parts[2]])
            .expect("parts are orthogonal")
            .into_matrix()
    }

    /// `U_i*·T·U_j`.
    pub fn block(&self, t: &Matrix, i: usize, j: usize) -> Matrix {
        self.parts[i].matrix().adjoint() * t * self.parts[j].matrix()
    }

    pub fn blocks(&self, t: &Matrix) -> [[Matrix; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.block(t, i, j)))
    }

    /// Norms of the blocks that are small by construction:
    /// `(1,1), (2,1), (3,1), (3,2), (3,3)`.
    pub fn corner_norms(&self, t: &Matrix) -> [f64; 5] {
        [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)].map(|(i, j)| norm2(&self.block(t, i, j)))
    }

    /// `(U3, U2, U1)`.
    pub fn swapped(&self) -> TripleDecomposition {
        let [a, b, c] = self.parts.clone();
        let [la, lb, lc] = self.labels;
        TripleDecomposition { parts: [c, b, a], labels: [lc, lb, la] }
    }

    /// The finite stand-in for an infinite-dimensional middle part.
    pub fn middle_dominant(&self) -> bool {
        let [a, b, c] = self.dims();
        b >= a + c
    }

    /// Checks exact kernel and cokernel labels against `t`.
    pub fn satisfies_labels(&self, t: &Matrix, tol: f64) -> bool {
        self.labels.iter().zip(&self.parts).all(|(label, u)| match label {
            PartLabel::Kernel => u.is_empty() || norm2(&(t * u.matrix())) <= tol,
            PartLabel::Cokernel => u.is_empty() || norm2(&(u.matrix().adjoint() * t)) <= tol,
            _ => true,
        })
    }
}

/// Orthonormal `f_1, g_1, f_2, g_2, …` with small `‖R f_n‖` and `‖L g_n‖`.
#[derive(Clone, Debug)]
pub struct AlmostNullSequence {
    pub f: SubspaceBasis,
    pub g: SubspaceBasis,
    pub f_residuals: Vec<f64>,
    pub g_residuals: Vec<f64>,
    pub eps: Vec<f64>,
}

impl AlmostNullSequence {
    /// `√(Σ_{m ≥ j} r_m²)` for each `j`; bounds the `j`-th singular value of
    /// the operator applied to the trailing vectors.
    pub fn tail_bounds(residuals: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = residuals
            .iter()
            .rev()
            .map(|r| {
                acc += r * r;
                acc.sqrt()
            })
            .collect();
        out.reverse();
        out
    }
}

/// Greedy interleaved almost-null sequence for `T` and `T*`.
pub fn interleaved_almost_null(t: &Matrix, count: usize, eps: Option<&[f64]>) -> Result<AlmostNullSequence> {
    square(t)?;
    almost_null_pair(t, &t.adjoint(), count, eps)
}

/// Each `f_n` minimizes `‖right·x‖` and each `g_n` minimizes `‖left·x‖`
/// over unit vectors orthogonal to everything chosen before.
///
/// A step fails unless its minimum is strictly below `eps_n` (or at
/// round-off level), so an isometry is rejected at the first step.
pub fn almost_null_pair(
    right: &Matrix,
    left: &Matrix,
    count: usize,
    eps: Option<&[f64]>,
) -> Result<AlmostNullSequence> {
    let n = right.ncols();
    if left.shape() != (n, n) || right.shape() != (n, n) {
        return Err(Error::ShapeMismatch("almost-null search needs square operators".into()));
    }
    if count > 0 && 2 * count >= n {
        return Err(Error::SpaceTooSmall { dim: n, needed: 2 * count + 1 });
    }
    let scale = norm2(right).max(norm2(left));
    let eps: Vec<f64> = match eps {
        Some(e) if e.len() < count => {
            return Err(Error::ShapeMismatch(format!("eps schedule has {} of {count} entries", e.len())))
        }
        Some(e) => e[..count].to_vec(),
        None => (1..=count).map(|j| scale / j as f64).collect(),
    };
    let floor = 1e-12 * scale;
    let mut chosen: Vec<Matrix> = Vec::with_capacity(2 * count);
    let (mut fs, mut gs) = (Vec::new(), Vec::new());
    let (mut fr, mut gr) = (Vec::new(), Vec::new());
    for step in 1..=count {
        let e = eps[step - 1];
        for (op, vecs, res) in [(right, &mut fs, &mut fr), (left, &mut gs, &mut gr)] {
            let constraint = basis_of(n, &chosen);
            let (value, x) = smallest_singular_pair(op, &constraint)?;
            if !(value < e * (1.0 - 1e-9) || value <= floor) {
                return Err(Error::SemiFredholmObstruction { step, value, eps: e });
            }
            chosen.push(x.clone());
            vecs.push(x);
            res.push(value);
        }
    }
    Ok(AlmostNullSequence {
        f: basis_of(n, &fs),
        g: basis_of(n, &gs),
        f_residuals: fr,
        g_residuals: gr,
        eps,
    })
}

fn basis_of(n: usize, cols: &[Matrix]) -> SubspaceBasis {
    let mut m = zeros(n, cols.len());
    for (j, v) in cols.iter().enumerate() {
        m.column_mut(j).copy_from(&v.column(0));
    }
    SubspaceBasis::from_orthonormal(m)
}

fn square(t: &Matrix) -> Result<()> {
    if t.nrows() != t.ncols() {
        return Err(Error::ShapeMismatch(format!("expected a square matrix, got {}x{}", t.nrows(), t.ncols())));
    }
    Ok(())
}

/// `U1 = span f`, `U3 = span g`, `U2` the rest.
pub fn triple_decomposition(t: &Matrix, count: usize) -> Result<TripleDecomposition> {
    square(t)?;
    if t.nrows() < 3 * count {
        return Err(Error::SpaceTooSmall { dim: t.nrows(), needed: 3 * count });
    }
    let seq = interleaved_almost_null(t, count, None)?;
    from_sequence(&seq)
}

fn from_sequence(seq: &AlmostNullSequence) -> Result<TripleDecomposition> {
    TripleDecomposition::from_outer(
        seq.f.clone(),
        seq.g.clone(),
        [PartLabel::AlmostKernel, PartLabel::Middle, PartLabel::AlmostCokernel],
    )
}

/// How [`reduce_upper_right`] removes the `(1,3)` block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionPolicy {
    /// Move the range of `B` out of `U1`, keep all of `U3`.
    #[default]
    ShrinkUpper,
    /// Keep roughly a `1/(n+1)` share of both outer parts, where `n` is the
    /// number of operators.
    Balanced,
}

/// Rank cutoff for the `(1,3)` block.
pub fn reduction_tol(ts: &[Matrix]) -> f64 {
    1e-12 * (1.0 + ts.iter().map(norm2).fold(0.0, f64::max))
}

pub fn zero_upper_right(t: &Matrix, dec: &TripleDecomposition) -> Result<TripleDecomposition> {
    reduce_upper_right(std::slice::from_ref(t), dec, ReductionPolicy::ShrinkUpper)
}

pub fn multi_zero_upper_right(ts: &[Matrix], dec: &TripleDecomposition) -> Result<TripleDecomposition> {
    reduce_upper_right(ts, dec, ReductionPolicy::ShrinkUpper)
}

/// Shrinks the outer parts until `U1*·T_i·U3 = 0` for every operator.
/// Removed directions join the middle part.
pub fn reduce_upper_right(
    ts: &[Matrix],
    dec: &TripleDecomposition,
    policy: ReductionPolicy,
) -> Result<TripleDecomposition> {
    for t in ts {
        if t.shape() != (dec.ambient_dim(), dec.ambient_dim()) {
            return Err(Error::ShapeMismatch("operator does not act on the decomposed space".into()));
        }
    }
    let tol = reduction_tol(ts);
    match policy {
        ReductionPolicy::ShrinkUpper => {
            let mut dec = dec.clone();
            for t in ts {
                dec = shrink_upper(t, &dec, tol)?;
            }
            Ok(dec)
        }
        ReductionPolicy::Balanced => balanced(ts, dec, tol),
    }
}

fn shrink_upper(t: &Matrix, dec: &TripleDecomposition, tol: f64) -> Result<TripleDecomposition> {
    let [k1, _, k3] = dec.dims();
    if k1 == 0 || k3 == 0 {
        return Ok(dec.clone());
    }
    let s = svd(&dec.block(t, 0, 2))?;
    let r = s.rank(tol);
    if r == 0 {
        return Ok(dec.clone());
    }
    if r >= k1 {
        return Err(Error::DegenerateReduction { rank: r, dim: k1 });
    }
    let range = s.left.columns(0, r);
    let m2 = dec.parts[0].combine(range.matrix());
    let m1 = dec.parts[0].combine(range.complement().matrix());
    let middle = SubspaceBasis::concat(&[&m2, &dec.parts[1]])?;
    TripleDecomposition::new(m1, middle, dec.parts[2].clone(), dec.labels)
}

fn balanced(ts: &[Matrix], dec: &TripleDecomposition, tol: f64) -> Result<TripleDecomposition> {
    let [k1, _, k3] = dec.dims();
    let bs: Vec<Matrix> = ts.iter().map(|t| dec.block(t, 0, 2)).collect();
    if k1 == 0 || k3 == 0 || bs.iter().all(|b| norm2(b) <= tol) {
        return Ok(dec.clone());
    }
    let r = (k1 / (ts.len() + 1)).min(k3);
    if r == 0 {
        return Err(Error::DegenerateReduction { rank: k3, dim: k1 });
    }
    let mut stacked = zeros(k1 * bs.len(), k3);
    for (i, b) in bs.iter().enumerate() {
        stacked.rows_mut(i * k1, k1).copy_from(b);
    }
    // directions of U3 that the B_i move least
    let (_, right) = svd_full_right(&stacked)?;
    let y = right.columns(k3 - r, r);
    let mut images = zeros(k1, r * bs.len());
    for (i, b) in bs.iter().enumerate() {
        images.columns_mut(i * r, r).copy_from(&(b * y.matrix()));
    }
    let hit = range_basis(&images, tol)?;
    let u1 = &dec.parts[0];
    let u3 = &dec.parts[2];
    let m1 = u1.combine(hit.complement().matrix());
    let m2 = u1.combine(hit.matrix());
    let n1 = u3.combine(y.complement().matrix());
    let n2 = u3.combine(y.matrix());
    let middle = SubspaceBasis::concat(&[&m2, &dec.parts[1], &n1])?;
    TripleDecomposition::new(m1, middle, n2, dec.labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalOptions {
    /// Number of almost-null pairs to draw.
    pub count: usize,
    /// Defaults to `‖T‖/n` at step `n`.
    pub eps: Option<Vec<f64>>,
    /// Pad the outer parts with zero coordinates up to the middle dimension.
    #[serde(default)]
    pub balance: bool,
}

impl Default for CanonicalOptions {
    fn default() -> Self {
        CanonicalOptions { count: 4, eps: None, balance: false }
    }
}

/// Blocks of one operator in canonical position. `A`, `B` and `D` vanish
/// for the augmented construction but are kept explicit.
#[derive(Clone, Debug)]
pub struct CanonicalBlocks {
    pub a: Matrix,
    pub b: Matrix,
    pub k: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub l: Matrix,
    /// The `(3,1)` block before it is dropped; zero up to the reduction tolerance.
    pub corner: Matrix,
}

impl CanonicalBlocks {
    /// `(dim first, dim middle, dim third)`.
    pub fn part_dims(&self) -> [usize; 3] {
        [self.a.nrows(), self.c.nrows(), self.l.nrows()]
    }

    /// The 3×3 canonical matrix.
    pub fn assemble(&self) -> Matrix {
        let [p, _, q] = self.part_dims();
        assemble(&[
            vec![zeros(p, p), self.a.clone(), self.b.clone()],
            vec![self.k.clone(), self.c.clone(), self.d.clone()],
            vec![zeros(q, p), self.l.clone(), zeros(q, q)],
        ])
    }
}

/// Singular values of the small corners against their a-priori bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub k_singular_values: Vec<f64>,
    pub l_singular_values: Vec<f64>,
    pub k_bounds: Vec<f64>,
    pub l_bounds: Vec<f64>,
    pub eps_sum: f64,
    pub within_bounds: bool,
}

#[derive(Clone, Debug)]
pub struct CanonicalForm {
    pub decomposition: TripleDecomposition,
    pub blocks: CanonicalBlocks,
    /// `V`, with `V·(T ⊕ 0)·V⁻¹` canonical.
    pub basis_change: Matrix,
    pub inverse: Matrix,
    pub padding: usize,
    pub compactness: CompactnessReport,
    /// `‖V·T_pad·V⁻¹ − canonical‖_F / (1 + ‖T‖_F)`.
    pub residual: f64,
    pub sequence: AlmostNullSequence,
}

#[derive(Clone, Debug)]
pub struct JointCanonicalForm {
    pub decomposition: TripleDecomposition,
    pub basis_change: Matrix,
    pub inverse: Matrix,
    pub padding: usize,
    pub forms: Vec<CanonicalBlocks>,
    pub compactness: Vec<CompactnessReport>,
    pub residuals: Vec<f64>,
    pub sequence: AlmostNullSequence,
}

/// Similarity of `T ⊕ 0` to the canonical form.
pub fn canonical_form(t: &Matrix, opts: &CanonicalOptions) -> Result<CanonicalForm> {
    let j = joint_canonical_form(std::slice::from_ref(t), opts)?;
    let JointCanonicalForm { decomposition, basis_change, inverse, padding, forms, compactness, residuals, sequence } = j;
    Ok(CanonicalForm {
        decomposition,
        blocks: forms.into_iter().next().expect("one form"),
        basis_change,
        inverse,
        padding,
        compactness: compactness.into_iter().next().expect("one report"),
        residual: residuals[0],
        sequence,
    })
}

/// One similarity `V` bringing every `T_i ⊕ 0` to canonical form.
///
/// The almost-null vectors come from `√(Σ T_i*T_i)` and `√(Σ T_iT_i*)`; a
/// single operator uses `T` and `T*` directly.
pub fn joint_canonical_form(ts: &[Matrix], opts: &CanonicalOptions) -> Result<JointCanonicalForm> {
    let n = ts.first().map(|t| t.nrows()).ok_or_else(|| Error::ShapeMismatch("no operators".into()))?;
    for t in ts {
        square(t)?;
        if t.nrows() != n {
            return Err(Error::ShapeMismatch("operators act on different spaces".into()));
        }
    }
    if n < 3 * opts.count {
        return Err(Error::SpaceTooSmall { dim: n, needed: 3 * opts.count });
    }
    let seq = if ts.len() == 1 {
        almost_null_pair(&ts[0], &ts[0].adjoint(), opts.count, opts.eps.as_deref())?
    } else {
        let mut right = zeros(n, n);
        let mut left = zeros(n, n);
        for t in ts {
            right += t.adjoint() * t;
            left += t * t.adjoint();
        }
        almost_null_pair(&psd_sqrt(&right), &psd_sqrt(&left), opts.count, opts.eps.as_deref())?
    };
    let dec = from_sequence(&seq)?;
    // the augmentation leaves U3*·T·U1 as the only stray block
    let dec = reduce_upper_right(ts, &dec.swapped(), ReductionPolicy::Balanced)?.swapped();

    let [k1, _, k3] = dec.dims();
    let (z1, z3) = if opts.balance { (n - k1, n - k3) } else { (0, 0) };
    let u = dec.unitary();
    let u1 = dec.part(0).matrix();
    let u3 = dec.part(2).matrix();
    let (v, inverse) = augmentation(&u, u1, u3, [k1, k3, z1, z3]);
    let (p, q) = (k1 + z1, k3 + z3);

    let tail_f = AlmostNullSequence::tail_bounds(&seq.f_residuals);
    let tail_g = AlmostNullSequence::tail_bounds(&seq.g_residuals);
    let eps_sum: f64 = seq.eps.iter().sum();

    let per_op: Vec<(CanonicalBlocks, CompactnessReport, f64)> = ts
        .par_iter()
        .map(|t| {
            let tu1 = t * u1;
            let tu = t * &u;
            let mut k = zeros(n, p);
            k.columns_mut(0, k1).copy_from(&(u.adjoint() * &tu1));
            let mut l = zeros(q, n);
            l.rows_mut(0, k3).copy_from(&(-(u3.adjoint() * &tu)));
            let mut corner = zeros(q, p);
            corner.view_mut((0, 0), (k3, k1)).copy_from(&(-(u3.adjoint() * &tu1)));
            let blocks = CanonicalBlocks {
                a: zeros(p, n),
                b: zeros(p, q),
                k,
                c: u.adjoint() * &tu,
                d: zeros(n, q),
                l,
                corner,
            };
            let report = compactness(&blocks, &tail_f, &tail_g, eps_sum);
            let padded = crate::linalg::pad_with_zero(t, p + q);
            let similar = &v * padded * &inverse;
            let residual = fro(&(similar - blocks.assemble())) / (1.0 + fro(t));
            (blocks, report, residual)
        })
        .collect();

    let mut forms = Vec::new();
    let mut reports = Vec::new();
    let mut residuals = Vec::new();
    for (b, r, e) in per_op {
        forms.push(b);
        reports.push(r);
        residuals.push(e);
    }
    Ok(JointCanonicalForm {
        decomposition: dec,
        basis_change: v,
        inverse,
        padding: p + q,
        forms,
        compactness: reports,
        residuals,
        sequence: seq,
    })
}

/// `V` and `V⁻¹` for the augmented space
/// `orig ⊕ E1 ⊕ E3 ⊕ Z1 ⊕ Z3`, ordered as first, middle, third part.
///
/// The first part is `{u + e : u ∈ U1}` followed by `Z1`, the middle is the
/// original space with `E3` attached to `U3`, and the third part is `E3`
/// followed by `Z3`.
fn augmentation(u: &Matrix, u1: &Matrix, u3: &Matrix, [k1, k3, z1, z3]: [usize; 4]) -> (Matrix, Matrix) {
    let n = u.nrows();
    let total = n + k1 + k3 + z1 + z3;
    let (e1, e3, zz1, zz3) = (n, n + k1, n + k1 + k3, n + k1 + k3 + z1);
    let (f, g) = (k1 + z1, k1 + z1 + n);
    let mut v = zeros(total, total);
    v.view_mut((0, e1), (k1, k1)).copy_from(&identity(k1));
    v.view_mut((k1, zz1), (z1, z1)).copy_from(&identity(z1));
    v.view_mut((f, 0), (n, n)).copy_from(&u.adjoint());
    v.view_mut((f, e1), (k1, k1)).copy_from(&(-identity(k1)));
    v.view_mut((g, 0), (k3, n)).copy_from(&(-u3.adjoint()));
    v.view_mut((g, e3), (k3, k3)).copy_from(&identity(k3));
    v.view_mut((g + k3, zz3), (z3, z3)).copy_from(&identity(z3));

    let mut inv = zeros(total, total);
    inv.view_mut((0, 0), (n, k1)).copy_from(u1);
    inv.view_mut((e1, 0), (k1, k1)).copy_from(&identity(k1));
    inv.view_mut((zz1, k1), (z1, z1)).copy_from(&identity(z1));
    inv.view_mut((0, f), (n, n)).copy_from(u);
    inv.view_mut((e3, g - k3), (k3, k3)).copy_from(&identity(k3));
    inv.view_mut((e3, g), (k3, k3)).copy_from(&identity(k3));
    inv.view_mut((zz3, g + k3), (z3, z3)).copy_from(&identity(z3));
    (v, inv)
}

fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    svd(m).map(|s| s.singular_values).unwrap_or_default()
}

fn compactness(b: &CanonicalBlocks, tail_f: &[f64], tail_g: &[f64], eps_sum: f64) -> CompactnessReport {
    let ks = singular_values(&b.k);
    let ls = singular_values(&b.l);
    let ok = |s: &[f64], bound: &[f64]| {
        s.iter().zip(bound).all(|(x, y)| *x <= y * (1.0 + 1e-9) + 1e-13)
    };
    let within_bounds = ok(&ks, tail_f) && ok(&ls, tail_g);
    CompactnessReport {
        k_bounds: tail_f[..ks.len().min(tail_f.len())].to_vec(),
        l_bounds: tail_g[..ls.len().min(tail_g.len())].to_vec(),
        k_singular_values: ks,
        l_singular_values: ls,
        eps_sum,
        within_bounds,
    }
}
