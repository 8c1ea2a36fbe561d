//! Dense complex linear algebra: a one-sided Jacobi SVD, orthonormal
//! subspaces, kernels and the small helpers every construction relies on.
//!
//! The SVD is Hestenes' one-sided Jacobi method. It is slower than a
//! bidiagonal QR but computes small singular values and the products
//! `A v_j` to high relative accuracy on graded matrices, which the weighted
//! shift constructions depend on.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type Matrix = DMatrix<C64>;

/// Default rank/kernel threshold, relative to the spectral norm.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const JACOBI_MAX_SWEEPS: usize = 80;
const ORTHO_TOL: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn zeros(rows: usize, cols: usize) -> Matrix {
    Matrix::zeros(rows, cols)
}

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> Matrix {
    let n = values.len();
    let mut m = zeros(n, n);
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = c(v, 0.0);
    }
    m
}

/// Builds a matrix from real row-major data.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    assert_eq!(data.len(), rows * cols);
    Matrix::from_fn(rows, cols, |i, j| c(data[i * cols + j], 0.0))
}

pub fn ensure_finite(a: &Matrix) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Frobenius norm.
pub fn fro(a: &Matrix) -> f64 {
    a.norm()
}

/// Spectral norm (largest singular value).
pub fn norm2(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    // Bidiagonal QR from nalgebra; only the top singular value is used here.
    let s = a.clone().singular_values();
    s.iter().cloned().fold(0.0, f64::max)
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Orthonormal columns spanning a subspace of `C^ambient`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    vectors: Matrix,
}

impl SubspaceBasis {
    /// Wraps a matrix whose columns are checked to be orthonormal.
    pub fn new(vectors: Matrix) -> Result<Self> {
        let k = vectors.ncols();
        if k > 0 {
            let gram = vectors.adjoint() * &vectors;
            let dev = max_abs(&(gram - identity(k)));
            if dev > ORTHO_TOL {
                return Err(Error::ShapeMismatch(format!(
                    "columns are not orthonormal (deviation {dev:.3e})"
                )));
            }
        }
        Ok(SubspaceBasis { vectors })
    }

    /// Wraps columns the caller already knows to be orthonormal.
    pub(crate) fn from_orthonormal(vectors: Matrix) -> Self {
        debug_assert!({
            let k = vectors.ncols();
            k == 0 || max_abs(&(vectors.adjoint() * &vectors - identity(k))) <= 1e-10
        });
        SubspaceBasis { vectors }
    }

    pub fn empty(ambient: usize) -> Self {
        SubspaceBasis { vectors: zeros(ambient, 0) }
    }

    pub fn full(ambient: usize) -> Self {
        SubspaceBasis { vectors: identity(ambient) }
    }

    /// Span of the listed standard basis vectors, in the given order.
    pub fn standard(ambient: usize, indices: &[usize]) -> Self {
        let mut m = zeros(ambient, indices.len());
        for (col, &i) in indices.iter().enumerate() {
            m[(i, col)] = c(1.0, 0.0);
        }
        SubspaceBasis { vectors: m }
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn matrix(&self) -> &Matrix {
        &self.vectors
    }

    pub fn into_matrix(self) -> Matrix {
        self.vectors
    }

    /// Columns `range` of this basis.
    pub fn columns(&self, start: usize, count: usize) -> SubspaceBasis {
        SubspaceBasis { vectors: self.vectors.columns(start, count).into_owned() }
    }

    /// Vectors `B·x` for orthonormal coefficient columns `x`.
    pub fn combine(&self, coeffs: &Matrix) -> SubspaceBasis {
        SubspaceBasis { vectors: &self.vectors * coeffs }
    }

    /// Concatenation of mutually orthogonal bases.
    pub fn concat(parts: &[&SubspaceBasis]) -> Result<SubspaceBasis> {
        let ambient = parts.first().map(|p| p.ambient_dim()).unwrap_or(0);
        let total: usize = parts.iter().map(|p| p.dim()).sum();
        let mut m = zeros(ambient, total);
        let mut col = 0;
        for p in parts {
            if p.ambient_dim() != ambient {
                return Err(Error::ShapeMismatch("bases live in different spaces".into()));
            }
            m.columns_mut(col, p.dim()).copy_from(&p.vectors);
            col += p.dim();
        }
        SubspaceBasis::new(m)
    }

    /// Embeds into `C^(ambient + extra)` by appending zero coordinates.
    pub fn embed(&self, extra: usize) -> SubspaceBasis {
        let mut m = zeros(self.ambient_dim() + extra, self.dim());
        m.rows_mut(0, self.ambient_dim()).copy_from(&self.vectors);
        SubspaceBasis { vectors: m }
    }

    /// Orthonormal basis of the orthogonal complement.
    ///
    /// Built by pivoted Gram-Schmidt over the standard basis, so the result
    /// is deterministic and prefers low coordinate indices.
    pub fn complement(&self) -> SubspaceBasis {
        let n = self.ambient_dim();
        let target = n - self.dim().min(n);
        let mut cols: Vec<Vec<C64>> = (0..self.dim())
            .map(|j| self.vectors.column(j).iter().cloned().collect())
            .collect();
        // residual[i] = 1 - ||P e_i||^2 for the current span
        let mut residual: Vec<f64> = (0..n)
            .map(|i| 1.0 - cols.iter().map(|v| v[i].norm_sqr()).sum::<f64>())
            .collect();
        let mut out = Vec::with_capacity(target);
        while out.len() < target {
            let best = residual.iter().cloned().fold(f64::MIN, f64::max);
            let pick = residual
                .iter()
                .position(|&r| r >= best * (1.0 - 1e-10))
                .expect("nonempty residual list");
            let mut v = vec![c(0.0, 0.0); n];
            v[pick] = c(1.0, 0.0);
            for _ in 0..2 {
                for q in &cols {
                    let proj: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= proj * qi;
                    }
                }
            }
            let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for vi in v.iter_mut() {
                *vi /= nrm;
            }
            for (r, vi) in residual.iter_mut().zip(&v) {
                *r -= vi.norm_sqr();
            }
            residual[pick] = f64::MIN;
            cols.push(v.clone());
            out.push(v);
        }
        let mut m = zeros(n, target);
        for (j, v) in out.iter().enumerate() {
            for (i, z) in v.iter().enumerate() {
                m[(i, j)] = *z;
            }
        }
        SubspaceBasis { vectors: m }
    }

    /// Orthogonal projector onto the span.
    pub fn projector(&self) -> Matrix {
        &self.vectors * self.vectors.adjoint()
    }

    /// Largest absolute inner product between this basis and `other`.
    pub fn max_overlap(&self, other: &SubspaceBasis) -> f64 {
        if self.is_empty() || other.is_empty() {
            return 0.0;
        }
        max_abs(&(self.vectors.adjoint() * &other.vectors))
    }
}

/// `A = U·diag(σ)·V*` with `σ` non-increasing.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub left: SubspaceBasis,
    pub singular_values: Vec<f64>,
    pub right: SubspaceBasis,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let k = self.singular_values.len();
        let mut us = self.left.matrix().clone();
        for j in 0..k {
            let s = self.singular_values[j];
            us.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        us * self.right.matrix().adjoint()
    }

    /// Number of singular values above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.singular_values.iter().filter(|&&s| s > tol).count()
    }

    pub fn max(&self) -> f64 {
        self.singular_values.first().cloned().unwrap_or(0.0)
    }
}

/// Thin SVD: `min(m, n)` singular triplets.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    ensure_finite(a)?;
    if a.nrows() < a.ncols() {
        let t = jacobi_tall(&a.adjoint())?;
        return Ok(SvdResult { left: t.right, singular_values: t.singular_values, right: t.left });
    }
    jacobi_tall(a)
}

/// Singular values and a complete set of `n` right singular vectors. Rows
/// are padded with zeros when `m < n`, so the trailing values are zero.
pub fn svd_full_right(a: &Matrix) -> Result<(Vec<f64>, SubspaceBasis)> {
    let (m, n) = a.shape();
    let s = if m >= n {
        svd(a)?
    } else {
        let mut padded = zeros(n, n);
        padded.rows_mut(0, m).copy_from(a);
        ensure_finite(&padded)?;
        jacobi_tall(&padded)?
    };
    Ok((s.singular_values, s.right))
}

fn jacobi_tall(a: &Matrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = identity(n);
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                if rotate_pair(w.as_mut_slice(), m, p, q, v.as_mut_slice(), n) {
                    rotated = true;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::ConvergenceFailure { sweeps: JACOBI_MAX_SWEEPS });
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values keep the lower column index first
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = zeros(m, n);
    let mut vv = zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut filled = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        vv.column_mut(dst).copy_from(&v.column(src));
        if s >= f64::MIN_POSITIVE.sqrt() {
            let col = w.column(src) / c(s, 0.0);
            u.column_mut(dst).copy_from(&col);
            filled.push(dst);
        }
    }
    if filled.len() < n {
        // zero singular values: complete U with the complement of the filled columns
        let known = SubspaceBasis::from_orthonormal(u.select_columns(filled.iter()));
        let rest = known.complement();
        let mut r = 0;
        for j in 0..n {
            if !filled.contains(&j) {
                u.column_mut(j).copy_from(&rest.matrix().column(r));
                r += 1;
            }
        }
    }
    Ok(SvdResult {
        left: SubspaceBasis::from_orthonormal(u),
        singular_values: sigma,
        right: SubspaceBasis::from_orthonormal(vv),
    })
}

/// One Hestenes rotation on columns `p < q`. Returns whether it rotated.
fn rotate_pair(w: &mut [C64], m: usize, p: usize, q: usize, v: &mut [C64], n: usize) -> bool {
    let (head, tail) = w.split_at_mut(q * m);
    let cp = &mut head[p * m..(p + 1) * m];
    let cq = &mut tail[..m];
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = c(0.0, 0.0);
    for (x, y) in cp.iter().zip(cq.iter()) {
        alpha += x.norm_sqr();
        beta += y.norm_sqr();
        gamma += x.conj() * y;
    }
    let g = gamma.norm();
    // rounding in the inner product grows like sqrt(m)
    let tol = (m as f64).sqrt().max(4.0) * f64::EPSILON;
    // below the normal range the inner product has no relative accuracy left
    if alpha < f64::MIN_POSITIVE || beta < f64::MIN_POSITIVE || g < f64::MIN_POSITIVE {
        return false;
    }
    if g <= tol * (alpha * beta).sqrt() {
        return false;
    }
    let phase = (gamma / g).conj();
    let phase = phase / phase.norm();
    let zeta = (beta - alpha) / (2.0 * g);
    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
    let t = if zeta == 0.0 { 1.0 } else { t };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    let sn = cs * t;
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * phase;
        let nx = *x * cs - yq * sn;
        let ny = *x * sn + yq * cs;
        *x = nx;
        *y = ny;
    }
    let (vh, vt) = v.split_at_mut(q * n);
    let vp = &mut vh[p * n..(p + 1) * n];
    let vq = &mut vt[..n];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let yq = *y * phase;
        let nx = *x * cs - yq * sn;
        let ny = *x * sn + yq * cs;
        *x = nx;
        *y = ny;
    }
    true
}

/// Right singular vectors with `σ ≤ tol·‖A‖₂`.
pub fn kernel_basis(a: &Matrix, tol: f64) -> Result<SubspaceBasis> {
    let n = a.ncols();
    if n == 0 {
        return Ok(SubspaceBasis::empty(0));
    }
    let (sv, right) = svd_full_right(a)?;
    let cut = tol * sv[0];
    let start = sv.iter().position(|&x| x <= cut).unwrap_or(n);
    Ok(right.columns(start, n - start))
}

/// Kernel of the adjoint.
pub fn cokernel_basis(a: &Matrix, tol: f64) -> Result<SubspaceBasis> {
    kernel_basis(&a.adjoint(), tol)
}

/// Orthonormal basis of the column range, dropping directions with
/// `σ ≤ tol` (absolute).
pub fn range_basis(a: &Matrix, tol: f64) -> Result<SubspaceBasis> {
    if a.ncols() == 0 {
        return Ok(SubspaceBasis::empty(a.nrows()));
    }
    let s = svd(a)?;
    let r = s.rank(tol);
    Ok(s.left.columns(0, r))
}

/// Direct sum `A ⊕ 0_p`.
pub fn pad_with_zero(a: &Matrix, p: usize) -> Matrix {
    let (m, n) = a.shape();
    let mut out = zeros(m + p, n + p);
    out.view_mut((0, 0), (m, n)).copy_from(a);
    out
}

/// Minimizes `‖A x‖` over unit `x` orthogonal to `constraint`.
///
/// Ties among minimal singular values resolve toward the lowest coordinate
/// of the complement basis.
pub fn smallest_singular_pair(a: &Matrix, constraint: &SubspaceBasis) -> Result<(f64, Matrix)> {
    let n = a.ncols();
    if constraint.ambient_dim() != n {
        return Err(Error::ShapeMismatch("constraint lives in a different space".into()));
    }
    if constraint.dim() >= n {
        return Err(Error::EmptyComplement { dim: n });
    }
    let w = constraint.complement();
    let restricted = a * w.matrix();
    let (sv, right) = svd_full_right(&restricted)?;
    let k = sv.len();
    let smin = sv[k - 1];
    let tie = 1e-12 * (1.0 + sv[0]);
    let first = sv.iter().position(|&x| x <= smin + tie).unwrap_or(k - 1);
    let group = right.matrix().columns(first, k - first).into_owned();
    let y = if group.ncols() == 1 {
        group.column(0).into_owned()
    } else {
        let dim = k as f64;
        let mut pick = None;
        for i in 0..k {
            let row = group.row(i);
            let weight: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            if weight >= 0.5 / dim {
                pick = Some((i, row.adjoint()));
                break;
            }
        }
        let (_, coeff) = pick.expect("tied group has a dominant coordinate");
        let y = &group * coeff;
        let nrm = y.norm();
        y / c(nrm, 0.0)
    };
    let x: Matrix = Matrix::from_column_slice(n, 1, (w.matrix() * y).as_slice());
    let value = (a * &x).norm();
    Ok((value, x))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Symmetrizes first and clips negative eigenvalues to zero.
pub fn psd_sqrt(p: &Matrix) -> Matrix {
    let h = (p + p.adjoint()) * c(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut scaled = eig.eigenvectors.clone();
    for j in 0..n {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    scaled * eig.eigenvectors.adjoint()
}

/// Assembles a block matrix from rows of blocks. Row heights come from the
/// first block of each row and column widths from the first row.
pub fn assemble(blocks: &[Vec<Matrix>]) -> Matrix {
    let heights: Vec<usize> = blocks.iter().map(|r| r[0].nrows()).collect();
    let widths: Vec<usize> = blocks[0].iter().map(|b| b.ncols()).collect();
    let mut out = zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (bi, row) in blocks.iter().enumerate() {
        let mut c0 = 0;
        for (bj, b) in row.iter().enumerate() {
            assert_eq!(b.shape(), (heights[bi], widths[bj]), "block ({bi}, {bj}) has the wrong shape");
            out.view_mut((r0, c0), b.shape()).copy_from(b);
            c0 += widths[bj];
        }
        r0 += heights[bi];
    }
    out
}

/// Splits `m` into consecutive diagonal-aligned blocks of the given sizes.
pub fn block(m: &Matrix, sizes: &[usize], i: usize, j: usize) -> Matrix {
    let off = |k: usize| sizes[..k].iter().sum::<usize>();
    m.view((off(i), off(j)), (sizes[i], sizes[j])).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| {
            c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        })
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let s = svd(&identity(2)).unwrap();
        assert_eq!(s.singular_values, vec![1.0, 1.0]);
        let s = svd(&diag(&[3.0, 0.0])).unwrap();
        assert_eq!(s.singular_values, vec![3.0, 0.0]);
        assert_eq!(fro(&(s.reconstruct() - diag(&[3.0, 0.0]))), 0.0);
    }

    #[test]
    fn svd_reconstructs_rectangular() {
        for (m, n, seed) in [(5, 3, 1), (3, 5, 2), (7, 7, 3)] {
            let a = random(m, n, seed);
            let s = svd(&a).unwrap();
            let err = fro(&(s.reconstruct() - &a));
            assert!(err <= 1e-12 * (1.0 + fro(&a)), "{m}x{n}: {err:e}");
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
            SubspaceBasis::new(s.left.matrix().clone()).unwrap();
            SubspaceBasis::new(s.right.matrix().clone()).unwrap();
        }
    }

    #[test]
    fn svd_rejects_nan() {
        let mut a = identity(2);
        a[(1, 0)] = c(f64::NAN, 0.0);
        assert!(matches!(svd(&a), Err(Error::NonFinite { row: 1, col: 0 })));
    }

    #[test]
    fn kernel_of_zero_and_diagonal() {
        assert_eq!(kernel_basis(&zeros(3, 3), DEFAULT_RANK_TOL).unwrap().dim(), 3);
        let k = kernel_basis(&diag(&[1.0, 0.0, 2.0]), 1e-8).unwrap();
        assert_eq!(k.dim(), 1);
        assert!((k.matrix()[(1, 0)].norm() - 1.0).abs() < 1e-14);
        let k = cokernel_basis(&diag(&[1.0, 0.0, 2.0]), 1e-8).unwrap();
        assert_eq!(k.dim(), 1);
        assert!((k.matrix()[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_of_volterra_is_empty() {
        let n = 8;
        let h = 1.0 / n as f64;
        let v = Matrix::from_fn(n, n, |i, j| {
            if j < i {
                c(h, 0.0)
            } else if i == j {
                c(h / 2.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let s = svd(&v).unwrap();
        assert!(*s.singular_values.last().unwrap() > DEFAULT_RANK_TOL * s.max());
        assert!(kernel_basis(&v, DEFAULT_RANK_TOL).unwrap().is_empty());
    }

    #[test]
    fn cokernel_of_rank_two() {
        let a = random(4, 2, 5) * random(2, 4, 6);
        let s = svd(&a).unwrap();
        assert_eq!(s.rank(1e-9 * s.max()), 2);
        assert_eq!(cokernel_basis(&a, DEFAULT_RANK_TOL).unwrap().dim(), 2);
    }

    #[test]
    fn padding_grows_kernels() {
        let a = random(2, 2, 9);
        assert_eq!(pad_with_zero(&a, 0), a);
        let p = pad_with_zero(&identity(2), 1);
        assert_eq!(kernel_basis(&p, DEFAULT_RANK_TOL).unwrap().dim(), 1);
        let r = random(3, 2, 10) * random(2, 3, 11);
        let p = pad_with_zero(&r, 2);
        assert_eq!(kernel_basis(&p, DEFAULT_RANK_TOL).unwrap().dim(), 3);
        assert_eq!(cokernel_basis(&p, DEFAULT_RANK_TOL).unwrap().dim(), 3);
    }

    #[test]
    fn smallest_pair_cases() {
        let (v, x) = smallest_singular_pair(&zeros(3, 3), &SubspaceBasis::empty(3)).unwrap();
        assert_eq!(v, 0.0);
        assert!((x[(0, 0)].norm() - 1.0).abs() < 1e-15);

        let cons = SubspaceBasis::standard(2, &[0]);
        let (v, x) = smallest_singular_pair(&diag(&[1.0, 2.0]), &cons).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        assert!((x[(1, 0)].norm() - 1.0).abs() < 1e-14);

        let full = SubspaceBasis::full(2);
        assert!(matches!(
            smallest_singular_pair(&identity(2), &full),
            Err(Error::EmptyComplement { dim: 2 })
        ));
    }

    #[test]
    fn smallest_pair_matches_restricted_svd() {
        let a = random(6, 6, 21);
        let cons = SubspaceBasis::from_orthonormal(svd(&random(6, 3, 22)).unwrap().left.into_matrix());
        let (v, x) = smallest_singular_pair(&a, &cons).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-12);
        assert!(max_abs(&(cons.matrix().adjoint() * &x)) < 1e-12);
        // oracle: complement from the projector's eigenvectors, not from Gram-Schmidt
        let proj = identity(6) - cons.projector();
        let eig = nalgebra::SymmetricEigen::new(proj);
        let cols: Vec<usize> = (0..6).filter(|&j| eig.eigenvalues[j] > 0.5).collect();
        let w = eig.eigenvectors.select_columns(cols.iter());
        let sv = (&a * w).singular_values();
        let oracle = sv.iter().cloned().fold(f64::MAX, f64::min);
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    }

    #[test]
    fn complement_is_orthogonal() {
        let b = SubspaceBasis::from_orthonormal(svd(&random(7, 3, 4)).unwrap().left.into_matrix());
        let comp = b.complement();
        assert_eq!(comp.dim(), 4);
        assert!(b.max_overlap(&comp) < 1e-13);
        SubspaceBasis::concat(&[&b, &comp]).unwrap();
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let g = random(5, 5, 12);
        let p = &g * g.adjoint();
        let r = psd_sqrt(&p);
        assert!(fro(&(&r * &r - &p)) < 1e-10 * fro(&p));
    }
}
