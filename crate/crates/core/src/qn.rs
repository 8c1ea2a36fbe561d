//! Quasi-nilpotent factorizations: the two-factor block construction for a
//! canonical form, common compact factors built from weighted shifts, and
//! common factors for general families.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockop::{
    compose, power_norms, triangular_qn_certificate, weighted_diag_qn_bound, BlockOperator, BlockShape,
    BoundReport, Certificate, CertificateOptions, IndexRange, PowerNormSequence, Region,
};
use crate::blockop::gelfand_estimate;
use crate::decompose::{joint_canonical_form, CanonicalBlocks, CanonicalOptions};
use crate::error::{Error, Result};
use crate::linalg::{assemble, c, fro, identity, max_abs, norm2, pad_with_zero, svd, svd_full_right, zeros, Matrix, SubspaceBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitSide {
    /// Pieces of the domain, built from right singular vectors.
    Domain,
    /// Pieces of the range, built from left singular vectors.
    Range,
}

/// Orthogonal pieces on which an operator has geometrically decaying norm.
#[derive(Clone, Debug)]
pub struct CompactSplit {
    pub pieces: Vec<SubspaceBasis>,
    /// Largest singular value inside each piece; `0` for empty pieces.
    pub piece_bounds: Vec<f64>,
    pub base: f64,
    pub side: SplitSide,
}

impl CompactSplit {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn piece_dims(&self) -> Vec<usize> {
        self.pieces.iter().map(|p| p.dim()).collect()
    }

    /// `‖K·P_n‖` for domain pieces, `‖P_n*·K‖` for range pieces.
    pub fn restriction_norms(&self, k: &Matrix) -> Vec<f64> {
        self.pieces
            .iter()
            .map(|p| match self.side {
                SplitSide::Domain => norm2(&(k * p.matrix())),
                SplitSide::Range => norm2(&(p.matrix().adjoint() * k)),
            })
            .collect()
    }

    /// Restriction norms stay under the recorded bounds, and the bound of
    /// piece `n ≥ 2` stays under `base^−n`.
    pub fn bounds_hold(&self, k: &Matrix) -> bool {
        let norms = self.restriction_norms(k);
        norms.iter().zip(&self.piece_bounds).enumerate().all(|(i, (r, b))| {
            let n = i as i32 + 1;
            *r <= b + 1e-12 && (n < 2 || *b <= self.base.powi(-n) * (1.0 + 1e-12))
        })
    }
}

/// Piece 1 takes `σ > base^−2`; piece `n ≥ 2` takes `σ ∈ (base^−(n+1), base^−n]`.
fn piece_index(s: f64, base: f64) -> usize {
    if s > base.powi(-2) {
        return 1;
    }
    let mut n = ((-s.ln() / base.ln()).floor() as i64).max(2);
    while n > 2 && s > base.powi(-(n as i32)) {
        n -= 1;
    }
    while s <= base.powi(-(n as i32 + 1)) {
        n += 1;
    }
    n as usize
}

pub fn split_compact_domain(k: &Matrix, base: f64) -> Result<CompactSplit> {
    split_compact(k, base, SplitSide::Domain, None)
}

pub fn split_compact_range(l: &Matrix, base: f64) -> Result<CompactSplit> {
    split_compact(l, base, SplitSide::Range, None)
}

/// Splits by singular value. With `pieces` set, everything past the last
/// piece lands in it; without, the count is set by the smallest nonzero
/// singular value. Null directions always go to the last piece.
pub fn split_compact(k: &Matrix, base: f64, side: SplitSide, pieces: Option<usize>) -> Result<CompactSplit> {
    if base.is_nan() || base <= 1.0 {
        return Err(Error::Infeasible(format!("split base must exceed 1, got {base}")));
    }
    if pieces == Some(0) {
        return Err(Error::SplitTooShallow { pieces: 0 });
    }
    let m = match side {
        SplitSide::Domain => k.clone(),
        SplitSide::Range => k.adjoint(),
    };
    let n = m.ncols();
    if n == 0 {
        let count = pieces.unwrap_or(1);
        return Ok(CompactSplit {
            pieces: vec![SubspaceBasis::empty(0); count],
            piece_bounds: vec![0.0; count],
            base,
            side,
        });
    }
    let (sv, vecs) = svd_full_right(&m)?;
    let smax = sv[0];
    let null = |s: f64| s == 0.0 || s <= f64::EPSILON * smax * n as f64;
    let idx: Vec<Option<usize>> = sv.iter().map(|&s| (!null(s)).then(|| piece_index(s, base))).collect();
    let top = pieces.unwrap_or_else(|| idx.iter().flatten().copied().max().unwrap_or(1));
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); top];
    for (j, p) in idx.iter().enumerate() {
        members[p.unwrap_or(top).min(top) - 1].push(j);
    }
    let piece_bounds = members.iter().map(|js| js.iter().map(|&j| sv[j]).fold(0.0, f64::max)).collect();
    let pieces = members
        .iter()
        .map(|js| SubspaceBasis::new(vecs.matrix().select_columns(js.iter())))
        .collect::<Result<_>>()?;
    Ok(CompactSplit { pieces, piece_bounds, base, side })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QnOptions {
    /// Pieces per side of the split.
    pub pieces: usize,
    pub base: f64,
    /// Weight `scale^n` on the `n`-th compact piece.
    pub scale: f64,
    pub window: u64,
    pub n_max: usize,
    pub threshold: f64,
}

impl Default for QnOptions {
    fn default() -> Self {
        QnOptions { pieces: 6, base: 4.0, scale: 2.0, window: 6, n_max: 10, threshold: 0.1 }
    }
}

/// `T = Q1·Q2` on the refined block decomposition.
#[derive(Clone, Debug)]
pub struct QnFactorization {
    pub q1: BlockOperator,
    pub q2: BlockOperator,
    /// `T` with its outer parts cut into pieces, one summand per piece.
    pub refined: BlockOperator,
    /// `max ‖(Q1Q2)_ij − T_ij‖ / (1 + max ‖T_ij‖)` on the window.
    pub product_residual: f64,
    pub cert_q1: Certificate,
    pub cert_q2: Certificate,
    /// Power bound for the `L` shift inside `Q1`.
    pub l_bound: BoundReport,
    /// Power bound for the `K` shift inside `Q2`.
    pub k_bound: BoundReport,
    pub window: u64,
    pub block_dim: usize,
    pub pieces: QnPieces,
    /// Domain split of `K` and range split of `L`, when built from blocks.
    pub splits: Option<[CompactSplit; 2]>,
}

/// The summands of the refined form, all `d × d`: `C`, and per piece
/// `A_n = P_n*·A`, `K_n = K·P_n`, `L_n = R_n*·L`, `D_n = D·R_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct QnPieces {
    pub c: Matrix,
    pub a: Vec<Matrix>,
    pub k: Vec<Matrix>,
    pub l: Vec<Matrix>,
    pub d: Vec<Matrix>,
}

impl QnFactorization {
    pub fn is_valid(&self) -> bool {
        self.product_residual <= 1e-10
            && self.cert_q1.valid
            && self.cert_q2.valid
            && self.l_bound.pass
            && self.k_bound.pass
    }
}

fn pad_cols(m: &Matrix, d: usize) -> Matrix {
    let mut out = zeros(m.nrows(), d);
    out.columns_mut(0, m.ncols()).copy_from(m);
    out
}

fn pad_rows(m: &Matrix, d: usize) -> Matrix {
    let mut out = zeros(d, m.ncols());
    out.rows_mut(0, m.nrows()).copy_from(m);
    out
}

/// Two block operators with quasi-nilpotent certificates whose product is
/// the refined canonical form.
///
/// Every summand has the middle dimension `d`; a piece of dimension below
/// `d` is completed with zero coordinates.
pub fn factor_quasinilpotent(cf: &CanonicalBlocks, opts: &QnOptions) -> Result<QnFactorization> {
    let [p, d, q] = cf.part_dims();
    if opts.pieces < 2 {
        return Err(Error::SplitTooShallow { pieces: opts.pieces });
    }
    if p > d || q > d {
        return Err(Error::SpaceTooSmall { dim: d, needed: p.max(q) });
    }
    let scale_t = norm2(&cf.c).max(norm2(&cf.a)).max(norm2(&cf.d));
    if norm2(&cf.b) > 1e-12 * (1.0 + scale_t) {
        return Err(Error::Infeasible("upper-right block is not zero".into()));
    }
    let dom = split_compact(&cf.k, opts.base, SplitSide::Domain, Some(opts.pieces))?;
    let ran = split_compact(&cf.l, opts.base, SplitSide::Range, Some(opts.pieces))?;
    let pieces = QnPieces {
        c: cf.c.clone(),
        a: dom.pieces.iter().map(|pc| pad_rows(&(pc.matrix().adjoint() * &cf.a), d)).collect(),
        k: dom.pieces.iter().map(|pc| pad_cols(&(&cf.k * pc.matrix()), d)).collect(),
        l: ran.pieces.iter().map(|pc| pad_rows(&(pc.matrix().adjoint() * &cf.l), d)).collect(),
        d: ran.pieces.iter().map(|pc| pad_cols(&(&cf.d * pc.matrix()), d)).collect(),
    };
    let mut f = factor_from_pieces(&pieces, opts)?;
    f.splits = Some([dom, ran]);
    Ok(f)
}

/// Builds both factors and their certificates from precomputed pieces.
pub fn factor_from_pieces(pieces: &QnPieces, opts: &QnOptions) -> Result<QnFactorization> {
    let d = pieces.c.nrows();
    let np = pieces.a.len() as i64;
    if np < 2 {
        return Err(Error::SplitTooShallow { pieces: np as usize });
    }
    let same = |v: &Vec<Matrix>| v.len() == np as usize && v.iter().all(|m| m.shape() == (d, d));
    if pieces.c.shape() != (d, d) || !same(&pieces.a) || !same(&pieces.k) || !same(&pieces.l) || !same(&pieces.d) {
        return Err(Error::ShapeMismatch("pieces must be square blocks of one size, equally many per side".into()));
    }
    let (a_blocks, k_blocks, l_blocks, d_blocks) =
        (pieces.a.clone(), pieces.k.clone(), pieces.l.clone(), pieces.d.clone());
    let cf_c = &pieces.c;

    let mut entries = BTreeMap::new();
    entries.insert((0, 0), cf_c.clone());
    for n in 1..=np {
        let k = (n - 1) as usize;
        entries.insert((-n, 0), a_blocks[k].clone());
        entries.insert((0, -n), k_blocks[k].clone());
        entries.insert((0, n), d_blocks[k].clone());
        entries.insert((n, 0), l_blocks[k].clone());
    }
    let shape = BlockShape::uniform(d);
    let refined = BlockOperator::from_blocks(shape.clone(), shape.clone(), entries)?;

    let s = opts.scale;
    let id = identity(d);
    let q1 = {
        let (a, l, cc, id) = (Arc::new(a_blocks), Arc::new(l_blocks.clone()), cf_c.clone(), id.clone());
        BlockOperator::new(
            shape.clone(),
            shape.clone(),
            vec![
                Region::row(0, IndexRange::at_most(-1)),
                Region::entry(0, 1),
                Region::col(1, IndexRange::between(-np, -1)),
                Region::diagonal(1, IndexRange::between(1, np)),
            ],
            move |i, j| {
                if i == 0 && j < 0 {
                    Some(&id * c(s.powi((j + 1) as i32), 0.0))
                } else if i == 0 && j == 1 {
                    Some(cc.clone())
                } else if i < 0 && j == 1 {
                    Some(a[(-i - 1) as usize].clone())
                } else if i >= 1 && j == i + 1 {
                    Some(&l[(i - 1) as usize] * c(s.powi(i as i32), 0.0))
                } else {
                    None
                }
            },
        )
    };
    let q2 = {
        let (dd, k, id) = (Arc::new(d_blocks), Arc::new(k_blocks.clone()), id);
        BlockOperator::new(
            shape.clone(),
            shape,
            vec![
                Region::row(-1, IndexRange::between(1, np)),
                Region::diagonal(1, IndexRange::between(-np - 1, -2)),
                Region::col(0, IndexRange::at_least(1)),
            ],
            move |i, j| {
                if i == -1 && j >= 1 {
                    Some(dd[(j - 1) as usize].clone())
                } else if i <= -2 && j == i + 1 {
                    let n = -i - 1;
                    Some(&k[(n - 1) as usize] * c(s.powi(n as i32), 0.0))
                } else if j == 0 && i >= 1 {
                    Some(&id * c(s.powi(1 - i as i32), 0.0))
                } else {
                    None
                }
            },
        )
    };

    let product = compose(&q1, &q2)?;
    let w = opts.window as i64;
    let (diff, tmax) = (-w..=w)
        .into_par_iter()
        .map(|i| {
            let mut diff = 0.0f64;
            let mut tmax = 0.0f64;
            for j in -w..=w {
                let t = refined.block_or_zero(i, j);
                diff = diff.max(norm2(&(product.block_or_zero(i, j) - &t)));
                tmax = tmax.max(norm2(&t));
            }
            (diff, tmax)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));

    let copts = CertificateOptions { window: opts.window, n_max: opts.n_max, threshold: opts.threshold };
    let cert_q1 = triangular_qn_certificate(&q1, 1, copts)?;
    let cert_q2 = triangular_qn_certificate(&q2, 0, copts)?;
    let l_bound = weighted_diag_qn_bound(&l_blocks, s, opts.n_max)?;
    let k_adj: Vec<Matrix> = k_blocks.iter().map(|k| k.adjoint()).collect();
    let k_bound = weighted_diag_qn_bound(&k_adj, s, opts.n_max)?;

    Ok(QnFactorization {
        q1,
        q2,
        refined,
        product_residual: diff / (1.0 + tmax),
        cert_q1,
        cert_q2,
        l_bound,
        k_bound,
        window: opts.window,
        block_dim: d,
        pieces: pieces.clone(),
        splits: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorSide {
    /// `K_i = L_i·Q`.
    Right,
    /// `K_i = Q·L_i`.
    Left,
}

/// A common weighted-shift factor for a family of compact operators.
#[derive(Clone, Debug)]
pub struct ShiftFactorization {
    /// Eigenbasis `φ_j` of `Σ K_i*K_i` (right side) or `Σ K_iK_i*` (left side).
    pub basis: SubspaceBasis,
    /// Eigenvalues, non-increasing.
    pub lambdas: Vec<f64>,
    /// `λ_j^(1/4)`.
    pub weights: Vec<f64>,
    pub q: Matrix,
    pub cofactors: Vec<Matrix>,
    /// Right side: `L_i·φ_j` as columns. Left side: the same for `L_i*`.
    pub cofactor_coords: Vec<Matrix>,
    pub side: FactorSide,
}

/// `‖Q^(2m)‖` against the closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerIdentityEntry {
    pub m: usize,
    /// From powers of the dense matrix `Q`.
    pub dense: f64,
    /// From powers of the shift in its own basis.
    pub shift: f64,
    /// `(λ_1⋯λ_2m)^(1/4)`.
    pub closed_form: f64,
    /// `(λ_1·λ_(m+1))^(m/4)`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerIdentityReport {
    pub entries: Vec<PowerIdentityEntry>,
    pub max_dense_error: f64,
    pub max_shift_relative_error: f64,
    pub bound_holds: bool,
}

impl ShiftFactorization {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `L_i·Q` or `Q·L_i`.
    pub fn product(&self, i: usize) -> Matrix {
        match self.side {
            FactorSide::Right => &self.cofactors[i] * &self.q,
            FactorSide::Left => &self.q * &self.cofactors[i],
        }
    }

    pub fn residuals(&self, ks: &[Matrix]) -> Vec<f64> {
        ks.iter().enumerate().map(|(i, k)| norm2(&(self.product(i) - k))).collect()
    }

    /// The shift kills the last basis vector, so a finite family is only
    /// reproduced up to `√λ_n`.
    pub fn truncation_bound(&self) -> f64 {
        self.lambdas.last().map_or(0.0, |l| l.sqrt())
    }

    /// The weighted shift in the `φ` basis with one-dimensional summands.
    pub fn shift_operator(&self) -> BlockOperator {
        let n = self.dim() as i64;
        let w = Arc::new(self.weights.clone());
        let shape = BlockShape::span(1, n, 1);
        let (offset, side) = match self.side {
            FactorSide::Right => (-1, FactorSide::Right),
            FactorSide::Left => (1, FactorSide::Left),
        };
        BlockOperator::new(shape.clone(), shape, vec![Region::diagonal(offset, IndexRange::between(1, n))], move |i, j| {
            let src = match side {
                FactorSide::Right => j,
                FactorSide::Left => i,
            };
            Some(Matrix::from_element(1, 1, c(w[(src - 1) as usize], 0.0)))
        })
    }

    pub fn shift_power_norms(&self, n_max: usize) -> Result<PowerNormSequence> {
        power_norms(&self.shift_operator(), n_max, self.dim() as u64)
    }

    /// Gelfand estimate of `Q` from the shift representation.
    pub fn gelfand(&self, n_max: usize) -> Result<f64> {
        Ok(gelfand_estimate(&self.shift_power_norms(n_max)?))
    }

    /// Checks `‖Q^(2m)‖ = (λ_1⋯λ_2m)^(1/4) ≤ (λ_1·λ_(m+1))^(m/4)` for
    /// `m ≤ m_max` (and `2m < dim`).
    pub fn power_identity(&self, m_max: usize) -> Result<PowerIdentityReport> {
        let n = self.dim();
        let m_max = m_max.min(n.saturating_sub(1) / 2);
        let shift = self.shift_power_norms(2 * m_max)?;
        let mut entries = Vec::new();
        let mut power = identity(n);
        let q2 = &self.q * &self.q;
        for m in 1..=m_max {
            power = &power * &q2;
            let closed: f64 = self.weights[..2 * m].iter().product();
            let bound = (self.weights[0] * self.weights[m]).powi(m as i32);
            entries.push(PowerIdentityEntry {
                m,
                dense: norm2(&power),
                shift: shift.norm(2 * m),
                closed_form: closed,
                bound,
            });
        }
        let max_dense_error = entries.iter().map(|e| (e.dense - e.closed_form).abs()).fold(0.0, f64::max);
        let max_shift_relative_error = entries
            .iter()
            .map(|e| if e.closed_form == 0.0 { e.shift } else { (e.shift - e.closed_form).abs() / e.closed_form })
            .fold(0.0, f64::max);
        let bound_holds = entries.iter().all(|e| e.closed_form <= e.bound * (1.0 + 1e-12));
        Ok(PowerIdentityReport { entries, max_dense_error, max_shift_relative_error, bound_holds })
    }

    /// Worst ratio `‖L_iφ_j‖² / √λ_(j−1)` over `i` and `j > 1`; at most 1 by
    /// construction.
    pub fn cofactor_growth(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in &self.cofactor_coords {
            for j in 1..self.dim() {
                let lam = self.lambdas[j - 1];
                let v = m.column(j).norm_squared();
                if lam > 0.0 {
                    worst = worst.max(v / lam.sqrt());
                } else if v > 0.0 {
                    worst = f64::INFINITY;
                }
            }
        }
        worst
    }
}

fn same_shape(ks: &[Matrix]) -> Result<(usize, usize)> {
    let shape = ks.first().map(|k| k.shape()).ok_or_else(|| Error::ShapeMismatch("empty family".into()))?;
    if ks.iter().any(|k| k.shape() != shape) {
        return Err(Error::ShapeMismatch("family members differ in shape".into()));
    }
    Ok(shape)
}

/// `K_i = L_i·Q` with `Qφ_j = λ_j^(1/4)·φ_(j+1)` and the last basis vector
/// sent to zero.
pub fn common_right_factor_compact(ks: &[Matrix]) -> Result<ShiftFactorization> {
    let (r, n) = same_shape(ks)?;
    let rows = (r * ks.len()).max(n);
    let mut stacked = zeros(rows, n);
    for (i, k) in ks.iter().enumerate() {
        stacked.rows_mut(i * r, r).copy_from(k);
    }
    let s = svd(&stacked)?;
    let phi = s.right.clone();
    let sigma = s.singular_values.clone();
    let lambdas: Vec<f64> = sigma.iter().map(|x| x * x).collect();
    let weights: Vec<f64> = sigma.iter().map(|x| x.sqrt()).collect();
    let mut shift = zeros(n, n);
    for j in 0..n.saturating_sub(1) {
        shift[(j + 1, j)] = c(weights[j], 0.0);
    }
    let q = phi.matrix() * shift * phi.matrix().adjoint();
    // K_i·φ_j read off the left factor keeps tiny columns accurate
    let coords: Vec<Matrix> = (0..ks.len())
        .into_par_iter()
        .map(|i| {
            let mut m = zeros(r, n);
            for j in 1..n {
                let w = weights[j - 1];
                if w > 0.0 {
                    let col = s.left.matrix().view((i * r, j - 1), (r, 1)) * c(sigma[j - 1] / w, 0.0);
                    m.column_mut(j).copy_from(&col);
                }
            }
            m
        })
        .collect();
    let cofactors = coords.iter().map(|m| m * phi.matrix().adjoint()).collect();
    Ok(ShiftFactorization {
        basis: phi,
        lambdas,
        weights,
        q,
        cofactors,
        cofactor_coords: coords,
        side: FactorSide::Right,
    })
}

/// `K_i = Q·L_i`, from the right factorization of the adjoints.
pub fn common_left_factor_compact(ks: &[Matrix]) -> Result<ShiftFactorization> {
    let adj: Vec<Matrix> = ks.iter().map(|k| k.adjoint()).collect();
    let f = common_right_factor_compact(&adj)?;
    Ok(ShiftFactorization {
        q: f.q.adjoint(),
        cofactors: f.cofactors.iter().map(|l| l.adjoint()).collect(),
        side: FactorSide::Left,
        ..f
    })
}

#[derive(Clone, Debug)]
pub struct TwoSidedCompact {
    /// Left factor, `Q1`.
    pub left: ShiftFactorization,
    /// Right factor, `Q2`.
    pub right: ShiftFactorization,
    pub cofactors: Vec<Matrix>,
}

impl TwoSidedCompact {
    pub fn residuals(&self, ks: &[Matrix]) -> Vec<f64> {
        ks.iter()
            .zip(&self.cofactors)
            .map(|(k, l)| norm2(&(&self.left.q * l * &self.right.q - k)))
            .collect()
    }

    pub fn truncation_bound(&self) -> f64 {
        self.left.truncation_bound() * self.right.weights.first().copied().unwrap_or(0.0) + self.right.truncation_bound()
    }
}

/// `K_i = Q1·L_i·Q2`: a right factorization followed by a left one on the
/// intermediate cofactors.
pub fn two_sided_compact(ks: &[Matrix]) -> Result<TwoSidedCompact> {
    let right = common_right_factor_compact(ks)?;
    let left = common_left_factor_compact(&right.cofactors)?;
    let cofactors = left.cofactors.clone();
    Ok(TwoSidedCompact { left, right, cofactors })
}

/// `T_pos² = Q·Q*` with `Q = U·W·U*`, `W` a backward weighted shift.
#[derive(Clone, Debug)]
pub struct QqStar {
    pub q: Matrix,
    /// Eigenvectors of `T_pos`, ordered by non-increasing eigenvalue.
    pub basis: Matrix,
    pub eigenvalues: Vec<f64>,
}

pub const DEFAULT_DECAY_TOL: f64 = 1e-3;

pub fn qq_star_factor(tpos: &Matrix) -> Result<Matrix> {
    Ok(qq_star_factor_with(tpos, DEFAULT_DECAY_TOL)?.q)
}

/// Requires the mean of the smallest quarter of the spectrum to be at most
/// `decay_tol` times the largest eigenvalue.
pub fn qq_star_factor_with(tpos: &Matrix, decay_tol: f64) -> Result<QqStar> {
    let n = tpos.nrows();
    if tpos.ncols() != n {
        return Err(Error::ShapeMismatch("qq* factor needs a square matrix".into()));
    }
    if n == 0 {
        return Ok(QqStar { q: zeros(0, 0), basis: zeros(0, 0), eigenvalues: Vec::new() });
    }
    let h = (tpos + tpos.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let t: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let basis = eig.eigenvectors.select_columns(order.iter());
    shift_in_basis(basis, t, decay_tol)
}

fn shift_in_basis(basis: Matrix, t: Vec<f64>, decay_tol: f64) -> Result<QqStar> {
    let n = t.len();
    if t[0] > 0.0 {
        let quarter = (n / 4).max(1);
        let tail = t[n - quarter..].iter().sum::<f64>() / quarter as f64;
        let limit = decay_tol * t[0];
        if tail > limit {
            return Err(Error::NotEssentiallySingular { tail, limit });
        }
    }
    let mut w = zeros(n, n);
    for j in 0..n - 1 {
        w[(j, j + 1)] = c(t[j], 0.0);
    }
    let q = &basis * w * basis.adjoint();
    Ok(QqStar { q, basis, eigenvalues: t })
}

/// Minimum-norm `S` with `Q·S = T`, after checking that the range of `T`
/// lies in the numerical range of `Q`.
pub fn douglas_solve(q: &Matrix, t: &Matrix) -> Result<Matrix> {
    if q.nrows() != t.nrows() {
        return Err(Error::ShapeMismatch("Q and T have different row counts".into()));
    }
    if q.is_empty() || t.ncols() == 0 {
        return Ok(zeros(q.ncols(), t.ncols()));
    }
    let tol = 1e-8 * (1.0 + norm2(t));
    let s = svd(q)?;
    let r = s.rank(1e-9 * s.max());
    let ur = s.left.matrix().columns(0, r).into_owned();
    let coeffs = ur.adjoint() * t;
    let outside = norm2(&(t - &ur * &coeffs));
    if outside > tol {
        return Err(Error::RangeInclusionFailed { residual: outside, tol });
    }
    let mut scaled = coeffs;
    for k in 0..r {
        let inv = 1.0 / s.singular_values[k];
        scaled.row_mut(k).iter_mut().for_each(|z| *z *= inv);
    }
    Ok(s.right.matrix().columns(0, r) * scaled)
}

/// A common factor `Q` and cofactors for a family.
#[derive(Clone, Debug)]
pub struct CommonFactor {
    pub q: Matrix,
    pub cofactors: Vec<Matrix>,
    pub side: FactorSide,
    /// `‖Q·S_i − T_i‖` or `‖S_i·Q − T_i‖`.
    pub residuals: Vec<f64>,
}

/// `T_i = Q·S_i` with `Q·Q* = Σ T_iT_i*`.
pub fn common_left_factor_general(ts: &[Matrix]) -> Result<CommonFactor> {
    let (n, cols) = same_shape(ts)?;
    if n == 0 {
        return Ok(CommonFactor { q: zeros(0, 0), cofactors: vec![zeros(0, cols); ts.len()], side: FactorSide::Left, residuals: vec![0.0; ts.len()] });
    }
    // eigenpairs of √(Σ T_iT_i*) from an SVD of the stacked adjoints, which
    // keeps small eigenvalues accurate
    let mut stacked = zeros((cols * ts.len()).max(n), n);
    for (i, t) in ts.iter().enumerate() {
        stacked.rows_mut(i * cols, cols).copy_from(&t.adjoint());
    }
    let s = svd(&stacked)?;
    let q = shift_in_basis(s.right.into_matrix(), s.singular_values, DEFAULT_DECAY_TOL)?.q;
    let cofactors: Vec<Matrix> = ts.iter().map(|t| douglas_solve(&q, t)).collect::<Result<_>>()?;
    let residuals = ts.iter().zip(&cofactors).map(|(t, s)| norm2(&(&q * s - t))).collect();
    Ok(CommonFactor { q, cofactors, side: FactorSide::Left, residuals })
}

/// `T_i = S_i·Q`, by duality.
pub fn common_right_factor_general(ts: &[Matrix]) -> Result<CommonFactor> {
    let adj: Vec<Matrix> = ts.iter().map(|t| t.adjoint()).collect();
    let f = common_left_factor_general(&adj)?;
    Ok(CommonFactor {
        q: f.q.adjoint(),
        cofactors: f.cofactors.iter().map(|s| s.adjoint()).collect(),
        side: FactorSide::Right,
        residuals: f.residuals,
    })
}

/// `V·(T_i ⊕ 0)·V⁻¹ = Q′₁·S′_i·Q′₂` with cyclic block factors.
#[derive(Clone, Debug)]
pub struct GeneralFactorization {
    pub v: Matrix,
    pub v_inv: Matrix,
    /// `[[0, I, 0], [0, 0, I], [R, 0, 0]]`.
    pub q1_prime: Matrix,
    /// `[[0, I, 0], [0, 0, I], [Q, 0, 0]]`.
    pub q2_prime: Matrix,
    /// `[[M_i, 0, 0], [A_i, 0, 0], [C_i, D_i, H_i]]`.
    pub s_prime: Vec<Matrix>,
    /// Pulled back: `V⁻¹·Q′·V`.
    pub q1: Matrix,
    pub q2: Matrix,
    pub s: Vec<Matrix>,
    pub r_factor: ShiftFactorization,
    pub q_factor: ShiftFactorization,
    /// `‖Q′₁S′_iQ′₂ − V T_i V⁻¹‖_F / (1 + ‖T_i‖_F)`.
    pub residuals: Vec<f64>,
    /// Same for `Q1·S_i·Q2` against `T_i ⊕ 0`.
    pub pullback_residuals: Vec<f64>,
    /// Max entry of `Q′₁³ − diag(R,R,R)` and `Q′₂³ − diag(Q,Q,Q)`.
    pub cube_errors: [f64; 2],
    /// Gelfand estimates of `R` and `Q`.
    pub gelfand: [f64; 2],
    /// Smallest singular values of the stacked `S′_i`, ascending.
    pub stacked_smallest: Vec<f64>,
    pub padding: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralOptions {
    pub canonical: CanonicalOptions,
    /// Powers used for the Gelfand estimates of `R` and `Q`.
    pub n_max: usize,
    /// How many of the smallest stacked singular values to report.
    pub diagnostic_count: usize,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions { canonical: CanonicalOptions::default(), n_max: 20, diagnostic_count: 4 }
    }
}

pub fn common_factor_general(ts: &[Matrix], opts: &GeneralOptions) -> Result<GeneralFactorization> {
    let mut copts = opts.canonical.clone();
    copts.balance = true;
    let jf = joint_canonical_form(ts, &copts)?;
    let d = jf.forms[0].c.nrows();
    let ks: Vec<Matrix> = jf.forms.iter().map(|f| f.k.clone()).collect();
    let ls: Vec<Matrix> = jf.forms.iter().map(|f| f.l.clone()).collect();
    let q_factor = common_right_factor_compact(&ks)?;
    let r_factor = common_left_factor_compact(&ls)?;

    let (z, id) = (zeros(d, d), identity(d));
    let cyclic = |corner: &Matrix| {
        assemble(&[
            vec![z.clone(), id.clone(), z.clone()],
            vec![z.clone(), z.clone(), id.clone()],
            vec![corner.clone(), z.clone(), z.clone()],
        ])
    };
    let q1_prime = cyclic(&r_factor.q);
    let q2_prime = cyclic(&q_factor.q);
    let s_prime: Vec<Matrix> = jf
        .forms
        .iter()
        .enumerate()
        .map(|(i, f)| {
            assemble(&[
                vec![r_factor.cofactors[i].clone(), z.clone(), z.clone()],
                vec![f.a.clone(), z.clone(), z.clone()],
                vec![f.c.clone(), f.d.clone(), q_factor.cofactors[i].clone()],
            ])
        })
        .collect();

    let v = &jf.basis_change;
    let v_inv = &jf.inverse;
    let q1 = v_inv * &q1_prime * v;
    let q2 = v_inv * &q2_prime * v;
    let s: Vec<Matrix> = s_prime.iter().map(|sp| v_inv * sp * v).collect();

    let checks: Vec<(f64, f64)> = ts
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let padded = pad_with_zero(t, jf.padding);
            let target = v * &padded * v_inv;
            let norm = 1.0 + fro(t);
            let r1 = fro(&(&q1_prime * &s_prime[i] * &q2_prime - target)) / norm;
            let r2 = fro(&(&q1 * &s[i] * &q2 - padded)) / norm;
            (r1, r2)
        })
        .collect();

    let cube_error = |qp: &Matrix, corner: &Matrix| {
        let cube = qp * qp * qp;
        max_abs(&(cube - assemble(&[
            vec![corner.clone(), z.clone(), z.clone()],
            vec![z.clone(), corner.clone(), z.clone()],
            vec![z.clone(), z.clone(), corner.clone()],
        ])))
    };
    let cube_errors = [cube_error(&q1_prime, &r_factor.q), cube_error(&q2_prime, &q_factor.q)];
    let gelfand = [r_factor.gelfand(opts.n_max)?, q_factor.gelfand(opts.n_max)?];

    let mut stacked = zeros(3 * d * s_prime.len(), 3 * d);
    for (i, sp) in s_prime.iter().enumerate() {
        stacked.rows_mut(3 * d * i, 3 * d).copy_from(sp);
    }
    let sv = svd(&stacked)?.singular_values;
    let stacked_smallest: Vec<f64> = sv.iter().rev().take(opts.diagnostic_count).copied().collect();

    Ok(GeneralFactorization {
        v: v.clone(),
        v_inv: v_inv.clone(),
        q1_prime,
        q2_prime,
        s_prime,
        q1,
        q2,
        s,
        r_factor,
        q_factor,
        residuals: checks.iter().map(|c| c.0).collect(),
        pullback_residuals: checks.iter().map(|c| c.1).collect(),
        cube_errors,
        gelfand,
        stacked_smallest,
        padding: jf.padding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::canonical_form;
    use crate::linalg::diag;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(r, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn unitary(n: usize, seed: u64) -> Matrix {
        let s = svd(&random(n, n, seed)).unwrap();
        s.left.into_matrix() * s.right.into_matrix().adjoint()
    }

    #[test]
    fn piece_binning() {
        assert_eq!(piece_index(1.0, 4.0), 1);
        assert_eq!(piece_index(0.0625, 4.0), 2);
        assert_eq!(piece_index(0.05, 4.0), 2);
        assert_eq!(piece_index(0.015625, 4.0), 3);
        assert_eq!(piece_index(0.003, 4.0), 4);
        for j in 1..40 {
            let s = 2f64.powi(-j);
            let n = piece_index(s, 4.0);
            if n >= 2 {
                assert!(s <= 4f64.powi(-(n as i32)) && s > 4f64.powi(-(n as i32) - 1), "j={j} n={n}");
            } else {
                assert!(s > 1.0 / 16.0);
            }
        }
    }

    #[test]
    fn split_of_zero_is_one_piece() {
        let s = split_compact_domain(&zeros(5, 5), 4.0).unwrap();
        assert_eq!(s.piece_dims(), vec![5]);
        assert_eq!(s.piece_bounds, vec![0.0]);
    }

    #[test]
    fn split_of_three_values() {
        let k = diag(&[1.0, 0.05, 0.003]);
        let s = split_compact_domain(&k, 4.0).unwrap();
        assert_eq!(s.piece_dims(), vec![1, 1, 0, 1]);
        assert!(s.bounds_hold(&k));
        let r = split_compact_range(&(unitary(3, 1) * &k), 4.0).unwrap();
        assert_eq!(r.piece_dims(), vec![1, 1, 0, 1]);
        assert!(r.bounds_hold(&(unitary(3, 1) * &k)));
    }

    #[test]
    fn split_with_cap_folds_tail() {
        let vals: Vec<f64> = (1..=20).map(|j| 2f64.powi(-j)).collect();
        let k = unitary(20, 2) * diag(&vals) * unitary(20, 3);
        let s = split_compact(&k, 4.0, SplitSide::Domain, Some(3)).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.piece_dims().iter().sum::<usize>(), 20);
        assert!(s.bounds_hold(&k));
    }

    fn synthetic(d: usize, seed: u64) -> CanonicalBlocks {
        let vals: Vec<f64> = (0..d).map(|j| 0.5 * 2f64.powi(-(j as i32))).collect();
        CanonicalBlocks {
            a: random(d, d, seed),
            b: zeros(d, d),
            k: unitary(d, seed + 1) * diag(&vals) * unitary(d, seed + 2),
            c: random(d, d, seed + 3),
            d: random(d, d, seed + 4),
            l: unitary(d, seed + 5) * diag(&vals) * unitary(d, seed + 6),
            corner: zeros(d, d),
        }
    }

    #[test]
    fn factor_zero_form() {
        let z = CanonicalBlocks {
            a: zeros(3, 3),
            b: zeros(3, 3),
            k: zeros(3, 3),
            c: zeros(3, 3),
            d: zeros(3, 3),
            l: zeros(3, 3),
            corner: zeros(3, 3),
        };
        let f = factor_quasinilpotent(&z, &QnOptions::default()).unwrap();
        assert_eq!(f.product_residual, 0.0);
        assert!(f.is_valid());
    }

    #[test]
    fn identity_row_placement() {
        let f = factor_quasinilpotent(&synthetic(4, 10), &QnOptions::default()).unwrap();
        for k in 1..6 {
            let b = f.q1.block(0, -k).unwrap();
            assert_eq!(b, identity(4) * c(2f64.powi(-(k as i32 - 1)), 0.0));
            let b = f.q2.block(k, 0).unwrap();
            assert_eq!(b, identity(4) * c(2f64.powi(-(k as i32 - 1)), 0.0));
        }
    }

    #[test]
    fn synthetic_family_factors() {
        let f = factor_quasinilpotent(&synthetic(8, 20), &QnOptions::default()).unwrap();
        assert!(f.product_residual <= 1e-10, "{}", f.product_residual);
        assert!(f.cert_q1.valid && f.cert_q2.valid);
        assert!(f.l_bound.pass && f.k_bound.pass);
        assert!(f.is_valid());
    }

    #[test]
    fn shallow_split_rejected() {
        let opts = QnOptions { pieces: 1, ..QnOptions::default() };
        assert!(matches!(factor_quasinilpotent(&synthetic(3, 1), &opts), Err(Error::SplitTooShallow { pieces: 1 })));
    }

    #[test]
    fn canonical_pipeline_on_volterra() {
        let n = 24;
        let h = 1.0 / n as f64;
        let t = Matrix::from_fn(n, n, |i, j| if i > j { c(h, 0.0) } else if i == j { c(h / 2.0, 0.0) } else { c(0.0, 0.0) });
        let cf = canonical_form(&t, &CanonicalOptions::default()).unwrap();
        let f = factor_quasinilpotent(&cf.blocks, &QnOptions::default()).unwrap();
        assert!(f.is_valid(), "{}", f.product_residual);
    }

    #[test]
    fn compact_right_factor_of_zero() {
        let f = common_right_factor_compact(&[zeros(4, 4), zeros(4, 4)]).unwrap();
        assert_eq!(fro(&f.q), 0.0);
        assert!(f.cofactors.iter().all(|l| fro(l) == 0.0));
    }

    #[test]
    fn diagonal_gives_forward_shift() {
        let n = 12;
        let lam: Vec<f64> = (1..=n).map(|j| 4f64.powi(-j)).collect();
        let k = diag(&lam.iter().map(|l| l.sqrt()).collect::<Vec<_>>());
        let f = common_right_factor_compact(std::slice::from_ref(&k)).unwrap();
        for j in 0..n as usize - 1 {
            let w = 4f64.powf(-((j + 1) as f64) / 4.0);
            assert!((f.q[(j + 1, j)].norm() - w).abs() < 1e-15);
        }
        assert!(f.residuals(std::slice::from_ref(&k))[0] <= f.truncation_bound() * (1.0 + 1e-9) + 1e-12);
        assert!(f.cofactor_growth() <= 1.0 + 1e-9);
        let rep = f.power_identity(5).unwrap();
        assert!(rep.max_dense_error < 1e-12);
        assert!(rep.max_shift_relative_error < 1e-12);
        assert!(rep.bound_holds);
    }

    #[test]
    fn left_factor_is_adjoint_image() {
        let ks: Vec<Matrix> = (0..2).map(|s| random(10, 10, s) * diag(&(0..10).map(|j| 3f64.powi(-j)).collect::<Vec<_>>())).collect();
        let left = common_left_factor_compact(&ks).unwrap();
        let adj: Vec<Matrix> = ks.iter().map(|k| k.adjoint()).collect();
        let right = common_right_factor_compact(&adj).unwrap();
        assert_eq!(left.q, right.q.adjoint());
        let res = left.residuals(&ks);
        assert!(res.iter().all(|r| *r <= left.truncation_bound() * (1.0 + 1e-9) + 1e-12), "{res:?}");
    }

    #[test]
    fn two_sided_on_diagonal() {
        let lam: Vec<f64> = (1..=16).map(|j| 4f64.powi(-j)).collect();
        let k = diag(&lam.iter().map(|l| l.sqrt()).collect::<Vec<_>>());
        let f = two_sided_compact(std::slice::from_ref(&k)).unwrap();
        assert!(f.residuals(std::slice::from_ref(&k))[0] <= f.truncation_bound() * (1.0 + 1e-9) + 1e-12);
        assert!(f.left.gelfand(15).unwrap() < 0.3);
        assert!(f.right.gelfand(15).unwrap() < 0.1);
    }

    #[test]
    fn qq_star_cases() {
        assert_eq!(qq_star_factor(&zeros(4, 4)).unwrap(), zeros(4, 4));
        let t = diag(&(0..30).map(|j| 2f64.powi(-j)).collect::<Vec<_>>());
        let q = qq_star_factor(&t).unwrap();
        assert!(max_abs(&(&q * q.adjoint() - &t * &t)) < 1e-10);
        assert!(matches!(qq_star_factor(&identity(8)), Err(Error::NotEssentiallySingular { .. })));
    }

    #[test]
    fn douglas_cases() {
        let q = diag(&[2.0, 1.0, 0.0]);
        let s = douglas_solve(&q, &q).unwrap();
        assert!(max_abs(&(s - diag(&[1.0, 1.0, 0.0]))) < 1e-14);
        assert_eq!(douglas_solve(&q, &zeros(3, 2)).unwrap(), zeros(3, 2));
        let mut t = zeros(3, 1);
        t[(2, 0)] = c(1.0, 0.0);
        assert!(matches!(douglas_solve(&q, &t), Err(Error::RangeInclusionFailed { .. })));
    }

    #[test]
    fn general_common_factors_on_decaying_family() {
        let n = 40;
        let ts: Vec<Matrix> = (0..2)
            
            .map(|s| unitary(n, 50) * diag(&(0..n).map(|j| (1.0 + s as f64 * ((j % 3) as f64)) * 0.5f64.powi(j as i32)).collect::<Vec<_>>()) * unitary(n, 60))
            .collect();
        let left = common_left_factor_general(&ts).unwrap();
        assert!(left.residuals.iter().all(|r| *r <= 1e-8 * (1.0 + 1.0)));
        let right = common_right_factor_general(&ts).unwrap();
        for (t, s) in ts.iter().zip(&right.cofactors) {
            assert!(norm2(&(s * &right.q - t)) <= 1e-8 * (1.0 + norm2(t)));
        }
    }

    #[test]
    fn cyclic_factors() {
        let n = 24;
        let ts: Vec<Matrix> = (0..2)
            .map(|s| {
                let mut m = random(n, n, 80 + s);
                let w: Vec<f64> = (0..n).map(|j| 0.6f64.powi(j as i32)).collect();
                m = &m * diag(&w);
                m
            })
            .collect();
        let opts = GeneralOptions { canonical: CanonicalOptions { count: 3, ..Default::default() }, ..Default::default() };
        let f = common_factor_general(&ts, &opts).unwrap();
        assert!(f.residuals.iter().all(|r| *r <= 1e-8), "{:?}", f.residuals);
        assert!(f.pullback_residuals.iter().all(|r| *r <= 1e-8), "{:?}", f.pullback_residuals);
        assert_eq!(f.cube_errors, [0.0, 0.0]);
        let z = vec![zeros(12, 12); 2];
        let opts = GeneralOptions { canonical: CanonicalOptions { count: 2, ..Default::default() }, ..Default::default() };
        let f = common_factor_general(&z, &opts).unwrap();
        assert!(f.s.iter().all(|s| fro(s) == 0.0));
    }
}
