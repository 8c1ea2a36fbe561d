//! Lazily indexed block operators over integer block indices.
//!
//! Block index 0 is the central summand; negative indices run to the left
//! and upward, positive ones to the right and downward. An operator declares
//! its support as a list of [`Region`]s and produces blocks on demand, so
//! the doubly infinite constructions can be composed exactly and only
//! assembled into dense matrices on a finite window.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, identity, norm2, zeros, Matrix};
use crate::mtx;

/// Inclusive integer interval; `None` is unbounded on that side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct IndexRange {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<i64>,
}

impl IndexRange {
    pub const ALL: IndexRange = IndexRange { lo: None, hi: None };

    pub fn point(i: i64) -> Self {
        IndexRange { lo: Some(i), hi: Some(i) }
    }

    pub fn between(lo: i64, hi: i64) -> Self {
        IndexRange { lo: Some(lo), hi: Some(hi) }
    }

    pub fn at_least(lo: i64) -> Self {
        IndexRange { lo: Some(lo), hi: None }
    }

    pub fn at_most(hi: i64) -> Self {
        IndexRange { lo: None, hi: Some(hi) }
    }

    pub fn contains(&self, i: i64) -> bool {
        self.lo.is_none_or(|lo| i >= lo) && self.hi.is_none_or(|hi| i <= hi)
    }

    pub fn is_empty(&self) -> bool {
        matches!((self.lo, self.hi), (Some(lo), Some(hi)) if lo > hi)
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_some() && self.hi.is_some()
    }

    pub fn intersect(&self, other: &IndexRange) -> IndexRange {
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        IndexRange { lo, hi }
    }

    /// Minkowski sum `{a + b}`.
    pub fn plus(&self, other: &IndexRange) -> IndexRange {
        IndexRange {
            lo: self.lo.zip(other.lo).map(|(a, b)| a + b),
            hi: self.hi.zip(other.hi).map(|(a, b)| a + b),
        }
    }

    /// Minkowski difference `{a - b}`.
    pub fn minus(&self, other: &IndexRange) -> IndexRange {
        IndexRange {
            lo: self.lo.zip(other.hi).map(|(a, b)| a - b),
            hi: self.hi.zip(other.lo).map(|(a, b)| a - b),
        }
    }

    pub fn shifted(&self, d: i64) -> IndexRange {
        self.plus(&IndexRange::point(d))
    }
}

impl fmt::Display for IndexRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = self.lo.map_or("-inf".to_string(), |v| v.to_string());
        let hi = self.hi.map_or("+inf".to_string(), |v| v.to_string());
        write!(f, "[{lo}, {hi}]")
    }
}

/// The set of block positions `(i, j)` with `i ∈ rows`, `j ∈ cols` and
/// `j − i ∈ offsets`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub rows: IndexRange,
    pub cols: IndexRange,
    pub offsets: IndexRange,
}

impl Region {
    pub fn entry(i: i64, j: i64) -> Self {
        Region { rows: IndexRange::point(i), cols: IndexRange::point(j), offsets: IndexRange::ALL }
    }

    /// Positions `(i, i + offset)` for `i ∈ rows`.
    pub fn diagonal(offset: i64, rows: IndexRange) -> Self {
        Region { rows, cols: IndexRange::ALL, offsets: IndexRange::point(offset) }
    }

    pub fn row(i: i64, cols: IndexRange) -> Self {
        Region { rows: IndexRange::point(i), cols, offsets: IndexRange::ALL }
    }

    pub fn col(j: i64, rows: IndexRange) -> Self {
        Region { rows, cols: IndexRange::point(j), offsets: IndexRange::ALL }
    }

    pub fn rect(rows: IndexRange, cols: IndexRange) -> Self {
        Region { rows, cols, offsets: IndexRange::ALL }
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        self.rows.contains(i) && self.cols.contains(j) && self.offsets.contains(j - i)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
            || self.cols.is_empty()
            || self.offsets.is_empty()
            || self.cols.intersect(&self.rows.plus(&self.offsets)).is_empty()
    }

    /// Column indices this region occupies in row `i`.
    pub fn cols_in_row(&self, i: i64) -> IndexRange {
        if !self.rows.contains(i) {
            return IndexRange::between(1, 0);
        }
        self.cols.intersect(&self.offsets.shifted(i))
    }

    /// Row indices this region occupies in column `j`.
    pub fn rows_in_col(&self, j: i64) -> IndexRange {
        if !self.cols.contains(j) {
            return IndexRange::between(1, 0);
        }
        self.rows.intersect(&IndexRange::point(j).minus(&self.offsets))
    }

    pub fn intersect(&self, other: &Region) -> Region {
        Region {
            rows: self.rows.intersect(&other.rows),
            cols: self.cols.intersect(&other.cols),
            offsets: self.offsets.intersect(&other.offsets),
        }
    }

    /// Indices `k` linking this region to `next`, and whether they can be
    /// unbounded for some fixed `(i, j)`.
    fn link(&self, next: &Region) -> (IndexRange, bool) {
        let k = self.cols.intersect(&next.rows);
        let open_low = k.lo.is_none() && self.offsets.lo.is_none() && next.offsets.hi.is_none();
        let open_high = k.hi.is_none() && self.offsets.hi.is_none() && next.offsets.lo.is_none();
        (k, open_low || open_high)
    }

    /// Region containing every `(i, j)` reachable through some `k`.
    fn compose(&self, next: &Region) -> Option<Region> {
        let (k, _) = self.link(next);
        let out = Region {
            rows: self.rows.intersect(&k.minus(&self.offsets)),
            cols: next.cols.intersect(&k.plus(&next.offsets)),
            offsets: self.offsets.plus(&next.offsets),
        };
        if k.is_empty() || out.is_empty() {
            None
        } else {
            Some(out)
        }
    }

    /// Largest `|j − i|` in the region, if bounded.
    fn bandwidth(&self) -> Option<u64> {
        let off = self.offsets.intersect(&self.cols.minus(&self.rows));
        match (off.lo, off.hi) {
            (Some(lo), Some(hi)) => Some(lo.unsigned_abs().max(hi.unsigned_abs())),
            _ => None,
        }
    }
}

/// Dimension of each block summand.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockShape {
    /// Every integer index carries a summand of the same dimension.
    Uniform(usize),
    /// Only the listed indices exist.
    Finite(BTreeMap<i64, usize>),
}

impl BlockShape {
    pub fn uniform(dim: usize) -> Self {
        BlockShape::Uniform(dim)
    }

    /// Indices `lo..=hi`, each of dimension `dim`.
    pub fn span(lo: i64, hi: i64, dim: usize) -> Self {
        BlockShape::Finite((lo..=hi).map(|i| (i, dim)).collect())
    }

    pub fn dim(&self, i: i64) -> Option<usize> {
        match self {
            BlockShape::Uniform(d) => Some(*d),
            BlockShape::Finite(m) => m.get(&i).copied(),
        }
    }

    /// Indices with `|i| ≤ window`, ascending.
    pub fn indices_within(&self, window: u64) -> Vec<i64> {
        let w = window as i64;
        match self {
            BlockShape::Uniform(_) => (-w..=w).collect(),
            BlockShape::Finite(m) => m.keys().copied().filter(|i| i.unsigned_abs() <= window).collect(),
        }
    }

    fn indices_in(&self, r: &IndexRange) -> Option<Vec<i64>> {
        match self {
            BlockShape::Finite(m) => Some(m.keys().copied().filter(|&k| r.contains(k)).collect()),
            BlockShape::Uniform(_) => {
                if r.is_empty() {
                    Some(Vec::new())
                } else if r.is_bounded() {
                    Some((r.lo.unwrap()..=r.hi.unwrap()).collect())
                } else {
                    None
                }
            }
        }
    }

    fn is_finite(&self) -> bool {
        matches!(self, BlockShape::Finite(_))
    }
}

type BlockFn = Arc<dyn Fn(i64, i64) -> Option<Matrix> + Send + Sync>;
type BoundFn = Arc<dyn Fn(i64, i64) -> f64 + Send + Sync>;

/// Block operator with lazily evaluated blocks.
#[derive(Clone)]
pub struct BlockOperator {
    row_shape: BlockShape,
    col_shape: BlockShape,
    support: Vec<Region>,
    blocks: BlockFn,
    norm_bound: Option<BoundFn>,
}

impl fmt::Debug for BlockOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockOperator")
            .field("row_shape", &self.row_shape)
            .field("col_shape", &self.col_shape)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

impl BlockOperator {
    /// `blocks(i, j)` is only consulted inside `support`; returning `None`
    /// marks a structural zero.
    pub fn new<F>(row_shape: BlockShape, col_shape: BlockShape, support: Vec<Region>, blocks: F) -> Self
    where
        F: Fn(i64, i64) -> Option<Matrix> + Send + Sync + 'static,
    {
        let support = support.into_iter().filter(|r| !r.is_empty()).collect();
        BlockOperator { row_shape, col_shape, support, blocks: Arc::new(blocks), norm_bound: None }
    }

    pub fn with_norm_bound<F>(mut self, bound: F) -> Self
    where
        F: Fn(i64, i64) -> f64 + Send + Sync + 'static,
    {
        self.norm_bound = Some(Arc::new(bound));
        self
    }

    pub fn zero(row_shape: BlockShape, col_shape: BlockShape) -> Self {
        BlockOperator::new(row_shape, col_shape, Vec::new(), |_, _| None)
    }

    pub fn identity(shape: BlockShape) -> Self {
        let s = shape.clone();
        BlockOperator::new(shape.clone(), shape, vec![Region::diagonal(0, IndexRange::ALL)], move |i, _| {
            s.dim(i).map(identity)
        })
    }

    /// Operator with finitely many explicit blocks.
    pub fn from_blocks(
        row_shape: BlockShape,
        col_shape: BlockShape,
        blocks: BTreeMap<(i64, i64), Matrix>,
    ) -> Result<Self> {
        for (&(i, j), b) in &blocks {
            let want = (row_shape.dim(i), col_shape.dim(j));
            if want != (Some(b.nrows()), Some(b.ncols())) {
                return Err(Error::ShapeMismatch(format!(
                    "block ({i}, {j}) is {}x{}, shape expects {want:?}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        let support = blocks.keys().map(|&(i, j)| Region::entry(i, j)).collect();
        let blocks = Arc::new(blocks);
        Ok(BlockOperator::new(row_shape, col_shape, support, move |i, j| blocks.get(&(i, j)).cloned()))
    }

    pub fn row_shape(&self) -> &BlockShape {
        &self.row_shape
    }

    pub fn col_shape(&self) -> &BlockShape {
        &self.col_shape
    }

    pub fn support(&self) -> &[Region] {
        &self.support
    }

    pub fn in_support(&self, i: i64, j: i64) -> bool {
        self.support.iter().any(|r| r.contains(i, j))
    }

    /// Block `(i, j)`, or `None` for a structural zero.
    pub fn block(&self, i: i64, j: i64) -> Option<Matrix> {
        let (r, c) = (self.row_shape.dim(i)?, self.col_shape.dim(j)?);
        if !self.in_support(i, j) {
            return None;
        }
        let b = (self.blocks)(i, j)?;
        debug_assert_eq!(b.shape(), (r, c), "block ({i}, {j}) has the wrong shape");
        Some(b)
    }

    /// Block `(i, j)` with structural zeros materialized.
    pub fn block_or_zero(&self, i: i64, j: i64) -> Matrix {
        self.block(i, j).unwrap_or_else(|| {
            zeros(self.row_shape.dim(i).unwrap_or(0), self.col_shape.dim(j).unwrap_or(0))
        })
    }

    pub fn norm_bound(&self, i: i64, j: i64) -> Option<f64> {
        self.norm_bound.as_ref().map(|f| f(i, j))
    }

    /// Same blocks, support cut down to `rows × cols`.
    pub fn restrict(&self, rows: IndexRange, cols: IndexRange) -> BlockOperator {
        let cut = Region::rect(rows, cols);
        let mut out = self.clone();
        out.support = self.support.iter().map(|r| r.intersect(&cut)).filter(|r| !r.is_empty()).collect();
        out
    }

    /// Largest block offset `|j − i|` in the support, if bounded.
    pub fn bandwidth(&self) -> Option<u64> {
        self.support.iter().map(|r| r.bandwidth()).try_fold(0, |acc, b| b.map(|b| acc.max(b)))
    }

    /// Checks the declared norm bound on every block within `window`.
    pub fn check_norm_bound(&self, window: u64) -> Option<bool> {
        let bound = self.norm_bound.as_ref()?;
        let rows = self.row_shape.indices_within(window);
        let cols = self.col_shape.indices_within(window);
        Some(rows.iter().all(|&i| {
            cols.iter().all(|&j| self.block(i, j).is_none_or(|b| norm2(&b) <= bound(i, j) + 1e-12))
        }))
    }
}

/// Blockwise product `X·Y`.
pub fn compose(x: &BlockOperator, y: &BlockOperator) -> Result<BlockOperator> {
    if x.col_shape != y.row_shape {
        return Err(Error::ShapeMismatch("column shape of X differs from row shape of Y".into()));
    }
    let mut links = Vec::new();
    let mut support = Vec::new();
    for rx in &x.support {
        for ry in &y.support {
            let (k, open) = rx.link(ry);
            if k.is_empty() {
                continue;
            }
            if let Some(region) = rx.compose(ry) {
                if open && !x.col_shape.is_finite() {
                    return Err(Error::InfiniteFiber {
                        row: region.rows.lo.or(region.rows.hi).unwrap_or(0),
                        col: region.cols.lo.or(region.cols.hi).unwrap_or(0),
                    });
                }
                links.push((*rx, *ry));
                support.push(region);
            }
        }
    }
    let (xo, yo) = (x.clone(), y.clone());
    let mid = x.col_shape.clone();
    let links = Arc::new(links);
    Ok(BlockOperator::new(x.row_shape.clone(), y.col_shape.clone(), support, move |i, j| {
        let mut ks = BTreeSet::new();
        for (rx, ry) in links.iter() {
            let fiber = rx.cols_in_row(i).intersect(&ry.rows_in_col(j));
            if let Some(idx) = mid.indices_in(&fiber) {
                ks.extend(idx);
            }
        }
        let mut acc: Option<Matrix> = None;
        for k in ks {
            if let (Some(a), Some(b)) = (xo.block(i, k), yo.block(k, j)) {
                let p = a * b;
                acc = Some(match acc {
                    Some(s) => s + p,
                    None => p,
                });
            }
        }
        acc
    }))
}

/// Dense matrix of the blocks with `|i|, |j| ≤ window`, ascending index order.
pub fn truncate(x: &BlockOperator, window: u64) -> Matrix {
    dense(x, &x.row_shape.indices_within(window), &x.col_shape.indices_within(window))
}

fn dense(x: &BlockOperator, rows: &[i64], cols: &[i64]) -> Matrix {
    let roff = offsets(&x.row_shape, rows);
    let coff = offsets(&x.col_shape, cols);
    let mut out = zeros(*roff.last().unwrap_or(&0), *coff.last().unwrap_or(&0));
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            if let Some(blk) = x.block(i, j) {
                out.view_mut((roff[a], coff[b]), blk.shape()).copy_from(&blk);
            }
        }
    }
    out
}

/// Prefix sums of summand dimensions; entry `k` is the start of index `k`.
fn offsets(shape: &BlockShape, idx: &[i64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(idx.len() + 1);
    let mut acc = 0;
    out.push(0);
    for &i in idx {
        acc += shape.dim(i).unwrap_or(0);
        out.push(acc);
    }
    out
}

/// `‖Xⁿ‖₂` for `n = 1..=values.len()` on a central window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerNormSequence {
    /// `values[n - 1] = ‖Xⁿ‖₂`.
    pub values: Vec<f64>,
    pub window: u64,
    pub guard: u64,
}

impl PowerNormSequence {
    pub fn norm(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    /// Whether `‖X^(m+n)‖ ≤ ‖X^m‖·‖X^n‖·(1 + 1e-9)` wherever both sides exist.
    pub fn is_submultiplicative(&self) -> bool {
        let k = self.values.len();
        (1..=k).all(|m| {
            (1..=k - m).all(|n| self.norm(m + n) <= self.norm(m) * self.norm(n) * (1.0 + 1e-9) + 1e-300)
        })
    }
}

/// Powers of `X` on the window `|i| ≤ window`, computed on a larger
/// truncation so that edge effects cannot reach the central window.
pub fn power_norms(x: &BlockOperator, n_max: usize, window: u64) -> Result<PowerNormSequence> {
    if x.row_shape != x.col_shape {
        return Err(Error::ShapeMismatch("power norms need a square block operator".into()));
    }
    let guard = n_max as u64 * x.bandwidth().unwrap_or(1).max(1);
    // indices outside every region carry zero rows and columns
    let outer: Vec<i64> = x
        .row_shape
        .indices_within(window + guard)
        .into_iter()
        .filter(|&i| x.support.iter().any(|r| r.rows.contains(i) || r.cols.contains(i)))
        .collect();
    let off = offsets(&x.row_shape, &outer);
    let mut central = Vec::new();
    for (k, &i) in outer.iter().enumerate() {
        if i.unsigned_abs() <= window {
            central.extend(off[k]..off[k + 1]);
        }
    }
    let big = dense(x, &outer, &outer);
    let mut power = big.clone();
    let mut values = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        if n > 1 {
            power = &power * &big;
        }
        let sub = power.select_rows(central.iter()).select_columns(central.iter());
        values.push(norm2(&sub));
    }
    Ok(PowerNormSequence { values, window, guard })
}

/// `min_n ‖Xⁿ‖^(1/n)`, an upper bound for the spectral radius of the truncation.
pub fn gelfand_estimate(seq: &PowerNormSequence) -> f64 {
    seq.values
        .iter()
        .enumerate()
        .map(|(k, v)| v.powf(1.0 / (k + 1) as f64))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub n: usize,
    pub bound: f64,
    pub computed: f64,
    pub pass: bool,
}

/// Analytic versus computed power norms of a weighted block shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub scale: f64,
    /// `‖L_j‖₂`, `j = 1, 2, …`.
    pub block_norms: Vec<f64>,
    /// `max_j scale^j·‖L_j‖`.
    pub weighted_max: f64,
    pub entries: Vec<BoundEntry>,
    pub pass: bool,
}

/// Block shift with `(j − 1, j)` block `scale^j·L_j` on indices `0..=P`.
pub fn weighted_shift(blocks: &[Matrix], scale: f64) -> Result<BlockOperator> {
    let d = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    if blocks.iter().any(|b| b.shape() != (d, d)) {
        return Err(Error::ShapeMismatch("weighted shift blocks must be square of one size".into()));
    }
    let p = blocks.len() as i64;
    let scaled: Vec<Matrix> =
        blocks.iter().enumerate().map(|(k, b)| b * c(scale.powi(k as i32 + 1), 0.0)).collect();
    let scaled = Arc::new(scaled);
    Ok(BlockOperator::new(
        BlockShape::span(0, p, d),
        BlockShape::span(0, p, d),
        vec![Region::diagonal(1, IndexRange::between(0, p - 1))],
        move |i, _| Some(scaled[i as usize].clone()),
    ))
}

/// Checks `‖Rⁿ‖ ≤ max_j‖scale^j L_j‖ · scale^−(2+3+…+n)` for the weighted
/// shift `R` built from `blocks`.
pub fn weighted_diag_qn_bound(blocks: &[Matrix], scale: f64, n_max: usize) -> Result<BoundReport> {
    let block_norms: Vec<f64> = blocks.iter().map(norm2).collect();
    let weighted_max = block_norms
        .iter()
        .enumerate()
        .map(|(k, b)| scale.powi(k as i32 + 1) * b)
        .fold(0.0, f64::max);
    let computed = if blocks.is_empty() {
        vec![0.0; n_max]
    } else {
        let r = weighted_shift(blocks, scale)?;
        power_norms(&r, n_max, blocks.len() as u64)?.values
    };
    let entries: Vec<BoundEntry> = (1..=n_max)
        .map(|n| {
            let exponent: i64 = (2..=n as i64).sum();
            let bound = weighted_max * scale.powf(-(exponent as f64));
            let value = computed[n - 1];
            BoundEntry { n, bound, computed: value, pass: value <= bound * (1.0 + 1e-9) }
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    Ok(BoundReport { scale, block_norms, weighted_max, entries, pass })
}

/// Outcome of the block-triangular quasi-nilpotency test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Indices `< split` form the first diagonal corner.
    pub split: i64,
    pub window: u64,
    pub threshold: f64,
    pub corner_norms: [PowerNormSequence; 2],
    pub corner_estimates: [f64; 2],
    pub valid: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateOptions {
    pub window: u64,
    pub n_max: usize,
    pub threshold: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions { window: 6, n_max: 10, threshold: 0.1 }
    }
}

/// A block upper triangular operator is quasi-nilpotent when both diagonal
/// corners are; the off-diagonal corner plays no role.
pub fn triangular_qn_certificate(
    x: &BlockOperator,
    split: i64,
    opts: CertificateOptions,
) -> Result<Certificate> {
    let low = IndexRange::at_most(split - 1);
    let high = IndexRange::at_least(split);
    let lower_left = Region::rect(high, low);
    if x.support.iter().any(|r| !r.intersect(&lower_left).is_empty()) {
        return Err(Error::NotTriangular { split });
    }
    let first = x.restrict(low, low);
    let second = x.restrict(high, high);
    let n1 = power_norms(&first, opts.n_max, opts.window)?;
    let n2 = power_norms(&second, opts.n_max, opts.window)?;
    let e = [gelfand_estimate(&n1), gelfand_estimate(&n2)];
    Ok(Certificate {
        split,
        window: opts.window,
        threshold: opts.threshold,
        valid: e[0] < opts.threshold && e[1] < opts.threshold,
        corner_norms: [n1, n2],
        corner_estimates: e,
    })
}

/// JSON description of a block operator: explicit Matrix Market blocks plus
/// generator families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockOperatorManifest {
    pub shape: BlockShape,
    #[serde(default)]
    pub blocks: Vec<ManifestBlock>,
    #[serde(default)]
    pub generators: Vec<Generator>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestBlock {
    pub row: i64,
    pub col: i64,
    /// Matrix Market text.
    pub mtx: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `(i, i + offset) = scale·I` for `i ∈ rows`.
    Shift {
        offset: i64,
        #[serde(default)]
        rows: IndexRange,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `(i, i) = value·I` for `i ∈ rows`.
    Diagonal {
        #[serde(default)]
        rows: IndexRange,
        value: f64,
    },
    /// `(i, i + offset) = base^|i|·I` for `i ∈ rows`.
    Weighted {
        offset: i64,
        #[serde(default)]
        rows: IndexRange,
        base: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Generator {
    fn region(&self) -> Region {
        match *self {
            Generator::Shift { offset, rows, .. } | Generator::Weighted { offset, rows, .. } => {
                Region::diagonal(offset, rows)
            }
            Generator::Diagonal { rows, .. } => Region::diagonal(0, rows),
        }
    }

    fn weight(&self, i: i64) -> f64 {
        match *self {
            Generator::Shift { scale, .. } => scale,
            Generator::Diagonal { value, .. } => value,
            Generator::Weighted { base, .. } => base.powi(i.unsigned_abs() as i32),
        }
    }
}

impl BlockOperatorManifest {
    pub fn to_operator(&self) -> Result<BlockOperator> {
        let mut explicit = BTreeMap::new();
        for b in &self.blocks {
            let m = mtx::parse(&b.mtx)?;
            let want = (self.shape.dim(b.row), self.shape.dim(b.col));
            if want != (Some(m.nrows()), Some(m.ncols())) {
                return Err(Error::ShapeMismatch(format!("manifest block ({}, {})", b.row, b.col)));
            }
            explicit.insert((b.row, b.col), m);
        }
        for g in &self.generators {
            if let Generator::Shift { offset, .. } | Generator::Weighted { offset, .. } = g {
                if let BlockShape::Finite(m) = &self.shape {
                    for (&i, &d) in m {
                        if g.region().rows.contains(i) && m.get(&(i + offset)).is_some_and(|&e| e != d) {
                            return Err(Error::ShapeMismatch("generator needs equal summand dims".into()));
                        }
                    }
                }
            }
        }
        let mut support: Vec<Region> = explicit.keys().map(|&(i, j)| Region::entry(i, j)).collect();
        support.extend(self.generators.iter().map(|g| g.region()));
        let gens = self.generators.clone();
        let shape = self.shape.clone();
        let explicit = Arc::new(explicit);
        Ok(BlockOperator::new(self.shape.clone(), self.shape.clone(), support, move |i, j| {
            let mut acc = explicit.get(&(i, j)).cloned();
            for g in gens.iter().filter(|g| g.region().contains(i, j)) {
                let d = shape.dim(i)?;
                let term = identity(d) * c(g.weight(i), 0.0);
                acc = Some(match acc {
                    Some(a) => a + term,
                    None => term,
                });
            }
            acc
        }))
    }
}
