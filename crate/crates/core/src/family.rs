//! Seeded test families.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decompose::CanonicalBlocks;
use crate::error::{Error, Result};
use crate::linalg::{assemble, c, diag, svd, zeros, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Discretized integration operator, lower triangular.
    Volterra,
    /// Superdiagonal `decay^j`.
    WeightedShift,
    /// Diagonal `decay^j`.
    Diagonal,
    /// `W_i·diag(decay^j)·V*` with the `W_i` stacking to an isometry.
    RandomCompact,
    /// Products of random rectangular factors, or with `structured` a
    /// family sharing an orthogonal kernel and cokernel.
    RandomSingular,
    /// Assembled canonical forms with compact outer blocks.
    CanonicalFormSynthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyDescriptor {
    pub kind: FamilyKind,
    /// Matrix size; block size for `canonical-form-synthetic`.
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_dim: Option<usize>,
    #[serde(default)]
    pub structured: bool,
}

fn one() -> usize {
    1
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidDescriptor(msg.into())
}

impl FamilyDescriptor {
    pub fn new(kind: FamilyKind, n: usize) -> Self {
        FamilyDescriptor { kind, n, decay: None, seed: None, count: 1, kernel_dim: None, structured: false }
    }

    pub fn decay(mut self, decay: f64) -> Self {
        self.decay = Some(decay);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn kernel_dim(mut self, k: usize) -> Self {
        self.kernel_dim = Some(k);
        self
    }

    pub fn structured(mut self) -> Self {
        self.structured = true;
        self
    }

    fn is_random(&self) -> bool {
        matches!(self.kind, FamilyKind::RandomCompact | FamilyKind::RandomSingular | FamilyKind::CanonicalFormSynthetic)
    }

    fn needs_decay(&self) -> bool {
        matches!(
            self.kind,
            FamilyKind::WeightedShift | FamilyKind::Diagonal | FamilyKind::RandomCompact | FamilyKind::CanonicalFormSynthetic
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(bad("n must be positive"));
        }
        if self.count == 0 {
            return Err(bad("count must be positive"));
        }
        if self.needs_decay() {
            match self.decay {
                Some(d) if d > 0.0 && d < 1.0 => {}
                Some(d) => return Err(bad(format!("decay must lie in (0, 1), got {d}"))),
                None => return Err(bad("decay is required for this kind")),
            }
        }
        if self.is_random() && self.seed.is_none() {
            return Err(bad("seed is required for random kinds"));
        }
        if self.count > 1 && !self.is_random() {
            return Err(bad("deterministic kinds produce a single matrix"));
        }
        if self.kind == FamilyKind::RandomSingular {
            let k = self.kernel_dim.ok_or_else(|| bad("kernel_dim is required for random-singular"))?;
            let limit = if self.structured { self.n / 2 } else { self.n };
            if k == 0 || k > limit || (self.structured && 2 * k > self.n) {
                return Err(bad(format!("kernel_dim {k} out of range for n = {}", self.n)));
            }
        }
        Ok(())
    }
}

/// Generated matrices; canonical kinds keep their blocks.
#[derive(Clone, Debug)]
pub struct Family {
    pub matrices: Vec<Matrix>,
    pub canonical: Option<Vec<CanonicalBlocks>>,
}

fn gaussian(r: usize, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(r, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0)
    })
}

/// Orthonormal columns from the polar factor of a Gaussian matrix.
fn isometry(r: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let s = svd(&gaussian(r, n, rng))?;
    Ok(s.left.into_matrix() * s.right.into_matrix().adjoint())
}

fn powers(decay: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|j| decay.powi(j as i32)).collect()
}

pub fn volterra(n: usize) -> Matrix {
    let h = 1.0 / n as f64;
    Matrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => c(h, 0.0),
        std::cmp::Ordering::Equal => c(h / 2.0, 0.0),
        std::cmp::Ordering::Less => c(0.0, 0.0),
    })
}

pub fn weighted_shift(weights: &[f64]) -> Matrix {
    let n = weights.len() + 1;
    let mut m = zeros(n, n);
    for (i, w) in weights.iter().enumerate() {
        m[(i, i + 1)] = c(*w, 0.0);
    }
    m
}

/// Members with `Σ K_i*K_i = V·diag(decay^(2j))·V*`.
pub fn compact_family(n: usize, decay: f64, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Matrix>> {
    let w = isometry(count * n, n, rng)?;
    let v = isometry(n, n, rng)?;
    let core = diag(&powers(decay, n)) * v.adjoint();
    Ok((0..count).map(|i| w.rows(i * n, n) * &core).collect())
}

fn canonical_member(d: usize, decay: f64, rng: &mut ChaCha8Rng) -> Result<CanonicalBlocks> {
    let k = compact_family(d, decay, 1, rng)?.remove(0);
    let l = compact_family(d, decay, 1, rng)?.remove(0);
    Ok(CanonicalBlocks {
        a: gaussian(d, d, rng),
        b: zeros(d, d),
        k,
        c: gaussian(d, d, rng),
        d: gaussian(d, d, rng),
        l,
        corner: zeros(d, d),
    })
}

pub fn generate(desc: &FamilyDescriptor) -> Result<Family> {
    desc.validate()?;
    let n = desc.n;
    let decay = desc.decay.unwrap_or(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(desc.seed.unwrap_or(0));
    let mut canonical = None;
    let matrices = match desc.kind {
        FamilyKind::Volterra => vec![volterra(n)],
        FamilyKind::WeightedShift => vec![weighted_shift(&powers(decay, n - 1))],
        FamilyKind::Diagonal => vec![diag(&powers(decay, n))],
        FamilyKind::RandomCompact => compact_family(n, decay, desc.count, &mut rng)?,
        FamilyKind::RandomSingular => {
            let k = desc.kernel_dim.unwrap_or(1);
            if desc.structured {
                let w = isometry(n, n, &mut rng)?;
                let m = n - 2 * k;
                (0..desc.count)
                    .map(|_| {
                        let blk = assemble(&[
                            vec![zeros(k, k), gaussian(k, m, &mut rng), zeros(k, k)],
                            vec![zeros(m, k), gaussian(m, m, &mut rng), gaussian(m, k, &mut rng)],
                            vec![zeros(k, k), zeros(k, m), zeros(k, k)],
                        ]);
                        &w * blk * w.adjoint()
                    })
                    .collect()
            } else {
                (0..desc.count).map(|_| gaussian(n, n - k, &mut rng) * gaussian(n - k, n, &mut rng)).collect()
            }
        }
        FamilyKind::CanonicalFormSynthetic => {
            let blocks: Vec<CanonicalBlocks> =
                (0..desc.count).map(|_| canonical_member(n, decay, &mut rng)).collect::<Result<_>>()?;
            let ms = blocks.iter().map(|b| b.assemble()).collect();
            canonical = Some(blocks);
            ms
        }
    };
    Ok(Family { matrices, canonical })
}
