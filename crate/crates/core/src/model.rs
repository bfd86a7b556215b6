//! One-factor return model `R = β Xᵀ + Z`, beta statistics and synthetic data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{SeedStream, TAG_BETA, TAG_FACTOR, TAG_RESIDUAL};

/// Relative tolerance below which a beta mean is treated as zero.
pub const ZERO_MEAN_TOL: f64 = 1e-12;

/// The unit vector `q = e/√p`.
pub fn unit_q(p: usize) -> DVector<f64> {
    DVector::from_element(p, 1.0 / (p as f64).sqrt())
}

/// Factor exposures of `p ≥ 2` assets.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaVector(DVector<f64>);

impl BetaVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(entries))
    }

    pub fn from_dvector(entries: DVector<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "beta vector needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("beta vector has non-finite entries".into()));
        }
        Ok(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn entries(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.mean()
    }

    /// `b = β/‖β‖`.
    pub fn unit(&self) -> DVector<f64> {
        self.0.normalize()
    }

    /// `β/μ − 1`, the relative deviations used by the dispersion family.
    fn relative_deviations(&self) -> Result<DVector<f64>> {
        let mu = self.mean();
        let scale = self.0.amax();
        if mu.abs() <= ZERO_MEAN_TOL * scale || mu == 0.0 {
            return Err(Error::ZeroMean);
        }
        Ok(self.0.map(|v| v / mu - 1.0))
    }
}

/// Mean `μ_p(β)` and squared dispersion `d_p(β)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaStats {
    pub mean: f64,
    pub dispersion2: f64,
}

pub fn beta_stats(beta: &BetaVector) -> Result<BetaStats> {
    let dev = beta.relative_deviations()?;
    Ok(BetaStats { mean: beta.mean(), dispersion2: dev.norm_squared() / beta.len() as f64 })
}

/// Co-dispersion `d_p(β₁, β₂)` and pointwise correlation `ρ_p(β₁, β₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Codispersion {
    pub codispersion: f64,
    pub correlation: f64,
}

pub fn codispersion(beta1: &BetaVector, beta2: &BetaVector) -> Result<Codispersion> {
    if beta1.len() != beta2.len() {
        return Err(Error::DimensionMismatch { expected: beta1.len(), actual: beta2.len() });
    }
    let p = beta1.len() as f64;
    let dev1 = beta1.relative_deviations()?;
    let dev2 = beta2.relative_deviations()?;
    let d12 = dev1.dot(&dev2) / p;
    let d1 = (dev1.norm_squared() / p).sqrt();
    let d2 = (dev2.norm_squared() / p).sqrt();
    if d1 < 1e-12 || d2 < 1e-12 {
        return Err(Error::ZeroDispersion);
    }
    let correlation = (d12 / (d1 * d2)).clamp(-1.0, 1.0);
    Ok(Codispersion { codispersion: d12, correlation })
}

/// Two beta vectors whose per-asset Gaussian drivers have correlation `rho`.
///
/// Each entry is `mean + sd·g` where `(g₁(i), g₂(i))` is a standard bivariate
/// normal pair with correlation `rho`, independent across assets. The realized
/// pointwise correlation converges to `rho` as `p` grows.
pub fn generate_correlated_betas(
    p: usize,
    beta_mean: f64,
    beta_sd: f64,
    rho: f64,
    seed: u64,
) -> Result<(BetaVector, BetaVector)> {
    if !(beta_sd >= 0.0) || !beta_mean.is_finite() {
        return Err(Error::InvalidParameter("beta_sd must be ≥ 0 and beta_mean finite".into()));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho must lie in [-1, 1], got {rho}")));
    }
    let mut rng = SeedStream::new(seed).derive(TAG_BETA).rng();
    let coupling = (1.0 - rho * rho).sqrt();
    let mut b1 = Vec::with_capacity(p);
    let mut b2 = Vec::with_capacity(p);
    for _ in 0..p {
        let g1: f64 = rng.sample(StandardNormal);
        let fresh: f64 = rng.sample(StandardNormal);
        let g2 = rho * g1 + coupling * fresh;
        b1.push(beta_mean + beta_sd * g1);
        b2.push(beta_mean + beta_sd * g2);
    }
    Ok((BetaVector::new(b1)?, BetaVector::new(b2)?))
}

/// Observed `p × n` panel of excess returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsBlock(DMatrix<f64>);

impl ReturnsBlock {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (p, n) = matrix.shape();
        if p < 2 || n < 2 {
            return Err(Error::InvalidParameter(format!("returns block must be at least 2×2, got {p}×{n}")));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("returns block has non-finite entries".into()));
        }
        Ok(Self(matrix))
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn n(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Side-by-side concatenation `[R₁ R₂]` of two blocks over the same assets.
    pub fn concat(first: &ReturnsBlock, second: &ReturnsBlock) -> Result<ReturnsBlock> {
        if first.p() != second.p() {
            return Err(Error::DimensionMismatch { expected: first.p(), actual: second.p() });
        }
        let (p, n1, n2) = (first.p(), first.n(), second.n());
        let mut m = DMatrix::zeros(p, n1 + n2);
        m.columns_mut(0, n1).copy_from(&first.0);
        m.columns_mut(n1, n2).copy_from(&second.0);
        Ok(ReturnsBlock(m))
    }
}

/// Parameters of one simulated block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationParams {
    pub p: usize,
    pub n: usize,
    /// Factor variance σ².
    pub sigma2: f64,
    /// Idiosyncratic variance δ².
    pub delta2: f64,
    pub beta_mean: f64,
    pub beta_sd: f64,
    pub seed: u64,
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.p < 2 || self.n < 2 {
            return bad("p and n must both be at least 2");
        }
        if !(self.sigma2 > 0.0) || !(self.delta2 > 0.0) {
            return bad("sigma2 and delta2 must be positive");
        }
        if self.beta_mean == 0.0 || !self.beta_mean.is_finite() {
            return bad("beta_mean must be nonzero");
        }
        if !(self.beta_sd >= 0.0) {
            return bad("beta_sd must be nonnegative");
        }
        Ok(())
    }
}

/// Every latent quantity behind a simulated block.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub beta: BetaVector,
    /// `b = β/‖β‖`.
    pub b: DVector<f64>,
    /// Factor returns, length `n`.
    pub x: DVector<f64>,
    /// Residual returns, `p × n`.
    pub z: DMatrix<f64>,
    /// `η = σ²‖β‖²/p`.
    pub eta: f64,
    pub delta2: f64,
}

impl GroundTruth {
    /// Spike scale `pη = σ²‖β‖²` of the true covariance.
    pub fn spike_scale(&self) -> f64 {
        self.eta * self.beta.len() as f64
    }
}

/// `R = β xᵀ + Z`, with `Z = 0` when `z` is `None`.
pub fn compose_returns(beta: &BetaVector, x: &DVector<f64>, z: Option<&DMatrix<f64>>) -> Result<ReturnsBlock> {
    let mut r = beta.entries() * x.transpose();
    if let Some(z) = z {
        if z.shape() != r.shape() {
            return Err(Error::DimensionMismatch { expected: r.len(), actual: z.len() });
        }
        r += z;
    }
    ReturnsBlock::new(r)
}

/// Simulate one block of the one-factor model for a fixed `beta`.
///
/// `X_i ~ N(0, σ²)` iid and `Z_ij ~ N(0, δ²)` iid, each drawn from its own
/// stream under `params.seed`.
pub fn generate_block(params: &GenerationParams, beta: &BetaVector) -> Result<(ReturnsBlock, GroundTruth)> {
    params.validate()?;
    if beta.len() != params.p {
        return Err(Error::DimensionMismatch { expected: params.p, actual: beta.len() });
    }
    let root = SeedStream::new(params.seed);
    let sigma = params.sigma2.sqrt();
    let delta = params.delta2.sqrt();
    let mut xr = root.derive(TAG_FACTOR).rng();
    let x = DVector::from_fn(params.n, |_, _| sigma * xr.sample::<f64, _>(StandardNormal));
    let mut zr = root.derive(TAG_RESIDUAL).rng();
    let z = DMatrix::from_fn(params.p, params.n, |_, _| delta * zr.sample::<f64, _>(StandardNormal));
    let returns = compose_returns(beta, &x, Some(&z))?;
    let eta = params.sigma2 * beta.entries().norm_squared() / params.p as f64;
    let truth = GroundTruth { beta: beta.clone(), b: beta.unit(), x, z, eta, delta2: params.delta2 };
    Ok((returns, truth))
}

/// Draw a single beta vector `mean + sd·g` with `g` iid standard normal.
pub fn generate_betas(p: usize, beta_mean: f64, beta_sd: f64, seed: u64) -> Result<BetaVector> {
    generate_correlated_betas(p, beta_mean, beta_sd, 1.0, seed).map(|(b, _)| b)
}
