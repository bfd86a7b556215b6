//! Minimum-variance portfolios under one-factor covariance models and the
//! diagnostics that compare an estimated model with the truth.
//!
//! All quadratic forms use the rank-one-plus-diagonal structure
//! `Σ = S·vvᵀ + δ²I` and never build a `p × p` matrix.

use nalgebra::DVector;

use crate::eigen::FactorEstimate;
use crate::error::{Error, Result};
use crate::model::{unit_q, GroundTruth};

/// `Σ = spike_scale · vvᵀ + δ² I` with `v` a unit vector.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    unit_vector: DVector<f64>,
    spike_scale: f64,
    delta2: f64,
}

impl CovarianceModel {
    /// `unit_vector` is normalized on construction.
    pub fn new(unit_vector: DVector<f64>, spike_scale: f64, delta2: f64) -> Result<Self> {
        if !(spike_scale > 0.0) || !spike_scale.is_finite() {
            return Err(Error::InvalidParameter(format!("spike scale must be positive, got {spike_scale}")));
        }
        if !(delta2 > 0.0) || !delta2.is_finite() {
            return Err(Error::InvalidParameter(format!("delta2 must be positive, got {delta2}")));
        }
        let norm = unit_vector.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter("model direction must be a nonzero vector".into()));
        }
        Ok(Self { unit_vector: unit_vector / norm, spike_scale, delta2 })
    }

    /// True covariance of a simulated block.
    pub fn from_truth(truth: &GroundTruth) -> Result<Self> {
        Self::new(truth.b.clone(), truth.spike_scale(), truth.delta2)
    }

    /// Estimated model with direction `h` and scalars from [`scalar_estimates`].
    pub fn estimated(h: &DVector<f64>, fe: &FactorEstimate, n: usize) -> Result<Self> {
        let (spike, delta2) = scalar_estimates(fe, n, h.len())?;
        Self::new(h.clone(), spike, delta2)
    }

    pub fn unit_vector(&self) -> &DVector<f64> {
        &self.unit_vector
    }

    pub fn p(&self) -> usize {
        self.unit_vector.len()
    }

    /// `pη`.
    pub fn spike_scale(&self) -> f64 {
        self.spike_scale
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }

    /// `η = spike_scale / p`.
    pub fn eta(&self) -> f64 {
        self.spike_scale / self.p() as f64
    }

    /// `k² = δ²/(pη)`.
    pub fn k2(&self) -> f64 {
        self.delta2 / self.spike_scale
    }

    /// `xᵀ Σ y`.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.spike_scale * x.dot(&self.unit_vector) * y.dot(&self.unit_vector) + self.delta2 * x.dot(y)
    }
}

/// Fully invested portfolio weights (`eᵀw = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights(DVector<f64>);

impl PortfolioWeights {
    pub fn new(w: DVector<f64>) -> Result<Self> {
        let total = w.sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Spike scale `s² − ℓ²` and residual variance `(n/p) ℓ²` from the spectrum.
pub fn scalar_estimates(fe: &FactorEstimate, n: usize, p: usize) -> Result<(f64, f64)> {
    let spike = fe.s2 - fe.l2;
    if !(spike > 0.0) {
        return Err(Error::NoGap);
    }
    Ok((spike, n as f64 * fe.l2 / p as f64))
}

/// Closed-form minimum-variance portfolio of `model`:
///
/// ```text
/// w = (ρq − v) / (√p (ρ − (v,q))),   ρ = (1 + k²)/(v,q)
/// ```
pub fn min_var_weights(model: &CovarianceModel) -> Result<PortfolioWeights> {
    let p = model.p();
    let q = unit_q(p);
    let v = model.unit_vector();
    let vq = v.dot(&q);
    if vq.abs() < 1e-10 {
        return Err(Error::OrthogonalToQ);
    }
    let rho = (1.0 + model.k2()) / vq;
    let w = (q * rho - v) / ((p as f64).sqrt() * (rho - vq));
    Ok(PortfolioWeights(w))
}

fn q_overlap_guard(x: &DVector<f64>, err: Error) -> Result<f64> {
    let xq = x.sum() / (x.len() as f64).sqrt();
    if 1.0 - xq * xq < 1e-12 {
        return Err(err);
    }
    Ok(xq)
}

/// Optimization bias `ℰ(h) = ((b,q) − (b,h)(h,q)) / (1 − (h,q)²)`.
pub fn optimization_bias(h: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    let hq = q_overlap_guard(h, Error::HAtQ)?;
    let bq = b.sum() / (b.len() as f64).sqrt();
    Ok((bq - b.dot(h) * hq) / (1.0 - hq * hq))
}

/// Eigenvector bias `𝒟(h) = (h,q)²(1 − (h,b)²) / ((1 − (h,q)²)(1 − (b,q)²))`.
pub fn eigenvector_bias(h: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    let hq = q_overlap_guard(h, Error::HAtQ)?;
    let bq = q_overlap_guard(b, Error::BAtQ)?;
    let hb = h.dot(b);
    Ok(hq * hq * (1.0 - hb * hb) / ((1.0 - hq * hq) * (1.0 - bq * bq)))
}

/// Chordal variant `(h,q)²‖h−b‖² / (‖h−q‖²‖b−q‖²)` of the eigenvector bias.
///
/// It differs from [`eigenvector_bias`] by the factor
/// `2(1+(h,b)) / ((1+(h,q))(1+(b,q)))`, so the two only agree approximately
/// when all three vectors are close. Kept for comparison.
pub fn eigenvector_bias_chordal(h: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    let q = unit_q(h.len());
    let hq = q_overlap_guard(h, Error::HAtQ)?;
    q_overlap_guard(b, Error::BAtQ)?;
    Ok(hq * hq * (h - b).norm_squared() / ((h - &q).norm_squared() * (b - &q).norm_squared()))
}

/// Variance `wᵀΣw` of a portfolio under `model`.
pub fn true_variance(w: &PortfolioWeights, model: &CovarianceModel) -> f64 {
    model.bilinear(w.as_vector(), w.as_vector())
}

/// `𝒯² = (ŵ − w)ᵀ Σ (ŵ − w)`.
pub fn tracking_error_exact(w_hat: &PortfolioWeights, w: &PortfolioWeights, truth: &CovarianceModel) -> f64 {
    let delta = w_hat.as_vector() - w.as_vector();
    truth.bilinear(&delta, &delta)
}

/// Leading-order tracking error `ηℰ² + (δ²/p)𝒟 + (C/p)ℰ` with
/// `C = 2/(ξ(1+d²)) · (δ² + (η/η̂) δ̂²)`.
///
/// `h` is `est.unit_vector()` and `b` is `truth.unit_vector()`. The dispersion
/// enters through `1 + d² = 1/(b,q)²`, and `ξ` is taken as the realized
/// `min(1 − (h,q)², 1 − (b,q)²)`.
pub fn tracking_error_asymptotic(truth: &CovarianceModel, est: &CovarianceModel) -> Result<f64> {
    Ok(tracking_error_terms(truth, est)?.total())
}

/// The three terms of [`tracking_error_asymptotic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingErrorTerms {
    pub bias: f64,
    pub eigenvector: f64,
    pub cross: f64,
}

impl TrackingErrorTerms {
    pub fn total(&self) -> f64 {
        self.bias + self.eigenvector + self.cross
    }
}

pub fn tracking_error_terms(truth: &CovarianceModel, est: &CovarianceModel) -> Result<TrackingErrorTerms> {
    if truth.p() != est.p() {
        return Err(Error::DimensionMismatch { expected: truth.p(), actual: est.p() });
    }
    let (h, b) = (est.unit_vector(), truth.unit_vector());
    let p = truth.p() as f64;
    let e = optimization_bias(h, b)?;
    let d = eigenvector_bias(h, b)?;
    let q = unit_q(truth.p());
    let (hq, bq) = (h.dot(&q), b.dot(&q));
    let xi = (1.0 - hq * hq).min(1.0 - bq * bq);
    let c = 2.0 * bq * bq / xi * (truth.delta2() + truth.eta() / est.eta() * est.delta2());
    Ok(TrackingErrorTerms { bias: truth.eta() * e * e, eigenvector: truth.delta2() / p * d, cross: c / p * e })
}

/// Variance forecast ratio `(ŵᵀΣŵ)/(ŵᵀΣ̂ŵ)` for the minimum-variance
/// portfolio of `est`, returned with `p·ℰ²(h)` for comparison.
pub fn variance_forecast_ratio(truth: &CovarianceModel, est: &CovarianceModel) -> Result<(f64, f64)> {
    let w_hat = min_var_weights(est)?;
    let ratio = true_variance(&w_hat, truth) / true_variance(&w_hat, est);
    let e = optimization_bias(est.unit_vector(), truth.unit_vector())?;
    Ok((ratio, truth.p() as f64 * e * e))
}
