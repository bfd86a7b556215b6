//! Estimators of the leading eigenvector `b`: PCA, GPS, general MAPS, the
//! oracle MAPS benchmark, and the two-block dynamic MAPS.
//!
//! The data-driven MAPS estimator shrinks the PCA eigenvector `h` toward its
//! projection on an anchor subspace `L`:
//!
//! ```text
//! ĥ_L = (τ h + proj_L h) / ‖τ h + proj_L h‖,   τ = (ψ² − ‖proj_L h‖²) / (1 − ψ²)
//! ```
//!
//! With `L = span{q}` this is exactly the GPS estimator.

use std::fmt;

use nalgebra::DVector;

use crate::anchors::{orthonormalize, AnchorSubspace, RANK_TOL};
use crate::eigen::{leading_factor, FactorEstimate};
use crate::error::{Error, Result};
use crate::model::{unit_q, ReturnsBlock};

/// Below this norm of `proj_L(h)` the subspace is treated as orthogonal to `h`.
pub const ORTHOGONAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Pca,
    Gps,
    Maps,
    Oracle,
    Dynamic,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pca => "pca",
            Method::Gps => "gps",
            Method::Maps => "maps",
            Method::Oracle => "oracle",
            Method::Dynamic => "dynamic",
        })
    }
}

/// Which block supplies `ψ` for the dynamic estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsiSource {
    /// The current block `R₂`.
    #[default]
    Current,
    /// The concatenated block `[R₁ R₂]`.
    Double,
}

#[derive(Debug, Clone)]
pub struct EstimatorResult {
    pub h_hat: DVector<f64>,
    pub method: Method,
    /// Shrinkage coefficient; `None` for PCA, the oracle and reverted results.
    pub tau: Option<f64>,
    /// The anchor subspace was orthogonal to `h`, so `h` was returned as is.
    pub reverted: bool,
}

pub fn pca(returns: &ReturnsBlock) -> Result<EstimatorResult> {
    let fe = leading_factor(returns)?;
    Ok(EstimatorResult { h_hat: fe.h, method: Method::Pca, tau: None, reverted: false })
}

/// Data-driven MAPS estimator for the anchor subspace `anchors`.
pub fn maps(fe: &FactorEstimate, anchors: &AnchorSubspace) -> Result<EstimatorResult> {
    shrink(&fe.h, fe.psi, anchors, Method::Maps)
}

/// GPS estimator, i.e. MAPS on `span{q}`.
pub fn gps(fe: &FactorEstimate) -> Result<EstimatorResult> {
    shrink(&fe.h, fe.psi, &AnchorSubspace::span_q(fe.p()), Method::Gps)
}

fn shrink(h: &DVector<f64>, psi: f64, anchors: &AnchorSubspace, method: Method) -> Result<EstimatorResult> {
    if anchors.p() != h.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), actual: anchors.p() });
    }
    let m = anchors.project(h);
    let m2 = m.norm_squared();
    if m2.sqrt() < ORTHOGONAL_TOL {
        return Ok(EstimatorResult { h_hat: h.clone(), method, tau: None, reverted: true });
    }
    let psi2 = psi * psi;
    if psi >= 1.0 - 1e-12 {
        return Err(Error::DegenerateShrinkage("psi = 1: no residual spectrum to separate signal from noise"));
    }
    let tau = (psi2 - m2) / (1.0 - psi2);
    let mut v = h * tau + m;
    let norm = v.norm();
    if norm < 1e-12 {
        return Err(Error::DegenerateShrinkage("h lies in the anchor subspace, tau h + proj(h) vanishes"));
    }
    v /= norm;
    Ok(EstimatorResult { h_hat: v, method, tau: Some(tau), reverted: false })
}

/// Oracle MAPS: normalized projection of the true `b` onto `span{h, L}`.
pub fn oracle_maps(h: &DVector<f64>, b: &DVector<f64>, anchors: &AnchorSubspace) -> Result<EstimatorResult> {
    if h.len() != b.len() || anchors.p() != h.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), actual: b.len().max(anchors.p()) });
    }
    let mut vectors = vec![h.clone()];
    vectors.extend(anchors.vectors());
    let span = orthonormalize(&vectors, RANK_TOL)?;
    let proj = span.project(b);
    let norm = proj.norm();
    if norm < 1e-12 {
        return Err(Error::DegenerateProjection);
    }
    Ok(EstimatorResult { h_hat: proj / norm, method: Method::Oracle, tau: None, reverted: false })
}

/// Dynamic MAPS: shrink the current-block eigenvector toward `span{h₁, q}`,
/// where `h₁` is the PCA eigenvector of the previous block.
pub fn dynamic_maps(previous: &ReturnsBlock, current: &ReturnsBlock, psi_source: PsiSource) -> Result<EstimatorResult> {
    if previous.p() != current.p() {
        return Err(Error::DimensionMismatch { expected: current.p(), actual: previous.p() });
    }
    let h1 = leading_factor(previous)?.h;
    let fe2 = leading_factor(current)?;
    let psi = match psi_source {
        PsiSource::Current => fe2.psi,
        PsiSource::Double => leading_factor(&ReturnsBlock::concat(previous, current)?)?.psi,
    };
    dynamic_from_parts(&h1, &fe2, psi)
}

/// Dynamic MAPS from precomputed pieces; `psi` overrides `current.psi`.
pub fn dynamic_from_parts(h_previous: &DVector<f64>, current: &FactorEstimate, psi: f64) -> Result<EstimatorResult> {
    let anchors = orthonormalize(&[h_previous.clone(), unit_q(current.p())], RANK_TOL)?;
    shrink(&current.h, psi, &anchors, Method::Dynamic)
}
