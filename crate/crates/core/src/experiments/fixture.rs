//! Synthetic stand-in for a panel of historical betas.
//!
//! Each asset belongs to one of a few sectors. Its beta in period `t` is
//! `mean + offset[sector] + u_t`, where the sector offsets are drawn once and
//! `u_t` is a stationary AR(1) process across periods. The result has both the
//! serial correlation and the sector clustering seen in estimated market betas.

use rand::Rng;
use rand_distr::StandardNormal;

use super::io::BetaTable;
use crate::error::{Error, Result};
use crate::model::BetaVector;
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureParams {
    pub p: usize,
    pub periods: usize,
    pub sectors: usize,
    pub mean: f64,
    /// Standard deviation of the per-sector offsets.
    pub sector_sd: f64,
    /// Stationary standard deviation of the asset-level AR(1) component.
    pub idio_sd: f64,
    /// AR(1) coefficient across consecutive periods.
    pub ar: f64,
}

impl Default for FixtureParams {
    /// 488 assets, 24 periods, 11 sectors; total beta sd `√(0.3² + 0.4²) = 0.5`.
    fn default() -> Self {
        Self { p: 488, periods: 24, sectors: 11, mean: 1.0, sector_sd: 0.3, idio_sd: 0.4, ar: 0.9 }
    }
}

const TAG_SECTOR: u64 = 1;
const TAG_PATH: u64 = 2;

/// Generate a beta table. Asset `i` is placed in sector `i mod sectors`.
pub fn generate_fixture(params: &FixtureParams, seed: u64) -> Result<BetaTable> {
    let FixtureParams { p, periods, sectors, mean, sector_sd, idio_sd, ar } = *params;
    if p < 3 || periods == 0 || sectors == 0 || sectors >= p {
        return Err(Error::InvalidParameter(format!(
            "fixture needs p ≥ 3, periods ≥ 1 and 1 ≤ sectors < p; got p={p} periods={periods} sectors={sectors}"
        )));
    }
    if !(ar.abs() < 1.0) || !(sector_sd >= 0.0) || !(idio_sd >= 0.0) {
        return Err(Error::InvalidParameter("fixture needs |ar| < 1 and nonnegative sds".into()));
    }
    let root = SeedStream::new(seed);
    let mut rng = root.derive(TAG_SECTOR).rng();
    let offsets: Vec<f64> = (0..sectors).map(|_| sector_sd * rng.sample::<f64, _>(StandardNormal)).collect();

    let mut rng = root.derive(TAG_PATH).rng();
    let innovation_sd = idio_sd * (1.0 - ar * ar).sqrt();
    let mut u: Vec<f64> = (0..p).map(|_| idio_sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut columns = Vec::with_capacity(periods);
    for t in 0..periods {
        if t > 0 {
            for ui in u.iter_mut() {
                *ui = ar * *ui + innovation_sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let col = (0..p).map(|i| mean + offsets[i % sectors] + u[i]).collect();
        columns.push(BetaVector::new(col)?);
    }
    let width = sectors.to_string().len().max(2);
    Ok(BetaTable {
        asset_ids: (1..=p).map(|i| format!("A{i:04}")).collect(),
        sectors: (0..p).map(|i| format!("S{:0width$}", i % sectors + 1)).collect(),
        columns,
    })
}
