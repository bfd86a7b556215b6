//! Monte Carlo comparison of the estimators.
//!
//! Three drivers share one pattern: enumerate `(cell, trial)` jobs, run them
//! in parallel with per-job seeds derived from `(master_seed, cell, trial)`,
//! then aggregate in job order. The cell is a rho-grid index for the
//! double-block experiment, a beta column for the single-block experiment and
//! a period pair for the historical double-block experiment.
//!
//! Estimators that fail on a trial (no spectral gap, degenerate shrinkage,
//! estimate at `q`, ...) are counted as degenerate for that cell and not retried.

mod config;
mod fixture;
mod io;
mod records;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;

pub use config::{parse_psi_source, EstimatorTag, ExperimentConfig, Scenario};
pub use fixture::{generate_fixture, FixtureParams};
pub use io::{parse_returns, parse_sector_partition, read_returns, read_sector_partition, returns_to_csv, BetaTable};
pub use records::{read_csv, summarize, write_csv, BoxSummary, ExpectedRecord, FiveNumber, Metric, TrialRecord};

use crate::anchors::{beta_ordered_partition, partition_subspace, AnchorSubspace, Partition};
use crate::eigen::{leading_factor, FactorEstimate};
use crate::error::{Error, Result};
use crate::estimators::{dynamic_from_parts, gps, maps, PsiSource};
use crate::model::{
    codispersion, generate_block, generate_correlated_betas, BetaVector, GenerationParams, GroundTruth, ReturnsBlock,
};
use crate::portfolio::{
    min_var_weights, optimization_bias, tracking_error_exact, variance_forecast_ratio, CovarianceModel,
};
use crate::rng::SeedStream;

/// Number of period pairs `(t, t + 12)` in the historical double-block experiment.
pub const HISTORICAL_PAIRS: usize = 12;

const TAG_BLOCK1: u64 = 1;
const TAG_BLOCK2: u64 = 2;

/// The four per-trial metrics of an estimate against the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub l2_error: f64,
    pub tracking_p: f64,
    pub opt_bias_p: f64,
    pub forecast_ratio: f64,
}

/// Score `h_hat` against the true model. The estimated model pairs `h_hat`
/// with the spike and residual scalars of `fe`, the block the estimate is
/// applied to.
pub fn evaluate(h_hat: &DVector<f64>, truth: &GroundTruth, fe: &FactorEstimate, n: usize) -> Result<Metrics> {
    let p = h_hat.len() as f64;
    let true_model = CovarianceModel::from_truth(truth)?;
    let est = CovarianceModel::estimated(h_hat, fe, n)?;
    let w = min_var_weights(&true_model)?;
    let w_hat = min_var_weights(&est)?;
    let e = optimization_bias(h_hat, &truth.b)?;
    let (ratio, _) = variance_forecast_ratio(&true_model, &est)?;
    Ok(Metrics {
        l2_error: (h_hat - &truth.b).norm(),
        tracking_p: p * tracking_error_exact(&w_hat, &w, &true_model),
        opt_bias_p: p * e * e,
        forecast_ratio: ratio,
    })
}

/// Records of one trial: one row per estimator that succeeded, plus the tags
/// of those that were degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub block: usize,
    pub records: Vec<TrialRecord>,
    pub degenerate: Vec<EstimatorTag>,
}

impl TrialOutcome {
    fn collect(
        trial_index: usize,
        block: usize,
        rho: Option<f64>,
        results: Vec<(EstimatorTag, Result<Metrics>)>,
    ) -> Self {
        let mut out = TrialOutcome { block, records: Vec::new(), degenerate: Vec::new() };
        for (estimator, r) in results {
            match r {
                Ok(m) => out.records.push(TrialRecord {
                    trial_index,
                    block,
                    rho,
                    estimator,
                    l2_error: m.l2_error,
                    tracking_p: m.tracking_p,
                    opt_bias_p: m.opt_bias_p,
                    forecast_ratio: m.forecast_ratio,
                }),
                Err(_) => out.degenerate.push(estimator),
            }
        }
        out
    }
}

/// Everything an experiment run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub trials: Vec<TrialRecord>,
    pub summaries: Vec<BoxSummary>,
    /// Per-cell Monte Carlo means; empty for the double-block experiment.
    pub expected: Vec<ExpectedRecord>,
}

impl ExperimentOutput {
    /// Write `trials.csv`, `summary.csv`, `expected.csv` (when nonempty),
    /// `config.txt` and a `plot.py` script into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_csv(&self.trials, fs::File::create(dir.join("trials.csv"))?)?;
        write_csv(&self.summaries, fs::File::create(dir.join("summary.csv"))?)?;
        if !self.expected.is_empty() {
            write_csv(&self.expected, fs::File::create(dir.join("expected.csv"))?)?;
        }
        fs::write(dir.join("config.txt"), config.to_text())?;
        fs::write(dir.join("plot.py"), PLOT_SCRIPT)?;
        Ok(())
    }
}

/// Lazily shared leading-factor results of one trial.
struct Factors {
    current: Result<FactorEstimate>,
    previous: Option<Result<FactorEstimate>>,
    double: Option<Result<FactorEstimate>>,
}

fn borrow(fe: &Result<FactorEstimate>) -> Result<&FactorEstimate> {
    fe.as_ref().map_err(|_| Error::DegenerateSpectrum)
}

fn borrow_opt(fe: &Option<Result<FactorEstimate>>) -> Result<&FactorEstimate> {
    match fe {
        Some(r) => borrow(r),
        None => Err(Error::DegenerateSpectrum),
    }
}

/// Evaluate one estimator tag given the factor estimates of a trial.
fn run_estimator(
    tag: EstimatorTag,
    cfg: &ExperimentConfig,
    factors: &Factors,
    truth: &GroundTruth,
    sectors: Option<&AnchorSubspace>,
) -> Result<Metrics> {
    let fe = borrow(&factors.current)?;
    let h_hat = match tag {
        EstimatorTag::Pca1 => fe.h.clone(),
        EstimatorTag::Pca2 => borrow_opt(&factors.double)?.h.clone(),
        EstimatorTag::Gps1 => gps(fe)?.h_hat,
        EstimatorTag::Gps2 => gps(borrow_opt(&factors.double)?)?.h_hat,
        EstimatorTag::DynMaps => {
            let psi = match cfg.psi_source {
                PsiSource::Current => fe.psi,
                PsiSource::Double => borrow_opt(&factors.double)?.psi,
            };
            dynamic_from_parts(&borrow_opt(&factors.previous)?.h, fe, psi)?.h_hat
        }
        EstimatorTag::BetaOrdered => {
            let partition = beta_ordered_partition(&truth.beta, cfg.num_atoms)?;
            maps(fe, &partition_subspace(&partition))?.h_hat
        }
        EstimatorTag::Sector => {
            let anchors = sectors.ok_or_else(|| Error::Config("sector estimator needs a sector partition".into()))?;
            maps(fe, anchors)?.h_hat
        }
    };
    evaluate(&h_hat, truth, fe, cfg.n)
}

fn block_params(cfg: &ExperimentConfig, p: usize, seed: u64) -> GenerationParams {
    GenerationParams {
        p,
        n: cfg.n,
        sigma2: cfg.sigma2,
        delta2: cfg.delta2,
        beta_mean: cfg.beta_mean,
        beta_sd: cfg.beta_sd,
        seed,
    }
}

fn needs_double(cfg: &ExperimentConfig) -> bool {
    cfg.estimators.iter().any(|t| matches!(t, EstimatorTag::Pca2 | EstimatorTag::Gps2))
        || (cfg.psi_source == PsiSource::Double && cfg.estimators.contains(&EstimatorTag::DynMaps))
}

/// Simulate consecutive blocks for `(beta1, beta2)` and score every
/// configured estimator against `beta2`.
fn two_block_trial(
    cfg: &ExperimentConfig,
    stream: SeedStream,
    beta1: &BetaVector,
    beta2: &BetaVector,
) -> Result<Vec<(EstimatorTag, Result<Metrics>)>> {
    let p = beta2.len();
    let (r1, _) = generate_block(&block_params(cfg, p, stream.derive(TAG_BLOCK1).seed()), beta1)?;
    let (r2, truth) = generate_block(&block_params(cfg, p, stream.derive(TAG_BLOCK2).seed()), beta2)?;
    let factors = Factors {
        current: leading_factor(&r2),
        previous: Some(leading_factor(&r1)),
        double: needs_double(cfg).then(|| leading_factor(&ReturnsBlock::concat(&r1, &r2)?)),
    };
    Ok(cfg.estimators.iter().map(|&t| (t, run_estimator(t, cfg, &factors, &truth, None))).collect())
}

/// One trial of the double-block experiment at `cfg.rho_grid[rho_index]`.
///
/// The trial seed depends only on `(master_seed, rho_index, trial)`.
pub fn double_block_trial(cfg: &ExperimentConfig, rho_index: usize, trial: usize) -> Result<TrialOutcome> {
    let rho =
        *cfg.rho_grid.get(rho_index).ok_or_else(|| Error::Config(format!("rho index {rho_index} out of range")))?;
    let stream = SeedStream::new(cfg.master_seed).derive_path(&[rho_index as u64, trial as u64]);
    let (beta1, beta2) = generate_correlated_betas(cfg.p, cfg.beta_mean, cfg.beta_sd, rho, stream.seed())?;
    let results = two_block_trial(cfg, stream, &beta1, &beta2)?;
    Ok(TrialOutcome::collect(trial, rho_index, Some(rho), results))
}

/// Double-block experiment with synthetic correlated betas.
pub fn run_double_block(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.scenario != Scenario::Double {
        return Err(Error::Config(format!("run_double_block needs scenario double, got {}", cfg.scenario.as_str())));
    }
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..cfg.rho_grid.len()).flat_map(|i| (0..cfg.trials).map(move |t| (i, t))).collect();
    let outcomes = jobs.par_iter().map(|&(i, t)| double_block_trial(cfg, i, t)).collect::<Result<Vec<_>>>()?;
    let rhos: Vec<Option<f64>> = cfg.rho_grid.iter().copied().map(Some).collect();
    let (trials, cells) = gather(&outcomes);
    let mut summaries = Vec::new();
    for ((block, tag), cell) in &cells {
        summaries.extend(cell.summaries(*tag, rhos[*block])?);
    }
    Ok(ExperimentOutput { trials, summaries, expected: Vec::new() })
}

/// One trial of the single-block experiment on beta column `column`.
pub fn single_block_trial(
    cfg: &ExperimentConfig,
    table: &BetaTable,
    sectors: Option<&AnchorSubspace>,
    column: usize,
    trial: usize,
) -> Result<TrialOutcome> {
    let beta = table.columns.get(column).ok_or_else(|| Error::Config(format!("beta column {column} out of range")))?;
    let stream = SeedStream::new(cfg.master_seed).derive_path(&[column as u64, trial as u64]);
    let (r, truth) = generate_block(&block_params(cfg, beta.len(), stream.derive(TAG_BLOCK2).seed()), beta)?;
    let factors = Factors { current: leading_factor(&r), previous: None, double: None };
    let results = cfg.estimators.iter().map(|&t| (t, run_estimator(t, cfg, &factors, &truth, sectors))).collect();
    Ok(TrialOutcome::collect(trial, column, None, results))
}

/// Single-block experiment over every beta column of `table`.
///
/// The sector estimator uses `sectors` when given and otherwise the table's
/// own sector column. The number of assets is taken from the table.
pub fn run_single_block(
    cfg: &ExperimentConfig,
    table: &BetaTable,
    sectors: Option<&Partition>,
) -> Result<ExperimentOutput> {
    if !matches!(cfg.scenario, Scenario::Single | Scenario::HistoricalSingle) {
        return Err(Error::Config(format!("run_single_block needs scenario single, got {}", cfg.scenario.as_str())));
    }
    cfg.validate()?;
    cfg.validate_atoms(table.p())?;
    let sector_space = if cfg.estimators.contains(&EstimatorTag::Sector) {
        let partition = match sectors {
            Some(p) => p.clone(),
            None => table.sector_partition()?,
        };
        if partition.p() != table.p() {
            return Err(Error::DimensionMismatch { expected: table.p(), actual: partition.p() });
        }
        Some(partition_subspace(&partition))
    } else {
        None
    };
    let jobs: Vec<(usize, usize)> =
        (0..table.num_columns()).flat_map(|j| (0..cfg.trials).map(move |t| (j, t))).collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(j, t)| single_block_trial(cfg, table, sector_space.as_ref(), j, t))
        .collect::<Result<Vec<_>>>()?;
    let rhos = vec![None; table.num_columns()];
    aggregate_expected(outcomes, &rhos)
}

/// One trial of the historical double-block experiment on period pair
/// `(pair, pair + 12)`.
pub fn historical_double_trial(
    cfg: &ExperimentConfig,
    table: &BetaTable,
    pair: usize,
    trial: usize,
) -> Result<TrialOutcome> {
    let (beta1, beta2) = historical_pair(table, pair)?;
    let stream = SeedStream::new(cfg.master_seed).derive_path(&[pair as u64, trial as u64]);
    let rho = codispersion(beta1, beta2).ok().map(|c| c.correlation);
    let results = two_block_trial(cfg, stream, beta1, beta2)?;
    Ok(TrialOutcome::collect(trial, pair, rho, results))
}

fn historical_pair(table: &BetaTable, pair: usize) -> Result<(&BetaVector, &BetaVector)> {
    if table.num_columns() < 2 * HISTORICAL_PAIRS {
        return Err(Error::Config(format!(
            "historical double block needs at least {} beta columns, found {}",
            2 * HISTORICAL_PAIRS,
            table.num_columns()
        )));
    }
    if pair >= HISTORICAL_PAIRS {
        return Err(Error::Config(format!("pair index {pair} out of range")));
    }
    Ok((&table.columns[pair], &table.columns[pair + HISTORICAL_PAIRS]))
}

/// Historical double-block experiment: blocks simulated from the betas of
/// periods `t` and `t + 12`, scored against the later one.
pub fn run_historical_double(cfg: &ExperimentConfig, table: &BetaTable) -> Result<ExperimentOutput> {
    if cfg.scenario != Scenario::HistoricalDouble {
        return Err(Error::Config(format!(
            "run_historical_double needs scenario historical_double, got {}",
            cfg.scenario.as_str()
        )));
    }
    cfg.validate()?;
    cfg.validate_atoms(table.p())?;
    historical_pair(table, 0)?;
    let jobs: Vec<(usize, usize)> = (0..HISTORICAL_PAIRS).flat_map(|j| (0..cfg.trials).map(move |t| (j, t))).collect();
    let outcomes =
        jobs.par_iter().map(|&(j, t)| historical_double_trial(cfg, table, j, t)).collect::<Result<Vec<_>>>()?;
    let rhos: Vec<Option<f64>> = (0..HISTORICAL_PAIRS)
        .map(|j| {
            let (a, b) = historical_pair(table, j).expect("checked above");
            codispersion(a, b).ok().map(|c| c.correlation)
        })
        .collect();
    aggregate_expected(outcomes, &rhos)
}

/// Values collected for one `(cell, estimator)` pair.
#[derive(Debug, Default)]
struct Cell {
    l2: Vec<f64>,
    tracking: Vec<f64>,
    opt_bias: Vec<f64>,
    forecast: Vec<f64>,
    degenerate: usize,
}

impl Cell {
    fn summaries(&self, tag: EstimatorTag, rho: Option<f64>) -> Result<Vec<BoxSummary>> {
        [
            (Metric::L2Error, &self.l2),
            (Metric::TrackingP, &self.tracking),
            (Metric::OptBiasP, &self.opt_bias),
            (Metric::ForecastRatio, &self.forecast),
        ]
        .into_iter()
        .map(|(metric, values)| box_or_empty(tag, rho, metric, values, self.degenerate))
        .collect()
    }
}

/// A summary row; when every trial was degenerate the statistics are NaN.
fn box_or_empty(
    tag: EstimatorTag,
    rho: Option<f64>,
    metric: Metric,
    values: &[f64],
    degenerate: usize,
) -> Result<BoxSummary> {
    if values.is_empty() {
        let nan = f64::NAN;
        return Ok(BoxSummary {
            estimator: tag,
            rho,
            metric,
            count: 0,
            degenerate,
            min: nan,
            q1: nan,
            median: nan,
            q3: nan,
            max: nan,
            mean: nan,
        });
    }
    BoxSummary::new(tag, rho, metric, values, degenerate)
}

type Cells = BTreeMap<(usize, EstimatorTag), Cell>;

fn gather(outcomes: &[TrialOutcome]) -> (Vec<TrialRecord>, Cells) {
    let mut cells: Cells = BTreeMap::new();
    let mut trials = Vec::new();
    for out in outcomes {
        for r in &out.records {
            let c = cells.entry((r.block, r.estimator)).or_default();
            c.l2.push(r.l2_error);
            c.tracking.push(r.tracking_p);
            c.opt_bias.push(r.opt_bias_p);
            c.forecast.push(r.forecast_ratio);
            trials.push(r.clone());
        }
        for tag in &out.degenerate {
            cells.entry((out.block, *tag)).or_default().degenerate += 1;
        }
    }
    (trials, cells)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Per-cell Monte Carlo means, then one box per estimator and metric over cells.
fn aggregate_expected(outcomes: Vec<TrialOutcome>, rhos: &[Option<f64>]) -> Result<ExperimentOutput> {
    let (trials, cells) = gather(&outcomes);
    let mut expected = Vec::new();
    let mut per_tag: BTreeMap<EstimatorTag, (Cell, usize)> = BTreeMap::new();
    for ((block, tag), cell) in &cells {
        let sq: Vec<f64> = cell.l2.iter().map(|x| x * x).collect();
        let rec = ExpectedRecord {
            block: *block,
            rho: rhos[*block],
            estimator: *tag,
            count: cell.l2.len(),
            degenerate: cell.degenerate,
            l2_error_sq: mean(&sq),
            tracking_p: mean(&cell.tracking),
            opt_bias_p: mean(&cell.opt_bias),
            forecast_ratio: mean(&cell.forecast),
        };
        let entry = per_tag.entry(*tag).or_default();
        entry.1 += cell.degenerate;
        if rec.count > 0 {
            entry.0.l2.push(rec.l2_error_sq);
            entry.0.tracking.push(rec.tracking_p);
            entry.0.opt_bias.push(rec.opt_bias_p);
            entry.0.forecast.push(rec.forecast_ratio);
        }
        expected.push(rec);
    }
    let mut summaries = Vec::new();
    for (tag, (cell, degenerate)) in &per_tag {
        for (metric, values) in [
            (Metric::L2ErrorSq, &cell.l2),
            (Metric::TrackingP, &cell.tracking),
            (Metric::OptBiasP, &cell.opt_bias),
            (Metric::ForecastRatio, &cell.forecast),
        ] {
            summaries.push(box_or_empty(*tag, None, metric, values, *degenerate)?);
        }
    }
    Ok(ExperimentOutput { trials, summaries, expected })
}

const PLOT_SCRIPT: &str = r#"# Box plots of summary.csv. Usage: python plot.py [DIR]
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

root = sys.argv[1] if len(sys.argv) > 1 else "."
rows = list(csv.DictReader(open(f"{root}/summary.csv")))
groups = defaultdict(list)
for r in rows:
    if r["count"] != "0":
        groups[(r["metric"], r["rho"])].append(r)

for (metric, rho), items in sorted(groups.items()):
    stats = [
        {
            "label": r["estimator"],
            "whislo": float(r["min"]),
            "q1": float(r["q1"]),
            "med": float(r["median"]),
            "q3": float(r["q3"]),
            "whishi": float(r["max"]),
            "mean": float(r["mean"]),
        }
        for r in items
    ]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bxp(stats, showmeans=True, showfliers=False)
    title = metric if not rho else f"{metric}, rho = {rho}"
    ax.set_title(title)
    name = metric if not rho else f"{metric}_rho{rho}"
    fig.savefig(f"{root}/{name}.png", dpi=120, bbox_inches="tight")
    plt.close(fig)
"#;
