//! `maps-shrink`: run the Monte Carlo experiments or shrink the leading
//! eigenvector of a user-supplied returns matrix.
//!
//! Exit codes: 0 on success, 2 on a configuration error, 3 on a data error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use maps_core::anchors::{haar_subspace, orthonormalize, partition_subspace, Partition, RANK_TOL};
use maps_core::eigen::{leading_factor, FactorEstimate};
use maps_core::estimators::{self, EstimatorResult, PsiSource};
use maps_core::experiments::{
    generate_fixture, parse_psi_source, read_returns, read_sector_partition, returns_to_csv, run_double_block,
    run_historical_double, run_single_block, BetaTable, ExperimentConfig, FixtureParams, Scenario,
};
use maps_core::model::{generate_betas, generate_block, unit_q, GenerationParams, ReturnsBlock};
use maps_core::portfolio::{min_var_weights, scalar_estimates, CovarianceModel};
use nalgebra::DVector;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] maps_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_config() => 2,
            CliError::Core(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "maps-shrink", version, about = "Multi-anchor-point shrinkage of factor-model eigenvectors")]
struct Cli {
    /// Override the master seed of the config (or the generator seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Double-block experiment with synthetic correlated betas.
    SimulateDouble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_parser = parse_psi)]
        psi_source: Option<PsiSource>,
    },
    /// Single-block experiment on every column of a betas file.
    SimulateSingle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        betas: PathBuf,
        /// `asset_id,sector` file; defaults to the sector column of the betas file.
        #[arg(long)]
        sectors: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Double-block experiment on period pairs (t, t+12) of a betas file.
    HistoricalDouble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        betas: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_parser = parse_psi)]
        psi_source: Option<PsiSource>,
    },
    /// Estimate the leading eigenvector of a returns CSV (assets × periods).
    Estimate {
        #[arg(long)]
        returns: PathBuf,
        #[arg(long, value_enum)]
        estimator: EstimatorArg,
        /// Anchors joined by `+`: `q`, `partition:FILE`, `haar:K:SEED`, `prev:FILE`.
        #[arg(long)]
        anchors: Option<String>,
        /// The returns file starts with a header row.
        #[arg(long)]
        header: bool,
        /// Write `asset,h_hat,weight` rows here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic betas table (and optionally its sector file).
    GenFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sectors_out: Option<PathBuf>,
        #[arg(long, default_value_t = 488)]
        p: usize,
        #[arg(long, default_value_t = 24)]
        periods: usize,
        #[arg(long, default_value_t = 11)]
        sectors: usize,
    },
    /// Write one simulated returns block as headerless CSV.
    GenReturns {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60)]
        p: usize,
        #[arg(long, default_value_t = 12)]
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Pca,
    Gps,
    Maps,
    Dynamic,
}

fn parse_psi(s: &str) -> std::result::Result<PsiSource, String> {
    parse_psi_source(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SimulateDouble { config, out, psi_source } => {
            let cfg = load_config(&config, cli.seed, psi_source, &[Scenario::Double])?;
            let output = run_double_block(&cfg)?;
            output.write(&out, &cfg)?;
            report_written(&out, output.trials.len());
        }
        Command::SimulateSingle { config, betas, sectors, out } => {
            let cfg = load_config(&config, cli.seed, None, &[Scenario::Single, Scenario::HistoricalSingle])?;
            let table = BetaTable::read(&betas)?;
            let partition = sectors.map(|s| read_sector_partition(&s, &table)).transpose()?;
            let cfg = with_p(cfg, &table);
            let output = run_single_block(&cfg, &table, partition.as_ref())?;
            output.write(&out, &cfg)?;
            report_written(&out, output.trials.len());
        }
        Command::HistoricalDouble { config, betas, out, psi_source } => {
            let cfg = load_config(&config, cli.seed, psi_source, &[Scenario::HistoricalDouble])?;
            let table = BetaTable::read(&betas)?;
            let cfg = with_p(cfg, &table);
            let output = run_historical_double(&cfg, &table)?;
            output.write(&out, &cfg)?;
            report_written(&out, output.trials.len());
        }
        Command::Estimate { returns, estimator, anchors, header, out } => {
            let text = estimate(&returns, estimator, anchors.as_deref(), header, out.as_deref())?;
            print!("{text}");
        }
        Command::GenFixture { out, sectors_out, p, periods, sectors } => {
            let params = FixtureParams { p, periods, sectors, ..FixtureParams::default() };
            let table = generate_fixture(&params, cli.seed.unwrap_or(0))?;
            write_file(&out, &table.to_csv())?;
            if let Some(path) = sectors_out {
                let mut text = String::from("asset_id,sector\n");
                for (id, s) in table.asset_ids.iter().zip(&table.sectors) {
                    let _ = writeln!(text, "{id},{s}");
                }
                write_file(&path, &text)?;
            }
        }
        Command::GenReturns { out, p, n } => {
            let seed = cli.seed.unwrap_or(0);
            let defaults = ExperimentConfig::defaults(Scenario::Double);
            let params = GenerationParams {
                p,
                n,
                sigma2: defaults.sigma2,
                delta2: defaults.delta2,
                beta_mean: defaults.beta_mean,
                beta_sd: defaults.beta_sd,
                seed,
            };
            let beta = generate_betas(p, params.beta_mean, params.beta_sd, seed)?;
            let (block, _) = generate_block(&params, &beta)?;
            write_file(&out, &returns_to_csv(&block))?;
        }
    }
    Ok(())
}

fn report_written(dir: &Path, rows: usize) {
    eprintln!("wrote {rows} trial rows to {}", dir.display());
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| maps_core::Error::Io(e).into())
}

/// Parse the config file, apply overrides and check the scenario matches the
/// subcommand (`allowed` empty means any).
fn load_config(
    path: &Path,
    seed: Option<u64>,
    psi: Option<PsiSource>,
    allowed: &[Scenario],
) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(p) = psi {
        cfg.psi_source = p;
    }
    if !allowed.is_empty() && !allowed.contains(&cfg.scenario) {
        let names: Vec<&str> = allowed.iter().map(|s| s.as_str()).collect();
        return Err(CliError::Usage(format!(
            "{}: scenario {} does not match this subcommand (expected {})",
            path.display(),
            cfg.scenario.as_str(),
            names.join(" or ")
        )));
    }
    Ok(cfg)
}

/// Historical scenarios take the asset count from the betas file.
fn with_p(mut cfg: ExperimentConfig, table: &BetaTable) -> ExperimentConfig {
    cfg.p = table.p();
    cfg
}

enum AnchorTerm {
    Q,
    Partition(PathBuf),
    Haar(usize, u64),
    Prev(PathBuf),
}

fn parse_anchor_spec(spec: &str) -> Result<Vec<AnchorTerm>> {
    let bad = |t: &str| {
        CliError::Usage(format!("bad anchor term {t:?}; expected q, partition:FILE, haar:K:SEED or prev:FILE"))
    };
    spec.split('+')
        .map(|term| {
            let term = term.trim();
            if term == "q" {
                return Ok(AnchorTerm::Q);
            }
            match term.split_once(':') {
                Some(("partition", f)) if !f.is_empty() => Ok(AnchorTerm::Partition(f.into())),
                Some(("prev", f)) if !f.is_empty() => Ok(AnchorTerm::Prev(f.into())),
                Some(("haar", rest)) => {
                    let (k, seed) = rest.split_once(':').ok_or_else(|| bad(term))?;
                    Ok(AnchorTerm::Haar(k.parse().map_err(|_| bad(term))?, seed.parse().map_err(|_| bad(term))?))
                }
                _ => Err(bad(term)),
            }
        })
        .collect()
}

/// Anchor vectors of the spec, plus whether a previous block was supplied.
fn anchor_vectors(terms: &[AnchorTerm], p: usize, header: bool) -> Result<(Vec<DVector<f64>>, bool)> {
    let mut vectors = Vec::new();
    let mut has_prev = false;
    for term in terms {
        match term {
            AnchorTerm::Q => vectors.push(unit_q(p)),
            AnchorTerm::Partition(path) => {
                let text = fs::read_to_string(path).map_err(|e| maps_core::Error::Data {
                    source_name: path.display().to_string(),
                    message: e.to_string(),
                })?;
                let partition = Partition::parse_lines(&text, p).map_err(|e| maps_core::Error::Data {
                    source_name: path.display().to_string(),
                    message: e.to_string(),
                })?;
                vectors.extend(partition_subspace(&partition).vectors());
            }
            AnchorTerm::Haar(k, seed) => vectors.extend(haar_subspace(p, *k, *seed)?.vectors()),
            AnchorTerm::Prev(path) => {
                let prev = read_returns(path, header)?;
                if prev.p() != p {
                    return Err(maps_core::Error::Data {
                        source_name: path.display().to_string(),
                        message: format!("previous block has {} assets, current block has {p}", prev.p()),
                    }
                    .into());
                }
                vectors.push(leading_factor(&prev)?.h);
                has_prev = true;
            }
        }
    }
    Ok((vectors, has_prev))
}

fn estimate(
    path: &Path,
    estimator: EstimatorArg,
    spec: Option<&str>,
    header: bool,
    out: Option<&Path>,
) -> Result<String> {
    let block: ReturnsBlock = read_returns(path, header)?;
    let (p, n) = (block.p(), block.n());
    let terms = spec.map(parse_anchor_spec).transpose()?.unwrap_or_default();
    let fe = leading_factor(&block)?;

    let mut text = String::new();
    let _ = writeln!(text, "p={p}\nn={n}\nestimator={}", format!("{estimator:?}").to_lowercase());
    let _ = writeln!(text, "s2={:.12e}\nl2={:.12e}\npsi={:.12e}", fe.s2, fe.l2, fe.psi);
    // Report the spectrum before anything that can fail on it.
    print!("{text}");
    text.clear();

    let result = shrink(estimator, &terms, &fe, &block, header)?;
    let (spike, delta2) = scalar_estimates(&fe, n, p)?;
    let _ = writeln!(text, "spike_scale_hat={spike:.12e}\ndelta2_hat={delta2:.12e}");
    match result.tau {
        Some(t) => {
            let _ = writeln!(text, "tau={t:.12e}");
        }
        None => text.push_str("tau=NA\n"),
    }
    let _ = writeln!(text, "reverted={}", result.reverted);

    let model = CovarianceModel::new(result.h_hat.clone(), spike, delta2)?;
    let weights = min_var_weights(&model)?;
    let mut rows = String::from("asset,h_hat,weight\n");
    for (i, (h, w)) in result.h_hat.iter().zip(weights.as_vector().iter()).enumerate() {
        let _ = writeln!(rows, "{i},{h:.12e},{w:.12e}");
    }
    match out {
        Some(file) => {
            write_file(file, &rows)?;
            let _ = writeln!(text, "output={}", file.display());
        }
        None => {
            text.push('\n');
            text.push_str(&rows);
        }
    }
    Ok(text)
}

fn shrink(
    estimator: EstimatorArg,
    terms: &[AnchorTerm],
    fe: &FactorEstimate,
    block: &ReturnsBlock,
    header: bool,
) -> Result<EstimatorResult> {
    let p = block.p();
    Ok(match estimator {
        EstimatorArg::Pca => {
            if !terms.is_empty() {
                return Err(CliError::Usage("--anchors is not used by the pca estimator".into()));
            }
            estimators::pca(block)?
        }
        EstimatorArg::Gps => {
            if !terms.is_empty() {
                return Err(CliError::Usage(
                    "gps always shrinks toward q; use --estimator maps for other anchors".into(),
                ));
            }
            estimators::gps(fe)?
        }
        EstimatorArg::Maps => {
            if terms.is_empty() {
                return Err(CliError::Usage("--estimator maps needs --anchors".into()));
            }
            let (vectors, _) = anchor_vectors(terms, p, header)?;
            estimators::maps(fe, &orthonormalize(&vectors, RANK_TOL)?)?
        }
        EstimatorArg::Dynamic => {
            let (mut vectors, has_prev) = anchor_vectors(terms, p, header)?;
            if !has_prev {
                return Err(CliError::Usage("--estimator dynamic needs a prev:FILE anchor".into()));
            }
            vectors.push(unit_q(p));
            let mut r = estimators::maps(fe, &orthonormalize(&vectors, RANK_TOL)?)?;
            r.method = estimators::Method::Dynamic;
            r
        }
    })
}
