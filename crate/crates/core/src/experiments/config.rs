//! `key=value` experiment configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anchors::default_num_atoms;
use crate::error::{Error, Result};
use crate::estimators::PsiSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Single,
    Double,
    HistoricalSingle,
    HistoricalDouble,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Single => "single",
            Scenario::Double => "double",
            Scenario::HistoricalSingle => "historical_single",
            Scenario::HistoricalDouble => "historical_double",
        }
    }

    fn allowed(&self) -> &'static [EstimatorTag] {
        use EstimatorTag::*;
        match self {
            Scenario::Double => &[Pca1, Pca2, Gps1, Gps2, DynMaps, BetaOrdered],
            Scenario::Single | Scenario::HistoricalSingle => &[Pca1, Gps1, Sector, BetaOrdered],
            Scenario::HistoricalDouble => &[Pca1, Pca2, Gps1, Gps2, DynMaps, BetaOrdered],
        }
    }

    fn default_estimators(&self) -> Vec<EstimatorTag> {
        use EstimatorTag::*;
        match self {
            Scenario::HistoricalDouble => vec![Pca1, Pca2, Gps1, DynMaps, Gps2],
            other => other.allowed().to_vec(),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Scenario::Single),
            "double" => Ok(Scenario::Double),
            "historical_single" => Ok(Scenario::HistoricalSingle),
            "historical_double" => Ok(Scenario::HistoricalDouble),
            _ => Err(Error::Config(format!("unknown scenario {s:?}"))),
        }
    }
}

/// Estimators compared by the experiment driver.
///
/// The `1`/`2` suffix selects the current block or the concatenated double
/// block; single-block scenarios use `pca1`/`gps1` (aliases `pca`, `gps`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorTag {
    Pca1,
    Pca2,
    Gps1,
    Gps2,
    #[serde(rename = "dynmaps")]
    DynMaps,
    BetaOrdered,
    Sector,
}

impl EstimatorTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorTag::Pca1 => "pca1",
            EstimatorTag::Pca2 => "pca2",
            EstimatorTag::Gps1 => "gps1",
            EstimatorTag::Gps2 => "gps2",
            EstimatorTag::DynMaps => "dynmaps",
            EstimatorTag::BetaOrdered => "beta_ordered",
            EstimatorTag::Sector => "sector",
        }
    }
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pca1" | "pca" => EstimatorTag::Pca1,
            "pca2" => EstimatorTag::Pca2,
            "gps1" | "gps" => EstimatorTag::Gps1,
            "gps2" => EstimatorTag::Gps2,
            "dynmaps" | "dynamic" => EstimatorTag::DynMaps,
            "beta_ordered" => EstimatorTag::BetaOrdered,
            "sector" => EstimatorTag::Sector,
            _ => return Err(Error::Config(format!("unknown estimator tag {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Asset count; historical scenarios take it from the betas file.
    pub p: usize,
    pub n: usize,
    pub rho_grid: Vec<f64>,
    pub trials: usize,
    pub estimators: Vec<EstimatorTag>,
    pub sigma2: f64,
    pub delta2: f64,
    pub beta_mean: f64,
    pub beta_sd: f64,
    pub num_atoms: usize,
    pub master_seed: u64,
    pub psi_source: PsiSource,
}

const KEYS: [&str; 13] = [
    "scenario",
    "p",
    "n",
    "rho_grid",
    "trials",
    "estimators",
    "sigma2",
    "delta2",
    "beta_mean",
    "beta_sd",
    "num_atoms",
    "master_seed",
    "psi_source",
];

impl ExperimentConfig {
    /// Defaults: the double-block test bed (`p = 500`, `n = 24`, σ² = 0.16,
    /// δ² = 0.25, 100 trials) or the 12-period historical test bed.
    pub fn defaults(scenario: Scenario) -> Self {
        let (p, n, num_atoms) = match scenario {
            Scenario::Double => (500, 24, default_num_atoms(500)),
            Scenario::Single | Scenario::HistoricalSingle | Scenario::HistoricalDouble => (488, 12, 11),
        };
        let rho_grid = match scenario {
            Scenario::Double => vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            _ => Vec::new(),
        };
        Self {
            scenario,
            p,
            n,
            rho_grid,
            trials: 100,
            estimators: scenario.default_estimators(),
            sigma2: 0.16,
            delta2: 0.25,
            beta_mean: 1.0,
            beta_sd: 0.5,
            num_atoms,
            master_seed: 0,
            psi_source: PsiSource::Current,
        }
    }

    /// Parse `key=value` lines. `#` starts a comment; omitted keys take the
    /// scenario defaults; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: Vec<(usize, &str, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key {k:?}", i + 1)));
            }
            if pairs.iter().any(|(_, seen, _)| *seen == k) {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", i + 1)));
            }
            pairs.push((i + 1, k, v));
        }
        let scenario = match pairs.iter().find(|(_, k, _)| *k == "scenario") {
            Some((_, _, v)) => v.parse()?,
            None => return Err(Error::Config("missing required key \"scenario\"".into())),
        };
        let mut cfg = Self::defaults(scenario);
        let mut atoms_given = false;
        for (line, key, value) in pairs {
            let ctx = |what: &str| Error::Config(format!("line {line}: {key}: {what} {value:?}"));
            match key {
                "scenario" => {}
                "p" => cfg.p = value.parse().map_err(|_| ctx("expected an integer, got"))?,
                "n" => cfg.n = value.parse().map_err(|_| ctx("expected an integer, got"))?,
                "trials" => cfg.trials = value.parse().map_err(|_| ctx("expected an integer, got"))?,
                "num_atoms" => {
                    cfg.num_atoms = value.parse().map_err(|_| ctx("expected an integer, got"))?;
                    atoms_given = true;
                }
                "master_seed" => cfg.master_seed = value.parse().map_err(|_| ctx("expected a u64, got"))?,
                "sigma2" => cfg.sigma2 = value.parse().map_err(|_| ctx("expected a number, got"))?,
                "delta2" => cfg.delta2 = value.parse().map_err(|_| ctx("expected a number, got"))?,
                "beta_mean" => cfg.beta_mean = value.parse().map_err(|_| ctx("expected a number, got"))?,
                "beta_sd" => cfg.beta_sd = value.parse().map_err(|_| ctx("expected a number, got"))?,
                "rho_grid" => {
                    cfg.rho_grid = split_list(value)
                        .map(|t| t.parse::<f64>().map_err(|_| ctx("bad number in list")))
                        .collect::<Result<_>>()?
                }
                "estimators" => cfg.estimators = split_list(value).map(str::parse).collect::<Result<_>>()?,
                "psi_source" => cfg.psi_source = parse_psi_source(value)?,
                _ => unreachable!(),
            }
        }
        if !atoms_given && scenario == Scenario::Double {
            cfg.num_atoms = default_num_atoms(cfg.p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialize back to the `key=value` format accepted by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let lines = [
            ("scenario", self.scenario.as_str().to_string()),
            ("p", self.p.to_string()),
            ("n", self.n.to_string()),
            ("rho_grid", join(self.rho_grid.iter().map(f64::to_string).collect())),
            ("trials", self.trials.to_string()),
            ("estimators", join(self.estimators.iter().map(ToString::to_string).collect())),
            ("sigma2", self.sigma2.to_string()),
            ("delta2", self.delta2.to_string()),
            ("beta_mean", self.beta_mean.to_string()),
            ("beta_sd", self.beta_sd.to_string()),
            ("num_atoms", self.num_atoms.to_string()),
            ("master_seed", self.master_seed.to_string()),
            ("psi_source", psi_source_str(self.psi_source).to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.p < 3 || self.n < 2 {
            return fail(format!("need p ≥ 3 and n ≥ 2, got p={} n={}", self.p, self.n));
        }
        if !(self.sigma2 > 0.0) || !(self.delta2 > 0.0) {
            return fail("sigma2 and delta2 must be positive".into());
        }
        if self.beta_mean == 0.0 || !self.beta_mean.is_finite() || !(self.beta_sd >= 0.0) {
            return fail("beta_mean must be nonzero and beta_sd nonnegative".into());
        }
        if self.estimators.is_empty() {
            return fail("no estimators configured".into());
        }
        for tag in &self.estimators {
            if !self.scenario.allowed().contains(tag) {
                return fail(format!("estimator {tag} is not available in scenario {}", self.scenario.as_str()));
            }
        }
        if self.scenario == Scenario::Double {
            if self.rho_grid.is_empty() {
                return fail("rho_grid must not be empty".into());
            }
            if let Some(r) = self.rho_grid.iter().find(|r| !(-1.0..=1.0).contains(*r)) {
                return fail(format!("rho {r} outside [-1, 1]"));
            }
        }
        self.validate_atoms(self.p)
    }

    /// `1 ≤ num_atoms ≤ p^0.4` whenever the beta-ordered estimator is in use.
    pub fn validate_atoms(&self, p: usize) -> Result<()> {
        if !self.estimators.contains(&EstimatorTag::BetaOrdered) {
            return Ok(());
        }
        let limit = (p as f64).powf(0.4);
        if self.num_atoms == 0 || self.num_atoms as f64 > limit {
            return Err(Error::Config(format!(
                "num_atoms = {} violates 1 ≤ k ≤ p^0.4 = {limit:.2} for p = {p}",
                self.num_atoms
            )));
        }
        Ok(())
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|t| !t.is_empty())
}

pub fn parse_psi_source(value: &str) -> Result<PsiSource> {
    match value {
        "current" => Ok(PsiSource::Current),
        "double" => Ok(PsiSource::Double),
        _ => Err(Error::Config(format!("psi_source must be current or double, got {value:?}"))),
    }
}

fn psi_source_str(source: PsiSource) -> &'static str {
    match source {
        PsiSource::Current => "current",
        PsiSource::Double => "double",
    }
}
