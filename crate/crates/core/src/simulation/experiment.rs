//! Monte Carlo experiments: repeated generation, estimation and comparison
//! with the analytic truth.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::dgp::{generate, DgpConfig};
use super::oracle::AnalyticOracle;
use crate::eif::{self, Estimand, EstimationSpec, SlopeEstimate};
use crate::error::{Error, Result};
use crate::inference::{contrast, TestName};
use crate::rng::derive_seed;
use crate::stats::{self, Z_975};

/// The latent confounder column dropped from a misspecified nuisance.
pub const OMITTED_COVARIATE: &str = "z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Misspecification {
    None,
    WrongPropensity,
    WrongOutcome,
    BothWrong,
}

impl Misspecification {
    pub const ALL: [Self; 4] = [
        Self::None,
        Self::WrongPropensity,
        Self::WrongOutcome,
        Self::BothWrong,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::WrongPropensity => "wrong_propensity",
            Self::WrongOutcome => "wrong_outcome",
            Self::BothWrong => "both_wrong",
        }
    }

    /// Restricts the covariate sets of `spec` for a dataset whose covariates
    /// are `names`.
    pub fn apply(&self, spec: &EstimationSpec, names: &[String]) -> EstimationSpec {
        let reduced: Vec<String> = names
            .iter()
            .filter(|c| c.as_str() != OMITTED_COVARIATE)
            .cloned()
            .collect();
        let mut out = spec.clone();
        if matches!(self, Self::WrongPropensity | Self::BothWrong) {
            out.propensity_covariates = Some(reduced.clone());
        }
        if matches!(self, Self::WrongOutcome | Self::BothWrong) {
            out.outcome_covariates = Some(reduced);
        }
        out
    }
}

impl fmt::Display for Misspecification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Misspecification {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.iter().copied().find(|m| m.label() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown misspecification {s}; valid: none, wrong_propensity, wrong_outcome, both_wrong"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Target {
    Slope(Estimand),
    Test(TestName),
}

impl Target {
    pub fn label(&self) -> String {
        match self {
            Self::Slope(e) => e.label(),
            Self::Test(t) => t.label().to_string(),
        }
    }

    fn estimands(&self) -> Vec<Estimand> {
        match self {
            Self::Slope(e) => vec![*e],
            Self::Test(t) => {
                let (a, b) = t.components();
                vec![a, b]
            }
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(t) = s.parse::<TestName>() {
            return Ok(Self::Test(t));
        }
        let slopes = [
            Estimand::LinearCf(0),
            Estimand::LinearCf(1),
            Estimand::LogitCf(0),
            Estimand::LogitCf(1),
            Estimand::LinearFactual(0),
            Estimand::LinearFactual(1),
            Estimand::LogitFactual(0),
            Estimand::LogitFactual(1),
            Estimand::LogitDg,
            Estimand::LinearDg,
            Estimand::LogitCfGivenP1,
            Estimand::LogitDgGivenP1,
            Estimand::LogitFactualGivenP1,
        ];
        slopes
            .into_iter()
            .find(|e| e.label() == s)
            .map(Self::Slope)
            .ok_or_else(|| Error::Config(format!("unknown estimand or test {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub dgp: DgpConfig,
    pub estimation: EstimationSpec,
    pub targets: Vec<Target>,
    pub replications: usize,
    pub n_grid: Vec<usize>,
    pub misspecification: Misspecification,
    pub master_seed: u64,
    pub jobs: usize,
    pub alpha: f64,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpConfig, targets: Vec<Target>, replications: usize) -> Self {
        Self {
            n_grid: vec![dgp.n],
            master_seed: dgp.seed,
            dgp,
            estimation: EstimationSpec::default(),
            targets,
            replications,
            misspecification: Misspecification::None,
            jobs: 1,
            alpha: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("no targets requested".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 20) {
            return Err(Error::Config("every sample size must be at least 20".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        self.estimation.validate()?;
        self.dgp.params.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub target: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub truth: f64,
    pub covered: bool,
    pub rejected: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub n: usize,
    pub target: String,
    pub truth: f64,
    pub replications: usize,
    pub failures: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub empirical_sd: f64,
    pub mean_se: f64,
    pub coverage: f64,
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub truths: Vec<(String, f64)>,
    pub replications: Vec<ReplicationRecord>,
    pub summary: Vec<SummaryRecord>,
}

impl ExperimentReport {
    pub fn summary_for(&self, n: usize, target: &str) -> Option<&SummaryRecord> {
        self.summary.iter().find(|s| s.n == n && s.target == target)
    }
}

/// Seed for replication `rep` at sample size `n`.
pub fn replication_seed(master: u64, rep: usize, n: usize) -> u64 {
    derive_seed(derive_seed(master, rep as u64), n as u64)
}

struct Outcome {
    estimate: f64,
    se: f64,
}

fn estimate_targets(
    config: &ExperimentConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<Result<Outcome>>> {
    let sample = generate(&config.dgp.with_n(n).with_seed(seed))?;
    let data = &sample.dataset;
    let mut spec = config
        .misspecification
        .apply(&config.estimation, data.covariate_names());
    spec.seed = seed;
    let mut cache: HashMap<Estimand, std::result::Result<SlopeEstimate, String>> = HashMap::new();
    for t in &config.targets {
        for e in t.estimands() {
            cache
                .entry(e)
                .or_insert_with(|| eif::estimate(data, e, &spec).map_err(|err| err.to_string()));
        }
    }
    let get = |e: Estimand| -> Result<&SlopeEstimate> {
        cache[&e]
            .as_ref()
            .map_err(|m| Error::Estimation(format!("{e}: {m}")))
    };
    Ok(config
        .targets
        .iter()
        .map(|t| match t {
            Target::Slope(e) => get(*e).map(|s| Outcome {
                estimate: s.point,
                se: s.se,
            }),
            Target::Test(name) => {
                let (a, b) = name.components();
                contrast(*name, get(a)?, get(b)?).map(|r| Outcome {
                    estimate: r.point,
                    se: r.se,
                })
            }
        })
        .collect())
}

/// Runs every (sample size, replication) cell, in parallel over `jobs`
/// threads. Output order and values do not depend on `jobs`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let oracle = AnalyticOracle::new(&config.dgp.params);
    let truths: Vec<(String, f64)> = config
        .targets
        .iter()
        .map(|t| {
            let v = match t {
                Target::Slope(e) => oracle.slope(*e),
                Target::Test(name) => oracle.test(*name),
            }?;
            Ok((t.label(), v))
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |r| (n, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let crit = stats::normal_quantile(1.0 - config.alpha / 2.0);
    let per_cell: Vec<Vec<ReplicationRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, rep)| {
                let seed = replication_seed(config.master_seed, rep, n);
                let outcomes = match estimate_targets(config, n, seed) {
                    Ok(o) => o,
                    Err(e) => config
                        .targets
                        .iter()
                        .map(|_| Err(Error::Estimation(e.to_string())))
                        .collect(),
                };
                truths
                    .iter()
                    .zip(outcomes)
                    .map(|((label, truth), o)| record(n, rep, seed, label, *truth, o, crit))
                    .collect()
            })
            .collect()
    });
    let replications: Vec<ReplicationRecord> = per_cell.into_iter().flatten().collect();
    let mut summary = Vec::new();
    for &n in &config.n_grid {
        for (label, truth) in &truths {
            let rows: Vec<&ReplicationRecord> = replications
                .iter()
                .filter(|r| r.n == n && &r.target == label)
                .collect();
            summary.push(summarize(n, label, *truth, &rows));
        }
    }
    Ok(ExperimentReport {
        truths,
        replications,
        summary,
    })
}

fn record(
    n: usize,
    replication: usize,
    seed: u64,
    target: &str,
    truth: f64,
    outcome: Result<Outcome>,
    crit: f64,
) -> ReplicationRecord {
    match outcome {
        Ok(o) => {
            let (lo, hi) = (o.estimate - crit * o.se, o.estimate + crit * o.se);
            let z = o.estimate / o.se;
            ReplicationRecord {
                n,
                replication,
                seed,
                target: target.to_string(),
                estimate: o.estimate,
                se: o.se,
                ci_low: lo,
                ci_high: hi,
                p_value: stats::two_sided_p(o.estimate, o.se),
                truth,
                covered: lo <= truth && truth <= hi,
                rejected: z.abs() > crit,
                error: None,
            }
        }
        Err(e) => ReplicationRecord {
            n,
            replication,
            seed,
            target: target.to_string(),
            estimate: f64::NAN,
            se: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            p_value: f64::NAN,
            truth,
            covered: false,
            rejected: false,
            error: Some(e.to_string()),
        },
    }
}

fn summarize(n: usize, target: &str, truth: f64, rows: &[&ReplicationRecord]) -> SummaryRecord {
    let ok: Vec<&&ReplicationRecord> = rows.iter().filter(|r| r.error.is_none()).collect();
    let est: Vec<f64> = ok.iter().map(|r| r.estimate).collect();
    let se: Vec<f64> = ok.iter().map(|r| r.se).collect();
    let k = ok.len() as f64;
    let mean_est = stats::mean(&est);
    let frac = |f: fn(&ReplicationRecord) -> bool| ok.iter().filter(|r| f(r)).count() as f64 / k;
    SummaryRecord {
        n,
        target: target.to_string(),
        truth,
        replications: rows.len(),
        failures: rows.len() - ok.len(),
        mean_estimate: mean_est,
        bias: mean_est - truth,
        empirical_sd: if ok.len() > 1 { stats::sample_sd(&est) } else { f64::NAN },
        mean_se: stats::mean(&se),
        coverage: frac(|r| r.covered),
        rejection_rate: frac(|r| r.rejected),
    }
}

/// Nominal 95% critical value, re-exported for callers that build their own
/// intervals.
pub const CRITICAL_95: f64 = Z_975;
