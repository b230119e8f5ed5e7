//! Synthetic data-generating processes with stored potential outcomes.
//!
//! Every kind shares one structure: `G ~ N(0, 1)`, a latent confounder `Z`
//! (Gaussian given `G`, or bridge-distributed and independent of `G`), an
//! optional observed confounder `U ~ N(0, 1)`, an optional prior transition
//! `P`, the transition `D` (forced to 0 when `P = 0`), and potential outcomes
//! `Y_0`, `Y_1` that depend on `(G, Z, U)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::quadrature::{standard_normal, Bridge};
use crate::data::{Dataset, VariableRoles};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::stats::{expit, logit, normal_cdf};

pub const VAR_G: u64 = 0;
pub const VAR_Z: u64 = 1;
pub const VAR_U: u64 = 2;
pub const VAR_D: u64 = 3;
pub const VAR_P: u64 = 4;
pub const VAR_Y0: u64 = 5;
pub const VAR_Y1: u64 = 6;

/// Overlap rule: transition probabilities must lie in (0.02, 0.98) on all
/// but this fraction of the covariate distribution.
pub const OVERLAP_BAND: (f64, f64) = (0.02, 0.98);
pub const OVERLAP_MAX_OUTSIDE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DgpKind {
    AContinuous,
    BBinary,
    CSequential,
    NullGe,
    NullSt,
    ColliderSelection,
    /// Binary outcome whose marginal `logit E(Y_d|G)` is exactly linear.
    LogitLinear,
    /// DGP-A outcomes with a fair-coin transition.
    Randomized,
}

impl DgpKind {
    pub const ALL: [DgpKind; 8] = [
        Self::AContinuous,
        Self::BBinary,
        Self::CSequential,
        Self::NullGe,
        Self::NullSt,
        Self::ColliderSelection,
        Self::LogitLinear,
        Self::Randomized,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::AContinuous => "A_continuous",
            Self::BBinary => "B_binary",
            Self::CSequential => "C_sequential",
            Self::NullGe => "null_GE",
            Self::NullSt => "null_ST",
            Self::ColliderSelection => "collider_selection",
            Self::LogitLinear => "logit_linear",
            Self::Randomized => "randomized",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DgpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!("unknown DGP {s}; valid names: {}", Self::valid_names()))
            })
    }
}

/// Coefficients of `a + b*G + c*Z + e*U + f*G*U`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub intercept: f64,
    pub g: f64,
    pub z: f64,
    pub u: f64,
    pub gu: f64,
}

impl Linear {
    pub const fn gz(intercept: f64, g: f64, z: f64) -> Self {
        Self {
            intercept,
            g,
            z,
            u: 0.0,
            gu: 0.0,
        }
    }

    #[inline]
    pub fn eval(&self, g: f64, z: f64, u: f64) -> f64 {
        self.intercept + self.g * g + self.z * z + self.u * u + self.gu * g * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Latent {
    /// `Z = on_g * G + sd * N(0, 1)`.
    Normal { on_g: f64, sd: f64 },
    /// `Z ~ Bridge(phi)`, independent of `G`.
    Bridge { phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Transition {
    Logistic(Linear),
    Coin(f64),
}

impl Transition {
    #[inline]
    pub fn prob(&self, g: f64, z: f64, u: f64) -> f64 {
        match self {
            Self::Logistic(l) => expit(l.eval(g, z, u)),
            Self::Coin(p) => *p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OutcomeModel {
    /// `Y_d = lin[d] + noise_sd * N(0, 1)`.
    Continuous { lin: [Linear; 2], noise_sd: f64 },
    /// `Y_d ~ Bernoulli(expit(lin[d]))`.
    Binary { lin: [Linear; 2] },
}

impl OutcomeModel {
    /// `E(Y_d | G, Z, U)`.
    #[inline]
    pub fn mean(&self, d: usize, g: f64, z: f64, u: f64) -> f64 {
        match self {
            Self::Continuous { lin, .. } => lin[d].eval(g, z, u),
            Self::Binary { lin } => expit(lin[d].eval(g, z, u)),
        }
    }

    pub fn binary(&self) -> bool {
        matches!(self, Self::Binary { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpParams {
    pub latent: Latent,
    pub has_u: bool,
    pub prior: Option<Linear>,
    pub transition: Transition,
    pub outcome: OutcomeModel,
}

const A_Z: Latent = Latent::Normal { on_g: 0.5, sd: 0.75 };
const A_D: Linear = Linear::gz(-0.2, 0.6, 0.8);

fn a_outcome(interaction: f64) -> OutcomeModel {
    OutcomeModel::Continuous {
        lin: [Linear::gz(0.1, 0.5, 0.3), Linear::gz(0.5, 0.5 + interaction, 0.3)],
        noise_sd: 0.5,
    }
}

fn b_outcome() -> OutcomeModel {
    OutcomeModel::Binary {
        lin: [Linear::gz(-0.4, 0.8, 0.6), Linear::gz(0.1, 0.5, 0.6)],
    }
}

impl DgpParams {
    pub fn for_kind(kind: DgpKind) -> Self {
        match kind {
            DgpKind::AContinuous => Self {
                latent: A_Z,
                has_u: false,
                prior: None,
                transition: Transition::Logistic(A_D),
                outcome: a_outcome(-0.2),
            },
            DgpKind::BBinary => Self {
                latent: A_Z,
                has_u: false,
                prior: None,
                transition: Transition::Logistic(A_D),
                outcome: b_outcome(),
            },
            DgpKind::CSequential => Self {
                latent: A_Z,
                has_u: false,
                prior: Some(Linear::gz(0.3, 0.7, 0.5)),
                transition: Transition::Logistic(A_D),
                outcome: b_outcome(),
            },
            DgpKind::NullGe => Self {
                latent: A_Z,
                has_u: false,
                prior: None,
                transition: Transition::Logistic(Linear::gz(-0.2, 0.6, 0.0)),
                outcome: a_outcome(0.0),
            },
            DgpKind::NullSt => {
                let phi = 0.99;
                Self {
                    latent: Latent::Bridge { phi },
                    has_u: false,
                    prior: None,
                    transition: Transition::Logistic(Linear::gz(-0.2 / phi, 0.4 / phi, 1.0)),
                    outcome: OutcomeModel::Binary {
                        lin: [
                            Linear::gz(-0.4 / phi, 0.4 / phi, 1.0),
                            Linear::gz(0.3 / phi, 0.4 / phi, 1.0),
                        ],
                    },
                }
            }
            DgpKind::LogitLinear => {
                let phi = 0.85;
                Self {
                    latent: Latent::Bridge { phi },
                    has_u: false,
                    prior: None,
                    transition: Transition::Logistic(Linear::gz(-0.2, 0.6, 0.5)),
                    outcome: OutcomeModel::Binary {
                        lin: [
                            Linear::gz(-0.4 / phi, 1.1 / phi, 1.0),
                            Linear::gz(0.3 / phi, 0.8 / phi, 1.0),
                        ],
                    },
                }
            }
            DgpKind::ColliderSelection => Self {
                latent: A_Z,
                has_u: true,
                prior: None,
                transition: Transition::Logistic(Linear {
                    intercept: 0.0,
                    g: 0.3,
                    z: 0.4,
                    u: 0.4,
                    gu: -0.3,
                }),
                outcome: OutcomeModel::Continuous {
                    lin: [
                        Linear {
                            intercept: 0.2,
                            g: 0.5,
                            z: 0.3,
                            u: 0.5,
                            gu: 0.0,
                        },
                        Linear {
                            intercept: 0.5,
                            g: 0.3,
                            z: 0.3,
                            u: 0.5,
                            gu: 0.0,
                        },
                    ],
                    noise_sd: 0.5,
                },
            },
            DgpKind::Randomized => Self {
                latent: A_Z,
                has_u: false,
                prior: None,
                transition: Transition::Coin(0.5),
                outcome: a_outcome(-0.2),
            },
        }
    }

    pub fn covariate_names(&self) -> Vec<String> {
        let mut names = vec!["g".to_string(), "z".to_string()];
        if self.has_u {
            names.push("u".into());
        }
        names
    }

    pub fn validate(&self) -> Result<()> {
        match self.latent {
            Latent::Normal { sd, .. } if !(sd > 0.0) => {
                return Err(Error::Config("latent standard deviation must be positive".into()))
            }
            Latent::Bridge { phi } if !(phi > 0.0 && phi < 1.0) => {
                return Err(Error::Config("bridge scale must lie in (0, 1)".into()))
            }
            _ => {}
        }
        if let OutcomeModel::Continuous { noise_sd, .. } = self.outcome {
            if !(noise_sd > 0.0) {
                return Err(Error::Config("outcome noise must be positive".into()));
            }
        }
        if let Transition::Coin(p) = self.transition {
            if !(p > OVERLAP_BAND.0 && p < OVERLAP_BAND.1) {
                return Err(Error::Config(format!("coin probability {p} violates overlap")));
            }
        }
        for (name, share) in self.overlap_violations() {
            if share > OVERLAP_MAX_OUTSIDE {
                return Err(Error::Config(format!(
                    "overlap check failed: P({name}=1|X) leaves (0.02, 0.98) on {:.4}% of the covariate distribution",
                    100.0 * share
                )));
            }
        }
        Ok(())
    }

    /// Share of the covariate distribution on which each transition
    /// probability leaves the overlap band, computed exactly: the linear
    /// predictor is Gaussian (or bridge) given `G`, and `G` is integrated by
    /// Gauss-Hermite quadrature. `D` is assessed conditionally on `P = 1`.
    pub fn overlap_violations(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if let Transition::Logistic(l) = self.transition {
            out.push(("D", self.outside_share(&l)));
        }
        if let Some(p) = self.prior {
            out.push(("P", self.outside_share(&p)));
        }
        out
    }

    fn outside_share(&self, l: &Linear) -> f64 {
        let lo = logit(OVERLAP_BAND.0);
        let hi = logit(OVERLAP_BAND.1);
        let rule = standard_normal(101);
        rule.integrate(|g| match self.latent {
            Latent::Normal { on_g, sd } => {
                let mean = l.intercept + l.g * g + l.z * on_g * g;
                let uc = if self.has_u { l.u + l.gu * g } else { 0.0 };
                let s = ((l.z * sd).powi(2) + uc * uc).sqrt();
                if s == 0.0 {
                    f64::from(mean <= lo || mean >= hi)
                } else {
                    normal_cdf((lo - mean) / s) + 1.0 - normal_cdf((hi - mean) / s)
                }
            }
            Latent::Bridge { phi } => {
                let b = Bridge::new(phi);
                let base = l.intercept + l.g * g;
                if l.z == 0.0 {
                    f64::from(base <= lo || base >= hi)
                } else if l.z > 0.0 {
                    b.cdf((lo - base) / l.z) + 1.0 - b.cdf((hi - base) / l.z)
                } else {
                    1.0 - b.cdf((lo - base) / l.z) + b.cdf((hi - base) / l.z)
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub kind: DgpKind,
    pub params: DgpParams,
    pub n: usize,
    pub seed: u64,
}

impl DgpConfig {
    pub fn new(kind: DgpKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            params: DgpParams::for_kind(kind),
            n,
            seed,
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// One simulated unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub g: f64,
    pub z: f64,
    pub u: f64,
    pub p: Option<f64>,
    pub d: f64,
    pub y0: f64,
    pub y1: f64,
    /// `P(D = 1 | G, Z, U)`, including the prior-transition stage.
    pub propensity: f64,
}

impl DgpParams {
    /// Draws unit `row` from the counter stream `rng`.
    pub fn draw(&self, rng: &CounterRng, row: u64) -> Draw {
        let g = rng.normal(row, VAR_G);
        let z = match self.latent {
            Latent::Normal { on_g, sd } => on_g * g + sd * rng.normal(row, VAR_Z),
            Latent::Bridge { phi } => Bridge::new(phi).quantile(rng.uniform(row, VAR_Z, 0)),
        };
        let u = if self.has_u { rng.normal(row, VAR_U) } else { 0.0 };
        let (p, pp) = match &self.prior {
            Some(l) => {
                let pp = expit(l.eval(g, z, u));
                (Some(rng.bernoulli(row, VAR_P, pp)), pp)
            }
            None => (None, 1.0),
        };
        let pd = self.transition.prob(g, z, u);
        let d_draw = rng.bernoulli(row, VAR_D, pd);
        let d = if p == Some(0.0) { 0.0 } else { d_draw };
        let y = |k: usize, var: u64| match &self.outcome {
            OutcomeModel::Continuous { lin, noise_sd } => {
                lin[k].eval(g, z, u) + noise_sd * rng.normal(row, var)
            }
            OutcomeModel::Binary { lin } => rng.bernoulli(row, var, expit(lin[k].eval(g, z, u))),
        };
        Draw {
            g,
            z,
            u,
            p,
            d,
            y0: y(0, VAR_Y0),
            y1: y(1, VAR_Y1),
            propensity: pp * pd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub dataset: Dataset,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub true_propensity: Vec<f64>,
}

/// Generates `config.n` units with stored potential outcomes.
pub fn generate(config: &DgpConfig) -> Result<GeneratedSample> {
    config.params.validate()?;
    if config.n < 2 {
        return Err(Error::Config("sample size must be at least 2".into()));
    }
    let rng = CounterRng::new(config.seed);
    let n = config.n;
    let prm = &config.params;
    let mut g = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    let mut prop = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let r = prm.draw(&rng, i);
        g.push(r.g);
        z.push(r.z);
        u.push(r.u);
        if let Some(pv) = r.p {
            p.push(pv);
        }
        d.push(r.d);
        y.push(if r.d == 1.0 { r.y1 } else { r.y0 });
        y0.push(r.y0);
        y1.push(r.y1);
        prop.push(r.propensity);
    }
    let mut roles = VariableRoles::new("y", "d", "g", &["z"]);
    let mut covs = vec![("g".to_string(), g), ("z".to_string(), z)];
    if prm.has_u {
        roles.covariate_cols.push("u".into());
        covs.push(("u".into(), u));
    }
    let p = if prm.prior.is_some() {
        roles = roles.with_prior_transition("p");
        Some(p)
    } else {
        None
    };
    let dataset = Dataset::from_columns(roles, y, d, p, covs, (0..n as u64).collect())?;
    Ok(GeneratedSample {
        dataset,
        y0,
        y1,
        true_propensity: prop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_passes_overlap() {
        for k in DgpKind::ALL {
            let prm = DgpParams::for_kind(k);
            prm.validate().unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        let a = DgpParams::for_kind(DgpKind::AContinuous).overlap_violations();
        assert!(a[0].1 > 0.0009 && a[0].1 < 0.001);
    }

    #[test]
    fn strong_selection_fails_overlap() {
        let mut prm = DgpParams::for_kind(DgpKind::AContinuous);
        prm.transition = Transition::Logistic(Linear::gz(-0.2, 1.5, 2.0));
        assert!(matches!(prm.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn sutva_holds_row_by_row() {
        for k in DgpKind::ALL {
            let s = generate(&DgpConfig::new(k, 500, 3)).unwrap();
            let data = &s.dataset;
            for i in 0..data.n() {
                let d = data.d()[i];
                assert_eq!(data.y()[i], d * s.y1[i] + (1.0 - d) * s.y0[i]);
            }
            if let Some(p) = data.p() {
                assert!(p.iter().zip(data.d()).all(|(&p, &d)| p == 1.0 || d == 0.0));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let c = DgpConfig::new(DgpKind::CSequential, 300, 11);
        assert_eq!(generate(&c).unwrap(), generate(&c).unwrap());
        assert_ne!(generate(&c).unwrap(), generate(&c.with_seed(12)).unwrap());
    }

    #[test]
    fn z_on_g_regression_slope() {
        let s = generate(&DgpConfig::new(DgpKind::AContinuous, 100_000, 5)).unwrap();
        let g = s.dataset.g();
        let z = s.dataset.column("z").unwrap();
        let est = crate::eif::estimate_linear_slope(&s.dataset, z, crate::eif::Estimand::LinearDg).unwrap();
        assert!((est.point - 0.5).abs() < 0.02);
        assert_eq!(g.len(), 100_000);
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let e = "A".parse::<DgpKind>().unwrap_err().to_string();
        assert!(e.contains("A_continuous") && e.contains("null_ST"));
        assert_eq!("null_GE".parse::<DgpKind>().unwrap(), DgpKind::NullGe);
    }
}
