//! Ground-truth estimands for the synthetic DGPs.
//!
//! The analytic oracle integrates the latent confounders out of every
//! conditional mean given `G` with nested quadrature, then takes the
//! population projection slope over a Gauss-Hermite rule for `G`. The Monte
//! Carlo oracle streams draws from the generator and is used to cross-check
//! the analytic values.

use rayon::prelude::*;
use serde::Serialize;

use super::dgp::{DgpConfig, DgpParams, Latent, Transition, VAR_G};
use super::quadrature::{standard_normal, Bridge, Rule};
use crate::eif::Estimand;
use crate::error::{Error, Result};
use crate::inference::TestName;
use crate::rng::{derive_seed, CounterRng};
use crate::stats::{expit, logit};

pub const G_NODES: usize = 101;
pub const LATENT_NODES: usize = 101;
const U_NODES: usize = 41;
/// G nodes with negligible weight are skipped so that conditional means
/// stay strictly inside (0, 1).
const MIN_G_WEIGHT: f64 = 1e-20;
const ORACLE_STREAM: u64 = 0x0AC1E;
const CHUNK: usize = 1 << 16;

/// Conditional means given `G = g`, with the latents integrated out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalMeans {
    pub ey: [f64; 2],
    pub ed: f64,
    pub ey_given_d: [f64; 2],
    pub ep: f64,
    pub ey1_given_p1: f64,
    pub ed_given_p1: f64,
}

struct LatentRule {
    z: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
}

fn latent_rule(params: &DgpParams, g: f64, zr: &Rule, ur: &Rule) -> LatentRule {
    let zs: Vec<f64> = match params.latent {
        Latent::Normal { on_g, sd } => zr.nodes.iter().map(|x| on_g * g + sd * x).collect(),
        Latent::Bridge { .. } => zr.nodes.clone(),
    };
    let mut out = LatentRule {
        z: Vec::new(),
        u: Vec::new(),
        w: Vec::new(),
    };
    if params.has_u {
        for (z, wz) in zs.iter().zip(&zr.weights) {
            for (u, wu) in ur.nodes.iter().zip(&ur.weights) {
                out.z.push(*z);
                out.u.push(*u);
                out.w.push(wz * wu);
            }
        }
    } else {
        out.u = vec![0.0; zs.len()];
        out.w = zr.weights.clone();
        out.z = zs;
    }
    out
}

/// Analytic oracle for one parameter record.
pub struct AnalyticOracle {
    params: DgpParams,
    g_rule: Rule,
    z_rule: Rule,
    u_rule: Rule,
}

impl AnalyticOracle {
    pub fn new(params: &DgpParams) -> Self {
        let z_rule = match params.latent {
            Latent::Normal { .. } => standard_normal(LATENT_NODES),
            Latent::Bridge { phi } => Bridge::new(phi).rule(LATENT_NODES),
        };
        let mut g_rule = standard_normal(G_NODES);
        let keep: Vec<usize> = (0..g_rule.len())
            .filter(|&i| g_rule.weights[i] >= MIN_G_WEIGHT)
            .collect();
        g_rule = Rule {
            nodes: keep.iter().map(|&i| g_rule.nodes[i]).collect(),
            weights: keep.iter().map(|&i| g_rule.weights[i]).collect(),
        };
        Self {
            params: *params,
            g_rule,
            z_rule,
            u_rule: standard_normal(U_NODES),
        }
    }

    pub fn conditional_means(&self, g: f64) -> ConditionalMeans {
        let prm = &self.params;
        let lr = latent_rule(prm, g, &self.z_rule, &self.u_rule);
        let mut acc = [0.0f64; 9];
        for k in 0..lr.w.len() {
            let (z, u, w) = (lr.z[k], lr.u[k], lr.w[k]);
            let pp = prm.prior.map_or(1.0, |l| expit(l.eval(g, z, u)));
            let (pd, qd) = match prm.transition {
                Transition::Logistic(l) => {
                    let lp = l.eval(g, z, u);
                    (expit(lp), expit(-lp))
                }
                Transition::Coin(c) => (c, 1.0 - c),
            };
            let d1 = pp * pd;
            let d0 = if prm.prior.is_some() { 1.0 - d1 } else { qd };
            let m0 = prm.outcome.mean(0, g, z, u);
            let m1 = prm.outcome.mean(1, g, z, u);
            acc[0] += w * m0;
            acc[1] += w * m1;
            acc[2] += w * d1;
            acc[3] += w * d0 * m0;
            acc[4] += w * d0;
            acc[5] += w * d1 * m1;
            acc[6] += w * pp;
            acc[7] += w * pp * m1;
            acc[8] += w * pp * pd;
        }
        ConditionalMeans {
            ey: [acc[0], acc[1]],
            ed: acc[2],
            ey_given_d: [acc[3] / acc[4], acc[5] / acc[2]],
            ep: acc[6],
            ey1_given_p1: acc[7] / acc[6],
            ed_given_p1: acc[8] / acc[6],
        }
    }

    /// The function of `G` whose projection slope defines `estimand`, and
    /// whether the slope is taken over the `P = 1` population.
    fn curve(&self, estimand: Estimand) -> Result<(Box<dyn Fn(&ConditionalMeans) -> f64>, bool)> {
        let binary = self.params.outcome.binary();
        let needs_binary = matches!(
            estimand,
            Estimand::LogitCf(_)
                | Estimand::LogitFactual(_)
                | Estimand::LogitCfGivenP1
                | Estimand::LogitFactualGivenP1
        );
        if needs_binary && !binary {
            return Err(Error::Config(format!(
                "{estimand} requires a binary outcome"
            )));
        }
        if estimand.given_p1() && self.params.prior.is_none() {
            return Err(Error::Config(format!(
                "{estimand} requires a prior transition"
            )));
        }
        let idx = |d: u8| usize::from(d == 1);
        Ok(match estimand {
            Estimand::LinearCf(d) => (Box::new(move |m| m.ey[idx(d)]), false),
            Estimand::LogitCf(d) => (Box::new(move |m| logit(m.ey[idx(d)])), false),
            Estimand::LinearFactual(d) => (Box::new(move |m| m.ey_given_d[idx(d)]), false),
            Estimand::LogitFactual(d) => (Box::new(move |m| logit(m.ey_given_d[idx(d)])), false),
            Estimand::LinearDg => (Box::new(|m| m.ed), false),
            Estimand::LogitDg => (Box::new(|m| logit(m.ed)), false),
            Estimand::LogitCfGivenP1 => (Box::new(|m| logit(m.ey1_given_p1)), true),
            Estimand::LogitDgGivenP1 => (Box::new(|m| logit(m.ed_given_p1)), true),
            Estimand::LogitFactualGivenP1 => (Box::new(|m| logit(m.ey_given_d[1])), true),
        })
    }

    pub fn slope(&self, estimand: Estimand) -> Result<f64> {
        let (f, given_p1) = self.curve(estimand)?;
        let mut pts = Vec::with_capacity(self.g_rule.len());
        for (&g, &w) in self.g_rule.nodes.iter().zip(&self.g_rule.weights) {
            let m = self.conditional_means(g);
            let pw = if given_p1 { w * m.ep } else { w };
            pts.push((g, pw, f(&m)));
        }
        Ok(weighted_slope(&pts))
    }

    pub fn test(&self, name: TestName) -> Result<f64> {
        let (a, b) = name.components();
        Ok(self.slope(a)? - self.slope(b)?)
    }
}

fn weighted_slope(pts: &[(f64, f64, f64)]) -> f64 {
    let sw: f64 = pts.iter().map(|p| p.1).sum();
    let gbar = pts.iter().map(|p| p.1 * p.0).sum::<f64>() / sw;
    let vbar = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / sw;
    let sxy: f64 = pts.iter().map(|p| p.1 * (p.0 - gbar) * (p.2 - vbar)).sum();
    let sxx: f64 = pts.iter().map(|p| p.1 * (p.0 - gbar).powi(2)).sum();
    sxy / sxx
}

pub fn analytic_truth(params: &DgpParams, estimand: Estimand) -> Result<f64> {
    AnalyticOracle::new(params).slope(estimand)
}

pub fn analytic_test_truth(params: &DgpParams, name: TestName) -> Result<f64> {
    AnalyticOracle::new(params).test(name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTruth {
    pub estimand: Estimand,
    pub value: f64,
    pub mc_se: f64,
    pub mc_draws: usize,
    pub analytic: f64,
}

/// Tabulated conditional curve, linearly interpolated in `g`.
struct Table {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl Table {
    fn at(&self, g: f64) -> f64 {
        let t = ((g - self.lo) / self.step).clamp(0.0, (self.values.len() - 1) as f64);
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    g: f64,
    v: f64,
    gg: f64,
    gv: f64,
}

impl Moments {
    fn add(mut self, o: Moments) -> Moments {
        self.n += o.n;
        self.g += o.g;
        self.v += o.v;
        self.gg += o.gg;
        self.gv += o.gv;
        self
    }
}

/// Monte Carlo oracle over `mc_draws` streamed units. Linear
/// counterfactual and `D`-on-`G` slopes regress the stored draws directly;
/// other estimands regress a tabulated conditional curve evaluated at the
/// drawn `G`. `mc_se` comes from the slope's influence function.
pub fn oracle_truth(config: &DgpConfig, estimand: Estimand, mc_draws: usize) -> Result<OracleTruth> {
    config.params.validate()?;
    if mc_draws < 100 {
        return Err(Error::Config("mc_draws must be at least 100".into()));
    }
    let oracle = AnalyticOracle::new(&config.params);
    let analytic = oracle.slope(estimand)?;
    let (f, given_p1) = oracle.curve(estimand)?;
    let table = {
        let (lo, hi, m) = (-8.0, 8.0, 4001);
        let step = (hi - lo) / (m - 1) as f64;
        let values = (0..m)
            .map(|i| f(&oracle.conditional_means(lo + step * i as f64)))
            .collect();
        Table { lo, step, values }
    };
    let rng = CounterRng::new(derive_seed(config.seed, ORACLE_STREAM));
    let prm = config.params;
    let value_of = |row: u64| -> Option<(f64, f64)> {
        match estimand {
            Estimand::LinearCf(d) => {
                let r = prm.draw(&rng, row);
                Some((r.g, if d == 1 { r.y1 } else { r.y0 }))
            }
            Estimand::LinearDg => {
                let r = prm.draw(&rng, row);
                Some((r.g, r.d))
            }
            _ if given_p1 => {
                let r = prm.draw(&rng, row);
                (r.p == Some(1.0)).then(|| (r.g, table.at(r.g)))
            }
            _ => {
                let g = rng.normal(row, VAR_G);
                Some((g, table.at(g)))
            }
        }
    };
    let chunks: Vec<(u64, u64)> = (0..mc_draws)
        .step_by(CHUNK)
        .map(|s| (s as u64, (s + CHUNK).min(mc_draws) as u64))
        .collect();
    let m = chunks
        .par_iter()
        .map(|&(a, b)| {
            let mut m = Moments::default();
            for row in a..b {
                if let Some((g, v)) = value_of(row) {
                    m.n += 1.0;
                    m.g += g;
                    m.v += v;
                    m.gg += g * g;
                    m.gv += g * v;
                }
            }
            m
        })
        .reduce(Moments::default, Moments::add);
    if m.n < 10.0 {
        return Err(Error::InsufficientData("too few oracle draws in the population".into()));
    }
    let gbar = m.g / m.n;
    let vbar = m.v / m.n;
    let var = m.gg / m.n - gbar * gbar;
    let xi = (m.gv / m.n - gbar * vbar) / var;
    let ss: f64 = chunks
        .par_iter()
        .map(|&(a, b)| {
            let mut s = 0.0;
            for row in a..b {
                if let Some((g, v)) = value_of(row) {
                    let e = ((g - gbar) * (v - vbar) - (g - gbar).powi(2) * xi) / var;
                    s += e * e;
                }
            }
            s
        })
        .sum();
    Ok(OracleTruth {
        estimand,
        value: xi,
        mc_se: (ss / m.n).sqrt() / m.n.sqrt(),
        mc_draws,
        analytic,
    })
}
