//! Test statistics as contrasts of two slope estimates, with Wald inference
//! from the per-observation difference of their EIFs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::eif::{self, Estimand, EstimationSpec, Scale, SlopeEstimate};
use crate::error::{Error, Result};
use crate::stats::{self, Z_975};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestName {
    GeDescriptive,
    GeSelectionFree,
    StDescriptive,
    StSelectionFree,
    StLinearDescriptive,
    StLinearSelectionFree,
    StCondDescriptive,
    StCondSelectionFree,
}

impl TestName {
    pub fn label(&self) -> &'static str {
        match self {
            Self::GeDescriptive => "GE_descriptive",
            Self::GeSelectionFree => "GE_selection_free",
            Self::StDescriptive => "ST_descriptive",
            Self::StSelectionFree => "ST_selection_free",
            Self::StLinearDescriptive => "ST_linear_descriptive",
            Self::StLinearSelectionFree => "ST_linear_selection_free",
            Self::StCondDescriptive => "ST_cond_descriptive",
            Self::StCondSelectionFree => "ST_cond_selection_free",
        }
    }

    /// The two slopes whose difference forms the statistic.
    pub fn components(&self) -> (Estimand, Estimand) {
        match self {
            Self::GeDescriptive => (Estimand::LinearFactual(0), Estimand::LinearFactual(1)),
            Self::GeSelectionFree => (Estimand::LinearCf(0), Estimand::LinearCf(1)),
            Self::StDescriptive => (Estimand::LogitDg, Estimand::LogitFactual(1)),
            Self::StSelectionFree => (Estimand::LogitDg, Estimand::LogitCf(1)),
            Self::StLinearDescriptive => (Estimand::LinearDg, Estimand::LinearFactual(1)),
            Self::StLinearSelectionFree => (Estimand::LinearDg, Estimand::LinearCf(1)),
            Self::StCondDescriptive => (Estimand::LogitDgGivenP1, Estimand::LogitFactualGivenP1),
            Self::StCondSelectionFree => (Estimand::LogitDgGivenP1, Estimand::LogitCfGivenP1),
        }
    }

    pub const ALL: [TestName; 8] = [
        Self::GeDescriptive,
        Self::GeSelectionFree,
        Self::StDescriptive,
        Self::StSelectionFree,
        Self::StLinearDescriptive,
        Self::StLinearSelectionFree,
        Self::StCondDescriptive,
        Self::StCondSelectionFree,
    ];
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TestName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown test statistic {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StFormulation {
    LogitMain,
    LinearAlt,
    ConditionalAlt,
}

impl StFormulation {
    pub fn label(&self) -> &'static str {
        match self {
            Self::LogitMain => "logit_main",
            Self::LinearAlt => "linear_alt",
            Self::ConditionalAlt => "conditional_alt",
        }
    }

    pub fn tests(&self) -> (TestName, TestName) {
        match self {
            Self::LogitMain => (TestName::StDescriptive, TestName::StSelectionFree),
            Self::LinearAlt => (TestName::StLinearDescriptive, TestName::StLinearSelectionFree),
            Self::ConditionalAlt => (TestName::StCondDescriptive, TestName::StCondSelectionFree),
        }
    }
}

impl FromStr for StFormulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit_main" => Ok(Self::LogitMain),
            "linear_alt" => Ok(Self::LinearAlt),
            "conditional_alt" => Ok(Self::ConditionalAlt),
            _ => Err(Error::Config(format!(
                "unknown ST formulation {s}; expected logit_main, linear_alt or conditional_alt"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub name: TestName,
    pub point: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Two-sided normal p-value.
    pub p_value: f64,
    /// `P(Z > point / se)`, reported for reference only.
    pub p_upper: f64,
    pub n: usize,
    pub eif: Vec<f64>,
    pub components: Box<(SlopeEstimate, SlopeEstimate)>,
}

/// `a - b` with the standard error of the mean of `a.eif - b.eif`.
pub fn contrast(name: TestName, a: &SlopeEstimate, b: &SlopeEstimate) -> Result<TestResult> {
    if a.n != b.n || a.row_ids != b.row_ids {
        return Err(Error::Alignment(format!(
            "{name}: {} and {} were estimated on different observations",
            a.estimand, b.estimand
        )));
    }
    let eif: Vec<f64> = a.eif.iter().zip(&b.eif).map(|(x, y)| x - y).collect();
    let n = a.n as f64;
    let point = a.point - b.point;
    let se = (eif.iter().map(|e| e * e).sum::<f64>() / n / n).sqrt();
    Ok(TestResult {
        name,
        point,
        se,
        ci_low: point - Z_975 * se,
        ci_high: point + Z_975 * se,
        p_value: stats::two_sided_p(point, se),
        p_upper: stats::upper_one_sided_p(point, se),
        n: a.n,
        eif,
        components: Box::new((a.clone(), b.clone())),
    })
}

/// Significance marker: `*` p < 0.05, `**` p < 0.01, `***` p < 0.001.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestPair {
    pub descriptive: TestResult,
    pub selection_free: TestResult,
}

impl TestPair {
    pub fn slopes(&self) -> Vec<&SlopeEstimate> {
        let mut out: Vec<&SlopeEstimate> = Vec::new();
        for t in [&self.descriptive, &self.selection_free] {
            for s in [&t.components.0, &t.components.1] {
                if !out.iter().any(|o| o.estimand == s.estimand) {
                    out.push(s);
                }
            }
        }
        out
    }
}

/// Runs one named test statistic.
pub fn run_test(data: &Dataset, name: TestName, spec: &EstimationSpec) -> Result<TestResult> {
    let (a, b) = name.components();
    let ea = eif::estimate(data, a, spec)?;
    let eb = eif::estimate(data, b, spec)?;
    contrast(name, &ea, &eb)
}

/// Descriptive and selection-free GE statistics: the `D = 0` slope minus the
/// `D = 1` slope, factual and counterfactual.
pub fn run_ge(data: &Dataset, spec: &EstimationSpec) -> Result<TestPair> {
    let f0 = eif::estimate_factual_slope(data, 0, Scale::Linear, spec)?;
    let f1 = eif::estimate_factual_slope(data, 1, Scale::Linear, spec)?;
    let c0 = eif::estimate_counterfactual_slope(data, 0, Scale::Linear, spec)?;
    let c1 = eif::estimate_counterfactual_slope(data, 1, Scale::Linear, spec)?;
    Ok(TestPair {
        descriptive: contrast(TestName::GeDescriptive, &f0, &f1)?,
        selection_free: contrast(TestName::GeSelectionFree, &c0, &c1)?,
    })
}

/// Descriptive and selection-free ST statistics: the D-on-G slope minus the
/// factual or counterfactual outcome slope among `D = 1`.
pub fn run_st(data: &Dataset, spec: &EstimationSpec, formulation: StFormulation) -> Result<TestPair> {
    if !data.binary_outcome() {
        return Err(Error::Data("ST analyses require a binary outcome".into()));
    }
    if formulation == StFormulation::ConditionalAlt && data.p().is_none() {
        return Err(Error::Config(
            "conditional_alt requires a prior transition column".into(),
        ));
    }
    let (dn, sn) = formulation.tests();
    let (dg, fac) = dn.components();
    let (_, cf) = sn.components();
    let dg = eif::estimate(data, dg, spec)?;
    let fac = eif::estimate(data, fac, spec)?;
    let cf = eif::estimate(data, cf, spec)?;
    Ok(TestPair {
        descriptive: contrast(dn, &dg, &fac)?,
        selection_free: contrast(sn, &dg, &cf)?,
    })
}
