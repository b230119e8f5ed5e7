//! Nuisance regressions: propensity `P(D=1|.)`, outcome `E(Y|D=d,.)` and the
//! second-stage regression `tau(d,G) = E[rho|G]`, with parametric or neural
//! backends and optional two-fold cross-fitting.

pub mod crossfit;
pub mod design;
pub mod glm;
pub mod neural;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub use crossfit::{cross_fit, cross_fit_tau, FoldSplit};
pub use design::{build_design, build_design_with, DesignKind, DesignMatrix};
pub use glm::{fit_logistic, fit_ols, FitDiagnostics, GlmFit};
pub use neural::{fit_neural, NeuralFit, Network};

/// Probability-type predictions are clamped to `[PROB_EPS, 1 - PROB_EPS]`.
pub const PROB_EPS: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Parametric,
    Neural,
}

/// Link used for binary outcomes in `mu(d, X)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinaryOutcomeLink {
    Logistic,
    /// Interacted least squares, then clamped into `[PROB_EPS, 1 - PROB_EPS]`.
    LinearClamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub backend: Backend,
    pub include_g_squared: bool,
    pub nn_hidden_sizes: Vec<usize>,
    pub nn_decay_grid: Vec<f64>,
    pub cv_folds: usize,
    pub nn_max_iter: usize,
    pub binary_outcome_link: BinaryOutcomeLink,
    /// Seeds network initialization and cross-validation folds.
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::parametric()
    }
}

impl ModelSpec {
    pub fn parametric() -> Self {
        Self {
            backend: Backend::Parametric,
            include_g_squared: true,
            nn_hidden_sizes: vec![0, 2, 5],
            nn_decay_grid: vec![0.0, 0.01, 0.1],
            cv_folds: 5,
            nn_max_iter: 5000,
            binary_outcome_link: BinaryOutcomeLink::Logistic,
            seed: 0,
        }
    }

    pub fn neural(hidden: Vec<usize>, decay: Vec<f64>, cv_folds: usize) -> Self {
        Self {
            backend: Backend::Neural,
            nn_hidden_sizes: hidden,
            nn_decay_grid: decay,
            cv_folds,
            ..Self::parametric()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.backend == Backend::Neural {
            if self.nn_hidden_sizes.is_empty() || self.nn_decay_grid.is_empty() {
                return Err(Error::Config(
                    "neural backend requires nonempty hidden-size and decay grids".into(),
                ));
            }
            if self.nn_decay_grid.iter().any(|d| !d.is_finite() || *d < 0.0) {
                return Err(Error::Config("weight decay must be finite and nonnegative".into()));
            }
            let grid = self.nn_hidden_sizes.len() * self.nn_decay_grid.len();
            if grid > 1 && self.cv_folds < 2 {
                return Err(Error::Config("cross-validation needs at least 2 folds".into()));
            }
        }
        if self.cv_folds == 0 {
            return Err(Error::Config("cv_folds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NuisanceKind {
    Propensity,
    Outcome,
    Tau,
    /// `E(D|G)`.
    DgMean,
    /// `E(Y|D=1,G)`.
    YDgMean,
}

impl NuisanceKind {
    fn code(self) -> u64 {
        match self {
            Self::Propensity => 1,
            Self::Outcome => 2,
            Self::Tau => 3,
            Self::DgMean => 4,
            Self::YDgMean => 5,
        }
    }
}

/// Covariates a propensity or outcome model conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conditioning {
    FullX,
    GOnly,
    /// Full `X`, fitted on the `P == 1` rows only.
    FullXGivenP1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauConditioning {
    Marginal,
    GivenP1,
}

/// How out-of-range `tau` predictions are brought into (0, 1). A `None`
/// bound means "the most extreme in-range prediction in the sample".
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CensorRule {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl CensorRule {
    pub fn sample_range() -> Self {
        Self::default()
    }

    pub fn fixed(lower: Option<f64>, upper: Option<f64>) -> Self {
        Self { lower, upper }
    }

    pub fn validate(&self) -> Result<()> {
        for b in [self.lower, self.upper].into_iter().flatten() {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("censor bound {b} must lie in (0, 1)")));
            }
        }
        if let (Some(l), Some(u)) = (self.lower, self.upper) {
            if l >= u {
                return Err(Error::Config("lower censor bound must be below the upper".into()));
            }
        }
        Ok(())
    }

    /// Returns the censored values and the number of values recoded.
    pub fn apply(&self, values: &[f64]) -> Result<(Vec<f64>, usize)> {
        self.validate()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Estimation("non-finite tau prediction".into()));
        }
        let inside = values.iter().copied().filter(|&v| v > 0.0 && v < 1.0);
        let (lo, hi) = inside.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        if !lo.is_finite() {
            return Err(Error::Estimation(
                "every tau prediction lies outside (0, 1)".into(),
            ));
        }
        let lo = self.lower.unwrap_or(lo);
        let hi = self.upper.unwrap_or(hi);
        let mut recoded = 0;
        let out = values
            .iter()
            .map(|&v| {
                if v >= 1.0 {
                    recoded += 1;
                    hi
                } else if v <= 0.0 {
                    recoded += 1;
                    lo
                } else {
                    v
                }
            })
            .collect();
        Ok((out, recoded))
    }
}

/// Clamps into `[PROB_EPS, 1 - PROB_EPS]`, returning the number of values moved.
pub fn clamp_probabilities(values: &mut [f64]) -> usize {
    let mut moved = 0;
    for v in values.iter_mut() {
        let c = v.clamp(PROB_EPS, 1.0 - PROB_EPS);
        if c != *v {
            moved += 1;
            *v = c;
        }
    }
    moved
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Predictor {
    Ols(GlmFit),
    Logistic(GlmFit),
    Neural(Network),
}

/// A trained nuisance model that can predict for any dataset with the same
/// covariate layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedModel {
    pub kind: NuisanceKind,
    pub target_d: Option<u8>,
    pub design: DesignKind,
    pub include_g_squared: bool,
    /// Value substituted for `D` in the prediction design, if any.
    pub predict_d: Option<u8>,
    pub clamp: bool,
    pub predictor: Predictor,
    pub hyperparameters: Option<(usize, f64)>,
    pub diagnostics: FitDiagnostics,
    /// Row ids the model was trained on.
    pub trained_on: Vec<u64>,
}

impl FittedModel {
    /// Raw predictions and the number clamped.
    pub fn predict(&self, data: &Dataset) -> (Vec<f64>, usize) {
        let m = build_design_with(data, self.design, self.predict_d, self.include_g_squared);
        let mut out = match &self.predictor {
            Predictor::Ols(f) => f.linear_predictor(&m.x),
            Predictor::Logistic(f) => f.probabilities(&m.x),
            Predictor::Neural(net) => net.predict(&m.x),
        };
        let moved = if self.clamp {
            clamp_probabilities(&mut out)
        } else {
            0
        };
        (out, moved)
    }

    pub fn coefficients(&self) -> Option<Vec<(String, f64)>> {
        match &self.predictor {
            Predictor::Ols(f) | Predictor::Logistic(f) => {
                Some(f.names.iter().cloned().zip(f.coefficients.iter().copied()).collect())
            }
            Predictor::Neural(_) => None,
        }
    }
}

/// Record of one trained model inside a (possibly cross-fitted) fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRecord {
    /// Fold label of the rows the model predicts for (0 without cross-fitting).
    pub predicts_fold: u8,
    pub trained_on: Vec<u64>,
    pub hyperparameters: Option<(usize, f64)>,
    pub coefficients: Option<Vec<(String, f64)>>,
}

/// Per-observation nuisance predictions with fold provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuisanceFit {
    pub kind: NuisanceKind,
    pub target_d: Option<u8>,
    pub predictions: Vec<f64>,
    /// Fold label per observation: 0 without cross-fitting, else 1 or 2.
    pub fold_id: Vec<u8>,
    /// Index into `models` of the model that produced each prediction.
    pub source_model: Vec<usize>,
    pub row_ids: Vec<u64>,
    pub models: Vec<ModelRecord>,
    pub diagnostics: FitDiagnostics,
    pub n_clamped: usize,
    pub n_censored: usize,
}

impl NuisanceFit {
    pub(crate) fn from_single(data: &Dataset, model: FittedModel) -> Self {
        let (pred, moved) = model.predict(data);
        let n = data.n();
        Self {
            kind: model.kind,
            target_d: model.target_d,
            predictions: pred,
            fold_id: vec![0; n],
            source_model: vec![0; n],
            row_ids: data.row_ids().to_vec(),
            models: vec![ModelRecord {
                predicts_fold: 0,
                trained_on: model.trained_on.clone(),
                hyperparameters: model.hyperparameters,
                coefficients: model.coefficients(),
            }],
            diagnostics: model.diagnostics.clone(),
            n_clamped: moved,
            n_censored: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.predictions.len()
    }

    pub fn cross_fitted(&self) -> bool {
        self.fold_id.iter().any(|&f| f != 0)
    }

    /// Coefficients of the single model when not cross-fitted.
    pub fn coefficients(&self) -> Option<&[(String, f64)]> {
        match self.models.as_slice() {
            [m] => m.coefficients.as_deref(),
            _ => None,
        }
    }

    /// Checks that every cross-fitted prediction came from a model trained
    /// only on rows of other folds. Returns the offending row ids.
    pub fn provenance_violations(&self) -> Vec<u64> {
        use std::collections::HashMap;
        let fold_of: HashMap<u64, u8> =
            self.row_ids.iter().copied().zip(self.fold_id.iter().copied()).collect();
        let mut bad = Vec::new();
        for i in 0..self.n() {
            let f = self.fold_id[i];
            if f == 0 {
                continue;
            }
            let model = &self.models[self.source_model[i]];
            let leaked = model.predicts_fold != f
                || model
                    .trained_on
                    .iter()
                    .any(|r| *r == self.row_ids[i] || fold_of.get(r) == Some(&f));
            if leaked {
                bad.push(self.row_ids[i]);
            }
        }
        bad
    }
}

fn binary_response(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0 || x == 1.0)
}

fn nuisance_seed(spec: &ModelSpec, kind: NuisanceKind, target_d: Option<u8>, salt: u64) -> u64 {
    let td = target_d.map_or(0, |d| d as u64 + 1);
    derive_seed(spec.seed, kind.code() * 64 + td * 8 + salt)
}

/// What a single model should be trained to predict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Task {
    pub kind: NuisanceKind,
    pub target_d: Option<u8>,
    pub conditioning: Conditioning,
}

/// Trains one model on `train`. `response` overrides the column implied by
/// the task (used for `tau`, whose response is the pseudo-outcome).
pub(crate) fn train_model(
    train: &Dataset,
    task: Task,
    response: Option<&[f64]>,
    spec: &ModelSpec,
    salt: u64,
) -> Result<FittedModel> {
    spec.validate()?;
    let g2 = spec.include_g_squared;
    let all: Vec<usize> = (0..train.n()).collect();
    let stratum = |d: u8| train.stratum(d);
    // (design, rows, response, binary, clamp, predict_d)
    let (design, rows, y, binary, clamp, predict_d): (DesignKind, Vec<usize>, Vec<f64>, bool, bool, Option<u8>) =
        match task.kind {
            NuisanceKind::Propensity => {
                let design = match task.conditioning {
                    Conditioning::GOnly => DesignKind::GOnly,
                    _ => DesignKind::PropensityAdditive,
                };
                (design, all, train.d().to_vec(), true, true, None)
            }
            NuisanceKind::DgMean => (DesignKind::GOnly, all, train.d().to_vec(), true, true, None),
            NuisanceKind::Outcome | NuisanceKind::YDgMean => {
                let d = task.target_d.ok_or_else(|| {
                    Error::Config("outcome regression needs a target transition value".into())
                })?;
                let y = train.y().to_vec();
                let binary = train.binary_outcome();
                let g_only =
                    task.kind == NuisanceKind::YDgMean || task.conditioning == Conditioning::GOnly;
                let clamp = task.kind == NuisanceKind::YDgMean;
                if g_only {
                    (DesignKind::GOnly, stratum(d), y, binary, clamp, None)
                } else if spec.backend == Backend::Parametric
                    && (!binary || spec.binary_outcome_link == BinaryOutcomeLink::LinearClamped)
                {
                    (DesignKind::OutcomeInteracted, all, y, false, binary, Some(d))
                } else {
                    (DesignKind::PropensityAdditive, stratum(d), y, binary, clamp, None)
                }
            }
            NuisanceKind::Tau => {
                let y = response
                    .ok_or_else(|| Error::Config("tau regression needs a pseudo-outcome".into()))?;
                (DesignKind::TauQuadratic, all, y.to_vec(), false, false, None)
            }
        };
    let y = match (task.kind, response) {
        (NuisanceKind::Tau, _) | (_, None) => y,
        (_, Some(r)) => r.to_vec(),
    };
    let full = build_design_with(train, design, None, g2);
    if task.kind == NuisanceKind::Propensity && rows.len() < full.ncols() + 10 {
        return Err(Error::InsufficientData(format!(
            "{} rows for a {}-column propensity design",
            rows.len(),
            full.ncols()
        )));
    }
    if rows.len() <= full.ncols() {
        return Err(Error::InsufficientData(format!(
            "{:?} model: {} rows for {} design columns",
            task.kind,
            rows.len(),
            full.ncols()
        )));
    }
    let trained_on: Vec<u64> = rows.iter().map(|&i| train.row_ids()[i]).collect();
    let (predictor, hyper, diagnostics) = match spec.backend {
        Backend::Parametric => {
            let m = if rows.len() == train.n() { full } else { full.rows(&rows) };
            let yr: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            if binary {
                let f = fit_logistic(&m, &yr).map_err(|e| stage(task, e))?;
                let diag = f.diagnostics.clone();
                (Predictor::Logistic(f), None, diag)
            } else {
                let f = fit_ols(&m, &yr).map_err(|e| stage(task, e))?;
                let diag = f.diagnostics.clone();
                (Predictor::Ols(f), None, diag)
            }
        }
        Backend::Neural => {
            if binary && binary_response(&y) {
                let first = y[rows[0]];
                if rows.iter().all(|&i| y[i] == first) {
                    return Err(stage(
                        task,
                        Error::DegenerateFit(format!("binary response is constant at {first}")),
                    ));
                }
            }
            let seed = nuisance_seed(spec, task.kind, task.target_d, salt);
            let f = neural::fit_neural_rows(&full, &y, &rows, spec, binary, seed)?;
            let diag = f.diagnostics.clone();
            (Predictor::Neural(f.network), Some((f.hidden, f.decay)), diag)
        }
    };
    Ok(FittedModel {
        kind: task.kind,
        target_d: task.target_d,
        design,
        include_g_squared: g2,
        predict_d,
        clamp,
        predictor,
        hyperparameters: hyper,
        diagnostics,
        trained_on,
    })
}

fn stage(task: Task, e: Error) -> Error {
    match e {
        Error::DegenerateFit(m) => Error::DegenerateFit(format!(
            "{:?} model{}: {m}",
            task.kind,
            task.target_d.map(|d| format!(" (d={d})")).unwrap_or_default()
        )),
        other => other,
    }
}

/// `P(D=1|.)` for every row of the conditioning population, clamped to
/// `[PROB_EPS, 1 - PROB_EPS]`. With `FullXGivenP1` the predictions cover
/// only the `P == 1` rows.
pub fn fit_propensity(data: &Dataset, conditioning: Conditioning, spec: &ModelSpec) -> Result<NuisanceFit> {
    let task = Task {
        kind: NuisanceKind::Propensity,
        target_d: Some(1),
        conditioning,
    };
    let pop = match conditioning {
        Conditioning::FullXGivenP1 => data.given_prior_transition()?,
        _ => data.clone(),
    };
    let model = train_model(&pop, task, None, spec, 0)?;
    Ok(NuisanceFit::from_single(&pop, model))
}

/// `mu(d, .)` for every row. `FullX` uses the interacted design (continuous
/// outcomes) or a logistic fit within the `D == d` stratum (binary
/// outcomes); `GOnly` fits `[1, G, G^2]` within the stratum.
pub fn fit_outcome(data: &Dataset, target_d: u8, conditioning: Conditioning, spec: &ModelSpec) -> Result<NuisanceFit> {
    let task = Task {
        kind: NuisanceKind::Outcome,
        target_d: Some(target_d),
        conditioning,
    };
    let model = train_model(data, task, None, spec, 0)?;
    Ok(NuisanceFit::from_single(data, model))
}

/// `E(D|G)` on `[1, G, G^2]`, clamped.
pub fn fit_dg_mean(data: &Dataset, spec: &ModelSpec) -> Result<NuisanceFit> {
    let task = Task {
        kind: NuisanceKind::DgMean,
        target_d: None,
        conditioning: Conditioning::GOnly,
    };
    let model = train_model(data, task, None, spec, 0)?;
    Ok(NuisanceFit::from_single(data, model))
}

/// `E(Y|D=1,G)` within the `D == 1` stratum on `[1, G, G^2]`, clamped.
pub fn fit_y_dg_mean(data: &Dataset, spec: &ModelSpec) -> Result<NuisanceFit> {
    let task = Task {
        kind: NuisanceKind::YDgMean,
        target_d: Some(1),
        conditioning: Conditioning::GOnly,
    };
    let model = train_model(data, task, None, spec, 0)?;
    Ok(NuisanceFit::from_single(data, model))
}

/// Regresses the pseudo-outcome on `[1, G, G^2]` and censors the fitted
/// values into (0, 1). `rho` is aligned with `data`, or with its `P == 1`
/// rows under `GivenP1`.
pub fn fit_tau(
    data: &Dataset,
    rho: &crate::eif::PseudoOutcome,
    spec: &ModelSpec,
    conditioning: TauConditioning,
    censor: &CensorRule,
) -> Result<NuisanceFit> {
    let (pop, values) = match conditioning {
        TauConditioning::Marginal => (data.clone(), rho.values.clone()),
        TauConditioning::GivenP1 => {
            let sub = data.given_prior_transition()?;
            if rho.values.len() == sub.n() {
                (sub, rho.values.clone())
            } else if rho.values.len() == data.n() {
                let p = data.p().expect("checked by given_prior_transition");
                let v = rho
                    .values
                    .iter()
                    .zip(p)
                    .filter(|(_, &p)| p == 1.0)
                    .map(|(v, _)| *v)
                    .collect();
                (sub, v)
            } else {
                return Err(Error::Alignment("pseudo-outcome length does not match data".into()));
            }
        }
    };
    if values.len() != pop.n() {
        return Err(Error::Alignment("pseudo-outcome length does not match data".into()));
    }
    let task = Task {
        kind: NuisanceKind::Tau,
        target_d: Some(rho.target_d),
        conditioning: Conditioning::GOnly,
    };
    let model = train_model(&pop, task, Some(&values), spec, 0)?;
    let mut fit = NuisanceFit::from_single(&pop, model);
    let (censored, k) = censor.apply(&fit.predictions)?;
    fit.predictions = censored;
    fit.n_censored = k;
    Ok(fit)
}
