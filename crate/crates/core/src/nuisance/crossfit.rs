//! Two-fold cross-fitting.

use super::{
    glm::FitDiagnostics, train_model, CensorRule, Conditioning, FittedModel, ModelRecord,
    ModelSpec, NuisanceFit, NuisanceKind, Task,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

const VAR_SPLIT: u64 = 201;

/// A random split of `0..n` into folds labelled `1..=k` of near-equal size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_id: Vec<u8>,
    pub folds: u8,
}

impl FoldSplit {
    pub fn new(n: usize, folds: usize, seed: u64) -> Result<Self> {
        if folds != 2 {
            return Err(Error::Config(format!("cross-fitting uses 2 folds, got {folds}")));
        }
        let perm = CounterRng::new(seed).permutation(n, VAR_SPLIT);
        let mut fold_id = vec![0u8; n];
        for (rank, &pos) in perm.iter().enumerate() {
            fold_id[pos] = (rank % folds) as u8 + 1;
        }
        Ok(Self {
            fold_id,
            folds: folds as u8,
        })
    }

    pub fn rows_in(&self, fold: u8) -> Vec<usize> {
        (0..self.fold_id.len()).filter(|&i| self.fold_id[i] == fold).collect()
    }

    pub fn rows_outside(&self, fold: u8) -> Vec<usize> {
        (0..self.fold_id.len()).filter(|&i| self.fold_id[i] != fold).collect()
    }
}

/// Fits `fitter` on each fold's complement and predicts that fold.
pub fn cross_fit<F>(data: &Dataset, folds: usize, seed: u64, fitter: F) -> Result<NuisanceFit>
where
    F: Fn(&Dataset, u8) -> Result<FittedModel>,
{
    let split = FoldSplit::new(data.n(), folds, seed)?;
    let n = data.n();
    let mut predictions = vec![f64::NAN; n];
    let mut source_model = vec![0usize; n];
    let mut models = Vec::new();
    let mut diagnostics = FitDiagnostics {
        converged: true,
        ..Default::default()
    };
    let mut n_clamped = 0;
    let mut kind = NuisanceKind::Propensity;
    let mut target_d = None;
    for f in 1..=split.folds {
        let test_rows = split.rows_in(f);
        let train_rows = split.rows_outside(f);
        if test_rows.is_empty() || train_rows.is_empty() {
            return Err(Error::InsufficientData("a cross-fitting fold is empty".into()));
        }
        let train = data.subset(&train_rows)?;
        let test = data.subset(&test_rows)?;
        let model = fitter(&train, f)?;
        let (pred, moved) = model.predict(&test);
        n_clamped += moved;
        for (k, &i) in test_rows.iter().enumerate() {
            predictions[i] = pred[k];
            source_model[i] = models.len();
        }
        diagnostics.merge(&model.diagnostics);
        kind = model.kind;
        target_d = model.target_d;
        models.push(ModelRecord {
            predicts_fold: f,
            trained_on: model.trained_on.clone(),
            hyperparameters: model.hyperparameters,
            coefficients: model.coefficients(),
        });
    }
    Ok(NuisanceFit {
        kind,
        target_d,
        predictions,
        fold_id: split.fold_id,
        source_model,
        row_ids: data.row_ids().to_vec(),
        models,
        diagnostics,
        n_clamped,
        n_censored: 0,
    })
}

pub fn cross_fit_propensity(
    data: &Dataset,
    conditioning: Conditioning,
    spec: &ModelSpec,
    seed: u64,
) -> Result<NuisanceFit> {
    let task = Task {
        kind: NuisanceKind::Propensity,
        target_d: Some(1),
        conditioning,
    };
    cross_fit(data, 2, seed, |train, f| train_model(train, task, None, spec, f as u64))
}

pub fn cross_fit_outcome(
    data: &Dataset,
    target_d: u8,
    conditioning: Conditioning,
    spec: &ModelSpec,
    seed: u64,
) -> Result<NuisanceFit> {
    let task = Task {
        kind: NuisanceKind::Outcome,
        target_d: Some(target_d),
        conditioning,
    };
    cross_fit(data, 2, seed, |train, f| train_model(train, task, None, spec, f as u64))
}

pub fn cross_fit_task(
    data: &Dataset,
    kind: NuisanceKind,
    target_d: Option<u8>,
    spec: &ModelSpec,
    seed: u64,
) -> Result<NuisanceFit> {
    let task = Task {
        kind,
        target_d,
        conditioning: Conditioning::GOnly,
    };
    cross_fit(data, 2, seed, |train, f| train_model(train, task, None, spec, f as u64))
}

/// Cross-fitted `tau(d, G)`. Within each training fold the propensity and
/// outcome models are fitted and evaluated in-fold, the pseudo-outcome is
/// formed in-fold, and its regression on `G` is then evaluated on the other
/// fold. `prop_data` and `outcome_data` hold the same rows and may differ in
/// their covariate sets.
pub fn cross_fit_tau(
    prop_data: &Dataset,
    outcome_data: &Dataset,
    target_d: u8,
    spec: &ModelSpec,
    censor: &CensorRule,
    seed: u64,
) -> Result<NuisanceFit> {
    if prop_data.row_ids() != outcome_data.row_ids() {
        return Err(Error::Alignment(
            "propensity and outcome data must hold the same rows".into(),
        ));
    }
    let split = FoldSplit::new(prop_data.n(), 2, seed)?;
    let prop_task = Task {
        kind: NuisanceKind::Propensity,
        target_d: Some(1),
        conditioning: Conditioning::FullX,
    };
    let out_task = Task {
        kind: NuisanceKind::Outcome,
        target_d: Some(target_d),
        conditioning: Conditioning::FullX,
    };
    let tau_task = Task {
        kind: NuisanceKind::Tau,
        target_d: Some(target_d),
        conditioning: Conditioning::GOnly,
    };
    let mut fit = cross_fit(outcome_data, 2, seed, |train_m, f| {
        let rows = split.rows_outside(f);
        let train_p = prop_data.subset(&rows)?;
        let prop = train_model(&train_p, prop_task, None, spec, 10 + f as u64)?;
        let (p1, _) = prop.predict(&train_p);
        let mu = train_model(train_m, out_task, None, spec, 20 + f as u64)?;
        let (mu_hat, _) = mu.predict(train_m);
        let rho = crate::eif::pseudo_outcome_values(train_m.y(), train_m.d(), target_d, &p1, &mu_hat)?;
        let mut tau = train_model(train_m, tau_task, Some(&rho), spec, 30 + f as u64)?;
        tau.diagnostics.merge(&prop.diagnostics);
        tau.diagnostics.merge(&mu.diagnostics);
        Ok(tau)
    })?;
    let (censored, k) = censor.apply(&fit.predictions)?;
    fit.predictions = censored;
    fit.n_censored = k;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::VariableRoles;
    use crate::stats::expit;

    fn sample(n: usize) -> Dataset {
        let r = CounterRng::new(17);
        let g: Vec<f64> = (0..n as u64).map(|i| r.normal(i, 0)).collect();
        let d: Vec<f64> = g.iter().enumerate().map(|(i, &gi)| r.bernoulli(i as u64, 3, expit(0.5 * gi))).collect();
        let y: Vec<f64> = g.iter().zip(&d).enumerate().map(|(i, (gi, di))| gi + di + r.normal(i as u64, 5)).collect();
        Dataset::from_columns(
            VariableRoles::new("y", "d", "g", &[]),
            y,
            d,
            None,
            vec![("g".into(), g)],
            (100..100 + n as u64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn split_is_balanced_and_deterministic() {
        let a = FoldSplit::new(101, 2, 5).unwrap();
        let b = FoldSplit::new(101, 2, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows_in(1).len(), 51);
        assert_eq!(a.rows_in(2).len(), 50);
        assert!(FoldSplit::new(10, 3, 5).is_err());
    }

    #[test]
    fn every_prediction_is_out_of_fold() {
        let data = sample(400);
        let spec = ModelSpec::parametric();
        let fit = cross_fit_propensity(&data, Conditioning::FullX, &spec, 3).unwrap();
        assert!(fit.cross_fitted());
        assert!(fit.provenance_violations().is_empty());
        let out = cross_fit_outcome(&data, 1, Conditioning::FullX, &spec, 3).unwrap();
        assert!(out.provenance_violations().is_empty());
        let tau = cross_fit_tau(&data, &data, 1, &spec, &CensorRule::default(), 3).unwrap();
        assert!(tau.provenance_violations().is_empty());
        assert!(tau.predictions.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn audit_detects_leakage() {
        let data = sample(200);
        let mut fit =
            cross_fit_propensity(&data, Conditioning::FullX, &ModelSpec::parametric(), 3).unwrap();
        let i = 0;
        let other = fit.models.iter().position(|m| m.predicts_fold != fit.fold_id[i]).unwrap();
        fit.source_model[i] = other;
        assert_eq!(fit.provenance_violations(), vec![fit.row_ids[i]]);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let data = sample(300);
        let spec = ModelSpec::neural(vec![0, 2], vec![0.1], 2);
        let a = cross_fit_propensity(&data, Conditioning::FullX, &spec, 9).unwrap();
        let b = cross_fit_propensity(&data, Conditioning::FullX, &spec, 9).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.predictions), bits(&b.predictions));
        assert_eq!(a.models[0].hyperparameters, b.models[0].hyperparameters);
    }
}
