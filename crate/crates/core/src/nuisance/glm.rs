//! Least squares and logistic regression on dense designs.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::stats::{expit, log1p_exp};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-10;
pub const IRLS_MAX_ITER: usize = 100;
pub const IRLS_TOL: f64 = 1e-8;
const SEPARATION_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    /// OLS: sup-norm of `X'r` divided by `||y||`. IRLS: sup-norm of the
    /// score `X'(y - p)`. Neural: sup-norm of the objective gradient.
    pub max_abs_score: f64,
    pub tolerance: f64,
    pub condition_warning: bool,
    pub separation_warning: bool,
    pub notes: Vec<String>,
}

impl FitDiagnostics {
    pub fn merge(&mut self, other: &FitDiagnostics) {
        self.converged &= other.converged;
        self.iterations = self.iterations.max(other.iterations);
        self.max_abs_score = self.max_abs_score.max(other.max_abs_score);
        self.tolerance = self.tolerance.max(other.tolerance);
        self.condition_warning |= other.condition_warning;
        self.separation_warning |= other.separation_warning;
        self.notes.extend(other.notes.iter().cloned());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    pub names: Vec<String>,
    pub diagnostics: FitDiagnostics,
}

impl GlmFit {
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let b = DVector::from_column_slice(&self.coefficients);
        (x * b).iter().copied().collect()
    }

    pub fn probabilities(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.linear_predictor(x).into_iter().map(expit).collect()
    }
}

fn singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    x.clone().singular_values().iter().copied().collect()
}

fn numerical_rank(sv: &[f64]) -> usize {
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// Names the columns that are linearly dependent on earlier columns.
pub fn dependent_columns(design: &DesignMatrix) -> Vec<String> {
    let x = &design.x;
    let sv = singular_values(x);
    if numerical_rank(&sv) == x.ncols() && x.nrows() >= x.ncols() {
        return Vec::new();
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let mut trial = kept.clone();
        trial.push(j);
        let sub = x.select_columns(&trial);
        if numerical_rank(&singular_values(&sub)) < trial.len() {
            bad.push(design.names[j].clone());
        } else {
            kept.push(j);
        }
    }
    bad
}

fn check_shape(design: &DesignMatrix, y: &[f64]) -> Result<()> {
    if design.nrows() != y.len() {
        return Err(Error::Data(format!(
            "design has {} rows but response has {}",
            design.nrows(),
            y.len()
        )));
    }
    if design.nrows() <= design.ncols() {
        return Err(Error::InsufficientData(format!(
            "{} rows for {} design columns",
            design.nrows(),
            design.ncols()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite response".into()));
    }
    Ok(())
}

/// Ordinary least squares through the SVD of the design.
pub fn fit_ols(design: &DesignMatrix, y: &[f64]) -> Result<GlmFit> {
    check_shape(design, y)?;
    let x = &design.x;
    let svd = x.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if max == 0.0 || min <= RANK_TOL * max {
        return Err(Error::RankDeficient {
            columns: dependent_columns(design),
        });
    }
    let yv = DVector::from_column_slice(y);
    let beta = svd
        .solve(&yv, RANK_TOL * max)
        .map_err(|e| Error::Estimation(format!("least squares solve failed: {e}")))?;
    let resid = &yv - x * &beta;
    let score = x.tr_mul(&resid);
    let ynorm = yv.norm();
    let scale = if ynorm > 0.0 { ynorm } else { 1.0 };
    let max_abs_score = score.amax() / scale;
    let diagnostics = FitDiagnostics {
        converged: max_abs_score <= 1e-8,
        iterations: 1,
        max_abs_score,
        tolerance: 1e-8,
        condition_warning: max / min > 1e8,
        separation_warning: false,
        notes: Vec::new(),
    };
    Ok(GlmFit {
        coefficients: beta.iter().copied().collect(),
        names: design.names.clone(),
        diagnostics,
    })
}

fn log_likelihood(eta: &DVector<f64>, y: &[f64]) -> f64 {
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| yi * e - log1p_exp(e))
        .sum()
}

fn has_extreme(p: &[f64]) -> bool {
    p.iter().any(|&v| v < SEPARATION_EPS || v > 1.0 - SEPARATION_EPS)
}

fn newton_direction(h: DMatrix<f64>, score: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(score));
    }
    let svd = h.svd(true, true);
    let max = svd.singular_values.max();
    if max == 0.0 {
        return None;
    }
    svd.solve(score, RANK_TOL * max).ok()
}

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares with step-halving.
///
/// Converges when the score sup-norm is at most [`IRLS_TOL`]. When fitted
/// probabilities reach within 1e-10 of 0 or 1 while the coefficient norm keeps
/// growing, the fit is treated as separated: the last iterate without extreme
/// probabilities is returned and `separation_warning` is set.
pub fn fit_logistic(design: &DesignMatrix, y: &[f64]) -> Result<GlmFit> {
    check_shape(design, y)?;
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data("logistic response must be 0/1".into()));
    }
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        return Err(Error::DegenerateFit(format!(
            "logistic response is constant at {first}"
        )));
    }
    let dep = dependent_columns(design);
    if !dep.is_empty() {
        return Err(Error::RankDeficient { columns: dep });
    }
    let x = &design.x;
    let n = x.nrows();
    let q = x.ncols();
    let yv = DVector::from_column_slice(y);

    let mut beta = DVector::<f64>::zeros(q);
    let mut eta = x * &beta;
    let mut ll = log_likelihood(&eta, y);
    let mut stable = beta.clone();
    let mut extreme_streak = 0;
    let mut polished = false;
    let mut diag = FitDiagnostics {
        tolerance: IRLS_TOL,
        ..Default::default()
    };

    for iter in 0..=IRLS_MAX_ITER {
        let p: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
        let resid = DVector::from_iterator(n, yv.iter().zip(&p).map(|(yi, pi)| yi - pi));
        let score = x.tr_mul(&resid);
        diag.iterations = iter;
        diag.max_abs_score = score.amax();
        if diag.max_abs_score <= IRLS_TOL {
            diag.converged = true;
            // One further Newton step takes the fit to rounding precision, so
            // equivalent parametrizations give the same fitted values.
            if polished {
                break;
            }
            polished = true;
        } else if polished {
            diag.converged = false;
        }
        if iter == IRLS_MAX_ITER {
            break;
        }
        let mut xw = x.clone();
        for (i, pi) in p.iter().enumerate() {
            let w = (pi * (1.0 - pi)).sqrt();
            xw.row_mut(i).scale_mut(w);
        }
        let h = xw.tr_mul(&xw);
        let Some(delta) = newton_direction(h, &score) else {
            break;
        };
        // Near the optimum the likelihood gain of a Newton step is below the
        // rounding error of the summed log-likelihood.
        let slack = 1e-13 * ll.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &delta * t;
            let cand_eta = x * &cand;
            let cand_ll = log_likelihood(&cand_eta, y);
            if cand_ll.is_finite() && cand_ll >= ll - slack {
                accepted = Some((cand, cand_eta, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_eta, cand_ll)) = accepted else {
            if diag.converged {
                break;
            }
            if diag.max_abs_score <= IRLS_TOL * n as f64 {
                diag.converged = true;
                diag.notes
                    .push("likelihood stationary to rounding; accepted at the 1e-8*n score bound".into());
            }
            break;
        };
        let old_norm = beta.norm();
        beta = cand;
        eta = cand_eta;
        ll = cand_ll;
        let p_new: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
        if has_extreme(&p_new) {
            if beta.norm() > old_norm * (1.0 + 1e-4) {
                extreme_streak += 1;
            } else {
                extreme_streak = 0;
            }
            if extreme_streak >= 2 {
                diag.separation_warning = true;
                diag.notes.push(format!(
                    "separation detected at iteration {}; returning last stable iterate",
                    iter + 1
                ));
                beta = stable.clone();
                eta = x * &beta;
                break;
            }
        } else {
            extreme_streak = 0;
            stable = beta.clone();
        }
    }
    if diag.separation_warning {
        diag.converged = false;
        let p: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
        let resid = DVector::from_iterator(n, yv.iter().zip(&p).map(|(yi, pi)| yi - pi));
        diag.max_abs_score = x.tr_mul(&resid).amax();
    }
    if !diag.converged && !diag.separation_warning {
        diag.notes.push(format!(
            "IRLS did not converge in {IRLS_MAX_ITER} iterations (score sup-norm {:.3e})",
            diag.max_abs_score
        ));
    }
    Ok(GlmFit {
        coefficients: beta.iter().copied().collect(),
        names: design.names.clone(),
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::stats::logit;

    fn design(cols: Vec<Vec<f64>>) -> DesignMatrix {
        DesignMatrix::from_columns(
            cols.into_iter()
                .enumerate()
                .map(|(j, c)| (format!("c{j}"), c))
                .collect(),
        )
    }

    #[test]
    fn ols_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let fit = fit_ols(&design(vec![vec![1.0; 10], x]), &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-10);
        assert!(fit.diagnostics.converged);
    }

    #[test]
    fn ols_duplicated_column_is_named() {
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let mut d = design(vec![vec![1.0; 10], x.clone(), (0..10).map(|i| i as f64).collect(), x]);
        d.names = vec!["one".into(), "a".into(), "b".into(), "a_copy".into()];
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        match fit_ols(&d, &y) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["a_copy"]),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn ols_residuals_orthogonal() {
        let r = CounterRng::new(3);
        let n = 200;
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|j| (0..n).map(|i| if j == 0 { 1.0 } else { r.normal(i, j) }).collect())
            .collect();
        let y: Vec<f64> = (0..n as usize)
            .map(|i| 1.0 + cols[1][i] - 2.0 * cols[2][i] + 0.1 * r.normal(i as u64, 9))
            .collect();
        let d = design(cols);
        let fit = fit_ols(&d, &y).unwrap();
        let b = DVector::from_column_slice(&fit.coefficients);
        let resid = DVector::from_column_slice(&y) - &d.x * b;
        let ynorm = DVector::from_column_slice(&y).norm();
        assert!(d.x.tr_mul(&resid).amax() <= 1e-8 * ynorm);
    }

    #[test]
    fn logistic_intercept_only_closed_form() {
        let y: Vec<f64> = (0..400).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let fit = fit_logistic(&design(vec![vec![1.0; 400]]), &y).unwrap();
        assert!((fit.coefficients[0] - logit(0.25)).abs() < 1e-8);
        assert!(fit.diagnostics.converged);
        assert!(fit.diagnostics.max_abs_score <= 1e-8);
    }

    #[test]
    fn logistic_constant_response_is_degenerate() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y = vec![0.0; 20];
        assert!(matches!(
            fit_logistic(&design(vec![vec![1.0; 20], x]), &y),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn logistic_separation_flagged() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 100.0 - 0.995).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let fit = fit_logistic(&design(vec![vec![1.0; 200], x.clone()]), &y).unwrap();
        assert!(fit.diagnostics.separation_warning);
        assert!(!fit.diagnostics.converged);
        let d = design(vec![vec![1.0; 200], x]);
        for p in fit.probabilities(&d.x) {
            let c = p.clamp(1e-3, 1.0 - 1e-3);
            assert!(c > 0.0 && c < 1.0);
        }
    }
}
