//! Single-hidden-layer networks with logistic-sigmoid units, L2 weight decay
//! and hyperparameters chosen by K-fold cross-validation.

use nalgebra::DMatrix;
use serde::Serialize;

use super::design::DesignMatrix;
use super::glm::FitDiagnostics;
use super::ModelSpec;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::stats::{expit, log1p_exp};

pub const GRAD_TOL: f64 = 1e-5;
const ARMIJO_C: f64 = 1e-4;
const VAR_INIT: u64 = 101;
const VAR_CV: u64 = 102;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Loss {
    Squared,
    Logistic,
}

/// Network shape and penalty. `hidden == 0` is a linear (or logistic) model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Architecture {
    pub inputs: usize,
    pub hidden: usize,
    pub decay: f64,
    pub loss: Loss,
}

impl Architecture {
    pub fn n_params(&self) -> usize {
        if self.hidden == 0 {
            self.inputs + 1
        } else {
            self.hidden * (self.inputs + 1) + self.hidden + 1
        }
    }

    fn is_bias(&self, k: usize) -> bool {
        let p = self.inputs;
        if self.hidden == 0 {
            return k == 0;
        }
        let hidden_block = self.hidden * (p + 1);
        if k < hidden_block {
            k % (p + 1) == 0
        } else {
            k == hidden_block
        }
    }

    /// Linear predictor for one row of standardized inputs.
    fn eta(&self, w: &[f64], x: &[f64], act: &mut [f64]) -> f64 {
        let p = self.inputs;
        if self.hidden == 0 {
            return w[0] + (0..p).map(|j| w[1 + j] * x[j]).sum::<f64>();
        }
        for h in 0..self.hidden {
            let base = h * (p + 1);
            let mut z = w[base];
            for j in 0..p {
                z += w[base + 1 + j] * x[j];
            }
            act[h] = expit(z);
        }
        let out = self.hidden * (p + 1);
        w[out] + (0..self.hidden).map(|h| w[out + 1 + h] * act[h]).sum::<f64>()
    }

    fn row_loss(&self, eta: f64, y: f64) -> f64 {
        match self.loss {
            Loss::Squared => (eta - y) * (eta - y),
            Loss::Logistic => log1p_exp(eta) - y * eta,
        }
    }

    fn row_dloss(&self, eta: f64, y: f64) -> f64 {
        match self.loss {
            Loss::Squared => 2.0 * (eta - y),
            Loss::Logistic => expit(eta) - y,
        }
    }

    fn penalty(&self, w: &[f64]) -> f64 {
        w.iter()
            .enumerate()
            .filter(|(k, _)| !self.is_bias(*k))
            .map(|(_, v)| v * v)
            .sum::<f64>()
            * self.decay
    }

    /// Penalized objective `(sum of row losses + decay * ||w||^2) / n`, with
    /// biases unpenalized. Rows of `x` are observations.
    pub fn objective(&self, w: &[f64], x: &[Vec<f64>], y: &[f64]) -> f64 {
        let mut act = vec![0.0; self.hidden];
        let total: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, &yi)| self.row_loss(self.eta(w, xi, &mut act), yi))
            .sum();
        (total + self.penalty(w)) / y.len() as f64
    }

    pub fn objective_and_gradient(&self, w: &[f64], x: &[Vec<f64>], y: &[f64]) -> (f64, Vec<f64>) {
        let p = self.inputs;
        let n = y.len() as f64;
        let mut grad = vec![0.0; w.len()];
        let mut act = vec![0.0; self.hidden];
        let mut total = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            let eta = self.eta(w, xi, &mut act);
            total += self.row_loss(eta, yi);
            let g = self.row_dloss(eta, yi);
            if self.hidden == 0 {
                grad[0] += g;
                for j in 0..p {
                    grad[1 + j] += g * xi[j];
                }
                continue;
            }
            let out = self.hidden * (p + 1);
            grad[out] += g;
            for h in 0..self.hidden {
                grad[out + 1 + h] += g * act[h];
                let gz = g * w[out + 1 + h] * act[h] * (1.0 - act[h]);
                let base = h * (p + 1);
                grad[base] += gz;
                for j in 0..p {
                    grad[base + 1 + j] += gz * xi[j];
                }
            }
        }
        for (k, gk) in grad.iter_mut().enumerate() {
            if !self.is_bias(k) {
                *gk += 2.0 * self.decay * w[k];
            }
            *gk /= n;
        }
        ((total + self.penalty(w)) / n, grad)
    }

    pub fn initial_weights(&self, seed: u64) -> Vec<f64> {
        let rng = CounterRng::new(seed);
        (0..self.n_params())
            .map(|k| rng.uniform(k as u64, VAR_INIT, 0) - 0.5)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainOutcome {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub diagnostics: FitDiagnostics,
}

/// Full-batch gradient descent with Armijo backtracking. Each iteration starts
/// its line search at twice the previously accepted step.
pub fn train(
    arch: &Architecture,
    x: &[Vec<f64>],
    y: &[f64],
    init: Vec<f64>,
    max_iter: usize,
) -> Result<TrainOutcome> {
    let fail = |reason: String| Error::Training {
        hidden: arch.hidden,
        decay: arch.decay,
        reason,
    };
    let mut w = init;
    let mut step: f64 = 1.0;
    let mut diag = FitDiagnostics {
        tolerance: GRAD_TOL,
        ..Default::default()
    };
    let (mut f, mut g) = arch.objective_and_gradient(&w, x, y);
    if !f.is_finite() {
        return Err(fail("non-finite loss at initialization".into()));
    }
    let mut iter = 0;
    loop {
        let sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        diag.max_abs_score = sup;
        diag.iterations = iter;
        if !sup.is_finite() {
            return Err(fail("non-finite gradient".into()));
        }
        if sup < GRAD_TOL {
            diag.converged = true;
            break;
        }
        if iter >= max_iter {
            break;
        }
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let mut t = (2.0 * step).min(1e6);
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - t * gi).collect();
            let fc = arch.objective(&cand, x, y);
            if fc.is_finite() && fc <= f - ARMIJO_C * t * g2 {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(cand) = accepted else {
            diag.notes
                .push("line search could not decrease the objective".into());
            break;
        };
        step = t;
        w = cand;
        let (fn_, gn) = arch.objective_and_gradient(&w, x, y);
        if !fn_.is_finite() {
            return Err(fail("non-finite loss during training".into()));
        }
        f = fn_;
        g = gn;
        iter += 1;
    }
    Ok(TrainOutcome {
        weights: w,
        objective: f,
        diagnostics: diag,
    })
}

/// A trained network together with its input and response scaling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Network {
    pub arch: Architecture,
    pub weights: Vec<f64>,
    drop_intercept: bool,
    x_mean: Vec<f64>,
    x_sd: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
}

struct Scaled {
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn input_columns(design: &DesignMatrix) -> (bool, Vec<usize>) {
    let drop = design.has_intercept();
    let start = usize::from(drop);
    (drop, (start..design.ncols()).collect())
}

impl Network {
    fn scaling(x: &DMatrix<f64>, cols: &[usize], rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let n = rows.len() as f64;
        let mut mean = Vec::with_capacity(cols.len());
        let mut sd = Vec::with_capacity(cols.len());
        for &j in cols {
            let m = rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / n;
            let v = rows.iter().map(|&i| (x[(i, j)] - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            sd.push(if v > 0.0 { v.sqrt() } else { 1.0 });
        }
        (mean, sd)
    }

    fn scale_rows(&self, x: &DMatrix<f64>, rows: &[usize]) -> Vec<Vec<f64>> {
        let start = usize::from(self.drop_intercept);
        rows.iter()
            .map(|&i| {
                (0..self.arch.inputs)
                    .map(|j| (x[(i, start + j)] - self.x_mean[j]) / self.x_sd[j])
                    .collect()
            })
            .collect()
    }

    fn prepare(
        design: &DesignMatrix,
        y: &[f64],
        rows: &[usize],
        hidden: usize,
        decay: f64,
        binary: bool,
    ) -> (Self, Scaled) {
        let (drop, cols) = input_columns(design);
        let (x_mean, x_sd) = Self::scaling(&design.x, &cols, rows);
        let (y_mean, y_sd) = if binary {
            (0.0, 1.0)
        } else {
            let n = rows.len() as f64;
            let m = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
            let v = rows.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>() / n;
            (m, if v > 0.0 { v.sqrt() } else { 1.0 })
        };
        let arch = Architecture {
            inputs: cols.len(),
            hidden,
            decay,
            loss: if binary { Loss::Logistic } else { Loss::Squared },
        };
        let net = Self {
            arch,
            weights: Vec::new(),
            drop_intercept: drop,
            x_mean,
            x_sd,
            y_mean,
            y_sd,
        };
        let scaled = Scaled {
            rows: net.scale_rows(&design.x, rows),
            y: rows.iter().map(|&i| (y[i] - y_mean) / y_sd).collect(),
        };
        (net, scaled)
    }

    /// Trains on the given rows of `design` / `y`.
    pub fn fit_rows(
        design: &DesignMatrix,
        y: &[f64],
        rows: &[usize],
        hidden: usize,
        decay: f64,
        binary: bool,
        max_iter: usize,
        seed: u64,
    ) -> Result<(Self, FitDiagnostics)> {
        let (mut net, scaled) = Self::prepare(design, y, rows, hidden, decay, binary);
        let init = net.arch.initial_weights(seed);
        let out = train(&net.arch, &scaled.rows, &scaled.y, init, max_iter)?;
        net.weights = out.weights;
        Ok((net, out.diagnostics))
    }

    /// Predictions (probabilities for the logistic loss) on every row of a
    /// design with the training layout.
    pub fn predict(&self, design: &DMatrix<f64>) -> Vec<f64> {
        let rows: Vec<usize> = (0..design.nrows()).collect();
        self.predict_rows(design, &rows)
    }

    pub fn predict_rows(&self, design: &DMatrix<f64>, rows: &[usize]) -> Vec<f64> {
        let mut act = vec![0.0; self.arch.hidden];
        self.scale_rows(design, rows)
            .iter()
            .map(|xi| {
                let eta = self.arch.eta(&self.weights, xi, &mut act);
                match self.arch.loss {
                    Loss::Squared => self.y_mean + self.y_sd * eta,
                    Loss::Logistic => expit(eta),
                }
            })
            .collect()
    }
}

/// Held-out loss on the original response scale: mean squared error for
/// continuous responses, mean deviance for binary ones.
pub fn held_out_loss(pred: &[f64], y: &[f64], binary: bool) -> f64 {
    let n = y.len() as f64;
    if binary {
        let eps = 1e-12;
        -2.0 * pred
            .iter()
            .zip(y)
            .map(|(&p, &yi)| {
                let p = p.clamp(eps, 1.0 - eps);
                yi * p.ln() + (1.0 - yi) * (1.0 - p).ln()
            })
            .sum::<f64>()
            / n
    } else {
        pred.iter().zip(y).map(|(p, yi)| (p - yi).powi(2)).sum::<f64>() / n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub hidden: usize,
    pub decay: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeuralFit {
    pub network: Network,
    pub hidden: usize,
    pub decay: f64,
    /// Every grid point with its cross-validated loss, in grid order. Empty
    /// when the grid has a single point.
    pub cv: Vec<CvResult>,
    pub diagnostics: FitDiagnostics,
}

/// Fits a network on the rows `rows` of the design, choosing hidden size and
/// decay by `spec.cv_folds`-fold cross-validation. Ties go to the earlier grid
/// point (hidden sizes outer, decays inner).
pub fn fit_neural_rows(
    design: &DesignMatrix,
    y: &[f64],
    rows: &[usize],
    spec: &ModelSpec,
    binary: bool,
    seed: u64,
) -> Result<NeuralFit> {
    spec.validate()?;
    let grid: Vec<(usize, f64)> = spec
        .nn_hidden_sizes
        .iter()
        .flat_map(|&h| spec.nn_decay_grid.iter().map(move |&d| (h, d)))
        .collect();
    let mut cv = Vec::new();
    let (hidden, decay) = if grid.len() == 1 {
        grid[0]
    } else {
        let k = spec.cv_folds.min(rows.len());
        if k < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        let perm = CounterRng::new(seed).permutation(rows.len(), VAR_CV);
        let mut fold_of = vec![0usize; rows.len()];
        for (rank, &pos) in perm.iter().enumerate() {
            fold_of[pos] = rank % k;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for &(h, dcy) in &grid {
            let mut sum = 0.0;
            for f in 0..k {
                let train_rows: Vec<usize> =
                    (0..rows.len()).filter(|&r| fold_of[r] != f).map(|r| rows[r]).collect();
                let test_rows: Vec<usize> =
                    (0..rows.len()).filter(|&r| fold_of[r] == f).map(|r| rows[r]).collect();
                let (net, _) =
                    Network::fit_rows(design, y, &train_rows, h, dcy, binary, spec.nn_max_iter, seed)?;
                let pred = net.predict_rows(&design.x, &test_rows);
                let yt: Vec<f64> = test_rows.iter().map(|&i| y[i]).collect();
                sum += held_out_loss(&pred, &yt, binary) * test_rows.len() as f64;
            }
            let loss = sum / rows.len() as f64;
            if !loss.is_finite() {
                return Err(Error::Training {
                    hidden: h,
                    decay: dcy,
                    reason: "non-finite cross-validation loss".into(),
                });
            }
            cv.push(CvResult {
                hidden: h,
                decay: dcy,
                loss,
            });
            if best.map_or(true, |(_, _, l)| loss < l) {
                best = Some((h, dcy, loss));
            }
        }
        let (h, d, _) = best.expect("nonempty grid");
        (h, d)
    };
    let (network, diagnostics) =
        Network::fit_rows(design, y, rows, hidden, decay, binary, spec.nn_max_iter, seed)?;
    Ok(NeuralFit {
        network,
        hidden,
        decay,
        cv,
        diagnostics,
    })
}

/// Fits on every row of the design.
pub fn fit_neural(
    design: &DesignMatrix,
    y: &[f64],
    spec: &ModelSpec,
    binary: bool,
    seed: u64,
) -> Result<NeuralFit> {
    let rows: Vec<usize> = (0..design.nrows()).collect();
    fit_neural_rows(design, y, &rows, spec, binary, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, binary: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
        let r = CounterRng::new(5);
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![r.normal(i as u64, 0)]).collect();
        let y = x
            .iter()
            .enumerate()
            .map(|(i, xi)| {
                let m = 0.3 + 0.8 * xi[0];
                if binary {
                    r.bernoulli(i as u64, 1, expit(m))
                } else {
                    m + 0.5 * r.normal(i as u64, 2)
                }
            })
            .collect();
        (x, y)
    }

    fn max_rel_gradient_error(arch: &Architecture, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let w = arch.initial_weights(11);
        let (_, g) = arch.objective_and_gradient(&w, x, y);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..w.len() {
            let mut up = w.clone();
            up[k] += h;
            let mut dn = w.clone();
            dn[k] -= h;
            let fd = (arch.objective(&up, x, y) - arch.objective(&dn, x, y)) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-8);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn gradient_matches_central_differences() {
        for binary in [false, true] {
            let (x, y) = toy(50, binary);
            let arch = Architecture {
                inputs: 1,
                hidden: 3,
                decay: 0.1,
                loss: if binary { Loss::Logistic } else { Loss::Squared },
            };
            assert_eq!(arch.n_params(), 10);
            assert!(max_rel_gradient_error(&arch, &x, &y) < 1e-4);
        }
    }

    #[test]
    fn hidden_zero_is_linear_least_squares() {
        let (x, y) = toy(300, false);
        let arch = Architecture {
            inputs: 1,
            hidden: 0,
            decay: 0.0,
            loss: Loss::Squared,
        };
        let out = train(&arch, &x, &y, vec![0.0, 0.0], 5000).unwrap();
        assert!(out.diagnostics.converged);
        let n = y.len() as f64;
        let mx = x.iter().map(|r| r[0]).sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(&y).map(|(r, yi)| (r[0] - mx) * (yi - my)).sum();
        let sxx: f64 = x.iter().map(|r| (r[0] - mx).powi(2)).sum();
        assert!((out.weights[1] - sxy / sxx).abs() < 1e-4);
    }

    #[test]
    fn cv_selection_is_deterministic_and_linear_grid_point_competitive() {
        let (x, y) = toy(400, false);
        let design = DesignMatrix::from_columns(vec![
            ("one".into(), vec![1.0; 400]),
            ("x".into(), x.iter().map(|r| r[0]).collect()),
        ]);
        let spec = ModelSpec::neural(vec![0, 2], vec![0.01], 3);
        let a = fit_neural(&design, &y, &spec, false, 9).unwrap();
        let b = fit_neural(&design, &y, &spec, false, 9).unwrap();
        assert_eq!((a.hidden, a.decay), (b.hidden, b.decay));
        assert_eq!(a.network.predict(&design.x), b.network.predict(&design.x));
        let linear = a.cv.iter().find(|c| c.hidden == 0).unwrap().loss;
        let best = a.cv.iter().map(|c| c.loss).fold(f64::INFINITY, f64::min);
        assert!(a.hidden == 0 || linear <= best * 1.01);
    }
}
