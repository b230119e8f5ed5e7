//! Design matrices for the nuisance regressions.
//!
//! Column layouts:
//! - `PropensityAdditive`: `[1, X..., G^2]`
//! - `OutcomeInteracted`: `[1, X..., G^2, D, D*X..., D*G^2]`
//! - `TauQuadratic`, `GOnly`: `[1, G, G^2]`
//!
//! `X` always contains `G`. When `include_g_squared` is off the `G^2`
//! columns are omitted.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignKind {
    PropensityAdditive,
    OutcomeInteracted,
    TauQuadratic,
    GOnly,
}

/// A dense design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(x: DMatrix<f64>, names: Vec<String>) -> Self {
        assert_eq!(x.ncols(), names.len(), "one name per design column");
        Self { x, names }
    }

    pub fn unnamed(x: DMatrix<f64>) -> Self {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Self { x, names }
    }

    pub fn from_columns(cols: Vec<(String, Vec<f64>)>) -> Self {
        let n = cols.first().map_or(0, |c| c.1.len());
        let q = cols.len();
        let mut data = Vec::with_capacity(n * q);
        let mut names = Vec::with_capacity(q);
        for (name, c) in cols {
            assert_eq!(c.len(), n);
            data.extend(c);
            names.push(name);
        }
        Self {
            x: DMatrix::from_vec(n, q, data),
            names,
        }
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }
    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    /// Keeps the given rows, in order.
    pub fn rows(&self, idx: &[usize]) -> Self {
        let x = DMatrix::from_fn(idx.len(), self.ncols(), |i, j| self.x[(idx[i], j)]);
        Self {
            x,
            names: self.names.clone(),
        }
    }

    /// True when the first column is identically one.
    pub fn has_intercept(&self) -> bool {
        self.ncols() > 0 && self.x.column(0).iter().all(|&v| v == 1.0)
    }
}

/// Builds the design with the squared background term included.
pub fn build_design(data: &Dataset, kind: DesignKind, target_d: Option<u8>) -> DesignMatrix {
    build_design_with(data, kind, target_d, true)
}

/// Builds a design matrix. For `OutcomeInteracted`, `target_d = Some(d)`
/// substitutes `D = d` in every row (the prediction design for `mu(d, X)`);
/// `None` uses the observed `D`.
pub fn build_design_with(
    data: &Dataset,
    kind: DesignKind,
    target_d: Option<u8>,
    include_g_squared: bool,
) -> DesignMatrix {
    let n = data.n();
    let g = data.g();
    let gname = &data.roles().background_col;
    let g2: Vec<f64> = g.iter().map(|v| v * v).collect();
    let mut cols: Vec<(String, Vec<f64>)> = vec![("(intercept)".into(), vec![1.0; n])];
    match kind {
        DesignKind::TauQuadratic | DesignKind::GOnly => {
            cols.push((gname.clone(), g.to_vec()));
            if include_g_squared {
                cols.push((format!("{gname}^2"), g2));
            }
        }
        DesignKind::PropensityAdditive | DesignKind::OutcomeInteracted => {
            for j in 0..data.k() {
                cols.push((data.covariate_names()[j].clone(), data.covariate(j).to_vec()));
            }
            if include_g_squared {
                cols.push((format!("{gname}^2"), g2));
            }
            if kind == DesignKind::OutcomeInteracted {
                let dname = &data.roles().transition_col;
                let dcol: Vec<f64> = match target_d {
                    Some(d) => vec![d as f64; n],
                    None => data.d().to_vec(),
                };
                let base = cols.len();
                cols.push((dname.clone(), dcol.clone()));
                for j in 1..base {
                    let name = format!("{dname}:{}", cols[j].0);
                    let v = cols[j].1.iter().zip(&dcol).map(|(a, b)| a * b).collect();
                    cols.push((name, v));
                }
            }
        }
    }
    DesignMatrix::from_columns(cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::VariableRoles;

    fn fixture() -> Dataset {
        Dataset::from_columns(
            VariableRoles::new("y", "d", "g", &["z"]),
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0, 1.0, 1.0, 0.0],
            None,
            vec![
                ("g".into(), vec![-1.0, 0.0, 1.0, 2.0]),
                ("z".into(), vec![0.5, 0.1, -0.2, 0.3]),
            ],
            vec![0, 1, 2, 3],
        )
        .unwrap()
    }

    #[test]
    fn outcome_interacted_has_eight_columns_for_two_covariates() {
        let m = build_design(&fixture(), DesignKind::OutcomeInteracted, None);
        assert_eq!(m.ncols(), 8);
        assert_eq!(
            m.names,
            vec!["(intercept)", "g", "z", "g^2", "d", "d:g", "d:z", "d:g^2"]
        );
    }

    #[test]
    fn quadratic_bases_have_three_columns() {
        assert_eq!(build_design(&fixture(), DesignKind::TauQuadratic, None).ncols(), 3);
        let m = build_design(&fixture(), DesignKind::GOnly, None);
        assert_eq!(m.names, vec!["(intercept)", "g", "g^2"]);
    }

    #[test]
    fn propensity_design_is_additive() {
        let m = build_design(&fixture(), DesignKind::PropensityAdditive, None);
        assert_eq!(m.names, vec!["(intercept)", "g", "z", "g^2"]);
        assert_eq!(m.x[(3, 3)], 4.0);
    }

    #[test]
    fn substituting_d_one_copies_the_x_block() {
        let m = build_design(&fixture(), DesignKind::OutcomeInteracted, Some(1));
        for i in 0..4 {
            assert_eq!(m.x[(i, 4)], 1.0);
            for j in 1..4 {
                assert_eq!(m.x[(i, 4 + j)], m.x[(i, j)]);
            }
        }
        let m0 = build_design(&fixture(), DesignKind::OutcomeInteracted, Some(0));
        for i in 0..4 {
            for j in 4..8 {
                assert_eq!(m0.x[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn squared_term_can_be_dropped() {
        let m = build_design_with(&fixture(), DesignKind::OutcomeInteracted, None, false);
        assert_eq!(m.ncols(), 6);
    }
}
