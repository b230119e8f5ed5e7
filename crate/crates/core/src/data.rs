//! Analysis-ready tabular data: variable roles, loading, complete-case
//! filtering and threshold trimming.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which columns play the outcome, transition, background and covariate roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRoles {
    pub outcome_col: String,
    pub transition_col: String,
    pub background_col: String,
    pub prior_transition_col: Option<String>,
    /// Ordered covariates. The background column is always part of the
    /// effective covariate set, whether or not it is listed here.
    pub covariate_cols: Vec<String>,
}

impl VariableRoles {
    pub fn new(
        outcome: impl Into<String>,
        transition: impl Into<String>,
        background: impl Into<String>,
        covariates: &[&str],
    ) -> Self {
        Self {
            outcome_col: outcome.into(),
            transition_col: transition.into(),
            background_col: background.into(),
            prior_transition_col: None,
            covariate_cols: covariates.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_prior_transition(mut self, col: impl Into<String>) -> Self {
        self.prior_transition_col = Some(col.into());
        self
    }

    /// Covariate names with the background column prepended when absent,
    /// duplicates removed.
    pub fn effective_covariates(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.covariate_cols.len() + 1);
        if !self.covariate_cols.contains(&self.background_col) {
            out.push(self.background_col.clone());
        }
        let mut seen = HashSet::new();
        for c in &self.covariate_cols {
            if seen.insert(c.as_str()) {
                out.push(c.clone());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let y = &self.outcome_col;
        let d = &self.transition_col;
        let g = &self.background_col;
        if y == d || y == g || d == g {
            return Err(Error::Config(format!(
                "outcome ({y}), transition ({d}) and background ({g}) columns must be distinct"
            )));
        }
        if let Some(p) = &self.prior_transition_col {
            if p == y || p == d || p == g {
                return Err(Error::Config(format!(
                    "prior transition column {p} duplicates another role"
                )));
            }
        }
        for c in &self.covariate_cols {
            if c == y || c == d || Some(c) == self.prior_transition_col.as_ref() {
                return Err(Error::Config(format!(
                    "covariate {c} duplicates the outcome or a transition column"
                )));
            }
        }
        Ok(())
    }

    fn required_columns(&self) -> Vec<String> {
        let mut cols = vec![
            self.outcome_col.clone(),
            self.transition_col.clone(),
            self.background_col.clone(),
        ];
        if let Some(p) = &self.prior_transition_col {
            cols.push(p.clone());
        }
        for c in self.effective_covariates() {
            if !cols.contains(&c) {
                cols.push(c);
            }
        }
        cols
    }
}

/// Row filter applied before estimation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub trim_col: Option<String>,
    /// Rows with `trim_col < trim_min` are removed.
    pub trim_min: Option<f64>,
    pub drop_missing: bool,
}

impl FilterSpec {
    pub fn none() -> Self {
        Self {
            trim_col: None,
            trim_min: None,
            drop_missing: true,
        }
    }

    pub fn trim(col: impl Into<String>, min: f64) -> Self {
        Self {
            trim_col: Some(col.into()),
            trim_min: Some(min),
            drop_missing: true,
        }
    }

    fn threshold(&self) -> Result<Option<(&str, f64)>> {
        match (&self.trim_col, self.trim_min) {
            (None, _) => Ok(None),
            (Some(c), Some(m)) if m.is_finite() => Ok(Some((c.as_str(), m))),
            (Some(c), _) => Err(Error::Config(format!(
                "trim column {c} requires a finite trim minimum"
            ))),
        }
    }
}

/// Observations after complete-case filtering. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    roles: VariableRoles,
    covariate_names: Vec<String>,
    y: Vec<f64>,
    d: Vec<f64>,
    g: Vec<f64>,
    p: Option<Vec<f64>>,
    /// Covariate columns, stored column-major; includes a copy of `g`.
    x: Vec<Vec<f64>>,
    g_col: usize,
    row_ids: Vec<u64>,
}

fn is_binary(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0 || x == 1.0)
}

impl Dataset {
    /// Builds a dataset from role columns. `covariates` must be named in the
    /// order of `roles.effective_covariates()` and must include the
    /// background column.
    pub fn from_columns(
        roles: VariableRoles,
        y: Vec<f64>,
        d: Vec<f64>,
        p: Option<Vec<f64>>,
        covariates: Vec<(String, Vec<f64>)>,
        row_ids: Vec<u64>,
    ) -> Result<Self> {
        roles.validate()?;
        let n = y.len();
        if n == 0 {
            return Err(Error::Data("dataset has zero rows".into()));
        }
        if d.len() != n || row_ids.len() != n || covariates.iter().any(|(_, c)| c.len() != n) {
            return Err(Error::Data("columns have unequal lengths".into()));
        }
        if let Some(p) = &p {
            if p.len() != n {
                return Err(Error::Data("columns have unequal lengths".into()));
            }
        }
        let g_col = covariates
            .iter()
            .position(|(name, _)| name == &roles.background_col)
            .ok_or_else(|| {
                Error::Config(format!(
                    "background column {} missing from covariates",
                    roles.background_col
                ))
            })?;
        let (covariate_names, x): (Vec<_>, Vec<_>) = covariates.into_iter().unzip();
        let g = x[g_col].clone();
        let data = Self {
            roles,
            covariate_names,
            y,
            d,
            g,
            p,
            x,
            g_col,
            row_ids,
        };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<()> {
        let all_finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !all_finite(&self.y) || !all_finite(&self.g) || self.x.iter().any(|c| !all_finite(c)) {
            return Err(Error::Data("non-finite value in a role column".into()));
        }
        if !is_binary(&self.d) {
            return Err(Error::Data(format!(
                "transition column {} must be binary 0/1",
                self.roles.transition_col
            )));
        }
        if let Some(p) = &self.p {
            if !is_binary(p) {
                return Err(Error::Data("prior transition column must be binary 0/1".into()));
            }
            if p.iter().zip(&self.d).any(|(&p, &d)| p == 0.0 && d == 1.0) {
                return Err(Error::Data(
                    "found rows with prior transition 0 but transition 1".into(),
                ));
            }
        }
        if crate::stats::variance(&self.g) <= 0.0 {
            return Err(Error::Data(format!(
                "background column {} has zero variance",
                self.roles.background_col
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
    pub fn roles(&self) -> &VariableRoles {
        &self.roles
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn d(&self) -> &[f64] {
        &self.d
    }
    pub fn g(&self) -> &[f64] {
        &self.g
    }
    pub fn p(&self) -> Option<&[f64]> {
        self.p.as_deref()
    }
    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }
    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }
    /// Number of covariate columns (including the background column).
    pub fn k(&self) -> usize {
        self.x.len()
    }
    pub fn covariate(&self, j: usize) -> &[f64] {
        &self.x[j]
    }
    pub fn background_index(&self) -> usize {
        self.g_col
    }

    /// True when the outcome only takes the values 0 and 1.
    pub fn binary_outcome(&self) -> bool {
        is_binary(&self.y)
    }

    /// Looks a column up by name among the role and covariate columns.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        if name == self.roles.outcome_col {
            return Some(&self.y);
        }
        if name == self.roles.transition_col {
            return Some(&self.d);
        }
        if Some(name) == self.roles.prior_transition_col.as_deref() {
            return self.p.as_deref();
        }
        self.covariate_names
            .iter()
            .position(|c| c == name)
            .map(|j| self.x[j].as_slice())
    }

    /// Rows (by position) with `D == d`.
    pub fn stratum(&self, d: u8) -> Vec<usize> {
        let d = d as f64;
        (0..self.n()).filter(|&i| self.d[i] == d).collect()
    }

    /// Keeps the given row positions, in order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("subset is empty".into()));
        }
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let data = Self {
            roles: self.roles.clone(),
            covariate_names: self.covariate_names.clone(),
            y: pick(&self.y),
            d: pick(&self.d),
            g: pick(&self.g),
            p: self.p.as_deref().map(pick),
            x: self.x.iter().map(|c| pick(c)).collect(),
            g_col: self.g_col,
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
        };
        data.validate()?;
        Ok(data)
    }

    /// The subpopulation that made the prior transition (`P == 1`).
    pub fn given_prior_transition(&self) -> Result<Self> {
        let p = self.p.as_ref().ok_or_else(|| {
            Error::Config("a prior transition column is required for conditional analyses".into())
        })?;
        let rows: Vec<usize> = (0..self.n()).filter(|&i| p[i] == 1.0).collect();
        if rows.is_empty() {
            return Err(Error::InsufficientData("no rows with prior transition 1".into()));
        }
        self.subset(&rows)
    }

    /// Restricts the covariate set to `keep` (the background column is always
    /// retained). Used to build deliberately misspecified nuisance designs.
    pub fn with_covariates(&self, keep: &[String]) -> Result<Self> {
        for name in keep {
            if !self.covariate_names.contains(name) {
                return Err(Error::Config(format!("unknown covariate {name}")));
            }
        }
        let mut names = Vec::new();
        let mut cols = Vec::new();
        for (j, name) in self.covariate_names.iter().enumerate() {
            if j == self.g_col || keep.contains(name) {
                names.push(name.clone());
                cols.push(self.x[j].clone());
            }
        }
        let g_col = names
            .iter()
            .position(|c| c == &self.roles.background_col)
            .expect("background column retained");
        let mut roles = self.roles.clone();
        roles.covariate_cols = names.clone();
        Ok(Self {
            roles,
            covariate_names: names,
            y: self.y.clone(),
            d: self.d.clone(),
            g: self.g.clone(),
            p: self.p.clone(),
            x: cols,
            g_col,
            row_ids: self.row_ids.clone(),
        })
    }

    /// Replaces the outcome column (used for scaling checks and constructed
    /// responses).
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::Data("replacement outcome has wrong length".into()));
        }
        let mut out = self.clone();
        out.y = y;
        out.validate()?;
        Ok(out)
    }

    /// Replaces the background column (and its copy among the covariates).
    pub fn with_background(&self, g: Vec<f64>) -> Result<Self> {
        if g.len() != self.n() {
            return Err(Error::Data("replacement background has wrong length".into()));
        }
        let mut out = self.clone();
        out.x[out.g_col] = g.clone();
        out.g = g;
        out.validate()?;
        Ok(out)
    }
}

/// Per-column bookkeeping of the rows removed while loading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub trimmed: usize,
    /// Rows with a missing value in each role column (a row missing several
    /// columns is counted once per column).
    pub missing_by_column: Vec<(String, usize)>,
    pub dropped_incomplete: usize,
    pub rows_kept: usize,
}

impl LoadReport {
    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines = vec![format!("rows read: {}", self.rows_read)];
        lines.push(format!("rows trimmed: {}", self.trimmed));
        for (c, k) in &self.missing_by_column {
            lines.push(format!("{c}: {k} dropped"));
        }
        lines.push(format!("rows dropped as incomplete: {}", self.dropped_incomplete));
        lines.push(format!("rows kept: {}", self.rows_kept));
        lines
    }
}

/// A parsed CSV file; cells are parsed to numbers on demand.
#[derive(Debug, Clone)]
pub struct RawTable {
    header: Vec<String>,
    records: Vec<Vec<String>>,
    row_ids: Vec<u64>,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "NA"
}

impl RawTable {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path.as_ref())?;
        let header = reader
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect::<Vec<_>>();
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            records.push(rec.iter().map(|s| s.to_string()).collect());
        }
        let row_ids = (0..records.len() as u64).collect();
        Ok(Self {
            header,
            records,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.records.len()
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column {name} not found in header")))
    }

    fn cell(&self, row: usize, col: usize) -> Result<Option<f64>> {
        let raw = &self.records[row][col];
        if is_missing(raw) {
            return Ok(None);
        }
        raw.trim().parse::<f64>().map(Some).map_err(|_| {
            Error::Data(format!(
                "column {} row {}: cannot parse {raw:?} as a number",
                self.header[col], self.row_ids[row]
            ))
        })
    }

    /// Drops rows whose `trim_col` value is present and strictly below
    /// `trim_min`. Returns the number of rows removed.
    pub fn trim(&mut self, spec: &FilterSpec) -> Result<usize> {
        let Some((col, min)) = spec.threshold()? else {
            return Ok(0);
        };
        let j = self.index(col)?;
        let mut keep = Vec::with_capacity(self.records.len());
        for i in 0..self.records.len() {
            keep.push(!matches!(self.cell(i, j)?, Some(v) if v < min));
        }
        let before = self.records.len();
        let mut k = keep.iter();
        self.records.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.row_ids.retain(|_| *k.next().unwrap());
        let removed = before - self.records.len();
        if self.records.is_empty() {
            return Err(Error::Data(format!("trimming on {col} removed every row")));
        }
        Ok(removed)
    }

    /// Complete-case conversion into a [`Dataset`].
    pub fn into_dataset(self, roles: &VariableRoles) -> Result<(Dataset, LoadReport)> {
        roles.validate()?;
        let cols = roles.required_columns();
        let idx = cols
            .iter()
            .map(|c| self.index(c))
            .collect::<Result<Vec<_>>>()?;
        let mut missing = vec![0usize; cols.len()];
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
        let mut row_ids = Vec::new();
        let mut dropped = 0;
        for i in 0..self.records.len() {
            let mut row = Vec::with_capacity(cols.len());
            for &j in &idx {
                row.push(self.cell(i, j)?);
            }
            if row.iter().any(Option::is_none) {
                dropped += 1;
                for (m, v) in missing.iter_mut().zip(&row) {
                    if v.is_none() {
                        *m += 1;
                    }
                }
                continue;
            }
            for (col, v) in values.iter_mut().zip(row) {
                col.push(v.unwrap());
            }
            row_ids.push(self.row_ids[i]);
        }
        if row_ids.is_empty() {
            return Err(Error::Data("no complete rows remain after filtering".into()));
        }
        let take = |name: &str| values[cols.iter().position(|c| c == name).unwrap()].clone();
        let y = take(&roles.outcome_col);
        let d = take(&roles.transition_col);
        let p = roles.prior_transition_col.as_deref().map(take);
        let covariates = roles
            .effective_covariates()
            .into_iter()
            .map(|c| {
                let v = take(&c);
                (c, v)
            })
            .collect();
        let report = LoadReport {
            rows_read: 0,
            trimmed: 0,
            missing_by_column: cols.into_iter().zip(missing).collect(),
            dropped_incomplete: dropped,
            rows_kept: row_ids.len(),
        };
        let data = Dataset::from_columns(roles.clone(), y, d, p, covariates, row_ids)?;
        Ok((data, report))
    }
}

/// Reads a CSV file and keeps complete cases of the role columns.
pub fn load_dataset(path: impl AsRef<Path>, roles: &VariableRoles) -> Result<(Dataset, LoadReport)> {
    load_dataset_filtered(path, roles, &FilterSpec::none())
}

/// Reads a CSV file, trims on the raw table first, then keeps complete cases.
pub fn load_dataset_filtered(
    path: impl AsRef<Path>,
    roles: &VariableRoles,
    filter: &FilterSpec,
) -> Result<(Dataset, LoadReport)> {
    let mut table = RawTable::read(path)?;
    let rows_read = table.n_rows();
    let trimmed = table.trim(filter)?;
    let (data, mut report) = table.into_dataset(roles)?;
    report.rows_read = rows_read;
    report.trimmed = trimmed;
    Ok((data, report))
}

/// Removes rows whose `trim_col` value is strictly below `trim_min`.
pub fn apply_filter(data: &Dataset, spec: &FilterSpec) -> Result<Dataset> {
    let Some((col, min)) = spec.threshold()? else {
        return Ok(data.clone());
    };
    let values = data
        .column(col)
        .ok_or_else(|| Error::Config(format!("trim column {col} not in dataset")))?;
    let rows: Vec<usize> = (0..data.n()).filter(|&i| values[i] >= min).collect();
    if rows.is_empty() {
        return Err(Error::Data(format!("filter on {col} >= {min} removed every row")));
    }
    data.subset(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn roles() -> VariableRoles {
        VariableRoles::new("y", "d", "g", &["z"])
    }

    #[test]
    fn complete_case_drops_missing_outcome() {
        let f = write_csv("y,d,g,z\n1.0,1,0.5,2\n,0,0.1,1\n2.0,0,-0.3,NA\n0.5,1,1.2,0\n3,0,0.2,1\n");
        let (data, report) = load_dataset(f.path(), &roles()).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.row_ids(), &[0, 3, 4]);
        let y_missing = report.missing_by_column.iter().find(|(c, _)| c == "y").unwrap();
        assert_eq!(y_missing.1, 1);
        assert!(report.summary_lines().iter().any(|l| l == "y: 1 dropped"));
        assert_eq!(report.dropped_incomplete, 2);
    }

    #[test]
    fn four_row_file_with_one_missing_outcome() {
        let f = write_csv("y,d,g,z\n1,1,0.5,2\n,0,0.1,1\n2,0,-0.3,1\n0.5,1,1.2,0\n");
        let (data, report) = load_dataset(f.path(), &roles()).unwrap();
        assert_eq!(data.n(), 3);
        assert!(report.summary_lines().contains(&"y: 1 dropped".to_string()));
    }

    #[test]
    fn nonbinary_transition_is_a_data_error() {
        let f = write_csv("y,d,g,z\n1,2,0.5,2\n1,0,0.1,1\n");
        assert!(matches!(load_dataset(f.path(), &roles()), Err(Error::Data(_))));
    }

    #[test]
    fn missing_column_is_a_config_error() {
        let f = write_csv("y,d,g\n1,1,0.5\n1,0,0.1\n");
        assert!(matches!(load_dataset(f.path(), &roles()), Err(Error::Config(_))));
    }

    #[test]
    fn all_rows_incomplete_is_a_data_error() {
        let f = write_csv("y,d,g,z\nNA,1,0.5,2\n,0,0.1,1\n");
        assert!(matches!(load_dataset(f.path(), &roles()), Err(Error::Data(_))));
    }

    #[test]
    fn background_is_added_to_covariates_once() {
        let f = write_csv(
            "y,d,g,a,b,c\n1,1,0.5,1,2,3\n2,0,0.1,1,0,3\n0,1,-1,0,2,1\n1,0,2,1,1,1\n5,1,0,0,0,0\n",
        );
        let r = VariableRoles::new("y", "d", "g", &["a", "b", "c"]);
        let (data, _) = load_dataset(f.path(), &r).unwrap();
        assert_eq!(data.n(), 5);
        assert_eq!(data.k(), 4);
        assert_eq!(data.covariate_names(), &["g", "a", "b", "c"]);
        assert_eq!(data.covariate(data.background_index()), data.g());

        let r2 = VariableRoles::new("y", "d", "g", &["a", "g", "b"]);
        let (data2, _) = load_dataset(f.path(), &r2).unwrap();
        assert_eq!(data2.covariate_names(), &["a", "g", "b"]);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(data2.covariate(1)), bits(data2.g()));
    }

    #[test]
    fn unparseable_cell_is_a_data_error() {
        let f = write_csv("y,d,g,z\n1,1,abc,2\n1,0,0.1,1\n");
        assert!(matches!(load_dataset(f.path(), &roles()), Err(Error::Data(_))));
    }

    #[test]
    fn prior_transition_prerequisite_enforced() {
        let f = write_csv("y,d,g,z,p\n1,1,0.5,2,0\n1,0,0.1,1,1\n");
        let r = roles().with_prior_transition("p");
        assert!(matches!(load_dataset(f.path(), &r), Err(Error::Data(_))));
    }

    fn income_data() -> Dataset {
        let roles = VariableRoles::new("y", "d", "g", &["inc"]);
        Dataset::from_columns(
            roles,
            vec![1.0, 2.0, 3.0],
            vec![0.0, 1.0, 0.0],
            None,
            vec![
                ("g".into(), vec![0.1, 0.5, 0.9]),
                ("inc".into(), vec![4000.0, 5000.0, 6000.0]),
            ],
            vec![10, 11, 12],
        )
        .unwrap()
    }

    #[test]
    fn trim_is_strictly_less_than() {
        let data = income_data();
        let out = apply_filter(&data, &FilterSpec::trim("inc", 5000.0)).unwrap();
        assert_eq!(out.row_ids(), &[11, 12]);
        assert_eq!(out.column("inc").unwrap(), &[5000.0, 6000.0]);
    }

    #[test]
    fn no_trim_is_identity() {
        let data = income_data();
        assert_eq!(apply_filter(&data, &FilterSpec::none()).unwrap(), data);
    }

    #[test]
    fn trim_above_max_is_error() {
        let data = income_data();
        assert!(matches!(
            apply_filter(&data, &FilterSpec::trim("inc", 1e9)),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn trim_requires_finite_threshold() {
        let data = income_data();
        let spec = FilterSpec {
            trim_col: Some("inc".into()),
            trim_min: Some(f64::NAN),
            drop_missing: true,
        };
        assert!(matches!(apply_filter(&data, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn raw_trim_runs_before_complete_case() {
        let f = write_csv("y,d,g,inc\n1,1,0.5,4000\n,0,0.1,6000\n2,0,0.3,5000\n1,1,0.9,NA\n");
        let r = VariableRoles::new("y", "d", "g", &[]);
        let (data, report) =
            load_dataset_filtered(f.path(), &r, &FilterSpec::trim("inc", 5000.0)).unwrap();
        assert_eq!(report.rows_read, 4);
        assert_eq!(report.trimmed, 1);
        assert_eq!(report.dropped_incomplete, 1);
        assert_eq!(data.row_ids(), &[2, 3]);
    }

    #[test]
    fn zero_variance_background_rejected() {
        let roles = VariableRoles::new("y", "d", "g", &[]);
        let r = Dataset::from_columns(
            roles,
            vec![1.0, 2.0],
            vec![0.0, 1.0],
            None,
            vec![("g".into(), vec![1.0, 1.0])],
            vec![0, 1],
        );
        assert!(matches!(r, Err(Error::Data(_))));
    }
}
