//! Dataset ingestion, normalization, second-moment extraction and synthetic
//! data generation.
//!
//! All moments divide by `n`, not `n - 1`: the linear Rashomon geometry is a
//! population-level statement about `E[XX^T]`, `E[YX]` and `E[Y^2]`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::sampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Continuous,
    /// Outcome in {-1, +1}, every feature in {0, 1}.
    BinaryPm1,
}

/// How `load_csv_with` decides the dataset kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KindHint {
    #[default]
    Auto,
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    outcome: DVector<f64>,
    names: Vec<String>,
    outcome_name: String,
    kind: DatasetKind,
}

/// Selects the outcome column of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_string())
    }
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        outcome: DVector<f64>,
        names: Vec<String>,
        outcome_name: impl Into<String>,
        kind: DatasetKind,
    ) -> Result<Self> {
        let n = features.nrows();
        let p = features.ncols();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(Error::Data("need at least one feature".into()));
        }
        check_len(n, outcome.len())?;
        check_len(p, names.len())?;
        if features.iter().chain(outcome.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value".into()));
        }
        if kind == DatasetKind::BinaryPm1 {
            if let Some(v) = features.iter().find(|v| **v != 0.0 && **v != 1.0) {
                return Err(Error::Data(format!("binary dataset has feature value {v}")));
            }
            if let Some(v) = outcome.iter().find(|v| **v != 1.0 && **v != -1.0) {
                return Err(Error::Data(format!("binary dataset has outcome value {v}")));
            }
        }
        Ok(Dataset {
            features,
            outcome,
            names,
            outcome_name: outcome_name.into(),
            kind,
        })
    }

    /// Builds a dataset, detecting binary kind by exact value-set matching.
    pub fn auto(features: DMatrix<f64>, outcome: DVector<f64>, names: Vec<String>) -> Result<Self> {
        let kind = detect_kind(&features, &outcome);
        Dataset::new(features, outcome, names, "y", kind)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn outcome(&self) -> &DVector<f64> {
        &self.outcome
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Copy with the outcome multiplied by `t` and feature `j` by `s[j]`.
    pub fn rescaled(&self, s: &[f64], t: f64) -> Result<Dataset> {
        check_len(self.p(), s.len())?;
        let mut x = self.features.clone();
        for (j, sj) in s.iter().enumerate() {
            x.column_mut(j).scale_mut(*sj);
        }
        let y = &self.outcome * t;
        let kind = detect_kind(&x, &y);
        Dataset::new(x, y, self.names.clone(), self.outcome_name.clone(), kind)
    }
}

fn detect_kind(x: &DMatrix<f64>, y: &DVector<f64>) -> DatasetKind {
    let binary_features = (0..x.ncols()).all(|j| value_set(x.column(j).iter()) == value_set([0.0, 1.0].iter()));
    let binary_outcome = value_set(y.iter()) == value_set([-1.0, 1.0].iter());
    if binary_features && binary_outcome {
        DatasetKind::BinaryPm1
    } else {
        DatasetKind::Continuous
    }
}

fn value_set<'a>(it: impl Iterator<Item = &'a f64>) -> BTreeSet<u64> {
    it.map(|v| v.to_bits()).collect()
}

pub fn load_csv(path: impl AsRef<Path>, outcome: impl Into<ColumnRef>) -> Result<Dataset> {
    load_csv_with(path, outcome, KindHint::Auto)
}

pub fn load_csv_with(path: impl AsRef<Path>, outcome: impl Into<ColumnRef>, hint: KindHint) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    let outcome_idx = match outcome.into() {
        ColumnRef::Name(name) => header
            .iter()
            .position(|h| *h == name)
            .ok_or(Error::ColumnNotFound(name))?,
        ColumnRef::Index(i) if i < header.len() => i,
        ColumnRef::Index(i) => return Err(Error::ColumnNotFound(format!("#{i}"))),
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        // header is line 1
        let line = k + 2;
        if record.len() != header.len() {
            return Err(Error::Data(format!(
                "row {line} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let mut row = Vec::with_capacity(header.len());
        for (cell, name) in record.iter().zip(&header) {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    row: line,
                    column: name.clone(),
                    value: cell.to_string(),
                })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::Data(format!("need at least 2 rows, got {}", rows.len())));
    }

    let n = rows.len();
    let p = header.len() - 1;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != outcome_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let x = DMatrix::from_fn(n, p, |i, j| {
        let col = if j < outcome_idx { j } else { j + 1 };
        rows[i][col]
    });
    let y = DVector::from_fn(n, |i, _| rows[i][outcome_idx]);
    let kind = match hint {
        KindHint::Auto => detect_kind(&x, &y),
        KindHint::Continuous => DatasetKind::Continuous,
        KindHint::Binary => DatasetKind::BinaryPm1,
    };
    Dataset::new(x, y, names, header[outcome_idx].clone(), kind)
}

pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::new();
    for name in d.names() {
        out.push_str(name);
        out.push(',');
    }
    out.push_str(d.outcome_name());
    out.push('\n');
    for i in 0..d.n() {
        for j in 0..d.p() {
            out.push_str(&format!("{},", d.features[(i, j)]));
        }
        out.push_str(&format!("{}\n", d.outcome[i]));
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(io)
}

/// Centers and scales every feature and the outcome to mean 0, variance 1
/// (variance with divisor `n`).
pub fn normalize(d: &Dataset) -> Result<Dataset> {
    let n = d.n() as f64;
    let standardize = |col: Vec<f64>, name: &str| -> Result<Vec<f64>> {
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        if var.sqrt() <= 1e-12 * scale || var == 0.0 {
            return Err(Error::ZeroVariance(name.to_string()));
        }
        let sd = var.sqrt();
        Ok(col.iter().map(|v| (v - mean) / sd).collect())
    };
    let mut x = DMatrix::zeros(d.n(), d.p());
    for j in 0..d.p() {
        let col = standardize(d.features.column(j).iter().copied().collect(), &d.names[j])?;
        x.set_column(j, &DVector::from_vec(col));
    }
    let y = DVector::from_vec(standardize(d.outcome.iter().copied().collect(), &d.outcome_name)?);
    Dataset::new(x, y, d.names.clone(), d.outcome_name.clone(), DatasetKind::Continuous)
}

/// Second moments `E[XX^T]`, `E[YX]`, `E[Y^2]` of `(X, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceStructure {
    sigma_xx: DMatrix<f64>,
    sigma_xy: DVector<f64>,
    sigma_yy: f64,
    means_removed: bool,
}

#[derive(Serialize, Deserialize)]
struct CovarianceJson {
    sigma_xx: Vec<Vec<f64>>,
    sigma_xy: Vec<f64>,
    sigma_yy: f64,
    means_removed: bool,
}

impl CovarianceStructure {
    pub fn new(sigma_xx: DMatrix<f64>, sigma_xy: DVector<f64>, sigma_yy: f64, means_removed: bool) -> Result<Self> {
        let p = sigma_xx.nrows();
        check_len(p, sigma_xx.ncols())?;
        check_len(p, sigma_xy.len())?;
        if p == 0 {
            return Err(Error::Data("empty covariance structure".into()));
        }
        if !linalg::is_symmetric(&sigma_xx, 1e-10) {
            return Err(Error::Data("sigma_xx is not symmetric".into()));
        }
        let trace = sigma_xx.trace().abs().max(1e-300);
        let min_eig = linalg::smallest_eigenvalue(&sigma_xx);
        if min_eig < -1e-10 * trace {
            return Err(Error::NotPositiveDefinite(format!(
                "sigma_xx has eigenvalue {min_eig:e}"
            )));
        }
        if !(sigma_yy >= 0.0) {
            return Err(Error::Data(format!("sigma_yy = {sigma_yy} is negative")));
        }
        Ok(CovarianceStructure {
            sigma_xx,
            sigma_xy,
            sigma_yy,
            means_removed,
        })
    }

    /// Unit-variance structure from correlation coefficients.
    pub fn from_correlations(corr_xx: &[Vec<f64>], corr_xy: &[f64]) -> Result<Self> {
        let p = corr_xy.len();
        check_len(p, corr_xx.len())?;
        for row in corr_xx {
            check_len(p, row.len())?;
        }
        let sxx = DMatrix::from_fn(p, p, |i, j| corr_xx[i][j]);
        CovarianceStructure::new(sxx, DVector::from_column_slice(corr_xy), 1.0, true)
    }

    pub fn p(&self) -> usize {
        self.sigma_xy.len()
    }

    pub fn sigma_xx(&self) -> &DMatrix<f64> {
        &self.sigma_xx
    }

    pub fn sigma_xy(&self) -> &DVector<f64> {
        &self.sigma_xy
    }

    pub fn sigma_yy(&self) -> f64 {
        self.sigma_yy
    }

    pub fn means_removed(&self) -> bool {
        self.means_removed
    }

    /// Moments of `(S X, t Y)` with `S = diag(s)`.
    pub fn rescaled(&self, s: &[f64], t: f64) -> Result<Self> {
        check_len(self.p(), s.len())?;
        let sxx = DMatrix::from_fn(self.p(), self.p(), |i, j| s[i] * self.sigma_xx[(i, j)] * s[j]);
        let sxy = DVector::from_fn(self.p(), |i, _| t * s[i] * self.sigma_xy[i]);
        CovarianceStructure::new(sxx, sxy, t * t * self.sigma_yy, self.means_removed)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let j = CovarianceJson {
            sigma_xx: self.sigma_xx.row_iter().map(|r| r.iter().copied().collect()).collect(),
            sigma_xy: self.sigma_xy.iter().copied().collect(),
            sigma_yy: self.sigma_yy,
            means_removed: self.means_removed,
        };
        serde_json::to_value(j).expect("plain numeric struct")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: CovarianceJson =
            serde_json::from_value(v.clone()).map_err(|e| Error::config("covariance", e.to_string()))?;
        let p = j.sigma_xy.len();
        for row in &j.sigma_xx {
            check_len(p, row.len())?;
        }
        check_len(p, j.sigma_xx.len())?;
        let sxx = DMatrix::from_fn(p, p, |r, c| j.sigma_xx[r][c]);
        CovarianceStructure::new(sxx, DVector::from_vec(j.sigma_xy), j.sigma_yy, j.means_removed)
    }

    /// Long-format export: one row per moment, with a comment line recording
    /// the divisor convention.
    pub fn write_csv(&self, names: &[String], outcome: &str, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        check_len(self.p(), names.len())?;
        let mut out = String::from("# second moments E[AB] with divisor n (not n-1)\nfirst,second,moment\n");
        for i in 0..self.p() {
            for j in 0..self.p() {
                out.push_str(&format!("{},{},{}\n", names[i], names[j], self.sigma_xx[(i, j)]));
            }
        }
        for (name, s) in names.iter().zip(self.sigma_xy.iter()) {
            out.push_str(&format!("{outcome},{name},{s}\n"));
        }
        out.push_str(&format!("{outcome},{outcome},{}\n", self.sigma_yy));
        File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })
    }
}

pub fn covariance_of(d: &Dataset) -> CovarianceStructure {
    let n = d.n() as f64;
    let x = &d.features;
    let y = &d.outcome;
    let sxx = (x.transpose() * x) / n;
    let sxx = (&sxx + sxx.transpose()) * 0.5;
    let sxy = (x.transpose() * y) / n;
    let syy = y.dot(y) / n;
    let centered = |col: &[f64]| {
        let mean = col.iter().sum::<f64>() / n;
        let scale = col.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        mean.abs() <= 1e-12 * scale
    };
    let means_removed = (0..d.p()).all(|j| centered(x.column(j).as_slice())) && centered(y.as_slice());
    CovarianceStructure::new(sxx, sxy, syy, means_removed).expect("empirical second moments are PSD")
}

/// Parameters of a synthetic Gaussian dataset, as accepted in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub corr_xx: Vec<Vec<f64>>,
    pub corr_xy: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

impl GaussianSpec {
    pub fn generate(&self) -> Result<Dataset> {
        gen_gaussian(&self.corr_xx, &self.corr_xy, self.n, self.seed)
    }

    /// Population moments the generator targets.
    pub fn covariance(&self) -> Result<CovarianceStructure> {
        CovarianceStructure::from_correlations(&self.corr_xx, &self.corr_xy)
    }
}

/// `n` i.i.d. zero-mean unit-variance Gaussian rows of `(X, Y)` with the given
/// correlations, via the Cholesky factor of the joint matrix.
pub fn gen_gaussian(corr_xx: &[Vec<f64>], corr_xy: &[f64], n: usize, seed: u64) -> Result<Dataset> {
    let p = corr_xy.len();
    if p == 0 {
        return Err(Error::config("corr_xy", "need at least one feature"));
    }
    check_len(p, corr_xx.len())?;
    let mut joint = DMatrix::zeros(p + 1, p + 1);
    for i in 0..p {
        check_len(p, corr_xx[i].len())?;
        for j in 0..p {
            joint[(i, j)] = corr_xx[i][j];
        }
        joint[(i, p)] = corr_xy[i];
        joint[(p, i)] = corr_xy[i];
    }
    joint[(p, p)] = 1.0;
    if !linalg::is_symmetric(&joint, 1e-12) {
        return Err(Error::config("corr_xx", "not symmetric"));
    }
    if (0..p).any(|i| (joint[(i, i)] - 1.0).abs() > 1e-12) {
        return Err(Error::config("corr_xx", "diagonal must be 1"));
    }
    let l = linalg::cholesky_lower(&joint, 1e-10, "joint correlation matrix of (X, Y)")?;
    let mut rng = sampling::rng(seed);
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let z = &l * sampling::standard_normal_vec(&mut rng, p + 1);
        for j in 0..p {
            x[(i, j)] = z[j];
        }
        y[i] = z[p];
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Dataset::new(x, y, names, "y", DatasetKind::Continuous)
}

/// Per-pattern outcome counts `(count_pos, count_neg)`, keyed by a `0`/`1`
/// string whose k-th character is feature k.
pub type CellCounts = BTreeMap<String, (usize, usize)>;

/// Rows `(features, outcome)` realizing `cells` exactly, shuffled by `seed`.
pub fn binary_rows(cells: &CellCounts, seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
    let p = cells
        .keys()
        .next()
        .map(|k| k.len())
        .ok_or_else(|| Error::config("cells", "empty specification"))?;
    if p == 0 {
        return Err(Error::config("cells", "patterns must have at least one feature"));
    }
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (pattern, (pos, neg)) in cells {
        if pattern.len() != p || !pattern.chars().all(|c| c == '0' || c == '1') {
            return Err(Error::config("cells", format!("bad pattern {pattern:?}")));
        }
        let x: Vec<f64> = pattern.chars().map(|c| if c == '1' { 1.0 } else { 0.0 }).collect();
        rows.extend(std::iter::repeat_n((x.clone(), 1.0), *pos));
        rows.extend(std::iter::repeat_n((x, -1.0), *neg));
    }
    if rows.is_empty() {
        return Err(Error::config("cells", "all counts are zero"));
    }
    rows.shuffle(&mut sampling::rng(seed));
    Ok(rows)
}

/// Binary dataset whose per-pattern counts equal `cells`; features are named
/// `x1..xp` and the outcome `y`.
pub fn gen_binary(cells: &CellCounts, seed: u64) -> Result<Dataset> {
    let rows = binary_rows(cells, seed)?;
    let n = rows.len();
    let p = rows[0].0.len();
    let x = DMatrix::from_fn(n, p, |i, j| rows[i].0[j]);
    let y = DVector::from_fn(n, |i, _| rows[i].1);
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Dataset::new(x, y, names, "y", DatasetKind::BinaryPm1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_binary_csv() {
        let f = csv_file("x1,x2,y\n0,1,1\n1,1,-1\n0,0,1\n");
        let d = load_csv(f.path(), "y").unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert_eq!(d.kind(), DatasetKind::BinaryPm1);
        assert_eq!(d.names(), &["x1".to_string(), "x2".to_string()]);
    }

    #[test]
    fn missing_outcome_column() {
        let f = csv_file("x1,x2,y\n0,1,1\n1,1,-1\n0,0,1\n");
        assert!(matches!(load_csv(f.path(), "z"), Err(Error::ColumnNotFound(c)) if c == "z"));
    }

    #[test]
    fn non_numeric_cell_reports_row_and_column() {
        let f = csv_file("x1,x2,y\nabc,1,1\n1,1,-1\n");
        match load_csv(f.path(), "y") {
            Err(Error::NonNumeric { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "x1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_columns_and_short_files() {
        let f = csv_file("x1,x1,y\n0,1,1\n1,1,-1\n");
        assert!(matches!(load_csv(f.path(), "y"), Err(Error::DuplicateColumn(_))));
        let f = csv_file("x1,y\n0,1\n");
        assert!(matches!(load_csv(f.path(), "y"), Err(Error::Data(_))));
        assert!(matches!(load_csv("/nonexistent/file.csv", "y"), Err(Error::Io { .. })));
    }

    #[test]
    fn all_zero_column_is_continuous_unless_overridden() {
        let f = csv_file("x1,x2,y\n0,1,1\n0,0,-1\n0,1,1\n");
        assert_eq!(load_csv(f.path(), "y").unwrap().kind(), DatasetKind::Continuous);
        let d = load_csv_with(f.path(), ColumnRef::Index(2), KindHint::Binary).unwrap();
        assert_eq!(d.kind(), DatasetKind::BinaryPm1);
    }

    #[test]
    fn normalize_two_point_column() {
        let d = Dataset::auto(
            DMatrix::from_column_slice(2, 1, &[1.0, 3.0]),
            DVector::from_vec(vec![0.0, 5.0]),
            vec!["a".into()],
        )
        .unwrap();
        let z = normalize(&d).unwrap();
        assert!((z.features()[(0, 0)] + 1.0).abs() < 1e-15);
        assert!((z.features()[(1, 0)] - 1.0).abs() < 1e-15);
        let again = normalize(&z).unwrap();
        assert!((again.features() - z.features()).amax() < 1e-12);
        assert!((again.outcome() - z.outcome()).amax() < 1e-12);
    }

    #[test]
    fn normalize_rejects_constant_column() {
        let d = Dataset::auto(
            DMatrix::from_column_slice(3, 1, &[5.0, 5.0, 5.0]),
            DVector::from_vec(vec![0.0, 1.0, 2.0]),
            vec!["c".into()],
        )
        .unwrap();
        assert!(matches!(normalize(&d), Err(Error::ZeroVariance(c)) if c == "c"));
    }

    #[test]
    fn covariance_of_identical_and_orthogonal_columns() {
        let col = [1.0, -1.0, 2.0, -2.0];
        let x = DMatrix::from_fn(4, 2, |i, _| col[i]);
        let d = Dataset::auto(
            x,
            DVector::from_vec(vec![1.0, -1.0, 0.5, -0.5]),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let c = covariance_of(&d);
        assert_eq!(c.sigma_xx()[(0, 1)], c.sigma_xx()[(0, 0)]);
        assert!(c.means_removed());

        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let d = Dataset::auto(
            x,
            DVector::from_vec(vec![1.0, 0.0, 0.0, -1.0]),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(covariance_of(&d).sigma_xx()[(0, 1)], 0.0);
    }

    #[test]
    fn gaussian_generator_targets_and_determinism() {
        let cxx = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let d = gen_gaussian(&cxx, &[0.4, 0.5], 10_000, 7).unwrap();
        let c = covariance_of(&d);
        assert!((c.sigma_xy()[0] - 0.4).abs() < 0.05);
        assert!((c.sigma_xy()[1] - 0.5).abs() < 0.05);
        assert!(c.sigma_xx()[(0, 1)].abs() < 0.05);
        assert_eq!(d, gen_gaussian(&cxx, &[0.4, 0.5], 10_000, 7).unwrap());
    }

    #[test]
    fn gaussian_generator_rejects_indefinite_joint_matrix() {
        let cxx = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            gen_gaussian(&cxx, &[0.9, 0.9], 10, 1),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn binary_generator_counts() {
        let mut cells = CellCounts::new();
        cells.insert("00".into(), (3, 1));
        cells.insert("01".into(), (2, 5));
        let d = gen_binary(&cells, 11).unwrap();
        assert_eq!(d.n(), 11);
        assert_eq!(d.kind(), DatasetKind::BinaryPm1);
        let count = |x2: f64, y: f64| {
            (0..d.n())
                .filter(|&i| d.features()[(i, 1)] == x2 && d.outcome()[i] == y)
                .count()
        };
        assert_eq!((count(0.0, 1.0), count(0.0, -1.0)), (3, 1));
        assert_eq!((count(1.0, 1.0), count(1.0, -1.0)), (2, 5));

        let mut single = CellCounts::new();
        single.insert("0".into(), (1, 0));
        assert_eq!(binary_rows(&single, 3).unwrap(), vec![(vec![0.0], 1.0)]);
        // one row is below the dataset minimum
        assert!(matches!(gen_binary(&single, 3), Err(Error::Data(_))));

        let mut zero = CellCounts::new();
        zero.insert("0".into(), (0, 0));
        assert!(matches!(gen_binary(&zero, 1), Err(Error::Config { .. })));
        assert!(matches!(gen_binary(&CellCounts::new(), 1), Err(Error::Config { .. })));
    }
}
