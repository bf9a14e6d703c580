//! Sets of model-reliance vectors together with the models that produced them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::reliance::{MRVector, ModelClass, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct ReliancePoint {
    /// Model parameters (coefficients, or per-cell labels for trees).
    pub beta: Vec<f64>,
    pub mr: MRVector,
    pub loss: f64,
}

/// Everything needed to regenerate a cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_class: ModelClass,
    pub variant: Variant,
    pub epsilon: f64,
    /// Ridge penalty, linear clouds only.
    pub c: Option<f64>,
    pub seed: Option<u64>,
    pub best_loss: f64,
    pub threshold: f64,
    pub feature_names: Vec<String>,
    pub param_names: Vec<String>,
    /// Sampler or enumeration settings, free-form.
    pub settings: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VicCloud {
    points: Vec<ReliancePoint>,
    provenance: Provenance,
}

/// Relative slack on the Rashomon threshold when validating stored points.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

impl VicCloud {
    pub fn new(points: Vec<ReliancePoint>, provenance: Provenance) -> Result<Self> {
        let limit = provenance.threshold + MEMBERSHIP_TOL * provenance.threshold.abs();
        for (i, pt) in points.iter().enumerate() {
            check_len(provenance.param_names.len(), pt.beta.len())?;
            check_len(provenance.feature_names.len(), pt.mr.len())?;
            if pt.mr.variant != provenance.variant {
                return Err(Error::Data(format!("point {i} has variant {}", pt.mr.variant)));
            }
            if !(pt.loss <= limit) {
                return Err(Error::Data(format!(
                    "point {i} has loss {} above the Rashomon threshold {}",
                    pt.loss, provenance.threshold
                )));
            }
        }
        Ok(VicCloud { points, provenance })
    }

    pub fn points(&self) -> &[ReliancePoint] {
        &self.points
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn p(&self) -> usize {
        self.provenance.feature_names.len()
    }

    /// Reliance values of feature `j` across the cloud.
    pub fn mr_column(&self, j: usize) -> Vec<f64> {
        self.points.iter().map(|pt| pt.mr.values[j]).collect()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["loss".to_string()];
        h.extend(self.provenance.param_names.iter().cloned());
        h.extend(self.provenance.feature_names.iter().map(|n| format!("mr_{n}")));
        h
    }

    /// `loss, params..., mr...` per point; floats use the shortest exact form.
    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for pt in &self.points {
            let mut row = vec![fmt_num(pt.loss)];
            row.extend(pt.beta.iter().map(|v| fmt_num(*v)));
            row.extend(pt.mr.values.iter().map(|v| fmt_num(*v)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    /// Writes the CSV and its JSON provenance sidecar.
    pub fn write(&self, csv_path: impl AsRef<Path>) -> Result<()> {
        let csv_path = csv_path.as_ref();
        write_file(csv_path, self.to_csv().as_bytes())?;
        let json = serde_json::to_string_pretty(&self.provenance).expect("provenance serializes");
        write_file(&Self::sidecar_path(csv_path), format!("{json}\n").as_bytes())
    }

    pub fn read(csv_path: impl AsRef<Path>) -> Result<Self> {
        let csv_path = csv_path.as_ref();
        let side = Self::sidecar_path(csv_path);
        let text = fs::read_to_string(&side).map_err(|source| Error::Io {
            path: side.clone(),
            source,
        })?;
        let provenance: Provenance =
            serde_json::from_str(&text).map_err(|e| Error::config("provenance", format!("{}: {e}", side.display())))?;
        let csv_err = |reason: String| Error::Csv {
            path: csv_path.to_path_buf(),
            reason,
        };
        let mut rdr = csv::Reader::from_path(csv_path).map_err(|e| csv_err(e.to_string()))?;
        let q = provenance.param_names.len();
        let p = provenance.feature_names.len();
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        check_len(1 + q + p, header.len())?;
        let mut points = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(e.to_string()))?;
            let vals: Result<Vec<f64>> = rec
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    s.trim().parse::<f64>().map_err(|_| Error::NonNumeric {
                        row: line + 2,
                        column: header[k].clone(),
                        value: s.to_string(),
                    })
                })
                .collect();
            let vals = vals?;
            check_len(1 + q + p, vals.len())?;
            points.push(ReliancePoint {
                beta: vals[1..1 + q].to_vec(),
                mr: MRVector {
                    values: vals[1 + q..].to_vec(),
                    variant: provenance.variant,
                    model_loss: vals[0],
                },
                loss: vals[0],
            });
        }
        VicCloud::new(points, provenance)
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn provenance() -> Provenance {
        Provenance {
            model_class: ModelClass::Linear,
            variant: Variant::Diff,
            epsilon: 0.05,
            c: Some(0.0),
            seed: Some(7),
            best_loss: 1.0,
            threshold: 1.05,
            feature_names: vec!["a".into(), "b".into()],
            param_names: vec!["beta_a".into(), "beta_b".into()],
            settings: serde_json::json!({"n_boundary": 1}),
        }
    }

    fn point(loss: f64) -> ReliancePoint {
        ReliancePoint {
            beta: vec![0.1, -1.0 / 3.0],
            mr: MRVector {
                values: vec![0.2, 1e-17],
                variant: Variant::Diff,
                model_loss: loss,
            },
            loss,
        }
    }

    #[test]
    fn rejects_points_outside_threshold() {
        assert!(VicCloud::new(vec![point(1.05)], provenance()).is_ok());
        assert!(matches!(
            VicCloud::new(vec![point(1.06)], provenance()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cloud = VicCloud::new(vec![point(1.0), point(0.3)], provenance()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.csv");
        cloud.write(&path).unwrap();
        assert!(dir.path().join("cloud.json").exists());
        let back = VicCloud::read(&path).unwrap();
        assert_eq!(back, cloud);
        assert_eq!(cloud.to_csv().lines().next(), Some("loss,beta_a,beta_b,mr_a,mr_b"));
    }
}
