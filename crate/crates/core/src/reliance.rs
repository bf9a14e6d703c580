//! Model reliance: how much a model's loss grows when one feature is replaced
//! by an independent copy.
//!
//! Three routes are provided: the closed form for linear models under squared
//! loss, the permutation estimator for any [`Predictor`], and the exact
//! expectation over permutations for binary data.

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{CovarianceStructure, Dataset, DatasetKind};
use crate::error::{check_index, check_len, Error, Result};
use crate::sampling;
use nalgebra::DVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Diff,
    Ratio,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Diff => "diff",
            Variant::Ratio => "ratio",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    Linear,
    Logistic,
    Tree,
}

impl ModelClass {
    /// Diff for linear analysis, ratio for the classification experiments.
    pub fn default_variant(self) -> Variant {
        match self {
            ModelClass::Linear => Variant::Diff,
            ModelClass::Logistic | ModelClass::Tree => Variant::Ratio,
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelClass::Linear => "linear",
            ModelClass::Logistic => "logistic",
            ModelClass::Tree => "tree",
        })
    }
}

/// A fitted model seen through its per-observation loss.
pub trait Predictor {
    fn class(&self) -> ModelClass;

    /// Parameter vector for parametric models.
    fn params(&self) -> Option<&[f64]> {
        None
    }

    /// Loss contribution of a single observation.
    fn loss_row(&self, x: &[f64], y: f64) -> f64;
}

/// `sum_i l(f; x_i, y_i)`.
pub fn dataset_loss(model: &dyn Predictor, d: &Dataset) -> f64 {
    let mut buf = vec![0.0; d.p()];
    let x = d.features();
    (0..d.n())
        .map(|i| {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = x[(i, j)];
            }
            model.loss_row(&buf, d.outcome()[i])
        })
        .sum()
}

/// Loss with column `j` replaced by `column`.
fn loss_with_column(model: &dyn Predictor, d: &Dataset, j: usize, column: &[f64]) -> f64 {
    let mut buf = vec![0.0; d.p()];
    let x = d.features();
    (0..d.n())
        .map(|i| {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = x[(i, k)];
            }
            buf[j] = column[i];
            model.loss_row(&buf, d.outcome()[i])
        })
        .sum()
}

/// Linear model under squared loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub beta: Vec<f64>,
}

impl Predictor for LinearModel {
    fn class(&self) -> ModelClass {
        ModelClass::Linear
    }

    fn params(&self) -> Option<&[f64]> {
        Some(&self.beta)
    }

    fn loss_row(&self, x: &[f64], y: f64) -> f64 {
        let pred: f64 = x.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        (y - pred).powi(2)
    }
}

/// Logistic model; `beta[0]` is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub beta: Vec<f64>,
}

impl Predictor for LogisticModel {
    fn class(&self) -> ModelClass {
        ModelClass::Logistic
    }

    fn params(&self) -> Option<&[f64]> {
        Some(&self.beta)
    }

    fn loss_row(&self, x: &[f64], y: f64) -> f64 {
        let z = self.beta[0] + x.iter().zip(&self.beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        crate::logistic::log1p_exp(-y * z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MRVector {
    pub values: Vec<f64>,
    pub variant: Variant,
    pub model_loss: f64,
}

impl MRVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One `feature,variant,value,model_loss` row per feature.
    pub fn to_csv(&self, names: &[String]) -> Result<String> {
        check_len(self.values.len(), names.len())?;
        let mut out = String::from("feature,variant,value,model_loss\n");
        for (name, v) in names.iter().zip(&self.values) {
            out.push_str(&format!("{name},{},{v},{}\n", self.variant, self.model_loss));
        }
        Ok(out)
    }
}

/// `2 Cov(Y, X_j) b_j - 2 b_{-j}^T Cov(X_{-j}, X_j) b_j` (diff variant, population).
pub fn mr_linear(beta: &DVector<f64>, cov: &CovarianceStructure, j: usize) -> Result<f64> {
    let p = cov.p();
    check_len(p, beta.len())?;
    check_index(j, p)?;
    let sxx = cov.sigma_xx();
    let cross: f64 = (0..p).filter(|&i| i != j).map(|i| beta[i] * sxx[(i, j)]).sum();
    Ok(2.0 * cov.sigma_xy()[j] * beta[j] - 2.0 * cross * beta[j])
}

/// The same quantity written as
/// `2 Cov(Y, X_j) b_j - 2 b^T Cov(X, X_j) b_j + 2 Var(X_j) b_j^2`.
pub fn mr_linear_full(beta: &DVector<f64>, cov: &CovarianceStructure, j: usize) -> Result<f64> {
    let p = cov.p();
    check_len(p, beta.len())?;
    check_index(j, p)?;
    let sxx = cov.sigma_xx();
    let full: f64 = (0..p).map(|i| beta[i] * sxx[(i, j)]).sum();
    Ok(2.0 * cov.sigma_xy()[j] * beta[j] - 2.0 * full * beta[j] + 2.0 * sxx[(j, j)] * beta[j] * beta[j])
}

pub fn mr_linear_vector(beta: &DVector<f64>, cov: &CovarianceStructure) -> Result<DVector<f64>> {
    let values: Result<Vec<f64>> = (0..cov.p()).map(|j| mr_linear(beta, cov, j)).collect();
    Ok(DVector::from_vec(values?))
}

fn combine(shuffled: f64, original: f64, n: usize, variant: Variant) -> Result<f64> {
    match variant {
        // per observation, so the estimate is on the population scale
        Variant::Diff => Ok((shuffled - original) / n as f64),
        Variant::Ratio => {
            if original == 0.0 {
                Err(Error::ZeroLoss("ratio reliance with zero original loss".into()))
            } else {
                Ok(shuffled / original)
            }
        }
    }
}

/// Permutation estimate of reliance on feature `j`: the `k`-th shuffle uses
/// seed `seed + k`, so the result does not depend on evaluation order.
pub fn mr_empirical_permute(
    model: &dyn Predictor,
    d: &Dataset,
    j: usize,
    n_shuffles: usize,
    seed: u64,
    variant: Variant,
) -> Result<f64> {
    check_index(j, d.p())?;
    if n_shuffles == 0 {
        return Err(Error::config("n_shuffles", "must be >= 1"));
    }
    let original = dataset_loss(model, d);
    let column: Vec<f64> = d.features().column(j).iter().copied().collect();
    let mut total = 0.0;
    for k in 0..n_shuffles {
        let mut perm = column.clone();
        perm.shuffle(&mut sampling::rng(seed.wrapping_add(k as u64)));
        total += loss_with_column(model, d, j, &perm);
    }
    combine(total / n_shuffles as f64, original, d.n(), variant)
}

/// Pieces of the exact shuffled loss for a binary feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryShuffle {
    /// Loss with the column forced to 0.
    pub l0: f64,
    /// Loss with the column forced to 1.
    pub l1: f64,
    /// Empirical frequency of `x_j = 1`.
    pub p1: f64,
    pub original: f64,
}

impl BinaryShuffle {
    pub fn shuffled(&self) -> f64 {
        self.p1 * self.l1 + (1.0 - self.p1) * self.l0
    }
}

pub fn binary_shuffle(model: &dyn Predictor, d: &Dataset, j: usize) -> Result<BinaryShuffle> {
    if d.kind() != DatasetKind::BinaryPm1 {
        return Err(Error::Data("exact shuffled loss requires a binary dataset".into()));
    }
    check_index(j, d.p())?;
    let zeros = vec![0.0; d.n()];
    let ones = vec![1.0; d.n()];
    let p1 = d.features().column(j).sum() / d.n() as f64;
    Ok(BinaryShuffle {
        l0: loss_with_column(model, d, j, &zeros),
        l1: loss_with_column(model, d, j, &ones),
        p1,
        original: dataset_loss(model, d),
    })
}

/// Exact expected shuffled loss over all permutations of column `j`, divided by
/// the original loss.
pub fn mr_binary_exact(model: &dyn Predictor, d: &Dataset, j: usize) -> Result<f64> {
    let s = binary_shuffle(model, d, j)?;
    combine(s.shuffled(), s.original, d.n(), Variant::Ratio)
}

fn mr_binary_variant(model: &dyn Predictor, d: &Dataset, j: usize, variant: Variant) -> Result<f64> {
    let s = binary_shuffle(model, d, j)?;
    combine(s.shuffled(), s.original, d.n(), variant)
}

/// Where the reliance values come from.
#[derive(Debug, Clone, Copy)]
pub enum RelianceSource<'a> {
    /// Closed form; requires a linear model.
    Population(&'a CovarianceStructure),
    Permutation {
        data: &'a Dataset,
        n_shuffles: usize,
        seed: u64,
    },
    BinaryExact(&'a Dataset),
}

pub fn mr_vector(model: &dyn Predictor, source: RelianceSource<'_>, variant: Variant) -> Result<MRVector> {
    match source {
        RelianceSource::Population(cov) => {
            let beta = match (model.class(), model.params()) {
                (ModelClass::Linear, Some(b)) => DVector::from_column_slice(b),
                _ => return Err(Error::config("source", "closed-form reliance needs a linear model")),
            };
            if variant != Variant::Diff {
                return Err(Error::config("variant", "closed-form reliance is the diff variant"));
            }
            let values = mr_linear_vector(&beta, cov)?;
            let spec = crate::linear::RidgeSpec {
                cov: cov.clone(),
                c: 0.0,
                epsilon: 1.0,
                benchmark_loss: None,
            };
            Ok(MRVector {
                values: values.iter().copied().collect(),
                variant,
                model_loss: crate::linear::ridge_loss(&beta, &spec)?,
            })
        }
        RelianceSource::Permutation { data, n_shuffles, seed } => {
            let values: Result<Vec<f64>> = (0..data.p())
                .map(|j| mr_empirical_permute(model, data, j, n_shuffles, seed, variant))
                .collect();
            Ok(MRVector {
                values: values?,
                variant,
                model_loss: dataset_loss(model, data),
            })
        }
        RelianceSource::BinaryExact(data) => {
            let values: Result<Vec<f64>> = (0..data.p())
                .map(|j| mr_binary_variant(model, data, j, variant))
                .collect();
            Ok(MRVector {
                values: values?,
                variant,
                model_loss: dataset_loss(model, data),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_gaussian, Dataset};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn two_feature_cov(rho12: f64) -> CovarianceStructure {
        CovarianceStructure::from_correlations(&[vec![1.0, rho12], vec![rho12, 1.0]], &[0.4, 0.5]).unwrap()
    }

    /// Predictor with fixed forced-column losses, for arithmetic checks.
    struct ByFeature {
        j: usize,
        loss_at: [f64; 2],
    }

    impl Predictor for ByFeature {
        fn class(&self) -> ModelClass {
            ModelClass::Tree
        }
        fn loss_row(&self, x: &[f64], _y: f64) -> f64 {
            self.loss_at[x[self.j] as usize]
        }
    }

    #[test]
    fn closed_form_examples() {
        let cov = two_feature_cov(0.0);
        for j in 0..2 {
            assert_eq!(mr_linear(&DVector::zeros(2), &cov, j).unwrap(), 0.0);
        }
        let b = DVector::from_vec(vec![0.4, 0.5]);
        assert_abs_diff_eq!(mr_linear(&b, &cov, 0).unwrap(), 0.32, epsilon = 1e-15);
        assert_abs_diff_eq!(mr_linear(&b, &cov, 1).unwrap(), 0.50, epsilon = 1e-15);
        let b = DVector::from_vec(vec![0.3125, 0.4375]);
        assert_abs_diff_eq!(
            mr_linear(&b, &two_feature_cov(0.2), 0).unwrap(),
            0.1953125,
            epsilon = 1e-15
        );
        assert!(matches!(mr_linear(&b, &cov, 2), Err(Error::Index { .. })));
    }

    proptest! {
        #[test]
        fn compact_and_full_forms_agree(
            b in proptest::collection::vec(-2.0f64..2.0, 3),
            a in proptest::collection::vec(-1.0f64..1.0, 9),
            sy in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let m = DMatrix::from_row_slice(3, 3, &a);
            let sxx = &m * m.transpose();
            let cov = CovarianceStructure::new(sxx, DVector::from_vec(sy), 1.0, true).unwrap();
            let b = DVector::from_vec(b);
            for j in 0..3 {
                let l = mr_linear(&b, &cov, j).unwrap();
                let f = mr_linear_full(&b, &cov, j).unwrap();
                prop_assert!((l - f).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ignored_feature_has_no_reliance() {
        let d = gen_gaussian(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.4, 0.5], 200, 1).unwrap();
        let m = LinearModel { beta: vec![0.0, 0.5] };
        assert_eq!(mr_empirical_permute(&m, &d, 0, 5, 3, Variant::Diff).unwrap(), 0.0);
        assert_eq!(mr_empirical_permute(&m, &d, 0, 5, 3, Variant::Ratio).unwrap(), 1.0);
    }

    #[test]
    fn permutation_is_deterministic_per_seed() {
        let d = gen_gaussian(&[vec![1.0, 0.3], vec![0.3, 1.0]], &[0.4, 0.5], 300, 2).unwrap();
        let m = LinearModel { beta: vec![0.3, 0.4] };
        let a = mr_empirical_permute(&m, &d, 1, 7, 10, Variant::Ratio).unwrap();
        let b = mr_empirical_permute(&m, &d, 1, 7, 10, Variant::Ratio).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ratio_with_zero_loss_is_an_error() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let d = Dataset::auto(x, DVector::from_vec(vec![2.0, 4.0, 6.0]), vec!["a".into()]).unwrap();
        let m = LinearModel { beta: vec![2.0] };
        assert!(matches!(
            mr_empirical_permute(&m, &d, 0, 3, 1, Variant::Ratio),
            Err(Error::ZeroLoss(_))
        ));
        assert!(mr_empirical_permute(&m, &d, 0, 3, 1, Variant::Diff).is_ok());
    }

    #[test]
    fn doubling_shuffles_halves_variance() {
        let d = gen_gaussian(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.4, 0.5], 60, 4).unwrap();
        let m = LinearModel { beta: vec![0.4, 0.5] };
        let var = |k: usize| {
            let est: Vec<f64> = (0..50u64)
                .map(|r| mr_empirical_permute(&m, &d, 1, k, 1_000 * r, Variant::Diff).unwrap())
                .collect();
            let mean = est.iter().sum::<f64>() / est.len() as f64;
            est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (est.len() - 1) as f64
        };
        let ratio = var(20) / var(10);
        assert!((0.3..0.75).contains(&ratio), "variance ratio {ratio}");
    }

    #[test]
    fn binary_shortcut_arithmetic() {
        // 4 rows, half with x = 1: L0 = 4 * 2.5 = 10, L1 = 4 * 5 = 20, original = 2*2.5 + 2*5 = 15
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, 1.0]);
        let d = Dataset::new(
            x,
            DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]),
            vec!["a".into()],
            "y",
            DatasetKind::BinaryPm1,
        )
        .unwrap();
        let m = ByFeature {
            j: 0,
            loss_at: [2.5, 5.0],
        };
        let s = binary_shuffle(&m, &d, 0).unwrap();
        assert_eq!((s.l0, s.l1, s.p1), (10.0, 20.0, 0.5));
        assert_eq!(s.shuffled(), 15.0);
        // the 12/15 original from the worked example arises when the original rows differ
        let ratio = BinaryShuffle { original: 12.0, ..s }.shuffled() / 12.0;
        assert_eq!(ratio, 1.25);
    }

    #[test]
    fn binary_shortcut_needs_binary_data() {
        let d = gen_gaussian(&[vec![1.0]], &[0.4], 20, 1).unwrap();
        let m = LinearModel { beta: vec![0.4] };
        assert!(matches!(mr_binary_exact(&m, &d, 0), Err(Error::Data(_))));
    }

    #[test]
    fn population_vector() {
        let m = LinearModel { beta: vec![0.4, 0.5] };
        let v = mr_vector(&m, RelianceSource::Population(&two_feature_cov(0.0)), Variant::Diff).unwrap();
        assert_abs_diff_eq!(v.values[0], 0.32, epsilon = 1e-15);
        assert_abs_diff_eq!(v.values[1], 0.50, epsilon = 1e-15);
        assert_abs_diff_eq!(v.model_loss, 0.59, epsilon = 1e-15);
        let zero = LinearModel { beta: vec![0.0, 0.0] };
        let v = mr_vector(&zero, RelianceSource::Population(&two_feature_cov(0.0)), Variant::Diff).unwrap();
        assert_eq!(v.values, vec![0.0, 0.0]);
        let csv = v.to_csv(&["a".into(), "b".into()]).unwrap();
        assert_eq!(csv.lines().nth(1), Some("a,diff,0,1"));
    }
}
