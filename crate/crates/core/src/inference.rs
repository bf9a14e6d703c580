//! Wald test of a linear model's reliance on one feature.
//!
//! The OLS fit carries a heteroskedasticity-robust sandwich covariance; the
//! delta method pushes it through the quadratic reliance map.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::{CovarianceStructure, Dataset};
use crate::error::{check_index, check_len, Error, Result};
use crate::linalg;
use crate::reliance::mr_linear_full;
use crate::vic_linear::jacobian_mr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelianceTest {
    pub feature: String,
    pub j: usize,
    pub n: usize,
    pub null_value: f64,
    pub mr_hat: f64,
    /// Asymptotic variance of `sqrt(n) * mr_hat`.
    pub sigma_hat: f64,
    pub z_stat: f64,
    pub p_value: f64,
}

/// Features and outcome with column means removed.
fn centered(d: &Dataset) -> (DMatrix<f64>, DVector<f64>) {
    let mut x = d.features().clone();
    for mut col in x.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let y = d.outcome().add_scalar(-d.outcome().mean());
    (x, y)
}

/// Empirical moments of the centered data (divisor `n`).
pub fn centered_moments(d: &Dataset) -> Result<CovarianceStructure> {
    let (x, y) = centered(d);
    let n = d.n() as f64;
    let sxx = x.transpose() * &x / n;
    CovarianceStructure::new(
        (&sxx + sxx.transpose()) * 0.5,
        x.transpose() * &y / n,
        y.dot(&y) / n,
        true,
    )
}

/// `2 Cov(Y, X_j) b_j - 2 b^T Cov(X, X_j) b_j + 2 Var(X_j) b_j^2` with empirical
/// moments of the centered data.
pub fn empirical_mr_quadratic(beta: &DVector<f64>, d: &Dataset, j: usize) -> Result<f64> {
    check_len(d.p(), beta.len())?;
    check_index(j, d.p())?;
    mr_linear_full(beta, &centered_moments(d)?, j)
}

/// Gradient of [`empirical_mr_quadratic`] in `beta`.
pub fn empirical_mr_gradient(beta: &DVector<f64>, d: &Dataset, j: usize) -> Result<DVector<f64>> {
    check_index(j, d.p())?;
    let jac = jacobian_mr(beta, &centered_moments(d)?)?;
    Ok(jac.matrix.row(j).transpose())
}

struct OlsFit {
    moments: CovarianceStructure,
    beta: DVector<f64>,
    /// `Sigma^{-1} S Sigma^{-1}`
    sandwich: DMatrix<f64>,
}

fn ols(d: &Dataset) -> Result<OlsFit> {
    let (x, y) = centered(d);
    let n = d.n() as f64;
    let moments = centered_moments(d)?;
    let sinv = linalg::inverse(moments.sigma_xx(), "empirical Sigma_xx")?;
    let beta = &sinv * moments.sigma_xy();
    let resid = &y - &x * &beta;
    let mut s = DMatrix::zeros(d.p(), d.p());
    for (i, row) in x.row_iter().enumerate() {
        let r = row.transpose();
        s.ger(resid[i] * resid[i] / n, &r, &r, 1.0);
    }
    let v = &sinv * s * &sinv;
    Ok(OlsFit {
        moments,
        beta,
        sandwich: (&v + v.transpose()) * 0.5,
    })
}

/// `Sigma^{-1} S Sigma^{-1}` with `S = (1/n) sum_i x_i x_i^T e_i^2` from OLS
/// residuals `e_i`; the covariance of `sqrt(n) * beta_hat`.
pub fn sandwich_variance(d: &Dataset) -> Result<DMatrix<f64>> {
    Ok(ols(d)?.sandwich)
}

/// Degenerate-variance cutoff for the delta method.
pub const MIN_SIGMA: f64 = 1e-14;

/// `Z = n (mr_hat - null)^2 / (grad^T V grad)` against chi-square(1).
pub fn mr_wald_statistic(d: &Dataset, j: usize, null_value: f64) -> Result<RelianceTest> {
    check_index(j, d.p())?;
    let fit = ols(d)?;
    let mr_hat = mr_linear_full(&fit.beta, &fit.moments, j)?;
    let grad: DVector<f64> = jacobian_mr(&fit.beta, &fit.moments)?.matrix.row(j).transpose();
    let sigma_hat = (grad.transpose() * &fit.sandwich * &grad)[0];
    if !(sigma_hat > MIN_SIGMA) {
        return Err(Error::Degenerate(format!(
            "delta-method variance {sigma_hat:e} for feature {}",
            d.names()[j]
        )));
    }
    let n = d.n();
    let z_stat = n as f64 * (mr_hat - null_value).powi(2) / sigma_hat;
    Ok(RelianceTest {
        feature: d.names()[j].clone(),
        j,
        n,
        null_value,
        mr_hat,
        sigma_hat,
        z_stat,
        p_value: chi2_sf(z_stat),
    })
}

fn chi2_1() -> ChiSquared {
    ChiSquared::new(1.0).expect("one degree of freedom is valid")
}

/// `P(chi2_1 > z)`.
pub fn chi2_sf(z: f64) -> f64 {
    chi2_1().sf(z).clamp(0.0, 1.0)
}

/// Critical value of the level-`alpha` test.
pub fn chi2_critical(alpha: f64) -> f64 {
    chi2_1().inverse_cdf(1.0 - alpha)
}
