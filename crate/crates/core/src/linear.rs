//! Ridge-regression Rashomon sets, exactly.
//!
//! Losses are population-scale (`E[(Y - X^T b)^2] + c |b|^2`) and are computed
//! from a [`CovarianceStructure`]. Empirical sums differ by the factor `n`, which
//! leaves membership unchanged because the threshold is multiplicative.

use nalgebra::{DMatrix, DVector};

use crate::data::CovarianceStructure;
use crate::ellipsoid::Ellipsoid;
use crate::error::{check_len, Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSpec {
    pub cov: CovarianceStructure,
    pub c: f64,
    pub epsilon: f64,
    /// Replaces the in-class minimum loss as the Rashomon benchmark.
    pub benchmark_loss: Option<f64>,
}

impl RidgeSpec {
    pub fn new(cov: CovarianceStructure, c: f64, epsilon: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::config("c", format!("must be >= 0, got {c}")));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::config("epsilon", format!("must be > 0, got {epsilon}")));
        }
        Ok(RidgeSpec {
            cov,
            c,
            epsilon,
            benchmark_loss: None,
        })
    }

    pub fn with_benchmark_loss(mut self, loss: f64) -> Result<Self> {
        if !(loss > 0.0) {
            return Err(Error::config("benchmark_loss", "must be > 0"));
        }
        self.benchmark_loss = Some(loss);
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.cov.p()
    }

    /// `Sigma_xx + c I`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.cov.sigma_xx() + DMatrix::identity(self.p(), self.p()) * self.c
    }

    /// Benchmark loss `L*` (the in-class minimum unless overridden).
    pub fn best_loss(&self) -> Result<f64> {
        match self.benchmark_loss {
            Some(l) => Ok(l),
            None => {
                let beta = best_ridge(&self.cov, self.c)?;
                ridge_loss(&beta, self)
            }
        }
    }

    pub fn threshold(&self) -> Result<f64> {
        Ok((1.0 + self.epsilon) * self.best_loss()?)
    }
}

/// `b^T (Sigma_xx + c I) b - 2 sigma_xy^T b + sigma_yy`.
pub fn ridge_loss(beta: &DVector<f64>, spec: &RidgeSpec) -> Result<f64> {
    check_len(spec.p(), beta.len())?;
    let g = spec.gram();
    Ok((beta.transpose() * g * beta)[0] - 2.0 * spec.cov.sigma_xy().dot(beta) + spec.cov.sigma_yy())
}

/// Gradient `2 (Sigma_xx + c I) b - 2 sigma_xy`.
pub fn ridge_gradient(beta: &DVector<f64>, spec: &RidgeSpec) -> Result<DVector<f64>> {
    check_len(spec.p(), beta.len())?;
    Ok((spec.gram() * beta - spec.cov.sigma_xy()) * 2.0)
}

/// `(Sigma_xx + c I)^{-1} sigma_xy`.
pub fn best_ridge(cov: &CovarianceStructure, c: f64) -> Result<DVector<f64>> {
    let p = cov.p();
    let g = cov.sigma_xx() + DMatrix::identity(p, p) * c;
    linalg::solve(&g, cov.sigma_xy(), "Sigma_xx + cI")
}

/// `{b : (b - b*)^T (Sigma_xx + cI) (b - b*) <= eps L*}`, with axes the
/// eigenvectors of `Sigma_xx + cI` and radii `sqrt(eps L* / lambda_k)`.
///
/// With a benchmark override the slack is `(1 + eps) L_bench - L(b*)`.
pub fn rashomon_ellipsoid_linear(spec: &RidgeSpec) -> Result<Ellipsoid> {
    let g = spec.gram();
    let beta_star = best_ridge(&spec.cov, spec.c)?;
    let slack = rashomon_slack(spec, &beta_star)?;
    let (values, vectors) = linalg::sorted_eigen(&g);
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotPositiveDefinite("Sigma_xx + cI".into()));
    }
    let radii = values.map(|l| (slack / l).sqrt());
    Ellipsoid::new(beta_star, radii, vectors)
}

/// `(1 + eps) L* - L(b*)`, which is `eps L*` without a benchmark override.
pub(crate) fn rashomon_slack(spec: &RidgeSpec, beta_star: &DVector<f64>) -> Result<f64> {
    let l_min = ridge_loss(beta_star, spec)?;
    let slack = match spec.benchmark_loss {
        None => spec.epsilon * l_min,
        Some(bench) => (1.0 + spec.epsilon) * bench - l_min,
    };
    let scale = spec.cov.sigma_yy().abs().max(1e-300);
    if !(slack > 1e-14 * scale) {
        return Err(Error::Degenerate(format!(
            "Rashomon slack eps*L* = {slack:e}; a perfect fit leaves no Rashomon interior"
        )));
    }
    Ok(slack)
}

/// Rashomon membership by direct loss comparison.
pub fn contains_linear(beta: &DVector<f64>, spec: &RidgeSpec) -> Result<bool> {
    let loss = ridge_loss(beta, spec)?;
    let threshold = spec.threshold()?;
    Ok(loss <= threshold + 1e-10 * threshold.abs().max(1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use approx::assert_abs_diff_eq;

    pub(crate) fn two_feature_cov(rho12: f64) -> CovarianceStructure {
        CovarianceStructure::from_correlations(&[vec![1.0, rho12], vec![rho12, 1.0]], &[0.4, 0.5]).unwrap()
    }

    fn spec(rho12: f64, eps: f64) -> RidgeSpec {
        RidgeSpec::new(two_feature_cov(rho12), 0.0, eps).unwrap()
    }

    #[test]
    fn loss_examples() {
        let s = spec(0.0, 0.05);
        assert_abs_diff_eq!(ridge_loss(&DVector::zeros(2), &s).unwrap(), 1.0);
        assert_abs_diff_eq!(
            ridge_loss(&DVector::from_vec(vec![0.4, 0.5]), &s).unwrap(),
            0.59,
            epsilon = 1e-15
        );
        let s2 = spec(0.2, 0.05);
        let b = best_ridge(&s2.cov, 0.0).unwrap();
        assert_abs_diff_eq!(ridge_loss(&b, &s2).unwrap(), 0.65625, epsilon = 1e-14);
        assert!(matches!(
            ridge_loss(&DVector::zeros(3), &s),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn minimizer_examples() {
        let b = best_ridge(&two_feature_cov(0.0), 0.0).unwrap();
        assert_abs_diff_eq!(b[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], 0.5, epsilon = 1e-15);
        let b = best_ridge(&two_feature_cov(0.2), 0.0).unwrap();
        assert_abs_diff_eq!(b[0], 0.3125, epsilon = 1e-14);
        assert_abs_diff_eq!(b[1], 0.4375, epsilon = 1e-14);

        let null = CovarianceStructure::new(DMatrix::identity(2, 2), DVector::zeros(2), 1.0, true).unwrap();
        for c in [0.0, 0.5, 3.0] {
            assert_eq!(best_ridge(&null, c).unwrap(), DVector::zeros(2));
        }
        let rank1 = CovarianceStructure::new(
            DMatrix::from_element(2, 2, 1.0),
            DVector::from_vec(vec![0.3, 0.3]),
            1.0,
            true,
        )
        .unwrap();
        assert!(matches!(best_ridge(&rank1, 0.0), Err(Error::Singular(_))));
        assert!(best_ridge(&rank1, 0.1).is_ok());
    }

    #[test]
    fn gradient_vanishes_at_minimizer() {
        for rho in [0.0, 0.2, 0.5, -0.7] {
            let s = RidgeSpec::new(two_feature_cov(rho), 0.3, 0.05).unwrap();
            let b = best_ridge(&s.cov, s.c).unwrap();
            assert!(ridge_gradient(&b, &s).unwrap().norm() < 1e-8 * s.cov.sigma_xy().norm());
        }
    }

    #[test]
    fn minimizer_beats_small_perturbations() {
        let s = spec(0.2, 0.05);
        let b = best_ridge(&s.cov, 0.0).unwrap();
        let l = ridge_loss(&b, &s).unwrap();
        let mut rng = sampling::rng(5);
        for _ in 0..100 {
            let d = sampling::unit_sphere(&mut rng, 2) * 1e-3;
            assert!(ridge_loss(&(&b + d), &s).unwrap() > l);
        }
    }

    #[test]
    fn uncorrelated_ellipsoid() {
        let e = rashomon_ellipsoid_linear(&spec(0.0, 0.05)).unwrap();
        assert_abs_diff_eq!(e.center()[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(e.center()[1], 0.5, epsilon = 1e-15);
        assert_eq!(e.rotation(), &DMatrix::identity(2, 2));
        for r in e.radii().iter() {
            assert_abs_diff_eq!(*r, 0.0295f64.sqrt(), epsilon = 1e-12);
            assert_abs_diff_eq!(*r, 0.17176, epsilon = 1e-5);
        }
        let doubled = rashomon_ellipsoid_linear(&spec(0.0, 0.1)).unwrap();
        for k in 0..2 {
            assert_abs_diff_eq!(doubled.radii()[k], e.radii()[k] * 2f64.sqrt(), epsilon = 1e-14);
        }
    }

    #[test]
    fn correlated_ellipsoid_axes() {
        let e = rashomon_ellipsoid_linear(&spec(0.2, 0.05)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.rotation()[(0, 0)].abs(), s, epsilon = 1e-12);
        assert_abs_diff_eq!(e.rotation()[(1, 0)].abs(), s, epsilon = 1e-12);
        assert_abs_diff_eq!(e.rotation()[(0, 1)].abs(), s, epsilon = 1e-12);
        assert!(e.rotation()[(0, 0)] * e.rotation()[(1, 0)] < 0.0);
        assert!(e.rotation()[(0, 1)] * e.rotation()[(1, 1)] > 0.0);
    }

    #[test]
    fn boundary_is_iso_loss() {
        for rho in [0.0, 0.2, 0.5] {
            let s = RidgeSpec::new(two_feature_cov(rho), 0.1, 0.05).unwrap();
            let e = rashomon_ellipsoid_linear(&s).unwrap();
            let t = s.threshold().unwrap();
            let mut rng = sampling::rng(9);
            for _ in 0..200 {
                let b = e.from_unit(&sampling::unit_sphere(&mut rng, 2));
                assert!((ridge_loss(&b, &s).unwrap() - t).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn membership_examples() {
        let s = spec(0.0, 0.05);
        let r = 0.0295f64.sqrt();
        assert!(contains_linear(&DVector::from_vec(vec![0.4, 0.5]), &s).unwrap());
        assert!(contains_linear(&DVector::from_vec(vec![0.4 + r, 0.5]), &s).unwrap());
        assert!(!contains_linear(&DVector::from_vec(vec![0.6, 0.5]), &s).unwrap());
    }

    #[test]
    fn membership_agrees_with_ellipsoid() {
        for rho in [0.0, 0.3, -0.6] {
            let s = RidgeSpec::new(two_feature_cov(rho), 0.05, 0.1).unwrap();
            let e = rashomon_ellipsoid_linear(&s).unwrap();
            let mut rng = sampling::rng(17);
            for _ in 0..1000 {
                let u = sampling::standard_normal_vec(&mut rng, 2) * 0.8;
                let b = e.from_unit(&u);
                let q = e.quadratic_form(&b);
                if (q - 1.0).abs() < 1e-9 {
                    continue;
                }
                assert_eq!(contains_linear(&b, &s).unwrap(), q <= 1.0);
            }
        }
    }

    #[test]
    fn perfect_fit_is_degenerate() {
        let cov = CovarianceStructure::new(DMatrix::identity(1, 1), DVector::from_vec(vec![1.0]), 1.0, true).unwrap();
        let s = RidgeSpec::new(cov, 0.0, 0.05).unwrap();
        assert!(matches!(rashomon_ellipsoid_linear(&s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn benchmark_override_widens_set() {
        let base = spec(0.0, 0.05);
        let wider = base.clone().with_benchmark_loss(0.7).unwrap();
        let e = rashomon_ellipsoid_linear(&wider).unwrap();
        assert_abs_diff_eq!(e.radii()[0], (1.05f64 * 0.7 - 0.59).sqrt(), epsilon = 1e-12);
    }
}
