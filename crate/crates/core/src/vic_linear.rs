//! Variable importance clouds of ridge models.
//!
//! The reliance map `b -> MR(b)` is quadratic, so the image of the Rashomon
//! ellipsoid is in general not an ellipsoid. It is one when the features are
//! uncorrelated; otherwise a first-order expansion around `b_bar` gives an
//! approximating ellipsoid, and the exact cloud is obtained by forward mapping.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cloud::{Provenance, ReliancePoint, VicCloud};
use crate::data::CovarianceStructure;
use crate::ellipsoid::Ellipsoid;
use crate::error::{check_index, check_len, Error, Result};
use crate::linalg;
use crate::linear::{best_ridge, rashomon_slack, ridge_loss, RidgeSpec};
use crate::reliance::{mr_linear_vector, MRVector, ModelClass, Variant};
use crate::sampling;

/// Off-diagonal magnitude below which features count as uncorrelated.
pub const UNCORRELATED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMR {
    pub matrix: DMatrix<f64>,
    pub expansion_point: DVector<f64>,
    pub base_mr: DVector<f64>,
}

/// Closed-form cloud for uncorrelated features: axis-aligned with
/// `center_j = 2 s_jY^2 / (Var_j + c)` and `r_j = 2 |s_jY| sqrt(eps L* / (Var_j + c))`.
pub fn vic_center_radii_uncorrelated(cov: &CovarianceStructure, c: f64, epsilon: f64) -> Result<Ellipsoid> {
    let p = cov.p();
    let sxx = cov.sigma_xx();
    let mut worst = (0.0, 0, 0);
    for i in 0..p {
        for j in 0..p {
            if i != j && sxx[(i, j)].abs() > worst.0 {
                worst = (sxx[(i, j)].abs(), i, j);
            }
        }
    }
    if worst.0 > UNCORRELATED_TOL {
        return Err(Error::Data(format!(
            "features are correlated: |Sigma[{}][{}]| = {:e}",
            worst.1, worst.2, worst.0
        )));
    }
    if let Some(j) = (0..p).find(|&j| cov.sigma_xy()[j] == 0.0) {
        return Err(Error::Degenerate(format!("Cov(X_{j}, Y) = 0 gives a zero radius")));
    }
    let spec = RidgeSpec::new(cov.clone(), c, epsilon)?;
    let slack = rashomon_slack(&spec, &best_ridge(cov, c)?)?;
    let denom = |j: usize| sxx[(j, j)] + c;
    let sy = cov.sigma_xy();
    let center = DVector::from_fn(p, |j, _| 2.0 * sy[j] * sy[j] / denom(j));
    let radii = DVector::from_fn(p, |j, _| 2.0 * sy[j].abs() * (slack / denom(j)).sqrt());
    Ellipsoid::axis_aligned(center, radii)
}

/// Row `j` is the gradient of `mr_j`: diagonal `2 (s_jY - sum_{i!=j} s_ij b_i)`,
/// off-diagonal `-2 s_ij b_j`.
pub fn jacobian_mr(beta_bar: &DVector<f64>, cov: &CovarianceStructure) -> Result<JacobianMR> {
    let p = cov.p();
    check_len(p, beta_bar.len())?;
    let sxx = cov.sigma_xx();
    let sy = cov.sigma_xy();
    let matrix = DMatrix::from_fn(p, p, |j, i| {
        if i == j {
            let cross: f64 = (0..p).filter(|&k| k != j).map(|k| sxx[(k, j)] * beta_bar[k]).sum();
            2.0 * (sy[j] - cross)
        } else {
            -2.0 * sxx[(i, j)] * beta_bar[j]
        }
    });
    Ok(JacobianMR {
        matrix,
        expansion_point: beta_bar.clone(),
        base_mr: mr_linear_vector(beta_bar, cov)?,
    })
}

/// `b_bar + J^{-1} (mr - mr_bar)`.
pub fn mr_inverse_approx(mr: &DVector<f64>, jac: &JacobianMR) -> Result<DVector<f64>> {
    check_len(jac.base_mr.len(), mr.len())?;
    let step = linalg::solve(&jac.matrix, &(mr - &jac.base_mr), "reliance Jacobian")?;
    Ok(&jac.expansion_point + step)
}

/// Ellipsoid in reliance space obtained by substituting the linearized inverse
/// into the Rashomon inequality.
///
/// With `A = J^{-T} G J^{-1} = Q diag(lambda) Q^T` and
/// `b = Q^T J^{-T} (s_xy - G b_bar)`, the condition reads
/// `sum_k lambda_k (w_k - b_k / lambda_k)^2 <= slack + sum_k b_k^2 / lambda_k`
/// where `w = Q^T (mr - mr_bar)` and `slack = (1 + eps) L* - L(b_bar)`.
pub fn vic_ellipsoid_approx(beta_bar: &DVector<f64>, spec: &RidgeSpec) -> Result<Ellipsoid> {
    let jac = jacobian_mr(beta_bar, &spec.cov)?;
    let jinv = linalg::inverse(&jac.matrix, "reliance Jacobian")?;
    let g = spec.gram();
    let a = jinv.transpose() * &g * &jinv;
    let a = (&a + a.transpose()) * 0.5;
    let (lambda, q) = linalg::sorted_eigen(&a);
    if lambda.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::NotPositiveDefinite("J^-T (Sigma_xx + cI) J^-1".into()));
    }
    let beta_star = best_ridge(&spec.cov, spec.c)?;
    let at_optimum = (beta_bar - &beta_star).amax() == 0.0;
    let slack = if at_optimum {
        rashomon_slack(spec, &beta_star)?
    } else {
        spec.threshold()? - ridge_loss(beta_bar, spec)?
    };
    let b = q.transpose() * jinv.transpose() * (spec.cov.sigma_xy() - &g * beta_bar);
    let rhs = slack + (0..b.len()).map(|k| b[k] * b[k] / lambda[k]).sum::<f64>();
    if !(rhs > 0.0) {
        return Err(Error::Degenerate(format!("approximate cloud is empty (rhs {rhs:e})")));
    }
    let offset = DVector::from_fn(b.len(), |k, _| b[k] / lambda[k]);
    let center = &jac.base_mr + &q * offset;
    let radii = lambda.map(|l| (rhs / l).sqrt());
    Ellipsoid::new(center, radii, q)
}

/// `MR_j(b) - MR_j(b_bar) - J_j (b - b_bar) = -2 sum_{i!=j} s_ij d_i d_j` with
/// `d = b - b_bar`. The map has no terms beyond second order.
pub fn second_order_term(delta: &DVector<f64>, cov: &CovarianceStructure, j: usize) -> Result<f64> {
    let p = cov.p();
    check_len(p, delta.len())?;
    check_index(j, p)?;
    let sxx = cov.sigma_xx();
    let s: f64 = (0..p).filter(|&i| i != j).map(|i| sxx[(i, j)] * delta[i]).sum();
    Ok(-2.0 * s * delta[j])
}

/// `2 sum_{i!=j} |s_ij| l_i l_j`: the maximum of `|second_order_term|` over the
/// box `|d_k| <= l_k`, attained at a corner.
pub fn approx_error_bound(j: usize, half_widths: &DVector<f64>, cov: &CovarianceStructure) -> Result<f64> {
    let p = cov.p();
    check_len(p, half_widths.len())?;
    check_index(j, p)?;
    if let Some(l) = half_widths.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::config("half_widths", format!("must be >= 0, got {l}")));
    }
    let sxx = cov.sigma_xx();
    Ok(2.0
        * (0..p)
            .filter(|&i| i != j)
            .map(|i| sxx[(i, j)].abs() * half_widths[i] * half_widths[j])
            .sum::<f64>())
}

/// Half-widths of the Rashomon ellipsoid's bounding box:
/// `sqrt(diag(G^{-1}) * slack)`.
pub fn rashomon_half_widths(spec: &RidgeSpec) -> Result<DVector<f64>> {
    Ok(crate::linear::rashomon_ellipsoid_linear(spec)?.bounding_half_widths())
}

/// Cloud obtained by pushing Rashomon members through the reliance map.
///
/// Members are `b* + sqrt(slack) L^{-T} u` with `G = L L^T`; `u` is uniform on
/// the unit sphere for the first `n_boundary` points and uniform in the ball for
/// the remaining `n_interior`. Point `i` draws from its own stream.
pub fn vic_forward_map(spec: &RidgeSpec, n_boundary: usize, n_interior: usize, seed: u64) -> Result<VicCloud> {
    let p = spec.p();
    let g = spec.gram();
    let chol = linalg::cholesky_lower(&g, 0.0, "Sigma_xx + cI")?;
    let lt_inv = chol
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Singular("Cholesky factor".into()))?;
    let beta_star = best_ridge(&spec.cov, spec.c)?;
    let slack = rashomon_slack(spec, &beta_star)?;
    let scale = slack.sqrt();

    let member = |u: DVector<f64>| -> Result<ReliancePoint> {
        let beta = &beta_star + &lt_inv * u * scale;
        let loss = ridge_loss(&beta, spec)?;
        let mr = mr_linear_vector(&beta, &spec.cov)?;
        Ok(ReliancePoint {
            beta: beta.iter().copied().collect(),
            mr: MRVector {
                values: mr.iter().copied().collect(),
                variant: Variant::Diff,
                model_loss: loss,
            },
            loss,
        })
    };
    let mut points = Vec::with_capacity(n_boundary + n_interior);
    for i in 0..n_boundary {
        points.push(member(sampling::unit_sphere(
            &mut sampling::candidate_rng(seed, 0, i as u32),
            p,
        ))?);
    }
    for i in 0..n_interior {
        points.push(member(sampling::unit_ball(
            &mut sampling::candidate_rng(seed, 1, i as u32),
            p,
        ))?);
    }
    let names: Vec<String> = (1..=p).map(|k| format!("x{k}")).collect();
    let provenance = Provenance {
        model_class: ModelClass::Linear,
        variant: Variant::Diff,
        epsilon: spec.epsilon,
        c: Some(spec.c),
        seed: Some(seed),
        best_loss: spec.best_loss()?,
        threshold: spec.threshold()?,
        param_names: names.iter().map(|n| format!("beta_{n}")).collect(),
        feature_names: names,
        settings: serde_json::json!({
            "n_boundary": n_boundary,
            "n_interior": n_interior,
            "benchmark_loss": spec.benchmark_loss,
        }),
    };
    VicCloud::new(points, provenance)
}

/// Result of solving `MR(b) = mr` by Newton's method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipDiagnostic {
    pub converged: bool,
    pub iterations: usize,
    pub beta: Vec<f64>,
    /// `max_j |MR_j(b) - mr_j|` at the final iterate.
    pub residual: f64,
    /// Whether the recovered coefficients lie in the Rashomon set.
    pub member: bool,
}

/// Searches for a preimage of `mr` starting from the linearized inverse around
/// `beta_bar`. A preimage need not exist or be unique; non-convergence is
/// reported rather than treated as an error.
pub fn vic_membership_newton(
    mr: &DVector<f64>,
    spec: &RidgeSpec,
    beta_bar: &DVector<f64>,
) -> Result<MembershipDiagnostic> {
    const MAX_ITER: usize = 50;
    let jac = jacobian_mr(beta_bar, &spec.cov)?;
    let mut beta = mr_inverse_approx(mr, &jac)?;
    let tol = 1e-12 * mr.amax().max(1e-12);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < MAX_ITER {
        let r = mr_linear_vector(&beta, &spec.cov)? - mr;
        residual = r.amax();
        if residual <= tol {
            break;
        }
        let j = jacobian_mr(&beta, &spec.cov)?;
        match linalg::solve(&j.matrix, &r, "reliance Jacobian") {
            Ok(step) => beta -= step,
            Err(_) => break,
        }
        iterations += 1;
    }
    let converged = residual <= tol;
    let member = converged && crate::linear::contains_linear(&beta, spec)?;
    Ok(MembershipDiagnostic {
        converged,
        iterations,
        beta: beta.iter().copied().collect(),
        residual,
        member,
    })
}

/// Largest relative radial mismatch `| sqrt(q(mr)) - 1 |` between the
/// approximating ellipsoid and `n` forward-mapped boundary points.
pub fn approximation_gap(spec: &RidgeSpec, beta_bar: &DVector<f64>, n: usize, seed: u64) -> Result<f64> {
    let approx = vic_ellipsoid_approx(beta_bar, spec)?;
    let cloud = vic_forward_map(spec, n, 0, seed)?;
    Ok(cloud
        .points()
        .iter()
        .map(|pt| (approx.quadratic_form(&DVector::from_column_slice(&pt.mr.values)).sqrt() - 1.0).abs())
        .fold(0.0, f64::max))
}
