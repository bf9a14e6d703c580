//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix with a deterministic layout:
/// eigenvalues ascending, each eigenvector's first nonzero component positive,
/// and (near-)repeated eigenvalues ordered by the position of the vector's
/// dominant component.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);

    let mut cols: Vec<(f64, DVector<f64>)> = (0..n)
        .map(|k| {
            let mut v = eig.eigenvectors.column(k).into_owned();
            canonical_sign(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    cols.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= 1e-10 * scale {
            dominant(&a.1).cmp(&dominant(&b.1))
        } else {
            a.0.total_cmp(&b.0)
        }
    });

    let values = DVector::from_iterator(n, cols.iter().map(|c| c.0));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, (_, v)) in cols.iter().enumerate() {
        vectors.set_column(k, v);
    }
    (values, vectors)
}

fn canonical_sign(v: &mut DVector<f64>) {
    let tol = 1e-12 * v.amax().max(1e-300);
    if let Some(first) = v.iter().find(|x| x.abs() > tol) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

fn dominant(v: &DVector<f64>) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, -1.0),
            |best, (i, x)| if x.abs() > best.1 + 1e-12 { (i, x.abs()) } else { best },
        )
        .0
}

pub fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Lower Cholesky factor, failing unless the smallest eigenvalue exceeds `tol`.
pub fn cholesky_lower(m: &DMatrix<f64>, tol: f64, what: &str) -> Result<DMatrix<f64>> {
    let min_eig = smallest_eigenvalue(m);
    if !(min_eig > tol) {
        return Err(Error::NotPositiveDefinite(format!(
            "{what}: smallest eigenvalue {min_eig:e}"
        )));
    }
    nalgebra::Cholesky::new(m.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// Solves `m x = b` by LU, rejecting singular or numerically singular systems.
pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let inv = inverse(m, what)?;
    Ok(inv * b)
}

pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let cond = condition_number(m);
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::Singular(format!("{what} (condition number {cond:e})")));
    }
    m.clone().try_inverse().ok_or_else(|| Error::Singular(what.to_string()))
}

/// 2-norm condition number from singular values; infinite if singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || max == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= tol * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_layout_is_ascending_with_positive_leading_components() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let (vals, vecs) = sorted_eigen(&m);
        assert!((vals[0] - 0.8).abs() < 1e-12 && (vals[1] - 1.2).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[(0, 0)] - s).abs() < 1e-12 && (vecs[(1, 0)] + s).abs() < 1e-12);
        assert!((vecs[(0, 1)] - s).abs() < 1e-12 && (vecs[(1, 1)] - s).abs() < 1e-12);
    }

    #[test]
    fn repeated_eigenvalues_give_identity_rotation() {
        let (_, vecs) = sorted_eigen(&DMatrix::identity(3, 3));
        assert_eq!(vecs, DMatrix::identity(3, 3));
    }

    #[test]
    fn singular_inverse_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(inverse(&m, "m"), Err(Error::Singular(_))));
    }
}
