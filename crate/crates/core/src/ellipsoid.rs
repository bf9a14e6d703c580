use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// `{x : |rotation^T (x - center) ./ radii|^2 <= 1}`; columns of `rotation`
/// are the axis directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    center: DVector<f64>,
    radii: DVector<f64>,
    rotation: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct EllipsoidJson {
    center: Vec<f64>,
    radii: Vec<f64>,
    /// row-major
    rotation: Vec<Vec<f64>>,
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, radii: DVector<f64>, rotation: DMatrix<f64>) -> Result<Self> {
        let q = center.len();
        check_len(q, radii.len())?;
        check_len(q, rotation.nrows())?;
        check_len(q, rotation.ncols())?;
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::Degenerate(format!("ellipsoid radius {r}")));
        }
        let gram = rotation.transpose() * &rotation;
        if (gram - DMatrix::identity(q, q)).amax() > 1e-8 {
            return Err(Error::Data("ellipsoid rotation is not orthonormal".into()));
        }
        Ok(Ellipsoid {
            center,
            radii,
            rotation,
        })
    }

    pub fn axis_aligned(center: DVector<f64>, radii: DVector<f64>) -> Result<Self> {
        let q = center.len();
        Ellipsoid::new(center, radii, DMatrix::identity(q, q))
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn radii(&self) -> &DVector<f64> {
        &self.radii
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    /// Coordinates of `x` in the unit-ball frame.
    pub fn to_unit(&self, x: &DVector<f64>) -> DVector<f64> {
        let local = self.rotation.transpose() * (x - &self.center);
        local.component_div(&self.radii)
    }

    pub fn from_unit(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.rotation * u.component_mul(&self.radii)
    }

    /// `|rotation^T (x - center) ./ radii|^2`; at most 1 inside.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        self.to_unit(x).norm_squared()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.quadratic_form(x) <= 1.0
    }

    /// Same center and axes, radii times `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ellipsoid::new(self.center.clone(), &self.radii * factor, self.rotation.clone())
    }

    /// Half-widths of the axis-aligned bounding box.
    pub fn bounding_half_widths(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| {
            (0..self.dim())
                .map(|k| (self.rotation[(i, k)] * self.radii[k]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let j = EllipsoidJson {
            center: self.center.iter().copied().collect(),
            radii: self.radii.iter().copied().collect(),
            rotation: self.rotation.row_iter().map(|r| r.iter().copied().collect()).collect(),
        };
        serde_json::to_value(j).expect("plain numeric struct")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: EllipsoidJson =
            serde_json::from_value(v.clone()).map_err(|e| Error::config("ellipsoid", e.to_string()))?;
        let q = j.center.len();
        check_len(q, j.rotation.len())?;
        for row in &j.rotation {
            check_len(q, row.len())?;
        }
        Ellipsoid::new(
            DVector::from_vec(j.center),
            DVector::from_vec(j.radii),
            DMatrix::from_fn(q, q, |r, c| j.rotation[r][c]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rotated() -> Ellipsoid {
        let (s, c) = (0.6f64, 0.8f64);
        Ellipsoid::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DVector::from_vec(vec![3.0, 0.5]),
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        let z = DVector::zeros(2);
        assert!(Ellipsoid::axis_aligned(z.clone(), DVector::from_vec(vec![1.0, 0.0])).is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(Ellipsoid::new(z, DVector::from_vec(vec![1.0, 1.0]), skew).is_err());
    }

    #[test]
    fn bounding_box_of_rotated_ellipse() {
        let e = rotated();
        let hw = e.bounding_half_widths();
        let expect0 = ((0.8f64 * 3.0).powi(2) + (0.6f64 * 0.5).powi(2)).sqrt();
        assert!((hw[0] - expect0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let e = rotated();
        assert_eq!(Ellipsoid::from_json(&e.to_json()).unwrap(), e);
    }

    proptest! {
        #[test]
        fn unit_frame_round_trip(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let e = rotated();
            let x = DVector::from_vec(vec![a, b]);
            let back = e.from_unit(&e.to_unit(&x));
            prop_assert!((back - x).amax() < 1e-12);
        }
    }
}
