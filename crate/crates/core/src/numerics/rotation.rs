use nalgebra::Vector3;

use crate::{Error, Result};

const AXIS_TOL: f64 = 1e-12;

/// Rotates `v` by `angle` radians about the unit vector `axis` (right-hand rule).
pub fn rotate_about_axis(
    v: &Vector3<f64>,
    axis: &Vector3<f64>,
    angle: f64,
) -> Result<Vector3<f64>> {
    let norm = axis.norm();
    if (norm - 1.0).abs() > AXIS_TOL {
        return Err(Error::Argument(format!(
            "rotation axis has norm {norm}, expected 1"
        )));
    }
    let (s, c) = angle.sin_cos();
    Ok(v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Unit, UnitQuaternion};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    /// Rotation matrix exp(angle · [axis]ₓ) assembled from the cross-product matrix.
    fn rodrigues_matrix(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
        let k = Matrix3::new(
            0.0, -axis.z, axis.y, axis.z, 0.0, -axis.x, -axis.y, axis.x, 0.0,
        );
        Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = rotate_about_axis(&Vector3::x(), &Vector3::z(), FRAC_PI_2).unwrap();
        assert!((r - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn zero_angle_is_identity() {
        let v = Vector3::new(0.3, -1.7, 2.2);
        let axis = Vector3::new(1.0, 2.0, -0.5).normalize();
        assert_eq!(rotate_about_axis(&v, &axis, 0.0).unwrap(), v);
    }

    #[test]
    fn matches_matrix_oracle() {
        let v = Vector3::new(1.0, 2.0, 3.0);
        let want = rodrigues_matrix(&Vector3::y(), 0.7) * v;
        let got = rotate_about_axis(&v, &Vector3::y(), 0.7).unwrap();
        assert!((got - want).norm() < 1e-14);
        let q = UnitQuaternion::from_axis_angle(&Unit::new_unchecked(Vector3::y()), 0.7);
        assert!((got - q * v).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_unit_axis() {
        assert!(rotate_about_axis(&Vector3::x(), &Vector3::new(0.0, 0.0, 1.1), 0.3).is_err());
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn preserves_norm_and_composes(v in vec3(), a in vec3(), x in -7.0..7.0f64, y in -7.0..7.0f64) {
            prop_assume!(a.norm() > 1e-3);
            let axis = a.normalize();
            let rx = rotate_about_axis(&v, &axis, x).unwrap();
            prop_assert!((rx.norm() - v.norm()).abs() < 1e-12);
            let rxy = rotate_about_axis(&rx, &axis, y).unwrap();
            let direct = rotate_about_axis(&v, &axis, x + y).unwrap();
            prop_assert!((rxy - direct).norm() < 1e-10);
        }
    }
}
