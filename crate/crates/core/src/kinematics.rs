//! Body-to-navigation rotation and lever-arm transformation.
//!
//! Frames are right-handed with z up. At zero attitude the body frame
//! coincides with the navigation frame.

use crate::attitude::Attitude;
use crate::{Mat3, Vec3};

/// Rigid offsets measured from the IMU center, body frame, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverArms {
    pub imu_to_prism_b: Vec3,
    pub imu_to_poi_b: Vec3,
}

impl LeverArms {
    pub fn new(imu_to_prism_b: Vec3, imu_to_poi_b: Vec3) -> Self {
        Self { imu_to_prism_b, imu_to_poi_b }
    }

    pub fn is_finite(&self) -> bool {
        self.imu_to_prism_b.iter().chain(self.imu_to_poi_b.iter()).all(|v| v.is_finite())
    }
}

impl Default for LeverArms {
    /// Prism 75.6 mm above the IMU, pole tip 992.0 mm below it.
    fn default() -> Self {
        Self::new(Vec3::new(0.0, 0.0, 0.0756), Vec3::new(0.0, 0.0, -0.9920))
    }
}

pub fn rot_x(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `R_z(yaw) · R_y(pitch) · R_x(roll)`, written out in closed form.
pub fn rotation_b_to_n(att: &Attitude) -> Mat3 {
    let (sr, cr) = att.roll.sin_cos();
    let (sp, cp) = att.pitch.sin_cos();
    let (sy, cy) = att.yaw.sin_cos();
    Mat3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// Prism center to POI in the body frame.
pub fn prism_to_poi_body(arms: &LeverArms) -> Vec3 {
    arms.imu_to_poi_b - arms.imu_to_prism_b
}

pub fn rotate_lever(rotation: &Mat3, lever_b: &Vec3) -> Vec3 {
    rotation * lever_b
}

/// Tilt-compensated POI given the prism position in the navigation frame.
pub fn poi_position(prism_nav: &Vec3, att: &Attitude, arms: &LeverArms) -> Vec3 {
    prism_nav + rotate_lever(&rotation_b_to_n(att), &prism_to_poi_body(arms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_attitude_is_identity() {
        let r = rotation_b_to_n(&Attitude::default());
        assert_abs_diff_eq!(r, Mat3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn yaw_quarter_turn() {
        let r = rotation_b_to_n(&Attitude::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        assert_abs_diff_eq!(r * Vec3::x(), Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn closed_form_matches_elementary_product() {
        let att = Attitude::from_degrees(30.0, 20.0, 10.0);
        let (sr, cr) = (30f64.to_radians().sin(), 30f64.to_radians().cos());
        let (sp, cp) = (20f64.to_radians().sin(), 20f64.to_radians().cos());
        let (sy, cy) = (10f64.to_radians().sin(), 10f64.to_radians().cos());
        let rx = [[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]];
        let ry = [[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]];
        let rz = [[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]];
        let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
            let mut out = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                }
            }
            out
        };
        let expected = mul(mul(rz, ry), rx);
        let r = rotation_b_to_n(&att);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(r[(i, j)], expected[i][j], epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(r, rot_z(att.yaw) * rot_y(att.pitch) * rot_x(att.roll), epsilon = 1e-15);
    }

    #[test]
    fn orthonormal_on_grid() {
        let grid: Vec<f64> = (-4..=4).map(|k| (k as f64 * 15.0).to_radians()).collect();
        for &r in &grid {
            for &p in &grid {
                for &y in &grid {
                    let m = rotation_b_to_n(&Attitude::new(r, p, y));
                    assert_abs_diff_eq!(m.transpose() * m, Mat3::identity(), epsilon = 1e-12);
                    assert_abs_diff_eq!(m.determinant(), 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn lever_examples() {
        let arms = LeverArms::default();
        let l = prism_to_poi_body(&arms);
        assert_abs_diff_eq!(l, Vec3::new(0.0, 0.0, -1.0676), epsilon = 1e-15);
        assert_abs_diff_eq!(l.norm(), 1.0676, epsilon = 1e-15);

        let same = LeverArms::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(prism_to_poi_body(&same), Vec3::zeros());

        let arms = LeverArms::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 6.0, 8.0));
        assert_eq!(prism_to_poi_body(&arms), Vec3::new(3.0, 4.0, 5.0));
    }

    #[test]
    fn rotate_lever_sixty_degree_roll() {
        // R_x(60°)·(0, 0, -1.0676) = (0, 1.0676·sin60°, -1.0676·cos60°)
        let r = rotation_b_to_n(&Attitude::from_degrees(60.0, 0.0, 0.0));
        let out = rotate_lever(&r, &Vec3::new(0.0, 0.0, -1.0676));
        assert_abs_diff_eq!(out, Vec3::new(0.0, 0.92456, -0.53380), epsilon = 1e-5);
        assert_eq!(rotate_lever(&Mat3::identity(), &Vec3::new(0.1, 0.2, 0.3)), Vec3::new(0.1, 0.2, 0.3));
    }

    #[test]
    fn poi_examples() {
        let arms = LeverArms::default();
        let p = poi_position(&Vec3::new(1.0, 2.0, 3.0), &Attitude::default(), &arms);
        assert_abs_diff_eq!(p, Vec3::new(1.0, 2.0, 1.9324), epsilon = 1e-12);

        let p = poi_position(&Vec3::zeros(), &Attitude::from_degrees(60.0, 0.0, 0.0), &arms);
        assert_abs_diff_eq!(p, Vec3::new(0.0, 0.92456, -0.53380), epsilon = 1e-5);

        let zero = LeverArms::new(Vec3::new(0.5, 0.5, 0.5), Vec3::new(0.5, 0.5, 0.5));
        let prism = Vec3::new(3.0, -1.0, 2.0);
        assert_eq!(poi_position(&prism, &Attitude::from_degrees(40.0, -20.0, 170.0), &zero), prism);
    }

    fn angle() -> impl Strategy<Value = f64> {
        -std::f64::consts::PI..std::f64::consts::PI
    }

    proptest! {
        #[test]
        fn rotation_is_isometry(r in angle(), p in -1.5f64..1.5, y in angle(),
                                x in -5.0f64..5.0, v in -5.0f64..5.0, z in -5.0f64..5.0) {
            let m = rotation_b_to_n(&Attitude::new(r, p, y));
            let vec = Vec3::new(x, v, z);
            let out = rotate_lever(&m, &vec);
            prop_assert!((out.norm() - vec.norm()).abs() <= 1e-12 * vec.norm().max(1.0));
            prop_assert!((m.transpose() * out - vec).amax() <= 1e-12);
        }

        #[test]
        fn lever_length_is_attitude_invariant(r in angle(), p in -1.5f64..1.5, y in angle(),
                                              lx in -1.0f64..1.0, ly in -1.0f64..1.0, lz in -2.0f64..2.0) {
            let arms = LeverArms::new(Vec3::new(0.0, 0.0, 0.0756), Vec3::new(lx, ly, lz));
            let prism = Vec3::new(2.0, 1.0, -0.5);
            let poi = poi_position(&prism, &Attitude::new(r, p, y), &arms);
            prop_assert!(((poi - prism).norm() - prism_to_poi_body(&arms).norm()).abs() <= 1e-12);
        }
    }
}
