//! Roll/pitch estimation with an adaptive complementary filter.
//!
//! Roll and pitch blend integrated gyro rates with the gravity direction
//! sensed by the accelerometer. The blending weight `alpha` rises from
//! `alpha_base` towards pure gyro integration as the accelerometer norm
//! departs from `g`. Yaw is integrated from the z gyro only and drifts.
//!
//! Sign convention: a level, resting sensor reads `(0, 0, +g)`.

use std::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttitudeError {
    #[error("accelerometer vector has zero norm; no gravity reference")]
    ZeroAccel,
    #[error("non-monotone timestamp: {current} s follows {previous} s")]
    NonMonotone { previous: f64, current: f64 },
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("bias calibration needs {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("invalid filter config: {0}")]
    InvalidConfig(&'static str),
}

/// One timestamped IMU reading in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Seconds on the shared clock.
    pub timestamp: f64,
    /// Specific force, m/s².
    pub accel: Vec3,
    /// Angular rate, rad/s.
    pub gyro: Vec3,
}

impl ImuSample {
    pub fn new(timestamp: f64, accel: Vec3, gyro: Vec3) -> Self {
        Self { timestamp, accel, gyro }
    }

    pub fn is_finite(&self) -> bool {
        self.timestamp.is_finite()
            && self.accel.iter().all(|v| v.is_finite())
            && self.gyro.iter().all(|v| v.is_finite())
    }
}

/// Z-Y-X Euler angles in radians.
///
/// Roll and yaw live in `(-π, π]`, pitch in `[-π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Attitude {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Attitude {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_degrees(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(roll.to_radians(), pitch.to_radians(), yaw.to_radians())
    }

    /// Wraps roll and yaw into `(-π, π]` and clamps pitch to `[-π/2, π/2]`.
    pub fn normalized(self) -> Self {
        Self {
            roll: wrap_angle(self.roll),
            pitch: self.pitch.clamp(-FRAC_PI_2, FRAC_PI_2),
            yaw: wrap_angle(self.yaw),
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.roll > -PI
            && self.roll <= PI
            && (-FRAC_PI_2..=FRAC_PI_2).contains(&self.pitch)
            && self.yaw > -PI
            && self.yaw <= PI
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped -= 2.0 * PI;
    }
    // rem_euclid can land exactly on -π after the shift for inputs near odd
    // multiples of π.
    if wrapped <= -PI {
        wrapped += 2.0 * PI;
    }
    wrapped
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Steady-state gyro weight.
    pub alpha_base: f64,
    /// Accelerometer norm deviation (m/s²) at which the filter switches to
    /// pure gyro integration.
    pub delta_a_threshold: f64,
    /// Local gravity, m/s².
    pub gravity: f64,
    /// Idle samples averaged for the gyro bias.
    pub bias_calibration_count: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            alpha_base: 0.9,
            delta_a_threshold: 1.0,
            gravity: 9.80665,
            bias_calibration_count: 1000,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), AttitudeError> {
        if !(0.0..=1.0).contains(&self.alpha_base) {
            return Err(AttitudeError::InvalidConfig("alpha_base must be within [0, 1]"));
        }
        if !(self.delta_a_threshold > 0.0 && self.delta_a_threshold.is_finite()) {
            return Err(AttitudeError::InvalidConfig("delta_a_threshold must be positive"));
        }
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            return Err(AttitudeError::InvalidConfig("gravity must be positive"));
        }
        if self.bias_calibration_count == 0 {
            return Err(AttitudeError::InvalidConfig("bias_calibration_count must be at least 1"));
        }
        Ok(())
    }
}

/// Recurrent filter state. Passed by value through [`filter_step`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterState {
    pub attitude: Attitude,
    /// Timestamp of the last consumed sample; `None` before the first step.
    pub last_timestamp: Option<f64>,
    /// Subtracted from every gyro reading, rad/s.
    pub gyro_bias: Vec3,
    /// Weight used by the last step.
    pub last_alpha: f64,
}

impl FilterState {
    pub fn with_bias(gyro_bias: Vec3) -> Self {
        Self { gyro_bias, ..Self::default() }
    }

    pub fn is_seeded(&self) -> bool {
        self.last_timestamp.is_some()
    }
}

/// Roll and pitch implied by the gravity direction in `accel`.
pub fn accel_angles(accel: &Vec3) -> Result<(f64, f64), AttitudeError> {
    if !accel.iter().all(|v| v.is_finite()) {
        return Err(AttitudeError::NonFinite);
    }
    if accel.norm_squared() == 0.0 {
        return Err(AttitudeError::ZeroAccel);
    }
    let roll = accel.y.atan2(accel.z);
    let pitch = (-accel.x).atan2(accel.y.hypot(accel.z));
    Ok((roll, pitch))
}

/// Gyro weight for a sample, in `[alpha_base, 1]`.
pub fn adaptive_alpha(accel: &Vec3, cfg: &FilterConfig) -> f64 {
    let delta_a = (accel.norm() - cfg.gravity).abs();
    (cfg.alpha_base + (1.0 - cfg.alpha_base) * delta_a / cfg.delta_a_threshold).min(1.0)
}

/// Advances the filter by one IMU sample.
///
/// The first call seeds roll/pitch from the accelerometer and keeps the
/// state's yaw. Later calls integrate `gyro - gyro_bias` over the timestamp
/// difference and blend with the accelerometer angles.
pub fn filter_step(
    state: &FilterState,
    sample: &ImuSample,
    cfg: &FilterConfig,
) -> Result<FilterState, AttitudeError> {
    if !sample.is_finite() {
        return Err(AttitudeError::NonFinite);
    }
    let (roll_acc, pitch_acc) = accel_angles(&sample.accel)?;
    let alpha = adaptive_alpha(&sample.accel, cfg);

    let Some(previous) = state.last_timestamp else {
        let attitude = Attitude::new(roll_acc, pitch_acc, state.attitude.yaw).normalized();
        return Ok(FilterState {
            attitude,
            last_timestamp: Some(sample.timestamp),
            gyro_bias: state.gyro_bias,
            last_alpha: alpha,
        });
    };
    if sample.timestamp < previous {
        return Err(AttitudeError::NonMonotone { previous, current: sample.timestamp });
    }

    let dt = sample.timestamp - previous;
    let rate = sample.gyro - state.gyro_bias;
    let prev = state.attitude;
    let roll = alpha * (prev.roll + rate.x * dt) + (1.0 - alpha) * roll_acc;
    let pitch = alpha * (prev.pitch + rate.y * dt) + (1.0 - alpha) * pitch_acc;
    let yaw = prev.yaw + rate.z * dt;

    Ok(FilterState {
        attitude: Attitude::new(roll, pitch, yaw).normalized(),
        last_timestamp: Some(sample.timestamp),
        gyro_bias: state.gyro_bias,
        last_alpha: alpha,
    })
}

/// Mean gyro vector over an idle segment.
///
/// Requires at least `required` samples; extra samples are included in the
/// mean.
pub fn calibrate_bias(samples: &[ImuSample], required: usize) -> Result<Vec3, AttitudeError> {
    if samples.len() < required.max(1) {
        return Err(AttitudeError::TooFewSamples { required: required.max(1), got: samples.len() });
    }
    let sum = samples.iter().fold(Vec3::zeros(), |acc, s| acc + s.gyro);
    Ok(sum / samples.len() as f64)
}

/// Replaces the yaw estimate, e.g. from an external heading command.
pub fn set_yaw(state: &FilterState, yaw: f64) -> FilterState {
    let mut next = *state;
    next.attitude.yaw = wrap_angle(yaw);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const G: f64 = 9.80665;

    fn level(t: f64) -> ImuSample {
        ImuSample::new(t, Vec3::new(0.0, 0.0, 9.81), Vec3::zeros())
    }

    fn seeded(roll: f64) -> FilterState {
        FilterState {
            attitude: Attitude::new(roll, 0.0, 0.0),
            last_timestamp: Some(0.0),
            ..FilterState::default()
        }
    }

    #[test]
    #[allow(clippy::approx_constant)] // rounded expected values
    fn accel_angles_examples() {
        assert_eq!(accel_angles(&Vec3::new(0.0, 0.0, 9.81)).unwrap(), (0.0, 0.0));

        let (r, p) = accel_angles(&Vec3::new(0.0, 6.9367, 6.9367)).unwrap();
        assert_abs_diff_eq!(r, 0.7854, epsilon = 1e-4);
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-15);

        let (r, p) = accel_angles(&Vec3::new(-9.81, 0.0, 0.0)).unwrap();
        assert_eq!(r, 0.0);
        assert_abs_diff_eq!(p, 1.5708, epsilon = 1e-4);
    }

    #[test]
    fn accel_angles_rejects_zero() {
        assert_eq!(accel_angles(&Vec3::zeros()), Err(AttitudeError::ZeroAccel));
    }

    #[test]
    fn alpha_examples() {
        let cfg = FilterConfig::default();
        assert_eq!(adaptive_alpha(&Vec3::new(0.0, 0.0, G), &cfg), 0.9);
        assert_abs_diff_eq!(adaptive_alpha(&Vec3::new(0.0, 0.0, G + 0.5), &cfg), 0.95, epsilon = 1e-12);
        assert_eq!(adaptive_alpha(&Vec3::new(0.0, 0.0, G + 2.0), &cfg), 1.0);
        // Deviation below g counts the same.
        assert_abs_diff_eq!(adaptive_alpha(&Vec3::new(0.0, 0.0, G - 0.5), &cfg), 0.95, epsilon = 1e-12);
    }

    #[test]
    fn level_is_fixed_point() {
        let cfg = FilterConfig::default();
        let mut state = seeded(0.0);
        for i in 1..50 {
            state = filter_step(&state, &level(i as f64 * 0.013), &cfg).unwrap();
            assert_eq!(state.attitude.roll, 0.0);
            assert_eq!(state.attitude.pitch, 0.0);
        }
    }

    #[test]
    fn one_step_blend() {
        let cfg = FilterConfig { gravity: 9.81, ..FilterConfig::default() };
        let state = seeded(10f64.to_radians());
        let next = filter_step(&state, &level(0.01), &cfg).unwrap();
        assert_abs_diff_eq!(next.attitude.roll.to_degrees(), 9.0, epsilon = 1e-12);
        assert_eq!(next.last_alpha, 0.9);
    }

    #[test]
    fn pure_integration_branch() {
        let cfg = FilterConfig::default();
        let state = seeded(0.0);
        let sample = ImuSample::new(0.01, Vec3::new(0.0, 0.0, G + 2.0), Vec3::new(0.1, 0.0, 0.0));
        let next = filter_step(&state, &sample, &cfg).unwrap();
        assert_eq!(next.last_alpha, 1.0);
        assert_abs_diff_eq!(next.attitude.roll, 0.001, epsilon = 1e-15);
    }

    #[test]
    fn first_step_seeds_from_accel() {
        let cfg = FilterConfig::default();
        let sample = ImuSample::new(5.0, Vec3::new(0.0, 6.9367, 6.9367), Vec3::new(3.0, 3.0, 3.0));
        let next = filter_step(&FilterState::default(), &sample, &cfg).unwrap();
        assert_abs_diff_eq!(next.attitude.roll, std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
        assert_eq!(next.attitude.yaw, 0.0);
        assert_eq!(next.last_timestamp, Some(5.0));
    }

    #[test]
    fn yaw_integrates_z_minus_bias() {
        let cfg = FilterConfig::default();
        let mut state = seeded(0.0);
        state.gyro_bias = Vec3::new(0.0, 0.0, 0.05);
        let sample = ImuSample::new(0.5, Vec3::new(0.0, 0.0, G), Vec3::new(0.0, 0.0, 0.25));
        let next = filter_step(&state, &sample, &cfg).unwrap();
        assert_abs_diff_eq!(next.attitude.yaw, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_samples() {
        let cfg = FilterConfig::default();
        let state = seeded(0.0);
        let back = ImuSample::new(-0.1, Vec3::new(0.0, 0.0, G), Vec3::zeros());
        assert!(matches!(filter_step(&state, &back, &cfg), Err(AttitudeError::NonMonotone { .. })));
        let nan = ImuSample::new(0.1, Vec3::new(0.0, f64::NAN, G), Vec3::zeros());
        assert_eq!(filter_step(&state, &nan, &cfg), Err(AttitudeError::NonFinite));
    }

    #[test]
    fn bias_examples() {
        let constant: Vec<_> = (0..1000)
            .map(|i| ImuSample::new(i as f64, Vec3::zeros(), Vec3::new(0.01, -0.02, 0.005)))
            .collect();
        let b = calibrate_bias(&constant, 1000).unwrap();
        assert_abs_diff_eq!(b, Vec3::new(0.01, -0.02, 0.005), epsilon = 1e-15);

        let alternating: Vec<_> = (0..1000)
            .map(|i| {
                let x = if i % 2 == 0 { 0.01 } else { -0.01 };
                ImuSample::new(i as f64, Vec3::zeros(), Vec3::new(x, 0.0, 0.0))
            })
            .collect();
        assert_abs_diff_eq!(calibrate_bias(&alternating, 1000).unwrap(), Vec3::zeros(), epsilon = 1e-15);

        assert_eq!(
            calibrate_bias(&constant[..999], 1000),
            Err(AttitudeError::TooFewSamples { required: 1000, got: 999 })
        );
    }

    #[test]
    fn bias_of_noise_matches_independent_mean() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 0.001).unwrap();
        let samples: Vec<_> = (0..1000)
            .map(|i| {
                let g = Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
                ImuSample::new(i as f64 * 0.01, Vec3::zeros(), g)
            })
            .collect();
        // Independent oracle: per-axis Kahan summation over plain slices.
        for axis in 0..3 {
            let (mut sum, mut c) = (0.0f64, 0.0f64);
            for s in &samples {
                let y = s.gyro[axis] - c;
                let t = sum + y;
                c = (t - sum) - y;
                sum = t;
            }
            let expected = sum / 1000.0;
            assert_abs_diff_eq!(calibrate_bias(&samples, 1000).unwrap()[axis], expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn set_yaw_examples() {
        let state = FilterState {
            attitude: Attitude::new(0.123, -0.456, 1.0),
            ..FilterState::default()
        };
        assert_eq!(set_yaw(&state, 0.0).attitude.yaw, 0.0);
        assert_abs_diff_eq!(set_yaw(&state, 3.0 * PI).attitude.yaw, PI, epsilon = 1e-12);
        let moved = set_yaw(&state, 2.0);
        assert_eq!(moved.attitude.roll.to_bits(), state.attitude.roll.to_bits());
        assert_eq!(moved.attitude.pitch.to_bits(), state.attitude.pitch.to_bits());
    }

    #[test]
    fn wrap_edges() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(5.0 * PI / 2.0), PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-3.0 * PI / 2.0), PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig::default().validate().is_ok());
        assert!(FilterConfig { alpha_base: 1.1, ..Default::default() }.validate().is_err());
        assert!(FilterConfig { delta_a_threshold: 0.0, ..Default::default() }.validate().is_err());
        assert!(FilterConfig { bias_calibration_count: 0, ..Default::default() }.validate().is_err());
    }
}
