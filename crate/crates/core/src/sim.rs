//! Ground-truth scenarios of a pole pivoting about a fixed ground point, with
//! synthetic IMU and RTS streams.
//!
//! The POI (pole tip) stays fixed while roll, pitch and yaw follow analytic
//! profiles. Prism and IMU positions follow by rotating the body-frame lever
//! arms about the POI. Every stream is a pure function of the config and its
//! seed.
//!
//! The IMU accelerometer reports specific force, `Rᵀ·(a_imu + (0, 0, g))`,
//! where `a_imu` is the analytic acceleration of the IMU point. Gyro rates
//! are body rates obtained from the Euler-angle rates.

use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::attitude::{Attitude, ImuSample};
use crate::codec::CodecError;
use crate::geodesy::{polar_to_cartesian, RtsObservation};
use crate::kinematics::{prism_to_poi_body, rotation_b_to_n, LeverArms};
use crate::Vec3;

/// Largest roll or pitch excursion a scenario may request, degrees.
pub const MAX_TILT_DEG: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("infeasible geometry at t = {timestamp} s: prism is vertically in line with the station")]
    InfeasibleGeometry { timestamp: f64 },
}

/// One angle as a function of time since motion start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleProfile {
    /// `amplitude · sin(2π·frequency·τ + phase)`, radians.
    Sinusoid { amplitude: f64, frequency: f64, phase: f64 },
    /// `initial + rate·τ`, radians and rad/s.
    Linear { initial: f64, rate: f64 },
}

impl AngleProfile {
    pub const ZERO: AngleProfile = AngleProfile::Linear { initial: 0.0, rate: 0.0 };

    pub fn sinusoid_deg(amplitude_deg: f64, frequency_hz: f64, phase_deg: f64) -> Self {
        AngleProfile::Sinusoid {
            amplitude: amplitude_deg.to_radians(),
            frequency: frequency_hz,
            phase: phase_deg.to_radians(),
        }
    }

    pub fn value(&self, tau: f64) -> f64 {
        match *self {
            AngleProfile::Sinusoid { amplitude, frequency, phase } => {
                amplitude * (2.0 * std::f64::consts::PI * frequency * tau + phase).sin()
            }
            AngleProfile::Linear { initial, rate } => initial + rate * tau,
        }
    }

    pub fn rate(&self, tau: f64) -> f64 {
        match *self {
            AngleProfile::Sinusoid { amplitude, frequency, phase } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                amplitude * w * (w * tau + phase).cos()
            }
            AngleProfile::Linear { rate, .. } => rate,
        }
    }

    pub fn accel(&self, tau: f64) -> f64 {
        match *self {
            AngleProfile::Sinusoid { amplitude, frequency, phase } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                -amplitude * w * w * (w * tau + phase).sin()
            }
            AngleProfile::Linear { .. } => 0.0,
        }
    }

    /// Largest `|value|` over `τ ∈ [0, span]`.
    fn max_abs(&self, span: f64) -> f64 {
        match *self {
            AngleProfile::Sinusoid { amplitude, .. } => amplitude.abs(),
            AngleProfile::Linear { initial, rate } => initial.abs().max((initial + rate * span).abs()),
        }
    }
}

/// Euler-angle trajectory. Angles are frozen at their `τ = 0` values before
/// `start`, so the leading segment is static.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltProfile {
    pub roll: AngleProfile,
    pub pitch: AngleProfile,
    pub yaw: AngleProfile,
    /// Motion start, seconds.
    pub start: f64,
}

/// Angles, Euler rates and Euler accelerations at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerState {
    pub attitude: Attitude,
    pub rates: Vec3,
    pub accels: Vec3,
}

impl TiltProfile {
    pub fn static_pose(attitude: Attitude) -> Self {
        let hold = |a: f64| AngleProfile::Linear { initial: a, rate: 0.0 };
        Self { roll: hold(attitude.roll), pitch: hold(attitude.pitch), yaw: hold(attitude.yaw), start: 0.0 }
    }

    pub fn euler(&self, t: f64) -> EulerState {
        let tau = (t - self.start).max(0.0);
        let moving = if t > self.start { 1.0 } else { 0.0 };
        let p = [&self.roll, &self.pitch, &self.yaw];
        EulerState {
            // Unwrapped; consumers normalize when needed.
            attitude: Attitude::new(p[0].value(tau), p[1].value(tau), p[2].value(tau)),
            rates: Vec3::new(p[0].rate(tau), p[1].rate(tau), p[2].rate(tau)) * moving,
            accels: Vec3::new(p[0].accel(tau), p[1].accel(tau), p[2].accel(tau)) * moving,
        }
    }

    pub fn attitude(&self, t: f64) -> Attitude {
        self.euler(t).attitude.normalized()
    }
}

/// Body angular rate and its derivative for Z-Y-X Euler angles.
pub fn body_rates(state: &EulerState) -> (Vec3, Vec3) {
    let Attitude { roll, pitch, .. } = state.attitude;
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let [dr, dp, dy]: [f64; 3] = state.rates.into();
    let [ar, ap, ay]: [f64; 3] = state.accels.into();

    let omega = Vec3::new(dr - dy * sp, dp * cr + dy * cp * sr, -dp * sr + dy * cp * cr);
    let omega_dot = Vec3::new(
        ar - ay * sp - dy * dp * cp,
        ap * cr - dp * dr * sr + ay * cp * sr - dy * dp * sp * sr + dy * dr * cp * cr,
        -ap * sr - dp * dr * cr + ay * cp * cr - dy * dp * sp * cr - dy * dr * cp * sr,
    );
    (omega, omega_dot)
}

/// Navigation-frame acceleration of the IMU center while the assembly pivots
/// about the fixed POI. Evaluated analytically from the profile:
/// `a = −R·(ω̇ × L + ω × (ω × L))` with `L` the IMU→POI lever arm.
pub fn lever_kinematic_accel(profile: &TiltProfile, arms: &LeverArms, t: f64) -> Vec3 {
    let state = profile.euler(t);
    let (omega, omega_dot) = body_rates(&state);
    let lever = arms.imu_to_poi_b;
    let body = omega_dot.cross(&lever) + omega.cross(&omega.cross(&lever));
    -(rotation_b_to_n(&state.attitude) * body)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Gyro white noise density, °/(s·√Hz).
    pub gyro_noise_density: f64,
    /// Magnitude of the constant per-run gyro bias, °/h.
    pub gyro_bias: f64,
    /// Accelerometer white noise per sample, m/s².
    pub accel_noise_sigma: f64,
    /// RTS slant distance noise, m.
    pub rts_range_sigma: f64,
    /// RTS horizontal and zenith angle noise, rad.
    pub rts_angle_sigma: f64,
}

impl NoiseSpec {
    pub const ZERO: NoiseSpec = NoiseSpec {
        gyro_noise_density: 0.0,
        gyro_bias: 0.0,
        accel_noise_sigma: 0.0,
        rts_range_sigma: 0.0,
        rts_angle_sigma: 0.0,
    };

    fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("gyro_noise_density", self.gyro_noise_density),
            ("gyro_bias", self.gyro_bias),
            ("accel_noise_sigma", self.accel_noise_sigma),
            ("rts_range_sigma", self.rts_range_sigma),
            ("rts_angle_sigma", self.rts_angle_sigma),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::InvalidConfig(format!("{name} must be a non-negative number")));
            }
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            gyro_noise_density: 0.0005,
            gyro_bias: 0.3,
            accel_noise_sigma: 0.01,
            rts_range_sigma: 0.001,
            rts_angle_sigma: 5e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    /// Total length including the idle prefix, seconds.
    pub duration: f64,
    pub imu_rate: f64,
    pub rts_rate: f64,
    pub poi_nav: Vec3,
    pub lever_arms: LeverArms,
    pub roll: AngleProfile,
    pub pitch: AngleProfile,
    pub yaw: AngleProfile,
    /// Station origin in the navigation frame.
    pub rts_station: Vec3,
    pub noise: NoiseSpec,
    pub gravity: f64,
    /// Length of the static prefix in IMU samples.
    pub idle_samples: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    /// 60 s run with 60° roll and pitch sinusoids peaking at 5°/s, surveying-pole
    /// lever arms, station about 1.5 m above the ground point.
    fn default() -> Self {
        Self {
            duration: 60.0,
            imu_rate: 100.0,
            rts_rate: 5.0,
            poi_nav: Vec3::new(2.1312, 0.9983, -1.5374),
            lever_arms: LeverArms::default(),
            roll: AngleProfile::sinusoid_deg(60.0, 5.0 / (2.0 * std::f64::consts::PI * 60.0), 0.0),
            pitch: AngleProfile::sinusoid_deg(60.0, 4.0 / (2.0 * std::f64::consts::PI * 60.0), 0.0),
            yaw: AngleProfile::ZERO,
            rts_station: Vec3::zeros(),
            noise: NoiseSpec::default(),
            gravity: 9.80665,
            idle_samples: 1000,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn idle_duration(&self) -> f64 {
        self.idle_samples as f64 / self.imu_rate
    }

    pub fn profile(&self) -> TiltProfile {
        TiltProfile { roll: self.roll, pitch: self.pitch, yaw: self.yaw, start: self.idle_duration() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.imu_rate > 0.0 && self.imu_rate.is_finite()) {
            return bad("imu_rate must be positive");
        }
        if !(self.rts_rate > 0.0 && self.rts_rate.is_finite()) {
            return bad("rts_rate must be positive");
        }
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            return bad("gravity must be positive");
        }
        if !(self.duration.is_finite() && self.duration > self.idle_duration()) {
            return bad("duration must exceed the idle calibration segment");
        }
        if !self.lever_arms.is_finite() {
            return bad("lever arms must be finite");
        }
        if !self.poi_nav.iter().chain(self.rts_station.iter()).all(|v| v.is_finite()) {
            return bad("positions must be finite");
        }
        let span = self.duration - self.idle_duration();
        let limit = MAX_TILT_DEG.to_radians() + 1e-12;
        for (name, p) in [("roll", &self.roll), ("pitch", &self.pitch)] {
            if p.max_abs(span) > limit {
                return Err(SimError::InvalidConfig(format!("{name} excursion exceeds {MAX_TILT_DEG}°")));
            }
        }
        for p in [&self.roll, &self.pitch, &self.yaw] {
            let finite = match *p {
                AngleProfile::Sinusoid { amplitude, frequency, phase } => {
                    amplitude.is_finite() && frequency.is_finite() && frequency >= 0.0 && phase.is_finite()
                }
                AngleProfile::Linear { initial, rate } => initial.is_finite() && rate.is_finite(),
            };
            if !finite {
                return bad("angle profile parameters must be finite, frequencies non-negative");
            }
        }
        self.noise.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthSample {
    pub timestamp: f64,
    pub attitude: Attitude,
    pub prism_nav: Vec3,
    pub poi_nav: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub imu: Vec<ImuSample>,
    pub rts: Vec<RtsObservation>,
    /// One sample per IMU timestamp.
    pub truth: Vec<GroundTruthSample>,
    /// Gyro bias drawn for this run, rad/s.
    pub gyro_bias: Vec3,
}

fn sample_count(duration: f64, rate: f64) -> usize {
    (duration * rate).floor() as usize
}

fn truth_at(cfg: &ScenarioConfig, profile: &TiltProfile, t: f64) -> GroundTruthSample {
    let attitude = profile.attitude(t);
    let lever_n = rotation_b_to_n(&attitude) * prism_to_poi_body(&cfg.lever_arms);
    GroundTruthSample { timestamp: t, attitude, prism_nav: cfg.poi_nav - lever_n, poi_nav: cfg.poi_nav }
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario, SimError> {
    cfg.validate()?;
    let profile = cfg.profile();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let bias_direction = loop {
        let v = Vec3::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        if v.norm() > 1e-6 {
            break v.normalize();
        }
    };
    let gyro_bias = bias_direction * (cfg.noise.gyro_bias / 3600.0).to_radians();
    let gyro_sigma = cfg.noise.gyro_noise_density.to_radians() * cfg.imu_rate.sqrt();
    let gyro_noise = Normal::new(0.0, gyro_sigma).expect("validated sigma");
    let accel_noise = Normal::new(0.0, cfg.noise.accel_noise_sigma).expect("validated sigma");
    let range_noise = Normal::new(0.0, cfg.noise.rts_range_sigma).expect("validated sigma");
    let angle_noise = Normal::new(0.0, cfg.noise.rts_angle_sigma).expect("validated sigma");
    let draw3 = |dist: &Normal<f64>, rng: &mut ChaCha8Rng| {
        Vec3::new(dist.sample(rng), dist.sample(rng), dist.sample(rng))
    };

    let n_imu = sample_count(cfg.duration, cfg.imu_rate);
    let mut imu = Vec::with_capacity(n_imu);
    let mut truth = Vec::with_capacity(n_imu);
    let gravity = Vec3::new(0.0, 0.0, cfg.gravity);
    for k in 0..n_imu {
        let t = k as f64 / cfg.imu_rate;
        let state = profile.euler(t);
        let rotation = rotation_b_to_n(&state.attitude);
        let (omega, _) = body_rates(&state);
        let specific_force = rotation.transpose() * (lever_kinematic_accel(&profile, &cfg.lever_arms, t) + gravity);
        let accel = specific_force + draw3(&accel_noise, &mut rng);
        let gyro = omega + gyro_bias + draw3(&gyro_noise, &mut rng);
        imu.push(ImuSample::new(t, accel, gyro));
        truth.push(truth_at(cfg, &profile, t));
    }

    let n_rts = sample_count(cfg.duration, cfg.rts_rate);
    let mut rts = Vec::with_capacity(n_rts);
    for j in 0..n_rts {
        let t = j as f64 / cfg.rts_rate;
        let prism = truth_at(cfg, &profile, t).prism_nav;
        let exact = RtsObservation::from_cartesian(t, &(prism - cfg.rts_station))
            .map_err(|_| SimError::InfeasibleGeometry { timestamp: t })?;
        let obs = RtsObservation::new(
            t,
            exact.slant_distance + range_noise.sample(&mut rng),
            exact.horizontal_angle + angle_noise.sample(&mut rng),
            exact.zenith_angle + angle_noise.sample(&mut rng),
        )
        .map_err(|_| SimError::InfeasibleGeometry { timestamp: t })?;
        rts.push(obs);
    }

    Ok(Scenario { imu, rts, truth, gyro_bias })
}

/// Prism position in the navigation frame implied by an observation taken
/// from `station` (station axes parallel to the navigation axes).
pub fn observed_prism(obs: &RtsObservation, station: &Vec3) -> Vec3 {
    station + polar_to_cartesian(obs)
}

pub const TRUTH_HEADER: &str =
    "t_s,roll_deg,pitch_deg,yaw_deg,prism_x_m,prism_y_m,prism_z_m,poi_x_m,poi_y_m,poi_z_m";

pub fn write_truth_csv(truth: &[GroundTruthSample]) -> String {
    let mut out = String::with_capacity(TRUTH_HEADER.len() + 1 + truth.len() * 140);
    out.push_str(TRUTH_HEADER);
    out.push('\n');
    for s in truth {
        let values = [
            s.timestamp,
            s.attitude.roll.to_degrees(),
            s.attitude.pitch.to_degrees(),
            s.attitude.yaw.to_degrees(),
            s.prism_nav.x,
            s.prism_nav.y,
            s.prism_nav.z,
            s.poi_nav.x,
            s.poi_nav.y,
            s.poi_nav.z,
        ];
        let line: Vec<String> = values.iter().map(|v| format!("{:.9}", if *v == 0.0 { 0.0 } else { *v })).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn read_truth_csv<R: BufRead>(reader: R) -> Result<Vec<GroundTruthSample>, CodecError> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CodecError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let at = |e: CodecError| CodecError::AtLine { line: i + 1, source: Box::new(e) };
        if !header_seen {
            if trimmed != TRUTH_HEADER {
                return Err(at(CodecError::Header));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 10 {
            return Err(at(CodecError::FieldCount { expected: 10, found: fields.len() }));
        }
        let mut v = [0.0; 10];
        for (j, f) in fields.iter().enumerate() {
            v[j] = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| at(CodecError::NotANumber { index: j, name: "truth", token: f.to_string() }))?;
        }
        out.push(GroundTruthSample {
            timestamp: v[0],
            attitude: Attitude::from_degrees(v[1], v[2], v[3]),
            prism_nav: Vec3::new(v[4], v[5], v[6]),
            poi_nav: Vec3::new(v[7], v[8], v[9]),
        });
    }
    if !header_seen {
        return Err(CodecError::Header);
    }
    Ok(out)
}
