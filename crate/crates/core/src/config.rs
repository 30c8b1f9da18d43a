//! Plain-text `key = value` run configuration.
//!
//! One file describes a scenario and the fusion settings; each consumer
//! picks the keys it needs. `#` starts a comment, vectors are written as
//! `x, y, z`. Keys outside [`KNOWN_KEYS`] are rejected.
//!
//! ```text
//! duration_s = 60
//! imu_to_prism_m = 0, 0, 0.0756
//! imu_to_poi_m = 0, 0, -0.992
//! roll_amplitude_deg = 60
//! seed = 7
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use crate::attitude::FilterConfig;
use crate::geodesy::HelmertParams;
use crate::kinematics::LeverArms;
use crate::pipeline::{PairingMode, PipelineConfig, YawSource};
use crate::sim::{AngleProfile, NoiseSpec, ScenarioConfig, MAX_TILT_DEG};
use crate::{Mat3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { key: String, line: usize },
    #[error("key `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { key: key.to_string(), reason: reason.into() }
}

const SCENARIO_KEYS: &[&str] = &[
    "duration_s",
    "imu_rate_hz",
    "rts_rate_hz",
    "poi_nav_m",
    "rts_station_m",
    "roll_amplitude_deg",
    "roll_frequency_hz",
    "roll_phase_deg",
    "pitch_amplitude_deg",
    "pitch_frequency_hz",
    "pitch_phase_deg",
    "yaw_initial_deg",
    "yaw_rate_deg_s",
    "gyro_noise_density_dps_rthz",
    "gyro_bias_dph",
    "accel_noise_sigma_mps2",
    "rts_range_sigma_m",
    "rts_angle_sigma_rad",
    "seed",
];

const SHARED_KEYS: &[&str] = &[
    "imu_to_prism_m",
    "imu_to_poi_m",
    "gravity_mps2",
    "bias_calibration_count",
];

const FUSION_KEYS: &[&str] = &[
    "alpha_base",
    "delta_a_threshold_mps2",
    "rts_buffer_capacity",
    "pairing_tolerance_s",
    "pairing_mode",
    "yaw_source",
    "initial_yaw_deg",
    "rts_latency_s",
];

/// Every key accepted in a run configuration file.
pub const KNOWN_KEYS: [&[&str]; 3] = [SCENARIO_KEYS, SHARED_KEYS, FUSION_KEYS];

/// Parsed `key = value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            if !KNOWN_KEYS.iter().any(|set| set.contains(&key)) {
                return Err(ConfigError::UnknownKey { key: key.to_string(), line: i + 1 });
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::Duplicate { key: key.to_string(), line: i + 1 });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_f64(key, v),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| invalid(key, format!("`{v}` is not a non-negative integer"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| invalid(key, format!("`{v}` is not a non-negative integer"))),
        }
    }

    pub fn vec3_or(&self, key: &str, default: Vec3) -> Result<Vec3, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_vec3(key, v),
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| invalid(key, format!("`{value}` is not a finite number")))
}

fn parse_list(key: &str, value: &str, len: usize) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != len {
        return Err(invalid(key, format!("expected {len} comma-separated numbers, found {}", parts.len())));
    }
    parts.iter().map(|p| parse_f64(key, p)).collect()
}

pub fn parse_vec3(key: &str, value: &str) -> Result<Vec3, ConfigError> {
    let v = parse_list(key, value, 3)?;
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn non_negative(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v < 0.0 {
        return Err(invalid(key, "must not be negative"));
    }
    Ok(v)
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v <= 0.0 {
        return Err(invalid(key, "must be positive"));
    }
    Ok(v)
}

pub fn lever_arms_from(kv: &KeyValues) -> Result<LeverArms, ConfigError> {
    let d = LeverArms::default();
    Ok(LeverArms::new(
        kv.vec3_or("imu_to_prism_m", d.imu_to_prism_b)?,
        kv.vec3_or("imu_to_poi_m", d.imu_to_poi_b)?,
    ))
}

pub fn scenario_from(kv: &KeyValues) -> Result<ScenarioConfig, ConfigError> {
    let d = ScenarioConfig::default();
    let dn = d.noise;

    let imu_rate = positive("imu_rate_hz", kv.f64_or("imu_rate_hz", d.imu_rate)?)?;
    let rts_rate = positive("rts_rate_hz", kv.f64_or("rts_rate_hz", d.rts_rate)?)?;
    let idle_samples = kv.usize_or("bias_calibration_count", d.idle_samples)?;
    if idle_samples == 0 {
        return Err(invalid("bias_calibration_count", "must be at least 1"));
    }
    let duration = kv.f64_or("duration_s", d.duration)?;
    if duration <= idle_samples as f64 / imu_rate {
        return Err(invalid(
            "duration_s",
            format!("must exceed the idle calibration segment of {} s", idle_samples as f64 / imu_rate),
        ));
    }

    let axis = |name: &str, default: &AngleProfile| -> Result<AngleProfile, ConfigError> {
        let (da, df, dp) = match *default {
            AngleProfile::Sinusoid { amplitude, frequency, phase } => (amplitude, frequency, phase),
            AngleProfile::Linear { .. } => (0.0, 0.0, 0.0),
        };
        let amp_key = format!("{name}_amplitude_deg");
        let amplitude = match kv.get(&amp_key) {
            None => da,
            Some(v) => {
                let deg = parse_f64(&amp_key, v)?;
                if deg.abs() > MAX_TILT_DEG {
                    return Err(invalid(&amp_key, format!("{deg}° exceeds the {MAX_TILT_DEG}° excursion limit")));
                }
                deg.to_radians()
            }
        };
        let freq_key = format!("{name}_frequency_hz");
        let frequency = non_negative(&freq_key, kv.f64_or(&freq_key, df)?)?;
        let phase_key = format!("{name}_phase_deg");
        let phase = match kv.get(&phase_key) {
            None => dp,
            Some(v) => parse_f64(&phase_key, v)?.to_radians(),
        };
        Ok(AngleProfile::Sinusoid { amplitude, frequency, phase })
    };
    let roll = axis("roll", &d.roll)?;
    let pitch = axis("pitch", &d.pitch)?;
    let yaw = AngleProfile::Linear {
        initial: kv.f64_or("yaw_initial_deg", 0.0)?.to_radians(),
        rate: kv.f64_or("yaw_rate_deg_s", 0.0)?.to_radians(),
    };

    let noise = NoiseSpec {
        gyro_noise_density: non_negative(
            "gyro_noise_density_dps_rthz",
            kv.f64_or("gyro_noise_density_dps_rthz", dn.gyro_noise_density)?,
        )?,
        gyro_bias: non_negative("gyro_bias_dph", kv.f64_or("gyro_bias_dph", dn.gyro_bias)?)?,
        accel_noise_sigma: non_negative(
            "accel_noise_sigma_mps2",
            kv.f64_or("accel_noise_sigma_mps2", dn.accel_noise_sigma)?,
        )?,
        rts_range_sigma: non_negative("rts_range_sigma_m", kv.f64_or("rts_range_sigma_m", dn.rts_range_sigma)?)?,
        rts_angle_sigma: non_negative(
            "rts_angle_sigma_rad",
            kv.f64_or("rts_angle_sigma_rad", dn.rts_angle_sigma)?,
        )?,
    };

    let cfg = ScenarioConfig {
        duration,
        imu_rate,
        rts_rate,
        poi_nav: kv.vec3_or("poi_nav_m", d.poi_nav)?,
        lever_arms: lever_arms_from(kv)?,
        roll,
        pitch,
        yaw,
        rts_station: kv.vec3_or("rts_station_m", d.rts_station)?,
        noise,
        gravity: positive("gravity_mps2", kv.f64_or("gravity_mps2", d.gravity)?)?,
        idle_samples,
        seed: kv.u64_or("seed", d.seed)?,
    };
    cfg.validate().map_err(|e| invalid("scenario", e.to_string()))?;
    Ok(cfg)
}

/// Fusion settings plus the initial held yaw (radians).
pub fn pipeline_from(kv: &KeyValues, helmert: HelmertParams) -> Result<(PipelineConfig, f64), ConfigError> {
    let d = PipelineConfig::default();
    let df = FilterConfig::default();
    let alpha_base = kv.f64_or("alpha_base", df.alpha_base)?;
    if !(0.0..=1.0).contains(&alpha_base) {
        return Err(invalid("alpha_base", "must lie within [0, 1]"));
    }
    let filter = FilterConfig {
        alpha_base,
        delta_a_threshold: positive("delta_a_threshold_mps2", kv.f64_or("delta_a_threshold_mps2", df.delta_a_threshold)?)?,
        gravity: positive("gravity_mps2", kv.f64_or("gravity_mps2", df.gravity)?)?,
        bias_calibration_count: kv.usize_or("bias_calibration_count", df.bias_calibration_count)?,
    };
    if filter.bias_calibration_count == 0 {
        return Err(invalid("bias_calibration_count", "must be at least 1"));
    }
    let rts_buffer_capacity = kv.usize_or("rts_buffer_capacity", d.rts_buffer_capacity)?;
    if rts_buffer_capacity == 0 {
        return Err(invalid("rts_buffer_capacity", "must be at least 1"));
    }
    let pairing_mode = match kv.get("pairing_mode") {
        None => d.pairing_mode,
        Some("replay") => PairingMode::Replay,
        Some("live") => PairingMode::Live,
        Some(other) => return Err(invalid("pairing_mode", format!("`{other}` is not `replay` or `live`"))),
    };
    let yaw_source = match kv.get("yaw_source") {
        None => d.yaw_source,
        Some("hold") => YawSource::Hold,
        Some("integrated") => YawSource::Integrated,
        Some(other) => return Err(invalid("yaw_source", format!("`{other}` is not `hold` or `integrated`"))),
    };
    let cfg = PipelineConfig {
        filter,
        lever_arms: lever_arms_from(kv)?,
        helmert,
        rts_buffer_capacity,
        pairing_tolerance: non_negative("pairing_tolerance_s", kv.f64_or("pairing_tolerance_s", d.pairing_tolerance)?)?,
        pairing_mode,
        yaw_source,
        rts_latency: kv.f64_or("rts_latency_s", d.rts_latency)?,
        history_capacity: d.history_capacity,
    };
    let initial_yaw = kv.f64_or("initial_yaw_deg", 0.0)?.to_radians();
    Ok((cfg, initial_yaw))
}

/// Text form of Helmert parameters:
///
/// ```text
/// scale = 1.0
/// rotation = r11, r12, r13, r21, r22, r23, r31, r32, r33
/// translation = tx, ty, tz
/// ```
pub fn format_helmert(params: &HelmertParams) -> String {
    let r = &params.rotation;
    let rows: Vec<String> = (0..3).flat_map(|i| (0..3).map(move |j| format!("{:.15}", r[(i, j)]))).collect();
    let t = params.translation;
    format!(
        "scale = {:.15}\nrotation = {}\ntranslation = {:.12}, {:.12}, {:.12}\n",
        params.scale,
        rows.join(", "),
        t.x,
        t.y,
        t.z
    )
}

pub fn parse_helmert(text: &str) -> Result<HelmertParams, ConfigError> {
    let mut scale = None;
    let mut rotation = None;
    let mut translation = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let (key, value) = (key.trim(), value.trim());
        let slot_taken = match key {
            "scale" => scale.replace(positive(key, parse_f64(key, value)?)?).is_some(),
            "rotation" => rotation.replace(Mat3::from_row_slice(&parse_list(key, value, 9)?)).is_some(),
            "translation" => translation.replace(parse_vec3(key, value)?).is_some(),
            _ => return Err(ConfigError::UnknownKey { key: key.to_string(), line: i + 1 }),
        };
        if slot_taken {
            return Err(ConfigError::Duplicate { key: key.to_string(), line: i + 1 });
        }
    }
    let rotation = rotation.ok_or(ConfigError::Missing("rotation"))?;
    if (rotation.transpose() * rotation - Mat3::identity()).amax() > 1e-9 || rotation.determinant() <= 0.0 {
        return Err(invalid("rotation", "must be a proper orthonormal matrix"));
    }
    Ok(HelmertParams {
        scale: scale.ok_or(ConfigError::Missing("scale"))?,
        rotation,
        translation: translation.ok_or(ConfigError::Missing("translation"))?,
    })
}
