//! Total station polar observations and the 3D Helmert similarity transform.

use thiserror::Error;

use crate::{Mat3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesyError {
    #[error("invalid observation: {0}")]
    InvalidObservation(&'static str),
    #[error("Helmert fit needs at least 3 point pairs, got {0}")]
    TooFewPairs(usize),
    #[error("degenerate point configuration: source points are collinear or coincident (singular value ratio {ratio:e})")]
    Degenerate { ratio: f64 },
    #[error("non-finite coordinate in point pair {0}")]
    NonFinite(usize),
}

/// One RTS measurement to the prism. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtsObservation {
    pub timestamp: f64,
    /// Slant distance D, meters.
    pub slant_distance: f64,
    /// Horizontal angle Hz, counterclockwise from the x axis.
    pub horizontal_angle: f64,
    /// Zenith angle V, measured down from the vertical; π/2 is horizontal.
    pub zenith_angle: f64,
}

impl RtsObservation {
    pub fn new(timestamp: f64, slant_distance: f64, horizontal_angle: f64, zenith_angle: f64) -> Result<Self, GeodesyError> {
        let obs = Self { timestamp, slant_distance, horizontal_angle, zenith_angle };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<(), GeodesyError> {
        if ![self.timestamp, self.slant_distance, self.horizontal_angle, self.zenith_angle]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(GeodesyError::InvalidObservation("non-finite value"));
        }
        if self.slant_distance <= 0.0 {
            return Err(GeodesyError::InvalidObservation("slant distance must be positive"));
        }
        if !(self.zenith_angle > 0.0 && self.zenith_angle < std::f64::consts::PI) {
            return Err(GeodesyError::InvalidObservation("zenith angle must lie in (0, π)"));
        }
        Ok(())
    }

    /// Inverse of [`polar_to_cartesian`] for a point relative to the station.
    pub fn from_cartesian(timestamp: f64, point: &Vec3) -> Result<Self, GeodesyError> {
        let slant_distance = point.norm();
        let horizontal = point.x.hypot(point.y);
        let zenith_angle = horizontal.atan2(point.z);
        let horizontal_angle = point.y.atan2(point.x);
        Self::new(timestamp, slant_distance, horizontal_angle, zenith_angle)
    }
}

/// Prism coordinates in the station frame.
pub fn polar_to_cartesian(obs: &RtsObservation) -> Vec3 {
    let (sv, cv) = obs.zenith_angle.sin_cos();
    let (sh, ch) = obs.horizontal_angle.sin_cos();
    let horizontal = obs.slant_distance * sv;
    Vec3::new(horizontal * ch, horizontal * sh, obs.slant_distance * cv)
}

/// Similarity transform `x ↦ s·R·x + t` from the station to the navigation frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmertParams {
    pub scale: f64,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for HelmertParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl HelmertParams {
    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.rotation == Mat3::identity() && self.translation == Vec3::zeros()
    }
}

pub fn apply_helmert(params: &HelmertParams, point: &Vec3) -> Vec3 {
    params.scale * (params.rotation * point) + params.translation
}

/// Result of [`fit_helmert`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmertFit {
    pub params: HelmertParams,
    /// Root mean square of the 3D residual norms, meters.
    pub rms_residual: f64,
}

/// Least-squares similarity transform mapping `source` points onto `target`.
///
/// Minimizes `Σ‖target − (s·R·source + t)‖²` in closed form: centroids are
/// removed, the cross-covariance is factored by SVD, a reflection is folded
/// back into a proper rotation, and the scale follows from the rotated
/// cross-covariance trace over the source variance.
pub fn fit_helmert(pairs: &[(Vec3, Vec3)]) -> Result<HelmertFit, GeodesyError> {
    if pairs.len() < 3 {
        return Err(GeodesyError::TooFewPairs(pairs.len()));
    }
    for (i, (s, t)) in pairs.iter().enumerate() {
        if !s.iter().chain(t.iter()).all(|v| v.is_finite()) {
            return Err(GeodesyError::NonFinite(i));
        }
    }
    let n = pairs.len() as f64;
    let src_mean = pairs.iter().fold(Vec3::zeros(), |acc, (s, _)| acc + s) / n;
    let dst_mean = pairs.iter().fold(Vec3::zeros(), |acc, (_, t)| acc + t) / n;

    let mut cross = Mat3::zeros();
    let mut scatter = Mat3::zeros();
    let mut src_var = 0.0;
    for (s, t) in pairs {
        let ds = s - src_mean;
        let dt = t - dst_mean;
        cross += dt * ds.transpose();
        scatter += ds * ds.transpose();
        src_var += ds.norm_squared();
    }
    cross /= n;
    src_var /= n;

    // Rotation is determined as long as the source spans at least a plane.
    let spread = scatter.singular_values();
    let (largest, middle) = {
        let mut sv = [spread[0], spread[1], spread[2]];
        sv.sort_by(|a, b| b.total_cmp(a));
        (sv[0], sv[1])
    };
    let ratio = if largest > 0.0 { middle / largest } else { 0.0 };
    if ratio < 1e-9 {
        return Err(GeodesyError::Degenerate { ratio });
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut signs = Vec3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        // nalgebra does not order singular values; flip the smallest one.
        let smallest = (0..3)
            .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap_or(2);
        signs[smallest] = -1.0;
    }
    let rotation = u * Mat3::from_diagonal(&signs) * v_t;
    let scale = svd.singular_values.component_mul(&signs).sum() / src_var;
    let translation = dst_mean - scale * (rotation * src_mean);
    let params = HelmertParams { scale, rotation, translation };

    let rms_residual = (pairs
        .iter()
        .map(|(s, t)| (t - apply_helmert(&params, s)).norm_squared())
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(HelmertFit { params, rms_residual })
}
