//! Pairing of the ~100 Hz IMU stream with the ~5 Hz RTS stream.
//!
//! IMU samples drive the attitude filter after an initial gyro-bias
//! calibration phase; every filter output is kept in a short history. RTS
//! observations wait in a ring buffer until [`Pipeline::drain`] pairs each one
//! with the most recent attitude estimate and applies the lever-arm
//! compensation.
//!
//! Both streams must be timestamped on the same clock by the caller. All
//! calls must be serialized; the pipeline holds no locks.

use std::collections::VecDeque;

use thiserror::Error;

use crate::attitude::{self, filter_step, Attitude, AttitudeError, FilterConfig, FilterState, ImuSample};
use crate::geodesy::{apply_helmert, polar_to_cartesian, HelmertParams, RtsObservation};
use crate::kinematics::{poi_position, LeverArms};
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Attitude(#[from] AttitudeError),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(&'static str),
}

/// How an RTS observation is matched to an attitude estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairingMode {
    /// Latest estimate at or before the observation time. The observation is
    /// held until a later IMU sample arrives (or the IMU stream is closed),
    /// so the pairing does not depend on how the two streams interleave.
    #[default]
    Replay,
    /// Latest estimate no later than `timestamp + pairing_tolerance`, and no
    /// staler than `timestamp - pairing_tolerance`.
    Live,
}

/// Which yaw enters the lever-arm rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YawSource {
    /// A constant heading, initially zero and changed only by
    /// [`Pipeline::set_yaw`]. Gyro-integrated yaw is still tracked.
    #[default]
    Hold,
    /// The drifting gyro-integrated yaw.
    Integrated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub lever_arms: LeverArms,
    pub helmert: HelmertParams,
    pub rts_buffer_capacity: usize,
    /// Seconds.
    pub pairing_tolerance: f64,
    pub pairing_mode: PairingMode,
    pub yaw_source: YawSource,
    /// Constant delay of RTS timestamps behind the IMU clock, seconds.
    /// Subtracted from each observation time before pairing.
    pub rts_latency: f64,
    /// Number of attitude estimates retained for pairing.
    pub history_capacity: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            lever_arms: LeverArms::default(),
            helmert: HelmertParams::identity(),
            rts_buffer_capacity: 32,
            pairing_tolerance: 0.25,
            pairing_mode: PairingMode::Replay,
            yaw_source: YawSource::Hold,
            rts_latency: 0.0,
            history_capacity: 1024,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.filter.validate()?;
        if self.rts_buffer_capacity == 0 {
            return Err(PipelineError::InvalidConfig("rts_buffer_capacity must be at least 1"));
        }
        if self.history_capacity == 0 {
            return Err(PipelineError::InvalidConfig("history_capacity must be at least 1"));
        }
        if !(self.pairing_tolerance >= 0.0 && self.pairing_tolerance.is_finite()) {
            return Err(PipelineError::InvalidConfig("pairing_tolerance must be non-negative"));
        }
        if !self.rts_latency.is_finite() {
            return Err(PipelineError::InvalidConfig("rts_latency must be finite"));
        }
        if !self.lever_arms.is_finite() {
            return Err(PipelineError::InvalidConfig("lever arms must be finite"));
        }
        if self.helmert.scale.is_nan() || self.helmert.scale <= 0.0 {
            return Err(PipelineError::InvalidConfig("Helmert scale must be positive"));
        }
        Ok(())
    }
}

/// One tilt-compensated output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedRecord {
    /// RTS observation time.
    pub timestamp: f64,
    pub prism_nav: Vec3,
    pub poi_nav: Vec3,
    pub attitude_used: Attitude,
    pub alpha_used: f64,
    pub imu_timestamp_used: f64,
}

impl FusedRecord {
    /// POI re-derived from the stored prism position and attitude.
    pub fn recompute_poi(&self, arms: &LeverArms) -> Vec3 {
        poi_position(&self.prism_nav, &self.attitude_used, arms)
    }
}

/// A filter output kept for pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeEstimate {
    pub timestamp: f64,
    pub attitude: Attitude,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    calibration: Vec<ImuSample>,
    filter: FilterState,
    held_yaw: f64,
    history: VecDeque<AttitudeEstimate>,
    buffer: VecDeque<RtsObservation>,
    dropped: u64,
    last_imu_timestamp: Option<f64>,
    imu_closed: bool,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        Ok(Self {
            calibration: Vec::with_capacity(cfg.filter.bias_calibration_count),
            filter: FilterState::default(),
            held_yaw: 0.0,
            history: VecDeque::with_capacity(cfg.history_capacity),
            buffer: VecDeque::with_capacity(cfg.rts_buffer_capacity),
            dropped: 0,
            last_imu_timestamp: None,
            imu_closed: false,
            cfg,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn is_calibrating(&self) -> bool {
        self.calibration.len() < self.cfg.filter.bias_calibration_count
    }

    /// Gyro bias in use; zero until calibration completes.
    pub fn gyro_bias(&self) -> Vec3 {
        self.filter.gyro_bias
    }

    pub fn filter_state(&self) -> &FilterState {
        &self.filter
    }

    pub fn latest_estimate(&self) -> Option<&AttitudeEstimate> {
        self.history.back()
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// RTS observations discarded on buffer overflow.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Overrides the heading, both the held value and the integrated one.
    pub fn set_yaw(&mut self, yaw: f64) {
        self.filter = attitude::set_yaw(&self.filter, yaw);
        self.held_yaw = self.filter.attitude.yaw;
    }

    pub fn push_imu(&mut self, sample: ImuSample) -> Result<(), PipelineError> {
        if !sample.is_finite() {
            return Err(AttitudeError::NonFinite.into());
        }
        if let Some(previous) = self.last_imu_timestamp {
            if sample.timestamp < previous {
                return Err(AttitudeError::NonMonotone { previous, current: sample.timestamp }.into());
            }
        }

        if self.is_calibrating() {
            self.calibration.push(sample);
            self.last_imu_timestamp = Some(sample.timestamp);
            if self.is_calibrating() {
                return Ok(());
            }
            let bias = attitude::calibrate_bias(&self.calibration, self.cfg.filter.bias_calibration_count)?;
            self.filter.gyro_bias = bias;
        }

        self.filter = filter_step(&self.filter, &sample, &self.cfg.filter)?;
        self.last_imu_timestamp = Some(sample.timestamp);
        let mut attitude = self.filter.attitude;
        if self.cfg.yaw_source == YawSource::Hold {
            attitude.yaw = self.held_yaw;
        }
        if self.history.len() == self.cfg.history_capacity {
            self.history.pop_front();
        }
        self.history.push_back(AttitudeEstimate {
            timestamp: sample.timestamp,
            attitude,
            alpha: self.filter.last_alpha,
        });
        Ok(())
    }

    /// Queues an observation, evicting the oldest one when full.
    pub fn push_rts(&mut self, obs: RtsObservation) {
        if self.buffer.len() == self.cfg.rts_buffer_capacity {
            self.buffer.pop_front();
            self.dropped += 1;
        }
        self.buffer.push_back(obs);
    }

    /// Declares that no further IMU samples will arrive, so replay pairing
    /// can resolve observations newer than the last sample.
    pub fn close_imu(&mut self) {
        self.imu_closed = true;
    }

    /// Emits records for every buffered observation that has an eligible
    /// attitude, in FIFO order. The rest stay buffered.
    pub fn drain(&mut self) -> Vec<FusedRecord> {
        if self.is_calibrating() {
            return Vec::new();
        }
        let mut records = Vec::new();
        let mut pending = VecDeque::with_capacity(self.buffer.len());
        while let Some(obs) = self.buffer.pop_front() {
            match self.pair(&obs) {
                Some(estimate) => records.push(self.fuse(&obs, &estimate)),
                None => pending.push_back(obs),
            }
        }
        self.buffer = pending;
        records
    }

    fn pair(&self, obs: &RtsObservation) -> Option<AttitudeEstimate> {
        let t = obs.timestamp - self.cfg.rts_latency;
        let newest = self.history.back()?;
        match self.cfg.pairing_mode {
            PairingMode::Replay => {
                if newest.timestamp <= t && !self.imu_closed {
                    return None;
                }
                self.latest_at_or_before(t)
            }
            PairingMode::Live => {
                let tol = self.cfg.pairing_tolerance;
                self.latest_at_or_before(t + tol).filter(|e| t - e.timestamp <= tol)
            }
        }
    }

    fn latest_at_or_before(&self, t: f64) -> Option<AttitudeEstimate> {
        let idx = self.history.partition_point(|e| e.timestamp <= t);
        idx.checked_sub(1).map(|i| self.history[i])
    }

    fn fuse(&self, obs: &RtsObservation, estimate: &AttitudeEstimate) -> FusedRecord {
        let prism_rts = polar_to_cartesian(obs);
        let prism_nav = apply_helmert(&self.cfg.helmert, &prism_rts);
        FusedRecord {
            timestamp: obs.timestamp,
            prism_nav,
            poi_nav: poi_position(&prism_nav, &estimate.attitude, &self.cfg.lever_arms),
            attitude_used: estimate.attitude,
            alpha_used: estimate.alpha,
            imu_timestamp_used: estimate.timestamp,
        }
    }
}

/// Summary of an offline [`replay`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutput {
    pub records: Vec<FusedRecord>,
    pub dropped: u64,
    /// Observations never paired (e.g. timestamped before the first attitude).
    pub unpaired: usize,
    pub gyro_bias: Vec3,
}

/// Runs both streams through a fresh pipeline in timestamp order.
///
/// At equal timestamps the IMU sample goes first. The pipeline is drained
/// after every push and once more after the IMU stream is closed.
pub fn replay(
    cfg: PipelineConfig,
    imu: &[ImuSample],
    rts: &[RtsObservation],
    initial_yaw: f64,
) -> Result<ReplayOutput, PipelineError> {
    let mut pipeline = Pipeline::new(cfg)?;
    pipeline.set_yaw(initial_yaw);
    let mut records = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < imu.len() || j < rts.len() {
        let take_imu = match (imu.get(i), rts.get(j)) {
            (Some(s), Some(o)) => s.timestamp <= o.timestamp,
            (Some(_), None) => true,
            _ => false,
        };
        if take_imu {
            pipeline.push_imu(imu[i])?;
            i += 1;
        } else {
            pipeline.push_rts(rts[j]);
            j += 1;
        }
        records.extend(pipeline.drain());
    }
    pipeline.close_imu();
    records.extend(pipeline.drain());
    Ok(ReplayOutput {
        records,
        dropped: pipeline.dropped(),
        unpaired: pipeline.buffered(),
        gyro_bias: pipeline.gyro_bias(),
    })
}
