//! Tilt compensation for robotic total station (RTS) prism measurements.
//!
//! An IMU rigidly mounted under the prism provides roll and pitch through an
//! adaptive complementary filter. The tilt is used to rotate the body-frame
//! lever arm from the prism center to a point of interest (POI), which is then
//! added to the RTS prism position:
//!
//! ```text
//! P_poi = s·R·P_rts + t + R_bn(roll, pitch, yaw) · (L_imu→poi − L_imu→prism)
//! ```
//!
//! The crate is split by concern:
//!
//! * [`attitude`]: complementary filter, gyro bias calibration.
//! * [`kinematics`]: Z-Y-X rotation and lever-arm transformation.
//! * [`geodesy`]: polar to Cartesian conversion, Helmert transformation.
//! * [`pipeline`]: pairing of the asynchronous IMU and RTS streams.
//! * [`codec`]: text streams, CSV logs and CAN frames.
//! * [`sim`]: ground-truth scenario generator with sensor noise.
//! * [`eval`]: error statistics and RMSE reports.
//! * [`config`]: plain-text key/value run configuration.

pub mod attitude;
pub mod codec;
pub mod config;
pub mod eval;
pub mod geodesy;
pub mod kinematics;
pub mod pipeline;
pub mod sim;

/// Three-vector of `f64`.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrix of `f64`.
pub type Mat3 = nalgebra::Matrix3<f64>;

pub use attitude::{Attitude, FilterConfig, FilterState, ImuSample};
pub use geodesy::{HelmertParams, RtsObservation};
pub use kinematics::LeverArms;
pub use pipeline::{FusedRecord, Pipeline, PipelineConfig};
