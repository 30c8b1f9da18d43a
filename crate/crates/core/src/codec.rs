//! Text stream, CSV log and CAN frame formats.
//!
//! IMU stream line: `IMU,<t_s>,<ax>,<ay>,<az>,<gx>,<gy>,<gz>` (m/s², rad/s).
//! RTS stream line: `RTS,<t_s>,<D_m>,<Hz_deg>,<V_deg>` (angles in degrees).
//! Both accept blank lines and `#` comments when read as a stream.
//!
//! Fused CSV columns are listed in [`CSV_HEADER`]; every value is written in
//! fixed notation with nine decimals, angles in degrees.
//!
//! A fused record maps to three CAN frames with 29-bit ids `base`, `base+1`,
//! `base+2`, each carrying two signed 32-bit little-endian coordinates in
//! units of 0.1 mm: `[prism_x][prism_y]`, `[prism_z][poi_x]`,
//! `[poi_y][poi_z]`. An optional fourth frame at `base+3` carries roll, pitch
//! and yaw as signed 16-bit little-endian values in 0.01° plus a 16-bit
//! sequence counter.

use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use crate::attitude::{Attitude, ImuSample};
use crate::geodesy::RtsObservation;
use crate::pipeline::FusedRecord;
use crate::Vec3;

pub const CSV_HEADER: &str =
    "t_s,prism_x_m,prism_y_m,prism_z_m,poi_x_m,poi_y_m,poi_z_m,roll_deg,pitch_deg,yaw_deg,alpha,imu_t_s";

/// Meters per CAN coordinate LSB.
pub const CAN_POSITION_LSB: f64 = 1e-4;
/// Degrees per CAN attitude LSB.
pub const CAN_ANGLE_LSB: f64 = 0.01;
/// Largest 29-bit identifier.
pub const CAN_MAX_ID: u32 = 0x1FFF_FFFF;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("expected record tag `{expected}`, found `{found}`")]
    WrongTag { expected: &'static str, found: String },
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("field {index} (`{name}`): cannot parse `{token}` as a number")]
    NotANumber { index: usize, name: &'static str, token: String },
    #[error("field {index} (`{name}`): non-finite value")]
    NonFinite { index: usize, name: &'static str },
    #[error("field `{name}`: {reason}")]
    Domain { name: &'static str, reason: &'static str },
    #[error("CSV header mismatch: expected `{CSV_HEADER}`")]
    Header,
    #[error("coordinate {value} m is outside the CAN range of ±214748.3647 m")]
    CanRange { value: f64 },
    #[error("CAN identifier {0:#x} exceeds 29 bits")]
    CanId(u32),
    #[error("expected {expected} CAN frames, found {found}")]
    CanFrameCount { expected: &'static str, found: usize },
    #[error("CAN frame {index} has id {found:#x}, expected {expected:#x}")]
    CanFrameId { index: usize, expected: u32, found: u32 },
    #[error("malformed CAN dump line: {0}")]
    CanDump(&'static str),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<CodecError>,
    },
    #[error("read failed: {0}")]
    Io(String),
}

impl CodecError {
    fn at_line(self, line: usize) -> Self {
        CodecError::AtLine { line, source: Box::new(self) }
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    line.trim().split(',').map(str::trim).collect()
}

fn number(fields: &[&str], index: usize, name: &'static str) -> Result<f64, CodecError> {
    let token = fields[index];
    let value: f64 = token
        .parse()
        .map_err(|_| CodecError::NotANumber { index, name, token: token.to_string() })?;
    if !value.is_finite() {
        return Err(CodecError::NonFinite { index, name });
    }
    Ok(value)
}

fn tagged<'a>(line: &'a str, tag: &'static str, names: &[&str]) -> Result<Vec<&'a str>, CodecError> {
    let fields = split_fields(line);
    if fields[0] != tag {
        return Err(CodecError::WrongTag { expected: tag, found: fields[0].to_string() });
    }
    if fields.len() != names.len() + 1 {
        return Err(CodecError::FieldCount { expected: names.len() + 1, found: fields.len() });
    }
    Ok(fields)
}

const IMU_FIELDS: [&str; 7] = ["t_s", "ax", "ay", "az", "gx", "gy", "gz"];
const RTS_FIELDS: [&str; 4] = ["t_s", "D_m", "Hz_deg", "V_deg"];

pub fn parse_imu_line(line: &str) -> Result<ImuSample, CodecError> {
    let fields = tagged(line, "IMU", &IMU_FIELDS)?;
    let mut v = [0.0; 7];
    for (i, name) in IMU_FIELDS.iter().enumerate() {
        v[i] = number(&fields, i + 1, name)?;
    }
    Ok(ImuSample::new(v[0], Vec3::new(v[1], v[2], v[3]), Vec3::new(v[4], v[5], v[6])))
}

pub fn format_imu_line(sample: &ImuSample) -> String {
    let (a, g) = (sample.accel, sample.gyro);
    format!("IMU,{},{},{},{},{},{},{}", sample.timestamp, a.x, a.y, a.z, g.x, g.y, g.z)
}

pub fn parse_rts_line(line: &str) -> Result<RtsObservation, CodecError> {
    let fields = tagged(line, "RTS", &RTS_FIELDS)?;
    let mut v = [0.0; 4];
    for (i, name) in RTS_FIELDS.iter().enumerate() {
        v[i] = number(&fields, i + 1, name)?;
    }
    let [timestamp, distance, hz_deg, v_deg] = v;
    if distance <= 0.0 {
        return Err(CodecError::Domain { name: "D_m", reason: "slant distance must be positive" });
    }
    if !(v_deg > 0.0 && v_deg < 180.0) {
        return Err(CodecError::Domain { name: "V_deg", reason: "zenith angle must lie in (0°, 180°)" });
    }
    let obs = RtsObservation {
        timestamp,
        slant_distance: distance,
        horizontal_angle: hz_deg.to_radians(),
        zenith_angle: v_deg.to_radians(),
    };
    // Degree-to-radian rounding cannot leave (0, π) for inputs inside
    // (0°, 180°), but keep the type invariant explicit.
    obs.validate()
        .map_err(|_| CodecError::Domain { name: "V_deg", reason: "zenith angle must lie in (0°, 180°)" })?;
    Ok(obs)
}

pub fn format_rts_line(obs: &RtsObservation) -> String {
    format!(
        "RTS,{},{},{},{}",
        obs.timestamp,
        obs.slant_distance,
        obs.horizontal_angle.to_degrees(),
        obs.zenith_angle.to_degrees()
    )
}

/// Reads a whole line-oriented stream, skipping blank and `#` lines.
/// Errors carry the 1-based line number.
pub fn read_lines<R, T>(reader: R, parse: impl Fn(&str) -> Result<T, CodecError>) -> Result<Vec<T>, CodecError>
where
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CodecError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(parse(trimmed).map_err(|e| e.at_line(i + 1))?);
    }
    Ok(out)
}

pub fn read_imu_stream<R: BufRead>(reader: R) -> Result<Vec<ImuSample>, CodecError> {
    read_lines(reader, parse_imu_line)
}

pub fn read_rts_stream<R: BufRead>(reader: R) -> Result<Vec<RtsObservation>, CodecError> {
    read_lines(reader, parse_rts_line)
}

pub fn write_csv_record(record: &FusedRecord) -> String {
    let mut line = String::with_capacity(160);
    let att = &record.attitude_used;
    let values = [
        record.timestamp,
        record.prism_nav.x,
        record.prism_nav.y,
        record.prism_nav.z,
        record.poi_nav.x,
        record.poi_nav.y,
        record.poi_nav.z,
        att.roll.to_degrees(),
        att.pitch.to_degrees(),
        att.yaw.to_degrees(),
        record.alpha_used,
        record.imu_timestamp_used,
    ];
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        // -0.000000000 and 0.000000000 must not differ between runs that
        // produce ±0.
        let v = if *v == 0.0 { 0.0 } else { *v };
        let _ = write!(line, "{v:.9}");
    }
    line
}

const CSV_FIELDS: [&str; 12] = [
    "t_s", "prism_x_m", "prism_y_m", "prism_z_m", "poi_x_m", "poi_y_m", "poi_z_m", "roll_deg", "pitch_deg",
    "yaw_deg", "alpha", "imu_t_s",
];

pub fn read_csv_record(line: &str) -> Result<FusedRecord, CodecError> {
    let fields = split_fields(line);
    if fields.len() != CSV_FIELDS.len() {
        return Err(CodecError::FieldCount { expected: CSV_FIELDS.len(), found: fields.len() });
    }
    let mut v = [0.0; 12];
    for (i, name) in CSV_FIELDS.iter().enumerate() {
        v[i] = number(&fields, i, name)?;
    }
    Ok(FusedRecord {
        timestamp: v[0],
        prism_nav: Vec3::new(v[1], v[2], v[3]),
        poi_nav: Vec3::new(v[4], v[5], v[6]),
        attitude_used: Attitude::new(v[7].to_radians(), v[8].to_radians(), v[9].to_radians()),
        alpha_used: v[10],
        imu_timestamp_used: v[11],
    })
}

/// Header line plus one line per record, newline-terminated.
pub fn write_csv(records: &[FusedRecord]) -> String {
    let mut out = String::with_capacity(CSV_HEADER.len() + 1 + records.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&write_csv_record(r));
        out.push('\n');
    }
    out
}

/// Reads a fused CSV log. The first non-blank line must be the header.
pub fn read_csv<R: BufRead>(reader: R) -> Result<Vec<FusedRecord>, CodecError> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CodecError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !header_seen {
            if trimmed != CSV_HEADER {
                return Err(CodecError::Header.at_line(i + 1));
            }
            header_seen = true;
            continue;
        }
        out.push(read_csv_record(trimmed).map_err(|e| e.at_line(i + 1))?);
    }
    if !header_seen {
        return Err(CodecError::Header);
    }
    Ok(out)
}

/// Classic or extended CAN frame with an 8-byte payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CanFrame {
    id: u32,
    pub data: [u8; 8],
}

impl CanFrame {
    pub fn new(id: u32, data: [u8; 8]) -> Result<Self, CodecError> {
        if id > CAN_MAX_ID {
            return Err(CodecError::CanId(id));
        }
        Ok(Self { id, data })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    fn pair(id: u32, a: i32, b: i32) -> Result<Self, CodecError> {
        let mut data = [0u8; 8];
        data[..4].copy_from_slice(&a.to_le_bytes());
        data[4..].copy_from_slice(&b.to_le_bytes());
        Self::new(id, data)
    }

    fn split(&self) -> (i32, i32) {
        let mut a = [0u8; 4];
        let mut b = [0u8; 4];
        a.copy_from_slice(&self.data[..4]);
        b.copy_from_slice(&self.data[4..]);
        (i32::from_le_bytes(a), i32::from_le_bytes(b))
    }
}

/// `id#payload`, id as 8 hex digits, payload as 16 hex digits.
impl std::fmt::Display for CanFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:08X}#", self.id)?;
        for b in &self.data {
            write!(f, "{b:02X}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for CanFrame {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (id, payload) = s.trim().split_once('#').ok_or(CodecError::CanDump("missing `#`"))?;
        if id.is_empty() || id.len() > 8 || !id.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(CodecError::CanDump("identifier must be 1-8 hex digits"));
        }
        if payload.len() != 16 || !payload.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(CodecError::CanDump("payload must be 16 hex digits"));
        }
        let id = u32::from_str_radix(id, 16).map_err(|_| CodecError::CanDump("bad identifier"))?;
        let mut data = [0u8; 8];
        for (i, byte) in data.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&payload[2 * i..2 * i + 2], 16)
                .map_err(|_| CodecError::CanDump("bad payload byte"))?;
        }
        CanFrame::new(id, data)
    }
}

fn to_fixed(value: f64) -> Result<i32, CodecError> {
    let scaled = (value / CAN_POSITION_LSB).round();
    if !(scaled.is_finite() && scaled.abs() <= i32::MAX as f64) {
        return Err(CodecError::CanRange { value });
    }
    Ok(scaled as i32)
}

fn from_fixed(raw: i32) -> f64 {
    raw as f64 * CAN_POSITION_LSB
}

/// Positions carried by the CAN frames. The receive time of the frames is
/// the only timestamp on the bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanPosition {
    pub prism_nav: Vec3,
    pub poi_nav: Vec3,
    pub attitude: Option<CanAttitude>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanAttitude {
    pub attitude: Attitude,
    pub sequence: u16,
}

pub fn encode_can_frames(record: &FusedRecord, base_id: u32) -> Result<[CanFrame; 3], CodecError> {
    if base_id > CAN_MAX_ID - 2 {
        return Err(CodecError::CanId(base_id.saturating_add(2)));
    }
    let p = record.prism_nav;
    let q = record.poi_nav;
    Ok([
        CanFrame::pair(base_id, to_fixed(p.x)?, to_fixed(p.y)?)?,
        CanFrame::pair(base_id + 1, to_fixed(p.z)?, to_fixed(q.x)?)?,
        CanFrame::pair(base_id + 2, to_fixed(q.y)?, to_fixed(q.z)?)?,
    ])
}

fn angle_to_fixed(angle: f64) -> i16 {
    // Wrapped angles stay within ±180°, i.e. ±18000 LSB.
    (angle.to_degrees() / CAN_ANGLE_LSB).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// The optional attitude frame at `base_id + 3`.
pub fn encode_attitude_frame(attitude: &Attitude, sequence: u16, base_id: u32) -> Result<CanFrame, CodecError> {
    if base_id > CAN_MAX_ID - 3 {
        return Err(CodecError::CanId(base_id.saturating_add(3)));
    }
    let mut data = [0u8; 8];
    data[0..2].copy_from_slice(&angle_to_fixed(attitude.roll).to_le_bytes());
    data[2..4].copy_from_slice(&angle_to_fixed(attitude.pitch).to_le_bytes());
    data[4..6].copy_from_slice(&angle_to_fixed(attitude.yaw).to_le_bytes());
    data[6..8].copy_from_slice(&sequence.to_le_bytes());
    CanFrame::new(base_id + 3, data)
}

/// Decodes three position frames, optionally followed by the attitude frame.
pub fn decode_can_frames(frames: &[CanFrame], base_id: u32) -> Result<CanPosition, CodecError> {
    if !(3..=4).contains(&frames.len()) {
        return Err(CodecError::CanFrameCount { expected: "3 or 4", found: frames.len() });
    }
    for (index, frame) in frames.iter().enumerate() {
        let expected = base_id.wrapping_add(index as u32);
        if frame.id != expected {
            return Err(CodecError::CanFrameId { index, expected, found: frame.id });
        }
    }
    let (px, py) = frames[0].split();
    let (pz, qx) = frames[1].split();
    let (qy, qz) = frames[2].split();
    let attitude = frames.get(3).map(|f| {
        let word = |i: usize| [f.data[i], f.data[i + 1]];
        let angle = |i: usize| (i16::from_le_bytes(word(i)) as f64 * CAN_ANGLE_LSB).to_radians();
        CanAttitude {
            attitude: Attitude::new(angle(0), angle(2), angle(4)),
            sequence: u16::from_le_bytes(word(6)),
        }
    });
    Ok(CanPosition {
        prism_nav: Vec3::new(from_fixed(px), from_fixed(py), from_fixed(pz)),
        poi_nav: Vec3::new(from_fixed(qx), from_fixed(qy), from_fixed(qz)),
        attitude,
    })
}

/// Parses a CAN dump, one `id#payload` frame per line.
pub fn read_can_dump<R: BufRead>(reader: R) -> Result<Vec<CanFrame>, CodecError> {
    read_lines(reader, str::parse)
}
