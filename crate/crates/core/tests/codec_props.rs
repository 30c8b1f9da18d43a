use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use tiltcomp::attitude::{Attitude, ImuSample};
use tiltcomp::codec::{
    decode_can_frames, encode_attitude_frame, encode_can_frames, format_imu_line, format_rts_line, parse_imu_line,
    parse_rts_line, read_can_dump, read_csv, read_csv_record, read_imu_stream, write_csv, write_csv_record, CanFrame,
    CodecError, CAN_POSITION_LSB,
};
use tiltcomp::geodesy::RtsObservation;
use tiltcomp::pipeline::FusedRecord;
use tiltcomp::Vec3;

fn coord() -> impl Strategy<Value = f64> {
    -214_748.0..214_748.0f64
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn record() -> impl Strategy<Value = FusedRecord> {
    (0.0..1e5f64, vec3(), vec3(), -1.3..1.3f64, -1.3..1.3f64, -PI..PI, 0.9..=1.0f64, 0.0..1e5f64).prop_map(
        |(t, prism, poi, roll, pitch, yaw, alpha, imu_t)| FusedRecord {
            timestamp: t,
            prism_nav: prism,
            poi_nav: poi,
            attitude_used: Attitude::new(roll, pitch, yaw),
            alpha_used: alpha,
            imu_timestamp_used: imu_t,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn csv_round_trip(r in record()) {
        let back = read_csv_record(&write_csv_record(&r)).unwrap();
        prop_assert!((r.prism_nav - back.prism_nav).abs().max() <= 1e-9);
        prop_assert!((r.poi_nav - back.poi_nav).abs().max() <= 1e-9);
        prop_assert!((r.timestamp - back.timestamp).abs() <= 1e-9);
        for (a, b) in [
            (r.attitude_used.roll, back.attitude_used.roll),
            (r.attitude_used.pitch, back.attitude_used.pitch),
            (r.attitude_used.yaw, back.attitude_used.yaw),
        ] {
            prop_assert!((a.to_degrees() - b.to_degrees()).abs() <= 1e-7);
        }
    }

    #[test]
    fn can_round_trip(r in record(), base in 0u32..0x1FFF_FF00) {
        let frames = encode_can_frames(&r, base).unwrap();
        let decoded = decode_can_frames(&frames, base).unwrap();
        prop_assert!((r.prism_nav - decoded.prism_nav).abs().max() <= CAN_POSITION_LSB / 2.0 + 1e-9);
        prop_assert!((r.poi_nav - decoded.poi_nav).abs().max() <= CAN_POSITION_LSB / 2.0 + 1e-9);
        prop_assert!(decoded.attitude.is_none());
    }

    #[test]
    fn can_dump_text_round_trip(r in record(), base in 0u32..0x1FFF_FF00, seq: u16) {
        let mut frames = encode_can_frames(&r, base).unwrap().to_vec();
        frames.push(encode_attitude_frame(&r.attitude_used, seq, base).unwrap());
        let dump: String = frames.iter().map(|f| format!("{f}\n")).collect();
        let parsed = read_can_dump(dump.as_bytes()).unwrap();
        prop_assert_eq!(&parsed, &frames);
        let decoded = decode_can_frames(&parsed, base).unwrap();
        let att = decoded.attitude.unwrap();
        prop_assert_eq!(att.sequence, seq);
        prop_assert!((att.attitude.roll - r.attitude_used.roll).abs().to_degrees() <= 0.005 + 1e-9);
    }

    #[test]
    fn imu_line_round_trip_is_exact(t in 0.0..1e6f64, a in vec3(), g in vec3()) {
        let s = ImuSample::new(t, a, g);
        prop_assert_eq!(parse_imu_line(&format_imu_line(&s)).unwrap(), s);
    }

    #[test]
    fn rts_line_round_trip(t in 0.0..1e6f64, d in 0.01..5000.0f64, hz in 0.0..TAU, v in 0.01..PI - 0.01) {
        let obs = RtsObservation::new(t, d, hz, v).unwrap();
        let back = parse_rts_line(&format_rts_line(&obs)).unwrap();
        prop_assert_eq!(back.timestamp, t);
        prop_assert_eq!(back.slant_distance, d);
        prop_assert!((back.horizontal_angle - hz).abs() <= 1e-14);
        prop_assert!((back.zenith_angle - v).abs() <= 1e-14);
    }

    #[test]
    fn parsers_never_panic(line in "\\PC{0,80}") {
        let _ = parse_imu_line(&line);
        let _ = parse_rts_line(&line);
        let _ = read_csv_record(&line);
        let _ = line.parse::<CanFrame>();
    }

    #[test]
    fn numeric_garbage_is_structured(line in "(IMU|RTS)?,[0-9eE.+-]{0,6}(,[0-9a-z.+-]{0,6}){0,9}") {
        if let Err(e) = parse_imu_line(&line) {
            prop_assert!(!e.to_string().is_empty());
        }
        if let Err(e) = parse_rts_line(&line) {
            prop_assert!(!e.to_string().is_empty());
        }
    }
}

#[test]
fn csv_file_round_trip_and_header_check() {
    let r = FusedRecord {
        timestamp: 10.2,
        prism_nav: Vec3::new(2.1312, 0.9983, -0.4698),
        poi_nav: Vec3::new(2.1312, 0.9983, -1.5374),
        attitude_used: Attitude::default(),
        alpha_used: 0.9,
        imu_timestamp_used: 10.2,
    };
    let text = write_csv(&[r, r]);
    let back = read_csv(text.as_bytes()).unwrap();
    assert_eq!(back.len(), 2);
    let broken = text.replacen("t_s,", "time,", 1);
    assert!(matches!(read_csv(broken.as_bytes()), Err(CodecError::AtLine { line: 1, .. })));
}

#[test]
fn stream_errors_carry_line_numbers() {
    let text = "# header\nIMU,0,0,0,9.8,0,0,0\n\nIMU,0.01,0,0,9.8,0,0\n";
    match read_imu_stream(text.as_bytes()) {
        Err(CodecError::AtLine { line, source }) => {
            assert_eq!(line, 4);
            assert_eq!(*source, CodecError::FieldCount { expected: 8, found: 7 });
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn prism_example_bytes() {
    let r = FusedRecord {
        timestamp: 0.0,
        prism_nav: Vec3::new(1.2345, 0.0, 0.0),
        poi_nav: Vec3::zeros(),
        attitude_used: Attitude::default(),
        alpha_used: 0.9,
        imu_timestamp_used: 0.0,
    };
    let frames = encode_can_frames(&r, 0x100).unwrap();
    assert_eq!(frames[0].data[0..4], 12345i32.to_le_bytes());
    assert_eq!(frames[0].to_string(), "00000100#3930000000000000");
    assert_eq!(frames[1].data, [0; 8]);
    assert_eq!(frames[2].data, [0; 8]);
}
