//! `tiltcomp` command-line front end.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 when input data or
//! configuration is invalid or a file cannot be read or written.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tiltcomp::codec::{self, encode_attitude_frame, encode_can_frames, format_imu_line, format_rts_line};
use tiltcomp::config::{self, KeyValues};
use tiltcomp::eval::{self, ErrorStats};
use tiltcomp::geodesy::{fit_helmert, HelmertParams};
use tiltcomp::pipeline::{replay, FusedRecord};
use tiltcomp::sim::{self, generate_scenario};
use tiltcomp::Vec3;

#[derive(Debug, Parser)]
#[command(name = "tiltcomp", version, about = "Tilt-compensated prism positioning from IMU and total station data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic IMU, total station and ground-truth files.
    Simulate(SimulateArgs),
    /// Fuse IMU and total station streams into a CSV of ground-point positions.
    Fuse(FuseArgs),
    /// Fit a similarity (Helmert) transform to corresponding point pairs.
    HelmertFit(HelmertFitArgs),
    /// Report per-axis error statistics and 3D RMSE of fused series.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario file in `key = value` format; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory receiving imu.txt, rts.txt and truth.csv (created if missing).
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Overrides the `seed` key of the scenario file.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// IMU stream, one `IMU,t,ax,ay,az,gx,gy,gz` line per sample.
    #[arg(long, value_name = "FILE")]
    imu: PathBuf,
    /// Total station stream, one `RTS,t,D,Hz,V` line per observation.
    #[arg(long, value_name = "FILE")]
    rts: PathBuf,
    /// Output fused CSV. Written only if the whole run succeeds.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Lever arm and filter settings in `key = value` format.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Helmert parameters file as written by `helmert-fit`.
    #[arg(long, value_name = "FILE", conflicts_with = "identity_helmert")]
    helmert: Option<PathBuf>,
    /// Use the identity station-to-navigation transform (the default when
    /// no --helmert file is given).
    #[arg(long)]
    identity_helmert: bool,
    /// Also write every record as CAN frames, one `ID#PAYLOAD` line per frame.
    #[arg(long, value_name = "FILE")]
    can_dump: Option<PathBuf>,
    /// First 29-bit CAN identifier, decimal or 0x-prefixed hex.
    #[arg(long, value_name = "ID", default_value = "0x100", value_parser = parse_can_id)]
    can_base_id: u32,
    /// Append the optional attitude frame (base id + 3) to each CAN record.
    #[arg(long, requires = "can_dump")]
    can_attitude: bool,
}

#[derive(Debug, Args)]
struct HelmertFitArgs {
    /// Point pairs, one `sx,sy,sz,tx,ty,tz` line each (source, then target).
    #[arg(long, value_name = "FILE")]
    pairs: PathBuf,
    /// Output parameter file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["truth", "reference", "summary"]))]
struct EvalArgs {
    /// Fused CSV files, one series each.
    #[arg(value_name = "FUSED_CSV", required_unless_present = "summary", conflicts_with = "summary")]
    fused: Vec<PathBuf>,
    /// Ground-truth CSV from `simulate`; residuals use the truth point at each record time.
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
    /// Fixed reference point `x,y,z` in meters.
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true, value_parser = parse_point)]
    reference: Option<Vec3>,
    /// Check a stats CSV: recompute each row's RMSE from its means, standard
    /// deviations and count and compare it to the stored RMSE.
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
    /// Allowed difference between stored and reconstructed RMSE in --summary mode, mm.
    #[arg(long, value_name = "MM", default_value_t = 0.2, requires = "summary")]
    tolerance: f64,
    /// Series labels, in the order of the fused files (defaults to 1, 2, ...).
    #[arg(long, value_name = "ID", value_delimiter = ',')]
    labels: Vec<String>,
    /// Machine-readable statistics output, one row per series.
    #[arg(long, value_name = "FILE", conflicts_with = "summary")]
    stats_out: Option<PathBuf>,
    /// Maximum timestamp difference when matching records to truth rows, s.
    #[arg(long, value_name = "S", default_value_t = 1e-6, requires = "truth")]
    time_tolerance: f64,
}

fn parse_can_id(text: &str) -> Result<u32, String> {
    let value = match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(hex) => u32::from_str_radix(hex, 16),
        None => text.parse(),
    }
    .map_err(|e| format!("`{text}`: {e}"))?;
    if value > codec::CAN_MAX_ID - 3 {
        return Err(format!("`{text}` leaves no room for the frame ids below 0x1FFFFFFF"));
    }
    Ok(value)
}

fn parse_point(text: &str) -> Result<Vec3, String> {
    config::parse_vec3("reference", text).map_err(|e| e.to_string())
}

/// Data-level failure; maps to exit status 2.
#[derive(Debug)]
struct DataError(String);

impl<E: std::fmt::Display> From<E> for DataError {
    fn from(e: E) -> Self {
        DataError(e.to_string())
    }
}

fn context<T, E: std::fmt::Display>(path: &Path, r: Result<T, E>) -> Result<T, DataError> {
    r.map_err(|e| DataError(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, DataError> {
    context(path, fs::read_to_string(path))
}

fn open(path: &Path) -> Result<BufReader<File>, DataError> {
    context(path, File::open(path)).map(BufReader::new)
}

fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    context(path, fs::write(path, text))
}

fn load_config(path: Option<&Path>) -> Result<KeyValues, DataError> {
    match path {
        Some(p) => context(p, KeyValues::parse(&read_text(p)?)),
        None => Ok(KeyValues::default()),
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), DataError> {
    let kv = load_config(args.config.as_deref())?;
    let mut cfg = config::scenario_from(&kv)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let scenario = generate_scenario(&cfg)?;

    let mut imu = String::with_capacity(scenario.imu.len() * 120);
    for s in &scenario.imu {
        imu.push_str(&format_imu_line(s));
        imu.push('\n');
    }
    let mut rts = String::with_capacity(scenario.rts.len() * 60);
    for o in &scenario.rts {
        rts.push_str(&format_rts_line(o));
        rts.push('\n');
    }
    context(&args.out_dir, fs::create_dir_all(&args.out_dir))?;
    write_text(&args.out_dir.join("imu.txt"), &imu)?;
    write_text(&args.out_dir.join("rts.txt"), &rts)?;
    write_text(&args.out_dir.join("truth.csv"), &sim::write_truth_csv(&scenario.truth))?;
    eprintln!(
        "wrote {} IMU samples, {} RTS observations to {} (seed {})",
        scenario.imu.len(),
        scenario.rts.len(),
        args.out_dir.display(),
        cfg.seed
    );
    Ok(())
}

fn can_dump(records: &[FusedRecord], base_id: u32, with_attitude: bool) -> Result<String, DataError> {
    let mut out = String::with_capacity(records.len() * 26 * 4);
    for (i, r) in records.iter().enumerate() {
        let frames = encode_can_frames(r, base_id).map_err(|e| DataError(format!("record at t={}: {e}", r.timestamp)))?;
        for f in &frames {
            out.push_str(&f.to_string());
            out.push('\n');
        }
        if with_attitude {
            out.push_str(&encode_attitude_frame(&r.attitude_used, i as u16, base_id)?.to_string());
            out.push('\n');
        }
    }
    Ok(out)
}

fn fuse(args: &FuseArgs) -> Result<(), DataError> {
    let kv = load_config(args.config.as_deref())?;
    let helmert = match &args.helmert {
        Some(p) => context(p, config::parse_helmert(&read_text(p)?))?,
        None => HelmertParams::identity(),
    };
    let (cfg, initial_yaw) = config::pipeline_from(&kv, helmert)?;
    let imu = context(&args.imu, codec::read_imu_stream(open(&args.imu)?))?;
    let rts = context(&args.rts, codec::read_rts_stream(open(&args.rts)?))?;
    let out = replay(cfg, &imu, &rts, initial_yaw)?;

    // Encode everything before touching the filesystem so a failure leaves
    // no partial output behind.
    let csv = codec::write_csv(&out.records);
    let dump = match &args.can_dump {
        Some(_) => Some(can_dump(&out.records, args.can_base_id, args.can_attitude)?),
        None => None,
    };
    write_text(&args.out, &csv)?;
    if let (Some(path), Some(text)) = (&args.can_dump, dump) {
        write_text(path, &text)?;
    }
    let b = out.gyro_bias;
    eprintln!(
        "fused {} records ({} dropped, {} unpaired); gyro bias {:.3e}, {:.3e}, {:.3e} rad/s",
        out.records.len(),
        out.dropped,
        out.unpaired,
        b.x,
        b.y,
        b.z
    );
    Ok(())
}

fn read_pairs(path: &Path) -> Result<Vec<(Vec3, Vec3)>, DataError> {
    let text = read_text(path)?;
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || (pairs.is_empty() && line == "sx,sy,sz,tx,ty,tz") {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| DataError(format!("{}: line {}: expected six numbers", path.display(), i + 1)))?;
        if values.len() != 6 {
            return Err(DataError(format!("{}: line {}: expected 6 fields, found {}", path.display(), i + 1, values.len())));
        }
        pairs.push((Vec3::new(values[0], values[1], values[2]), Vec3::new(values[3], values[4], values[5])));
    }
    Ok(pairs)
}

fn helmert_fit(args: &HelmertFitArgs) -> Result<(), DataError> {
    let pairs = read_pairs(&args.pairs)?;
    let fit = context(&args.pairs, fit_helmert(&pairs))?;
    write_text(&args.out, &config::format_helmert(&fit.params))?;
    println!("fitted {} pairs, RMS residual {:.6} m", pairs.len(), fit.rms_residual);
    Ok(())
}

fn residuals_against_truth(
    records: &[FusedRecord],
    truth: &[sim::GroundTruthSample],
    tolerance: f64,
) -> Result<Vec<Vec3>, String> {
    records
        .iter()
        .map(|r| {
            let k = truth.partition_point(|s| s.timestamp < r.timestamp - tolerance);
            match truth.get(k) {
                Some(s) if (s.timestamp - r.timestamp).abs() <= tolerance => Ok(r.poi_nav - s.poi_nav),
                _ => Err(format!("no truth row within {tolerance} s of t={}", r.timestamp)),
            }
        })
        .collect()
}

fn evaluate(args: &EvalArgs) -> Result<(), DataError> {
    if let Some(path) = &args.summary {
        return check_summary(path, args.tolerance);
    }
    if !args.labels.is_empty() && args.labels.len() != args.fused.len() {
        return Err(DataError(format!("{} labels given for {} fused files", args.labels.len(), args.fused.len())));
    }
    let truth = match &args.truth {
        Some(p) => Some(context(p, sim::read_truth_csv(open(p)?))?),
        None => None,
    };
    let mut rows: Vec<(String, ErrorStats)> = Vec::new();
    for (i, path) in args.fused.iter().enumerate() {
        let records = context(path, codec::read_csv(open(path)?))?;
        let residuals = match (&truth, &args.reference) {
            (Some(t), _) => context(path, residuals_against_truth(&records, t, args.time_tolerance))?,
            (None, Some(reference)) => records.iter().map(|r| r.poi_nav - reference).collect(),
            (None, None) => unreachable!("clap requires a mode"),
        };
        let stats = context(path, eval::compute_residual_stats(&residuals))?;
        let label = args.labels.get(i).cloned().unwrap_or_else(|| (i + 1).to_string());
        rows.push((label, stats));
    }
    print!("{}", eval::render_report(&rows));
    if let Some(path) = &args.stats_out {
        write_text(path, &eval::write_stats_csv(&rows))?;
    }
    Ok(())
}

fn check_summary(path: &Path, tolerance: f64) -> Result<(), DataError> {
    let rows = context(path, eval::read_stats_csv(&read_text(path)?))?;
    if rows.is_empty() {
        return Err(DataError(format!("{}: no rows", path.display())));
    }
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(2).max(2);
    println!("{:<width$} {:>9} {:>13} {:>9}  status", "ID", "RMSE_3D", "reconstructed", "diff");
    let mut mismatches = 0;
    for (label, s) in &rows {
        let rebuilt = s.reconstructed_rmse();
        let diff = rebuilt - s.rmse3d;
        let ok = diff.abs() <= tolerance;
        mismatches += usize::from(!ok);
        println!(
            "{:<width$} {:>9.3} {:>13.3} {:>9.3}  {}",
            label,
            s.rmse3d,
            rebuilt,
            diff,
            if ok { "ok" } else { "MISMATCH" }
        );
    }
    if mismatches > 0 {
        return Err(DataError(format!("{mismatches} row(s) differ by more than {tolerance} mm")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fuse(a) => fuse(a),
        Command::HelmertFit(a) => helmert_fit(a),
        Command::Eval(a) => evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(DataError(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
