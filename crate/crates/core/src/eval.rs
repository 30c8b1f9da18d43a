//! Per-axis error statistics and 3D RMSE against a reference point.

use std::fmt::Write as _;

use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no estimates to evaluate")]
    Empty,
}

/// Residual statistics in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean: [f64; 3],
    /// Sample standard deviation (n − 1 divisor); zero when `n == 1`.
    pub std: [f64; 3],
    pub rmse3d: f64,
    pub n: usize,
}

impl ErrorStats {
    /// RMSE implied by the means, standard deviations and count alone.
    pub fn reconstructed_rmse(&self) -> f64 {
        reconstruct_rmse(self.mean, self.std, self.n)
    }
}

/// `sqrt(Σ_axes mean² + (n−1)/n · std²)`; exact for sample standard deviations.
pub fn reconstruct_rmse(mean: [f64; 3], std: [f64; 3], n: usize) -> f64 {
    let n = n as f64;
    let factor = if n > 0.0 { (n - 1.0) / n } else { 0.0 };
    (0..3).map(|i| mean[i] * mean[i] + factor * std[i] * std[i]).sum::<f64>().sqrt()
}

/// Statistics of `estimate − reference` over all estimates (inputs in meters).
pub fn compute_stats(estimates: &[Vec3], reference: &Vec3) -> Result<ErrorStats, EvalError> {
    compute_residual_stats(&estimates.iter().map(|e| e - reference).collect::<Vec<_>>())
}

/// Statistics of residual vectors given in meters.
pub fn compute_residual_stats(residuals: &[Vec3]) -> Result<ErrorStats, EvalError> {
    if residuals.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = residuals.len();
    let nf = n as f64;
    let mm: Vec<Vec3> = residuals.iter().map(|r| r * 1000.0).collect();
    let mean = mm.iter().fold(Vec3::zeros(), |acc, r| acc + r) / nf;
    let std = if n > 1 {
        let ss = mm.iter().fold(Vec3::zeros(), |acc, r| {
            let d = r - mean;
            acc + d.component_mul(&d)
        });
        (ss / (nf - 1.0)).map(f64::sqrt)
    } else {
        Vec3::zeros()
    };
    let rmse3d = (mm.iter().map(|r| r.norm_squared()).sum::<f64>() / nf).sqrt();
    Ok(ErrorStats { mean: mean.into(), std: std.into(), rmse3d, n })
}

/// Fixed-width table, all quantities in mm with three decimals.
pub fn render_report(rows: &[(String, ErrorStats)]) -> String {
    let id_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(2).max(2);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<id_width$} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>6}",
        "ID", "mean_X", "mean_Y", "mean_Z", "std_X", "std_Y", "std_Z", "RMSE_3D", "n"
    );
    for (label, s) in rows {
        let _ = writeln!(
            out,
            "{:<id_width$} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>6}",
            label, s.mean[0], s.mean[1], s.mean[2], s.std[0], s.std[1], s.std[2], s.rmse3d, s.n
        );
    }
    out
}

pub const STATS_CSV_HEADER: &str = "id,mean_x_mm,mean_y_mm,mean_z_mm,std_x_mm,std_y_mm,std_z_mm,rmse3d_mm,n";

/// One machine-readable row per series, header first.
pub fn write_stats_csv(rows: &[(String, ErrorStats)]) -> String {
    let mut out = String::from(STATS_CSV_HEADER);
    out.push('\n');
    for (label, s) in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            label, s.mean[0], s.mean[1], s.mean[2], s.std[0], s.std[1], s.std[2], s.rmse3d, s.n
        );
    }
    out
}

/// Parses rows written by [`write_stats_csv`] (or hand-written summaries in
/// the same layout).
pub fn read_stats_csv(text: &str) -> Result<Vec<(String, ErrorStats)>, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(h) if h == STATS_CSV_HEADER => {}
        _ => return Err(format!("expected header `{STATS_CSV_HEADER}`")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 9 {
                return Err(format!("row {}: expected 9 fields, found {}", i + 1, f.len()));
            }
            let num = |j: usize| {
                f[j].parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("row {}: bad number `{}`", i + 1, f[j]))
            };
            let n = f[8].parse::<usize>().map_err(|_| format!("row {}: bad count `{}`", i + 1, f[8]))?;
            Ok((
                f[0].to_string(),
                ErrorStats {
                    mean: [num(1)?, num(2)?, num(3)?],
                    std: [num(4)?, num(5)?, num(6)?],
                    rmse3d: num(7)?,
                    n,
                },
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_residuals() {
        let s = compute_residual_stats(&[Vec3::new(0.001, 0.0, 0.0), Vec3::new(0.0, 0.001, 0.0)]).unwrap();
        assert_abs_diff_eq!(s.rmse3d, 1.0, epsilon = 1e-12);
        assert_eq!(s.n, 2);
    }

    #[test]
    fn perfect_estimates() {
        let r = Vec3::new(2.0, 1.0, -1.5);
        let s = compute_stats(&[r; 5], &r).unwrap();
        assert_eq!(s, ErrorStats { mean: [0.0; 3], std: [0.0; 3], rmse3d: 0.0, n: 5 });
    }

    #[test]
    fn single_estimate_has_zero_std() {
        let s = compute_residual_stats(&[Vec3::new(0.003, 0.004, 0.0)]).unwrap();
        assert_eq!(s.std, [0.0; 3]);
        assert_abs_diff_eq!(s.rmse3d, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(compute_stats(&[], &Vec3::zeros()), Err(EvalError::Empty));
    }

    #[test]
    fn table_row_one_reconstruction() {
        let rmse = reconstruct_rmse([-0.046, -0.160, 0.006], [2.037, 1.809, 0.906], 154);
        assert!((rmse - 2.867).abs() <= 0.05, "{rmse}");
    }

    #[test]
    fn identity_holds_and_permutation_invariant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let est: Vec<Vec3> = (0..97)
            .map(|_| Vec3::new(rng.random_range(-0.02..0.03), rng.random_range(-0.01..0.01), rng.random_range(-0.05..0.0)))
            .collect();
        let reference = Vec3::new(0.001, -0.002, 0.0);
        let s = compute_stats(&est, &reference).unwrap();
        let rel = (s.rmse3d.powi(2) - s.reconstructed_rmse().powi(2)).abs() / s.rmse3d.powi(2);
        assert!(rel <= 1e-9, "{rel}");

        let mut shuffled = est.clone();
        shuffled.reverse();
        shuffled.rotate_left(31);
        let t = compute_stats(&shuffled, &reference).unwrap();
        assert_abs_diff_eq!(s.rmse3d, t.rmse3d, epsilon = 1e-12);
        for i in 0..3 {
            assert_abs_diff_eq!(s.mean[i], t.mean[i], epsilon = 1e-12);
            assert_abs_diff_eq!(s.std[i], t.std[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn report_layout() {
        let zero = ErrorStats { mean: [0.0; 3], std: [0.0; 3], rmse3d: 0.0, n: 1 };
        let text = render_report(&[("1".into(), zero)]);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].matches("0.000").count(), 7);

        let row = ErrorStats { mean: [-0.046, -0.160, 0.006], std: [2.037, 1.809, 0.906], rmse3d: 2.867, n: 154 };
        let text = render_report(&[("1".into(), row), ("2".into(), zero), ("3".into(), zero)]);
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().contains("2.8"));
    }

    #[test]
    fn stats_csv_round_trip() {
        let row = ErrorStats { mean: [-0.046, -0.160, 0.006], std: [2.037, 1.809, 0.906], rmse3d: 2.867, n: 154 };
        let text = write_stats_csv(&[("A".into(), row)]);
        let back = read_stats_csv(&text).unwrap();
        assert_eq!(back, vec![("A".to_string(), row)]);
        assert!(read_stats_csv("id,x\n").is_err());
    }
}
