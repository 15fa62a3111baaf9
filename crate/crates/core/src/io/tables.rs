//! CSV emitters: one header row with units, LF endings, 12 significant digits.

use std::path::Path;

use crate::analytic::{Axis, Grid, Metric};
use crate::error::{Error, Result};
use crate::hb::{FrequencyPoint, IsReport, SweepTrace};
use crate::io::units::{ratio_to_db, w_to_dbm};
use crate::linear::SParameters;

pub const SIGNIFICANT_DIGITS: usize = 12;

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
    } else {
        // csv readers take "NaN"/"inf" as floats
        format!("{v}")
    }
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

fn deg(z: num_complex::Complex64) -> f64 {
    z.arg().to_degrees()
}

/// Writes `rows` under `header`. Nothing is created when `rows` is empty.
fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!("nothing to write to {}", path.display())));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Sweep records in sweep order; metrics of unconverged points are NaN.
pub fn write_trace_csv(trace: &SweepTrace, path: &Path) -> Result<()> {
    let rows = trace
        .records
        .iter()
        .map(|r| {
            vec![
                num(w_to_dbm(r.p_in)),
                num(r.s21_db()),
                num(r.s11_db()),
                num(w_to_dbm(r.p_sub)),
                num(r.diode_v_peak),
                flag(r.converged),
            ]
        })
        .collect();
    write_rows(
        path,
        &["p_in_dbm", "s21_db", "s11_db", "p_sub_dbm", "v_diode_peak_v", "converged"],
        rows,
    )
}

pub fn write_sparams_csv(points: &[SParameters], path: &Path) -> Result<()> {
    let rows = points
        .iter()
        .map(|s| {
            let mut row = vec![num(s.frequency)];
            for z in [s.s11, s.s21, s.s12, s.s22] {
                row.push(num(20.0 * z.norm().log10()));
                row.push(num(deg(z)));
            }
            row
        })
        .collect();
    write_rows(
        path,
        &[
            "f_hz", "s11_db", "s11_deg", "s21_db", "s21_deg", "s12_db", "s12_deg", "s22_db", "s22_deg",
        ],
        rows,
    )
}

fn axis_column(axis: Axis) -> &'static str {
    match axis {
        Axis::Cv => "c_v_f",
        Axis::Ztx => "z_tx_ohm",
        Axis::Vdc => "v_dc_v",
        Axis::Fin => "f_in_hz",
    }
}

/// Long format, one row per cell: x, y, metric in dBm (powers) or dB (loss).
pub fn write_grid_csv(grid: &Grid, path: &Path) -> Result<()> {
    let (column, convert): (&str, fn(f64) -> f64) = match grid.metric {
        Metric::PTh => ("p_th_dbm", w_to_dbm),
        Metric::IlSs => ("il_ss_db", ratio_to_db),
        Metric::PMax => ("p_max_dbm", w_to_dbm),
    };
    let rows = grid
        .cells
        .iter()
        .map(|c| vec![num(c.x), num(c.y), num(convert(c.value))])
        .collect();
    write_rows(path, &[axis_column(grid.x_axis), axis_column(grid.y_axis), column], rows)
}

/// Suppression curve of a sweep.
pub fn write_is_csv(report: &IsReport, path: &Path) -> Result<()> {
    let rows = report
        .curve
        .iter()
        .map(|&(p, is)| vec![num(w_to_dbm(p)), num(is)])
        .collect();
    write_rows(path, &["p_in_dbm", "is_db"], rows)
}

/// Large-signal response against drive frequency.
pub fn write_frequency_csv(points: &[FrequencyPoint], path: &Path) -> Result<()> {
    let rows = points
        .iter()
        .map(|p| {
            vec![
                num(p.f_in),
                num(p.s21_db()),
                num(20.0 * p.s11.norm().log10()),
                num(w_to_dbm(p.p_sub)),
                flag(p.converged),
            ]
        })
        .collect();
    write_rows(path, &["f_hz", "s21_db", "s11_db", "p_sub_dbm", "converged"], rows)
}
