//! Per-sample diagnostics and the fixed-schema CSV series.
//!
//! Column order is part of the file format; see `docs/config.md`.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

/// One time sample of every monitored functional. Fields a mode does not
/// produce stay `None` and are written as empty columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub delta_u: Option<f64>,
    pub diameter: Option<f64>,
    pub mean_velocity: Option<Vec<f64>>,
    pub kinetic_energy: Option<f64>,
    pub phi_minus: Option<f64>,
    pub thickness_min: Option<f64>,
    pub eta_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub lambda_max: Option<f64>,
    pub grad_max: Option<f64>,
    pub entropy_max: Option<f64>,
    pub pressure_integral: Option<f64>,
    pub energy_fluctuation: Option<f64>,
    pub lyapunov: Option<f64>,
    pub mass: Option<f64>,
    pub residual: Option<f64>,
}

pub const COLUMNS: [&str; 17] = [
    "t",
    "delta_u",
    "diameter",
    "mean_velocity",
    "kinetic_energy",
    "phi_minus",
    "thickness_min",
    "eta_min",
    "omega_max",
    "lambda_max",
    "grad_max",
    "entropy_max",
    "pressure_integral",
    "energy_fluctuation",
    "lyapunov",
    "mass",
    "residual",
];

/// Literal written in every value column of the row that marks a blow-up.
pub const BLOWUP_SENTINEL: &str = "BLOWUP";

/// Shortest decimal representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl DiagnosticsRecord {
    pub fn at(t: f64) -> Self {
        Self { t, ..Default::default() }
    }

    fn csv_fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.t),
            opt(self.delta_u),
            opt(self.diameter),
            self.mean_velocity
                .as_ref()
                .map(|m| m.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
            opt(self.kinetic_energy),
            opt(self.phi_minus),
            opt(self.thickness_min),
            opt(self.eta_min),
            opt(self.omega_max),
            opt(self.lambda_max),
            opt(self.grad_max),
            opt(self.entropy_max),
            opt(self.pressure_integral),
            opt(self.energy_fluctuation),
            opt(self.lyapunov),
            opt(self.mass),
            opt(self.residual),
        ]
    }
}

/// Writes the header, one row per record and, when `blowup_at` is set, a
/// final sentinel row.
pub fn write_series<W: Write>(
    mut w: W,
    records: &[DiagnosticsRecord],
    blowup_at: Option<f64>,
) -> io::Result<()> {
    writeln!(w, "{}", COLUMNS.join(","))?;
    for r in records {
        writeln!(w, "{}", r.csv_fields().join(","))?;
    }
    if let Some(t) = blowup_at {
        let mut row = vec![fmt_f64(t)];
        row.extend(std::iter::repeat_n(BLOWUP_SENTINEL.to_string(), COLUMNS.len() - 1));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSeries {
    pub records: Vec<DiagnosticsRecord>,
    pub blowup_at: Option<f64>,
}

fn parse_opt(s: &str) -> Result<Option<f64>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse::<f64>().map(Some).map_err(|e| format!("bad number {s:?}: {e}"))
    }
}

/// Reads back a series written by [`write_series`].
pub fn read_series<R: BufRead>(r: R) -> Result<ParsedSeries, String> {
    let mut lines = r.lines();
    let header = lines.next().ok_or("empty series")?.map_err(|e| e.to_string())?;
    if header != COLUMNS.join(",") {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut out = ParsedSeries { records: Vec::new(), blowup_at: None };
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != COLUMNS.len() {
            return Err(format!("row {}: expected {} columns, got {}", k + 2, COLUMNS.len(), cols.len()));
        }
        let t = cols[0].parse::<f64>().map_err(|e| format!("row {}: {e}", k + 2))?;
        if cols[1] == BLOWUP_SENTINEL {
            out.blowup_at = Some(t);
            continue;
        }
        let f = |i: usize| parse_opt(cols[i]).map_err(|e| format!("row {}: {e}", k + 2));
        let mean_velocity = if cols[3].is_empty() {
            None
        } else {
            Some(
                cols[3]
                    .split(';')
                    .map(|s| s.parse::<f64>().map_err(|e| format!("row {}: {e}", k + 2)))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        };
        out.records.push(DiagnosticsRecord {
            t,
            delta_u: f(1)?,
            diameter: f(2)?,
            mean_velocity,
            kinetic_energy: f(4)?,
            phi_minus: f(5)?,
            thickness_min: f(6)?,
            eta_min: f(7)?,
            omega_max: f(8)?,
            lambda_max: f(9)?,
            grad_max: f(10)?,
            entropy_max: f(11)?,
            pressure_integral: f(12)?,
            energy_fluctuation: f(13)?,
            lyapunov: f(14)?,
            mass: f(15)?,
            residual: f(16)?,
        });
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `t` over the last half of the
/// samples, ignoring values at or below `floor`. `None` when fewer than two
/// usable samples remain.
pub fn tail_log_slope(samples: &[(f64, f64)], floor: f64) -> Option<f64> {
    let start = samples.len() / 2;
    let pts: Vec<(f64, f64)> = samples[start..]
        .iter()
        .filter(|(_, y)| *y > floor && y.is_finite())
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    linear_slope(&pts)
}

/// Ordinary least-squares slope; `None` for fewer than two distinct abscissae.
pub fn linear_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
