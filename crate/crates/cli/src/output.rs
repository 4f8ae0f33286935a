//! CSV and JSON emission.

use std::path::Path;

use serde::Serialize;

use tsdyn_core::{Branch, TimeScaleSolution, TimeScaleSpec, Trajectory};

use crate::CliError;

fn csv_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns `t, y_1..y_m, branch`, one row per stored value in time order.
pub fn write_solution_csv(path: &Path, sol: &TimeScaleSolution, ts: &TimeScaleSpec) -> Result<usize, CliError> {
    let rows = sol.rows(ts);
    let m = rows.first().map_or(0, |r| r.1.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("y_{i}")));
    header.push("branch".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (t, y, branch) in &rows {
        let mut rec = vec![fmt(*t)];
        rec.extend(y.iter().map(|v| fmt(*v)));
        rec.push(branch.as_str().to_string());
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| csv_error(path, e))?;
    Ok(rows.len())
}

/// Impulsive-side trajectory: columns `s, x_1..x_m`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<usize, CliError> {
    let m = traj.samples.first().map_or(0, |r| r.1.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["s".to_string()];
    header.extend((1..=m).map(|i| format!("x_{i}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (s, x) in &traj.samples {
        let mut rec = vec![fmt(*s)];
        rec.extend(x.iter().map(|v| fmt(*v)));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| csv_error(path, e))?;
    Ok(traj.samples.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub y: Vec<f64>,
    pub branch: Branch,
}

/// Reads a file written by [`write_solution_csv`].
pub fn read_solution_csv(path: &Path) -> Result<Vec<CsvRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let n = rec.len();
        if n < 2 {
            return Err(csv_error(path, "row has fewer than two columns"));
        }
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| csv_error(path, e));
        let branch = match &rec[n - 1] {
            "interior" => Branch::Interior,
            "right_endpoint_value" => Branch::RightEndpointValue,
            other => return Err(csv_error(path, format!("unknown branch `{other}`"))),
        };
        rows.push(CsvRow { t: num(0)?, y: (1..n - 1).map(num).collect::<Result<_, _>>()?, branch });
    }
    Ok(rows)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| csv_error(path, e))
}
