//! CSV output of the one-sided recursion testbed.

use std::io::Write;

use hetfp_core::diagnostics::{one_sided_recursion, RecursionSpec, RecursionTrace};

use crate::error::{CliError, Result};

/// Runs the recursion and writes `k,y0,…,y{n-1},min`, one row per iterate.
pub fn write_trace(spec: &RecursionSpec<f64>, out: impl Write) -> Result<RecursionTrace<f64>> {
    let trace = one_sided_recursion(spec)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend((0..spec.y0.len()).map(|n| format!("y{n}")));
    header.push("min".into());
    w.write_record(&header).map_err(CliError::write("<lemma4 output>"))?;
    for (k, y) in trace.trajectory.iter().enumerate() {
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let row = std::iter::once(k.to_string()).chain(y.iter().map(f64::to_string)).chain([min.to_string()]);
        w.write_record(row).map_err(CliError::write("<lemma4 output>"))?;
    }
    w.flush().map_err(CliError::write("<lemma4 output>"))?;
    Ok(trace)
}
