//! Run reports: per-outer-iteration diagnostics plus a config echo, written
//! as CSV.
//!
//! The written file contains only deterministic content; wall-clock duration
//! stays in the in-memory report (and on stderr) so that identical runs
//! produce bit-identical files.

use std::io::{self, Write};

use crate::segmenter::SegmentationResult;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub outer: usize,
    pub inner_iters: usize,
    pub residual: f64,
    pub energy: f64,
    pub cap_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub dice: f64,
    pub hd95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Every effective parameter of the run, in a fixed order, enough to
    /// reproduce the experiment.
    pub config_echo: Vec<(String, String)>,
    pub rows: Vec<ReportRow>,
    /// Present when a ground-truth mask was supplied.
    pub metrics: Option<EvalMetrics>,
    /// Wall-clock seconds; never written into the CSV.
    pub duration_secs: f64,
}

impl RunReport {
    /// One row per outer iteration, straight from the result's diagnostics.
    pub fn from_result(
        result: &SegmentationResult,
        config_echo: Vec<(String, String)>,
        metrics: Option<EvalMetrics>,
        duration_secs: f64,
    ) -> Self {
        let rows = (0..result.outer_iterations)
            .map(|k| ReportRow {
                outer: k,
                inner_iters: result.inner_diagnostics[k].iterations_run,
                residual: result.inner_diagnostics[k].final_residual,
                energy: result.energy_history[k],
                cap_delta: result.capacity_delta_history[k],
            })
            .collect();
        Self {
            config_echo,
            rows,
            metrics,
            duration_secs,
        }
    }

    /// Comment lines with the config echo (and metrics when present), the
    /// column header, then one line per outer iteration.
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        for (key, value) in &self.config_echo {
            writeln!(out, "# {key}={value}")?;
        }
        if let Some(m) = &self.metrics {
            writeln!(out, "# dice={}", fmt_sig(m.dice, 6))?;
            writeln!(out, "# hd95={}", fmt_sig(m.hd95, 6))?;
        }
        writeln!(out, "outer,inner_iters,residual,energy,cap_delta")?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                row.outer,
                row.inner_iters,
                fmt_sig(row.residual, 6),
                fmt_sig(row.energy, 6),
                fmt_sig(row.cap_delta, 6)
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv text is utf-8")
    }
}

/// Format with a fixed number of significant digits, decimal notation for
/// moderate magnitudes and scientific notation outside them.
pub fn fmt_sig(value: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return if value.is_nan() {
            "nan".to_string()
        } else if value > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let exponent = value.abs().log10().floor() as i32;
    if exponent < -4 || exponent >= digits as i32 {
        format!("{:.*e}", digits - 1, value)
    } else {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        format!("{value:.decimals$}")
    }
}
