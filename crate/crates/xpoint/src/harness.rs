//! Parallel execution of sweep plans.
//!
//! Trials run on the rayon pool in any order; the finished report is always in
//! plan order. Rows found in an earlier partial CSV are reused, so an
//! interrupted sweep resumes where it stopped.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use xpoint_core::experiments::{
    self, Prepared, ReportHeader, SweepMode, SweepReport, SweepRow, Thresholds, Trial,
};
use xpoint_core::{Matrix, OpAmpParams, SimConfig};

use crate::error::{Error, Result};
use crate::io::{self, RowWriter};

/// Everything that determines a sweep's rows.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub mode: SweepMode,
    /// Required for delta and variation sweeps.
    pub matrix: Option<Matrix>,
    pub sizes: Vec<usize>,
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub delta_max: f64,
    pub cfg: SimConfig,
    pub params: OpAmpParams,
}

impl SweepSpec {
    pub fn plan(&self) -> Result<Vec<Trial>> {
        let need_matrix = || {
            self.matrix
                .as_ref()
                .ok_or_else(|| Error::Manifest(format!("{} sweep needs a matrix", self.mode.as_str())))
        };
        Ok(match self.mode {
            SweepMode::Delta => {
                if self.deltas.iter().any(|&d| d.is_nan() || d <= 0.0) {
                    return Err(xpoint_core::Error::InvalidArgument("deltas must be positive").into());
                }
                experiments::delta_plan(need_matrix()?.rows(), &self.deltas)
            }
            SweepMode::Size => {
                if self.sizes.is_empty() || self.trials == 0 {
                    return Err(xpoint_core::Error::InvalidArgument(
                        "need at least one size and one trial",
                    )
                    .into());
                }
                experiments::size_plan(&self.sizes, self.trials, &self.deltas, self.base_seed)
            }
            SweepMode::Variation => {
                if self.trials == 0 || !(self.delta_max > 0.0 && self.delta_max < 1.0) {
                    return Err(xpoint_core::Error::InvalidArgument(
                        "need trials >= 1 and 0 < delta_max < 1",
                    )
                    .into());
                }
                experiments::variation_plan(need_matrix()?.rows(), self.delta_max, self.trials, self.base_seed)
            }
        })
    }

    pub fn header(&self) -> ReportHeader {
        ReportHeader {
            mode: self.mode,
            cfg: self.cfg,
            params: self.params,
            base_seed: (self.mode != SweepMode::Delta).then_some(self.base_seed),
            thresholds: Thresholds::default(),
        }
    }
}

/// Progress callback: `(finished, total, row)`.
pub type Progress<'a> = &'a (dyn Fn(usize, usize, &SweepRow) + Sync);

/// Runs `plan`, reusing `done` rows and appending new rows to `sink` as they finish.
pub fn run_plan(
    plan: &[Trial],
    given: Option<&Prepared>,
    cfg: &SimConfig,
    params: OpAmpParams,
    done: &[SweepRow],
    sink: Option<&Mutex<RowWriter>>,
    progress: Option<Progress<'_>>,
) -> Result<Vec<SweepRow>> {
    let finished = AtomicUsize::new(0);
    let sink_error: Mutex<Option<Error>> = Mutex::new(None);
    let rows: Vec<SweepRow> = plan
        .par_iter()
        .map(|trial| {
            if let Some(row) = done.iter().find(|r| r.key() == trial.key()) {
                return row.clone();
            }
            let row = experiments::run_trial(trial, given, cfg, params);
            if let Some(sink) = sink {
                if let Err(e) = sink.lock().expect("row sink poisoned").push(&row) {
                    sink_error.lock().expect("error slot poisoned").get_or_insert(e);
                }
            }
            let k = finished.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(report) = progress {
                report(k, plan.len(), &row);
            }
            row
        })
        .collect();
    match sink_error.into_inner().expect("error slot poisoned") {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

/// Runs a sweep. With `out_dir`, rows stream into `sweep.csv` and earlier rows
/// in that file are reused; the final report replaces it in plan order.
pub fn run_sweep(spec: &SweepSpec, out_dir: Option<&Path>, progress: Option<Progress<'_>>) -> Result<SweepReport> {
    let plan = spec.plan()?;
    let prepared = spec.matrix.clone().map(Prepared::new).transpose()?;
    let rows = match out_dir {
        None => run_plan(&plan, prepared.as_ref(), &spec.cfg, spec.params, &[], None, progress)?,
        Some(dir) => {
            let path = dir.join("sweep.csv");
            let done = if path.exists() { io::read_rows(&path)? } else { Vec::new() };
            let sink = Mutex::new(RowWriter::append(&path)?);
            run_plan(&plan, prepared.as_ref(), &spec.cfg, spec.params, &done, Some(&sink), progress)?
        }
    };
    let report = SweepReport::new(spec.header(), rows);
    if let Some(dir) = out_dir {
        io::write_report(dir, "sweep", &report)?;
    }
    Ok(report)
}
