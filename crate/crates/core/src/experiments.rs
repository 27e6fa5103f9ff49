//! Random datasets, sweep plans and report statistics.
//!
//! A sweep is a list of independent [`Trial`]s. Running a trial yields one
//! [`SweepRow`]; rows are grouped into per-`(N, delta)` [`Aggregate`]s. The
//! plans here run sequentially; the `xpoint` crate executes the same plans in
//! parallel and assembles the report in plan order.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{self, EigenSystem, OpAmpParams};
use crate::error::{Error, Result};
use crate::fdsim::{self, SimConfig};
use crate::linalg::{self, EigPair, Matrix};
use crate::math;

/// Programmable device conductances in microsiemens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConductanceLevels {
    pub values_us: [f64; 12],
    /// Conductance corresponding to a matrix entry of 1.
    pub unit_us: f64,
}

impl ConductanceLevels {
    pub const RRAM: Self = Self {
        values_us: [
            60.0, 90.0, 120.0, 150.0, 190.0, 210.0, 240.0, 290.0, 310.0, 340.0, 390.0, 420.0,
        ],
        unit_us: 100.0,
    };

    /// Level `i` as a dimensionless matrix entry.
    pub fn normalized(&self, i: usize) -> f64 {
        self.values_us[i] / self.unit_us
    }
}

impl Default for ConductanceLevels {
    fn default() -> Self {
        Self::RRAM
    }
}

/// `n x n` matrix with entries drawn uniformly from the conductance levels.
pub fn gen_random_matrix(n: usize, levels: &ConductanceLevels, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("matrix size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * n)
        .map(|_| levels.normalized(rng.gen_range(0..levels.values_us.len())))
        .collect();
    Matrix::new(n, n, data)
}

/// Seed of one sweep cell; stable across runs and platforms.
pub fn derive_seed(base_seed: u64, n: usize, delta_index: usize, trial: usize) -> u64 {
    [n as u64, delta_index as u64, trial as u64]
        .into_iter()
        .fold(math::splitmix64(base_seed), |h, v| math::splitmix64(h ^ v))
}

/// Which campaign produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Delta,
    Size,
    Variation,
}

impl SweepMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepMode::Delta => "delta",
            SweepMode::Size => "size",
            SweepMode::Variation => "variation",
        }
    }
}

/// Quantified readings of "independent of N", "very tight" and "tight around
/// the uniform case".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Coefficient of variation of per-size mean times at fixed delta.
    pub time_cv_max: f64,
    /// Stdev / mean of times within one `(N, delta)` cell.
    pub time_spread_max: f64,
    /// Relative band around the uniform baseline for variation trials.
    pub variation_band: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            time_cv_max: 0.15,
            time_spread_max: 0.10,
            variation_band: 0.30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportHeader {
    pub mode: SweepMode,
    pub cfg: SimConfig,
    pub params: OpAmpParams,
    pub base_seed: Option<u64>,
    pub thresholds: Thresholds,
}

/// How a trial obtains its system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialKind {
    /// Random matrix from the trial seed, uniform mismatch.
    Random,
    /// The sweep's given matrix, uniform mismatch.
    Given,
    /// The given matrix with per-amplifier mismatch drawn from `(0, delta_max)`
    /// using the trial seed; `delta` holds `delta_max`.
    Varied,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub n: usize,
    pub delta_index: usize,
    pub delta: f64,
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub kind: TrialKind,
}

impl Trial {
    /// Key identifying the trial inside a report.
    pub fn key(&self) -> (usize, u64, Option<usize>, bool) {
        (self.n, self.delta.to_bits(), self.trial, self.kind == TrialKind::Varied)
    }
}

/// One simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub delta: f64,
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub varied: bool,
    pub computing_time: Option<f64>,
    pub epsilon: Option<f64>,
    pub lambda_h: Option<f64>,
    pub saturated_index: Option<usize>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn key(&self) -> (usize, u64, Option<usize>, bool) {
        (self.n, self.delta.to_bits(), self.trial, self.varied)
    }

    fn empty(t: &Trial) -> Self {
        Self {
            n: t.n,
            delta: t.delta,
            trial: t.trial,
            seed: t.seed,
            varied: t.kind == TrialKind::Varied,
            computing_time: None,
            epsilon: None,
            lambda_h: None,
            saturated_index: None,
            error: None,
        }
    }
}

/// Plan for a delta sweep on one matrix.
pub fn delta_plan(n: usize, deltas: &[f64]) -> Vec<Trial> {
    deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| Trial {
            n,
            delta_index: i,
            delta,
            trial: None,
            seed: None,
            kind: TrialKind::Given,
        })
        .collect()
}

/// Plan for the size campaign, ordered by `(N, delta, trial)`.
pub fn size_plan(sizes: &[usize], trials: usize, deltas: &[f64], base_seed: u64) -> Vec<Trial> {
    let mut plan = Vec::with_capacity(sizes.len() * trials * deltas.len());
    for &n in sizes {
        for (di, &delta) in deltas.iter().enumerate() {
            for t in 0..trials {
                plan.push(Trial {
                    n,
                    delta_index: di,
                    delta,
                    trial: Some(t),
                    seed: Some(derive_seed(base_seed, n, di, t)),
                    kind: TrialKind::Random,
                });
            }
        }
    }
    plan
}

/// Plan for variation trials: the uniform `delta_max / 2` baseline first.
pub fn variation_plan(n: usize, delta_max: f64, trials: usize, base_seed: u64) -> Vec<Trial> {
    let mut plan = Vec::with_capacity(trials + 1);
    plan.push(Trial {
        n,
        delta_index: 0,
        delta: delta_max / 2.0,
        trial: None,
        seed: None,
        kind: TrialKind::Given,
    });
    plan.extend((0..trials).map(|t| Trial {
        n,
        delta_index: 0,
        delta: delta_max,
        trial: Some(t),
        seed: Some(derive_seed(base_seed, n, 0, t)),
        kind: TrialKind::Varied,
    }));
    plan
}

/// A coefficient matrix with its oracle eigenpair, shared by the trials of a sweep.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub matrix: Matrix,
    pub dominant: EigPair,
}

impl Prepared {
    pub fn new(matrix: Matrix) -> Result<Self> {
        let dominant = circuit::dominant(&matrix)?;
        Ok(Self { matrix, dominant })
    }
}

/// Simulates one trial. Failures are recorded in the row.
pub fn run_trial(
    trial: &Trial,
    given: Option<&Prepared>,
    cfg: &SimConfig,
    params: OpAmpParams,
) -> SweepRow {
    let mut row = SweepRow::empty(trial);
    if let Err(e) = fill_row(&mut row, trial, given, cfg, params) {
        row.error = Some(e.to_string());
    }
    row
}

fn fill_row(
    row: &mut SweepRow,
    trial: &Trial,
    given: Option<&Prepared>,
    cfg: &SimConfig,
    params: OpAmpParams,
) -> Result<()> {
    let owned;
    let prepared = match trial.kind {
        TrialKind::Random => {
            let seed = trial.seed.ok_or(Error::InvalidArgument("random trial needs a seed"))?;
            owned = Prepared::new(gen_random_matrix(trial.n, &ConductanceLevels::RRAM, seed)?)?;
            &owned
        }
        TrialKind::Given | TrialKind::Varied => {
            given.ok_or(Error::InvalidArgument("trial needs the sweep matrix"))?
        }
    };
    let lambda_max = prepared.dominant.value;
    let sys = match trial.kind {
        TrialKind::Varied => {
            let seed = trial.seed.ok_or(Error::InvalidArgument("varied trial needs a seed"))?;
            let deltas = circuit::sample_variation(trial.delta, trial.n, seed)?;
            EigenSystem::varied(&prepared.matrix, lambda_max, &deltas, params)?
        }
        _ => EigenSystem::uniform(&prepared.matrix, lambda_max, trial.delta, params)?,
    };
    row.lambda_h = Some(sys.spectral_abscissa()?);
    let trace = fdsim::simulate(&sys, cfg)?;
    row.computing_time = trace.computing_time;
    row.saturated_index = trace.saturated_index;
    row.epsilon = Some(linalg::solution_error(
        &trace.steady_state,
        &prepared.dominant.vector,
    )?);
    Ok(())
}

/// Summary statistics of one column within a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub stdev: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let m = mean(values);
        Some(Self {
            count: values.len(),
            mean: m,
            stdev: stdev(values),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn stdev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    math::sqrt(ss / (values.len() - 1) as f64)
}

/// Least-squares line `y = slope * x + intercept` and its R^2.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let (mx, my) = (mean(xs), mean(ys));
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub n: usize,
    pub delta: f64,
    pub varied: bool,
    pub rows: usize,
    pub failures: usize,
    pub computing_time: Option<Stats>,
    pub epsilon: Option<Stats>,
    pub lambda_h: Option<Stats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub header: ReportHeader,
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<Aggregate>,
}

impl SweepReport {
    /// Groups rows by `(N, delta, varied)` in order of first appearance.
    pub fn new(header: ReportHeader, rows: Vec<SweepRow>) -> Self {
        let mut keys: Vec<(usize, u64, bool)> = Vec::new();
        for r in &rows {
            let k = (r.n, r.delta.to_bits(), r.varied);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let aggregates = keys
            .into_iter()
            .map(|(n, bits, varied)| {
                let cell: Vec<&SweepRow> = rows
                    .iter()
                    .filter(|r| r.n == n && r.delta.to_bits() == bits && r.varied == varied)
                    .collect();
                let column = |f: fn(&SweepRow) -> Option<f64>| {
                    Stats::of(&cell.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
                };
                Aggregate {
                    n,
                    delta: f64::from_bits(bits),
                    varied,
                    rows: cell.len(),
                    failures: cell.iter().filter(|r| r.error.is_some()).count(),
                    computing_time: column(|r| r.computing_time),
                    epsilon: column(|r| r.epsilon),
                    lambda_h: column(|r| r.lambda_h),
                }
            })
            .collect();
        Self {
            header,
            rows,
            aggregates,
        }
    }

    pub fn aggregate(&self, n: usize, delta: f64, varied: bool) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.n == n && a.delta == delta && a.varied == varied)
    }
}

fn header(mode: SweepMode, cfg: &SimConfig, params: OpAmpParams, base_seed: Option<u64>) -> ReportHeader {
    ReportHeader {
        mode,
        cfg: *cfg,
        params,
        base_seed,
        thresholds: Thresholds::default(),
    }
}

/// Computing time, error and `lambda_h` of `a` at each mismatch.
pub fn sweep_delta(
    a: &Matrix,
    deltas: &[f64],
    cfg: &SimConfig,
    params: OpAmpParams,
) -> Result<SweepReport> {
    if deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument("deltas must be positive"));
    }
    let prepared = Prepared::new(a.clone())?;
    let rows = delta_plan(a.rows(), deltas)
        .iter()
        .map(|t| run_trial(t, Some(&prepared), cfg, params))
        .collect();
    Ok(SweepReport::new(header(SweepMode::Delta, cfg, params, None), rows))
}

/// Random matrices of each size, `trials` per `(N, delta)` cell.
pub fn sweep_size(
    sizes: &[usize],
    trials: usize,
    deltas: &[f64],
    base_seed: u64,
    cfg: &SimConfig,
    params: OpAmpParams,
) -> Result<SweepReport> {
    if sizes.is_empty() || trials == 0 {
        return Err(Error::InvalidArgument("need at least one size and one trial"));
    }
    let rows = size_plan(sizes, trials, deltas, base_seed)
        .iter()
        .map(|t| run_trial(t, None, cfg, params))
        .collect();
    Ok(SweepReport::new(
        header(SweepMode::Size, cfg, params, Some(base_seed)),
        rows,
    ))
}

/// Per-amplifier mismatch trials plus the uniform `delta_max / 2` baseline.
pub fn variation_trials(
    a: &Matrix,
    delta_max: f64,
    trials: usize,
    base_seed: u64,
    cfg: &SimConfig,
    params: OpAmpParams,
) -> Result<SweepReport> {
    if trials == 0 || !(delta_max > 0.0 && delta_max < 1.0) {
        return Err(Error::InvalidArgument("need trials >= 1 and 0 < delta_max < 1"));
    }
    let prepared = Prepared::new(a.clone())?;
    let rows = variation_plan(a.rows(), delta_max, trials, base_seed)
        .iter()
        .map(|t| run_trial(t, Some(&prepared), cfg, params))
        .collect();
    Ok(SweepReport::new(
        header(SweepMode::Variation, cfg, params, Some(base_seed)),
        rows,
    ))
}
