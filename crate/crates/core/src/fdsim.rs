//! Explicit finite-difference integration of the circuit dynamics.
//!
//! One step is `w <- (I + alpha M) w` with `alpha = L0 * omega0 * dt`, followed
//! by supply clipping: an output `x_k` beyond `+-v_supp` is clamped to the rail
//! and its companion `z_k` is reset to zero (anti-windup).
//!
//! A run starts from `x = x0 * (1, ..., 1)`, `z = 0` and continues until
//! `(1 + settle_factor)` times the first-saturation time, or `t_max`. The final
//! output block is the steady state; the computing time is the earliest time the
//! outputs are within `conv_tol` (relative) of it.

use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{AssociatedOperator, EigenSystem};
use crate::error::{Error, Result};
use crate::linalg::{self, LinearMap, Matrix, SquareCoefficients, Vector};
use crate::math;

/// Upper bound on recorded samples when the stride is chosen automatically.
pub const MAX_SAMPLES: usize = 10_000;

/// Pre-clip magnitude (in units of `v_supp`) treated as numerical blow-up.
const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Dimensionless step `L0 * omega0 * dt`.
    pub alpha: f64,
    /// Initial value of every output, volts.
    pub x0: f64,
    /// Simulation horizon, seconds.
    pub t_max: f64,
    /// Relative distance to the steady state that counts as computed.
    pub conv_tol: f64,
    /// Steps between recorded samples; `None` keeps at most [`MAX_SAMPLES`] over `t_max`.
    pub record_stride: Option<usize>,
    /// After the first output saturates, keep integrating this many times the
    /// saturation time to establish the steady-state reference.
    pub settle_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            x0: 1e-3,
            t_max: 1e-3,
            conv_tol: 1e-3,
            record_stride: None,
            settle_factor: 5.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::InvalidArgument("alpha must lie in (0, 0.5]"));
        }
        if !(self.x0 > 0.0) || !self.x0.is_finite() {
            return Err(Error::InvalidArgument("x0 must be positive"));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidArgument("t_max must be positive"));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::InvalidArgument("conv_tol must be positive"));
        }
        if !(self.settle_factor > 0.0) || !self.settle_factor.is_finite() {
            return Err(Error::InvalidArgument("settle_factor must be positive"));
        }
        if self.record_stride == Some(0) {
            return Err(Error::InvalidArgument("record_stride must be at least 1"));
        }
        Ok(())
    }

    /// Time step in seconds for the given gain-bandwidth product (rad/s).
    pub fn dt(&self, gain_bandwidth: f64) -> f64 {
        self.alpha / gain_bandwidth
    }
}

/// Recorded output of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Number of outputs `N`.
    pub n: usize,
    /// Time step in seconds.
    pub dt: f64,
    /// Steps between samples.
    pub stride: usize,
    pub times: Vec<f64>,
    /// Full state `[x; z]` at each sample.
    pub states: Vec<Vector>,
    pub computing_time: Option<f64>,
    /// Output block at the end of the run.
    pub steady_state: Vector,
    /// First output to reach the rail.
    pub saturated_index: Option<usize>,
    pub saturation_time: Option<f64>,
    pub end_time: f64,
    /// The run hit `t_max` before the settle window after saturation ended.
    pub truncated: bool,
}

impl Trace {
    /// Output block of sample `k`.
    pub fn x(&self, k: usize) -> &[f64] {
        &self.states[k][..self.n]
    }

    /// `max_k |x_k|` of sample `k`.
    pub fn max_output(&self, k: usize) -> f64 {
        math::norm_inf(self.x(k))
    }
}

fn clip(w: &mut [f64], n: usize, v_supp: f64) -> Option<usize> {
    let mut first: Option<(usize, f64)> = None;
    for k in 0..n {
        let mag = w[k].abs();
        if mag > v_supp {
            if first.is_none_or(|(_, m)| mag > m) {
                first = Some((k, mag));
            }
            w[k] = if w[k] > 0.0 { v_supp } else { -v_supp };
            w[n + k] = 0.0;
        }
    }
    first.map(|(k, _)| k)
}

fn check_finite(w: &[f64], v_supp: f64, step: usize) -> Result<()> {
    for v in w {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        if v.abs() > BLOWUP_FACTOR * v_supp {
            return Err(Error::Instability { step });
        }
    }
    Ok(())
}

/// One explicit step with a dense associated matrix.
///
/// Returns `(I + alpha M) w` with outputs beyond the rail clamped and their
/// companions zeroed.
pub fn step(w: &[f64], m: &Matrix, alpha: f64, v_supp: f64) -> Result<Vector> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if m.rows() != w.len() || !w.len().is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: w.len(),
        });
    }
    let mw = linalg::matvec(m, w)?;
    let mut next: Vec<f64> = w.iter().zip(mw.iter()).map(|(a, b)| a + alpha * b).collect();
    check_finite(&next, v_supp, 1)?;
    clip(&mut next, w.len() / 2, v_supp);
    Ok(Vector::from_vec_unchecked(next))
}

/// Sample-level computing time: the first recorded time whose outputs are
/// within `conv_tol` (relative, Euclidean) of `reference`.
pub fn computing_time(trace: &Trace, reference: &[f64], conv_tol: f64) -> Option<f64> {
    let scale = math::norm2(reference);
    (0..trace.times.len())
        .find(|&k| relative_distance(trace.x(k), reference, scale) < conv_tol)
        .map(|k| trace.times[k])
}

fn relative_distance(x: &[f64], reference: &[f64], scale: f64) -> f64 {
    let d2: f64 = x.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    math::sqrt(d2) / scale
}

/// Integrates `sys` from the power-on state until it settles or `t_max` passes.
pub fn simulate<A: SquareCoefficients>(sys: &EigenSystem<A>, cfg: &SimConfig) -> Result<Trace> {
    run(core::slice::from_ref(sys), &[], cfg)
}

/// Runs with a decreasing sequence of mismatches.
///
/// Each entry is `(delta, switch_fraction)`: the run moves to the next entry
/// once `max |x|` reaches `switch_fraction * v_supp`. The state is carried over
/// at every switch; the last entry's fraction is unused.
pub fn simulate_scheduled<A: SquareCoefficients + Clone>(
    sys: &EigenSystem<A>,
    schedule: &[(f64, f64)],
    cfg: &SimConfig,
) -> Result<Trace> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("schedule must not be empty"));
    }
    if schedule.windows(2).any(|p| p[1].0 >= p[0].0) {
        return Err(Error::InvalidArgument("schedule deltas must be strictly decreasing"));
    }
    if schedule.iter().any(|&(_, f)| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidArgument("switch fractions must lie in (0, 1]"));
    }
    let systems = schedule
        .iter()
        .map(|&(d, _)| sys.with_delta(d))
        .collect::<Result<Vec<_>>>()?;
    let switches: Vec<f64> = schedule[..schedule.len() - 1].iter().map(|p| p.1).collect();
    run(&systems, &switches, cfg)
}

struct Runner<'a, A> {
    ops: Vec<AssociatedOperator<'a, A>>,
    switches: &'a [f64],
    alpha: f64,
    v_supp: f64,
    n: usize,
    buf: Vec<f64>,
}

#[derive(Clone)]
struct RunState {
    w: Vec<f64>,
    phase: usize,
    step: usize,
}

impl<A: SquareCoefficients> Runner<'_, A> {
    /// Advances one step; returns the first output that hit the rail, if any.
    fn advance(&mut self, st: &mut RunState) -> Result<Option<usize>> {
        self.ops[st.phase].apply(&st.w, &mut self.buf);
        for (wk, mk) in st.w.iter_mut().zip(&self.buf) {
            *wk += self.alpha * mk;
        }
        st.step += 1;
        check_finite(&st.w, self.v_supp, st.step)?;
        let clipped = clip(&mut st.w, self.n, self.v_supp);
        if st.phase < self.switches.len()
            && math::norm_inf(&st.w[..self.n]) >= self.switches[st.phase] * self.v_supp
        {
            st.phase += 1;
        }
        Ok(clipped)
    }
}

fn run<A: SquareCoefficients>(
    systems: &[EigenSystem<A>],
    switches: &[f64],
    cfg: &SimConfig,
) -> Result<Trace> {
    cfg.validate()?;
    let first = &systems[0];
    let n = first.n();
    let params = *first.params();
    for sys in systems {
        let margin = cfg.alpha * sys.operator().norm_inf();
        if !(margin < 2.0) {
            return Err(Error::InvalidArgument("alpha * |M|_inf must stay below 2"));
        }
    }
    let dt = cfg.dt(params.gain_bandwidth());
    let max_steps = math::floor(cfg.t_max / dt) as usize;
    let stride = cfg
        .record_stride
        .unwrap_or_else(|| (math::ceil(max_steps as f64 / MAX_SAMPLES as f64) as usize).max(1));
    let limit = (max_steps / stride) * stride;

    let mut runner = Runner {
        ops: systems.iter().map(|s| s.operator()).collect(),
        switches,
        alpha: cfg.alpha,
        v_supp: params.v_supp,
        n,
        buf: vec![0.0; 2 * n],
    };
    let mut w = vec![0.0; 2 * n];
    w[..n].iter_mut().for_each(|x| *x = cfg.x0);
    let mut st = RunState { w, phase: 0, step: 0 };

    let mut times = vec![0.0];
    let mut states = vec![Vector::from_vec_unchecked(st.w.clone())];
    let mut phases = vec![0usize];
    let mut saturation: Option<(usize, usize)> = None;
    let mut end = limit;
    let mut truncated = false;

    while st.step < end {
        let clipped = runner.advance(&mut st)?;
        if saturation.is_none() {
            if let Some(k) = clipped {
                saturation = Some((st.step, k));
                let want = math::ceil(st.step as f64 * (1.0 + cfg.settle_factor)) as usize;
                let want = want.div_ceil(stride) * stride;
                truncated = want > limit;
                end = want.min(limit);
            }
        }
        if st.step.is_multiple_of(stride) {
            times.push(st.step as f64 * dt);
            states.push(Vector::from_vec_unchecked(st.w.clone()));
            phases.push(st.phase);
        }
    }

    let steady_state = Vector::from_vec_unchecked(st.w[..n].to_vec());
    let computing_time = match saturation {
        None => None,
        Some(_) => {
            let scale = math::norm2(&steady_state);
            let within = |x: &[f64]| relative_distance(x, &steady_state, scale) < cfg.conv_tol;
            match (0..states.len()).find(|&k| within(&states[k][..n])) {
                None => None,
                Some(0) => Some(0.0),
                Some(j) => {
                    // re-run the last stride before the first good sample step by step
                    let mut probe = RunState {
                        w: states[j - 1].as_slice().to_vec(),
                        phase: phases[j - 1],
                        step: (j - 1) * stride,
                    };
                    let mut hit = j * stride;
                    while probe.step < j * stride {
                        runner.advance(&mut probe)?;
                        if within(&probe.w[..n]) {
                            hit = probe.step;
                            break;
                        }
                    }
                    Some(hit as f64 * dt)
                }
            }
        }
    };

    Ok(Trace {
        n,
        dt,
        stride,
        times,
        states,
        computing_time,
        steady_state,
        saturated_index: saturation.map(|(_, k)| k),
        saturation_time: saturation.map(|(s, _)| s as f64 * dt),
        end_time: st.step as f64 * dt,
        truncated,
    })
}

/// Growth-limited time to lift the outputs from `x0` to the rail:
/// `ln(v_supp / x0) / (L0 * omega0 * lambda_h)`.
pub fn predicted_rise_time(lambda_h: f64, gain_bandwidth: f64, v_supp: f64, x0: f64) -> f64 {
    math::ln(v_supp / x0) / (gain_bandwidth * lambda_h)
}
