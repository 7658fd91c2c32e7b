//! Stepwise peak operation modes: constant voltage (CV), constant current
//! then constant voltage (CC-CV) and constant power (CP).
//!
//! Every engine returns the full K-step trace and a [`SopResult`] whose SOP
//! is the smallest |P| over the trace. Per-step currents that hold a voltage
//! or a power are solved exactly against the step model through
//! [`StepResponse`], so the held quantity is exact at every step.
//!
//! SOC is enforced in every mode. When the nominal policy would run the SOC
//! past its bound, the policy is relaxed (held voltage moved towards rest for
//! CV, CC level lowered for CC-CV, power lowered for CP) until the SOC lands
//! on the bound at the end of the window.

use std::fmt;

use crate::analytic::{peak_current_soc_constraint, Constraint, SopResult};
use crate::ecm::{step, BatteryParams, BatteryState, OcvCurve, StepResponse, Window};
use crate::error::{Result, SopError};
use crate::soa::{trace_complies, Direction, Soa, SoaSample};

pub const DEFAULT_CP_TOL_W: f64 = 1e-6;
pub const MAX_BISECTION_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Cc,
    Cv,
    CcCv,
    Cp,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Cc, Mode::Cv, Mode::CcCv, Mode::Cp];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Cc => "cc",
            Mode::Cv => "cv",
            Mode::CcCv => "cccv",
            Mode::Cp => "cp",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = SopError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cc" => Ok(Mode::Cc),
            "cv" => Ok(Mode::Cv),
            "cccv" | "cc-cv" => Ok(Mode::CcCv),
            "cp" => Ok(Mode::Cp),
            other => Err(SopError::Input(format!("unknown mode '{other}'"))),
        }
    }
}

/// One step of a peak-operation trace. `index` runs 1..=K.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PomStep {
    pub index: usize,
    pub current: f64,
    pub vt: f64,
    pub soc: f64,
    pub vp: f64,
    pub power: f64,
}

impl SoaSample for PomStep {
    fn vt(&self) -> f64 {
        self.vt
    }
    fn current(&self) -> f64 {
        self.current
    }
    fn soc(&self) -> f64 {
        self.soc
    }
    fn step_index(&self, _position: usize) -> usize {
        self.index
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PomTrace {
    pub steps: Vec<PomStep>,
    /// First step held at the cut-off after a CC phase, when a shift happened in the window.
    pub mode_shift_index: Option<usize>,
}

impl PomTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn first(&self) -> &PomStep {
        &self.steps[0]
    }

    pub fn last(&self) -> &PomStep {
        &self.steps[self.steps.len() - 1]
    }

    /// Signed power of the step with the smallest |P|.
    pub fn min_abs_power(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.power)
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0)
    }

    pub fn mean_abs_current(&self) -> f64 {
        self.steps.iter().map(|s| s.current.abs()).sum::<f64>() / self.steps.len() as f64
    }

    pub fn mean_abs_power(&self) -> f64 {
        self.steps.iter().map(|s| s.power.abs()).sum::<f64>() / self.steps.len() as f64
    }

    /// max |P| − min |P| over the window.
    pub fn power_spread(&self) -> f64 {
        let (lo, hi) = self
            .steps
            .iter()
            .map(|s| s.power.abs())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
        hi - lo
    }
}

/// Where the CC-CV mode shift falls relative to the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcCvCase {
    /// CC at the current limit never reaches the cut-off within the window.
    CcOnly,
    /// CC at the current limit first passes the cut-off at step `kc`, 2 ≤ kc ≤ K.
    Transitional { kc: usize },
    /// The cut-off is already passed at the first step.
    CvOnly,
}

impl CcCvCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            CcCvCase::CcOnly => "case1_cc_only",
            CcCvCase::Transitional { .. } => "case2_transitional",
            CcCvCase::CvOnly => "case3_cv_only",
        }
    }
}

/// Runs K steps, asking `policy` for each step's current given the step
/// number (1-based) and the state entering the step.
fn run_window<F>(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    mut policy: F,
) -> Result<Vec<PomStep>>
where
    F: FnMut(usize, &BatteryState) -> Result<f64>,
{
    let mut s = *state;
    let mut steps = Vec::with_capacity(window.steps);
    for index in 1..=window.steps {
        let current = policy(index, &s)?;
        let out = step(&s, params, curve, current, window.dt);
        steps.push(PomStep {
            index,
            current,
            vt: out.vt,
            soc: out.state.soc,
            vp: out.state.vp,
            power: current * out.vt,
        });
        s = out.state;
    }
    Ok(steps)
}

/// Constant-current trace.
pub fn cc_trace(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    current: f64,
) -> PomTrace {
    let steps = run_window(state, params, curve, window, |_, _| Ok(current)).expect("constant policy");
    PomTrace {
        steps,
        mode_shift_index: None,
    }
}

/// Step current that holds `level` at the end of the step, never reversing direction.
fn hold_current(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    dt: f64,
    level: f64,
    dir: Direction,
) -> f64 {
    let i = StepResponse::new(state, params, curve, dt).current_for_voltage(level);
    if i * dir.sign() > 0.0 {
        i
    } else {
        0.0
    }
}

fn soc_ok(steps: &[PomStep], dir: Direction, soa: &Soa) -> bool {
    !steps.iter().any(|s| dir.beyond_soc_bound(s.soc, soa))
}

/// Bisection on a scalar policy parameter between an infeasible end and a
/// feasible end. Returns the feasible end after convergence.
fn bisect_feasible<F>(mut infeasible: f64, mut feasible: f64, mut is_feasible: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<bool>,
{
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (infeasible + feasible);
        if mid == infeasible || mid == feasible {
            break;
        }
        if is_feasible(mid)? {
            feasible = mid;
        } else {
            infeasible = mid;
        }
    }
    Ok(feasible)
}

/// Step-(k+1) per-constraint limits reported by the stepwise engines.
fn first_step_limits(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
) -> (f64, f64, f64) {
    let i_current = dir.current_limit(soa);
    let i_voltage = hold_current(state, params, curve, window.dt, dir.voltage_cutoff(soa), dir);
    let i_soc = peak_current_soc_constraint(state, window, params, dir, soa);
    (i_current, i_voltage, i_soc)
}

fn summarize(trace: &PomTrace, limits: (f64, f64, f64), dominant: Constraint) -> SopResult {
    let power_signed = trace.min_abs_power();
    let feasible = power_signed != 0.0;
    SopResult {
        i_current_limit: limits.0,
        i_voltage_limit: limits.1,
        i_soc_limit: limits.2,
        i_mc: trace.first().current,
        dominant,
        vt_end: trace.last().vt,
        power_signed,
        sop: power_signed.abs(),
        feasible,
    }
}

/// Zero-current window reported as infeasible: no SOC headroom in this direction.
fn no_headroom(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    limits: (f64, f64, f64),
) -> (SopResult, PomTrace) {
    let trace = cc_trace(state, params, curve, window, 0.0);
    let mut result = summarize(&trace, limits, Constraint::Soc);
    result.feasible = false;
    (result, trace)
}

fn validate_inputs(params: &BatteryParams, soa: &Soa) -> Result<()> {
    params.validate()?;
    soa.validate()
}

/// Constant-voltage peak operation.
///
/// The held level is chosen per window: if holding the cut-off at step k+1
/// needs more than the current limit, step k+1 runs at the limit and the
/// voltage it produces is held for the rest of the window; otherwise the
/// cut-off itself is held. If that trace would overrun the SOC bound the
/// held level moves towards rest until the SOC lands on the bound at k+K.
pub fn sop_cv(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
) -> Result<(SopResult, PomTrace)> {
    if params.r0 <= 0.0 {
        return Err(SopError::Domain(
            "constant-voltage current is undefined for R0 = 0".into(),
        ));
    }
    validate_inputs(params, soa)?;
    let limits = first_step_limits(state, params, curve, window, dir, soa);
    if limits.2 == 0.0 {
        return Ok(no_headroom(state, params, curve, window, limits));
    }
    let cutoff = dir.voltage_cutoff(soa);
    let i_limit = dir.current_limit(soa);
    let needed = StepResponse::new(state, params, curve, window.dt).current_for_voltage(cutoff);

    let hold = |level: f64, first: Option<f64>| {
        run_window(state, params, curve, window, |j, s| {
            Ok(match (j, first) {
                (1, Some(i)) => i,
                _ => hold_current(s, params, curve, window.dt, level, dir),
            })
        })
    };

    let (level, first, mut dominant) = if needed * dir.sign() > i_limit.abs() {
        let vt1 = step(state, params, curve, i_limit, window.dt).vt;
        (vt1, Some(i_limit), Constraint::Current)
    } else {
        (cutoff, None, Constraint::Voltage)
    };
    let mut steps = hold(level, first)?;

    if !soc_ok(&steps, dir, soa) {
        dominant = Constraint::Soc;
        // Far enough on the rest side that every hold current is zero.
        let rest = match dir {
            Direction::Discharge => curve.max_ocv() + state.vp.abs() + 1.0,
            Direction::Charge => curve.min_ocv() - state.vp.abs() - 1.0,
        };
        let level = bisect_feasible(level, rest, |v| Ok(soc_ok(&hold(v, None)?, dir, soa)))?;
        steps = hold(level, None)?;
    }

    let trace = PomTrace {
        steps,
        mode_shift_index: None,
    };
    Ok((summarize(&trace, limits, dominant), trace))
}

/// Locates the CC-to-CV shift by simulating CC at the current limit: `kc`
/// is the first step whose terminal voltage passes the cut-off.
pub fn find_mode_shift_kc(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
) -> CcCvCase {
    let trace = cc_trace(state, params, curve, window, dir.current_limit(soa));
    match trace.steps.iter().find(|s| dir.beyond_cutoff(s.vt, soa)) {
        None => CcCvCase::CcOnly,
        Some(s) if s.index == 1 => CcCvCase::CvOnly,
        Some(s) => CcCvCase::Transitional { kc: s.index },
    }
}

/// CC-CV with CC level `level`: each step runs at `level` unless that would
/// pass the cut-off, in which case it holds the cut-off.
fn cccv_steps(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
    level: f64,
) -> Result<(Vec<PomStep>, Option<usize>)> {
    let cutoff = dir.voltage_cutoff(soa);
    let mut shift = None;
    let steps = run_window(state, params, curve, window, |j, s| {
        let held = hold_current(s, params, curve, window.dt, cutoff, dir);
        if held.abs() < level.abs() {
            shift.get_or_insert(j);
            Ok(held)
        } else {
            Ok(level)
        }
    })?;
    Ok((steps, shift))
}

/// Constant current at the limit until the cut-off is reached, then constant
/// voltage at the cut-off.
pub fn sop_cccv(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
) -> Result<(SopResult, PomTrace)> {
    validate_inputs(params, soa)?;
    let limits = first_step_limits(state, params, curve, window, dir, soa);
    if limits.2 == 0.0 {
        return Ok(no_headroom(state, params, curve, window, limits));
    }
    let i_limit = dir.current_limit(soa);
    let cutoff = dir.voltage_cutoff(soa);

    let (trace, dominant) = match find_mode_shift_kc(state, params, curve, window, dir, soa) {
        CcCvCase::CcOnly => {
            // Below the limit the cut-off is still out of reach, so the SOC
            // bound is met by the constant current that lands on it.
            let i_soc = limits.2;
            let (level, dominant) = if i_soc.abs() < i_limit.abs() {
                (i_soc, Constraint::Soc)
            } else {
                (i_limit, Constraint::Current)
            };
            (cc_trace(state, params, curve, window, level), dominant)
        }
        CcCvCase::CvOnly => {
            let (result, trace) = sop_cv(state, params, curve, window, dir, soa)?;
            return Ok((result, trace));
        }
        CcCvCase::Transitional { kc } => {
            let steps = run_window(state, params, curve, window, |j, s| {
                Ok(if j < kc {
                    i_limit
                } else {
                    hold_current(s, params, curve, window.dt, cutoff, dir)
                })
            })?;
            (
                PomTrace {
                    steps,
                    mode_shift_index: Some(kc),
                },
                Constraint::Voltage,
            )
        }
    };

    if soc_ok(&trace.steps, dir, soa) {
        return Ok((summarize(&trace, limits, dominant), trace));
    }

    let level = bisect_feasible(i_limit, 0.0, |i| {
        Ok(soc_ok(
            &cccv_steps(state, params, curve, window, dir, soa, i)?.0,
            dir,
            soa,
        ))
    })?;
    let (steps, mode_shift_index) = cccv_steps(state, params, curve, window, dir, soa, level)?;
    let trace = PomTrace {
        steps,
        mode_shift_index,
    };
    Ok((summarize(&trace, limits, Constraint::Soc), trace))
}

/// Current and terminal voltage that deliver `power` over one step. Positive
/// power discharges; the root of smaller magnitude is taken so that current
/// is continuous in power down to zero.
pub fn solve_cp_step(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    dt: f64,
    power: f64,
) -> Result<(f64, f64)> {
    if params.r0 <= 0.0 {
        return Err(SopError::Domain("constant-power step needs R0 > 0".into()));
    }
    let current = StepResponse::new(state, params, curve, dt).current_for_power(power)?;
    let vt = if current == 0.0 {
        step(state, params, curve, 0.0, dt).vt
    } else {
        power / current
    };
    Ok((current, vt))
}

/// Simulates a window at constant signed power. `None` when a step has no
/// root or the trace leaves the SOA.
fn cp_feasible_trace(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    soa: &Soa,
    power: f64,
) -> Option<Vec<PomStep>> {
    let steps = run_window(state, params, curve, window, |_, s| {
        solve_cp_step(s, params, curve, window.dt, power).map(|(i, _)| i)
    })
    .ok()?;
    trace_complies(&steps, soa).then_some(steps)
}

/// Constant-power peak operation: bisection on |P| for the largest power
/// whose K-step trace stays inside the SOA.
#[allow(clippy::too_many_arguments)]
pub fn sop_cp(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
    tol_watts: f64,
) -> Result<(SopResult, PomTrace)> {
    if !(tol_watts > 0.0) {
        return Err(SopError::Config(format!("tol_watts must be > 0, got {tol_watts}")));
    }
    validate_inputs(params, soa)?;
    let limits = first_step_limits(state, params, curve, window, dir, soa);
    let sign = dir.sign();
    let p_hi = cp_power_ceiling(dir, soa);

    let rest = || PomTrace {
        steps: run_window(state, params, curve, window, |_, _| Ok(0.0)).expect("rest policy"),
        mode_shift_index: None,
    };
    if cp_feasible_trace(state, params, curve, window, soa, 0.0).is_none() {
        let trace = rest();
        let mut result = summarize(&trace, limits, Constraint::Voltage);
        result.feasible = false;
        return Ok((result, trace));
    }
    if let Some(steps) = cp_feasible_trace(state, params, curve, window, soa, sign * p_hi) {
        let trace = PomTrace {
            steps,
            mode_shift_index: None,
        };
        return Ok((summarize(&trace, limits, Constraint::Current), trace));
    }

    let (mut lo, mut hi) = (0.0, p_hi);
    for _ in 0..MAX_BISECTION_ITERS {
        if hi - lo <= tol_watts {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cp_feasible_trace(state, params, curve, window, soa, sign * mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let dominant = cp_binding(state, params, curve, window, dir, soa, sign * hi);
    let trace = if lo == 0.0 {
        rest()
    } else {
        PomTrace {
            steps: cp_feasible_trace(state, params, curve, window, soa, sign * lo)
                .expect("bisection keeps lo feasible"),
            mode_shift_index: None,
        }
    };
    let mut result = summarize(&trace, limits, dominant);
    if lo == 0.0 {
        result.feasible = false;
    }
    Ok((result, trace))
}

/// |I_limit| times the largest |cut-off|: no SOA-compliant step can exceed it.
pub fn cp_power_ceiling(dir: Direction, soa: &Soa) -> f64 {
    dir.current_limit(soa).abs() * soa.vt_min.abs().max(soa.vt_max.abs())
}

/// The constraint violated just above the converged power.
fn cp_binding(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
    power: f64,
) -> Constraint {
    let Ok(steps) = run_window(state, params, curve, window, |_, s| {
        solve_cp_step(s, params, curve, window.dt, power).map(|(i, _)| i)
    }) else {
        // no root: past the power vertex, a voltage-side limit
        return Constraint::Voltage;
    };
    let violated = |c: Constraint| {
        steps.iter().any(|s| match c {
            Constraint::Voltage => dir.beyond_cutoff(s.vt, soa),
            Constraint::Soc => dir.beyond_soc_bound(s.soc, soa),
            Constraint::Current => s.current.abs() > dir.current_limit(soa).abs(),
        })
    };
    [Constraint::Voltage, Constraint::Soc, Constraint::Current]
        .into_iter()
        .find(|c| violated(*c))
        .unwrap_or(Constraint::Voltage)
}

/// Dispatch to the engine for `mode`. CC uses the closed form, paired with
/// the simulated trace at its peak current.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_mode(
    mode: Mode,
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
    tol_watts: f64,
) -> Result<(SopResult, PomTrace)> {
    match mode {
        Mode::Cc => {
            let result = crate::analytic::sop_cc(state, params, curve, window, dir, soa)?;
            Ok((result, cc_trace(state, params, curve, window, result.i_mc)))
        }
        Mode::Cv => sop_cv(state, params, curve, window, dir, soa),
        Mode::CcCv => sop_cccv(state, params, curve, window, dir, soa),
        Mode::Cp => sop_cp(state, params, curve, window, dir, soa, tol_watts),
    }
}
