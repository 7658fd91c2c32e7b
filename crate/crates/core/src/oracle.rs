//! Brute-force peak current and peak power by bisection over forward
//! simulations. Built only on the step model and the SOA check, so it can
//! validate the closed forms without sharing any of their algebra.

use crate::ecm::{step, BatteryParams, BatteryState, OcvCurve, Window};
use crate::error::{Result, SopError};
use crate::soa::{trace_complies, Direction, Soa, SoaSample};

pub const MAX_ITERS: usize = 200;
/// Grid points for locating the first power root of a step.
const POWER_SCAN_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOutcome {
    /// Largest feasible magnitude found (amperes or watts, unsigned).
    pub value: f64,
    /// The upper bracket end itself was feasible and was returned.
    pub saturated: bool,
    /// The zero-load window is inside the SOA.
    pub feasible: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    vt: f64,
    current: f64,
    soc: f64,
}

impl SoaSample for Sample {
    fn vt(&self) -> f64 {
        self.vt
    }
    fn current(&self) -> f64 {
        self.current
    }
    fn soc(&self) -> f64 {
        self.soc
    }
}

/// Samples at steps 1..=K for a per-step current policy. `None` when the
/// policy has no current for some step.
fn run<F>(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    mut policy: F,
) -> Option<Vec<Sample>>
where
    F: FnMut(&BatteryState) -> Option<f64>,
{
    let mut s = *state;
    let mut out = Vec::with_capacity(window.steps);
    for _ in 0..window.steps {
        let current = policy(&s)?;
        let next = step(&s, params, curve, current, window.dt);
        out.push(Sample {
            vt: next.vt,
            current,
            soc: next.state.soc,
        });
        s = next.state;
    }
    Some(out)
}

/// Bisection for the largest feasible value in [0, hi], with 0 assumed feasible.
fn bisect<F>(hi: f64, tol: f64, mut feasible: F) -> SearchOutcome
where
    F: FnMut(f64) -> bool,
{
    if feasible(hi) {
        return SearchOutcome {
            value: hi,
            saturated: true,
            feasible: true,
            iterations: 0,
        };
    }
    let (mut lo, mut hi) = (0.0, hi);
    let mut iterations = 0;
    while hi - lo > tol && iterations < MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    SearchOutcome {
        value: lo,
        saturated: false,
        feasible: true,
        iterations,
    }
}

fn infeasible() -> SearchOutcome {
    SearchOutcome {
        value: 0.0,
        saturated: false,
        feasible: false,
        iterations: 0,
    }
}

fn check_tol(tol: f64, what: &str) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(SopError::Config(format!("{what} must be > 0, got {tol}")))
    }
}

/// Largest constant current whose K-step trace stays inside the SOA.
pub fn brute_peak_current_cc(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
    tol_amps: f64,
) -> Result<SearchOutcome> {
    check_tol(tol_amps, "tol_amps")?;
    params.validate()?;
    soa.validate()?;
    let sign = dir.sign();
    let feasible =
        |m: f64| run(state, params, curve, window, |_| Some(sign * m)).is_some_and(|t| trace_complies(&t, soa));
    if !feasible(0.0) {
        return Ok(infeasible());
    }
    let limit = dir.current_limit(soa).abs();
    // Past this, the first step alone crosses the cut-off through R0.
    let reach = (curve.ocv(state.soc) - dir.voltage_cutoff(soa)).abs() + state.vp.abs();
    let hi = if params.r0 > 0.0 {
        limit.min(reach / params.r0 + 1.0)
    } else {
        limit
    };
    Ok(bisect(hi, tol_amps, feasible))
}

/// Signed step current delivering `power` over one step, found by scanning
/// [0, |cap|] for the first sign change of I·vt(I) − P and refining with
/// Illinois false position.
fn step_current_for_power(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    dt: f64,
    sign: f64,
    power: f64,
    cap: f64,
) -> Option<f64> {
    if power == 0.0 {
        return Some(0.0);
    }
    let g = |m: f64| m * step(state, params, curve, sign * m, dt).vt - power;
    let mut a = 0.0;
    let mut fa = g(a);
    let mut bracket = None;
    for k in 1..=POWER_SCAN_POINTS {
        let b = cap * k as f64 / POWER_SCAN_POINTS as f64;
        let fb = g(b);
        if fb == 0.0 {
            return Some(sign * b);
        }
        if fa * fb < 0.0 {
            bracket = Some((a, fa, b, fb));
            break;
        }
        a = b;
        fa = fb;
    }
    let (mut a, mut fa, mut b, mut fb) = bracket?;
    let mut side = 0i8;
    for _ in 0..MAX_ITERS {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = g(c);
        if fc == 0.0 || (b - a).abs() <= 1e-15 * (1.0 + c.abs()) {
            return Some(sign * c);
        }
        if fa * fc < 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Some(sign * 0.5 * (a + b))
}

/// Largest constant |P| whose K-step trace stays inside the SOA. `p_hi`
/// overrides the default bracket |I_limit|·max(|vt_min|, |vt_max|).
#[allow(clippy::too_many_arguments)]
pub fn brute_peak_power_cp(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
    tol_watts: f64,
    p_hi: Option<f64>,
) -> Result<SearchOutcome> {
    check_tol(tol_watts, "tol_watts")?;
    params.validate()?;
    soa.validate()?;
    let sign = dir.sign();
    let cap = dir.current_limit(soa).abs();
    let hi = p_hi.unwrap_or(cap * soa.vt_min.abs().max(soa.vt_max.abs()));
    if !(hi >= 0.0 && hi.is_finite()) {
        return Err(SopError::Config(format!("p_hi must be finite and >= 0, got {hi}")));
    }
    let feasible = |p: f64| {
        run(state, params, curve, window, |s| {
            step_current_for_power(s, params, curve, window.dt, sign, p, cap)
        })
        .is_some_and(|t| trace_complies(&t, soa))
    };
    if !feasible(0.0) {
        return Ok(infeasible());
    }
    Ok(bisect(hi, tol_watts, feasible))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRecord {
    pub estimate: f64,
    pub brute: f64,
    /// estimate − brute, in the quantity's own unit.
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Pass iff |estimate − brute| ≤ tol. Both values are magnitudes.
pub fn compare_report(estimate: f64, brute: f64, tol: f64) -> CompareRecord {
    let residual = estimate - brute;
    CompareRecord {
        estimate,
        brute,
        residual,
        tol,
        pass: residual.abs() <= tol,
    }
}
