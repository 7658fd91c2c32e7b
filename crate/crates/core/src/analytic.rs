//! Closed-form constant-current state of power.
//!
//! Each operational constraint (current, voltage, SOC) yields its own peak
//! current. The multi-constraint peak current is the smallest in magnitude,
//! and the SOP is that current times the predicted end-of-window terminal
//! voltage.

use std::fmt;

use crate::ecm::{predict_cc, step, BatteryParams, BatteryState, OcvCurve, Window};
use crate::error::{Result, SopError};
use crate::soa::{Direction, Soa};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    Current,
    Voltage,
    Soc,
}

impl Constraint {
    pub const ALL: [Constraint; 3] = [Constraint::Current, Constraint::Voltage, Constraint::Soc];

    /// Tie-break order when two constraints give the same |I|.
    const PRIORITY: [Constraint; 3] = [Constraint::Voltage, Constraint::Soc, Constraint::Current];

    pub fn as_str(self) -> &'static str {
        match self {
            Constraint::Current => "current",
            Constraint::Voltage => "voltage",
            Constraint::Soc => "soc",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Constraint {
    type Err = SopError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "current" => Ok(Constraint::Current),
            "voltage" => Ok(Constraint::Voltage),
            "soc" => Ok(Constraint::Soc),
            other => Err(SopError::Input(format!("unknown constraint '{other}'"))),
        }
    }
}

/// Where along the window the SOP is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluation {
    /// Peak current times the end-of-window voltage.
    #[default]
    EndOfWindow,
    /// Smallest |I·vt| over the simulated window.
    MinOverWindow,
}

/// Peak current, end-of-window voltage and power under a single constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintEval {
    pub constraint: Constraint,
    pub current: f64,
    pub vt_end: f64,
    pub power: f64,
    /// False when the raw limit had the wrong sign for the direction and was zeroed.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SopResult {
    pub i_current_limit: f64,
    pub i_voltage_limit: f64,
    pub i_soc_limit: f64,
    /// Multi-constraint peak current, signed by direction.
    pub i_mc: f64,
    pub dominant: Constraint,
    pub vt_end: f64,
    pub power_signed: f64,
    pub sop: f64,
    pub feasible: bool,
}

impl SopResult {
    pub fn limit(&self, constraint: Constraint) -> f64 {
        match constraint {
            Constraint::Current => self.i_current_limit,
            Constraint::Voltage => self.i_voltage_limit,
            Constraint::Soc => self.i_soc_limit,
        }
    }
}

/// x·KΔt·κ + R0 + R1·(1 − e^(−KΔt/τ)): the total sensitivity of the
/// end-of-window terminal voltage to the window current.
pub fn window_resistance(params: &BatteryParams, kappa: f64, window: &Window) -> f64 {
    let span = window.span();
    params.charge_factor() * span * kappa + params.r0 + params.effective_r1(span)
}

pub fn peak_current_current_constraint(dir: Direction, soa: &Soa) -> f64 {
    dir.current_limit(soa)
}

/// Returns the raw (unclamped) voltage-limited current.
fn raw_voltage_limit(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    kappa: f64,
    window: &Window,
    dir: Direction,
    soa: &Soa,
) -> Result<f64> {
    let denom = window_resistance(params, kappa, window);
    if !(denom > 0.0) {
        return Err(SopError::Domain(format!(
            "window resistance {denom} must be positive (kappa = {kappa})"
        )));
    }
    let vp_relax = state.vp * params.relax_factor(window.span());
    Ok((curve.ocv(state.soc) - vp_relax - dir.voltage_cutoff(soa)) / denom)
}

/// Constant current that brings the end-of-window voltage exactly to the
/// cut-off. Zero when the rested voltage is already past the cut-off.
pub fn peak_current_voltage_constraint(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    kappa: f64,
    window: &Window,
    dir: Direction,
    soa: &Soa,
) -> Result<f64> {
    let raw = raw_voltage_limit(state, params, curve, kappa, window, dir, soa)?;
    Ok(if raw * dir.sign() > 0.0 { raw } else { 0.0 })
}

fn raw_soc_limit(state: &BatteryState, window: &Window, params: &BatteryParams, dir: Direction, soa: &Soa) -> f64 {
    (state.soc - dir.soc_bound(soa)) / (params.charge_factor() * window.span())
}

/// Constant current that lands the SOC exactly on its bound at the end of the window.
pub fn peak_current_soc_constraint(
    state: &BatteryState,
    window: &Window,
    params: &BatteryParams,
    dir: Direction,
    soa: &Soa,
) -> f64 {
    let raw = raw_soc_limit(state, window, params, dir, soa);
    if raw * dir.sign() > 0.0 {
        raw
    } else {
        0.0
    }
}

/// Peak current of one constraint with its end-of-window voltage and power.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_constraint(
    constraint: Constraint,
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    kappa: f64,
    window: &Window,
    dir: Direction,
    soa: &Soa,
) -> Result<ConstraintEval> {
    let raw = match constraint {
        Constraint::Current => peak_current_current_constraint(dir, soa),
        Constraint::Voltage => raw_voltage_limit(state, params, curve, kappa, window, dir, soa)?,
        Constraint::Soc => raw_soc_limit(state, window, params, dir, soa),
    };
    let feasible = raw * dir.sign() >= 0.0;
    let current = if raw * dir.sign() > 0.0 { raw } else { 0.0 };
    let vt_end = predict_cc(state, params, curve, kappa, current, window).vt_end;
    Ok(ConstraintEval {
        constraint,
        current,
        vt_end,
        power: current * vt_end,
        feasible,
    })
}

/// Reference SOP of one constraint written out in closed form, without going
/// through [`predict_cc`]. The SOC-limited form is I·vt with the voltage
/// expressed through the OCV at the SOC bound.
#[allow(clippy::too_many_arguments)]
pub fn reference_sop(
    constraint: Constraint,
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    kappa: f64,
    window: &Window,
    dir: Direction,
    soa: &Soa,
) -> Result<f64> {
    let span = window.span();
    let vp_relax = state.vp * params.relax_factor(span);
    let denom = window_resistance(params, kappa, window);
    let r_sum = params.r0 + params.effective_r1(span);
    let open = curve.ocv(state.soc) - vp_relax;
    Ok(match constraint {
        Constraint::Current => {
            let i = dir.current_limit(soa);
            i * (open - i * denom)
        }
        Constraint::Voltage => {
            let cutoff = dir.voltage_cutoff(soa);
            let i = peak_current_voltage_constraint(state, params, curve, kappa, window, dir, soa)?;
            if i == 0.0 {
                0.0
            } else {
                cutoff * (open - cutoff) / denom
            }
        }
        Constraint::Soc => {
            let bound = dir.soc_bound(soa);
            let headroom = state.soc - bound;
            if headroom * dir.sign() <= 0.0 {
                return Ok(0.0);
            }
            let per_amp = params.charge_factor() * span;
            let i = headroom / per_amp;
            i * (curve.ocv(bound) - vp_relax - i * r_sum)
        }
    })
}

/// Window slope κ in two passes: the local slope fixes a first multi-constraint
/// current, then κ becomes the secant from the present SOC to the SOC that
/// current reaches at the end of the window.
pub fn window_kappa(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
) -> Result<f64> {
    let local = curve.slope(state.soc, state.soc);
    let first = sop_cc_at_kappa(state, params, curve, local, window, dir, soa, Evaluation::EndOfWindow)?;
    let soc_end = state.soc - params.charge_factor() * window.span() * first.i_mc;
    Ok(curve.slope(state.soc, soc_end))
}

/// Multi-constraint CC SOP with the window slope from [`window_kappa`].
pub fn sop_cc(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
) -> Result<SopResult> {
    sop_cc_with(state, params, curve, window, dir, soa, Evaluation::EndOfWindow)
}

pub fn sop_cc_with(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    window: &Window,
    dir: Direction,
    soa: &Soa,
    evaluation: Evaluation,
) -> Result<SopResult> {
    params.validate()?;
    soa.validate()?;
    let kappa = window_kappa(state, params, curve, window, dir, soa)?;
    sop_cc_at_kappa(state, params, curve, kappa, window, dir, soa, evaluation)
}

#[allow(clippy::too_many_arguments)]
pub fn sop_cc_at_kappa(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    kappa: f64,
    window: &Window,
    dir: Direction,
    soa: &Soa,
    evaluation: Evaluation,
) -> Result<SopResult> {
    let i_current_limit = peak_current_current_constraint(dir, soa);
    let i_voltage_limit = peak_current_voltage_constraint(state, params, curve, kappa, window, dir, soa)?;
    let i_soc_limit = peak_current_soc_constraint(state, window, params, dir, soa);

    let limit = |c: Constraint| match c {
        Constraint::Current => i_current_limit,
        Constraint::Voltage => i_voltage_limit,
        Constraint::Soc => i_soc_limit,
    };
    // min_by keeps the first of equal elements, so PRIORITY order breaks ties.
    let dominant = Constraint::PRIORITY
        .into_iter()
        .min_by(|a, b| limit(*a).abs().total_cmp(&limit(*b).abs()))
        .expect("three constraints");
    let i_mc = limit(dominant);

    let vt_end = predict_cc(state, params, curve, kappa, i_mc, window).vt_end;
    let power_signed = match evaluation {
        Evaluation::EndOfWindow => i_mc * vt_end,
        Evaluation::MinOverWindow => {
            let mut s = *state;
            let mut best = f64::INFINITY;
            for _ in 0..window.steps {
                let out = step(&s, params, curve, i_mc, window.dt);
                let p = i_mc * out.vt;
                if p.abs() < best.abs() {
                    best = p;
                }
                s = out.state;
            }
            best
        }
    };
    let feasible = i_mc != 0.0;
    Ok(SopResult {
        i_current_limit,
        i_voltage_limit,
        i_soc_limit,
        i_mc,
        dominant,
        vt_end,
        power_signed,
        sop: if feasible { power_signed.abs() } else { 0.0 },
        feasible,
    })
}
