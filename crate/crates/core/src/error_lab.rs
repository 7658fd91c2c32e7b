//! Propagation of estimation errors into the CC peak current, end-of-window
//! voltage and SOP, for five error sources under each single constraint.
//!
//! Every error is true minus estimate. The estimator sees each quantity
//! minus its error: SOC − Δ, Vp_relax − Δ, R_sum − Δ, κ − Δ and x − Δ with
//! x = η/(3600·C_a). [`analytic_error`] evaluates the closed forms and
//! [`empirical_error`] runs the estimator on true and corrupted inputs and
//! differences the results. Powers are signed (I·vt), so charge-side SOP
//! errors carry the sign of the charge current.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::analytic::{evaluate_constraint, window_kappa, Constraint, ConstraintEval};
use crate::ecm::{BatteryParams, BatteryState, OcvCurve, Window};
use crate::error::{Result, SopError};
use crate::exec::Exec;
use crate::soa::{Direction, Soa};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorSource {
    Soc,
    VpRelax,
    RSum,
    Kappa,
    X,
}

impl ErrorSource {
    pub const ALL: [ErrorSource; 5] = [
        ErrorSource::Soc,
        ErrorSource::VpRelax,
        ErrorSource::RSum,
        ErrorSource::Kappa,
        ErrorSource::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorSource::Soc => "soc",
            ErrorSource::VpRelax => "vp_relax",
            ErrorSource::RSum => "r_sum",
            ErrorSource::Kappa => "kappa",
            ErrorSource::X => "x",
        }
    }
}

impl fmt::Display for ErrorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ErrorSource {
    type Err = SopError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soc" => Ok(ErrorSource::Soc),
            "vp_relax" | "vp" => Ok(ErrorSource::VpRelax),
            "r_sum" | "rsum" => Ok(ErrorSource::RSum),
            "kappa" => Ok(ErrorSource::Kappa),
            "x" => Ok(ErrorSource::X),
            other => Err(SopError::Input(format!("unknown error source '{other}'"))),
        }
    }
}

/// Coefficients of the two nonlinear SOP error laws under the SOC constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficients {
    /// ΔSOP = a·Δ² + b·Δ for an SOC error.
    Parabola { a: f64, b: f64 },
    /// ΔSOP = α·Δ/(x(x−Δ)) + β·(2xΔ − Δ²)/(x²(x−Δ)²) for an x error.
    Capacity { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBreakdown {
    pub delta_i: f64,
    pub delta_vt: f64,
    pub delta_sop: f64,
    pub coefficients: Option<Coefficients>,
    /// False when the true or the corrupted run has no admissible peak current.
    pub feasible: bool,
}

impl ErrorBreakdown {
    fn zero() -> Self {
        Self {
            delta_i: 0.0,
            delta_vt: 0.0,
            delta_sop: 0.0,
            coefficients: None,
            feasible: true,
        }
    }
}

/// Unbiased inputs with the true per-constraint evaluations they produce.
#[derive(Debug, Clone)]
pub struct TrueContext {
    state: BatteryState,
    params: BatteryParams,
    curve: OcvCurve,
    kappa: f64,
    window: Window,
    dir: Direction,
    soa: Soa,
    truth: [ConstraintEval; 3],
}

impl TrueContext {
    /// Context with κ from the two-pass window slope.
    pub fn new(
        state: BatteryState,
        params: BatteryParams,
        curve: OcvCurve,
        window: Window,
        dir: Direction,
        soa: Soa,
    ) -> Result<Self> {
        params.validate()?;
        soa.validate()?;
        let kappa = window_kappa(&state, &params, &curve, &window, dir, &soa)?;
        Self::with_kappa(state, params, curve, kappa, window, dir, soa)
    }

    pub fn with_kappa(
        state: BatteryState,
        params: BatteryParams,
        curve: OcvCurve,
        kappa: f64,
        window: Window,
        dir: Direction,
        soa: Soa,
    ) -> Result<Self> {
        params.validate()?;
        soa.validate()?;
        let eval = |c| evaluate_constraint(c, &state, &params, &curve, kappa, &window, dir, &soa);
        let truth = [
            eval(Constraint::Current)?,
            eval(Constraint::Voltage)?,
            eval(Constraint::Soc)?,
        ];
        Ok(Self {
            state,
            params,
            curve,
            kappa,
            window,
            dir,
            soa,
            truth,
        })
    }

    pub fn state(&self) -> &BatteryState {
        &self.state
    }

    pub fn params(&self) -> &BatteryParams {
        &self.params
    }

    pub fn curve(&self) -> &OcvCurve {
        &self.curve
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dir(&self) -> Direction {
        self.dir
    }

    pub fn soa(&self) -> &Soa {
        &self.soa
    }

    pub fn truth(&self, constraint: Constraint) -> &ConstraintEval {
        match constraint {
            Constraint::Current => &self.truth[0],
            Constraint::Voltage => &self.truth[1],
            Constraint::Soc => &self.truth[2],
        }
    }

    fn span(&self) -> f64 {
        self.window.span()
    }

    fn x(&self) -> f64 {
        self.params.charge_factor()
    }

    fn vp_relax(&self) -> f64 {
        self.state.vp * self.params.relax_factor(self.span())
    }

    fn r_sum(&self) -> f64 {
        self.params.r0 + self.params.effective_r1(self.span())
    }

    /// x·KΔt·κ + R_sum.
    fn window_resistance(&self) -> f64 {
        self.x() * self.span() * self.kappa + self.r_sum()
    }
}

fn domain(what: &str, value: f64) -> SopError {
    SopError::Domain(format!("perturbed {what} {value} must be positive"))
}

/// Closed-form error of one source under one constraint.
pub fn analytic_error(
    source: ErrorSource,
    delta: f64,
    ctx: &TrueContext,
    constraint: Constraint,
) -> Result<ErrorBreakdown> {
    if !delta.is_finite() {
        return Err(SopError::Input(format!("delta must be finite, got {delta}")));
    }
    let truth = ctx.truth(constraint);
    let i = truth.current;
    let kappa = ctx.kappa;
    let span = ctx.span();
    let x = ctx.x();
    let s = x * span;
    let d_res = ctx.window_resistance();
    let r_sum = ctx.r_sum();
    let cutoff = ctx.dir.voltage_cutoff(&ctx.soa);
    let bound = ctx.dir.soc_bound(&ctx.soa);
    let headroom = ctx.state.soc - bound;
    let g = ctx.curve.ocv(bound) - ctx.vp_relax();

    let mut out = ErrorBreakdown::zero();
    match constraint {
        Constraint::Current => {
            // The current is the SOA limit itself; only vt moves.
            out.delta_vt = match source {
                ErrorSource::Soc => kappa * delta,
                ErrorSource::VpRelax => -delta,
                ErrorSource::RSum => -i * delta,
                ErrorSource::Kappa => -i * s * delta,
                ErrorSource::X => -i * span * kappa * delta,
            };
            out.delta_sop = i * out.delta_vt;
        }
        Constraint::Voltage => {
            // vt sits on the cut-off in both runs.
            out.delta_i = match source {
                ErrorSource::Soc => kappa * delta / d_res,
                ErrorSource::VpRelax => -delta / d_res,
                ErrorSource::RSum => {
                    let den = d_res - delta;
                    if !(den > 0.0) {
                        return Err(domain("window resistance", den));
                    }
                    -i * delta / den
                }
                ErrorSource::Kappa => {
                    let den = d_res - s * delta;
                    if !(den > 0.0) {
                        return Err(domain("window resistance", den));
                    }
                    -i * s * delta / den
                }
                ErrorSource::X => {
                    let den = span * kappa * (x - delta) + r_sum;
                    if !(den > 0.0) {
                        return Err(domain("window resistance", den));
                    }
                    -i * span * kappa * delta / den
                }
            };
            out.delta_sop = cutoff * out.delta_i;
        }
        Constraint::Soc => match source {
            ErrorSource::Soc => {
                let a = r_sum / (s * s);
                let b = g / s - 2.0 * headroom * r_sum / (s * s);
                out.delta_i = delta / s;
                out.delta_vt = -out.delta_i * r_sum;
                out.delta_sop = a * delta * delta + b * delta;
                out.coefficients = Some(Coefficients::Parabola { a, b });
            }
            ErrorSource::VpRelax => {
                out.delta_vt = -delta;
                out.delta_sop = -i * delta;
            }
            ErrorSource::RSum => {
                let per = headroom / s;
                out.delta_vt = -per * delta;
                out.delta_sop = -per * per * delta;
            }
            ErrorSource::Kappa => {
                out.delta_vt = -headroom * delta;
                out.delta_sop = -headroom * headroom * delta / s;
            }
            ErrorSource::X => {
                let xe = x - delta;
                if !(xe > 0.0) {
                    return Err(domain("x", xe));
                }
                let alpha = -headroom * g / span;
                let beta = (headroom / span).powi(2) * r_sum;
                out.delta_i = -i * delta / xe;
                out.delta_vt = -out.delta_i * r_sum;
                out.delta_sop = alpha * delta / (x * xe) + beta * (2.0 * x * delta - delta * delta) / (x * x * xe * xe);
                out.coefficients = Some(Coefficients::Capacity { alpha, beta });
            }
        },
    }
    let sign = ctx.dir.sign();
    out.feasible = truth.feasible && i * sign > 0.0 && (i - out.delta_i) * sign > 0.0;
    Ok(out)
}

/// Estimator inputs with one source corrupted.
struct Corrupted {
    state: BatteryState,
    params: BatteryParams,
    kappa: f64,
}

fn corrupt(source: ErrorSource, delta: f64, ctx: &TrueContext) -> Result<Corrupted> {
    let mut c = Corrupted {
        state: ctx.state,
        params: ctx.params,
        kappa: ctx.kappa,
    };
    match source {
        ErrorSource::Soc => c.state.soc -= delta,
        ErrorSource::VpRelax => c.state.vp -= delta / ctx.params.relax_factor(ctx.span()),
        ErrorSource::RSum => c.params.r0 -= delta,
        ErrorSource::Kappa => c.kappa -= delta,
        ErrorSource::X => {
            let xe = ctx.x() - delta;
            if !(xe > 0.0) {
                return Err(domain("x", xe));
            }
            // η/(3600·C_a) is replaced as a whole through the capacity.
            c.params.capacity_ah = ctx.params.coulombic_eff / (3600.0 * xe);
        }
    }
    Ok(c)
}

/// Paired estimator runs on true and corrupted inputs, differenced.
pub fn empirical_error(
    source: ErrorSource,
    delta: f64,
    ctx: &TrueContext,
    constraint: Constraint,
) -> Result<ErrorBreakdown> {
    if !delta.is_finite() {
        return Err(SopError::Input(format!("delta must be finite, got {delta}")));
    }
    let truth = ctx.truth(constraint);
    let c = corrupt(source, delta, ctx)?;
    let est = evaluate_constraint(
        constraint,
        &c.state,
        &c.params,
        &ctx.curve,
        c.kappa,
        &ctx.window,
        ctx.dir,
        &ctx.soa,
    )?;
    let sign = ctx.dir.sign();
    Ok(ErrorBreakdown {
        delta_i: truth.current - est.current,
        delta_vt: truth.vt_end - est.vt_end,
        delta_sop: truth.power - est.power,
        coefficients: None,
        feasible: truth.current * sign > 0.0 && est.current * sign > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// A perturbed denominator left its positive domain.
    Domain,
    /// One of the runs had no admissible peak current.
    Infeasible,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Domain => "domain",
            RowStatus::Infeasible => "infeasible",
        }
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub analytic: Option<ErrorBreakdown>,
    pub empirical: Option<ErrorBreakdown>,
    pub status: RowStatus,
}

impl SweepRow {
    /// Analytic minus empirical ΔSOP.
    pub fn residual(&self) -> Option<f64> {
        Some(self.analytic?.delta_sop - self.empirical?.delta_sop)
    }
}

/// One row per delta, in grid order. Out-of-domain deltas are flagged, not fatal.
pub fn sweep(
    source: ErrorSource,
    grid: &[f64],
    ctx: &TrueContext,
    constraint: Constraint,
    exec: Exec,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(SopError::Input("delta grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|d| !d.is_finite()) {
        return Err(SopError::Input(format!("delta grid value {bad} is not finite")));
    }
    Ok(exec.map(grid, |&delta| {
        let analytic = analytic_error(source, delta, ctx, constraint);
        let empirical = empirical_error(source, delta, ctx, constraint);
        match (analytic, empirical) {
            (Ok(a), Ok(e)) => SweepRow {
                delta,
                analytic: Some(a),
                empirical: Some(e),
                status: if a.feasible && e.feasible {
                    RowStatus::Ok
                } else {
                    RowStatus::Infeasible
                },
            },
            (a, e) => SweepRow {
                delta,
                analytic: a.ok(),
                empirical: e.ok(),
                status: RowStatus::Domain,
            },
        }
    }))
}

/// Least-squares fit y ≈ a·x² + b·x + c. Returns (a, b, c).
pub fn fit_parabola(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(SopError::Input(format!(
            "fit needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(SopError::Input("fit needs at least three points".into()));
    }
    let m = DMatrix::from_fn(xs.len(), 3, |r, c| xs[r].powi(2 - c as i32));
    let y = DVector::from_column_slice(ys);
    let coef = m
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| SopError::Input(format!("least-squares fit failed: {e}")))?;
    Ok((coef[0], coef[1], coef[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ctx(dir: Direction) -> TrueContext {
        TrueContext::with_kappa(
            BatteryState::new(0.5, 0.05).unwrap(),
            BatteryParams::new(0.05, 0.03, 10.0, 2.0, 1.0).unwrap(),
            OcvCurve::linear(3.0, 1.2).unwrap(),
            1.2,
            Window::new(10, 1.0).unwrap(),
            dir,
            Soa::new(2.8, 4.3, 10.0, -4.0, 0.1, 0.9).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn soc_error_under_current_constraint() {
        let c = ctx(Direction::Discharge);
        let a = analytic_error(ErrorSource::Soc, 0.05, &c, Constraint::Current).unwrap();
        assert_abs_diff_eq!(a.delta_sop, 0.6, epsilon = 1e-12);
        let e = empirical_error(ErrorSource::Soc, 0.05, &c, Constraint::Current).unwrap();
        assert_abs_diff_eq!(e.delta_sop, 0.6, epsilon = 1e-9);
    }

    #[test]
    fn zero_delta_is_all_zero() {
        for dir in Direction::BOTH {
            let c = ctx(dir);
            for src in ErrorSource::ALL {
                for con in Constraint::ALL {
                    let a = analytic_error(src, 0.0, &c, con).unwrap();
                    let e = empirical_error(src, 0.0, &c, con).unwrap();
                    for v in [a.delta_i, a.delta_vt, a.delta_sop, e.delta_i, e.delta_vt, e.delta_sop] {
                        assert_eq!(v, 0.0, "{src} {con} {dir}");
                    }
                }
            }
        }
    }

    #[test]
    fn analytic_matches_empirical() {
        for dir in Direction::BOTH {
            let c = ctx(dir);
            for src in ErrorSource::ALL {
                let nominal = match src {
                    ErrorSource::Soc => 0.5,
                    ErrorSource::VpRelax => 0.05,
                    ErrorSource::RSum => 0.06,
                    ErrorSource::Kappa => 1.2,
                    ErrorSource::X => 1.0 / 7200.0,
                };
                for con in Constraint::ALL {
                    for k in [-2.0, -1.0, 1.0, 2.0] {
                        let delta = 0.1 * k * nominal;
                        let a = analytic_error(src, delta, &c, con).unwrap();
                        let e = empirical_error(src, delta, &c, con).unwrap();
                        assert!(a.feasible && e.feasible);
                        assert_abs_diff_eq!(a.delta_i, e.delta_i, epsilon = 1e-9);
                        assert_abs_diff_eq!(a.delta_vt, e.delta_vt, epsilon = 1e-9);
                        assert_abs_diff_eq!(a.delta_sop, e.delta_sop, epsilon = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn domain_guard() {
        let c = ctx(Direction::Discharge);
        let d = c.window_resistance();
        assert!(matches!(
            analytic_error(ErrorSource::RSum, d, &c, Constraint::Voltage),
            Err(SopError::Domain(_))
        ));
        assert!(matches!(
            analytic_error(ErrorSource::X, c.x(), &c, Constraint::Soc),
            Err(SopError::Domain(_))
        ));
    }

    #[test]
    fn sweep_flags_domain_rows() {
        let c = ctx(Direction::Discharge);
        let x = c.x();
        let rows = sweep(
            ErrorSource::X,
            &[0.0, 0.1 * x, 2.0 * x],
            &c,
            Constraint::Soc,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(rows[0].status, RowStatus::Ok);
        assert_eq!(rows[0].residual(), Some(0.0));
        assert_eq!(rows[1].status, RowStatus::Ok);
        assert_eq!(rows[2].status, RowStatus::Domain);
        assert!(sweep(ErrorSource::X, &[], &c, Constraint::Soc, Exec::Sequential).is_err());
    }

    #[test]
    fn parabola_fit_exact() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x * x - 3.0 * x + 1.0).collect();
        let (a, b, c) = fit_parabola(&xs, &ys).unwrap();
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c, 1.0, epsilon = 1e-12);
    }
}
