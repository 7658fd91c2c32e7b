//! The four subcommands, each building a [`Report`] and an [`Outcome`].

use soplab_core::analytic::SopResult;
use soplab_core::ecm::{simulate_profile, Profile};
use soplab_core::error_lab::{analytic_error, sweep, Coefficients, ErrorBreakdown, ErrorSource, TrueContext};
use soplab_core::pom::{evaluate_mode, Mode, PomTrace};
use soplab_core::soa::check_point;
use soplab_core::validation::{grid, validate_cc_grid, GridSetup};
use soplab_core::{BatteryParams, BatteryState, Constraint, Direction, Exec, OcvCurve, Result, Soa, Window};

use crate::report::{Cell, Report, Table};

/// Exit status carried by a successful command run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Infeasible scenario or failed validation.
    Failure,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Failure => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: BatteryParams,
    pub curve: OcvCurve,
    pub soa: Soa,
    pub soc: f64,
    pub vp: f64,
    pub steps: usize,
    pub dt: f64,
    pub dir: Direction,
}

impl Scenario {
    pub fn state(&self) -> Result<BatteryState> {
        BatteryState::new(self.soc, self.vp)
    }

    pub fn window(&self) -> Result<Window> {
        Window::new(self.steps, self.dt)
    }

    fn describe(&self, r: &mut Report) {
        r.field("direction", self.dir.as_str())
            .field("soc", self.soc)
            .field("vp_v", self.vp)
            .field("steps", self.steps)
            .field("dt_s", self.dt);
    }
}

fn sop_fields(r: &mut Report, res: &SopResult) {
    r.field("i_current_limit_a", res.i_current_limit)
        .field("i_voltage_limit_a", res.i_voltage_limit)
        .field("i_soc_limit_a", res.i_soc_limit)
        .field("i_mc_a", res.i_mc)
        .field("dominant", res.dominant.as_str())
        .field("vt_end_v", res.vt_end)
        .field("power_w", res.power_signed)
        .field("sop_w", res.sop)
        .field("feasible", res.feasible);
}

fn trace_table(trace: &PomTrace) -> Table {
    let mut t = Table::new(&["index", "current_a", "vt_v", "soc", "vp_v", "power_w"]);
    for s in &trace.steps {
        t.push(vec![
            s.index.into(),
            s.current.into(),
            s.vt.into(),
            s.soc.into(),
            s.vp.into(),
            s.power.into(),
        ]);
    }
    t
}

pub fn cmd_sop(sc: &Scenario, mode: Mode, tol_watts: f64) -> Result<(Report, Outcome)> {
    let (res, trace) = evaluate_mode(
        mode,
        &sc.state()?,
        &sc.params,
        &sc.curve,
        &sc.window()?,
        sc.dir,
        &sc.soa,
        tol_watts,
    )?;
    let mut r = Report::new("soplab sop");
    r.field("mode", mode.as_str());
    sc.describe(&mut r);
    sop_fields(&mut r, &res);
    if mode == Mode::CcCv {
        match trace.mode_shift_index {
            Some(k) => r.field("mode_shift_index", k),
            None => r.field("mode_shift_index", "none"),
        };
    }
    if mode != Mode::Cc {
        r.table = Some(trace_table(&trace));
    }
    let outcome = if res.feasible {
        Outcome::Success
    } else {
        Outcome::Failure
    };
    Ok((r, outcome))
}

fn breakdown_cells(b: Option<ErrorBreakdown>) -> [Cell; 3] {
    match b {
        Some(b) => [b.delta_i.into(), b.delta_vt.into(), b.delta_sop.into()],
        None => ["-".into(), "-".into(), "-".into()],
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep_error(
    sc: &Scenario,
    source: ErrorSource,
    constraint: Constraint,
    deltas: &[f64],
    kappa: Option<f64>,
    exec: Exec,
) -> Result<(Report, Outcome)> {
    let state = sc.state()?;
    let window = sc.window()?;
    let ctx = match kappa {
        Some(k) => TrueContext::with_kappa(state, sc.params, sc.curve.clone(), k, window, sc.dir, sc.soa)?,
        None => TrueContext::new(state, sc.params, sc.curve.clone(), window, sc.dir, sc.soa)?,
    };
    let rows = sweep(source, deltas, &ctx, constraint, exec)?;

    let mut r = Report::new("soplab sweep-error");
    r.field("source", source.as_str())
        .field("constraint", constraint.as_str());
    sc.describe(&mut r);
    r.field("kappa", ctx.kappa())
        .field("true_current_a", ctx.truth(constraint).current)
        .field("true_power_w", ctx.truth(constraint).power);
    // Coefficients do not depend on delta.
    if let Ok(b) = analytic_error(source, 0.0, &ctx, constraint) {
        match b.coefficients {
            Some(Coefficients::Parabola { a, b }) => {
                r.field("coef_a", a).field("coef_b", b);
            }
            Some(Coefficients::Capacity { alpha, beta }) => {
                r.field("coef_alpha", alpha).field("coef_beta", beta);
            }
            None => {}
        }
    }
    let mut t = Table::new(&[
        "delta",
        "analytic_di_a",
        "analytic_dvt_v",
        "analytic_dsop_w",
        "empirical_di_a",
        "empirical_dvt_v",
        "empirical_dsop_w",
        "residual_w",
        "status",
    ]);
    for row in &rows {
        let mut cells = vec![Cell::num(row.delta)];
        cells.extend(breakdown_cells(row.analytic));
        cells.extend(breakdown_cells(row.empirical));
        cells.push(row.residual().map_or("-".into(), Cell::num));
        cells.push(row.status.as_str().into());
        t.push(cells);
    }
    r.table = Some(t);
    Ok((r, Outcome::Success))
}

pub struct ValidateGrid<'a> {
    pub socs: &'a [f64],
    pub steps: &'a [usize],
    pub dirs: &'a [Direction],
}

pub fn cmd_validate(
    sc: &Scenario,
    estimator: &BatteryParams,
    g: &ValidateGrid<'_>,
    tol_amps: f64,
    exec: Exec,
) -> Result<(Report, Outcome)> {
    let points = grid(g.socs, g.steps, g.dirs);
    let setup = GridSetup {
        plant: &sc.params,
        estimator,
        curve: &sc.curve,
        soa: &sc.soa,
        vp: sc.vp,
        dt: sc.dt,
    };
    let summary = validate_cc_grid(&setup, &points, tol_amps, exec)?;

    let mut r = Report::new("soplab validate");
    r.field("points", summary.records.len())
        .field("passed", summary.passed())
        .field("max_residual_a", summary.max_residual())
        .field("tol_a", tol_amps)
        .field("all_pass", summary.all_pass());
    let mut t = Table::new(&[
        "soc",
        "steps",
        "direction",
        "estimate_a",
        "oracle_a",
        "residual_a",
        "pass",
    ]);
    for rec in &summary.records {
        t.push(vec![
            rec.point.soc.into(),
            rec.point.steps.into(),
            rec.point.dir.as_str().into(),
            rec.compare.estimate.into(),
            rec.compare.brute.into(),
            rec.compare.residual.into(),
            rec.compare.pass.into(),
        ]);
    }
    r.table = Some(t);
    let outcome = if summary.all_pass() {
        Outcome::Success
    } else {
        Outcome::Failure
    };
    Ok((r, outcome))
}

/// Replays a profile; each row is annotated with its SOA violations.
pub fn cmd_simulate(sc: &Scenario, profile: &Profile) -> Result<(Report, Outcome)> {
    let trace = simulate_profile(&sc.state()?, &sc.params, &sc.curve, profile);
    let mut r = Report::new("soplab simulate");
    r.field("soc", sc.soc).field("vp_v", sc.vp).field("rows", trace.len());
    let mut t = Table::new(&["t_s", "current_a", "soc", "vp_v", "vt_v", "clamped", "violations"]);
    let mut violated = 0usize;
    for p in &trace {
        let v: Vec<&str> = check_point(p.vt, p.current, p.soc, &sc.soa)
            .iter()
            .map(|v| v.kind.as_str())
            .collect();
        violated += usize::from(!v.is_empty());
        t.push(vec![
            p.t.into(),
            p.current.into(),
            p.soc.into(),
            p.vp.into(),
            p.vt.into(),
            p.clamped.into(),
            v.join(";").as_str().into(),
        ]);
    }
    r.field("rows_with_violations", violated);
    r.table = Some(t);
    Ok((r, Outcome::Success))
}
