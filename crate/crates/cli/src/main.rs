use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use soplab_cli::commands::{cmd_simulate, cmd_sop, cmd_sweep_error, cmd_validate, Scenario, ValidateGrid};
use soplab_cli::io::{load_ocv, load_params, load_profile, load_soa, parse_list};
use soplab_cli::{Outcome, Report};
use soplab_core::error_lab::ErrorSource;
use soplab_core::pom::{Mode, DEFAULT_CP_TOL_W};
use soplab_core::{Constraint, Direction, Exec, Soa};

/// Battery state-of-power estimation on a one-RC Thevenin model.
///
/// Exit codes: 0 success, 1 infeasible scenario or failed validation, 2 input error.
#[derive(Parser)]
#[command(name = "soplab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Peak power of one scenario under a peak operation mode.
    Sop {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// cc, cv, cccv or cp.
        #[arg(long, default_value = "cc")]
        mode: Mode,
        /// Constant-power bisection tolerance in watts.
        #[arg(long, default_value_t = DEFAULT_CP_TOL_W)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Analytic against empirical SOP error over a grid of error magnitudes.
    SweepError {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// soc, vp_relax, r_sum, kappa or x.
        #[arg(long)]
        source: ErrorSource,
        /// current, voltage or soc.
        #[arg(long)]
        constraint: Constraint,
        /// Comma-separated error magnitudes in the source's own unit.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Fixed OCV slope; defaults to the two-pass window slope.
        #[arg(long)]
        kappa: Option<f64>,
        #[command(flatten)]
        exec: ExecArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Closed-form CC peak current against the brute-force oracle over a grid.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Parameters used by the estimator; defaults to --params.
        #[arg(long)]
        estimator_params: Option<PathBuf>,
        /// Comma-separated initial SOCs.
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        socs: String,
        /// Comma-separated window lengths in steps.
        #[arg(long, default_value = "1,10,30,60")]
        windows: String,
        /// Comma-separated directions.
        #[arg(long, default_value = "discharge,charge")]
        directions: String,
        /// Pass tolerance in amperes.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        exec: ExecArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Replays a current profile and annotates SOA violations.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Profile CSV with header `t_s,current_a`.
        #[arg(long)]
        profile: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// `key=value` file: r0_ohm, r1_ohm, tau_s, capacity_ah, coulombic_eff.
    #[arg(long)]
    params: PathBuf,
    /// OCV CSV with header `soc,ocv_volts`.
    #[arg(long)]
    ocv: PathBuf,
    /// `key=value` file: vt_min, vt_max, i_max_dis, i_max_chg, soc_min, soc_max.
    /// Defaults to 2.8-4.3 V, 10 A discharge, 4 A charge, SOC 0.2-0.8.
    #[arg(long)]
    soa: Option<PathBuf>,
    /// Initial SOC.
    #[arg(long, default_value_t = 0.5)]
    soc: f64,
    /// Initial polarization voltage in volts.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    vp: f64,
    /// Window length K in steps.
    #[arg(long, default_value_t = 30)]
    steps: usize,
    /// Step length in seconds.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    #[arg(long, default_value = "discharge")]
    direction: Direction,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let soa = match &self.soa {
            Some(p) => load_soa(p)?,
            None => Soa::default(),
        };
        Ok(Scenario {
            params: load_params(&self.params)?,
            curve: load_ocv(&self.ocv)?,
            soa,
            soc: self.soc,
            vp: self.vp,
            steps: self.steps,
            dt: self.dt,
            dir: self.direction,
        })
    }
}

#[derive(Args)]
struct ExecArgs {
    /// Evaluate grid points one at a time.
    #[arg(long)]
    sequential: bool,
}

impl ExecArgs {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutputArgs {
    fn emit(&self, report: &Report) -> Result<()> {
        let text = report.render();
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let (report, outcome, output) = match cli.command {
        Command::Sop {
            scenario,
            mode,
            tol,
            output,
        } => {
            let (r, o) = cmd_sop(&scenario.load()?, mode, tol)?;
            (r, o, output)
        }
        Command::SweepError {
            scenario,
            source,
            constraint,
            grid,
            kappa,
            exec,
            output,
        } => {
            let deltas: Vec<f64> = parse_list("--grid", &grid)?;
            let (r, o) = cmd_sweep_error(&scenario.load()?, source, constraint, &deltas, kappa, exec.exec())?;
            (r, o, output)
        }
        Command::Validate {
            scenario,
            estimator_params,
            socs,
            windows,
            directions,
            tol,
            exec,
            output,
        } => {
            let sc = scenario.load()?;
            let estimator = match &estimator_params {
                Some(p) => load_params(p)?,
                None => sc.params,
            };
            let socs: Vec<f64> = parse_list("--socs", &socs)?;
            let steps: Vec<usize> = parse_list("--windows", &windows)?;
            let dirs: Vec<Direction> = parse_list("--directions", &directions)?;
            let g = ValidateGrid {
                socs: &socs,
                steps: &steps,
                dirs: &dirs,
            };
            let (r, o) = cmd_validate(&sc, &estimator, &g, tol, exec.exec())?;
            (r, o, output)
        }
        Command::Simulate {
            scenario,
            profile,
            output,
        } => {
            let sc = scenario.load()?;
            let (r, o) = cmd_simulate(&sc, &load_profile(&profile)?)?;
            (r, o, output)
        }
    };
    output.emit(&report)?;
    Ok(outcome)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            if outcome == Outcome::Failure {
                eprintln!("soplab: infeasible or failed");
            }
            ExitCode::from(outcome.code())
        }
        Err(e) => {
            eprintln!("soplab: {e:#}");
            ExitCode::from(2)
        }
    }
}
