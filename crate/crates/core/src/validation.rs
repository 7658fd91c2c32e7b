//! Closed-form CC peak current against the brute-force oracle over a grid of
//! initial SOC, window length and direction.
//!
//! The estimator and the plant take separate parameter sets, so a corrupted
//! estimator can be checked against the true plant.

use crate::analytic::sop_cc;
use crate::ecm::{BatteryParams, BatteryState, OcvCurve, Window};
use crate::error::{Result, SopError};
use crate::exec::Exec;
use crate::oracle::{brute_peak_current_cc, compare_report, CompareRecord};
use crate::soa::{Direction, Soa};

/// Oracle bisection tolerance; far below the comparison tolerance.
pub const ORACLE_TOL_AMPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub soc: f64,
    pub steps: usize,
    pub dir: Direction,
}

/// soc ∈ {0.1, …, 0.9} × K ∈ {1, 10, 30, 60} × both directions.
pub fn default_grid() -> Vec<GridPoint> {
    grid(
        &(1..=9).map(|k| k as f64 / 10.0).collect::<Vec<_>>(),
        &[1, 10, 30, 60],
        &Direction::BOTH,
    )
}

pub fn grid(socs: &[f64], steps: &[usize], dirs: &[Direction]) -> Vec<GridPoint> {
    let mut out = Vec::with_capacity(socs.len() * steps.len() * dirs.len());
    for &soc in socs {
        for &k in steps {
            for &dir in dirs {
                out.push(GridPoint { soc, steps: k, dir });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRecord {
    pub point: GridPoint,
    pub compare: CompareRecord,
    pub oracle_saturated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub records: Vec<GridRecord>,
}

impl GridSummary {
    pub fn passed(&self) -> usize {
        self.records.iter().filter(|r| r.compare.pass).count()
    }

    pub fn all_pass(&self) -> bool {
        self.passed() == self.records.len()
    }

    pub fn max_residual(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.compare.residual.abs())
            .fold(0.0, f64::max)
    }
}

pub struct GridSetup<'a> {
    pub plant: &'a BatteryParams,
    pub estimator: &'a BatteryParams,
    pub curve: &'a OcvCurve,
    pub soa: &'a Soa,
    pub vp: f64,
    pub dt: f64,
}

/// Compares |i_mc| with the oracle's peak current at every grid point.
pub fn validate_cc_grid(setup: &GridSetup<'_>, points: &[GridPoint], tol_amps: f64, exec: Exec) -> Result<GridSummary> {
    if points.is_empty() {
        return Err(SopError::Input("validation grid is empty".into()));
    }
    setup.plant.validate()?;
    setup.estimator.validate()?;
    setup.soa.validate()?;
    let records = exec.map(points, |p| {
        let state = BatteryState::new(p.soc, setup.vp)?;
        let window = Window::new(p.steps, setup.dt)?;
        let est = sop_cc(&state, setup.estimator, setup.curve, &window, p.dir, setup.soa)?;
        let brute = brute_peak_current_cc(
            &state,
            setup.plant,
            setup.curve,
            &window,
            p.dir,
            setup.soa,
            ORACLE_TOL_AMPS,
        )?;
        Ok(GridRecord {
            point: *p,
            compare: compare_report(est.i_mc.abs(), brute.value, tol_amps),
            oracle_saturated: brute.saturated,
        })
    });
    Ok(GridSummary {
        records: records.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_and_size() {
        let g = default_grid();
        assert_eq!(g.len(), 9 * 4 * 2);
        assert_eq!(
            g[0],
            GridPoint {
                soc: 0.1,
                steps: 1,
                dir: Direction::Discharge
            }
        );
        assert_eq!(g[1].dir, Direction::Charge);
    }

    #[test]
    fn corrupted_estimator_fails() {
        let plant = BatteryParams::new(0.05, 0.03, 10.0, 2.0, 1.0).unwrap();
        let mut est = plant;
        est.r1 = 0.3;
        let curve = OcvCurve::linear(3.0, 1.2).unwrap();
        let soa = Soa::new(2.8, 4.3, 10.0, -4.0, 0.1, 0.9).unwrap();
        let points = grid(&[0.3], &[30], &[Direction::Discharge]);
        let setup = GridSetup {
            plant: &plant,
            estimator: &plant,
            curve: &curve,
            soa: &soa,
            vp: 0.0,
            dt: 1.0,
        };
        assert!(validate_cc_grid(&setup, &points, 1e-6, Exec::Sequential)
            .unwrap()
            .all_pass());
        let setup = GridSetup {
            estimator: &est,
            ..setup
        };
        assert!(!validate_cc_grid(&setup, &points, 1e-6, Exec::Sequential)
            .unwrap()
            .all_pass());
        assert!(validate_cc_grid(&setup, &[], 1e-6, Exec::Sequential).is_err());
    }
}
