//! Safe operation area: terminal voltage, current and SOC limits that must
//! hold at every step of a window. Bounds are inclusive.

use std::fmt;

use crate::ecm::TracePoint;
use crate::error::{Result, SopError};

/// Excess below which a sample sitting on a bound is still compliant.
/// Closed-form boundary solutions can land an ulp or two outside.
pub const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Soa {
    pub vt_min: f64,
    pub vt_max: f64,
    /// Largest discharge current, > 0.
    pub i_max_dis: f64,
    /// Largest charge current, < 0.
    pub i_max_chg: f64,
    pub soc_min: f64,
    pub soc_max: f64,
}

impl Soa {
    pub fn new(vt_min: f64, vt_max: f64, i_max_dis: f64, i_max_chg: f64, soc_min: f64, soc_max: f64) -> Result<Self> {
        let soa = Self {
            vt_min,
            vt_max,
            i_max_dis,
            i_max_chg,
            soc_min,
            soc_max,
        };
        soa.validate()?;
        Ok(soa)
    }

    pub fn validate(&self) -> Result<()> {
        let v = [
            self.vt_min,
            self.vt_max,
            self.i_max_dis,
            self.i_max_chg,
            self.soc_min,
            self.soc_max,
        ];
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SopError::Config("SOA limits must be finite".into()));
        }
        if self.vt_min >= self.vt_max {
            return Err(SopError::Config("SOA requires vt_min < vt_max".into()));
        }
        if !(self.i_max_chg < 0.0 && 0.0 < self.i_max_dis) {
            return Err(SopError::Config("SOA requires i_max_chg < 0 < i_max_dis".into()));
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return Err(SopError::Config("SOA requires 0 <= soc_min < soc_max <= 1".into()));
        }
        Ok(())
    }
}

impl Default for Soa {
    /// Conservative Li-ion box: 2.8–4.3 V, 20–80 % SOC, 10 A discharge, 4 A charge.
    fn default() -> Self {
        Self {
            vt_min: 2.8,
            vt_max: 4.3,
            i_max_dis: 10.0,
            i_max_chg: -4.0,
            soc_min: 0.2,
            soc_max: 0.8,
        }
    }
}

/// Discharge selects (i_max_dis, vt_min, soc_min); charge selects
/// (i_max_chg, vt_max, soc_max).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Discharge,
    Charge,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Discharge, Direction::Charge];

    /// +1 for discharge, −1 for charge.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Discharge => 1.0,
            Direction::Charge => -1.0,
        }
    }

    pub fn current_limit(self, soa: &Soa) -> f64 {
        match self {
            Direction::Discharge => soa.i_max_dis,
            Direction::Charge => soa.i_max_chg,
        }
    }

    pub fn voltage_cutoff(self, soa: &Soa) -> f64 {
        match self {
            Direction::Discharge => soa.vt_min,
            Direction::Charge => soa.vt_max,
        }
    }

    pub fn soc_bound(self, soa: &Soa) -> f64 {
        match self {
            Direction::Discharge => soa.soc_min,
            Direction::Charge => soa.soc_max,
        }
    }

    /// True when `vt` lies past this direction's cut-off by more than the slack.
    /// Uses the same excess test as [`check_trace`].
    pub fn beyond_cutoff(self, vt: f64, soa: &Soa) -> bool {
        let excess = match self {
            Direction::Discharge => soa.vt_min - vt,
            Direction::Charge => vt - soa.vt_max,
        };
        !(excess <= BOUNDARY_SLACK)
    }

    /// True when `soc` lies past this direction's SOC bound by more than the slack.
    pub fn beyond_soc_bound(self, soc: f64, soa: &Soa) -> bool {
        let excess = match self {
            Direction::Discharge => soa.soc_min - soc,
            Direction::Charge => soc - soa.soc_max,
        };
        !(excess <= BOUNDARY_SLACK)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Discharge => "discharge",
            Direction::Charge => "charge",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = SopError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discharge" | "dis" => Ok(Direction::Discharge),
            "charge" | "chg" => Ok(Direction::Charge),
            other => Err(SopError::Input(format!("unknown direction '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    VoltageLow,
    VoltageHigh,
    CurrentHighDis,
    CurrentHighChg,
    SocLow,
    SocHigh,
}

impl ViolationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationKind::VoltageLow => "voltage_low",
            ViolationKind::VoltageHigh => "voltage_high",
            ViolationKind::CurrentHighDis => "current_high_dis",
            ViolationKind::CurrentHighChg => "current_high_chg",
            ViolationKind::SocLow => "soc_low",
            ViolationKind::SocHigh => "soc_high",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub step_index: usize,
    /// Excess over the bound in volts, amperes or SOC fraction; always > 0.
    pub magnitude: f64,
}

/// Anything that carries the three SOA-checked quantities of one step.
pub trait SoaSample {
    fn vt(&self) -> f64;
    fn current(&self) -> f64;
    fn soc(&self) -> f64;
    /// Index reported in violations for the sample at `position` in its trace.
    fn step_index(&self, position: usize) -> usize {
        position
    }
}

impl SoaSample for TracePoint {
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

fn check_at(vt: f64, current: f64, soc: f64, soa: &Soa, step_index: usize) -> Vec<Violation> {
    let candidates = [
        (ViolationKind::VoltageLow, soa.vt_min - vt),
        (ViolationKind::VoltageHigh, vt - soa.vt_max),
        (ViolationKind::CurrentHighDis, current - soa.i_max_dis),
        (ViolationKind::CurrentHighChg, soa.i_max_chg - current),
        (ViolationKind::SocLow, soa.soc_min - soc),
        (ViolationKind::SocHigh, soc - soa.soc_max),
    ];
    candidates
        .into_iter()
        // NaN excess counts as a violation
        .filter(|(_, excess)| !(*excess <= BOUNDARY_SLACK))
        .map(|(kind, magnitude)| Violation {
            kind,
            step_index,
            magnitude: if magnitude.is_nan() { f64::INFINITY } else { magnitude },
        })
        .collect()
}

pub fn check_point(vt: f64, current: f64, soc: f64, soa: &Soa) -> Vec<Violation> {
    check_at(vt, current, soc, soa, 0)
}

/// Checks every sample of a trace, in order.
pub fn check_trace<S: SoaSample>(trace: &[S], soa: &Soa) -> Vec<Violation> {
    trace
        .iter()
        .enumerate()
        .flat_map(|(i, s)| check_at(s.vt(), s.current(), s.soc(), soa, s.step_index(i)))
        .collect()
}

/// True when no sample violates the SOA. Short-circuits on the first failure.
pub fn trace_complies<S: SoaSample>(trace: &[S], soa: &Soa) -> bool {
    trace
        .iter()
        .all(|s| check_at(s.vt(), s.current(), s.soc(), soa, 0).is_empty())
}
