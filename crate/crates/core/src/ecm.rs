//! Discrete-time Thevenin (one-RC) equivalent-circuit model.
//!
//! Sign convention: positive current discharges the cell, negative current
//! charges it. The terminal voltage of a step uses that step's own current
//! for the ohmic drop:
//!
//! ```text
//! vp'  = vp·e^(−Δt/τ) + I·R1·(1 − e^(−Δt/τ))
//! soc' = soc − η·Δt·I / (3600·Ca)
//! vt'  = ocv(soc') − vp' − I·R0
//! ```

use crate::error::{Result, SopError};

/// Pairs of SOC points closer than this use the local segment slope instead of a secant.
pub const SLOPE_SECANT_EPS: f64 = 1e-6;

/// Thevenin model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    /// Ohmic resistance R0 [Ω].
    pub r0: f64,
    /// Polarization resistance R1 [Ω].
    pub r1: f64,
    /// Polarization time constant τ [s].
    pub tau: f64,
    /// Available capacity Ca [Ah].
    pub capacity_ah: f64,
    /// Coulombic efficiency η.
    pub coulombic_eff: f64,
}

impl BatteryParams {
    pub fn new(r0: f64, r1: f64, tau: f64, capacity_ah: f64, coulombic_eff: f64) -> Result<Self> {
        let params = Self {
            r0,
            r1,
            tau,
            capacity_ah,
            coulombic_eff,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.r0, self.r1, self.tau, self.capacity_ah, self.coulombic_eff]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(SopError::Config("battery parameters must be finite".into()));
        }
        if self.r0 <= 0.0 {
            return Err(SopError::Config(format!("r0 must be > 0, got {}", self.r0)));
        }
        if self.r1 < 0.0 {
            return Err(SopError::Config(format!("r1 must be >= 0, got {}", self.r1)));
        }
        if self.tau <= 0.0 {
            return Err(SopError::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.capacity_ah <= 0.0 {
            return Err(SopError::Config(format!(
                "capacity_ah must be > 0, got {}",
                self.capacity_ah
            )));
        }
        if !(self.coulombic_eff > 0.0 && self.coulombic_eff <= 1.0) {
            return Err(SopError::Config(format!(
                "coulombic_eff must be in (0, 1], got {}",
                self.coulombic_eff
            )));
        }
        Ok(())
    }

    /// The composite x = η / (3600·Ca): SOC change per ampere-second.
    pub fn charge_factor(&self) -> f64 {
        self.coulombic_eff / (3600.0 * self.capacity_ah)
    }

    /// e^(−span/τ).
    pub fn relax_factor(&self, span_s: f64) -> f64 {
        (-span_s / self.tau).exp()
    }

    /// R1·(1 − e^(−span/τ)), the polarization resistance seen by a constant
    /// current held for `span_s` seconds.
    pub fn effective_r1(&self, span_s: f64) -> f64 {
        self.r1 * (1.0 - self.relax_factor(span_s))
    }
}

/// Monotone piecewise-linear SOC → OCV table.
#[derive(Debug, Clone, PartialEq)]
pub struct OcvCurve {
    soc: Vec<f64>,
    ocv: Vec<f64>,
}

impl OcvCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(SopError::Config(format!(
                "OCV curve needs at least 2 points, got {}",
                points.len()
            )));
        }
        for (i, &(s, v)) in points.iter().enumerate() {
            if !s.is_finite() || !v.is_finite() {
                return Err(SopError::Config(format!("OCV point {i} is not finite")));
            }
            if !(0.0..=1.0).contains(&s) {
                return Err(SopError::Config(format!("OCV point {i}: soc {s} outside [0, 1]")));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(SopError::Config(format!(
                    "OCV soc column must be strictly increasing (row {})",
                    i + 1
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(SopError::Config(format!(
                    "OCV must be non-decreasing in soc (row {})",
                    i + 1
                )));
            }
        }
        let (soc, ocv) = points.into_iter().unzip();
        Ok(Self { soc, ocv })
    }

    /// Two-knot curve `intercept + slope·soc` over [0, 1].
    pub fn linear(intercept: f64, slope: f64) -> Result<Self> {
        Self::new(vec![(0.0, intercept), (1.0, intercept + slope)])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.soc.iter().copied().zip(self.ocv.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.soc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soc.is_empty()
    }

    pub fn min_ocv(&self) -> f64 {
        self.ocv[0]
    }

    pub fn max_ocv(&self) -> f64 {
        self.ocv[self.ocv.len() - 1]
    }

    /// Index of the segment `[soc[i], soc[i+1]]` holding `soc`, with interior
    /// knots resolving to the segment on their right.
    fn segment(&self, soc: f64) -> Option<usize> {
        let last = self.soc.len() - 1;
        if soc < self.soc[0] || soc > self.soc[last] {
            return None;
        }
        let idx = self.soc.partition_point(|&s| s <= soc);
        Some(idx.saturating_sub(1).min(last - 1))
    }

    /// Interpolated OCV, exact at knots and flat outside the knot range.
    pub fn ocv(&self, soc: f64) -> f64 {
        let last = self.soc.len() - 1;
        if soc <= self.soc[0] {
            return self.ocv[0];
        }
        if soc >= self.soc[last] {
            return self.ocv[last];
        }
        let i = self.segment(soc).expect("inside knot range");
        let t = (soc - self.soc[i]) / (self.soc[i + 1] - self.soc[i]);
        self.ocv[i] + t * (self.ocv[i + 1] - self.ocv[i])
    }

    /// Slope of the segment containing `soc`; zero in the flat extrapolation.
    pub fn local_slope(&self, soc: f64) -> f64 {
        match self.segment(soc) {
            Some(i) => (self.ocv[i + 1] - self.ocv[i]) / (self.soc[i + 1] - self.soc[i]),
            None => 0.0,
        }
    }

    /// Window slope κ: the secant between two SOC points, or the local
    /// segment slope at `soc_a` when the pair is degenerate.
    pub fn slope(&self, soc_a: f64, soc_b: f64) -> f64 {
        if (soc_a - soc_b).abs() > SLOPE_SECANT_EPS {
            (self.ocv(soc_b) - self.ocv(soc_a)) / (soc_b - soc_a)
        } else {
            self.local_slope(soc_a)
        }
    }
}

/// SOC and polarization voltage. Terminal voltage is always derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub soc: f64,
    pub vp: f64,
}

impl BatteryState {
    pub fn new(soc: f64, vp: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&soc) {
            return Err(SopError::Config(format!("soc must be in [0, 1], got {soc}")));
        }
        if !vp.is_finite() {
            return Err(SopError::Config("vp must be finite".into()));
        }
        Ok(Self { soc, vp })
    }

    /// Terminal voltage with `current` flowing and no time elapsed.
    pub fn terminal_voltage(&self, params: &BatteryParams, curve: &OcvCurve, current: f64) -> f64 {
        curve.ocv(self.soc) - self.vp - current * params.r0
    }
}

/// Prediction window of `steps` samples spaced `dt` seconds apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub steps: usize,
    pub dt: f64,
}

impl Window {
    pub fn new(steps: usize, dt: f64) -> Result<Self> {
        if steps == 0 {
            return Err(SopError::Config("window needs at least one step".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SopError::Config(format!("dt must be > 0, got {dt}")));
        }
        Ok(Self { steps, dt })
    }

    /// K·Δt in seconds.
    pub fn span(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

/// Result of one model step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: BatteryState,
    pub vt: f64,
    /// SOC left [0, 1] and was clamped.
    pub clamped: bool,
}

pub fn step(state: &BatteryState, params: &BatteryParams, curve: &OcvCurve, current: f64, dt: f64) -> StepOutcome {
    let decay = params.relax_factor(dt);
    let vp = state.vp * decay + current * params.r1 * (1.0 - decay);
    let raw_soc = state.soc - params.charge_factor() * dt * current;
    let soc = raw_soc.clamp(0.0, 1.0);
    let vt = curve.ocv(soc) - vp - current * params.r0;
    StepOutcome {
        state: BatteryState { soc, vp },
        vt,
        clamped: soc != raw_soc,
    }
}

/// End-of-window quantities for a constant current held over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcPrediction {
    pub ocv_end: f64,
    /// Decay of the initial polarization voltage over the window.
    pub vp_relax_end: f64,
    /// R1·(1 − e^(−KΔt/τ)).
    pub eff_r1: f64,
    pub vt_end: f64,
    pub soc_end: f64,
}

/// Closed-form constant-current prediction with the OCV linearised at slope `kappa`.
pub fn predict_cc(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    kappa: f64,
    current: f64,
    window: &Window,
) -> CcPrediction {
    let span = window.span();
    let soc_drop = params.charge_factor() * span;
    let ocv_end = curve.ocv(state.soc) - soc_drop * kappa * current;
    let vp_relax_end = state.vp * params.relax_factor(span);
    let eff_r1 = params.effective_r1(span);
    let vt_end = ocv_end - vp_relax_end - current * eff_r1 - current * params.r0;
    CcPrediction {
        ocv_end,
        vp_relax_end,
        eff_r1,
        vt_end,
        soc_end: state.soc - soc_drop * current,
    }
}

/// Time-stamped current samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    samples: Vec<(f64, f64)>,
}

impl Profile {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(SopError::Input("profile is empty".into()));
        }
        for (i, &(t, c)) in samples.iter().enumerate() {
            if !t.is_finite() || !c.is_finite() {
                return Err(SopError::Input(format!("profile row {i} is not finite")));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].0 <= w[0].0) {
            return Err(SopError::Input(format!(
                "profile times must be strictly increasing (row {})",
                i + 1
            )));
        }
        Ok(Self { samples })
    }

    /// `steps` samples of `current` spaced `dt`, after an initial sample at t = 0.
    pub fn constant(current: f64, steps: usize, dt: f64) -> Result<Self> {
        Self::new((0..=steps).map(|k| (k as f64 * dt, current)).collect())
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }
}

/// One row of a simulated trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub current: f64,
    pub soc: f64,
    pub vp: f64,
    pub vt: f64,
    pub clamped: bool,
}

/// Replays a profile. The first row is the initial state seen at `t0` with
/// the first sample's current; each later sample's current is held over the
/// interval ending at its timestamp.
pub fn simulate_profile(
    state: &BatteryState,
    params: &BatteryParams,
    curve: &OcvCurve,
    profile: &Profile,
) -> Vec<TracePoint> {
    let samples = profile.samples();
    let (t0, i0) = samples[0];
    let mut trace = Vec::with_capacity(samples.len());
    trace.push(TracePoint {
        t: t0,
        current: i0,
        soc: state.soc,
        vp: state.vp,
        vt: state.terminal_voltage(params, curve, i0),
        clamped: false,
    });
    let mut current_state = *state;
    let mut t_prev = t0;
    for &(t, current) in &samples[1..] {
        let out = step(&current_state, params, curve, current, t - t_prev);
        trace.push(TracePoint {
            t,
            current,
            soc: out.state.soc,
            vp: out.state.vp,
            vt: out.vt,
            clamped: out.clamped,
        });
        current_state = out.state;
        t_prev = t;
    }
    trace
}

/// Interval of current on which the one-step terminal voltage is affine:
/// `vt = intercept − slope·I` for `I ∈ [lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    lo: f64,
    hi: f64,
    intercept: f64,
    slope: f64,
}

/// Terminal voltage after one step as an exact piecewise-affine function of
/// the step current. Used to hold a voltage or a power over a step.
#[derive(Debug, Clone)]
pub struct StepResponse {
    pieces: Vec<Piece>,
}

impl StepResponse {
    pub fn new(state: &BatteryState, params: &BatteryParams, curve: &OcvCurve, dt: f64) -> Self {
        let decay = params.relax_factor(dt);
        let relaxed = state.vp * decay;
        let series = params.r0 + params.r1 * (1.0 - decay);
        let gain = params.charge_factor() * dt;

        // Knot i is reached at current (soc − s_i)/gain; walk knots from high
        // SOC (small current) to low SOC (large current).
        let knots: Vec<(f64, f64)> = curve.points().collect();
        let n = knots.len();
        let mut pieces = Vec::with_capacity(n + 1);
        let (s_hi, v_hi) = knots[n - 1];
        let mut lo = f64::NEG_INFINITY;
        let mut hi = (state.soc - s_hi) / gain;
        pieces.push(Piece {
            lo,
            hi,
            intercept: v_hi - relaxed,
            slope: series,
        });
        for k in (0..n - 1).rev() {
            let (s_a, v_a) = knots[k];
            let (s_b, v_b) = knots[k + 1];
            let m = (v_b - v_a) / (s_b - s_a);
            lo = hi;
            hi = (state.soc - s_a) / gain;
            pieces.push(Piece {
                lo,
                hi,
                intercept: v_a + m * (state.soc - s_a) - relaxed,
                slope: m * gain + series,
            });
        }
        let (_, v_lo) = knots[0];
        pieces.push(Piece {
            lo: hi,
            hi: f64::INFINITY,
            intercept: v_lo - relaxed,
            slope: series,
        });
        Self { pieces }
    }

    /// Terminal voltage for step current `current`.
    pub fn vt(&self, current: f64) -> f64 {
        let p = self.piece_at(current);
        p.intercept - p.slope * current
    }

    fn piece_at(&self, current: f64) -> &Piece {
        self.pieces
            .iter()
            .find(|p| current <= p.hi)
            .unwrap_or(&self.pieces[self.pieces.len() - 1])
    }

    /// The unique step current giving terminal voltage `target`.
    pub fn current_for_voltage(&self, target: f64) -> f64 {
        // vt is strictly decreasing in current, so the first piece whose
        // right end drops to the target holds the solution.
        let p = self
            .pieces
            .iter()
            .find(|p| p.intercept - p.slope * p.hi <= target)
            .unwrap_or(&self.pieces[self.pieces.len() - 1]);
        (p.intercept - target) / p.slope
    }

    /// Smallest-magnitude step current with `current·vt(current) = power`.
    /// Positive power searches discharge currents, negative power charge currents.
    pub fn current_for_power(&self, power: f64) -> Result<f64> {
        if power == 0.0 {
            return Ok(0.0);
        }
        let root_in = |p: &Piece| -> Option<f64> {
            let disc = p.intercept * p.intercept - 4.0 * p.slope * power;
            if disc < 0.0 {
                return None;
            }
            let denom = p.intercept + disc.sqrt();
            if denom <= 0.0 {
                return None;
            }
            let root = 2.0 * power / denom;
            let slack = 1e-12 * (1.0 + root.abs());
            (root >= p.lo - slack && root <= p.hi + slack).then_some(root)
        };
        let found = if power > 0.0 {
            self.pieces
                .iter()
                .filter(|p| p.hi >= 0.0)
                .find_map(|p| root_in(p).filter(|r| *r > 0.0))
        } else {
            self.pieces
                .iter()
                .rev()
                .filter(|p| p.lo <= 0.0)
                .find_map(|p| root_in(p).filter(|r| *r < 0.0))
        };
        found.ok_or(SopError::PowerInfeasible { power_w: power })
    }
}
