use proptest::prelude::*;
use soplab_core::ecm::step;
use soplab_core::pom::{
    cc_trace, evaluate_mode, find_mode_shift_kc, solve_cp_step, sop_cccv, sop_cp, sop_cv, CcCvCase, Mode,
};
use soplab_core::soa::{check_trace, trace_complies};
use soplab_core::{sop_cc, BatteryParams, BatteryState, Constraint, Direction, OcvCurve, Soa, Window};

fn fixture() -> (BatteryParams, OcvCurve, Soa) {
    (
        BatteryParams::new(0.05, 0.03, 10.0, 2.0, 1.0).unwrap(),
        OcvCurve::linear(3.0, 1.2).unwrap(),
        Soa::new(2.8, 4.3, 10.0, -4.0, 0.1, 0.9).unwrap(),
    )
}

fn dir_strategy() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::Discharge), Just(Direction::Charge)]
}

fn mode_strategy() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Cc), Just(Mode::Cv), Just(Mode::CcCv), Just(Mode::Cp)]
}

/// Replays constant power step by step through `solve_cp_step`; false when a step has no root or leaves the SOA.
fn cp_complies(state: &BatteryState, p: &BatteryParams, c: &OcvCurve, k: usize, soa: &Soa, power: f64) -> bool {
    let mut s = *state;
    let mut rows = Vec::with_capacity(k);
    for _ in 0..k {
        let Ok((i, _)) = solve_cp_step(&s, p, c, 1.0, power) else {
            return false;
        };
        let out = step(&s, p, c, i, 1.0);
        rows.push(soplab_core::pom::PomStep {
            index: rows.len() + 1,
            current: i,
            vt: out.vt,
            soc: out.state.soc,
            vp: out.state.vp,
            power: i * out.vt,
        });
        s = out.state;
    }
    trace_complies(&rows, soa)
}

/// One-step terminal voltage is vt(I) = a − b·I while SOC stays interior.
fn affine_step(state: &BatteryState, p: &BatteryParams, slope: f64) -> (f64, f64) {
    let decay = p.relax_factor(1.0);
    let a = 3.0 + slope * state.soc - state.vp * decay;
    let b = p.r0 + p.r1 * (1.0 - decay) + slope * p.charge_factor();
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_mode_stays_inside_soa(soc in 0.1f64..=0.9, k in 1usize..=30, dir in dir_strategy(), mode in mode_strategy()) {
        let (p, c, soa) = fixture();
        let s = BatteryState::new(soc, 0.0).unwrap();
        let (r, t) = evaluate_mode(mode, &s, &p, &c, &Window::new(k, 1.0).unwrap(), dir, &soa, 1e-9).unwrap();
        prop_assert_eq!(t.len(), k);
        for (j, st) in t.steps.iter().enumerate() {
            prop_assert_eq!(st.index, j + 1);
            prop_assert_eq!(st.power, st.current * st.vt);
            prop_assert!(st.current * dir.sign() >= 0.0);
        }
        let v = check_trace(&t.steps, &soa);
        prop_assert!(v.is_empty(), "{:?}", v);
        prop_assert_eq!(r.sop, r.power_signed.abs());
    }

    #[test]
    fn cp_power_is_constant(soc in 0.1f64..=0.9, k in 1usize..=30, dir in dir_strategy()) {
        let (p, c, soa) = fixture();
        let s = BatteryState::new(soc, 0.0).unwrap();
        let tol = 1e-6;
        let (r, t) = sop_cp(&s, &p, &c, &Window::new(k, 1.0).unwrap(), dir, &soa, tol).unwrap();
        for st in &t.steps {
            prop_assert!((st.power.abs() - r.sop).abs() <= tol);
        }
        prop_assert!(t.power_spread() <= tol);
    }

    #[test]
    fn cp_result_brackets_feasibility(soc in 0.1f64..=0.9, k in 1usize..=30, dir in dir_strategy()) {
        let (p, c, soa) = fixture();
        let s = BatteryState::new(soc, 0.0).unwrap();
        let tol = 1e-6;
        let (r, _) = sop_cp(&s, &p, &c, &Window::new(k, 1.0).unwrap(), dir, &soa, tol).unwrap();
        prop_assume!(r.feasible);
        let ceiling = soplab_core::pom::cp_power_ceiling(dir, &soa);
        prop_assume!(r.sop + 2.0 * tol < ceiling);
        prop_assert!(!cp_complies(&s, &p, &c, k, &soa, dir.sign() * (r.sop + 2.0 * tol)));
        prop_assert!(cp_complies(&s, &p, &c, k, &soa, dir.sign() * (r.sop - 2.0 * tol).max(0.0)));
    }

    #[test]
    fn cccv_degenerates_to_cc_and_cv(soc in 0.1f64..=0.9, k in 1usize..=30, dir in dir_strategy()) {
        let (p, c, soa) = fixture();
        let s = BatteryState::new(soc, 0.0).unwrap();
        let w = Window::new(k, 1.0).unwrap();
        let (r, mixed) = sop_cccv(&s, &p, &c, &w, dir, &soa).unwrap();
        match find_mode_shift_kc(&s, &p, &c, &w, dir, &soa) {
            CcCvCase::CcOnly => {
                let cc = sop_cc(&s, &p, &c, &w, dir, &soa).unwrap();
                prop_assume!(cc.dominant != Constraint::Voltage);
                let plain = cc_trace(&s, &p, &c, &w, cc.i_mc);
                for (a, b) in mixed.steps.iter().zip(&plain.steps) {
                    prop_assert!((a.current - b.current).abs() <= 1e-12);
                    prop_assert!((a.vt - b.vt).abs() <= 1e-12);
                }
            }
            CcCvCase::CvOnly => {
                let (_, cv) = sop_cv(&s, &p, &c, &w, dir, &soa).unwrap();
                prop_assert_eq!(&mixed.steps, &cv.steps);
            }
            CcCvCase::Transitional { kc } if r.dominant != Constraint::Soc => {
                prop_assert_eq!(mixed.mode_shift_index, Some(kc));
            }
            CcCvCase::Transitional { .. } => {
                prop_assert!(mixed.last().soc >= soa.soc_min - 1e-12 && mixed.last().soc <= soa.soc_max + 1e-12);
            }
        }
    }

    #[test]
    fn cp_step_matches_quadratic_root(soc in 0.2f64..0.8, vp in -0.05f64..0.05, frac in 0.0f64..0.99) {
        let (p, c, _) = fixture();
        let s = BatteryState::new(soc, vp).unwrap();
        let (a, b) = affine_step(&s, &p, 1.2);
        let power = frac * a * a / (4.0 * b);
        let (i, vt) = solve_cp_step(&s, &p, &c, 1.0, power).unwrap();
        let expected = (a - (a * a - 4.0 * b * power).sqrt()) / (2.0 * b);
        prop_assert!((i - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        prop_assert!((i * vt - power).abs() <= 1e-9);
        prop_assert!((step(&s, &p, &c, i, 1.0).vt - vt).abs() <= 1e-9);
    }
}

#[test]
fn cp_step_fixture() {
    let (p, c, _) = fixture();
    let s = BatteryState::new(0.5, 0.0).unwrap();
    let (i, vt) = solve_cp_step(&s, &p, &c, 1.0, 28.937).unwrap();
    let (a, b) = affine_step(&s, &p, 1.2);
    let expected = (a - (a * a - 4.0 * b * 28.937).sqrt()) / (2.0 * b);
    assert!((i - expected).abs() < 1e-12, "{i} vs {expected}");
    assert!((i * vt - 28.937).abs() <= 1e-9);
    assert_eq!(solve_cp_step(&s, &p, &c, 1.0, 0.0).unwrap().0, 0.0);
    assert!(solve_cp_step(&s, &p, &c, 1.0, a * a / (4.0 * b) * 1.0001).is_err());
}

#[test]
fn cp_with_enormous_limits_reaches_vertex() {
    let (p, c, _) = fixture();
    let soa = Soa::new(0.01, 100.0, 1e4, -1e4, 0.0, 1.0).unwrap();
    let s = BatteryState::new(0.5, 0.0).unwrap();
    let (a, b) = affine_step(&s, &p, 1.2);
    let vertex = a * a / (4.0 * b);
    let (r, _) = sop_cp(
        &s,
        &p,
        &c,
        &Window::new(1, 1.0).unwrap(),
        Direction::Discharge,
        &soa,
        1e-9,
    )
    .unwrap();
    assert!(r.feasible);
    assert!(r.sop <= vertex && vertex - r.sop <= 1e-6, "{} vs {}", r.sop, vertex);

    // Each step's R0-only vertex bounds the power from above.
    let k = 10;
    let (r, t) = sop_cp(
        &s,
        &p,
        &c,
        &Window::new(k, 1.0).unwrap(),
        Direction::Discharge,
        &soa,
        1e-9,
    )
    .unwrap();
    let mut bound = f64::INFINITY;
    let mut st = s;
    for row in &t.steps {
        let (a, _) = affine_step(&st, &p, 1.2);
        bound = bound.min(a * a / (4.0 * p.r0));
        st = BatteryState::new(row.soc, row.vp).unwrap();
    }
    assert!(r.sop <= bound);
    assert!(r.sop > 0.5 * vertex);
}

#[test]
fn cv_at_mid_soc_declines_and_reports_last_power() {
    let (p, c, soa) = fixture();
    let s = BatteryState::new(0.3, 0.0).unwrap();
    let (r, t) = sop_cv(&s, &p, &c, &Window::new(30, 1.0).unwrap(), Direction::Discharge, &soa).unwrap();
    for pair in t.steps.windows(2) {
        assert!(pair[1].current <= pair[0].current);
    }
    assert!(t.last().current < t.first().current);
    assert_eq!(r.sop, t.last().power.abs());
}

#[test]
fn exhausted_soc_gives_zero_everywhere() {
    let (p, c, soa) = fixture();
    let s = BatteryState::new(soa.soc_min, 0.0).unwrap();
    let w = Window::new(10, 1.0).unwrap();
    for mode in [Mode::Cc, Mode::Cv, Mode::CcCv, Mode::Cp] {
        let (r, t) = evaluate_mode(mode, &s, &p, &c, &w, Direction::Discharge, &soa, 1e-6).unwrap();
        assert_eq!(r.sop, 0.0, "{mode}");
        assert!(!r.feasible, "{mode}");
        assert!(t.steps.iter().all(|st| st.current == 0.0), "{mode}");
    }
}
