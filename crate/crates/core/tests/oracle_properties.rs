use proptest::prelude::*;
use soplab_core::ecm::step;
use soplab_core::oracle::{brute_peak_current_cc, brute_peak_power_cp, compare_report};
use soplab_core::pom::sop_cp;
use soplab_core::soa::check_point;
use soplab_core::validation::{default_grid, validate_cc_grid, GridSetup};
use soplab_core::{sop_cc, BatteryParams, BatteryState, Direction, Exec, OcvCurve, Soa, Window};

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

fn cc_complies(state: &BatteryState, p: &BatteryParams, c: &OcvCurve, k: usize, soa: &Soa, current: f64) -> bool {
    let mut s = *state;
    (0..k).all(|_| {
        let out = step(&s, p, c, current, 1.0);
        s = out.state;
        check_point(out.vt, current, out.state.soc, soa).is_empty()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cc_search_brackets_the_boundary(soc in 0.1f64..=0.9, k in 1usize..=60, dir in dir_strategy()) {
        let (p, c, soa) = fixture();
        let s = BatteryState::new(soc, 0.0).unwrap();
        let tol = 1e-6;
        let r = brute_peak_current_cc(&s, &p, &c, &Window::new(k, 1.0).unwrap(), dir, &soa, tol).unwrap();
        prop_assert!(r.feasible);
        let sign = dir.sign();
        if r.saturated {
            prop_assert!(cc_complies(&s, &p, &c, k, &soa, sign * r.value));
        } else {
            prop_assert!(cc_complies(&s, &p, &c, k, &soa, sign * (r.value - 2.0 * tol).max(0.0)));
            prop_assert!(!cc_complies(&s, &p, &c, k, &soa, sign * (r.value + 2.0 * tol)));
        }
    }

    #[test]
    fn oracle_agrees_with_closed_form_on_linear_curves(
        r0 in 0.01f64..0.1,
        r1 in 0.0f64..0.05,
        tau in 2.0f64..60.0,
        ca in 1.0f64..50.0,
        intercept in 2.9f64..3.4,
        slope in 0.2f64..1.5,
        soc in 0.1f64..=0.9,
        k in 1usize..=60,
        dir in dir_strategy(),
    ) {
        let (_, _, soa) = fixture();
        let p = BatteryParams::new(r0, r1, tau, ca, 1.0).unwrap();
        let c = OcvCurve::linear(intercept, slope).unwrap();
        prop_assume!(c.ocv(soc) <= soa.vt_max);
        let s = BatteryState::new(soc, 0.0).unwrap();
        let w = Window::new(k, 1.0).unwrap();
        let est = sop_cc(&s, &p, &c, &w, dir, &soa).unwrap();
        let brute = brute_peak_current_cc(&s, &p, &c, &w, dir, &soa, 1e-9).unwrap();
        let rec = compare_report(est.i_mc.abs(), brute.value, 1e-6);
        prop_assert!(rec.pass, "{:?}", rec);
    }

    #[test]
    fn cp_search_agrees_with_engine(soc in 0.1f64..=0.9, k in 1usize..=30, dir in dir_strategy()) {
        let (p, c, soa) = fixture();
        let s = BatteryState::new(soc, 0.0).unwrap();
        let w = Window::new(k, 1.0).unwrap();
        let tol = 1e-6;
        let (engine, _) = sop_cp(&s, &p, &c, &w, dir, &soa, tol).unwrap();
        let brute = brute_peak_power_cp(&s, &p, &c, &w, dir, &soa, tol, None).unwrap();
        prop_assert!((engine.sop - brute.value).abs() <= 2.0 * tol, "{} vs {}", engine.sop, brute.value);
    }
}

#[test]
fn low_power_bracket_saturates() {
    let (p, c, soa) = fixture();
    let s = BatteryState::new(0.5, 0.0).unwrap();
    let r = brute_peak_power_cp(
        &s,
        &p,
        &c,
        &Window::new(10, 1.0).unwrap(),
        Direction::Discharge,
        &soa,
        1e-6,
        Some(5.0),
    )
    .unwrap();
    assert!(r.saturated);
    assert_eq!(r.value, 5.0);
}

#[test]
fn exhausted_soc_gives_zero() {
    let (p, c, soa) = fixture();
    let s = BatteryState::new(soa.soc_min, 0.0).unwrap();
    let w = Window::new(10, 1.0).unwrap();
    let i = brute_peak_current_cc(&s, &p, &c, &w, Direction::Discharge, &soa, 1e-9).unwrap();
    assert_eq!(i.value, 0.0);
    let pw = brute_peak_power_cp(&s, &p, &c, &w, Direction::Discharge, &soa, 1e-6, None).unwrap();
    assert_eq!(pw.value, 0.0);
}

#[test]
fn nonpositive_tolerance_rejected() {
    let (p, c, soa) = fixture();
    let s = BatteryState::new(0.5, 0.0).unwrap();
    let w = Window::new(10, 1.0).unwrap();
    assert!(brute_peak_current_cc(&s, &p, &c, &w, Direction::Discharge, &soa, 0.0).is_err());
    assert!(brute_peak_power_cp(&s, &p, &c, &w, Direction::Discharge, &soa, -1.0, None).is_err());
}

#[test]
fn grid_emits_one_record_per_point_in_order() {
    let (p, c, soa) = fixture();
    let setup = GridSetup {
        plant: &p,
        estimator: &p,
        curve: &c,
        soa: &soa,
        vp: 0.0,
        dt: 1.0,
    };
    let points = default_grid();
    let seq = validate_cc_grid(&setup, &points, 1e-6, Exec::Sequential).unwrap();
    let par = validate_cc_grid(&setup, &points, 1e-6, Exec::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq.records.len(), points.len());
    for (r, pt) in seq.records.iter().zip(&points) {
        assert_eq!(r.point, *pt);
    }
    assert!(seq.all_pass());
    assert!(validate_cc_grid(&setup, &[], 1e-6, Exec::Sequential).is_err());
}
