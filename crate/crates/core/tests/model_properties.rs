use proptest::prelude::*;
use soplab_core::ecm::{predict_cc, simulate_profile, step, BatteryParams, BatteryState, OcvCurve, Profile, Window};

fn params_strategy() -> impl Strategy<Value = BatteryParams> {
    (0.005f64..0.2, 0.0f64..0.1, 1.0f64..100.0, 0.5f64..50.0, 0.9f64..=1.0)
        .prop_map(|(r0, r1, tau, ca, eta)| BatteryParams::new(r0, r1, tau, ca, eta).unwrap())
}

proptest! {
    #[test]
    fn closed_form_matches_iteration(
        p in params_strategy(),
        soc in 0.0f64..=1.0,
        vp in -0.2f64..0.2,
        k in 1usize..=120,
        frac in -1.0f64..=1.0,
        intercept in 2.5f64..3.5,
        slope in 0.0f64..2.0,
    ) {
        let curve = OcvCurve::linear(intercept, slope).unwrap();
        let current = frac * 20.0 * p.capacity_ah;
        let window = Window::new(k, 1.0).unwrap();
        let s = BatteryState::new(soc, vp).unwrap();
        let pred = predict_cc(&s, &p, &curve, slope, current, &window);
        prop_assume!((0.0..=1.0).contains(&pred.soc_end));

        let mut it = s;
        let mut vt = 0.0;
        for _ in 0..k {
            let out = step(&it, &p, &curve, current, 1.0);
            prop_assert!(!out.clamped);
            it = out.state;
            vt = out.vt;
        }
        prop_assert!((pred.vt_end - vt).abs() <= 1e-12, "vt {} vs {}", pred.vt_end, vt);
        // K subtractions each round once; 1e-15 alone is below what K steps can hold.
        let soc_tol = 1e-15f64.max(k as f64 * f64::EPSILON);
        prop_assert!((pred.soc_end - it.soc).abs() <= soc_tol, "soc {} vs {}", pred.soc_end, it.soc);
    }

    #[test]
    fn relaxation_is_strictly_monotone(p in params_strategy(), vp in 1e-3f64..0.5, soc in 0.0f64..=1.0) {
        let curve = OcvCurve::linear(3.0, 1.2).unwrap();
        let mut s = BatteryState::new(soc, vp).unwrap();
        for _ in 0..20 {
            let next = step(&s, &p, &curve, 0.0, 1.0).state;
            prop_assert!(next.vp < s.vp);
            prop_assert_eq!(next.soc, s.soc);
            s = next;
        }
    }

    #[test]
    fn charge_is_mirror_of_discharge(p in params_strategy(), soc in 0.2f64..0.8, current in 0.0f64..10.0, k in 1usize..60) {
        let p = BatteryParams { coulombic_eff: 1.0, ..p };
        let curve = OcvCurve::linear(3.0, 1.2).unwrap();
        let s = BatteryState::new(soc, 0.0).unwrap();
        let w = Window::new(k, 1.0).unwrap();
        let dis = predict_cc(&s, &p, &curve, 1.2, current, &w).soc_end - soc;
        let chg = predict_cc(&s, &p, &curve, 1.2, -current, &w).soc_end - soc;
        prop_assert!((dis + chg).abs() <= 1e-15);
    }

    #[test]
    fn effective_r1_monotone_and_bounded(p in params_strategy(), k in 1usize..500) {
        let a = p.effective_r1(k as f64);
        let b = p.effective_r1((k + 1) as f64);
        prop_assert!(a >= 0.0 && a <= p.r1);
        prop_assert!(b >= a);
        // strict while the decay term is still visible next to 1
        if p.r1 > 0.0 && p.relax_factor(k as f64) > 1e-12 {
            prop_assert!(b > a);
        }
    }

    #[test]
    fn constant_profile_matches_closed_form(soc in 0.3f64..0.9, current in -4.0f64..10.0, k in 1usize..60) {
        let p = BatteryParams::new(0.05, 0.03, 10.0, 2.0, 1.0).unwrap();
        let curve = OcvCurve::linear(3.0, 1.2).unwrap();
        let s = BatteryState::new(soc, 0.0).unwrap();
        let trace = simulate_profile(&s, &p, &curve, &Profile::constant(current, k, 1.0).unwrap());
        let pred = predict_cc(&s, &p, &curve, 1.2, current, &Window::new(k, 1.0).unwrap());
        prop_assume!((0.0..=1.0).contains(&pred.soc_end));
        let last = trace.last().unwrap();
        prop_assert_eq!(trace.len(), k + 1);
        prop_assert!((last.vt - pred.vt_end).abs() <= 1e-12);
    }
}

#[test]
fn worked_step_values() {
    let p = BatteryParams::new(0.05, 0.03, 10.0, 2.0, 1.0).unwrap();
    let curve = OcvCurve::linear(3.0, 1.2).unwrap();
    let s = BatteryState::new(0.5, 0.0).unwrap();
    let out = step(&s, &p, &curve, 10.0, 1.0);
    let by_hand = 10.0 * 0.03 * (1.0 - (-0.1f64).exp());
    assert!((out.state.vp - by_hand).abs() < 1e-15);
    assert!((out.state.vp - 0.028548).abs() < 1e-6);

    let out = step(
        &s,
        &BatteryParams::new(0.05, 0.03, 10.0, 2.0, 1.0).unwrap(),
        &curve,
        2.0,
        1.0,
    );
    assert!((0.5 - out.state.soc - 2.0 / 7200.0).abs() < 1e-15);

    let pred = predict_cc(&s, &p, &curve, 1.2, 10.0, &Window::new(10, 1.0).unwrap());
    assert!((pred.eff_r1 - 0.018964).abs() < 1e-6);
    assert!((pred.vt_end - 2.8937).abs() < 1e-4);
}

#[test]
fn ocv_table_values() {
    let c = OcvCurve::new(vec![(0.0, 3.0), (0.5, 3.5), (1.0, 4.2)]).unwrap();
    assert_eq!(OcvCurve::linear(3.0, 1.2).unwrap().ocv(0.5), 3.6);
    assert_eq!(c.ocv(1.0), 4.2);
    assert!((c.ocv(0.75) - 3.85).abs() < 1e-15);
    assert!((c.slope(0.25, 0.25) - 1.0).abs() < 1e-12);
    assert!((c.slope(0.4, 0.6) - (c.ocv(0.6) - c.ocv(0.4)) / 0.2).abs() < 1e-12);
}
