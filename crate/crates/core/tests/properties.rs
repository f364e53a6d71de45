use fenvm::conduction::{current_total, ConductionParams};
use fenvm::crossbar::{solve_network, BiasScheme, Crossbar};
use fenvm::device_state::{retention_evolve, DeviceState};
use fenvm::inference::quantize;
use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

proptest! {
    #[test]
    fn current_is_odd_in_bias(v in 0.0f64..2.0, w in 0.0f64..=1.0, t in 250.0f64..400.0) {
        let p = ConductionParams::default();
        let s = DeviceState::with_w(w);
        let a = current_total(v, t, &p, &s).unwrap();
        let b = current_total(-v, t, &p, &s).unwrap();
        prop_assert_eq!(a, -b);
    }

    #[test]
    fn current_grows_with_bias_state_and_temperature(
        v in 0.01f64..1.5, dv in 0.001f64..0.5, w in 0.0f64..0.9, t in 250.0f64..400.0,
    ) {
        let p = ConductionParams::default();
        let s = DeviceState::with_w(w);
        let i = current_total(v, t, &p, &s).unwrap();
        prop_assert!(current_total(v + dv, t, &p, &s).unwrap() > i);
        prop_assert!(current_total(v, t, &p, &DeviceState::with_w(w + 0.1)).unwrap() > i);
        if v <= 0.05 {
            prop_assert!(current_total(v, t + 10.0, &p, &s).unwrap() > i);
        }
    }

    #[test]
    fn zero_drift_retention_is_identity(w in 0.0f64..=1.0, dt in 0.0f64..1e8) {
        let s = DeviceState::with_w(w);
        prop_assert_eq!(retention_evolve(&s, dt, 0.0).unwrap(), s);
    }

    #[test]
    fn quantize_is_idempotent(w in -1.0f64..=1.0, levels in 2u32..40) {
        let q = quantize(w, Some(levels));
        prop_assert_eq!(quantize(q, Some(levels)), q);
        prop_assert!((q - w).abs() <= 0.5 / (levels - 1) as f64 + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn floating_read_satisfies_kcl(
        rows in 2usize..6, cols in 2usize..6, seed in 0u64..1000, v in 0.05f64..0.8,
    ) {
        let x = Crossbar::build(rows, cols, ConductionParams::default(), 0.1, seed).unwrap();
        let cell = ((seed as usize) % rows, (seed as usize / 7) % cols);
        let sol = solve_network(&x, &BiasScheme::read_floating(rows, cols, cell, v)).unwrap();
        prop_assert!(sol.kcl_residual < 1e-12);
        let driven = sol.row_voltages.iter().chain(&sol.col_voltages);
        prop_assert!(driven.clone().all(|u| (-1e-15..=v + 1e-15).contains(u)));
        let total = sol.row_currents[cell.0] - sol.col_currents[cell.1];
        prop_assert!(total.abs() <= 1e-12 * sol.row_currents[cell.0].abs());
    }
}
