use std::time::{Duration, Instant};

use fenvm::conduction::{
    calibrate, on_off, self_selection_ratio, CalibrationTargets, Channels, ConductionParams, Readout,
};
use fenvm::crossbar::{sneak_margin, solve_network, BiasScheme, Crossbar, LineDrive};
use fenvm::device_state::{
    dc_write_loop, loop_grid, measured_transitions, retention_evolve, run_scheme, sample_device, write_energy,
    DcHysteresis, DeviceState, PulseScheme, PulseSpec, SchemeKind, UpdateModel,
};
use fenvm::extraction::{
    cdf_levels, discriminate_tunneling, extract_ohmic, extract_pf, fit_update_a, quantile, voltage_grid, SweepSet,
    Verdict as Tunneling,
};
use fenvm::inference::{map_weights, mvm_error_mc, synthetic_problem, MvmConfig};
use fenvm::rng::{derive_seed, seeded};
use fenvm_validation::oracle::gauss_seidel;
use fenvm_validation::Verdict;

const T: f64 = 300.0;
const TEMPS: [f64; 4] = [300.0, 325.0, 350.0, 375.0];

fn run(id: u8, title: &'static str, budget_s: u64, f: impl FnOnce() -> (bool, String)) {
    let start = Instant::now();
    let (pass, detail) = f();
    let v = Verdict {
        id,
        title,
        pass,
        detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_s),
    };
    v.emit();
    assert!(v.ok(), "{}", v.line());
}

#[test]
fn c01_on_off_at_read_voltage() {
    run(1, "ON/OFF at 0.1 V read in [7, 12]", 1, || {
        let r = on_off(&ConductionParams::default(), T, 0.1).unwrap();
        ((7.0..=12.0).contains(&r), format!("ON/OFF = {r:.4}"))
    });
}

#[test]
fn c02_self_selection() {
    run(2, "LRS I(0.5 V)/I(0.25 V) > 40", 1, || {
        let s = self_selection_ratio(0.5, T, &ConductionParams::default(), &DeviceState::lrs()).unwrap();
        (s > 40.0, format!("ratio = {s:.3}"))
    });
}

#[test]
fn c03_calibrated_on_resistance() {
    run(3, "R(+0.3 V, LRS) = 100 MOhm +- 1% after calibrate", 1, || {
        let p = calibrate(&CalibrationTargets::default(), &ConductionParams::skeleton()).unwrap();
        let r = Readout::measure(0.3, T, &p, &DeviceState::lrs()).unwrap().r_ohms;
        ((r / 100e6 - 1.0).abs() <= 0.01, format!("R_on = {r:.6e} Ohm"))
    });
}

#[test]
fn c04_dc_memory_window() {
    run(4, "DC memory window 1.4 V +- 0.1 V with v_c- = -0.6 V", 1, || {
        let h = DcHysteresis::default();
        let p = ConductionParams::default();
        let grid = loop_grid(-1.2, 1.4, 0.01);
        let (_, pts) = dc_write_loop(&DeviceState::hrs(), &grid, &h, &p, 0.3, T).unwrap();
        match measured_transitions(&pts) {
            Some((set, reset)) => {
                let window = reset - set;
                let pass = (window - 1.4).abs() <= 0.1 && h.v_c_minus == -0.6 && (set + 0.6).abs() <= 0.05;
                (pass, format!("set {set:.3} V, reset {reset:.3} V, window {window:.3} V"))
            }
            None => (false, "loop did not switch".into()),
        }
    });
}

#[test]
fn c05_round_trip_extraction() {
    run(5, "PF and Ohmic round-trip extraction within 5%", 10, || {
        let pf_v = voltage_grid(0.2, 0.3, 11);
        let ohm_v = voltage_grid(0.02, 0.1, 9);
        let mut worst = 0.0f64;
        let mut details = Vec::new();
        for inj in [0.10, 0.15, 0.20] {
            let mut p = ConductionParams::default();
            p.phi_pf_ev = inj;
            p.ea_ohm_ev = inj;
            let pf = SweepSet::from_model(&p, &DeviceState::lrs(), Channels::PooleFrenkelOnly, &TEMPS, &pf_v).unwrap();
            let phi = extract_pf(&pf, (0.2, 0.3), p.d_fe).unwrap().phi_pf_ev;
            let oh = SweepSet::from_model(&p, &DeviceState::lrs(), Channels::OhmicOnly, &TEMPS, &ohm_v).unwrap();
            let ea = extract_ohmic(&oh, (0.02, 0.1)).unwrap().ea_ohm_ev;
            worst = worst.max((phi / inj - 1.0).abs()).max((ea / inj - 1.0).abs());
            details.push(format!("{inj:.2}->({phi:.4}, {ea:.4})"));
        }
        (worst <= 0.05, format!("{} eV, worst {:.2e}", details.join(" "), worst))
    });
}

#[test]
fn c06_tunneling_discrimination() {
    run(6, "tunneling rejected on model data, kept on Simmons data", 5, || {
        let p = ConductionParams::default();
        let vs = voltage_grid(0.02, 0.3, 15);
        let model = SweepSet::from_model(&p, &DeviceState::lrs(), Channels::Composite, &TEMPS, &vs).unwrap();
        let simmons = SweepSet::from_tunneling(&p, &TEMPS, &vs).unwrap();
        let a = discriminate_tunneling(&model, 0.1).unwrap();
        let b = discriminate_tunneling(&simmons, 0.1).unwrap();
        let pass = a.verdict == Tunneling::Rejected && b.verdict == Tunneling::NotRejected;
        (
            pass,
            format!(
                "model {:?} (spread {:.3}), Simmons {:?} (spread {:.1e})",
                a.verdict, a.t_sensitivity, b.verdict, b.t_sensitivity
            ),
        )
    });
}

fn update_traces(kind: SchemeKind, m: &UpdateModel, seed: u64) -> [Vec<(f64, f64)>; 2] {
    let p = ConductionParams::default();
    let (dep, pot) = PulseScheme::presets(kind);
    let mut rng = seeded(seed);
    let (_, up) = run_scheme(&DeviceState::hrs(), &pot, m, &p, 0.3, T, &mut rng).unwrap();
    let (_, down) = run_scheme(&DeviceState::lrs(), &dep, m, &p, 0.3, T, &mut rng).unwrap();
    [
        up.iter().map(|r| ((r.pulse_index + 1) as f64, r.w)).collect(),
        down.iter().map(|r| ((r.pulse_index + 1) as f64, 1.0 - r.w)).collect(),
    ]
}

#[test]
fn c07_update_fit() {
    run(7, "fit_update_a: 0.5% noiseless, median 15% at 10% c2c", 30, || {
        let noisy = UpdateModel::default();
        let clean = UpdateModel::noiseless();
        let mut worst_clean = 0.0f64;
        let mut worst_median = 0.0f64;
        for kind in [SchemeKind::WidthRamp, SchemeKind::Hybrid] {
            let shape = clean.shapes.get(kind);
            let truth = [shape.a_pot, shape.a_dep];
            let traces = update_traces(kind, &clean, 0);
            for (tr, a) in traces.iter().zip(truth) {
                worst_clean = worst_clean.max((fit_update_a(tr).unwrap().a / a - 1.0).abs());
            }
            let mut errs = [Vec::new(), Vec::new()];
            for s in 0..100 {
                let traces = update_traces(kind, &noisy, derive_seed(7, s));
                for k in 0..2 {
                    errs[k].push((fit_update_a(&traces[k]).unwrap().a / truth[k] - 1.0).abs());
                }
            }
            for mut e in errs {
                e.sort_by(f64::total_cmp);
                worst_median = worst_median.max(quantile(&e, 0.5));
            }
        }
        (
            worst_clean <= 0.005 && worst_median <= 0.15,
            format!("noiseless worst {worst_clean:.2e}, noisy worst median {worst_median:.3}"),
        )
    });
}

#[test]
fn c08_separated_levels() {
    run(8, ">= 10 separated levels, 25 mV amplitude depression, 17 cycles", 30, || {
        let step = match PulseScheme::amplitude_depression() {
            PulseScheme::AmplitudeRamp { v_step, .. } => v_step,
            _ => f64::NAN,
        };
        let p = ConductionParams::default();
        let traces = fenvm_cli::commands::depression_cycles(
            SchemeKind::AmplitudeRamp,
            17,
            &UpdateModel::default(),
            &p,
            T,
            8,
        )
        .unwrap();
        let report = cdf_levels(&traces).unwrap();
        (
            report.separated_levels >= 10 && (step - 0.025).abs() < 1e-12,
            format!("{} levels over {} cycles", report.separated_levels, traces.len()),
        )
    });
}

#[test]
fn c09_d2d_spread() {
    run(9, "std log10 R(HRS) over 10,000 devices = 0.1 +- 0.003", 10, || {
        let p = ConductionParams::default();
        let logs: Vec<f64> = (0..10_000u64)
            .map(|k| {
                let s = sample_device(0.1, derive_seed(9, k)).unwrap();
                Readout::measure(0.3, T, &p, &s).unwrap().r_ohms.log10()
            })
            .collect();
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let sd = (logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        ((sd - 0.1).abs() <= 0.003, format!("std = {sd:.5}"))
    });
}

#[test]
fn c10_write_energy() {
    run(10, "write energy of -1.6 V / 50 us from HRS < 1 pJ", 1, || {
        let pulse = PulseSpec::new(-1.6, 50e-6).unwrap();
        let e = write_energy(&pulse, &DeviceState::hrs(), &ConductionParams::default(), T).unwrap();
        (e < 1e-12, format!("E = {e:.3e} J"))
    });
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale
}

#[test]
fn c11_network_solver() {
    run(11, "nodal solver = brute-force oracle (1e-9), KCL < 1e-12 A, 2x2 divider", 30, || {
        let mut worst = 0.0f64;
        let mut worst_kcl = 0.0f64;
        for seed in 0..20u64 {
            let mut x = Crossbar::build(3, 3, ConductionParams::default(), 0.1, seed).unwrap();
            for (k, c) in x.cells.iter_mut().enumerate() {
                c.w = ((k as u64 * 7 + seed * 3) % 10) as f64 / 9.0;
            }
            let cell = ((seed % 3) as usize, ((seed / 3) % 3) as usize);
            let v = 0.1 + 0.05 * (seed % 9) as f64;
            let mut b = BiasScheme::read_floating(3, 3, cell, v);
            if seed % 2 == 1 {
                b.row_drive[(cell.0 + 1) % 3] = LineDrive::Voltage(-0.2);
            }
            let sol = solve_network(&x, &b).unwrap();
            let oracle = gauss_seidel(&x, &b, 100_000).unwrap();
            let vs = v.abs().max(0.2);
            for (a, o) in sol.row_voltages.iter().zip(&oracle.row_voltages) {
                worst = worst.max(rel(*a, *o, vs));
            }
            for (a, o) in sol.col_voltages.iter().zip(&oracle.col_voltages) {
                worst = worst.max(rel(*a, *o, vs));
            }
            let is = oracle.cell_currents.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            for (a, o) in sol.cell_currents.iter().zip(&oracle.cell_currents) {
                worst = worst.max(rel(*a, *o, is));
            }
            for i in 0..3 {
                if b.row_drive[i] == LineDrive::Floating {
                    let s: f64 = (0..3).map(|j| sol.cell_currents[i * 3 + j]).sum();
                    worst_kcl = worst_kcl.max(s.abs());
                }
            }
            for j in 0..3 {
                if b.col_drive[j] == LineDrive::Floating {
                    let s: f64 = (0..3).map(|i| sol.cell_currents[i * 3 + j]).sum();
                    worst_kcl = worst_kcl.max(s.abs());
                }
            }
        }
        let p = ConductionParams::default().with_channels(Channels::OhmicOnly);
        let x = Crossbar::uniform(2, 2, p, DeviceState::lrs()).unwrap();
        let v = 0.3;
        let sol = solve_network(&x, &BiasScheme::read_floating(2, 2, (0, 0), v)).unwrap();
        let r = Readout::measure(v, T, &p, &DeviceState::lrs()).unwrap().r_ohms;
        // selected cell R in parallel with three R in series
        let divider = rel(sol.col_voltages[1], 2.0 * v / 3.0, v)
            .max(rel(sol.row_voltages[1], v / 3.0, v))
            .max(rel(sol.col_currents[0], v / r + v / (3.0 * r), v / r));
        (
            worst <= 1e-9 && worst_kcl < 1e-12 && divider <= 1e-12,
            format!("oracle rel {worst:.1e}, KCL {worst_kcl:.1e} A, divider rel {divider:.1e}"),
        )
    });
}

#[test]
fn c12_sneak_margin() {
    run(12, "nonlinear sneak margin >= 3x Ohmic at 0.5 V", 10, || {
        let p = ConductionParams::default();
        let mut worst = f64::INFINITY;
        for n in [2, 4, 8, 16] {
            let nl = Crossbar::uniform(n, n, p, DeviceState::lrs()).unwrap();
            let oh = Crossbar::uniform(n, n, p.with_channels(Channels::OhmicOnly), DeviceState::lrs()).unwrap();
            let a = sneak_margin(&nl, (0, 0), 0.5).unwrap().margin;
            let b = sneak_margin(&oh, (0, 0), 0.5).unwrap().margin;
            worst = worst.min(a / b);
        }
        (worst >= 3.0, format!("smallest margin ratio {worst:.2} over 2..16 lines"))
    });
}

#[test]
fn c13_retention() {
    run(13, "state bit-identical after 11 days at default drift", 1, || {
        let drift = fenvm_cli::Config::default().drift_rate();
        let p = ConductionParams::default();
        let dt = 11.0 * 86_400.0;
        let mut pass = true;
        for w in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let s = DeviceState::with_w(w);
            let e = retention_evolve(&s, dt, drift).unwrap();
            let r0 = Readout::measure(0.3, T, &p, &s).unwrap();
            let r1 = Readout::measure(0.3, T, &p, &e).unwrap();
            pass &= e == s && e.w.to_bits() == s.w.to_bits() && r0.r_ohms.to_bits() == r1.r_ohms.to_bits();
        }
        (pass, format!("drift {drift} 1/s, 5 states"))
    });
}

#[test]
fn c14_mvm_properties() {
    run(14, "MVM quantization bound (levels=11), error monotone in sigma", 60, || {
        let p = ConductionParams::default();
        let grid: Vec<f64> = (0..=2000).map(|k| -1.0 + k as f64 / 1000.0).collect();
        let w = nalgebra::DMatrix::from_row_slice(1, grid.len(), &grid);
        let m = map_weights(&w, Some(11), &p, 0.1).unwrap();
        let q_err = (m.decode() - &w).amax();
        let (w8, _) = synthetic_problem(8, 8, 1, 14);
        let m8 = map_weights(&w8, Some(11), &p, 0.1).unwrap();
        let q_err = q_err.max((m8.decode() - &w8).amax());
        let bound = 0.5 / 10.0 + 1e-12;

        let (wm, xs) = synthetic_problem(8, 8, 16, 140);
        let medians: Vec<f64> = [0.0, 0.05, 0.1]
            .iter()
            .map(|&sigma| {
                let cfg = MvmConfig {
                    sigma_d2d: sigma,
                    n_trials: 50,
                    seed: 1400,
                    ..MvmConfig::default()
                };
                mvm_error_mc(&wm, &xs, &cfg).unwrap().median
            })
            .collect();
        let monotone = medians.windows(2).all(|p| p[0] <= p[1]);
        (
            q_err <= bound && monotone,
            format!("max quantization error {q_err:.6} (bound {bound:.6}), medians {medians:.4?}"),
        )
    });
}

#[test]
fn c15_bench_determinism() {
    run(15, "bench twice with equal seed gives byte-identical CSVs", 10, || {
        let cfg = fenvm_cli::Config::default();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = fenvm_cli::run_command("bench", &cfg, a.path(), 42).unwrap();
        let fb = fenvm_cli::run_command("bench", &cfg, b.path(), 42).unwrap();
        let mut same = fa.len() == fb.len();
        for (x, y) in fa.iter().zip(&fb) {
            same &= x.file_name() == y.file_name() && std::fs::read(x).unwrap() == std::fs::read(y).unwrap();
        }
        (same, format!("{} files compared", fa.len()))
    });
}
