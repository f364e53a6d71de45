//! Differential-pair weight mapping, write-verify programming and MVM error
//! statistics.
//!
//! A signed weight matrix `W` (outputs x inputs) is stored on two arrays whose
//! rows are the inputs and whose columns are the outputs, so that cell
//! `(i, j)` of each array holds a conductance for `W[(j, i)]`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::conduction::{current_total, ConductionParams, Readout};
use crate::crossbar::{mvm_read, Crossbar, READ_RANGE};
use crate::device_state::{apply_pulse, DeviceState, PulseSpec, SchemeKind, UpdateModel};
use crate::error::{finite, ModelError, Result};
use crate::rng::{derive_seed, seeded};

/// Read voltage used for inference, V.
pub const INFERENCE_V_READ: f64 = 0.1;
/// Write-verify potentiation pulse.
pub const POT_PULSE: PulseSpec = PulseSpec {
    v_write: -1.6,
    t_width: 50e-6,
};
/// Write-verify depression pulse.
pub const DEP_PULSE: PulseSpec = PulseSpec {
    v_write: 2.4,
    t_width: 50e-6,
};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMapping {
    /// `None` keeps weights unquantized.
    pub levels: Option<u32>,
    pub g_min: f64,
    pub g_max: f64,
    pub v_read: f64,
    /// Positive-array targets, input-major like the arrays.
    pub g_pos: DMatrix<f64>,
    pub g_neg: DMatrix<f64>,
}

impl WeightMapping {
    /// Weights represented by the targets, outputs x inputs.
    pub fn decode(&self) -> DMatrix<f64> {
        ((&self.g_pos - &self.g_neg) / (self.g_max - self.g_min)).transpose()
    }

    /// Largest element error that quantization may introduce.
    pub fn quantization_bound(&self) -> f64 {
        match self.levels {
            Some(l) => 0.5 / (l - 1) as f64,
            None => 0.0,
        }
    }
}

/// Nominal HRS and LRS read conductances.
pub fn conductance_range(p: &ConductionParams, v_read: f64, t: f64) -> Result<(f64, f64)> {
    let g_min = Readout::measure(v_read, t, p, &DeviceState::hrs())?.conductance();
    let g_max = Readout::measure(v_read, t, p, &DeviceState::lrs())?.conductance();
    if !(g_min < g_max) {
        return Err(ModelError::Degenerate(format!(
            "no conductance window: g_min {g_min:e} S, g_max {g_max:e} S"
        )));
    }
    Ok((g_min, g_max))
}

/// Rounds `w` in [-1, 1] to the level grid.
pub fn quantize(w: f64, levels: Option<u32>) -> f64 {
    match levels {
        Some(l) => {
            let n = (l - 1) as f64;
            (w * n).round() / n
        }
        None => w,
    }
}

pub fn map_weights(w: &DMatrix<f64>, levels: Option<u32>, p: &ConductionParams, v_read: f64) -> Result<WeightMapping> {
    if let Some(l) = levels {
        if l < 2 {
            return Err(ModelError::OutOfRange {
                what: "levels",
                value: l as f64,
                constraint: "levels >= 2",
            });
        }
    }
    if w.is_empty() {
        return Err(ModelError::Dimension("empty weight matrix".into()));
    }
    if let Some(&bad) = w.iter().find(|x| !(x.abs() <= 1.0)) {
        return Err(ModelError::OutOfRange {
            what: "weight",
            value: bad,
            constraint: "weights must lie in [-1, 1]",
        });
    }
    let (g_min, g_max) = conductance_range(p, v_read, 300.0)?;
    let span = g_max - g_min;
    let q = w.map(|x| quantize(x, levels)).transpose();
    Ok(WeightMapping {
        levels,
        g_min,
        g_max,
        v_read,
        g_pos: q.map(|x| g_min + x.max(0.0) * span),
        g_neg: q.map(|x| g_min + (-x).max(0.0) * span),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceTargets {
    /// Row-major like [`Crossbar::cells`], S.
    pub g: Vec<f64>,
    pub v_read: f64,
    pub g_min: f64,
    pub g_max: f64,
}

impl ConductanceTargets {
    pub fn from_matrix(g: &DMatrix<f64>, m: &WeightMapping) -> Self {
        let (rows, cols) = g.shape();
        Self {
            g: (0..rows * cols).map(|k| g[(k / cols, k % cols)]).collect(),
            v_read: m.v_read,
            g_min: m.g_min,
            g_max: m.g_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramReport {
    pub crossbar: Crossbar,
    pub pulse_counts: Vec<u32>,
    /// Final `g - target`, S.
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    /// Target outside the cell's own reachable range; the cell is driven to
    /// the nearest reachable conductance instead.
    pub unreachable: Vec<bool>,
}

impl ProgramReport {
    pub fn converged_fraction(&self) -> f64 {
        self.converged.iter().filter(|&&c| c).count() as f64 / self.converged.len() as f64
    }
}

fn read_g(x: &Crossbar, s: &DeviceState, v_read: f64) -> Result<f64> {
    Ok(current_total(v_read, x.t_kelvin, &x.p, s)? / v_read)
}

/// Read, compare, pulse, repeat.
///
/// `tol` is a fraction of `g_max - g_min`. Each cell gets at most
/// `max_pulses` pulses of the hybrid scheme.
pub fn program_write_verify<R: Rng + ?Sized>(
    x: &Crossbar,
    targets: &ConductanceTargets,
    m: &UpdateModel,
    tol: f64,
    max_pulses: u32,
    rng: &mut R,
) -> Result<ProgramReport> {
    if targets.g.len() != x.cells.len() {
        return Err(ModelError::Dimension(format!(
            "{} targets for {} cells",
            targets.g.len(),
            x.cells.len()
        )));
    }
    finite("tol", tol)?;
    if tol <= 0.0 {
        return Err(ModelError::OutOfRange {
            what: "tol",
            value: tol,
            constraint: "must be > 0",
        });
    }
    m.validate()?;
    let band = tol * (targets.g_max - targets.g_min);
    let v = targets.v_read;
    let mut out = x.clone();
    let n = x.cells.len();
    let mut pulse_counts = vec![0; n];
    let mut residuals = vec![0.0; n];
    let mut converged = vec![false; n];
    let mut unreachable = vec![false; n];
    for k in 0..n {
        let mut s = x.cells[k];
        let lo = read_g(x, &DeviceState { w: 0.0, ..s }, v)?;
        let hi = read_g(x, &DeviceState { w: 1.0, ..s }, v)?;
        let requested = targets.g[k];
        finite("target", requested)?;
        let target = requested.clamp(lo, hi);
        unreachable[k] = (requested - target).abs() > band;
        let mut g = read_g(x, &s, v)?;
        while (g - target).abs() > band && pulse_counts[k] < max_pulses {
            let pulse = if g < target { POT_PULSE } else { DEP_PULSE };
            s = apply_pulse(&s, &pulse, SchemeKind::Hybrid, m, rng).state;
            pulse_counts[k] += 1;
            g = read_g(x, &s, v)?;
        }
        out.cells[k] = s;
        residuals[k] = g - requested;
        converged[k] = (g - target).abs() <= band;
    }
    Ok(ProgramReport {
        crossbar: out,
        pulse_counts,
        residuals,
        converged,
        unreachable,
    })
}

/// Sets every cell exactly to its target (clamped to the cell's range).
pub fn program_ideal(x: &Crossbar, targets: &ConductanceTargets) -> Result<Crossbar> {
    let mut out = x.clone();
    for (s, &g) in out.cells.iter_mut().zip(&targets.g) {
        s.w = s.w_for_conductance(g, targets.v_read, x.t_kelvin, &x.p)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Programming {
    Ideal,
    WriteVerify { tol: f64, max_pulses: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvmConfig {
    pub p: ConductionParams,
    pub update: UpdateModel,
    pub levels: Option<u32>,
    pub sigma_d2d: f64,
    pub programming: Programming,
    pub v_read: f64,
    pub n_trials: usize,
    pub seed: u64,
}

impl Default for MvmConfig {
    fn default() -> Self {
        Self {
            p: ConductionParams::default(),
            update: UpdateModel::default(),
            levels: Some(11),
            sigma_d2d: 0.1,
            programming: Programming::WriteVerify {
                tol: 0.02,
                max_pulses: 150,
            },
            v_read: INFERENCE_V_READ,
            n_trials: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvmErrorStats {
    /// Relative RMS error of each trial, in trial order.
    pub errors: Vec<f64>,
    pub median: f64,
    /// Distribution-free 95% interval for the median.
    pub ci95: (f64, f64),
    pub mean: f64,
}

/// Output of one programmed pair for a batch of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MvmTrial {
    pub alpha: f64,
    /// One decoded output vector per input.
    pub outputs: Vec<Vec<f64>>,
    pub rel_rms_error: f64,
}

fn check_inputs(w: &DMatrix<f64>, inputs: &[Vec<f64>]) -> Result<f64> {
    if inputs.is_empty() {
        return Err(ModelError::InsufficientData("no input vectors".into()));
    }
    if let Some(x) = inputs.iter().find(|x| x.len() != w.ncols()) {
        return Err(ModelError::Dimension(format!(
            "input of length {} for {} weight columns",
            x.len(),
            w.ncols()
        )));
    }
    let scale = inputs.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    finite("input scale", scale)?;
    if scale == 0.0 {
        return Err(ModelError::Degenerate("all inputs are zero".into()));
    }
    Ok(scale)
}

fn differential(pos: &Crossbar, neg: &Crossbar, v: &[f64]) -> Result<Vec<f64>> {
    let a = mvm_read(pos, v)?;
    let b = mvm_read(neg, v)?;
    Ok(a.iter().zip(&b).map(|(p, n)| p - n).collect())
}

/// Decodes `y = alpha (I+ - I-)` for programmed arrays.
///
/// Inputs are scaled so that the largest |x| maps to `v_read`. The gain is
/// fitted by least squares on an all-ones test vector against the mapped
/// weights.
pub fn run_mvm(
    pos: &Crossbar,
    neg: &Crossbar,
    mapping: &WeightMapping,
    w: &DMatrix<f64>,
    inputs: &[Vec<f64>],
) -> Result<MvmTrial> {
    let scale = check_inputs(w, inputs)?;
    let v_read = mapping.v_read;
    if !(v_read > 0.0 && v_read <= READ_RANGE) {
        return Err(ModelError::OutOfRange {
            what: "v_read",
            value: v_read,
            constraint: "0 < v_read <= 0.3 V",
        });
    }
    let wq = mapping.decode();
    let test = differential(pos, neg, &vec![v_read; w.ncols()])?;
    let expect: Vec<f64> = (0..w.nrows()).map(|j| wq.row(j).sum()).collect();
    let den: f64 = test.iter().map(|d| d * d).sum();
    let alpha = if den > 0.0 {
        test.iter().zip(&expect).map(|(d, e)| d * e).sum::<f64>() / den
    } else {
        // all-zero weights: only the nominal gain is meaningful
        1.0 / ((mapping.g_max - mapping.g_min) * v_read)
    };
    let mut outputs = Vec::with_capacity(inputs.len());
    let (mut num, mut ref_sq) = (0.0, 0.0);
    for x in inputs {
        let v: Vec<f64> = x.iter().map(|xi| v_read * xi / scale).collect();
        let d = differential(pos, neg, &v)?;
        let y: Vec<f64> = d.iter().map(|di| alpha * scale * di).collect();
        for (j, yj) in y.iter().enumerate() {
            let exact: f64 = (0..w.ncols()).map(|i| w[(j, i)] * x[i]).sum();
            num += (yj - exact).powi(2);
            ref_sq += exact * exact;
        }
        outputs.push(y);
    }
    let rel_rms_error = if ref_sq > 0.0 { (num / ref_sq).sqrt() } else { num.sqrt() };
    Ok(MvmTrial {
        alpha,
        outputs,
        rel_rms_error,
    })
}

/// One Monte Carlo trial: sample both arrays, program them and decode.
pub fn mvm_trial(w: &DMatrix<f64>, inputs: &[Vec<f64>], cfg: &MvmConfig, trial_seed: u64) -> Result<MvmTrial> {
    let mapping = map_weights(w, cfg.levels, &cfg.p, cfg.v_read)?;
    let (rows, cols) = (w.ncols(), w.nrows());
    let mut arrays = Vec::with_capacity(2);
    for (k, g) in [&mapping.g_pos, &mapping.g_neg].into_iter().enumerate() {
        let x = Crossbar::build(rows, cols, cfg.p, cfg.sigma_d2d, derive_seed(trial_seed, k as u64))?;
        let targets = ConductanceTargets::from_matrix(g, &mapping);
        let programmed = match cfg.programming {
            Programming::Ideal => program_ideal(&x, &targets)?,
            Programming::WriteVerify { tol, max_pulses } => {
                let mut rng = seeded(derive_seed(trial_seed, 2 + k as u64));
                program_write_verify(&x, &targets, &cfg.update, tol, max_pulses, &mut rng)?.crossbar
            }
        };
        arrays.push(programmed);
    }
    run_mvm(&arrays[0], &arrays[1], &mapping, w, inputs)
}

pub fn mvm_error_mc(w: &DMatrix<f64>, inputs: &[Vec<f64>], cfg: &MvmConfig) -> Result<MvmErrorStats> {
    if cfg.n_trials == 0 {
        return Err(ModelError::OutOfRange {
            what: "n_trials",
            value: 0.0,
            constraint: "n_trials >= 1",
        });
    }
    check_inputs(w, inputs)?;
    let errors = (0..cfg.n_trials)
        .map(|t| mvm_trial(w, inputs, cfg, derive_seed(cfg.seed, t as u64)).map(|r| r.rel_rms_error))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = errors.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = crate::extraction::quantile(&sorted, 0.5);
    let half = 1.96 * (n as f64).sqrt() / 2.0;
    let lo = ((n as f64 / 2.0 - half).floor().max(0.0) as usize).min(n - 1);
    let hi = ((n as f64 / 2.0 + half).ceil() as usize).min(n - 1);
    Ok(MvmErrorStats {
        mean: errors.iter().sum::<f64>() / n as f64,
        errors,
        median,
        ci95: (sorted[lo], sorted[hi]),
    })
}

/// Seeded standard-normal weights clipped to [-1, 1] and inputs.
pub fn synthetic_problem(outputs: usize, inputs: usize, n_vectors: usize, seed: u64) -> (DMatrix<f64>, Vec<Vec<f64>>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = seeded(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let w = DMatrix::from_fn(outputs, inputs, |_, _| (0.5 * draw()).clamp(-1.0, 1.0));
    let xs = (0..n_vectors).map(|_| (0..inputs).map(|_| draw()).collect()).collect();
    (w, xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conduction::Channels;
    use proptest::prelude::{prop, prop_assert, proptest};

    fn ohmic() -> ConductionParams {
        ConductionParams::default().with_channels(Channels::OhmicOnly)
    }

    #[test]
    fn mapping_endpoints() {
        let p = ConductionParams::default();
        let w = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, -1.0]);
        let m = map_weights(&w, Some(11), &p, 0.1).unwrap();
        assert_eq!((m.g_pos[(0, 0)], m.g_neg[(0, 0)]), (m.g_max, m.g_min));
        assert_eq!(m.g_pos[(1, 0)], m.g_neg[(1, 0)]);
        assert_eq!((m.g_pos[(2, 0)], m.g_neg[(2, 0)]), (m.g_min, m.g_max));
        assert!(m.g_min < m.g_max);
    }

    #[test]
    fn mapping_rejects_bad_input() {
        let p = ConductionParams::default();
        let w = DMatrix::from_row_slice(1, 2, &[1.2, 0.0]);
        assert!(map_weights(&w, Some(11), &p, 0.1).is_err());
        let w = DMatrix::from_row_slice(1, 2, &[f64::NAN, 0.0]);
        assert!(map_weights(&w, Some(11), &p, 0.1).is_err());
        let w = DMatrix::from_row_slice(1, 2, &[0.5, 0.0]);
        assert!(map_weights(&w, Some(1), &p, 0.1).is_err());
    }

    #[test]
    fn quantization_bound_exhaustive() {
        let p = ConductionParams::default();
        // every grid point and every midpoint between neighbours
        let pts: Vec<f64> = (0..=400).map(|k| -1.0 + k as f64 / 200.0).collect();
        let w = DMatrix::from_row_slice(1, pts.len(), &pts);
        let m = map_weights(&w, Some(11), &p, 0.1).unwrap();
        let err = (m.decode() - &w).amax();
        assert!(err <= 0.05 + 1e-12, "{err}");
        assert!(err >= 0.05 - 1e-12);
    }

    #[test]
    fn write_verify_at_target_needs_no_pulses() {
        let p = ConductionParams::default();
        let x = Crossbar::uniform(2, 2, p, DeviceState::with_w(0.4)).unwrap();
        let g = read_g(&x, x.cell(0, 0), 0.1).unwrap();
        let (g_min, g_max) = conductance_range(&p, 0.1, 300.0).unwrap();
        let t = ConductanceTargets {
            g: vec![g; 4],
            v_read: 0.1,
            g_min,
            g_max,
        };
        let rep = program_write_verify(&x, &t, &UpdateModel::default(), 0.02, 150, &mut seeded(0)).unwrap();
        assert_eq!(rep.pulse_counts, vec![0; 4]);
        assert_eq!(rep.crossbar, x);
    }

    #[test]
    fn write_verify_noiseless_mid_range() {
        let p = ConductionParams::default();
        let x = Crossbar::uniform(1, 1, p, DeviceState::hrs()).unwrap();
        let (g_min, g_max) = conductance_range(&p, 0.3, 300.0).unwrap();
        let t = ConductanceTargets {
            g: vec![0.5 * (g_min + g_max)],
            v_read: 0.3,
            g_min,
            g_max,
        };
        let m = UpdateModel::noiseless();
        let rep = program_write_verify(&x, &t, &m, 0.02, 1000, &mut seeded(0)).unwrap();
        assert!(rep.converged[0]);
        assert!(rep.pulse_counts[0] <= m.n_full, "{}", rep.pulse_counts[0]);
        assert!(rep.residuals[0].abs() <= 0.02 * (g_max - g_min));
    }

    #[test]
    fn write_verify_noisy_population() {
        let p = ConductionParams::default();
        let m = UpdateModel::default();
        let x = Crossbar::build(10, 10, p, 0.0, 5).unwrap();
        let (g_min, g_max) = conductance_range(&p, 0.3, 300.0).unwrap();
        let mut rng = seeded(77);
        let t = ConductanceTargets {
            g: (0..100).map(|_| g_min + rng.random::<f64>() * (g_max - g_min)).collect(),
            v_read: 0.3,
            g_min,
            g_max,
        };
        let rep = program_write_verify(&x, &t, &m, 0.02, 3 * m.n_full, &mut rng).unwrap();
        assert!(rep.converged_fraction() >= 0.95, "{}", rep.converged_fraction());
        for s in &rep.crossbar.cells {
            let g = read_g(&rep.crossbar, s, 0.3).unwrap();
            assert!(g >= g_min * (1.0 - 1e-12) && g <= g_max * (1.0 + 1e-12));
        }
    }

    #[test]
    fn write_verify_flags_unreachable() {
        let p = ConductionParams::default();
        let x = Crossbar::uniform(1, 2, p, DeviceState::hrs()).unwrap();
        let (g_min, g_max) = conductance_range(&p, 0.1, 300.0).unwrap();
        let t = ConductanceTargets {
            g: vec![2.0 * g_max, 0.5 * g_min],
            v_read: 0.1,
            g_min,
            g_max,
        };
        let rep = program_write_verify(&x, &t, &UpdateModel::noiseless(), 0.02, 200, &mut seeded(0)).unwrap();
        assert_eq!(rep.unreachable, vec![true, true]);
        assert!(rep.crossbar.cells[0].w > 0.98);
        assert_eq!(rep.crossbar.cells[1].w, 0.0);
    }

    #[test]
    fn ideal_limit() {
        let (w, xs) = synthetic_problem(6, 5, 8, 3);
        let cfg = MvmConfig {
            p: ohmic(),
            levels: None,
            sigma_d2d: 0.0,
            programming: Programming::Ideal,
            n_trials: 2,
            ..MvmConfig::default()
        };
        let stats = mvm_error_mc(&w, &xs, &cfg).unwrap();
        assert!(stats.median < 1e-6, "{}", stats.median);
    }

    #[test]
    fn quantized_error_matches_analysis() {
        let (w, xs) = synthetic_problem(8, 8, 16, 11);
        let cfg = MvmConfig {
            p: ohmic(),
            sigma_d2d: 0.0,
            programming: Programming::Ideal,
            n_trials: 1,
            ..MvmConfig::default()
        };
        let got = mvm_error_mc(&w, &xs, &cfg).unwrap().median;
        let wq = w.map(|x| quantize(x, Some(11)));
        let (mut num, mut den) = (0.0, 0.0);
        for x in &xs {
            let xv = nalgebra::DVector::from_column_slice(x);
            num += (&wq * &xv - &w * &xv).norm_squared();
            den += (&w * &xv).norm_squared();
        }
        let expected = (num / den).sqrt();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn common_gain_cancels() {
        let (w, xs) = synthetic_problem(4, 4, 6, 2);
        let base = MvmConfig {
            p: ohmic(),
            sigma_d2d: 0.0,
            programming: Programming::Ideal,
            n_trials: 1,
            ..MvmConfig::default()
        };
        let a = mvm_error_mc(&w, &xs, &base).unwrap().median;
        let mut p = ohmic();
        p.c_ohm *= 3.7;
        let b = mvm_error_mc(&w, &xs, &MvmConfig { p, ..base }).unwrap().median;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn mc_is_deterministic() {
        let (w, xs) = synthetic_problem(4, 4, 4, 9);
        let cfg = MvmConfig {
            n_trials: 5,
            seed: 42,
            ..MvmConfig::default()
        };
        let a = mvm_error_mc(&w, &xs, &cfg).unwrap();
        assert_eq!(a, mvm_error_mc(&w, &xs, &cfg).unwrap());
        assert!(a.ci95.0 <= a.median && a.median <= a.ci95.1);
        assert!(mvm_error_mc(&w, &xs, &MvmConfig { n_trials: 0, ..cfg }).is_err());
    }

    #[test]
    fn error_grows_with_coarser_levels() {
        let (w, xs) = synthetic_problem(8, 8, 8, 4);
        let err = |levels| {
            let cfg = MvmConfig {
                p: ohmic(),
                levels,
                sigma_d2d: 0.0,
                programming: Programming::Ideal,
                n_trials: 1,
                ..MvmConfig::default()
            };
            mvm_error_mc(&w, &xs, &cfg).unwrap().median
        };
        let e: Vec<f64> = [Some(3), Some(5), Some(11), Some(41), None].map(err).to_vec();
        assert!(e.windows(2).all(|p| p[0] >= p[1]), "{e:?}");
    }

    proptest! {
        #[test]
        fn decode_within_half_level(ws in prop::collection::vec(-1.0f64..=1.0, 1..40), levels in 2u32..64) {
            let w = DMatrix::from_row_slice(1, ws.len(), &ws);
            let m = map_weights(&w, Some(levels), &ConductionParams::default(), 0.1).unwrap();
            let err = (m.decode() - &w).amax();
            prop_assert!(err <= 0.5 / (levels - 1) as f64 + 1e-12);
        }
    }
}
