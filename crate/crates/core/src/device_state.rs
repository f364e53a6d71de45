//! The junction as a state machine.
//!
//! The state `w` in [0, 1] is the normalised polarization/conductance
//! coordinate: `w = 0` is the HRS, `w = 1` the LRS, and the conductance
//! multiplier is `g_lrs^w` (log-linear between the two).
//!
//! Pulse updates are count-indexed: each pulse beyond an onset voltage
//! advances the device by one equivalent pulse along a saturating curve
//!
//! ```text
//! w_pot(n) = (1 - exp(-n / A)) / (1 - exp(-N / A))
//! w_dep(n) = 1 - w_pot(n)                 (with the depression A)
//! ```
//!
//! where `N = n_full` pulses complete a transition. The shape `A` depends on
//! the programming scheme.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::conduction::{current_total, ConductionParams, Readout};
use crate::error::{finite, ModelError, Result};
use crate::rng::{seeded, SimRng};

/// No breakdown up to this many switching cycles.
pub const ENDURANCE_LIMIT: u64 = 10_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Negative write, conductance up.
    Potentiation,
    /// Positive write, conductance down.
    Depression,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceState {
    /// 0 = HRS, 1 = LRS.
    pub w: f64,
    /// Offset added to log10 of the device resistance.
    pub d2d_log10: f64,
    /// Polarity reversals seen so far.
    pub cycles: u64,
    pub broken: bool,
    pub last_polarity: Option<Polarity>,
}

impl Default for DeviceState {
    fn default() -> Self {
        Self::hrs()
    }
}

impl DeviceState {
    pub fn hrs() -> Self {
        Self::with_w(0.0)
    }

    pub fn lrs() -> Self {
        Self::with_w(1.0)
    }

    pub fn with_w(w: f64) -> Self {
        Self {
            w: w.clamp(0.0, 1.0),
            d2d_log10: 0.0,
            cycles: 0,
            broken: false,
            last_polarity: None,
        }
    }

    /// Conductance multiplier shared by both conduction channels.
    pub fn multiplier(&self, p: &ConductionParams) -> f64 {
        p.g_lrs.powf(self.w) * 10f64.powf(-self.d2d_log10)
    }

    /// State whose read conductance is `g_target` at `v_read`, clamped to
    /// this device's reachable range.
    pub fn w_for_conductance(&self, g_target: f64, v_read: f64, t: f64, p: &ConductionParams) -> Result<f64> {
        let hrs = DeviceState { w: 0.0, ..*self };
        let g0 = Readout::measure(v_read, t, p, &hrs)?.conductance();
        if p.g_lrs == 1.0 {
            return Ok(0.0);
        }
        Ok(((g_target / g0).ln() / p.g_lrs.ln()).clamp(0.0, 1.0))
    }
}

/// Pristine device (HRS) with a log-normal device-to-device offset drawn
/// from a generator seeded with `seed`.
pub fn sample_device(sigma_d2d: f64, seed: u64) -> Result<DeviceState> {
    sample_device_with(sigma_d2d, &mut seeded(seed))
}

pub fn sample_device_with<R: Rng + ?Sized>(sigma_d2d: f64, rng: &mut R) -> Result<DeviceState> {
    finite("sigma_d2d", sigma_d2d)?;
    if sigma_d2d < 0.0 {
        return Err(ModelError::OutOfRange {
            what: "sigma_d2d",
            value: sigma_d2d,
            constraint: "must be >= 0",
        });
    }
    let mut s = DeviceState::hrs();
    if sigma_d2d > 0.0 {
        let normal = Normal::new(0.0, sigma_d2d).expect("finite positive sigma");
        s.d2d_log10 = normal.sample(rng);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    /// Signed amplitude, V.
    pub v_write: f64,
    /// Duration, s.
    pub t_width: f64,
}

impl PulseSpec {
    pub fn new(v_write: f64, t_width: f64) -> Result<Self> {
        finite("v_write", v_write)?;
        finite("t_width", t_width)?;
        if t_width < 0.0 {
            return Err(ModelError::OutOfRange {
                what: "t_width",
                value: t_width,
                constraint: "must be >= 0",
            });
        }
        Ok(Self { v_write, t_width })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    /// Constant width, increasing amplitude.
    AmplitudeRamp,
    /// Constant amplitude (field), increasing width.
    WidthRamp,
    /// Both increase.
    Hybrid,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::AmplitudeRamp, SchemeKind::WidthRamp, SchemeKind::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::AmplitudeRamp => "amplitude",
            SchemeKind::WidthRamp => "width",
            SchemeKind::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// A programmed pulse sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseScheme {
    AmplitudeRamp {
        v_start: f64,
        v_step: f64,
        width: f64,
        n_pulses: usize,
    },
    WidthRamp {
        v_write: f64,
        width_start: f64,
        width_ratio: f64,
        n_pulses: usize,
    },
    Hybrid {
        v_start: f64,
        v_max: f64,
        width_start: f64,
        width_ratio: f64,
        n_pulses: usize,
    },
}

const WIDTH_50US: f64 = 50e-6;
const WIDTH_RAMP_START: f64 = 1e-6;
const WIDTH_RAMP_RATIO: f64 = 1.1;

impl PulseScheme {
    /// +0.8 V to +2.4 V in 25 mV steps, 50 us.
    pub fn amplitude_depression() -> Self {
        PulseScheme::AmplitudeRamp {
            v_start: 0.8,
            v_step: 0.025,
            width: WIDTH_50US,
            n_pulses: 65,
        }
    }

    /// -0.6 V to -1.6 V in 25 mV steps, 50 us.
    pub fn amplitude_potentiation() -> Self {
        PulseScheme::AmplitudeRamp {
            v_start: -0.6,
            v_step: -0.025,
            width: WIDTH_50US,
            n_pulses: 41,
        }
    }

    /// Constant field at `v_write`, widths growing geometrically from 1 us.
    pub fn width_ramp(v_write: f64) -> Self {
        PulseScheme::WidthRamp {
            v_write,
            width_start: WIDTH_RAMP_START,
            width_ratio: WIDTH_RAMP_RATIO,
            n_pulses: 50,
        }
    }

    pub fn width_depression() -> Self {
        Self::width_ramp(2.4)
    }

    pub fn width_potentiation() -> Self {
        Self::width_ramp(-1.6)
    }

    /// Alternate constant-field amplitudes (+3.2 V / -1.4 V).
    pub fn width_depression_alt() -> Self {
        Self::width_ramp(3.2)
    }

    pub fn width_potentiation_alt() -> Self {
        Self::width_ramp(-1.4)
    }

    pub fn hybrid_depression() -> Self {
        PulseScheme::Hybrid {
            v_start: 0.825,
            v_max: 2.4,
            width_start: WIDTH_RAMP_START,
            width_ratio: WIDTH_RAMP_RATIO,
            n_pulses: 50,
        }
    }

    pub fn hybrid_potentiation() -> Self {
        PulseScheme::Hybrid {
            v_start: -0.625,
            v_max: -1.6,
            width_start: WIDTH_RAMP_START,
            width_ratio: WIDTH_RAMP_RATIO,
            n_pulses: 50,
        }
    }

    /// Depression and potentiation presets for a scheme kind.
    pub fn presets(kind: SchemeKind) -> (Self, Self) {
        match kind {
            SchemeKind::AmplitudeRamp => (Self::amplitude_depression(), Self::amplitude_potentiation()),
            SchemeKind::WidthRamp => (Self::width_depression(), Self::width_potentiation()),
            SchemeKind::Hybrid => (Self::hybrid_depression(), Self::hybrid_potentiation()),
        }
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            PulseScheme::AmplitudeRamp { .. } => SchemeKind::AmplitudeRamp,
            PulseScheme::WidthRamp { .. } => SchemeKind::WidthRamp,
            PulseScheme::Hybrid { .. } => SchemeKind::Hybrid,
        }
    }

    pub fn n_pulses(&self) -> usize {
        match *self {
            PulseScheme::AmplitudeRamp { n_pulses, .. }
            | PulseScheme::WidthRamp { n_pulses, .. }
            | PulseScheme::Hybrid { n_pulses, .. } => n_pulses,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses() < 1 {
            return Err(ModelError::OutOfRange {
                what: "n_pulses",
                value: 0.0,
                constraint: "n_pulses >= 1",
            });
        }
        let (w0, ratio) = match *self {
            PulseScheme::AmplitudeRamp { width, .. } => (width, 1.0),
            PulseScheme::WidthRamp {
                width_start, width_ratio, ..
            }
            | PulseScheme::Hybrid {
                width_start, width_ratio, ..
            } => (width_start, width_ratio),
        };
        if !(w0 > 0.0) {
            return Err(ModelError::OutOfRange {
                what: "width",
                value: w0,
                constraint: "pulse width must be > 0",
            });
        }
        if !(ratio >= 1.0) {
            return Err(ModelError::OutOfRange {
                what: "width_ratio",
                value: ratio,
                constraint: "width ramp must be non-decreasing",
            });
        }
        if let PulseScheme::Hybrid { v_start, v_max, .. } = *self {
            if v_start.signum() != v_max.signum() || v_max.abs() < v_start.abs() {
                return Err(ModelError::OutOfRange {
                    what: "v_max",
                    value: v_max,
                    constraint: "hybrid amplitude must grow in magnitude without crossing zero",
                });
            }
        }
        Ok(())
    }

    pub fn pulses(&self) -> Vec<PulseSpec> {
        let n = self.n_pulses();
        (0..n)
            .map(|k| match *self {
                PulseScheme::AmplitudeRamp { v_start, v_step, width, .. } => PulseSpec {
                    v_write: v_start + v_step * k as f64,
                    t_width: width,
                },
                PulseScheme::WidthRamp {
                    v_write,
                    width_start,
                    width_ratio,
                    ..
                } => PulseSpec {
                    v_write,
                    t_width: width_start * width_ratio.powi(k as i32),
                },
                PulseScheme::Hybrid {
                    v_start,
                    v_max,
                    width_start,
                    width_ratio,
                    ..
                } => {
                    let frac = if n > 1 { k as f64 / (n - 1) as f64 } else { 1.0 };
                    PulseSpec {
                        v_write: v_start + (v_max - v_start) * frac,
                        t_width: width_start * width_ratio.powi(k as i32),
                    }
                }
            })
            .collect()
    }
}

/// Saturating-exponential shape for one scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateShape {
    pub a_pot: f64,
    pub a_dep: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeTable {
    pub amplitude: UpdateShape,
    pub width: UpdateShape,
    pub hybrid: UpdateShape,
}

impl ShapeTable {
    pub fn get(&self, kind: SchemeKind) -> UpdateShape {
        match kind {
            SchemeKind::AmplitudeRamp => self.amplitude,
            SchemeKind::WidthRamp => self.width,
            SchemeKind::Hybrid => self.hybrid,
        }
    }

    pub fn get_mut(&mut self, kind: SchemeKind) -> &mut UpdateShape {
        match kind {
            SchemeKind::AmplitudeRamp => &mut self.amplitude,
            SchemeKind::WidthRamp => &mut self.width,
            SchemeKind::Hybrid => &mut self.hybrid,
        }
    }
}

impl Default for ShapeTable {
    // amplitude ramps potentiate sharply, width ramps depress sharply
    fn default() -> Self {
        Self {
            amplitude: UpdateShape { a_pot: 5.0, a_dep: 25.0 },
            width: UpdateShape { a_pot: 25.0, a_dep: 5.0 },
            hybrid: UpdateShape { a_pot: 12.0, a_dep: 12.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateModel {
    pub shapes: ShapeTable,
    /// Pulses for a complete HRS <-> LRS transition.
    pub n_full: u32,
    /// Potentiation onset (negative), V.
    pub v_on_pot: f64,
    /// Depression onset (positive), V.
    pub v_on_dep: f64,
    /// Relative standard deviation of each update step.
    pub c2c_rel: f64,
}

impl Default for UpdateModel {
    fn default() -> Self {
        Self {
            shapes: ShapeTable::default(),
            n_full: 50,
            v_on_pot: -0.6,
            v_on_dep: 0.8,
            c2c_rel: 0.10,
        }
    }
}

impl UpdateModel {
    pub fn noiseless() -> Self {
        Self {
            c2c_rel: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for kind in SchemeKind::ALL {
            let s = self.shapes.get(kind);
            for (what, a) in [("a_pot", s.a_pot), ("a_dep", s.a_dep)] {
                finite(what, a)?;
                if a <= 0.0 {
                    return Err(ModelError::OutOfRange {
                        what,
                        value: a,
                        constraint: "shape parameter must be > 0",
                    });
                }
            }
        }
        if self.n_full < 2 {
            return Err(ModelError::OutOfRange {
                what: "n_full",
                value: self.n_full as f64,
                constraint: "n_full >= 2",
            });
        }
        if !(self.v_on_pot < 0.0 && 0.0 < self.v_on_dep) {
            return Err(ModelError::OutOfRange {
                what: "v_on_pot/v_on_dep",
                value: self.v_on_pot,
                constraint: "v_on_pot < 0 < v_on_dep",
            });
        }
        if !(0.0..1.0).contains(&self.c2c_rel) {
            return Err(ModelError::OutOfRange {
                what: "c2c_rel",
                value: self.c2c_rel,
                constraint: "0 <= c2c_rel < 1",
            });
        }
        Ok(())
    }

    /// Polarity triggered by a pulse of amplitude `v`, if any.
    pub fn polarity(&self, v: f64) -> Option<Polarity> {
        if v < self.v_on_pot {
            Some(Polarity::Potentiation)
        } else if v > self.v_on_dep {
            Some(Polarity::Depression)
        } else {
            None
        }
    }

    /// Noiseless state after one above-onset pulse of the given polarity.
    pub fn step(&self, w: f64, polarity: Polarity, kind: SchemeKind) -> f64 {
        let shape = self.shapes.get(kind);
        let n_full = self.n_full as f64;
        match polarity {
            Polarity::Potentiation => {
                let curve = SaturatingCurve::new(shape.a_pot, n_full);
                curve.value(curve.count(w) + 1.0)
            }
            Polarity::Depression => {
                let curve = SaturatingCurve::new(shape.a_dep, n_full);
                1.0 - curve.value(curve.count(1.0 - w) + 1.0)
            }
        }
    }
}

/// `f(n) = (1 - exp(-n/A)) / (1 - exp(-N/A))`, clamped to n in [0, N].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturatingCurve {
    pub a: f64,
    pub n_full: f64,
}

impl SaturatingCurve {
    pub fn new(a: f64, n_full: f64) -> Self {
        Self { a, n_full }
    }

    fn norm(&self) -> f64 {
        -(-self.n_full / self.a).exp_m1()
    }

    pub fn value(&self, n: f64) -> f64 {
        let n = n.clamp(0.0, self.n_full);
        (-(-n / self.a).exp_m1() / self.norm()).clamp(0.0, 1.0)
    }

    /// Inverse of [`value`](Self::value).
    pub fn count(&self, w: f64) -> f64 {
        let w = w.clamp(0.0, 1.0);
        (-self.a * (-w * self.norm()).ln_1p()).clamp(0.0, self.n_full)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseOutcome {
    pub state: DeviceState,
    pub delta_w: f64,
    /// Set when the device was already broken and ignored the pulse.
    pub skipped_broken: bool,
}

/// Applies one write pulse.
///
/// Pulses between the two onsets leave `w` untouched. Above-onset pulses move
/// the device one equivalent pulse along the curve of the active scheme; the
/// step is scaled by a mean-one log-normal factor of relative spread
/// `c2c_rel`.
pub fn apply_pulse<R: Rng + ?Sized>(
    s: &DeviceState,
    pulse: &PulseSpec,
    kind: SchemeKind,
    m: &UpdateModel,
    rng: &mut R,
) -> PulseOutcome {
    if s.broken {
        return PulseOutcome {
            state: *s,
            delta_w: 0.0,
            skipped_broken: true,
        };
    }
    let Some(polarity) = m.polarity(pulse.v_write) else {
        return PulseOutcome {
            state: *s,
            delta_w: 0.0,
            skipped_broken: false,
        };
    };

    let mut next = *s;
    if matches!(s.last_polarity, Some(prev) if prev != polarity) {
        next = endurance_register(&next, 1);
    }
    next.last_polarity = Some(polarity);
    if next.broken {
        return PulseOutcome {
            state: next,
            delta_w: 0.0,
            skipped_broken: false,
        };
    }

    let mut step = m.step(s.w, polarity, kind) - s.w;
    if m.c2c_rel > 0.0 && step != 0.0 {
        step *= c2c_factor(m.c2c_rel, rng);
    }
    next.w = (s.w + step).clamp(0.0, 1.0);
    PulseOutcome {
        state: next,
        delta_w: next.w - s.w,
        skipped_broken: false,
    }
}

fn c2c_factor<R: Rng + ?Sized>(rel: f64, rng: &mut R) -> f64 {
    let s2 = rel.mul_add(rel, 1.0).ln();
    LogNormal::new(-0.5 * s2, s2.sqrt())
        .expect("finite log-normal parameters")
        .sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub pulse_index: usize,
    pub pulse: PulseSpec,
    pub w: f64,
    pub readout: Readout,
}

/// Applies every pulse of `scheme` and reads the device after each one.
#[allow(clippy::too_many_arguments)]
pub fn run_scheme(
    s: &DeviceState,
    scheme: &PulseScheme,
    m: &UpdateModel,
    p: &ConductionParams,
    v_read: f64,
    t: f64,
    rng: &mut SimRng,
) -> Result<(DeviceState, Vec<TraceRow>)> {
    scheme.validate()?;
    let kind = scheme.kind();
    let mut state = *s;
    let mut rows = Vec::with_capacity(scheme.n_pulses());
    for (k, pulse) in scheme.pulses().into_iter().enumerate() {
        state = apply_pulse(&state, &pulse, kind, m, rng).state;
        rows.push(TraceRow {
            pulse_index: k,
            pulse,
            w: state.w,
            readout: Readout::measure(v_read, t, p, &state)?,
        });
    }
    Ok((state, rows))
}

/// Quasi-static switching: a logistic in the write voltage truncated to
/// +-4 widths around each coercive voltage, so small reads never disturb.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcHysteresis {
    /// SET coercive voltage (negative), V.
    pub v_c_minus: f64,
    /// RESET coercive voltage (positive), V.
    pub v_c_plus: f64,
    /// Logistic width, V.
    pub width: f64,
}

impl Default for DcHysteresis {
    fn default() -> Self {
        Self {
            v_c_minus: -0.6,
            v_c_plus: 0.8,
            width: 0.05,
        }
    }
}

const LOGISTIC_SPAN: f64 = 4.0;

impl DcHysteresis {
    /// Coercive voltage from a coercive field (V/m) across thickness `d`.
    pub fn coercive_voltage(e_c: f64, d: f64) -> f64 {
        e_c * d
    }

    pub fn memory_window(&self) -> f64 {
        self.v_c_plus - self.v_c_minus
    }

    fn switched(&self, overdrive: f64) -> f64 {
        let u = overdrive / self.width;
        if u <= -LOGISTIC_SPAN {
            return 0.0;
        }
        if u >= LOGISTIC_SPAN {
            return 1.0;
        }
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let lo = sig(-LOGISTIC_SPAN);
        ((sig(u) - lo) / (sig(LOGISTIC_SPAN) - lo)).clamp(0.0, 1.0)
    }

    /// State after holding `v` on a device at `w`.
    pub fn settle(&self, w: f64, v: f64) -> f64 {
        if v < 0.0 {
            w.max(self.switched(self.v_c_minus - v))
        } else {
            w.min(1.0 - self.switched(v - self.v_c_plus))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcPoint {
    pub v_write: f64,
    pub w: f64,
    pub readout: Readout,
}

/// Sweeps the write voltage over `v_grid`, reading at `v_read` after each step.
pub fn dc_write_loop(
    s: &DeviceState,
    v_grid: &[f64],
    h: &DcHysteresis,
    p: &ConductionParams,
    v_read: f64,
    t: f64,
) -> Result<(DeviceState, Vec<DcPoint>)> {
    let mut state = *s;
    let mut out = Vec::with_capacity(v_grid.len());
    for &v in v_grid {
        finite("v_write", v)?;
        if !state.broken {
            state.w = h.settle(state.w, v);
        }
        out.push(DcPoint {
            v_write: v,
            w: state.w,
            readout: Readout::measure(v_read, t, p, &state)?,
        });
    }
    Ok((state, out))
}

/// Closed loop 0 -> v_min -> v_max -> 0 with step `dv`.
pub fn loop_grid(v_min: f64, v_max: f64, dv: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let leg = |from: f64, to: f64, grid: &mut Vec<f64>| {
        let n = ((to - from).abs() / dv).round() as usize;
        for k in 1..=n {
            grid.push(from + (to - from) * k as f64 / n as f64);
        }
    };
    grid.push(0.0);
    leg(0.0, v_min, &mut grid);
    leg(v_min, v_max, &mut grid);
    leg(v_max, 0.0, &mut grid);
    grid
}

/// Write voltages where the loop crosses half-way between its extreme
/// log-resistances, on the SET (negative) and RESET (positive) branches.
pub fn measured_transitions(points: &[DcPoint]) -> Option<(f64, f64)> {
    let logs: Vec<f64> = points.iter().map(|p| p.readout.r_ohms.log10()).collect();
    let (lo, hi) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mid = 0.5 * (lo + hi);
    let mut set = None;
    let mut reset = None;
    for k in 1..points.len() {
        let (a, b) = (logs[k - 1], logs[k]);
        let (va, vb) = (points[k - 1].v_write, points[k].v_write);
        if a > mid && b <= mid && set.is_none() {
            set = Some(va + (vb - va) * (a - mid) / (a - b));
        }
        if a < mid && b >= mid && reset.is_none() {
            reset = Some(va + (vb - va) * (mid - a) / (b - a));
        }
    }
    Some((set?, reset?))
}

/// Exponential relaxation of `w` toward 0.5 at `drift_rate` (1/s).
pub fn retention_evolve(s: &DeviceState, dt: f64, drift_rate: f64) -> Result<DeviceState> {
    finite("dt", dt)?;
    finite("drift_rate", drift_rate)?;
    if dt < 0.0 || drift_rate < 0.0 {
        return Err(ModelError::OutOfRange {
            what: "dt/drift_rate",
            value: dt.min(drift_rate),
            constraint: "must be >= 0",
        });
    }
    if dt == 0.0 || drift_rate == 0.0 || s.broken {
        return Ok(*s);
    }
    let mut next = *s;
    next.w = 0.5 + (s.w - 0.5) * (-drift_rate * dt).exp();
    Ok(next)
}

/// Adds `n_cycles` switching cycles; the device breaks past [`ENDURANCE_LIMIT`].
pub fn endurance_register(s: &DeviceState, n_cycles: u64) -> DeviceState {
    let mut next = *s;
    next.cycles = s.cycles.saturating_add(n_cycles);
    if next.cycles > ENDURANCE_LIMIT {
        next.broken = true;
    }
    next
}

/// Rectangular-pulse estimate |I(v_write)| |v_write| t_width, J.
pub fn write_energy(pulse: &PulseSpec, s: &DeviceState, p: &ConductionParams, t: f64) -> Result<f64> {
    let i = current_total(pulse.v_write, t, p, s)?;
    Ok(i.abs() * pulse.v_write.abs() * pulse.t_width)
}
