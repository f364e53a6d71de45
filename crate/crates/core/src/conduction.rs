//! Static conduction models for the junction.
//!
//! Two thermally activated channels carry the current in parallel:
//!
//! * Ohmic, `J = g * c_ohm * T^{3/2} * (V/d) * exp(-Ea / kT)`
//! * Poole-Frenkel, `J = g * c_pf * (V/d) * exp(q(-phi + sqrt(qV / (pi eps0 eps_r d))) / kT)`
//!
//! Both are scaled by the same state multiplier `g`, so the ON/OFF ratio does
//! not depend on temperature and the current density does not depend on the
//! junction area. A Simmons direct-tunneling expression is kept alongside for
//! mechanism discrimination only; it never enters [`current_total`].
//!
//! Negative bias is handled by odd extension, `I(-v) = -I(v)`.

use crate::device_state::DeviceState;
use crate::error::{finite, ModelError, Result};

pub mod consts {
    /// Elementary charge, C.
    pub const Q: f64 = 1.602_176_634e-19;
    /// Boltzmann constant, J/K.
    pub const K_B: f64 = 1.380_649e-23;
    /// Vacuum permittivity, F/m.
    pub const EPS0: f64 = 8.854_187_812_8e-12;
    /// Planck constant, J s.
    pub const H: f64 = 6.626_070_15e-34;
    /// Electron rest mass, kg.
    pub const M_E: f64 = 9.109_383_701_5e-31;
}

use consts::{EPS0, H, K_B, M_E, Q};

/// Which conduction channels contribute to [`current_total`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Channels {
    #[default]
    Composite,
    OhmicOnly,
    PooleFrenkelOnly,
}

impl Channels {
    fn ohmic(self) -> bool {
        !matches!(self, Channels::PooleFrenkelOnly)
    }

    fn pf(self) -> bool {
        !matches!(self, Channels::OhmicOnly)
    }
}

/// Simmons barrier description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelingParams {
    /// Mean barrier height, eV.
    pub phi_bar_ev: f64,
    /// Effective mass in units of the free-electron mass.
    pub m_eff: f64,
}

impl Default for TunnelingParams {
    fn default() -> Self {
        Self {
            phi_bar_ev: 1.0,
            m_eff: 0.3,
        }
    }
}

/// Geometry and transport parameters of one junction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConductionParams {
    /// Ferroelectric barrier thickness, m.
    pub d_fe: f64,
    /// Junction area, m^2.
    pub area: f64,
    /// Poole-Frenkel trap depth, eV.
    pub phi_pf_ev: f64,
    /// Dynamic relative permittivity.
    pub eps_r: f64,
    /// Activation energy of the Ohmic channel, eV.
    pub ea_ohm_ev: f64,
    /// Poole-Frenkel prefactor, A m^-2 (V/m)^-1.
    pub c_pf: f64,
    /// Ohmic prefactor, A m^-2 (V/m)^-1 K^-3/2.
    pub c_ohm: f64,
    pub tun: TunnelingParams,
    /// LRS/HRS conductance ratio; the state multiplier is `g_lrs^w`.
    pub g_lrs: f64,
    pub channels: Channels,
}

/// Thickness of the HZO barrier, m.
pub const D_FE_DEFAULT: f64 = 4.9e-9;
/// Junction area, m^2 (14 400 um^2).
pub const AREA_DEFAULT: f64 = 14_400e-12;
/// Trap depth and Ohmic activation energy, eV.
pub const BARRIER_DEFAULT_EV: f64 = 0.15;

impl ConductionParams {
    /// Uncalibrated starting point: geometry and barriers fixed, prefactors,
    /// permittivity and state ratio placeholders to be solved by [`calibrate`].
    pub fn skeleton() -> Self {
        Self {
            d_fe: D_FE_DEFAULT,
            area: AREA_DEFAULT,
            phi_pf_ev: BARRIER_DEFAULT_EV,
            eps_r: 5.0,
            ea_ohm_ev: BARRIER_DEFAULT_EV,
            c_pf: 1.0,
            c_ohm: 1.0,
            tun: TunnelingParams::default(),
            g_lrs: 10.0,
            channels: Channels::Composite,
        }
    }

    /// The skeleton calibrated against [`CalibrationTargets::default`].
    pub fn calibrated_default() -> Self {
        calibrate(&CalibrationTargets::default(), &Self::skeleton())
            .expect("default calibration targets are feasible")
    }

    pub fn with_channels(mut self, channels: Channels) -> Self {
        self.channels = channels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_pos("d_fe", self.d_fe)?;
        check_pos("area", self.area)?;
        finite("phi_pf_ev", self.phi_pf_ev)?;
        if !(self.phi_pf_ev > 0.0 && self.phi_pf_ev < 3.0) {
            return Err(ModelError::OutOfRange {
                what: "phi_pf_ev",
                value: self.phi_pf_ev,
                constraint: "0 < phi_pf < 3 eV",
            });
        }
        finite("eps_r", self.eps_r)?;
        if self.eps_r < 1.0 {
            return Err(ModelError::OutOfRange {
                what: "eps_r",
                value: self.eps_r,
                constraint: "eps_r >= 1",
            });
        }
        finite("ea_ohm_ev", self.ea_ohm_ev)?;
        if self.ea_ohm_ev < 0.0 {
            return Err(ModelError::OutOfRange {
                what: "ea_ohm_ev",
                value: self.ea_ohm_ev,
                constraint: "ea_ohm >= 0",
            });
        }
        check_pos("c_pf", self.c_pf)?;
        check_pos("c_ohm", self.c_ohm)?;
        check_pos("tun.phi_bar_ev", self.tun.phi_bar_ev)?;
        check_pos("tun.m_eff", self.tun.m_eff)?;
        finite("g_lrs", self.g_lrs)?;
        if self.g_lrs < 1.0 {
            return Err(ModelError::OutOfRange {
                what: "g_lrs",
                value: self.g_lrs,
                constraint: "g_lrs >= 1",
            });
        }
        Ok(())
    }

    /// Poole-Frenkel slope of ln(J/V) against sqrt(V) at temperature `t`.
    pub fn pf_slope(&self, t: f64) -> f64 {
        Q / (K_B * t) * (Q / (std::f64::consts::PI * EPS0 * self.eps_r * self.d_fe)).sqrt()
    }

    /// Barrier lowering at bias `v`, eV.
    pub fn pf_barrier_lowering_ev(&self, v: f64) -> f64 {
        (Q * v.abs() / (std::f64::consts::PI * EPS0 * self.eps_r * self.d_fe)).sqrt()
    }
}

impl Default for ConductionParams {
    fn default() -> Self {
        Self::calibrated_default()
    }
}

fn check_pos(what: &'static str, value: f64) -> Result<()> {
    finite(what, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            what,
            value,
            constraint: "must be > 0",
        })
    }
}

fn check_inputs(v: f64, t: f64) -> Result<()> {
    finite("v", v)?;
    finite("t", t)?;
    if t <= 0.0 {
        return Err(ModelError::OutOfRange {
            what: "t",
            value: t,
            constraint: "temperature must be > 0 K",
        });
    }
    Ok(())
}

fn ohmic_coefficient(t: f64, p: &ConductionParams, g: f64) -> f64 {
    g * p.c_ohm * t.powf(1.5) * (-Q * p.ea_ohm_ev / (K_B * t)).exp() * p.area / p.d_fe
}

fn pf_exponent(v_abs: f64, t: f64, p: &ConductionParams) -> f64 {
    Q * (-p.phi_pf_ev + p.pf_barrier_lowering_ev(v_abs)) / (K_B * t)
}

/// Ohmic channel current, A.
pub fn current_ohmic(v: f64, t: f64, p: &ConductionParams, g: f64) -> Result<f64> {
    check_inputs(v, t)?;
    finite("g", g)?;
    Ok(ohmic_coefficient(t, p, g) * v)
}

/// Poole-Frenkel channel current, A.
pub fn current_pf(v: f64, t: f64, p: &ConductionParams, g: f64) -> Result<f64> {
    check_inputs(v, t)?;
    finite("g", g)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    let mag = g * p.c_pf * (v.abs() / p.d_fe) * pf_exponent(v.abs(), t, p).exp() * p.area;
    Ok(mag.copysign(v))
}

/// Simmons intermediate-bias current through a barrier of mean height
/// `tun.phi_bar_ev` and width `d_fe`, A. Has no temperature dependence.
pub fn current_tunneling(v: f64, p: &ConductionParams) -> Result<f64> {
    finite("v", v)?;
    if v.abs() >= p.tun.phi_bar_ev {
        return Err(ModelError::OutOfRegime {
            v,
            phi_bar: p.tun.phi_bar_ev,
        });
    }
    let phi = p.tun.phi_bar_ev * Q;
    let half = Q * v / 2.0;
    let mass = p.tun.m_eff * M_E;
    let decay = 4.0 * std::f64::consts::PI * p.d_fe / H * (2.0 * mass).sqrt();
    let pref = Q / (2.0 * std::f64::consts::PI * H * p.d_fe * p.d_fe);
    let lo = phi - half;
    let hi = phi + half;
    let j = pref * (lo * (-decay * lo.sqrt()).exp() - hi * (-decay * hi.sqrt()).exp());
    Ok(j * p.area)
}

/// Current through a device in state `s`: Ohmic plus Poole-Frenkel, both
/// scaled by the state multiplier.
pub fn current_total(v: f64, t: f64, p: &ConductionParams, s: &DeviceState) -> Result<f64> {
    current_with_multiplier(v, t, p, s.multiplier(p))
}

/// [`current_total`] with an explicit state multiplier.
pub fn current_with_multiplier(v: f64, t: f64, p: &ConductionParams, g: f64) -> Result<f64> {
    let ohm = if p.channels.ohmic() {
        current_ohmic(v, t, p, g)?
    } else {
        check_inputs(v, t)?;
        0.0
    };
    let pf = if p.channels.pf() {
        current_pf(v, t, p, g)?
    } else {
        0.0
    };
    Ok(ohm + pf)
}

/// Differential conductance dI/dV of the composite model, S.
pub fn conductance_with_multiplier(v: f64, t: f64, p: &ConductionParams, g: f64) -> Result<f64> {
    check_inputs(v, t)?;
    let mut di = 0.0;
    if p.channels.ohmic() {
        di += ohmic_coefficient(t, p, g);
    }
    if p.channels.pf() {
        let va = v.abs();
        let k = g * p.c_pf * p.area / p.d_fe;
        let e = pf_exponent(va, t, p).exp();
        // d/dV [V exp(a + b sqrt V)] = exp(.) (1 + b sqrt(V) / 2)
        di += k * e * (1.0 + 0.5 * p.pf_slope(t) * va.sqrt());
    }
    Ok(di)
}

/// Current ratio between LRS and HRS at `v_read`.
pub fn on_off(p: &ConductionParams, t: f64, v_read: f64) -> Result<f64> {
    if !(v_read > 0.0) {
        return Err(ModelError::OutOfRange {
            what: "v_read",
            value: v_read,
            constraint: "must be > 0",
        });
    }
    let on = current_total(v_read, t, p, &DeviceState::lrs())?;
    let off = current_total(v_read, t, p, &DeviceState::hrs())?;
    Ok(on / off)
}

/// I(v) / I(v/2) for a device in state `s`.
pub fn self_selection_ratio(v: f64, t: f64, p: &ConductionParams, s: &DeviceState) -> Result<f64> {
    if !(v > 0.0) {
        return Err(ModelError::OutOfRange {
            what: "v",
            value: v,
            constraint: "must be > 0",
        });
    }
    Ok(current_total(v, t, p, s)? / current_total(v / 2.0, t, p, s)?)
}

/// A read at fixed bias and temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Readout {
    pub v_read: f64,
    pub t_kelvin: f64,
    pub i_amps: f64,
    pub r_ohms: f64,
    pub j_a_per_m2: f64,
}

impl Readout {
    pub fn measure(v_read: f64, t: f64, p: &ConductionParams, s: &DeviceState) -> Result<Self> {
        let i = current_total(v_read, t, p, s)?;
        Ok(Self {
            v_read,
            t_kelvin: t,
            i_amps: i,
            r_ohms: v_read / i,
            j_a_per_m2: i / p.area,
        })
    }

    /// Conductance I/V, S.
    pub fn conductance(&self) -> f64 {
        self.i_amps / self.v_read
    }
}

/// Figures of merit the default device is calibrated to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    /// LRS read resistance at 0.3 V, ohm.
    pub r_on_at_0p3v: f64,
    /// LRS/HRS current ratio at 0.1 V.
    pub on_off_at_0p1v: f64,
    /// I(0.5 V) / I(0.25 V).
    pub selection_ratio_at_0p5v: f64,
    /// Bias at which the two channels carry equal current at `t_kelvin`, V.
    /// Fixes the one degree of freedom the three figures of merit leave open.
    pub crossover_v: f64,
    pub t_kelvin: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            r_on_at_0p3v: 100e6,
            on_off_at_0p1v: 10.0,
            selection_ratio_at_0p5v: 45.0,
            crossover_v: 0.22,
            t_kelvin: 300.0,
        }
    }
}

const CAL_TOLERANCE: f64 = 0.01;
const EPS_R_MIN: f64 = 1.0;
const EPS_R_MAX: f64 = 1.0e4;

/// Solves `c_ohm`, `c_pf`, `g_lrs` and `eps_r` so the composite model meets
/// the targets. Deterministic: bisection on ln(eps_r) over a fixed bracket,
/// everything else in closed form.
///
/// A selection target of exactly 2 yields the pure Ohmic limit.
pub fn calibrate(targets: &CalibrationTargets, skeleton: &ConductionParams) -> Result<ConductionParams> {
    let tg = targets;
    for (what, v) in [
        ("r_on_at_0p3v", tg.r_on_at_0p3v),
        ("on_off_at_0p1v", tg.on_off_at_0p1v),
        ("selection_ratio_at_0p5v", tg.selection_ratio_at_0p5v),
        ("crossover_v", tg.crossover_v),
        ("t_kelvin", tg.t_kelvin),
    ] {
        check_pos(what, v)?;
    }
    let mut p = *skeleton;
    p.c_ohm = 1.0;
    p.c_pf = 1.0;
    p.validate()?;
    let t = tg.t_kelvin;

    if tg.on_off_at_0p1v < 1.0 || tg.selection_ratio_at_0p5v < 2.0 {
        return Err(ModelError::Infeasible {
            residuals: vec![
                0.0,
                (1.0f64.max(tg.on_off_at_0p1v) - tg.on_off_at_0p1v) / tg.on_off_at_0p1v,
                (2.0f64.max(tg.selection_ratio_at_0p5v) - tg.selection_ratio_at_0p5v)
                    / tg.selection_ratio_at_0p5v,
            ],
        });
    }
    p.g_lrs = tg.on_off_at_0p1v;

    if tg.selection_ratio_at_0p5v == 2.0 {
        p.channels = Channels::OhmicOnly;
        let unit = ohmic_coefficient(t, &p, 1.0);
        p.c_ohm = 1.0 / (tg.r_on_at_0p3v * p.g_lrs * unit);
        return verify(p, tg);
    }

    if !(tg.crossover_v < 0.5) {
        return Err(ModelError::OutOfRange {
            what: "crossover_v",
            value: tg.crossover_v,
            constraint: "crossover must lie below the 0.5 V selection bias",
        });
    }
    p.channels = Channels::Composite;

    let selection_at = |eps_r: f64| -> Result<f64> {
        let q = fill_prefactors(p, eps_r, tg);
        self_selection_ratio(0.5, t, &q, &DeviceState::lrs())
    };

    let s_lo = selection_at(EPS_R_MIN)?;
    let s_hi = selection_at(EPS_R_MAX)?;
    let target = tg.selection_ratio_at_0p5v;
    if target > s_lo || target < s_hi {
        let best = if target > s_lo { s_lo } else { s_hi };
        return Err(ModelError::Infeasible {
            residuals: vec![0.0, 0.0, (best - target) / target],
        });
    }

    // selection ratio falls as eps_r grows
    let (mut lo, mut hi) = (EPS_R_MIN.ln(), EPS_R_MAX.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if selection_at(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let eps_r = (0.5 * (lo + hi)).exp();
    verify(fill_prefactors(p, eps_r, tg), tg)
}

/// Given eps_r, sets c_ohm and c_pf from the crossover and read-resistance
/// conditions.
fn fill_prefactors(mut p: ConductionParams, eps_r: f64, tg: &CalibrationTargets) -> ConductionParams {
    let t = tg.t_kelvin;
    p.eps_r = eps_r;
    let beta = p.pf_slope(t);
    let geom = p.area / p.d_fe;
    // I_lrs(0.3) = g_lrs * K_o * 0.3 * (1 + exp(beta (sqrt 0.3 - sqrt v_x)))
    let k_ohm = 1.0
        / (tg.r_on_at_0p3v * p.g_lrs * (1.0 + (beta * (0.3f64.sqrt() - tg.crossover_v.sqrt())).exp()));
    let k_pf = k_ohm * (-beta * tg.crossover_v.sqrt()).exp();
    p.c_ohm = k_ohm / (t.powf(1.5) * (-Q * p.ea_ohm_ev / (K_B * t)).exp() * geom);
    p.c_pf = k_pf / ((-Q * p.phi_pf_ev / (K_B * t)).exp() * geom);
    p
}

fn verify(p: ConductionParams, tg: &CalibrationTargets) -> Result<ConductionParams> {
    let r = calibration_residuals(&p, tg)?;
    if r.iter().all(|x| x.abs() <= CAL_TOLERANCE) {
        p.validate()?;
        Ok(p)
    } else {
        Err(ModelError::Infeasible { residuals: r })
    }
}

/// Relative misfit of `p` against each target, in target order.
pub fn calibration_residuals(p: &ConductionParams, tg: &CalibrationTargets) -> Result<Vec<f64>> {
    let t = tg.t_kelvin;
    let r_on = 0.3 / current_total(0.3, t, p, &DeviceState::lrs())?;
    let ratio = on_off(p, t, 0.1)?;
    let sel = self_selection_ratio(0.5, t, p, &DeviceState::lrs())?;
    Ok(vec![
        (r_on - tg.r_on_at_0p3v) / tg.r_on_at_0p3v,
        (ratio - tg.on_off_at_0p1v) / tg.on_off_at_0p1v,
        (sel - tg.selection_ratio_at_0p5v) / tg.selection_ratio_at_0p5v,
    ])
}
