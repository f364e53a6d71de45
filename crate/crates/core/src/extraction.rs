//! Parameter extraction from temperature sweeps and pulse traces.
//!
//! All logarithms are natural. Poole-Frenkel analysis regresses ln(J/V) on
//! sqrt(V) per temperature; the slopes give the permittivity through their
//! 1/T dependence and the V -> 0 intercepts give the trap depth through an
//! Arrhenius fit. The Ohmic analysis regresses ln(J/T^{3/2}) on ln(V) and
//! takes the activation energy from the Arrhenius fit of the intercepts.

use crate::conduction::consts::{EPS0, K_B, Q};
use crate::conduction::{current_total, current_tunneling, Channels, ConductionParams};
use crate::device_state::DeviceState;
use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
    /// Standard errors; zero when n = 2.
    pub slope_se: f64,
    pub intercept_se: f64,
}

/// Ordinary least squares y = slope * x + intercept.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<RegressionResult> {
    if xs.len() != ys.len() {
        return Err(ModelError::Dimension(format!("{} xs vs {} ys", xs.len(), ys.len())));
    }
    let n = xs.len();
    if n < 2 {
        return Err(ModelError::InsufficientData(format!("{n} points, need at least 2")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(ModelError::Degenerate("all abscissae are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let s2 = if n > 2 { ss_res / (nf - 2.0) } else { 0.0 };
    let slope_se = (s2 / sxx).sqrt();
    let intercept_se = (s2 * (1.0 / nf + mx * mx / sxx)).sqrt();
    Ok(RegressionResult {
        slope,
        intercept,
        r2,
        n,
        slope_se,
        intercept_se,
    })
}

/// One J(V) sweep at a fixed temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub t_kelvin: f64,
    /// (V, J) pairs sorted by V; J in A/m^2.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSet {
    pub sweeps: Vec<Sweep>,
}

impl SweepSet {
    pub fn new(sweeps: Vec<Sweep>) -> Result<Self> {
        for (k, s) in sweeps.iter().enumerate() {
            if s.points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(ModelError::Degenerate(format!("sweep {k} is not sorted by voltage")));
            }
            if sweeps[..k].iter().any(|o| o.t_kelvin == s.t_kelvin) {
                return Err(ModelError::Degenerate(format!("duplicate temperature {} K", s.t_kelvin)));
            }
        }
        Ok(Self { sweeps })
    }

    /// Synthetic sweeps of the conduction model restricted to `channels`.
    pub fn from_model(
        p: &ConductionParams,
        s: &DeviceState,
        channels: Channels,
        temps: &[f64],
        voltages: &[f64],
    ) -> Result<Self> {
        let q = p.with_channels(channels);
        let mut sweeps = Vec::with_capacity(temps.len());
        for &t in temps {
            let points = voltages
                .iter()
                .map(|&v| Ok((v, current_total(v, t, &q, s)? / q.area)))
                .collect::<Result<Vec<_>>>()?;
            sweeps.push(Sweep { t_kelvin: t, points });
        }
        Self::new(sweeps)
    }

    /// Synthetic Simmons sweeps; identical at every temperature.
    pub fn from_tunneling(p: &ConductionParams, temps: &[f64], voltages: &[f64]) -> Result<Self> {
        let points = voltages
            .iter()
            .map(|&v| Ok((v, current_tunneling(v, p)? / p.area)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            temps
                .iter()
                .map(|&t| Sweep {
                    t_kelvin: t,
                    points: points.clone(),
                })
                .collect(),
        )
    }
}

/// Evenly spaced voltages from `lo` to `hi` inclusive.
pub fn voltage_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

const MIN_TEMPERATURES: usize = 3;
const MIN_WINDOW_POINTS: usize = 4;

fn windowed(sweep: &Sweep, window: (f64, f64)) -> Vec<(f64, f64)> {
    let (lo, hi) = window;
    sweep
        .points
        .iter()
        .copied()
        .filter(|&(v, j)| v >= lo - 1e-12 && v <= hi + 1e-12 && v > 0.0 && j > 0.0)
        .collect()
}

fn per_temperature<F>(data: &SweepSet, window: (f64, f64), transform: F) -> Result<Vec<(f64, RegressionResult)>>
where
    F: Fn(f64, f64, f64) -> (f64, f64),
{
    if data.sweeps.len() < MIN_TEMPERATURES {
        return Err(ModelError::InsufficientData(format!(
            "{} temperatures, need at least {MIN_TEMPERATURES}",
            data.sweeps.len()
        )));
    }
    data.sweeps
        .iter()
        .map(|sweep| {
            let pts = windowed(sweep, window);
            if pts.len() < MIN_WINDOW_POINTS {
                return Err(ModelError::InsufficientData(format!(
                    "{} points inside [{}, {}] V at {} K, need {MIN_WINDOW_POINTS}",
                    pts.len(),
                    window.0,
                    window.1,
                    sweep.t_kelvin
                )));
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(v, j)| transform(v, j, sweep.t_kelvin)).unzip();
            Ok((sweep.t_kelvin, fit_linear(&xs, &ys)?))
        })
        .collect()
}

fn arrhenius(per_t: &[(f64, RegressionResult)]) -> Result<RegressionResult> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = per_t.iter().map(|(t, r)| (1.0 / t, r.intercept)).unzip();
    fit_linear(&xs, &ys)
}

pub const PF_WINDOW: (f64, f64) = (0.2, 0.3);
pub const OHMIC_WINDOW: (f64, f64) = (0.02, 0.1);
/// Largest |slope - 1| of ln(J/T^1.5) vs ln(V) accepted as Ohmic.
pub const OHMIC_SLOPE_TOL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct PfExtraction {
    pub eps_r: f64,
    pub phi_pf_ev: f64,
    /// Per-temperature fits of ln(J/V) on sqrt(V).
    pub per_t: Vec<(f64, RegressionResult)>,
    /// Fit of the per-temperature slopes against 1/T.
    pub slope_fit: RegressionResult,
    /// Arrhenius fit of the intercepts.
    pub intercept_fit: RegressionResult,
}

/// Poole-Frenkel permittivity and trap depth from sweeps inside `window`.
/// `d_fe` is the barrier thickness in metres.
pub fn extract_pf(data: &SweepSet, window: (f64, f64), d_fe: f64) -> Result<PfExtraction> {
    let per_t = per_temperature(data, window, |v, j, _| (v.sqrt(), (j / v).ln()))?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = per_t.iter().map(|(t, r)| (1.0 / t, r.slope)).unzip();
    let slope_fit = fit_linear(&xs, &ys)?;
    // m(T) = (q/k) sqrt(q / (pi eps0 eps_r d)) / T
    let coef = slope_fit.slope * K_B / Q;
    if !(coef > 0.0) {
        return Err(ModelError::WrongRegime(format!(
            "Poole-Frenkel slope does not grow with 1/T (d m / d(1/T) = {})",
            slope_fit.slope
        )));
    }
    let eps_r = Q / (std::f64::consts::PI * EPS0 * d_fe * coef * coef);
    let intercept_fit = arrhenius(&per_t)?;
    Ok(PfExtraction {
        eps_r,
        phi_pf_ev: -intercept_fit.slope * K_B / Q,
        per_t,
        slope_fit,
        intercept_fit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OhmicExtraction {
    pub ea_ohm_ev: f64,
    /// Per-temperature fits of ln(J/T^1.5) on ln(V).
    pub per_t: Vec<(f64, RegressionResult)>,
    pub intercept_fit: RegressionResult,
}

/// Ohmic activation energy from sweeps inside `window`.
pub fn extract_ohmic(data: &SweepSet, window: (f64, f64)) -> Result<OhmicExtraction> {
    let per_t = per_temperature(data, window, |v, j, t| (v.ln(), (j / t.powf(1.5)).ln()))?;
    if let Some((t, r)) = per_t.iter().find(|(_, r)| (r.slope - 1.0).abs() > OHMIC_SLOPE_TOL) {
        return Err(ModelError::WrongRegime(format!(
            "log-log slope {} at {t} K is not Ohmic",
            r.slope
        )));
    }
    let intercept_fit = arrhenius(&per_t)?;
    Ok(OhmicExtraction {
        ea_ohm_ev: -intercept_fit.slope * K_B / Q,
        per_t,
        intercept_fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Rejected,
    NotRejected,
    /// Fewer than two temperatures.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelingVerdict {
    pub verdict: Verdict,
    /// (max - min) / mean of J(v0) across temperatures.
    pub t_sensitivity: f64,
}

impl TunnelingVerdict {
    pub fn tunneling_rejected(&self) -> bool {
        self.verdict == Verdict::Rejected
    }
}

/// Relative spread below which data counts as temperature independent.
const SPREAD_FLOOR: f64 = 1e-12;

/// Direct tunneling predicts no temperature dependence, so any relative
/// spread of J(v0) across temperatures above round-off rejects it.
pub fn discriminate_tunneling(data: &SweepSet, v0: f64) -> Result<TunnelingVerdict> {
    let js = data
        .sweeps
        .iter()
        .map(|s| interpolate(&s.points, v0))
        .collect::<Result<Vec<f64>>>()?;
    if js.len() < 2 {
        return Ok(TunnelingVerdict {
            verdict: Verdict::Indeterminate,
            t_sensitivity: 0.0,
        });
    }
    let (lo, hi) = js
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mean = js.iter().sum::<f64>() / js.len() as f64;
    let spread = if mean != 0.0 { (hi - lo) / mean.abs() } else { 0.0 };
    let verdict = if spread > SPREAD_FLOOR {
        Verdict::Rejected
    } else {
        Verdict::NotRejected
    };
    Ok(TunnelingVerdict {
        verdict,
        t_sensitivity: spread,
    })
}

fn interpolate(points: &[(f64, f64)], v: f64) -> Result<f64> {
    let out_of_range = || ModelError::InsufficientData(format!("{v} V is outside the sweep"));
    let k = points.iter().position(|&(x, _)| x >= v).ok_or_else(out_of_range)?;
    if points[k].0 == v {
        return Ok(points[k].1);
    }
    if k == 0 {
        return Err(out_of_range());
    }
    let (x0, y0) = points[k - 1];
    let (x1, y1) = points[k];
    Ok(y0 + (y1 - y0) * (v - x0) / (x1 - x0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateFit {
    pub a: f64,
    pub sigma0: f64,
    /// Root-mean-square residual, in units of the input conductance.
    pub residual: f64,
    /// The best A sits on the upper search bound: the trace is effectively linear.
    pub at_upper_bound: bool,
}

const A_LOWER: f64 = 0.1;
const A_GRID: usize = 200;
const GOLDEN_TOL: f64 = 1e-13;

/// Fits g = sigma0 (1 - exp(-count / A)).
///
/// For each candidate A the optimal sigma0 is linear least squares; A is
/// located by a log-spaced scan over [0.1, 10 max(count)] refined with
/// golden-section search on ln A.
pub fn fit_update_a(trace: &[(f64, f64)]) -> Result<UpdateFit> {
    if trace.len() < 5 {
        return Err(ModelError::InsufficientData(format!("{} points, need at least 5", trace.len())));
    }
    if trace.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(ModelError::Degenerate("counts must be strictly increasing".into()));
    }
    let n_max = trace.last().map(|p| p.0).unwrap_or(0.0);
    if !(n_max > 0.0) {
        return Err(ModelError::Degenerate("counts must reach a positive value".into()));
    }
    let scale = trace.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    if !(scale > 0.0) {
        return Err(ModelError::Degenerate("trace is identically zero".into()));
    }
    let data: Vec<(f64, f64)> = trace.iter().map(|&(n, g)| (n, g / scale)).collect();

    let sse = |ln_a: f64| -> (f64, f64) {
        let a = ln_a.exp();
        let (mut fg, mut ff) = (0.0, 0.0);
        for &(n, g) in &data {
            let f = -(-n / a).exp_m1();
            fg += f * g;
            ff += f * f;
        }
        let s0 = if ff > 0.0 { fg / ff } else { 0.0 };
        let r = data
            .iter()
            .map(|&(n, g)| {
                let e = g - s0 * -(-n / a).exp_m1();
                e * e
            })
            .sum::<f64>();
        (r, s0)
    };

    let (lo, hi) = (A_LOWER.ln(), (10.0 * n_max).ln());
    let grid: Vec<f64> = (0..A_GRID).map(|k| lo + (hi - lo) * k as f64 / (A_GRID - 1) as f64).collect();
    let best = grid
        .iter()
        .enumerate()
        .map(|(k, &x)| (k, sse(x).0))
        .fold((0, f64::INFINITY), |acc, (k, r)| if r < acc.1 { (k, r) } else { acc })
        .0;
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(A_GRID - 1)];

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (sse(c).0, sse(d).0);
    while (b - a).abs() > GOLDEN_TOL * (1.0 + a.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sse(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sse(d).0;
        }
    }
    let mut x = 0.5 * (a + b);
    // endpoints are never evaluated by the interior probes
    for edge in [grid[0], grid[A_GRID - 1]] {
        if sse(edge).0 < sse(x).0 {
            x = edge;
        }
    }
    let (r, s0) = sse(x);
    Ok(UpdateFit {
        a: x.exp(),
        sigma0: s0 * scale,
        residual: (r / data.len() as f64).sqrt() * scale,
        at_upper_bound: (hi - x) < 1e-6,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexCdf {
    pub pulse_index: usize,
    /// Values across cycles, ascending.
    pub sorted: Vec<f64>,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl IndexCdf {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }

    /// Empirical CDF value at each sorted sample, (k + 1) / n.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.sorted.len() as f64;
        (1..=self.sorted.len()).map(|k| k as f64 / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfReport {
    pub per_index: Vec<IndexCdf>,
    /// Levels whose median gap to the previous counted level exceeds the
    /// pooled interquartile range of the two.
    pub separated_levels: usize,
}

/// Linear-interpolation quantile of ascending `sorted`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let k = h.floor() as usize;
    if k + 1 >= n {
        return sorted[n - 1];
    }
    sorted[k] + (h - k as f64) * (sorted[k + 1] - sorted[k])
}

/// Per-pulse-index empirical distributions across repeated cycles.
pub fn cdf_levels(traces: &[Vec<f64>]) -> Result<CdfReport> {
    if traces.len() < 2 {
        return Err(ModelError::InsufficientData(format!("{} cycles, need at least 2", traces.len())));
    }
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    let mut per_index = Vec::with_capacity(len);
    for k in 0..len {
        let mut sorted: Vec<f64> = traces.iter().filter_map(|t| t.get(k).copied()).collect();
        sorted.sort_by(f64::total_cmp);
        per_index.push(IndexCdf {
            pulse_index: k,
            q25: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
            sorted,
        });
    }
    let mut order: Vec<&IndexCdf> = per_index.iter().collect();
    order.sort_by(|a, b| a.median.total_cmp(&b.median));
    let mut levels = 0;
    let mut last: Option<&IndexCdf> = None;
    for c in order {
        match last {
            None => {
                levels = 1;
                last = Some(c);
            }
            Some(prev) => {
                let pooled = 0.5 * (prev.iqr() + c.iqr());
                if c.median - prev.median > pooled {
                    levels += 1;
                    last = Some(c);
                }
            }
        }
    }
    Ok(CdfReport {
        per_index,
        separated_levels: levels,
    })
}
