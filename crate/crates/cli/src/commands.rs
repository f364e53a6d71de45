//! Experiment runners. Each writes CSV tables plus `run_meta.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fenvm::conduction::{calibrate, on_off, self_selection_ratio, Channels, ConductionParams, Readout};
use fenvm::crossbar::{sneak_margin, write_v_half, Crossbar};
use fenvm::device_state::{
    apply_pulse, dc_write_loop, loop_grid, measured_transitions, retention_evolve, run_scheme, sample_device,
    write_energy, DeviceState, PulseScheme, PulseSpec, SchemeKind, UpdateModel,
};
use fenvm::error::ModelError;
use fenvm::extraction::{
    cdf_levels, discriminate_tunneling, extract_ohmic, extract_pf, fit_update_a, quantile, Sweep, SweepSet,
};
use fenvm::inference::{mvm_error_mc, synthetic_problem, MvmConfig, Programming, DEP_PULSE, POT_PULSE};
use fenvm::rng::{derive_seed, seeded, SimRng};
use sha2::{Digest, Sha256};

use crate::config::Config;

pub const COMMANDS: &[&str] = &[
    "iv",
    "hysteresis",
    "scheme",
    "fitA",
    "cdf",
    "retention",
    "d2d",
    "scaling",
    "arrhenius",
    "xbar",
    "bench",
    "mvm",
];

/// Read voltage of the trace and retention tables, V.
const TRACE_V_READ: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] ModelError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

type Res<T> = std::result::Result<T, CliError>;

/// Shortest round-trip decimal form.
fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|x| num(*x)).collect());
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn param_table(name: &str) -> Table {
    Table::new(name, &["param", "value", "stderr"])
}

fn param_row(t: &mut Table, param: &str, value: f64, stderr: Option<f64>) {
    t.push(vec![param.to_string(), num(value), stderr.map(num).unwrap_or_default()]);
}

fn summary_table() -> Table {
    Table::new("summary.csv", &["param", "value"])
}

fn summary_row(t: &mut Table, param: &str, value: impl ToString) {
    t.push(vec![param.to_string(), value.to_string()]);
}

/// Calibrated device parameters with the configured channel set.
pub fn device_params(cfg: &Config) -> Res<ConductionParams> {
    let p = calibrate(&cfg.calibration_targets(), &cfg.skeleton())?;
    Ok(p.with_channels(cfg.channels()))
}

fn update_model(cfg: &Config) -> Res<UpdateModel> {
    let m = cfg.update_model();
    m.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(m)
}

/// Inclusive millivolt grid, in volts.
fn mv_grid(lo_mv: f64, hi_mv: f64, step_mv: f64, what: &str) -> Res<Vec<f64>> {
    if hi_mv < lo_mv {
        return Err(CliError::Config(format!("{what}: v_max_mv < v_min_mv")));
    }
    let n = ((hi_mv - lo_mv) / step_mv + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(CliError::Config(format!("{what}: more than 10^6 grid points")));
    }
    Ok((0..=n).map(|k| (lo_mv + k as f64 * step_mv) / 1e3).collect())
}

fn scheme_kind(cfg: &Config, section: &str) -> SchemeKind {
    SchemeKind::parse(cfg.text(section, "kind")).expect("schema restricts kind")
}

pub fn config_hash(cfg: &Config) -> String {
    Sha256::digest(cfg.emit().as_bytes())
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn run_meta(command: &str, seed: u64, cfg: &Config, files: &[String]) -> String {
    let meta = serde_json::json!({
        "command": command,
        "seed": seed,
        "config_sha256": config_hash(cfg),
        "version": env!("CARGO_PKG_VERSION"),
        "files": files,
    });
    let mut s = serde_json::to_string_pretty(&meta).expect("json of plain values");
    s.push('\n');
    s
}

/// Computes the tables of `command` without touching the filesystem.
pub fn tables(command: &str, cfg: &Config, seed: u64) -> Res<Vec<Table>> {
    match command {
        "iv" => iv(cfg),
        "hysteresis" => hysteresis(cfg),
        "scheme" => scheme(cfg, seed),
        "fitA" => fit_a(cfg, seed),
        "cdf" => cdf(cfg, seed),
        "retention" => retention(cfg),
        "d2d" => d2d(cfg, seed),
        "scaling" => scaling(cfg),
        "arrhenius" => arrhenius(cfg),
        "xbar" => xbar(cfg, seed),
        "bench" => bench(cfg, seed),
        "mvm" => mvm(cfg, seed),
        other => Err(CliError::Usage(format!(
            "unknown command `{other}`; expected one of {}",
            COMMANDS.join(", ")
        ))),
    }
}

/// Runs `command` and writes its tables and `run_meta.json` into `out`.
pub fn run_command(command: &str, cfg: &Config, out: &Path, seed: u64) -> Res<Vec<PathBuf>> {
    let tables = tables(command, cfg, seed)?;
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    for t in &tables {
        let path = out.join(&t.name);
        fs::write(&path, t.render()).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        names.push(t.name.clone());
        written.push(path);
    }
    let meta = out.join("run_meta.json");
    fs::write(&meta, run_meta(command, seed, cfg, &names))
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", meta.display())))?;
    written.push(meta);
    Ok(written)
}

fn iv(cfg: &Config) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let vs = mv_grid(
        cfg.float("iv", "v_min_mv"),
        cfg.float("iv", "v_max_mv"),
        cfg.float("iv", "v_step_mv"),
        "[iv]",
    )?;
    let mut t = Table::new("iv.csv", &["v_volts", "t_kelvin", "state_w", "i_amps", "j_a_per_m2"]);
    for &temp in cfg.list("iv", "temps_k") {
        for &w in cfg.list("iv", "states_w") {
            let s = DeviceState::with_w(w);
            for &v in &vs {
                let r = Readout::measure(v, temp, &p, &s)?;
                t.push_nums(&[v, temp, w, r.i_amps, r.j_a_per_m2]);
            }
        }
    }
    Ok(vec![t])
}

fn hysteresis(cfg: &Config) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let h = cfg.hysteresis();
    let v_read = cfg.float("hysteresis", "v_read_mv") / 1e3;
    let (lo, hi) = (cfg.float("hysteresis", "v_min_mv"), cfg.float("hysteresis", "v_max_mv"));
    if !(lo < 0.0 && hi > 0.0) {
        return Err(CliError::Config("[hysteresis] needs v_min_mv < 0 < v_max_mv".into()));
    }
    let grid = loop_grid(lo / 1e3, hi / 1e3, cfg.float("hysteresis", "v_step_mv") / 1e3);
    let (_, points) = dc_write_loop(&DeviceState::hrs(), &grid, &h, &p, v_read, cfg.t_kelvin())?;
    let mut t = Table::new("hysteresis.csv", &["v_write_volts", "w", "v_read_volts", "r_ohms"]);
    for pt in &points {
        t.push_nums(&[pt.v_write, pt.w, v_read, pt.readout.r_ohms]);
    }
    let mut s = summary_table();
    summary_row(&mut s, "memory_window_volts", num(h.memory_window()));
    if let Some((set, reset)) = measured_transitions(&points) {
        summary_row(&mut s, "v_set_volts", num(set));
        summary_row(&mut s, "v_reset_volts", num(reset));
        summary_row(&mut s, "measured_window_volts", num(reset - set));
    }
    Ok(vec![t, s])
}

/// One potentiation leg from HRS followed by one depression leg per cycle.
fn cycle_traces(
    kind: SchemeKind,
    cycles: u64,
    s0: DeviceState,
    m: &UpdateModel,
    p: &ConductionParams,
    t: f64,
    rng: &mut SimRng,
) -> Res<Vec<(u64, Vec<fenvm::device_state::TraceRow>)>> {
    let (dep, pot) = PulseScheme::presets(kind);
    let mut s = s0;
    let mut out = Vec::new();
    for c in 0..cycles {
        let (after_pot, mut rows) = run_scheme(&s, &pot, m, p, TRACE_V_READ, t, rng)?;
        let (after_dep, dep_rows) = run_scheme(&after_pot, &dep, m, p, TRACE_V_READ, t, rng)?;
        let offset = rows.len();
        rows.extend(dep_rows.into_iter().map(|mut r| {
            r.pulse_index += offset;
            r
        }));
        s = after_dep;
        out.push((c, rows));
    }
    Ok(out)
}

fn scheme(cfg: &Config, seed: u64) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let m = update_model(cfg)?;
    let kind = scheme_kind(cfg, "scheme");
    let s0 = sample_device(cfg.sigma_d2d(), derive_seed(seed, 0))?;
    let mut rng = seeded(derive_seed(seed, 1));
    let traces = cycle_traces(kind, cfg.int("scheme", "cycles"), s0, &m, &p, cfg.t_kelvin(), &mut rng)?;
    let mut t = Table::new(
        "trace.csv",
        &["cycle", "pulse_index", "v_write_volts", "t_width_s", "w", "r_ohms_0p3v"],
    );
    for (c, rows) in &traces {
        for r in rows {
            t.push(vec![
                c.to_string(),
                r.pulse_index.to_string(),
                num(r.pulse.v_write),
                num(r.pulse.t_width),
                num(r.w),
                num(r.readout.r_ohms),
            ]);
        }
    }
    Ok(vec![t])
}

/// Normalized potentiation and depression traces of one preset pair.
fn update_traces(
    kind: SchemeKind,
    m: &UpdateModel,
    p: &ConductionParams,
    t: f64,
    rng: &mut SimRng,
) -> Res<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let (dep, pot) = PulseScheme::presets(kind);
    let (_, up) = run_scheme(&DeviceState::hrs(), &pot, m, p, TRACE_V_READ, t, rng)?;
    let (_, down) = run_scheme(&DeviceState::lrs(), &dep, m, p, TRACE_V_READ, t, rng)?;
    let up = up.iter().map(|r| ((r.pulse_index + 1) as f64, r.w)).collect();
    let down = down.iter().map(|r| ((r.pulse_index + 1) as f64, 1.0 - r.w)).collect();
    Ok((up, down))
}

fn median_and_se(xs: &[f64]) -> (f64, f64) {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let sd = if s.len() > 1 {
        (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (quantile(&s, 0.5), sd / n.sqrt())
}

/// Median fitted A over `seeds` noisy runs, plus the noiseless fit.
fn fitted_a(
    kind: SchemeKind,
    seeds: u64,
    m: &UpdateModel,
    p: &ConductionParams,
    t: f64,
    seed: u64,
) -> Res<[(f64, f64, f64); 2]> {
    let clean = UpdateModel {
        c2c_rel: 0.0,
        ..*m
    };
    let (up, down) = update_traces(kind, &clean, p, t, &mut seeded(0))?;
    let exact = [fit_update_a(&up)?.a, fit_update_a(&down)?.a];
    let mut fits = [Vec::new(), Vec::new()];
    for s in 0..seeds {
        let mut rng = seeded(derive_seed(seed, s));
        let (up, down) = update_traces(kind, m, p, t, &mut rng)?;
        fits[0].push(fit_update_a(&up)?.a);
        fits[1].push(fit_update_a(&down)?.a);
    }
    let (a0, e0) = median_and_se(&fits[0]);
    let (a1, e1) = median_and_se(&fits[1]);
    Ok([(a0, e0, exact[0]), (a1, e1, exact[1])])
}

fn fit_a(cfg: &Config, seed: u64) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let m = update_model(cfg)?;
    let mut t = param_table("fit.csv");
    for kind in SchemeKind::ALL {
        let fits = fitted_a(kind, cfg.int("fitA", "seeds"), &m, &p, cfg.t_kelvin(), seed)?;
        for (pol, (median, se, exact)) in ["pot", "dep"].iter().zip(fits) {
            param_row(&mut t, &format!("a_{pol}_{}", kind.name()), median, Some(se));
            param_row(&mut t, &format!("a_{pol}_{}_noiseless", kind.name()), exact, None);
        }
    }
    Ok(vec![t])
}

/// Conductance after each depression pulse, one trace per cycle; the device
/// is returned to LRS between cycles.
pub fn depression_cycles(
    kind: SchemeKind,
    cycles: u64,
    m: &UpdateModel,
    p: &ConductionParams,
    t: f64,
    seed: u64,
) -> Res<Vec<Vec<f64>>> {
    let (dep, pot) = PulseScheme::presets(kind);
    let mut rng = seeded(seed);
    let mut s = DeviceState::lrs();
    let mut traces = Vec::new();
    for _ in 0..cycles {
        let (after, rows) = run_scheme(&s, &dep, m, p, TRACE_V_READ, t, &mut rng)?;
        traces.push(rows.iter().map(|r| r.readout.conductance()).collect());
        let (reset, _) = run_scheme(&after, &pot, m, p, TRACE_V_READ, t, &mut rng)?;
        s = DeviceState { w: 1.0, ..reset };
    }
    Ok(traces)
}

fn cdf(cfg: &Config, seed: u64) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let m = update_model(cfg)?;
    let kind = scheme_kind(cfg, "cdf");
    let traces = depression_cycles(kind, cfg.int("cdf", "cycles"), &m, &p, cfg.t_kelvin(), seed)?;
    let report = cdf_levels(&traces)?;
    let mut t = Table::new("cdf.csv", &["pulse_index", "g_siemens_0p3v", "probability"]);
    for level in &report.per_index {
        for (g, pr) in level.sorted.iter().zip(level.probabilities()) {
            t.push(vec![level.pulse_index.to_string(), num(*g), num(pr)]);
        }
    }
    let mut s = summary_table();
    summary_row(&mut s, "scheme", kind.name());
    summary_row(&mut s, "cycles", traces.len());
    summary_row(&mut s, "separated_levels", report.separated_levels);
    Ok(vec![t, s])
}

fn retention(cfg: &Config) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let duration = cfg.float("retention", "duration_s");
    let n = cfg.int("retention", "points");
    let rate = cfg.drift_rate();
    let mut t = Table::new("retention.csv", &["t_seconds", "initial_w", "w", "r_ohms_0p3v"]);
    for s0 in [DeviceState::lrs(), DeviceState::hrs()] {
        for k in 0..n {
            let dt = duration * k as f64 / (n - 1) as f64;
            let s = retention_evolve(&s0, dt, rate)?;
            let r = Readout::measure(TRACE_V_READ, cfg.t_kelvin(), &p, &s)?;
            t.push_nums(&[dt, s0.w, s.w, r.r_ohms]);
        }
    }
    Ok(vec![t])
}

fn d2d(cfg: &Config, seed: u64) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let n = cfg.int("d2d", "devices");
    let mut t = Table::new("d2d.csv", &["device", "d2d_log10", "r_hrs_ohms_0p3v", "r_lrs_ohms_0p3v"]);
    let mut logs = Vec::with_capacity(n as usize);
    for k in 0..n {
        let s = sample_device(cfg.sigma_d2d(), derive_seed(seed, k))?;
        let hrs = Readout::measure(TRACE_V_READ, cfg.t_kelvin(), &p, &s)?;
        let lrs = Readout::measure(TRACE_V_READ, cfg.t_kelvin(), &p, &DeviceState { w: 1.0, ..s })?;
        logs.push(hrs.r_ohms.log10());
        t.push(vec![k.to_string(), num(s.d2d_log10), num(hrs.r_ohms), num(lrs.r_ohms)]);
    }
    let mean = logs.iter().sum::<f64>() / n as f64;
    let sd = (logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut s = summary_table();
    summary_row(&mut s, "devices", n);
    summary_row(&mut s, "mean_log10_r_hrs", num(mean));
    summary_row(&mut s, "std_log10_r_hrs", num(sd));
    Ok(vec![t, s])
}

fn scaling(cfg: &Config) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let vs = mv_grid(0.0, cfg.float("scaling", "v_max_mv"), cfg.float("scaling", "v_step_mv"), "[scaling]")?;
    let mut t = Table::new("scaling.csv", &["area_m2", "v_volts", "i_amps", "j_a_per_m2"]);
    for &a in cfg.list("scaling", "areas_um2") {
        let q = ConductionParams { area: a / 1e12, ..p };
        for &v in &vs {
            let r = Readout::measure(v, cfg.t_kelvin(), &q, &DeviceState::lrs())?;
            t.push_nums(&[q.area, v, r.i_amps, r.j_a_per_m2]);
        }
    }
    Ok(vec![t])
}

/// Reads sweeps in the `iv.csv` layout; rows of the highest state are used.
pub fn read_sweeps(path: &Path) -> Res<SweepSet> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let bad = |line: usize, msg: &str| CliError::Config(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h.trim()).unwrap_or("");
    if header != "v_volts,t_kelvin,state_w,i_amps,j_a_per_m2" {
        return Err(bad(1, "header must be v_volts,t_kelvin,state_w,i_amps,j_a_per_m2"));
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(n + 1, "non-numeric field"))?;
        if f.len() != 5 {
            return Err(bad(n + 1, "expected 5 fields"));
        }
        rows.push((f[0], f[1], f[2], f[4]));
    }
    let top = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let mut sweeps: Vec<Sweep> = Vec::new();
    for &(v, t, w, j) in &rows {
        if w != top || v <= 0.0 {
            continue;
        }
        match sweeps.iter_mut().find(|s| s.t_kelvin == t) {
            Some(s) => s.points.push((v, j)),
            None => sweeps.push(Sweep {
                t_kelvin: t,
                points: vec![(v, j)],
            }),
        }
    }
    for s in &mut sweeps {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    sweeps.sort_by(|a, b| a.t_kelvin.total_cmp(&b.t_kelvin));
    Ok(SweepSet::new(sweeps)?)
}

fn arrhenius(cfg: &Config) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let sec = "arrhenius";
    let pf = (cfg.float(sec, "pf_min_mv") / 1e3, cfg.float(sec, "pf_max_mv") / 1e3);
    let ohm = (cfg.float(sec, "ohmic_min_mv") / 1e3, cfg.float(sec, "ohmic_max_mv") / 1e3);
    let v0 = cfg.float(sec, "tunneling_mv") / 1e3;
    let path = cfg.text(sec, "sweeps_csv");
    let data = if path.is_empty() {
        let step = cfg.float(sec, "v_step_mv");
        let top = cfg.float(sec, "pf_max_mv").max(cfg.float(sec, "ohmic_max_mv")).max(v0 * 1e3);
        let vs = mv_grid(step, top, step, "[arrhenius]")?;
        SweepSet::from_model(&p, &DeviceState::lrs(), p.channels, cfg.list(sec, "temps_k"), &vs)?
    } else {
        read_sweeps(Path::new(path))?
    };
    let mut sweeps = Table::new("arrhenius.csv", &["t_kelvin", "v_volts", "j_a_per_m2"]);
    for s in &data.sweeps {
        for &(v, j) in &s.points {
            sweeps.push_nums(&[s.t_kelvin, v, j]);
        }
    }
    let kq = fenvm::conduction::consts::K_B / fenvm::conduction::consts::Q;
    let mut fit = param_table("fit.csv");
    let o = extract_ohmic(&data, ohm)?;
    param_row(&mut fit, "ea_ohm_ev", o.ea_ohm_ev, Some(o.intercept_fit.slope_se * kq));
    let f = extract_pf(&data, pf, p.d_fe)?;
    param_row(&mut fit, "phi_pf_ev", f.phi_pf_ev, Some(f.intercept_fit.slope_se * kq));
    let eps_se = 2.0 * f.eps_r * f.slope_fit.slope_se / f.slope_fit.slope.abs();
    param_row(&mut fit, "eps_r", f.eps_r, Some(eps_se));
    let tv = discriminate_tunneling(&data, v0)?;
    param_row(&mut fit, "j_t_sensitivity", tv.t_sensitivity, None);
    param_row(&mut fit, "tunneling_rejected", if tv.tunneling_rejected() { 1.0 } else { 0.0 }, None);
    Ok(vec![sweeps, fit])
}

fn channel_name(c: Channels) -> &'static str {
    match c {
        Channels::Composite => "composite",
        Channels::OhmicOnly => "ohmic",
        Channels::PooleFrenkelOnly => "pf",
    }
}

fn xbar(cfg: &Config, seed: u64) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let m = update_model(cfg)?;
    let v_read = cfg.float("xbar", "v_read_mv") / 1e3;
    let width = cfg.float("xbar", "width_us") / 1e6;
    let mut sizes = Vec::new();
    for &n in cfg.list("xbar", "sizes") {
        if n.fract() != 0.0 {
            return Err(CliError::Config(format!("[xbar] size {n} is not an integer")));
        }
        sizes.push(n as usize);
    }
    let mut sneak = Table::new(
        "xbar_sneak.csv",
        &["rows", "cols", "channels", "v_read_volts", "i_selected_amps", "i_sneak_worst_amps", "margin"],
    );
    let mut write = Table::new(
        "xbar_write.csv",
        &["rows", "cols", "v_write_volts", "t_width_s", "selected_delta_w", "disturbed_cells", "energy_j"],
    );
    for &n in &sizes {
        for ch in [p.channels, Channels::OhmicOnly] {
            let x = Crossbar::uniform(n, n, p.with_channels(ch), DeviceState::lrs())?;
            let sm = sneak_margin(&x, (0, 0), v_read)?;
            sneak.push(vec![
                n.to_string(),
                n.to_string(),
                channel_name(ch).to_string(),
                num(v_read),
                num(sm.i_selected),
                num(sm.i_sneak_worst),
                num(sm.margin),
            ]);
        }
        for (k, (v, start)) in [
            (cfg.float("xbar", "v_write_pot_mv") / 1e3, DeviceState::hrs()),
            (cfg.float("xbar", "v_write_dep_mv") / 1e3, DeviceState::lrs()),
        ]
        .into_iter()
        .enumerate()
        {
            let x = Crossbar::uniform(n, n, p, start)?;
            let pulse = PulseSpec::new(v, width)?;
            let mut rng = seeded(derive_seed(seed, (n * 2 + k) as u64));
            let rep = write_v_half(&x, (n / 2, n / 2), &pulse, SchemeKind::AmplitudeRamp, &m, &mut rng)?;
            write.push(vec![
                n.to_string(),
                n.to_string(),
                num(v),
                num(width),
                num(rep.selected_delta_w),
                rep.disturbed.len().to_string(),
                num(rep.energy_j),
            ]);
        }
    }
    Ok(vec![sneak, write])
}

/// Relative spread of single-pulse steps taken from mid-range.
fn measured_c2c(m: &UpdateModel, draws: u64, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let s = DeviceState::with_w(0.5);
    let steps: Vec<f64> = (0..draws)
        .map(|_| apply_pulse(&s, &POT_PULSE, SchemeKind::AmplitudeRamp, m, &mut rng).delta_w)
        .collect();
    let n = steps.len() as f64;
    let mean = steps.iter().sum::<f64>() / n;
    let sd = (steps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    sd / mean.abs()
}

pub const BENCH_HEADER: &[&str] = &[
    "on_off_0p1v",
    "r_on_ohms_0p3v",
    "selection_ratio_0p5v",
    "a_pot_amplitude",
    "a_dep_amplitude",
    "c2c_pct",
    "energy_pot_j",
    "energy_dep_j",
    "v_pot_volts",
    "v_dep_volts",
    "t_width_s",
    "area_m2",
];

fn bench(cfg: &Config, seed: u64) -> Res<Vec<Table>> {
    let p = device_params(cfg)?;
    let m = update_model(cfg)?;
    let t = cfg.t_kelvin();
    let [(a_pot, _, _), (a_dep, _, _)] =
        fitted_a(SchemeKind::AmplitudeRamp, cfg.int("bench", "seeds"), &m, &p, t, derive_seed(seed, 0))?;
    let row = [
        on_off(&p, t, 0.1)?,
        Readout::measure(0.3, t, &p, &DeviceState::lrs())?.r_ohms,
        self_selection_ratio(0.5, t, &p, &DeviceState::lrs())?,
        a_pot,
        a_dep,
        100.0 * measured_c2c(&m, 2000, derive_seed(seed, 1)),
        write_energy(&POT_PULSE, &DeviceState::hrs(), &p, t)?,
        write_energy(&DEP_PULSE, &DeviceState::lrs(), &p, t)?,
        POT_PULSE.v_write,
        DEP_PULSE.v_write,
        POT_PULSE.t_width,
        p.area,
    ];
    let mut table = Table::new("bench.csv", BENCH_HEADER);
    table.push_nums(&row);
    Ok(vec![table])
}

fn mvm(cfg: &Config, seed: u64) -> Res<Vec<Table>> {
    let sec = "mvm";
    let (w, xs) = synthetic_problem(
        cfg.int(sec, "outputs") as usize,
        cfg.int(sec, "inputs") as usize,
        cfg.int(sec, "vectors") as usize,
        derive_seed(seed, 0),
    );
    let levels = match cfg.int(sec, "levels") {
        0 => None,
        1 => return Err(CliError::Config("[mvm] levels must be 0 (continuous) or >= 2".into())),
        l => Some(l as u32),
    };
    let programming = match cfg.text(sec, "programming") {
        "ideal" => Programming::Ideal,
        _ => Programming::WriteVerify {
            tol: cfg.float(sec, "tol_pct") / 100.0,
            max_pulses: cfg.int(sec, "max_pulses") as u32,
        },
    };
    let mc = MvmConfig {
        p: device_params(cfg)?,
        update: update_model(cfg)?,
        levels,
        sigma_d2d: cfg.sigma_d2d(),
        programming,
        v_read: cfg.float(sec, "v_read_mv") / 1e3,
        n_trials: cfg.int(sec, "trials") as usize,
        seed: derive_seed(seed, 1),
    };
    let stats = mvm_error_mc(&w, &xs, &mc)?;
    let mut weights = Table::new("weights.csv", &["row", "col", "value"]);
    for r in 0..w.nrows() {
        for c in 0..w.ncols() {
            weights.push(vec![r.to_string(), c.to_string(), num(w[(r, c)])]);
        }
    }
    let mut inputs = Table::new("inputs.csv", &["vector", "index", "value"]);
    for (k, x) in xs.iter().enumerate() {
        for (i, v) in x.iter().enumerate() {
            inputs.push(vec![k.to_string(), i.to_string(), num(*v)]);
        }
    }
    let mut trials = Table::new("mvm.csv", &["trial", "rel_rms_error"]);
    for (k, e) in stats.errors.iter().enumerate() {
        trials.push(vec![k.to_string(), num(*e)]);
    }
    let mut s = summary_table();
    summary_row(&mut s, "median_rel_rms_error", num(stats.median));
    summary_row(&mut s, "ci95_low", num(stats.ci95.0));
    summary_row(&mut s, "ci95_high", num(stats.ci95.1));
    summary_row(&mut s, "mean_rel_rms_error", num(stats.mean));
    Ok(vec![weights, inputs, trials, s])
}
