//! Executes configured runs and sweeps and writes their artifacts:
//! `config.txt`, `series.csv`, `summary.json`, `fields_<t>.csv` (grid
//! systems), `f_<t>.csv` and `h_balance.csv` (kinetic), and `sweep.csv` /
//! `sweep.json` for sweeps.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{integrate_agents, AgentRunConfig, AgentState};
use crate::config::{parse_config, ConfigErrors, RunConfig, System};
use crate::diagnostics::{fmt_f64, read_series, write_series, DiagnosticsRecord};
use crate::euler::{
    integrate_field, nsa_entropy_balance_residual, Closure, FieldObserver, FieldRunConfig, FieldState,
    NonlocalOperator, Tracers,
};
use crate::kernels::KernelSpec;
use crate::kinetic::{h_balance, integrate_kinetic, HSample, KineticRunConfig, PhaseState};
use crate::presets::{build_initial, InitialState, PresetError};
use crate::thresholds::{
    certify, flocking_predictions, monitor, CertifyInput, FlockingComparison, MonitorReport, MonitorTolerances,
    ThresholdReport,
};

/// Relative margin used when comparing observed and predicted decay rates.
pub const FLOCK_MARGIN: f64 = 0.01;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("{0}")]
    Setup(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// Process exit code: 2 for invalid input, 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => 2,
            RunError::Io { .. } => 4,
        }
    }
}

impl From<PresetError> for RunError {
    fn from(e: PresetError) -> Self {
        RunError::Setup(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Smooth,
    BlowUp,
    /// A numeric failure other than a detected blow-up (non-finite state,
    /// vacuum in a pressure cell).
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub eta_violation: Option<f64>,
    pub omega_violation: Option<f64>,
    pub gradient_violation: Option<f64>,
    pub thickness_violation: Option<f64>,
    pub thickness_integral: f64,
    pub eta_ok: bool,
    pub omega_ok: bool,
    pub gradient_ok: bool,
    pub thickness_ok: bool,
}

impl From<&MonitorReport> for MonitorSummary {
    fn from(m: &MonitorReport) -> Self {
        Self {
            eta_violation: m.eta_violation,
            omega_violation: m.omega_violation,
            gradient_violation: m.gradient_violation,
            thickness_violation: m.thickness_violation,
            thickness_integral: m.thickness_integral,
            eta_ok: m.eta_violation.is_none(),
            omega_ok: m.omega_violation.is_none(),
            gradient_ok: m.gradient_violation.is_none(),
            thickness_ok: m.thickness_violation.is_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub system: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub blowup_at: Option<f64>,
    pub abort_reason: Option<String>,
    pub final_time: f64,
    pub steps: usize,
    pub records: usize,
    pub certificate: Option<ThresholdReport>,
    /// Why no certificate was produced (e.g. topological kernels).
    pub certificate_error: Option<String>,
    pub monitor: Option<MonitorSummary>,
    pub flocking: Option<FlockingComparison>,
    /// `max |q(x(t)) − q(x(0))|` over tracers and records.
    pub tracer_deviation: Option<f64>,
    pub pressure_floored: bool,
    pub velocity_clipped: bool,
    /// Last recorded `δu`, or the kinetic energy when `δu` is absent.
    pub observable: Option<f64>,
    pub series_sha256: String,
    /// SHA-256 of the final state's arrays as little-endian f64 bytes.
    pub state_sha256: Option<String>,
}

impl RunSummary {
    /// 0 for a completed run, 3 for a blow-up or numeric abort.
    pub fn exit_code(&self) -> i32 {
        match self.outcome {
            Outcome::Smooth => 0,
            Outcome::BlowUp | Outcome::Aborted => 3,
        }
    }
}

struct Artifacts {
    records: Vec<DiagnosticsRecord>,
    outcome: Outcome,
    blowup_at: Option<f64>,
    abort_reason: Option<String>,
    final_time: f64,
    steps: usize,
    certificate: Option<ThresholdReport>,
    certificate_error: Option<String>,
    monitor: Option<MonitorSummary>,
    flocking: Option<FlockingComparison>,
    tracer_deviation: Option<f64>,
    pressure_floored: bool,
    velocity_clipped: bool,
    state_sha256: Option<String>,
}

fn digest<'a>(arrays: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut h = Sha256::new();
    for a in arrays {
        for z in a {
            h.update(z.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(io_err(path))
}

fn snapshot_name(prefix: &str, t: f64) -> String {
    format!("{prefix}_{t:.6}.csv")
}

fn write_fields(dir: &Path, s: &FieldState) -> Result<(), RunError> {
    let path = dir.join(snapshot_name("fields", s.t));
    let mut w = create(&path)?;
    let g = &s.grid;
    let mut header: Vec<&str> = if g.dim == 1 { vec!["x", "rho", "u"] } else { vec!["x", "y", "rho", "ux", "uy"] };
    if s.p.is_some() {
        header.push("p");
    }
    let mut body = header.join(",") + "\n";
    for c in 0..g.len() {
        let [x, y] = g.center(c);
        let mut row = vec![fmt_f64(x)];
        if g.dim == 2 {
            row.push(fmt_f64(y));
        }
        row.push(fmt_f64(s.rho[c]));
        row.extend(s.u[c * g.dim..(c + 1) * g.dim].iter().map(|z| fmt_f64(*z)));
        if let Some(p) = &s.p {
            row.push(fmt_f64(p[c]));
        }
        body.push_str(&row.join(","));
        body.push('\n');
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io_err(&path))
}

fn write_distribution(dir: &Path, s: &PhaseState) -> Result<(), RunError> {
    let path = dir.join(snapshot_name("f", s.t));
    let g = &s.grid;
    let mut body = String::from("x");
    for k in 0..g.nv {
        body.push(',');
        body.push_str(&fmt_f64(g.v(k)));
    }
    body.push('\n');
    for i in 0..g.nx {
        body.push_str(&fmt_f64(g.x(i)));
        for k in 0..g.nv {
            body.push(',');
            body.push_str(&fmt_f64(s.f[i * g.nv + k]));
        }
        body.push('\n');
    }
    write_text(&path, &body)
}

/// Builds the initial state of a configuration.
pub fn initial_state(cfg: &RunConfig) -> Result<InitialState, RunError> {
    Ok(build_initial(cfg)?)
}

fn alignment_kernel(cfg: &RunConfig) -> Result<KernelSpec, RunError> {
    cfg.kernel
        .build()
        .map_err(RunError::Setup)?
        .ok_or_else(|| RunError::Setup(format!("the {} system needs an alignment kernel", cfg.system.name())))
}

/// Threshold certificate of the configured initial data.
pub fn certify_config(cfg: &RunConfig) -> Result<ThresholdReport, RunError> {
    let kernel = alignment_kernel(cfg)?;
    let report = match initial_state(cfg)? {
        InitialState::Agents(s) => certify(CertifyInput::Agents(&s), &kernel),
        InitialState::Field(s) => certify(CertifyInput::Field(&s), &kernel),
        InitialState::Phase(_) => {
            return Err(RunError::Setup("kinetic states have no threshold certificate".into()));
        }
    };
    report.map_err(|e| RunError::Setup(e.to_string()))
}

/// Runs `cfg`, writing all artifacts into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunSummary, RunError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_text(&out.join("config.txt"), &cfg.to_text())?;
    let art = match initial_state(cfg)? {
        InitialState::Agents(s) => run_agents(cfg, &s)?,
        InitialState::Field(s) => run_field(cfg, &s, out)?,
        InitialState::Phase(s) => run_kinetic(cfg, &s, out)?,
    };
    let series_path = out.join("series.csv");
    let mut buf = Vec::new();
    write_series(&mut buf, &art.records, if art.outcome == Outcome::Smooth { None } else { Some(art.final_time) })
        .expect("writing to memory");
    write_text(&series_path, std::str::from_utf8(&buf).expect("ascii csv"))?;
    let observable = art.records.last().and_then(|r| r.delta_u.or(r.kinetic_energy));
    let summary = RunSummary {
        mode: cfg.mode.name().into(),
        system: cfg.system.name().into(),
        seed: cfg.seed,
        outcome: art.outcome,
        blowup_at: art.blowup_at,
        abort_reason: art.abort_reason,
        final_time: art.final_time,
        steps: art.steps,
        records: art.records.len(),
        certificate: art.certificate,
        certificate_error: art.certificate_error,
        monitor: art.monitor,
        flocking: art.flocking,
        tracer_deviation: art.tracer_deviation,
        pressure_floored: art.pressure_floored,
        velocity_clipped: art.velocity_clipped,
        observable,
        series_sha256: hex::encode(Sha256::digest(&buf)),
        state_sha256: art.state_sha256,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_text(&out.join("summary.json"), &(json + "\n"))?;
    Ok(summary)
}

fn split_certificate(r: Result<ThresholdReport, RunError>) -> (Option<ThresholdReport>, Option<String>) {
    match r {
        Ok(rep) => (Some(rep), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

fn run_agents(cfg: &RunConfig, s0: &AgentState) -> Result<Artifacts, RunError> {
    let kernel = alignment_kernel(cfg)?;
    let acfg = AgentRunConfig {
        kernel: kernel.clone(),
        dt: cfg.time.dt.unwrap_or(crate::config::DEFAULT_AGENT_DT),
        t_final: cfg.time.t_final,
        integrator: cfg.time.integrator,
        record_every: cfg.time.record_every,
    };
    let (certificate, certificate_error) =
        split_certificate(certify(CertifyInput::Agents(s0), &kernel).map_err(|e| RunError::Setup(e.to_string())));
    let run = integrate_agents(s0, &acfg, |_, _| {}).map_err(|e| RunError::Setup(e.to_string()))?;
    let flocking = certificate
        .as_ref()
        .filter(|r| r.predicted_flock_rate.is_some())
        .map(|r| flocking_predictions(r, &run.records, FLOCK_MARGIN));
    let outcome = if run.aborted_at.is_some() { Outcome::Aborted } else { Outcome::Smooth };
    Ok(Artifacts {
        final_time: run.aborted_at.unwrap_or(run.state.t),
        steps: crate::agents::step_count(s0.t, acfg.t_final, acfg.dt),
        abort_reason: run.aborted_at.map(|t| format!("non-finite agent state at t = {t}")),
        records: run.records,
        outcome,
        blowup_at: None,
        certificate,
        certificate_error,
        monitor: None,
        flocking,
        tracer_deviation: None,
        pressure_floored: false,
        velocity_clipped: false,
        state_sha256: Some(digest([run.state.x.as_slice(), run.state.v.as_slice()])),
    })
}

/// Collects records, snapshots, tracer deviations and NSA residuals while a
/// field run is in progress.
struct FieldCollector<'a> {
    dir: &'a Path,
    op: &'a NonlocalOperator,
    closure: Closure,
    snapshot_every: usize,
    records: Vec<DiagnosticsRecord>,
    tracers: Option<Tracers>,
    tracer_deviation: f64,
    io_error: Option<RunError>,
}

impl FieldObserver for FieldCollector<'_> {
    fn on_step(&mut self, prev: &FieldState, next: &FieldState) {
        if let Some(t) = &mut self.tracers {
            t.advance(prev, next);
        }
    }

    fn on_record(&mut self, prev: Option<&FieldState>, state: &FieldState, record: &DiagnosticsRecord) {
        let mut r = record.clone();
        if let (Some(prev), Closure::Nsa { .. }) = (prev, self.closure) {
            if let Ok(res) = nsa_entropy_balance_residual(&[prev.clone(), state.clone()], &self.closure, self.op) {
                r.residual = res.first().map(|(_, v)| *v);
            }
        }
        if let Some(t) = &self.tracers {
            let d = t.deviation(state, self.op);
            self.tracer_deviation = self.tracer_deviation.max(d);
            if !matches!(self.closure, Closure::Nsa { .. }) {
                r.residual = Some(d);
            }
        }
        let k = self.records.len();
        if self.snapshot_every > 0 && k.is_multiple_of(self.snapshot_every) && self.io_error.is_none() {
            if let Err(e) = write_fields(self.dir, state) {
                self.io_error = Some(e);
            }
        }
        self.records.push(r);
    }
}

fn run_field(cfg: &RunConfig, s0: &FieldState, out: &Path) -> Result<Artifacts, RunError> {
    let kernel = alignment_kernel(cfg)?;
    let dim = s0.grid.dim;
    let closure = cfg.closure.build(dim);
    closure.validate(dim).map_err(|e| RunError::Setup(e.to_string()))?;
    let op = NonlocalOperator::new(&s0.grid, &kernel).map_err(|e| RunError::Setup(e.to_string()))?;
    let (certificate, certificate_error) =
        split_certificate(certify(CertifyInput::Field(s0), &kernel).map_err(|e| RunError::Setup(e.to_string())));
    let fcfg = FieldRunConfig {
        closure,
        t_final: cfg.time.t_final,
        dt: cfg.time.dt,
        cfl: cfg.time.cfl,
        record_interval: cfg.time.record_interval,
        blowup_factor: cfg.euler.blowup_factor,
        shock_fraction: cfg.euler.shock_fraction,
    };
    let tracers = if cfg.euler.tracers > 0 && dim == 1 && closure == Closure::MonoKinetic {
        Some(Tracers::seed(s0, &op, cfg.euler.tracers).map_err(|e| RunError::Setup(e.to_string()))?)
    } else {
        None
    };
    let mut col = FieldCollector {
        dir: out,
        op: &op,
        closure,
        snapshot_every: cfg.euler.snapshot_every,
        records: Vec::new(),
        tracer_deviation: 0.0,
        tracers,
        io_error: None,
    };
    let result = integrate_field(s0, &fcfg, &op, &mut col);
    if let Some(e) = col.io_error.take() {
        return Err(e);
    }
    let tracer_deviation = col.tracers.is_some().then_some(col.tracer_deviation);
    let records = std::mem::take(&mut col.records);
    let monitor = certificate.as_ref().map(|rep| MonitorSummary::from(&monitor(rep, &records, MonitorTolerances::default())));
    let mut art = Artifacts {
        final_time: records.last().map_or(s0.t, |r| r.t),
        records,
        outcome: Outcome::Smooth,
        blowup_at: None,
        abort_reason: None,
        steps: 0,
        certificate,
        certificate_error,
        monitor,
        flocking: None,
        tracer_deviation,
        pressure_floored: false,
        velocity_clipped: false,
        state_sha256: None,
    };
    match result {
        Ok(run) => {
            write_fields(out, &run.state)?;
            art.steps = run.steps;
            art.pressure_floored = run.pressure_floored;
            art.final_time = run.state.t;
            let p = run.state.p.as_deref().unwrap_or(&[]);
            art.state_sha256 = Some(digest([run.state.rho.as_slice(), run.state.u.as_slice(), p]));
            if let Some(t) = run.blowup_at {
                art.outcome = Outcome::BlowUp;
                art.blowup_at = Some(t);
                art.final_time = t;
            }
        }
        Err(e) => {
            log::error!("field run aborted: {e}");
            art.outcome = Outcome::Aborted;
            art.abort_reason = Some(e.to_string());
        }
    }
    Ok(art)
}

fn run_kinetic(cfg: &RunConfig, s0: &PhaseState, out: &Path) -> Result<Artifacts, RunError> {
    let kcfg = KineticRunConfig {
        t_final: cfg.time.t_final,
        dt: cfg.time.dt,
        cfl: cfg.time.cfl,
        record_interval: cfg.time.record_interval,
    };
    let every = cfg.phase.snapshot_every;
    let mut io_error = None;
    let mut n_seen = 0usize;
    let mut energies = Vec::new();
    let result = integrate_kinetic(s0, &kcfg, |s, _| {
        let m = s.moments();
        energies.push(m.energy.iter().sum::<f64>() * s.grid.dx());
        if every > 0 && n_seen.is_multiple_of(every) && io_error.is_none() {
            io_error = write_distribution(out, s).err();
        }
        n_seen += 1;
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let run = match result {
        Ok(run) => run,
        Err(e) => {
            return Ok(Artifacts {
                records: Vec::new(),
                outcome: Outcome::Aborted,
                blowup_at: None,
                abort_reason: Some(e.to_string()),
                final_time: s0.t,
                steps: 0,
                certificate: None,
                certificate_error: None,
                monitor: None,
                flocking: None,
                tracer_deviation: None,
                pressure_floored: false,
                velocity_clipped: false,
                state_sha256: None,
            })
        }
    };
    write_distribution(out, &run.state)?;
    let balance = h_balance(&run.samples).unwrap_or_default();
    write_h_balance(&out.join("h_balance.csv"), &run.samples)?;
    let records = run
        .samples
        .iter()
        .zip(&energies)
        .map(|(s, e)| DiagnosticsRecord {
            mean_velocity: Some(vec![s.momentum / s.mass]),
            kinetic_energy: Some(*e),
            mass: Some(s.mass),
            residual: balance.iter().find(|b| b.t == s.t).map(|b| b.residual),
            ..DiagnosticsRecord::at(s.t)
        })
        .collect();
    let finite = run.state.f.iter().all(|z| z.is_finite());
    Ok(Artifacts {
        records,
        outcome: if finite { Outcome::Smooth } else { Outcome::Aborted },
        blowup_at: None,
        abort_reason: (!finite).then(|| "non-finite distribution".to_string()),
        final_time: run.state.t,
        steps: run.steps,
        certificate: None,
        certificate_error: None,
        monitor: None,
        flocking: None,
        tracer_deviation: None,
        pressure_floored: false,
        velocity_clipped: run.clipped,
        state_sha256: Some(digest([run.state.f.as_slice()])),
    })
}

/// Columns `t,h,production,dissipation,mass,momentum,dh_dt,residual`; the
/// last two are empty at the first and last sample.
fn write_h_balance(path: &Path, samples: &[HSample]) -> Result<(), RunError> {
    let rows = h_balance(samples).unwrap_or_default();
    let mut body = String::from("t,h,production,dissipation,mass,momentum,dh_dt,residual\n");
    for s in samples {
        let b = rows.iter().find(|b| b.t == s.t);
        let cols = [
            fmt_f64(s.t),
            fmt_f64(s.h),
            fmt_f64(s.production),
            fmt_f64(s.dissipation),
            fmt_f64(s.mass),
            fmt_f64(s.momentum),
            b.map_or(String::new(), |b| fmt_f64(b.dh_dt)),
            b.map_or(String::new(), |b| fmt_f64(b.residual)),
        ];
        body.push_str(&cols.join(","));
        body.push('\n');
    }
    write_text(path, &body)
}

/// Post-processing of a finished run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorOutput {
    pub certificate: ThresholdReport,
    pub monitor: MonitorReport,
    pub flocking: Option<FlockingComparison>,
    pub blowup_at: Option<f64>,
}

/// Re-certifies the run's configuration and monitors its recorded series.
pub fn monitor_run_dir(dir: &Path) -> Result<MonitorOutput, RunError> {
    let cfg_path = dir.join("config.txt");
    let text = fs::read_to_string(&cfg_path).map_err(io_err(&cfg_path))?;
    let cfg = parse_config(&text)?;
    let certificate = certify_config(&cfg)?;
    let series_path = dir.join("series.csv");
    let file = File::open(&series_path).map_err(io_err(&series_path))?;
    let series = read_series(BufReader::new(file)).map_err(RunError::Setup)?;
    let flocking = (cfg.system == System::Agents && certificate.predicted_flock_rate.is_some())
        .then(|| flocking_predictions(&certificate, &series.records, FLOCK_MARGIN));
    Ok(MonitorOutput {
        monitor: monitor(&certificate, &series.records, MonitorTolerances::default()),
        certificate,
        flocking,
        blowup_at: series.blowup_at,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub subcritical: Option<bool>,
    /// `smooth`, `blow_up`, `aborted` or `failed`.
    pub outcome: String,
    pub blowup_at: Option<f64>,
    pub observable: Option<f64>,
    pub error: Option<String>,
}

/// Observed convergence order from three consecutive runs whose axis values
/// form a geometric sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub values: [f64; 3],
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis: String,
    pub rows: Vec<SweepRow>,
    pub orders: Vec<OrderRow>,
}

fn run_member(base: &RunConfig, axis: &str, index: usize, value: f64, dir: &Path) -> SweepRow {
    let mut row =
        SweepRow { index, value, subcritical: None, outcome: "failed".into(), blowup_at: None, observable: None, error: None };
    let cfg = match base.sweep_member(axis, value) {
        Ok(c) => c,
        Err(e) => {
            row.error = Some(e.to_string().replace('\n', "; "));
            return row;
        }
    };
    match run(&cfg, dir) {
        Ok(s) => {
            row.subcritical = s.certificate.as_ref().and_then(|c| c.subcritical);
            row.outcome = serde_json::to_value(s.outcome).ok().and_then(|v| v.as_str().map(String::from)).unwrap();
            row.blowup_at = s.blowup_at;
            row.observable = s.observable;
            row.error = s.abort_reason;
        }
        Err(e) => row.error = Some(e.to_string().replace('\n', "; ")),
    }
    row
}

/// Richardson orders `p = ln(|q₂ − q₃| / |q₁ − q₂|) / ln r` over every
/// consecutive triple with a common ratio `r` between axis values.
pub fn richardson_orders(rows: &[SweepRow]) -> Vec<OrderRow> {
    rows.windows(3)
        .filter_map(|w| {
            let (v1, v2, v3) = (w[0].value, w[1].value, w[2].value);
            let (q1, q2, q3) = (w[0].observable?, w[1].observable?, w[2].observable?);
            let r = v2 / v1;
            if !(r > 0.0 && r != 1.0 && ((v3 / v2) - r).abs() <= 1e-9 * r) {
                return None;
            }
            let order = ((q2 - q3).abs() / (q1 - q2).abs()).ln() / r.ln();
            order.is_finite().then_some(OrderRow { values: [v1, v2, v3], order })
        })
        .collect()
}

/// Runs one member per value (concurrently), each in `out/run_<index>`, and
/// writes `sweep.csv` and `sweep.json`. Failing members become failed rows.
pub fn run_sweep(base: &RunConfig, axis: &str, values: &[f64], out: &Path) -> Result<SweepSummary, RunError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, v)| run_member(base, axis, i, *v, &out.join(format!("run_{i:03}"))))
        .collect();
    let summary = SweepSummary { axis: axis.to_string(), orders: richardson_orders(&rows), rows };
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let mut csv = String::from("index,value,subcritical,outcome,blowup_at,observable,error\n");
    for r in &summary.rows {
        let cols = [
            r.index.to_string(),
            fmt_f64(r.value),
            r.subcritical.map(|b| b.to_string()).unwrap_or_default(),
            r.outcome.clone(),
            opt(r.blowup_at),
            opt(r.observable),
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        ];
        csv.push_str(&cols.join(","));
        csv.push('\n');
    }
    write_text(&out.join("sweep.csv"), &csv)?;
    let json = serde_json::to_string_pretty(&summary).expect("sweep serializes");
    write_text(&out.join("sweep.json"), &(json + "\n"))?;
    Ok(summary)
}
