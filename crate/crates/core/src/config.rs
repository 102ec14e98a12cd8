//! Run configuration.
//!
//! The format is line oriented: `key = value`, optional `[section]` headers
//! that prefix the keys below them, and `#` comments. Values are integers,
//! floats, `true`/`false`, strings (quoted, or bare identifiers) and
//! single-line numeric lists `[a, b, c]`. Keys may be dotted. See
//! `docs/config.md` for the schema.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::Integrator;
use crate::euler::Closure;
use crate::kernels::{CompactProfile, KernelSpec, KernelVariant, RadialProfile};
use crate::presets;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    List(Vec<f64>),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Bool(_) => "boolean",
            Value::Str(_) => "string",
            Value::List(_) => "list",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Value::List(v) => {
                let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "[{}]", items.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigIssue {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` expects {expected}, found {found}")]
    TypeMismatch { line: usize, key: String, expected: &'static str, found: &'static str },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("line {second}: duplicate key `{key}` (first set on line {first})")]
    Duplicate { key: String, first: usize, second: usize },
    #[error("line {line}: `{key}`: {msg}")]
    Invalid { line: usize, key: String, msg: String },
}

/// Every problem found in one configuration text.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: Value,
    line: usize,
}

fn strip_comment(s: &str) -> &str {
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        match c {
            '\\' if in_str => escaped = !escaped,
            '"' if !escaped => in_str = !in_str,
            '#' if !in_str => return &s[..i],
            _ => escaped = false,
        }
        if c != '\\' {
            escaped = false;
        }
    }
    s
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn is_key(s: &str) -> bool {
    s.split('.').all(is_ident)
}

fn parse_value(s: &str) -> Result<Value, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("missing value".into());
    }
    if let Some(rest) = s.strip_prefix('"') {
        let mut out = String::new();
        let mut chars = rest.chars();
        while let Some(c) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some(e @ ('"' | '\\')) => out.push(e),
                    _ => return Err("unsupported escape in string".into()),
                },
                '"' => {
                    return if chars.as_str().trim().is_empty() {
                        Ok(Value::Str(out))
                    } else {
                        Err("trailing characters after string".into())
                    }
                }
                c => out.push(c),
            }
        }
        return Err("unterminated string".into());
    }
    if let Some(inner) = s.strip_prefix('[') {
        let inner = inner.strip_suffix(']').ok_or("unterminated list")?;
        if inner.trim().is_empty() {
            return Ok(Value::List(Vec::new()));
        }
        return inner
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("list item `{}` is not a number", t.trim())))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::List);
    }
    match s {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    if let Ok(i) = s.parse::<i64>() {
        return Ok(Value::Int(i));
    }
    if let Ok(x) = s.parse::<f64>() {
        return Ok(Value::Float(x));
    }
    if is_key(s) {
        return Ok(Value::Str(s.to_string()));
    }
    Err(format!("cannot parse value `{s}`"))
}

/// Syntax pass: flat dotted keys with their values and line numbers.
fn parse_entries(text: &str, issues: &mut Vec<ConfigIssue>) -> BTreeMap<String, Entry> {
    let mut out: BTreeMap<String, Entry> = BTreeMap::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = strip_comment(raw).trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            match rest.strip_suffix(']').map(str::trim) {
                Some(name) if is_key(name) => section = name.to_string(),
                _ => issues.push(ConfigIssue::Syntax { line, msg: format!("malformed section header `{s}`") }),
            }
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            issues.push(ConfigIssue::Syntax { line, msg: format!("expected `key = value`, found `{s}`") });
            continue;
        };
        let k = k.trim();
        if !is_key(k) {
            issues.push(ConfigIssue::Syntax { line, msg: format!("invalid key `{k}`") });
            continue;
        }
        let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
        let value = match parse_value(v) {
            Ok(v) => v,
            Err(msg) => {
                issues.push(ConfigIssue::Syntax { line, msg: format!("`{key}`: {msg}") });
                continue;
            }
        };
        if let Some(prev) = out.get(&key) {
            issues.push(ConfigIssue::Duplicate { key, first: prev.line, second: line });
            continue;
        }
        out.insert(key, Entry { value, line });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Int,
    Float,
    Str,
    List,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Int => "integer",
            Kind::Float => "float",
            Kind::Str => "string",
            Kind::List => "list",
        }
    }
}

const SCHEMA: &[(&str, Kind)] = &[
    ("mode", Kind::Str),
    ("system", Kind::Str),
    ("seed", Kind::Int),
    ("kernel.variant", Kind::Str),
    ("kernel.tau", Kind::Float),
    ("kernel.truncate_radius", Kind::Float),
    ("grid.nx", Kind::Int),
    ("grid.ny", Kind::Int),
    ("grid.lx", Kind::Float),
    ("grid.ly", Kind::Float),
    ("phase.nx", Kind::Int),
    ("phase.nv", Kind::Int),
    ("phase.length", Kind::Float),
    ("phase.vmax", Kind::Float),
    ("phase.sigma", Kind::Float),
    ("phase.snapshot_every", Kind::Int),
    ("closure.type", Kind::Str),
    ("closure.gamma", Kind::Float),
    ("closure.sigma1", Kind::Float),
    ("closure.sigma2", Kind::Float),
    ("closure.cv", Kind::Float),
    ("initial.preset", Kind::Str),
    ("agents.count", Kind::Int),
    ("agents.dim", Kind::Int),
    ("time.t_final", Kind::Float),
    ("time.dt", Kind::Float),
    ("time.cfl", Kind::Float),
    ("time.record_interval", Kind::Float),
    ("time.record_every", Kind::Int),
    ("time.integrator", Kind::Str),
    ("euler.blowup_factor", Kind::Float),
    ("euler.shock_fraction", Kind::Float),
    ("euler.snapshot_every", Kind::Int),
    ("euler.tracers", Kind::Int),
    ("output.dir", Kind::Str),
    ("sweep.axis", Kind::Str),
    ("sweep.values", Kind::List),
];

/// Open key families; every member is a float.
const PARAM_PREFIXES: &[&str] = &["kernel.params.", "initial.params."];

fn kind_of(key: &str) -> Option<Kind> {
    SCHEMA
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, t)| *t)
        .or_else(|| PARAM_PREFIXES.iter().any(|p| key.strip_prefix(p).is_some_and(is_ident)).then_some(Kind::Float))
}

/// `true` when `key` names a numeric leaf of the schema.
pub fn is_numeric_leaf(key: &str) -> bool {
    matches!(kind_of(key), Some(Kind::Int | Kind::Float))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Agents,
    Euler1d,
    Euler2d,
    Kinetic,
    Certify,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Agents,
    Euler1d,
    Euler2d,
    Kinetic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Agents => "agents",
            Mode::Euler1d => "euler1d",
            Mode::Euler2d => "euler2d",
            Mode::Kinetic => "kinetic",
            Mode::Certify => "certify",
            Mode::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Mode::Agents, Mode::Euler1d, Mode::Euler2d, Mode::Kinetic, Mode::Certify, Mode::Sweep]
            .into_iter()
            .find(|m| m.name() == s)
    }

    pub fn system(self) -> Option<System> {
        match self {
            Mode::Agents => Some(System::Agents),
            Mode::Euler1d => Some(System::Euler1d),
            Mode::Euler2d => Some(System::Euler2d),
            Mode::Kinetic => Some(System::Kinetic),
            Mode::Certify | Mode::Sweep => None,
        }
    }
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::Agents => "agents",
            System::Euler1d => "euler1d",
            System::Euler2d => "euler2d",
            System::Kinetic => "kinetic",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Mode::parse(s).and_then(Mode::system)
    }

    pub fn dim(self, agent_dim: usize) -> usize {
        match self {
            System::Agents => agent_dim,
            System::Euler2d => 2,
            System::Euler1d | System::Kinetic => 1,
        }
    }
}

/// Kernel families and their parameters (with defaults).
pub const KERNEL_FAMILIES: &[(&str, &[(&str, Option<f64>)])] = &[
    ("constant", &[("phi0", Some(1.0))]),
    ("bracket", &[("power", Some(1.0))]),
    ("gaussian", &[("length", Some(1.0))]),
    ("pareto", &[("c", Some(1.0)), ("theta", None)]),
    ("compact_poly", &[("radius", None), ("power", Some(2.0))]),
    ("compact_hat", &[("radius", None)]),
    ("topological", &[("near_power", Some(1.0)), ("mass_power", Some(1.0))]),
    ("none", &[]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub variant: String,
    pub tau: f64,
    /// Family parameters with defaults filled in.
    pub params: BTreeMap<String, f64>,
    pub truncate_radius: Option<f64>,
}

impl KernelConfig {
    /// `None` for the `none` family (no alignment).
    pub fn build(&self) -> Result<Option<KernelSpec>, String> {
        let p = |k: &str| self.params[k];
        let variant = match self.variant.as_str() {
            "none" => return Ok(None),
            "constant" => KernelVariant::Constant { phi0: p("phi0") },
            "bracket" => KernelVariant::Metric { profile: RadialProfile::Bracket { power: p("power") } },
            "gaussian" => KernelVariant::Metric { profile: RadialProfile::Gaussian { length: p("length") } },
            "pareto" => KernelVariant::ParetoTail { c: p("c"), theta: p("theta") },
            "compact_poly" => {
                KernelVariant::CompactSupport { radius: p("radius"), profile: CompactProfile::Poly { power: p("power") } }
            }
            "compact_hat" => KernelVariant::CompactSupport { radius: p("radius"), profile: CompactProfile::Hat },
            "topological" => KernelVariant::Topological1D {
                near: RadialProfile::Bracket { power: p("near_power") },
                mass: RadialProfile::Bracket { power: p("mass_power") },
            },
            other => return Err(format!("unknown kernel variant `{other}`")),
        };
        let spec = KernelSpec::new(variant, self.tau).map_err(|e| e.to_string())?;
        match self.truncate_radius {
            Some(r) => spec.truncate(r).map(Some).map_err(|e| e.to_string()),
            None => Ok(Some(spec)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseConfig {
    pub nx: usize,
    pub nv: usize,
    pub length: f64,
    pub vmax: f64,
    pub sigma: f64,
    /// Write `f` every this many records; `0` writes the final state only.
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureConfig {
    pub kind: ClosureKind,
    /// Defaults to `1 + 2/n`.
    pub gamma: Option<f64>,
    pub sigma1: f64,
    pub sigma2: f64,
    pub cv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosureKind {
    MonoKinetic,
    Isentropic,
    Nsa,
}

impl ClosureKind {
    fn name(self) -> &'static str {
        match self {
            ClosureKind::MonoKinetic => "mono_kinetic",
            ClosureKind::Isentropic => "isentropic",
            ClosureKind::Nsa => "nsa",
        }
    }
}

impl ClosureConfig {
    pub fn build(&self, dim: usize) -> Closure {
        let gamma = self.gamma.unwrap_or_else(|| Closure::default_gamma(dim));
        match self.kind {
            ClosureKind::MonoKinetic => Closure::MonoKinetic,
            ClosureKind::Isentropic => Closure::Isentropic { gamma },
            ClosureKind::Nsa => Closure::Nsa { gamma, sigma1: self.sigma1, sigma2: self.sigma2, cv: self.cv },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub preset: String,
    /// Preset parameters with defaults filled in.
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub t_final: f64,
    /// Required step for agents (default `1e-3`); `None` lets grid solvers
    /// step at their admissible limit.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub record_interval: f64,
    pub record_every: usize,
    pub integrator: Integrator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerConfig {
    pub blowup_factor: f64,
    pub shock_fraction: f64,
    /// Write field snapshots every this many records; `0` writes the final
    /// state only.
    pub snapshot_every: usize,
    /// Number of tracers for the mono-kinetic transport invariant (1D).
    pub tracers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub system: System,
    pub seed: u64,
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub phase: PhaseConfig,
    pub closure: ClosureConfig,
    pub initial: InitialConfig,
    pub agent_count: usize,
    pub agent_dim: usize,
    pub time: TimeConfig,
    pub euler: EulerConfig,
    pub output_dir: String,
    pub sweep: Option<SweepConfig>,
}

pub const DEFAULT_AGENT_DT: f64 = 1e-3;
pub const DEFAULT_CFL: f64 = 0.4;

/// Typed access to the raw entries, collecting every problem.
struct Reader {
    entries: BTreeMap<String, Entry>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn get(&mut self, key: &str) -> Option<Value> {
        let kind = kind_of(key).expect("schema key");
        let e = self.entries.get(key)?;
        let ok = match (&e.value, kind) {
            (Value::Int(i), Kind::Float) => return Some(Value::Float(*i as f64)),
            (Value::Int(_), Kind::Int)
            | (Value::Float(_), Kind::Float)
            | (Value::Str(_), Kind::Str)
            | (Value::List(_), Kind::List) => true,
            _ => false,
        };
        if ok {
            Some(e.value.clone())
        } else {
            let issue = ConfigIssue::TypeMismatch {
                line: e.line,
                key: key.to_string(),
                expected: kind.name(),
                found: e.value.type_name(),
            };
            self.issues.push(issue);
            None
        }
    }

    fn invalid(&mut self, key: &str, msg: impl Into<String>) {
        let line = self.line(key);
        self.issues.push(ConfigIssue::Invalid { line, key: key.to_string(), msg: msg.into() });
    }

    fn float(&mut self, key: &str, default: f64) -> f64 {
        match self.get(key) {
            Some(Value::Float(x)) => x,
            _ => default,
        }
    }

    fn opt_float(&mut self, key: &str) -> Option<f64> {
        match self.get(key) {
            Some(Value::Float(x)) => Some(x),
            _ => None,
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> usize {
        match self.get(key) {
            Some(Value::Int(i)) if i >= min as i64 => i as usize,
            Some(Value::Int(i)) => {
                self.invalid(key, format!("must be at least {min}, got {i}"));
                default
            }
            _ => default,
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.get(key) {
            Some(Value::Str(s)) => Some(s),
            _ => None,
        }
    }

    fn required_string(&mut self, key: &str) -> Option<String> {
        if !self.entries.contains_key(key) {
            self.issues.push(ConfigIssue::Missing { key: key.to_string() });
            return None;
        }
        self.string(key)
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let x = self.float(key, default);
        if !(x > 0.0 && x.is_finite()) {
            self.invalid(key, format!("must be positive, got {x}"));
        }
        x
    }

    fn non_negative(&mut self, key: &str, default: f64) -> f64 {
        let x = self.float(key, default);
        if !(x >= 0.0 && x.is_finite()) {
            self.invalid(key, format!("must be non-negative, got {x}"));
        }
        x
    }

    /// Family parameters under `prefix`: unknown names are rejected, missing
    /// ones take their defaults or are reported.
    fn params(&mut self, prefix: &str, known: &[(&str, Option<f64>)]) -> BTreeMap<String, f64> {
        let keys: Vec<String> = self.entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        let mut out = BTreeMap::new();
        for key in keys {
            let name = &key[prefix.len()..];
            if !known.iter().any(|(k, _)| *k == name) {
                let line = self.line(&key);
                self.issues.push(ConfigIssue::UnknownKey { line, key: key.clone() });
                continue;
            }
            if let Some(Value::Float(x)) = self.get(&key) {
                out.insert(name.to_string(), x);
            }
        }
        for (name, default) in known {
            if out.contains_key(*name) || self.entries.contains_key(&format!("{prefix}{name}")) {
                continue;
            }
            match default {
                Some(d) => {
                    out.insert(name.to_string(), *d);
                }
                None => self.issues.push(ConfigIssue::Missing { key: format!("{prefix}{name}") }),
            }
        }
        out
    }
}

/// Parses and validates a configuration, reporting all problems at once.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut issues = Vec::new();
    let entries = parse_entries(text, &mut issues);
    for (key, e) in &entries {
        if kind_of(key).is_none() && !PARAM_PREFIXES.iter().any(|p| key.starts_with(p)) {
            issues.push(ConfigIssue::UnknownKey { line: e.line, key: key.clone() });
        }
    }
    let mut r = Reader { entries, issues };

    let mode_s = r.required_string("mode");
    let mode = mode_s.as_deref().and_then(|s| {
        let m = Mode::parse(s);
        if m.is_none() {
            r.invalid("mode", format!("unknown mode `{s}`"));
        }
        m
    });
    let system = match (mode.and_then(Mode::system), r.string("system")) {
        (Some(sys), None) => Some(sys),
        (Some(sys), Some(s)) => {
            if System::parse(&s) != Some(sys) {
                r.invalid("system", format!("conflicts with mode `{}`", sys.name()));
            }
            Some(sys)
        }
        (None, Some(s)) => {
            let sys = System::parse(&s);
            if sys.is_none() {
                r.invalid("system", format!("unknown system `{s}`"));
            }
            sys
        }
        (None, None) => {
            if mode.is_some() {
                r.issues.push(ConfigIssue::Missing { key: "system".into() });
            }
            None
        }
    };

    let seed = match r.get("seed") {
        Some(Value::Int(i)) if i >= 0 => i as u64,
        Some(Value::Int(i)) => {
            r.invalid("seed", format!("must be non-negative, got {i}"));
            0
        }
        _ => 0,
    };

    // kernel
    let variant = r.required_string("kernel.variant").unwrap_or_default();
    let family = KERNEL_FAMILIES.iter().find(|(n, _)| *n == variant);
    if family.is_none() && r.entries.contains_key("kernel.variant") {
        let names: Vec<&str> = KERNEL_FAMILIES.iter().map(|(n, _)| *n).collect();
        r.invalid("kernel.variant", format!("unknown variant `{variant}`; expected one of {}", names.join(", ")));
    }
    let tau = r.float("kernel.tau", 1.0);
    let params = family.map(|(_, known)| r.params("kernel.params.", known)).unwrap_or_default();
    let truncate_radius = r.opt_float("kernel.truncate_radius");
    let kernel = KernelConfig { variant: variant.clone(), tau, params, truncate_radius };
    if family.is_some() && !r.issues.iter().any(|i| matches!(i, ConfigIssue::Missing { key } if key.starts_with("kernel."))) {
        if let Err(msg) = kernel.build() {
            let key = kernel_error_key(&variant, &msg);
            r.invalid(key, msg);
        }
        if variant == "none" && system.is_some_and(|s| s != System::Kinetic) {
            r.invalid("kernel.variant", "`none` is only available for the kinetic system");
        }
    }

    let grid = GridConfig {
        nx: r.count("grid.nx", 256, 3),
        ny: r.count("grid.ny", 1, 1),
        lx: r.positive("grid.lx", 1.0),
        ly: r.positive("grid.ly", 1.0),
    };
    if system == Some(System::Euler2d) && grid.ny < 3 {
        if r.entries.contains_key("grid.ny") {
            r.invalid("grid.ny", "euler2d needs at least 3 cells");
        } else {
            r.issues.push(ConfigIssue::Missing { key: "grid.ny".into() });
        }
    }
    let phase = PhaseConfig {
        nx: r.count("phase.nx", 64, 3),
        nv: r.count("phase.nv", 128, 3),
        length: r.positive("phase.length", 1.0),
        vmax: r.positive("phase.vmax", 6.0),
        sigma: r.non_negative("phase.sigma", 0.0),
        snapshot_every: r.count("phase.snapshot_every", 0, 0),
    };

    let closure_kind = match r.string("closure.type").as_deref() {
        None | Some("mono_kinetic") => ClosureKind::MonoKinetic,
        Some("isentropic") => ClosureKind::Isentropic,
        Some("nsa") => ClosureKind::Nsa,
        Some(other) => {
            r.invalid("closure.type", format!("unknown closure `{other}`"));
            ClosureKind::MonoKinetic
        }
    };
    let closure = ClosureConfig {
        kind: closure_kind,
        gamma: r.opt_float("closure.gamma"),
        sigma1: r.non_negative("closure.sigma1", 0.0),
        sigma2: r.non_negative("closure.sigma2", 0.0),
        cv: r.positive("closure.cv", 1.0),
    };
    if let Some(g) = closure.gamma {
        if !(g > 1.0) {
            r.invalid("closure.gamma", format!("γ must exceed 1, got {g}"));
        }
    }
    if closure_kind == ClosureKind::Nsa && system == Some(System::Euler2d) {
        r.invalid("closure.type", "the nsa closure is one-dimensional");
    }

    let agent_count = r.count("agents.count", 100, 1);
    let agent_dim = r.count("agents.dim", 1, 1);
    if agent_dim > 2 {
        r.invalid("agents.dim", format!("must be 1 or 2, got {agent_dim}"));
    }

    let preset = r.required_string("initial.preset").unwrap_or_default();
    let initial_params = match system {
        Some(sys) if !preset.is_empty() => match presets::preset_params(sys, &preset) {
            Some(known) => r.params("initial.params.", known),
            None => {
                let names = presets::preset_names(sys).join(", ");
                r.invalid("initial.preset", format!("unknown {} preset `{preset}`; expected one of {names}", sys.name()));
                BTreeMap::new()
            }
        },
        _ => BTreeMap::new(),
    };
    let initial = InitialConfig { preset, params: initial_params };

    let integrator = match r.string("time.integrator").as_deref() {
        None | Some("rk4") => Integrator::Rk4,
        Some("euler") | Some("forward_euler") => Integrator::ForwardEuler,
        Some(other) => {
            r.invalid("time.integrator", format!("unknown integrator `{other}`"));
            Integrator::Rk4
        }
    };
    let mut dt = r.opt_float("time.dt");
    if let Some(x) = dt {
        if !(x > 0.0 && x.is_finite()) {
            r.invalid("time.dt", format!("must be positive, got {x}"));
        }
    } else if system == Some(System::Agents) {
        dt = Some(DEFAULT_AGENT_DT);
    }
    let cfl = r.positive("time.cfl", DEFAULT_CFL);
    if cfl > 1.0 {
        r.invalid("time.cfl", format!("must not exceed 1, got {cfl}"));
    }
    let time = TimeConfig {
        t_final: r.positive("time.t_final", 1.0),
        dt,
        cfl,
        record_interval: r.positive("time.record_interval", 0.1),
        record_every: r.count("time.record_every", 10, 1),
        integrator,
    };

    let blowup_factor = r.float("euler.blowup_factor", 100.0);
    if !(blowup_factor > 1.0) {
        r.invalid("euler.blowup_factor", format!("must exceed 1, got {blowup_factor}"));
    }
    let shock_fraction = r.float("euler.shock_fraction", 0.25);
    if !(shock_fraction > 0.0 && shock_fraction <= 1.0) {
        r.invalid("euler.shock_fraction", format!("must lie in (0, 1], got {shock_fraction}"));
    }
    let euler = EulerConfig {
        blowup_factor,
        shock_fraction,
        snapshot_every: r.count("euler.snapshot_every", 0, 0),
        tracers: r.count("euler.tracers", 0, 0),
    };

    let output_dir = r.string("output.dir").unwrap_or_else(|| "out".into());

    let sweep = if r.entries.contains_key("sweep.axis") || r.entries.contains_key("sweep.values") {
        let axis = r.required_string("sweep.axis").unwrap_or_default();
        if !axis.is_empty() && !is_numeric_leaf(&axis) {
            r.invalid("sweep.axis", format!("`{axis}` is not a numeric configuration key"));
        }
        let values = match r.get("sweep.values") {
            Some(Value::List(v)) => v,
            None if !r.entries.contains_key("sweep.values") => {
                r.issues.push(ConfigIssue::Missing { key: "sweep.values".into() });
                Vec::new()
            }
            _ => Vec::new(),
        };
        if kind_of(&axis) == Some(Kind::Int) && values.iter().any(|v| v.fract() != 0.0) {
            r.invalid("sweep.values", format!("`{axis}` takes integer values"));
        }
        Some(SweepConfig { axis, values })
    } else {
        if mode == Some(Mode::Sweep) {
            r.issues.push(ConfigIssue::Missing { key: "sweep.axis".into() });
        }
        None
    };

    if !r.issues.is_empty() {
        r.issues.sort_by_key(issue_line);
        return Err(ConfigErrors(r.issues));
    }
    Ok(RunConfig {
        mode: mode.unwrap(),
        system: system.unwrap(),
        seed,
        kernel,
        grid,
        phase,
        closure,
        initial,
        agent_count,
        agent_dim,
        time,
        euler,
        output_dir,
        sweep,
    })
}

/// The configuration key a kernel validation message refers to.
fn kernel_error_key(variant: &str, msg: &str) -> &'static str {
    let msg = msg.strip_prefix("invalid kernel parameter: ").unwrap_or(msg);
    let param = |name| match (variant, name) {
        (_, "tau") => "kernel.tau",
        (_, "truncation") => "kernel.truncate_radius",
        (_, "phi0") => "kernel.params.phi0",
        (_, "C") => "kernel.params.c",
        (_, "θ") => "kernel.params.theta",
        (_, "radius") => "kernel.params.radius",
        (_, "length") => "kernel.params.length",
        ("topological", _) => "kernel.params.near_power",
        _ => "kernel.params.power",
    };
    for (prefix, name) in [
        ("tau ", "tau"),
        ("truncation", "truncation"),
        ("kernel vanishes", "truncation"),
        ("phi0 ", "phi0"),
        ("C ", "C"),
        ("θ ", "θ"),
        ("radius ", "radius"),
        ("gaussian length", "length"),
        ("bracket power", "power"),
        ("compact poly power", "power"),
    ] {
        if msg.starts_with(prefix) {
            return param(name);
        }
    }
    "kernel.variant"
}

fn issue_line(i: &ConfigIssue) -> usize {
    match i {
        ConfigIssue::Syntax { line, .. }
        | ConfigIssue::UnknownKey { line, .. }
        | ConfigIssue::TypeMismatch { line, .. }
        | ConfigIssue::Invalid { line, .. } => *line,
        ConfigIssue::Duplicate { second, .. } => *second,
        ConfigIssue::Missing { .. } => usize::MAX,
    }
}

impl RunConfig {
    /// All keys in schema order.
    fn entries(&self) -> Vec<(String, Value)> {
        let mut v: Vec<(String, Value)> = Vec::new();
        let mut put = |k: &str, x: Value| v.push((k.to_string(), x));
        let s = |x: &str| Value::Str(x.to_string());
        let n = |x: usize| Value::Int(x as i64);
        put("mode", s(self.mode.name()));
        put("system", s(self.system.name()));
        put("seed", Value::Int(self.seed as i64));
        put("kernel.variant", s(&self.kernel.variant));
        put("kernel.tau", Value::Float(self.kernel.tau));
        for (k, x) in &self.kernel.params {
            put(&format!("kernel.params.{k}"), Value::Float(*x));
        }
        if let Some(r) = self.kernel.truncate_radius {
            put("kernel.truncate_radius", Value::Float(r));
        }
        put("grid.nx", n(self.grid.nx));
        put("grid.ny", n(self.grid.ny));
        put("grid.lx", Value::Float(self.grid.lx));
        put("grid.ly", Value::Float(self.grid.ly));
        put("phase.nx", n(self.phase.nx));
        put("phase.nv", n(self.phase.nv));
        put("phase.length", Value::Float(self.phase.length));
        put("phase.vmax", Value::Float(self.phase.vmax));
        put("phase.sigma", Value::Float(self.phase.sigma));
        put("phase.snapshot_every", n(self.phase.snapshot_every));
        put("closure.type", s(self.closure.kind.name()));
        if let Some(g) = self.closure.gamma {
            put("closure.gamma", Value::Float(g));
        }
        put("closure.sigma1", Value::Float(self.closure.sigma1));
        put("closure.sigma2", Value::Float(self.closure.sigma2));
        put("closure.cv", Value::Float(self.closure.cv));
        put("initial.preset", s(&self.initial.preset));
        for (k, x) in &self.initial.params {
            put(&format!("initial.params.{k}"), Value::Float(*x));
        }
        put("agents.count", n(self.agent_count));
        put("agents.dim", n(self.agent_dim));
        put("time.t_final", Value::Float(self.time.t_final));
        if let Some(dt) = self.time.dt {
            put("time.dt", Value::Float(dt));
        }
        put("time.cfl", Value::Float(self.time.cfl));
        put("time.record_interval", Value::Float(self.time.record_interval));
        put("time.record_every", n(self.time.record_every));
        put(
            "time.integrator",
            s(match self.time.integrator {
                Integrator::Rk4 => "rk4",
                Integrator::ForwardEuler => "forward_euler",
            }),
        );
        put("euler.blowup_factor", Value::Float(self.euler.blowup_factor));
        put("euler.shock_fraction", Value::Float(self.euler.shock_fraction));
        put("euler.snapshot_every", n(self.euler.snapshot_every));
        put("euler.tracers", n(self.euler.tracers));
        put("output.dir", s(&self.output_dir));
        if let Some(sw) = &self.sweep {
            put("sweep.axis", s(&sw.axis));
            put("sweep.values", Value::List(sw.values.clone()));
        }
        v
    }

    /// Canonical text form; parsing it yields an equal configuration.
    pub fn to_text(&self) -> String {
        render(&self.entries())
    }

    /// Copy with one numeric leaf replaced, revalidated from scratch.
    pub fn with_value(&self, key: &str, value: f64) -> Result<RunConfig, ConfigErrors> {
        let v = match kind_of(key) {
            Some(Kind::Int) if value.fract() == 0.0 => Value::Int(value as i64),
            Some(Kind::Float) => Value::Float(value),
            _ => {
                return Err(ConfigErrors(vec![ConfigIssue::Invalid {
                    line: 0,
                    key: key.to_string(),
                    msg: format!("cannot assign {value} to this key"),
                }]))
            }
        };
        let mut entries = self.entries();
        match entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = v,
            None => entries.push((key.to_string(), v)),
        }
        parse_config(&render(&entries))
    }

    /// The configuration of one member run of a sweep.
    pub fn sweep_member(&self, key: &str, value: f64) -> Result<RunConfig, ConfigErrors> {
        let mut c = self.with_value(key, value)?;
        c.mode = match c.system {
            System::Agents => Mode::Agents,
            System::Euler1d => Mode::Euler1d,
            System::Euler2d => Mode::Euler2d,
            System::Kinetic => Mode::Kinetic,
        };
        c.sweep = None;
        Ok(c)
    }
}

fn render(entries: &[(String, Value)]) -> String {
    let mut out = String::new();
    let mut section = "";
    for (k, v) in entries {
        let (sec, leaf) = k.split_once('.').unwrap_or(("", k.as_str()));
        if sec != section {
            if !out.is_empty() {
                out.push('\n');
            }
            if !sec.is_empty() {
                let _ = writeln!(out, "[{sec}]");
            }
            section = sec;
        }
        let _ = writeln!(out, "{leaf} = {v}");
    }
    out
}
