//! Experiment configuration: a flat file of `[section]` headers and
//! `key = value` lines. `#` and `;` start comments.
//!
//! ```text
//! [model]
//! kind = heston
//! mu = 0.0
//! q_rev = 1.0
//! m_level = 0.04
//! c_vol = 0.3
//! x0 = 1.0
//! y0 = 0.04
//!
//! [jumps]
//! lambda = 0.5
//! p_up = 0.4
//! eta1 = 3.0
//! eta2 = 2.0
//!
//! [sim]
//! n_paths = 100000
//! n_steps = 200
//! horizon = 1.0
//! seed = 7
//! scheme = cir_full_truncation
//!
//! [task]
//! x_min = 0.05
//! x_max = 20
//! n_points = 120
//!
//! [output]
//! dir = out
//! ```

// `!(a > b)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use voljump_core::jumplaw::JumpParams;
use voljump_core::mc::{Scheme, SimConfig};
use voljump_core::models::{
    validate, HestonParams, HullWhiteParams, ModelKind, ModelSpec, SteinSteinParams, VolModel,
};

/// A configuration problem, located by a dotted field path such as
/// `model.c_vol` or `jumps` (for a whole missing block).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// All violations found in one pass, so a user can fix them together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl std::error::Error for ConfigErrors {}

/// The tasks the front end can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Simulate,
    Density,
    Constants,
    Convolve,
    VerifyBounds,
    Compare,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Simulate,
        Task::Density,
        Task::Constants,
        Task::Convolve,
        Task::VerifyBounds,
        Task::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Density => "density",
            Task::Constants => "constants",
            Task::Convolve => "convolve",
            Task::VerifyBounds => "verify-bounds",
            Task::Compare => "compare",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    fn needs_model(self) -> bool {
        self != Task::Convolve
    }

    fn needs_sim(self) -> bool {
        matches!(self, Task::Simulate | Task::Density | Task::VerifyBounds | Task::Compare)
    }

    fn needs_jumps(self) -> bool {
        matches!(self, Task::Convolve | Task::VerifyBounds | Task::Compare)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sections in file order, keys sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = format!("line {}", lineno + 1);
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::new(&at, "unterminated section header"))?
                    .trim()
                    .to_string();
                if sections.contains_key(&name) {
                    return Err(ConfigError::new(&name, format!("section repeated at {at}")));
                }
                sections.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(&at, "expected `key = value`"))?;
            let section = current
                .as_ref()
                .ok_or_else(|| ConfigError::new(&at, "key outside of any section"))?;
            let key = key.trim().to_string();
            let entries = sections.get_mut(section).expect("section exists");
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(ConfigError::new(format!("{section}.{key}"), format!("key repeated at {at}")));
            }
        }
        Ok(Self { sections })
    }

    pub fn has(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    /// Renders the sections back to text in a canonical order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, entries) in &self.sections {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in entries {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// Typed accessors over one section that collect errors instead of
/// stopping at the first.
struct Reader<'a> {
    raw: &'a RawConfig,
    section: &'a str,
    errors: &'a mut Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.section)
    }

    fn opt<V: FromStr>(&mut self, key: &str) -> Option<V> {
        let text = self.raw.get(self.section, key)?;
        match text.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                let path = self.path(key);
                self.errors.push(ConfigError::new(path, format!("cannot parse `{text}`")));
                None
            }
        }
    }

    fn req<V: FromStr>(&mut self, key: &str) -> Option<V> {
        if self.raw.get(self.section, key).is_none() {
            let path = self.path(key);
            self.errors.push(ConfigError::new(path, "required key is missing"));
            return None;
        }
        self.opt(key)
    }

    fn or<V: FromStr>(&mut self, key: &str, default: V) -> V {
        self.opt(key).unwrap_or(default)
    }
}

/// Task-specific keys of the `[task]` section, with defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskParams {
    /// Price grid for density-type tasks.
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    /// `mc`, `semi` or `both` (density); `mc` or `semi` elsewhere.
    pub method: String,
    /// Convolution order and grid for `convolve`.
    pub n: usize,
    pub u_max: f64,
    pub spacing: f64,
    /// Sweep for `constants`: a model parameter name and its range.
    pub sweep_param: Option<String>,
    pub sweep_from: f64,
    pub sweep_to: f64,
    pub sweep_count: usize,
    /// Horizon for `constants` (other tasks use `sim.horizon`).
    pub horizon: f64,
    /// Two-sided estimate to check in `verify-bounds`.
    pub theorem: Option<String>,
    pub epsilon: f64,
    pub window: Option<(f64, f64)>,
    /// Fit windows for `compare`.
    pub large_window: Option<(f64, f64)>,
    pub small_window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub spec: Option<ModelSpec<f64>>,
    pub jump_params: Option<JumpParams<f64>>,
    pub sim: Option<SimConfig<f64>>,
    pub params: TaskParams,
    pub out_dir: Option<PathBuf>,
    /// The configuration as effectively used (seed override applied), in
    /// canonical form; its digest identifies the run.
    pub canonical: String,
}

impl ExperimentConfig {
    /// Parses and validates `text` for `task`. `seed` overrides `sim.seed`.
    pub fn from_text(text: &str, task: Task, seed: Option<u64>) -> Result<Self, ConfigErrors> {
        let mut raw = RawConfig::parse(text).map_err(|e| ConfigErrors(vec![e]))?;
        if let Some(seed) = seed {
            raw.sections
                .entry("sim".into())
                .or_default()
                .insert("seed".into(), seed.to_string());
        }
        let mut errors = Vec::new();
        if let Some(name) = raw.get("task", "name") {
            if name != task.name() {
                errors.push(ConfigError::new(
                    "task.name",
                    format!("config is for task `{name}`, but `{task}` was requested"),
                ));
            }
        }
        for (required, block) in [
            (task.needs_model(), "model"),
            (task.needs_sim(), "sim"),
            (task.needs_jumps(), "jumps"),
        ] {
            if required && !raw.has(block) {
                errors.push(ConfigError::new(
                    block,
                    format!("task `{task}` requires a [{block}] block"),
                ));
            }
        }
        let model = raw.has("model").then(|| read_model(&raw, &mut errors)).flatten();
        let jumps = raw.has("jumps").then(|| read_jumps(&raw, &mut errors)).flatten();
        let spec = model.map(|m| ModelSpec::new(m, jumps));
        if let Some(spec) = &spec {
            for v in validate(spec) {
                errors.push(ConfigError::new(v.field, format!("violates {}", v.rule)));
            }
        } else if let Some(j) = &jumps {
            for v in j.violations() {
                errors.push(ConfigError::new(v.field, format!("violates {}", v.rule)));
            }
        }
        let sim = raw
            .has("sim")
            .then(|| read_sim(&raw, spec.as_ref().map(ModelSpec::kind), &mut errors))
            .flatten();
        if let (Some(spec), Some(sim)) = (&spec, &sim) {
            if let Err(e) = sim.check(spec) {
                errors.push(ConfigError::new("sim", e.to_string()));
            }
        }
        let params = read_task(&raw, task, &mut errors);
        let out_dir = raw.get("output", "dir").map(PathBuf::from);
        if !errors.is_empty() {
            return Err(ConfigErrors(errors));
        }
        Ok(Self {
            task,
            spec,
            jump_params: jumps,
            sim,
            params,
            out_dir,
            canonical: raw.render(),
        })
    }

    pub fn spec(&self) -> &ModelSpec<f64> {
        self.spec.as_ref().expect("validated: task has a model block")
    }

    pub fn sim(&self) -> &SimConfig<f64> {
        self.sim.as_ref().expect("validated: task has a sim block")
    }

    pub fn jumps(&self) -> JumpParams<f64> {
        self.jump_params.expect("validated: task has a jumps block")
    }
}

fn read_model(raw: &RawConfig, errors: &mut Vec<ConfigError>) -> Option<VolModel<f64>> {
    let mut r = Reader {
        raw,
        section: "model",
        errors,
    };
    let kind: Option<String> = r.req("kind");
    let kind = match kind.as_deref() {
        Some("stein-stein") => ModelKind::SteinStein,
        Some("heston") => ModelKind::Heston,
        Some("hull-white") => ModelKind::HullWhite,
        Some(other) => {
            r.errors.push(ConfigError::new(
                "model.kind",
                format!("unknown model `{other}`; expected stein-stein, heston or hull-white"),
            ));
            return None;
        }
        None => return None,
    };
    let mu = r.or("mu", 0.0);
    let x0 = r.or("x0", 1.0);
    let y0 = r.req("y0");
    let model = match kind {
        ModelKind::SteinStein => VolModel::SteinStein(SteinSteinParams {
            mu,
            q_rev: r.req("q_rev")?,
            m_level: r.req("m_level")?,
            sigma: r.req("sigma")?,
            x0,
            y0: y0?,
        }),
        ModelKind::Heston => VolModel::Heston(HestonParams {
            mu,
            q_rev: r.req("q_rev")?,
            m_level: r.req("m_level")?,
            c_vol: r.req("c_vol")?,
            x0,
            y0: y0?,
        }),
        ModelKind::HullWhite => VolModel::HullWhite(HullWhiteParams {
            mu,
            nu: r.req("nu")?,
            xi: r.req("xi")?,
            x0,
            y0: y0?,
        }),
    };
    Some(model)
}

fn read_jumps(raw: &RawConfig, errors: &mut Vec<ConfigError>) -> Option<JumpParams<f64>> {
    let mut r = Reader {
        raw,
        section: "jumps",
        errors,
    };
    let lambda = r.req("lambda");
    let p_up = r.req("p_up");
    let eta1 = r.req("eta1");
    let eta2 = r.req("eta2");
    let p_up: f64 = p_up?;
    let q_down = r.or("q_down", 1.0 - p_up);
    // validation happens with the model so all violations are reported together
    Some(JumpParams {
        lambda: lambda?,
        p_up,
        q_down,
        eta1: eta1?,
        eta2: eta2?,
    })
}

fn read_sim(raw: &RawConfig, kind: Option<ModelKind>, errors: &mut Vec<ConfigError>) -> Option<SimConfig<f64>> {
    let mut r = Reader {
        raw,
        section: "sim",
        errors,
    };
    let n_paths = r.req("n_paths");
    let n_steps = r.or("n_steps", 200usize);
    let horizon = r.or("horizon", 1.0f64);
    let seed = r.req("seed");
    let scheme_name: Option<String> = r.opt("scheme");
    let scheme = match scheme_name {
        Some(name) => match Scheme::parse(&name) {
            Some(s) => Some(s),
            None => {
                r.errors.push(ConfigError::new(
                    "sim.scheme",
                    format!("unknown scheme `{name}`; expected euler, exact_ou, exact_gbm, cir_full_truncation or cir_exact"),
                ));
                None
            }
        },
        None => kind.map(Scheme::default_for),
    };
    if !(horizon > 0.0) {
        r.errors.push(ConfigError::new("sim.horizon", "violates horizon > 0"));
    }
    if n_steps == 0 {
        r.errors.push(ConfigError::new("sim.n_steps", "violates n_steps >= 1"));
    }
    let n_paths: usize = n_paths?;
    if n_paths == 0 {
        r.errors.push(ConfigError::new("sim.n_paths", "violates n_paths >= 1"));
    }
    Some(SimConfig::new(n_paths, n_steps, horizon, seed?, scheme?))
}

fn read_task(raw: &RawConfig, task: Task, errors: &mut Vec<ConfigError>) -> TaskParams {
    let mut r = Reader {
        raw,
        section: "task",
        errors,
    };
    let window = |r: &mut Reader, lo: &str, hi: &str| -> Option<(f64, f64)> {
        let a: Option<f64> = r.opt(lo);
        let b: Option<f64> = r.opt(hi);
        match (a, b) {
            (Some(a), Some(b)) if a > 0.0 && b > a => Some((a, b)),
            (Some(_), Some(_)) => {
                r.errors.push(ConfigError::new(
                    format!("task.{lo}"),
                    format!("violates 0 < {lo} < {hi}"),
                ));
                None
            }
            (None, None) => None,
            _ => {
                r.errors.push(ConfigError::new(
                    format!("task.{lo}"),
                    format!("{lo} and {hi} must be given together"),
                ));
                None
            }
        }
    };
    let default_method = if task == Task::Density { "both" } else { "semi" };
    let params = TaskParams {
        x_min: r.or("x_min", 0.05),
        x_max: r.or("x_max", 20.0),
        n_points: r.or("n_points", 121),
        method: r.or("method", default_method.to_string()),
        n: r.or("n", 2),
        u_max: r.or("u_max", 10.0),
        spacing: r.or("spacing", 0.01),
        sweep_param: r.opt("sweep_param"),
        sweep_from: r.or("sweep_from", 0.0),
        sweep_to: r.or("sweep_to", 0.0),
        sweep_count: r.or("sweep_count", 1),
        horizon: r.or("horizon", 1.0),
        theorem: r.opt("theorem"),
        epsilon: r.or("epsilon", 0.1),
        window: window(&mut r, "window_lo", "window_hi"),
        large_window: window(&mut r, "large_lo", "large_hi"),
        small_window: window(&mut r, "small_lo", "small_hi"),
    };
    let allowed: &[&str] = if task == Task::Density {
        &["mc", "semi", "both"]
    } else {
        &["mc", "semi"]
    };
    if matches!(task, Task::Density | Task::VerifyBounds | Task::Compare) {
        if !allowed.contains(&params.method.as_str()) {
            r.errors.push(ConfigError::new(
                "task.method",
                format!("unknown method `{}`; expected one of {}", params.method, allowed.join(", ")),
            ));
        }
        if !(params.x_min > 0.0 && params.x_max > params.x_min) {
            r.errors.push(ConfigError::new("task.x_min", "violates 0 < x_min < x_max"));
        }
        if params.n_points < 2 {
            r.errors.push(ConfigError::new("task.n_points", "violates n_points >= 2"));
        }
    }
    match task {
        Task::Convolve => {
            if params.n == 0 {
                r.errors.push(ConfigError::new("task.n", "violates n >= 1"));
            }
            if !(params.spacing > 0.0 && params.u_max > params.spacing) {
                r.errors.push(ConfigError::new("task.spacing", "violates 0 < spacing < u_max"));
            }
        }
        Task::Constants => {
            if !(params.horizon > 0.0) {
                r.errors.push(ConfigError::new("task.horizon", "violates horizon > 0"));
            }
            if let Some(name) = &params.sweep_param {
                if params.sweep_count < 1 {
                    r.errors.push(ConfigError::new("task.sweep_count", "violates sweep_count >= 1"));
                }
                if !["c_vol", "sigma", "q_rev", "m_level", "y0", "horizon"].contains(&name.as_str()) {
                    r.errors.push(ConfigError::new(
                        "task.sweep_param",
                        format!("cannot sweep `{name}`; expected c_vol, sigma, q_rev, m_level, y0 or horizon"),
                    ));
                }
            }
        }
        Task::VerifyBounds => match &params.theorem {
            None => r.errors.push(ConfigError::new("task.theorem", "required key is missing")),
            Some(tag) if voljump_core::verify::Theorem::parse(tag).is_none() => {
                r.errors.push(ConfigError::new(
                    "task.theorem",
                    format!("unknown estimate `{tag}`; expected heston-large-x, heston-small-x, stein-stein-large-x or stein-stein-small-x"),
                ))
            }
            Some(_) => {
                if params.window.is_none() {
                    r.errors.push(ConfigError::new("task.window_lo", "required key is missing"));
                }
                if !(params.epsilon >= 0.0) {
                    r.errors.push(ConfigError::new("task.epsilon", "violates epsilon >= 0"));
                }
            }
        },
        Task::Compare => {
            if params.large_window.is_none() && params.small_window.is_none() {
                r.errors.push(ConfigError::new(
                    "task.large_lo",
                    "compare needs large_lo/large_hi, small_lo/small_hi or both",
                ));
            }
        }
        Task::Simulate | Task::Density => {}
    }
    params
}
