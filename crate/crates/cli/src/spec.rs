//! Run specifications: defaults, presets, config files and flags folded into
//! one [`RunSpec`].
//!
//! Precedence, lowest first: built-in defaults, `preset`, config file (global
//! keys, then the section named after the command), command-line flags.

use std::path::PathBuf;
use std::str::FromStr;

use gcnsbm::bayes_optimal::SupervisedTerm;
use gcnsbm::closed_form::LambdaRegime;
use gcnsbm::simulator::AdjacencyMode;
use gcnsbm::{DataParams, GcnParams, LossKind, Model};

use crate::config::ConfigEntry;
use crate::error::CliError;
use crate::grid::{parse_grid, parse_list};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Se,
    Bo,
    Sim,
    Sweep,
    Rates,
    Cstar,
    Plot,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Se,
        Command::Bo,
        Command::Sim,
        Command::Sweep,
        Command::Rates,
        Command::Cstar,
        Command::Plot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Se => "se",
            Command::Bo => "bo",
            Command::Sim => "sim",
            Command::Sweep => "sweep",
            Command::Rates => "rates",
            Command::Cstar => "cstar",
            Command::Plot => "plot",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// Average degree, either absolute or as a fraction of `n` (`0.5n`, `n/2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degree {
    Fixed(f64),
    Fraction(f64),
}

impl Degree {
    pub fn value(self, n: usize) -> f64 {
        match self {
            Degree::Fixed(d) => d,
            Degree::Fraction(f) => f * n as f64,
        }
    }
}

impl std::fmt::Display for Degree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Degree::Fixed(d) => write!(f, "{d}"),
            Degree::Fraction(x) => write!(f, "{x}n"),
        }
    }
}

impl FromStr for Degree {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a degree (e.g. 30, 0.5n or n/2)"));
        let d = if let Some(rest) = s.strip_prefix("n/") {
            Degree::Fraction(1.0 / num(rest)?)
        } else if let Some(rest) = s.strip_suffix('n') {
            Degree::Fraction(num(rest)?)
        } else {
            Degree::Fixed(num(s)?)
        };
        let v = match d {
            Degree::Fixed(v) | Degree::Fraction(v) => v,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("degree `{s}` must be positive"));
        }
        Ok(d)
    }
}

/// Every model and learner parameter as a list; the run visits the cartesian
/// product in the field order below.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub model: Vec<Model>,
    pub alpha: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    /// Empty means `1 − ρ`.
    pub rho_test: Vec<f64>,
    pub d: Vec<Degree>,
    pub n: Vec<usize>,
    pub loss: Vec<LossKind>,
    pub r: Vec<f64>,
    pub c: Vec<f64>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            model: vec![Model::Csbm],
            alpha: vec![4.0],
            lambda: vec![1.0],
            mu: vec![1.0],
            rho: vec![0.1],
            rho_test: vec![],
            d: vec![Degree::Fixed(30.0)],
            n: vec![10_000],
            loss: vec![LossKind::Quadratic],
            r: vec![1.0],
            c: vec![1.0],
        }
    }
}

/// One grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub panel: String,
    pub model: Model,
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub rho_test: f64,
    pub d: Degree,
    pub n: usize,
    pub loss: LossKind,
    pub r: f64,
    pub c: f64,
}

impl Point {
    pub fn data_params(&self) -> DataParams {
        DataParams::new(self.model, self.alpha, self.lambda, self.mu, self.rho)
            .with_rho_test(self.rho_test)
            .with_degree(self.d.value(self.n))
    }

    pub fn gcn_params(&self) -> GcnParams {
        GcnParams::new(self.loss, self.r, self.c)
    }

    /// Identity of the data-side parameters (everything but loss, r, c).
    pub fn data_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.panel,
            self.model.name(),
            self.alpha,
            self.lambda,
            self.effective_mu(),
            self.rho,
            self.rho_test,
            self.d,
            self.n
        )
    }

    pub fn effective_mu(&self) -> f64 {
        match self.model {
            Model::Csbm => self.mu,
            Model::GlmSbm => 0.0,
        }
    }
}

impl ParamGrid {
    pub fn points(&self, panel: &str) -> Vec<Point> {
        let mut out = Vec::new();
        for &model in &self.model {
            for &alpha in &self.alpha {
                for &lambda in &self.lambda {
                    for &mu in &self.mu {
                        for &rho in &self.rho {
                            let tests: Vec<f64> = if self.rho_test.is_empty() {
                                vec![1.0 - rho]
                            } else {
                                self.rho_test.clone()
                            };
                            for &rho_test in &tests {
                                for &d in &self.d {
                                    for &n in &self.n {
                                        for &loss in &self.loss {
                                            for &r in &self.r {
                                                for &c in &self.c {
                                                    out.push(Point {
                                                        panel: panel.to_string(),
                                                        model,
                                                        alpha,
                                                        lambda,
                                                        mu,
                                                        rho,
                                                        rho_test,
                                                        d,
                                                        n,
                                                        loss,
                                                        r,
                                                        c,
                                                    });
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Quantity on the y axis of plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YAxis {
    AccTest,
    AccTrain,
    ETest,
    ETrain,
    /// `1 − acc_test` on a log scale.
    ErrTest,
    /// The self-loop strength, for runs that optimise it.
    C,
}

impl FromStr for YAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "acc_test" => YAxis::AccTest,
            "acc_train" => YAxis::AccTrain,
            "e_test" => YAxis::ETest,
            "e_train" => YAxis::ETrain,
            "err_test" => YAxis::ErrTest,
            "c" => YAxis::C,
            _ => return Err(format!("unknown y quantity `{s}` (acc_test, acc_train, e_test, e_train, err_test, c)")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub mc_count: usize,
    pub reps: usize,
    pub workers: usize,
    pub mode: AdjacencyMode,
    pub symmetrize: bool,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub regime: LambdaRegime,
    pub supervised: SupervisedTerm,
    /// Replace the `c` axis by its maximizer of acc_test.
    pub c_opt: bool,
    pub grad_tol: f64,
    pub max_steps: usize,
    pub features: Option<PathBuf>,
    pub epsilon: f64,
    pub label_column: Option<usize>,
    pub input: Option<PathBuf>,
    pub x: Option<String>,
    pub y: YAxis,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            mc_count: 1_000_000,
            reps: 10,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            mode: AdjacencyMode::Bernoulli,
            symmetrize: false,
            output: None,
            format: Format::Csv,
            tol: 1e-8,
            max_iter: 200,
            damping: 0.0,
            regime: LambdaRegime::Finite,
            supervised: SupervisedTerm::AsPrinted,
            c_opt: false,
            grad_tol: 1e-10,
            max_steps: 100_000,
            features: None,
            epsilon: 1e-3,
            label_column: None,
            input: None,
            x: None,
            y: YAxis::AccTest,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub preset: Option<String>,
    /// Named parameter grids; plain runs have a single panel `main`.
    pub panels: Vec<(String, ParamGrid)>,
    pub settings: Settings,
}

/// Every accepted key. Numeric parameters also accept a `_grid` suffix.
pub const KEYS: &[&str] = &[
    "model",
    "alpha",
    "lambda",
    "mu",
    "rho",
    "rho_test",
    "d",
    "n",
    "loss",
    "r",
    "c",
    "preset",
    "seed",
    "mc_count",
    "reps",
    "workers",
    "mode",
    "symmetrize",
    "output",
    "format",
    "tol",
    "max_iter",
    "damping",
    "regime",
    "supervised",
    "c_opt",
    "grad_tol",
    "max_steps",
    "features",
    "epsilon",
    "label_column",
    "input",
    "x",
    "y",
];

const GRID_KEYS: &[&str] = &["alpha", "lambda", "mu", "rho", "rho_test", "d", "n", "r", "c"];

/// Canonical form of a key: dashes become underscores and a `_grid` suffix on
/// a numeric parameter is dropped. Returns `None` for unknown keys.
pub fn canonical_key(key: &str) -> Option<String> {
    let k = key.trim().replace('-', "_");
    if let Some(base) = k.strip_suffix("_grid") {
        if GRID_KEYS.contains(&base) {
            return Some(base.to_string());
        }
    }
    KEYS.contains(&k.as_str()).then_some(k)
}

pub fn unknown_key(key: &str) -> CliError {
    let k = key.trim().replace('-', "_");
    let suggestion = KEYS
        .iter()
        .map(|c| (strsim::levenshtein(&k, c), *c))
        .filter(|(dist, _)| *dist <= 2)
        .min()
        .map(|(_, c)| c.to_string());
    CliError::UnknownKey {
        key: key.to_string(),
        suggestion,
    }
}

fn value_err(key: &str, value: &str, reason: impl Into<String>) -> CliError {
    CliError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| value_err(key, value, format!("expected a {}", std::any::type_name::<T>())))
}

fn flag(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(value_err(key, value, "expected true or false")),
    }
}

fn positive_grid(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    let g = parse_grid(key, value)?;
    if g.iter().any(|&v| !(v > 0.0)) {
        return Err(value_err(key, value, "values must be positive"));
    }
    Ok(g)
}

impl RunSpec {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            preset: None,
            panels: vec![("main".to_string(), ParamGrid::default())],
            settings: Settings::default(),
        }
    }

    /// Folds preset, config entries and flags into a spec.
    pub fn build(command: Command, config: &[ConfigEntry], flags: &[(String, String)]) -> Result<Self, CliError> {
        let mut spec = Self::defaults(command);
        let in_scope = |e: &&ConfigEntry| e.section.as_deref().is_none_or(|s| s == command.name());
        let preset = flags
            .iter()
            .rev()
            .find(|(k, _)| canonical_key(k).as_deref() == Some("preset"))
            .map(|(_, v)| v.clone())
            .or_else(|| {
                config
                    .iter()
                    .rev()
                    .filter(in_scope)
                    .find(|e| e.key == "preset")
                    .map(|e| e.value.clone())
            });
        if let Some(name) = preset {
            crate::presets::apply(&mut spec, name.trim())?;
        }
        let (global, section): (Vec<&ConfigEntry>, Vec<&ConfigEntry>) =
            config.iter().filter(in_scope).partition(|e| e.section.is_none());
        for e in global.into_iter().chain(section) {
            if e.key == "preset" {
                continue;
            }
            spec.apply(&e.key, &e.value).map_err(|source| CliError::AtLine {
                path: e.path.clone(),
                line: e.line,
                source: Box::new(source),
            })?;
        }
        for (k, v) in flags {
            if canonical_key(k).as_deref() == Some("preset") {
                continue;
            }
            spec.apply(k, v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn each_panel(&mut self, f: impl Fn(&mut ParamGrid)) {
        for (_, g) in &mut self.panels {
            f(g);
        }
    }

    /// Sets one key from its text value, in every panel for grid parameters.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let k = canonical_key(key).ok_or_else(|| unknown_key(key))?;
        let v = value.trim();
        let s = &mut self.settings;
        match k.as_str() {
            "model" => {
                let m: Vec<Model> = parse_list(&k, v)?;
                self.each_panel(|g| g.model = m.clone());
            }
            "loss" => {
                let l: Vec<LossKind> = parse_list(&k, v)?;
                self.each_panel(|g| g.loss = l.clone());
            }
            "alpha" => {
                let x = positive_grid(&k, v)?;
                self.each_panel(|g| g.alpha = x.clone());
            }
            "lambda" => {
                let x = parse_grid(&k, v)?;
                self.each_panel(|g| g.lambda = x.clone());
            }
            "mu" => {
                let x = parse_grid(&k, v)?;
                if x.iter().any(|&m| m < 0.0) {
                    return Err(value_err(&k, v, "mu must be non-negative"));
                }
                self.each_panel(|g| g.mu = x.clone());
            }
            "rho" => {
                let x = parse_grid(&k, v)?;
                if x.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
                    return Err(value_err(&k, v, "rho must lie in (0, 1]"));
                }
                self.each_panel(|g| g.rho = x.clone());
            }
            "rho_test" => {
                let x = parse_grid(&k, v)?;
                if x.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(value_err(&k, v, "rho_test must lie in [0, 1]"));
                }
                self.each_panel(|g| g.rho_test = x.clone());
            }
            "r" => {
                let x = positive_grid(&k, v)?;
                self.each_panel(|g| g.r = x.clone());
            }
            "c" => {
                let x = parse_grid(&k, v)?;
                self.each_panel(|g| g.c = x.clone());
            }
            "d" => {
                let x: Vec<Degree> = parse_list(&k, v)?;
                self.each_panel(|g| g.d = x.clone());
            }
            "n" => {
                let x = positive_grid(&k, v)?;
                if x.iter().any(|&n| n.fract() != 0.0) {
                    return Err(value_err(&k, v, "n must be an integer"));
                }
                let x: Vec<usize> = x.into_iter().map(|n| n as usize).collect();
                self.each_panel(|g| g.n = x.clone());
            }
            "preset" => return Err(value_err(&k, v, "a preset must come before other keys")),
            "seed" => s.seed = scalar(&k, v)?,
            "mc_count" => {
                s.mc_count = scalar(&k, v)?;
                if s.mc_count == 0 {
                    return Err(value_err(&k, v, "must be positive"));
                }
            }
            "reps" => {
                s.reps = scalar(&k, v)?;
            }
            "workers" => {
                s.workers = scalar(&k, v)?;
                if s.workers == 0 {
                    return Err(value_err(&k, v, "must be at least 1"));
                }
            }
            "mode" => s.mode = v.parse().map_err(|e: String| value_err(&k, v, e))?,
            "symmetrize" => s.symmetrize = flag(&k, v)?,
            "output" => s.output = Some(PathBuf::from(v)),
            "format" => {
                s.format = match v {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(value_err(&k, v, "expected csv or json")),
                }
            }
            "tol" => s.tol = positive_scalar(&k, v)?,
            "max_iter" => s.max_iter = scalar(&k, v)?,
            "damping" => {
                s.damping = scalar(&k, v)?;
                if !(0.0..1.0).contains(&s.damping) {
                    return Err(value_err(&k, v, "damping must lie in [0, 1)"));
                }
            }
            "regime" => {
                s.regime = match v {
                    "small" | "small-lambda" => LambdaRegime::SmallLambda,
                    "large" | "large-lambda" => LambdaRegime::LargeLambda,
                    "finite" => LambdaRegime::Finite,
                    _ => return Err(value_err(&k, v, "expected small, large or finite")),
                }
            }
            "supervised" => {
                s.supervised = match v {
                    "as-printed" | "as_printed" => SupervisedTerm::AsPrinted,
                    "symmetrized" => SupervisedTerm::Symmetrized,
                    _ => return Err(value_err(&k, v, "expected as-printed or symmetrized")),
                }
            }
            "c_opt" => s.c_opt = flag(&k, v)?,
            "grad_tol" => s.grad_tol = positive_scalar(&k, v)?,
            "max_steps" => s.max_steps = scalar(&k, v)?,
            "features" => s.features = Some(PathBuf::from(v)),
            "epsilon" => {
                s.epsilon = scalar(&k, v)?;
                if !(s.epsilon >= 0.0) {
                    return Err(value_err(&k, v, "must be non-negative"));
                }
            }
            "label_column" => s.label_column = Some(scalar(&k, v)?),
            "input" => s.input = Some(PathBuf::from(v)),
            "x" => {
                if !GRID_KEYS.contains(&v) {
                    return Err(value_err(&k, v, format!("x must be one of {}", GRID_KEYS.join(", "))));
                }
                s.x = Some(v.to_string());
            }
            "y" => s.y = v.parse().map_err(|e: String| value_err(&k, v, e))?,
            _ => unreachable!("key list and match arms disagree on `{k}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if matches!(self.command, Command::Sim) && self.settings.reps == 0 {
            return Err(CliError::Usage("`reps` must be at least 1 for sim".into()));
        }
        if self.preset.as_deref() == Some("fig4-right") && self.settings.features.is_none() {
            return Err(CliError::Usage(
                "preset fig4-right needs `features` (a CSV of node features) and `label_column`".into(),
            ));
        }
        if self.settings.features.is_some() && self.settings.label_column.is_none() {
            return Err(CliError::Usage("`features` needs `label_column`, the 0-based column holding the classes".into()));
        }
        if self.command == Command::Plot && self.settings.input.is_none() {
            return Err(CliError::Usage("plot needs `input`, the table to draw".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Point> {
        self.panels.iter().flat_map(|(name, g)| g.points(name)).collect()
    }
}

fn positive_scalar(key: &str, value: &str) -> Result<f64, CliError> {
    let x: f64 = scalar(key, value)?;
    if !(x > 0.0) {
        return Err(value_err(key, value, "must be positive"));
    }
    Ok(x)
}
