//! Run configuration: one JSON document describing the arena, both initial
//! distributions, the scoring rule and the solver settings.
//!
//! [`GameConfig::validate`] collects every problem at once, each tagged with
//! the JSON path of the offending field, so a broken file can be fixed in
//! one pass.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use blotto_optim::external::ExternalSolver;
use serde::{Deserialize, Serialize};

use crate::best_response::BrOptions;
use crate::doa::DoaConfig;
use crate::error::{BlottoError, FieldError, Result};
use crate::game::Game;
use crate::graph::{Distribution, Graph, ROW_SUM_TOL};
use crate::payoff::{reduce_linear_heterogeneous, IntrinsicMatrix, OutcomeParams, UtilityModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Homogeneous,
    /// Several types with fixed exchange rates, reduced to one type.
    Linear,
    /// Three cyclically dominating types.
    Cdh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: usize,
    /// Directed edges `(source, dest)`, 0-based.
    pub edges: Vec<(usize, usize)>,
    #[serde(default = "default_true")]
    pub allow_stay: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Backend {
    #[default]
    Builtin,
    /// Writes each best-response MILP as MPS and runs `program args...
    /// <problem.mps> <solution.txt>`.
    MpsExternal {
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSettings {
    /// Independent trials per baseline and scheme.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Random draws averaged inside one trial.
    #[serde(default = "default_one")]
    pub repetitions: usize,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self { trials: default_trials(), repetitions: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub graph: GraphSpec,
    pub mode: Mode,
    /// Number of robot types. Inferred from `d_x` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<usize>,
    /// `intrinsic[i][j]`: units of type `j` one unit of type `i` beats;
    /// `null` where undefined. Required for `linear` and `cdh`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsic: Option<Vec<Vec<Option<f64>>>>,
    pub c: f64,
    pub d_x: Vec<Vec<f64>>,
    pub d_y: Vec<Vec<f64>>,
    /// Linear mode: total amount of each type (shared by both players).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub totals: Option<Vec<f64>>,
    /// Linear mode: the type everything is converted into.
    #[serde(default)]
    pub reference_type: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_prune")]
    pub prune_threshold: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_secs: Option<f64>,
    /// Branch-and-bound node limit per best response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_limit: Option<usize>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub baselines: BaselineSettings,
}

fn default_true() -> bool {
    true
}
fn default_one() -> usize {
    1
}
fn default_trials() -> usize {
    30
}
fn default_epsilon() -> f64 {
    0.01
}
fn default_prune() -> f64 {
    1e-3
}
fn default_max_iterations() -> usize {
    200
}

impl GameConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: GameConfig = serde_json::from_str(text).map_err(|e| {
            BlottoError::validation(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })?;
        config.check()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            BlottoError::validation(path.display().to_string(), format!("cannot read: {e}"))
        })?;
        Self::from_json(&text)
    }

    /// The number of robot types the config describes.
    pub fn type_count(&self) -> usize {
        self.types.unwrap_or(self.d_x.len())
    }

    /// Every invariant violation, with its field path.
    pub fn validate(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        let mut err = |path: String, message: String| errs.push(FieldError { path, message });
        let n = self.graph.nodes;
        if n == 0 {
            err("graph.nodes".into(), "must be positive".into());
        }
        for (i, &(s, d)) in self.graph.edges.iter().enumerate() {
            if s >= n || d >= n {
                err(format!("graph.edges[{i}]"), format!("({s}, {d}) is outside 0..{n}"));
            }
        }
        let m = self.type_count();
        if m == 0 {
            err("types".into(), "must be positive".into());
        }
        for (name, d) in [("d_x", &self.d_x), ("d_y", &self.d_y)] {
            if d.len() != m {
                err(name.into(), format!("has {} rows, expected {m} (one per type)", d.len()));
            }
            for (t, row) in d.iter().enumerate() {
                if row.len() != n {
                    err(format!("{name}[{t}]"), format!("has {} entries, graph has {n} nodes", row.len()));
                }
                if let Some(j) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
                    err(format!("{name}[{t}][{j}]"), "must be finite and nonnegative".into());
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    err(format!("{name}[{t}]"), format!("sums to {sum}, expected 1"));
                }
            }
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            err("c".into(), "must be positive".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            err("epsilon".into(), "must be positive".into());
        }
        if !(0.0..1.0).contains(&self.prune_threshold) {
            err("prune_threshold".into(), "must lie in [0, 1)".into());
        }
        if self.max_iterations == 0 {
            err("max_iterations".into(), "must be positive".into());
        }
        if self.time_limit_secs.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
            err("time_limit_secs".into(), "must be positive".into());
        }
        if self.baselines.trials == 0 {
            err("baselines.trials".into(), "must be positive".into());
        }
        if self.baselines.repetitions == 0 {
            err("baselines.repetitions".into(), "must be positive".into());
        }
        let intrinsic = match &self.intrinsic {
            Some(rows) => match IntrinsicMatrix::new(rows.clone()) {
                Ok(i) => {
                    if i.size() != m {
                        err("intrinsic".into(), format!("is {0}x{0}, expected {m}x{m}", i.size()));
                    }
                    Some(i)
                }
                Err(e) => {
                    err("intrinsic".into(), e.to_string());
                    None
                }
            },
            None => None,
        };
        match self.mode {
            Mode::Homogeneous => {
                if m != 1 {
                    err("types".into(), format!("homogeneous mode has one type, got {m}"));
                }
            }
            Mode::Linear => {
                match &intrinsic {
                    None if self.intrinsic.is_none() => {
                        err("intrinsic".into(), "required in linear mode".into())
                    }
                    Some(i) => {
                        if let Err(e) = i.validate_linear() {
                            err("intrinsic".into(), e.to_string());
                        }
                    }
                    None => {}
                }
                match &self.totals {
                    None => err("totals".into(), "required in linear mode".into()),
                    Some(t) => {
                        if t.len() != m {
                            err("totals".into(), format!("has {} entries, expected {m}", t.len()));
                        }
                        if let Some(i) = t.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                            err(format!("totals[{i}]"), "must be positive".into());
                        }
                    }
                }
                if self.reference_type >= m {
                    err("reference_type".into(), format!("out of range 0..{m}"));
                }
            }
            Mode::Cdh => {
                if m != 3 {
                    err(
                        "types".into(),
                        format!(
                            "cyclic dominance needs exactly 3 types, got {m}; with four or more \
                             types the elimination order can decide the winner, so no \
                             well-defined outcome exists"
                        ),
                    );
                }
                match &intrinsic {
                    None if self.intrinsic.is_none() => {
                        err("intrinsic".into(), "required in cdh mode".into())
                    }
                    Some(i) if i.size() == 3 => {
                        if let Err(e) = i.cyclic_ratios() {
                            err("intrinsic".into(), e.to_string());
                        }
                    }
                    _ => {}
                }
            }
        }
        if let Err(e) = Graph::new(n, self.graph.edges.clone(), self.graph.allow_stay) {
            if n > 0 && self.graph.edges.iter().all(|&(s, d)| s < n && d < n) {
                err("graph".into(), e.to_string());
            }
        }
        errs
    }

    fn check(&self) -> Result<()> {
        let errs = self.validate();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(BlottoError::InvalidConfig(errs))
        }
    }

    pub fn graph(&self) -> Result<Graph> {
        Graph::new(self.graph.nodes, self.graph.edges.clone(), self.graph.allow_stay)
    }

    pub fn intrinsic_matrix(&self) -> Result<Option<IntrinsicMatrix>> {
        self.intrinsic.clone().map(IntrinsicMatrix::new).transpose()
    }

    /// The scoring rule; linear configs score as homogeneous after
    /// reduction.
    pub fn model(&self) -> Result<UtilityModel> {
        match self.mode {
            Mode::Homogeneous | Mode::Linear => Ok(UtilityModel::Homogeneous { c: self.c }),
            Mode::Cdh => {
                let i = self
                    .intrinsic_matrix()?
                    .ok_or_else(|| BlottoError::validation("intrinsic", "required in cdh mode"))?;
                Ok(UtilityModel::Cdh(OutcomeParams::new(i, self.c)?))
            }
        }
    }

    /// Initial distributions as the game sees them (reduced in linear mode).
    pub fn distributions(&self) -> Result<(Distribution, Distribution)> {
        let d_x = Distribution::new(self.d_x.clone())?;
        let d_y = Distribution::new(self.d_y.clone())?;
        match self.mode {
            Mode::Linear => {
                let i = self
                    .intrinsic_matrix()?
                    .ok_or_else(|| BlottoError::validation("intrinsic", "required in linear mode"))?;
                let totals = self
                    .totals
                    .as_deref()
                    .ok_or_else(|| BlottoError::validation("totals", "required in linear mode"))?;
                Ok((
                    reduce_linear_heterogeneous(&d_x, &i, self.reference_type, totals)?,
                    reduce_linear_heterogeneous(&d_y, &i, self.reference_type, totals)?,
                ))
            }
            _ => Ok((d_x, d_y)),
        }
    }

    pub fn game(&self) -> Result<Game> {
        self.check()?;
        let (d_x, d_y) = self.distributions()?;
        Game::new(self.graph()?, self.model()?, d_x, d_y)
    }

    pub fn br_options(&self) -> BrOptions {
        let mut opts = BrOptions::default();
        if let Some(limit) = self.node_limit {
            opts.milp.node_limit = limit;
        }
        if let Backend::MpsExternal { program, args } = &self.backend {
            opts.external = Some(ExternalSolver { program: program.clone(), args: args.clone() });
        }
        opts
    }

    pub fn doa_config(&self) -> DoaConfig {
        DoaConfig {
            epsilon: self.epsilon,
            prune_threshold: self.prune_threshold,
            max_iterations: self.max_iterations,
            seed: self.seed,
            time_limit: self.time_limit_secs.map(Duration::from_secs_f64),
            br: self.br_options(),
            ..DoaConfig::default()
        }
    }
}
