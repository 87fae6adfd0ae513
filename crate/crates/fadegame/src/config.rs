//! Experiment configuration in TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fadegame_core::bayes::LearningParams;
use fadegame_core::channel::DEFAULT_ENUMERATION_CAP;
use fadegame_core::pareto::{AugLagParams, SocialObjective};
use fadegame_core::{
    presets, ChannelModel, FieldKind, GainDist, LogBase, ProjectionMode, SolveParams, Variant,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Example1,
    Example2,
    Example3,
    Example2Bayes,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Example1,
        Preset::Example2,
        Preset::Example3,
        Preset::Example2Bayes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
            Preset::Example3 => "example3",
            Preset::Example2Bayes => "example2-bayes",
        }
    }

    pub fn model(self, budget: f64) -> fadegame_core::Result<ChannelModel> {
        match self {
            Preset::Example1 => presets::example1(budget),
            Preset::Example2 => presets::example2(budget),
            Preset::Example3 => presets::example3(budget),
            Preset::Example2Bayes => presets::example2_bayes(budget),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim())
            .ok_or_else(|| Error::field("model.preset", format!("unknown preset `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameVariant {
    Full,
    Incident,
    Direct,
}

impl From<GameVariant> for Variant {
    fn from(v: GameVariant) -> Variant {
        match v {
            GameVariant::Full => Variant::Full,
            GameVariant::Incident => Variant::Incident,
            GameVariant::Direct => Variant::Direct,
        }
    }
}

impl From<Variant> for GameVariant {
    fn from(v: Variant) -> GameVariant {
        match v {
            Variant::Full => GameVariant::Full,
            Variant::Incident => GameVariant::Incident,
            Variant::Direct => GameVariant::Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RateBase {
    #[default]
    #[serde(rename = "e")]
    E,
    #[serde(rename = "2")]
    Two,
}

impl From<RateBase> for LogBase {
    fn from(b: RateBase) -> LogBase {
        match b {
            RateBase::E => LogBase::E,
            RateBase::Two => LogBase::Two,
        }
    }
}

impl From<LogBase> for RateBase {
    fn from(b: LogBase) -> RateBase {
        match b {
            LogBase::E => RateBase::E,
            LogBase::Two => RateBase::Two,
        }
    }
}

/// One link distribution; `probs` defaults to equiprobable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

/// Either a named preset or an explicit model. Budgets are not part of the
/// model; they follow from the SNR grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_users: Option<usize>,
    /// Row-major `n × n`; entry `i * n + j` is the gain from transmitter `j`
    /// into receiver `i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<LinkSpec>>,
    /// SNR gap factor per user, 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

impl ModelSpec {
    pub fn preset(p: Preset) -> Self {
        ModelSpec {
            preset: Some(p),
            ..ModelSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.preset, &self.n_users, &self.links) {
            (Some(_), None, None) if self.alpha.is_none() => Ok(()),
            (Some(_), _, _) => Err(Error::field(
                "model",
                "a preset cannot be combined with explicit fields",
            )),
            (None, Some(_), Some(_)) => self.build(1.0).map(|_| ()),
            (None, _, _) => Err(Error::field(
                "model",
                "give either `preset` or both `n_users` and `links`",
            )),
        }
    }

    /// The channel model with every user's budget set to `budget`.
    pub fn build(&self, budget: f64) -> Result<ChannelModel> {
        if let Some(p) = self.preset {
            return p
                .model(budget)
                .map_err(|e| Error::field("model.preset", e.to_string()));
        }
        let n = self
            .n_users
            .ok_or_else(|| Error::field("model.n_users", "missing"))?;
        let links = self
            .links
            .as_ref()
            .ok_or_else(|| Error::field("model.links", "missing"))?;
        let dists = links
            .iter()
            .enumerate()
            .map(|(k, l)| {
                match &l.probs {
                    Some(p) => GainDist::new(l.values.clone(), p.clone()),
                    None => GainDist::uniform(l.values.clone()),
                }
                .map_err(|e| Error::field(format!("model.links[{k}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let alpha = self.alpha.clone().unwrap_or_else(|| vec![1.0; n]);
        ChannelModel::new(n, dists, vec![budget; n], alpha)
            .map_err(|e| Error::field("model", e.to_string()))
    }

    /// The explicit form of this spec; presets are replaced by their links.
    pub fn expanded(&self) -> Result<ModelSpec> {
        let m = self.build(1.0)?;
        Ok(ModelSpec {
            preset: None,
            n_users: Some(m.n_users()),
            links: Some(
                m.links()
                    .iter()
                    .map(|l| LinkSpec {
                        values: l.values().to_vec(),
                        probs: Some(l.probs().to_vec()),
                    })
                    .collect(),
            ),
            alpha: Some(m.alphas().to_vec()),
        })
    }

    pub fn label(&self) -> String {
        match self.preset {
            Some(p) => p.to_string(),
            None => format!("custom-{}-user", self.n_users.unwrap_or(0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    #[default]
    Equality,
    Kkt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    #[default]
    Reciprocal,
    Gradient,
}

/// Equilibrium solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tau: f64,
    pub projection: Projection,
    pub field: Field,
    pub max_picard: usize,
    pub eps: f64,
    pub delta: f64,
    pub gamma0: f64,
    pub gamma_every: usize,
    pub fd_rel_step: f64,
    pub max_restarts: usize,
    pub max_descent: usize,
    pub expand_step: bool,
    /// Largest joint-state or strategy enumeration allowed.
    pub enumeration_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolveParams::default();
        SolverConfig {
            tau: p.tau,
            projection: Projection::Equality,
            field: Field::Reciprocal,
            max_picard: p.max_picard,
            eps: p.eps,
            delta: p.delta,
            gamma0: p.gamma0,
            gamma_every: p.gamma_every,
            fd_rel_step: p.fd_rel_step,
            max_restarts: p.max_restarts,
            max_descent: p.max_descent,
            expand_step: p.expand_step,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl SolverConfig {
    pub fn params(&self) -> SolveParams {
        SolveParams {
            tau: self.tau,
            mode: match self.projection {
                Projection::Equality => ProjectionMode::EqualityBinding,
                Projection::Kkt => ProjectionMode::InequalityKkt,
            },
            field: match self.field {
                Field::Reciprocal => FieldKind::Reciprocal,
                Field::Gradient => FieldKind::Gradient,
            },
            max_picard: self.max_picard,
            eps: self.eps,
            delta: self.delta,
            gamma0: self.gamma0,
            gamma_every: self.gamma_every,
            fd_rel_step: self.fd_rel_step,
            max_restarts: self.max_restarts,
            max_descent: self.max_descent,
            expand_step: self.expand_step,
        }
    }
}

/// Augmented-Lagrangian settings shared by `pareto` and `bargain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParetoConfig {
    pub penalty: f64,
    pub alpha: f64,
    pub delta: f64,
    pub eps: f64,
    pub constraint_tol: f64,
    pub max_outer: usize,
    pub max_rounds: usize,
    pub max_halvings: usize,
    pub normalize: bool,
    pub expand_step: bool,
    /// Random starts in addition to the uniform profile and the equilibrium.
    pub random_starts: usize,
}

impl Default for ParetoConfig {
    fn default() -> Self {
        let p = AugLagParams::default();
        ParetoConfig {
            penalty: p.penalty,
            alpha: p.alpha,
            delta: p.delta,
            eps: p.eps,
            constraint_tol: p.constraint_tol,
            max_outer: p.max_outer,
            max_rounds: p.max_rounds,
            max_halvings: p.max_halvings,
            normalize: p.normalize,
            expand_step: p.expand_step,
            random_starts: 3,
        }
    }
}

impl ParetoConfig {
    pub fn params(&self) -> AugLagParams {
        AugLagParams {
            penalty: self.penalty,
            alpha: self.alpha,
            delta: self.delta,
            eps: self.eps,
            constraint_tol: self.constraint_tol,
            max_outer: self.max_outer,
            max_rounds: self.max_rounds,
            max_halvings: self.max_halvings,
            normalize: self.normalize,
            expand_step: self.expand_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disagreement {
    #[default]
    Zero,
    /// Rates at the computed equilibrium.
    Ne,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveConfig {
    /// Weighted-sum weights, all ones when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub disagreement: Disagreement,
}

impl ObjectiveConfig {
    pub fn weighted_sum(&self, n: usize) -> SocialObjective {
        match &self.weights {
            Some(w) => SocialObjective::WeightedSum(w.clone()),
            None => SocialObjective::equal_weights(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesConfig {
    /// Power levels shared by all users; must start at 0.
    pub levels: Vec<f64>,
    pub smoothing: f64,
    pub epsilon: f64,
    pub max_slots: usize,
    pub window: usize,
    pub epoch: usize,
    /// Independent runs per SNR, seeded `seed, seed + 1, ...`.
    pub runs: usize,
    /// Write the per-slot trace.
    pub trace: bool,
}

impl Default for BayesConfig {
    fn default() -> Self {
        let p = LearningParams::default();
        BayesConfig {
            levels: presets::bayes_levels(),
            smoothing: p.smoothing,
            epsilon: p.epsilon,
            max_slots: p.max_slots,
            window: p.window,
            epoch: p.epoch,
            runs: 1,
            trace: true,
        }
    }
}

impl BayesConfig {
    pub fn params(&self, cap: usize) -> LearningParams {
        LearningParams {
            smoothing: self.smoothing,
            epsilon: self.epsilon,
            max_slots: self.max_slots,
            window: self.window,
            epoch: self.epoch,
            record_slots: self.trace,
            cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase1Config {
    pub starts: usize,
    pub max: usize,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Phase1Config {
            starts: 100,
            max: 100,
        }
    }
}

fn default_variants() -> Vec<GameVariant> {
    Variant::ALL.into_iter().map(Into::into).collect()
}

fn default_snr() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 15.0, 20.0]
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_variants")]
    pub variants: Vec<GameVariant>,
    /// Transmit SNR grid; every user's budget is `10^(snr_db / 10)`.
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub log_base: RateBase,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub model: ModelSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub pareto: ParetoConfig,
    #[serde(default)]
    pub bayes: BayesConfig,
    #[serde(default)]
    pub phase1: Phase1Config,
}

impl ExperimentConfig {
    pub fn for_preset(p: Preset) -> Self {
        ExperimentConfig {
            seed: default_seed(),
            variants: default_variants(),
            snr_db: default_snr(),
            log_base: RateBase::E,
            out: default_out(),
            model: ModelSpec::preset(p),
            solver: SolverConfig::default(),
            objective: ObjectiveConfig::default(),
            pareto: ParetoConfig::default(),
            bayes: BayesConfig::default(),
            phase1: Phase1Config::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn n_users(&self) -> Result<usize> {
        Ok(self.model.build(1.0)?.n_users())
    }

    pub fn variants(&self) -> Vec<Variant> {
        self.variants.iter().map(|v| (*v).into()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::field("snr_db", "the SNR grid is empty"));
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return Err(Error::field("snr_db", format!("non-finite SNR {x}")));
        }
        if self.variants.is_empty() {
            return Err(Error::field("variants", "no game variant selected"));
        }
        self.model.validate()?;
        let n = self.n_users()?;
        self.solver
            .params()
            .validate()
            .map_err(|e| Error::field("solver", e.to_string()))?;
        if self.solver.enumeration_cap == 0 {
            return Err(Error::field("solver.enumeration_cap", "must be positive"));
        }
        self.pareto
            .params()
            .validate()
            .map_err(|e| Error::field("pareto", e.to_string()))?;
        self.objective
            .weighted_sum(n)
            .validate(n)
            .map_err(|e| Error::field("objective.weights", e.to_string()))?;
        fadegame_core::bayes::PowerLevels::uniform(n, self.bayes.levels.clone())
            .map_err(|e| Error::field("bayes.levels", e.to_string()))?;
        self.bayes
            .params(self.solver.enumeration_cap)
            .validate()
            .map_err(|e| Error::field("bayes", e.to_string()))?;
        if self.bayes.runs == 0 {
            return Err(Error::field("bayes.runs", "must be positive"));
        }
        if self.phase1.starts == 0 {
            return Err(Error::field("phase1.starts", "must be positive"));
        }
        Ok(())
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_toml(&text).map_err(|e| e.in_file(path))
}
