//! TOML run configuration: dynamics, transform, budget, and game
//! sections, each mapped onto the crate's domain types with field-level
//! diagnostics. Unknown keys are rejected so typos surface as errors
//! rather than silently falling back to defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ce::{AgentSpec, CEConfig, WealthUpdate};
use crate::error::{Error, Result};
use crate::growth::Budget;
use crate::swp::{build_ito, DiscreteDynamics, GambleMode, Interval, ItoDynamics};
use crate::transform::{derive_transform, TransformSpec};

/// Parsed run configuration. Every section is optional; each subcommand
/// demands the sections it needs and applies defaults for the rest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dynamics: Option<DynamicsSection>,
    pub transform: Option<TransformSection>,
    pub budget: Option<BudgetSection>,
    pub ce: Option<CeSection>,
    pub calibrate: Option<CalibrateSection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    /// The single process under [dynamics], or an error naming the section.
    pub fn single_process(&self) -> Result<BuiltProcess> {
        let section = self
            .dynamics
            .as_ref()
            .ok_or_else(|| Error::Config("missing [dynamics] section".into()))?;
        section.inline().build("dynamics")
    }

    /// The [dynamics.left] and [dynamics.right] pair, for ranking.
    pub fn process_pair(&self) -> Result<(BuiltProcess, BuiltProcess)> {
        let section = self
            .dynamics
            .as_ref()
            .ok_or_else(|| Error::Config("missing [dynamics] section".into()))?;
        let left = section
            .left
            .as_ref()
            .ok_or_else(|| Error::Config("missing [dynamics.left] section".into()))?;
        let right = section
            .right
            .as_ref()
            .ok_or_else(|| Error::Config("missing [dynamics.right] section".into()))?;
        Ok((left.build("dynamics.left")?, right.build("dynamics.right")?))
    }

    /// The requested transform; `form = "derived"` solves for it from
    /// the given dynamics.
    pub fn transform(&self, dynamics: Option<&ItoDynamics>) -> Result<TransformSpec> {
        match &self.transform {
            Some(section) => section.build(dynamics),
            None => TransformSection::default().build(dynamics),
        }
    }

    /// Simulation budget with `seed` taking precedence when given.
    pub fn budget(&self, seed: Option<u64>) -> Budget {
        let mut budget = Budget::default();
        if let Some(section) = &self.budget {
            if let Some(n) = section.n_paths {
                budget.n_paths = n;
            }
            if let Some(dt) = section.dt {
                budget.dt = dt;
            }
            if let Some(t_max) = section.t_max {
                budget.t_max = t_max;
            }
            if let Some(s) = section.seed {
                budget.seed = s;
            }
        }
        if let Some(s) = seed {
            budget.seed = s;
        }
        budget
    }

    /// Game configuration and agent roster for the choice experiment.
    pub fn ce(&self, seed: u64) -> Result<(CEConfig, Vec<AgentSpec>)> {
        match &self.ce {
            Some(section) => section.build(seed),
            None => Ok((
                CEConfig {
                    seed,
                    ..CEConfig::default_multiplicative()
                },
                vec![AgentSpec::Ergodicity],
            )),
        }
    }

    pub fn calibrate(&self) -> CalibrateSection {
        self.calibrate.clone().unwrap_or_default()
    }
}

/// [dynamics] section: either one process described inline, or a
/// left/right pair of subtables for ranking runs. The inline fields
/// mirror `ProcessSpec`; serde's flatten would be the natural fit but
/// it disables unknown-key rejection, which this section keeps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub kind: Option<String>,
    pub drift: Option<String>,
    pub diffusion: Option<String>,
    pub x0: Option<f64>,
    pub domain: Option<DomainSpec>,
    pub mode: Option<GambleMode>,
    pub outcomes: Option<Vec<f64>>,
    pub probabilities: Option<Vec<f64>>,
    pub left: Option<ProcessSpec>,
    pub right: Option<ProcessSpec>,
}

impl DynamicsSection {
    fn inline(&self) -> ProcessSpec {
        ProcessSpec {
            kind: self.kind.clone(),
            drift: self.drift.clone(),
            diffusion: self.diffusion.clone(),
            x0: self.x0,
            domain: self.domain.clone(),
            mode: self.mode,
            outcomes: self.outcomes.clone(),
            probabilities: self.probabilities.clone(),
        }
    }
}

/// One process: a drift/diffusion pair for a continuous dynamic, or an
/// outcome table for a repeated gamble.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    /// "ito" (default) or "discrete".
    pub kind: Option<String>,
    pub drift: Option<String>,
    pub diffusion: Option<String>,
    pub x0: Option<f64>,
    /// "positive", "real", or explicit [lo, hi] bounds.
    pub domain: Option<DomainSpec>,
    pub mode: Option<GambleMode>,
    pub outcomes: Option<Vec<f64>>,
    pub probabilities: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Named(String),
    Bounds([f64; 2]),
}

impl DomainSpec {
    fn build(&self, at: &str) -> Result<Interval> {
        match self {
            DomainSpec::Named(name) => match name.as_str() {
                "positive" => Ok(Interval::POSITIVE),
                "real" => Ok(Interval::REAL),
                other => Err(Error::Config(format!(
                    "{at}.domain: expected \"positive\", \"real\", or [lo, hi], got \"{other}\""
                ))),
            },
            DomainSpec::Bounds([lo, hi]) => Interval::new(*lo, *hi)
                .map_err(|e| Error::Config(format!("{at}.domain: {e}"))),
        }
    }
}

/// A process ready to simulate, with its start point.
#[derive(Debug, Clone)]
pub enum BuiltProcess {
    Ito { dynamics: ItoDynamics, x0: f64 },
    Discrete { dynamics: DiscreteDynamics, x0: f64 },
}

impl BuiltProcess {
    pub fn x0(&self) -> f64 {
        match self {
            BuiltProcess::Ito { x0, .. } | BuiltProcess::Discrete { x0, .. } => *x0,
        }
    }

    pub fn ito(&self) -> Option<&ItoDynamics> {
        match self {
            BuiltProcess::Ito { dynamics, .. } => Some(dynamics),
            BuiltProcess::Discrete { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BuiltProcess::Ito { dynamics, .. } => dynamics.describe(),
            BuiltProcess::Discrete { dynamics, .. } => dynamics.describe(),
        }
    }

    /// Simulate under the budget. Continuous dynamics step by `dt` up
    /// to `t_max`; gambles play one round per time unit, so `t_max`
    /// doubles as the round count and `dt` is ignored.
    pub fn simulate(&self, budget: &Budget) -> Result<crate::swp::Ensemble> {
        match self {
            BuiltProcess::Ito { dynamics, x0 } => crate::swp::simulate_ito(
                dynamics,
                *x0,
                budget.dt,
                budget.t_max,
                budget.n_paths,
                budget.seed,
            ),
            BuiltProcess::Discrete { dynamics, x0 } => {
                if !(budget.t_max >= 1.0) || !budget.t_max.is_finite() {
                    return Err(Error::Config(format!(
                        "budget.t_max is the round count for discrete dynamics \
                         and must be at least 1, got {}",
                        budget.t_max
                    )));
                }
                crate::swp::simulate_discrete(
                    dynamics,
                    *x0,
                    budget.t_max.round() as usize,
                    budget.n_paths,
                    budget.seed,
                )
            }
        }
    }
}

impl ProcessSpec {
    pub fn build(&self, at: &str) -> Result<BuiltProcess> {
        let kind = self.kind.as_deref().unwrap_or("ito");
        match kind {
            "ito" => {
                let drift = self.drift.as_deref().ok_or_else(|| {
                    Error::Config(format!("{at}.drift is required for an ito process"))
                })?;
                let diffusion = self.diffusion.as_deref().ok_or_else(|| {
                    Error::Config(format!("{at}.diffusion is required for an ito process"))
                })?;
                for (field, set) in [
                    ("mode", self.mode.is_some()),
                    ("outcomes", self.outcomes.is_some()),
                    ("probabilities", self.probabilities.is_some()),
                ] {
                    if set {
                        return Err(Error::Config(format!(
                            "{at}.{field} only applies to discrete processes"
                        )));
                    }
                }
                let domain = match &self.domain {
                    Some(d) => d.build(at)?,
                    None => Interval::POSITIVE,
                };
                let dynamics = build_ito(drift, diffusion, domain)
                    .map_err(|e| Error::Config(format!("{at}: {e}")))?;
                let x0 = self.x0.unwrap_or(1.0);
                if !dynamics.domain().contains(x0) {
                    return Err(Error::Config(format!(
                        "{at}.x0 = {x0} lies outside the domain"
                    )));
                }
                Ok(BuiltProcess::Ito { dynamics, x0 })
            }
            "discrete" => {
                let mode = self.mode.ok_or_else(|| {
                    Error::Config(format!("{at}.mode is required for a discrete process"))
                })?;
                let outcomes = self.outcomes.clone().ok_or_else(|| {
                    Error::Config(format!("{at}.outcomes is required for a discrete process"))
                })?;
                for (field, set) in [
                    ("drift", self.drift.is_some()),
                    ("diffusion", self.diffusion.is_some()),
                    ("domain", self.domain.is_some()),
                ] {
                    if set {
                        return Err(Error::Config(format!(
                            "{at}.{field} only applies to ito processes"
                        )));
                    }
                }
                let dynamics = match self.probabilities.clone() {
                    Some(p) => DiscreteDynamics::new(mode, outcomes, p),
                    None => DiscreteDynamics::uniform(mode, outcomes),
                }
                .map_err(|e| Error::Config(format!("{at}: {e}")))?;
                let x0 = self.x0.unwrap_or(1.0);
                if mode == GambleMode::Multiplicative && !(x0 > 0.0) {
                    return Err(Error::Config(format!(
                        "{at}.x0 must be positive for multiplicative gambles, got {x0}"
                    )));
                }
                Ok(BuiltProcess::Discrete { dynamics, x0 })
            }
            other => Err(Error::Config(format!(
                "{at}.kind: expected \"ito\" or \"discrete\", got \"{other}\""
            ))),
        }
    }
}

/// [transform] section.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    /// "log" (default), "identity", "crra", "exponential", or
    /// "derived" (solve from the dynamics).
    pub form: Option<String>,
    pub gamma: Option<f64>,
    pub rate: Option<f64>,
    pub x_ref: Option<f64>,
    pub scale: Option<f64>,
    pub offset: Option<f64>,
}

impl TransformSection {
    pub fn build(&self, dynamics: Option<&ItoDynamics>) -> Result<TransformSpec> {
        let form = self.form.as_deref().unwrap_or("log");
        let refuse = |field: &str, applies: &str| {
            Err(Error::Config(format!(
                "transform.{field} only applies to the {applies} form"
            )))
        };
        if self.gamma.is_some() && form != "crra" {
            return refuse("gamma", "crra");
        }
        if self.rate.is_some() && form != "exponential" {
            return refuse("rate", "exponential");
        }
        let base = match form {
            "log" => TransformSpec::log(self.x_ref.unwrap_or(1.0)),
            "identity" => match self.x_ref {
                None => Ok(TransformSpec::identity()),
                Some(x_ref) => TransformSpec::affine(1.0, -x_ref),
            },
            "crra" => {
                let gamma = self.gamma.ok_or_else(|| {
                    Error::Config("transform.gamma is required for the crra form".into())
                })?;
                TransformSpec::crra(gamma, self.x_ref.unwrap_or(1.0))
            }
            "exponential" => {
                let rate = self.rate.ok_or_else(|| {
                    Error::Config("transform.rate is required for the exponential form".into())
                })?;
                TransformSpec::exponential(rate, self.x_ref.unwrap_or(0.0))
            }
            "derived" => {
                let dynamics = dynamics.ok_or_else(|| {
                    Error::Config(
                        "transform.form = \"derived\" needs an ito [dynamics] section".into(),
                    )
                })?;
                return self.rescale(derive_transform(dynamics, self.x_ref.unwrap_or(1.0))?);
            }
            other => {
                return Err(Error::Config(format!(
                    "transform.form: expected \"log\", \"identity\", \"crra\", \
                     \"exponential\", or \"derived\", got \"{other}\""
                )))
            }
        };
        self.rescale(base.map_err(|e| Error::Config(format!("transform: {e}")))?)
    }

    fn rescale(&self, spec: TransformSpec) -> Result<TransformSpec> {
        if self.scale.is_none() && self.offset.is_none() {
            return Ok(spec);
        }
        spec.scaled_by(self.scale.unwrap_or(1.0), self.offset.unwrap_or(0.0))
            .map_err(|e| Error::Config(format!("transform: {e}")))
    }
}

/// [budget] section; missing fields take the crate defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub n_paths: Option<usize>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub seed: Option<u64>,
}

/// [ce] section; missing fields take the mode's default protocol.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeSection {
    pub mode: Option<GambleMode>,
    pub n_images: Option<usize>,
    pub images_per_game: Option<usize>,
    pub passive_repetitions: Option<usize>,
    pub n_trials: Option<usize>,
    pub settlement_draws: Option<usize>,
    pub image_effects: Option<Vec<f64>>,
    pub initial_endowment: Option<f64>,
    pub wealth_update: Option<WealthUpdate>,
    pub agents: Option<Vec<AgentSection>>,
}

/// One [[ce.agents]] entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    /// "ergodicity", "static_exponential", or "backward_induction".
    pub kind: String,
    pub lambda: Option<f64>,
    pub horizon: Option<usize>,
    /// "log" (default), "identity", "sqrt", "crra", or "exponential".
    pub utility: Option<String>,
    pub gamma: Option<f64>,
    pub rate: Option<f64>,
}

impl AgentSection {
    fn build(&self, index: usize) -> Result<AgentSpec> {
        let at = format!("ce.agents[{index}]");
        let refuse = |field: &str, kind: &str| {
            Err(Error::Config(format!(
                "{at}.{field} only applies to {kind} agents"
            )))
        };
        match self.kind.as_str() {
            "ergodicity" => {
                if self.lambda.is_some() {
                    return refuse("lambda", "static_exponential");
                }
                if self.horizon.is_some() || self.utility.is_some() {
                    return refuse("horizon/utility", "backward_induction");
                }
                Ok(AgentSpec::Ergodicity)
            }
            "static_exponential" => {
                let lambda = self.lambda.ok_or_else(|| {
                    Error::Config(format!("{at}.lambda is required"))
                })?;
                if self.horizon.is_some() || self.utility.is_some() {
                    return refuse("horizon/utility", "backward_induction");
                }
                Ok(AgentSpec::StaticExponential { lambda })
            }
            "backward_induction" => {
                if self.lambda.is_some() {
                    return refuse("lambda", "static_exponential");
                }
                let horizon = self.horizon.ok_or_else(|| {
                    Error::Config(format!("{at}.horizon is required"))
                })?;
                let utility = self.utility(&at)?;
                Ok(AgentSpec::BackwardInduction { horizon, utility })
            }
            other => Err(Error::Config(format!(
                "{at}.kind: expected \"ergodicity\", \"static_exponential\", \
                 or \"backward_induction\", got \"{other}\""
            ))),
        }
    }

    fn utility(&self, at: &str) -> Result<TransformSpec> {
        let name = self.utility.as_deref().unwrap_or("log");
        let spec = match name {
            "log" => TransformSpec::log(1.0),
            "identity" => Ok(TransformSpec::identity()),
            "sqrt" => TransformSpec::crra(0.5, 1.0),
            "crra" => {
                let gamma = self.gamma.ok_or_else(|| {
                    Error::Config(format!("{at}.gamma is required for crra utility"))
                })?;
                TransformSpec::crra(gamma, 1.0)
            }
            "exponential" => {
                let rate = self.rate.ok_or_else(|| {
                    Error::Config(format!("{at}.rate is required for exponential utility"))
                })?;
                TransformSpec::exponential(rate, 0.0)
            }
            other => {
                return Err(Error::Config(format!(
                    "{at}.utility: expected \"log\", \"identity\", \"sqrt\", \
                     \"crra\", or \"exponential\", got \"{other}\""
                )))
            }
        };
        spec.map_err(|e| Error::Config(format!("{at}: {e}")))
    }
}

impl CeSection {
    pub fn build(&self, seed: u64) -> Result<(CEConfig, Vec<AgentSpec>)> {
        let mode = self.mode.unwrap_or(GambleMode::Multiplicative);
        let mut cfg = match mode {
            GambleMode::Additive => CEConfig::default_additive(),
            GambleMode::Multiplicative => CEConfig::default_multiplicative(),
        };
        cfg.seed = seed;
        if let Some(effects) = &self.image_effects {
            cfg.image_effects = effects.clone();
            cfg.n_images = effects.len();
        }
        if let Some(n) = self.n_images {
            if self.image_effects.is_none() && n != cfg.n_images {
                return Err(Error::Config(format!(
                    "ce.n_images = {n} needs a matching ce.image_effects table \
                     (the default has {} entries)",
                    cfg.n_images
                )));
            }
            cfg.n_images = n;
        }
        if let Some(n) = self.images_per_game {
            cfg.images_per_game = n;
        }
        if let Some(n) = self.passive_repetitions {
            cfg.passive_repetitions = n;
        }
        if let Some(n) = self.n_trials {
            cfg.n_trials = n;
        }
        if let Some(n) = self.settlement_draws {
            cfg.settlement_draws = n;
        }
        if let Some(w) = self.initial_endowment {
            cfg.initial_endowment = w;
        }
        if let Some(u) = self.wealth_update {
            cfg.wealth_update = u;
        }
        cfg.validate()?;
        let agents = match &self.agents {
            None => vec![AgentSpec::Ergodicity],
            Some(sections) => {
                let mut agents = Vec::with_capacity(sections.len());
                for (i, section) in sections.iter().enumerate() {
                    agents.push(section.build(i)?);
                }
                agents
            }
        };
        Ok((cfg, agents))
    }
}

/// [calibrate] section: three deterministic growth rates. The anchors
/// frame the scale and the query is placed on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub high_rate: Option<f64>,
    pub low_rate: Option<f64>,
    pub query_rate: Option<f64>,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        CalibrateSection {
            high_rate: Some(1.0),
            low_rate: Some(0.0),
            query_rate: Some(0.5),
        }
    }
}

impl CalibrateSection {
    pub fn rates(&self) -> Result<(f64, f64, f64)> {
        let default = CalibrateSection::default();
        let high = self.high_rate.or(default.high_rate).unwrap();
        let low = self.low_rate.or(default.low_rate).unwrap();
        let query = self.query_rate.or(default.query_rate).unwrap();
        for (field, value) in [("high_rate", high), ("low_rate", low), ("query_rate", query)] {
            if !value.is_finite() {
                return Err(Error::Config(format!(
                    "calibrate.{field} must be finite, got {value}"
                )));
            }
        }
        if !(high > low) {
            return Err(Error::Config(format!(
                "calibrate.high_rate ({high}) must exceed calibrate.low_rate ({low})"
            )));
        }
        Ok((high, low, query))
    }
}
