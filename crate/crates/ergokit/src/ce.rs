//! Replay of a two-day gamble-choice experiment with synthetic agents.
//!
//! A game is a fixed set of trials, each offering two disjoint
//! two-image gambles. Agents choose a gamble per trial, one image of
//! the chosen gamble is assigned at random, and at the end a subset
//! of assigned images is drawn and settled against the endowment.
//! Three agent families are provided: growth-rate maximization under
//! the mode's natural transform, static exponential utility, and
//! finite-horizon backward induction over known future menus.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::swp::GambleMode;
use crate::transform::TransformSpec;

/// Wealth floor for multiplicative settlement; reaching it sets a flag.
const WEALTH_FLOOR: f64 = 1e-9;
/// Relative tolerance under which two gamble scores count as tied.
const TIE_TOL: f64 = 1e-12;
/// Hard cap on the backward-induction horizon (the outcome tree has
/// 4^horizon leaves).
const HORIZON_CAP: usize = 12;

/// When agent wealth changes: only at settlement (the default), or
/// after every trial as the assigned image lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WealthUpdate {
    SettlementOnly,
    PerTrial,
}

/// Game protocol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CEConfig {
    pub n_images: usize,
    pub images_per_game: usize,
    pub passive_repetitions: usize,
    pub n_trials: usize,
    pub settlement_draws: usize,
    pub mode: GambleMode,
    /// Wealth change per image: a delta in additive mode, a factor in
    /// multiplicative mode.
    pub image_effects: Vec<f64>,
    pub initial_endowment: f64,
    pub seed: u64,
    pub wealth_update: WealthUpdate,
}

impl CEConfig {
    /// Additive game with the standard protocol counts and deltas
    /// evenly spaced over a symmetric range.
    pub fn default_additive() -> Self {
        let n = 18;
        let (lo, hi) = (-428.0, 428.0);
        let step = (hi - lo) / (n - 1) as f64;
        CEConfig {
            n_images: n,
            images_per_game: 9,
            passive_repetitions: 37,
            n_trials: 312,
            settlement_draws: 10,
            mode: GambleMode::Additive,
            image_effects: (0..n).map(|k| lo + k as f64 * step).collect(),
            initial_endowment: 1000.0,
            seed: 0,
            wealth_update: WealthUpdate::SettlementOnly,
        }
    }

    /// Multiplicative game with factors evenly spaced in log, spanning
    /// a symmetric range around 1.
    pub fn default_multiplicative() -> Self {
        let n = 18;
        let (lo, hi) = (0.447f64.ln(), 2.236f64.ln());
        let step = (hi - lo) / (n - 1) as f64;
        CEConfig {
            n_images: n,
            images_per_game: 9,
            passive_repetitions: 37,
            n_trials: 312,
            settlement_draws: 10,
            mode: GambleMode::Multiplicative,
            image_effects: (0..n).map(|k| (lo + k as f64 * step).exp()).collect(),
            initial_endowment: 1000.0,
            seed: 0,
            wealth_update: WealthUpdate::SettlementOnly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_images < 4 {
            return Err(Error::Config(
                "need at least 4 images to form two disjoint gambles".into(),
            ));
        }
        if self.image_effects.len() != self.n_images {
            return Err(Error::Config(format!(
                "image_effects has {} entries but n_images is {}",
                self.image_effects.len(),
                self.n_images
            )));
        }
        if self.images_per_game == 0 || self.images_per_game > self.n_images {
            return Err(Error::Config(
                "images_per_game must be between 1 and n_images".into(),
            ));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.settlement_draws == 0 || self.settlement_draws > self.n_trials {
            return Err(Error::Config(
                "settlement_draws must be between 1 and n_trials".into(),
            ));
        }
        if !self.image_effects.iter().all(|e| e.is_finite()) {
            return Err(Error::Config("image effects must be finite".into()));
        }
        if self.mode == GambleMode::Multiplicative {
            if !self.image_effects.iter().all(|&e| e > 0.0) {
                return Err(Error::Config(
                    "multiplicative factors must be positive".into(),
                ));
            }
            if !(self.initial_endowment > 0.0) {
                return Err(Error::Config(
                    "multiplicative games need a positive endowment".into(),
                ));
            }
        }
        if !self.initial_endowment.is_finite() {
            return Err(Error::Config("initial endowment must be finite".into()));
        }
        Ok(())
    }
}

/// An equiprobable pair of distinct images, stored in sorted order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gamble {
    a: usize,
    b: usize,
}

impl Gamble {
    pub fn new(i: usize, j: usize) -> Result<Self> {
        if i == j {
            return Err(Error::Precondition(
                "a gamble needs two different images".into(),
            ));
        }
        Ok(Gamble { a: i.min(j), b: i.max(j) })
    }

    pub fn images(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    fn key(&self) -> (usize, usize) {
        (self.a, self.b)
    }
}

/// One menu: a pair of gambles offered side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: usize,
    pub left: Gamble,
    pub right: Gamble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Left,
    Right,
}

impl std::fmt::Display for Choice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Choice::Left => "left",
            Choice::Right => "right",
        })
    }
}

/// Decision agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    /// Maximizes the per-trial change of the mode's natural transform
    /// (mean delta in additive games, mean log factor in
    /// multiplicative games).
    Ergodicity,
    /// Maximizes expected exponential utility of next-trial wealth.
    StaticExponential { lambda: f64 },
    /// Maximizes expected terminal utility over the next `horizon`
    /// trials by exact recursion, replanning each trial.
    BackwardInduction { horizon: usize, utility: TransformSpec },
}

impl AgentSpec {
    pub fn name(&self) -> String {
        match self {
            AgentSpec::Ergodicity => "ergodicity".into(),
            AgentSpec::StaticExponential { lambda } => {
                format!("static_exponential(lambda={lambda})")
            }
            AgentSpec::BackwardInduction { horizon, utility } => {
                format!("backward_induction(h={horizon},{})", utility.form_name())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AgentSpec::Ergodicity => Ok(()),
            AgentSpec::StaticExponential { lambda } => {
                if *lambda > 0.0 && lambda.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "static exponential agent needs lambda > 0, got {lambda}"
                    )))
                }
            }
            AgentSpec::BackwardInduction { horizon, .. } => {
                if *horizon == 0 {
                    Err(Error::Config("backward induction needs horizon >= 1".into()))
                } else if *horizon > HORIZON_CAP {
                    Err(Error::Config(format!(
                        "horizon {horizon} exceeds the cap of {HORIZON_CAP}; \
                         the outcome tree would be intractable"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn decide(&self, trials: &[Trial], t: usize, cfg: &CEConfig, wealth: f64) -> Result<Choice> {
        match self {
            AgentSpec::Ergodicity => decide_ergodicity(&trials[t], cfg, wealth),
            AgentSpec::StaticExponential { lambda } => {
                decide_static_exponential(&trials[t], cfg, wealth, *lambda)
            }
            AgentSpec::BackwardInduction { horizon, utility } => {
                let reach = (*horizon).min(trials.len() - t);
                let plan =
                    decide_backward_induction(&trials[t..t + reach], cfg, reach, utility, wealth)?;
                Ok(plan.root_choice)
            }
        }
    }
}

/// Pick the better-scoring side; near-equal scores fall back to the
/// lexicographically smaller image pair, and identical pairs to Left.
fn pick(score_left: f64, score_right: f64, left: &Gamble, right: &Gamble) -> Choice {
    let tol = TIE_TOL * score_left.abs().max(score_right.abs()).max(1.0);
    if (score_left - score_right).abs() <= tol {
        if left.key() <= right.key() {
            Choice::Left
        } else {
            Choice::Right
        }
    } else if score_left > score_right {
        Choice::Left
    } else {
        Choice::Right
    }
}

fn effects(gamble: &Gamble, cfg: &CEConfig) -> (f64, f64) {
    (cfg.image_effects[gamble.a], cfg.image_effects[gamble.b])
}

/// Growth-rate agent: maximize the mean log factor in multiplicative
/// games, the mean delta in additive games. Wealth-free by design.
pub fn decide_ergodicity(trial: &Trial, cfg: &CEConfig, wealth: f64) -> Result<Choice> {
    if cfg.mode == GambleMode::Multiplicative && !(wealth > 0.0) {
        return Err(Error::Precondition(
            "multiplicative games need positive wealth".into(),
        ));
    }
    let score = |g: &Gamble| -> f64 {
        let (e1, e2) = effects(g, cfg);
        match cfg.mode {
            GambleMode::Additive => 0.5 * (e1 + e2),
            GambleMode::Multiplicative => 0.5 * (e1.ln() + e2.ln()),
        }
    };
    Ok(pick(score(&trial.left), score(&trial.right), &trial.left, &trial.right))
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Expected exponential utility agent, u(z) = -exp(-lambda z).
/// Comparison runs in log space so extreme lambda*wealth products
/// cannot overflow.
pub fn decide_static_exponential(
    trial: &Trial,
    cfg: &CEConfig,
    wealth: f64,
    lambda: f64,
) -> Result<Choice> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Precondition(format!(
            "static exponential agent needs lambda > 0, got {lambda}"
        )));
    }
    // Expected utility is -exp(lse - ln 2) with
    // lse = log(exp(-lambda z1) + exp(-lambda z2)); maximizing it
    // means minimizing lse, so score with its negation.
    let score = |g: &Gamble| -> f64 {
        let (e1, e2) = effects(g, cfg);
        let z1 = cfg.mode.apply(wealth, e1);
        let z2 = cfg.mode.apply(wealth, e2);
        -log_sum_exp(-lambda * z1, -lambda * z2)
    };
    Ok(pick(score(&trial.left), score(&trial.right), &trial.left, &trial.right))
}

/// Contingent plan from backward induction: `plan[k]` holds the choice
/// at each of the 2^k outcome histories of depth k, with the root at
/// `plan[0][0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiPlan {
    pub root_choice: Choice,
    pub plan: Vec<Vec<Choice>>,
    pub expected_utility: f64,
}

/// Exact expected-utility recursion over the next `horizon` trials,
/// whose menus are known in advance (outcomes are not). Utility is
/// applied to terminal wealth only.
pub fn decide_backward_induction(
    trials: &[Trial],
    cfg: &CEConfig,
    horizon: usize,
    utility: &TransformSpec,
    wealth: f64,
) -> Result<BiPlan> {
    if horizon == 0 {
        return Err(Error::Precondition(
            "backward induction needs horizon >= 1".into(),
        ));
    }
    if horizon > HORIZON_CAP {
        return Err(Error::Precondition(format!(
            "horizon {horizon} exceeds the cap of {HORIZON_CAP}; \
             the outcome tree would be intractable"
        )));
    }
    if trials.len() < horizon {
        return Err(Error::Precondition(format!(
            "backward induction over {horizon} trials needs that many menus, got {}",
            trials.len()
        )));
    }

    struct Solver<'a> {
        trials: &'a [Trial],
        cfg: &'a CEConfig,
        horizon: usize,
        utility: &'a TransformSpec,
    }

    impl Solver<'_> {
        fn side_value(&self, k: usize, g: &Gamble, w: f64) -> Result<f64> {
            let (e1, e2) = effects(g, self.cfg);
            let v1 = self.value(k + 1, self.cfg.mode.apply(w, e1))?;
            let v2 = self.value(k + 1, self.cfg.mode.apply(w, e2))?;
            Ok(0.5 * (v1 + v2))
        }

        fn value(&self, k: usize, w: f64) -> Result<f64> {
            if k == self.horizon {
                return self.utility.eval(w);
            }
            let t = &self.trials[k];
            let l = self.side_value(k, &t.left, w)?;
            let r = self.side_value(k, &t.right, w)?;
            Ok(match pick(l, r, &t.left, &t.right) {
                Choice::Left => l,
                Choice::Right => r,
            })
        }

        fn record(&self, k: usize, node: usize, w: f64, plan: &mut [Vec<Choice>]) -> Result<()> {
            if k == self.horizon {
                return Ok(());
            }
            let t = &self.trials[k];
            let l = self.side_value(k, &t.left, w)?;
            let r = self.side_value(k, &t.right, w)?;
            let choice = pick(l, r, &t.left, &t.right);
            plan[k][node] = choice;
            let g = match choice {
                Choice::Left => t.left,
                Choice::Right => t.right,
            };
            let (e1, e2) = effects(&g, self.cfg);
            self.record(k + 1, node * 2, self.cfg.mode.apply(w, e1), plan)?;
            self.record(k + 1, node * 2 + 1, self.cfg.mode.apply(w, e2), plan)?;
            Ok(())
        }
    }

    let solver = Solver { trials, cfg, horizon, utility };
    let expected_utility = solver.value(0, wealth)?;
    let mut plan: Vec<Vec<Choice>> =
        (0..horizon).map(|k| vec![Choice::Left; 1 << k]).collect();
    solver.record(0, 0, wealth, &mut plan)?;
    let root_choice = plan[0][0];
    Ok(BiPlan { root_choice, plan, expected_utility })
}

/// Draw the trial menus: four distinct images per trial, split into
/// two disjoint gambles, with left/right position randomized.
pub fn generate_trials(cfg: &CEConfig) -> Result<Vec<Trial>> {
    cfg.validate()?;
    let mut rng = derive_rng(cfg.seed, "ce-trials", 0);
    let mut pool: Vec<usize> = (0..cfg.n_images).collect();
    let mut trials = Vec::with_capacity(cfg.n_trials);
    for trial_id in 0..cfg.n_trials {
        for k in 0..4 {
            let j = rng.gen_range(k..pool.len());
            pool.swap(k, j);
        }
        let g1 = Gamble::new(pool[0], pool[1])?;
        let g2 = Gamble::new(pool[2], pool[3])?;
        let (left, right) = if rng.gen_bool(0.5) { (g1, g2) } else { (g2, g1) };
        trials.push(Trial { trial_id, left, right });
    }
    Ok(trials)
}

/// One agent's trace through a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub name: String,
    pub choices: Vec<Choice>,
    /// Image assigned after each trial (an image of the chosen gamble).
    pub assigned: Vec<usize>,
    /// Wealth after each trial; constant until settlement unless the
    /// game updates wealth per trial.
    pub wealth_after: Vec<f64>,
    /// Trial indices drawn at settlement, in draw order.
    pub settled_trials: Vec<usize>,
    pub terminal_wealth: f64,
    /// True when wealth hit the floor and was clipped.
    pub clipped: bool,
}

/// Full record of one game run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub trials: Vec<Trial>,
    pub agents: Vec<AgentOutcome>,
    /// Fraction of trials on which each agent pair made the same choice.
    pub agreement: Vec<Vec<f64>>,
    /// Image ids shown during the passive phase, in viewing order.
    pub passive_exposures: Vec<usize>,
}

impl GameResult {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "trial_id,agent,choice,assigned,wealth_after")?;
        for (t, trial) in self.trials.iter().enumerate() {
            for agent in &self.agents {
                let choice = match agent.choices[t] {
                    Choice::Left => "left",
                    Choice::Right => "right",
                };
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    trial.trial_id, agent.name, choice, agent.assigned[t], agent.wealth_after[t]
                )?;
            }
        }
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            n_trials: usize,
            passive_exposure_count: usize,
            agents: Vec<&'a str>,
            terminal_wealth: Vec<f64>,
            clipped: Vec<bool>,
            settled_trials: Vec<&'a [usize]>,
            agreement: &'a [Vec<f64>],
        }
        let summary = Summary {
            n_trials: self.trials.len(),
            passive_exposure_count: self.passive_exposures.len(),
            agents: self.agents.iter().map(|a| a.name.as_str()).collect(),
            terminal_wealth: self.agents.iter().map(|a| a.terminal_wealth).collect(),
            clipped: self.agents.iter().map(|a| a.clipped).collect(),
            settled_trials: self.agents.iter().map(|a| a.settled_trials.as_slice()).collect(),
            agreement: &self.agreement,
        };
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Serialize(e.to_string()))
    }
}

fn apply_with_floor(mode: GambleMode, w: f64, effect: f64, clipped: &mut bool) -> f64 {
    let next = mode.apply(w, effect);
    if mode == GambleMode::Multiplicative && next < WEALTH_FLOOR {
        *clipped = true;
        WEALTH_FLOOR
    } else {
        next
    }
}

/// Run the full protocol: passive exposure, the active choice phase,
/// and settlement. Each agent gets its own assignment and settlement
/// randomness, so adding an agent never disturbs the others.
pub fn run_game(cfg: &CEConfig, agents: &[AgentSpec]) -> Result<GameResult> {
    cfg.validate()?;
    if agents.is_empty() {
        return Err(Error::Config("need at least one agent".into()));
    }
    for agent in agents {
        agent.validate()?;
    }
    let trials = generate_trials(cfg)?;

    let mut passive_exposures =
        Vec::with_capacity(cfg.images_per_game * cfg.passive_repetitions);
    for _ in 0..cfg.passive_repetitions {
        for img in 0..cfg.images_per_game {
            passive_exposures.push(img);
        }
    }

    let mut outcomes = Vec::with_capacity(agents.len());
    for (a_idx, agent) in agents.iter().enumerate() {
        let mut assign_rng = derive_rng(cfg.seed, "ce-assign", a_idx as u64);
        let mut wealth = cfg.initial_endowment;
        let mut clipped = false;
        let mut choices = Vec::with_capacity(cfg.n_trials);
        let mut assigned = Vec::with_capacity(cfg.n_trials);
        let mut wealth_after = Vec::with_capacity(cfg.n_trials);

        for t in 0..cfg.n_trials {
            let choice = agent.decide(&trials, t, cfg, wealth)?;
            let gamble = match choice {
                Choice::Left => trials[t].left,
                Choice::Right => trials[t].right,
            };
            let (first, second) = gamble.images();
            let image = if assign_rng.gen_bool(0.5) { first } else { second };
            if cfg.wealth_update == WealthUpdate::PerTrial {
                wealth =
                    apply_with_floor(cfg.mode, wealth, cfg.image_effects[image], &mut clipped);
            }
            choices.push(choice);
            assigned.push(image);
            wealth_after.push(wealth);
        }

        let mut settle_rng = derive_rng(cfg.seed, "ce-settle", a_idx as u64);
        let mut order: Vec<usize> = (0..cfg.n_trials).collect();
        for k in 0..cfg.settlement_draws {
            let j = settle_rng.gen_range(k..order.len());
            order.swap(k, j);
        }
        let settled_trials: Vec<usize> = order[..cfg.settlement_draws].to_vec();
        // Settlement applies the drawn effects to the running wealth:
        // the endowment itself when wealth was frozen during play.
        for &t in &settled_trials {
            wealth =
                apply_with_floor(cfg.mode, wealth, cfg.image_effects[assigned[t]], &mut clipped);
        }

        outcomes.push(AgentOutcome {
            name: agent.name(),
            choices,
            assigned,
            wealth_after,
            settled_trials,
            terminal_wealth: wealth,
            clipped,
        });
    }

    let n = agents.len();
    let mut agreement = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let equal = outcomes[i]
                .choices
                .iter()
                .zip(&outcomes[j].choices)
                .filter(|(a, b)| a == b)
                .count();
            agreement[i][j] = equal as f64 / cfg.n_trials as f64;
        }
    }

    Ok(GameResult { trials, agents: outcomes, agreement, passive_exposures })
}
