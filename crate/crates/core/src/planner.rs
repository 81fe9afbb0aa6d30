//! Ensemble planning over sampled start states and final action selection.
//!
//! [`plan`] interleaves start-state widening with tree iterations: on every
//! pass it either samples a new start state (and gives its fresh tree that
//! pass) or picks an existing feasible one uniformly, then runs exactly one
//! search iteration on that tree. Once the budget is spent, one of three
//! policies turns the ensemble into a joint action.
//!
//! Randomness is split into independent streams derived from one seed drawn
//! from the caller's generator: stream 0 drives start-state sampling and
//! selection, stream `k + 1` drives tree `k`. The first tree therefore
//! evolves identically whether or not other trees exist.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{
    select_start_state, should_expand, BeliefError, GaussianBelief, StartStateSampler, WideningConfig,
};
use crate::mcts::{MctsConfig, MctsError, SearchTree};
use crate::risk::{ccvar, density, kr_value, ActionCandidate, KernelRegression, RiskConfig, RiskError};
use crate::world::{AgentAction, JointAction, RewardWeights, Scenario, Status, WorldModel, WorldState};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Search(#[from] MctsError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("invalid planner configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionPolicy {
    Baseline,
    Krlcb,
    Cvar,
}

impl SelectionPolicy {
    pub const ALL: [SelectionPolicy; 3] = [Self::Baseline, Self::Krlcb, Self::Cvar];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Krlcb => "krlcb",
            Self::Cvar => "cvar",
        }
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Self::Baseline),
            "krlcb" => Ok(Self::Krlcb),
            "cvar" => Ok(Self::Cvar),
            other => Err(format!("unknown policy `{other}` (expected baseline, krlcb or cvar)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Total search iterations per planning step, across all trees.
    pub iterations: u64,
    pub policy: SelectionPolicy,
    pub default_action: AgentAction,
    pub widening: WideningConfig,
    pub mcts: MctsConfig,
    pub risk: RiskConfig,
    pub reward: RewardWeights,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            policy: SelectionPolicy::Krlcb,
            default_action: AgentAction::default(),
            widening: WideningConfig::default(),
            mcts: MctsConfig::default(),
            risk: RiskConfig::default(),
            reward: RewardWeights::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.iterations < 1 {
            return Err(PlanError::Config("iterations must be >= 1".into()));
        }
        let w = &self.widening;
        if !(w.c_pw >= 0.0 && (0.0..1.0).contains(&w.alpha_pw) && w.c_step >= 0.0 && w.c_max >= 0.0) {
            return Err(PlanError::Config(format!("invalid widening constants {w:?}")));
        }
        if w.l_step_size < 1 || w.max_attempts < 1 {
            return Err(PlanError::Config("l_step_size and max_attempts must be >= 1".into()));
        }
        let r = &self.risk;
        if !(r.gamma_k >= 0.0 && r.c_lcb >= 0.0 && r.w_min >= 0.0 && (0.0..=1.0).contains(&r.c_m)) {
            return Err(PlanError::Config(format!("invalid risk constants {r:?}")));
        }
        if !(r.alpha > 0.0 && r.alpha < 1.0) {
            return Err(PlanError::Config(format!("alpha must lie in (0, 1), got {}", r.alpha)));
        }
        self.mcts.validate()?;
        Ok(())
    }
}

/// A sampled start state plus the aggregate statistics refreshed after each
/// iteration on its tree.
#[derive(Debug, Clone, PartialEq)]
pub struct StartState {
    pub state: WorldState,
    /// Covariance scale of the draw (1 for the belief mean).
    pub scale: f64,
    /// Iterations spent on this start state's tree.
    pub visits: u64,
    /// Per agent, the best mean root return of the tree.
    pub root_value: Vec<f64>,
}

impl StartState {
    pub fn is_feasible(&self) -> bool {
        self.state.status == Status::Ok
    }

    fn refresh(&mut self, tree: &SearchTree) {
        self.visits += 1;
        self.root_value = tree
            .root()
            .agent_stats
            .iter()
            .map(|stats| {
                stats
                    .iter()
                    .filter(|s| s.visits > 0)
                    .map(|s| s.mean)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
}

impl std::borrow::Borrow<WorldState> for StartState {
    fn borrow(&self) -> &WorldState {
        &self.state
    }
}

/// One tree per start state; tree `i` is rooted at start state `i`.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub start_states: Vec<StartState>,
    pub trees: Vec<SearchTree>,
    pub agents: usize,
}

impl Ensemble {
    pub fn new(agents: usize) -> Self {
        Self {
            start_states: Vec::new(),
            trees: Vec::new(),
            agents,
        }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn push(&mut self, start: StartState, tree: SearchTree) {
        self.start_states.push(start);
        self.trees.push(tree);
    }

    /// Total iterations across all trees.
    pub fn total_visits(&self) -> u64 {
        self.start_states.iter().map(|s| s.visits).sum()
    }
}

/// The chosen joint action. `fallback[i]` is set when agent `i` received the
/// default action because no usable estimate existed.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub action: JointAction,
    pub fallback: Vec<bool>,
}

impl Selection {
    pub fn default_for(agents: usize, default_action: AgentAction) -> Self {
        Self {
            action: JointAction::uniform(default_action, agents),
            fallback: vec![true; agents],
        }
    }

    pub fn any_fallback(&self) -> bool {
        self.fallback.iter().any(|&f| f)
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub selection: Selection,
    pub ensemble: Ensemble,
    /// Iterations that ran a full search cycle.
    pub iterations_run: u64,
    /// Failed start-state draws during this step.
    pub sampling_attempts: u32,
}

impl PlanOutcome {
    pub fn action(&self) -> &JointAction {
        &self.selection.action
    }
}

fn tree_rng(base_seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(tree as u64 + 1);
    rng
}

/// Builds the ensemble under the configured budget and selects the joint
/// action with the configured policy.
///
/// The baseline policy plans like a single-state planner: it keeps one tree
/// rooted at the belief mean and spends the whole budget on it.
pub fn plan<R: RngCore + ?Sized>(
    belief: &GaussianBelief,
    scenario: &Scenario,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<PlanOutcome, PlanError> {
    cfg.validate()?;
    let model = WorldModel::new(scenario, cfg.reward);
    let agents = scenario.agents.len();
    let base_seed = rng.next_u64();
    let mut control = ChaCha8Rng::seed_from_u64(base_seed);
    let mut sampler = StartStateSampler::new();
    let mut ensemble = Ensemble::new(agents);
    let mut tree_rngs: Vec<ChaCha8Rng> = Vec::new();

    let add_tree = |ensemble: &mut Ensemble, tree_rngs: &mut Vec<ChaCha8Rng>, state: WorldState, scale: f64| {
        let id = ensemble.len();
        let mut trng = tree_rng(base_seed, id);
        let tree = SearchTree::new(state.clone(), id, &model, &cfg.mcts, &mut trng);
        tree_rngs.push(trng);
        ensemble.push(
            StartState {
                state,
                scale,
                visits: 0,
                root_value: vec![f64::NEG_INFINITY; agents],
            },
            tree,
        );
    };

    // Initial start state: the belief mean, or the first feasible draw.
    let mean = belief.mean_state(scenario)?;
    if mean.status == Status::Ok {
        add_tree(&mut ensemble, &mut tree_rngs, mean, 1.0);
    } else {
        match sampler.sample(belief, scenario, &cfg.widening, &mut control) {
            Ok(s) => add_tree(&mut ensemble, &mut tree_rngs, s.state, s.scale),
            Err(BeliefError::SamplingExhausted { .. }) => {
                return Ok(PlanOutcome {
                    selection: Selection::default_for(agents, cfg.default_action),
                    ensemble,
                    iterations_run: 0,
                    sampling_attempts: sampler.attempts(),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }

    let widen = cfg.policy != SelectionPolicy::Baseline;
    let mut iterations_run = 0;
    for iteration in 1..=cfg.iterations {
        let mut index = None;
        if widen && should_expand(ensemble.len(), iteration, &cfg.widening) {
            match sampler.sample(belief, scenario, &cfg.widening, &mut control) {
                Ok(s) => {
                    add_tree(&mut ensemble, &mut tree_rngs, s.state, s.scale);
                    index = Some(ensemble.len() - 1);
                }
                Err(BeliefError::SamplingExhausted { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        let index = match index {
            Some(i) => i,
            None if ensemble.len() == 1 => 0,
            None => select_start_state(&ensemble.start_states, &mut control)?,
        };
        match ensemble.trees[index].run_iteration(&model, &cfg.mcts, &mut tree_rngs[index]) {
            Ok(()) => {
                iterations_run += 1;
                let tree = &ensemble.trees[index];
                ensemble.start_states[index].refresh(tree);
            }
            Err(MctsError::DegenerateTree) => {}
            Err(e) => return Err(e.into()),
        }
    }

    let selection = select_final(&ensemble, cfg)?;
    Ok(PlanOutcome {
        selection,
        ensemble,
        iterations_run,
        sampling_attempts: sampler.attempts(),
    })
}

/// Dispatches to the configured final-selection policy.
pub fn select_final(ensemble: &Ensemble, cfg: &PlannerConfig) -> Result<Selection, PlanError> {
    match cfg.policy {
        SelectionPolicy::Baseline => Ok(final_select_baseline(ensemble, cfg.default_action)),
        SelectionPolicy::Krlcb => final_select_krlcb(ensemble, &cfg.risk, cfg.default_action),
        SelectionPolicy::Cvar => final_select_cvar(ensemble, &cfg.risk, cfg.default_action),
    }
}

/// Best-mean root action of the first start state's tree only.
pub fn final_select_baseline(ensemble: &Ensemble, default_action: AgentAction) -> Selection {
    let usable = ensemble
        .start_states
        .first()
        .zip(ensemble.trees.first())
        .filter(|(s, _)| s.is_feasible());
    match usable.map(|(_, tree)| tree.baseline_best_action()) {
        Some(Ok(action)) => Selection {
            fallback: vec![false; action.len()],
            action,
        },
        _ => Selection::default_for(ensemble.agents, default_action),
    }
}

/// Root actions of every feasible start state's tree with more than
/// `visit_threshold` visits for `agent`. The same action may appear once per
/// start state.
pub fn get_action_candidates(ensemble: &Ensemble, agent: usize, visit_threshold: u64) -> Vec<ActionCandidate> {
    let mut candidates = Vec::new();
    for (source, (start, tree)) in ensemble.start_states.iter().zip(&ensemble.trees).enumerate() {
        if !start.is_feasible() {
            continue;
        }
        let actions = tree.action_set();
        for (index, stats) in tree.root().agent_stats[agent].iter().enumerate() {
            if stats.visits > visit_threshold {
                candidates.push(ActionCandidate {
                    action: actions.get(index),
                    action_index: index,
                    source,
                    q_value: stats.mean,
                    visit_count: stats.visits,
                });
            }
        }
    }
    candidates
}

/// Scored candidate used for argmax with deterministic tie-breaking.
#[derive(Debug, Clone, Copy)]
struct Scored {
    candidate: ActionCandidate,
    score: f64,
    density: f64,
}

/// Highest score, then highest density, then lowest action index.
fn argmax(scored: impl IntoIterator<Item = Scored>) -> Option<Scored> {
    scored.into_iter().fold(None, |best, s| match best {
        None => Some(s),
        Some(b) => {
            let better = s.score > b.score
                || (s.score == b.score && s.density > b.density)
                || (s.score == b.score
                    && s.density == b.density
                    && s.candidate.action_index < b.candidate.action_index);
            if better {
                Some(s)
            } else {
                Some(b)
            }
        }
    })
}

fn per_agent(
    ensemble: &Ensemble,
    default_action: AgentAction,
    mut pick: impl FnMut(usize) -> Result<Option<AgentAction>, PlanError>,
) -> Result<Selection, PlanError> {
    let mut selection = Selection::default_for(ensemble.agents, default_action);
    for agent in 0..ensemble.agents {
        if let Some(action) = pick(agent)? {
            selection.action.0[agent] = action;
            selection.fallback[agent] = false;
        }
    }
    Ok(selection)
}

/// Kernel-regression lower confidence bound over the pooled candidates.
pub fn final_select_krlcb(
    ensemble: &Ensemble,
    cfg: &RiskConfig,
    default_action: AgentAction,
) -> Result<Selection, PlanError> {
    per_agent(ensemble, default_action, |agent| {
        let candidates = get_action_candidates(ensemble, agent, cfg.visit_threshold);
        if candidates.is_empty() {
            return Ok(None);
        }
        let fit = KernelRegression::fit(&candidates, cfg.gamma_k)?;
        let scored = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(Scored {
                    candidate: *c,
                    score: fit.krlcb(i, cfg.c_lcb)?,
                    density: fit.densities[i],
                })
            })
            .collect::<Result<Vec<_>, RiskError>>()?;
        Ok(argmax(scored).map(|s| s.candidate.action))
    })
}

/// Per-action return particles: one kernel-regression value per start state
/// whose local density around the action reaches `w_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnParticles {
    pub action_index: usize,
    pub particles: Vec<f64>,
    /// Start states that contributed at least one candidate.
    pub contributing_start_states: usize,
}

impl ReturnParticles {
    /// Enough particles relative to the contributing start states.
    pub fn is_meaningful(&self, c_m: f64) -> bool {
        !self.particles.is_empty() && self.particles.len() as f64 >= c_m * self.contributing_start_states as f64
    }
}

/// Builds the particle set of every distinct candidate action, ordered by
/// action index.
pub fn return_particles(candidates: &[ActionCandidate], cfg: &RiskConfig) -> Result<Vec<ReturnParticles>, RiskError> {
    let mut sources: Vec<usize> = candidates.iter().map(|c| c.source).collect();
    sources.sort_unstable();
    sources.dedup();
    let per_source: Vec<Vec<ActionCandidate>> = sources
        .iter()
        .map(|&s| candidates.iter().filter(|c| c.source == s).copied().collect())
        .collect();

    let mut actions: Vec<(usize, AgentAction)> = candidates.iter().map(|c| (c.action_index, c.action)).collect();
    actions.sort_by_key(|(i, _)| *i);
    actions.dedup_by_key(|(i, _)| *i);

    actions
        .into_iter()
        .map(|(action_index, action)| {
            let mut particles = Vec::new();
            for local in &per_source {
                let w = density(&action, local, cfg.gamma_k);
                if w >= cfg.w_min && w > 0.0 {
                    particles.push(kr_value(&action, local, cfg.gamma_k)?);
                }
            }
            Ok(ReturnParticles {
                action_index,
                particles,
                contributing_start_states: per_source.len(),
            })
        })
        .collect()
}

/// Complementary CVaR of each action's return particles; actions whose
/// particle set is too sparse are never chosen.
pub fn final_select_cvar(
    ensemble: &Ensemble,
    cfg: &RiskConfig,
    default_action: AgentAction,
) -> Result<Selection, PlanError> {
    per_agent(ensemble, default_action, |agent| {
        let candidates = get_action_candidates(ensemble, agent, cfg.visit_threshold);
        if candidates.is_empty() {
            return Ok(None);
        }
        let sets = return_particles(&candidates, cfg)?;
        let mut scored = Vec::new();
        for set in &sets {
            if !set.is_meaningful(cfg.c_m) {
                continue;
            }
            let candidate = *candidates
                .iter()
                .find(|c| c.action_index == set.action_index)
                .expect("particle sets are built from the candidates");
            scored.push(Scored {
                candidate,
                score: ccvar(&set.particles, cfg.alpha)?,
                density: density(&candidate.action, &candidates, cfg.gamma_k),
            });
        }
        Ok(argmax(scored).map(|s| s.candidate.action))
    })
}
