//! UCT search over one determinized start state.
//!
//! Each node samples a fixed number of joint actions from the cross product
//! of the per-agent candidate sets. Agents keep decoupled statistics: at a
//! fully expanded node every agent picks its own action by UCT over its
//! marginal visit counts and mean returns, and the picks are composed into
//! the joint action that is followed (or created, if that combination has
//! not been tried yet).

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{AgentAction, JointAction, WorldError, WorldModel, WorldState};

#[derive(Debug, Error)]
pub enum MctsError {
    #[error("root state is terminal; the tree cannot be searched")]
    DegenerateTree,
    #[error("no explored action at the root")]
    NoActionAvailable,
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    /// UCT exploration constant.
    pub c_p: f64,
    pub gamma: f64,
    pub rollout_depth: u32,
    /// Joint actions sampled per node.
    pub actions_per_node: usize,
    pub ax_set: Vec<f64>,
    pub ay_set: Vec<f64>,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            c_p: 10.0,
            gamma: 0.9,
            rollout_depth: 4,
            actions_per_node: 12,
            ax_set: vec![-2.0, 0.0, 2.0],
            ay_set: vec![-1.0, 0.0, 1.0],
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<(), MctsError> {
        if !(self.c_p >= 0.0) {
            return Err(MctsError::Config(format!("c_p must be >= 0, got {}", self.c_p)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(MctsError::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.actions_per_node == 0 {
            return Err(MctsError::Config("actions_per_node must be >= 1".into()));
        }
        if self.ax_set.is_empty() || self.ay_set.is_empty() {
            return Err(MctsError::Config("candidate acceleration sets must be non-empty".into()));
        }
        Ok(())
    }

    pub fn action_set(&self) -> ActionSet {
        ActionSet::grid(&self.ax_set, &self.ay_set)
    }
}

/// Discrete per-agent candidate actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    actions: Vec<AgentAction>,
}

impl ActionSet {
    /// Cross product, `ax` major.
    pub fn grid(ax_set: &[f64], ay_set: &[f64]) -> Self {
        let actions = ax_set
            .iter()
            .flat_map(|&ax| ay_set.iter().map(move |&ay| AgentAction::new(ax, ay)))
            .collect();
        Self { actions }
    }

    pub fn from_actions(actions: Vec<AgentAction>) -> Self {
        Self { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> AgentAction {
        self.actions[index]
    }

    pub fn actions(&self) -> &[AgentAction] {
        &self.actions
    }

    /// Index of the first action equal to `action`.
    pub fn index_of(&self, action: &AgentAction) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }

    pub fn joint(&self, key: &[u16]) -> JointAction {
        JointAction(key.iter().map(|&i| self.actions[i as usize]).collect())
    }
}

/// `Q̄ + 2·C_p·sqrt(ln N(n) / N(n,a))`; unvisited actions rank above everything.
pub fn uct_value(mean: f64, parent_visits: u64, visits: u64, c_p: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    mean + 2.0 * c_p * ((parent_visits as f64).ln() / visits as f64).sqrt()
}

/// Visit count and running mean of the returns backed up through an action.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionStats {
    pub visits: u64,
    pub mean: f64,
}

impl ActionStats {
    pub fn record(&mut self, value: f64) {
        self.visits += 1;
        self.mean += (value - self.mean) / self.visits as f64;
    }
}

pub type NodeId = usize;

/// Per-agent action indices into the [`ActionSet`].
pub type JointKey = Vec<u16>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub key: JointKey,
    pub child: NodeId,
    /// Immediate per-agent rewards of the transition.
    pub rewards: Vec<f64>,
    pub visits: u64,
    /// Per-agent mean return through this joint action.
    pub means: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub state: WorldState,
    pub terminal: bool,
    pub visits: u64,
    /// `agent_stats[agent][action_index]`: decoupled marginal statistics.
    pub agent_stats: Vec<Vec<ActionStats>>,
    pub edges: Vec<Edge>,
    untried: Vec<JointKey>,
    depth: u32,
}

impl TreeNode {
    fn new(state: WorldState, terminal: bool, agents: usize, actions: usize, depth: u32) -> Self {
        Self {
            state,
            terminal,
            visits: 0,
            agent_stats: vec![vec![ActionStats::default(); actions]; agents],
            edges: Vec::new(),
            untried: Vec::new(),
            depth,
        }
    }

    pub fn untried(&self) -> &[JointKey] {
        &self.untried
    }

    pub fn is_fully_expanded(&self) -> bool {
        self.untried.is_empty()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn edge(&self, key: &[u16]) -> Option<&Edge> {
        self.edges.iter().find(|e| e.key == key)
    }

    /// Per-agent UCT of action `action` at this node.
    pub fn uct_value(&self, agent: usize, action: usize, c_p: f64) -> f64 {
        let s = self.agent_stats[agent][action];
        uct_value(s.mean, self.visits, s.visits, c_p)
    }
}

/// One edge of a descent path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub node: NodeId,
    pub edge: usize,
}

/// Result of one selection/expansion descent.
#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    /// From the root down to the parent of `leaf`.
    pub path: Vec<PathStep>,
    pub leaf: NodeId,
}

/// UCT tree rooted at one sampled start state.
#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<TreeNode>,
    pub start_state_id: usize,
    agents: usize,
    actions: ActionSet,
    actions_per_node: usize,
}

impl SearchTree {
    pub fn new<R: Rng + ?Sized>(
        root: WorldState,
        start_state_id: usize,
        model: &WorldModel,
        cfg: &MctsConfig,
        rng: &mut R,
    ) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            start_state_id,
            agents: root.agent_count(),
            actions: cfg.action_set(),
            actions_per_node: cfg.actions_per_node,
        };
        let terminal = model.is_terminal(&root);
        tree.push_node(root, terminal, 0, rng);
        tree
    }

    fn push_node<R: Rng + ?Sized>(&mut self, state: WorldState, terminal: bool, depth: u32, rng: &mut R) -> NodeId {
        let mut node = TreeNode::new(state, terminal, self.agents, self.actions.len(), depth);
        if !terminal {
            node.untried = self.sample_joint_keys(rng);
        }
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// `actions_per_node` distinct joint actions, uniformly without replacement.
    fn sample_joint_keys<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<JointKey> {
        let base = self.actions.len();
        let total = (base as u128).pow(self.agents as u32);
        let total = usize::try_from(total).unwrap_or(usize::MAX);
        let amount = self.actions_per_node.min(total);
        index::sample(rng, total, amount)
            .into_iter()
            .map(|mut code| {
                let mut key = Vec::with_capacity(self.agents);
                for _ in 0..self.agents {
                    key.push((code % base) as u16);
                    code /= base;
                }
                key
            })
            .collect()
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn action_set(&self) -> &ActionSet {
        &self.actions
    }

    pub fn agent_count(&self) -> usize {
        self.agents
    }

    fn attach<R: Rng + ?Sized>(
        &mut self,
        parent: NodeId,
        key: JointKey,
        model: &WorldModel,
        rng: &mut R,
    ) -> Result<(usize, NodeId), MctsError> {
        let joint = self.actions.joint(&key);
        let mut rewards = vec![0.0; self.agents];
        let next = model.transition(&self.nodes[parent].state, &joint, &mut rewards)?;
        let terminal = model.is_terminal(&next);
        let depth = self.nodes[parent].depth + 1;
        let child = self.push_node(next, terminal, depth, rng);
        let edges = &mut self.nodes[parent].edges;
        edges.push(Edge {
            key,
            child,
            rewards,
            visits: 0,
            means: vec![0.0; self.agents],
        });
        Ok((edges.len() - 1, child))
    }

    /// Per-agent UCT argmax, ties to the lowest action index.
    fn compose_uct_key(&self, id: NodeId, c_p: f64) -> JointKey {
        let node = &self.nodes[id];
        (0..self.agents)
            .map(|agent| {
                let mut best: Option<(usize, f64)> = None;
                for (a, s) in node.agent_stats[agent].iter().enumerate() {
                    if s.visits == 0 {
                        continue;
                    }
                    let value = node.uct_value(agent, a, c_p);
                    if best.is_none_or(|(_, b)| value > b) {
                        best = Some((a, value));
                    }
                }
                best.map(|(a, _)| a as u16).unwrap_or(0)
            })
            .collect()
    }

    /// Descends by per-agent UCT until a node with untried joint actions (or
    /// an untried composition) is found, then expands it by one child.
    pub fn select_and_expand<R: Rng + ?Sized>(
        &mut self,
        model: &WorldModel,
        cfg: &MctsConfig,
        rng: &mut R,
    ) -> Result<Descent, MctsError> {
        if self.nodes[0].terminal {
            return Err(MctsError::DegenerateTree);
        }
        let mut path = Vec::new();
        let mut current = 0;
        loop {
            if self.nodes[current].terminal {
                return Ok(Descent { path, leaf: current });
            }
            let untried = &mut self.nodes[current].untried;
            if !untried.is_empty() {
                let pick = rng.random_range(0..untried.len());
                let key = untried.swap_remove(pick);
                let (edge, child) = self.attach(current, key, model, rng)?;
                path.push(PathStep { node: current, edge });
                return Ok(Descent { path, leaf: child });
            }
            let key = self.compose_uct_key(current, cfg.c_p);
            match self.nodes[current].edges.iter().position(|e| e.key == key) {
                Some(edge) => {
                    path.push(PathStep { node: current, edge });
                    current = self.nodes[current].edges[edge].child;
                }
                None => {
                    let (edge, child) = self.attach(current, key, model, rng)?;
                    path.push(PathStep { node: current, edge });
                    return Ok(Descent { path, leaf: child });
                }
            }
        }
    }

    /// Propagates a leaf return up `path`, re-discounting it at each depth.
    pub fn backup(&mut self, path: &[PathStep], leaf_return: &[f64], gamma: f64) {
        let mut to_go = leaf_return.to_vec();
        for step in path.iter().rev() {
            let node = &mut self.nodes[step.node];
            let edge = &mut node.edges[step.edge];
            for (g, r) in to_go.iter_mut().zip(&edge.rewards) {
                *g = r + gamma * *g;
            }
            edge.visits += 1;
            for (mean, g) in edge.means.iter_mut().zip(&to_go) {
                *mean += (g - *mean) / edge.visits as f64;
            }
            for (agent, g) in to_go.iter().enumerate() {
                let a = edge.key[agent] as usize;
                node.agent_stats[agent][a].record(*g);
            }
            node.visits += 1;
        }
    }

    /// One select/expand → rollout → backup cycle.
    pub fn run_iteration<R: Rng + ?Sized>(
        &mut self,
        model: &WorldModel,
        cfg: &MctsConfig,
        rng: &mut R,
    ) -> Result<(), MctsError> {
        let descent = self.select_and_expand(model, cfg, rng)?;
        let leaf_state = &self.nodes[descent.leaf].state;
        let g = rollout(leaf_state, model, cfg, &self.actions, rng)?;
        self.backup(&descent.path, &g, cfg.gamma);
        Ok(())
    }

    /// Per agent, the root action with the highest mean return; ties go to
    /// more visits, then the lower action index.
    pub fn baseline_best_action(&self) -> Result<JointAction, MctsError> {
        let keys = self.baseline_best_indices()?;
        Ok(JointAction(keys.into_iter().map(|i| self.actions.get(i)).collect()))
    }

    pub fn baseline_best_indices(&self) -> Result<Vec<usize>, MctsError> {
        let root = self.root();
        root.agent_stats
            .iter()
            .map(|stats| {
                stats
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.visits > 0)
                    .fold(None::<(usize, ActionStats)>, |best, (i, s)| match best {
                        Some((_, b)) if (s.mean, s.visits) <= (b.mean, b.visits) => best,
                        _ => Some((i, *s)),
                    })
                    .map(|(i, _)| i)
                    .ok_or(MctsError::NoActionAvailable)
            })
            .collect()
    }

    /// Structured export of every node for debugging and golden tests.
    pub fn dump(&self) -> TreeDump {
        TreeDump {
            start_state_id: self.start_state_id,
            actions: self.actions.actions().to_vec(),
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| NodeDump {
                    id,
                    depth: n.depth,
                    time_index: n.state.time_index,
                    status: n.state.status,
                    terminal: n.terminal,
                    visits: n.visits,
                    agent_stats: n
                        .agent_stats
                        .iter()
                        .map(|stats| {
                            stats
                                .iter()
                                .enumerate()
                                .filter(|(_, s)| s.visits > 0)
                                .map(|(action, s)| AgentStatDump {
                                    action,
                                    visits: s.visits,
                                    mean: s.mean,
                                })
                                .collect()
                        })
                        .collect(),
                    edges: n.edges.clone(),
                })
                .collect(),
        }
    }
}

/// Uniformly random rollout from `start`, discounted per agent.
pub fn rollout<R: Rng + ?Sized>(
    start: &WorldState,
    model: &WorldModel,
    cfg: &MctsConfig,
    actions: &ActionSet,
    rng: &mut R,
) -> Result<Vec<f64>, MctsError> {
    let agents = start.agent_count();
    let mut total = vec![0.0; agents];
    if model.is_terminal(start) {
        return Ok(total);
    }
    let mut rewards = vec![0.0; agents];
    let mut joint = JointAction(vec![AgentAction::default(); agents]);
    let mut state = start.clone();
    let mut discount = 1.0;
    for _ in 0..cfg.rollout_depth {
        for slot in joint.0.iter_mut() {
            *slot = actions.get(rng.random_range(0..actions.len()));
        }
        state = model.transition(&state, &joint, &mut rewards)?;
        for (g, r) in total.iter_mut().zip(&rewards) {
            *g += discount * r;
        }
        discount *= cfg.gamma;
        if model.is_terminal(&state) {
            break;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStatDump {
    pub action: usize,
    pub visits: u64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDump {
    pub id: NodeId,
    pub depth: u32,
    pub time_index: u32,
    pub status: crate::world::Status,
    pub terminal: bool,
    pub visits: u64,
    pub agent_stats: Vec<Vec<AgentStatDump>>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDump {
    pub start_state_id: usize,
    pub actions: Vec<AgentAction>,
    pub nodes: Vec<NodeDump>,
}
