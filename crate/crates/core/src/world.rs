//! Deterministic multi-agent driving world.
//!
//! Vehicles are point masses with a rectangular footprint. Each step applies
//! a constant acceleration per agent for `dt` seconds and then recomputes the
//! state status from the collision and validity predicates. Obstacles are
//! static. All functions here are pure.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rects_collide, wrap_angle, OrientedRect};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("cannot step a state with status {0:?}")]
    NotSteppable(Status),
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("joint action has {got} entries, state has {expected} agents")]
    AgentCountMismatch { expected: usize, got: usize },
    #[error("unknown agent {0}")]
    UnknownAgent(usize),
    #[error("failed to read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("scenario {id}: {reason}")]
    InvalidScenario { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Longitudinal position (m).
    pub x: f64,
    /// Lateral position (m), measured from the right road edge.
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    /// Yaw angle in `[-π, π)`.
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl VehicleState {
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::new(self.x, self.y, self.length, self.width, self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub length: f64,
    pub width: f64,
    #[serde(default)]
    pub heading: f64,
}

impl Obstacle {
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::new(self.x, self.y, self.length, self.width, self.heading)
    }
}

/// Road geometry and speed limit. Part of every [`WorldState`] because the
/// observed lane width is itself uncertain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub lane_count: u32,
    pub lane_width: f64,
    pub length: f64,
    pub v_max: f64,
}

impl Road {
    pub fn lane_center(&self, lane: u32) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }

    pub fn total_width(&self) -> f64 {
        self.lane_count as f64 * self.lane_width
    }
}

/// Per-agent driving objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentGoal {
    pub desired_velocity: f64,
    pub desired_lane: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub initial: VehicleState,
    pub desired_velocity: f64,
    pub desired_lane: u32,
}

fn default_v_max() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub lane_count: u32,
    pub lane_width: f64,
    pub road_length: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub episode_horizon: u32,
    pub dt: f64,
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, WorldError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|source| WorldError::Parse {
            path: origin.to_string(),
            source,
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn road(&self) -> Road {
        Road {
            lane_count: self.lane_count,
            lane_width: self.lane_width,
            length: self.road_length,
            v_max: self.v_max,
        }
    }

    pub fn goals(&self) -> Vec<AgentGoal> {
        self.agents
            .iter()
            .map(|a| AgentGoal {
                desired_velocity: a.desired_velocity,
                desired_lane: a.desired_lane,
            })
            .collect()
    }

    pub fn initial_state(&self) -> WorldState {
        WorldState::new(
            self.agents.iter().map(|a| a.initial).collect(),
            self.obstacles.clone(),
            self.road(),
            0,
        )
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let fail = |reason: String| {
            Err(WorldError::InvalidScenario {
                id: self.id.clone(),
                reason,
            })
        };
        if self.lane_count < 1 {
            return fail("lane_count must be at least 1".into());
        }
        if !(self.lane_width > 0.0 && self.road_length > 0.0 && self.v_max > 0.0) {
            return fail("lane_width, road_length and v_max must be positive".into());
        }
        if !(self.dt > 0.0) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if self.agents.is_empty() {
            return fail("at least one agent is required".into());
        }
        for (i, agent) in self.agents.iter().enumerate() {
            if agent.desired_lane >= self.lane_count {
                return fail(format!(
                    "agent {i}: desired_lane {} >= lane_count {}",
                    agent.desired_lane, self.lane_count
                ));
            }
            let v = &agent.initial;
            if !(v.length > 0.0 && v.width > 0.0) {
                return fail(format!("agent {i}: length and width must be positive"));
            }
            if !(-std::f64::consts::PI..std::f64::consts::PI).contains(&v.heading) {
                return fail(format!("agent {i}: heading {} outside [-pi, pi)", v.heading));
            }
        }
        for (j, o) in self.obstacles.iter().enumerate() {
            if !(o.length > 0.0 && o.width > 0.0) {
                return fail(format!("obstacle {j}: length and width must be positive"));
            }
        }
        let initial = self.initial_state();
        match initial.status {
            Status::Ok => Ok(()),
            Status::Collision => fail("initial state is in collision".into()),
            Status::Invalid => fail("initial state violates road or velocity bounds".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Collision,
    Invalid,
}

/// Joint deterministic state of all agent vehicles and obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub vehicles: Vec<VehicleState>,
    pub obstacles: Arc<[Obstacle]>,
    pub road: Road,
    pub time_index: u32,
    pub status: Status,
}

impl WorldState {
    /// Builds a state and derives its status.
    pub fn new(
        vehicles: Vec<VehicleState>,
        obstacles: impl Into<Arc<[Obstacle]>>,
        road: Road,
        time_index: u32,
    ) -> Self {
        let mut state = Self {
            vehicles,
            obstacles: obstacles.into(),
            road,
            time_index,
            status: Status::Ok,
        };
        state.status = state.derive_status();
        state
    }

    pub fn agent_count(&self) -> usize {
        self.vehicles.len()
    }

    /// Collision takes precedence over invalidity when both hold.
    pub fn derive_status(&self) -> Status {
        if collision_check(self) {
            Status::Collision
        } else if !validity_check(self) {
            Status::Invalid
        } else {
            Status::Ok
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentAction {
    pub ax: f64,
    pub ay: f64,
}

impl AgentAction {
    pub const fn new(ax: f64, ay: f64) -> Self {
        Self { ax, ay }
    }

    pub fn squared_norm(&self) -> f64 {
        self.ax * self.ax + self.ay * self.ay
    }

    pub fn squared_distance(&self, other: &AgentAction) -> f64 {
        let (dx, dy) = (self.ax - other.ax, self.ay - other.ay);
        dx * dx + dy * dy
    }
}

/// One action per agent, indexed by agent id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JointAction(pub Vec<AgentAction>);

impl JointAction {
    pub fn uniform(action: AgentAction, agents: usize) -> Self {
        Self(vec![action; agents])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for JointAction {
    type Output = AgentAction;
    fn index(&self, agent: usize) -> &AgentAction {
        &self.0[agent]
    }
}

/// Constant-acceleration point-mass update for every agent.
pub fn step(state: &WorldState, action: &JointAction, dt: f64) -> Result<WorldState, WorldError> {
    if state.status != Status::Ok {
        return Err(WorldError::NotSteppable(state.status));
    }
    if !(dt > 0.0) {
        return Err(WorldError::NonPositiveDt(dt));
    }
    if action.len() != state.agent_count() {
        return Err(WorldError::AgentCountMismatch {
            expected: state.agent_count(),
            got: action.len(),
        });
    }
    let half_dt2 = 0.5 * dt * dt;
    let vehicles = state
        .vehicles
        .iter()
        .zip(&action.0)
        .map(|(v, a)| {
            let vx = v.vx + a.ax * dt;
            let vy = v.vy + a.ay * dt;
            let heading = if vx == 0.0 && vy == 0.0 {
                v.heading
            } else {
                wrap_angle(vy.atan2(vx))
            };
            VehicleState {
                x: v.x + v.vx * dt + a.ax * half_dt2,
                y: v.y + v.vy * dt + a.ay * half_dt2,
                vx,
                vy,
                heading,
                ..*v
            }
        })
        .collect();
    Ok(WorldState::new(
        vehicles,
        state.obstacles.clone(),
        state.road,
        state.time_index + 1,
    ))
}

/// True iff any vehicle pair or vehicle–obstacle pair overlaps.
pub fn collision_check(state: &WorldState) -> bool {
    let rects: Vec<OrientedRect> = state.vehicles.iter().map(VehicleState::footprint).collect();
    for (i, a) in rects.iter().enumerate() {
        if rects[i + 1..].iter().any(|b| rects_collide(a, b)) {
            return true;
        }
        if state
            .obstacles
            .iter()
            .any(|o| rects_collide(a, &o.footprint()))
        {
            return true;
        }
    }
    false
}

/// True iff every vehicle center is on the road and `vx ∈ [0, v_max]`.
pub fn validity_check(state: &WorldState) -> bool {
    let road = &state.road;
    let width = road.total_width();
    state.vehicles.iter().all(|v| {
        (0.0..=width).contains(&v.y)
            && (0.0..=road.length).contains(&v.x)
            && (0.0..=road.v_max).contains(&v.vx)
    })
}

/// Reward weights. The collision and invalid weights are added as given;
/// the deviation and effort weights act as penalty magnitudes, so their sign
/// does not matter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub collision: f64,
    pub invalid: f64,
    pub velocity: f64,
    pub lane: f64,
    pub effort: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            collision: -100.0,
            invalid: -50.0,
            velocity: -1.0,
            lane: -0.5,
            effort: -0.1,
        }
    }
}

/// Agent-specific reward for the transition `prev --action--> next`.
pub fn reward(
    _prev: &WorldState,
    action: &AgentAction,
    next: &WorldState,
    agent: usize,
    goal: &AgentGoal,
    weights: &RewardWeights,
) -> Result<f64, WorldError> {
    let vehicle = next
        .vehicles
        .get(agent)
        .ok_or(WorldError::UnknownAgent(agent))?;
    Ok(reward_terms(vehicle, action, next, goal, weights))
}

fn reward_terms(
    vehicle: &VehicleState,
    action: &AgentAction,
    next: &WorldState,
    goal: &AgentGoal,
    weights: &RewardWeights,
) -> f64 {
    let mut r = 0.0;
    match next.status {
        Status::Collision => {
            r += weights.collision;
            if !validity_check(next) {
                r += weights.invalid;
            }
        }
        Status::Invalid => r += weights.invalid,
        Status::Ok => {}
    }
    let lane_center = next.road.lane_center(goal.desired_lane);
    r -= weights.velocity.abs() * (vehicle.vx - goal.desired_velocity).abs();
    r -= weights.lane.abs() * (vehicle.y - lane_center).abs();
    r -= weights.effort.abs() * action.squared_norm();
    r
}

/// Everything the search needs to simulate and score transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub goals: Vec<AgentGoal>,
    pub weights: RewardWeights,
    pub dt: f64,
    pub horizon: u32,
}

impl WorldModel {
    pub fn new(scenario: &Scenario, weights: RewardWeights) -> Self {
        Self {
            goals: scenario.goals(),
            weights,
            dt: scenario.dt,
            horizon: scenario.episode_horizon,
        }
    }

    pub fn agent_count(&self) -> usize {
        self.goals.len()
    }

    /// Collision, invalid, or past the episode horizon.
    pub fn is_terminal(&self, state: &WorldState) -> bool {
        state.status != Status::Ok || state.time_index >= self.horizon
    }

    /// Steps and writes the per-agent rewards into `rewards`.
    pub fn transition(
        &self,
        state: &WorldState,
        action: &JointAction,
        rewards: &mut [f64],
    ) -> Result<WorldState, WorldError> {
        let next = step(state, action, self.dt)?;
        for (agent, (goal, slot)) in self.goals.iter().zip(rewards.iter_mut()).enumerate() {
            *slot = reward_terms(&next.vehicles[agent], &action[agent], &next, goal, &self.weights);
        }
        Ok(next)
    }
}
