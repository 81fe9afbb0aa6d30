//! Gaussian root belief over the observed features, and start-state sampling.
//!
//! The belief is a diagonal Gaussian: each observed feature is independent
//! with its own standard deviation. Start states are drawn from the belief
//! with the covariance scaled by a factor that grows with the number of
//! failed attempts, so that infeasible draws become rarer over time.

use std::borrow::Borrow;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::wrap_angle;
use crate::world::{Obstacle, Scenario, Status, VehicleState, WorldState};

/// Smallest physical length or width a sampled footprint may have.
pub const MIN_EXTENT: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("schema refers to {0:?}, which does not exist in the state")]
    UnknownEntity(Entity),
    #[error("schema lists {entity:?}.{feature:?} more than once")]
    DuplicateFeature { entity: Entity, feature: Feature },
    #[error("feature {feature:?} is not observable on {entity:?}")]
    UnsupportedFeature { entity: Entity, feature: Feature },
    #[error("negative standard deviation {sigma} for {entity:?}.{feature:?}")]
    NegativeSigma {
        entity: Entity,
        feature: Feature,
        sigma: f64,
    },
    #[error("belief has {belief} features but the schema has {schema}")]
    DimensionMismatch { belief: usize, schema: usize },
    #[error("no valid, collision-free start state after {attempts} attempts")]
    SamplingExhausted { attempts: u32 },
    #[error("no valid, collision-free start state to select from")]
    NoValidStartState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    Vehicle(usize),
    Obstacle(usize),
    Road,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    X,
    Y,
    Vx,
    Vy,
    Length,
    Width,
    Heading,
    LaneWidth,
}

impl Feature {
    pub const VEHICLE: [Feature; 7] = [
        Feature::X,
        Feature::Y,
        Feature::Vx,
        Feature::Vy,
        Feature::Length,
        Feature::Width,
        Feature::Heading,
    ];
    pub const OBSTACLE: [Feature; 5] = [
        Feature::X,
        Feature::Y,
        Feature::Length,
        Feature::Width,
        Feature::Heading,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub entity: Entity,
    pub feature: Feature,
    pub sigma: f64,
}

/// Per-feature standard deviations of the simulated sensors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseProfile {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub length: f64,
    pub width: f64,
    pub heading: f64,
    pub obstacle_x: f64,
    pub obstacle_y: f64,
    pub obstacle_length: f64,
    pub obstacle_width: f64,
    pub obstacle_heading: f64,
    pub lane_width: f64,
}

impl NoiseProfile {
    /// Noise-free sensors.
    pub fn off() -> Self {
        Self::default()
    }

    pub fn is_off(&self) -> bool {
        *self == Self::off()
    }

    fn vehicle_sigma(&self, feature: Feature) -> f64 {
        match feature {
            Feature::X => self.x,
            Feature::Y => self.y,
            Feature::Vx => self.vx,
            Feature::Vy => self.vy,
            Feature::Length => self.length,
            Feature::Width => self.width,
            Feature::Heading => self.heading,
            Feature::LaneWidth => self.lane_width,
        }
    }

    fn obstacle_sigma(&self, feature: Feature) -> f64 {
        match feature {
            Feature::X => self.obstacle_x,
            Feature::Y => self.obstacle_y,
            Feature::Length => self.obstacle_length,
            Feature::Width => self.obstacle_width,
            Feature::Heading => self.obstacle_heading,
            _ => 0.0,
        }
    }
}

/// Ordered list of observed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<FeatureDescriptor>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self, BeliefError> {
        let mut seen = std::collections::HashSet::new();
        for d in &features {
            let allowed = match d.entity {
                Entity::Vehicle(_) => Feature::VEHICLE.contains(&d.feature),
                Entity::Obstacle(_) => Feature::OBSTACLE.contains(&d.feature),
                Entity::Road => d.feature == Feature::LaneWidth,
            };
            if !allowed {
                return Err(BeliefError::UnsupportedFeature {
                    entity: d.entity,
                    feature: d.feature,
                });
            }
            if !(d.sigma >= 0.0) {
                return Err(BeliefError::NegativeSigma {
                    entity: d.entity,
                    feature: d.feature,
                    sigma: d.sigma,
                });
            }
            if !seen.insert((d.entity, d.feature)) {
                return Err(BeliefError::DuplicateFeature {
                    entity: d.entity,
                    feature: d.feature,
                });
            }
        }
        Ok(Self { features })
    }

    /// Every stochastic feature of every vehicle and obstacle, then the lane width.
    pub fn for_scenario(scenario: &Scenario, noise: &NoiseProfile) -> Self {
        let mut features = Vec::new();
        for i in 0..scenario.agents.len() {
            for feature in Feature::VEHICLE {
                features.push(FeatureDescriptor {
                    entity: Entity::Vehicle(i),
                    feature,
                    sigma: noise.vehicle_sigma(feature),
                });
            }
        }
        for j in 0..scenario.obstacles.len() {
            for feature in Feature::OBSTACLE {
                features.push(FeatureDescriptor {
                    entity: Entity::Obstacle(j),
                    feature,
                    sigma: noise.obstacle_sigma(feature),
                });
            }
        }
        features.push(FeatureDescriptor {
            entity: Entity::Road,
            feature: Feature::LaneWidth,
            sigma: noise.lane_width,
        });
        Self { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn sigmas(&self) -> impl Iterator<Item = f64> + '_ {
        self.features.iter().map(|d| d.sigma)
    }

    /// Reads the schema's features out of a state.
    pub fn extract(&self, state: &WorldState) -> Result<Vec<f64>, BeliefError> {
        self.features
            .iter()
            .map(|d| read_feature(state, d.entity, d.feature))
            .collect()
    }

    /// Writes feature values into a copy of `template`, clamping unphysical
    /// values, and recomputes the status.
    pub fn reconstruct(&self, values: &[f64], template: &WorldState) -> Result<WorldState, BeliefError> {
        if values.len() != self.features.len() {
            return Err(BeliefError::DimensionMismatch {
                belief: values.len(),
                schema: self.features.len(),
            });
        }
        let mut vehicles = template.vehicles.clone();
        let mut obstacles: Vec<Obstacle> = template.obstacles.to_vec();
        let mut road = template.road;
        for (d, &value) in self.features.iter().zip(values) {
            match d.entity {
                Entity::Vehicle(i) => {
                    let v = vehicles.get_mut(i).ok_or(BeliefError::UnknownEntity(d.entity))?;
                    write_vehicle(v, d.feature, value);
                }
                Entity::Obstacle(j) => {
                    let o = obstacles.get_mut(j).ok_or(BeliefError::UnknownEntity(d.entity))?;
                    write_obstacle(o, d.feature, value);
                }
                Entity::Road => road.lane_width = value.max(MIN_EXTENT),
            }
        }
        Ok(WorldState::new(vehicles, obstacles, road, template.time_index))
    }
}

fn read_feature(state: &WorldState, entity: Entity, feature: Feature) -> Result<f64, BeliefError> {
    let missing = BeliefError::UnknownEntity(entity);
    Ok(match entity {
        Entity::Vehicle(i) => {
            let v = state.vehicles.get(i).ok_or(missing)?;
            match feature {
                Feature::X => v.x,
                Feature::Y => v.y,
                Feature::Vx => v.vx,
                Feature::Vy => v.vy,
                Feature::Length => v.length,
                Feature::Width => v.width,
                Feature::Heading => v.heading,
                Feature::LaneWidth => state.road.lane_width,
            }
        }
        Entity::Obstacle(j) => {
            let o = state.obstacles.get(j).ok_or(missing)?;
            match feature {
                Feature::X => o.x,
                Feature::Y => o.y,
                Feature::Length => o.length,
                Feature::Width => o.width,
                Feature::Heading => o.heading,
                _ => return Err(BeliefError::UnsupportedFeature { entity, feature }),
            }
        }
        Entity::Road => state.road.lane_width,
    })
}

fn write_vehicle(v: &mut VehicleState, feature: Feature, value: f64) {
    match feature {
        Feature::X => v.x = value,
        Feature::Y => v.y = value,
        Feature::Vx => v.vx = value,
        Feature::Vy => v.vy = value,
        Feature::Length => v.length = value.max(MIN_EXTENT),
        Feature::Width => v.width = value.max(MIN_EXTENT),
        Feature::Heading => v.heading = wrap_angle(value),
        Feature::LaneWidth => {}
    }
}

fn write_obstacle(o: &mut Obstacle, feature: Feature, value: f64) {
    match feature {
        Feature::X => o.x = value,
        Feature::Y => o.y = value,
        Feature::Length => o.length = value.max(MIN_EXTENT),
        Feature::Width => o.width = value.max(MIN_EXTENT),
        Feature::Heading => o.heading = wrap_angle(value),
        _ => {}
    }
}

/// Diagonal Gaussian over the schema's features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: Vec<f64>,
    pub schema: FeatureSchema,
    /// Time index of the observation the belief was built from.
    pub time_index: u32,
}

impl GaussianBelief {
    pub fn new(mean: Vec<f64>, schema: FeatureSchema, time_index: u32) -> Result<Self, BeliefError> {
        if mean.len() != schema.len() {
            return Err(BeliefError::DimensionMismatch {
                belief: mean.len(),
                schema: schema.len(),
            });
        }
        Ok(Self {
            mean,
            schema,
            time_index,
        })
    }

    /// Template carrying everything the schema does not observe.
    fn template(&self, scenario: &Scenario) -> WorldState {
        let mut template = scenario.initial_state();
        template.time_index = self.time_index;
        template
    }

    /// The mean as a world state (clamped, status derived).
    pub fn mean_state(&self, scenario: &Scenario) -> Result<WorldState, BeliefError> {
        self.schema.reconstruct(&self.mean, &self.template(scenario))
    }

    /// One draw from `N(mean, scale · Σ)`, reconstructed as a world state.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        scenario: &Scenario,
        scale: f64,
        rng: &mut R,
    ) -> Result<WorldState, BeliefError> {
        let std_scale = scale.sqrt();
        let values: Vec<f64> = self
            .mean
            .iter()
            .zip(self.schema.sigmas())
            .map(|(&mu, sigma)| gaussian(mu, std_scale * sigma, rng))
            .collect();
        self.schema.reconstruct(&values, &self.template(scenario))
    }
}

fn gaussian<R: Rng + ?Sized>(mean: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        mean
    } else {
        let z: f64 = rng.sample(StandardNormal);
        mean + sigma * z
    }
}

/// Simulated unbiased measurement of `true_state`.
pub fn observe<R: Rng + ?Sized>(
    true_state: &WorldState,
    schema: &FeatureSchema,
    rng: &mut R,
) -> Result<GaussianBelief, BeliefError> {
    let truth = schema.extract(true_state)?;
    let mean = truth
        .iter()
        .zip(schema.sigmas())
        .map(|(&value, sigma)| gaussian(value, sigma, rng))
        .collect();
    GaussianBelief::new(mean, schema.clone(), true_state.time_index)
}

/// Start-state widening and variance-scaling constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WideningConfig {
    pub c_pw: f64,
    pub alpha_pw: f64,
    pub c_step: f64,
    pub c_max: f64,
    pub l_step_size: u32,
    pub max_attempts: u32,
}

impl Default for WideningConfig {
    fn default() -> Self {
        Self {
            c_pw: 0.5,
            alpha_pw: 0.4,
            c_step: 1.5,
            c_max: 4.0,
            l_step_size: 10,
            max_attempts: 100,
        }
    }
}

/// True when the start-state set is smaller than `c_pw · iteration^alpha_pw`.
pub fn should_expand(num_start_states: usize, iteration: u64, cfg: &WideningConfig) -> bool {
    let threshold = cfg.c_pw * (iteration as f64).powf(cfg.alpha_pw);
    !((num_start_states as f64) >= threshold)
}

/// Covariance scale after `l_attempt` failed draws.
pub fn scale_factor(l_attempt: u32, cfg: &WideningConfig) -> f64 {
    let l_step = l_attempt / cfg.l_step_size.max(1);
    cfg.c_step.powi(l_step as i32).min(cfg.c_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledStart {
    pub state: WorldState,
    /// Covariance scale the accepted draw was taken with.
    pub scale: f64,
}

/// Draws feasible start states. The attempt counter persists across calls,
/// so one sampler should live for exactly one planning step.
#[derive(Debug, Clone, Default)]
pub struct StartStateSampler {
    attempts: u32,
}

impl StartStateSampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Failed draws so far in this planning step.
    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        belief: &GaussianBelief,
        scenario: &Scenario,
        cfg: &WideningConfig,
        rng: &mut R,
    ) -> Result<SampledStart, BeliefError> {
        for _ in 0..cfg.max_attempts.max(1) {
            let scale = scale_factor(self.attempts, cfg);
            let state = belief.draw(scenario, scale, rng)?;
            if state.status == Status::Ok {
                return Ok(SampledStart { state, scale });
            }
            self.attempts += 1;
        }
        Err(BeliefError::SamplingExhausted {
            attempts: cfg.max_attempts.max(1),
        })
    }
}

/// Free-function form of [`StartStateSampler::sample`] with a fresh counter.
pub fn sample_start_state<R: Rng + ?Sized>(
    belief: &GaussianBelief,
    scenario: &Scenario,
    cfg: &WideningConfig,
    rng: &mut R,
) -> Result<WorldState, BeliefError> {
    StartStateSampler::new()
        .sample(belief, scenario, cfg, rng)
        .map(|s| s.state)
}

/// Uniform draw among the valid, collision-free states. Returns the index
/// into `states`.
pub fn select_start_state<T, R>(states: &[T], rng: &mut R) -> Result<usize, BeliefError>
where
    T: Borrow<WorldState>,
    R: Rng + ?Sized,
{
    let feasible: Vec<usize> = states
        .iter()
        .enumerate()
        .filter(|(_, s)| Borrow::<WorldState>::borrow(*s).status == Status::Ok)
        .map(|(i, _)| i)
        .collect();
    match feasible.len() {
        0 => Err(BeliefError::NoValidStartState),
        1 => Ok(feasible[0]),
        n => Ok(feasible[rng.random_range(0..n)]),
    }
}
