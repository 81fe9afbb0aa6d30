use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use riskplan::harness::load_scenarios;
use riskplan::mcts::{rollout, MctsConfig, SearchTree};
use riskplan::world::{AgentSpec, Obstacle, RewardWeights, VehicleState, WorldModel};
use riskplan::Scenario;

fn merge2() -> Scenario {
    load_scenarios("merge2").unwrap().remove(0)
}

fn solo(vx: f64, desired: f64, obstacles: Vec<Obstacle>) -> Scenario {
    Scenario {
        id: "solo".into(),
        lane_count: 3,
        lane_width: 3.5,
        road_length: 400.0,
        v_max: 30.0,
        agents: vec![AgentSpec {
            initial: VehicleState {
                x: 20.0,
                y: 5.25,
                vx,
                vy: 0.0,
                heading: 0.0,
                length: 4.0,
                width: 2.0,
            },
            desired_velocity: desired,
            desired_lane: 1,
        }],
        obstacles,
        episode_horizon: 20,
        dt: 0.5,
    }
}

#[derive(Default)]
struct Samples {
    /// (node, agent, action index) → every return-to-go backed up through it
    agent: HashMap<(usize, usize, usize), Vec<f64>>,
    /// (node, edge) → per-agent returns-to-go
    edge: HashMap<(usize, usize), Vec<Vec<f64>>>,
}

/// Runs `iterations` search cycles by hand and records every discounted
/// return-to-go that the backup is supposed to average.
fn grow_with_oracle(scenario: &Scenario, cfg: &MctsConfig, iterations: usize, seed: u64) -> (SearchTree, Samples) {
    let model = WorldModel::new(scenario, RewardWeights::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tree = SearchTree::new(scenario.initial_state(), 0, &model, cfg, &mut rng);
    let mut samples = Samples::default();
    for _ in 0..iterations {
        let descent = tree.select_and_expand(&model, cfg, &mut rng).unwrap();
        let leaf = tree.node(descent.leaf).state.clone();
        let g = rollout(&leaf, &model, cfg, tree.action_set(), &mut rng).unwrap();
        let mut to_go = g.clone();
        for step in descent.path.iter().rev() {
            let edge = &tree.node(step.node).edges[step.edge];
            for (agent, value) in to_go.iter_mut().enumerate() {
                *value = edge.rewards[agent] + cfg.gamma * *value;
                let key = (step.node, agent, edge.key[agent] as usize);
                samples.agent.entry(key).or_default().push(*value);
            }
            samples.edge.entry((step.node, step.edge)).or_default().push(to_go.clone());
        }
        tree.backup(&descent.path, &g, cfg.gamma);
    }
    (tree, samples)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn running_means_equal_stored_samples() {
    let cfg = MctsConfig::default();
    let (tree, samples) = grow_with_oracle(&merge2(), &cfg, 1000, 17);
    assert_eq!(tree.root().visits, 1000);
    for (&(node, agent, action), values) in &samples.agent {
        let stats = tree.node(node).agent_stats[agent][action];
        assert_eq!(stats.visits as usize, values.len());
        assert!((stats.mean - mean(values)).abs() <= 1e-9);
    }
    for (&(node, edge), values) in &samples.edge {
        let e = &tree.node(node).edges[edge];
        assert_eq!(e.visits as usize, values.len());
        for (agent, m) in e.means.iter().enumerate() {
            let column: Vec<f64> = values.iter().map(|v| v[agent]).collect();
            assert!((m - mean(&column)).abs() <= 1e-9);
        }
    }
}

#[test]
fn visit_counts_are_conserved() {
    let cfg = MctsConfig::default();
    let (tree, _) = grow_with_oracle(&merge2(), &cfg, 1000, 4);
    for node in tree.nodes() {
        let through_edges: u64 = node.edges.iter().map(|e| e.visits).sum();
        assert_eq!(node.visits, through_edges);
        for stats in &node.agent_stats {
            assert_eq!(node.visits, stats.iter().map(|s| s.visits).sum::<u64>());
        }
        for e in &node.edges {
            assert!(tree.node(e.child).visits <= e.visits);
        }
    }
}

#[test]
fn hand_loop_matches_run_iteration_and_repeats() {
    let sc = merge2();
    let cfg = MctsConfig::default();
    let model = WorldModel::new(&sc, RewardWeights::default());
    let grow = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = SearchTree::new(sc.initial_state(), 0, &model, &cfg, &mut rng);
        for _ in 0..500 {
            tree.run_iteration(&model, &cfg, &mut rng).unwrap();
        }
        serde_json::to_string(&tree.dump()).unwrap()
    };
    let (by_hand, _) = grow_with_oracle(&sc, &cfg, 500, 21);
    assert_eq!(grow(21), serde_json::to_string(&by_hand.dump()).unwrap());
    assert_eq!(grow(21), grow(21));
    assert_ne!(grow(21), grow(22));
}

#[test]
fn every_root_action_is_tried() {
    let sc = solo(10.0, 12.0, vec![]);
    let cfg = MctsConfig {
        c_p: 1.0,
        ..MctsConfig::default()
    };
    let (tree, _) = grow_with_oracle(&sc, &cfg, 90, 1);
    let stats = &tree.root().agent_stats[0];
    assert_eq!(stats.len(), 9);
    assert!(stats.iter().all(|s| s.visits >= 1), "{stats:?}");
}

#[test]
fn single_action_converges_to_the_trajectory_return() {
    // 2 m/s below the desired speed with the only action being zero: every
    // step costs exactly 2, and once the chain reaches the horizon each
    // iteration backs up the full discounted return.
    let sc = solo(10.0, 12.0, vec![]);
    let cfg = MctsConfig {
        ax_set: vec![0.0],
        ay_set: vec![0.0],
        ..MctsConfig::default()
    };
    let n = 4000;
    let (tree, _) = grow_with_oracle(&sc, &cfg, n, 2);
    let full: f64 = (0..sc.episode_horizon).map(|k| -2.0 * cfg.gamma.powi(k as i32)).sum();
    let q = tree.root().agent_stats[0][0].mean;
    let bound = sc.episode_horizon as f64 * full.abs() / n as f64;
    assert!((q - full).abs() <= bound, "q {q} vs {full}");
}

#[test]
fn inevitable_collision_bounds_the_root_value() {
    // A 20 m deep block across all three lanes 30 m ahead of a 20 m/s car:
    // braking at 2 m/s² still closes the gap within four steps of 0.5 s, the
    // car cannot cross the block in one step, and lateral motion cannot leave
    // the road in that time.
    let wall = Obstacle {
        x: 20.0 + 2.0 + 30.0 + 10.0,
        y: 5.25,
        length: 20.0,
        width: 10.5,
        heading: 0.0,
    };
    let sc = solo(20.0, 20.0, vec![wall]);
    let cfg = MctsConfig::default();
    let (tree, _) = grow_with_oracle(&sc, &cfg, 1000, 3);
    let w = RewardWeights::default();
    let latest = 3;
    let bound = w.collision * cfg.gamma.powi(latest);
    for s in tree.root().agent_stats[0].iter().filter(|s| s.visits > 0) {
        assert!(s.mean <= bound, "{} > {bound}", s.mean);
    }
}
