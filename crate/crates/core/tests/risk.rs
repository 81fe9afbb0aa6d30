mod common;

use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_samples, GridOracle};
use riskplan::risk::{ccvar, cvar, density, kr_value, krlcb, var, var_plus};
use riskplan::{ActionCandidate, AgentAction, RiskConfig};

#[test]
fn quantiles_match_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let n = 1 + case % 60;
        let z = random_samples(&mut rng, n, case % 2 == 0);
        for k in 1..20 {
            let alpha = k as f64 / 20.0;
            assert_eq!(var(&z, alpha).unwrap(), GridOracle::var(&z, k), "var n={n} k={k}");
            assert_eq!(var_plus(&z, alpha).unwrap(), GridOracle::var_plus(&z, k), "var+ n={n} k={k}");
            assert!((cvar(&z, alpha).unwrap() - GridOracle::cvar(&z, k)).abs() <= 1e-9);
            assert!((ccvar(&z, alpha).unwrap() - GridOracle::ccvar(&z, k)).abs() <= 1e-9);
        }
    }
}

#[test]
fn ccvar_ranking_is_cvar_ranking_of_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..100 {
        let sets: Vec<Vec<f64>> = (0..5).map(|i| random_samples(&mut rng, 3 + i * 7, case % 2 == 1)).collect();
        let alpha = 0.05 * (1 + case % 19) as f64;
        let by_ccvar: Vec<f64> = sets.iter().map(|s| ccvar(s, alpha).unwrap()).collect();
        let by_cvar: Vec<f64> = sets
            .iter()
            .map(|s| cvar(&s.iter().map(|v| -v).collect::<Vec<_>>(), alpha).unwrap())
            .collect();
        let best = |v: &[f64], better: fn(f64, f64) -> bool| {
            (0..v.len()).fold(0, |b, i| if better(v[i], v[b]) { i } else { b })
        };
        assert_eq!(best(&by_ccvar, |a, b| a > b), best(&by_cvar, |a, b| a < b));
    }
}

fn continuous() -> impl Strategy<Value = Vec<f64>> {
    vec(-100.0f64..100.0, 1..120)
}

fn alpha() -> impl Strategy<Value = f64> {
    0.01f64..0.99
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn duality(z in continuous(), a in alpha()) {
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        prop_assert!((ccvar(&z, a).unwrap() + cvar(&neg, a).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn monotonicity(z in continuous(), a in alpha(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bigger: Vec<f64> = z.iter().map(|v| v + rand::Rng::random_range(&mut rng, 0.0..5.0)).collect();
        prop_assert!(cvar(&z, a).unwrap() <= cvar(&bigger, a).unwrap() + 1e-9);
    }

    #[test]
    fn translation_invariance(z in continuous(), a in alpha(), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        prop_assert!((cvar(&shifted, a).unwrap() - cvar(&z, a).unwrap() - c).abs() <= 1e-9);
    }

    #[test]
    fn positive_homogeneity(z in continuous(), a in alpha(), beta in 0.0f64..10.0) {
        let scaled: Vec<f64> = z.iter().map(|v| beta * v).collect();
        prop_assert!((cvar(&scaled, a).unwrap() - beta * cvar(&z, a).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn subadditivity(pairs in vec((-100.0f64..100.0, -100.0f64..100.0), 1..120), a in alpha()) {
        let (z, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let sum: Vec<f64> = z.iter().zip(&w).map(|(x, y)| x + y).collect();
        prop_assert!(cvar(&sum, a).unwrap() <= cvar(&z, a).unwrap() + cvar(&w, a).unwrap() + 1e-9);
    }

    #[test]
    fn comonotone_additivity(mut z in continuous(), seed in any::<u64>(), a in alpha()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = random_samples(&mut rng, z.len(), false);
        z.sort_by(f64::total_cmp);
        w.sort_by(f64::total_cmp);
        let sum: Vec<f64> = z.iter().zip(&w).map(|(x, y)| x + y).collect();
        prop_assert!((cvar(&sum, a).unwrap() - cvar(&z, a).unwrap() - cvar(&w, a).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn law_invariance(z in continuous(), a in alpha(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = z.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!((cvar(&shuffled, a).unwrap() - cvar(&z, a).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn kernel_regression_bounds(
        raw in vec((0usize..9, 0usize..4, -50.0f64..50.0, 1u64..40), 1..30),
        gamma_k in 0.0f64..5.0,
        c_lcb in 0.0f64..30.0,
    ) {
        let set = candidates(&raw);
        let lo = set.iter().map(|c| c.q_value).fold(f64::INFINITY, f64::min);
        let hi = set.iter().map(|c| c.q_value).fold(f64::NEG_INFINITY, f64::max);
        let cfg = RiskConfig { gamma_k, c_lcb, ..RiskConfig::default() };
        for c in &set {
            let v = kr_value(&c.action, &set, gamma_k).unwrap();
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            prop_assert!(krlcb(&c.action, &set, &cfg).unwrap() <= v);
            let exact = RiskConfig { c_lcb: 0.0, ..cfg };
            prop_assert_eq!(krlcb(&c.action, &set, &exact).unwrap(), v);
            prop_assert!(density(&c.action, &set, gamma_k) >= c.visit_count as f64);
        }
    }
}

fn grid_action(index: usize) -> AgentAction {
    AgentAction::new([-2.0, 0.0, 2.0][index / 3], [-1.0, 0.0, 1.0][index % 3])
}

/// Candidates from `(action index, source, q, visits)`, dropping repeated
/// (action, source) pairs.
fn candidates(raw: &[(usize, usize, f64, u64)]) -> Vec<ActionCandidate> {
    let mut out: Vec<ActionCandidate> = Vec::new();
    for &(index, source, q_value, visit_count) in raw {
        if out.iter().any(|c| c.action_index == index && c.source == source) {
            continue;
        }
        out.push(ActionCandidate {
            action: grid_action(index),
            action_index: index,
            source,
            q_value,
            visit_count,
        });
    }
    out
}
