use mdim_core::actions::{ActionSet, AgentKind, Scenario};
use mdim_core::ontology::Ontology;
use mdim_core::rl::{masked_argmax, masked_softmax, Exploration, LinearPolicy, TraceStep};
use mdim_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn q_and_mask() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (1usize..14).prop_flat_map(|n| {
        (
            proptest::collection::vec(-200.0f64..200.0, n),
            proptest::collection::vec(any::<bool>(), n).prop_filter("non-empty mask", |m| m.iter().any(|b| *b)),
        )
    })
}

fn policy(kind: AgentKind, n_features: usize, hash: &str) -> LinearPolicy {
    LinearPolicy::new(ActionSet::new(kind, Scenario::Target, &Ontology::restaurant()), n_features, hash)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    fn softmax_normalised_and_masked((q, mask) in q_and_mask(), t in 0.05f64..100.0) {
        let p = masked_softmax(&q, &mask, t).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (pi, m) in p.iter().zip(&mask) {
            prop_assert!(*pi >= 0.0);
            if !m {
                prop_assert_eq!(*pi, 0.0);
            }
        }
    }

    fn softmax_shift_invariant((q, mask) in q_and_mask(), t in 0.05f64..100.0, c in -1000.0f64..1000.0) {
        let a = masked_softmax(&q, &mask, t).unwrap();
        let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
        let b = masked_softmax(&shifted, &mask, t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    fn argmax_scale_invariant((q, mask) in q_and_mask(), k in 0.001f64..1000.0) {
        let scaled: Vec<f64> = q.iter().map(|x| x * k).collect();
        prop_assert_eq!(masked_argmax(&q, &mask).unwrap(), masked_argmax(&scaled, &mask).unwrap());
    }

    fn argmax_is_best_allowed((q, mask) in q_and_mask()) {
        let i = masked_argmax(&q, &mask).unwrap();
        prop_assert!(mask[i]);
        let best = q.iter().zip(&mask).filter(|(_, m)| **m).map(|(x, _)| *x).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(q[i], best);
        prop_assert!(q[..i].iter().zip(&mask).all(|(x, m)| !m || *x < best), "lowest index on ties");
    }

    fn greedy_ignores_rng(weights in proptest::collection::vec(-5.0f64..5.0, 3 * 6), x in proptest::collection::vec(0.0f64..1.0, 6), s1 in any::<u64>(), s2 in any::<u64>()) {
        let mut p = policy(AgentKind::Som, 6, "h");
        for a in 0..3 {
            p.weights_mut(a).copy_from_slice(&weights[a * 6..(a + 1) * 6]);
        }
        let mask = [true; 3];
        let a = p.select_action(&x, &mask, Exploration::Greedy, &mut ChaCha8Rng::seed_from_u64(s1)).unwrap();
        let b = p.select_action(&x, &mask, Exploration::Greedy, &mut ChaCha8Rng::seed_from_u64(s2)).unwrap();
        prop_assert_eq!(a, b);
    }

    fn save_load_bit_exact(weights in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 4 * 9)) {
        let mut p = policy(AgentKind::AutoFeedback, 9, "layout");
        for a in 0..4 {
            p.weights_mut(a).copy_from_slice(&weights[a * 9..(a + 1) * 9]);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("af.json");
        p.save(&path).unwrap();
        let set = ActionSet::new(AgentKind::AutoFeedback, Scenario::Target, &Ontology::restaurant());
        let q = LinearPolicy::load(&path, set, 9, "layout").unwrap();
        let bits = |p: &LinearPolicy| p.all_weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&p), bits(&q));
    }
}

/// Returns computed directly from the definition, for the fixed-point test.
fn returns(rewards: &[f64], discount: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| rewards[t..].iter().enumerate().map(|(k, r)| discount.powi(k as i32) * r).sum())
        .collect()
}

pub fn mc_update_converges_on_frozen_episode() {
    let n = 8;
    let rewards = [-1.0, -1.0, -26.0, -1.0, 99.0];
    let actions = [0, 1, 2, 0, 1];
    let trace: Vec<TraceStep> = rewards
        .iter()
        .zip(actions)
        .enumerate()
        .map(|(t, (r, a))| {
            let mut f = vec![0.0; n];
            f[t] = 1.0;
            f[n - 1] = 0.5;
            TraceStep { features: f, action: a, reward: *r }
        })
        .collect();
    for discount in [1.0, 0.95] {
        let mut p = policy(AgentKind::Som, n, "h");
        for _ in 0..5000 {
            p.mc_update(&trace, 0.05, discount).unwrap();
        }
        for (step, g) in trace.iter().zip(returns(&rewards, discount)) {
            let q = p.q_value(&step.features, step.action).unwrap();
            assert!((q - g).abs() < 1e-3, "discount {discount}: q {q} vs return {g}");
        }
    }
}

pub fn incompatible_signatures_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("som.json");
    policy(AgentKind::Som, 48, "layout-a").save(&path).unwrap();
    let o = Ontology::restaurant();
    let som = || ActionSet::new(AgentKind::Som, Scenario::Target, &o);
    let incompatible = [
        LinearPolicy::load(&path, ActionSet::new(AgentKind::AutoFeedback, Scenario::Target, &o), 48, "layout-a"),
        LinearPolicy::load(&path, som(), 51, "layout-a"),
        LinearPolicy::load(&path, som(), 48, "layout-b"),
    ];
    for r in incompatible {
        assert!(matches!(r, Err(Error::Incompatible(_))), "{r:?}");
    }
    assert!(LinearPolicy::load(&path, som(), 48, "layout-a").is_ok());

    let task = dir.path().join("task.json");
    policy(AgentKind::Task, 48, "layout-a").save(&task).unwrap();
    let source = ActionSet::new(AgentKind::Task, Scenario::Source, &o);
    assert!(matches!(LinearPolicy::load(&task, source, 48, "layout-a"), Err(Error::Incompatible(_))));
}

/// Runs every check in this file; used by the acceptance runner.
#[allow(dead_code)]
pub fn suite() {
    softmax_normalised_and_masked();
    softmax_shift_invariant();
    argmax_scale_invariant();
    argmax_is_best_allowed();
    greedy_ignores_rng();
    save_load_bit_exact();
    mc_update_converges_on_frozen_episode();
    incompatible_signatures_rejected();
}

#[cfg(test)]
mod tests {
    #[test]
    fn softmax_normalised_and_masked() {
        super::softmax_normalised_and_masked()
    }

    #[test]
    fn softmax_shift_invariant() {
        super::softmax_shift_invariant()
    }

    #[test]
    fn argmax_scale_invariant() {
        super::argmax_scale_invariant()
    }

    #[test]
    fn argmax_is_best_allowed() {
        super::argmax_is_best_allowed()
    }

    #[test]
    fn greedy_ignores_rng() {
        super::greedy_ignores_rng()
    }

    #[test]
    fn save_load_bit_exact() {
        super::save_load_bit_exact()
    }

    #[test]
    fn mc_update_converges_on_frozen_episode() {
        super::mc_update_converges_on_frozen_episode()
    }

    #[test]
    fn incompatible_signatures_rejected() {
        super::incompatible_signatures_rejected()
    }
}
