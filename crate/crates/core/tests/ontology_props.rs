use mdim_core::ontology::{sample_goal, Database, GoalConfig, Ontology};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn all_profiles(o: &Ontology) -> Vec<Vec<(String, String)>> {
    let mut out = vec![vec![]];
    for slot in o.informable() {
        out = out
            .into_iter()
            .flat_map(|p: Vec<(String, String)>| {
                slot.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((slot.name.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coverage_matches_brute_force(n in 1usize..300, seed in any::<u64>()) {
        let o = Ontology::restaurant();
        let db = Database::generate(&o, n, seed).unwrap();
        let profiles = all_profiles(&o);
        prop_assert_eq!(profiles.len(), 105);
        let hit = profiles.iter().filter(|p| !db.query(p).unwrap().is_empty()).count();
        prop_assert_eq!(db.coverage(&o), hit as f64 / 105.0);
    }

    #[test]
    fn single_slot_counts_partition(n in 1usize..300, seed in any::<u64>()) {
        let o = Ontology::restaurant();
        let db = Database::generate(&o, n, seed).unwrap();
        for slot in o.informable() {
            let total: usize = slot
                .values
                .iter()
                .map(|v| db.count(&[(slot.name.clone(), v.clone())]).unwrap())
                .sum();
            prop_assert_eq!(total, n);
        }
    }

    #[test]
    fn adding_a_constraint_never_enlarges(seed in any::<u64>(), picks in proptest::collection::vec((0usize..3, 0usize..8), 0..4), extra in (0usize..3, 0usize..8)) {
        let o = Ontology::restaurant();
        let db = Database::generate(&o, 100, seed).unwrap();
        let pick = |(s, v): (usize, usize)| {
            let slot = &o.informable()[s];
            (slot.name.clone(), slot.values[v % slot.values.len()].clone())
        };
        let base: Vec<_> = picks.into_iter().map(pick).collect();
        let mut more = base.clone();
        more.push(pick(extra));
        let small: Vec<&str> = db.query(&more).unwrap().iter().map(|v| v.name.as_str()).collect();
        let large: Vec<&str> = db.query(&base).unwrap().iter().map(|v| v.name.as_str()).collect();
        prop_assert!(small.iter().all(|n| large.contains(n)));
        prop_assert!(small.len() <= large.len());
    }

    #[test]
    fn generation_is_a_function_of_seed(n in 1usize..50, seed in any::<u64>()) {
        let o = Ontology::restaurant();
        prop_assert_eq!(Database::generate(&o, n, seed).unwrap(), Database::generate(&o, n, seed).unwrap());
    }
}

#[test]
fn sampled_goals_are_satisfiable() {
    let o = Ontology::restaurant();
    let db = Database::generate(&o, 100, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let g = sample_goal(&o, &db, &GoalConfig::default(), &mut rng).unwrap();
        assert!(g.satisfiable);
        assert!(!g.constraints.is_empty());
        assert!(!db.query(&g.constraints).unwrap().is_empty(), "{g:?}");
        assert!(g.requests.iter().all(|r| g.constraint(r).is_none()));
    }
}

#[test]
fn default_database_coverage() {
    let o = Ontology::restaurant();
    let db = Database::generate(&o, 100, 7).unwrap();
    let c = db.coverage(&o);
    // 100 uniform draws over 105 profiles cover 1 - (104/105)^100 ≈ 61% in expectation.
    assert!((0.5..0.72).contains(&c), "coverage {c}");
}
