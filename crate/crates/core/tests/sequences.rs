//! Arrival arithmetic, validity and the maximal sequence catalog against
//! permutation brute force.

mod common;

use std::collections::BTreeSet;

use common::{arrivals, best_completion, permutations, random_task, random_worker, subsets, valid_by_definition};
use crowdplan::model::{arrival_times, travel_metrics, validate_sequence, Location, Task, TaskId, TravelModel, Validity};
use crowdplan::seqplan::{build_catalog, maximal_valid_sequences, reachable_tasks};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, n_tasks: usize) -> (crowdplan::model::Worker, Vec<Task>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random_worker(&mut rng, 1, 3.0, 2.0, 7.0);
    let tasks = (0..n_tasks).map(|i| random_task(&mut rng, i as u64 + 1, 3.0, 1.0, 6.0)).collect();
    (w, tasks)
}

#[test]
fn non_finite_locations_are_rejected() {
    let m = TravelModel { speed: 1.0 };
    let bad = Location::new(f64::NAN, 0.0);
    assert!(travel_metrics(&bad, &Location::new(0.0, 0.0), &m).is_err());
    let (d, t) = travel_metrics(&Location::new(0.0, 0.0), &Location::new(3.0, 4.0), &m).unwrap();
    assert_eq!((d, t), (5.0, 5.0));
}

#[test]
fn catalog_matches_permutation_minimum() {
    let m = TravelModel { speed: 1.0 };
    for seed in 0..60 {
        let (w, tasks) = instance(seed, 6);
        let rs_ids = reachable_tasks(&w, &tasks, 0.0, &m);
        let rs: Vec<&Task> = tasks.iter().filter(|s| rs_ids.contains(&s.id)).collect();
        let q = maximal_valid_sequences(&w, &rs, 0.0, &m, 4);

        // Every subset of all tasks with a valid ordering appears exactly
        // once, with the minimal completion time.
        let mut expected = BTreeSet::new();
        for sub in subsets(tasks.len(), 4) {
            let set: Vec<&Task> = sub.iter().map(|&i| &tasks[i]).collect();
            if let Some(best) = best_completion(&w, &set, 0.0, 1.0) {
                let ids: BTreeSet<TaskId> = set.iter().map(|s| s.id).collect();
                let kept = q
                    .iter()
                    .find(|x| x.tasks.iter().copied().collect::<BTreeSet<_>>() == ids)
                    .unwrap_or_else(|| panic!("seed {seed}: missing set {ids:?}"));
                assert_eq!(kept.completion().unwrap_or(0.0), if set.is_empty() { 0.0 } else { best }, "seed {seed}: {ids:?}");
                expected.insert(ids.into_iter().collect::<Vec<_>>());
            }
        }
        let got: BTreeSet<Vec<TaskId>> = q
            .iter()
            .map(|x| {
                let mut v = x.tasks.clone();
                v.sort();
                v
            })
            .collect();
        assert_eq!(got.len(), q.len(), "seed {seed}: repeated element set");
        assert_eq!(got, expected, "seed {seed}");
    }
}

#[test]
fn catalog_order_and_prefixes() {
    let m = TravelModel { speed: 1.0 };
    for seed in 100..140 {
        let (w, tasks) = instance(seed, 6);
        let cat = build_catalog(std::slice::from_ref(&w), &tasks, 0.0, &m, 4);
        let q = &cat.workers[0].sequences;
        assert!(q[0].is_empty());
        for pair in q.windows(2) {
            let key = |x: &crowdplan::model::TaskSequence| (x.len(), x.tasks.clone());
            assert!(key(&pair[0]) < key(&pair[1]), "seed {seed}: order");
        }
        let by_id = |id: TaskId| tasks.iter().find(|s| s.id == id).unwrap();
        for x in q {
            assert!(x.is_well_formed());
            for n in 0..=x.len() {
                let prefix: Vec<&Task> = x.tasks[..n].iter().map(|&id| by_id(id)).collect();
                assert!(validate_sequence(&w, &prefix, 0.0, &m).is_valid(), "seed {seed}: prefix of {:?}", x.tasks);
            }
            let refs: Vec<&Task> = x.tasks.iter().map(|&id| by_id(id)).collect();
            assert_eq!(x.arrival, arrivals(&w, &refs, 0.0, 1.0));
        }
    }
}

fn small_instance() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 0usize..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn validity_agrees_with_definition((seed, n) in small_instance()) {
        let (w, tasks) = instance(seed, n);
        let m = TravelModel { speed: 1.0 };
        let refs: Vec<&Task> = tasks.iter().collect();
        for p in permutations(&refs) {
            let ours = validate_sequence(&w, &p, 0.0, &m);
            prop_assert_eq!(ours.is_valid(), valid_by_definition(&w, &p, 0.0, 1.0));
            if let Validity::Violation(_, id) = ours {
                prop_assert!(p.iter().any(|s| s.id == id));
            }
        }
    }

    #[test]
    fn arrivals_never_decrease((seed, n) in small_instance()) {
        let (w, tasks) = instance(seed, n);
        let refs: Vec<&Task> = tasks.iter().collect();
        let at = arrival_times(&w, &refs, 2.5, &TravelModel { speed: 0.7 }).unwrap();
        prop_assert!(at.iter().all(|&a| a >= 2.5));
        prop_assert!(at.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn reachable_set_holds_every_valid_single((seed, n) in small_instance()) {
        let (w, tasks) = instance(seed, n);
        let m = TravelModel { speed: 1.0 };
        let rs = reachable_tasks(&w, &tasks, 0.0, &m);
        for s in &tasks {
            if valid_by_definition(&w, &[s], 0.0, 1.0) {
                prop_assert!(rs.contains(&s.id));
            }
        }
    }
}
