mod support;

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tripmix::candidates::build_candidate_set;
use tripmix::metrics::{angle_ratio, l1_distance, Binning, Objective};
use tripmix::model::{great_circle_m, Leg, ODTriple, Route, RouteSource, Stop, StopRef};
use tripmix::sampler::{acceptance_probability, Proposer};

use support::{random_sets, random_spec, scratch_error};

fn masses(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn histogram(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, n).prop_map(|v| masses(&v))
}

fn coords() -> impl Strategy<Value = (f64, f64)> {
    (-80.0f64..80.0, -179.0f64..179.0)
}

fn stop(id: &str, (lat, lon): (f64, f64)) -> StopRef {
    Arc::new(Stop::new(id, lat, lon).unwrap())
}

fn one_leg(a: &StopRef, b: &StopRef, meters: f64) -> Route {
    Route::new(
        vec![Leg {
            board_stop: a.clone(),
            alight_stop: b.clone(),
            board_time: 0,
            alight_time: 600,
            line_id: "L".into(),
            distance_m: meters,
        }],
        RouteSource::History,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn l1_is_a_metric(a in histogram(12), b in histogram(12), c in histogram(12)) {
        prop_assert!(l1_distance(&a, &a).abs() < 1e-12);
        prop_assert!((l1_distance(&a, &b) - l1_distance(&b, &a)).abs() < 1e-12);
        prop_assert!(l1_distance(&a, &c) <= l1_distance(&a, &b) + l1_distance(&b, &c) + 1e-12);
        prop_assert!(l1_distance(&a, &b) <= 2.0 + 1e-12);
    }

    #[test]
    fn disjoint_supports_are_two_apart(a in histogram(5), b in histogram(7)) {
        let mut x = a.clone();
        x.extend(std::iter::repeat_n(0.0, b.len()));
        let mut y = vec![0.0; a.len()];
        y.extend(b);
        prop_assert!((l1_distance(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn great_circle_is_a_metric(p in coords(), q in coords(), r in coords()) {
        let (a, b, c) = (stop("a", p), stop("b", q), stop("c", r));
        let ab = great_circle_m(&a, &b);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - great_circle_m(&b, &a)).abs() < 1e-6);
        prop_assert!(great_circle_m(&a, &a) < 1e-6);
        prop_assert!(great_circle_m(&a, &c) <= ab + great_circle_m(&b, &c) + 1e-6);
    }

    #[test]
    fn angle_ratio_is_bounded_and_falls_with_detours(
        dlat in 0.001f64..0.05,
        stretch in 1.0f64..5.0,
        more in 1.0f64..3.0,
    ) {
        let a = stop("a", (48.69, 6.18));
        let b = stop("b", (48.69 + dlat, 6.18));
        let d = great_circle_m(&a, &b);
        let short = angle_ratio(&one_leg(&a, &b, d * stretch)).unwrap();
        let long = angle_ratio(&one_leg(&a, &b, d * stretch * more)).unwrap();
        prop_assert!((0.0..=1.0).contains(&short));
        prop_assert!(long <= short + 1e-12);
        let round = angle_ratio(&one_leg(&a, &a, d)).unwrap();
        prop_assert_eq!(round, 0.0);
    }

    #[test]
    fn bins_cover_every_value(lo in -100.0f64..100.0, width in 0.1f64..50.0, bins in 1usize..40, x in -1e4f64..1e4) {
        let b = Binning::uniform(lo, lo + width * bins as f64, bins);
        let i = b.bin_of(x);
        prop_assert!(i < b.bins());
        if x >= b.edges()[0] && x < b.edges()[bins] {
            prop_assert!(b.edges()[i] <= x && x < b.edges()[i + 1] + 1e-9);
        }
    }

    #[test]
    fn acceptance_is_a_probability(
        cur in 0.0f64..4.0,
        cand in 0.0f64..4.0,
        corr in 0.01f64..100.0,
        temp in 1e-6f64..10.0,
    ) {
        let a = acceptance_probability(cur, cand, corr, temp, 1e-9);
        prop_assert!((0.0..=1.0).contains(&a));
        if cand <= cur && corr >= 1.0 {
            prop_assert_eq!(a, 1.0);
        }
        // colder chains accept worsening moves less often
        if cand > cur {
            let colder = acceptance_probability(cur, cand, corr, temp / 2.0, 1e-9);
            prop_assert!(colder <= a + 1e-12);
        }
    }

    #[test]
    fn mixed_weights_sum_to_one(
        planned in 0usize..5,
        past in prop::collection::vec(1u32..20, 0..5),
        shared in 0usize..3,
        lambda in 0.0f64..=1.0,
    ) {
        prop_assume!(planned + past.len() > 0);
        let a = stop("a", (48.69, 6.18));
        let b = stop("b", (48.70, 6.18));
        let route = |line: usize| Route::new(
            vec![Leg {
                board_stop: a.clone(),
                alight_stop: b.clone(),
                board_time: 30_000,
                alight_time: 30_600,
                line_id: format!("L{line}").into(),
                distance_m: 1500.0,
            }],
            RouteSource::Planner,
        );
        let planner: Vec<Route> = (0..planned).map(route).collect();
        // history lines overlap the planner's on the first `shared` entries
        let history: Vec<(Route, u32)> = past
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let line = if i < shared { i } else { 100 + i };
                (route(line).with_source(RouteSource::History), f)
            })
            .collect();
        let triple = ODTriple {
            demand_id: "q".into(),
            origin: a.clone(),
            destination: b.clone(),
            depart_time: 30_000,
            round_trip: false,
        };
        match build_candidate_set(triple, &planner, &history, lambda) {
            Ok(set) => {
                let sum: f64 = set.candidates().iter().map(|c| c.weight).sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(set.candidates().iter().all(|c| c.weight > 0.0));
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn deltas_match_scratch_recomputation(seed in any::<u64>(), demands in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sets = random_sets(&mut rng, demands, 4);
        let spec = random_spec(&mut rng, &sets);
        let obj = Objective::new(&sets, &spec).unwrap();
        let mut assignment: Vec<usize> = sets.iter().map(|s| rng.random_range(0..s.len())).collect();
        let mut state = obj.state(assignment.clone()).unwrap();
        prop_assert!((state.error() - scratch_error(&sets, &spec, &assignment)).abs() < 1e-9);
        for _ in 0..200 {
            let j = rng.random_range(0..sets.len());
            let c = rng.random_range(0..sets[j].len());
            let delta = obj.delta_error(&state, j, c).unwrap();
            let mut moved = assignment.clone();
            moved[j] = c;
            let truth = scratch_error(&sets, &spec, &moved);
            prop_assert!((delta.error - truth).abs() < 1e-9, "{} vs {}", delta.error, truth);
            if rng.random_bool(0.5) {
                obj.apply(&mut state, &delta);
                assignment = moved;
            }
            prop_assert_eq!(state.assignment(), &assignment[..]);
            prop_assert!((state.error() - scratch_error(&sets, &spec, &assignment)).abs() < 1e-9);
        }
    }

    #[test]
    fn error_ignores_demand_order(seed in any::<u64>(), demands in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sets = random_sets(&mut rng, demands, 3);
        let spec = random_spec(&mut rng, &sets);
        let assignment: Vec<usize> = sets.iter().map(|s| rng.random_range(0..s.len())).collect();
        let mut order: Vec<usize> = (0..demands).collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        let shuffled: Vec<_> = order.iter().map(|&i| sets[i].clone()).collect();
        let shuffled_assignment: Vec<usize> = order.iter().map(|&i| assignment[i]).collect();
        let a = Objective::new(&sets, &spec).unwrap().state(assignment).unwrap().error();
        let b = Objective::new(&shuffled, &spec)
            .unwrap()
            .state(shuffled_assignment)
            .unwrap()
            .error();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn proposals_never_stay_put(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sets = random_sets(&mut rng, 6, 4);
        let proposer = Proposer::new(&sets);
        prop_assume!(!proposer.is_frozen());
        let assignment: Vec<usize> = sets.iter().map(|s| rng.random_range(0..s.len())).collect();
        for _ in 0..100 {
            let p = proposer.propose(&assignment, &mut rng).unwrap();
            prop_assert!(sets[p.demand].len() >= 2);
            prop_assert_ne!(p.candidate, assignment[p.demand]);
            let (wc, wn) = (sets[p.demand].weight(assignment[p.demand]), sets[p.demand].weight(p.candidate));
            prop_assert!((p.weight_ratio - wn / wc).abs() < 1e-12);
        }
    }
}
