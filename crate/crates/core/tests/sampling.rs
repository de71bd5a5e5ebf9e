mod support;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tripmix::eval::{Collection, EvalConfig, Evaluator, TargetMode};
use tripmix::metrics::MismatchSpec;
use tripmix::model::{Candidate, CandidateSet, Leg, ODTriple, Route, RouteSource, Stop, StopRef};
use tripmix::sampler::{initialize, Proposer};
use tripmix::synth::{generate, GridConfig, SynthConfig};

fn stop(id: &str, lon: f64) -> StopRef {
    Arc::new(Stop::new(id, 48.69, lon).unwrap())
}

fn set(id: usize, weights: &[f64]) -> CandidateSet {
    let (a, b) = (stop("a", 6.18), stop("b", 6.20));
    let candidates = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| Candidate {
            route: Route::new(
                vec![Leg {
                    board_stop: a.clone(),
                    alight_stop: b.clone(),
                    board_time: 1000,
                    alight_time: 1600 + 60 * i as u32,
                    line_id: format!("L{i}").into(),
                    distance_m: 1600.0 + 100.0 * i as f64,
                }],
                RouteSource::Planner,
            ),
            weight: w,
            planner_hits: 1,
            history_frequency: 0,
        })
        .collect();
    let triple = ODTriple {
        demand_id: format!("q{id}").into(),
        origin: a,
        destination: b,
        depart_time: 1000,
        round_trip: false,
    };
    CandidateSet::new(triple, candidates).unwrap()
}

#[test]
fn proposal_frequencies_follow_renormalized_weights() {
    let weights = [0.5, 0.3, 0.2];
    let sets = vec![set(0, &weights)];
    let proposer = Proposer::new(&sets);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for current in 0..3 {
        let mut counts = [0u32; 3];
        let draws = 1_000_000;
        for _ in 0..draws {
            counts[proposer.propose(&[current], &mut rng).unwrap().candidate] += 1;
        }
        assert_eq!(counts[current], 0);
        for j in (0..3).filter(|&j| j != current) {
            let expected = weights[j] / (1.0 - weights[current]);
            let got = f64::from(counts[j]) / f64::from(draws);
            assert!(
                (got - expected).abs() / expected < 0.01,
                "current {current}, candidate {j}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn initialization_draws_from_weights() {
    let sets: Vec<CandidateSet> = (0..100_000).map(|i| set(i, &[0.9, 0.1])).collect();
    let routes: Vec<Route> = sets.iter().take(10).map(|s| s.route(0).clone()).collect();
    let spec = MismatchSpec::empirical_from_routes(&routes).unwrap();
    let state = initialize(&sets, &spec, 17).unwrap();
    let first = state.assignment().iter().filter(|&&c| c == 0).count();
    assert!((89_700..=90_300).contains(&first), "{first}");
}

fn small_collection(days: u32) -> Collection {
    let cfg = SynthConfig {
        days,
        trips_per_day: 300,
        network: GridConfig {
            rows: 3,
            cols: 3,
            ..GridConfig::default()
        },
        ..SynthConfig::default()
    };
    Collection::from_synth(generate(&cfg).unwrap())
}

fn quick() -> EvalConfig {
    let mut c = EvalConfig::default();
    c.sampler.iterations = 2_000;
    c.sampler.checkpoint_every = 500;
    c
}

#[test]
fn test_day_routes_are_never_read() {
    let coll = small_collection(9);
    let ev = Evaluator::new(&coll, quick()).unwrap();
    for day in [1, 5, 8] {
        for mode in [TargetMode::Matched, TargetMode::Pooled] {
            coll.clear_reads();
            let r = ev.one_day(day, mode).unwrap();
            let reads = coll.observed_reads();
            assert!(!reads.is_empty());
            assert!(reads.iter().all(|&d| d < day), "day {day}: read {reads:?}");
            assert!(r.prior_days.iter().all(|&d| d < day));
        }
    }
    coll.clear_reads();
    let rows = ev.online(None, TargetMode::Matched).unwrap();
    assert!(!rows.is_empty());
}

#[test]
fn matched_priors_share_the_test_day_type() {
    let coll = small_collection(9);
    let ev = Evaluator::new(&coll, quick()).unwrap();
    for day in coll.days() {
        let ty = coll.day_type(day).unwrap();
        let matched = ev.prior_days(day, TargetMode::Matched).unwrap();
        assert!(matched.iter().all(|&d| coll.day_type(d).unwrap() == ty));
        assert_eq!(
            ev.prior_days(day, TargetMode::Pooled).unwrap(),
            (0..day).collect::<Vec<_>>()
        );
    }
}

#[test]
fn single_type_collection_pools_like_it_matches() {
    let cfg = SynthConfig {
        days: 5,
        weekends: false,
        trips_per_day: 200,
        network: GridConfig {
            rows: 3,
            cols: 3,
            ..GridConfig::default()
        },
        ..SynthConfig::default()
    };
    let coll = Collection::from_synth(generate(&cfg).unwrap());
    let rows = Evaluator::new(&coll, quick())
        .unwrap()
        .daytype_mix()
        .unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert_eq!(r.matched_prior, r.pooled_prior);
        assert_eq!(r.matched_error, r.pooled_error);
    }
}

#[test]
fn evaluation_is_deterministic() {
    let coll = small_collection(6);
    let a = Evaluator::new(&coll, quick())
        .unwrap()
        .online(None, TargetMode::Pooled)
        .unwrap();
    let b = Evaluator::new(&coll, quick())
        .unwrap()
        .online(None, TargetMode::Pooled)
        .unwrap();
    assert_eq!(a, b);
}
