//! Independent oracles and random instances shared by the integration tests
//! and the acceptance suite.
#![allow(dead_code)]

use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tripmix::metrics::{
    Binning, Characteristic, Histogram, MismatchSpec, MismatchTerm, TargetDistribution,
};
use tripmix::model::{
    great_circle_m, Candidate, CandidateSet, Leg, ODTriple, Route, RouteKey, RouteSource, Stop,
    StopRef,
};
use tripmix::planner::{LineSpec, TransitNetwork};

const LAT: f64 = 48.69;
const LON: f64 = 6.18;

/// Stop scattered in a box roughly 2.2 km on a side, so some pairs are
/// within walking distance and most are not.
fn scatter(rng: &mut ChaCha8Rng, id: String) -> Stop {
    Stop::new(
        id,
        LAT + rng.random_range(0.0..0.02),
        LON + rng.random_range(0.0..0.03),
    )
    .unwrap()
}

/// Network with 2 to 8 stops and 1 to 4 lines of 2 to 5 distinct stops.
pub fn random_network(seed: u64) -> TransitNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8usize);
    let stops: Vec<Stop> = (0..n).map(|i| scatter(&mut rng, format!("s{i}"))).collect();
    let mut lines = Vec::new();
    for li in 0..rng.random_range(1..=4usize) {
        let len = rng.random_range(2..=n.min(5));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order.truncate(len);
        let ride_secs = (1..len).map(|_| rng.random_range(60..400)).collect();
        let meters = order
            .windows(2)
            .map(|w| great_circle_m(&stops[w[0]], &stops[w[1]]) * rng.random_range(1.0..1.3))
            .collect();
        let first = rng.random_range(0..3600);
        lines.push(LineSpec {
            id: format!("L{li}"),
            stops: order.iter().map(|&i| stops[i].id.to_string()).collect(),
            ride_secs,
            meters,
            headway: *[300, 600, 900].choose(&mut rng).unwrap(),
            first_departure: first,
            last_departure: first + rng.random_range(3600..6 * 3600),
        });
    }
    TransitNetwork::new(stops, lines, 300, 1.2).unwrap()
}

pub fn random_triple(net: &TransitNetwork, seed: u64) -> ODTriple {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let n = net.stops().len();
    let o = rng.random_range(0..n);
    let d = (o + rng.random_range(1..n)) % n;
    ODTriple {
        demand_id: "q".into(),
        origin: net.stops()[o].clone(),
        destination: net.stops()[d].clone(),
        depart_time: rng.random_range(0..9000),
        round_trip: false,
    }
}

/// Route found by exhaustive search: `(generalized cost, rides, identity)`.
pub type Ranked = (u64, usize, RouteKey);

struct Search<'a> {
    net: &'a TransitNetwork,
    dest: usize,
    max_legs: usize,
    max_walk_m: f64,
    found: Vec<Ranked>,
}

impl Search<'_> {
    /// `walked` is true when the last step was a walk, `line` the last ride.
    fn dfs(
        &mut self,
        stop: usize,
        t: u32,
        visited: &mut Vec<usize>,
        legs: &mut Vec<Leg>,
        line: Option<usize>,
        walked: bool,
    ) {
        if legs.len() < self.max_legs {
            for (li, l) in self.net.lines().iter().enumerate() {
                if line == Some(li) {
                    continue;
                }
                let stops = l.stops();
                for i in 0..stops.len() - 1 {
                    if stops[i] != stop {
                        continue;
                    }
                    let Some(board) = l.next_departure(i, t) else {
                        continue;
                    };
                    for (j, &next) in stops.iter().enumerate().skip(i + 1) {
                        if visited.contains(&next) {
                            continue;
                        }
                        let alight = board + l.ride(i, j);
                        legs.push(Leg {
                            board_stop: self.net.stops()[stop].clone(),
                            alight_stop: self.net.stops()[next].clone(),
                            board_time: board,
                            alight_time: alight,
                            line_id: l.id.clone(),
                            distance_m: l.distance(i, j),
                        });
                        if next == self.dest {
                            let r = Route::new(legs.clone(), RouteSource::Planner);
                            let full = u64::from(r.last_alight_time() - r.first_board_time());
                            let cost = full + 300 * (r.legs.len() as u64 - 1);
                            self.found.push((cost, r.legs.len(), r.identity()));
                        } else {
                            visited.push(next);
                            self.dfs(next, alight, visited, legs, Some(li), false);
                            visited.pop();
                        }
                        legs.pop();
                    }
                }
            }
        }
        if walked || line.is_none() {
            return;
        }
        let here = &self.net.stops()[stop];
        for w in 0..self.net.stops().len() {
            if w == self.dest || visited.contains(&w) {
                continue;
            }
            let d = great_circle_m(here, &self.net.stops()[w]);
            if d > self.max_walk_m {
                continue;
            }
            let secs = (d / self.net.walk_speed).ceil() as u32;
            visited.push(w);
            self.dfs(w, t + secs, visited, legs, line, true);
            visited.pop();
        }
    }
}

/// Every loopless route from origin to destination, ranked by cost, then
/// rides, then identity, truncated to `k`.
pub fn exhaustive_top_k(net: &TransitNetwork, triple: &ODTriple, k: usize) -> Vec<Ranked> {
    let o = net.stop_index(&triple.origin.id).unwrap();
    let d = net.stop_index(&triple.destination.id).unwrap();
    if o == d {
        return Vec::new();
    }
    let mut s = Search {
        net,
        dest: d,
        max_legs: 4,
        max_walk_m: 800.0,
        found: Vec::new(),
    };
    s.dfs(
        o,
        triple.depart_time,
        &mut vec![o],
        &mut Vec::new(),
        None,
        false,
    );
    s.found.sort();
    s.found.truncate(k);
    s.found
}

fn jitter(rng: &mut ChaCha8Rng, base: &StopRef, spread: f64) -> StopRef {
    Arc::new(
        Stop::new(
            format!("{}~{}", base.id, rng.random_range(0..1_000_000)),
            base.lat + rng.random_range(-spread..spread),
            base.lon + rng.random_range(-spread..spread),
        )
        .unwrap(),
    )
}

/// Route from `o` to `d` through up to two random intermediate stops, with
/// random rides and waits.
fn random_route(rng: &mut ChaCha8Rng, o: &StopRef, d: &StopRef, depart: u32) -> Route {
    let hops = rng.random_range(1..=3usize);
    let mut path = vec![o.clone()];
    for _ in 1..hops {
        path.push(jitter(rng, o, 0.02));
    }
    path.push(d.clone());
    let mut t = depart + rng.random_range(0..600);
    let mut legs = Vec::new();
    for w in path.windows(2) {
        let ride = rng.random_range(120..1500);
        let gc = great_circle_m(&w[0], &w[1]);
        legs.push(Leg {
            board_stop: w[0].clone(),
            alight_stop: w[1].clone(),
            board_time: t,
            alight_time: t + ride,
            line_id: format!("l{}", rng.random_range(0..50)).into(),
            distance_m: (gc * rng.random_range(1.0..1.6)).max(50.0),
        });
        t += ride + rng.random_range(0..900);
    }
    Route::new(legs, RouteSource::Planner)
}

/// Random candidate sets with random weights. Origins and destinations are
/// distinct, so every candidate has a positive direct distance.
pub fn random_sets(
    rng: &mut ChaCha8Rng,
    demands: usize,
    max_candidates: usize,
) -> Vec<CandidateSet> {
    let hub: StopRef = Arc::new(Stop::new("hub", LAT, LON).unwrap());
    (0..demands)
        .map(|i| {
            let o = jitter(rng, &hub, 0.02);
            let d = jitter(rng, &hub, 0.02);
            let depart = rng.random_range(20_000..80_000);
            let n = rng.random_range(1..=max_candidates);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut candidates: Vec<Candidate> = Vec::new();
            while candidates.len() < n {
                let route = random_route(rng, &o, &d, depart);
                if candidates
                    .iter()
                    .any(|c| c.route.identity() == route.identity())
                {
                    continue;
                }
                let w = raw[candidates.len()] / total;
                candidates.push(Candidate {
                    route,
                    weight: w,
                    planner_hits: 1,
                    history_frequency: 0,
                });
            }
            // renormalize exactly
            let s: f64 = candidates.iter().map(|c| c.weight).sum();
            for c in &mut candidates {
                c.weight /= s;
            }
            let triple = ODTriple {
                demand_id: format!("t{i}").into(),
                origin: o.clone(),
                destination: d.clone(),
                depart_time: depart,
                round_trip: false,
            };
            CandidateSet::new(triple, candidates).unwrap()
        })
        .collect()
}

/// Coarse binning so small instances share bins.
pub fn coarse_binning(c: Characteristic) -> Binning {
    match c {
        Characteristic::FullTime => Binning::uniform(0.0, 5400.0, 9),
        Characteristic::TransferTime => Binning::uniform(0.0, 1800.0, 6),
        Characteristic::AngleRatio => Binning::uniform(0.0, 1.0, 5),
    }
}

/// Spec whose targets mix a random assignment's histogram with random
/// masses, so the optimum is usually above zero.
pub fn random_spec(rng: &mut ChaCha8Rng, sets: &[CandidateSet]) -> MismatchSpec {
    let terms = Characteristic::ALL
        .into_iter()
        .map(|c| {
            let b = coarse_binning(c);
            let routes: Vec<Route> = sets
                .iter()
                .map(|s| s.route(rng.random_range(0..s.len())).clone())
                .collect();
            let h = Histogram::from_values(&b, routes.iter().map(|r| c.evaluate(r).unwrap()));
            let noise: Vec<f64> = (0..b.bins()).map(|_| rng.random_range(0.0..1.0)).collect();
            let ns: f64 = noise.iter().sum();
            let mix = rng.random_range(0.0..0.5);
            let masses: Vec<f64> = h
                .masses()
                .iter()
                .zip(&noise)
                .map(|(m, z)| (1.0 - mix) * m + mix * z / ns)
                .collect();
            let s: f64 = masses.iter().sum();
            let masses = masses.into_iter().map(|m| m / s).collect();
            MismatchTerm {
                characteristic: c,
                target: TargetDistribution::empirical(
                    Histogram::from_masses(&b, masses, 0).unwrap(),
                )
                .unwrap(),
                weight: rng.random_range(0.5..1.5),
            }
        })
        .collect();
    MismatchSpec::new(terms).unwrap()
}

/// Mismatch of an assignment computed directly from its routes.
pub fn scratch_error(sets: &[CandidateSet], spec: &MismatchSpec, assignment: &[usize]) -> f64 {
    let mut total = 0.0;
    for term in spec.terms() {
        let b = term.target.binning();
        let mut counts = vec![0.0; b.bins()];
        for (s, &c) in sets.iter().zip(assignment) {
            let x = term.characteristic.evaluate(s.route(c)).unwrap();
            counts[b.bin_of(x)] += 1.0;
        }
        let n = sets.len() as f64;
        let l1: f64 = counts
            .iter()
            .zip(term.target.masses())
            .map(|(c, z)| (c / n - z).abs())
            .sum();
        total += term.weight * l1;
    }
    total
}

/// Global minimum over every assignment.
pub fn brute_force_min(sets: &[CandidateSet], spec: &MismatchSpec) -> f64 {
    let mut a = vec![0usize; sets.len()];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(scratch_error(sets, spec, &a));
        let mut i = 0;
        loop {
            if i == a.len() {
                return best;
            }
            a[i] += 1;
            if a[i] < sets[i].len() {
                break;
            }
            a[i] = 0;
            i += 1;
        }
    }
}
