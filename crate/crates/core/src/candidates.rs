//! Trip history and candidate-set construction.
//!
//! A candidate set mixes two sources: the planner's k-top recommendations,
//! treated as equally likely, and history routes, weighted by how often they
//! were observed. `lambda_mix` splits the probability mass between them.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::model::{Candidate, CandidateSet, DayType, ODTriple, Route, RouteKey, RouteSource};
use crate::planner::Planner;
use crate::{Error, Result};

/// An observed route and the day it was recorded on.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub route: Route,
    pub day: u32,
    pub day_type: DayType,
}

/// Observed routes indexed by (first boarding stop, last alighting stop),
/// each bucket sorted by first boarding time.
#[derive(Debug, Clone, Default)]
pub struct TripHistory {
    records: Vec<HistoryRecord>,
    index: HashMap<(Arc<str>, Arc<str>), Vec<usize>>,
}

impl TripHistory {
    pub fn new() -> Self {
        TripHistory::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = HistoryRecord>) -> Self {
        let mut h = TripHistory::new();
        for r in records {
            h.push(r);
        }
        h
    }

    /// Adds one record. Routes without legs are ignored.
    pub fn push(&mut self, record: HistoryRecord) {
        if record.route.legs.is_empty() {
            return;
        }
        let key = (
            record.route.origin().id.clone(),
            record.route.destination().id.clone(),
        );
        let t = record.route.first_board_time();
        let idx = self.records.len();
        self.records.push(record);
        let bucket = self.index.entry(key).or_default();
        let at = bucket.partition_point(|&i| self.records[i].route.first_board_time() <= t);
        bucket.insert(at, idx);
    }

    pub fn records(&self) -> &[HistoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// See [`history_lookup`].
    pub fn lookup(
        &self,
        triple: &ODTriple,
        slot_width: u32,
        day_types: &[DayType],
    ) -> Result<Vec<(Route, u32)>> {
        history_lookup(self, triple, slot_width, day_types)
    }
}

/// History routes from `triple.origin` to `triple.destination` whose first
/// boarding lies within `slot_width` seconds of the departure time, on the
/// given day types. Routes with the same identity are merged and counted; the
/// observation closest in time represents them, shifted to start at the
/// departure time. Sorted by frequency, most frequent first.
pub fn history_lookup(
    hist: &TripHistory,
    triple: &ODTriple,
    slot_width: u32,
    day_types: &[DayType],
) -> Result<Vec<(Route, u32)>> {
    if slot_width == 0 {
        return Err(Error::config("slot_width", "must be positive"));
    }
    let key = (triple.origin.id.clone(), triple.destination.id.clone());
    let Some(bucket) = hist.index.get(&key) else {
        return Ok(Vec::new());
    };
    let t = triple.depart_time;
    let lo = t.saturating_sub(slot_width);
    let hi = t.saturating_add(slot_width);
    let start = bucket.partition_point(|&i| hist.records[i].route.first_board_time() < lo);
    // identity -> (frequency, representative record, its distance in time)
    let mut merged: BTreeMap<RouteKey, (u32, usize, u32)> = BTreeMap::new();
    for &i in &bucket[start..] {
        let rec = &hist.records[i];
        let board = rec.route.first_board_time();
        if board > hi {
            break;
        }
        if !day_types.contains(&rec.day_type) {
            continue;
        }
        let gap = board.abs_diff(t);
        merged
            .entry(rec.route.identity())
            .and_modify(|(f, rep, best)| {
                *f += 1;
                if gap < *best {
                    *rep = i;
                    *best = gap;
                }
            })
            .or_insert((1, i, gap));
    }
    let mut out: Vec<(Route, u32)> = merged
        .into_values()
        .map(|(f, rep, _)| {
            let route = hist.records[rep]
                .route
                .reanchored(t)
                .with_source(RouteSource::History);
            (route, f)
        })
        .collect();
    // BTreeMap order breaks frequency ties deterministically
    out.sort_by_key(|&(_, f)| std::cmp::Reverse(f));
    Ok(out)
}

/// Merges planner and history routes into a weighted candidate set.
///
/// Each candidate gets `lambda_mix / |planner|` if the planner proposed it plus
/// `(1 - lambda_mix) * frequency / total frequency` from the history. When one
/// source is empty the other takes all the mass. A route found in both keeps
/// the history realization, which carries the observed transfer dwell times.
/// Candidates left with zero weight (only possible at `lambda_mix` of exactly 0
/// or 1) are dropped.
pub fn build_candidate_set(
    triple: ODTriple,
    planner_routes: &[Route],
    history_routes: &[(Route, u32)],
    lambda_mix: f64,
) -> Result<CandidateSet> {
    if !(0.0..=1.0).contains(&lambda_mix) {
        return Err(Error::config(
            "lambda_mix",
            format!("{lambda_mix} is outside [0, 1]"),
        ));
    }
    struct Slot {
        route: Route,
        planner: bool,
        freq: u32,
    }
    let mut slots: Vec<Slot> = Vec::new();
    let mut at: HashMap<RouteKey, usize> = HashMap::new();
    for r in planner_routes {
        let key = r.identity();
        if at.contains_key(&key) {
            continue;
        }
        at.insert(key, slots.len());
        slots.push(Slot {
            route: r.clone(),
            planner: true,
            freq: 0,
        });
    }
    for (r, f) in history_routes {
        if *f == 0 {
            continue;
        }
        match at.get(&r.identity()) {
            Some(&i) => {
                let s = &mut slots[i];
                if s.freq == 0 {
                    s.route = r.clone();
                }
                s.freq += f;
            }
            None => {
                at.insert(r.identity(), slots.len());
                slots.push(Slot {
                    route: r.clone(),
                    planner: false,
                    freq: *f,
                });
            }
        }
    }
    if slots.is_empty() {
        return Err(Error::NoCandidates(triple.demand_id.to_string()));
    }
    let n_planner = slots.iter().filter(|s| s.planner).count();
    let total: u64 = slots.iter().map(|s| u64::from(s.freq)).sum();
    let lambda = match (n_planner, total) {
        (0, _) => 0.0,
        (_, 0) => 1.0,
        _ => lambda_mix,
    };
    let candidates: Vec<Candidate> = slots
        .into_iter()
        .filter_map(|s| {
            let mut w = 0.0;
            if s.planner {
                w += lambda / n_planner as f64;
            }
            if s.freq > 0 {
                w += (1.0 - lambda) * f64::from(s.freq) / total as f64;
            }
            (w > 0.0).then_some(Candidate {
                route: s.route,
                weight: w,
                planner_hits: u32::from(s.planner),
                history_frequency: s.freq,
            })
        })
        .collect();
    CandidateSet::new(triple, candidates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateConfig {
    pub planner_k: usize,
    pub lambda_mix: f64,
    pub slot_width: u32,
    pub day_types: Vec<DayType>,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig {
            planner_k: 5,
            lambda_mix: 0.5,
            slot_width: 1200,
            day_types: vec![DayType::Working, DayType::Weekend],
        }
    }
}

impl CandidateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.planner_k == 0 {
            return Err(Error::config("planner_k", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.lambda_mix) {
            return Err(Error::config(
                "lambda_mix",
                format!("{} is outside [0, 1]", self.lambda_mix),
            ));
        }
        if self.slot_width == 0 {
            return Err(Error::config("slot_width", "must be positive"));
        }
        Ok(())
    }
}

/// Candidate sets for a batch of demands. Demands with no candidate at all are
/// left out and listed in `unassigned`.
#[derive(Debug, Clone)]
pub struct CandidateBatch {
    pub sets: Vec<CandidateSet>,
    pub unassigned: Vec<Arc<str>>,
}

pub fn build_candidate_sets(
    triples: &[ODTriple],
    planner: &Planner,
    history: &TripHistory,
    config: &CandidateConfig,
) -> Result<CandidateBatch> {
    config.validate()?;
    let mut sets = Vec::with_capacity(triples.len());
    let mut unassigned = Vec::new();
    for t in triples {
        let planned = planner.k_top_routes(t, config.planner_k)?;
        let past = history_lookup(history, t, config.slot_width, &config.day_types)?;
        match build_candidate_set(t.clone(), &planned, &past, config.lambda_mix) {
            Ok(set) => sets.push(set),
            Err(Error::NoCandidates(id)) => unassigned.push(id.into()),
            Err(e) => return Err(e),
        }
    }
    Ok(CandidateBatch { sets, unassigned })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Leg, Stop, StopRef};

    fn stop(id: &str, lon: f64) -> StopRef {
        Arc::new(Stop::new(id, 48.69, lon).unwrap())
    }

    fn route(line: &str, board: u32) -> Route {
        let (a, b) = (stop("a", 6.18), stop("b", 6.19));
        Route::new(
            vec![Leg {
                board_stop: a,
                alight_stop: b,
                board_time: board,
                alight_time: board + 300,
                line_id: line.into(),
                distance_m: 800.0,
            }],
            RouteSource::Planner,
        )
    }

    fn triple(t: u32) -> ODTriple {
        ODTriple {
            demand_id: "d".into(),
            origin: stop("a", 6.18),
            destination: stop("b", 6.19),
            depart_time: t,
            round_trip: false,
        }
    }

    fn weights(set: &CandidateSet) -> Vec<(String, f64)> {
        set.candidates()
            .iter()
            .map(|c| (c.route.legs[0].line_id.to_string(), c.weight))
            .collect()
    }

    #[test]
    fn planner_only_is_uniform() {
        let set =
            build_candidate_set(triple(0), &[route("A", 0), route("B", 0)], &[], 0.5).unwrap();
        assert_eq!(weights(&set), vec![("A".into(), 0.5), ("B".into(), 0.5)]);
    }

    #[test]
    fn history_only_is_proportional() {
        let hist = [(route("A", 0), 3), (route("B", 0), 1)];
        let set = build_candidate_set(triple(0), &[], &hist, 0.5).unwrap();
        assert_eq!(weights(&set), vec![("A".into(), 0.75), ("B".into(), 0.25)]);
    }

    #[test]
    fn mixture_hand_example() {
        let hist = [(route("B", 60), 3), (route("C", 0), 1)];
        let set =
            build_candidate_set(triple(0), &[route("A", 0), route("B", 0)], &hist, 0.5).unwrap();
        let w = weights(&set);
        let expect = [("A", 0.25), ("B", 0.625), ("C", 0.125)];
        for ((name, got), (want_name, want)) in w.iter().zip(expect) {
            assert_eq!(name, want_name);
            assert!((got - want).abs() < 1e-12);
        }
        // shared route keeps the history realization
        assert_eq!(set.route(1).first_board_time(), 60);
        assert_eq!(set.candidates()[1].history_frequency, 3);
    }

    #[test]
    fn lambda_extremes_drop_other_source() {
        let hist = [(route("C", 0), 2)];
        let planned = [route("A", 0), route("B", 0)];
        let set = build_candidate_set(triple(0), &planned, &hist, 1.0).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.candidates().iter().all(|c| c.weight == 0.5));
        let set = build_candidate_set(triple(0), &planned, &hist, 0.0).unwrap();
        assert_eq!(weights(&set), vec![("C".into(), 1.0)]);
    }

    #[test]
    fn empty_sources_fail() {
        assert!(matches!(
            build_candidate_set(triple(0), &[], &[], 0.5),
            Err(Error::NoCandidates(_))
        ));
        assert!(build_candidate_set(triple(0), &[route("A", 0)], &[], 1.5).is_err());
    }

    #[test]
    fn lookup_counts_and_reanchors() {
        assert!(
            history_lookup(&TripHistory::new(), &triple(0), 1200, &[DayType::Working])
                .unwrap()
                .is_empty()
        );
        let hist = TripHistory::from_records([
            HistoryRecord {
                route: route("A", 28_000),
                day: 0,
                day_type: DayType::Working,
            },
            HistoryRecord {
                route: route("A", 29_000),
                day: 1,
                day_type: DayType::Working,
            },
            HistoryRecord {
                route: route("A", 27_700),
                day: 2,
                day_type: DayType::Working,
            },
            HistoryRecord {
                route: route("B", 28_900),
                day: 3,
                day_type: DayType::Weekend,
            },
            HistoryRecord {
                route: route("C", 40_000),
                day: 0,
                day_type: DayType::Working,
            },
        ]);
        let found = hist
            .lookup(&triple(28_800), 1200, &[DayType::Working])
            .unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].1, 3);
        assert_eq!(found[0].0.first_board_time(), 28_800);
        assert_eq!(found[0].0.last_alight_time(), 29_100);
        assert_eq!(found[0].0.source, RouteSource::History);
        let both = hist
            .lookup(&triple(28_800), 1200, &[DayType::Working, DayType::Weekend])
            .unwrap();
        assert_eq!(both.len(), 2);
        assert!(hist.lookup(&triple(0), 0, &[DayType::Working]).is_err());
    }
}
