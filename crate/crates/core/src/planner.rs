//! Headway-scheduled transit network and a k-top route planner.
//!
//! A route is a sequence of rides, each boarding a line at one stop and
//! alighting at a later stop of the same line, optionally separated by a walk
//! to a stop within `max_walk_m`. Routes are loopless: no stop is boarded,
//! alighted or walked to twice. Two consecutive rides never use the same line,
//! even with a walk between them, and a walk is always followed by a ride.
//!
//! Ranking uses the generalized cost `full trip time + transfer_penalty *
//! (legs - 1)` after realizing the route on the schedule, each boarding taking
//! the next departure at or after the traveler reaches the stop.
//!
//! The search runs in two stages. Per origin-destination pair, a best-first
//! search over partial routes enumerates loopless routes in non-decreasing
//! *static* cost (ride + walk + penalty, waits excluded) under an admissible
//! reverse-Dijkstra bound. Static cost never exceeds realized cost, so a query
//! realizes routes in static order and stops once the next static cost exceeds
//! its k-th best realized cost. The static enumeration is time independent and
//! cached per pair.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, Mutex};

use crate::model::{great_circle_m, Leg, ODTriple, Route, RouteKey, RouteSource, Stop, StopRef};
use crate::{Error, Result};

const UNREACHABLE: u64 = u64::MAX;

/// Line definition with stops given by id.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSpec {
    pub id: String,
    pub stops: Vec<String>,
    pub ride_secs: Vec<u32>,
    pub meters: Vec<f64>,
    pub headway: u32,
    pub first_departure: u32,
    pub last_departure: u32,
}

/// A directed line. Vehicles leave the first stop every `headway` seconds from
/// `first_departure` through `last_departure` and never dwell.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: Arc<str>,
    stops: Vec<usize>,
    ride_secs: Vec<u32>,
    meters: Vec<f64>,
    pub headway: u32,
    pub first_departure: u32,
    pub last_departure: u32,
    offsets: Vec<u32>,
    cum_meters: Vec<f64>,
}

impl Line {
    pub fn stops(&self) -> &[usize] {
        &self.stops
    }

    pub fn ride_secs(&self) -> &[u32] {
        &self.ride_secs
    }

    pub fn meters(&self) -> &[f64] {
        &self.meters
    }

    /// Seconds from position `from` to position `to`.
    pub fn ride(&self, from: usize, to: usize) -> u32 {
        self.offsets[to] - self.offsets[from]
    }

    pub fn distance(&self, from: usize, to: usize) -> f64 {
        self.cum_meters[to] - self.cum_meters[from]
    }

    /// Time the first vehicle reaching position `pos` at or after `t` leaves it.
    pub fn next_departure(&self, pos: usize, t: u32) -> Option<u32> {
        let base = self.first_departure + self.offsets[pos];
        let m = if t <= base {
            0
        } else {
            (t - base).div_ceil(self.headway)
        };
        let start = u64::from(self.first_departure) + u64::from(m) * u64::from(self.headway);
        if start > u64::from(self.last_departure) {
            return None;
        }
        Some(start as u32 + self.offsets[pos])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitNetwork {
    stops: Vec<StopRef>,
    index: HashMap<Arc<str>, usize>,
    lines: Vec<Line>,
    pub transfer_penalty: u32,
    pub walk_speed: f64,
}

impl TransitNetwork {
    pub const DEFAULT_TRANSFER_PENALTY: u32 = 300;
    pub const DEFAULT_WALK_SPEED: f64 = 1.2;

    pub fn new(
        stops: Vec<Stop>,
        lines: Vec<LineSpec>,
        transfer_penalty: u32,
        walk_speed: f64,
    ) -> Result<Self> {
        if !(walk_speed > 0.0) || !walk_speed.is_finite() {
            return Err(Error::invalid("network", "walk speed must be positive"));
        }
        let mut index = HashMap::with_capacity(stops.len());
        let stops: Vec<StopRef> = stops.into_iter().map(Arc::new).collect();
        for (i, s) in stops.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::invalid(
                    "network",
                    format!("duplicate stop id `{}`", s.id),
                ));
            }
        }
        let mut resolved = Vec::with_capacity(lines.len());
        for spec in lines {
            if resolved.iter().any(|l: &Line| *l.id == spec.id) {
                return Err(Error::invalid(
                    "network",
                    format!("duplicate line id `{}`", spec.id),
                ));
            }
            let bad = |m: String| Error::invalid("line", format!("`{}`: {m}", spec.id));
            if spec.stops.len() < 2 {
                return Err(bad("needs at least two stops".into()));
            }
            let segs = spec.stops.len() - 1;
            if spec.ride_secs.len() != segs || spec.meters.len() != segs {
                return Err(bad(format!(
                    "{} stops need {segs} ride times and distances",
                    spec.stops.len()
                )));
            }
            if spec.headway == 0 {
                return Err(bad("headway must be positive".into()));
            }
            if spec.ride_secs.contains(&0) {
                return Err(bad("segment ride times must be positive".into()));
            }
            if spec.first_departure > spec.last_departure {
                return Err(bad("service window ends before it starts".into()));
            }
            let idx = spec
                .stops
                .iter()
                .map(|s| {
                    index
                        .get(s.as_str())
                        .copied()
                        .ok_or_else(|| Error::UnknownStop(s.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            for (i, w) in idx.windows(2).enumerate() {
                let gc = great_circle_m(&stops[w[0]], &stops[w[1]]);
                if !(spec.meters[i] >= gc - 1.0) {
                    return Err(bad(format!(
                        "segment {i} is {} m but its stops are {gc:.1} m apart",
                        spec.meters[i]
                    )));
                }
            }
            let mut offsets = vec![0u32];
            let mut cum_meters = vec![0.0];
            for i in 0..segs {
                offsets.push(offsets[i] + spec.ride_secs[i]);
                cum_meters.push(cum_meters[i] + spec.meters[i]);
            }
            resolved.push(Line {
                id: spec.id.into(),
                stops: idx,
                ride_secs: spec.ride_secs,
                meters: spec.meters,
                headway: spec.headway,
                first_departure: spec.first_departure,
                last_departure: spec.last_departure,
                offsets,
                cum_meters,
            });
        }
        Ok(TransitNetwork {
            stops,
            index,
            lines: resolved,
            transfer_penalty,
            walk_speed,
        })
    }

    pub fn stops(&self) -> &[StopRef] {
        &self.stops
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn stop(&self, id: &str) -> Option<&StopRef> {
        self.index.get(id).map(|&i| &self.stops[i])
    }

    pub fn stop_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn line(&self, id: &str) -> Option<&Line> {
        self.lines.iter().find(|l| &*l.id == id)
    }

    /// Spec of a resolved line, with stop ids.
    pub fn line_spec(&self, line: &Line) -> LineSpec {
        LineSpec {
            id: line.id.to_string(),
            stops: line
                .stops
                .iter()
                .map(|&s| self.stops[s].id.to_string())
                .collect(),
            ride_secs: line.ride_secs.clone(),
            meters: line.meters.clone(),
            headway: line.headway,
            first_departure: line.first_departure,
            last_departure: line.last_departure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Routes returned per query when the caller does not say otherwise.
    pub k: usize,
    pub max_legs: usize,
    pub max_walk_m: f64,
    /// Cap on partial routes expanded per origin-destination pair.
    pub max_expansions: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            k: 5,
            max_legs: 4,
            max_walk_m: 800.0,
            max_expansions: 200_000,
        }
    }
}

/// A realized route with its generalized cost.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRoute {
    pub route: Route,
    pub cost: u64,
}

/// `full_trip_time + penalty * (legs - 1)`.
pub fn generalized_cost(route: &Route, transfer_penalty: u32) -> u64 {
    let full = u64::from(
        route
            .last_alight_time()
            .saturating_sub(route.first_board_time()),
    );
    full + u64::from(transfer_penalty) * route.legs.len().saturating_sub(1) as u64
}

/// Total order used for ranking: cost, then fewer legs, then identity.
pub fn rank_order(a: &RankedRoute, b: &RankedRoute) -> Ordering {
    a.cost
        .cmp(&b.cost)
        .then(a.route.legs.len().cmp(&b.route.legs.len()))
        .then_with(|| a.route.identity().cmp(&b.route.identity()))
}

#[derive(Debug, Clone, Copy)]
struct PlannedLeg {
    line: u32,
    from: u16,
    to: u16,
    walk_before: u32,
}

#[derive(Debug, Clone)]
struct StaticPath {
    legs: Vec<PlannedLeg>,
    cost: u64,
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Start,
    Ride { line: u32, from: u16, to: u16 },
    Walk { secs: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Node {
    stop: u32,
    parent: u32,
    step: Step,
    g: u64,
    legs: u8,
    /// Line of the latest ride, carried across walks.
    line: u32,
}

const NO_PARENT: u32 = u32::MAX;
const NO_LINE: u32 = u32::MAX;

#[derive(Debug)]
struct PathStream {
    dest: usize,
    h: Arc<Vec<u64>>,
    arena: Vec<Node>,
    heap: BinaryHeap<Reverse<(u64, u64, u32)>>,
    seq: u64,
    emitted: Vec<StaticPath>,
    expansions: usize,
}

impl PathStream {
    fn new(origin: usize, dest: usize, h: Arc<Vec<u64>>, penalty: u64) -> Self {
        let mut s = PathStream {
            dest,
            h,
            arena: Vec::new(),
            heap: BinaryHeap::new(),
            seq: 0,
            emitted: Vec::new(),
            expansions: 0,
        };
        if s.h[origin] != UNREACHABLE {
            s.arena.push(Node {
                stop: origin as u32,
                parent: NO_PARENT,
                step: Step::Start,
                g: 0,
                legs: 0,
                line: NO_LINE,
            });
            let f = s.h[origin].saturating_sub(penalty);
            s.heap.push(Reverse((f, 0, 0)));
            s.seq = 1;
        }
        s
    }

    fn visited(&self, mut node: u32, stop: u32) -> bool {
        while node != NO_PARENT {
            let n = &self.arena[node as usize];
            if n.stop == stop {
                return true;
            }
            node = n.parent;
        }
        false
    }

    fn push(&mut self, node: Node) {
        let h = self.h[node.stop as usize];
        if h == UNREACHABLE {
            return;
        }
        let idx = self.arena.len() as u32;
        self.arena.push(node);
        self.heap.push(Reverse((node.g + h, self.seq, idx)));
        self.seq += 1;
    }

    /// Emits routes until `emitted[i]` exists. False once the search is spent.
    fn ensure(&mut self, i: usize, graph: &Graph, config: &PlannerConfig) -> bool {
        while self.emitted.len() <= i {
            if self.expansions >= config.max_expansions {
                self.heap.clear();
            }
            let Some(Reverse((_, _, idx))) = self.heap.pop() else {
                return false;
            };
            self.expansions += 1;
            let node = self.arena[idx as usize];
            if node.stop as usize == self.dest {
                if matches!(node.step, Step::Ride { .. }) {
                    self.emitted.push(self.trace(idx));
                }
                continue;
            }
            self.expand(idx, node, graph, config);
        }
        true
    }

    fn expand(&mut self, idx: u32, node: Node, graph: &Graph, config: &PlannerConfig) {
        let penalty = u64::from(graph.penalty);
        if usize::from(node.legs) >= config.max_legs {
            return;
        }
        let extra = if node.legs == 0 { 0 } else { penalty };
        for &(line_idx, pos) in &graph.stop_lines[node.stop as usize] {
            if node.line == line_idx {
                continue;
            }
            let line = &graph.lines[line_idx as usize];
            for to in usize::from(pos) + 1..line.stops.len() {
                let t = line.stops[to] as u32;
                if self.visited(idx, t) {
                    continue;
                }
                self.push(Node {
                    stop: t,
                    parent: idx,
                    step: Step::Ride {
                        line: line_idx,
                        from: pos,
                        to: to as u16,
                    },
                    g: node.g + u64::from(line.ride(usize::from(pos), to)) + extra,
                    legs: node.legs + 1,
                    line: line_idx,
                });
            }
        }
        if matches!(node.step, Step::Ride { .. }) {
            for &(t, secs) in &graph.walks[node.stop as usize] {
                if t as usize == self.dest || self.visited(idx, t) {
                    continue;
                }
                self.push(Node {
                    stop: t,
                    parent: idx,
                    step: Step::Walk { secs },
                    g: node.g + u64::from(secs),
                    legs: node.legs,
                    line: node.line,
                });
            }
        }
    }

    fn trace(&self, mut idx: u32) -> StaticPath {
        let cost = self.arena[idx as usize].g;
        let mut legs: Vec<PlannedLeg> = Vec::new();
        while idx != NO_PARENT {
            let n = &self.arena[idx as usize];
            match n.step {
                Step::Ride { line, from, to } => {
                    legs.push(PlannedLeg {
                        line,
                        from,
                        to,
                        walk_before: 0,
                    });
                }
                Step::Walk { secs } => {
                    // rides are collected back to front, so the last one
                    // pushed is the ride this walk leads to
                    if let Some(l) = legs.last_mut() {
                        l.walk_before = secs;
                    }
                }
                Step::Start => {}
            }
            idx = n.parent;
        }
        legs.reverse();
        StaticPath { legs, cost }
    }
}

#[derive(Debug)]
struct Graph {
    lines: Vec<Line>,
    stop_lines: Vec<Vec<(u32, u16)>>,
    walks: Vec<Vec<(u32, u32)>>,
    /// Reverse adjacency for the bound: `(from stop, cost)` into each stop.
    reverse: Vec<Vec<(u32, u64)>>,
    penalty: u32,
}

impl Graph {
    fn build(net: &TransitNetwork, config: &PlannerConfig) -> Graph {
        let n = net.stops.len();
        let mut stop_lines = vec![Vec::new(); n];
        for (li, line) in net.lines.iter().enumerate() {
            for (pos, &s) in line.stops.iter().enumerate().take(line.stops.len() - 1) {
                stop_lines[s].push((li as u32, pos as u16));
            }
        }
        let mut walks = vec![Vec::new(); n];
        for (a, out) in walks.iter_mut().enumerate() {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let d = great_circle_m(&net.stops[a], &net.stops[b]);
                if d <= config.max_walk_m {
                    out.push((b as u32, (d / net.walk_speed).ceil() as u32));
                }
            }
        }
        let penalty = u64::from(net.transfer_penalty);
        let mut reverse = vec![Vec::new(); n];
        for line in &net.lines {
            for i in 0..line.stops.len() {
                for j in i + 1..line.stops.len() {
                    let cost = u64::from(line.ride(i, j)) + penalty;
                    reverse[line.stops[j]].push((line.stops[i] as u32, cost));
                }
            }
        }
        for (a, ws) in walks.iter().enumerate() {
            for &(b, secs) in ws {
                reverse[b as usize].push((a as u32, u64::from(secs)));
            }
        }
        Graph {
            lines: net.lines.clone(),
            stop_lines,
            walks,
            reverse,
            penalty: net.transfer_penalty,
        }
    }

    /// Lower bound on the static cost from every stop to `dest`, counting the
    /// transfer penalty on every ride.
    fn bound_to(&self, dest: usize) -> Vec<u64> {
        let mut dist = vec![UNREACHABLE; self.reverse.len()];
        let mut heap = BinaryHeap::new();
        dist[dest] = 0;
        heap.push(Reverse((0u64, dest as u32)));
        while let Some(Reverse((d, v))) = heap.pop() {
            if d > dist[v as usize] {
                continue;
            }
            for &(u, c) in &self.reverse[v as usize] {
                let nd = d + c;
                if nd < dist[u as usize] {
                    dist[u as usize] = nd;
                    heap.push(Reverse((nd, u)));
                }
            }
        }
        dist
    }
}

#[derive(Debug, Default)]
struct Cache {
    bounds: HashMap<usize, Arc<Vec<u64>>>,
    streams: HashMap<(usize, usize), PathStream>,
}

/// k-top route planner over an immutable network. Queries share a per-pair
/// cache behind a mutex.
#[derive(Debug)]
pub struct Planner {
    network: Arc<TransitNetwork>,
    config: PlannerConfig,
    graph: Graph,
    cache: Mutex<Cache>,
}

impl Planner {
    pub fn new(network: Arc<TransitNetwork>, config: PlannerConfig) -> Self {
        let graph = Graph::build(&network, &config);
        Planner {
            network,
            config,
            graph,
            cache: Mutex::new(Cache::default()),
        }
    }

    pub fn network(&self) -> &Arc<TransitNetwork> {
        &self.network
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    fn resolve(&self, stop: &Stop) -> Result<usize> {
        self.network
            .stop_index(&stop.id)
            .ok_or_else(|| Error::UnknownStop(stop.id.to_string()))
    }

    /// Up to `k` loopless routes in non-decreasing generalized cost. Empty when
    /// the destination is unreachable or equals the origin.
    pub fn k_top_routes(&self, triple: &ODTriple, k: usize) -> Result<Vec<Route>> {
        Ok(self
            .ranked(triple, k)?
            .into_iter()
            .map(|r| r.route)
            .collect())
    }

    pub fn ranked(&self, triple: &ODTriple, k: usize) -> Result<Vec<RankedRoute>> {
        let o = self.resolve(&triple.origin)?;
        let d = self.resolve(&triple.destination)?;
        if o == d || k == 0 {
            return Ok(Vec::new());
        }
        let mut guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        let cache = &mut *guard;
        let h = cache
            .bounds
            .entry(d)
            .or_insert_with(|| Arc::new(self.graph.bound_to(d)))
            .clone();
        let penalty = u64::from(self.graph.penalty);
        let stream = cache
            .streams
            .entry((o, d))
            .or_insert_with(|| PathStream::new(o, d, h, penalty));

        let mut best: Vec<RankedRoute> = Vec::with_capacity(k + 1);
        let mut i = 0;
        while stream.ensure(i, &self.graph, &self.config) {
            let path = &stream.emitted[i];
            if best.len() == k && path.cost > best[k - 1].cost {
                break;
            }
            if let Some(r) = self.realize(path, triple.depart_time) {
                let at = best
                    .binary_search_by(|b| rank_order(b, &r))
                    .unwrap_or_else(|e| e);
                if at < k {
                    best.insert(at, r);
                    best.truncate(k);
                }
            }
            i += 1;
        }
        Ok(best)
    }

    /// Whether any route links the two stops, ignoring the schedule.
    pub fn reachable(&self, origin: &Stop, destination: &Stop) -> Result<bool> {
        let o = self.resolve(origin)?;
        let d = self.resolve(destination)?;
        if o == d {
            return Ok(false);
        }
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        let h = cache
            .bounds
            .entry(d)
            .or_insert_with(|| Arc::new(self.graph.bound_to(d)));
        Ok(h[o] != UNREACHABLE)
    }

    fn realize(&self, path: &StaticPath, depart: u32) -> Option<RankedRoute> {
        let mut t = depart;
        let mut legs = Vec::with_capacity(path.legs.len());
        for pl in &path.legs {
            let line = &self.graph.lines[pl.line as usize];
            let (from, to) = (usize::from(pl.from), usize::from(pl.to));
            t += pl.walk_before;
            let board = line.next_departure(from, t)?;
            let alight = board + line.ride(from, to);
            legs.push(Leg {
                board_stop: self.network.stops[line.stops[from]].clone(),
                alight_stop: self.network.stops[line.stops[to]].clone(),
                board_time: board,
                alight_time: alight,
                line_id: line.id.clone(),
                distance_m: line.distance(from, to),
            });
            t = alight;
        }
        let route = Route::new(legs, RouteSource::Planner);
        let cost = generalized_cost(&route, self.network.transfer_penalty);
        Some(RankedRoute { route, cost })
    }
}

/// One-shot query without a shared cache.
pub fn k_top_routes(net: &TransitNetwork, triple: &ODTriple, k: usize) -> Result<Vec<Route>> {
    let planner = Planner::new(
        Arc::new(net.clone()),
        PlannerConfig {
            k,
            ..PlannerConfig::default()
        },
    );
    planner.k_top_routes(triple, k)
}

/// Identity-keyed dedup that keeps the first occurrence.
pub fn dedup_routes(routes: Vec<Route>) -> Vec<Route> {
    let mut seen: Vec<RouteKey> = Vec::new();
    routes
        .into_iter()
        .filter(|r| {
            let key = r.identity();
            if seen.contains(&key) {
                false
            } else {
                seen.push(key);
                true
            }
        })
        .collect()
}
