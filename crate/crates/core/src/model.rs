//! Domain types shared across the crate.
//!
//! Times are integer seconds since service-day midnight. A service day may run
//! past 86 400 s, so alighting times are not capped. Distances are meters.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const SECONDS_PER_DAY: u32 = 86_400;

/// Tolerance granted to leg distances against the great-circle bound.
const DISTANCE_SLACK_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Stop {
    pub id: Arc<str>,
    pub lat: f64,
    pub lon: f64,
    pub name: Option<String>,
}

pub type StopRef = Arc<Stop>;

impl Stop {
    pub fn new(id: impl Into<Arc<str>>, lat: f64, lon: f64) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(Error::invalid(
                "stop",
                format!("stop id `{id}` must be non-empty without whitespace or commas"),
            ));
        }
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::invalid(
                "stop",
                format!("stop `{id}` has coordinates ({lat}, {lon}) outside WGS84 range"),
            ));
        }
        Ok(Stop {
            id,
            lat,
            lon,
            name: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }
}

/// Haversine distance on a sphere of radius [`EARTH_RADIUS_M`].
pub fn great_circle_m(a: &Stop, b: &Stop) -> f64 {
    if a.lat == b.lat && a.lon == b.lon {
        return 0.0;
    }
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub board_stop: StopRef,
    pub alight_stop: StopRef,
    pub board_time: u32,
    pub alight_time: u32,
    pub line_id: Arc<str>,
    pub distance_m: f64,
}

impl Leg {
    pub fn ride_time(&self) -> u32 {
        self.alight_time.saturating_sub(self.board_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteSource {
    Planner,
    History,
    Synthetic,
}

/// Identity of a route for deduplication: `(line, board stop, alight stop)` per
/// leg. Clock times are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RouteKey(pub Vec<(Arc<str>, Arc<str>, Arc<str>)>);

impl fmt::Display for RouteKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (line, board, alight)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" > ")?;
            }
            write!(f, "{line}:{board}-{alight}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub legs: Vec<Leg>,
    pub source: RouteSource,
}

impl Route {
    pub fn new(legs: Vec<Leg>, source: RouteSource) -> Self {
        Route { legs, source }
    }

    /// First boarding stop. Panics on a route without legs.
    pub fn origin(&self) -> &StopRef {
        &self.legs[0].board_stop
    }

    /// Last alighting stop. Panics on a route without legs.
    pub fn destination(&self) -> &StopRef {
        &self.legs[self.legs.len() - 1].alight_stop
    }

    pub fn first_board_time(&self) -> u32 {
        self.legs.first().map_or(0, |l| l.board_time)
    }

    pub fn last_alight_time(&self) -> u32 {
        self.legs.last().map_or(0, |l| l.alight_time)
    }

    pub fn total_distance_m(&self) -> f64 {
        self.legs.iter().map(|l| l.distance_m).sum()
    }

    /// Crow-flight distance between the first boarding and the last alighting.
    pub fn direct_distance_m(&self) -> f64 {
        if self.legs.is_empty() {
            return 0.0;
        }
        great_circle_m(self.origin(), self.destination())
    }

    /// Plain distance ratio `D / sum(D_i)`; `None` when the route has no length.
    pub fn gamma(&self) -> Option<f64> {
        let total = self.total_distance_m();
        (total > 0.0).then(|| self.direct_distance_m() / total)
    }

    pub fn identity(&self) -> RouteKey {
        RouteKey(
            self.legs
                .iter()
                .map(|l| {
                    (
                        l.line_id.clone(),
                        l.board_stop.id.clone(),
                        l.alight_stop.id.clone(),
                    )
                })
                .collect(),
        )
    }

    /// Copy with every time moved so that the first boarding happens at `start`.
    pub fn reanchored(&self, start: u32) -> Route {
        let shift = i64::from(start) - i64::from(self.first_board_time());
        let mv = |t: u32| (i64::from(t) + shift).max(0) as u32;
        Route {
            legs: self
                .legs
                .iter()
                .map(|l| Leg {
                    board_time: mv(l.board_time),
                    alight_time: mv(l.alight_time),
                    ..l.clone()
                })
                .collect(),
            source: self.source,
        }
    }

    pub fn with_source(mut self, source: RouteSource) -> Route {
        self.source = source;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub max_walk_m: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { max_walk_m: 800.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoLegs,
    InvertedLeg {
        leg: usize,
    },
    NegativeDistance {
        leg: usize,
    },
    ShortDistance {
        leg: usize,
        distance_m: f64,
        great_circle_m: f64,
    },
    Overlap {
        leg: usize,
    },
    Disconnected {
        leg: usize,
        walk_m: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoLegs => write!(f, "route has no legs"),
            Violation::InvertedLeg { leg } => write!(f, "leg {leg} alights before it boards"),
            Violation::NegativeDistance { leg } => write!(f, "leg {leg} has negative distance"),
            Violation::ShortDistance {
                leg,
                distance_m,
                great_circle_m,
            } => write!(
                f,
                "leg {leg} covers {distance_m:.1} m, shorter than the {great_circle_m:.1} m between its stops"
            ),
            Violation::Overlap { leg } => {
                write!(f, "leg {leg} boards before the previous leg alights")
            }
            Violation::Disconnected { leg, walk_m } => write!(
                f,
                "leg {leg} boards {walk_m:.0} m away from the previous alighting"
            ),
        }
    }
}

/// Checks temporal order, distance bounds and walking connectivity.
pub fn validate_route(route: &Route, config: &ModelConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if route.legs.is_empty() {
        out.push(Violation::NoLegs);
        return out;
    }
    for (i, leg) in route.legs.iter().enumerate() {
        if leg.alight_time < leg.board_time {
            out.push(Violation::InvertedLeg { leg: i });
        }
        if leg.distance_m < 0.0 || leg.distance_m.is_nan() {
            out.push(Violation::NegativeDistance { leg: i });
        } else {
            let gc = great_circle_m(&leg.board_stop, &leg.alight_stop);
            if leg.distance_m < gc - DISTANCE_SLACK_M {
                out.push(Violation::ShortDistance {
                    leg: i,
                    distance_m: leg.distance_m,
                    great_circle_m: gc,
                });
            }
        }
        if i > 0 {
            let prev = &route.legs[i - 1];
            if leg.board_time < prev.alight_time {
                out.push(Violation::Overlap { leg: i });
            }
            let walk_m = great_circle_m(&prev.alight_stop, &leg.board_stop);
            if walk_m > config.max_walk_m {
                out.push(Violation::Disconnected { leg: i, walk_m });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Working,
    Weekend,
}

impl DayType {
    pub fn as_str(self) -> &'static str {
        match self {
            DayType::Working => "working",
            DayType::Weekend => "weekend",
        }
    }
}

impl fmt::Display for DayType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "working" => Ok(DayType::Working),
            "weekend" => Ok(DayType::Weekend),
            other => Err(Error::invalid(
                "day type",
                format!("`{other}` (expected `working` or `weekend`)"),
            )),
        }
    }
}

/// One unit of demand: travel from `origin` to `destination` from `depart_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct ODTriple {
    pub demand_id: Arc<str>,
    pub origin: StopRef,
    pub destination: StopRef,
    pub depart_time: u32,
    /// Allows `origin == destination` (one-ticket round trips).
    pub round_trip: bool,
}

impl ODTriple {
    pub fn validate(&self) -> Result<()> {
        if self.origin.id == self.destination.id && !self.round_trip {
            return Err(Error::invalid(
                "demand",
                format!(
                    "`{}` starts and ends at `{}` without the round-trip flag",
                    self.demand_id, self.origin.id
                ),
            ));
        }
        if self.depart_time >= SECONDS_PER_DAY {
            return Err(Error::invalid(
                "demand",
                format!(
                    "`{}` departs at {} s, outside [0, 86400)",
                    self.demand_id, self.depart_time
                ),
            ));
        }
        Ok(())
    }

    pub fn is_round_trip(&self) -> bool {
        self.origin.id == self.destination.id
    }

    /// The demand a reconstructed route answers.
    pub fn from_route(demand_id: impl Into<Arc<str>>, route: &Route) -> ODTriple {
        let origin = route.origin().clone();
        let destination = route.destination().clone();
        ODTriple {
            demand_id: demand_id.into(),
            round_trip: origin.id == destination.id,
            origin,
            destination,
            depart_time: route.first_board_time().min(SECONDS_PER_DAY - 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub route: Route,
    pub weight: f64,
    pub planner_hits: u32,
    pub history_frequency: u32,
}

/// Weighted route alternatives for one demand.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    triple: ODTriple,
    candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn new(triple: ODTriple, candidates: Vec<Candidate>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::NoCandidates(triple.demand_id.to_string()));
        }
        let mut sum = 0.0;
        for c in &candidates {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(Error::invalid(
                    "candidate set",
                    format!(
                        "non-positive weight {} for `{}`",
                        c.weight, triple.demand_id
                    ),
                ));
            }
            sum += c.weight;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "candidate set",
                format!("weights for `{}` sum to {sum}", triple.demand_id),
            ));
        }
        let mut keys: Vec<RouteKey> = candidates.iter().map(|c| c.route.identity()).collect();
        keys.sort();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "candidate set",
                format!("duplicate route identity for `{}`", triple.demand_id),
            ));
        }
        Ok(CandidateSet { triple, candidates })
    }

    /// Equal-weight set over the given routes.
    pub fn uniform(triple: ODTriple, routes: Vec<Route>) -> Result<Self> {
        let w = 1.0 / routes.len().max(1) as f64;
        let candidates = routes
            .into_iter()
            .map(|route| Candidate {
                route,
                weight: w,
                planner_hits: 0,
                history_frequency: 0,
            })
            .collect();
        CandidateSet::new(triple, candidates)
    }

    pub fn triple(&self) -> &ODTriple {
        &self.triple
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.candidates[i].weight
    }

    pub fn route(&self, i: usize) -> &Route {
        &self.candidates[i].route
    }
}

/// Markov-chain state: one candidate index per demand plus the cached
/// per-characteristic bin counts and errors that make single-variable moves
/// cheap. Built and updated through [`crate::metrics::Objective`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub(crate) assignment: Vec<usize>,
    pub(crate) counts: Vec<Vec<u32>>,
    pub(crate) term_errors: Vec<f64>,
    pub(crate) error: f64,
}

impl ChainState {
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Cached mismatch `p(x)`.
    pub fn error(&self) -> f64 {
        self.error
    }

    /// Cached unweighted L1 mismatch per characteristic.
    pub fn term_errors(&self) -> &[f64] {
        &self.term_errors
    }

    /// Cached bin counts per characteristic.
    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }
}
