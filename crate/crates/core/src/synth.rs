//! Seeded synthetic smart-card collections.
//!
//! Travelers follow the planner's best route unless a mini activity bends the
//! trip: a round trip (out to some stop, a short activity, and back on the
//! best return route) or a detour onto a lower-ranked route with extra dwell
//! at transfers. Activities leave no labels, only these signatures.
//!
//! Days are generated independently: day `d` draws from a ChaCha8 stream
//! seeded with the config seed and selected by `d`, so any single day can be
//! regenerated on its own.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::line_of;
use crate::model::{great_circle_m, DayType, Leg, ODTriple, Route, RouteSource, Stop};
use crate::planner::{LineSpec, Planner, PlannerConfig, TransitNetwork};
use crate::{Error, Result};

const MAX_RESAMPLES: usize = 100;
const METERS_PER_DEGREE: f64 = 111_195.0;
/// Stream index reserved for network layout, far above any day index.
const NETWORK_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weekday {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl Weekday {
    fn index(self) -> u32 {
        self as u32
    }
}

/// Departure-time density: two Gaussian peaks sharing `peak_share` of the
/// demand equally, plus a uniform floor over `[floor_start, floor_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeProfile {
    pub morning_mean: f64,
    pub morning_sd: f64,
    pub evening_mean: f64,
    pub evening_sd: f64,
    pub peak_share: f64,
    pub floor_start: u32,
    pub floor_end: u32,
}

impl TimeProfile {
    pub fn working() -> Self {
        TimeProfile {
            morning_mean: 8.0 * 3600.0,
            morning_sd: 3600.0,
            evening_mean: 17.5 * 3600.0,
            evening_sd: 5400.0,
            peak_share: 0.6,
            floor_start: 6 * 3600,
            floor_end: 22 * 3600,
        }
    }

    /// Late, wide peaks carrying little of the demand.
    pub fn weekend() -> Self {
        TimeProfile {
            morning_mean: 11.0 * 3600.0,
            morning_sd: 9000.0,
            evening_mean: 17.0 * 3600.0,
            evening_sd: 9000.0,
            peak_share: 0.3,
            floor_start: 7 * 3600,
            floor_end: 23 * 3600,
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let f = |name: &str| format!("{field}.{name}");
        if !(0.0..=1.0).contains(&self.peak_share) {
            return Err(Error::config(f("peak_share"), "must lie in [0, 1]"));
        }
        if !(self.morning_sd > 0.0 && self.evening_sd > 0.0) {
            return Err(Error::config(
                f("morning_sd"),
                "peak widths must be positive",
            ));
        }
        if self.floor_start >= self.floor_end || self.floor_end > 86_399 {
            return Err(Error::config(
                f("floor_end"),
                "floor window must be non-empty and end before midnight",
            ));
        }
        Ok(())
    }

    /// Samples a departure inside the floor window.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let lo = f64::from(self.floor_start);
        let hi = f64::from(self.floor_end);
        for _ in 0..64 {
            let u: f64 = rng.random();
            let t = if u < self.peak_share / 2.0 {
                Normal::new(self.morning_mean, self.morning_sd)
                    .expect("validated width")
                    .sample(rng)
            } else if u < self.peak_share {
                Normal::new(self.evening_mean, self.evening_sd)
                    .expect("validated width")
                    .sample(rng)
            } else {
                rng.random_range(lo..=hi)
            };
            if (lo..=hi).contains(&t) {
                return t.round() as u32;
            }
        }
        rng.random_range(self.floor_start..=self.floor_end)
    }
}

/// Jittered grid with lines along rows, columns and diagonals, both ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub rows: u32,
    pub cols: u32,
    pub spacing_m: f64,
    pub jitter_m: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    /// Commercial speed including stop time, m/s.
    pub speed_mps: f64,
    /// Track length over crow-flight distance per segment.
    pub detour_factor: f64,
    pub diagonals: bool,
    pub headways: Vec<u32>,
    pub service_start: u32,
    pub service_end: u32,
    pub transfer_penalty: u32,
    pub walk_speed: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            rows: 6,
            cols: 6,
            spacing_m: 550.0,
            jitter_m: 60.0,
            center_lat: 48.6921,
            center_lon: 6.1844,
            speed_mps: 6.0,
            detour_factor: 1.03,
            diagonals: true,
            headways: vec![480, 600, 720, 900],
            service_start: 5 * 3600,
            service_end: 24 * 3600 + 1800,
            transfer_penalty: TransitNetwork::DEFAULT_TRANSFER_PENALTY,
            walk_speed: TransitNetwork::DEFAULT_WALK_SPEED,
        }
    }
}

impl GridConfig {
    fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 || self.rows > 99 || self.cols > 99 {
            return Err(Error::config(
                "network.rows",
                "grid sides must be within 2..=99",
            ));
        }
        if !(self.spacing_m > 0.0) {
            return Err(Error::config("network.spacing_m", "must be positive"));
        }
        if !(self.jitter_m >= 0.0 && self.jitter_m < self.spacing_m / 2.0) {
            return Err(Error::config(
                "network.jitter_m",
                "must lie in [0, spacing_m / 2)",
            ));
        }
        if !(self.speed_mps > 0.0) {
            return Err(Error::config("network.speed_mps", "must be positive"));
        }
        if !(self.detour_factor >= 1.0) {
            return Err(Error::config("network.detour_factor", "must be at least 1"));
        }
        if self.headways.is_empty() || self.headways.contains(&0) {
            return Err(Error::config(
                "network.headways",
                "need at least one positive headway",
            ));
        }
        if self.service_start >= self.service_end {
            return Err(Error::config(
                "network.service_end",
                "must follow service_start",
            ));
        }
        if !(self.walk_speed > 0.0) {
            return Err(Error::config("network.walk_speed", "must be positive"));
        }
        Ok(())
    }

    /// Builds the network; layout randomness comes from `seed`.
    pub fn build(&self, seed: u64) -> Result<TransitNetwork> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(NETWORK_STREAM);
        let (rows, cols) = (self.rows as usize, self.cols as usize);
        let lat_step = self.spacing_m / METERS_PER_DEGREE;
        let lon_step = lat_step / self.center_lat.to_radians().cos();
        let mut stops = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let jr = rng.random_range(-1.0..=1.0) * self.jitter_m / self.spacing_m;
                let jc = rng.random_range(-1.0..=1.0) * self.jitter_m / self.spacing_m;
                let lat = self.center_lat + (r as f64 - (rows - 1) as f64 / 2.0 + jr) * lat_step;
                let lon = self.center_lon + (c as f64 - (cols - 1) as f64 / 2.0 + jc) * lon_step;
                stops.push(Stop::new(format!("S{r:02}{c:02}"), lat, lon)?);
            }
        }
        let at = |r: usize, c: usize| r * cols + c;
        let mut paths: Vec<(String, Vec<usize>)> = Vec::new();
        for r in 0..rows {
            paths.push((format!("R{r}"), (0..cols).map(|c| at(r, c)).collect()));
        }
        for c in 0..cols {
            paths.push((format!("C{c}"), (0..rows).map(|r| at(r, c)).collect()));
        }
        if self.diagonals {
            let (ri, ci) = (rows as i64, cols as i64);
            for k in -(ri - 1)..ci {
                let d: Vec<usize> = (0..rows)
                    .filter_map(|r| {
                        let c = r as i64 + k;
                        (0..ci).contains(&c).then(|| at(r, c as usize))
                    })
                    .collect();
                if d.len() >= 3 {
                    paths.push((format!("D{}", k + ri - 1), d));
                }
            }
            for k in 0..(ri + ci - 1) {
                let d: Vec<usize> = (0..rows)
                    .filter_map(|r| {
                        let c = k - r as i64;
                        (0..ci).contains(&c).then(|| at(r, c as usize))
                    })
                    .collect();
                if d.len() >= 3 {
                    paths.push((format!("A{k}"), d));
                }
            }
        }
        let mut lines = Vec::with_capacity(paths.len() * 2);
        for (name, path) in paths {
            let headway = self.headways[rng.random_range(0..self.headways.len())];
            for (suffix, seq) in [
                ("+", path.clone()),
                ("-", path.iter().rev().copied().collect()),
            ] {
                let meters: Vec<f64> = seq
                    .windows(2)
                    .map(|w| great_circle_m(&stops[w[0]], &stops[w[1]]) * self.detour_factor)
                    .collect();
                let ride_secs = meters
                    .iter()
                    .map(|m| (m / self.speed_mps).ceil().max(1.0) as u32)
                    .collect();
                let offset = rng.random_range(0..headway);
                lines.push(LineSpec {
                    id: format!("{name}{suffix}"),
                    stops: seq.iter().map(|&i| stops[i].id.to_string()).collect(),
                    ride_secs,
                    meters,
                    headway,
                    first_departure: self.service_start + offset,
                    last_departure: self.service_end,
                });
            }
        }
        TransitNetwork::new(stops, lines, self.transfer_penalty, self.walk_speed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub days: u32,
    /// Weekday of day 0.
    pub start_weekday: Weekday,
    /// When false every day is a working day.
    pub weekends: bool,
    pub trips_per_day: u32,
    pub weekend_scale: f64,
    pub p_round: f64,
    pub p_detour: f64,
    pub weekend_p_round: f64,
    pub weekend_p_detour: f64,
    /// Relative odds of planner ranks 2, 3, ... for detours.
    pub detour_rank_bias: Vec<f64>,
    /// Upper bound of the uniform extra dwell added at each detour transfer.
    pub dwell_noise: u32,
    /// Range of the activity time between the two halves of a round trip.
    pub activity_dwell: [u32; 2],
    /// Multiplier on dwell noise and activity time at weekends.
    pub weekend_dwell_scale: f64,
    /// Optional relative attraction of each stop, in network order.
    pub attraction: Option<Vec<f64>>,
    pub profile: TimeProfile,
    pub weekend_profile: TimeProfile,
    pub network: GridConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            days: 25,
            start_weekday: Weekday::Saturday,
            weekends: true,
            trips_per_day: 20_000,
            weekend_scale: 0.5,
            p_round: 0.18,
            p_detour: 0.27,
            weekend_p_round: 0.30,
            weekend_p_detour: 0.30,
            detour_rank_bias: vec![0.4, 0.3, 0.2, 0.1],
            dwell_noise: 600,
            activity_dwell: [300, 1800],
            weekend_dwell_scale: 1.5,
            attraction: None,
            profile: TimeProfile::working(),
            weekend_profile: TimeProfile::weekend(),
            network: GridConfig::default(),
        }
    }
}

fn probability(field: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(field, format!("{p} is not a probability")))
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::config("days", "must be at least 1"));
        }
        if self.trips_per_day == 0 {
            return Err(Error::config("trips_per_day", "must be at least 1"));
        }
        if !(self.weekend_scale > 0.0) {
            return Err(Error::config("weekend_scale", "must be positive"));
        }
        probability("p_round", self.p_round)?;
        probability("p_detour", self.p_detour)?;
        probability("weekend_p_round", self.weekend_p_round)?;
        probability("weekend_p_detour", self.weekend_p_detour)?;
        if self.p_round + self.p_detour > 1.0 {
            return Err(Error::config("p_detour", "p_round + p_detour exceeds 1"));
        }
        if self.weekend_p_round + self.weekend_p_detour > 1.0 {
            return Err(Error::config(
                "weekend_p_detour",
                "weekend_p_round + weekend_p_detour exceeds 1",
            ));
        }
        if self.detour_rank_bias.is_empty()
            || self.detour_rank_bias.iter().any(|w| !(*w >= 0.0))
            || self.detour_rank_bias.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::config(
                "detour_rank_bias",
                "needs non-negative weights with a positive sum",
            ));
        }
        if self.activity_dwell[0] > self.activity_dwell[1] {
            return Err(Error::config(
                "activity_dwell",
                "lower bound exceeds upper bound",
            ));
        }
        if !(self.weekend_dwell_scale > 0.0) {
            return Err(Error::config("weekend_dwell_scale", "must be positive"));
        }
        if let Some(a) = &self.attraction {
            if a.iter().any(|w| !(*w >= 0.0)) || a.iter().filter(|w| **w > 0.0).count() < 2 {
                return Err(Error::config(
                    "attraction",
                    "needs non-negative weights with at least two positive",
                ));
            }
        }
        self.profile.validate("profile")?;
        self.weekend_profile.validate("weekend_profile")?;
        self.network.validate()
    }

    /// Parses TOML; unknown keys are rejected and missing keys take defaults.
    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn day_type(&self, day: u32) -> DayType {
        if self.weekends && (self.start_weekday.index() + day) % 7 >= 5 {
            DayType::Weekend
        } else {
            DayType::Working
        }
    }

    pub fn trips_on(&self, day: u32) -> u32 {
        match self.day_type(day) {
            DayType::Working => self.trips_per_day,
            DayType::Weekend => {
                ((f64::from(self.trips_per_day) * self.weekend_scale).round() as u32).max(1)
            }
        }
    }
}

/// Behavior parameters in force on one day.
#[derive(Debug, Clone, Copy)]
struct DayBehavior<'a> {
    p_round: f64,
    p_detour: f64,
    dwell_scale: f64,
    profile: &'a TimeProfile,
}

#[derive(Debug, Clone)]
pub struct SynthDay {
    pub day: u32,
    pub day_type: DayType,
    pub triples: Vec<ODTriple>,
    /// Observed route for each triple, same order.
    pub observed: Vec<Route>,
}

#[derive(Debug, Clone)]
pub struct SynthCollection {
    pub network: Arc<TransitNetwork>,
    pub days: Vec<SynthDay>,
}

/// Generates days with a shared network and planner.
#[derive(Debug)]
pub struct Generator {
    config: SynthConfig,
    planner: Planner,
    attraction: Vec<f64>,
}

impl Generator {
    pub fn new(config: SynthConfig) -> Result<Self> {
        config.validate()?;
        let network = Arc::new(config.network.build(config.seed)?);
        Generator::with_network(config, network)
    }

    pub fn with_network(config: SynthConfig, network: Arc<TransitNetwork>) -> Result<Self> {
        config.validate()?;
        let n = network.stops().len();
        let attraction = match &config.attraction {
            Some(a) if a.len() != n => {
                return Err(Error::config(
                    "attraction",
                    format!("{} weights for {n} stops", a.len()),
                ))
            }
            Some(a) => a.clone(),
            None => vec![1.0; n],
        };
        if n < 2 {
            return Err(Error::invalid("network", "needs at least two stops"));
        }
        let planner = Planner::new(
            network,
            PlannerConfig {
                k: config.detour_rank_bias.len() + 1,
                ..PlannerConfig::default()
            },
        );
        Ok(Generator {
            config,
            planner,
            attraction,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    pub fn network(&self) -> &Arc<TransitNetwork> {
        self.planner.network()
    }

    pub fn planner(&self) -> &Planner {
        &self.planner
    }

    fn pick_stop<R: Rng + ?Sized>(&self, rng: &mut R, exclude: Option<usize>) -> usize {
        let total: f64 = self
            .attraction
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(_, w)| w)
            .sum();
        let mut u = rng.random::<f64>() * total;
        let mut last = 0;
        for (i, &w) in self.attraction.iter().enumerate() {
            if Some(i) == exclude || w <= 0.0 {
                continue;
            }
            last = i;
            if u < w {
                return i;
            }
            u -= w;
        }
        last
    }

    fn query(&self, o: usize, d: usize, t: u32, k: usize) -> Result<Vec<Route>> {
        let stops = self.network().stops();
        let triple = ODTriple {
            demand_id: "".into(),
            origin: stops[o].clone(),
            destination: stops[d].clone(),
            depart_time: t,
            round_trip: false,
        };
        self.planner.k_top_routes(&triple, k)
    }

    pub fn generate_day(&self, day: u32) -> Result<SynthDay> {
        let cfg = &self.config;
        let day_type = cfg.day_type(day);
        let behavior = match day_type {
            DayType::Working => DayBehavior {
                p_round: cfg.p_round,
                p_detour: cfg.p_detour,
                dwell_scale: 1.0,
                profile: &cfg.profile,
            },
            DayType::Weekend => DayBehavior {
                p_round: cfg.weekend_p_round,
                p_detour: cfg.weekend_p_detour,
                dwell_scale: cfg.weekend_dwell_scale,
                profile: &cfg.weekend_profile,
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::from(day));
        let n = cfg.trips_on(day) as usize;
        let mut triples = Vec::with_capacity(n);
        let mut observed = Vec::with_capacity(n);
        for i in 0..n {
            let id: Arc<str> = format!("d{day:02}-{i:05}").into();
            let u: f64 = rng.random();
            let (triple, route) = if u < behavior.p_round {
                self.round_trip(&mut rng, id, &behavior)?
            } else {
                self.one_way(
                    &mut rng,
                    id,
                    &behavior,
                    u < behavior.p_round + behavior.p_detour,
                )?
            };
            triples.push(triple);
            observed.push(route);
        }
        Ok(SynthDay {
            day,
            day_type,
            triples,
            observed,
        })
    }

    fn one_way<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        id: Arc<str>,
        behavior: &DayBehavior<'_>,
        detour: bool,
    ) -> Result<(ODTriple, Route)> {
        let k = if detour {
            self.config.detour_rank_bias.len() + 1
        } else {
            1
        };
        for _ in 0..MAX_RESAMPLES {
            let o = self.pick_stop(rng, None);
            let d = self.pick_stop(rng, Some(o));
            let t = behavior.profile.sample(rng);
            let routes = self.query(o, d, t, k)?;
            if routes.is_empty() {
                continue;
            }
            let route = if detour && routes.len() > 1 {
                let bias = &self.config.detour_rank_bias[..routes.len() - 1];
                let total: f64 = bias.iter().sum();
                let mut chosen = routes.len() - 1;
                if total > 0.0 {
                    let mut u = rng.random::<f64>() * total;
                    for (r, w) in bias.iter().enumerate() {
                        if u < *w {
                            chosen = r + 1;
                            break;
                        }
                        u -= w;
                    }
                }
                let noise = f64::from(self.config.dwell_noise) * behavior.dwell_scale;
                self.add_dwell(&routes[chosen], rng, noise)
            } else {
                routes[0].clone()
            };
            let stops = self.network().stops();
            let triple = ODTriple {
                demand_id: id,
                origin: stops[o].clone(),
                destination: stops[d].clone(),
                depart_time: t,
                round_trip: false,
            };
            return Ok((triple, route.with_source(RouteSource::Synthetic)));
        }
        Err(Error::Unreachable(format!(
            "no reachable origin-destination pair for `{id}` after {MAX_RESAMPLES} draws"
        )))
    }

    fn round_trip<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        id: Arc<str>,
        behavior: &DayBehavior<'_>,
    ) -> Result<(ODTriple, Route)> {
        let [lo, hi] = self.config.activity_dwell;
        for _ in 0..MAX_RESAMPLES {
            let o = self.pick_stop(rng, None);
            let turn = self.pick_stop(rng, Some(o));
            let t = behavior.profile.sample(rng);
            let dwell = (f64::from(rng.random_range(lo..=hi)) * behavior.dwell_scale) as u32;
            let Some(out) = self.query(o, turn, t, 1)?.into_iter().next() else {
                continue;
            };
            let back_at = out.last_alight_time() + dwell;
            let Some(back) = self.query(turn, o, back_at, 1)?.into_iter().next() else {
                continue;
            };
            let mut legs = out.legs;
            legs.extend(back.legs);
            let origin = self.network().stops()[o].clone();
            let triple = ODTriple {
                demand_id: id,
                origin: origin.clone(),
                destination: origin,
                depart_time: t,
                round_trip: true,
            };
            return Ok((triple, Route::new(legs, RouteSource::Synthetic)));
        }
        Err(Error::Unreachable(format!(
            "no reachable round trip for `{id}` after {MAX_RESAMPLES} draws"
        )))
    }

    /// Delays each transfer by up to `noise` seconds, re-boarding the next
    /// scheduled vehicle. Falls back to the original route past service end.
    fn add_dwell<R: Rng + ?Sized>(&self, route: &Route, rng: &mut R, noise: f64) -> Route {
        let net = self.network();
        let mut legs: Vec<Leg> = Vec::with_capacity(route.legs.len());
        for (i, leg) in route.legs.iter().enumerate() {
            if i == 0 {
                legs.push(leg.clone());
                continue;
            }
            let prev = &legs[i - 1];
            let walk = if prev.alight_stop.id == leg.board_stop.id {
                0
            } else {
                (great_circle_m(&prev.alight_stop, &leg.board_stop) / net.walk_speed).ceil() as u32
            };
            let extra = (rng.random::<f64>() * noise).round() as u32;
            let ready = (prev.alight_time + walk).max(leg.board_time) + extra;
            let Some(line) = net.line(&leg.line_id) else {
                return route.clone();
            };
            let ids = line.stops();
            let stop_pos = |id: &str| ids.iter().position(|&s| &*net.stops()[s].id == id);
            let (Some(from), Some(to)) =
                (stop_pos(&leg.board_stop.id), stop_pos(&leg.alight_stop.id))
            else {
                return route.clone();
            };
            let Some(board) = line.next_departure(from, ready) else {
                return route.clone();
            };
            legs.push(Leg {
                board_time: board,
                alight_time: board + line.ride(from, to),
                ..leg.clone()
            });
        }
        Route::new(legs, route.source)
    }

    pub fn generate(&self) -> Result<SynthCollection> {
        let days = (0..self.config.days)
            .map(|d| self.generate_day(d))
            .collect::<Result<Vec<_>>>()?;
        Ok(SynthCollection {
            network: self.network().clone(),
            days,
        })
    }
}

/// Network plus every configured day.
pub fn generate(config: &SynthConfig) -> Result<SynthCollection> {
    Generator::new(config.clone())?.generate()
}
