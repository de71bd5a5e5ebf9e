//! Evaluation protocols: mismatch diagnostics, one-day runs, online runs
//! over a growing history, and matched versus pooled day-type targets.
//!
//! A test day contributes only its demand. Targets and history come from
//! strictly earlier days, and [`Collection`] records every read of observed
//! routes so tests can check that the test day's routes are never touched.

use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::candidates::{build_candidate_sets, CandidateConfig, HistoryRecord, TripHistory};
use crate::metrics::{
    full_trip_time, transfer_time, Binning, Characteristic, Histogram, MismatchSpec,
};
use crate::model::{CandidateSet, ChainState, DayType, ODTriple, Route};
use crate::planner::{Planner, PlannerConfig, TransitNetwork};
use crate::sampler::{run, AnnealingSchedule, Checkpoint, RunTrace, SamplerConfig};
use crate::synth::SynthCollection;
use crate::{Error, Result};

/// One day of demand with its observed routes.
#[derive(Debug, Clone)]
pub struct DayRecord {
    pub day: u32,
    pub day_type: DayType,
    pub triples: Vec<ODTriple>,
    pub observed: Vec<Route>,
}

/// Multi-day collection over one network. Reads of observed routes are logged.
#[derive(Debug)]
pub struct Collection {
    network: Arc<TransitNetwork>,
    days: Vec<DayRecord>,
    reads: Mutex<Vec<u32>>,
}

impl Collection {
    /// Days must be listed in chronological order with distinct indices.
    pub fn new(network: Arc<TransitNetwork>, days: Vec<DayRecord>) -> Result<Self> {
        if days.windows(2).any(|w| w[0].day >= w[1].day) {
            return Err(Error::Eval("days must be strictly increasing".into()));
        }
        Ok(Collection {
            network,
            days,
            reads: Mutex::new(Vec::new()),
        })
    }

    pub fn from_synth(synth: SynthCollection) -> Self {
        let days = synth
            .days
            .into_iter()
            .map(|d| DayRecord {
                day: d.day,
                day_type: d.day_type,
                triples: d.triples,
                observed: d.observed,
            })
            .collect();
        Collection {
            network: synth.network,
            days,
            reads: Mutex::new(Vec::new()),
        }
    }

    pub fn network(&self) -> &Arc<TransitNetwork> {
        &self.network
    }

    /// Day indices in order.
    pub fn days(&self) -> Vec<u32> {
        self.days.iter().map(|d| d.day).collect()
    }

    fn record(&self, day: u32) -> Result<&DayRecord> {
        self.days
            .iter()
            .find(|d| d.day == day)
            .ok_or_else(|| Error::Eval(format!("no day {day} in the collection")))
    }

    pub fn day_type(&self, day: u32) -> Result<DayType> {
        Ok(self.record(day)?.day_type)
    }

    pub fn demand(&self, day: u32) -> Result<&[ODTriple]> {
        Ok(&self.record(day)?.triples)
    }

    /// Observed routes of a day. Every call is logged.
    pub fn observed(&self, day: u32) -> Result<&[Route]> {
        let rec = self.record(day)?;
        self.reads
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(day);
        Ok(&rec.observed)
    }

    /// Days whose observed routes were read since the last clear.
    pub fn observed_reads(&self) -> Vec<u32> {
        self.reads.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn clear_reads(&self) {
        self.reads.lock().unwrap_or_else(|e| e.into_inner()).clear();
    }
}

/// Binning used by diagnostics, including the joint full/transfer grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub joint_full: Binning,
    pub joint_transfer: Binning,
    /// Full trip time marked on the joint grid, seconds.
    pub threshold: u32,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            joint_full: Binning::uniform(0.0, 7200.0, 24),
            joint_transfer: Binning::uniform(0.0, 3600.0, 12),
            threshold: 1800,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacteristicReport {
    pub characteristic: Characteristic,
    pub edges: Vec<f64>,
    pub observed: Vec<f64>,
    pub simulated: Vec<f64>,
    pub l1: f64,
    pub observed_mean: f64,
    pub simulated_mean: f64,
    /// `observed_mean - simulated_mean`; positive when the simulation is
    /// faster than reality.
    pub mean_gap: f64,
}

/// Mass over (full time, transfer time) cells, rows indexed by full time.
#[derive(Debug, Clone, Serialize)]
pub struct JointGrid {
    pub full_edges: Vec<f64>,
    pub transfer_edges: Vec<f64>,
    pub observed: Vec<Vec<f64>>,
    pub simulated: Vec<Vec<f64>>,
    pub threshold: u32,
    /// Share of trips with full time at or above the threshold.
    pub observed_above: f64,
    pub simulated_above: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MismatchReport {
    pub characteristics: Vec<CharacteristicReport>,
    pub joint: JointGrid,
}

impl MismatchReport {
    pub fn get(&self, c: Characteristic) -> Option<&CharacteristicReport> {
        self.characteristics.iter().find(|r| r.characteristic == c)
    }
}

fn values(routes: &[Route], c: Characteristic) -> Result<Vec<f64>> {
    routes.iter().map(|r| c.evaluate(r)).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn joint(routes: &[Route], cfg: &ReportConfig) -> (Vec<Vec<f64>>, f64) {
    let mut grid = vec![vec![0.0; cfg.joint_transfer.bins()]; cfg.joint_full.bins()];
    let unit = 1.0 / routes.len() as f64;
    let mut above = 0.0;
    for r in routes {
        let f = full_trip_time(r);
        let t = transfer_time(r);
        grid[cfg.joint_full.bin_of(f64::from(f))][cfg.joint_transfer.bin_of(f64::from(t))] += unit;
        if f >= cfg.threshold {
            above += unit;
        }
    }
    (grid, above)
}

/// Compares observed and simulated routes on every characteristic, using each
/// characteristic's default binning.
pub fn mismatch_report(
    observed: &[Route],
    simulated: &[Route],
    config: &ReportConfig,
) -> Result<MismatchReport> {
    if observed.is_empty() || simulated.is_empty() {
        return Err(Error::Eval(
            "mismatch report needs routes on both sides".into(),
        ));
    }
    let mut characteristics = Vec::with_capacity(3);
    for c in Characteristic::ALL {
        let binning = c.default_binning();
        let ov = values(observed, c)?;
        let sv = values(simulated, c)?;
        let oh = Histogram::from_values(&binning, ov.iter().copied());
        let sh = Histogram::from_values(&binning, sv.iter().copied());
        let (om, sm) = (mean(&ov), mean(&sv));
        characteristics.push(CharacteristicReport {
            characteristic: c,
            edges: binning.edges().to_vec(),
            l1: crate::metrics::l1_distance(oh.masses(), sh.masses()),
            observed: oh.masses().to_vec(),
            simulated: sh.masses().to_vec(),
            observed_mean: om,
            simulated_mean: sm,
            mean_gap: om - sm,
        });
    }
    let (og, oa) = joint(observed, config);
    let (sg, sa) = joint(simulated, config);
    Ok(MismatchReport {
        characteristics,
        joint: JointGrid {
            full_edges: config.joint_full.edges().to_vec(),
            transfer_edges: config.joint_transfer.edges().to_vec(),
            observed: og,
            simulated: sg,
            threshold: config.threshold,
            observed_above: oa,
            simulated_above: sa,
        },
    })
}

/// Which earlier days supply the targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    /// Earlier days of the test day's type.
    Matched,
    /// Every earlier day.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub sampler: SamplerConfig,
    pub candidates: CandidateConfig,
    pub planner: PlannerConfig,
    pub report: ReportConfig,
}

impl EvalConfig {
    /// Annealing schedule for evaluation runs. A single move shifts a
    /// histogram by `1 / n`, so relative error changes are tiny at day scale
    /// and the chain only makes progress when nearly greedy.
    pub fn default_schedule() -> AnnealingSchedule {
        AnnealingSchedule {
            l0: 1e-4,
            decay: 0.99,
            l_min: 1e-5,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            sampler: SamplerConfig {
                schedule: EvalConfig::default_schedule(),
                ..SamplerConfig::default()
            },
            candidates: CandidateConfig::default(),
            planner: PlannerConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

/// Outcome of one test day.
#[derive(Debug, Clone)]
pub struct DayEval {
    pub day: u32,
    pub day_type: DayType,
    pub mode: TargetMode,
    pub prior_days: Vec<u32>,
    pub demands: usize,
    /// Demand ids with neither planner nor history candidates.
    pub unassigned: usize,
    pub trace: RunTrace,
    /// Prior observed routes against the initial assignment.
    pub before: MismatchReport,
    /// Prior observed routes against the best assignment.
    pub after: MismatchReport,
}

impl DayEval {
    pub fn initial_error(&self) -> f64 {
        self.trace.initial_error()
    }

    pub fn final_error(&self) -> f64 {
        self.trace.best_state.error()
    }
}

fn routes_of(sets: &[CandidateSet], state: &ChainState) -> Vec<Route> {
    sets.iter()
        .zip(state.assignment())
        .map(|(s, &c)| s.route(c).clone())
        .collect()
}

/// Runs protocols over one collection with a shared planner cache.
#[derive(Debug)]
pub struct Evaluator<'a> {
    collection: &'a Collection,
    planner: Planner,
    config: EvalConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(collection: &'a Collection, config: EvalConfig) -> Result<Self> {
        config.sampler.validate()?;
        config.candidates.validate()?;
        let planner = Planner::new(collection.network().clone(), config.planner);
        Ok(Evaluator {
            collection,
            planner,
            config,
        })
    }

    pub fn config(&self) -> &EvalConfig {
        &self.config
    }

    pub fn prior_days(&self, test_day: u32, mode: TargetMode) -> Result<Vec<u32>> {
        let ty = self.collection.day_type(test_day)?;
        let mut out = Vec::new();
        for d in self.collection.days() {
            if d >= test_day {
                break;
            }
            if mode == TargetMode::Pooled || self.collection.day_type(d)? == ty {
                out.push(d);
            }
        }
        Ok(out)
    }

    /// Targets from the earlier days selected by `mode`, candidates from the
    /// planner and the history of every earlier day, then an annealing run.
    pub fn one_day(&self, test_day: u32, mode: TargetMode) -> Result<DayEval> {
        let day_type = self.collection.day_type(test_day)?;
        let prior = self.prior_days(test_day, mode)?;
        if prior.is_empty() {
            return Err(Error::Eval(format!(
                "day {test_day} has no earlier {} day",
                match mode {
                    TargetMode::Matched => day_type.as_str(),
                    TargetMode::Pooled => "observed",
                }
            )));
        }
        // targets follow the mode; history always spans every earlier day
        let mut pooled = Vec::new();
        let mut history = TripHistory::new();
        for d in self.collection.days() {
            if d >= test_day {
                break;
            }
            let ty = self.collection.day_type(d)?;
            let routes = self.collection.observed(d)?;
            if prior.contains(&d) {
                pooled.extend(routes.iter().cloned());
            }
            for r in routes {
                history.push(HistoryRecord {
                    route: r.clone(),
                    day: d,
                    day_type: ty,
                });
            }
        }
        let spec = MismatchSpec::empirical_from_routes(&pooled)?;
        let demand = self.collection.demand(test_day)?;
        let batch = build_candidate_sets(demand, &self.planner, &history, &self.config.candidates)?;
        if batch.sets.is_empty() {
            return Err(Error::Eval(format!(
                "no demand of day {test_day} can be assigned"
            )));
        }
        let trace = run(&batch.sets, &spec, self.config.sampler)?;
        let before = mismatch_report(
            &pooled,
            &routes_of(&batch.sets, &trace.initial_state),
            &self.config.report,
        )?;
        let after = mismatch_report(
            &pooled,
            &routes_of(&batch.sets, &trace.best_state),
            &self.config.report,
        )?;
        Ok(DayEval {
            day: test_day,
            day_type,
            mode,
            prior_days: prior,
            demands: demand.len(),
            unassigned: batch.unassigned.len(),
            trace,
            before,
            after,
        })
    }

    /// Every day of the filter with at least one usable earlier day, in order.
    pub fn online(&self, filter: Option<DayType>, mode: TargetMode) -> Result<Vec<OnlineRow>> {
        let days: Vec<u32> = self
            .collection
            .days()
            .into_iter()
            .filter(|&d| filter.is_none_or(|f| self.collection.day_type(d).ok() == Some(f)))
            .collect();
        if days.len() < 2 {
            return Err(Error::Eval(
                "online evaluation needs at least two days".into(),
            ));
        }
        let mut rows = Vec::new();
        for d in days {
            if self.prior_days(d, mode)?.is_empty() {
                continue;
            }
            rows.push(OnlineRow::from(&self.one_day(d, mode)?));
        }
        Ok(rows)
    }

    /// Matched and pooled runs for every day that has an earlier day of its
    /// own type. With a single day type both runs see the same days and agree.
    pub fn daytype_mix(&self) -> Result<Vec<MixRow>> {
        let mut rows = Vec::new();
        for d in self.collection.days() {
            if self.prior_days(d, TargetMode::Matched)?.is_empty() {
                continue;
            }
            let matched = self.one_day(d, TargetMode::Matched)?;
            let pooled = self.one_day(d, TargetMode::Pooled)?;
            rows.push(MixRow {
                day: d,
                day_type: matched.day_type,
                matched_prior: matched.prior_days.len(),
                pooled_prior: pooled.prior_days.len(),
                matched_error: matched.final_error(),
                pooled_error: pooled.final_error(),
            });
        }
        Ok(rows)
    }
}

/// One line of the online table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnlineRow {
    pub day: u32,
    pub day_type: DayType,
    pub prior_days: usize,
    pub demands: usize,
    pub unassigned: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub final_error: f64,
}

impl From<&DayEval> for OnlineRow {
    fn from(e: &DayEval) -> Self {
        OnlineRow {
            day: e.day,
            day_type: e.day_type,
            prior_days: e.prior_days.len(),
            demands: e.demands,
            unassigned: e.unassigned,
            checkpoints: e.trace.checkpoints.clone(),
            final_error: e.final_error(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixRow {
    pub day: u32,
    pub day_type: DayType,
    pub matched_prior: usize,
    pub pooled_prior: usize,
    pub matched_error: f64,
    pub pooled_error: f64,
}

/// One-shot wrapper around [`Evaluator::one_day`].
pub fn one_day_eval(
    collection: &Collection,
    test_day: u32,
    config: &EvalConfig,
    mode: TargetMode,
) -> Result<DayEval> {
    Evaluator::new(collection, config.clone())?.one_day(test_day, mode)
}

pub fn online_eval(
    collection: &Collection,
    filter: Option<DayType>,
    config: &EvalConfig,
    mode: TargetMode,
) -> Result<Vec<OnlineRow>> {
    Evaluator::new(collection, config.clone())?.online(filter, mode)
}

pub fn daytype_mix_eval(collection: &Collection, config: &EvalConfig) -> Result<Vec<MixRow>> {
    Evaluator::new(collection, config.clone())?.daytype_mix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Leg, RouteSource, Stop};

    fn leg(a: &Arc<Stop>, b: &Arc<Stop>, line: &str, t0: u32, t1: u32) -> Leg {
        Leg {
            board_stop: a.clone(),
            alight_stop: b.clone(),
            board_time: t0,
            alight_time: t1,
            line_id: line.into(),
            distance_m: 2000.0,
        }
    }

    #[test]
    fn ten_minute_transfer_gap() {
        let a = Arc::new(Stop::new("a", 48.69, 6.18).unwrap());
        let b = Arc::new(Stop::new("b", 48.69, 6.19).unwrap());
        let c = Arc::new(Stop::new("c", 48.69, 6.20).unwrap());
        let fast = Route::new(
            vec![leg(&a, &b, "L1", 0, 300), leg(&b, &c, "L2", 360, 660)],
            RouteSource::Planner,
        );
        let slow = Route::new(
            vec![leg(&a, &b, "L1", 0, 300), leg(&b, &c, "L2", 960, 1260)],
            RouteSource::History,
        );
        let r = mismatch_report(
            std::slice::from_ref(&slow),
            std::slice::from_ref(&fast),
            &ReportConfig::default(),
        )
        .unwrap();
        let t = r.get(Characteristic::TransferTime).unwrap();
        assert!((t.mean_gap - 600.0).abs() < 1e-9);
        let same = mismatch_report(
            std::slice::from_ref(&slow),
            std::slice::from_ref(&slow),
            &ReportConfig::default(),
        )
        .unwrap();
        for c in &same.characteristics {
            assert_eq!(c.l1, 0.0);
            assert_eq!(c.mean_gap, 0.0);
        }
        assert!(mismatch_report(&[], &[fast], &ReportConfig::default()).is_err());
    }
}
