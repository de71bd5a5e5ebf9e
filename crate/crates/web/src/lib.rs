//! Browser bindings for the demo page in `www/`.
//!
//! Three operations: discretizing a parametric target, stepping an annealing
//! chain over a small synthetic day, and comparing observed trips against
//! planner-optimal ones. Errors cross the boundary as strings.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::sync::Arc;

use tripmix::candidates::{build_candidate_sets, CandidateConfig, HistoryRecord, TripHistory};
use tripmix::eval::{mismatch_report, ReportConfig};
use tripmix::metrics::{
    Binning, Characteristic, GaussianComponent, MismatchSpec, TargetDistribution,
};
use tripmix::planner::{Planner, PlannerConfig};
use tripmix::sampler::{Annealer, AnnealingSchedule, SamplerConfig};
use tripmix::synth::{Generator, GridConfig, SynthConfig};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn characteristic(tag: &str) -> Result<Characteristic, String> {
    tag.parse().map_err(err)
}

/// Bin masses of a parametric target on `[lo, hi)` split into `bins`.
/// `kind` is `beta` (a, b), `poisson` (a = rate over the bin index) or
/// `gaussian` (a = mean, b = standard deviation).
#[wasm_bindgen]
pub fn discretize_target(
    kind: &str,
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<Vec<f64>, String> {
    if bins == 0 || !(hi > lo) {
        return Err("need at least one bin and hi > lo".into());
    }
    let binning = Binning::uniform(lo, hi, bins);
    let target = match kind {
        "beta" => TargetDistribution::beta(&binning, a, b),
        "poisson" => TargetDistribution::poisson(&binning, a),
        "gaussian" => TargetDistribution::gaussian_mixture(
            &binning,
            vec![GaussianComponent {
                weight: 1.0,
                mean: a,
                stddev: b,
            }],
        ),
        other => return Err(format!("unknown target kind `{other}`")),
    }
    .map_err(err)?;
    Ok(target.masses().to_vec())
}

fn small_config(seed: u64, trips: u32, days: u32) -> SynthConfig {
    SynthConfig {
        seed,
        days,
        weekends: false,
        trips_per_day: trips,
        network: GridConfig {
            rows: 4,
            cols: 4,
            ..GridConfig::default()
        },
        ..SynthConfig::default()
    }
}

/// Annealing over one synthetic test day, with targets and history taken
/// from the previous day.
#[wasm_bindgen]
pub struct AnnealDemo {
    annealer: Annealer,
    demands: usize,
}

#[wasm_bindgen]
impl AnnealDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, trips: u32, l0: f64, decay: f64) -> Result<AnnealDemo, String> {
        let generator = Generator::new(small_config(seed, trips, 2)).map_err(err)?;
        let (past, today) = (
            generator.generate_day(0).map_err(err)?,
            generator.generate_day(1).map_err(err)?,
        );
        let spec = MismatchSpec::empirical_from_routes(&past.observed).map_err(err)?;
        let history = TripHistory::from_records(past.observed.iter().map(|r| HistoryRecord {
            route: r.clone(),
            day: past.day,
            day_type: past.day_type,
        }));
        let batch = build_candidate_sets(
            &today.triples,
            generator.planner(),
            &history,
            &CandidateConfig::default(),
        )
        .map_err(err)?;
        let config = SamplerConfig {
            iterations: u64::MAX,
            schedule: AnnealingSchedule {
                l0,
                decay,
                l_min: (l0 * 1e-2).min(1e-5),
            },
            seed,
            checkpoint_every: u64::MAX,
            ..SamplerConfig::default()
        };
        let annealer = Annealer::new(&batch.sets, &spec, config).map_err(err)?;
        Ok(AnnealDemo {
            annealer,
            demands: batch.sets.len(),
        })
    }

    /// Runs `n` proposals and returns how many were accepted.
    pub fn step(&mut self, n: u32) -> Result<u32, String> {
        let mut accepted = 0;
        for _ in 0..n {
            accepted += u32::from(self.annealer.step().map_err(err)?);
        }
        Ok(accepted)
    }

    pub fn error(&self) -> f64 {
        self.annealer.state().error()
    }

    pub fn best_error(&self) -> f64 {
        self.annealer.best_error()
    }

    pub fn temperature(&self) -> f64 {
        self.annealer.temperature()
    }

    pub fn iteration(&self) -> f64 {
        self.annealer.iteration() as f64
    }

    pub fn demands(&self) -> usize {
        self.demands
    }

    /// Current bin masses of one characteristic.
    pub fn histogram(&self, tag: &str) -> Result<Vec<f64>, String> {
        let k = self.term(tag)?;
        let obj = self.annealer.objective();
        Ok(obj.histograms(self.annealer.state())[k].masses().to_vec())
    }

    pub fn target(&self, tag: &str) -> Result<Vec<f64>, String> {
        let k = self.term(tag)?;
        Ok(self.annealer.objective().target(k).to_vec())
    }

    fn term(&self, tag: &str) -> Result<usize, String> {
        let c = characteristic(tag)?;
        self.annealer
            .objective()
            .characteristics()
            .position(|x| x == c)
            .ok_or_else(|| format!("`{tag}` is not a target"))
    }
}

/// Observed trips of a synthetic day against the planner's rank-1 route for
/// the same demands, as CSV:
/// `characteristic, lo, hi, observed, planner` followed by a blank line and
/// `characteristic, observed_mean, planner_mean, l1`.
#[wasm_bindgen]
pub fn compare_with_planner(seed: u64, trips: u32) -> Result<String, String> {
    let generator = Generator::new(small_config(seed, trips, 1)).map_err(err)?;
    let day = generator.generate_day(0).map_err(err)?;
    let planner = Planner::new(Arc::clone(generator.network()), PlannerConfig::default());
    let (mut observed, mut planned) = (Vec::new(), Vec::new());
    for (t, r) in day.triples.iter().zip(&day.observed) {
        if let Some(best) = planner.k_top_routes(t, 1).map_err(err)?.into_iter().next() {
            observed.push(r.clone());
            planned.push(best);
        }
    }
    let report = mismatch_report(&observed, &planned, &ReportConfig::default()).map_err(err)?;
    let mut out = String::from("characteristic,lo,hi,observed,planner\n");
    for c in &report.characteristics {
        for (i, (o, s)) in c.observed.iter().zip(&c.simulated).enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.characteristic.tag(),
                c.edges[i],
                c.edges[i + 1],
                o,
                s
            ));
        }
    }
    out.push_str("\ncharacteristic,observed_mean,planner_mean,l1\n");
    for c in &report.characteristics {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.characteristic.tag(),
            c.observed_mean,
            c.simulated_mean,
            c.l1
        ));
    }
    Ok(out)
}
