//! Characteristic functions, histograms, target distributions and the L1
//! mismatch objective.
//!
//! The objective over a state `x` is `p(x) = sum_k w_k * |h_k(x) - z_k|_1`,
//! where `h_k` is the probability-mass histogram of characteristic `k` over
//! all assigned routes and `z_k` its target on the same binning. [`Objective`]
//! keeps one integer count per bin so that replacing a single route only
//! touches two bins per characteristic.

use std::f64::consts::FRAC_2_PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Discrete, DiscreteCDF, Normal, Poisson};

use crate::model::{CandidateSet, ChainState, Route};
use crate::{Error, Result};

/// Masses of a discretized parametric target must sum to one within this.
pub const TARGET_MASS_TOLERANCE: f64 = 1e-6;

/// Clamp applied to beta samples before fitting.
pub const BETA_FIT_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristic {
    FullTime,
    TransferTime,
    AngleRatio,
}

impl Characteristic {
    pub const ALL: [Characteristic; 3] = [
        Characteristic::FullTime,
        Characteristic::TransferTime,
        Characteristic::AngleRatio,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Characteristic::FullTime => "full_time",
            Characteristic::TransferTime => "transfer_time",
            Characteristic::AngleRatio => "angle_ratio",
        }
    }

    pub fn evaluate(self, route: &Route) -> Result<f64> {
        match self {
            Characteristic::FullTime => Ok(f64::from(full_trip_time(route))),
            Characteristic::TransferTime => Ok(f64::from(transfer_time(route))),
            Characteristic::AngleRatio => angle_ratio(route),
        }
    }

    /// Full time: 1-minute bins over 0..180 min. Transfer time: 1-minute bins
    /// over 0..60 min. Angle ratio: 50 bins over [0, 1].
    pub fn default_binning(self) -> Binning {
        match self {
            Characteristic::FullTime => Binning::uniform(0.0, 180.0 * 60.0, 180),
            Characteristic::TransferTime => Binning::uniform(0.0, 60.0 * 60.0, 60),
            Characteristic::AngleRatio => Binning::uniform(0.0, 1.0, 50),
        }
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Characteristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Characteristic::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| Error::invalid("characteristic", format!("unknown tag `{s}`")))
    }
}

/// Seconds between the first boarding and the last alighting.
pub fn full_trip_time(route: &Route) -> u32 {
    route
        .last_alight_time()
        .saturating_sub(route.first_board_time())
}

/// Total waiting and walking time between consecutive legs.
pub fn transfer_time(route: &Route) -> u32 {
    route
        .legs
        .windows(2)
        .map(|w| w[1].board_time.saturating_sub(w[0].alight_time))
        .sum()
}

/// Trip angle ratio `(2/pi) * atan(D / (sum D_i - D))`.
///
/// `D` is the great-circle distance from the first boarding to the last
/// alighting and `D_i` the leg distances. A route no longer than `D` scores 1;
/// a round trip (`D = 0`) scores 0.
pub fn angle_ratio(route: &Route) -> Result<f64> {
    let total = route.total_distance_m();
    if !(total > 0.0) {
        return Err(Error::invalid(
            "route",
            "angle ratio needs a positive total leg distance",
        ));
    }
    let direct = route.direct_distance_m();
    if direct == 0.0 {
        return Ok(0.0);
    }
    let excess = total - direct;
    if excess <= 0.0 {
        return Ok(1.0);
    }
    Ok(FRAC_2_PI * (direct / excess).atan())
}

/// Strictly increasing bin boundaries. Values below the first edge fall in
/// the first bin and values at or above the last edge in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    edges: Vec<f64>,
}

impl Binning {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("binning", "needs at least two edges"));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "binning",
                "edges must be finite and strictly increasing",
            ));
        }
        Ok(Binning { edges })
    }

    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(
            bins >= 1 && hi > lo,
            "uniform binning needs hi > lo and bins >= 1"
        );
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
        edges.push(hi);
        Binning { edges }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let upper = self.edges.partition_point(|e| *e <= x);
        upper.saturating_sub(1).min(self.bins() - 1)
    }

    pub fn center(&self, bin: usize) -> f64 {
        0.5 * (self.edges[bin] + self.edges[bin + 1])
    }
}

/// Probability-mass histogram over a binning.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    binning: Binning,
    masses: Vec<f64>,
    count: u64,
}

impl Histogram {
    pub fn from_values(binning: &Binning, values: impl IntoIterator<Item = f64>) -> Self {
        let mut counts = vec![0u32; binning.bins()];
        for v in values {
            counts[binning.bin_of(v)] += 1;
        }
        Histogram::from_counts(binning, &counts)
    }

    pub fn from_counts(binning: &Binning, counts: &[u32]) -> Self {
        assert_eq!(counts.len(), binning.bins(), "one count per bin");
        let count: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        let masses = if count == 0 {
            vec![0.0; counts.len()]
        } else {
            let n = count as f64;
            counts.iter().map(|&c| f64::from(c) / n).collect()
        };
        Histogram {
            binning: binning.clone(),
            masses,
            count,
        }
    }

    /// Histogram from explicit masses, which must sum to one.
    pub fn from_masses(binning: &Binning, masses: Vec<f64>, count: u64) -> Result<Self> {
        check_masses(binning, &masses, 1e-9)?;
        Ok(Histogram {
            binning: binning.clone(),
            masses,
            count,
        })
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Mean computed from bin centers.
    pub fn binned_mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| m * self.binning.center(i))
            .sum()
    }
}

fn check_masses(binning: &Binning, masses: &[f64], tol: f64) -> Result<()> {
    if masses.len() != binning.bins() {
        return Err(Error::BinningMismatch(format!(
            "{} masses for {} bins",
            masses.len(),
            binning.bins()
        )));
    }
    if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return Err(Error::invalid("masses", "must be finite and non-negative"));
    }
    let sum: f64 = masses.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::invalid(
            "masses",
            format!("sum to {sum}, expected 1"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetKind {
    Empirical,
    Beta {
        alpha: f64,
        beta: f64,
    },
    /// Rate over the bin index.
    Poisson {
        lambda: f64,
    },
    GaussianMixture(Vec<GaussianComponent>),
}

/// Desired distribution of one characteristic, discretized to a binning.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    kind: TargetKind,
    binning: Binning,
    masses: Vec<f64>,
}

impl TargetDistribution {
    pub fn empirical(histogram: Histogram) -> Result<Self> {
        check_masses(&histogram.binning, &histogram.masses, 1e-9)?;
        Ok(TargetDistribution {
            kind: TargetKind::Empirical,
            binning: histogram.binning,
            masses: histogram.masses,
        })
    }

    pub fn beta(binning: &Binning, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::invalid(
                "beta target",
                format!("shapes must be positive, got ({alpha}, {beta})"),
            ));
        }
        let dist =
            Beta::new(alpha, beta).map_err(|e| Error::invalid("beta target", e.to_string()))?;
        let masses = fold_cdf(binning, |x| dist.cdf(x.clamp(0.0, 1.0)));
        Self::parametric(TargetKind::Beta { alpha, beta }, binning, masses)
    }

    pub fn poisson(binning: &Binning, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(
                "poisson target",
                format!("rate must be non-negative, got {lambda}"),
            ));
        }
        let n = binning.bins();
        let mut masses = vec![0.0; n];
        if lambda == 0.0 {
            masses[0] = 1.0;
        } else {
            let dist = Poisson::new(lambda)
                .map_err(|e| Error::invalid("poisson target", e.to_string()))?;
            for (i, m) in masses.iter_mut().enumerate().take(n - 1) {
                *m = dist.pmf(i as u64);
            }
            masses[n - 1] = if n >= 2 {
                1.0 - dist.cdf(n as u64 - 2)
            } else {
                1.0
            };
            masses[n - 1] = masses[n - 1].max(0.0);
        }
        Self::parametric(TargetKind::Poisson { lambda }, binning, masses)
    }

    pub fn gaussian_mixture(binning: &Binning, components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid(
                "gaussian mixture",
                "needs at least one component",
            ));
        }
        let wsum: f64 = components.iter().map(|c| c.weight).sum();
        if (wsum - 1.0).abs() > 1e-9 || components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(Error::invalid(
                "gaussian mixture",
                format!("weights must be non-negative and sum to 1, got {wsum}"),
            ));
        }
        let normals = components
            .iter()
            .map(|c| {
                Normal::new(c.mean, c.stddev)
                    .map_err(|e| Error::invalid("gaussian mixture", e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let masses = fold_cdf(binning, |x| {
            components
                .iter()
                .zip(&normals)
                .map(|(c, n)| c.weight * n.cdf(x))
                .sum()
        });
        Self::parametric(TargetKind::GaussianMixture(components), binning, masses)
    }

    fn parametric(kind: TargetKind, binning: &Binning, masses: Vec<f64>) -> Result<Self> {
        check_masses(binning, &masses, TARGET_MASS_TOLERANCE)?;
        Ok(TargetDistribution {
            kind,
            binning: binning.clone(),
            masses,
        })
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

/// Bin masses from a CDF with the tails folded into the end bins.
fn fold_cdf(binning: &Binning, cdf: impl Fn(f64) -> f64) -> Vec<f64> {
    let e = binning.edges();
    let n = binning.bins();
    let at: Vec<f64> = e.iter().map(|&x| cdf(x)).collect();
    let mut masses: Vec<f64> = (0..n).map(|i| (at[i + 1] - at[i]).max(0.0)).collect();
    masses[0] += at[0];
    masses[n - 1] += (1.0 - at[n]).max(0.0);
    masses
}

/// Sum of absolute differences between two equally long mass vectors.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn l1_mismatch(h: &Histogram, z: &TargetDistribution) -> Result<f64> {
    if h.binning != z.binning {
        return Err(Error::BinningMismatch(format!(
            "histogram has {} bins, target has {}",
            h.binning.bins(),
            z.binning.bins()
        )));
    }
    Ok(l1_distance(&h.masses, &z.masses))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchTerm {
    pub characteristic: Characteristic,
    pub target: TargetDistribution,
    pub weight: f64,
}

/// Ordered characteristics with their targets and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchSpec {
    terms: Vec<MismatchTerm>,
}

impl MismatchSpec {
    pub fn new(terms: Vec<MismatchTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid(
                "mismatch spec",
                "needs at least one characteristic",
            ));
        }
        for (i, t) in terms.iter().enumerate() {
            if terms[..i]
                .iter()
                .any(|u| u.characteristic == t.characteristic)
            {
                return Err(Error::invalid(
                    "mismatch spec",
                    format!("characteristic `{}` listed twice", t.characteristic),
                ));
            }
            if !(t.weight >= 0.0) || !t.weight.is_finite() {
                return Err(Error::invalid(
                    "mismatch spec",
                    format!("weight for `{}` must be non-negative", t.characteristic),
                ));
            }
        }
        Ok(MismatchSpec { terms })
    }

    /// Unit-weight spec with empirical targets built from `routes` over the
    /// default binning of every characteristic.
    pub fn empirical_from_routes(routes: &[Route]) -> Result<Self> {
        let terms = Characteristic::ALL
            .into_iter()
            .map(|c| {
                Ok(MismatchTerm {
                    characteristic: c,
                    target: build_empirical_target(routes, c, &c.default_binning())?,
                    weight: 1.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MismatchSpec::new(terms)
    }

    pub fn terms(&self) -> &[MismatchTerm] {
        &self.terms
    }
}

/// Weighted mismatch from explicit histograms, one per spec term in order.
pub fn total_error(histograms: &[Histogram], spec: &MismatchSpec) -> Result<f64> {
    if histograms.len() != spec.terms.len() {
        return Err(Error::BinningMismatch(format!(
            "{} histograms for {} characteristics",
            histograms.len(),
            spec.terms.len()
        )));
    }
    let mut sum = 0.0;
    for (h, t) in histograms.iter().zip(&spec.terms) {
        sum += t.weight * l1_mismatch(h, &t.target)?;
    }
    Ok(sum)
}

/// Histogram of one characteristic over a set of routes.
pub fn histogram_of(
    routes: &[Route],
    characteristic: Characteristic,
    binning: &Binning,
) -> Result<Histogram> {
    let values = routes
        .iter()
        .map(|r| characteristic.evaluate(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Histogram::from_values(binning, values))
}

pub fn build_empirical_target(
    routes: &[Route],
    characteristic: Characteristic,
    binning: &Binning,
) -> Result<TargetDistribution> {
    if routes.is_empty() {
        return Err(Error::invalid("empirical target", "no routes to measure"));
    }
    TargetDistribution::empirical(histogram_of(routes, characteristic, binning)?)
}

/// Method-of-moments beta fit. Samples are clamped to `(1e-6, 1 - 1e-6)`.
pub fn fit_beta_moments(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Degenerate(
            "beta fit needs at least two samples".into(),
        ));
    }
    let clamped = samples
        .iter()
        .map(|x| x.clamp(BETA_FIT_CLAMP, 1.0 - BETA_FIT_CLAMP));
    let n = samples.len() as f64;
    let mean = clamped.clone().sum::<f64>() / n;
    let var = clamped.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::Degenerate(
            "beta fit on zero-variance samples".into(),
        ));
    }
    let common = mean * (1.0 - mean) / var - 1.0;
    if !(common > 0.0) {
        return Err(Error::Degenerate(format!(
            "variance {var} too large for a beta with mean {mean}"
        )));
    }
    Ok((mean * common, (1.0 - mean) * common))
}

/// Maximum-likelihood Poisson rate (the sample mean); 0 for no samples.
pub fn fit_poisson(samples: &[u32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|&s| f64::from(s)).sum::<f64>() / samples.len() as f64
}

/// Largest number of characteristics in a spec (one per tag).
const MAX_TERMS: usize = 3;

#[derive(Debug, Clone)]
struct PreparedTerm {
    characteristic: Characteristic,
    weight: f64,
    binning: Binning,
    target: Vec<f64>,
}

/// A pending single-variable change: `demand` moves from candidate `from` to
/// `to`. Applying it costs O(characteristics).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta {
    pub demand: usize,
    pub from: usize,
    pub to: usize,
    moves: [(u32, u32); MAX_TERMS],
    term_errors: [f64; MAX_TERMS],
    pub error: f64,
}

/// Candidate sets and a mismatch spec with every candidate's bin index
/// precomputed.
#[derive(Debug, Clone)]
pub struct Objective {
    terms: Vec<PreparedTerm>,
    offsets: Vec<usize>,
    bins: Vec<u32>,
}

impl Objective {
    pub fn new(sets: &[CandidateSet], spec: &MismatchSpec) -> Result<Self> {
        let terms: Vec<PreparedTerm> = spec
            .terms
            .iter()
            .map(|t| PreparedTerm {
                characteristic: t.characteristic,
                weight: t.weight,
                binning: t.target.binning.clone(),
                target: t.target.masses.clone(),
            })
            .collect();
        let k = terms.len();
        let mut offsets = Vec::with_capacity(sets.len() + 1);
        let mut bins = Vec::new();
        offsets.push(0);
        for set in sets {
            for c in set.candidates() {
                for t in &terms {
                    let v = t.characteristic.evaluate(&c.route)?;
                    bins.push(t.binning.bin_of(v) as u32);
                }
            }
            offsets.push(bins.len() / k);
        }
        Ok(Objective {
            terms,
            offsets,
            bins,
        })
    }

    pub fn demands(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn candidates_of(&self, demand: usize) -> usize {
        self.offsets[demand + 1] - self.offsets[demand]
    }

    pub fn characteristics(&self) -> impl Iterator<Item = Characteristic> + '_ {
        self.terms.iter().map(|t| t.characteristic)
    }

    pub fn binning(&self, term: usize) -> &Binning {
        &self.terms[term].binning
    }

    pub fn target(&self, term: usize) -> &[f64] {
        &self.terms[term].target
    }

    #[inline]
    fn bin(&self, demand: usize, cand: usize, term: usize) -> usize {
        self.bins[(self.offsets[demand] + cand) * self.terms.len() + term] as usize
    }

    /// Builds a state from scratch for the given assignment.
    pub fn state(&self, assignment: Vec<usize>) -> Result<ChainState> {
        if assignment.len() != self.demands() {
            return Err(Error::OutOfRange(format!(
                "assignment of length {} for {} demands",
                assignment.len(),
                self.demands()
            )));
        }
        for (j, &c) in assignment.iter().enumerate() {
            if c >= self.candidates_of(j) {
                return Err(Error::OutOfRange(format!(
                    "candidate {c} for demand {j} with {} candidates",
                    self.candidates_of(j)
                )));
            }
        }
        let counts: Vec<Vec<u32>> = (0..self.terms.len())
            .map(|k| {
                let mut counts = vec![0u32; self.terms[k].binning.bins()];
                for (j, &c) in assignment.iter().enumerate() {
                    counts[self.bin(j, c, k)] += 1;
                }
                counts
            })
            .collect();
        let mut state = ChainState {
            assignment,
            counts,
            term_errors: vec![0.0; self.terms.len()],
            error: 0.0,
        };
        self.refresh(&mut state);
        Ok(state)
    }

    /// Recomputes the cached errors from the cached counts.
    pub fn refresh(&self, state: &mut ChainState) {
        let n = state.assignment.len().max(1) as f64;
        let mut error = 0.0;
        for (k, t) in self.terms.iter().enumerate() {
            let l1: f64 = state.counts[k]
                .iter()
                .zip(&t.target)
                .map(|(&c, z)| (f64::from(c) / n - z).abs())
                .sum();
            state.term_errors[k] = l1;
            error += t.weight * l1;
        }
        state.error = error;
    }

    pub fn histograms(&self, state: &ChainState) -> Vec<Histogram> {
        self.terms
            .iter()
            .zip(&state.counts)
            .map(|(t, c)| Histogram::from_counts(&t.binning, c))
            .collect()
    }

    /// Mismatch recomputed from the state's histograms.
    pub fn total_error(&self, state: &ChainState) -> f64 {
        self.histograms(state)
            .iter()
            .zip(&self.terms)
            .map(|(h, t)| t.weight * l1_distance(h.masses(), &t.target))
            .sum()
    }

    /// Error of the state with `demand` switched to `cand`, plus the change
    /// needed to commit it.
    pub fn delta_error(&self, state: &ChainState, demand: usize, cand: usize) -> Result<Delta> {
        if demand >= self.demands() {
            return Err(Error::OutOfRange(format!(
                "demand {demand} of {}",
                self.demands()
            )));
        }
        if cand >= self.candidates_of(demand) {
            return Err(Error::OutOfRange(format!(
                "candidate {cand} for demand {demand} with {} candidates",
                self.candidates_of(demand)
            )));
        }
        let from = state.assignment[demand];
        let n = state.assignment.len() as f64;
        let mut moves = [(0u32, 0u32); MAX_TERMS];
        let mut term_errors = [0.0; MAX_TERMS];
        let mut error = 0.0;
        for (k, t) in self.terms.iter().enumerate() {
            let a = self.bin(demand, from, k);
            let b = self.bin(demand, cand, k);
            moves[k] = (a as u32, b as u32);
            let mut l1 = state.term_errors[k];
            if a != b {
                let counts = &state.counts[k];
                let (ca, cb) = (f64::from(counts[a]), f64::from(counts[b]));
                let (za, zb) = (t.target[a], t.target[b]);
                l1 += ((ca - 1.0) / n - za).abs() - (ca / n - za).abs();
                l1 += ((cb + 1.0) / n - zb).abs() - (cb / n - zb).abs();
            }
            term_errors[k] = l1;
            error += t.weight * l1;
        }
        Ok(Delta {
            demand,
            from,
            to: cand,
            moves,
            term_errors,
            error,
        })
    }

    /// Commits a delta computed against this exact state.
    pub fn apply(&self, state: &mut ChainState, delta: &Delta) {
        debug_assert_eq!(state.assignment[delta.demand], delta.from);
        for k in 0..self.terms.len() {
            let (a, b) = delta.moves[k];
            if a != b {
                state.counts[k][a as usize] -= 1;
                state.counts[k][b as usize] += 1;
            }
            state.term_errors[k] = delta.term_errors[k];
        }
        state.assignment[delta.demand] = delta.to;
        state.error = delta.error;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Leg, RouteSource, Stop};
    use std::sync::Arc;

    fn stop(id: &str, lat: f64, lon: f64) -> Arc<Stop> {
        Arc::new(Stop::new(id, lat, lon).unwrap())
    }

    fn leg(a: &Arc<Stop>, b: &Arc<Stop>, t0: u32, t1: u32, dist: f64) -> Leg {
        Leg {
            board_stop: a.clone(),
            alight_stop: b.clone(),
            board_time: t0,
            alight_time: t1,
            line_id: "L".into(),
            distance_m: dist,
        }
    }

    const H: u32 = 3600;

    #[test]
    fn full_and_transfer_times() {
        let a = stop("a", 48.69, 6.18);
        let b = stop("b", 48.70, 6.18);
        let c = stop("c", 48.71, 6.18);
        let one = Route::new(
            vec![leg(&a, &b, 8 * H, 8 * H + 1200, 1200.0)],
            RouteSource::Planner,
        );
        assert_eq!(full_trip_time(&one), 1200);
        assert_eq!(transfer_time(&one), 0);
        let two = Route::new(
            vec![
                leg(&a, &b, 8 * H, 8 * H + 600, 1200.0),
                leg(&b, &c, 8 * H + 18 * 60, 8 * H + 35 * 60, 1200.0),
            ],
            RouteSource::Planner,
        );
        assert_eq!(full_trip_time(&two), 2100);
        assert_eq!(transfer_time(&two), 480);
    }

    #[test]
    fn angle_ratio_cases() {
        let a = stop("a", 48.69, 6.18);
        let b = stop("b", 48.70, 6.18);
        let round = Route::new(
            vec![leg(&a, &b, 0, 100, 1200.0), leg(&b, &a, 200, 300, 1200.0)],
            RouteSource::History,
        );
        assert_eq!(angle_ratio(&round).unwrap(), 0.0);
        let d = great_circle_m(&a, &b);
        let direct = Route::new(vec![leg(&a, &b, 0, 100, d)], RouteSource::Planner);
        assert_eq!(angle_ratio(&direct).unwrap(), 1.0);
        let zero = Route::new(vec![leg(&a, &b, 0, 100, 0.0)], RouteSource::Planner);
        assert!(angle_ratio(&zero).is_err());
    }

    use crate::model::great_circle_m;

    #[test]
    fn angle_ratio_three_to_five_km() {
        // Two points 3000 m apart along a meridian, route length 5000 m.
        let a = stop("a", 0.0, 0.0);
        let dlat = (3000.0 / crate::model::EARTH_RADIUS_M).to_degrees();
        let b = stop("b", dlat, 0.0);
        let d = great_circle_m(&a, &b);
        assert!((d - 3000.0).abs() < 1e-6);
        let r = Route::new(vec![leg(&a, &b, 0, 100, 5000.0)], RouteSource::Planner);
        // (2/pi) * atan(1.5), evaluated independently
        let expected = 0.625_666_118_504_110_1;
        assert!((angle_ratio(&r).unwrap() - expected).abs() < 1e-6);
    }

    #[test]
    fn binning_folds_out_of_range() {
        let b = Binning::uniform(0.0, 10.0, 5);
        assert_eq!(b.bin_of(-3.0), 0);
        assert_eq!(b.bin_of(0.0), 0);
        assert_eq!(b.bin_of(1.99), 0);
        assert_eq!(b.bin_of(2.0), 1);
        assert_eq!(b.bin_of(10.0), 4);
        assert_eq!(b.bin_of(1e9), 4);
        assert!(Binning::new(vec![0.0, 0.0]).is_err());
        assert!(Binning::new(vec![0.0]).is_err());
    }

    #[test]
    fn l1_examples() {
        let b = Binning::uniform(0.0, 2.0, 2);
        let h = Histogram::from_masses(&b, vec![0.5, 0.5], 2).unwrap();
        let z =
            TargetDistribution::empirical(Histogram::from_masses(&b, vec![0.25, 0.75], 4).unwrap())
                .unwrap();
        assert!((l1_mismatch(&h, &z).unwrap() - 0.5).abs() < 1e-15);

        let h0 = Histogram::from_masses(&b, vec![1.0, 0.0], 1).unwrap();
        let z1 =
            TargetDistribution::empirical(Histogram::from_masses(&b, vec![0.0, 1.0], 1).unwrap())
                .unwrap();
        assert_eq!(l1_mismatch(&h0, &z1).unwrap(), 2.0);

        let other = Binning::uniform(0.0, 3.0, 3);
        let z3 = TargetDistribution::poisson(&other, 1.0).unwrap();
        assert!(matches!(
            l1_mismatch(&h, &z3),
            Err(Error::BinningMismatch(_))
        ));
    }

    #[test]
    fn parametric_targets_have_unit_mass() {
        let ang = Characteristic::AngleRatio.default_binning();
        let beta = TargetDistribution::beta(&ang, 0.26, 0.24).unwrap();
        assert!((beta.masses().iter().sum::<f64>() - 1.0).abs() < TARGET_MASS_TOLERANCE);
        // two modes at the ends
        assert!(beta.masses()[0] > beta.masses()[25]);
        assert!(beta.masses()[49] > beta.masses()[25]);

        let tr = Characteristic::TransferTime.default_binning();
        let p = TargetDistribution::poisson(&tr, 7.0).unwrap();
        assert!((p.masses().iter().sum::<f64>() - 1.0).abs() < TARGET_MASS_TOLERANCE);
        let p0 = TargetDistribution::poisson(&tr, 0.0).unwrap();
        assert_eq!(p0.masses()[0], 1.0);

        let ft = Characteristic::FullTime.default_binning();
        let g = TargetDistribution::gaussian_mixture(
            &ft,
            vec![
                GaussianComponent {
                    weight: 0.6,
                    mean: 1200.0,
                    stddev: 400.0,
                },
                GaussianComponent {
                    weight: 0.4,
                    mean: 2400.0,
                    stddev: 900.0,
                },
            ],
        )
        .unwrap();
        assert!((g.masses().iter().sum::<f64>() - 1.0).abs() < TARGET_MASS_TOLERANCE);
        assert!(TargetDistribution::beta(&ang, 0.0, 1.0).is_err());
        assert!(TargetDistribution::gaussian_mixture(
            &ft,
            vec![GaussianComponent {
                weight: 0.5,
                mean: 0.0,
                stddev: 1.0
            }]
        )
        .is_err());
    }

    #[test]
    fn poisson_fit_examples() {
        assert_eq!(fit_poisson(&[0, 0, 0]), 0.0);
        assert_eq!(fit_poisson(&[1, 2, 3]), 2.0);
    }

    #[test]
    fn beta_fit_symmetry_and_errors() {
        let s: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 0.25 } else { 0.75 })
            .collect();
        let (a, b) = fit_beta_moments(&s).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(fit_beta_moments(&[0.5, 0.5, 0.5]).is_err());
        assert!(fit_beta_moments(&[0.5]).is_err());
        // variance of {0, 1} exceeds m(1-m) after the unbiased correction
        assert!(fit_beta_moments(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn empirical_target_counts() {
        let a = stop("a", 48.69, 6.18);
        let b = stop("b", 48.70, 6.18);
        let r1 = Route::new(vec![leg(&a, &b, 0, 300, 1200.0)], RouteSource::History);
        let r2 = Route::new(vec![leg(&a, &b, 0, 900, 1200.0)], RouteSource::History);
        let bins = Binning::uniform(0.0, 1200.0, 2);
        let one =
            build_empirical_target(std::slice::from_ref(&r1), Characteristic::FullTime, &bins)
                .unwrap();
        assert_eq!(one.masses(), &[1.0, 0.0]);
        let two = build_empirical_target(&[r1, r2], Characteristic::FullTime, &bins).unwrap();
        assert_eq!(two.masses(), &[0.5, 0.5]);
        assert!(build_empirical_target(&[], Characteristic::FullTime, &bins).is_err());
    }

    #[test]
    fn spec_rejects_duplicates() {
        let bins = Binning::uniform(0.0, 1.0, 2);
        let z = TargetDistribution::beta(&bins, 1.0, 1.0).unwrap();
        let term = MismatchTerm {
            characteristic: Characteristic::AngleRatio,
            target: z,
            weight: 1.0,
        };
        assert!(MismatchSpec::new(vec![]).is_err());
        assert!(MismatchSpec::new(vec![term.clone(), term]).is_err());
    }
}
