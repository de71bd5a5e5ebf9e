//! Metropolis-Hastings with simulated annealing over route assignments.
//!
//! Each iteration picks one demand whose candidate set has at least two
//! routes, proposes a different candidate drawn from the set's weights, and
//! accepts with
//!
//! ```text
//! alpha = min(1, q(cur | cand) / q(cand | cur) * ((err_cur + eps) / (err_cand + eps))^(1 / L))
//! ```
//!
//! so lower mismatch is always preferred. The temperature `L` shrinks by
//! `decay` once per sweep (one sweep = as many proposals as demands) and never
//! drops below `l_min`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::metrics::{MismatchSpec, Objective};
use crate::model::{CandidateSet, ChainState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealingSchedule {
    pub l0: f64,
    /// Multiplier applied once per sweep.
    pub decay: f64,
    pub l_min: f64,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        AnnealingSchedule {
            l0: 1.0,
            decay: 0.99,
            l_min: 1e-3,
        }
    }
}

impl AnnealingSchedule {
    /// A decay of exactly 1 is accepted and keeps the temperature constant.
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::config(
                "decay",
                format!("{} is outside (0, 1]", self.decay),
            ));
        }
        if !(self.l_min > 0.0) || !self.l_min.is_finite() {
            return Err(Error::config(
                "l_min",
                format!("{} must be positive", self.l_min),
            ));
        }
        if !(self.l0 >= self.l_min) || !self.l0.is_finite() {
            return Err(Error::config(
                "l0",
                format!(
                    "{} must be finite and at least l_min = {}",
                    self.l0, self.l_min
                ),
            ));
        }
        Ok(())
    }

    pub fn cool(&self, temperature: f64) -> f64 {
        (temperature * self.decay).max(self.l_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub iterations: u64,
    pub schedule: AnnealingSchedule,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub epsilon: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 100_000,
            schedule: AnnealingSchedule::default(),
            seed: 0,
            checkpoint_every: 25_000,
            epsilon: 1e-9,
        }
    }
}

impl SamplerConfig {
    /// Zero iterations is allowed and returns the initial state unchanged.
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.checkpoint_every == 0 {
            return Err(Error::config("checkpoint_every", "must be at least 1"));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::config(
                "epsilon",
                format!("{} must be positive", self.epsilon),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub iteration: u64,
    pub error: f64,
    pub best_error: f64,
    /// Accepted over proposed since the previous checkpoint; 0 when nothing
    /// was proposed.
    pub acceptance_rate: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub checkpoints: Vec<Checkpoint>,
    pub initial_state: ChainState,
    pub final_state: ChainState,
    pub best_state: ChainState,
    pub proposals: u64,
    pub accepted: u64,
}

impl RunTrace {
    pub fn initial_error(&self) -> f64 {
        self.checkpoints.first().map_or(f64::NAN, |c| c.error)
    }
}

/// `min(1, correction * ((err_curr + eps) / (err_cand + eps))^(1 / L))`,
/// evaluated in log space.
pub fn acceptance_probability(
    err_curr: f64,
    err_cand: f64,
    correction: f64,
    temperature: f64,
    epsilon: f64,
) -> f64 {
    let log_alpha =
        correction.ln() + ((err_curr + epsilon).ln() - (err_cand + epsilon).ln()) / temperature;
    if log_alpha >= 0.0 {
        1.0
    } else if log_alpha.is_nan() {
        0.0
    } else {
        log_alpha.exp()
    }
}

/// One proposed single-variable move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub demand: usize,
    pub candidate: usize,
    /// `Pr(cand) / Pr(current)` from the candidate-set weights.
    pub weight_ratio: f64,
    /// Hastings factor `q(current | cand) / q(cand | current)` of the
    /// restricted kernel.
    pub correction: f64,
}

/// Restricted proposal kernel: a demand is chosen uniformly among those with
/// an alternative, then a candidate other than the current one with
/// probability proportional to its weight.
#[derive(Debug, Clone)]
pub struct Proposer {
    movable: Vec<usize>,
    offsets: Vec<usize>,
    weights: Vec<f64>,
}

impl Proposer {
    pub fn new(sets: &[CandidateSet]) -> Self {
        let mut offsets = Vec::with_capacity(sets.len() + 1);
        let mut weights = Vec::new();
        let mut movable = Vec::new();
        offsets.push(0);
        for (j, s) in sets.iter().enumerate() {
            if s.len() >= 2 {
                movable.push(j);
            }
            weights.extend(s.candidates().iter().map(|c| c.weight));
            offsets.push(weights.len());
        }
        Proposer {
            movable,
            offsets,
            weights,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.movable.is_empty()
    }

    pub fn movable(&self) -> &[usize] {
        &self.movable
    }

    pub fn propose<R: Rng + ?Sized>(&self, assignment: &[usize], rng: &mut R) -> Result<Proposal> {
        if self.movable.is_empty() {
            return Err(Error::FrozenChain);
        }
        let demand = self.movable[rng.random_range(0..self.movable.len())];
        let w = &self.weights[self.offsets[demand]..self.offsets[demand + 1]];
        let cur = assignment[demand];
        let w_cur = w[cur];
        let rest = 1.0 - w_cur;
        let mut u = rng.random::<f64>() * rest;
        let mut candidate = usize::MAX;
        let mut last = usize::MAX;
        for (i, &wi) in w.iter().enumerate() {
            if i == cur {
                continue;
            }
            last = i;
            if u < wi {
                candidate = i;
                break;
            }
            u -= wi;
        }
        // rounding can leave u just past the final weight
        if candidate == usize::MAX {
            candidate = last;
        }
        let w_cand = w[candidate];
        Ok(Proposal {
            demand,
            candidate,
            weight_ratio: w_cand / w_cur,
            correction: (w_cur * (1.0 - w_cur)) / (w_cand * (1.0 - w_cand)),
        })
    }
}

fn draw<R: Rng + ?Sized>(set: &CandidateSet, rng: &mut R) -> usize {
    let mut u: f64 = rng.random();
    for (i, c) in set.candidates().iter().enumerate() {
        if u < c.weight {
            return i;
        }
        u -= c.weight;
    }
    set.len() - 1
}

/// Samples each demand's candidate independently from its weights.
pub fn initial_assignment<R: Rng + ?Sized>(sets: &[CandidateSet], rng: &mut R) -> Vec<usize> {
    sets.iter().map(|s| draw(s, rng)).collect()
}

/// Seeded initial state with caches computed from scratch.
pub fn initialize(sets: &[CandidateSet], spec: &MismatchSpec, seed: u64) -> Result<ChainState> {
    let objective = Objective::new(sets, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    objective.state(initial_assignment(sets, &mut rng))
}

/// A chain that can be advanced a few iterations at a time.
#[derive(Debug, Clone)]
pub struct Annealer {
    objective: Objective,
    proposer: Proposer,
    config: SamplerConfig,
    rng: ChaCha8Rng,
    state: ChainState,
    temperature: f64,
    iteration: u64,
    sweep: u64,
    best_error: f64,
    best_assignment: Vec<usize>,
    initial_assignment: Vec<usize>,
    journal: Vec<(usize, usize)>,
    window: (u64, u64),
    proposals: u64,
    accepted: u64,
    checkpoints: Vec<Checkpoint>,
}

impl Annealer {
    pub fn new(sets: &[CandidateSet], spec: &MismatchSpec, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let objective = Objective::new(sets, spec)?;
        let proposer = Proposer::new(sets);
        if proposer.is_frozen() && config.iterations > 0 {
            return Err(Error::FrozenChain);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let state = objective.state(initial_assignment(sets, &mut rng))?;
        let mut a = Annealer {
            best_error: state.error,
            best_assignment: state.assignment.clone(),
            initial_assignment: state.assignment.clone(),
            sweep: sets.len().max(1) as u64,
            objective,
            proposer,
            temperature: config.schedule.l0,
            config,
            rng,
            state,
            iteration: 0,
            journal: Vec::new(),
            window: (0, 0),
            proposals: 0,
            accepted: 0,
            checkpoints: Vec::new(),
        };
        a.checkpoint();
        Ok(a)
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn best_error(&self) -> f64 {
        self.best_error
    }

    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.checkpoints
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    fn checkpoint(&mut self) {
        let (proposed, accepted) = self.window;
        self.checkpoints.push(Checkpoint {
            iteration: self.iteration,
            error: self.state.error,
            best_error: self.best_error,
            acceptance_rate: if proposed == 0 {
                0.0
            } else {
                accepted as f64 / proposed as f64
            },
            temperature: self.temperature,
        });
        self.window = (0, 0);
    }

    /// One proposal, ignoring the configured iteration budget.
    pub fn step(&mut self) -> Result<bool> {
        let p = self
            .proposer
            .propose(&self.state.assignment, &mut self.rng)?;
        let delta = self
            .objective
            .delta_error(&self.state, p.demand, p.candidate)?;
        let alpha = acceptance_probability(
            self.state.error,
            delta.error,
            p.correction,
            self.temperature,
            self.config.epsilon,
        );
        let u: f64 = self.rng.random();
        let accept = u < alpha;
        self.proposals += 1;
        self.window.0 += 1;
        if accept {
            self.accepted += 1;
            self.window.1 += 1;
            self.objective.apply(&mut self.state, &delta);
            self.journal.push((p.demand, p.candidate));
            if self.state.error < self.best_error {
                self.record_best();
            } else if self.journal.len() > self.best_assignment.len() {
                // replaying would cost more than copying
                self.journal.clear();
                self.journal.push((usize::MAX, 0));
            }
        }
        self.iteration += 1;
        if self.iteration.is_multiple_of(self.sweep) {
            self.temperature = self.config.schedule.cool(self.temperature);
            self.objective.refresh(&mut self.state);
            if self.state.error < self.best_error {
                self.record_best();
            }
        }
        if self.iteration.is_multiple_of(self.config.checkpoint_every) {
            self.checkpoint();
        }
        Ok(accept)
    }

    fn record_best(&mut self) {
        if self.journal.first() == Some(&(usize::MAX, 0)) {
            self.best_assignment.clone_from(&self.state.assignment);
        } else {
            for &(j, c) in &self.journal {
                self.best_assignment[j] = c;
            }
        }
        self.journal.clear();
        self.best_error = self.state.error;
    }

    /// Runs up to `n` more iterations without exceeding the budget. Returns
    /// the number performed.
    pub fn advance(&mut self, n: u64) -> Result<u64> {
        let n = n.min(self.config.iterations.saturating_sub(self.iteration));
        for _ in 0..n {
            self.step()?;
        }
        Ok(n)
    }

    /// Runs out the budget and returns the trace.
    pub fn finish(mut self) -> Result<RunTrace> {
        self.advance(u64::MAX)?;
        if self.checkpoints.last().map(|c| c.iteration) != Some(self.iteration) {
            self.checkpoint();
        }
        let best_state = self.objective.state(self.best_assignment.clone())?;
        let initial_state = self.objective.state(self.initial_assignment)?;
        Ok(RunTrace {
            checkpoints: self.checkpoints,
            initial_state,
            final_state: self.state,
            best_state,
            proposals: self.proposals,
            accepted: self.accepted,
        })
    }
}

/// Full annealing run.
pub fn run(sets: &[CandidateSet], spec: &MismatchSpec, config: SamplerConfig) -> Result<RunTrace> {
    Annealer::new(sets, spec, config)?.finish()
}
