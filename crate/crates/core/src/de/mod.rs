//! Differential Evolution (DE/rand/1/bin) over a box-bounded continuous
//! space, maximizing an arbitrary black-box objective.
//!
//! Each generation builds one trial vector per member (mutation, binomial
//! crossover, clipping to the bounds), evaluates all trials, and keeps a trial
//! only when it is strictly fitter than the member it competes with. The run
//! stops early on a success predicate or when the mean population fitness has
//! not moved for `stagnation_patience` generations.
//!
//! All random draws for a generation are made sequentially, in member order,
//! before any evaluation. Evaluation may then run in parallel without
//! affecting the outcome, so a run is a pure function of its configuration
//! and objective.

mod trajectory;

pub use trajectory::{GenerationRecord, Trajectory};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DeRng = ChaCha8Rng;

/// Mean-fitness change below which a generation counts as stagnant.
pub const STAGNATION_TOLERANCE: f64 = 1e-12;

/// Retries granted to a generation whose evaluation timed out.
const TIMEOUT_RETRIES: usize = 2;

/// A fitness function to maximize.
pub trait Objective: Sync {
    fn evaluate(&self, vector: &[f64]) -> Result<f64>;

    /// Upper bound on concurrent `evaluate` calls; `None` means unbounded and
    /// `Some(1)` forces sequential evaluation.
    fn max_concurrency(&self) -> Option<usize> {
        None
    }
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    fn evaluate(&self, vector: &[f64]) -> Result<f64> {
        self(vector)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub population_size: usize,
    pub scale_factor: f64,
    pub crossover_rate: f64,
    pub max_generations: usize,
    /// Zero disables stagnation stopping.
    pub stagnation_patience: usize,
    pub seed: u64,
    pub bounds: Vec<(f64, f64)>,
}

impl DeConfig {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        DeConfig {
            population_size: 30,
            scale_factor: 0.7,
            crossover_rate: 0.9,
            max_generations: 200,
            stagnation_patience: 10,
            seed: 0,
            bounds,
        }
    }

    pub fn dimensions(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::Config(format!(
                "population size {} < 4; mutation needs three other members",
                self.population_size
            )));
        }
        if self.max_generations < 1 {
            return Err(Error::Config("max_generations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Config(format!(
                "crossover rate {} outside [0, 1]",
                self.crossover_rate
            )));
        }
        if !self.scale_factor.is_finite() {
            return Err(Error::Config("scale factor must be finite".into()));
        }
        if self.bounds.is_empty() {
            return Err(Error::Config("search space has no dimensions".into()));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!(
                    "dimension {j}: invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub generation: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Index and fitness of the fittest member; ties go to the lowest index.
    pub fn best(&self) -> (usize, f64) {
        let mut best = 0;
        for (i, &f) in self.fitness.iter().enumerate() {
            if f > self.fitness[best] {
                best = i;
            }
        }
        (best, self.fitness[best])
    }

    pub fn mean_fitness(&self) -> f64 {
        self.fitness.iter().sum::<f64>() / self.fitness.len() as f64
    }

    /// Member indices sorted by descending fitness (stable).
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.fitness[b].total_cmp(&self.fitness[a]));
        order
    }
}

fn evaluate_all(objective: &dyn Objective, vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let eval = |v: &Vec<f64>| {
        objective
            .evaluate(v)
            .map(|f| if f.is_nan() { f64::NEG_INFINITY } else { f })
    };
    match objective.max_concurrency() {
        Some(1) => vectors.iter().map(eval).collect(),
        Some(k) => {
            let mut out = Vec::with_capacity(vectors.len());
            for chunk in vectors.chunks(k.max(1)) {
                out.extend(chunk.par_iter().map(eval).collect::<Result<Vec<_>>>()?);
            }
            Ok(out)
        }
        None => vectors.par_iter().map(eval).collect(),
    }
}

/// Samples `Q` members uniformly inside the bounds and evaluates them.
pub fn initialize(
    config: &DeConfig,
    objective: &dyn Objective,
    rng: &mut DeRng,
) -> Result<Population> {
    config.validate()?;
    let members: Vec<Vec<f64>> = (0..config.population_size)
        .map(|_| {
            config
                .bounds
                .iter()
                .map(|&(lo, hi)| (lo + rng.gen::<f64>() * (hi - lo)).min(hi))
                .collect::<Vec<f64>>()
        })
        .collect();
    let fitness = evaluate_all(objective, &members)?;
    Ok(Population {
        members,
        fitness,
        generation: 0,
    })
}

/// `V_m1 + f * (V_m2 - V_m3)` with three distinct members other than the
/// target.
pub fn mutate(
    population: &Population,
    target_index: usize,
    config: &DeConfig,
    rng: &mut DeRng,
) -> Vec<f64> {
    let q = population.len();
    assert!(q >= 4, "mutation needs at least four members");
    let mut pick = |taken: &[usize]| loop {
        let i = rng.gen_range(0..q);
        if !taken.contains(&i) {
            return i;
        }
    };
    let m1 = pick(&[target_index]);
    let m2 = pick(&[target_index, m1]);
    let m3 = pick(&[target_index, m1, m2]);
    let (a, b, c) = (
        &population.members[m1],
        &population.members[m2],
        &population.members[m3],
    );
    a.iter()
        .zip(b.iter().zip(c))
        .map(|(a, (b, c))| a + config.scale_factor * (b - c))
        .collect()
}

/// Binomial crossover: dimension `j` comes from the mutant when a uniform
/// draw is `<= CR` or `j` is the forced index.
pub fn crossover(target: &[f64], mutant: &[f64], config: &DeConfig, rng: &mut DeRng) -> Vec<f64> {
    assert_eq!(target.len(), mutant.len());
    assert!(!target.is_empty());
    let forced = rng.gen_range(0..target.len());
    target
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(j, (&t, &m))| {
            let u: f64 = rng.gen();
            if u <= config.crossover_rate || j == forced {
                m
            } else {
                t
            }
        })
        .collect()
}

pub fn clamp_bounds(vector: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    assert_eq!(vector.len(), bounds.len());
    vector
        .iter()
        .zip(bounds)
        .map(|(&v, &(lo, hi))| if v.is_nan() { lo } else { v.clamp(lo, hi) })
        .collect()
}

/// One generation. On error the input population is left as it was.
pub fn step(
    population: &Population,
    objective: &dyn Objective,
    config: &DeConfig,
    rng: &mut DeRng,
) -> Result<Population> {
    let trials: Vec<Vec<f64>> = (0..population.len())
        .map(|i| {
            let mutant = mutate(population, i, config, rng);
            let trial = crossover(&population.members[i], &mutant, config, rng);
            clamp_bounds(&trial, &config.bounds)
        })
        .collect();
    let trial_fitness = evaluate_all(objective, &trials)?;

    let mut next = population.clone();
    for (i, (trial, f)) in trials.into_iter().zip(trial_fitness).enumerate() {
        if f > next.fitness[i] {
            next.members[i] = trial;
            next.fitness[i] = f;
        }
    }
    next.generation += 1;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Success,
    Stagnation,
    MaxGenerations,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best_vector: Vec<f64>,
    pub best_fitness: f64,
    pub trajectory: Trajectory,
    /// Generation of the population the result was taken from.
    pub stop_generation: usize,
    pub stop_reason: StopReason,
    pub evaluations: usize,
}

/// Runs DE to completion. `success` is checked on the best member of every
/// generation before it is evolved further.
pub fn run(
    config: &DeConfig,
    objective: &dyn Objective,
    success: Option<&dyn Fn(&[f64], f64) -> bool>,
) -> Result<RunOutcome> {
    config.validate()?;
    let mut rng = DeRng::seed_from_u64(config.seed);
    let mut population = initialize(config, objective, &mut rng)?;
    let mut evaluations = population.len();
    let mut trajectory = Trajectory::default();
    trajectory.push(GenerationRecord::of(&population));

    let mut stagnant = 0usize;
    let mut stop_reason = StopReason::MaxGenerations;
    for _ in 0..config.max_generations {
        let best = population.ranking()[0];
        if let Some(done) = success {
            if done(&population.members[best], population.fitness[best]) {
                stop_reason = StopReason::Success;
                break;
            }
        }

        let previous_mean = population.mean_fitness();
        population = step_with_retry(&population, objective, config, &mut rng)?;
        evaluations += population.len();
        trajectory.push(GenerationRecord::of(&population));

        if (population.mean_fitness() - previous_mean).abs() < STAGNATION_TOLERANCE {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        if config.stagnation_patience > 0 && stagnant >= config.stagnation_patience {
            stop_reason = StopReason::Stagnation;
            break;
        }
    }

    let best = population.ranking()[0];
    Ok(RunOutcome {
        best_vector: population.members[best].clone(),
        best_fitness: population.fitness[best],
        trajectory,
        stop_generation: population.generation,
        stop_reason,
        evaluations,
    })
}

fn step_with_retry(
    population: &Population,
    objective: &dyn Objective,
    config: &DeConfig,
    rng: &mut DeRng,
) -> Result<Population> {
    let snapshot = rng.clone();
    let mut attempt = 0;
    loop {
        match step(population, objective, config, rng) {
            Err(e) if e.is_retryable() && attempt < TIMEOUT_RETRIES => {
                attempt += 1;
                log::warn!("generation {} retry {attempt}: {e}", population.generation + 1);
                *rng = snapshot.clone();
            }
            other => return other,
        }
    }
}

#[cfg(test)]
mod tests;
