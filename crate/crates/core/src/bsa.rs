//! Backtracking Search optimization Algorithm over a box-bounded real space.
//!
//! BSA keeps a historical population alongside the current one and directs
//! mutation along the (permuted) difference between the two, which gives the
//! search a memory of where it has been. One generation is:
//!
//! 1. Selection-I: with probability 1/2 the historical population is replaced
//!    by the current one, then its individuals are permuted.
//! 2. Mutation: `mutant = pop + F * (old - pop)` with one scalar
//!    `F = 3 * eta * N(0,1)` per generation.
//! 3. Crossover: per individual, either `ceil(mixrate * U(0,1) * D)` random
//!    dimensions or exactly one random dimension take the mutant value.
//! 4. Boundary control: out-of-bounds coordinates are redrawn uniformly.
//! 5. Selection-II: a trial replaces its parent only on strict improvement.
//!
//! Fitness values that are not finite are treated as `+inf` and never replace
//! a finite incumbent. For a fixed seed the whole run is deterministic: all
//! random draws of a generation happen before any fitness evaluation, so
//! evaluations may be dispatched concurrently without perturbing the stream.

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BsaError {
    #[error("population must hold at least 4 individuals, got {0}")]
    PopulationTooSmall(usize),
    #[error("at least one iteration is required")]
    NoIterations,
    #[error("search space must have at least one dimension")]
    NoDimensions,
    #[error("bound {dim} is invalid: low {low} must be below high {high} and finite")]
    InvalidBound { dim: usize, low: f64, high: f64 },
    #[error("eta must be positive and finite, got {0}")]
    InvalidEta(f64),
    #[error("mixrate must lie in (0, 1], got {0}")]
    InvalidMixrate(f64),
    #[error("every individual of the initial population has non-finite fitness")]
    DegenerateProblem,
}

/// Search parameters. `bounds` fixes the dimension of the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BsaConfig {
    pub population_size: usize,
    pub iterations: usize,
    /// Movement amplitude knob; the mutation scale is `3 * eta * N(0,1)`.
    pub eta: f64,
    pub bounds: Vec<(f64, f64)>,
    pub mixrate: f64,
    pub seed: u64,
}

impl BsaConfig {
    /// Conventional settings over a symmetric box: `eta = 1`, `mixrate = 1`.
    pub fn new(population_size: usize, iterations: usize, bounds: Vec<(f64, f64)>, seed: u64) -> Self {
        BsaConfig { population_size, iterations, eta: 1.0, bounds, mixrate: 1.0, seed }
    }

    pub fn validate(&self) -> Result<(), BsaError> {
        if self.population_size < 4 {
            return Err(BsaError::PopulationTooSmall(self.population_size));
        }
        if self.iterations < 1 {
            return Err(BsaError::NoIterations);
        }
        if self.bounds.is_empty() {
            return Err(BsaError::NoDimensions);
        }
        for (dim, &(low, high)) in self.bounds.iter().enumerate() {
            if !(low < high) || !low.is_finite() || !high.is_finite() {
                return Err(BsaError::InvalidBound { dim, low, high });
            }
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(BsaError::InvalidEta(self.eta));
        }
        if !(self.mixrate > 0.0 && self.mixrate <= 1.0) {
            return Err(BsaError::InvalidMixrate(self.mixrate));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }
}

/// Best solution found plus the per-iteration trajectory of the best fitness
/// (length `iterations + 1`, the leading entry is the initial population's).
#[derive(Debug, Clone, PartialEq)]
pub struct BsaResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub history: Vec<f64>,
}

fn sanitize(f: f64) -> f64 {
    if f.is_finite() {
        f
    } else {
        f64::INFINITY
    }
}

/// Minimize `fitness` over the configured box.
///
/// Runs exactly `population_size * (iterations + 1)` fitness evaluations.
pub fn optimize<F>(config: &BsaConfig, fitness: F) -> Result<BsaResult, BsaError>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let dim = config.dimension();
    let pop_size = config.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let uniforms: Vec<Uniform<f64>> =
        config.bounds.iter().map(|&(lo, hi)| Uniform::new_inclusive(lo, hi)).collect();

    let draw_point =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { uniforms.iter().map(|u| u.sample(rng)).collect() };

    let mut population: Vec<Vec<f64>> = (0..pop_size).map(|_| draw_point(&mut rng)).collect();
    let mut historical: Vec<Vec<f64>> = (0..pop_size).map(|_| draw_point(&mut rng)).collect();
    let mut fitnesses: Vec<f64> = population.iter().map(|x| sanitize(fitness(x))).collect();
    if fitnesses.iter().all(|f| !f.is_finite()) {
        return Err(BsaError::DegenerateProblem);
    }

    let mut best_index = 0;
    for i in 1..pop_size {
        if fitnesses[i] < fitnesses[best_index] {
            best_index = i;
        }
    }
    let mut best_position = population[best_index].clone();
    let mut best_fitness = fitnesses[best_index];
    let mut history = Vec::with_capacity(config.iterations + 1);
    history.push(best_fitness);

    let mut trials: Vec<Vec<f64>> = vec![vec![0.0; dim]; pop_size];

    for _ in 0..config.iterations {
        // Selection-I
        let (a, b) = (rng.gen::<f64>(), rng.gen::<f64>());
        if a < b {
            historical.clone_from(&population);
        }
        historical.shuffle(&mut rng);

        let amplitude: f64 = 3.0 * config.eta * rng.sample::<f64, _>(rand_distr::StandardNormal);

        for i in 0..pop_size {
            let trial = &mut trials[i];
            trial.clone_from(&population[i]);
            let (a, b) = (rng.gen::<f64>(), rng.gen::<f64>());
            if a < b {
                let count = (config.mixrate * rng.gen::<f64>() * dim as f64).ceil() as usize;
                for d in rand::seq::index::sample(&mut rng, dim, count.min(dim)) {
                    trial[d] = population[i][d] + amplitude * (historical[i][d] - population[i][d]);
                }
            } else {
                let d = rng.gen_range(0..dim);
                trial[d] = population[i][d] + amplitude * (historical[i][d] - population[i][d]);
            }
            for (d, v) in trial.iter_mut().enumerate() {
                let (lo, hi) = config.bounds[d];
                if *v < lo || *v > hi {
                    *v = uniforms[d].sample(&mut rng);
                }
            }
        }

        // All draws for this generation are done; evaluate and select.
        for i in 0..pop_size {
            let f = sanitize(fitness(&trials[i]));
            if f < fitnesses[i] {
                fitnesses[i] = f;
                population[i].clone_from(&trials[i]);
                if f < best_fitness {
                    best_fitness = f;
                    best_position.clone_from(&trials[i]);
                }
            }
        }
        history.push(best_fitness);
    }

    Ok(BsaResult { best_position, best_fitness, history })
}
