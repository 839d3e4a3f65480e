//! The system-identification attack: fit grey-box device models to
//! eavesdropped loop traffic and evaluate the estimates statistically.
//!
//! The attacker knows the structure of both devices (the loop drives a DC
//! motor behind a PI controller) and searches only for the free coefficients,
//! minimizing the mean squared deviation between the captured output and the
//! candidate model's output on the captured input. The plant is fitted with
//! the forward stream as input and the feedback stream as output. The
//! controller physically consumes the error signal, so its input is
//! reconstructed as `setpoint - y[k-1]` from the captured feedback stream (the
//! setpoint is a known unit step and the comparator sees the previous plant
//! sample).

pub mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsa::{self, BsaConfig, BsaError};
use crate::lti::{DifferenceEquation, TransferFunction, DIVERGENCE_LIMIT};
use crate::netsim::{self, LossModel, MitmSide, NcsModel, NetsimError, SignalTrace};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SysidError {
    #[error("input and output traces differ in length ({input} vs {output})")]
    LengthMismatch { input: usize, output: usize },
    #[error("traces must hold at least 2 samples, got {got}")]
    TooFewSamples { got: usize },
    #[error("template has {template} free coefficients but the optimizer is configured for {config}")]
    DimensionMismatch { template: usize, config: usize },
    #[error("template numerator is longer than its denominator ({num_len} vs {den_len})")]
    ImproperTemplate { num_len: usize, den_len: usize },
    #[error("template needs {free} bounds, got {bounds}")]
    BoundsCount { free: usize, bounds: usize },
    #[error("template has no free coefficients")]
    NoFreeCoefficients,
    #[error("batches need at least 2 runs per rate, got {0}")]
    InvalidRuns(usize),
    #[error("batch at loss rate {rate} failed {failed} of {total} runs")]
    TooManyFailures { rate: f64, failed: usize, total: usize },
    #[error(transparent)]
    Bsa(#[from] BsaError),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
}

/// One coefficient position of a model template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoeffSlot {
    /// Searched by the optimizer.
    Free,
    /// Pinned by the known structure.
    Fixed(f64),
}

/// Known structure of a device model: which transfer-function coefficients are
/// free, which are pinned, and the search box per free coefficient.
///
/// Slots are ordered numerator first (descending powers), then the denominator
/// tail after its fixed leading 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTemplate {
    num_slots: Vec<CoeffSlot>,
    den_tail_slots: Vec<CoeffSlot>,
    bounds: Vec<(f64, f64)>,
}

impl ModelTemplate {
    pub fn new(
        num_slots: Vec<CoeffSlot>,
        den_tail_slots: Vec<CoeffSlot>,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self, SysidError> {
        if num_slots.len() > den_tail_slots.len() + 1 {
            return Err(SysidError::ImproperTemplate {
                num_len: num_slots.len(),
                den_len: den_tail_slots.len() + 1,
            });
        }
        let free = num_slots
            .iter()
            .chain(den_tail_slots.iter())
            .filter(|s| matches!(s, CoeffSlot::Free))
            .count();
        if free == 0 {
            return Err(SysidError::NoFreeCoefficients);
        }
        if free != bounds.len() {
            return Err(SysidError::BoundsCount { free, bounds: bounds.len() });
        }
        Ok(ModelTemplate { num_slots, den_tail_slots, bounds })
    }

    /// Discrete PI controller `(c1 z + c2) / (z - 1)`: two free numerator
    /// coefficients over a fixed integrator.
    pub fn pi_controller(bound: (f64, f64)) -> Self {
        ModelTemplate::new(
            vec![CoeffSlot::Free, CoeffSlot::Free],
            vec![CoeffSlot::Fixed(-1.0)],
            vec![bound; 2],
        )
        .expect("valid template")
    }

    /// Second-order plant `(g1 z + g2) / (z^2 + g3' z + g4')`: all four
    /// coefficients free.
    pub fn second_order_plant(bound: (f64, f64)) -> Self {
        ModelTemplate::new(
            vec![CoeffSlot::Free, CoeffSlot::Free],
            vec![CoeffSlot::Free, CoeffSlot::Free],
            vec![bound; 4],
        )
        .expect("valid template")
    }

    /// Number of free coefficients, i.e. the search dimension.
    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    /// Search box per free coefficient, in slot order.
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Instantiate the template with the given free coefficients.
    ///
    /// Panics when `free` has the wrong length; bounded search keeps the
    /// resulting coefficients finite and the shape proper by construction.
    pub fn build(&self, free: &[f64]) -> TransferFunction {
        assert_eq!(free.len(), self.dimension(), "free coefficient count mismatch");
        let mut it = free.iter();
        let mut fill = |slots: &[CoeffSlot]| -> Vec<f64> {
            slots
                .iter()
                .map(|s| match s {
                    CoeffSlot::Free => *it.next().expect("length checked"),
                    CoeffSlot::Fixed(v) => *v,
                })
                .collect()
        };
        let num = fill(&self.num_slots);
        let mut den = vec![1.0];
        den.extend(fill(&self.den_tail_slots));
        TransferFunction::new(num, den).expect("template shapes are proper")
    }

    /// Read the free coefficients back out of a transfer function with exactly
    /// this structure. Returns `None` when the shape or a fixed slot differs.
    pub fn extract_free(&self, tf: &TransferFunction) -> Option<Vec<f64>> {
        if tf.num().len() != self.num_slots.len()
            || tf.den().len() != self.den_tail_slots.len() + 1
        {
            return None;
        }
        let mut free = Vec::with_capacity(self.dimension());
        for (slot, &coeff) in self
            .num_slots
            .iter()
            .zip(tf.num())
            .chain(self.den_tail_slots.iter().zip(&tf.den()[1..]))
        {
            match slot {
                CoeffSlot::Free => free.push(coeff),
                CoeffSlot::Fixed(v) if *v == coeff => {}
                CoeffSlot::Fixed(_) => return None,
            }
        }
        Some(free)
    }

    /// BSA configuration matching this template's search box.
    pub fn bsa_config(
        &self,
        population: usize,
        iterations: usize,
        eta: f64,
        mixrate: f64,
        seed: u64,
    ) -> BsaConfig {
        BsaConfig {
            population_size: population,
            iterations,
            eta,
            bounds: self.bounds.clone(),
            mixrate,
            seed,
        }
    }
}

/// Mean-squared output error of a candidate model over a captured
/// input/output pair. Candidates whose simulation diverges score `+inf`.
pub struct OutputErrorFitness<'a> {
    template: &'a ModelTemplate,
    input: &'a [f64],
    output: &'a [f64],
}

impl<'a> OutputErrorFitness<'a> {
    pub fn new(template: &'a ModelTemplate, input: &'a [f64], output: &'a [f64]) -> Self {
        OutputErrorFitness { template, input, output }
    }

    pub fn evaluate(&self, free: &[f64]) -> f64 {
        let tf = self.template.build(free);
        let mut de = DifferenceEquation::new(&tf);
        let mut acc = 0.0;
        for (&u, &o) in self.input.iter().zip(self.output) {
            let estimate = de.step(u);
            if !estimate.is_finite() || estimate.abs() > DIVERGENCE_LIMIT {
                return f64::INFINITY;
            }
            let e = o - estimate;
            acc += e * e;
        }
        acc / self.input.len() as f64
    }
}

/// Error signal the controller consumed, reconstructed from the captured
/// feedback stream: `e[k] = setpoint - y[k-1]`, with the zero initial plant
/// output giving `e[0] = setpoint`.
pub fn controller_error_input(feedback_values: &[f64], setpoint: f64) -> Vec<f64> {
    let mut e = Vec::with_capacity(feedback_values.len());
    if feedback_values.is_empty() {
        return e;
    }
    e.push(setpoint);
    for &y in &feedback_values[..feedback_values.len() - 1] {
        e.push(setpoint - y);
    }
    e
}

fn check_traces(input: &SignalTrace, output: &SignalTrace) -> Result<(), SysidError> {
    if input.len() != output.len() {
        return Err(SysidError::LengthMismatch { input: input.len(), output: output.len() });
    }
    if input.len() < 2 {
        return Err(SysidError::TooFewSamples { got: input.len() });
    }
    Ok(())
}

fn check_dimension(template: &ModelTemplate, config: &BsaConfig) -> Result<(), SysidError> {
    if template.dimension() != config.bounds.len() {
        return Err(SysidError::DimensionMismatch {
            template: template.dimension(),
            config: config.bounds.len(),
        });
    }
    Ok(())
}

/// Fit the plant coefficients: forward stream in, feedback stream out. Traces
/// must already be hold-reconstructed.
pub fn identify_plant(
    input: &SignalTrace,
    output: &SignalTrace,
    template: &ModelTemplate,
    config: &BsaConfig,
) -> Result<Vec<f64>, SysidError> {
    check_traces(input, output)?;
    check_dimension(template, config)?;
    let fitness = OutputErrorFitness::new(template, &input.values, &output.values);
    let result = bsa::optimize(config, |x| fitness.evaluate(x))?;
    Ok(result.best_position)
}

/// Fit the controller coefficients from the captured feedback (its input, via
/// the reconstructed error signal) and forward stream (its output).
pub fn identify_controller(
    feedback: &SignalTrace,
    forward: &SignalTrace,
    setpoint: f64,
    template: &ModelTemplate,
    config: &BsaConfig,
) -> Result<Vec<f64>, SysidError> {
    check_traces(feedback, forward)?;
    check_dimension(template, config)?;
    let error_input = controller_error_input(&feedback.values, setpoint);
    let fitness = OutputErrorFitness::new(template, &error_input, &forward.values);
    let result = bsa::optimize(config, |x| fitness.evaluate(x))?;
    Ok(result.best_position)
}

/// Batch parameters. Defaults reproduce the reference experiment: 100 runs per
/// rate over a 2 s capture, population 100, 600/800 iterations, bounds
/// [-10, 10] on every coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    pub runs_per_rate: usize,
    pub capture_secs: f64,
    pub master_seed: u64,
    pub population: usize,
    pub controller_iterations: usize,
    pub plant_iterations: usize,
    pub eta: f64,
    pub mixrate: f64,
    pub plant_template: ModelTemplate,
    pub controller_template: ModelTemplate,
}

impl Default for BatchConfig {
    fn default() -> Self {
        let bound = (-10.0, 10.0);
        BatchConfig {
            runs_per_rate: 100,
            capture_secs: 2.0,
            master_seed: 1,
            population: 100,
            controller_iterations: 600,
            plant_iterations: 800,
            eta: 1.0,
            mixrate: 1.0,
            plant_template: ModelTemplate::second_order_plant(bound),
            controller_template: ModelTemplate::pi_controller(bound),
        }
    }
}

/// Per-coefficient batch statistics. Statistics that are undefined for the
/// sample (too few runs, zero dispersion) are reported as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffStats {
    pub mean: f64,
    pub std: Option<f64>,
    pub ci_half_width: Option<f64>,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

impl CoeffStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        CoeffStats {
            mean: stats::mean(samples).expect("at least one sample"),
            std: stats::sample_std(samples).ok(),
            ci_half_width: stats::mean_ci(samples).ok().map(|(_, hw)| hw),
            skewness: stats::pearson_skew(samples).ok(),
            excess_kurtosis: stats::excess_kurtosis(samples).ok(),
        }
    }
}

/// Estimates for one device across a batch: raw per-run coefficient vectors,
/// per-coefficient statistics, and the per-run Euclidean error norms against
/// the true coefficients (empty when no truth was supplied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub estimates: Vec<Vec<f64>>,
    pub coefficient_stats: Vec<CoeffStats>,
    pub error_norms: Vec<f64>,
}

impl IdentificationResult {
    pub fn from_estimates(estimates: Vec<Vec<f64>>, truth: Option<&[f64]>) -> Self {
        let dim = estimates.first().map_or(0, Vec::len);
        let coefficient_stats = (0..dim)
            .map(|d| {
                let samples: Vec<f64> = estimates.iter().map(|e| e[d]).collect();
                CoeffStats::from_samples(&samples)
            })
            .collect();
        let error_norms = truth
            .map(|t| {
                estimates
                    .iter()
                    .map(|e| {
                        e.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                    })
                    .collect()
            })
            .unwrap_or_default();
        IdentificationResult { estimates, coefficient_stats, error_norms }
    }
}

/// Batch outcome at one loss rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rate: f64,
    pub requested_runs: usize,
    pub failed_runs: usize,
    pub plant: IdentificationResult,
    pub controller: IdentificationResult,
}

/// Run the full identification campaign: for each loss rate, capture a fresh
/// loop start-up per run (distinct derived seeds), identify both devices, and
/// aggregate the statistics.
///
/// Individual run failures are excluded and counted; a rate whose failures
/// exceed 10% of its runs aborts the batch. Runs execute in parallel and the
/// result depends only on the configuration and master seed.
pub fn batch_identify(
    model: &NcsModel,
    loss_rates: &[f64],
    cfg: &BatchConfig,
) -> Result<Vec<RateReport>, SysidError> {
    if cfg.runs_per_rate < 2 {
        return Err(SysidError::InvalidRuns(cfg.runs_per_rate));
    }
    for &rate in loss_rates {
        LossModel::new(rate, 0)?;
    }
    let plant_truth = cfg.plant_template.extract_free(model.plant());
    let controller_truth = cfg.controller_template.extract_free(model.controller());

    let mut reports = Vec::with_capacity(loss_rates.len());
    for (rate_index, &rate) in loss_rates.iter().enumerate() {
        let outcomes: Vec<Result<(Vec<f64>, Vec<f64>), SysidError>> = (0..cfg.runs_per_rate)
            .into_par_iter()
            .map(|run_index| {
                let counter = (rate_index * cfg.runs_per_rate + run_index) as u64;
                let run_seed = seeds::mix(cfg.master_seed, counter);
                identification_run(model, rate, cfg, run_seed)
            })
            .collect();

        let failed = outcomes.iter().filter(|o| o.is_err()).count();
        if failed * 10 > cfg.runs_per_rate {
            return Err(SysidError::TooManyFailures {
                rate,
                failed,
                total: cfg.runs_per_rate,
            });
        }
        let mut plant_estimates = Vec::with_capacity(cfg.runs_per_rate - failed);
        let mut controller_estimates = Vec::with_capacity(cfg.runs_per_rate - failed);
        for outcome in outcomes.into_iter().flatten() {
            plant_estimates.push(outcome.0);
            controller_estimates.push(outcome.1);
        }
        reports.push(RateReport {
            rate,
            requested_runs: cfg.runs_per_rate,
            failed_runs: failed,
            plant: IdentificationResult::from_estimates(plant_estimates, plant_truth.as_deref()),
            controller: IdentificationResult::from_estimates(
                controller_estimates,
                controller_truth.as_deref(),
            ),
        });
    }
    Ok(reports)
}

fn identification_run(
    model: &NcsModel,
    rate: f64,
    cfg: &BatchConfig,
    run_seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), SysidError> {
    let run = netsim::run_loop(model, cfg.capture_secs, None, MitmSide::Forward)?;
    let loss = LossModel::new(rate, seeds::mix(run_seed, 0))?;
    let (forward, feedback) = netsim::eavesdrop(&run, &loss);
    let controller_cfg = cfg.controller_template.bsa_config(
        cfg.population,
        cfg.controller_iterations,
        cfg.eta,
        cfg.mixrate,
        seeds::mix(run_seed, 1),
    );
    let plant_cfg = cfg.plant_template.bsa_config(
        cfg.population,
        cfg.plant_iterations,
        cfg.eta,
        cfg.mixrate,
        seeds::mix(run_seed, 2),
    );
    let plant = identify_plant(&forward, &feedback, &cfg.plant_template, &plant_cfg)?;
    let controller = identify_controller(
        &feedback,
        &forward,
        model.setpoint(),
        &cfg.controller_template,
        &controller_cfg,
    )?;
    Ok((plant, controller))
}

/// Histogram bin over the error-norm range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.02;
pub const HISTOGRAM_RANGE: (f64, f64) = (0.0, 1.0);

/// Bin values over [0, 1) with width 0.02 (50 bins); values outside the range
/// are not counted.
pub fn unit_histogram(values: &[f64]) -> Vec<HistogramBin> {
    let bins = ((HISTOGRAM_RANGE.1 - HISTOGRAM_RANGE.0) / HISTOGRAM_BIN_WIDTH).round() as usize;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if (HISTOGRAM_RANGE.0..HISTOGRAM_RANGE.1).contains(&v) {
            let idx = ((v / HISTOGRAM_BIN_WIDTH) as usize).min(bins - 1);
            counts[idx] += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            low: i as f64 * HISTOGRAM_BIN_WIDTH,
            high: (i + 1) as f64 * HISTOGRAM_BIN_WIDTH,
            count,
        })
        .collect()
}
