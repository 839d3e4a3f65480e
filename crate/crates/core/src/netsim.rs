//! Closed-loop NCS simulator with a pluggable man-in-the-middle transform and
//! a lossy eavesdropping channel.
//!
//! The loop is stepped structurally: each sample the controller sees the
//! setpoint minus the previous plant output, the MitM (when present) rewrites
//! one of the two streams, and the plant consumes the forward stream. The loop
//! itself is lossless and delay-free; sample loss only affects the attacker's
//! eavesdropped copy of the traffic.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lti::{
    self, DifferenceEquation, LtiError, TransferFunction, DIVERGENCE_LIMIT,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetsimError {
    #[error("sample rate must be positive, got {0}")]
    InvalidSampleRate(f64),
    #[error("setpoint must be finite")]
    NonFiniteSetpoint,
    #[error("unattacked closed loop is unstable (pole moduli {0:?})")]
    UnstableLoop(Vec<f64>),
    #[error("duration must cover at least one sample, got {0} s")]
    InvalidDuration(f64),
    #[error("loss rate must lie in [0, 1], got {0}")]
    InvalidLossRate(f64),
    #[error("trace values and loss mask differ in length ({values} vs {mask})")]
    LengthMismatch { values: usize, mask: usize },
    #[error("loop diverged at sample {index}")]
    Divergence { index: usize },
    #[error(transparent)]
    Lti(#[from] LtiError),
}

/// The closed-loop system under study: a controller and a plant joined over
/// the network, sampled uniformly, driven by a constant setpoint.
#[derive(Debug, Clone)]
pub struct NcsModel {
    controller: TransferFunction,
    plant: TransferFunction,
    sample_rate: f64,
    setpoint: f64,
}

impl NcsModel {
    /// Build a model and verify the unattacked closed loop is stable.
    pub fn new(
        controller: TransferFunction,
        plant: TransferFunction,
        sample_rate: f64,
        setpoint: f64,
    ) -> Result<Self, NetsimError> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(NetsimError::InvalidSampleRate(sample_rate));
        }
        if !setpoint.is_finite() {
            return Err(NetsimError::NonFiniteSetpoint);
        }
        let open = lti::series(&controller, &plant);
        let closed = lti::closed_loop(&open)?;
        let poles = lti::poles(&closed)?;
        if poles.iter().any(|p| p.norm() >= 1.0) {
            return Err(NetsimError::UnstableLoop(
                poles.iter().map(|p| p.norm()).collect(),
            ));
        }
        Ok(NcsModel { controller, plant, sample_rate, setpoint })
    }

    /// Reference loop: a discrete PI controller driving the speed of a DC
    /// motor at 50 samples/s toward a unit step.
    pub fn dc_motor() -> Self {
        let controller =
            TransferFunction::new(vec![0.1701, -0.1673], vec![1.0, -1.0]).expect("valid");
        let plant = TransferFunction::new(vec![0.3379, 0.2793], vec![1.0, -1.5462, 0.5646])
            .expect("valid");
        NcsModel::new(controller, plant, 50.0, 1.0).expect("reference loop is stable")
    }

    pub fn controller(&self) -> &TransferFunction {
        &self.controller
    }

    pub fn plant(&self) -> &TransferFunction {
        &self.plant
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn setpoint(&self) -> f64 {
        self.setpoint
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }
}

/// Uniformly sampled scalar signal with a per-sample loss mask.
///
/// Traces coming out of [`eavesdrop`] are already hold-reconstructed: a value
/// at a lost index equals the held predecessor, and the mask records which
/// samples were lost. Traces produced by the loop itself carry an all-false
/// mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    pub values: Vec<f64>,
    pub lost: Vec<bool>,
    pub sample_period: f64,
}

impl SignalTrace {
    pub fn new(values: Vec<f64>, lost: Vec<bool>, sample_period: f64) -> Result<Self, NetsimError> {
        if values.len() != lost.len() {
            return Err(NetsimError::LengthMismatch { values: values.len(), mask: lost.len() });
        }
        Ok(SignalTrace { values, lost, sample_period })
    }

    /// Trace with no losses.
    pub fn lossless(values: Vec<f64>, sample_period: f64) -> Self {
        let lost = vec![false; values.len()];
        SignalTrace { values, lost, sample_period }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Bernoulli sample-loss channel: each sample is lost independently with
/// probability `rate`. The same seed and rate always give the same mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    pub rate: f64,
    pub seed: u64,
}

impl LossModel {
    pub fn new(rate: f64, seed: u64) -> Result<Self, NetsimError> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(NetsimError::InvalidLossRate(rate));
        }
        Ok(LossModel { rate, seed })
    }
}

/// Which stream the man in the middle rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MitmSide {
    Forward,
    Feedback,
}

/// One complete loop execution: setpoint, controller output, post-MitM forward
/// stream, and plant output. Without an attack `u_prime` equals `u` bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopRun {
    pub r: SignalTrace,
    pub u: SignalTrace,
    pub u_prime: SignalTrace,
    pub y: SignalTrace,
}

impl LoopRun {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Step the loop for `duration_secs` of simulated time.
///
/// Per sample: `e[k] = r[k] - y[k-1]`, the controller maps `e` to `u`, the
/// MitM (if any) rewrites its stream, and the plant maps the forward stream to
/// `y`. All initial conditions are zero and the network adds no delay. An
/// unstable attacked loop surfaces as [`NetsimError::Divergence`].
pub fn run_loop(
    model: &NcsModel,
    duration_secs: f64,
    mitm: Option<&TransferFunction>,
    side: MitmSide,
) -> Result<LoopRun, NetsimError> {
    let n = (duration_secs * model.sample_rate).round() as i64;
    if !(duration_secs > 0.0) || n < 1 {
        return Err(NetsimError::InvalidDuration(duration_secs));
    }
    let n = n as usize;
    let mut controller = DifferenceEquation::new(&model.controller);
    let mut plant = DifferenceEquation::new(&model.plant);
    let mut attacker = mitm.map(DifferenceEquation::new);

    let mut r = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut u_prime = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut fed_back = 0.0;

    let check = |v: f64, index: usize| {
        if v.is_finite() && v.abs() <= DIVERGENCE_LIMIT {
            Ok(v)
        } else {
            Err(NetsimError::Divergence { index })
        }
    };

    for k in 0..n {
        let e = model.setpoint - fed_back;
        let uk = check(controller.step(e), k)?;
        let upk = match (&mut attacker, side) {
            (Some(m), MitmSide::Forward) => check(m.step(uk), k)?,
            _ => uk,
        };
        let yk = check(plant.step(upk), k)?;
        fed_back = match (&mut attacker, side) {
            (Some(m), MitmSide::Feedback) => check(m.step(yk), k)?,
            _ => yk,
        };
        r.push(model.setpoint);
        u.push(uk);
        u_prime.push(upk);
        y.push(yk);
    }

    let period = model.sample_period();
    Ok(LoopRun {
        r: SignalTrace::lossless(r, period),
        u: SignalTrace::lossless(u, period),
        u_prime: SignalTrace::lossless(u_prime, period),
        y: SignalTrace::lossless(y, period),
    })
}

/// Hold-last-sample reconstruction: a lost sample repeats its predecessor, and
/// a lost first sample is zero (the loop starts from zero initial conditions).
pub fn hold_last(values: &[f64], lost: &[bool]) -> Vec<f64> {
    assert_eq!(values.len(), lost.len(), "values and mask must have equal length");
    let mut out = Vec::with_capacity(values.len());
    for (k, (&v, &l)) in values.iter().zip(lost).enumerate() {
        if l {
            out.push(if k == 0 { 0.0 } else { out[k - 1] });
        } else {
            out.push(v);
        }
    }
    out
}

/// Capture the attacker's view of the forward and feedback streams.
///
/// The two streams lose samples independently at the same rate, from two
/// deterministic substreams of the loss seed. Lost samples are reconstructed
/// by [`hold_last`]; the returned masks record the losses.
pub fn eavesdrop(run: &LoopRun, loss: &LossModel) -> (SignalTrace, SignalTrace) {
    let n = run.len();
    let mut mask_for = |stream: u64| -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(loss.seed);
        rng.set_stream(stream);
        (0..n).map(|_| rng.gen::<f64>() < loss.rate).collect()
    };
    let lost_fwd = mask_for(0);
    let lost_fb = mask_for(1);
    let i_values = hold_last(&run.u.values, &lost_fwd);
    let o_values = hold_last(&run.y.values, &lost_fb);
    let period = run.u.sample_period;
    (
        SignalTrace { values: i_values, lost: lost_fwd, sample_period: period },
        SignalTrace { values: o_values, lost: lost_fb, sample_period: period },
    )
}

/// Write a loop run as CSV: `k,t,r,u,u_prime,y,lost_fwd,lost_fb`, one row per
/// sample, `t` in seconds with six decimals, masks as 0/1.
pub fn write_trace_csv<W: Write>(run: &LoopRun, mut w: W) -> io::Result<()> {
    writeln!(w, "k,t,r,u,u_prime,y,lost_fwd,lost_fb")?;
    let period = run.r.sample_period;
    for k in 0..run.len() {
        writeln!(
            w,
            "{k},{t:.6},{r},{u},{up},{y},{lf},{lb}",
            t = k as f64 * period,
            r = run.r.values[k],
            u = run.u.values[k],
            up = run.u_prime.values[k],
            y = run.y.values[k],
            lf = run.u.lost[k] as u8,
            lb = run.y.lost[k] as u8,
        )?;
    }
    Ok(())
}
