//! Simulation and attack-design library for networked control systems (NCS).
//!
//! The crate models a discrete-time control loop (a controller and a plant
//! closed over a network), eavesdrops its forward/feedback streams through a
//! lossy channel, identifies the device models from the captured traces with
//! the Backtracking Search optimization Algorithm, and designs man-in-the-middle
//! injection attacks that hit a prescribed overshoot or steady-state error
//! while keeping the physical response close to normal.
//!
//! Modules:
//! - [`lti`]: discrete transfer functions, difference-equation simulation,
//!   step-response metrics.
//! - [`netsim`]: the closed-loop simulator with a pluggable MitM transform and
//!   lossy trace capture.
//! - [`bsa`]: the Backtracking Search optimization Algorithm over a bounded
//!   real box.
//! - [`sysid`]: grey-box identification of controller and plant from captured
//!   traces, plus batch statistics.
//! - [`attack`]: design and evaluation of covert gain and lead-lag injection
//!   attacks.

pub mod attack;
pub mod bsa;
pub mod lti;
pub mod netsim;
pub mod seeds;
pub mod sysid;

mod poly;
