//! Probability that a vehicle reaches a goal position on another lane
//! through one or more gap-accepting lane changes, with headways modelled as
//! log-normal renewal processes.
//!
//! The pipeline has three layers:
//!
//! * [`qtable`] tabulates the abstract probability `q(g, mu, sigma)` of a
//!   free stretch of length `g` in a unit window and interpolates it.
//! * [`lanechange`] maps a two-lane scenario onto a `q` lookup and composes
//!   more lanes by numerical convolution.
//! * [`simulator`] is a time-stepped microsimulation used to check the model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod estimation;
pub mod headway;
pub mod lanechange;
pub mod qtable;
pub mod report;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use estimation::{fit_lognormal, profiles_from_spec, HeadwaySample, TrafficSpec};
pub use lanechange::{
    p_multilane, p_multilane_with, p_two_lane, profile, profile_with, reduce_two_lane, ConvolutionMethod, LaneProfile,
    ProbabilityProfile, Quadrature, Reduction, Scenario,
};
pub use qtable::{
    estimate_q, load_table, precompute_table, save_table, AbstractGapQuery, GridAxes, QTable,
};
pub use simulator::{compare_with_model, run_trials, Comparison, SimConfig, SimReport};
