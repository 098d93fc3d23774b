//! Online admission control that minimizes the cost of rejected requests,
//! online set cover with repeated demands, and the exact offline optima used
//! to check them.
//!
//! * [`fractional`]: monotone fractional rejection weights with doubling.
//! * [`randomized`]: randomized rounding of the fractional weights.
//! * [`reduction`]: set cover with repetitions compiled to admission control.
//! * [`bicriteria`]: deterministic set multicover via conditional expectations.
//! * [`oracle`]: exact offline optima (branch-and-bound, rational simplex).
//! * [`harness`]: generators, experiments and report rows.

pub mod bicriteria;
pub mod fractional;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod potential;
pub mod randomized;
pub mod rational;
pub mod reduction;
pub mod trace;

pub use model::{
    load_network, load_setcover, max_excess_q, network_to_json, setcover_to_json, DemandSequence,
    NetworkInstance, Phase, Request, SetCoverInstance,
};
pub use rational::Rational;
