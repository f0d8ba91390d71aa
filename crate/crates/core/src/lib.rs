//! Joint passive/active beamforming and power allocation for downlink
//! multi-user systems assisted by several intelligent reflecting surfaces.
//!
//! The weighted sum-rate is maximized by alternating between the IRS phase
//! vector (conjugate gradient on the complex circle), the BS beamformers
//! (conjugate gradient on the oblique manifold) and the transmit powers
//! (successive condensation).

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod driver;
pub mod error;
pub mod fixtures;
pub mod manifold;
pub mod model;
pub mod objective;
pub mod power;
pub mod rcg;

pub use channel::{sample_scenario, ChannelSet, Placement};
pub use driver::{init_point, random_baseline, solve, solve_seeded, InitPoint, Solution, Termination};
pub use error::{ConfigErrors, ConfigViolation, Error, Result};
pub use model::{validate_config, BeamMatrix, ConfigDraft, PhaseVector, PowerVector, SystemConfig, C64};
pub use objective::weighted_sum_rate;
pub use power::{allocate_power_gp, allocate_power_pg, extract_subproblem, power_oracle, PowerSubproblem};
pub use rcg::{rcg_maximize, RcgOptions};
