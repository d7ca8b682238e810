//! List-decodable stochastic optimization under oblivious noise.
//!
//! Gradient samples arrive as `∇f(x) + e + ξ`, where `e` is mean-zero with bounded
//! variance and `ξ` is oblivious noise that is exactly zero only with probability
//! `alpha`, possibly below one half, and otherwise arbitrary. The crate provides:
//!
//! - samplers for the noise models and a simulated oracle ([`noise`]),
//! - shift estimation between two noisy batches in one ([`shift1d`]) and many
//!   ([`shifthd`]) dimensions,
//! - list-decodable mean estimation ([`ldme`]),
//! - gradient descent with inexact gradients ([`learner`]),
//! - the reductions between optimization and mean estimation ([`ldso`]).
//!
//! Every randomized entry point takes a `seed` and is deterministic given it.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod error;
pub mod ldme;
pub mod ldso;
pub mod learner;
pub mod noise;
pub mod objective;
mod par;
pub mod rng;
pub mod shift1d;
pub mod shifthd;
pub mod stats;

pub use batch::SampleBatch;
pub use error::{Error, Result};
pub use ldme::{ldme_subsample, list_decode, robust_mean_single, CandidateList, LdmeConfig};
pub use ldso::{
    inexact_oracle, mean_est_via_ldso, mean_est_via_noisy_grad_desc, noisy_grad_desc, noisy_grad_desc_with_list,
    LdsoConfig, LdsoOutcome,
};
pub use learner::{inexact_gd, LearnerConfig};
pub use noise::{
    hardness_pair, make_oracle, median_tightness_witness, sample_oblivious, sample_observation, GradientOracle,
    ObliviousNoiseSpec, ObservationNoiseSpec, TailSpec,
};
pub use objective::SmoothObjective;
pub use shift1d::{shift1d, Shift1DConfig, ShiftEstimate};
pub use shifthd::{amplify, random_sign_basis, shift_highd, AmplifyConfig, ShiftHdEstimate, ShiftReference};
