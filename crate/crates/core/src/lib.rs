//! Canonical inner bounds for multiterminal source coding on finite alphabets.
//!
//! The crate is organised bottom-up:
//!
//! * [`pmf`] dense probability tensors over named axes, entropy and
//!   conditional mutual information in bits.
//! * [`augment`] problem definitions, test channels `q_k(z|x)`, the augmented
//!   joint `p(x, s, v) · Π q_k(z_k | x_k)` and the reverse (Bayes) parametrisation.
//! * [`region`] the distortion-free rate region for fixed channels: constraint
//!   evaluation, membership, the `M!` permutation corners and the chain-rule
//!   identity checks.
//! * [`functionals`] optimal estimators and the per-channel simplex
//!   functionals whose weighted averages reproduce rates and distortions.
//! * [`optimize`] weighted rate-distortion minimisation: LP support reduction,
//!   coordinate descent, the lattice brute-force oracle and the alphabet-size
//!   verification.
//!
//! Everything is `no_std` + `alloc`; IO, file formats and the command line
//! live in the companion `canonical-region` crate.

#![no_std]
// `!(x >= 0.0)` deliberately rejects NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod augment;
mod error;
mod evaluate;
pub mod functionals;
pub mod lp;
mod math;
pub mod optimize;
pub mod pmf;
pub mod region;
pub mod rng;

pub use augment::{
    attach_channels, forward_to_reverse, reverse_to_forward, AugmentedPmf, Channel, DistortionMeasure, Inversion,
    ProblemSpec, ReverseChannelPair,
};
pub use error::{Error, Result};
pub use evaluate::RdEvaluator;
pub use functionals::{distortion_component, Estimator, FunctionalContext};
pub use optimize::{Direction, OptimizeResult, RdPoint};
pub use pmf::{Alphabet, Axis, JointPmf, VarId, VarSet};
pub use region::{ConstraintReport, Permutation, RateVector};
