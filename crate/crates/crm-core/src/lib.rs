//! Counterfactual risk minimization for batch learning from logged bandit
//! feedback.
//!
//! The crate covers the full pipeline around a stochastic linear multi-label
//! policy: sparse multi-label corpora, supervised-to-bandit log simulation,
//! clipped inverse-propensity risk estimation with an empirical Bernstein
//! bound, variance-regularized training (batch gradient descent and
//! stochastic iterated majorization with AdaGrad), and hyperparameter
//! calibration by counterfactual validation.
//!
//! The crate is `no_std` + `alloc`; all file and thread handling lives in
//! the companion CLI crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod estimator;
pub mod learner;
pub mod logsim;
pub mod modelsel;
pub mod policy;
pub mod rng;

pub use dataset::{Corpus, LabelVector, SparseVector, SupervisedExample};
pub use estimator::{BoundReport, ClippedTerms};
pub use learner::{CrmConfig, MajorizerCoeffs, TrainTrace};
pub use logsim::{BanditRecord, LoggedDataset, RawLoss};
pub use modelsel::HyperGrid;
pub use policy::PolicyParams;
