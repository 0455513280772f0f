//! Semi-supervised ensemble learning for blind quality prediction.
//!
//! A multi-head network is trained by pairwise learning-to-rank: labeled
//! pairs are scored with the fidelity loss under a Thurstone Case V model,
//! for the ensemble and for every head, while unlabeled pairs push the heads
//! apart through a diversity term. Around that core sit the evaluation tools
//! (SRCC, PLCC after a four-parameter logistic fit, disagreement-based failure
//! spotting, gMAD pair search) and an experiment harness.
//!
//! | module | contents |
//! |--------|----------|
//! | [`math`] | normal CDF, fidelity loss, Thurstone probability |
//! | [`model`] | architecture, forward/backward, checkpoints |
//! | [`objectives`] | accuracy, diversity and combined losses |
//! | [`trainer`] | pair sampling, Adam, training loop |
//! | [`evaluation`] | correlations, logistic fit, failure spotting, gMAD |
//! | [`harness`] | datasets, synthetic data, splits, config, experiments |

pub mod error;
pub mod evaluation;
pub mod fsutil;
pub mod harness;
pub mod math;
pub mod model;
pub mod objectives;
pub mod trainer;

pub use error::{Error, Result};
