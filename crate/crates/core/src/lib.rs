//! Certified robustness of subsample-and-aggregate ("random selection")
//! classifiers against training-set poisoning.
//!
//! * [`combinatorics`]: log-space binomial helpers and Clopper–Pearson bounds.
//! * [`schemes`]: bagging without / with replacement and binomial selection.
//! * [`certify`]: `delta(rho)`, certified radii, certified prediction and
//!   certified-accuracy curves.
//! * [`ensemble`]: desk-scale ensemble training and voting.
//! * [`oracle`]: exact enumeration checks of the certification math.

pub mod certify;
pub mod combinatorics;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod oracle;
pub mod rng;
pub mod schemes;

pub use certify::{
    accuracy_curve, certified_accuracy, certified_radius, certify_batch, certify_prediction, delta,
    Certificate, CertifyParams, ClassId, PoisoningModel, Radius, VoteRecord,
};
pub use error::{Error, Result};
pub use exec::Exec;
pub use schemes::SelectionScheme;
