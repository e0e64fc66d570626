//! Information recovery under conserved charges.
//!
//! Numerical toolkit for quantifying how well quantum information can be
//! recovered from a bipartite dynamics that conserves an additive charge:
//! purified-distance and Fisher-information metrics, recovery optimization,
//! lower bounds on the optimal recovery error, a Hayden-Preskill model with
//! a conserved charge, and covariant error-correction audits.

pub mod error;
pub mod linalg;
pub mod metrics;
pub mod channel;
pub mod symmetry;
pub mod recovery;
pub mod bounds;
pub mod instances;
pub mod showcase;
pub mod hp;
pub mod qec;

pub use error::{Error, Result};
