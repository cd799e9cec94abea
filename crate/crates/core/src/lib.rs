//! Maximum-entropy inference over convex state spaces (density matrices of
//! a *-subalgebra, or polytopes) seen through a linear projection, with
//! numerical probes for continuity of the inference and openness of the
//! projection.
//!
//! ```
//! use maxent_core::{builtin_scenario, infer, DisorderlinessMeasure};
//!
//! let setup = builtin_scenario("bloch").unwrap().setup().unwrap();
//! let m = maxent_core::MeanValue::new(vec![0.3]).unwrap();
//! let phi = infer(&setup.model, &m, &DisorderlinessMeasure::VonNeumann).unwrap();
//! assert_eq!(phi.support_rank, 2);
//! ```

pub mod error;
pub mod geometry;
pub mod hermitian;
pub mod maxent;
pub mod probes;
pub mod scenario;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
pub use geometry::{orthonormalize, Element, MeanValue, Model, ObservableSubspace, StateSpace, Tolerances};
pub use hermitian::{gibbs_state, hs_inner, von_neumann_entropy, HermitianMatrix};
pub use maxent::{infer, DisorderlinessMeasure, InferenceResult};
pub use probes::{ProbeReport, ProbeSettings, Verdict};
pub use scenario::{builtin_scenario, parse_scenario, run, RunReport, Scenario};
