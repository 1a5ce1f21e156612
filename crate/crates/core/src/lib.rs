//! Symmetry-adapted reduced density matrix functional theory for
//! translation-invariant lattice bosons.
//!
//! The numerical core is generic over the scalar type (`f32`/`f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod approx;
pub mod error;
pub mod force;
pub mod functional;
pub mod interaction;
pub mod io;
pub mod linalg;
pub mod polytope;
pub mod scalar;
pub mod sector;

pub use error::{Error, Result};
pub use polytope::{build_domain, normalize_constraint, Membership, PointClass};
pub use scalar::Scalar;
pub use sector::{enumerate_sector, sector_dimension, total_momentum, ConfigState, Sector};

pub type PairInteraction = interaction::PairInteraction<f64>;
pub type SectorOperator = interaction::SectorOperator<f64>;
pub type KineticVector = interaction::KineticVector<f64>;
pub type GroundState = interaction::GroundState<f64>;
pub type DomainPolytope = polytope::DomainPolytope<f64>;
pub type FacetConstraint = polytope::FacetConstraint<f64>;
pub type FunctionalSample = functional::FunctionalSample<f64>;
pub type KernelPoint = functional::KernelPoint<f64>;
pub use functional::{Method, PhaseMode, SearchOptions};
