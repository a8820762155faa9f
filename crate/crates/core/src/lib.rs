//! Sports league realignment toolkit.
//!
//! Scores league structures with a schedule-free travel surrogate, generates
//! hull-disjoint candidate structures by recursive line cuts, filters them by
//! declarative constraints and certifies small instances exactly.
//!
//! Geometry and scoring are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.

pub mod constraints;
pub mod datasets;
pub mod error;
pub mod exact;
pub mod geodesy;
pub mod geometry;
pub mod hullsplit;
pub mod model;
pub mod reports;
pub mod scenarios;
pub mod scalar;
pub mod surrogate;

pub use constraints::{evaluate, filter, Predicate};
pub use error::{Error, Result};
pub use hullsplit::{generate, rank, GenerateOptions, GenerationStats};
pub use model::{
    CanonicalForm, Conference, GeoPoint, LeagueDataset, LeagueStructure, Provenance, ScheduleProfile,
    StructureTemplate, Team, TeamId,
};
pub use scalar::Scalar;

pub type DistanceMatrix = geodesy::DistanceMatrix<f64>;
pub type GameMatrix = surrogate::GameMatrix<f64>;
pub type ScoredStructure = surrogate::ScoredStructure<f64>;
pub type TravelModel = surrogate::TravelModel<f64>;
pub type CandidateSet = hullsplit::CandidateSet<f64>;
pub type PlanarPoint = geodesy::PlanarPoint<f64>;
pub type CutLine = hullsplit::CutLine<f64>;
