//! Exact solver for the lot-type design problem.
//!
//! Each branch receives an integral multiple of one lot-type; at most `k`
//! lot-types may be used overall and total supply must fall in a window.
//! The solver runs column and row generation over a restricted master LP,
//! dives on the fractional support, separates cover cuts and finishes with a
//! certificate that [`controller::verify_certificate`] can re-check.

pub mod controller;
pub mod heuristic;
mod lotsearch;
mod lotspace;
pub mod lp;
pub mod model;
pub mod pricing;
pub mod rmp;
pub mod subsolver;

use thiserror::Error;

pub use controller::{solve, verify_certificate, Certificate, Conclusion, SolveReport, SolverConfig};
pub use model::{validate_instance, Instance, LotType, LotTypeParams, RawInstance, ValidationReport};
pub use subsolver::Assignment;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("the applicable lot-type set is empty")]
    EmptyLotTypeSpace,
    #[error("{count} applicable lot-types exceed the enumeration cap of {cap}")]
    EnumerationCap { count: String, cap: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("row {row}: non-finite coefficient or right-hand side")]
    NonFinite { row: usize },
    #[error("row {row}: column {column} appears twice")]
    DuplicateEntry { row: usize, column: usize },
    #[error("row {row}: unknown column {column}")]
    UnknownColumn { row: usize, column: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RmpError {
    #[error("unknown branch index {0}")]
    UnknownBranch(usize),
    #[error("lot-type {0} is not in the pool")]
    UnknownLotType(LotType),
    #[error("lot-type {0} is not applicable")]
    NotApplicable(LotType),
    #[error("multiplicity {0} is not in M")]
    UnknownMultiplicity(u32),
    #[error("cover set of size {size} is smaller than k = {k}")]
    CutTooSmall { size: usize, k: usize },
    #[error("duplicate cover cut")]
    DuplicateCut,
    #[error("dual of {row} has the wrong sign: {value:e}")]
    DualSign { row: String, value: f64 },
    #[error("restricted master is not optimal: {0}")]
    NotOptimal(lp::LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubsolverError {
    #[error("no assignment meets the supply window")]
    Infeasible,
    #[error("lot-type set is empty")]
    EmptySet,
    #[error("oracle budget exceeded: {needed} > {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Rmp(#[from] RmpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Subsolver(#[from] SubsolverError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("LP engine failed: {0}")]
    Numerical(String),
}
