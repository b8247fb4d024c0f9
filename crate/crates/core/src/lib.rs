//! Exact symbolic engine for a twisted quantum toroidal algebra of type A1
//! and its vertex-operator realisation on a twisted Fock space.

pub mod distr;
pub mod fock;
pub mod lattice;
pub mod polyid;
pub mod qscalar;
pub mod report;
pub mod toroidal;
pub mod vertexop;

pub use fock::{BasisState, FockVector, Mode};
pub use lattice::{RootElt, Weight};
pub use qscalar::{LaurentQ, Monomial, QScalar, ScalarSum, SumMap};
