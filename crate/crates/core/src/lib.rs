//! Information-theoretic output bounds and adaptive evaluation for
//! conjunctive queries.
//!
//! The pipeline runs from parsed queries and statistics ([`qmodel`]) through
//! structural analysis ([`hypergraph`]) and exact linear programming
//! ([`ratlp`], [`infobound`]) to proof sequences ([`proofmachine`]) and their
//! execution over data ([`pandaexec`]). [`oracle`] holds brute-force
//! references.

pub mod corpus;
pub mod error;
pub mod hypergraph;
pub mod infobound;
pub mod oracle;
pub mod pandaexec;
pub mod proofmachine;
pub mod qmodel;
pub mod ratlp;
pub mod relcore;
pub mod scalar;
pub mod varset;

pub use error::{Error, Result};

pub type Rational = num_rational::BigRational;
pub type ExactLp = ratlp::LinearProgram<Rational>;
pub type FloatLp = ratlp::LinearProgram<f64>;
pub type ExactSolution = ratlp::LpSolution<Rational>;
