//! Min-sum message passing for pairwise-separable convex objectives.
//!
//! The solver works on `F(x) = Σ f_i(x_i) + Σ f_ij(x_i, x_j)` over a sparse
//! graph. Edge factors need not be convex; convergence is governed by
//! scaled diagonal dominance of the Hessian, which [`dominance`] certifies
//! or refutes. Quadratic problems run on closed-form parametric messages
//! ([`quadratic`]); everything else runs on grid-sampled messages
//! ([`general`]). [`tree`] and [`reference`] supply independent oracles,
//! and [`bounds`] compares measured errors against the geometric rate
//! bounds.

pub mod bounds;
pub mod check;
pub mod dominance;
pub mod error;
pub mod general;
pub mod generate;
pub mod grid;
pub mod io;
pub mod problem;
pub mod quadratic;
pub mod reference;
pub mod trace;
pub mod tree;

pub use error::{Error, Result};
pub use problem::{EdgeFactor, Graph, NodeFactor, PairwiseObjective, QuadraticProblem};
