//! Exact verification toolkit for groups acting on Bass-Serre trees.
//!
//! Everything is desk scale and exact: group elements are table indices,
//! scalars are Gaussian rationals, operators are sparse matrices over a
//! finite-group algebra. The crate builds amalgam and HNN normal forms,
//! realizes the associated tree with its vertex-to-edge matching, lifts
//! group-algebra elements to operators on tree modules, and checks the
//! induced trace identities and Fredholm index bookkeeping.

pub mod algebra;
pub mod exec;
pub mod group;
pub mod index;
pub mod norms;
pub mod operator;
pub mod scalar;
pub mod scenario;
pub mod suites;
pub mod tree;
pub mod words;

pub use exec::ExecMode;
pub use group::{Elem, FiniteGroup, GroupHom, Subgroup};
pub use scalar::Gaussian;
pub use words::{GroupSpec, Letter, NormalForm};
