//! Symmetry and Jordan reduction for semidefinite programs.

pub mod combinat;
pub mod error;
pub mod instances;
pub mod io;
pub mod jordan;
pub mod program;
pub mod reduce;
pub mod rng;
pub mod subspace;
pub mod symspace;

pub use error::{Error, Result};
pub use program::{ConicProgram, SparseSym};
pub use symspace::{BlockStructure, SubspaceBasis, SymBlockMatrix};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/matrices.md")]
    mod matrices {}
    #[doc = include_str!("../../../book/src/admissible.md")]
    mod admissible {}
    #[doc = include_str!("../../../book/src/combinatorial.md")]
    mod combinatorial {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    mod decomposition {}
    #[doc = include_str!("../../../book/src/reduction.md")]
    mod reduction {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
