//! Exact computer algebra for Lie lattices over the p-adic integers:
//! scalar arithmetic, module linear algebra, structure-constant lattices,
//! family classification, virtual endomorphisms, and finite-level search.

pub mod error;
pub mod families;
pub mod lie_core;
pub mod metabelian;
pub mod oracle;
pub mod padic;
pub mod selfsim;
pub mod zmodlin;

pub use error::{Error, Result};
pub use lie_core::LieLattice;
pub use padic::{PContext, PPoly, PScalar, Val};
pub use zmodlin::{Mat, Submodule};
