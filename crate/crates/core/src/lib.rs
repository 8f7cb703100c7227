//! Method-of-types exponents over finite alphabets.
//!
//! Type-graph density exponents, biclique and Han-Kobayashi rate regions,
//! strong small-set expansion exponents, minimum relative entropy couplings,
//! closed forms for the doubly symmetric binary source, strengthened
//! hypercontractivity regions and a constructive exchange lemma. Brute-force
//! oracles at tiny block lengths cross-check the single-letter solvers.

pub mod acceptance;
pub mod cli;
pub mod coupling;
pub mod dsbs;
pub mod error;
pub mod exchange;
pub mod hyper;
pub(crate) mod geom;
pub(crate) mod lp;
pub mod probcore;
pub mod singleletter;
pub mod typegraph;

pub use error::{Error, Result};
