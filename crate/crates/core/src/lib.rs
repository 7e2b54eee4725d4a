//! Adaptive weighted association tests between gene features and several
//! correlated phenotypes.
//!
//! The pipeline runs in stages that each produce a file-backed artifact:
//! per-cell GLM p-values ([`glm::assoc_pvalues`]), a residual-permutation
//! null ([`perm::build_null`]), adaptive combination ([`combine`]),
//! bootstrap weight stability ([`stability`]) and module discovery on the
//! co-membership matrix ([`categorize`]). [`simbench`] generates the
//! benchmark simulations and scores methods on them.

// `!(x > t)` is used on purpose so NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod categorize;
pub mod combine;
pub mod data;
pub mod error;
pub mod glm;
pub mod linalg;
pub mod perm;
pub mod rng;
pub mod simbench;
pub mod stability;
pub mod tsv;

pub use combine::{afp, afz, bonferroni_select, fisher_perm, minp_perm, CombineOutput, GeneTest, Method, WeightVector};
pub use data::{load_dataset, CellFlag, Dataset, DatasetParts, PValueMatrix, PhenotypeKind};
pub use error::{Error, Result};
pub use perm::{build_null, NullStore};
