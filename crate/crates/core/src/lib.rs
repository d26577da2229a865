//! Extreme domain adaptation (EDA).
//!
//! A semi-supervised cross-domain classifier on top of a frozen random
//! hidden layer. Output weights `β` are fitted jointly on labeled source
//! data, a few labeled target samples, and pre-labels of unlabeled target
//! data, with an ℓ2,1 row-sparsity penalty, a learned `c × c` category
//! transformation `Θ` for the target labels, and a k-NN graph Laplacian
//! smoothness term. The multi-view variant learns one model per feature
//! view plus simplex view weights.
//!
//! | module | contents |
//! |---|---|
//! | [`data`] | datasets, ±1 label encoding, CSV/manifest I/O, synthetic shift |
//! | [`feature_map`] | random hidden layer |
//! | [`graph`] | k-NN graph Laplacian |
//! | [`elm`] | ridge ELM and SS-ELM baselines |
//! | [`preclassifier`] | soft labels for unlabeled target data |
//! | [`eda`] | single- and multi-view solvers |
//! | [`bench`] | metrics, runner, reports, sweeps |
//! | [`model_io`] | JSON model files |

pub mod bench;
pub mod data;
pub mod eda;
pub mod elm;
pub mod error;
pub mod feature_map;
pub mod graph;
pub mod linalg;
pub mod model_io;
pub mod preclassifier;
mod serde_matrix;

pub use error::{EdaError, Result};
