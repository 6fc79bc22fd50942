//! Extreme H- and Z-eigenvalues of even-order symmetric tensors.
//!
//! The eigenvalue problem is posed as minimizing `f(x) = A x^r / B x^r` over
//! the unit sphere, where the denominator tensor selects the spectrum type.
//! The main solver approximates `f` by a cubic model with an adaptively tuned
//! weight, takes its inexact minimizer through a Cayley-transform curvilinear
//! search that keeps iterates feasible, and accepts steps by the ratio of
//! actual to predicted reduction. Hypergraph adjacency, Laplacian and
//! signless Laplacian tensors get an edge-wise fast path for all three
//! tensor-vector contractions so the `n^r` tensor is never materialized.
//!
//! A shifted higher-order power method and a brute-force circle-scan
//! enumerator serve as independent cross-checks.

pub mod acrcet;
pub mod cubic;
pub mod error;
pub mod hypergraph;
pub mod metric;
pub mod objective;
pub mod oracle;
pub mod power;
pub mod report;
pub mod tensor;

pub use error::{Result, TeneigError};
pub use metric::Spectrum;
pub use objective::{Extreme, ObjectiveContext, TensorHandle};
pub use report::{EigenReport, SolveStatus};
pub use tensor::DenseSymmetricTensor;
