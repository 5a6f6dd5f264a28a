//! Heat kernels and random Fourier features on virtual persistence
//! diagrams over finite metric pairs.
//!
//! The pipeline: a finite metric pair (X, d, A) induces a quotient graph
//! on X/A; diagrams are multisets of off-diagonal points with the W₁
//! matching distance, virtual diagrams the group completion with the
//! translation-invariant metric ρ. Characters of that group live on a
//! torus; integrating them against a heat measure e^{−tλ}dμ gives a
//! positive-definite, Lipschitz kernel, approximated at scale by random
//! Fourier features. A small cubical persistence backend turns images
//! into diagrams, and a topological loss ties it together.

mod assignment;
pub mod cubical;
pub mod diagram;
pub mod dual;
pub mod error;
pub mod heat;
pub mod loss;
pub mod metric_pair;
pub mod rff;
pub mod util;

pub use error::{Error, Result};
