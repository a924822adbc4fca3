//! 2-D electromagnetic inverse-imaging toolkit.
//!
//! The crate has two halves:
//!
//! - a physics half — scene description ([`scene`]), a method-of-moments
//!   volume-integral-equation forward solver with dense-direct and
//!   FFT-accelerated iterative paths ([`forward`]), and the dataset
//!   generation/persistence machinery ([`dataset`]);
//! - a learning half — a small exact-gradient neural substrate ([`neural`])
//!   and the three models built on it: an adversarial autoencoder whose
//!   generator draws scatterer geometries from a Gaussian latent space
//!   ([`aae`]), a CNN surrogate predicting field amplitudes from images
//!   ([`fnn`]), and the tandem inverse network that maps measured amplitudes
//!   back to geometry through the frozen generator and surrogate ([`inn`]).

pub mod aae;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fnn;
pub mod forward;
pub mod inn;
pub mod neural;
pub mod scene;
pub mod special;

pub use error::{Error, Result};
pub use forward::{simulate_response, FieldVector, SolveMethod, SolverOptions};
pub use scene::{ContrastImage, SceneConfig};
