//! Energy-based temporal generative models with temporal-autoencoding pretraining.
//!
//! The crate implements three model families and the machinery to train and
//! evaluate them on multivariate time series:
//!
//! - [`rbm`] — static restricted Boltzmann machines (binary and
//!   Gaussian-binary visibles), contrastive-divergence training, and exact
//!   enumeration oracles for small models.
//! - [`temporal`] — the reduced TRBM (hidden-to-hidden delayed weights only,
//!   filtering approximation) and the CRBM (delayed visible-to-hidden and
//!   visible-to-visible weights acting as dynamic biases).
//! - [`ta`] — temporal-autoencoding pretraining: the temporal model is read as
//!   a deterministic feed-forward predictor of the present frame and its
//!   delayed weights are trained by backpropagated squared-error descent,
//!   then the three-stage schedule (static CD, TA, joint CD) is orchestrated.
//! - [`data`] — CSV ingestion, z-score normalization, window extraction,
//!   chunk-of-k univariate state augmentation and synthetic generators.
//! - [`eval`] — filling-in-frames and free-running generation protocols,
//!   MSE/MAPE metrics, posterior-mean prediction and a deterministic MLP
//!   baseline.
//! - [`checkpoint`] — a self-describing binary model format (`TEMPORA1`).
//! - [`verify`] — the oracle suites (partition normalization, CD-vs-exact
//!   gradient direction, TA finite differences, sampler frequencies) exposed
//!   to the command line.
//!
//! All stochastic operations draw from explicit [`rng::RngStream`] lanes, so
//! every result is reproducible from a root seed.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod rbm;
pub mod rng;
pub mod ta;
pub mod temporal;
pub mod verify;

pub use error::{Error, Result};
pub use rng::RngStream;
