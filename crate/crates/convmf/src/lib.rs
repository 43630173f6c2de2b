//! Mean-field theory of signal propagation in deep convolutional networks.
//!
//! The crate has three layers:
//!
//! * **Theory** — [`quadrature`], [`activation`], [`meanfield`] and
//!   [`covariance`] implement the infinite-channel description of a deep
//!   convolutional network: the layer-to-layer covariance map, its fixed
//!   points, the linearization around them, and the per-Fourier-mode depth
//!   scales on which signals fade.
//! * **Constructions** — [`kernels`] builds random convolution kernels
//!   (Gaussian, orthogonal, delta-orthogonal) whose induced linear maps are
//!   exactly norm-preserving, plus the dense random matrices they are
//!   compared against; [`io`] persists them.
//! * **Experiment** — [`simulator`] runs finite-channel random networks
//!   forward and backward to check the theory at finite width; [`spectra`]
//!   measures singular-value spectra of the induced end-to-end Jacobians.
//!
//! Every numerical routine is deterministic: random constructions take
//! explicit seeds, and expectations are quadratures rather than sampling.

pub mod activation;
pub mod covariance;
pub mod error;
pub mod io;
pub mod kernels;
pub mod meanfield;
pub mod quadrature;
pub mod random;
pub mod simulator;
pub mod spectra;

pub use activation::ActivationProfile;
pub use error::{Error, Result};
pub use meanfield::{CriticalPoint, MeanFieldParams};
pub use quadrature::QuadratureRule;
