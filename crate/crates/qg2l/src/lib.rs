//! Stochastic two-layer quasi-geostrophic model, pseudo-spectral, with a
//! generalized-coupling harness that measures the ergodicity machinery
//! (energy estimates, coupling contraction, Wasserstein semimetrics) at desk
//! scale.

pub mod checkpoint;
pub mod coupling;
pub mod ergodics;
pub mod fft;
pub mod field;
pub mod grid;
pub mod harness;
pub mod model;
pub mod sampling;
pub mod spectral;
