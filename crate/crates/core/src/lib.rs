//! Infinite-size QAOA energies for the Sherrington–Kirkpatrick model.
//!
//! Two evaluation routes are provided: [`exact::nu_exact`], which sums over
//! all `2^{2p+1}` bitstrings, and [`spinboson::nu_mps`], which simulates a
//! spin coupled to `p` bosonic modes with tensor trains. Around them sit a
//! derivative-free angle optimizer, scaling-law fits and a finite-size
//! statevector harness.
//!
//! The numerical engines are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod dense;
pub mod error;
pub mod exact;
pub mod finite;
pub mod fit;
pub mod fock;
pub mod gmatrix;
pub mod mps;
pub mod optimize;
pub mod scalar;
pub mod spinboson;

pub use error::{Error, Result};
pub use fock::FockDim;
pub use gmatrix::{SignedIndex, Bitstring};
pub use scalar::{Cplx, Real};

pub type Angles = gmatrix::Angles<f64>;
pub type GMatrix = gmatrix::GMatrix<f64>;
pub type TensorTrain = mps::TensorTrain<f64>;
pub type TruncationPolicy = mps::TruncationPolicy<f64>;
pub type SpinBosonState = spinboson::SpinBosonState<f64>;
pub type IterationTrace = exact::IterationTrace<f64>;
pub type Complex64 = Cplx<f64>;
