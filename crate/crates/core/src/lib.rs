//! Amplitude flow reconstruction for polychromatic ptychography.
//!
//! The crate simulates multi-wavelength ptychographic intensities and
//! recovers the object stack, the probe stack, or both, by Wirtinger gradient
//! descent on a regularized amplitude loss with Armijo-Goldstein step
//! selection.

pub mod baseline;
pub mod block;
pub mod error;
pub mod forward;
pub mod io;
pub mod objective;
pub mod optimizer;
pub mod recon;
pub mod scenario;

pub use block::{BlockVector, C64};
pub use error::{Error, Result};
