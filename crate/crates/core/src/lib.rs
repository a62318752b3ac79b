pub mod besov;
pub mod drift;
pub mod error;
mod fft;
pub mod field;
pub mod interp;
pub mod io;
pub mod linear;
pub mod nonlinear;
pub mod nonlinearity;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod particles;
pub mod product;
pub mod rng;
pub mod special;

pub use error::{Result, SfpeError};
pub use field::{Grid, PhysicalField, SpectralField, TimeField};
