//! Dense linear algebra, seeded randomness and the grid DFT.

mod fourier;
mod mat;
mod rng;

pub use fourier::{dft2, idft2, radial_index, signed_frequency, Grid2D, Spectrum};
pub use mat::{dot, frobenius_norm, matmul, row_softmax, Mat};
pub use rng::SeededRng;
