//! Small numerical toolbox shared by the physics and statistics modules.

pub mod lsq;
pub mod optimize;
pub mod quad;
pub mod rng;
pub mod special;

pub use lsq::{levenberg_marquardt, LsqFit, LsqOptions, Residuals};
pub use optimize::{golden_section, nelder_mead, NelderMeadOptions};
pub use quad::periodic_mean;
pub use special::{bessel_j, bessel_j1};
