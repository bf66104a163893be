//! Forward simulation and Fourier-domain inversion of the star transform: a
//! weighted sum of attenuation integrals along K rays leaving a common
//! vertex, scanned over a strip 0 < z < L.

pub mod error;
pub mod experiment;
pub mod forward;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod local;
pub mod phantom;
pub mod solver;
pub mod spectral;
pub mod stability;

pub use error::{Category, Error, Result};
