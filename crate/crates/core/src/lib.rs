//! Hermite-Gaussian mode sorting (SPADE) for two incoherent point sources
//! of unequal brightness: closed-form detection probabilities, Fisher
//! information of ideal direct imaging, SPADE error bounds under
//! misalignment and crosstalk, seeded photon-counting simulation, and the
//! calibration pipeline that turns counts back into separations or
//! intensity ratios.

pub mod bounds;
pub mod calibration;
pub mod error;
pub mod experiment;
pub mod figures;
pub mod fisher;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod table;

pub use error::{Error, Result};
