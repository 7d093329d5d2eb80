//! Dynamics of analytic self-maps of the punctured plane.
//!
//! The crate is layered bottom-up: [`sphere`] holds points, punctures and
//! charts; [`dsl`] parses and compiles maps; [`modulus`] estimates the
//! generalised maximum modulus and its iterated sequences; [`orbit`] follows
//! single points and classifies their fate; [`raster`] classifies whole
//! windows and compares the resulting boundaries; [`verify`] turns the
//! theory's inequalities into pass/fail reports.

pub mod dsl;
pub mod itinerary;
pub mod modulus;
pub mod orbit;
pub mod raster;
pub mod sphere;
pub mod verify;

pub use num_complex::Complex64;
