//! Stability components from pose and plantar pressure: centre of mass,
//! centre of pressure, base of support, and the CoMtoCoP / CoMtoBoS
//! metrics built on them.

pub mod com;
pub mod error;
pub mod eval;
pub mod filter;
pub mod geometry;
pub mod io;
pub mod pose;
pub mod pressure;
pub mod stability;
pub mod synth;
pub mod take;

pub use error::{Error, Result};
