//! Simulation and two-stage output-feedback identification of Lure systems:
//! a positive-real linear block in negative feedback with a static
//! nonlinearity.

pub mod config;
pub mod error;
pub mod lti;
pub mod excitation;
pub mod experiment;
pub mod ident;
pub mod lure;
pub mod nonlinearity;
pub mod sim;
pub mod validation;

pub use error::{Error, Result};
