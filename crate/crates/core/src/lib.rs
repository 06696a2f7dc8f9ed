pub mod commands;
pub mod ct_sim;
pub mod error;
pub mod io;
pub mod models;
pub mod nn;
pub mod objectives;
pub mod pipeline;
pub mod seeds;
pub mod spectral;

pub use error::{Error, Result};
