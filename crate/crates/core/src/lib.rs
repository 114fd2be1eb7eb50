pub mod coseg;
pub mod error;
pub mod features;
pub mod fixtures;
pub mod io;
pub mod models;
pub mod pipeline;
pub mod ot;
pub mod pd;
mod util;

pub use error::{Error, Result};
