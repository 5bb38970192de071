pub mod api;
pub mod assoc;
pub mod bench;
pub mod cli;
pub mod data;
pub mod dgp;
pub mod error;
pub mod io;
pub mod knockoff;
pub mod numeric;
pub mod penalty;
pub mod pipeline;
pub mod solver;

pub use data::{DataMatrix, Sample};
pub use error::{Error, Result, Stage};
