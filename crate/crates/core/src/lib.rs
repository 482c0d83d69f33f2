pub mod ancient;
pub mod audit;
pub mod avoidance;
pub mod density;
pub mod error;
pub mod flow;
pub mod io;
pub mod linalg;
pub mod modes;
pub mod parallel;
pub mod soliton;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
