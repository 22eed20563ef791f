pub mod error;
pub mod horn;
pub mod hull;
pub mod io;
pub mod linalg;
pub mod normalform;
pub mod rng;
pub mod stability;
pub mod symplectic;

pub use error::{Error, Result};
