pub mod error;
pub mod group;
pub mod hilbert;

pub use error::{Error, Result};
pub mod transform;
pub mod neutral;
pub mod observables;
pub mod game;
pub mod par;
