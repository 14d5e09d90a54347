//! The sector-guessing game: Eve prepares a physical state in a hidden
//! charge sector, Alice and Charlie try to recover it from inside.

mod config;
mod levels;
mod recovery;
mod transcript;

pub use config::*;
pub use levels::*;
pub use recovery::*;
pub use transcript::*;

#[cfg(test)]
mod tests;
