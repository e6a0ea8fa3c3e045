//! Stability analysis and mass-distribution optimization for m-link Ziegler
//! pendulums loaded by a tangential follower force.
#![allow(clippy::needless_range_loop)]

mod algebra;
pub mod charpoly;
pub mod critload;
pub mod error;
pub mod model;
pub mod optimize;
pub mod roots;
pub mod singular;
pub mod stability;
pub mod sweep;

pub mod verify;

pub use error::{Error, Result};
