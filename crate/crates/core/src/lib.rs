//! Pressures, escape rates, conditionally invariant densities and survivor
//! measures for the open intermittent map
//! f(x) = x(1 + 2^g x^g) on [0, 1/2), f(x) = 2x - 1 on [1/2, 1].

pub mod cheb;
pub mod claims;
pub mod error;
pub mod holes;
pub mod induced;
pub mod interval_set;
pub mod jobs;
pub mod map_core;
pub mod pressure;
pub mod roots;
pub mod spectra;
pub mod stats;
pub mod survivor;

pub use error::{Error, Result};
pub use holes::Hole;
pub use induced::{InducedSystem, PotentialSpec};
pub use map_core::{Branch, MapParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
