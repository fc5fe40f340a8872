pub mod cli;
pub mod dual;
pub mod engine;
pub mod error;
pub mod estimate;
pub mod killedwalk;
pub mod lattice;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod verify;
