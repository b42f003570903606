pub mod env;
pub mod deterioration;
pub mod error;
pub mod filter;
pub mod lifecycle;
pub mod observation;
pub mod reliability;
pub mod rng;
pub mod stats;
pub mod structure;
