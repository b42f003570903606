pub mod capacity;
pub mod model;
pub mod surrogate;

pub use capacity::*;
pub use model::*;
pub use surrogate::*;
