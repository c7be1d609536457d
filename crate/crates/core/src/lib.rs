pub mod error;
pub mod fock;
pub mod linalg;
pub mod special;
pub mod units;
pub mod circuit;
pub mod normal_modes;
pub mod analytics;

pub use faer::c64;
pub mod floquet;
pub mod config;
pub mod reports;
