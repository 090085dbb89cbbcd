pub mod analysis;
pub mod assembly;
pub mod cbmfem;
pub mod cli;
pub mod config;
pub mod companion;
pub mod error;
pub mod export;
pub mod expr;
pub mod linalg;
pub mod mesh;
pub mod nonlinearity;
pub mod presets;
pub mod problem;
pub mod quadrature;
pub mod system;
pub mod systems;

pub use error::{Error, Result};
