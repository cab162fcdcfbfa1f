pub mod comparison;
pub mod curvature_lab;
pub mod error;
pub mod jets;
pub mod linalg;
pub mod measures;
pub mod metric_zoo;
pub mod minkowski_lab;
pub mod ode;
pub mod quadrature;
pub mod sampling;
pub mod spray_geodesics;
pub mod tensor;
pub use error::{Error, Result};
