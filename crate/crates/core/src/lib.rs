//! Numerical laboratory for the Robin function of smoothly bounded domains in
//! `C^n`, the Kähler metric with potential `log(-Lambda)`, its curvature and
//! boundary asymptotics.

pub mod asymptotics;
pub mod domain_geometry;
pub mod error;
pub mod geodesics;
pub mod green_robin;
pub mod jet;
pub mod lambda_metric;
pub mod point;
pub mod quadrature;

pub use error::{Error, Result};
pub use point::{ComplexPoint, C64};
