//! Numerical tests for local isometric immersion of a Riemannian n-manifold
//! into Euclidean (n+1)-space, following the curvature-operator approach:
//! recover the candidate second fundamental form from ln of the curvature
//! operator, check the Weyl-type and Codazzi obstructions, integrate the
//! height field, flatten the residual metric, and assemble the immersion.

pub mod cross_section;
pub mod curvature;
pub mod diff;
pub mod error;
pub mod field;
pub mod flatten;
pub mod general_k;
pub mod frame;
pub mod grid;
pub mod height;
pub mod io;
pub mod obstruction;
pub mod operator;
pub mod pipeline;
pub mod presets;

pub use error::{Error, Result};
pub use field::{AnalyticMetric, MetricField, TensorField, Variance};
pub use grid::ChartGrid;
