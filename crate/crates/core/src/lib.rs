pub mod banded;
pub mod chart;
pub mod convex;
pub mod dd;
pub mod deform;
pub mod eigen;
pub mod error;
pub mod exec;
pub mod fd;
pub mod field;
pub mod geometry;
pub mod io;
pub mod models;
pub mod neck;
pub mod sparse;
pub mod vstatic;
pub mod weights;

pub use chart::{AxisSpec, BoundaryKind, ChartSpec};
pub use error::{ConvexError, FieldError, NeckError, SolveError, WeightError};
pub use field::{MetricField, ScalarField, SymTensorField, ThetaValue};
