//! Metrics, charts, regions and cylinders.

mod chart;
mod cylinder;
mod grid;
mod matrix;
mod metric;
mod profile;
mod region;

pub use chart::{check_flatness_assumption, ChartMap, ChartSpec, FlatnessAssumptionReport};
pub use cylinder::{cylinder_contains, Cylinder, FractionalOrder};
pub use grid::VerificationGrid;
pub use matrix::{metric_norm, sym_op_norm, SpdMatrix};
pub use metric::{check_admissible, default_grid_for, AdmissibilityReport, MetricField};
pub use profile::{GraphProfile, GriddedProfile};
pub use region::{BoolOp, BoundarySample, RayProfile, RegionSpec};

pub(crate) use cylinder::check_s;
pub(crate) use region::{dist, dot, norm, tangent_basis};
