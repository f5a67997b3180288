//! Sets of z = ηᵀy values compatible with a conditioning event.

pub mod full;
pub mod grid;
pub mod partition;
pub mod polyhedron;
pub mod stable;
pub mod truncation_set;

pub use full::{full_target_truncation, full_target_truncation_with};
pub use grid::{grid_truncation, uniform_grid};
pub use partition::{
    line_partition, line_partition_with, model_sign_truncation, model_truncation, variable_truncation, GeometryOptions,
    LinePartition, PathContext, Segment,
};
pub use polyhedron::{polyhedron_for_model_signs, truncation_interval, truncation_interval_tol, LineDecomposition, Polyhedron};
pub use stable::{active_t_statistics, stable_l1_from_partitions, stable_l1_truncation, stable_t_truncation, stable_t_truncation_with};
pub use truncation_set::{Interval, TruncationSet};
