//! Solver for the two-dimensional lake equations in vorticity-stream
//! form: transport of the generalized vorticity `omega = curl(v) / b`
//! by the depth-weighted velocity on masked Cartesian grids, with the
//! multiply-connected Biot-Savart reconstruction and an experiment
//! harness for domain- and depth-perturbation convergence studies.

pub mod biot_savart;
pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod transport;

pub use geometry::{
    approximating_sequence, depth, hausdorff_distance, signed_distance, Curve, DepthProfile,
    DepthRule, GeometryError, LakeGeometry, Point, Rect,
};
pub use grid::{build_grid, Grid, GridError, ScalarField, VectorField};
