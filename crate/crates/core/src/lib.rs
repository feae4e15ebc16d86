//! Automatic 3D quantification of infarct in late gadolinium enhanced cardiac
//! MR: slice realignment, intensity normalization, Rician mixture modelling,
//! graph-cut classification, post-processing and AHA segment reporting.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod scalar;
pub mod vec3;
pub mod error;

pub mod geometry;
pub mod simplex;
pub mod realign;

pub mod lm;
pub mod rician;
pub mod contour;
pub mod normalize;

pub mod maxflow;
pub mod volume;
pub mod graphcut;
pub mod postprocess;

pub mod aha;
pub mod metrics;
pub mod svg;

pub mod dataset;
pub mod phantom;
pub mod io;
pub mod pipeline;

pub use error::{Error, Result};
pub use scalar::Real;
pub use vec3::Vec3;

pub type Point3 = vec3::Vec3<f64>;
pub type Pose = geometry::SlicePose<f64>;
pub type Slice = geometry::SliceImage<f64>;
pub type Problem = realign::AlignmentProblem<f64>;
pub type Alignment = realign::AlignmentResult<f64>;
pub type MixtureParams = rician::RicianMixtureParams<f64>;
pub type Contours = contour::ContourSet<f64>;
pub type Volume = volume::MyocardiumVolume<f64>;
pub type Stack = volume::StackVolume<f64>;
pub type Dataset = dataset::LgeDataset<f64>;
pub type Truth = phantom::PhantomTruth<f64>;
pub type Report = pipeline::PipelineReport<f64>;
