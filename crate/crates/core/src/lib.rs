//! Foveated vision simulation and gaze-policy optimization.
//!
//! The crate is organised around the pipeline it implements:
//!
//! - [`geometry`]: visual-angle arithmetic and field-of-view embedding.
//! - [`foveation`]: Gaussian-pyramid foveation driven by a resolution map.
//! - [`oracle`]: scene-understanding oracle and the two fixation rewards.
//! - [`policy`]: pointwise fixation-policy network and its REINFORCE trainer.
//! - [`scanpath`]: scanpath generation from policies, priority maps and at random.
//! - [`eval`]: category frequencies, NLL scores, heatmaps, AUC and CC.
//! - [`corpus`]: synthetic scene corpora and fixation CSV ingestion.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod foveation;
pub mod geometry;
pub mod image;
pub mod oracle;
pub mod par;
pub mod policy;
pub mod scanpath;

pub use error::{Error, Result};
pub use geometry::{FieldGeometry, FixationPoint, Placement};
pub use image::{Image, Plane};
