//! Filtered topological thinning of 8-bit grayscale images.
//!
//! [`lambda_skeleton`] lowers every point that can be removed without
//! changing the topology of any threshold section, except end points
//! whose contrast exceeds `lambda`, until none remain. Peaks and branches
//! of contrast at most `lambda` are flattened along the way.
//! [`sdm::ParallelEngine`] computes the same kind of result with several
//! workers over row bands of the image.
//!
//! Foreground sections use 8-adjacency and their complements 4-adjacency.

pub mod bench;
pub mod image;
pub mod pgm;
pub mod sdm;
pub mod skeleton;
pub mod synth;
pub mod topology;

pub use image::{GrayImage, ImageError, Point};
pub use pgm::{read_pgm, read_pgm_variant, write_pgm, PgmError, PgmFormat, PgmVariant};
pub use sdm::{run_parallel, EngineConfig, EngineError, ParallelEngine, QueueVariant};
pub use skeleton::{count_targets, is_stable, lambda_skeleton, lambda_skeleton_with, SkeletonStats};
pub use synth::{gen_synthetic, gradient3x3, SyntheticKind, SyntheticSpec};
pub use topology::{classify, Lambda, NeighborMask, Neighborhood, PointClass};
