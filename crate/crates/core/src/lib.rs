//! Unsupervised binary image segmentation via continuous max-flow.
//!
//! The solver alternates two stages. The inner stage maximizes source flow
//! through a pixel grid under capacity constraints by projection gradient
//! descent on an augmented Lagrangian; its multiplier field relaxes the
//! binary labeling. The outer stage re-estimates the capacities from the
//! current flows under a smoothing prior, so the labeling and the capacity
//! model refine each other without any training data.
//!
//! Modules:
//! - [`grid`]: scalar/vector fields, finite-difference gradient and
//!   divergence, box sums.
//! - [`flow`]: the inner projection gradient solver.
//! - [`capacity`]: capacity re-estimation under the smoothing prior.
//! - [`segmenter`]: the outer loop tying flow and capacity stages together.
//! - [`metrics`]: Dice overlap and percentile Hausdorff distance.
//! - [`synth`]: seeded synthetic image generation.
//! - [`image_io`]: PGM/PNG loading, mask and image writing.
//! - [`report`]: CSV run reports.
//! - [`cli`]: the `cmfseg` command-line interface.

pub mod capacity;
pub mod cli;
pub mod flow;
pub mod grid;
pub mod image_io;
pub mod metrics;
pub mod report;
pub mod segmenter;
pub mod synth;
