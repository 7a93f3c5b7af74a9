//! Unsupervised instance segmentation of white blood cells (WBCs) in stained
//! bone-marrow microscopy images.
//!
//! The pipeline runs in three stages:
//! 1. **Semantic masking** — a CMYK color-space decomposition isolates the
//!    regions containing cells: WBCs have minimal contrast in the Y channel
//!    and maximal contrast in the M channel, so thresholded-and-closed masks
//!    of both channels are intersected.
//! 2. **Region clustering** — pixels inside the semantic mask are clustered
//!    (k-means, k = 3) on the contrast-stretched CIELAB a* channel, and the
//!    clusters are assigned the roles nucleus / cytoplasm / background by
//!    IoU against a rough grayscale nucleus mask.
//! 3. **Instance separation** — distance-transform peaks of the nucleus
//!    cluster seed a marker-based watershed over the semantic mask, splitting
//!    touching cells along watershed lines.
//!
//! The crate also ships a synthetic slide generator with exact ground truth
//! ([`synth`]) and an IoU evaluation harness ([`eval`]) so the pipeline can be
//! exercised at corpus scale without any private clinical data.
//!
//! With the default `parallel` feature the per-pixel inner loops and the
//! corpus fan-out run on rayon; disabling the feature falls back to
//! sequential code paths that produce bit-identical results.

pub mod clustering;
pub mod colorspace;
pub mod error;
pub mod eval;
pub mod imgproc;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod watershed;

mod parallel;

pub use error::{Error, Result};
pub use raster::{BinaryMask, FloatPlane, LabelMap, RasterImage};
