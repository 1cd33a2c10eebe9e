//! Post-processing and evaluation toolkit for RGB-thermal pedestrian detection.
//!
//! The crate covers the deterministic, non-neural parts of an unregistered
//! RGB-T detection pipeline: box codecs for anchor-free heads, the
//! proposal-guided deformable-convolution forward kernel, homography
//! augmentation, decoupled and pair-wise NMS, Hungarian pairing of
//! per-modality annotations, and LAMR / shift-robustness evaluation.
//! Detector outputs from any source can be post-processed and scored with it.

pub mod codec;
pub mod eval;
pub mod geometry;
pub mod homography;
pub mod io;
pub mod mining;
pub mod nms;
pub mod pairing;
pub mod synth;

pub use geometry::{enclosing_box, iou, translate, BoundingBox, ScoredBox};
pub use nms::{DetectionPair, NmsConfig};
pub use pairing::PersonGroup;
