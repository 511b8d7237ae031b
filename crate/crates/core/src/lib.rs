//! Data pipeline for semantic segmentation with synthetic and weakly
//! labeled images.
//!
//! - [`scene`]: randomized 3D scenes ray-cast into RGB images with exact
//!   VOC label images.
//! - [`weak`]: bounding boxes turned into pixel labels with GrabCut or a
//!   dense CRF.
//! - [`eval`]: confusion matrix, per-class IoU and mean IoU.
//! - [`plan`]: the two-stage FCN-8s fine-tuning recipe as a key-value file.

pub mod error;
pub mod eval;
pub mod kv;
pub mod plan;
pub mod scene;
pub mod seed;
pub mod voc;
pub mod weak;

pub use error::{Error, Result};
pub use voc::{BoxAnnotation, ClassTaxonomy, LabelImage, LabeledBox, Rect, RgbImage};
