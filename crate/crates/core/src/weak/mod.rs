//! Box-to-mask conversion: GrabCut per box, or a box prior refined by a
//! dense CRF over the whole image.

pub mod convert;
pub mod crf;
pub mod flow;
pub mod gmm;
pub mod grabcut;
pub mod lattice;
pub mod merge;
pub mod unary;

pub use convert::{convert_dataset, label_from_boxes, ConvertManifest, ConvertOptions, LabelMethod};
pub use crf::{dense_crf_refine, CrfParams, MeanField, MessagePassing};
pub use gmm::{fit_gmm, Gmm};
pub use grabcut::{
    compute_beta, grabcut, grabcut_energy, grabcut_segment, BinaryMask, GrabCutOutcome,
    GrabCutParams, Neighborhood,
};
pub use merge::merge_instance_masks;
pub use unary::{boxes_to_unary, BoxPrior, UnaryField};
