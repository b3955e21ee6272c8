//! Raster and geometry primitives shared by every pipeline stage.

mod components;
mod distance;
mod geometry;
pub mod io;
mod morphology;
mod raster;
mod threshold;

pub use components::{connected_components, distance_to_boundary, Component};
pub use distance::squared_edt;
pub use geometry::{
    apply_visited, bbox_of_mask, crop, iou, pad_bbox, scale_bbox, scale_fits, union_bbox, BBox,
};
pub use morphology::{close, dilate, erode, StructuringElement};
pub use raster::{BitMask, GrayMap, Point, RasterImage};
pub use threshold::{binarize, histogram_bin, otsu_bin, otsu_threshold, OTSU_BINS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImagingError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("image codec: {0}")]
    Codec(String),
    #[error("io: {0}")]
    Io(String),
}
