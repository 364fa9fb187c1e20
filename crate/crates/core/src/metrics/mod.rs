//! Atomic metrics and their convex combinations.

pub mod combine;
pub mod image_ops;
pub mod scores;

pub use combine::{combine, combine_bc, combine_oc, combine_of, combine_total};
pub use image_ops::{degrade, edge_map, edge_raster, normalize_crop, object_crop, square_region, ObjectCrop};
pub use scores::{
    clip_alignment, cosine, distance_to_similarity, embedding_similarity, iq_score, l2_similarity,
    position_consistency, size_consistency, size_fidelity, SizeThresholds,
};
