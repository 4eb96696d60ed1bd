//! Orchestration helpers tying the modules into the two experiment
//! pipelines: corpus-wide preprocessing, descriptor extraction, and deep
//! feature extraction.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{ClassLabel, DatasetManifest};
use crate::deepfeat::{extract_deep, DeepFeatError, ExtractorBackend};
use crate::descriptors::{extract_all, DescriptorError, DescriptorSet};
use crate::features::FeatureVector;
use crate::imageproc::{
    load_rgb, merge_channels, normalize_green, resize_bilinear, split_channels, ImageError,
    ImageTensor,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Deep(#[from] DeepFeatError),
}

/// Preprocessing shared by both pipelines: bilinear resize to 224x224,
/// channel split, intensity normalization of the green channel only.
pub fn preprocess(img: &ImageTensor) -> Result<ImageTensor, PipelineError> {
    let resized = resize_bilinear(img, 224, 224)?;
    let (r, g, b) = split_channels(&resized)?;
    let g = normalize_green(&g)?;
    Ok(merge_channels(&r, &g, &b)?)
}

/// Load, preprocess and extract the descriptor set of every image in the
/// manifest, in manifest order. Parallel across images.
pub fn descriptors_for_manifest(
    manifest: &DatasetManifest,
    surf_threshold: f64,
) -> Result<Vec<DescriptorSet>, PipelineError> {
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let img = load_rgb(&e.path)?;
            let pre = preprocess(&img)?;
            Ok(extract_all(&pre, surf_threshold)?)
        })
        .collect()
}

/// Same as [`descriptors_for_manifest`] but over in-memory tensors.
pub fn descriptors_for_tensors(
    tensors: &[ImageTensor],
    surf_threshold: f64,
) -> Result<Vec<DescriptorSet>, PipelineError> {
    tensors
        .par_iter()
        .map(|img| {
            let pre = preprocess(img)?;
            Ok(extract_all(&pre, surf_threshold)?)
        })
        .collect()
}

/// Deep feature vector of every manifest image, in manifest order.
pub fn deep_features_for_manifest(
    manifest: &DatasetManifest,
    backend: &dyn ExtractorBackend,
) -> Result<Vec<FeatureVector>, PipelineError> {
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let img = load_rgb(&e.path)?;
            let pre = preprocess(&img)?;
            Ok(extract_deep(&pre, backend)?)
        })
        .collect()
}

/// Manifest labels in entry order.
pub fn manifest_labels(manifest: &DatasetManifest) -> Vec<ClassLabel> {
    manifest.entries.iter().map(|e| e.label).collect()
}

/// Load and preprocess a single image file.
pub fn preprocess_file(path: &Path) -> Result<ImageTensor, PipelineError> {
    preprocess(&load_rgb(path)?)
}
