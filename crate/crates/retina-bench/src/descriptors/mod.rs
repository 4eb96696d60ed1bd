//! Local feature extraction: SURF at detected interest points, HOG and LBP
//! on a non-overlapping patch grid, each computed per color channel.
//!
//! All three descriptor kinds are 64-dimensional so they can be pooled into
//! one feature matrix and quantized against a single codebook.

mod hog;
mod lbp;
mod surf;

pub use hog::hog_patch;
pub use lbp::lbp_patch;
pub use surf::{describe_surf, detect_surf, Keypoint, DEFAULT_SURF_THRESHOLD};

use thiserror::Error;

use crate::imageproc::{split_channels, ImageTensor};

pub const DESCRIPTOR_DIM: usize = 64;
/// Side length of the grid patches HOG and LBP are computed on.
pub const PATCH_SIZE: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorKind {
    Surf,
    Hog,
    Lbp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    R,
    G,
    B,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::R, Channel::G, Channel::B];
}

/// A 64-D unit-norm (or all-zero) local descriptor tagged with its kind and
/// the color channel it was extracted from.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f32>,
    pub kind: DescriptorKind,
    pub channel: Channel,
}

impl Descriptor {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// All local descriptors of one image.
#[derive(Debug, Clone, Default)]
pub struct DescriptorSet {
    pub descriptors: Vec<Descriptor>,
}

impl DescriptorSet {
    pub fn count_kind(&self, kind: DescriptorKind) -> usize {
        self.descriptors.iter().filter(|d| d.kind == kind).count()
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("image dimensions {w}x{h} not divisible by patch size {patch}")]
    NonDivisibleDimensions { w: usize, h: usize, patch: usize },
    #[error("patch must be {expected}x{expected}, got {w}x{h}")]
    WrongPatchSize { w: usize, h: usize, expected: usize },
    #[error("keypoint ({x:.1}, {y:.1}) too close to the border for scale {scale:.2}")]
    KeypointOutOfBounds { x: f64, y: f64, scale: f64 },
    #[error(transparent)]
    Image(#[from] crate::imageproc::ImageError),
}

/// Cut a single-channel image into non-overlapping `patch` x `patch` tiles,
/// row-major. Dimensions must divide evenly.
pub fn extract_patch_grid(g: &ImageTensor, patch: usize) -> Result<Vec<ImageTensor>, DescriptorError> {
    if patch == 0 || g.width % patch != 0 || g.height % patch != 0 {
        return Err(DescriptorError::NonDivisibleDimensions {
            w: g.width,
            h: g.height,
            patch,
        });
    }
    let cols = g.width / patch;
    let rows = g.height / patch;
    let mut out = Vec::with_capacity(rows * cols);
    for py in 0..rows {
        for px in 0..cols {
            let mut data = Vec::with_capacity(patch * patch);
            for y in 0..patch {
                let row = (py * patch + y) * g.width + px * patch;
                data.extend_from_slice(&g.data[row..row + patch]);
            }
            out.push(ImageTensor {
                width: patch,
                height: patch,
                channels: 1,
                data,
            });
        }
    }
    Ok(out)
}

/// Extract the full descriptor set of a preprocessed 224x224 RGB image:
/// per channel, SURF at detected keypoints plus HOG and LBP on the 8x8
/// patch grid. Output order is channel R,G,B; within a channel SURF (by
/// descending response), then HOG and LBP in grid row-major order.
pub fn extract_all(img: &ImageTensor, surf_threshold: f64) -> Result<DescriptorSet, DescriptorError> {
    let (r, g, b) = split_channels(img)?;
    let mut descriptors = Vec::new();
    for (tensor, channel) in [(r, Channel::R), (g, Channel::G), (b, Channel::B)] {
        extract_channel(&tensor, channel, surf_threshold, &mut descriptors)?;
    }
    Ok(DescriptorSet { descriptors })
}

fn extract_channel(
    g: &ImageTensor,
    channel: Channel,
    surf_threshold: f64,
    out: &mut Vec<Descriptor>,
) -> Result<(), DescriptorError> {
    for kp in detect_surf(g, surf_threshold) {
        match describe_surf(g, &kp) {
            Ok(values) => out.push(Descriptor { values, kind: DescriptorKind::Surf, channel }),
            // keypoints without enough sampling margin are skipped
            Err(DescriptorError::KeypointOutOfBounds { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let patches = extract_patch_grid(g, PATCH_SIZE)?;
    for patch in &patches {
        out.push(Descriptor { values: hog_patch(patch)?, kind: DescriptorKind::Hog, channel });
    }
    for patch in &patches {
        out.push(Descriptor { values: lbp_patch(patch)?, kind: DescriptorKind::Lbp, channel });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageproc::merge_channels;

    #[test]
    fn grid_224_yields_64_patches() {
        let g = ImageTensor::filled(224, 224, 1, 0.5);
        assert_eq!(extract_patch_grid(&g, 28).unwrap().len(), 64);
    }

    #[test]
    fn grid_56x28_yields_2_patches() {
        let g = ImageTensor::filled(56, 28, 1, 0.5);
        assert_eq!(extract_patch_grid(&g, 28).unwrap().len(), 2);
    }

    #[test]
    fn grid_rejects_non_divisible() {
        let g = ImageTensor::filled(225, 224, 1, 0.5);
        assert!(matches!(
            extract_patch_grid(&g, 28),
            Err(DescriptorError::NonDivisibleDimensions { .. })
        ));
    }

    #[test]
    fn grid_patches_are_views_of_the_right_pixels() {
        // 56x56 ramp; patch (1,0) should start at x=28
        let data: Vec<f32> = (0..56 * 56).map(|i| (i % 56) as f32 / 56.0).collect();
        let g = ImageTensor::new(56, 56, 1, data).unwrap();
        let patches = extract_patch_grid(&g, 28).unwrap();
        assert_eq!(patches.len(), 4);
        assert_eq!(patches[1].at(0, 0), 28.0 / 56.0);
        assert_eq!(patches[2].at(0, 0), 0.0);
    }

    #[test]
    fn extract_all_counts_on_constant_image() {
        let img = ImageTensor::filled(224, 224, 3, 0.4);
        let ds = extract_all(&img, DEFAULT_SURF_THRESHOLD).unwrap();
        assert_eq!(ds.count_kind(DescriptorKind::Surf), 0);
        assert_eq!(ds.count_kind(DescriptorKind::Hog), 192);
        assert_eq!(ds.count_kind(DescriptorKind::Lbp), 192);
        // constant image: HOG has no gradient energy; LBP collapses to a
        // single unit spike (all codes are 0xFF)
        assert!(ds
            .descriptors
            .iter()
            .filter(|d| d.kind == DescriptorKind::Hog)
            .all(|d| d.is_zero()));
        assert!(ds
            .descriptors
            .iter()
            .filter(|d| d.kind == DescriptorKind::Lbp)
            .all(|d| (d.norm() - 1.0).abs() < 1e-6));
    }

    #[test]
    fn extract_all_blob_has_surf_on_every_channel() {
        // identical bright blob in all three channels
        let blob = surf::tests::gaussian_blob(224, 112.0, 112.0, 4.0, 0.8);
        let img = merge_channels(&blob, &blob, &blob).unwrap();
        let ds = extract_all(&img, DEFAULT_SURF_THRESHOLD).unwrap();
        for channel in Channel::ALL {
            let n = ds
                .descriptors
                .iter()
                .filter(|d| d.kind == DescriptorKind::Surf && d.channel == channel)
                .count();
            assert!(n >= 1, "no SURF descriptor on {channel:?}");
        }
        assert_eq!(ds.count_kind(DescriptorKind::Hog), 192);
        assert_eq!(ds.count_kind(DescriptorKind::Lbp), 192);
    }

    #[test]
    fn every_descriptor_is_64d_with_unit_or_zero_norm() {
        let blob = surf::tests::gaussian_blob(224, 90.0, 140.0, 5.0, 0.7);
        let img = merge_channels(&blob, &blob, &blob).unwrap();
        let ds = extract_all(&img, DEFAULT_SURF_THRESHOLD).unwrap();
        for d in &ds.descriptors {
            assert_eq!(d.values.len(), DESCRIPTOR_DIM);
            let n = d.norm();
            assert!(n == 0.0 || (n - 1.0).abs() < 1e-6, "norm {n}");
        }
    }
}
