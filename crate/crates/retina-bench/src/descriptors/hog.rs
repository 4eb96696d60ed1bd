//! Histogram of oriented gradients on a 28x28 patch: 4x4 grid of 7x7 cells,
//! 4 unsigned orientation bins per cell with linear bin interpolation.

use std::f64::consts::PI;

use crate::imageproc::ImageTensor;

use super::{DescriptorError, DESCRIPTOR_DIM, PATCH_SIZE};

const CELLS: usize = 4;
const CELL_SIZE: usize = 7;
const BINS: usize = 4;

/// 64-D HOG descriptor of one 28x28 patch. Gradient-free patches yield the
/// zero vector; otherwise the output is unit-normalized.
pub fn hog_patch(patch: &ImageTensor) -> Result<Vec<f32>, DescriptorError> {
    if patch.width != PATCH_SIZE || patch.height != PATCH_SIZE || patch.channels != 1 {
        return Err(DescriptorError::WrongPatchSize {
            w: patch.width,
            h: patch.height,
            expected: PATCH_SIZE,
        });
    }
    let n = PATCH_SIZE;
    let px = |x: usize, y: usize| patch.at(x, y) as f64;
    let mut acc = [0f64; DESCRIPTOR_DIM];
    for y in 0..n {
        for x in 0..n {
            // centered differences with edge clamping
            let gx = (px((x + 1).min(n - 1), y) - px(x.saturating_sub(1), y)) / 2.0;
            let gy = (px(x, (y + 1).min(n - 1)) - px(x, y.saturating_sub(1))) / 2.0;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            // unsigned orientation in [0, pi)
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += PI;
            }
            if theta >= PI {
                theta -= PI;
            }
            let pos = theta / (PI / BINS as f64);
            let lo = pos.floor() as usize % BINS;
            let frac = pos - pos.floor();
            let cell = (y / CELL_SIZE) * CELLS + x / CELL_SIZE;
            acc[cell * BINS + lo] += mag * (1.0 - frac);
            acc[cell * BINS + (lo + 1) % BINS] += mag * frac;
        }
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(if norm > 0.0 {
        acc.iter().map(|&v| (v / norm) as f32).collect()
    } else {
        vec![0f32; DESCRIPTOR_DIM]
    })
}
