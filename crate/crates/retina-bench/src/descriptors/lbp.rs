//! Uniform local binary patterns on a 28x28 patch: 8-neighbor radius-1
//! codes over the 26x26 interior, histogrammed into 59 uniform-pattern bins
//! and zero-padded to 64.

use std::sync::OnceLock;

use crate::imageproc::ImageTensor;

use super::{DescriptorError, DESCRIPTOR_DIM, PATCH_SIZE};

/// Neighbor offsets in bit order, starting east and going clockwise in
/// image coordinates (y grows downward).
const NEIGHBORS: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

pub const UNIFORM_BINS: usize = 59;

/// Number of 0/1 transitions in the circular 8-bit string.
fn transitions(code: u8) -> u32 {
    let rotated = code.rotate_left(1);
    (code ^ rotated).count_ones()
}

/// Map each 8-bit code to its histogram bin: uniform codes (at most two
/// circular transitions) get indices 0..57 in increasing code order, all
/// non-uniform codes share bin 58.
fn uniform_map() -> &'static [u8; 256] {
    static MAP: OnceLock<[u8; 256]> = OnceLock::new();
    MAP.get_or_init(|| {
        let mut map = [0u8; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            map[code as usize] = if transitions(code) <= 2 {
                let idx = next;
                next += 1;
                idx
            } else {
                58
            };
        }
        debug_assert_eq!(next, 58);
        map
    })
}

/// 64-D LBP descriptor of one 28x28 patch: uniform-pattern histogram,
/// zero-padded to 64 and scaled to unit L2 norm. The last 5 components are
/// always zero.
pub fn lbp_patch(patch: &ImageTensor) -> Result<Vec<f32>, DescriptorError> {
    if patch.width != PATCH_SIZE || patch.height != PATCH_SIZE || patch.channels != 1 {
        return Err(DescriptorError::WrongPatchSize {
            w: patch.width,
            h: patch.height,
            expected: PATCH_SIZE,
        });
    }
    let map = uniform_map();
    let mut hist = [0u32; UNIFORM_BINS];
    for y in 1..PATCH_SIZE - 1 {
        for x in 1..PATCH_SIZE - 1 {
            let center = patch.at(x, y);
            let mut code = 0u8;
            for (bit, (dx, dy)) in NEIGHBORS.iter().enumerate() {
                let v = patch.at((x as i32 + dx) as usize, (y as i32 + dy) as usize);
                if v >= center {
                    code |= 1 << bit;
                }
            }
            hist[map[code as usize] as usize] += 1;
        }
    }
    let norm = hist.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
    let mut out = vec![0f32; DESCRIPTOR_DIM];
    if norm > 0.0 {
        for (o, &c) in out.iter_mut().zip(hist.iter()) {
            *o = (c as f64 / norm) as f32;
        }
    }
    Ok(out)
}
