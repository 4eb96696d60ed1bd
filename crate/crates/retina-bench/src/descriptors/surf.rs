//! Upright SURF: box-filter determinant-of-Hessian detection over the
//! integral image, and the 64-D Haar-response descriptor.

use crate::imageproc::{integral_image, ImageTensor, IntegralImage};

use super::{DescriptorError, DESCRIPTOR_DIM};

/// Detected interest point.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub response: f64,
}

/// Detection threshold on determinant-of-Hessian responses of [0,1]-scaled
/// images. Exposed as a CLI flag.
pub const DEFAULT_SURF_THRESHOLD: f64 = 2e-4;

/// Box-filter sizes per octave. Within an octave only the two middle layers
/// can host a 3x3x3 scale-space maximum.
const OCTAVE_FILTERS: [[usize; 4]; 4] = [
    [9, 15, 21, 27],
    [15, 27, 39, 51],
    [27, 51, 75, 99],
    [51, 99, 147, 195],
];

/// Scale corresponding to a filter size: the 9x9 base filter matches s=1.2.
fn filter_scale(size: f64) -> f64 {
    1.2 * size / 9.0
}

/// Determinant-of-Hessian response map for one filter size, sampled with the
/// given stride. Positions where the filter does not fit are 0.
struct ResponseLayer {
    cols: usize,
    rows: usize,
    step: usize,
    size: usize,
    data: Vec<f64>,
}

impl ResponseLayer {
    #[inline]
    fn get(&self, c: usize, r: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

fn build_layer(ii: &IntegralImage, size: usize, step: usize) -> ResponseLayer {
    let cols = ii.width / step;
    let rows = ii.height / step;
    let lobe = size / 3;
    let border = (size - 1) / 2;
    let inv_area = 1.0 / (size as f64 * size as f64);
    let mut data = vec![0f64; cols * rows];
    for r in 0..rows {
        let y = (r * step) as i64;
        for c in 0..cols {
            let x = (c * step) as i64;
            // skip positions where the filter leaves the image
            if x < border as i64
                || y < border as i64
                || x + border as i64 >= ii.width as i64
                || y + border as i64 >= ii.height as i64
            {
                continue;
            }
            let l = lobe as i64;
            let b = border as i64;
            // second derivative in x: full (2l-1) x size box minus 3x the middle third
            let dxx = ii.box_sum_clipped(x - b, y - l + 1, x + b, y + l - 1)
                - 3.0 * ii.box_sum_clipped(x - l / 2, y - l + 1, x - l / 2 + l - 1, y + l - 1);
            let dyy = ii.box_sum_clipped(x - l + 1, y - b, x + l - 1, y + b)
                - 3.0 * ii.box_sum_clipped(x - l + 1, y - l / 2, x + l - 1, y - l / 2 + l - 1);
            let dxy = ii.box_sum_clipped(x + 1, y - l, x + l, y - 1)
                + ii.box_sum_clipped(x - l, y + 1, x - 1, y + l)
                - ii.box_sum_clipped(x - l, y - l, x - 1, y - 1)
                - ii.box_sum_clipped(x + 1, y + 1, x + l, y + l);
            let dxx = dxx * inv_area;
            let dyy = dyy * inv_area;
            let dxy = dxy * inv_area;
            data[r * cols + c] = dxx * dyy - 0.81 * dxy * dxy;
        }
    }
    ResponseLayer { cols, rows, step, size, data }
}

/// Detect interest points as 3x3x3 local maxima of the box-filter
/// determinant of Hessian across 4 octaves, sub-pixel refined via a
/// quadratic fit. Near-duplicates across overlapping octaves are suppressed.
/// Sorted by descending response, ties by (y, x).
pub fn detect_surf(g: &ImageTensor, threshold: f64) -> Vec<Keypoint> {
    assert!(g.channels == 1, "detect_surf expects a single-channel image");
    assert!(threshold > 0.0, "threshold must be positive");
    if g.width < 9 || g.height < 9 {
        return Vec::new();
    }
    let ii = integral_image(g).expect("single-channel checked above");
    let mut candidates = Vec::new();
    for (octave, sizes) in OCTAVE_FILTERS.iter().enumerate() {
        let step = 1usize << octave;
        let layers: Vec<ResponseLayer> =
            sizes.iter().map(|&s| build_layer(&ii, s, step)).collect();
        for mid in 1..=2 {
            find_maxima(&layers[mid - 1], &layers[mid], &layers[mid + 1], threshold, &mut candidates);
        }
    }
    candidates.sort_by(|a, b| {
        b.response
            .partial_cmp(&a.response)
            .unwrap()
            .then(a.y.partial_cmp(&b.y).unwrap())
            .then(a.x.partial_cmp(&b.x).unwrap())
    });
    // greedy spatial dedup: overlapping octaves re-detect the same blob
    let mut kept: Vec<Keypoint> = Vec::new();
    for kp in candidates {
        let dup = kept
            .iter()
            .any(|k| (k.x - kp.x).hypot(k.y - kp.y) < 2.0);
        if !dup {
            kept.push(kp);
        }
    }
    kept
}

fn find_maxima(
    below: &ResponseLayer,
    mid: &ResponseLayer,
    above: &ResponseLayer,
    threshold: f64,
    out: &mut Vec<Keypoint>,
) {
    debug_assert!(below.cols == mid.cols && mid.cols == above.cols);
    for r in 1..mid.rows.saturating_sub(1) {
        for c in 1..mid.cols.saturating_sub(1) {
            let v = mid.get(c, r);
            if v <= threshold {
                continue;
            }
            let mut is_max = true;
            'scan: for layer in [below, mid, above] {
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let n = layer.get((c as i64 + dc) as usize, (r as i64 + dr) as usize);
                        let is_self = std::ptr::eq(layer, mid) && dr == 0 && dc == 0;
                        if !is_self && n >= v {
                            is_max = false;
                            break 'scan;
                        }
                    }
                }
            }
            if !is_max {
                continue;
            }
            out.push(refine(below, mid, above, c, r, v));
        }
    }
}

/// One-step quadratic interpolation of the maximum location in (x, y, size).
fn refine(below: &ResponseLayer, mid: &ResponseLayer, above: &ResponseLayer, c: usize, r: usize, v: f64) -> Keypoint {
    let dx = (mid.get(c + 1, r) - mid.get(c - 1, r)) / 2.0;
    let dy = (mid.get(c, r + 1) - mid.get(c, r - 1)) / 2.0;
    let ds = (above.get(c, r) - below.get(c, r)) / 2.0;
    let dxx = mid.get(c + 1, r) - 2.0 * v + mid.get(c - 1, r);
    let dyy = mid.get(c, r + 1) - 2.0 * v + mid.get(c, r - 1);
    let dss = above.get(c, r) - 2.0 * v + below.get(c, r);
    let dxy = (mid.get(c + 1, r + 1) - mid.get(c - 1, r + 1) - mid.get(c + 1, r - 1)
        + mid.get(c - 1, r - 1))
        / 4.0;
    // solve the 3x3 system H * off = -grad, treating cross terms with s as 0
    let (mut ox, mut oy, mut os) = (0.0, 0.0, 0.0);
    let det2 = dxx * dyy - dxy * dxy;
    if det2.abs() > 1e-18 {
        ox = (-dx * dyy + dy * dxy) / det2;
        oy = (-dy * dxx + dx * dxy) / det2;
    }
    if dss.abs() > 1e-18 {
        os = -ds / dss;
    }
    if ox.abs() > 1.0 || oy.abs() > 1.0 || os.abs() > 1.0 {
        ox = 0.0;
        oy = 0.0;
        os = 0.0;
    }
    let step = mid.step as f64;
    let size = mid.size as f64;
    let size_spacing = (above.size - mid.size) as f64; // same as mid - below
    Keypoint {
        x: (c as f64 + ox) * step,
        y: (r as f64 + oy) * step,
        scale: filter_scale(size + os * size_spacing),
        response: v,
    }
}

/// Haar wavelet response in x at integer center (x, y) with half-size r:
/// right half minus left half of the 2r x 2r box.
#[inline]
fn haar_x(ii: &IntegralImage, x: i64, y: i64, r: i64) -> f64 {
    ii.box_sum_clipped(x, y - r, x + r - 1, y + r - 1)
        - ii.box_sum_clipped(x - r, y - r, x - 1, y + r - 1)
}

#[inline]
fn haar_y(ii: &IntegralImage, x: i64, y: i64, r: i64) -> f64 {
    ii.box_sum_clipped(x - r, y, x + r - 1, y + r - 1)
        - ii.box_sum_clipped(x - r, y - r, x + r - 1, y - 1)
}

/// Upright 64-D SURF descriptor: a 20s x 20s window around the keypoint is
/// sampled on a 20x20 grid, Haar responses are Gaussian-weighted
/// (sigma = 3.3s) and pooled into 4x4 subregions of (sum dx, sum dy,
/// sum |dx|, sum |dy|), then the vector is unit-normalized. A perfectly flat
/// neighborhood yields the zero vector.
pub fn describe_surf(g: &ImageTensor, kp: &Keypoint) -> Result<Vec<f32>, DescriptorError> {
    let s = kp.scale;
    let r = s.round().max(1.0) as i64; // Haar half-size
    // all sample centers must stay at least r from the border
    let reach = 9.5 * s + r as f64 + 1.0;
    if kp.x - reach < 0.0
        || kp.y - reach < 0.0
        || kp.x + reach >= g.width as f64
        || kp.y + reach >= g.height as f64
    {
        return Err(DescriptorError::KeypointOutOfBounds { x: kp.x, y: kp.y, scale: s });
    }
    let ii = integral_image(g)?;
    let sigma = 3.3 * s;
    let mut acc = [0f64; DESCRIPTOR_DIM];
    for j in -10i64..10 {
        let off_y = (j as f64 + 0.5) * s;
        let py = (kp.y + off_y).round() as i64;
        let sub_y = ((j + 10) / 5) as usize;
        for i in -10i64..10 {
            let off_x = (i as f64 + 0.5) * s;
            let px = (kp.x + off_x).round() as i64;
            let sub_x = ((i + 10) / 5) as usize;
            let w = (-(off_x * off_x + off_y * off_y) / (2.0 * sigma * sigma)).exp();
            let dx = w * haar_x(&ii, px, py, r);
            let dy = w * haar_y(&ii, px, py, r);
            let base = (sub_y * 4 + sub_x) * 4;
            acc[base] += dx;
            acc[base + 1] += dy;
            acc[base + 2] += dx.abs();
            acc[base + 3] += dy.abs();
        }
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    let out = if norm > 0.0 {
        acc.iter().map(|&v| (v / norm) as f32).collect()
    } else {
        vec![0f32; DESCRIPTOR_DIM]
    };
    Ok(out)
}
