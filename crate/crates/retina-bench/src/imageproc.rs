//! Preprocessing primitives: bilinear resize, channel separation,
//! green-channel intensity normalization, and the summed-area table used by
//! the interest-point detector.

use std::path::Path;

use thiserror::Error;

/// Row-major image with values in [0, 1]. Interleaved when `channels == 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("empty image")]
    EmptyImage,
    #[error("target dimension must be >= 1")]
    ZeroTargetDimension,
    #[error("expected a 3-channel image, got {0} channel(s)")]
    NotThreeChannel(usize),
    #[error("expected a single-channel image, got {0} channel(s)")]
    NotSingleChannel(usize),
    #[error("grayscale input rejected: the pipeline requires 8-bit RGB")]
    GrayscaleInput,
    #[error("failed to decode image {path}: {source}")]
    Decode {
        path: std::path::PathBuf,
        source: image::ImageError,
    },
    #[error("invalid tensor: data length {got} != {want}")]
    BadLength { got: usize, want: usize },
}

impl ImageTensor {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        let want = width * height * channels;
        if data.len() != want {
            return Err(ImageError::BadLength { got: data.len(), want });
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self { width, height, channels, data: vec![value; width * height * channels] }
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    /// Single-channel pixel access (no bounds check beyond debug).
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn at_c(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        debug_assert_eq!(self.channels, 1);
        self.data[y * self.width + x] = v;
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let mu = self.mean();
        let var = self
            .data
            .iter()
            .map(|&v| {
                let d = v as f64 - mu;
                d * d
            })
            .sum::<f64>()
            / self.data.len() as f64;
        var.sqrt()
    }
}

/// Decode a PNG/JPEG file into an RGB tensor scaled to [0, 1].
/// Grayscale files are rejected; the pipeline needs three channels.
pub fn load_rgb(path: &Path) -> Result<ImageTensor, ImageError> {
    let dyn_img = image::open(path).map_err(|source| ImageError::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    use image::DynamicImage::*;
    match &dyn_img {
        ImageLuma8(_) | ImageLuma16(_) | ImageLumaA8(_) | ImageLumaA16(_) => {
            return Err(ImageError::GrayscaleInput)
        }
        _ => {}
    }
    let rgb = dyn_img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
    ImageTensor::new(w, h, 3, data)
}

/// Bilinear resize with half-pixel-center sampling and edge clamping.
///
/// The source coordinate of output pixel `d` along an axis is
/// `(d + 0.5) * in/out - 0.5`, clamped to the valid range. When the scale is
/// exactly 1 the sample lands on the pixel itself, so same-size resizes are
/// bitwise identity.
pub fn resize_bilinear(img: &ImageTensor, out_w: usize, out_h: usize) -> Result<ImageTensor, ImageError> {
    if img.is_empty() {
        return Err(ImageError::EmptyImage);
    }
    if out_w == 0 || out_h == 0 {
        return Err(ImageError::ZeroTargetDimension);
    }
    let c = img.channels;
    let mut out = vec![0f32; out_w * out_h * c];
    let sx_scale = img.width as f64 / out_w as f64;
    let sy_scale = img.height as f64 / out_h as f64;
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * sy_scale - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = (sy - y0 as f64) as f32;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * sx_scale - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = (sx - x0 as f64) as f32;
            for ch in 0..c {
                let p00 = img.at_c(x0, y0, ch);
                let p10 = img.at_c(x1, y0, ch);
                let p01 = img.at_c(x0, y1, ch);
                let p11 = img.at_c(x1, y1, ch);
                let v = p00 * (1.0 - fx) * (1.0 - fy)
                    + p10 * fx * (1.0 - fy)
                    + p01 * (1.0 - fx) * fy
                    + p11 * fx * fy;
                out[(oy * out_w + ox) * c + ch] = v;
            }
        }
    }
    ImageTensor::new(out_w, out_h, c, out)
}

/// Split an interleaved RGB tensor into three single-channel tensors.
pub fn split_channels(img: &ImageTensor) -> Result<(ImageTensor, ImageTensor, ImageTensor), ImageError> {
    if img.channels != 3 {
        return Err(ImageError::NotThreeChannel(img.channels));
    }
    let n = img.width * img.height;
    let mut r = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for px in img.data.chunks_exact(3) {
        r.push(px[0]);
        g.push(px[1]);
        b.push(px[2]);
    }
    Ok((
        ImageTensor { width: img.width, height: img.height, channels: 1, data: r },
        ImageTensor { width: img.width, height: img.height, channels: 1, data: g },
        ImageTensor { width: img.width, height: img.height, channels: 1, data: b },
    ))
}

/// Recombine three single-channel tensors into one RGB tensor.
pub fn merge_channels(r: &ImageTensor, g: &ImageTensor, b: &ImageTensor) -> Result<ImageTensor, ImageError> {
    for t in [r, g, b] {
        if t.channels != 1 {
            return Err(ImageError::NotSingleChannel(t.channels));
        }
    }
    let n = r.width * r.height;
    let mut data = Vec::with_capacity(n * 3);
    for i in 0..n {
        data.push(r.data[i]);
        data.push(g.data[i]);
        data.push(b.data[i]);
    }
    ImageTensor::new(r.width, r.height, 3, data)
}

/// Standard deviation below which an image is treated as constant.
pub const NORMALIZE_SIGMA_FLOOR: f64 = 1e-6;

/// Per-image intensity standardization of the green channel:
/// `clamp(0.5 + 0.15 * (g - mean) / std, 0, 1)`. Constant inputs
/// (std below [`NORMALIZE_SIGMA_FLOOR`]) map uniformly to 0.5.
pub fn normalize_green(g: &ImageTensor) -> Result<ImageTensor, ImageError> {
    if g.channels != 1 {
        return Err(ImageError::NotSingleChannel(g.channels));
    }
    let mu = g.mean();
    let sigma = g.std();
    let data = if sigma < NORMALIZE_SIGMA_FLOOR {
        vec![0.5f32; g.data.len()]
    } else {
        g.data
            .iter()
            .map(|&v| ((0.5 + 0.15 * (v as f64 - mu) / sigma).clamp(0.0, 1.0)) as f32)
            .collect()
    };
    Ok(ImageTensor { width: g.width, height: g.height, channels: 1, data })
}

/// Summed-area table with a zero top row and left column, so any box sum is
/// four lookups. Stored in f64 to keep large-image sums exact enough.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    pub width: usize,  // source image width
    pub height: usize, // source image height
    table: Vec<f64>,   // (width+1) * (height+1)
}

impl IntegralImage {
    #[inline]
    fn tab(&self, x: usize, y: usize) -> f64 {
        self.table[y * (self.width + 1) + x]
    }

    /// Inclusive box sum over pixels [x0, x1] x [y0, y1].
    #[inline]
    pub fn box_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        debug_assert!(x0 <= x1 && y0 <= y1 && x1 < self.width && y1 < self.height);
        self.tab(x1 + 1, y1 + 1) - self.tab(x0, y1 + 1) - self.tab(x1 + 1, y0) + self.tab(x0, y0)
    }

    /// Box sum with the rectangle clipped to the image bounds.
    /// Coordinates may be negative or past the edge.
    #[inline]
    pub fn box_sum_clipped(&self, x0: i64, y0: i64, x1: i64, y1: i64) -> f64 {
        let x0 = x0.max(0) as usize;
        let y0 = y0.max(0) as usize;
        if x1 < x0 as i64 || y1 < y0 as i64 {
            return 0.0;
        }
        let x1 = (x1 as usize).min(self.width - 1);
        let y1 = (y1 as usize).min(self.height - 1);
        if x0 > x1 || y0 > y1 {
            return 0.0;
        }
        self.box_sum(x0, y0, x1, y1)
    }
}

/// Build the summed-area table of a single-channel image.
pub fn integral_image(g: &ImageTensor) -> Result<IntegralImage, ImageError> {
    if g.channels != 1 {
        return Err(ImageError::NotSingleChannel(g.channels));
    }
    let (w, h) = (g.width, g.height);
    let mut table = vec![0f64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row_sum = 0f64;
        for x in 0..w {
            row_sum += g.at(x, y) as f64;
            table[(y + 1) * (w + 1) + (x + 1)] = table[y * (w + 1) + (x + 1)] + row_sum;
        }
    }
    Ok(IntegralImage { width: w, height: h, table })
}
