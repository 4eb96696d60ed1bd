//! Deep feature extraction behind a pluggable backend, plus the `RFV1`
//! binary feature-file interchange so evaluation can run with no
//! neural-network dependency at all.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::dataset::ClassLabel;
use crate::features::{FeatureKind, FeatureVector};
use crate::imageproc::{resize_bilinear, ImageTensor};
use crate::rng::SplitMix64;

/// A deterministic feature extractor: same image in, same vector out.
pub trait ExtractorBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn output_dim(&self) -> usize;
    /// Raw (pre-normalization) activation vector for a 224x224x3 image.
    fn forward(&self, img: &ImageTensor) -> Result<Vec<f32>, DeepFeatError>;
}

#[derive(Debug, Error)]
pub enum DeepFeatError {
    #[error("backend failure: {0}")]
    BackendFailure(String),
    #[error("dimension mismatch: backend declared {want}, produced {got}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("expected a 224x224 3-channel image, got {w}x{h}x{c}")]
    BadInput { w: usize, h: usize, c: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes in feature file (expected RFV1)")]
    BadMagic,
    #[error("feature file truncated: header claims {want} records")]
    TruncatedFile { want: usize },
    #[error("record dimension {got} does not match file header {want}")]
    DimMismatch { got: usize, want: usize },
    #[error("unknown class label byte {0} in feature file")]
    UnknownLabelByte(u8),
    #[error("feature records must share one dimension")]
    MixedDims,
    #[error(transparent)]
    Image(#[from] crate::imageproc::ImageError),
}

/// Single forward pass followed by L2 normalization to unit length.
pub fn extract_deep(
    img: &ImageTensor,
    backend: &dyn ExtractorBackend,
) -> Result<FeatureVector, DeepFeatError> {
    if img.width != 224 || img.height != 224 || img.channels != 3 {
        return Err(DeepFeatError::BadInput { w: img.width, h: img.height, c: img.channels });
    }
    let raw = backend.forward(img)?;
    if raw.len() != backend.output_dim() {
        return Err(DeepFeatError::DimensionMismatch {
            got: raw.len(),
            want: backend.output_dim(),
        });
    }
    let norm = raw.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    let values = if norm > 0.0 {
        raw.iter().map(|&v| (v as f64 / norm) as f32).collect()
    } else {
        raw
    };
    Ok(FeatureVector {
        values,
        kind: FeatureKind::Deep {
            model_id: backend.model_id().to_string(),
            dim: backend.output_dim(),
        },
    })
}

/// Weight-free deterministic extractor: the input is downsampled to
/// 16x16x3 (768 interleaved values, bilinear), multiplied by a dim x 768
/// random-sign matrix drawn from the SplitMix64 stream of `seed` (row-major;
/// even draw -> +1, odd -> -1), then passed through max(0, .). Identical
/// across platforms by construction.
pub struct MockBackend {
    model_id: String,
    dim: usize,
    signs: Vec<f32>, // dim x 768 row-major
}

pub const MOCK_INPUT_DIM: usize = 16 * 16 * 3;

impl MockBackend {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim >= 1);
        let mut rng = SplitMix64::new(seed);
        let signs = (0..dim * MOCK_INPUT_DIM).map(|_| rng.next_sign()).collect();
        Self { model_id: format!("mock:{seed}:{dim}"), dim, signs }
    }

    #[cfg(test)]
    pub(crate) fn sign(&self, row: usize, col: usize) -> f32 {
        self.signs[row * MOCK_INPUT_DIM + col]
    }
}

impl ExtractorBackend for MockBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn forward(&self, img: &ImageTensor) -> Result<Vec<f32>, DeepFeatError> {
        let small = resize_bilinear(img, 16, 16)?;
        debug_assert_eq!(small.data.len(), MOCK_INPUT_DIM);
        let mut out = Vec::with_capacity(self.dim);
        for row in self.signs.chunks_exact(MOCK_INPUT_DIM) {
            let mut acc = 0f64;
            for (&s, &x) in row.iter().zip(small.data.iter()) {
                acc += (s * x) as f64;
            }
            out.push(acc.max(0.0) as f32);
        }
        Ok(out)
    }
}

/// One labeled feature vector as stored in an `RFV1` file. The file format
/// carries only the label byte and raw float values; pipeline metadata
/// (model id, word count) lives in the experiment report.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub label: ClassLabel,
    pub values: Vec<f32>,
}

/// Write records to an `RFV1` file: magic `RFV1`, u32 LE record count,
/// u32 LE dimension, then per record one label byte and `dim` float32 LE
/// values. Bit-exact round trip with [`read_features`].
pub fn write_features(path: &Path, records: &[FeatureRecord]) -> Result<(), DeepFeatError> {
    let dim = records.first().map(|r| r.values.len()).unwrap_or(0);
    if records.iter().any(|r| r.values.len() != dim) {
        return Err(DeepFeatError::MixedDims);
    }
    let mut buf = Vec::with_capacity(12 + records.len() * (1 + dim * 4));
    buf.extend_from_slice(b"RFV1");
    buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    for r in records {
        buf.push(r.label.ordinal() as u8);
        for &v in &r.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read an `RFV1` feature file written by [`write_features`].
pub fn read_features(path: &Path) -> Result<Vec<FeatureRecord>, DeepFeatError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 4 || &bytes[..4] != b"RFV1" {
        return Err(DeepFeatError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(DeepFeatError::TruncatedFile { want: 0 });
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let rec_len = 1 + dim * 4;
    if bytes.len() < 12 + n * rec_len {
        return Err(DeepFeatError::TruncatedFile { want: n });
    }
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let off = 12 + i * rec_len;
        let label_byte = bytes[off];
        let label = ClassLabel::from_ordinal(label_byte as usize)
            .ok_or(DeepFeatError::UnknownLabelByte(label_byte))?;
        let values = bytes[off + 1..off + rec_len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push(FeatureRecord { label, values });
    }
    Ok(records)
}
