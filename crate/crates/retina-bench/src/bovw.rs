//! Visual codebook construction (k-means++ with Lloyd refinement),
//! nearest-neighbor quantization, and L2-normalized word-frequency
//! histograms.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::descriptors::{DescriptorSet, DESCRIPTOR_DIM};
use crate::features::{FeatureKind, FeatureVector};
use crate::rng::SplitMix64;

/// Codebook fit parameters. Iteration cap and tolerance follow standard
/// Lloyd practice; the paper fixes only the word counts.
#[derive(Debug, Clone)]
pub struct CodebookConfig {
    /// Number of visual words.
    pub words: usize,
    pub max_iterations: usize,
    pub rel_tolerance: f64,
    pub seed: u64,
}

impl CodebookConfig {
    pub fn new(words: usize, seed: u64) -> Self {
        Self { words, max_iterations: 100, rel_tolerance: 1e-4, seed }
    }
}

/// K centroid vectors in descriptor space: the visual words.
#[derive(Debug, Clone)]
pub struct Codebook {
    /// Flat row-major K x dim centroid matrix.
    pub words: Vec<f32>,
    pub dim: usize,
    /// Final sum of squared point-to-centroid distances.
    pub inertia: f64,
    /// Inertia after each Lloyd assignment step, for monotonicity checks.
    pub inertia_history: Vec<f64>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.words.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, k: usize) -> &[f32] {
        &self.words[k * self.dim..(k + 1) * self.dim]
    }
}

#[derive(Debug, Error)]
pub enum BovwError {
    #[error("need at least {want} feature vectors to fit {want} words, got {got}")]
    TooFewFeatures { got: usize, want: usize },
    #[error("non-finite value in input features")]
    NonFiniteInput,
    #[error("dimension mismatch: expected {want}, got {got}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("codebook config invalid: {0}")]
    BadConfig(&'static str),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes in codebook file (expected RCB1)")]
    BadMagic,
    #[error("codebook file truncated")]
    TruncatedFile,
}

#[inline]
/// Squared Euclidean distance with 16 independent accumulators: the
/// assignment step spends nearly all its time here and a single running sum
/// would serialize on the add latency. The AVX path below performs the exact
/// same operations on the same lanes, so both produce identical results.
fn sq_dist_scalar(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len().min(b.len());
    let n16 = n - n % 16;
    let mut s = [0f64; 16];
    let mut i = 0;
    while i < n16 {
        for (l, acc) in s.iter_mut().enumerate() {
            let d = (a[i + l] - b[i + l]) as f64;
            *acc += d * d;
        }
        i += 16;
    }
    let mut total = 0f64;
    for v in s {
        total += v;
    }
    for t in n16..n {
        let d = (a[t] - b[t]) as f64;
        total += d * d;
    }
    total
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn sq_dist_avx(a: &[f32], b: &[f32]) -> f64 {
    use std::arch::x86_64::*;
    let n = a.len().min(b.len());
    let n16 = n - n % 16;
    let mut acc = [_mm256_setzero_pd(); 4];
    let mut i = 0;
    while i < n16 {
        for (v, av) in acc.iter_mut().enumerate() {
            let va = _mm256_cvtps_pd(_mm_loadu_ps(a.as_ptr().add(i + 4 * v)));
            let vb = _mm256_cvtps_pd(_mm_loadu_ps(b.as_ptr().add(i + 4 * v)));
            let d = _mm256_sub_pd(va, vb);
            *av = _mm256_add_pd(*av, _mm256_mul_pd(d, d));
        }
        i += 16;
    }
    let mut s = [0f64; 16];
    for (v, av) in acc.iter().enumerate() {
        _mm256_storeu_pd(s.as_mut_ptr().add(4 * v), *av);
    }
    let mut total = 0f64;
    for v in s {
        total += v;
    }
    for t in n16..n {
        let d = (a[t] - b[t]) as f64;
        total += d * d;
    }
    total
}

#[inline]
fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if is_x86_feature_detected!("avx") {
            return unsafe { sq_dist_avx(a, b) };
        }
    }
    sq_dist_scalar(a, b)
}

/// Index of the Euclidean-nearest centroid; ties go to the lowest index.
pub fn quantize(d: &[f32], cb: &Codebook) -> Result<usize, BovwError> {
    if d.len() != cb.dim {
        return Err(BovwError::DimensionMismatch { got: d.len(), want: cb.dim });
    }
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for k in 0..cb.len() {
        let dist = sq_dist(d, cb.word(k));
        if dist < best_d {
            best_d = dist;
            best = k;
        }
    }
    Ok(best)
}

fn nearest(point: &[f32], centroids: &[f32], dim: usize, k: usize) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for c in 0..k {
        let dist = sq_dist(point, &centroids[c * dim..(c + 1) * dim]);
        if dist < best_d {
            best_d = dist;
            best = c;
        }
    }
    (best, best_d)
}

/// Nearest and second-nearest squared distances; ties go to the lowest index.
fn nearest2(point: &[f32], centroids: &[f32], dim: usize, k: usize) -> (usize, f64, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    let mut second_d = f64::INFINITY;
    for c in 0..k {
        let dist = sq_dist(point, &centroids[c * dim..(c + 1) * dim]);
        if dist < best_d {
            second_d = best_d;
            best_d = dist;
            best = c;
        } else if dist < second_d {
            second_d = dist;
        }
    }
    (best, best_d, second_d)
}

/// Fixed chunk length for the parallel assignment step; partial sums are
/// reduced in chunk order so results do not depend on the worker count.
const ASSIGN_CHUNK: usize = 2048;

struct ChunkStats {
    sums: Vec<f64>,   // k * dim
    counts: Vec<u64>, // k
    inertia: f64,
    far_dist: f64,
    far_idx: usize, // global point index of the farthest point in this chunk
}

/// k-means with k-means++ seeding and Lloyd iterations. Deterministic for a
/// fixed seed and input order; empty clusters are reseeded to the point
/// farthest from its current centroid.
pub fn kmeans_fit(features: &[Vec<f32>], cfg: &CodebookConfig) -> Result<Codebook, BovwError> {
    if cfg.words == 0 {
        return Err(BovwError::BadConfig("words must be >= 1"));
    }
    if cfg.max_iterations == 0 {
        return Err(BovwError::BadConfig("max_iterations must be >= 1"));
    }
    if cfg.rel_tolerance <= 0.0 {
        return Err(BovwError::BadConfig("rel_tolerance must be > 0"));
    }
    let m = features.len();
    let k = cfg.words;
    if m < k {
        return Err(BovwError::TooFewFeatures { got: m, want: k });
    }
    let dim = DESCRIPTOR_DIM;
    for f in features {
        if f.len() != dim {
            return Err(BovwError::DimensionMismatch { got: f.len(), want: dim });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(BovwError::NonFiniteInput);
        }
    }
    let points: Vec<f32> = features.iter().flat_map(|f| f.iter().copied()).collect();
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    // k-means++ seeding
    let mut rng = SplitMix64::new(cfg.seed);
    let mut centroids = vec![0f32; k * dim];
    let first = rng.next_below(m as u64) as usize;
    centroids[..dim].copy_from_slice(point(first));
    let mut min_d2: Vec<f64> = (0..m).map(|i| sq_dist(point(i), &centroids[..dim])).collect();
    for c in 1..k {
        let total: f64 = min_d2.iter().sum();
        let chosen = if total <= 0.0 {
            // all remaining points coincide with chosen centroids
            rng.next_below(m as u64) as usize
        } else {
            let mut target = rng.next_f64() * total;
            let mut idx = m - 1;
            for (i, &d) in min_d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        };
        centroids[c * dim..(c + 1) * dim].copy_from_slice(point(chosen));
        for i in 0..m {
            let d = sq_dist(point(i), &centroids[c * dim..(c + 1) * dim]);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
    }

    // Lloyd iterations, pruned with Hamerly-style bounds: per point we keep
    // its assignment and a lower bound on the distance to every other
    // centroid. The exact distance to the assigned centroid is recomputed
    // every iteration (it feeds the inertia), and the full scan over all
    // centroids only runs when the bounds cannot prove the assignment is
    // still the nearest, so the result matches the plain Lloyd sweep.
    let mut assign = vec![0u32; m];
    let mut lower = vec![0f64; m]; // Euclidean (not squared) lower bound
    let mut inertia_history = Vec::new();
    let mut inertia = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        // half the distance from each centroid to its nearest other centroid:
        // points closer than this provably keep their assignment
        let half_gap: Vec<f64> = (0..k)
            .into_par_iter()
            .map(|c| {
                let mut best = f64::INFINITY;
                for o in 0..k {
                    if o != c {
                        let d =
                            sq_dist(&centroids[c * dim..(c + 1) * dim], &centroids[o * dim..(o + 1) * dim]);
                        best = best.min(d);
                    }
                }
                0.5 * best.sqrt()
            })
            .collect();

        let stats: Vec<ChunkStats> = points
            .par_chunks(ASSIGN_CHUNK * dim)
            .zip(assign.par_chunks_mut(ASSIGN_CHUNK))
            .zip(lower.par_chunks_mut(ASSIGN_CHUNK))
            .enumerate()
            .map(|(chunk_idx, ((chunk, ch_assign), ch_lower))| {
                let mut s = ChunkStats {
                    sums: vec![0f64; k * dim],
                    counts: vec![0u64; k],
                    inertia: 0.0,
                    far_dist: -1.0,
                    far_idx: 0,
                };
                for (j, p) in chunk.chunks_exact(dim).enumerate() {
                    let mut c = ch_assign[j] as usize;
                    let mut d2 = sq_dist(p, &centroids[c * dim..(c + 1) * dim]);
                    if d2.sqrt() >= half_gap[c].max(ch_lower[j]) {
                        let (nc, nd2, second_d2) = nearest2(p, &centroids, dim, k);
                        c = nc;
                        d2 = nd2;
                        ch_assign[j] = nc as u32;
                        ch_lower[j] = second_d2.sqrt();
                    }
                    s.counts[c] += 1;
                    s.inertia += d2;
                    for (acc, &v) in s.sums[c * dim..(c + 1) * dim].iter_mut().zip(p.iter()) {
                        *acc += v as f64;
                    }
                    if d2 > s.far_dist {
                        s.far_dist = d2;
                        s.far_idx = chunk_idx * ASSIGN_CHUNK + j;
                    }
                }
                s
            })
            .collect();

        // ordered sequential reduction
        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0u64; k];
        let mut new_inertia = 0f64;
        let mut far: Vec<(f64, usize)> = Vec::new();
        for s in &stats {
            for (a, b) in sums.iter_mut().zip(s.sums.iter()) {
                *a += b;
            }
            for (a, b) in counts.iter_mut().zip(s.counts.iter()) {
                *a += b;
            }
            new_inertia += s.inertia;
            if s.far_dist >= 0.0 {
                far.push((s.far_dist, s.far_idx));
            }
        }
        far.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

        debug_assert!(
            new_inertia <= inertia * (1.0 + 1e-12) + 1e-12,
            "Lloyd inertia increased: {inertia} -> {new_inertia}"
        );
        inertia = new_inertia;
        inertia_history.push(inertia);

        // centroid update
        let mut new_centroids = vec![0f32; k * dim];
        let mut far_iter = far.into_iter();
        for c in 0..k {
            if counts[c] == 0 {
                // reseed to the point farthest from its centroid
                let idx = far_iter.next().map(|(_, i)| i).unwrap_or(0);
                new_centroids[c * dim..(c + 1) * dim].copy_from_slice(point(idx));
            } else {
                let n = counts[c] as f64;
                for (o, &s) in new_centroids[c * dim..(c + 1) * dim]
                    .iter_mut()
                    .zip(sums[c * dim..(c + 1) * dim].iter())
                {
                    *o = (s / n) as f32;
                }
            }
        }

        // relative centroid movement
        let moves: Vec<f64> = (0..k)
            .map(|c| {
                sq_dist(&centroids[c * dim..(c + 1) * dim], &new_centroids[c * dim..(c + 1) * dim])
                    .sqrt()
            })
            .collect();
        let move2: f64 = moves.iter().map(|v| v * v).sum();
        let norm2: f64 = centroids.iter().map(|&v| (v as f64).powi(2)).sum();
        centroids = new_centroids;
        if move2.sqrt() / (norm2.sqrt() + 1e-12) < cfg.rel_tolerance {
            break;
        }
        // every centroid may have drifted toward a point, so the
        // second-nearest lower bounds decay by the largest movement
        let max_move = moves.iter().fold(0f64, |a, &b| a.max(b));
        for lb in lower.iter_mut() {
            *lb = (*lb - max_move).max(0.0);
        }
    }

    // final inertia against the converged centroids
    let final_inertia: f64 = points
        .par_chunks(ASSIGN_CHUNK * dim)
        .map(|chunk| {
            chunk
                .chunks_exact(dim)
                .map(|p| nearest(p, &centroids, dim, k).1)
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    inertia_history.push(final_inertia);

    Ok(Codebook { words: centroids, dim, inertia: final_inertia, inertia_history })
}

/// W-bin count histogram over all descriptors of one image, L2-normalized.
/// An empty descriptor set yields the zero vector (check
/// [`FeatureVector::is_zero`]).
pub fn encode_histogram(ds: &DescriptorSet, cb: &Codebook) -> Result<FeatureVector, BovwError> {
    let w = cb.len();
    let mut counts = vec![0f64; w];
    for d in &ds.descriptors {
        counts[quantize(&d.values, cb)?] += 1.0;
    }
    let norm = counts.iter().map(|v| v * v).sum::<f64>().sqrt();
    let values = if norm > 0.0 {
        counts.iter().map(|&v| (v / norm) as f32).collect()
    } else {
        vec![0f32; w]
    };
    Ok(FeatureVector { values, kind: FeatureKind::BovwHistogram { words: w } })
}

/// Serialize a codebook: magic `RCB1`, u32 LE word count, u32 LE dim, then
/// K*dim float32 LE centroid values.
pub fn write_codebook(cb: &Codebook, path: &Path) -> Result<(), BovwError> {
    let mut buf = Vec::with_capacity(12 + cb.words.len() * 4);
    buf.extend_from_slice(b"RCB1");
    buf.extend_from_slice(&(cb.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(cb.dim as u32).to_le_bytes());
    for &v in &cb.words {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read a codebook written by [`write_codebook`]. Inertia is not part of
/// the interchange format and comes back as 0.
pub fn read_codebook(path: &Path) -> Result<Codebook, BovwError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 {
        return Err(BovwError::TruncatedFile);
    }
    if &bytes[..4] != b"RCB1" {
        return Err(BovwError::BadMagic);
    }
    let k = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let want = 12 + k * dim * 4;
    if bytes.len() < want {
        return Err(BovwError::TruncatedFile);
    }
    let words = bytes[12..want]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Codebook { words, dim, inertia: 0.0, inertia_history: Vec::new() })
}
