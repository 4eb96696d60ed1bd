//! Deterministic synthetic three-class corpus so the full pipelines can be
//! exercised end to end without clinical data. Normal images get a smooth
//! radial background with dark curvilinear vessel strokes; exudate images
//! get a few large bright sharp-edged blobs; drusen images get many small
//! dim bright dots.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{ClassLabel, DatasetManifest, ManifestEntry};
use crate::imageproc::ImageTensor;
use crate::rng::SplitMix64;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub per_class: usize,
    pub size: usize,
    pub seed: u64,
    /// Exudate blob count range (inclusive).
    pub blob_count: (u64, u64),
    /// Exudate blob radius range in pixels.
    pub blob_radius: (f64, f64),
    /// Added brightness of an exudate blob.
    pub blob_brightness: f64,
    /// Drusen dot count range (inclusive).
    pub dot_count: (u64, u64),
    pub dot_radius: (f64, f64),
    pub dot_brightness: f64,
}

impl SynthConfig {
    pub fn new(per_class: usize, seed: u64) -> Self {
        Self {
            per_class,
            size: 224,
            seed,
            blob_count: (3, 10),
            blob_radius: (4.0, 12.0),
            blob_brightness: 0.8,
            dot_count: (8, 30),
            dot_radius: (1.0, 3.0),
            dot_brightness: 0.35,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.per_class == 0 {
            return Err(SynthError::BadConfig("per_class must be >= 1"));
        }
        if self.size < 64 {
            return Err(SynthError::BadConfig("size must be >= 64"));
        }
        if self.blob_radius.0 <= 0.0 || self.dot_radius.0 <= 0.0 {
            return Err(SynthError::BadConfig("radii must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.blob_brightness) || self.blob_brightness == 0.0 {
            return Err(SynthError::BadConfig("brightness must be in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    BadConfig(&'static str),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("png encode error: {0}")]
    Encode(#[from] image::ImageError),
}

fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + rng.next_f64() * (hi - lo)
}

fn add_rgb(img: &mut ImageTensor, x: usize, y: usize, dr: f64, dg: f64, db: f64) {
    let i = (y * img.width + x) * 3;
    img.data[i] = (img.data[i] as f64 + dr).clamp(0.0, 1.0) as f32;
    img.data[i + 1] = (img.data[i + 1] as f64 + dg).clamp(0.0, 1.0) as f32;
    img.data[i + 2] = (img.data[i + 2] as f64 + db).clamp(0.0, 1.0) as f32;
}

fn render_background(rng: &mut SplitMix64, size: usize) -> ImageTensor {
    let cx = uniform(rng, 0.4, 0.6) * size as f64;
    let cy = uniform(rng, 0.4, 0.6) * size as f64;
    let base = uniform(rng, 0.38, 0.5);
    let falloff = uniform(rng, 0.35, 0.55);
    let dmax = (size as f64) * 0.75;
    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt() / dmax;
            let v = base * (1.0 - falloff * d * d);
            data.push((v * 1.7).clamp(0.0, 1.0) as f32); // reddish fundus tint
            data.push(v.clamp(0.0, 1.0) as f32);
            data.push((v * 0.45).clamp(0.0, 1.0) as f32);
        }
    }
    ImageTensor { width: size, height: size, channels: 3, data }
}

fn render_vessels(rng: &mut SplitMix64, img: &mut ImageTensor) {
    let size = img.width;
    let strokes = 3 + rng.next_below(4);
    for _ in 0..strokes {
        let mut x = uniform(rng, 0.1, 0.9) * size as f64;
        let mut y = uniform(rng, 0.1, 0.9) * size as f64;
        let mut dir = uniform(rng, 0.0, std::f64::consts::TAU);
        let curvature = uniform(rng, -0.03, 0.03);
        let steps = (size as f64 * uniform(rng, 0.5, 1.2)) as usize;
        let width = uniform(rng, 0.8, 1.8);
        for _ in 0..steps {
            dir += curvature + uniform(rng, -0.02, 0.02);
            x += dir.cos();
            y += dir.sin();
            if x < 1.0 || y < 1.0 || x >= (size - 1) as f64 || y >= (size - 1) as f64 {
                break;
            }
            let r = width.ceil() as i64;
            for dy in -r..=r {
                for dx in -r..=r {
                    let px = (x as i64 + dx) as usize;
                    let py = (y as i64 + dy) as usize;
                    if px >= size || py >= size {
                        continue;
                    }
                    let d = ((dx as f64).powi(2) + (dy as f64).powi(2)).sqrt();
                    if d <= width {
                        add_rgb(img, px, py, -0.18, -0.22, -0.05);
                    }
                }
            }
        }
    }
}

fn render_discs(
    rng: &mut SplitMix64,
    img: &mut ImageTensor,
    count: (u64, u64),
    radius: (f64, f64),
    brightness: f64,
) {
    let size = img.width;
    let n = count.0 + rng.next_below(count.1 - count.0 + 1);
    for _ in 0..n {
        let r = uniform(rng, radius.0, radius.1);
        // keep lesions clear of the border so descriptors fit around them
        let margin = (r + 30.0).min(size as f64 / 2.0 - 1.0);
        let cx = uniform(rng, margin, size as f64 - margin);
        let cy = uniform(rng, margin, size as f64 - margin);
        let x0 = (cx - r - 1.0).floor().max(0.0) as usize;
        let x1 = ((cx + r + 1.0).ceil() as usize).min(size - 1);
        let y0 = (cy - r - 1.0).floor().max(0.0) as usize;
        let y1 = ((cy + r + 1.0).ceil() as usize).min(size - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                if d <= r {
                    // sharp edge, slightly yellow (red + green)
                    add_rgb(img, x, y, brightness * 0.9, brightness, brightness * 0.25);
                }
            }
        }
    }
}

/// Render one synthetic image. The per-image stream is `seed ^ image_index`
/// so generation is order-free and bit-reproducible.
pub fn render_image(cfg: &SynthConfig, class: ClassLabel, image_index: u64) -> ImageTensor {
    let mut rng = SplitMix64::new(cfg.seed ^ image_index);
    let mut img = render_background(&mut rng, cfg.size);
    match class {
        ClassLabel::Normal => render_vessels(&mut rng, &mut img),
        ClassLabel::Exudates => {
            render_discs(&mut rng, &mut img, cfg.blob_count, cfg.blob_radius, cfg.blob_brightness)
        }
        ClassLabel::Drusen => {
            render_discs(&mut rng, &mut img, cfg.dot_count, cfg.dot_radius, cfg.dot_brightness)
        }
    }
    img
}

/// Generate the whole corpus in memory, class-major order
/// (all normal, all exudates, all drusen).
pub fn generate_tensors(cfg: &SynthConfig) -> Result<Vec<(ImageTensor, ClassLabel)>, SynthError> {
    cfg.validate()?;
    let jobs: Vec<(ClassLabel, u64)> = ClassLabel::ALL
        .into_iter()
        .flat_map(|class| {
            (0..cfg.per_class as u64)
                .map(move |i| (class, class.ordinal() as u64 * cfg.per_class as u64 + i))
        })
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(class, idx)| (render_image(cfg, class, idx), class))
        .collect())
}

fn to_png_bytes(img: &ImageTensor) -> Result<Vec<u8>, SynthError> {
    let mut buf = image::RgbImage::new(img.width as u32, img.height as u32);
    for (i, px) in buf.pixels_mut().enumerate() {
        for c in 0..3 {
            px.0[c] = (img.data[i * 3 + c].clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    let mut bytes = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    Ok(bytes)
}

/// Generate the corpus as PNG files plus a `manifest.csv` in `dir`.
pub fn generate(cfg: &SynthConfig, dir: &Path) -> Result<DatasetManifest, SynthError> {
    let tensors = generate_tensors(cfg)?;
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(tensors.len());
    let mut counters = [0usize; ClassLabel::COUNT];
    for (img, class) in &tensors {
        let i = counters[class.ordinal()];
        counters[class.ordinal()] += 1;
        let name = format!("{}_{i:04}.png", class);
        let path = dir.join(&name);
        std::fs::write(&path, to_png_bytes(img)?)?;
        entries.push(ManifestEntry { path, label: *class, source: "synthetic".to_string() });
    }
    let manifest = DatasetManifest { entries };
    crate::dataset::save_manifest(&manifest, &dir.join("manifest.csv"))
        .map_err(|e| SynthError::Io(std::io::Error::other(e.to_string())))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::audit_distribution;
    use crate::descriptors::{detect_surf, DEFAULT_SURF_THRESHOLD};
    use crate::imageproc::{normalize_green, split_channels};

    #[test]
    fn counts_and_manifest_audit() {
        let cfg = SynthConfig::new(10, 7);
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate(&cfg, dir.path()).unwrap();
        assert_eq!(manifest.entries.len(), 30);
        let dist = audit_distribution(&manifest).unwrap();
        assert_eq!(dist.per_class, [10, 10, 10]);
        // every file decodes as RGB
        let loaded = crate::imageproc::load_rgb(&manifest.entries[0].path).unwrap();
        assert_eq!((loaded.width, loaded.height, loaded.channels), (224, 224, 3));
    }

    #[test]
    fn generation_is_bitwise_reproducible() {
        let cfg = SynthConfig::new(2, 11);
        let a = generate_tensors(&cfg).unwrap();
        let b = generate_tensors(&cfg).unwrap();
        for ((ia, ca), (ib, cb)) in a.iter().zip(b.iter()) {
            assert_eq!(ca, cb);
            assert_eq!(ia.data, ib.data);
        }
    }

    #[test]
    fn same_seed_writes_identical_files() {
        let cfg = SynthConfig::new(1, 5);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m1 = generate(&cfg, d1.path()).unwrap();
        let m2 = generate(&cfg, d2.path()).unwrap();
        for (e1, e2) in m1.entries.iter().zip(m2.entries.iter()) {
            assert_eq!(std::fs::read(&e1.path).unwrap(), std::fs::read(&e2.path).unwrap());
        }
    }

    #[test]
    fn exudates_brighter_than_normal_on_shared_background() {
        // same stream seed -> same background; vessels only darken,
        // exudate blobs only brighten
        let cfg = SynthConfig::new(6, 7);
        for idx in 0..6 {
            let normal = render_image(&cfg, ClassLabel::Normal, idx).mean();
            let exudates = render_image(&cfg, ClassLabel::Exudates, idx).mean();
            assert!(
                exudates > normal,
                "image {idx}: exudates mean {exudates} not above normal mean {normal}"
            );
        }
    }

    #[test]
    fn every_exudate_image_has_a_surf_keypoint() {
        let cfg = SynthConfig::new(5, 1);
        let tensors = generate_tensors(&cfg).unwrap();
        for (img, class) in &tensors {
            if *class != ClassLabel::Exudates {
                continue;
            }
            let (_, g, _) = split_channels(img).unwrap();
            let g = normalize_green(&g).unwrap();
            let kps = detect_surf(&g, DEFAULT_SURF_THRESHOLD);
            assert!(!kps.is_empty(), "no keypoints on an exudate image");
        }
    }

    #[test]
    fn bad_config_rejected() {
        let mut cfg = SynthConfig::new(0, 1);
        assert!(matches!(generate_tensors(&cfg), Err(SynthError::BadConfig(_))));
        cfg = SynthConfig::new(1, 1);
        cfg.blob_brightness = 0.0;
        assert!(matches!(generate_tensors(&cfg), Err(SynthError::BadConfig(_))));
    }
}
