//! Benchmark toolkit for three-class retinal lesion classification
//! (normal / exudates / drusen).
//!
//! Two pipelines are implemented end to end:
//!
//! * **Bag of visual words** — images are resized to 224x224, RGB channels
//!   separated, the green channel intensity-normalized, then SURF, HOG and
//!   LBP descriptors (all 64-D) are pooled, quantized against a k-means
//!   codebook and histogrammed into an L2-normalized feature, classified by
//!   a linear-kernel SVM.
//! * **Deep features** — a pluggable extractor backend produces a
//!   penultimate-layer activation vector, normalized to unit length and
//!   classified by an RBF-kernel SVM. A fully deterministic mock backend
//!   keeps the toolkit self-contained.
//!
//! Both are evaluated with stratified 10-fold cross-validation at C = 8 and
//! reported as per-class accuracy / sensitivity / specificity plus a
//! `mean ± std` overall summary. A deterministic synthetic corpus generator
//! lets everything run without clinical data.
//!
//! ```
//! use retina_bench::dataset::ClassLabel;
//! use retina_bench::eval::{run_cv, PrecomputedCvPipeline};
//! use retina_bench::svm::{Kernel, SvmConfig};
//!
//! // three separable point classes stand in for image features
//! let mut vectors = Vec::new();
//! let mut labels = Vec::new();
//! for class in ClassLabel::ALL {
//!     for i in 0..10 {
//!         let c = class.ordinal() as f32;
//!         vectors.push(vec![3.0 * c, 3.0 * c + i as f32 * 0.01]);
//!         labels.push(class);
//!     }
//! }
//! let pipeline = PrecomputedCvPipeline { vectors, svm: SvmConfig::new(Kernel::Linear) };
//! let report = run_cv(&pipeline, &labels, 5, 1, "deep", "demo").unwrap();
//! assert_eq!(report.mean_overall, 100.0);
//! ```

pub mod bovw;
pub mod dataset;
pub mod deepfeat;
pub mod descriptors;
pub mod eval;
pub mod features;
pub mod imageproc;
pub mod pipeline;
pub mod rng;
pub mod svm;
pub mod synthgen;
