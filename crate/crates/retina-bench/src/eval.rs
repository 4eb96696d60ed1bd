//! Stratified k-fold cross-validation with per-class confusion-derived
//! metrics and mean +/- std aggregation.
//!
//! Folds are stratified so every class appears in every fold whenever it has
//! at least k samples; the smallest class here has 84 images, which an
//! unstratified split could starve out of a fold entirely.

use rayon::prelude::*;
use thiserror::Error;

use crate::bovw::{encode_histogram, kmeans_fit, CodebookConfig};
use crate::dataset::ClassLabel;
use crate::descriptors::DescriptorSet;
use crate::rng::SplitMix64;
use crate::svm::{predict, train_multiclass, SvmConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("fold count must be >= 2, got {0}")]
    BadK(usize),
    #[error("need at least {k} samples for {k} folds, got {n}")]
    TooFewSamples { n: usize, k: usize },
    #[error("label lists have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("no reports to render")]
    EmptyInput,
    #[error(transparent)]
    Svm(#[from] crate::svm::SvmError),
    #[error(transparent)]
    Bovw(#[from] crate::bovw::BovwError),
}

/// Assignment of every sample to exactly one of k folds.
#[derive(Debug, Clone)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Per class: seeded shuffle, then round-robin assignment so fold sizes
/// differ by at most one. Classes with fewer than k samples contribute one
/// sample per fold until exhausted.
pub fn stratified_kfold(
    labels: &[ClassLabel],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, EvalError> {
    if k < 2 {
        return Err(EvalError::BadK(k));
    }
    if labels.len() < k {
        return Err(EvalError::TooFewSamples { n: labels.len(), k });
    }
    let mut rng = SplitMix64::new(seed);
    let mut fold_of = vec![0usize; labels.len()];
    for class in ClassLabel::ALL {
        let mut indices: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rng.shuffle(&mut indices);
        for (pos, &i) in indices.iter().enumerate() {
            fold_of[i] = pos % k;
        }
    }
    Ok(FoldAssignment { k, fold_of, seed })
}

/// 3x3 confusion counts; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[usize; ClassLabel::COUNT]; ClassLabel::COUNT],
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn overall_accuracy(&self) -> f64 {
        let correct: usize = (0..ClassLabel::COUNT).map(|i| self.counts[i][i]).sum();
        100.0 * correct as f64 / self.total() as f64
    }
}

pub fn confusion(truth: &[ClassLabel], pred: &[ClassLabel]) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch(truth.len(), pred.len()));
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyMatrix);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(pred.iter()) {
        cm.counts[t.ordinal()][p.ordinal()] += 1;
    }
    Ok(cm)
}

/// One-vs-rest statistics of one class, as percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub acc: f64,
    pub sens: f64,
    pub spec: f64,
    /// False when the class is absent from the truth labels, in which case
    /// sensitivity is reported as 0 rather than left undefined.
    pub sens_defined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub per_class: [ClassStats; ClassLabel::COUNT],
}

/// One-vs-rest Acc/Sens/Spec per class from a 3x3 confusion matrix.
pub fn class_metrics(cm: &ConfusionMatrix) -> Result<ClassMetrics, EvalError> {
    let n = cm.total();
    if n == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut per_class = [ClassStats { acc: 0.0, sens: 0.0, spec: 0.0, sens_defined: true };
        ClassLabel::COUNT];
    for class in ClassLabel::ALL {
        let c = class.ordinal();
        let tp = cm.counts[c][c];
        let fn_: usize = (0..ClassLabel::COUNT).filter(|&j| j != c).map(|j| cm.counts[c][j]).sum();
        let fp: usize = (0..ClassLabel::COUNT).filter(|&i| i != c).map(|i| cm.counts[i][c]).sum();
        let tn = n - tp - fn_ - fp;
        let acc = 100.0 * (tp + tn) as f64 / n as f64;
        let (sens, sens_defined) = if tp + fn_ > 0 {
            (100.0 * tp as f64 / (tp + fn_) as f64, true)
        } else {
            (0.0, false)
        };
        let spec = if tn + fp > 0 {
            100.0 * tn as f64 / (tn + fp) as f64
        } else {
            0.0
        };
        per_class[c] = ClassStats { acc, sens, spec, sens_defined };
    }
    Ok(ClassMetrics { per_class })
}

/// Everything measured on one held-out fold.
#[derive(Debug, Clone)]
pub struct FoldMetrics {
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: ClassMetrics,
    pub overall_accuracy: f64,
}

/// Cross-validation result: per-fold metrics plus aggregate summaries.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub pipeline: String,
    /// Sweep parameter: the word count for BoVW, the model id for deep runs.
    pub param: String,
    pub seed: u64,
    pub folds: Vec<FoldMetrics>,
    /// `mean_class[m][c]`: metric m (0=acc, 1=sens, 2=spec) of class c,
    /// averaged across folds.
    pub mean_class: [[f64; ClassLabel::COUNT]; 3],
    pub mean_overall: f64,
    /// Sample (n-1) standard deviation of the per-fold overall accuracies.
    pub std_overall: f64,
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let var: f64 =
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

impl CvReport {
    pub fn from_folds(pipeline: &str, param: &str, seed: u64, folds: Vec<FoldMetrics>) -> Self {
        let n = folds.len() as f64;
        let mut mean_class = [[0f64; ClassLabel::COUNT]; 3];
        for f in &folds {
            for c in 0..ClassLabel::COUNT {
                let s = f.metrics.per_class[c];
                mean_class[0][c] += s.acc;
                mean_class[1][c] += s.sens;
                mean_class[2][c] += s.spec;
            }
        }
        for row in mean_class.iter_mut() {
            for v in row.iter_mut() {
                *v /= n;
            }
        }
        let overall: Vec<f64> = folds.iter().map(|f| f.overall_accuracy).collect();
        let mean_overall = overall.iter().sum::<f64>() / n;
        let std_overall = sample_std(&overall, mean_overall);
        Self {
            pipeline: pipeline.to_string(),
            param: param.to_string(),
            seed,
            folds,
            mean_class,
            mean_overall,
            std_overall,
        }
    }

    /// Build a report from precomputed summary values, used to render
    /// externally published results without the underlying folds.
    pub fn from_summary(
        pipeline: &str,
        param: &str,
        mean_class: [[f64; ClassLabel::COUNT]; 3],
        mean_overall: f64,
        std_overall: f64,
    ) -> Self {
        Self {
            pipeline: pipeline.to_string(),
            param: param.to_string(),
            seed: 0,
            folds: Vec::new(),
            mean_class,
            mean_overall,
            std_overall,
        }
    }
}

/// One classification pipeline as seen by the fold runner: fit on the
/// training indices, predict the test indices. Implementations must not
/// look at test-fold feature data while fitting.
pub trait CvPipeline: Sync {
    fn run_fold(
        &self,
        train: &[usize],
        test: &[usize],
        labels: &[ClassLabel],
    ) -> Result<Vec<ClassLabel>, EvalError>;
}

/// Training-fold descriptor matrix for codebook fitting. The fold runner
/// hands fitters training indices only; this is the single point where
/// descriptors enter clustering.
pub fn training_descriptor_matrix(sets: &[DescriptorSet], train: &[usize]) -> Vec<Vec<f32>> {
    let mut out = Vec::new();
    for &i in train {
        for d in &sets[i].descriptors {
            out.push(d.values.clone());
        }
    }
    out
}

/// Bag-of-visual-words pipeline: the codebook is refit per fold on training
/// descriptors only, then train and test images are encoded against it and
/// a linear-kernel SVM is trained on the training histograms.
pub struct BovwCvPipeline {
    pub descriptor_sets: Vec<DescriptorSet>,
    pub words: usize,
    pub kmeans_seed: u64,
    pub svm: SvmConfig,
}

impl CvPipeline for BovwCvPipeline {
    fn run_fold(
        &self,
        train: &[usize],
        test: &[usize],
        labels: &[ClassLabel],
    ) -> Result<Vec<ClassLabel>, EvalError> {
        let train_features = training_descriptor_matrix(&self.descriptor_sets, train);
        let cb = kmeans_fit(&train_features, &CodebookConfig::new(self.words, self.kmeans_seed))?;
        let encode = |idx: &[usize]| -> Result<Vec<Vec<f32>>, EvalError> {
            idx.iter()
                .map(|&i| Ok(encode_histogram(&self.descriptor_sets[i], &cb)?.values))
                .collect()
        };
        let train_x = encode(train)?;
        let train_y: Vec<ClassLabel> = train.iter().map(|&i| labels[i]).collect();
        let model = train_multiclass(&train_x, &train_y, &self.svm)?;
        let test_x = encode(test)?;
        test_x
            .iter()
            .map(|x| Ok(predict(&model, x)?))
            .collect()
    }
}

/// Pipeline over precomputed per-image feature vectors (deep features are
/// training-free, so they may be reused across folds).
pub struct PrecomputedCvPipeline {
    pub vectors: Vec<Vec<f32>>,
    pub svm: SvmConfig,
}

impl CvPipeline for PrecomputedCvPipeline {
    fn run_fold(
        &self,
        train: &[usize],
        test: &[usize],
        labels: &[ClassLabel],
    ) -> Result<Vec<ClassLabel>, EvalError> {
        let train_x: Vec<Vec<f32>> = train.iter().map(|&i| self.vectors[i].clone()).collect();
        let train_y: Vec<ClassLabel> = train.iter().map(|&i| labels[i]).collect();
        let model = train_multiclass(&train_x, &train_y, &self.svm)?;
        test.iter()
            .map(|&i| Ok(predict(&model, &self.vectors[i])?))
            .collect()
    }
}

/// Run stratified k-fold cross-validation: per fold, fit on the other k-1
/// folds and predict the held-out one. Folds run in parallel and are
/// aggregated in fold order, so the report does not depend on worker count.
pub fn run_cv(
    pipeline: &dyn CvPipeline,
    labels: &[ClassLabel],
    k: usize,
    seed: u64,
    pipeline_id: &str,
    param: &str,
) -> Result<CvReport, EvalError> {
    let assignment = stratified_kfold(labels, k, seed)?;
    let folds: Result<Vec<FoldMetrics>, EvalError> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train = assignment.train_indices(f);
            let test = assignment.test_indices(f);
            let preds = pipeline.run_fold(&train, &test, labels)?;
            let truth: Vec<ClassLabel> = test.iter().map(|&i| labels[i]).collect();
            let cm = confusion(&truth, &preds)?;
            let metrics = class_metrics(&cm)?;
            let overall_accuracy = cm.overall_accuracy();
            Ok(FoldMetrics { fold: f, confusion: cm, metrics, overall_accuracy })
        })
        .collect();
    Ok(CvReport::from_folds(pipeline_id, param, seed, folds?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

const CLASS_HEADS: [&str; 3] = ["Norm", "Ex", "Dru"];
const METRIC_HEADS: [&str; 3] = ["Acc", "Sens", "Spec"];

/// Render reports as a metric grid plus a `mean ± std` summary line per
/// report (Markdown), or as per-fold rows (CSV, columns
/// `pipeline,param,class,acc,sens,spec,fold`).
pub fn render_report(reports: &[CvReport], format: ReportFormat) -> Result<String, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(match format {
        ReportFormat::Markdown => render_markdown(reports),
        ReportFormat::Csv => render_csv(reports),
    })
}

fn render_markdown(reports: &[CvReport]) -> String {
    let mut out = String::new();
    out.push_str("| Param |");
    for m in METRIC_HEADS {
        for c in CLASS_HEADS {
            out.push_str(&format!(" {m} {c} (%) |"));
        }
    }
    out.push('\n');
    out.push_str("|---|");
    out.push_str(&"---|".repeat(9));
    out.push('\n');
    for r in reports {
        out.push_str(&format!("| {} |", r.param));
        for m in 0..3 {
            for c in 0..ClassLabel::COUNT {
                out.push_str(&format!(" {:.2} |", r.mean_class[m][c]));
            }
        }
        out.push('\n');
    }
    out.push('\n');
    out.push_str("| Pipeline | Param | Overall accuracy (%) |\n|---|---|---|\n");
    for r in reports {
        out.push_str(&format!(
            "| {} | {} | {:.2} ± {:.2} |\n",
            r.pipeline, r.param, r.mean_overall, r.std_overall
        ));
    }
    out
}

fn render_csv(reports: &[CvReport]) -> String {
    let mut out = String::from("pipeline,param,class,acc,sens,spec,fold\n");
    for r in reports {
        for f in &r.folds {
            for class in ClassLabel::ALL {
                let s = f.metrics.per_class[class.ordinal()];
                out.push_str(&format!(
                    "{},{},{},{:.2},{:.2},{:.2},{}\n",
                    r.pipeline, r.param, class, s.acc, s.sens, s.spec, f.fold
                ));
            }
        }
        // aggregate row per class
        for class in ClassLabel::ALL {
            let c = class.ordinal();
            out.push_str(&format!(
                "{},{},{},{:.2},{:.2},{:.2},mean\n",
                r.pipeline,
                r.param,
                class,
                r.mean_class[0][c],
                r.mean_class[1][c],
                r.mean_class[2][c]
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_with_counts(counts: [usize; 3]) -> Vec<ClassLabel> {
        let mut labels = Vec::new();
        // interleave so index order does not coincide with class order
        let max = *counts.iter().max().unwrap();
        for i in 0..max {
            for class in ClassLabel::ALL {
                if i < counts[class.ordinal()] {
                    labels.push(class);
                }
            }
        }
        labels
    }

    #[test]
    fn fold_sizes_differ_by_at_most_one_per_class() {
        let labels = labels_with_counts([697, 352, 84]);
        let fa = stratified_kfold(&labels, 10, 1).unwrap();
        for class in ClassLabel::ALL {
            let mut sizes = vec![0usize; 10];
            for (i, &l) in labels.iter().enumerate() {
                if l == class {
                    sizes[fa.fold_of[i]] += 1;
                }
            }
            let min = *sizes.iter().min().unwrap();
            let max = *sizes.iter().max().unwrap();
            assert!(max - min <= 1, "{class}: {sizes:?}");
        }
    }

    #[test]
    fn drusen_folds_are_four_nines_and_six_eights() {
        let labels = labels_with_counts([697, 352, 84]);
        let fa = stratified_kfold(&labels, 10, 3).unwrap();
        let mut sizes = vec![0usize; 10];
        for (i, &l) in labels.iter().enumerate() {
            if l == ClassLabel::Drusen {
                sizes[fa.fold_of[i]] += 1;
            }
        }
        let nines = sizes.iter().filter(|&&s| s == 9).count();
        let eights = sizes.iter().filter(|&&s| s == 8).count();
        assert_eq!((nines, eights), (4, 6), "{sizes:?}");
    }

    #[test]
    fn ten_samples_ten_folds_one_each() {
        let labels = vec![ClassLabel::Normal; 10];
        let fa = stratified_kfold(&labels, 10, 5).unwrap();
        let mut seen = vec![0usize; 10];
        for &f in &fa.fold_of {
            seen[f] += 1;
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn assignment_is_a_partition() {
        let labels = labels_with_counts([31, 17, 11]);
        let fa = stratified_kfold(&labels, 7, 9).unwrap();
        assert_eq!(fa.fold_of.len(), labels.len());
        let total: usize = (0..7).map(|f| fa.test_indices(f).len()).sum();
        assert_eq!(total, labels.len());
        for f in 0..7 {
            let test = fa.test_indices(f);
            let train = fa.train_indices(f);
            assert_eq!(test.len() + train.len(), labels.len());
            assert!(test.iter().all(|i| !train.contains(i)));
        }
    }

    #[test]
    fn kfold_is_deterministic() {
        let labels = labels_with_counts([40, 30, 20]);
        let a = stratified_kfold(&labels, 10, 42).unwrap();
        let b = stratified_kfold(&labels, 10, 42).unwrap();
        assert_eq!(a.fold_of, b.fold_of);
        let c = stratified_kfold(&labels, 10, 43).unwrap();
        assert_ne!(a.fold_of, c.fold_of);
    }

    #[test]
    fn kfold_rejects_bad_inputs() {
        let labels = vec![ClassLabel::Normal; 5];
        assert!(matches!(stratified_kfold(&labels, 1, 0), Err(EvalError::BadK(1))));
        assert!(matches!(
            stratified_kfold(&labels, 10, 0),
            Err(EvalError::TooFewSamples { n: 5, k: 10 })
        ));
    }

    #[test]
    fn confusion_diagonal_for_perfect_predictions() {
        let truth = labels_with_counts([5, 4, 3]);
        let cm = confusion(&truth, &truth).unwrap();
        assert_eq!(cm.counts[0][0], 5);
        assert_eq!(cm.counts[1][1], 4);
        assert_eq!(cm.counts[2][2], 3);
        assert_eq!(cm.total(), 12);
        assert_eq!(cm.overall_accuracy(), 100.0);
    }

    #[test]
    fn confusion_single_offdiagonal_sample() {
        let cm = confusion(&[ClassLabel::Drusen], &[ClassLabel::Normal]).unwrap();
        assert_eq!(cm.counts[2][0], 1);
        assert_eq!(cm.total(), 1);
    }

    #[test]
    fn confusion_matches_brute_force_tally() {
        let mut rng = SplitMix64::new(50);
        let truth: Vec<ClassLabel> =
            (0..50).map(|_| ClassLabel::from_ordinal(rng.next_below(3) as usize).unwrap()).collect();
        let pred: Vec<ClassLabel> =
            (0..50).map(|_| ClassLabel::from_ordinal(rng.next_below(3) as usize).unwrap()).collect();
        let cm = confusion(&truth, &pred).unwrap();
        for t in ClassLabel::ALL {
            for p in ClassLabel::ALL {
                let brute = truth
                    .iter()
                    .zip(pred.iter())
                    .filter(|(&a, &b)| a == t && b == p)
                    .count();
                assert_eq!(cm.counts[t.ordinal()][p.ordinal()], brute);
            }
        }
    }

    #[test]
    fn confusion_length_mismatch() {
        assert!(matches!(
            confusion(&[ClassLabel::Normal], &[]),
            Err(EvalError::LengthMismatch(1, 0))
        ));
    }

    #[test]
    fn perfect_classifier_metrics_are_100() {
        let truth = labels_with_counts([4, 4, 4]);
        let m = class_metrics(&confusion(&truth, &truth).unwrap()).unwrap();
        for s in m.per_class {
            assert_eq!(s.acc, 100.0);
            assert_eq!(s.sens, 100.0);
            assert_eq!(s.spec, 100.0);
        }
    }

    #[test]
    fn all_normal_predictor_metrics_hand_tallied() {
        // 5 normal + 5 exudates, everything predicted normal
        let mut truth = vec![ClassLabel::Normal; 5];
        truth.extend(vec![ClassLabel::Exudates; 5]);
        let pred = vec![ClassLabel::Normal; 10];
        let m = class_metrics(&confusion(&truth, &pred).unwrap()).unwrap();
        let normal = m.per_class[0];
        assert_eq!(normal.sens, 100.0);
        assert_eq!(normal.spec, 0.0);
        assert_eq!(normal.acc, 50.0);
        let exudates = m.per_class[1];
        assert_eq!(exudates.sens, 0.0);
        assert_eq!(exudates.spec, 100.0);
        assert_eq!(exudates.acc, 50.0);
        // drusen absent from truth: flagged, reported as 0
        let drusen = m.per_class[2];
        assert!(!drusen.sens_defined);
        assert_eq!(drusen.sens, 0.0);
        assert_eq!(drusen.spec, 100.0);
    }

    /// Independent binarized recount of one class from raw label pairs.
    fn binarized_recount(cm: &ConfusionMatrix, class: ClassLabel) -> (usize, usize, usize, usize) {
        let c = class.ordinal();
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        let mut tn = 0;
        for t in 0..3 {
            for p in 0..3 {
                let n = cm.counts[t][p];
                match (t == c, p == c) {
                    (true, true) => tp += n,
                    (true, false) => fn_ += n,
                    (false, true) => fp += n,
                    (false, false) => tn += n,
                }
            }
        }
        (tp, fp, fn_, tn)
    }

    #[test]
    fn metrics_match_binarized_recount_on_random_matrices() {
        let mut rng = SplitMix64::new(202);
        for _ in 0..200 {
            let mut cm = ConfusionMatrix::default();
            for t in 0..3 {
                for p in 0..3 {
                    cm.counts[t][p] = rng.next_below(20) as usize;
                }
            }
            if cm.total() == 0 {
                continue;
            }
            let m = class_metrics(&cm).unwrap();
            for class in ClassLabel::ALL {
                let (tp, fp, fn_, tn) = binarized_recount(&cm, class);
                let s = m.per_class[class.ordinal()];
                let n = cm.total();
                assert_eq!(s.acc, 100.0 * (tp + tn) as f64 / n as f64);
                if tp + fn_ > 0 {
                    assert_eq!(s.sens, 100.0 * tp as f64 / (tp + fn_) as f64);
                } else {
                    assert!(!s.sens_defined);
                }
                if tn + fp > 0 {
                    assert_eq!(s.spec, 100.0 * tn as f64 / (tn + fp) as f64);
                }
            }
        }
    }

    fn fold_with_accuracy(fold: usize, correct: usize, wrong: usize) -> FoldMetrics {
        let mut truth = vec![ClassLabel::Normal; correct + wrong];
        for t in truth.iter_mut().skip(correct) {
            *t = ClassLabel::Exudates;
        }
        let pred = vec![ClassLabel::Normal; correct + wrong];
        let cm = confusion(&truth, &pred).unwrap();
        let metrics = class_metrics(&cm).unwrap();
        let overall_accuracy = cm.overall_accuracy();
        FoldMetrics { fold, confusion: cm, metrics, overall_accuracy }
    }

    #[test]
    fn identical_folds_have_zero_std() {
        let folds = vec![fold_with_accuracy(0, 9, 1), fold_with_accuracy(1, 9, 1)];
        let r = CvReport::from_folds("test", "x", 0, folds);
        assert_eq!(r.mean_overall, 90.0);
        assert_eq!(r.std_overall, 0.0);
    }

    #[test]
    fn two_fold_mean_and_sample_std() {
        // overall accuracies 90 and 94 -> mean 92, sample std = sqrt(8) = 2.828...
        let folds = vec![fold_with_accuracy(0, 45, 5), fold_with_accuracy(1, 47, 3)];
        let r = CvReport::from_folds("test", "x", 0, folds);
        assert!((r.mean_overall - 92.0).abs() < 1e-9);
        assert!((r.std_overall - 8f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn report_means_equal_fold_means() {
        let folds = vec![
            fold_with_accuracy(0, 8, 2),
            fold_with_accuracy(1, 9, 1),
            fold_with_accuracy(2, 10, 0),
        ];
        let r = CvReport::from_folds("test", "x", 0, folds.clone());
        let expect: f64 =
            folds.iter().map(|f| f.overall_accuracy).sum::<f64>() / folds.len() as f64;
        assert!((r.mean_overall - expect).abs() < 1e-9);
    }

    #[test]
    fn markdown_summary_formats_mean_pm_std() {
        let r = CvReport::from_summary("bovw", "500", [[0.0; 3]; 3], 77.76, 1.97);
        let text = render_report(&[r], ReportFormat::Markdown).unwrap();
        assert!(text.contains("77.76 ± 1.97"), "{text}");
        let r2 = CvReport::from_summary("deep", "googlenet", [[0.0; 3]; 3], 92.00, 1.53);
        let text2 = render_report(&[r2], ReportFormat::Markdown).unwrap();
        assert!(text2.contains("92.00 ± 1.53"), "{text2}");
    }

    #[test]
    fn markdown_grid_renders_class_means() {
        let mean_class = [
            [88.17, 88.17, 99.65],
            [96.02, 70.36, 97.00],
            [75.79, 96.33, 99.90],
        ];
        let r = CvReport::from_summary("deep", "googlenet", mean_class, 92.00, 1.53);
        let text = render_report(&[r], ReportFormat::Markdown).unwrap();
        assert!(
            text.contains("| googlenet | 88.17 | 88.17 | 99.65 | 96.02 | 70.36 | 97.00 | 75.79 | 96.33 | 99.90 |"),
            "{text}"
        );
    }

    #[test]
    fn csv_round_trips_numeric_values() {
        let folds = vec![fold_with_accuracy(0, 45, 5), fold_with_accuracy(1, 47, 3)];
        let r = CvReport::from_folds("bovw", "200", 1, folds);
        let text = render_report(&[r.clone()], ReportFormat::Csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "pipeline,param,class,acc,sens,spec,fold");
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 7);
            assert_eq!(fields[0], "bovw");
            assert_eq!(fields[1], "200");
            let class = ClassLabel::parse(fields[2]).unwrap();
            let acc: f64 = fields[3].parse().unwrap();
            if fields[6] != "mean" {
                let fold: usize = fields[6].parse().unwrap();
                let want = r.folds[fold].metrics.per_class[class.ordinal()].acc;
                assert!((acc - want).abs() <= 0.005 + 1e-12); // two-decimal formatting
            }
        }
    }

    #[test]
    fn render_rejects_empty_input() {
        assert!(matches!(
            render_report(&[], ReportFormat::Markdown),
            Err(EvalError::EmptyInput)
        ));
    }

    #[test]
    fn run_cv_on_separable_precomputed_vectors() {
        // three tight clouds in 4-D
        let mut rng = SplitMix64::new(31);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for class in ClassLabel::ALL {
            let c = class.ordinal() as f32 * 5.0;
            for _ in 0..20 {
                vectors.push(vec![
                    c + rng.next_f64() as f32 * 0.2,
                    c - rng.next_f64() as f32 * 0.2,
                    rng.next_f64() as f32,
                    0.5,
                ]);
                labels.push(class);
            }
        }
        let pipeline = PrecomputedCvPipeline {
            vectors,
            svm: SvmConfig::new(crate::svm::Kernel::Linear),
        };
        let report = run_cv(&pipeline, &labels, 5, 7, "deep", "mock").unwrap();
        assert_eq!(report.folds.len(), 5);
        assert!(report.mean_overall > 95.0, "accuracy {}", report.mean_overall);
    }

    #[test]
    fn run_cv_is_deterministic() {
        let mut rng = SplitMix64::new(32);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for class in ClassLabel::ALL {
            for _ in 0..10 {
                vectors.push(vec![
                    class.ordinal() as f32 + rng.next_f64() as f32 * 0.3,
                    rng.next_f64() as f32,
                ]);
                labels.push(class);
            }
        }
        let pipeline = PrecomputedCvPipeline {
            vectors,
            svm: SvmConfig::new(crate::svm::Kernel::Rbf { gamma: 0.5 }),
        };
        let a = run_cv(&pipeline, &labels, 3, 11, "deep", "m").unwrap();
        let b = run_cv(&pipeline, &labels, 3, 11, "deep", "m").unwrap();
        let ra = render_report(&[a], ReportFormat::Csv).unwrap();
        let rb = render_report(&[b], ReportFormat::Csv).unwrap();
        assert_eq!(ra, rb);
    }
}
