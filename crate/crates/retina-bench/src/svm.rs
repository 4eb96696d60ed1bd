//! Kernel SVM trained by sequential minimal optimization, with one-vs-one
//! multi-class composition over the three retinal classes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::dataset::ClassLabel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("dimension mismatch: {got} vs {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("training set contains a single class")]
    SingleClassInput,
    #[error("non-finite value in training input")]
    NonFiniteInput,
    #[error("class {0} has no training examples")]
    MissingClass(ClassLabel),
    #[error("empty training set")]
    EmptyInput,
    #[error("invalid config: {0}")]
    BadConfig(&'static str),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes in model file (expected RSM1)")]
    BadMagic,
    #[error("model file truncated")]
    TruncatedFile,
}

/// Solver settings. C defaults to the benchmark's fixed penalty of 8.
#[derive(Debug, Clone)]
pub struct SvmConfig {
    pub c: f64,
    pub kernel: Kernel,
    pub kkt_tolerance: f64,
    pub max_passes: usize,
}

impl SvmConfig {
    pub fn new(kernel: Kernel) -> Self {
        Self { c: 8.0, kernel, kkt_tolerance: 1e-3, max_passes: 100_000 }
    }

    fn validate(&self) -> Result<(), SvmError> {
        if self.c <= 0.0 {
            return Err(SvmError::BadConfig("C must be > 0"));
        }
        if let Kernel::Rbf { gamma } = self.kernel {
            if gamma <= 0.0 {
                return Err(SvmError::BadConfig("gamma must be > 0"));
            }
        }
        if self.kkt_tolerance <= 0.0 {
            return Err(SvmError::BadConfig("kkt_tolerance must be > 0"));
        }
        if self.max_passes == 0 {
            return Err(SvmError::BadConfig("max_passes must be >= 1"));
        }
        Ok(())
    }
}

/// Kernel value k(x, y).
pub fn kernel_eval(kernel: Kernel, x: &[f32], y: &[f32]) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch { got: y.len(), want: x.len() });
    }
    Ok(kernel_eval_unchecked(kernel, x, y))
}

#[inline]
fn kernel_eval_unchecked(kernel: Kernel, x: &[f32], y: &[f32]) -> f64 {
    match kernel {
        Kernel::Linear => x.iter().zip(y.iter()).map(|(&a, &b)| (a as f64) * (b as f64)).sum(),
        Kernel::Rbf { gamma } => {
            let d2: f64 = x
                .iter()
                .zip(y.iter())
                .map(|(&a, &b)| {
                    let d = (a - b) as f64;
                    d * d
                })
                .sum();
            (-gamma * d2).exp()
        }
    }
}

/// Trained binary classifier. Only support vectors (alpha > 1e-9) are kept;
/// `coeffs[i]` is `alpha_i * y_i`.
#[derive(Debug, Clone)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f32>>,
    pub coeffs: Vec<f64>,
    pub bias: f64,
    pub kernel: Kernel,
    pub dim: usize,
    /// False when the iteration cap was reached before the KKT conditions
    /// were met; the model still holds the best iterate.
    pub converged: bool,
}

impl BinarySvmModel {
    /// Decision value f(x) = sum_i alpha_i y_i k(sv_i, x) + b.
    pub fn decision(&self, x: &[f32]) -> Result<f64, SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::DimensionMismatch { got: x.len(), want: self.dim });
        }
        let mut f = self.bias;
        for (sv, &c) in self.support_vectors.iter().zip(self.coeffs.iter()) {
            f += c * kernel_eval_unchecked(self.kernel, sv, x);
        }
        Ok(f)
    }
}

/// Solver by-products used by diagnostics and oracle tests.
#[derive(Debug, Clone)]
pub struct TrainDiagnostics {
    /// Final alpha for every training point, in input order.
    pub alpha: Vec<f64>,
    /// Dual objective after each working-set update.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

/// Train a binary SVM with SMO using maximal-violating-pair working-set
/// selection. Labels must be +/-1. Deterministic for a fixed input order.
pub fn train_binary(x: &[Vec<f32>], y: &[f64], cfg: &SvmConfig) -> Result<BinarySvmModel, SvmError> {
    Ok(train_binary_detailed(x, y, cfg)?.0)
}

pub fn train_binary_detailed(
    x: &[Vec<f32>],
    y: &[f64],
    cfg: &SvmConfig,
) -> Result<(BinarySvmModel, TrainDiagnostics), SvmError> {
    cfg.validate()?;
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(SvmError::EmptyInput);
    }
    let dim = x[0].len();
    for xi in x {
        if xi.len() != dim {
            return Err(SvmError::DimensionMismatch { got: xi.len(), want: dim });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFiniteInput);
        }
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(SvmError::SingleClassInput);
    }
    debug_assert!(y.iter().all(|&v| v == 1.0 || v == -1.0));

    // dense kernel matrix; training sets here are at most ~1k rows
    let k_mat: Vec<f64> = {
        let mut m = vec![0f64; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel_eval_unchecked(cfg.kernel, &x[i], &x[j]);
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        m
    };
    let k = |i: usize, j: usize| k_mat[i * n + j];

    let c = cfg.c;
    let mut alpha = vec![0f64; n];
    // gradient of the min-form dual: G_i = (Q alpha)_i - 1
    let mut grad = vec![-1f64; n];
    let mut history = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;

    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        // max-form dual: sum(alpha) - 1/2 alpha^T Q alpha
        let sum_a: f64 = alpha.iter().sum();
        let sum_ag: f64 = alpha.iter().zip(grad.iter()).map(|(&a, &g)| a * g).sum();
        0.5 * (sum_a - sum_ag)
    };

    for _ in 0..cfg.max_passes {
        // maximal violating pair
        let mut i_up = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        let mut j_low = usize::MAX;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && v > m_up {
                m_up = v;
                i_up = t;
            }
            if in_low && v < m_low {
                m_low = v;
                j_low = t;
            }
        }
        if i_up == usize::MAX || j_low == usize::MAX || m_up - m_low < cfg.kkt_tolerance {
            converged = true;
            break;
        }
        let (i, j) = (i_up, j_low);

        // analytic two-variable solve
        let s = y[i] * y[j];
        let (lo, hi) = if s < 0.0 {
            ((alpha[j] - alpha[i]).max(0.0), (c + alpha[j] - alpha[i]).min(c))
        } else {
            ((alpha[i] + alpha[j] - c).max(0.0), (alpha[i] + alpha[j]).min(c))
        };
        let eta = (k(i, i) + k(j, j) - 2.0 * k(i, j)).max(1e-12);
        // E_i - E_j expressed through the gradient
        let delta = y[j] * (y[i] * grad[i] - y[j] * grad[j]) / eta;
        // snap to the exact bound so a variable that lands epsilon away from
        // 0 or C leaves the working set instead of pinning the pair selection
        let snap = |v: f64| {
            if v < 1e-10 {
                0.0
            } else if v > c - 1e-10 {
                c
            } else {
                v
            }
        };
        let new_aj = snap((alpha[j] + delta).clamp(lo, hi));
        let new_ai = snap(alpha[i] + s * (alpha[j] - new_aj));
        let d_ai = new_ai - alpha[i];
        let d_aj = new_aj - alpha[j];
        if d_ai.abs() < 1e-14 && d_aj.abs() < 1e-14 {
            // numerically stuck pair: no representable progress is possible
            break;
        }
        alpha[i] = new_ai;
        alpha[j] = new_aj;
        for t in 0..n {
            grad[t] += y[t] * y[i] * k(t, i) * d_ai + y[t] * y[j] * k(t, j) * d_aj;
        }
        iterations += 1;
        history.push(objective(&alpha, &grad));
    }

    // bias from free support vectors, falling back to the violation midpoint
    let mut free_sum = 0f64;
    let mut free_count = 0usize;
    for t in 0..n {
        if alpha[t] > 1e-9 && alpha[t] < c - 1e-9 {
            free_sum += -y[t] * grad[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up {
                m_up = m_up.max(v);
            }
            if in_low {
                m_low = m_low.min(v);
            }
        }
        (m_up + m_low) / 2.0
    };

    let mut support_vectors = Vec::new();
    let mut coeffs = Vec::new();
    for t in 0..n {
        if alpha[t] > 1e-9 {
            support_vectors.push(x[t].clone());
            coeffs.push(alpha[t] * y[t]);
        }
    }
    let model = BinarySvmModel { support_vectors, coeffs, bias, kernel: cfg.kernel, dim, converged };
    let diag = TrainDiagnostics { alpha, objective_history: history, iterations };
    Ok((model, diag))
}

/// Largest KKT violation over the training set, for post-training checks.
/// Zero means the optimality conditions hold exactly.
pub fn max_kkt_violation(
    x: &[Vec<f32>],
    y: &[f64],
    alpha: &[f64],
    model: &BinarySvmModel,
    c: f64,
) -> f64 {
    let mut worst = 0f64;
    for i in 0..x.len() {
        let margin = y[i] * model.decision(&x[i]).expect("dims checked at training");
        let v = if alpha[i] <= 1e-9 {
            (1.0 - margin).max(0.0) // must satisfy margin >= 1
        } else if alpha[i] >= c - 1e-9 {
            (margin - 1.0).max(0.0) // must satisfy margin <= 1
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// The three pairwise binary models of the one-vs-one scheme, ordered
/// (Normal,Exudates), (Normal,Drusen), (Exudates,Drusen). In each pair the
/// lower-ordinal class is the positive side.
#[derive(Debug, Clone)]
pub struct MultiClassSvmModel {
    pub models: Vec<(ClassLabel, ClassLabel, BinarySvmModel)>,
    pub dim: usize,
}

const CLASS_PAIRS: [(ClassLabel, ClassLabel); 3] = [
    (ClassLabel::Normal, ClassLabel::Exudates),
    (ClassLabel::Normal, ClassLabel::Drusen),
    (ClassLabel::Exudates, ClassLabel::Drusen),
];

/// Train one binary model per unordered class pair on that pair's examples.
pub fn train_multiclass(
    x: &[Vec<f32>],
    labels: &[ClassLabel],
    cfg: &SvmConfig,
) -> Result<MultiClassSvmModel, SvmError> {
    if x.is_empty() || x.len() != labels.len() {
        return Err(SvmError::EmptyInput);
    }
    let dim = x[0].len();
    for class in ClassLabel::ALL {
        if !labels.contains(&class) {
            return Err(SvmError::MissingClass(class));
        }
    }
    let mut models = Vec::with_capacity(3);
    for (pos, neg) in CLASS_PAIRS {
        let mut px = Vec::new();
        let mut py = Vec::new();
        for (xi, &li) in x.iter().zip(labels.iter()) {
            if li == pos {
                px.push(xi.clone());
                py.push(1.0);
            } else if li == neg {
                px.push(xi.clone());
                py.push(-1.0);
            }
        }
        let model = train_binary(&px, &py, cfg)?;
        models.push((pos, neg, model));
    }
    Ok(MultiClassSvmModel { models, dim })
}

/// Majority vote over the three pairwise decisions. Vote ties go to the
/// class with the largest summed absolute decision value, then to the
/// lowest ordinal.
pub fn predict(model: &MultiClassSvmModel, x: &[f32]) -> Result<ClassLabel, SvmError> {
    if x.len() != model.dim {
        return Err(SvmError::DimensionMismatch { got: x.len(), want: model.dim });
    }
    let mut votes = [0u32; ClassLabel::COUNT];
    let mut strength = [0f64; ClassLabel::COUNT];
    for (pos, neg, m) in &model.models {
        let f = m.decision(x)?;
        let winner = if f >= 0.0 { *pos } else { *neg };
        votes[winner.ordinal()] += 1;
        strength[pos.ordinal()] += f.abs();
        strength[neg.ordinal()] += f.abs();
    }
    let best = ClassLabel::ALL
        .into_iter()
        .max_by(|a, b| {
            votes[a.ordinal()]
                .cmp(&votes[b.ordinal()])
                .then(
                    strength[a.ordinal()]
                        .partial_cmp(&strength[b.ordinal()])
                        .unwrap(),
                )
                // max_by keeps the later element on full ties, so order the
                // comparison to prefer the lower ordinal
                .then(b.ordinal().cmp(&a.ordinal()))
        })
        .unwrap();
    Ok(best)
}

fn write_binary(buf: &mut Vec<u8>, m: &BinarySvmModel) {
    let (kind, gamma) = match m.kernel {
        Kernel::Linear => (0u8, 0f64),
        Kernel::Rbf { gamma } => (1u8, gamma),
    };
    buf.push(kind);
    buf.extend_from_slice(&gamma.to_le_bytes());
    buf.extend_from_slice(&m.bias.to_le_bytes());
    buf.extend_from_slice(&(m.support_vectors.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.dim as u32).to_le_bytes());
    buf.push(m.converged as u8);
    for &c in &m.coeffs {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    for sv in &m.support_vectors {
        for &v in sv {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn read_binary(bytes: &[u8], off: &mut usize) -> Result<BinarySvmModel, SvmError> {
    let take = |off: &mut usize, n: usize| -> Result<&[u8], SvmError> {
        if *off + n > bytes.len() {
            return Err(SvmError::TruncatedFile);
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };
    let kind = take(off, 1)?[0];
    let gamma = f64::from_le_bytes(take(off, 8)?.try_into().unwrap());
    let kernel = match kind {
        0 => Kernel::Linear,
        _ => Kernel::Rbf { gamma },
    };
    let bias = f64::from_le_bytes(take(off, 8)?.try_into().unwrap());
    let n_sv = u32::from_le_bytes(take(off, 4)?.try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(take(off, 4)?.try_into().unwrap()) as usize;
    let converged = take(off, 1)?[0] != 0;
    let mut coeffs = Vec::with_capacity(n_sv);
    for _ in 0..n_sv {
        coeffs.push(f64::from_le_bytes(take(off, 8)?.try_into().unwrap()));
    }
    let mut support_vectors = Vec::with_capacity(n_sv);
    for _ in 0..n_sv {
        let row = take(off, dim * 4)?;
        support_vectors.push(
            row.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    Ok(BinarySvmModel { support_vectors, coeffs, bias, kernel, dim, converged })
}

/// Serialize a one-vs-one model: magic `RSM1`, u8 model count, then each
/// pairwise model (class pair bytes, kernel spec, bias, counts, coefficient
/// and support-vector payload). Round-trip exact.
pub fn write_model(model: &MultiClassSvmModel, path: &Path) -> Result<(), SvmError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(b"RSM1");
    buf.push(model.models.len() as u8);
    buf.extend_from_slice(&(model.dim as u32).to_le_bytes());
    for (pos, neg, m) in &model.models {
        buf.push(pos.ordinal() as u8);
        buf.push(neg.ordinal() as u8);
        write_binary(&mut buf, m);
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<MultiClassSvmModel, SvmError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 9 || &bytes[..4] != b"RSM1" {
        return Err(SvmError::BadMagic);
    }
    let count = bytes[4] as usize;
    let dim = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let mut off = 9;
    let mut models = Vec::with_capacity(count);
    for _ in 0..count {
        if off + 2 > bytes.len() {
            return Err(SvmError::TruncatedFile);
        }
        let pos = ClassLabel::from_ordinal(bytes[off] as usize).ok_or(SvmError::TruncatedFile)?;
        let neg =
            ClassLabel::from_ordinal(bytes[off + 1] as usize).ok_or(SvmError::TruncatedFile)?;
        off += 2;
        models.push((pos, neg, read_binary(&bytes, &mut off)?));
    }
    Ok(MultiClassSvmModel { models, dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn rbf_at_zero_distance_is_one() {
        let x = vec![0.3f32, -0.7, 2.0];
        assert_eq!(kernel_eval(Kernel::Rbf { gamma: 3.5 }, &x, &x).unwrap(), 1.0);
    }

    #[test]
    fn linear_self_is_squared_norm() {
        let x = vec![1.0f32, 2.0, 3.0];
        assert!((kernel_eval(Kernel::Linear, &x, &x).unwrap() - 14.0).abs() < 1e-12);
    }

    #[test]
    fn rbf_known_value() {
        // ||x - y||^2 = 2, gamma = 0.5 -> e^-1
        let x = vec![1.0f32, 0.0];
        let y = vec![0.0f32, 1.0];
        let v = kernel_eval(Kernel::Rbf { gamma: 0.5 }, &x, &y).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kernel_dimension_mismatch() {
        assert!(matches!(
            kernel_eval(Kernel::Linear, &[1.0], &[1.0, 2.0]),
            Err(SvmError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn two_point_problem_has_analytic_solution() {
        // 1-D points -1 and +1: optimal decision f(x) = x, alpha = 0.5 each
        let x = vec![vec![-1.0f32], vec![1.0f32]];
        let y = vec![-1.0, 1.0];
        let cfg = SvmConfig::new(Kernel::Linear);
        let (model, diag) = train_binary_detailed(&x, &y, &cfg).unwrap();
        assert!((diag.alpha[0] - 0.5).abs() < 1e-6);
        assert!((diag.alpha[1] - 0.5).abs() < 1e-6);
        assert!(model.bias.abs() < 1e-6);
        assert!((model.decision(&[1.0]).unwrap() - 1.0).abs() < 1e-6);
        assert!((model.decision(&[-1.0]).unwrap() + 1.0).abs() < 1e-6);
        assert_eq!(model.support_vectors.len(), 2);
    }

    #[test]
    fn xor_with_rbf_reaches_full_training_accuracy() {
        let x = vec![
            vec![0.0f32, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let y = vec![-1.0, 1.0, 1.0, -1.0];
        let cfg = SvmConfig::new(Kernel::Rbf { gamma: 1.0 });
        let model = train_binary(&x, &y, &cfg).unwrap();
        for (xi, &yi) in x.iter().zip(y.iter()) {
            assert!(model.decision(xi).unwrap() * yi > 0.0);
        }
    }

    #[test]
    fn duplicated_point_with_conflicting_labels_terminates() {
        let x = vec![vec![0.5f32, 0.5], vec![0.5, 0.5], vec![1.0, 1.0]];
        let y = vec![1.0, -1.0, 1.0];
        let cfg = SvmConfig::new(Kernel::Linear);
        let (_, diag) = train_binary_detailed(&x, &y, &cfg).unwrap();
        for &a in &diag.alpha {
            assert!((0.0..=8.0 + 1e-9).contains(&a));
        }
    }

    #[test]
    fn dual_constraint_holds() {
        let mut rng = SplitMix64::new(5);
        let x: Vec<Vec<f32>> = (0..30)
            .map(|_| (0..4).map(|_| rng.next_f64() as f32).collect())
            .collect();
        let y: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let cfg = SvmConfig::new(Kernel::Rbf { gamma: 0.25 });
        let (model, diag) = train_binary_detailed(&x, &y, &cfg).unwrap();
        let sum: f64 = diag.alpha.iter().zip(y.iter()).map(|(&a, &l)| a * l).sum();
        assert!(sum.abs() < 1e-6, "sum alpha_i y_i = {sum}");
        // only support vectors retained
        assert!(model.coeffs.iter().all(|&c| c.abs() > 1e-9));
        // objective non-decreasing
        for w in diag.objective_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "objective decreased {} -> {}", w[0], w[1]);
        }
        // KKT at the configured tolerance
        assert!(max_kkt_violation(&x, &y, &diag.alpha, &model, cfg.c) < 1e-2);
    }

    #[test]
    fn single_class_input_rejected() {
        let x = vec![vec![0.0f32], vec![1.0]];
        let y = vec![1.0, 1.0];
        assert!(matches!(
            train_binary(&x, &y, &SvmConfig::new(Kernel::Linear)),
            Err(SvmError::SingleClassInput)
        ));
    }

    #[test]
    fn rbf_prediction_invariant_under_joint_rescale() {
        let mut rng = SplitMix64::new(8);
        let x: Vec<Vec<f32>> = (0..20)
            .map(|_| (0..3).map(|_| rng.next_f64() as f32).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|v| if v[0] > 0.5 { 1.0 } else { -1.0 }).collect();
        if !(y.contains(&1.0) && y.contains(&-1.0)) {
            panic!("fixture degenerate");
        }
        let gamma = 0.7;
        let s = 4.0f32; // power of two so the rescale is exact in f32
        let scaled: Vec<Vec<f32>> = x.iter().map(|v| v.iter().map(|&a| a * s).collect()).collect();
        let m1 = train_binary(&x, &y, &SvmConfig::new(Kernel::Rbf { gamma })).unwrap();
        let m2 = train_binary(
            &scaled,
            &y,
            &SvmConfig::new(Kernel::Rbf { gamma: gamma / (s as f64 * s as f64) }),
        )
        .unwrap();
        for xi in &x {
            let xs: Vec<f32> = xi.iter().map(|&a| a * s).collect();
            let d1 = m1.decision(xi).unwrap();
            let d2 = m2.decision(&xs).unwrap();
            assert!((d1 - d2).abs() < 1e-9, "{d1} vs {d2}");
        }
    }

    fn three_clouds(per_class: usize, seed: u64) -> (Vec<Vec<f32>>, Vec<ClassLabel>) {
        let centers = [[0.0f32, 0.0], [6.0, 0.0], [0.0, 6.0]];
        let mut rng = SplitMix64::new(seed);
        let mut x = Vec::new();
        let mut labels = Vec::new();
        for (ci, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                x.push(vec![
                    center[0] + rng.next_f64() as f32 - 0.5,
                    center[1] + rng.next_f64() as f32 - 0.5,
                ]);
                labels.push(ClassLabel::from_ordinal(ci).unwrap());
            }
        }
        (x, labels)
    }

    #[test]
    fn separated_clouds_classified_perfectly() {
        let (x, labels) = three_clouds(30, 77);
        let model = train_multiclass(&x, &labels, &SvmConfig::new(Kernel::Linear)).unwrap();
        for (xi, &li) in x.iter().zip(labels.iter()) {
            assert_eq!(predict(&model, xi).unwrap(), li);
        }
    }

    #[test]
    fn missing_class_rejected() {
        let x = vec![vec![0.0f32], vec![1.0]];
        let labels = vec![ClassLabel::Normal, ClassLabel::Exudates];
        assert!(matches!(
            train_multiclass(&x, &labels, &SvmConfig::new(Kernel::Linear)),
            Err(SvmError::MissingClass(ClassLabel::Drusen))
        ));
    }

    #[test]
    fn single_point_per_class_trains() {
        let x = vec![vec![0.0f32, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let labels = vec![ClassLabel::Normal, ClassLabel::Exudates, ClassLabel::Drusen];
        let model = train_multiclass(&x, &labels, &SvmConfig::new(Kernel::Linear)).unwrap();
        assert_eq!(model.models.len(), 3);
    }

    #[test]
    fn unanimous_vote_wins() {
        let (x, labels) = three_clouds(10, 3);
        let model = train_multiclass(&x, &labels, &SvmConfig::new(Kernel::Linear)).unwrap();
        // a point deep inside the Drusen cloud
        let p = vec![0.0f32, 6.0];
        let mut drusen_votes = 0;
        for (pos, neg, m) in &model.models {
            let f = m.decision(&p).unwrap();
            let winner = if f >= 0.0 { *pos } else { *neg };
            if winner == ClassLabel::Drusen {
                drusen_votes += 1;
            }
        }
        assert_eq!(drusen_votes, 2); // drusen participates in two pairs
        assert_eq!(predict(&model, &p).unwrap(), ClassLabel::Drusen);
    }

    #[test]
    fn vote_cycle_falls_back_to_decision_strength_then_ordinal() {
        // hand-built cyclic model: N beats E, E beats D, D beats N,
        // all with the same |decision|, so the ordinal rule decides
        let stub = |bias: f64| BinarySvmModel {
            support_vectors: vec![],
            coeffs: vec![],
            bias,
            kernel: Kernel::Linear,
            dim: 1,
            converged: true,
        };
        let model = MultiClassSvmModel {
            models: vec![
                (ClassLabel::Normal, ClassLabel::Exudates, stub(1.0)), // N
                (ClassLabel::Normal, ClassLabel::Drusen, stub(-1.0)),  // D
                (ClassLabel::Exudates, ClassLabel::Drusen, stub(1.0)), // E
            ],
            dim: 1,
        };
        // every class gets one vote and strength 2.0 -> lowest ordinal wins
        assert_eq!(predict(&model, &[0.0]).unwrap(), ClassLabel::Normal);

        // break the cycle by strength: make the pair involving Drusen louder
        let model2 = MultiClassSvmModel {
            models: vec![
                (ClassLabel::Normal, ClassLabel::Exudates, stub(1.0)),  // N, |f|=1
                (ClassLabel::Normal, ClassLabel::Drusen, stub(-5.0)),   // D, |f|=5
                (ClassLabel::Exudates, ClassLabel::Drusen, stub(0.5)),  // E, |f|=0.5
            ],
            dim: 1,
        };
        // strengths: N=6, E=1.5, D=5.5 -> Normal
        assert_eq!(predict(&model2, &[0.0]).unwrap(), ClassLabel::Normal);
        let model3 = MultiClassSvmModel {
            models: vec![
                (ClassLabel::Normal, ClassLabel::Exudates, stub(0.1)),  // N, small
                (ClassLabel::Normal, ClassLabel::Drusen, stub(-5.0)),   // D
                (ClassLabel::Exudates, ClassLabel::Drusen, stub(1.0)),  // E
            ],
            dim: 1,
        };
        // strengths: N=5.1, E=1.1, D=6.0 -> Drusen
        assert_eq!(predict(&model3, &[0.0]).unwrap(), ClassLabel::Drusen);
    }

    #[test]
    fn model_file_round_trip_is_exact() {
        let (x, labels) = three_clouds(12, 9);
        let cfg = SvmConfig::new(Kernel::Rbf { gamma: 0.5 });
        let model = train_multiclass(&x, &labels, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.rsm");
        write_model(&model, &path).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back.models.len(), 3);
        for ((p1, n1, m1), (p2, n2, m2)) in model.models.iter().zip(back.models.iter()) {
            assert_eq!((p1, n1), (p2, n2));
            assert_eq!(m1.bias.to_bits(), m2.bias.to_bits());
            assert_eq!(m1.support_vectors, m2.support_vectors);
            assert_eq!(m1.coeffs, m2.coeffs);
            assert_eq!(m1.kernel, m2.kernel);
        }
    }

    #[test]
    fn model_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.rsm");
        fs::write(&path, b"NOPE\x03\x00\x00\x00\x01").unwrap();
        assert!(matches!(read_model(&path), Err(SvmError::BadMagic)));
    }
}
