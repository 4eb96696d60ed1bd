//! Fixed-length normalized image representations shared by the two
//! pipelines.

/// What a feature vector represents and how long it must be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureKind {
    /// Visual-word frequency histogram with `words` bins.
    BovwHistogram { words: usize },
    /// Penultimate-layer CNN activation of `dim` components.
    Deep { model_id: String, dim: usize },
}

impl FeatureKind {
    pub fn dim(&self) -> usize {
        match self {
            FeatureKind::BovwHistogram { words } => *words,
            FeatureKind::Deep { dim, .. } => *dim,
        }
    }
}

/// L2-normalized image representation (or the all-zero degenerate case).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub kind: FeatureKind,
}

impl FeatureVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    /// Degenerate-output flag: true when no descriptor contributed mass.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}
