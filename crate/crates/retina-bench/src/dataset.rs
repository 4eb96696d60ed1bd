//! Labeled-corpus ingestion and class-distribution auditing.
//!
//! A corpus is described by a flat CSV manifest (`path,label,source`) rather
//! than a directory layout: the source datasets this tool targets all use
//! incompatible on-disk conventions, so provenance is decoupled from
//! ingestion. Fields must not contain commas; paths with commas are not
//! supported.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// The three retinal classes, with a fixed ordinal encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    Normal = 0,
    Exudates = 1,
    Drusen = 2,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Normal, ClassLabel::Exudates, ClassLabel::Drusen];
    pub const COUNT: usize = 3;

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(idx: usize) -> Option<ClassLabel> {
        match idx {
            0 => Some(ClassLabel::Normal),
            1 => Some(ClassLabel::Exudates),
            2 => Some(ClassLabel::Drusen),
            _ => None,
        }
    }

    /// Case-insensitive parse of the manifest label token.
    pub fn parse(token: &str) -> Option<ClassLabel> {
        match token.trim().to_ascii_lowercase().as_str() {
            "normal" => Some(ClassLabel::Normal),
            "exudates" => Some(ClassLabel::Exudates),
            "drusen" => Some(ClassLabel::Drusen),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "normal",
            ClassLabel::Exudates => "exudates",
            ClassLabel::Drusen => "drusen",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One manifest row: an image path, its class, and the dataset it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: ClassLabel,
    pub source: String,
}

/// Labeled image inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("manifest file not found: {0}")]
    MissingFile(PathBuf),
    #[error("i/o error reading manifest: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed row at line {0}: expected `path,label,source`")]
    MalformedRow(usize),
    #[error("unknown class label `{0}` (expected normal, exudates or drusen)")]
    UnknownLabel(String),
    #[error("duplicate image path in manifest: {0}")]
    DuplicatePath(PathBuf),
    #[error("empty source field at line {0}")]
    EmptySource(usize),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("manifest header must be `path,label,source`, got `{0}`")]
    BadHeader(String),
}

/// Per-class and per-(source, class) counts of a manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDistribution {
    pub per_class: [usize; ClassLabel::COUNT],
    pub per_source: BTreeMap<(String, ClassLabel), usize>,
}

impl ClassDistribution {
    pub fn total(&self) -> usize {
        self.per_class.iter().sum()
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.per_class[label.ordinal()]
    }

    pub fn source_count(&self, source: &str, label: ClassLabel) -> usize {
        self.per_source
            .get(&(source.to_string(), label))
            .copied()
            .unwrap_or(0)
    }

    /// Source names in first-seen-independent (sorted) order.
    pub fn sources(&self) -> Vec<String> {
        let mut names: Vec<String> = self.per_source.keys().map(|(s, _)| s.clone()).collect();
        names.dedup();
        names
    }
}

/// Parse a manifest CSV. Header must be exactly `path,label,source`.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    if !path.exists() {
        return Err(DatasetError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    parse_manifest(&text)
}

/// Parse manifest text (exposed separately so tests avoid the filesystem).
pub fn parse_manifest(text: &str) -> Result<DatasetManifest, DatasetError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DatasetError::EmptyManifest)?;
    if header.trim() != "path,label,source" {
        return Err(DatasetError::BadHeader(header.to_string()));
    }
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in lines {
        let line_no = idx; // 1-based data row (header is index 0)
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(DatasetError::MalformedRow(line_no));
        }
        let path = PathBuf::from(fields[0].trim());
        if path.as_os_str().is_empty() {
            return Err(DatasetError::MalformedRow(line_no));
        }
        let label = ClassLabel::parse(fields[1])
            .ok_or_else(|| DatasetError::UnknownLabel(fields[1].trim().to_string()))?;
        let source = fields[2].trim().to_string();
        if source.is_empty() {
            return Err(DatasetError::EmptySource(line_no));
        }
        if !seen.insert(path.clone()) {
            return Err(DatasetError::DuplicatePath(path));
        }
        entries.push(ManifestEntry { path, label, source });
    }
    Ok(DatasetManifest { entries })
}

/// Serialize a manifest back to CSV. Inverse of [`parse_manifest`].
pub fn write_manifest(manifest: &DatasetManifest) -> String {
    let mut out = String::from("path,label,source\n");
    for e in &manifest.entries {
        out.push_str(&format!("{},{},{}\n", e.path.display(), e.label, e.source));
    }
    out
}

/// Save a manifest to disk.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, write_manifest(manifest))?;
    Ok(())
}

/// Count entries per class and per (source, class) pair.
pub fn audit_distribution(manifest: &DatasetManifest) -> Result<ClassDistribution, DatasetError> {
    if manifest.entries.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    let mut per_class = [0usize; ClassLabel::COUNT];
    let mut per_source = BTreeMap::new();
    for e in &manifest.entries {
        per_class[e.label.ordinal()] += 1;
        *per_source.entry((e.source.clone(), e.label)).or_insert(0) += 1;
    }
    Ok(ClassDistribution { per_class, per_source })
}
