//! Command-line surface composing the toolkit into the two benchmark
//! experiments: BoVW with a word-count sweep, and deep features through a
//! pluggable backend, both under stratified k-fold cross-validation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use retina_bench::bovw::{encode_histogram, kmeans_fit, CodebookConfig};
use retina_bench::dataset::{audit_distribution, load_manifest, ClassLabel};
use retina_bench::deepfeat::{read_features, write_features, FeatureRecord, MockBackend};
use retina_bench::descriptors::DEFAULT_SURF_THRESHOLD;
use retina_bench::eval::{
    render_report, run_cv, BovwCvPipeline, ClassMetrics, ClassStats, ConfusionMatrix, CvReport,
    FoldMetrics, PrecomputedCvPipeline, ReportFormat,
};
use retina_bench::pipeline::{
    deep_features_for_manifest, descriptors_for_manifest, manifest_labels,
};
use retina_bench::svm::{Kernel, SvmConfig};
use retina_bench::synthgen::{generate, SynthConfig};

#[derive(Parser)]
#[command(name = "retina-bench", version, about = "Retinal lesion classification benchmark")]
struct Cli {
    /// Worker threads (default: logical cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PipelineKind {
    Bovw,
    Deep,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Markdown,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic three-class corpus
    Synth {
        /// Output directory for PNGs and manifest.csv
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        /// Master seed; the generator stream is derived as seed+2
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 224)]
        size: usize,
    },
    /// Print the class distribution of a manifest, per source dataset
    Audit {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Extract feature vectors to an RFV1 feature file
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        pipeline: PipelineKind,
        /// Codebook size for the bovw pipeline
        #[arg(long, default_value_t = 200)]
        words: usize,
        /// Backend spec for the deep pipeline, e.g. mock:42:1024
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SURF_THRESHOLD)]
        surf_threshold: f64,
    },
    /// Run stratified k-fold cross-validation and write report files
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        pipeline: PipelineKind,
        /// Comma-separated codebook sizes to sweep (bovw)
        #[arg(long, default_value = "100,200,300,400,500", value_delimiter = ',')]
        words: Vec<usize>,
        /// Backend spec for the deep pipeline, e.g. mock:42:1024
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// SVM penalty
        #[arg(long = "C", default_value_t = 8.0)]
        c: f64,
        /// RBF gamma for the deep pipeline (default 1/dim)
        #[arg(long)]
        gamma: Option<f64>,
        /// Master seed (folds: seed, k-means: seed+1)
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SURF_THRESHOLD)]
        surf_threshold: f64,
    },
    /// Combine eval CSV files into one Markdown or CSV table
    Report {
        /// Per-fold CSV files produced by `eval`
        #[arg(long, required = true, value_delimiter = ',')]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: OutputFormat,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: failed to configure worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { out, per_class, seed, size } => cmd_synth(&out, per_class, seed, size),
        Command::Audit { manifest } => cmd_audit(&manifest),
        Command::Extract { manifest, pipeline, words, backend, out, seed, surf_threshold } => {
            cmd_extract(&manifest, pipeline, words, backend.as_deref(), &out, seed, surf_threshold)
        }
        Command::Eval {
            manifest,
            pipeline,
            words,
            backend,
            folds,
            c,
            gamma,
            seed,
            out_dir,
            surf_threshold,
        } => cmd_eval(
            &manifest,
            pipeline,
            &words,
            backend.as_deref(),
            folds,
            c,
            gamma,
            seed,
            &out_dir,
            surf_threshold,
        ),
        Command::Report { inputs, format, out } => cmd_report(&inputs, format, out.as_deref()),
    }
}

fn cmd_synth(out: &Path, per_class: usize, seed: u64, size: usize) -> Result<()> {
    let mut cfg = SynthConfig::new(per_class, seed.wrapping_add(2));
    cfg.size = size;
    let manifest = generate(&cfg, out).context("corpus generation failed")?;
    println!(
        "wrote {} images and {} to {}",
        manifest.entries.len(),
        "manifest.csv",
        out.display()
    );
    Ok(())
}

fn cmd_audit(manifest_path: &Path) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let dist = audit_distribution(&manifest)?;
    let sources = dist.sources();
    print!("| Class    |");
    for s in &sources {
        print!(" {s} |");
    }
    println!(" All |");
    for class in ClassLabel::ALL {
        print!("| {:<8} |", class.name());
        for s in &sources {
            let n = dist.source_count(s, class);
            if n == 0 {
                print!(" - |");
            } else {
                print!(" {n} |");
            }
        }
        println!(" {} |", dist.count(class));
    }
    println!("total: {}", dist.total());
    Ok(())
}

fn parse_backend(spec: Option<&str>) -> Result<MockBackend> {
    let spec = spec.ok_or_else(|| anyhow!("the deep pipeline requires --backend"))?;
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["mock", seed, dim] => {
            let seed: u64 = seed.parse().context("bad seed in backend spec")?;
            let dim: usize = dim.parse().context("bad dim in backend spec")?;
            if dim == 0 {
                bail!("backend dim must be >= 1");
            }
            Ok(MockBackend::new(seed, dim))
        }
        _ => bail!("unknown backend spec `{spec}` (expected mock:SEED:DIM)"),
    }
}

/// FNV-1a over the cache key material.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

fn cached_deep_features(
    manifest_path: &Path,
    manifest: &retina_bench::dataset::DatasetManifest,
    backend: &MockBackend,
) -> Result<Vec<FeatureRecord>> {
    use retina_bench::deepfeat::ExtractorBackend;
    let cache_dir = std::env::var_os("RETINA_BENCH_CACHE").map(PathBuf::from);
    let cache_path = cache_dir.as_ref().map(|dir| {
        let manifest_text = fs::read(manifest_path).unwrap_or_default();
        let mut key = backend.model_id().as_bytes().to_vec();
        key.extend_from_slice(&manifest_text);
        dir.join(format!("feat_{:016x}.rfv", fnv1a(&key)))
    });
    if let Some(path) = &cache_path {
        if path.exists() {
            return Ok(read_features(path)?);
        }
    }
    let vectors = deep_features_for_manifest(manifest, backend)?;
    let records: Vec<FeatureRecord> = manifest
        .entries
        .iter()
        .zip(vectors)
        .map(|(e, v)| FeatureRecord { label: e.label, values: v.values })
        .collect();
    if let Some(path) = &cache_path {
        fs::create_dir_all(path.parent().unwrap())?;
        write_features(path, &records)?;
    }
    Ok(records)
}

fn cmd_extract(
    manifest_path: &Path,
    pipeline: PipelineKind,
    words: usize,
    backend: Option<&str>,
    out: &Path,
    seed: u64,
    surf_threshold: f64,
) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let records = match pipeline {
        PipelineKind::Bovw => {
            let sets = descriptors_for_manifest(&manifest, surf_threshold)?;
            let all: Vec<Vec<f32>> = sets
                .iter()
                .flat_map(|s| s.descriptors.iter().map(|d| d.values.clone()))
                .collect();
            let cb = kmeans_fit(&all, &CodebookConfig::new(words, seed.wrapping_add(1)))?;
            manifest
                .entries
                .iter()
                .zip(sets.iter())
                .map(|(e, s)| {
                    let fv = encode_histogram(s, &cb)?;
                    if fv.is_zero() {
                        eprintln!("warning: zero histogram for {}", e.path.display());
                    }
                    Ok(FeatureRecord { label: e.label, values: fv.values })
                })
                .collect::<Result<Vec<_>>>()?
        }
        PipelineKind::Deep => {
            let backend = parse_backend(backend)?;
            cached_deep_features(manifest_path, &manifest, &backend)?
        }
    };
    write_features(out, &records)?;
    println!("wrote {} feature records to {}", records.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    manifest_path: &Path,
    pipeline: PipelineKind,
    words: &[usize],
    backend: Option<&str>,
    folds: usize,
    c: f64,
    gamma: Option<f64>,
    seed: u64,
    out_dir: &Path,
    surf_threshold: f64,
) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let labels = manifest_labels(&manifest);
    fs::create_dir_all(out_dir)?;
    let mut reports = Vec::new();
    match pipeline {
        PipelineKind::Bovw => {
            if words.is_empty() {
                bail!("--words must name at least one codebook size");
            }
            let sets = descriptors_for_manifest(&manifest, surf_threshold)?;
            for &w in words {
                let mut svm = SvmConfig::new(Kernel::Linear);
                svm.c = c;
                let p = BovwCvPipeline {
                    descriptor_sets: sets.clone(),
                    words: w,
                    kmeans_seed: seed.wrapping_add(1),
                    svm,
                };
                let report = run_cv(&p, &labels, folds, seed, "bovw", &w.to_string())?;
                println!(
                    "bovw W={w}: overall accuracy {:.2} ± {:.2}",
                    report.mean_overall, report.std_overall
                );
                reports.push(report);
            }
        }
        PipelineKind::Deep => {
            let backend = parse_backend(backend)?;
            use retina_bench::deepfeat::ExtractorBackend;
            let dim = backend.output_dim();
            let param = backend.model_id().to_string();
            let records = cached_deep_features(manifest_path, &manifest, &backend)?;
            let mut svm = SvmConfig::new(Kernel::Rbf {
                gamma: gamma.unwrap_or(1.0 / dim as f64),
            });
            svm.c = c;
            let p = PrecomputedCvPipeline {
                vectors: records.into_iter().map(|r| r.values).collect(),
                svm,
            };
            let report = run_cv(&p, &labels, folds, seed, "deep", &param)?;
            println!(
                "deep {param}: overall accuracy {:.2} ± {:.2}",
                report.mean_overall, report.std_overall
            );
            reports.push(report);
        }
    }
    for report in &reports {
        let name = experiment_name(report);
        let single = std::slice::from_ref(report);
        fs::write(out_dir.join(format!("{name}.md")), render_report(single, ReportFormat::Markdown)?)?;
        fs::write(out_dir.join(format!("{name}.csv")), render_report(single, ReportFormat::Csv)?)?;
    }
    if reports.len() > 1 {
        fs::write(
            out_dir.join("combined.md"),
            render_report(&reports, ReportFormat::Markdown)?,
        )?;
    }
    println!("reports written to {}", out_dir.display());
    Ok(())
}

fn experiment_name(report: &CvReport) -> String {
    let param: String = report
        .param
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() { ch } else { '_' })
        .collect();
    format!("{}_{}_seed{}", report.pipeline, param, report.seed)
}

/// Rebuild per-fold metrics from an eval CSV. The per-fold overall accuracy
/// is recovered from the identity `overall = (sum of class accs - 100) / 2`,
/// which holds exactly for one-vs-rest accuracies of a 3-class matrix.
fn parse_eval_csv(path: &Path) -> Result<Vec<CvReport>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "pipeline,param,class,acc,sens,spec,fold" {
        bail!("{} is not an eval CSV (bad header)", path.display());
    }
    // (pipeline, param) -> fold -> class -> stats
    let mut order: Vec<(String, String)> = Vec::new();
    let mut data: std::collections::HashMap<(String, String), Vec<(usize, ClassLabel, ClassStats)>> =
        std::collections::HashMap::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            bail!("{}: malformed row {}", path.display(), i + 2);
        }
        if f[6] == "mean" {
            continue;
        }
        let key = (f[0].to_string(), f[1].to_string());
        if !order.contains(&key) {
            order.push(key.clone());
        }
        let class = ClassLabel::parse(f[2])
            .ok_or_else(|| anyhow!("{}: unknown class `{}`", path.display(), f[2]))?;
        let stats = ClassStats {
            acc: f[3].parse()?,
            sens: f[4].parse()?,
            spec: f[5].parse()?,
            sens_defined: true,
        };
        let fold: usize = f[6].parse()?;
        data.entry(key).or_default().push((fold, class, stats));
    }
    let mut reports = Vec::new();
    for key in order {
        let rows = &data[&key];
        let max_fold = rows.iter().map(|(f, _, _)| *f).max().unwrap_or(0);
        let mut folds = Vec::new();
        for fold in 0..=max_fold {
            let mut per_class =
                [ClassStats { acc: 0.0, sens: 0.0, spec: 0.0, sens_defined: true }; 3];
            for (f, class, stats) in rows {
                if *f == fold {
                    per_class[class.ordinal()] = *stats;
                }
            }
            let acc_sum: f64 = per_class.iter().map(|s| s.acc).sum();
            folds.push(FoldMetrics {
                fold,
                confusion: ConfusionMatrix::default(),
                metrics: ClassMetrics { per_class },
                overall_accuracy: (acc_sum - 100.0) / 2.0,
            });
        }
        reports.push(CvReport::from_folds(&key.0, &key.1, 0, folds));
    }
    Ok(reports)
}

fn cmd_report(inputs: &[PathBuf], format: OutputFormat, out: Option<&Path>) -> Result<()> {
    let mut reports = Vec::new();
    for path in inputs {
        reports.extend(parse_eval_csv(path)?);
    }
    let format = match format {
        OutputFormat::Markdown => ReportFormat::Markdown,
        OutputFormat::Csv => ReportFormat::Csv,
    };
    let text = render_report(&reports, format)?;
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_spec_parsing() {
        use retina_bench::deepfeat::ExtractorBackend;
        let b = parse_backend(Some("mock:42:1024")).unwrap();
        assert_eq!(b.output_dim(), 1024);
        assert!(parse_backend(Some("onnx:foo")).is_err());
        assert!(parse_backend(None).is_err());
    }

    #[test]
    fn experiment_name_sanitizes_param() {
        let r = CvReport::from_summary("deep", "mock:42:1024", [[0.0; 3]; 3], 0.0, 0.0);
        assert_eq!(experiment_name(&r), "deep_mock_42_1024_seed0");
    }
}
