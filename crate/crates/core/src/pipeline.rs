//! Batch orchestration: audit, repair and validate over files and
//! directories.
//!
//! Repair runs five stages per file, in order:
//!
//! 1. `preprocess`: open the container, parse the package, audit.
//! 2. `generate`: caption every image lacking adequate alt text.
//! 3. `enrich`: fill package metadata.
//! 4. `reconstruct`: integrity check, rebuild, atomic write.
//! 5. `validate`: re-audit the rebuilt container.
//!
//! Files are independent and processed on a fixed pool of `jobs` threads.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{self, AuditReport};
use crate::backend::{
    BackendError, BackendLanguage, CaptionBackend, CaptionRequest, RemoteBackend, RemoteConfig, StubBackend,
    DEFAULT_MAX_LENGTH, MEDIA_TYPES,
};
use crate::bcp47;
use crate::content::{self, ImageOccurrence};
use crate::enrichment::{self, AppliedFix, EnrichOptions};
use crate::fixtures::media_type_for;
use crate::lang::{self, EnsembleConfig};
use crate::metrics::{self, BleuOptions, ErrorReduction, MetricReport};
use crate::ocf::{self, ArchiveEntry, EpubArchive};
use crate::opf::{self, PackageDocument};
use crate::path;
use crate::reconstruct;
use crate::xhtml;

/// Report written next to the repaired files.
pub const REPORT_FILE: &str = "altgen-report.json";
/// When set, elapsed times are reported as zero so reports are reproducible.
pub const ENV_EPOCH: &str = "ALTGEN_EPOCH";
/// Existing alt text shorter than this is rewritten.
pub const MIN_ADEQUATE_ALT: usize = 5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read config {path}: {reason}")]
    Config { path: String, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cannot read references {path}: {reason}")]
    References { path: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum BackendChoice {
    Stub,
    Remote(String),
}

impl From<String> for BackendChoice {
    fn from(s: String) -> Self {
        if s.eq_ignore_ascii_case("stub") {
            BackendChoice::Stub
        } else {
            BackendChoice::Remote(s)
        }
    }
}

impl From<BackendChoice> for String {
    fn from(b: BackendChoice) -> Self {
        match b {
            BackendChoice::Stub => "stub".into(),
            BackendChoice::Remote(url) => url,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub backend: BackendChoice,
    pub jobs: usize,
    pub max_alt_length: usize,
    pub bleu_max_n: usize,
    pub smoothing: bool,
    pub output_dir: Option<PathBuf>,
    pub report_format: ReportFormat,
    /// Fail a file when any image cannot be captioned.
    pub strict: bool,
    /// Seconds to wait before each retry of an unreachable backend.
    pub retry_delays: Vec<f64>,
    pub max_in_flight: usize,
    pub timeout_seconds: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            backend: BackendChoice::Stub,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            max_alt_length: DEFAULT_MAX_LENGTH,
            bleu_max_n: 4,
            smoothing: false,
            output_dir: None,
            report_format: ReportFormat::Json,
            strict: false,
            retry_delays: vec![0.5, 2.0],
            max_in_flight: 4,
            timeout_seconds: 60.0,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let err = |reason: String| PipelineError::Config {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.into()));
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        if let BackendChoice::Remote(url) = &self.backend {
            if url.trim().is_empty() {
                return bad("remote backend needs a URL");
            }
        }
        if !(crate::backend::MIN_MAX_LENGTH..=crate::backend::MAX_MAX_LENGTH).contains(&self.max_alt_length) {
            return bad("max_alt_length must be within [20, 1000]");
        }
        if self.bleu_max_n == 0 {
            return bad("bleu_max_n must be at least 1");
        }
        if self.retry_delays.iter().any(|d| !d.is_finite() || *d < 0.0) || !self.timeout_seconds.is_finite() || self.timeout_seconds <= 0.0 {
            return bad("delays and timeout must be non-negative numbers");
        }
        Ok(())
    }

    pub fn bleu_options(&self) -> BleuOptions {
        BleuOptions {
            max_n: self.bleu_max_n,
            smoothing: self.smoothing,
        }
    }

    pub fn make_backend(&self) -> Result<Box<dyn CaptionBackend>, PipelineError> {
        match &self.backend {
            BackendChoice::Stub => Ok(Box::new(StubBackend)),
            BackendChoice::Remote(url) => {
                let mut rc = RemoteConfig::new(url);
                rc.token = std::env::var(crate::backend::ENV_TOKEN).ok().filter(|t| !t.is_empty());
                rc.retry_delays = self.retry_delays.iter().map(|&s| Duration::from_secs_f64(s)).collect();
                rc.max_in_flight = self.max_in_flight;
                rc.timeout = Duration::from_secs_f64(self.timeout_seconds);
                Ok(Box::new(RemoteBackend::new(rc)?))
            }
        }
    }
}

/// One EPUB to process and where its output goes, relative to the
/// output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputFile {
    pub path: PathBuf,
    pub relative: PathBuf,
}

fn is_epub(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("epub"))
}

/// Expands files and directories into EPUB inputs. Directories are walked
/// recursively; outputs keep their path relative to the directory given.
/// Paths that do not exist are returned separately.
pub fn collect_inputs(paths: &[PathBuf]) -> (Vec<InputFile>, Vec<PathBuf>) {
    let mut inputs = Vec::new();
    let mut missing = Vec::new();
    for root in paths {
        if root.is_dir() {
            let mut found: Vec<InputFile> = walkdir::WalkDir::new(root)
                .follow_links(true)
                .into_iter()
                .filter_map(Result::ok)
                .filter(|e| e.file_type().is_file() && is_epub(e.path()))
                .map(|e| InputFile {
                    relative: e.path().strip_prefix(root).unwrap_or(e.path()).to_path_buf(),
                    path: e.path().to_path_buf(),
                })
                .collect();
            found.sort_by(|a, b| a.path.cmp(&b.path));
            inputs.extend(found);
        } else if root.is_file() {
            inputs.push(InputFile {
                relative: PathBuf::from(root.file_name().unwrap_or(root.as_os_str())),
                path: root.clone(),
            });
        } else {
            missing.push(root.clone());
        }
    }
    inputs.sort_by(|a, b| a.path.cmp(&b.path));
    inputs.dedup_by(|a, b| a.path == b.path);
    (inputs, missing)
}

fn display(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

fn frozen_clock() -> bool {
    std::env::var_os(ENV_EPOCH).is_some()
}

fn elapsed(start: Instant) -> f64 {
    if frozen_clock() {
        0.0
    } else {
        start.elapsed().as_secs_f64()
    }
}

fn build_pool(jobs: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))
}

fn load(bytes: &[u8]) -> Result<(EpubArchive, PackageDocument), String> {
    let archive = ocf::open_epub(bytes).map_err(|e| e.to_string())?;
    let pkg = opf::read_package(&archive).map_err(|e| e.to_string())?;
    Ok((archive, pkg))
}

// ---------------------------------------------------------------- audit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFileResult {
    pub input_path: String,
    pub report: Option<AuditReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditAggregate {
    pub n_files: usize,
    pub failed_files: usize,
    pub error_count: usize,
    pub warning_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRun {
    pub files: Vec<AuditFileResult>,
    pub aggregate: AuditAggregate,
}

impl AuditRun {
    /// 0 when clean, 1 when errors remain, 2 when a file could not be read.
    pub fn exit_code(&self) -> i32 {
        if self.aggregate.failed_files > 0 {
            2
        } else if self.aggregate.error_count > 0 {
            1
        } else {
            0
        }
    }
}

pub fn audit_file(path: &Path) -> Result<AuditReport, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    let (archive, pkg) = load(&bytes)?;
    Ok(audit::audit(&archive, &pkg))
}

pub fn run_audit(paths: &[PathBuf], config: &PipelineConfig) -> Result<AuditRun, PipelineError> {
    config.validate()?;
    let (inputs, missing) = collect_inputs(paths);
    let pool = build_pool(config.jobs)?;
    let mut files: Vec<AuditFileResult> = pool.install(|| {
        inputs
            .par_iter()
            .map(|input| {
                let (report, error) = match audit_file(&input.path) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e)),
                };
                AuditFileResult {
                    input_path: display(&input.path),
                    report,
                    error,
                }
            })
            .collect()
    });
    files.extend(missing.iter().map(|p| AuditFileResult {
        input_path: display(p),
        report: None,
        error: Some("no such file or directory".into()),
    }));
    files.sort_by(|a, b| a.input_path.cmp(&b.input_path));
    let mut agg = AuditAggregate {
        n_files: files.len(),
        ..Default::default()
    };
    for f in &files {
        match &f.report {
            Some(r) => {
                agg.error_count += r.error_count;
                agg.warning_count += r.warning_count;
            }
            None => agg.failed_files += 1,
        }
    }
    Ok(AuditRun { files, aggregate: agg })
}

// ---------------------------------------------------------------- repair

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FileStatus {
    Repaired,
    CleanSkipped,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrittenAlt {
    pub doc: String,
    pub index: usize,
    pub src: String,
    pub old: Option<String>,
    pub alt: String,
    pub confidence: f64,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub doc: String,
    pub index: usize,
    pub src: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileResult {
    pub input_path: String,
    /// Relative to the output directory.
    pub output_path: Option<String>,
    pub status: FileStatus,
    pub pre_report: Option<AuditReport>,
    pub post_report: Option<AuditReport>,
    pub fixes: Vec<AppliedFix>,
    pub alts_written: usize,
    pub alts_skipped: usize,
    pub alts: Vec<WrittenAlt>,
    pub skipped: Vec<SkippedImage>,
    /// Stages completed, in order.
    pub stages: Vec<String>,
    pub elapsed_seconds: f64,
}

impl FileResult {
    fn new(input: &Path) -> Self {
        Self {
            input_path: display(input),
            output_path: None,
            status: FileStatus::Failed(String::new()),
            pre_report: None,
            post_report: None,
            fixes: Vec::new(),
            alts_written: 0,
            alts_skipped: 0,
            alts: Vec::new(),
            skipped: Vec::new(),
            stages: Vec::new(),
            elapsed_seconds: 0.0,
        }
    }

    /// Error count after the run: the post-repair audit when there is one,
    /// otherwise the original audit.
    pub fn residual_errors(&self) -> usize {
        self.post_report
            .as_ref()
            .or(self.pre_report.as_ref())
            .map_or(0, |r| r.error_count)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub pre_errors: usize,
    pub post_errors: usize,
    pub err_percent: f64,
    pub seconds_per_file: f64,
    pub no_baseline: bool,
    pub n_files: usize,
    pub repaired: usize,
    pub clean_skipped: usize,
    pub failed: usize,
    pub alts_written: usize,
    pub alts_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairRun {
    pub files: Vec<FileResult>,
    pub aggregate: Aggregate,
}

impl RepairRun {
    pub fn from_files(mut files: Vec<FileResult>) -> Self {
        files.sort_by(|a, b| a.input_path.cmp(&b.input_path));
        let pre: usize = files.iter().filter_map(|f| f.pre_report.as_ref()).map(|r| r.error_count).sum();
        let post: usize = files.iter().filter(|f| f.pre_report.is_some()).map(FileResult::residual_errors).sum();
        let ErrorReduction { percent, no_baseline } = metrics::error_reduction_rate(pre, post);
        let timings: Vec<f64> = files.iter().map(|f| f.elapsed_seconds).collect();
        let count = |s: fn(&FileStatus) -> bool| files.iter().filter(|f| s(&f.status)).count();
        let aggregate = Aggregate {
            pre_errors: pre,
            post_errors: post,
            err_percent: percent,
            seconds_per_file: metrics::mean(&timings).unwrap_or(0.0),
            no_baseline,
            n_files: files.len(),
            repaired: count(|s| *s == FileStatus::Repaired),
            clean_skipped: count(|s| *s == FileStatus::CleanSkipped),
            failed: count(|s| matches!(s, FileStatus::Failed(_))),
            alts_written: files.iter().map(|f| f.alts_written).sum(),
            alts_skipped: files.iter().map(|f| f.alts_skipped).sum(),
        };
        Self { files, aggregate }
    }

    /// 0 when every file ends clean, 1 when errors remain, 2 when a file
    /// failed.
    pub fn exit_code(&self) -> i32 {
        if self.aggregate.failed > 0 {
            2
        } else if self.aggregate.post_errors > 0 {
            1
        } else {
            0
        }
    }
}

/// Alt text that should be regenerated: absent, too short, or just the
/// image's file name.
pub fn needs_alt(occ: &ImageOccurrence) -> bool {
    if occ.decorative {
        return false;
    }
    let Some(alt) = occ.existing_alt.as_deref() else {
        return true;
    };
    let alt = alt.trim();
    let file = occ.src.rsplit('/').next().unwrap_or("");
    alt.chars().count() < MIN_ADEQUATE_ALT
        || alt.eq_ignore_ascii_case(file)
        || alt.eq_ignore_ascii_case(path::file_stem(&occ.src))
}

struct Generated {
    docs: Vec<ArchiveEntry>,
    alts: Vec<WrittenAlt>,
    skipped: Vec<SkippedImage>,
}

fn generate_alts(
    archive: &EpubArchive,
    pkg: &PackageDocument,
    backend: &dyn CaptionBackend,
    config: &PipelineConfig,
) -> Generated {
    let language = pkg
        .languages()
        .into_iter()
        .map(str::trim)
        .find(|l| bcp47::is_well_formed(l))
        .map(str::to_string);
    let mut out = Generated {
        docs: Vec::new(),
        alts: Vec::new(),
        skipped: Vec::new(),
    };
    for item in pkg.manifest.iter().filter(|i| i.is_xhtml()) {
        let Some(original) = archive.get(&item.href) else {
            continue;
        };
        let Ok(images) = content::find_images(original, &item.href) else {
            continue;
        };
        let targets: Vec<ImageOccurrence> = images.into_iter().filter(needs_alt).collect();
        if targets.is_empty() {
            continue;
        }
        let skip = |occ: &ImageOccurrence, reason: String| SkippedImage {
            doc: occ.doc_path.clone(),
            index: occ.element_index,
            src: occ.src.clone(),
            reason,
        };
        if !xhtml::is_well_formed(&original.data) {
            out.skipped
                .extend(targets.iter().map(|o| skip(o, "document is not well-formed XML".into())));
            continue;
        }
        let mut doc = original.clone();
        for occ in &targets {
            let image = if occ.is_external() { None } else { archive.get(&occ.src) };
            let Some(image) = image else {
                out.skipped.push(skip(occ, "image resource is not in the container".into()));
                continue;
            };
            let media_type = pkg
                .item_by_href(&occ.src)
                .map(|i| i.media_type.clone())
                .unwrap_or_else(|| media_type_for(&occ.src).to_string());
            if !MEDIA_TYPES.contains(&media_type.as_str()) {
                out.skipped.push(skip(occ, format!("unsupported media type {media_type}")));
                continue;
            }
            let context = match content::extract_context(&doc, occ, pkg) {
                Ok(c) => c,
                Err(e) => {
                    out.skipped.push(skip(occ, e.to_string()));
                    continue;
                }
            };
            let mut request = CaptionRequest::new(&occ.src, image.data.clone(), &media_type, context);
            request.max_length = config.max_alt_length;
            request.language = language.clone();
            let candidate = match backend.generate_alt(&request) {
                Ok(c) => c,
                Err(e) => {
                    out.skipped.push(skip(occ, e.to_string()));
                    continue;
                }
            };
            match content::set_alt_text(&doc, occ, &candidate.alt_text) {
                Ok(updated) => {
                    doc = updated;
                    out.alts.push(WrittenAlt {
                        doc: occ.doc_path.clone(),
                        index: occ.element_index,
                        src: occ.src.clone(),
                        old: occ.existing_alt.clone(),
                        alt: candidate.alt_text,
                        confidence: candidate.confidence,
                        backend_id: candidate.backend_id,
                    });
                }
                Err(e) => out.skipped.push(skip(occ, e.to_string())),
            }
        }
        if doc.data != original.data {
            out.docs.push(doc);
        }
    }
    out
}

/// Runs the five repair stages on one file and writes the output.
pub fn repair_file(
    input: &InputFile,
    output_dir: &Path,
    backend: &dyn CaptionBackend,
    config: &PipelineConfig,
) -> FileResult {
    let start = Instant::now();
    let mut result = FileResult::new(&input.path);
    let target = output_dir.join(&input.relative);
    let outcome = repair_stages(input, &target, backend, config, &mut result);
    result.status = match outcome {
        Ok(status) => status,
        Err(reason) => FileStatus::Failed(reason),
    };
    if !matches!(result.status, FileStatus::Failed(_)) {
        result.output_path = Some(display(&input.relative));
    }
    result.elapsed_seconds = elapsed(start);
    result
}

fn repair_stages(
    input: &InputFile,
    target: &Path,
    backend: &dyn CaptionBackend,
    config: &PipelineConfig,
    result: &mut FileResult,
) -> Result<FileStatus, String> {
    // 1. Preprocess.
    let bytes = std::fs::read(&input.path).map_err(|e| e.to_string())?;
    let (archive, pkg) = load(&bytes)?;
    let pre = audit::audit(&archive, &pkg);
    let clean = pre.error_count == 0;
    result.pre_report = Some(pre.clone());
    result.stages.push("preprocess".into());
    if clean {
        reconstruct::write_atomic(target, &bytes).map_err(|e| e.to_string())?;
        return Ok(FileStatus::CleanSkipped);
    }

    // 2. Generate.
    let generated = generate_alts(&archive, &pkg, backend, config);
    result.alts_written = generated.alts.len();
    result.alts_skipped = generated.skipped.len();
    result.alts = generated.alts;
    result.skipped = generated.skipped;
    result.stages.push("generate".into());
    if config.strict && result.alts_skipped > 0 {
        return Err(format!("{} image(s) could not be captioned", result.alts_skipped));
    }

    // 3. Enrich.
    let remote = BackendLanguage(backend);
    let ensemble = EnsembleConfig {
        profiles: lang::builtin_profiles(),
        remote: Some(&remote),
    };
    let detector = |text: &str| lang::detect_language(text, &ensemble);
    let stem = input.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let (enriched, fixes) = enrichment::enrich_metadata(
        &pkg,
        &archive,
        &detector,
        &EnrichOptions {
            file_stem: stem,
            alt_repair: true,
        },
    );
    result.fixes = fixes;
    result.stages.push("enrich".into());

    // 4. Reconstruct.
    let rebuilt = reconstruct::rebuild(&archive, &enriched, &generated.docs).map_err(|e| e.to_string())?;
    result.stages.push("reconstruct".into());

    // 5. Validate.
    let (out_archive, out_pkg) = load(&rebuilt).map_err(|e| format!("rebuilt file does not reopen: {e}"))?;
    let post = audit::audit(&out_archive, &out_pkg);
    if post.error_count > pre.error_count {
        return Err(format!(
            "repair increased errors from {} to {}",
            pre.error_count, post.error_count
        ));
    }
    result.post_report = Some(post);
    reconstruct::write_atomic(target, &rebuilt).map_err(|e| e.to_string())?;
    result.stages.push("validate".into());
    Ok(FileStatus::Repaired)
}

pub fn run_repair(
    paths: &[PathBuf],
    config: &PipelineConfig,
    backend: &dyn CaptionBackend,
) -> Result<RepairRun, PipelineError> {
    config.validate()?;
    let output_dir = config
        .output_dir
        .clone()
        .ok_or_else(|| PipelineError::InvalidConfig("an output directory is required".into()))?;
    std::fs::create_dir_all(&output_dir).map_err(|source| PipelineError::Io {
        path: display(&output_dir),
        source,
    })?;
    let (inputs, missing) = collect_inputs(paths);

    let mut seen: HashMap<PathBuf, usize> = HashMap::new();
    let (unique, clashes): (Vec<&InputFile>, Vec<&InputFile>) = inputs
        .iter()
        .partition(|i| *seen.entry(i.relative.clone()).and_modify(|n| *n += 1).or_insert(1) == 1);

    let pool = build_pool(config.jobs)?;
    let mut files: Vec<FileResult> = pool.install(|| {
        unique
            .par_iter()
            .map(|input| repair_file(input, &output_dir, backend, config))
            .collect()
    });
    for input in clashes {
        let mut r = FileResult::new(&input.path);
        r.status = FileStatus::Failed(format!("output path {} is already used", display(&input.relative)));
        files.push(r);
    }
    for p in missing {
        let mut r = FileResult::new(&p);
        r.status = FileStatus::Failed("no such file or directory".into());
        files.push(r);
    }
    let run = RepairRun::from_files(files);
    let report = serde_json::to_vec_pretty(&run).expect("report serializes");
    let report_path = output_dir.join(REPORT_FILE);
    reconstruct::write_atomic(&report_path, &report).map_err(|e| PipelineError::Io {
        path: display(&report_path),
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(run)
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub epub: String,
    pub doc: String,
    pub index: usize,
    pub alt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub epub: String,
    pub doc: String,
    pub index: usize,
    pub candidate: String,
    pub reference: String,
    pub cosine: Option<f64>,
    pub bleu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingReference {
    pub epub: String,
    pub doc: String,
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateRun {
    pub metrics: MetricReport,
    pub pre_errors: Option<usize>,
    pub post_errors: Option<usize>,
    pub missing_references: usize,
    pub missing: Vec<MissingReference>,
    pub pairs: Vec<PairResult>,
}

impl ValidateRun {
    /// 0 unless nothing could be scored.
    pub fn exit_code(&self) -> i32 {
        if self.metrics.n_pairs == 0 {
            1
        } else {
            0
        }
    }
}

pub fn read_references(path: &Path) -> Result<Vec<ReferenceEntry>, PipelineError> {
    let err = |reason: String| PipelineError::References {
        path: display(path),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}

fn written_alt(archive: &EpubArchive, doc: &str, index: usize) -> Result<String, String> {
    let entry = archive.get(doc).ok_or("document not in container")?;
    let images = content::find_images(entry, doc).map_err(|e| e.to_string())?;
    let occ = images.get(index).ok_or("no image at this index")?;
    occ.existing_alt
        .clone()
        .filter(|a| !a.trim().is_empty())
        .ok_or_else(|| "image has no alt text".into())
}

pub fn run_validate(
    repaired_dir: &Path,
    references: &Path,
    config: &PipelineConfig,
    backend: &dyn CaptionBackend,
) -> Result<ValidateRun, PipelineError> {
    config.validate()?;
    let refs = read_references(references)?;
    let mut archives: HashMap<String, Result<EpubArchive, String>> = HashMap::new();
    let mut candidates = Vec::new();
    let mut missing = Vec::new();
    for r in &refs {
        let archive = archives.entry(r.epub.clone()).or_insert_with(|| {
            let p = repaired_dir.join(&r.epub);
            let bytes = std::fs::read(&p).map_err(|e| e.to_string())?;
            ocf::open_epub(&bytes).map_err(|e| e.to_string())
        });
        match archive.as_ref().map_err(Clone::clone).and_then(|a| written_alt(a, &r.doc, r.index)) {
            Ok(alt) => candidates.push((r, alt)),
            Err(reason) => missing.push(MissingReference {
                epub: r.epub.clone(),
                doc: r.doc.clone(),
                index: r.index,
                reason,
            }),
        }
    }

    let stored: Option<RepairRun> = std::fs::read(repaired_dir.join(REPORT_FILE))
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok());
    let timings: Vec<f64> = stored
        .as_ref()
        .map(|run| run.files.iter().map(|f| f.elapsed_seconds).collect())
        .unwrap_or_default();

    let opts = config.bleu_options();
    let embed = |texts: &[String]| backend.embed_texts(texts);
    let pairs: Vec<PairResult> = candidates
        .iter()
        .map(|(r, alt)| {
            let score = metrics::score_pair(alt, &r.alt, &embed, opts);
            PairResult {
                epub: r.epub.clone(),
                doc: r.doc.clone(),
                index: r.index,
                candidate: alt.clone(),
                reference: r.alt.clone(),
                cosine: score.as_ref().map(|s| s.cosine),
                bleu: score.as_ref().map(|s| s.bleu),
            }
        })
        .collect();
    let text_pairs: Vec<(String, String)> = candidates.iter().map(|(r, alt)| (alt.clone(), r.alt.clone())).collect();
    let mut report = if text_pairs.is_empty() {
        MetricReport {
            seconds_per_file: metrics::mean(&timings),
            n_files: timings.len(),
            ..Default::default()
        }
    } else {
        metrics::corpus_metrics(&text_pairs, &embed, &timings, opts)?
    };
    if let Some(run) = &stored {
        report.err_percent = Some(run.aggregate.err_percent);
        report.no_baseline = run.aggregate.no_baseline;
    }
    Ok(ValidateRun {
        metrics: report,
        pre_errors: stored.as_ref().map(|r| r.aggregate.pre_errors),
        post_errors: stored.as_ref().map(|r| r.aggregate.post_errors),
        missing_references: missing.len(),
        missing,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::IssueCode;
    use crate::fixtures::{BookSpec, ImageSpec};

    fn write(dir: &Path, name: &str, spec: &BookSpec) -> PathBuf {
        let p = dir.join(name);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, spec.build()).unwrap();
        p
    }

    fn config(out: &Path) -> PipelineConfig {
        PipelineConfig {
            jobs: 2,
            output_dir: Some(out.to_path_buf()),
            retry_delays: vec![],
            ..Default::default()
        }
    }

    fn defective() -> BookSpec {
        let mut spec = BookSpec::clean("defective");
        spec.language = None;
        spec.chapters[0].images.push(ImageSpec::missing_alt("fox.png"));
        spec.chapters[0].images.push(ImageSpec::missing_alt("owl.png"));
        spec
    }

    #[test]
    fn adequacy_rule() {
        let occ = |alt: Option<&str>, decorative| ImageOccurrence {
            doc_path: "d.xhtml".into(),
            element_index: 0,
            src: "OEBPS/Images/photo.jpg".into(),
            existing_alt: alt.map(str::to_string),
            decorative,
        };
        assert!(needs_alt(&occ(None, false)));
        assert!(needs_alt(&occ(Some(""), false)));
        assert!(needs_alt(&occ(Some("pic"), false)));
        assert!(needs_alt(&occ(Some("PHOTO.JPG"), false)));
        assert!(needs_alt(&occ(Some("photo"), false)));
        assert!(!needs_alt(&occ(Some("A photo of a lake"), false)));
        assert!(!needs_alt(&occ(None, true)));
    }

    #[test]
    fn config_parsing() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"backend":"http://x:1","jobs":3}"#).unwrap();
        assert_eq!(cfg.backend, BackendChoice::Remote("http://x:1".into()));
        assert_eq!(cfg.jobs, 3);
        assert_eq!(cfg.max_alt_length, 250);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus":1}"#).is_err());
        let zero = PipelineConfig {
            jobs: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn repair_defective_and_clean() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in");
        let out = dir.path().join("out");
        let clean_path = write(&input, "a/clean.epub", &BookSpec::clean("clean"));
        write(&input, "b/defective.epub", &defective());
        let run = run_repair(std::slice::from_ref(&input), &config(&out), &StubBackend).unwrap();
        assert_eq!(run.files.len(), 2);
        let clean = &run.files[0];
        assert_eq!(clean.status, FileStatus::CleanSkipped);
        assert_eq!(
            std::fs::read(out.join("a/clean.epub")).unwrap(),
            std::fs::read(&clean_path).unwrap()
        );
        let fixed = &run.files[1];
        assert_eq!(fixed.status, FileStatus::Repaired);
        assert_eq!(fixed.pre_report.as_ref().unwrap().error_count, 3);
        assert_eq!(fixed.post_report.as_ref().unwrap().error_count, 0);
        assert_eq!(fixed.alts_written, 2);
        assert_eq!(fixed.stages, ["preprocess", "generate", "enrich", "reconstruct", "validate"]);
        assert_eq!(run.aggregate.pre_errors, 3);
        assert_eq!(run.aggregate.post_errors, 0);
        assert_eq!(run.aggregate.err_percent, 100.0);
        assert_eq!(run.exit_code(), 0);
        assert!(out.join(REPORT_FILE).is_file());

        let audited = run_audit(std::slice::from_ref(&out), &config(&out)).unwrap();
        assert_eq!(audited.aggregate.error_count, 0);
        assert_eq!(audited.exit_code(), 0);
    }

    #[test]
    fn unreachable_backend_degrades_or_fails_in_strict_mode() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        let dir = tempfile::tempdir().unwrap();
        let file = write(dir.path(), "d.epub", &defective());
        let mut cfg = config(&dir.path().join("out"));
        cfg.backend = BackendChoice::Remote(url);
        let backend = cfg.make_backend().unwrap();
        let run = run_repair(std::slice::from_ref(&file), &cfg, backend.as_ref()).unwrap();
        let r = &run.files[0];
        assert_eq!(r.status, FileStatus::Repaired);
        assert_eq!((r.alts_written, r.alts_skipped), (0, 2));
        assert!(r.fixes.iter().any(|f| f.field == "dc:language"));
        assert_eq!(r.post_report.as_ref().unwrap().count(IssueCode::ImgMissingAlt), 2);
        assert_eq!(run.exit_code(), 1);

        cfg.strict = true;
        let run = run_repair(&[file], &cfg, backend.as_ref()).unwrap();
        assert!(matches!(run.files[0].status, FileStatus::Failed(_)));
        assert_eq!(run.exit_code(), 2);
    }

    #[test]
    fn missing_input_is_operational_failure() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(&dir.path().join("out"));
        let run = run_audit(&[dir.path().join("nope.epub")], &cfg).unwrap();
        assert_eq!(run.exit_code(), 2);
        let run = run_repair(&[dir.path().join("nope.epub")], &cfg, &StubBackend).unwrap();
        assert_eq!(run.exit_code(), 2);
    }

    #[test]
    fn validate_against_written_alts() {
        let dir = tempfile::tempdir().unwrap();
        let file = write(dir.path(), "in/d.epub", &defective());
        let out = dir.path().join("out");
        let run = run_repair(&[file], &config(&out), &StubBackend).unwrap();
        let alts = &run.files[0].alts;
        let mut refs: Vec<ReferenceEntry> = alts
            .iter()
            .map(|a| ReferenceEntry {
                epub: "d.epub".into(),
                doc: a.doc.clone(),
                index: a.index,
                alt: a.alt.clone(),
            })
            .collect();
        refs.push(ReferenceEntry {
            epub: "d.epub".into(),
            doc: "OEBPS/Text/ch01.xhtml".into(),
            index: 99,
            alt: "nothing here".into(),
        });
        let ref_path = dir.path().join("refs.json");
        std::fs::write(&ref_path, serde_json::to_vec(&refs).unwrap()).unwrap();
        let v = run_validate(&out, &ref_path, &config(&out), &StubBackend).unwrap();
        assert_eq!(v.metrics.n_pairs, 2);
        assert!((v.metrics.cosine.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(v.metrics.bleu, Some(1.0));
        assert_eq!(v.missing_references, 1);
        assert_eq!(v.metrics.err_percent, Some(100.0));
        assert_eq!(v.pre_errors, Some(3));
        assert!(v.metrics.seconds_per_file.is_some());
    }
}
