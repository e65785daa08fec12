//! Structural integrity check and EPUB reassembly.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::Severity;
use crate::ocf::{self, ArchiveEntry, Compression, EpubArchive, OcfError};
use crate::opf::{self, OpfError, PackageDocument};
use crate::path;
use crate::xhtml;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IntegrityCode {
    ManifestDanglingHref,
    SpineDanglingIdref,
    UnmanifestedContent,
    MimetypeViolation,
    MalformedModifiedDoc,
}

impl IntegrityCode {
    pub fn severity(self) -> Severity {
        match self {
            IntegrityCode::UnmanifestedContent => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityFinding {
    pub code: IntegrityCode,
    pub severity: Severity,
    pub path: String,
}

impl IntegrityFinding {
    fn new(code: IntegrityCode, path: impl Into<String>) -> Self {
        Self {
            code,
            severity: code.severity(),
            path: path.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("integrity check failed: {}", summary(.0))]
    IntegrityErrors(Vec<IntegrityFinding>),
    #[error(transparent)]
    Ocf(#[from] OcfError),
    #[error(transparent)]
    Opf(#[from] OpfError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn summary(findings: &[IntegrityFinding]) -> String {
    findings
        .iter()
        .map(|f| format!("{:?} at {}", f.code, f.path))
        .collect::<Vec<_>>()
        .join(", ")
}

fn is_content_path(p: &str) -> bool {
    matches!(
        path::extension(p).as_deref(),
        Some("xhtml" | "html" | "htm" | "png" | "jpg" | "jpeg" | "gif" | "svg" | "webp")
    )
}

fn is_markup_path(p: &str) -> bool {
    matches!(path::extension(p).as_deref(), Some("xhtml" | "html" | "htm" | "svg"))
}

/// Structural findings for the archive as it stands. Only entries flagged
/// as modified are re-checked for well-formedness.
pub fn integrity_check(archive: &EpubArchive, pkg: &PackageDocument) -> Vec<IntegrityFinding> {
    let mut findings = Vec::new();

    if archive.check_invariants().is_err() {
        findings.push(IntegrityFinding::new(IntegrityCode::MimetypeViolation, ocf::MIMETYPE_PATH));
    }
    for item in &pkg.manifest {
        if !path::is_external(&item.href) && !archive.contains(&item.href) {
            findings.push(IntegrityFinding::new(IntegrityCode::ManifestDanglingHref, &item.href));
        }
    }
    for s in &pkg.spine {
        if pkg.item_by_id(&s.idref).is_none() {
            findings.push(IntegrityFinding::new(IntegrityCode::SpineDanglingIdref, &s.idref));
        }
    }
    for e in &archive.entries {
        if e.is_dir() || e.path.starts_with("META-INF/") {
            continue;
        }
        if is_content_path(&e.path) && pkg.item_by_href(&e.path).is_none() {
            findings.push(IntegrityFinding::new(IntegrityCode::UnmanifestedContent, &e.path));
        }
        let is_markup = pkg.item_by_href(&e.path).is_some_and(|i| i.is_xhtml()) || is_markup_path(&e.path);
        if e.modified && is_markup && !xhtml::is_well_formed(&e.data) {
            findings.push(IntegrityFinding::new(IntegrityCode::MalformedModifiedDoc, &e.path));
        }
    }
    findings
}

pub fn has_errors(findings: &[IntegrityFinding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

/// Applies `modified_docs` and the package document to a copy of the
/// archive, checks it and serializes it. The OPF entry is rewritten only
/// when `pkg` differs from what the archive already holds.
pub fn rebuild(
    archive: &EpubArchive,
    pkg: &PackageDocument,
    modified_docs: &[ArchiveEntry],
) -> Result<Vec<u8>, ReconstructError> {
    let mut out = archive.clone();
    for doc in modified_docs {
        let entry = match archive.get(&doc.path) {
            Some(orig) => orig.with_data(doc.data.clone()),
            None => {
                let mut e = ArchiveEntry::new(doc.path.clone(), doc.data.clone(), Compression::Deflated);
                e.modified = true;
                e
            }
        };
        if !out.replace(entry.clone()) {
            out.entries.push(entry);
        }
    }
    let findings = integrity_check(&out, pkg);
    if has_errors(&findings) {
        return Err(ReconstructError::IntegrityErrors(
            findings.into_iter().filter(|f| f.severity == Severity::Error).collect(),
        ));
    }
    let unchanged = opf::read_package(archive).is_ok_and(|orig| &orig == pkg);
    if !unchanged {
        let bytes = opf::serialize_opf(pkg)?;
        let entry = match archive.get(&archive.rootfile_path) {
            Some(orig) => orig.with_data(bytes),
            None => return Err(OpfError::MissingPackage(archive.rootfile_path.clone()).into()),
        };
        out.replace(entry);
    }
    Ok(ocf::write_epub(&out)?)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(target: &Path, bytes: &[u8]) -> Result<(), ReconstructError> {
    let io = |source| ReconstructError::Io {
        path: target.display().to_string(),
        source,
    };
    let dir = target.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(target).map_err(|e| io(e.error))?;
    Ok(())
}
