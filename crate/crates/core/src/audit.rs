//! Accessibility rule engine.
//!
//! A small, fixed catalogue of checks modelled on the image and metadata
//! rules of EPUB accessibility checkers:
//!
//! | code                           | severity |
//! |--------------------------------|----------|
//! | `ImgMissingAlt`                | Error    |
//! | `ImgEmptyAltNonDecorative`     | Warning  |
//! | `MissingDcLanguage`            | Error    |
//! | `InvalidLanguageTag`           | Warning  |
//! | `MissingAccessibilityMetadata` | Warning  |
//! | `MissingDcTitle`               | Error    |
//! | `DanglingImageResource`        | Error    |
//! | `UnparseableDocument`          | Warning  |
//!
//! Error-severity counts before and after repair feed the error reduction
//! rate.

use serde::{Deserialize, Serialize};

use crate::bcp47;
use crate::content;
use crate::ocf::EpubArchive;
use crate::opf::{A11yProperty, MetaKind, PackageDocument};

/// Location used for package-level issues.
pub const PACKAGE_LOCATION: &str = "package";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueCode {
    ImgMissingAlt,
    ImgEmptyAltNonDecorative,
    MissingDcLanguage,
    InvalidLanguageTag,
    MissingAccessibilityMetadata,
    MissingDcTitle,
    DanglingImageResource,
    UnparseableDocument,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

impl IssueCode {
    pub fn severity(self) -> Severity {
        match self {
            IssueCode::ImgMissingAlt
            | IssueCode::MissingDcLanguage
            | IssueCode::DanglingImageResource
            | IssueCode::MissingDcTitle => Severity::Error,
            IssueCode::ImgEmptyAltNonDecorative
            | IssueCode::InvalidLanguageTag
            | IssueCode::MissingAccessibilityMetadata
            | IssueCode::UnparseableDocument => Severity::Warning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub doc_path: String,
    pub element_index: Option<usize>,
}

impl Location {
    pub fn package() -> Self {
        Self {
            doc_path: PACKAGE_LOCATION.into(),
            element_index: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    pub severity: Severity,
    pub location: Location,
    pub message: String,
}

impl Issue {
    pub fn new(code: IssueCode, location: Location, message: impl Into<String>) -> Self {
        Self {
            code,
            severity: code.severity(),
            location,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub issues: Vec<Issue>,
    pub error_count: usize,
    pub warning_count: usize,
    pub files_scanned: usize,
}

impl AuditReport {
    pub fn from_issues(mut issues: Vec<Issue>, files_scanned: usize) -> Self {
        issues.sort_by(|a, b| (&a.location, a.code).cmp(&(&b.location, b.code)));
        let error_count = issues.iter().filter(|i| i.severity == Severity::Error).count();
        Self {
            warning_count: issues.len() - error_count,
            error_count,
            issues,
            files_scanned,
        }
    }

    pub fn count(&self, code: IssueCode) -> usize {
        self.issues.iter().filter(|i| i.code == code).count()
    }

    pub fn has(&self, code: IssueCode, location: &Location) -> bool {
        self.issues
            .iter()
            .any(|i| i.code == code && &i.location == location)
    }
}

fn package_issues(pkg: &PackageDocument, out: &mut Vec<Issue>) {
    let languages = pkg.languages();
    if languages.iter().all(|l| l.trim().is_empty()) {
        out.push(Issue::new(
            IssueCode::MissingDcLanguage,
            Location::package(),
            "package metadata has no dc:language",
        ));
    }
    for lang in languages.iter().filter(|l| !l.trim().is_empty()) {
        if !bcp47::is_well_formed(lang.trim()) {
            out.push(Issue::new(
                IssueCode::InvalidLanguageTag,
                Location::package(),
                format!("dc:language `{lang}` is not a well-formed BCP 47 tag"),
            ));
        }
    }
    if !pkg.has_meta(&MetaKind::SchemaAccessibility(A11yProperty::AccessMode)) {
        out.push(Issue::new(
            IssueCode::MissingAccessibilityMetadata,
            Location::package(),
            "package metadata has no schema:accessMode",
        ));
    }
    if pkg.title().is_none() {
        out.push(Issue::new(
            IssueCode::MissingDcTitle,
            Location::package(),
            "package metadata has no dc:title",
        ));
    }
}

/// Runs every rule over the package and its XHTML content documents.
/// Never mutates the archive; never fails.
pub fn audit(archive: &EpubArchive, pkg: &PackageDocument) -> AuditReport {
    let mut issues = Vec::new();
    package_issues(pkg, &mut issues);

    let mut scanned = 0;
    for item in pkg.manifest.iter().filter(|i| i.is_xhtml()) {
        let Some(entry) = archive.get(&item.href) else {
            continue;
        };
        scanned += 1;
        let images = match content::find_images(entry, &item.href) {
            Ok(images) => images,
            Err(e) => {
                issues.push(Issue::new(
                    IssueCode::UnparseableDocument,
                    Location {
                        doc_path: item.href.clone(),
                        element_index: None,
                    },
                    e.to_string(),
                ));
                continue;
            }
        };
        for img in images {
            let location = Location {
                doc_path: img.doc_path.clone(),
                element_index: Some(img.element_index),
            };
            match img.existing_alt.as_deref() {
                None if !img.decorative => issues.push(Issue::new(
                    IssueCode::ImgMissingAlt,
                    location.clone(),
                    format!("image `{}` has no alt attribute", img.src),
                )),
                Some("") if !img.decorative => issues.push(Issue::new(
                    IssueCode::ImgEmptyAltNonDecorative,
                    location.clone(),
                    format!("image `{}` has empty alt but is not marked decorative", img.src),
                )),
                _ => {}
            }
            if !img.is_external() && (img.src.is_empty() || !archive.contains(&img.src)) {
                issues.push(Issue::new(
                    IssueCode::DanglingImageResource,
                    location,
                    format!("image source `{}` is not in the container", img.src),
                ));
            }
        }
    }
    AuditReport::from_issues(issues, scanned)
}
