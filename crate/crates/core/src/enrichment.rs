//! Package metadata fixes: language, accessibility metadata and title.

use serde::{Deserialize, Serialize};

use crate::bcp47;
use crate::lang::{LangError, LanguageVote};
use crate::ocf::EpubArchive;
use crate::opf::{A11yProperty, MetaEntry, MetaKind, PackageDocument};
use crate::xhtml::{normalize_ws, Document};

/// Spine documents sampled for language detection.
pub const SAMPLE_DOCS: usize = 5;
/// Characters of visible text sampled for language detection.
pub const SAMPLE_CHARS: usize = 10_000;

pub const ACCESS_MODES: [&str; 2] = ["textual", "visual"];
pub const ALT_TEXT_FEATURE: &str = "alternativeText";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixReason {
    Detected,
    Default,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedFix {
    pub field: String,
    pub old: Option<String>,
    pub new: Option<String>,
    pub reason: FixReason,
    /// The value is a placeholder a person should review.
    #[serde(default)]
    pub warning: bool,
}

impl AppliedFix {
    fn new(field: &str, old: Option<&str>, new: Option<&str>, reason: FixReason) -> Self {
        Self {
            field: field.to_string(),
            old: old.map(str::to_string),
            new: new.map(str::to_string),
            reason,
            warning: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrichOptions {
    /// Used as the title when the package has none.
    pub file_stem: String,
    /// Whether alt text repair runs on this file.
    pub alt_repair: bool,
}

/// Visible text of the first spine documents, whitespace-collapsed and
/// capped at [`SAMPLE_CHARS`].
pub fn sample_text(pkg: &PackageDocument, archive: &EpubArchive) -> String {
    let mut out = String::new();
    for item in pkg.spine_items().filter(|i| i.is_xhtml()).take(SAMPLE_DOCS) {
        let Some(doc) = archive.get(&item.href).and_then(|e| Document::parse(&e.data).ok()) else {
            continue;
        };
        let text = match doc.elements("body").next() {
            Some(body) => doc.text_content(body),
            None => doc.roots.iter().map(|&r| doc.text_content(r)).collect::<Vec<_>>().join(" "),
        };
        let text = normalize_ws(&text);
        if text.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&text);
        if out.chars().count() >= SAMPLE_CHARS {
            break;
        }
    }
    out.chars().take(SAMPLE_CHARS).collect()
}

fn meta_entry(pkg: &PackageDocument, kind: MetaKind, value: &str) -> MetaEntry {
    let mut entry = MetaEntry::new(kind, value);
    entry.name_content = matches!(entry.kind, MetaKind::SchemaAccessibility(_)) && pkg.version.starts_with('2');
    entry
}

/// Index just past the last Dublin Core element.
fn dc_insert_point(pkg: &PackageDocument) -> usize {
    pkg.metadata
        .iter()
        .rposition(|m| {
            matches!(
                &m.kind,
                MetaKind::DcTitle | MetaKind::DcLanguage | MetaKind::DcCreator | MetaKind::DcDate | MetaKind::DcIdentifier
            ) || matches!(&m.kind, MetaKind::Other(n) if n.starts_with("dc:"))
        })
        .map_or(0, |i| i + 1)
}

fn fix_language(
    pkg: &mut PackageDocument,
    archive: &EpubArchive,
    detector: &dyn Fn(&str) -> Result<LanguageVote, LangError>,
    fixes: &mut Vec<AppliedFix>,
) {
    let is_bad = |m: &MetaEntry| m.kind == MetaKind::DcLanguage && !bcp47::is_well_formed(m.value.trim());
    let has_good = pkg
        .meta(&MetaKind::DcLanguage)
        .any(|m| bcp47::is_well_formed(m.value.trim()));
    let bad: Vec<String> = pkg.metadata.iter().filter(|m| is_bad(m)).map(|m| m.value.clone()).collect();
    if has_good && bad.is_empty() {
        return;
    }
    let detected = detector(&sample_text(pkg, archive)).ok().map(|v| v.lang);
    let Some(lang) = detected else {
        let olds: Vec<Option<&str>> = if bad.is_empty() { vec![None] } else { bad.iter().map(|b| Some(b.as_str())).collect() };
        for old in olds {
            fixes.push(AppliedFix::new("dc:language", old, None, FixReason::Skipped));
        }
        return;
    };
    if bad.is_empty() {
        let at = dc_insert_point(pkg);
        pkg.metadata.insert(at, meta_entry(pkg, MetaKind::DcLanguage, &lang));
        fixes.push(AppliedFix::new("dc:language", None, Some(&lang), FixReason::Detected));
        return;
    }
    let mut present: Vec<String> = pkg
        .meta(&MetaKind::DcLanguage)
        .filter(|m| bcp47::is_well_formed(m.value.trim()))
        .map(|m| m.value.trim().to_ascii_lowercase())
        .collect();
    let mut kept = Vec::with_capacity(pkg.metadata.len());
    for mut m in std::mem::take(&mut pkg.metadata) {
        if !is_bad(&m) {
            kept.push(m);
            continue;
        }
        if present.contains(&lang) {
            fixes.push(AppliedFix::new("dc:language", Some(&m.value), None, FixReason::Detected));
            continue;
        }
        fixes.push(AppliedFix::new("dc:language", Some(&m.value), Some(&lang), FixReason::Detected));
        m.value = lang.clone();
        present.push(lang.clone());
        kept.push(m);
    }
    pkg.metadata = kept;
}

fn fix_accessibility(pkg: &mut PackageDocument, alt_repair: bool, fixes: &mut Vec<AppliedFix>) {
    let mode = MetaKind::SchemaAccessibility(A11yProperty::AccessMode);
    if pkg.has_meta(&mode) {
        return;
    }
    for value in ACCESS_MODES {
        pkg.metadata.push(meta_entry(pkg, mode.clone(), value));
        fixes.push(AppliedFix::new("schema:accessMode", None, Some(value), FixReason::Default));
    }
    let feature = MetaKind::SchemaAccessibility(A11yProperty::AccessibilityFeature);
    let has_alt_feature = pkg.meta(&feature).any(|m| m.value == ALT_TEXT_FEATURE);
    if alt_repair && !has_alt_feature {
        pkg.metadata.push(meta_entry(pkg, feature, ALT_TEXT_FEATURE));
        fixes.push(AppliedFix::new(
            "schema:accessibilityFeature",
            None,
            Some(ALT_TEXT_FEATURE),
            FixReason::Default,
        ));
    }
}

fn fix_title(pkg: &mut PackageDocument, file_stem: &str, fixes: &mut Vec<AppliedFix>) {
    if pkg.title().is_some() {
        return;
    }
    let title = if file_stem.trim().is_empty() { "Untitled" } else { file_stem.trim() };
    match pkg.metadata.iter_mut().find(|m| m.kind == MetaKind::DcTitle) {
        Some(empty) => empty.value = title.to_string(),
        None => pkg.metadata.insert(0, meta_entry(pkg, MetaKind::DcTitle, title)),
    }
    let mut fix = AppliedFix::new("dc:title", None, Some(title), FixReason::Default);
    fix.warning = true;
    fixes.push(fix);
}

/// Fills missing or malformed package metadata. Well-formed existing values
/// are never removed or rewritten; running it twice changes nothing more.
pub fn enrich_metadata(
    pkg: &PackageDocument,
    archive: &EpubArchive,
    detector: &dyn Fn(&str) -> Result<LanguageVote, LangError>,
    opts: &EnrichOptions,
) -> (PackageDocument, Vec<AppliedFix>) {
    let mut out = pkg.clone();
    let mut fixes = Vec::new();
    fix_language(&mut out, archive, detector, &mut fixes);
    fix_accessibility(&mut out, opts.alt_repair, &mut fixes);
    fix_title(&mut out, &opts.file_stem, &mut fixes);
    (out, fixes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{BookSpec, Chapter};
    use crate::lang::{detect_language, EnsembleConfig};
    use crate::opf::read_package;

    fn detector(text: &str) -> Result<LanguageVote, LangError> {
        detect_language(text, &EnsembleConfig::default())
    }

    fn opts() -> EnrichOptions {
        EnrichOptions {
            file_stem: "my-book".into(),
            alt_repair: true,
        }
    }

    fn load(spec: &BookSpec) -> (EpubArchive, PackageDocument) {
        let archive = spec.archive();
        let pkg = read_package(&archive).unwrap();
        (archive, pkg)
    }

    #[test]
    fn complete_package_is_untouched() {
        let (archive, pkg) = load(&BookSpec::clean("full"));
        let (out, fixes) = enrich_metadata(&pkg, &archive, &detector, &opts());
        assert_eq!(out, pkg);
        assert!(fixes.is_empty());
    }

    #[test]
    fn missing_language_is_detected() {
        let mut spec = BookSpec::clean("nolang");
        spec.language = None;
        let (archive, pkg) = load(&spec);
        let expected = detector(&sample_text(&pkg, &archive)).unwrap().lang;
        assert_eq!(expected, "en");
        let (out, fixes) = enrich_metadata(&pkg, &archive, &detector, &opts());
        assert_eq!(out.languages(), ["en"]);
        assert_eq!(fixes, [AppliedFix::new("dc:language", None, Some("en"), FixReason::Detected)]);
        let (again, more) = enrich_metadata(&out, &archive, &detector, &opts());
        assert_eq!(again, out);
        assert!(more.is_empty());
    }

    #[test]
    fn malformed_language_is_replaced() {
        let mut spec = BookSpec::clean("badlang");
        spec.language = Some("en_GB".into());
        let (archive, pkg) = load(&spec);
        let (out, fixes) = enrich_metadata(&pkg, &archive, &detector, &opts());
        assert_eq!(out.languages(), ["en"]);
        assert_eq!(fixes[0].old.as_deref(), Some("en_GB"));
    }

    #[test]
    fn empty_book_gets_title_and_skipped_language() {
        let mut spec = BookSpec::clean("bare");
        spec.language = None;
        spec.title = None;
        spec.accessibility_metadata = false;
        spec.chapters = vec![Chapter::new("", vec![]).with_paragraphs(&[])];
        let (archive, pkg) = load(&spec);
        let (out, fixes) = enrich_metadata(&pkg, &archive, &detector, &opts());
        assert_eq!(out.title(), Some("my-book"));
        assert!(out.languages().is_empty());
        let reasons: Vec<(&str, FixReason)> = fixes.iter().map(|f| (f.field.as_str(), f.reason)).collect();
        assert_eq!(
            reasons,
            [
                ("dc:language", FixReason::Skipped),
                ("schema:accessMode", FixReason::Default),
                ("schema:accessMode", FixReason::Default),
                ("schema:accessibilityFeature", FixReason::Default),
                ("dc:title", FixReason::Default),
            ]
        );
        assert!(fixes.iter().filter(|f| f.reason == FixReason::Skipped).all(|f| f.new.is_none()));
        assert!(fixes.last().unwrap().warning);
    }

    #[test]
    fn alt_feature_only_with_repair() {
        let mut spec = BookSpec::clean("noa11y");
        spec.accessibility_metadata = false;
        let (archive, pkg) = load(&spec);
        let o = EnrichOptions {
            alt_repair: false,
            ..opts()
        };
        let (out, fixes) = enrich_metadata(&pkg, &archive, &detector, &o);
        assert_eq!(fixes.len(), 2);
        assert!(!out.has_meta(&MetaKind::SchemaAccessibility(A11yProperty::AccessibilityFeature)));
    }
}
