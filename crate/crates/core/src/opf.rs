//! OPF package document model, parser and serializer.
//!
//! The model keeps every metadata element, manifest item and spine
//! reference in document order. Attributes the model does not interpret
//! are carried as `(qualified name, value)` pairs so that serializing a
//! parsed document loses no publisher data. Elements after the spine
//! (`guide`, `bindings`, `collection`) are kept as raw XML.

use std::collections::HashSet;
use std::fmt::Write as _;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::name::{Namespace, ResolveResult};
use quick_xml::NsReader;

use crate::ocf::{ArchiveEntry, EpubArchive};
use crate::path;

pub const OPF_NS: &str = "http://www.idpf.org/2007/opf";
pub const DC_NS: &str = "http://purl.org/dc/elements/1.1/";
const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OpfError {
    #[error("malformed package document: {0}")]
    MalformedXml(String),
    #[error("spine references unknown manifest id `{0}`")]
    DanglingSpineRef(String),
    #[error("manifest id `{0}` is declared more than once")]
    DuplicateManifestId(String),
    #[error("manifest href `{0}` is declared more than once")]
    DuplicateManifestHref(String),
    #[error("package invariant violated: {0}")]
    InvariantViolation(String),
    #[error("package document `{0}` is not in the container")]
    MissingPackage(String),
}

/// The `schema:` accessibility properties recognised in package metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum A11yProperty {
    AccessMode,
    AccessModeSufficient,
    AccessibilityFeature,
    AccessibilityHazard,
    AccessibilitySummary,
}

impl A11yProperty {
    pub const ALL: [A11yProperty; 5] = [
        A11yProperty::AccessMode,
        A11yProperty::AccessModeSufficient,
        A11yProperty::AccessibilityFeature,
        A11yProperty::AccessibilityHazard,
        A11yProperty::AccessibilitySummary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            A11yProperty::AccessMode => "accessMode",
            A11yProperty::AccessModeSufficient => "accessModeSufficient",
            A11yProperty::AccessibilityFeature => "accessibilityFeature",
            A11yProperty::AccessibilityHazard => "accessibilityHazard",
            A11yProperty::AccessibilitySummary => "accessibilitySummary",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MetaKind {
    DcTitle,
    DcLanguage,
    DcCreator,
    DcDate,
    DcIdentifier,
    SchemaAccessibility(A11yProperty),
    /// Any other metadata element, keyed by its qualified name
    /// (`dc:publisher`, `meta`, `link`, ...).
    Other(String),
}

impl MetaKind {
    fn element_name(&self) -> &str {
        match self {
            MetaKind::DcTitle => "dc:title",
            MetaKind::DcLanguage => "dc:language",
            MetaKind::DcCreator => "dc:creator",
            MetaKind::DcDate => "dc:date",
            MetaKind::DcIdentifier => "dc:identifier",
            MetaKind::SchemaAccessibility(_) => "meta",
            MetaKind::Other(name) => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaEntry {
    pub kind: MetaKind,
    pub value: String,
    /// Uninterpreted attributes, in source order. For accessibility
    /// entries the `property` attribute is implied by `kind` and not kept.
    pub attrs: Vec<(String, String)>,
    /// Accessibility entry in the OPF 2 `<meta name=".." content=".."/>` form.
    pub name_content: bool,
}

impl MetaEntry {
    pub fn new(kind: MetaKind, value: impl Into<String>) -> Self {
        Self {
            kind,
            value: value.into(),
            attrs: Vec::new(),
            name_content: false,
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestItem {
    pub id: String,
    /// Container-relative path, already resolved against the OPF directory.
    pub href: String,
    pub media_type: String,
    pub properties: Vec<String>,
    pub attrs: Vec<(String, String)>,
}

impl ManifestItem {
    pub fn is_xhtml(&self) -> bool {
        matches!(
            self.media_type.as_str(),
            "application/xhtml+xml" | "text/html"
        )
    }

    pub fn is_image(&self) -> bool {
        self.media_type.starts_with("image/")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpineRef {
    pub idref: String,
    pub attrs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PackageDocument {
    pub version: String,
    /// Directory of the package document inside the container.
    pub base_dir: String,
    pub package_attrs: Vec<(String, String)>,
    pub metadata_attrs: Vec<(String, String)>,
    pub metadata: Vec<MetaEntry>,
    pub manifest_attrs: Vec<(String, String)>,
    pub manifest: Vec<ManifestItem>,
    pub spine_attrs: Vec<(String, String)>,
    pub spine: Vec<SpineRef>,
    /// Raw XML of trailing package children (`guide`, `bindings`, ...).
    pub trailing: Vec<String>,
}

impl PackageDocument {
    pub fn meta(&self, kind: &MetaKind) -> impl Iterator<Item = &MetaEntry> {
        let kind = kind.clone();
        self.metadata.iter().filter(move |m| m.kind == kind)
    }

    pub fn has_meta(&self, kind: &MetaKind) -> bool {
        self.meta(kind).next().is_some()
    }

    pub fn title(&self) -> Option<&str> {
        self.meta(&MetaKind::DcTitle)
            .map(|m| m.value.as_str())
            .find(|v| !v.is_empty())
    }

    pub fn languages(&self) -> Vec<&str> {
        self.meta(&MetaKind::DcLanguage)
            .map(|m| m.value.as_str())
            .collect()
    }

    pub fn item_by_id(&self, id: &str) -> Option<&ManifestItem> {
        self.manifest.iter().find(|i| i.id == id)
    }

    pub fn item_by_href(&self, href: &str) -> Option<&ManifestItem> {
        self.manifest.iter().find(|i| i.href == href)
    }

    /// Manifest items referenced by the spine, in reading order.
    pub fn spine_items(&self) -> impl Iterator<Item = &ManifestItem> {
        self.spine.iter().filter_map(|s| self.item_by_id(&s.idref))
    }

    /// Checks id uniqueness, href uniqueness and spine resolution.
    pub fn validate(&self) -> Result<(), OpfError> {
        let mut ids = HashSet::new();
        let mut hrefs = HashSet::new();
        for item in &self.manifest {
            if !ids.insert(item.id.as_str()) {
                return Err(OpfError::DuplicateManifestId(item.id.clone()));
            }
            if !hrefs.insert(item.href.as_str()) {
                return Err(OpfError::DuplicateManifestHref(item.href.clone()));
            }
        }
        for s in &self.spine {
            if !ids.contains(s.idref.as_str()) {
                return Err(OpfError::DanglingSpineRef(s.idref.clone()));
            }
        }
        Ok(())
    }
}

fn malformed(e: impl std::fmt::Display) -> OpfError {
    OpfError::MalformedXml(e.to_string())
}

fn ns_is(res: &ResolveResult, uri: &str) -> bool {
    matches!(res, ResolveResult::Bound(Namespace(ns)) if *ns == uri.as_bytes())
}

/// Attributes of `e` with namespace prefixes normalized to `opf:`,
/// `dc:` and `xml:`. Namespace declarations are dropped when `keep_xmlns`
/// is false.
fn collect_attrs(
    reader: &NsReader<&[u8]>,
    e: &BytesStart,
    keep_xmlns: bool,
) -> Result<Vec<(String, String)>, OpfError> {
    let mut out = Vec::new();
    for attr in e.attributes() {
        let attr = attr.map_err(malformed)?;
        let raw = std::str::from_utf8(attr.key.as_ref()).map_err(malformed)?;
        let value = attr.unescape_value().map_err(malformed)?.into_owned();
        if raw == "xmlns" || raw.starts_with("xmlns:") {
            let managed = matches!(raw, "xmlns" | "xmlns:dc" | "xmlns:opf")
                || value == OPF_NS
                || value == DC_NS;
            if keep_xmlns && !managed {
                out.push((raw.to_string(), value));
            }
            continue;
        }
        let (res, local) = reader.resolve_attribute(attr.key);
        let local = std::str::from_utf8(local.as_ref()).map_err(malformed)?;
        let name = if ns_is(&res, OPF_NS) {
            format!("opf:{local}")
        } else if ns_is(&res, DC_NS) {
            format!("dc:{local}")
        } else if ns_is(&res, XML_NS) {
            format!("xml:{local}")
        } else {
            raw.to_string()
        };
        out.push((name, value));
    }
    Ok(out)
}

fn take_attr(attrs: &mut Vec<(String, String)>, name: &str) -> Option<String> {
    let idx = attrs.iter().position(|(k, _)| k == name)?;
    Some(attrs.remove(idx).1)
}

/// Reads the text content of the element just opened, flattening any
/// nested markup.
fn read_text_content(reader: &mut NsReader<&[u8]>) -> Result<String, OpfError> {
    let mut depth = 0usize;
    let mut text = String::new();
    loop {
        match reader.read_event().map_err(malformed)? {
            Event::Start(_) => depth += 1,
            Event::End(_) => {
                if depth == 0 {
                    return Ok(text.trim().to_string());
                }
                depth -= 1;
            }
            Event::Text(t) => text.push_str(&t.xml_content().map_err(malformed)?),
            Event::CData(t) => text.push_str(&t.decode().map_err(malformed)?),
            Event::GeneralRef(r) => match r.resolve_char_ref().map_err(malformed)? {
                Some(c) => text.push(c),
                None => {
                    let name = r.decode().map_err(malformed)?;
                    let resolved = quick_xml::escape::resolve_xml_entity(&name)
                        .ok_or_else(|| malformed(format!("unknown entity `&{name};`")))?;
                    text.push_str(resolved);
                }
            },
            Event::Eof => return Err(malformed("unexpected end of document")),
            _ => {}
        }
    }
}

fn parse_meta_element(
    reader: &mut NsReader<&[u8]>,
    e: &BytesStart,
    empty: bool,
) -> Result<MetaEntry, OpfError> {
    let (res, local) = reader.resolve_element(e.name());
    let local = std::str::from_utf8(local.as_ref()).map_err(malformed)?.to_string();
    let (in_dc, in_opf) = (ns_is(&res, DC_NS), ns_is(&res, OPF_NS));
    let mut attrs = collect_attrs(reader, e, false)?;
    let mut value = if empty {
        String::new()
    } else {
        read_text_content(reader)?
    };
    let mut name_content = false;

    let kind = if in_dc {
        match local.as_str() {
            "title" => MetaKind::DcTitle,
            "language" => MetaKind::DcLanguage,
            "creator" => MetaKind::DcCreator,
            "date" => MetaKind::DcDate,
            "identifier" => MetaKind::DcIdentifier,
            other => MetaKind::Other(format!("dc:{other}")),
        }
    } else if in_opf && local == "meta" {
        let a11y = attrs
            .iter()
            .find(|(k, _)| k == "property")
            .and_then(|(_, v)| v.strip_prefix("schema:"))
            .and_then(A11yProperty::from_name);
        let legacy = || {
            let name = attrs.iter().find(|(k, _)| k == "name")?.1.strip_prefix("schema:")?;
            attrs.iter().any(|(k, _)| k == "content").then_some(())?;
            A11yProperty::from_name(name)
        };
        match (a11y, legacy()) {
            (Some(p), _) => {
                take_attr(&mut attrs, "property");
                MetaKind::SchemaAccessibility(p)
            }
            (None, Some(p)) => {
                take_attr(&mut attrs, "name");
                value = take_attr(&mut attrs, "content").unwrap_or_default();
                name_content = true;
                MetaKind::SchemaAccessibility(p)
            }
            (None, None) => MetaKind::Other("meta".into()),
        }
    } else if in_opf {
        MetaKind::Other(local)
    } else {
        let qname = e.name();
        let raw = std::str::from_utf8(qname.as_ref()).map_err(malformed)?;
        MetaKind::Other(raw.to_string())
    };
    Ok(MetaEntry {
        kind,
        value,
        attrs,
        name_content,
    })
}

/// Parses a package document. `base_dir` is the OPF's directory inside
/// the container; manifest hrefs are resolved against it.
pub fn parse_opf(entry: &ArchiveEntry, base_dir: &str) -> Result<PackageDocument, OpfError> {
    let text = std::str::from_utf8(&entry.data).map_err(malformed)?;
    let text = text.trim_start_matches('\u{feff}');
    let mut reader = NsReader::from_str(text);

    let mut doc = PackageDocument {
        base_dir: base_dir.to_string(),
        ..Default::default()
    };
    let mut seen_package = false;
    let mut section: Option<&'static str> = None;

    loop {
        let before = reader.buffer_position() as usize;
        let (res, event) = reader.read_resolved_event().map_err(malformed)?;
        let in_opf = ns_is(&res, OPF_NS);
        match event {
            Event::Start(e) | Event::Empty(e) if !seen_package => {
                if !(in_opf && e.local_name().as_ref() == b"package") {
                    return Err(malformed("root element is not an OPF `package`"));
                }
                seen_package = true;
                let mut attrs = collect_attrs(&reader, &e, true)?;
                doc.version = take_attr(&mut attrs, "version").unwrap_or_default();
                doc.package_attrs = attrs;
            }
            Event::Start(e) if section.is_none() => {
                let local = e.local_name();
                match (in_opf, local.as_ref()) {
                    (true, b"metadata") => {
                        doc.metadata_attrs = collect_attrs(&reader, &e, true)?;
                        section = Some("metadata");
                    }
                    (true, b"manifest") => {
                        doc.manifest_attrs = collect_attrs(&reader, &e, false)?;
                        section = Some("manifest");
                    }
                    (true, b"spine") => {
                        doc.spine_attrs = collect_attrs(&reader, &e, false)?;
                        section = Some("spine");
                    }
                    _ => {
                        let end = e.to_end().into_owned();
                        let span = reader.read_to_end(end.name()).map_err(malformed)?;
                        let stop = text[span.end as usize..]
                            .find('>')
                            .map(|i| span.end as usize + i + 1)
                            .ok_or_else(|| malformed("unterminated element"))?;
                        doc.trailing.push(text[before..stop].trim().to_string());
                    }
                }
            }
            Event::Empty(e) if section.is_none() => {
                let local = e.local_name();
                match (in_opf, local.as_ref()) {
                    (true, b"metadata") => doc.metadata_attrs = collect_attrs(&reader, &e, true)?,
                    (true, b"manifest") => doc.manifest_attrs = collect_attrs(&reader, &e, false)?,
                    (true, b"spine") => doc.spine_attrs = collect_attrs(&reader, &e, false)?,
                    _ => {
                        let stop = reader.buffer_position() as usize;
                        doc.trailing.push(text[before..stop].trim().to_string());
                    }
                }
            }
            Event::Start(e) if section == Some("metadata") => {
                let entry = parse_meta_element(&mut reader, &e, false)?;
                doc.metadata.push(entry);
            }
            Event::Empty(e) if section == Some("metadata") => {
                let entry = parse_meta_element(&mut reader, &e, true)?;
                doc.metadata.push(entry);
            }
            Event::Start(e) | Event::Empty(e) if section == Some("manifest") => {
                if in_opf && e.local_name().as_ref() == b"item" {
                    let mut attrs = collect_attrs(&reader, &e, false)?;
                    let id = take_attr(&mut attrs, "id")
                        .ok_or_else(|| malformed("manifest item without id"))?;
                    let href = take_attr(&mut attrs, "href")
                        .ok_or_else(|| malformed(format!("manifest item `{id}` without href")))?;
                    let media_type = take_attr(&mut attrs, "media-type").unwrap_or_default();
                    let properties = take_attr(&mut attrs, "properties")
                        .map(|p| p.split_whitespace().map(str::to_string).collect())
                        .unwrap_or_default();
                    doc.manifest.push(ManifestItem {
                        id,
                        href: path::resolve(base_dir, &href),
                        media_type,
                        properties,
                        attrs,
                    });
                }
            }
            Event::Start(e) | Event::Empty(e) if section == Some("spine") => {
                if in_opf && e.local_name().as_ref() == b"itemref" {
                    let mut attrs = collect_attrs(&reader, &e, false)?;
                    let idref = take_attr(&mut attrs, "idref")
                        .ok_or_else(|| malformed("spine itemref without idref"))?;
                    doc.spine.push(SpineRef { idref, attrs });
                }
            }
            Event::End(e) => {
                let local = e.local_name();
                if section.is_some_and(|s| s.as_bytes() == local.as_ref()) {
                    section = None;
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !seen_package {
        return Err(malformed("no `package` element"));
    }
    doc.validate()?;
    Ok(doc)
}

/// Parses the package document named by the container's rootfile.
pub fn read_package(archive: &EpubArchive) -> Result<PackageDocument, OpfError> {
    let entry = archive
        .get(&archive.rootfile_path)
        .ok_or_else(|| OpfError::MissingPackage(archive.rootfile_path.clone()))?;
    parse_opf(entry, path::parent_dir(&archive.rootfile_path))
}

fn write_attrs(out: &mut String, attrs: &[(String, String)]) {
    for (k, v) in attrs {
        let _ = write!(out, " {}=\"{}\"", k, escape(v.as_str()));
    }
}

/// Serializes the package with normalized namespace prefixes.
pub fn serialize_opf(doc: &PackageDocument) -> Result<Vec<u8>, OpfError> {
    doc.validate()
        .map_err(|e| OpfError::InvariantViolation(e.to_string()))?;

    let mut out = String::with_capacity(4096);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = write!(out, "<package xmlns=\"{OPF_NS}\"");
    if doc.trailing.iter().any(|t| t.contains("opf:")) {
        let _ = write!(out, " xmlns:opf=\"{OPF_NS}\"");
    }
    let _ = write!(out, " version=\"{}\"", escape(doc.version.as_str()));
    write_attrs(&mut out, &doc.package_attrs);
    out.push_str(">\n");

    let _ = write!(out, "  <metadata xmlns:dc=\"{DC_NS}\" xmlns:opf=\"{OPF_NS}\"");
    write_attrs(&mut out, &doc.metadata_attrs);
    out.push_str(">\n");
    for m in &doc.metadata {
        let name = m.kind.element_name();
        let _ = write!(out, "    <{name}");
        if let MetaKind::SchemaAccessibility(p) = m.kind {
            if m.name_content {
                let _ = write!(
                    out,
                    " name=\"schema:{}\" content=\"{}\"",
                    p.name(),
                    escape(m.value.as_str())
                );
                write_attrs(&mut out, &m.attrs);
                out.push_str("/>\n");
                continue;
            }
            let _ = write!(out, " property=\"schema:{}\"", p.name());
        }
        write_attrs(&mut out, &m.attrs);
        if m.value.is_empty() && matches!(m.kind, MetaKind::Other(_)) {
            out.push_str("/>\n");
        } else {
            let _ = writeln!(out, ">{}</{name}>", escape(m.value.as_str()));
        }
    }
    out.push_str("  </metadata>\n");

    out.push_str("  <manifest");
    write_attrs(&mut out, &doc.manifest_attrs);
    out.push_str(">\n");
    for item in &doc.manifest {
        let _ = write!(
            out,
            "    <item id=\"{}\" href=\"{}\" media-type=\"{}\"",
            escape(item.id.as_str()),
            escape(path::relativize(&doc.base_dir, &item.href)),
            escape(item.media_type.as_str())
        );
        if !item.properties.is_empty() {
            let _ = write!(out, " properties=\"{}\"", escape(item.properties.join(" ")));
        }
        write_attrs(&mut out, &item.attrs);
        out.push_str("/>\n");
    }
    out.push_str("  </manifest>\n");

    out.push_str("  <spine");
    write_attrs(&mut out, &doc.spine_attrs);
    out.push_str(">\n");
    for s in &doc.spine {
        let _ = write!(out, "    <itemref idref=\"{}\"", escape(s.idref.as_str()));
        write_attrs(&mut out, &s.attrs);
        out.push_str("/>\n");
    }
    out.push_str("  </spine>\n");

    for raw in &doc.trailing {
        let _ = writeln!(out, "  {raw}");
    }
    out.push_str("</package>\n");
    Ok(out.into_bytes())
}
