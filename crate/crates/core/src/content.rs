//! Image discovery, context extraction and alt-text rewriting for XHTML
//! content documents.

use serde::{Deserialize, Serialize};

use crate::ocf::ArchiveEntry;
use crate::opf::PackageDocument;
use crate::path;
use crate::xhtml::{self, Document, NodeKind};

/// Maximum characters kept on each side of an image.
pub const CONTEXT_WINDOW: usize = 500;

const BLOCKS: &[&str] = &["p", "div", "li", "td", "blockquote", "figcaption"];
const HEADINGS: &[&str] = &["h1", "h2", "h3", "h4", "h5", "h6"];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ContentError {
    #[error("cannot parse {0}: {1}")]
    UnparseableDocument(String, String),
    #[error("image #{index} in {doc} no longer matches the document")]
    StaleOccurrence { doc: String, index: usize },
    #[error("empty alt text is only allowed on decorative images")]
    EmptyAlt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageOccurrence {
    pub doc_path: String,
    /// Position among the document's `img`/`image` elements.
    pub element_index: usize,
    pub src: String,
    pub existing_alt: Option<String>,
    pub decorative: bool,
}

impl ImageOccurrence {
    pub fn is_external(&self) -> bool {
        path::is_external(&self.src)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub figcaption: Option<String>,
    pub preceding_text: String,
    pub following_text: String,
    pub nearest_heading: Option<String>,
    pub doc_title: Option<String>,
}

fn parse(doc: &ArchiveEntry) -> Result<Document, ContentError> {
    Document::parse(&doc.data)
        .map_err(|e| ContentError::UnparseableDocument(doc.path.clone(), e.to_string()))
}

fn image_nodes(doc: &Document) -> Vec<usize> {
    (0..doc.nodes.len())
        .filter(|&i| matches!(doc.nodes[i].name(), Some("img" | "image")))
        .collect()
}

fn occurrence_at(doc: &Document, node: usize, doc_path: &str, index: usize) -> ImageOccurrence {
    let n = &doc.nodes[node];
    let raw_src = if n.name() == Some("img") {
        n.attr_value("src")
    } else {
        match &n.kind {
            NodeKind::Element { attrs, .. } => attrs
                .iter()
                .find(|a| a.local_name().eq_ignore_ascii_case("href"))
                .and_then(|a| a.value.as_deref()),
            NodeKind::Text(_) => None,
        }
    }
    .unwrap_or("")
    .trim();
    let src = if path::is_external(raw_src) {
        raw_src.to_string()
    } else {
        path::resolve(path::parent_dir(doc_path), raw_src)
    };
    let decorative = n.attr_value("role").is_some_and(|r| {
        r.split_whitespace()
            .any(|t| t.eq_ignore_ascii_case("presentation") || t.eq_ignore_ascii_case("none"))
    });
    ImageOccurrence {
        doc_path: doc_path.to_string(),
        element_index: index,
        src,
        existing_alt: n.attr_value("alt").map(str::to_string).or_else(|| {
            // `alt` written without a value is an empty alt.
            n.attr("alt").map(|_| String::new())
        }),
        decorative,
    }
}

/// Lists every `img` and SVG `image` element in document order.
pub fn find_images(doc: &ArchiveEntry, doc_path: &str) -> Result<Vec<ImageOccurrence>, ContentError> {
    let parsed = parse(doc)?;
    Ok(image_nodes(&parsed)
        .into_iter()
        .enumerate()
        .map(|(i, node)| occurrence_at(&parsed, node, doc_path, i))
        .collect())
}

fn locate(doc: &Document, occ: &ImageOccurrence) -> Result<usize, ContentError> {
    let stale = || ContentError::StaleOccurrence {
        doc: occ.doc_path.clone(),
        index: occ.element_index,
    };
    let node = *image_nodes(doc).get(occ.element_index).ok_or_else(stale)?;
    if occurrence_at(doc, node, &occ.doc_path, occ.element_index).src != occ.src {
        return Err(stale());
    }
    Ok(node)
}

/// Keeps the first `max` characters, cutting back to a word boundary.
pub fn truncate_head(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        return s.to_string();
    }
    let cut = s.char_indices().nth(max).map_or(s.len(), |(i, _)| i);
    let head = &s[..cut];
    if s[cut..].starts_with(char::is_whitespace) {
        return head.trim_end().to_string();
    }
    match head.rfind(char::is_whitespace) {
        Some(i) => head[..i].trim_end().to_string(),
        None => head.to_string(),
    }
}

/// Keeps the last `max` characters, starting at a word boundary.
pub fn truncate_tail(s: &str, max: usize) -> String {
    let total = s.chars().count();
    if total <= max {
        return s.to_string();
    }
    let cut = s.char_indices().nth(total - max).map_or(s.len(), |(i, _)| i);
    let tail = &s[cut..];
    if s[..cut].ends_with(char::is_whitespace) {
        return tail.trim_start().to_string();
    }
    match tail.find(char::is_whitespace) {
        Some(i) => tail[i..].trim_start().to_string(),
        None => tail.to_string(),
    }
}

fn non_empty(s: String) -> Option<String> {
    (!s.is_empty()).then_some(s)
}

/// Gathers the textual context around one image.
pub fn extract_context(
    doc: &ArchiveEntry,
    occurrence: &ImageOccurrence,
    pkg: &PackageDocument,
) -> Result<ContextBundle, ContentError> {
    let parsed = parse(doc)?;
    let img = locate(&parsed, occurrence)?;

    let figure = parsed
        .ancestors(img)
        .find(|&a| parsed.nodes[a].name() == Some("figure"));
    let own_caption = figure.and_then(|fig| {
        (fig + 1..parsed.subtree_end(fig)).find(|&i| {
            parsed.nodes[i].name() == Some("figcaption")
                && parsed
                    .ancestors(i)
                    .find(|&a| parsed.nodes[a].name() == Some("figure"))
                    == Some(fig)
        })
    });
    let figcaption = own_caption.and_then(|c| non_empty(xhtml::normalize_ws(&parsed.text_content(c))));

    // Each text node belongs to its nearest block or heading ancestor;
    // heading text is reported separately.
    let mut before = String::new();
    let mut after = String::new();
    let mut last_block: [Option<usize>; 2] = [None, None];
    for (i, node) in parsed.nodes.iter().enumerate() {
        let NodeKind::Text(text) = &node.kind else {
            continue;
        };
        let owner = parsed.ancestors(i).find(|&a| {
            parsed.nodes[a]
                .name()
                .is_some_and(|n| BLOCKS.contains(&n) || HEADINGS.contains(&n))
        });
        let Some(owner) = owner else { continue };
        if HEADINGS.contains(&parsed.nodes[owner].name().unwrap_or_default()) {
            continue;
        }
        if own_caption.is_some_and(|c| owner == c || parsed.ancestors(owner).any(|a| a == c)) {
            continue;
        }
        let side = usize::from(i > img);
        let buf = if side == 0 { &mut before } else { &mut after };
        if last_block[side] != Some(owner) {
            buf.push(' ');
            last_block[side] = Some(owner);
        }
        buf.push_str(text);
    }

    let nearest_heading = (0..img)
        .rev()
        .filter(|&i| parsed.nodes[i].name().is_some_and(|n| HEADINGS.contains(&n)))
        .find(|&h| !parsed.ancestors(img).any(|a| a == h))
        .and_then(|h| non_empty(xhtml::normalize_ws(&parsed.text_content(h))));

    Ok(ContextBundle {
        figcaption,
        preceding_text: truncate_tail(&xhtml::normalize_ws(&before), CONTEXT_WINDOW),
        following_text: truncate_head(&xhtml::normalize_ws(&after), CONTEXT_WINDOW),
        nearest_heading,
        doc_title: pkg.title().map(xhtml::normalize_ws).and_then(non_empty),
    })
}

/// Sets (adds or replaces) the `alt` attribute of exactly one image,
/// leaving every other byte of the document untouched.
pub fn set_alt_text(
    doc: &ArchiveEntry,
    occurrence: &ImageOccurrence,
    alt: &str,
) -> Result<ArchiveEntry, ContentError> {
    if alt.is_empty() && !occurrence.decorative {
        return Err(ContentError::EmptyAlt);
    }
    let parsed = parse(doc)?;
    let node = locate(&parsed, occurrence)?;
    let NodeKind::Element { name_end, .. } = &parsed.nodes[node].kind else {
        unreachable!("image nodes are elements");
    };
    let attribute = format!("alt=\"{}\"", xhtml::escape_attr(alt));
    let mut data = Vec::with_capacity(doc.data.len() + attribute.len() + 1);
    match parsed.nodes[node].attr("alt") {
        Some(existing) => {
            data.extend_from_slice(&doc.data[..existing.span.start]);
            data.extend_from_slice(attribute.as_bytes());
            data.extend_from_slice(&doc.data[existing.span.end..]);
        }
        None => {
            data.extend_from_slice(&doc.data[..*name_end]);
            data.push(b' ');
            data.extend_from_slice(attribute.as_bytes());
            data.extend_from_slice(&doc.data[*name_end..]);
        }
    }
    Ok(doc.with_data(data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocf::Compression;
    use crate::opf::{MetaEntry, MetaKind};

    fn xhtml(body: &str) -> ArchiveEntry {
        ArchiveEntry::new(
            "OEBPS/ch1.xhtml",
            format!(
                "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<html xmlns=\"http://www.w3.org/1999/xhtml\"><head><title>t</title></head><body>{body}</body></html>"
            ),
            Compression::Deflated,
        )
    }

    fn pkg_with_title(title: &str) -> PackageDocument {
        PackageDocument {
            metadata: vec![MetaEntry::new(MetaKind::DcTitle, title)],
            ..Default::default()
        }
    }

    #[test]
    fn no_images() {
        assert!(find_images(&xhtml("<p>text</p>"), "OEBPS/ch1.xhtml").unwrap().is_empty());
    }

    #[test]
    fn single_image_resolves_src() {
        let imgs = find_images(&xhtml(r#"<img src="pic.png"/>"#), "OEBPS/ch1.xhtml").unwrap();
        assert_eq!(imgs.len(), 1);
        assert_eq!(imgs[0].src, "OEBPS/pic.png");
        assert_eq!(imgs[0].existing_alt, None);
        assert!(!imgs[0].decorative);
    }

    #[test]
    fn empty_alt_and_svg_image() {
        let body = r#"<img src="a.png" alt=""/><svg xmlns:xlink="http://www.w3.org/1999/xlink"><image xlink:href="../img/b.jpg"/></svg><img src="c.png" role="none"/>"#;
        let imgs = find_images(&xhtml(body), "OEBPS/Text/ch1.xhtml").unwrap();
        assert_eq!(imgs.len(), 3);
        assert_eq!(imgs[0].existing_alt.as_deref(), Some(""));
        assert_eq!(imgs[1].src, "OEBPS/img/b.jpg");
        assert!(imgs[2].decorative);
    }

    #[test]
    fn empty_context_only_title() {
        let doc = xhtml(r#"<img src="fox.png"/>"#);
        let occ = &find_images(&doc, "OEBPS/ch1.xhtml").unwrap()[0];
        let ctx = extract_context(&doc, occ, &pkg_with_title("Foxes")).unwrap();
        assert_eq!(
            ctx,
            ContextBundle {
                doc_title: Some("Foxes".into()),
                ..Default::default()
            }
        );
    }

    #[test]
    fn figcaption_heading_and_neighbours() {
        let body = r#"<h1>Old  City</h1><p>Before the <em>map</em>.</p>
            <figure><img src="m.png"/><figcaption>Map of
            Amsterdam</figcaption></figure><p>After it.</p><h2>Later</h2>"#;
        let doc = xhtml(body);
        let occ = &find_images(&doc, "OEBPS/ch1.xhtml").unwrap()[0];
        let ctx = extract_context(&doc, occ, &PackageDocument::default()).unwrap();
        assert_eq!(ctx.figcaption.as_deref(), Some("Map of Amsterdam"));
        assert_eq!(ctx.nearest_heading.as_deref(), Some("Old City"));
        assert_eq!(ctx.preceding_text, "Before the map.");
        assert_eq!(ctx.following_text, "After it.");
        assert_eq!(ctx.doc_title, None);
    }

    #[test]
    fn stale_occurrence() {
        let doc = xhtml(r#"<img src="a.png"/>"#);
        let mut occ = find_images(&doc, "OEBPS/ch1.xhtml").unwrap().remove(0);
        occ.element_index = 3;
        assert!(matches!(
            extract_context(&doc, &occ, &PackageDocument::default()),
            Err(ContentError::StaleOccurrence { .. })
        ));
        assert!(matches!(
            set_alt_text(&doc, &occ, "x"),
            Err(ContentError::StaleOccurrence { .. })
        ));
    }

    #[test]
    fn set_alt_adds_and_replaces() {
        let doc = xhtml(r#"<img src="fox.png"/><img src="b.png" alt="old"/>"#);
        let imgs = find_images(&doc, "OEBPS/ch1.xhtml").unwrap();
        let out = set_alt_text(&doc, &imgs[0], "A red fox").unwrap();
        assert!(out.modified);
        let text = String::from_utf8(out.data.clone()).unwrap();
        assert!(text.contains(r#"<img alt="A red fox" src="fox.png"/>"#));
        let again = find_images(&out, "OEBPS/ch1.xhtml").unwrap();
        assert_eq!(again[0].existing_alt.as_deref(), Some("A red fox"));

        let out = set_alt_text(&doc, &imgs[1], "new").unwrap();
        let text = String::from_utf8(out.data).unwrap();
        assert!(text.contains(r#"<img src="b.png" alt="new"/>"#));
    }

    #[test]
    fn decorative_empty_alt() {
        let doc = xhtml(r#"<img src="rule.png" role="presentation"/>"#);
        let occ = &find_images(&doc, "OEBPS/ch1.xhtml").unwrap()[0];
        let out = set_alt_text(&doc, occ, "").unwrap();
        assert!(String::from_utf8(out.data).unwrap().contains(r#"alt="""#));

        let plain = xhtml(r#"<img src="a.png"/>"#);
        let occ = &find_images(&plain, "OEBPS/ch1.xhtml").unwrap()[0];
        assert_eq!(set_alt_text(&plain, occ, ""), Err(ContentError::EmptyAlt));
    }

    #[test]
    fn only_the_addressed_duplicate_changes() {
        let doc = xhtml(r#"<img src="a.png"/><img src="a.png"/>"#);
        let imgs = find_images(&doc, "OEBPS/ch1.xhtml").unwrap();
        let out = set_alt_text(&doc, &imgs[1], "second").unwrap();
        let again = find_images(&out, "OEBPS/ch1.xhtml").unwrap();
        assert_eq!(again[0].existing_alt, None);
        assert_eq!(again[1].existing_alt.as_deref(), Some("second"));
    }

    #[test]
    fn special_characters_are_escaped() {
        let doc = xhtml(r#"<img src="a.png"/>"#);
        let occ = &find_images(&doc, "OEBPS/ch1.xhtml").unwrap()[0];
        let alt = r#"x < y & "z" > w"#;
        let out = set_alt_text(&doc, occ, alt).unwrap();
        assert!(xhtml::is_well_formed(&out.data));
        assert_eq!(
            find_images(&out, "OEBPS/ch1.xhtml").unwrap()[0].existing_alt.as_deref(),
            Some(alt)
        );
    }

    #[test]
    fn truncation_at_word_boundaries() {
        assert_eq!(truncate_head("alpha beta gamma", 12), "alpha beta");
        assert_eq!(truncate_head("alpha beta gamma", 10), "alpha beta");
        assert_eq!(truncate_head("alpha", 3), "alp");
        assert_eq!(truncate_tail("alpha beta gamma", 12), "beta gamma");
        assert_eq!(truncate_tail("alpha beta gamma", 11), "beta gamma");
        assert_eq!(truncate_tail("short", 10), "short");
    }
}
