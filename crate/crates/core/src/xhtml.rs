//! Span-preserving XHTML/HTML parser.
//!
//! Content documents are parsed into a flat node arena that remembers the
//! byte span of every tag and attribute, so attribute edits can be spliced
//! into the original text without reformatting anything else. The
//! tokenizer tolerates the usual HTML slop (unquoted and bare attributes,
//! unclosed void elements, stray end tags); [`is_well_formed`] provides the
//! strict XML check.

use std::ops::Range;

use quick_xml::events::Event;
use quick_xml::Reader;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// The source is well-formed XML.
    Strict,
    /// The source needed lenient HTML recovery.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attr {
    /// Name as written, including any prefix.
    pub name: String,
    pub value: Option<String>,
    /// Span of the whole `name="value"` text.
    pub span: Range<usize>,
}

impl Attr {
    pub fn local_name(&self) -> &str {
        local(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Element {
        /// Lowercased local name.
        name: String,
        attrs: Vec<Attr>,
        /// Span of the start tag, `<` through `>`.
        tag: Range<usize>,
        /// Byte offset just past the tag name inside the start tag.
        name_end: usize,
    },
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl Node {
    pub fn name(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { name, .. } => Some(name),
            NodeKind::Text(_) => None,
        }
    }

    pub fn attr(&self, name: &str) -> Option<&Attr> {
        match &self.kind {
            NodeKind::Element { attrs, .. } => attrs.iter().find(|a| a.name.eq_ignore_ascii_case(name)),
            NodeKind::Text(_) => None,
        }
    }

    pub fn attr_value(&self, name: &str) -> Option<&str> {
        self.attr(name).and_then(|a| a.value.as_deref())
    }
}

/// Parsed document. Node indices follow document order (pre-order).
#[derive(Debug, Clone)]
pub struct Document {
    pub nodes: Vec<Node>,
    pub roots: Vec<usize>,
    pub mode: ParseMode,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("document is not valid UTF-8")]
    NotUtf8,
    #[error("document contains no elements")]
    NoElements,
}

const VOID: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];
const RAW_TEXT: &[&str] = &["script", "style"];
/// Elements whose boundaries separate words in extracted text.
const BREAKING: &[&str] = &[
    "address", "article", "aside", "blockquote", "br", "dd", "div", "dl", "dt", "figcaption",
    "figure", "footer", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "ol", "p",
    "section", "table", "td", "th", "tr", "ul",
];

fn local(name: &str) -> &str {
    name.rsplit(':').next().unwrap_or(name)
}

/// Decodes character and entity references, keeping unknown ones verbatim.
pub fn decode_entities(raw: &str) -> String {
    if !raw.contains('&') {
        return raw.to_string();
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp + 1..];
        let semi = tail.find(';').filter(|&i| i > 0 && i <= 32);
        let resolved = semi.and_then(|i| {
            let name = &tail[..i];
            let text = if let Some(num) = name.strip_prefix('#') {
                let code = match num.strip_prefix(['x', 'X']) {
                    Some(hex) => u32::from_str_radix(hex, 16).ok(),
                    None => num.parse().ok(),
                };
                code.and_then(char::from_u32).map(String::from)
            } else {
                quick_xml::escape::resolve_html5_entity(name).map(String::from)
            };
            text.map(|t| (t, i))
        });
        match resolved {
            Some((text, i)) => {
                out.push_str(&text);
                rest = &tail[i + 1..];
            }
            None => {
                out.push('&');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Escapes a value for use inside a double-quoted attribute.
pub fn escape_attr(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

/// Strict XML well-formedness: balanced tags, one root element, valid
/// attributes and known entity references.
pub fn is_well_formed(src: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(src) else {
        return false;
    };
    let mut reader = Reader::from_str(text.trim_start_matches('\u{feff}'));
    let mut depth = 0usize;
    let mut roots = 0usize;
    // XHTML 1.x DTDs declare the HTML named entities.
    let mut has_doctype = false;
    loop {
        let event = match reader.read_event() {
            Ok(e) => e,
            Err(_) => return false,
        };
        match event {
            Event::Start(e) => {
                if depth == 0 {
                    roots += 1;
                }
                if !attrs_ok(&e) {
                    return false;
                }
                depth += 1;
            }
            Event::Empty(e) => {
                if depth == 0 {
                    roots += 1;
                }
                if !attrs_ok(&e) {
                    return false;
                }
            }
            Event::End(_) => {
                if depth == 0 {
                    return false;
                }
                depth -= 1;
            }
            Event::Text(t) => {
                if depth == 0 && !t.iter().all(|b| b.is_ascii_whitespace()) {
                    return false;
                }
            }
            Event::GeneralRef(r) => {
                if depth == 0 {
                    return false;
                }
                match r.resolve_char_ref() {
                    Ok(Some(_)) => {}
                    Ok(None) => {
                        let name = String::from_utf8_lossy(&r);
                        let known = quick_xml::escape::resolve_xml_entity(&name).is_some()
                            || (has_doctype
                                && quick_xml::escape::resolve_html5_entity(&name).is_some());
                        if !known {
                            return false;
                        }
                    }
                    Err(_) => return false,
                }
            }
            Event::DocType(_) => has_doctype = true,
            Event::Eof => return depth == 0 && roots == 1,
            _ => {}
        }
    }
}

fn attrs_ok(e: &quick_xml::events::BytesStart) -> bool {
    e.attributes()
        .all(|a| a.is_ok_and(|a| a.unescape_value().is_ok()))
}

struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
}

enum Token {
    Start {
        name: String,
        attrs: Vec<Attr>,
        tag: Range<usize>,
        name_end: usize,
        self_closing: bool,
    },
    End(String),
    Text(Range<usize>),
    RawText(Range<usize>),
}

impl<'a> Tokenizer<'a> {
    fn bytes(&self) -> &'a [u8] {
        self.src.as_bytes()
    }

    fn skip_past(&mut self, pat: &str) {
        match self.src[self.pos..].find(pat) {
            Some(i) => self.pos += i + pat.len(),
            None => self.pos = self.src.len(),
        }
    }

    fn next_token(&mut self) -> Option<Token> {
        loop {
            if self.pos >= self.src.len() {
                return None;
            }
            let rest = &self.src[self.pos..];
            if !rest.starts_with('<') {
                let len = rest.find('<').unwrap_or(rest.len());
                let range = self.pos..self.pos + len;
                self.pos += len;
                return Some(Token::Text(range));
            }
            if rest.starts_with("<!--") {
                self.pos += 4;
                self.skip_past("-->");
                continue;
            }
            if rest.starts_with("<![CDATA[") {
                let start = self.pos + 9;
                let end = self.src[start..].find("]]>").map_or(self.src.len(), |i| start + i);
                self.pos = (end + 3).min(self.src.len());
                return Some(Token::RawText(start..end));
            }
            if rest.starts_with("<!") || rest.starts_with("<?") {
                self.skip_past(">");
                continue;
            }
            if let Some(after) = rest.strip_prefix("</") {
                let name_len = after
                    .find(|c: char| c.is_whitespace() || c == '>')
                    .unwrap_or(after.len());
                let name = after[..name_len].to_ascii_lowercase();
                self.skip_past(">");
                if name.is_empty() {
                    continue;
                }
                return Some(Token::End(local(&name).to_string()));
            }
            let name_start = self.pos + 1;
            let name_len = self.src[name_start..]
                .find(|c: char| c.is_whitespace() || c == '>' || c == '/')
                .unwrap_or(self.src.len() - name_start);
            if name_len == 0
                || !self.src[name_start..]
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_alphabetic() || c == '_')
            {
                // A lone `<` in text.
                let range = self.pos..self.pos + 1;
                self.pos += 1;
                return Some(Token::Text(range));
            }
            let tag_start = self.pos;
            let name_end = name_start + name_len;
            let name = local(&self.src[name_start..name_end].to_ascii_lowercase()).to_string();
            self.pos = name_end;
            let (attrs, self_closing) = self.attributes();
            let tag = tag_start..self.pos;
            return Some(Token::Start {
                name,
                attrs,
                tag,
                name_end,
                self_closing,
            });
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn attributes(&mut self) -> (Vec<Attr>, bool) {
        let mut attrs = Vec::new();
        loop {
            self.skip_ws();
            if self.pos >= self.src.len() {
                return (attrs, false);
            }
            match self.bytes()[self.pos] {
                b'>' => {
                    self.pos += 1;
                    return (attrs, false);
                }
                b'/' => {
                    self.pos += 1;
                    if self.bytes().get(self.pos) == Some(&b'>') {
                        self.pos += 1;
                        return (attrs, true);
                    }
                    continue;
                }
                _ => {}
            }
            let start = self.pos;
            let name_len = self.src[start..]
                .find(|c: char| c.is_whitespace() || matches!(c, '=' | '>' | '/'))
                .unwrap_or(self.src.len() - start);
            if name_len == 0 {
                // Stray `=` or similar: skip one char.
                self.pos += self.src[start..].chars().next().map_or(1, char::len_utf8);
                continue;
            }
            let name = self.src[start..start + name_len].to_string();
            self.pos = start + name_len;
            let after_name = self.pos;
            self.skip_ws();
            if self.bytes().get(self.pos) != Some(&b'=') {
                self.pos = after_name;
                attrs.push(Attr {
                    name,
                    value: None,
                    span: start..after_name,
                });
                continue;
            }
            self.pos += 1;
            self.skip_ws();
            let value;
            match self.bytes().get(self.pos) {
                Some(&q) if q == b'"' || q == b'\'' => {
                    let vstart = self.pos + 1;
                    let vend = self.src[vstart..]
                        .find(q as char)
                        .map_or(self.src.len(), |i| vstart + i);
                    value = decode_entities(&self.src[vstart..vend]);
                    self.pos = (vend + 1).min(self.src.len());
                }
                _ => {
                    let vstart = self.pos;
                    let vlen = self.src[vstart..]
                        .find(|c: char| c.is_whitespace() || c == '>')
                        .unwrap_or(self.src.len() - vstart);
                    value = decode_entities(&self.src[vstart..vstart + vlen]);
                    self.pos = vstart + vlen;
                }
            }
            attrs.push(Attr {
                name,
                value: Some(value),
                span: start..self.pos,
            });
        }
    }

    fn raw_text_until(&mut self, name: &str) -> Range<usize> {
        let start = self.pos;
        let lower = self.src[start..].to_ascii_lowercase();
        let end = lower
            .find(&format!("</{name}"))
            .map_or(self.src.len(), |i| start + i);
        self.pos = end;
        start..end
    }
}

impl Document {
    pub fn parse(src: &[u8]) -> Result<Document, ParseError> {
        let text = std::str::from_utf8(src).map_err(|_| ParseError::NotUtf8)?;
        let mode = if is_well_formed(src) {
            ParseMode::Strict
        } else {
            ParseMode::Lenient
        };
        let mut doc = Document {
            nodes: Vec::new(),
            roots: Vec::new(),
            mode,
        };
        let mut stack: Vec<usize> = Vec::new();
        let mut tok = Tokenizer { src: text, pos: 0 };

        while let Some(token) = tok.next_token() {
            match token {
                Token::Start {
                    name,
                    attrs,
                    tag,
                    name_end,
                    self_closing,
                } => {
                    let is_void = self_closing || VOID.contains(&name.as_str());
                    let raw = !is_void && RAW_TEXT.contains(&name.as_str());
                    let idx = doc.push(
                        NodeKind::Element {
                            name: name.clone(),
                            attrs,
                            tag,
                            name_end,
                        },
                        stack.last().copied(),
                    );
                    if raw {
                        // Script and style bodies never contribute text.
                        tok.raw_text_until(&name);
                    } else if !is_void {
                        stack.push(idx);
                    }
                }
                Token::End(name) => {
                    if let Some(depth) = stack
                        .iter()
                        .rposition(|&i| doc.nodes[i].name() == Some(name.as_str()))
                    {
                        stack.truncate(depth);
                    }
                }
                Token::Text(range) => {
                    let decoded = decode_entities(&text[range]);
                    doc.push(NodeKind::Text(decoded), stack.last().copied());
                }
                Token::RawText(range) => {
                    doc.push(NodeKind::Text(text[range].to_string()), stack.last().copied());
                }
            }
        }
        if !doc.nodes.iter().any(|n| n.name().is_some()) {
            return Err(ParseError::NoElements);
        }
        Ok(doc)
    }

    fn push(&mut self, kind: NodeKind, parent: Option<usize>) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(Node {
            kind,
            parent,
            children: Vec::new(),
        });
        match parent {
            Some(p) => self.nodes[p].children.push(idx),
            None => self.roots.push(idx),
        }
        idx
    }

    pub fn ancestors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.nodes[idx].parent, move |&p| self.nodes[p].parent)
    }

    /// Concatenated text of the subtree rooted at `idx`.
    pub fn text_content(&self, idx: usize) -> String {
        let mut out = String::new();
        self.collect_text(idx, &mut out);
        out
    }

    fn collect_text(&self, idx: usize, out: &mut String) {
        match &self.nodes[idx].kind {
            NodeKind::Text(t) => out.push_str(t),
            NodeKind::Element { .. } => {
                for &c in &self.nodes[idx].children {
                    self.collect_text(c, out);
                    // Adjacent blocks should not fuse words together.
                    if self.nodes[c].name().is_some_and(|n| BREAKING.contains(&n)) {
                        out.push(' ');
                    }
                }
            }
        }
    }

    /// Index one past the last node of the subtree rooted at `idx`.
    pub fn subtree_end(&self, idx: usize) -> usize {
        let mut last = idx;
        while let Some(&c) = self.nodes[last].children.last() {
            last = c;
        }
        last + 1
    }

    pub fn elements<'s>(&'s self, name: &'s str) -> impl Iterator<Item = usize> + 's {
        (0..self.nodes.len()).filter(move |&i| self.nodes[i].name() == Some(name))
    }
}

/// Collapses whitespace runs to single spaces and trims.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_and_lenient_modes() {
        let strict = Document::parse(b"<html><body><p>Hi</p></body></html>").unwrap();
        assert_eq!(strict.mode, ParseMode::Strict);
        let lenient = Document::parse(b"<html><body><p>Hi<br><img src=a.png></body>").unwrap();
        assert_eq!(lenient.mode, ParseMode::Lenient);
        assert_eq!(lenient.elements("img").count(), 1);
    }

    #[test]
    fn attribute_spans_and_values() {
        let src = r#"<p><img src="a.png" alt='x &amp; y' hidden data-x=1 /></p>"#;
        let doc = Document::parse(src.as_bytes()).unwrap();
        let img = doc.elements("img").next().unwrap();
        let node = &doc.nodes[img];
        assert_eq!(node.attr_value("alt"), Some("x & y"));
        let hidden = node.attr("hidden").unwrap();
        assert_eq!(hidden.value, None);
        assert_eq!(&src[hidden.span.clone()], "hidden");
        assert_eq!(&src[node.attr("src").unwrap().span.clone()], r#"src="a.png""#);
        assert_eq!(node.attr_value("data-x"), Some("1"));
    }

    #[test]
    fn script_and_comments_are_not_text() {
        let doc = Document::parse(b"<div><!-- <img src=x> --><script>var a = '<img>';</script>text</div>")
            .unwrap();
        assert_eq!(doc.elements("img").count(), 0);
        assert_eq!(normalize_ws(&doc.text_content(0)), "text");
    }

    #[test]
    fn entity_decoding() {
        assert_eq!(decode_entities("a &amp; b &lt;&#65;&#x42;&nbsp;"), "a & b <AB\u{a0}");
        assert_eq!(decode_entities("AT&T & co &bogus;"), "AT&T & co &bogus;");
    }

    #[test]
    fn well_formedness() {
        assert!(is_well_formed(b"<?xml version=\"1.0\"?><a><b/>t &amp; u</a>"));
        assert!(!is_well_formed(b"<a><b></a>"));
        assert!(!is_well_formed(b"<a></a><b></b>"));
        assert!(!is_well_formed(b"<a>&nbsp;</a>"));
        assert!(is_well_formed(b"<!DOCTYPE html><a>&nbsp;</a>"));
        assert!(!is_well_formed(b"<a x=1></a>"));
        assert!(!is_well_formed(b"<a>"));
    }

    #[test]
    fn rejects_non_utf8_and_elementless() {
        assert_eq!(Document::parse(&[0xff, 0xfe, 0x00]).unwrap_err(), ParseError::NotUtf8);
        assert_eq!(Document::parse(b"just text").unwrap_err(), ParseError::NoElements);
    }
}
