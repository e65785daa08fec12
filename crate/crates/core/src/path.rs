//! Container-relative path handling.
//!
//! Paths inside an OCF container always use `/` and are relative to the
//! container root. Hrefs found in package and content documents are
//! IRI references relative to the referencing file's directory.

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};

const HREF_ENCODE: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'"')
    .add(b'#')
    .add(b'%')
    .add(b'<')
    .add(b'>')
    .add(b'?');

/// Directory part of a container path (`""` for root-level files).
pub fn parent_dir(path: &str) -> &str {
    match path.rfind('/') {
        Some(i) => &path[..i],
        None => "",
    }
}

/// File name without directory and extension.
pub fn file_stem(path: &str) -> &str {
    let name = &path[path.rfind('/').map_or(0, |i| i + 1)..];
    match name.rfind('.') {
        Some(0) | None => name,
        Some(i) => &name[..i],
    }
}

/// Lowercased extension, if any.
pub fn extension(path: &str) -> Option<String> {
    let name = &path[path.rfind('/').map_or(0, |i| i + 1)..];
    name.rfind('.')
        .filter(|&i| i > 0)
        .map(|i| name[i + 1..].to_ascii_lowercase())
}

/// True for references that cannot point inside the container
/// (`http:`, `data:`, `mailto:` and friends, or protocol-relative).
pub fn is_external(href: &str) -> bool {
    if href.starts_with("//") {
        return true;
    }
    match href.find(':') {
        Some(i) => {
            let scheme = &href[..i];
            !scheme.is_empty()
                && scheme.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && scheme
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
        }
        None => false,
    }
}

/// Resolves `href` against `base_dir`, dropping query and fragment,
/// percent-decoding, and normalizing `.` / `..` segments.
///
/// Segments that climb above the container root are discarded.
pub fn resolve(base_dir: &str, href: &str) -> String {
    let href = href.split(['#', '?']).next().unwrap_or("");
    let href = percent_decode_str(href).decode_utf8_lossy();
    let mut segments: Vec<&str> = Vec::new();
    let joined;
    let full: &str = if let Some(abs) = href.strip_prefix('/') {
        abs
    } else if base_dir.is_empty() {
        &href
    } else {
        joined = format!("{base_dir}/{href}");
        &joined
    };
    for seg in full.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                segments.pop();
            }
            s => segments.push(s),
        }
    }
    segments.join("/")
}

/// Inverse of [`resolve`]: expresses `target` relative to `base_dir` and
/// percent-encodes the characters that cannot appear raw in an href.
pub fn relativize(base_dir: &str, target: &str) -> String {
    let base: Vec<&str> = base_dir.split('/').filter(|s| !s.is_empty()).collect();
    let tgt: Vec<&str> = target.split('/').filter(|s| !s.is_empty()).collect();
    let common = base
        .iter()
        .zip(tgt.iter())
        .take_while(|(a, b)| a == b)
        .count();
    let mut parts: Vec<String> = vec!["..".to_string(); base.len() - common];
    parts.extend(
        tgt[common..]
            .iter()
            .map(|s| utf8_percent_encode(s, HREF_ENCODE).to_string()),
    );
    parts.join("/")
}

/// Checks the OCF path rules: non-empty, `/`-separated, no `.`/`..` or
/// empty segments, no leading slash. A single trailing `/` marks a
/// directory entry.
pub fn is_valid_entry_path(path: &str) -> bool {
    let body = path.strip_suffix('/').unwrap_or(path);
    !body.is_empty()
        && !body.contains('\\')
        && body
            .split('/')
            .all(|seg| !seg.is_empty() && seg != "." && seg != "..")
}
