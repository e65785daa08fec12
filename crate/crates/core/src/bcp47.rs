//! Syntactic well-formedness of BCP 47 language tags (RFC 5646 grammar).
//! No registry lookups are made: `xx-Abcd` is well-formed even though
//! `xx` is not an assigned language.

const IRREGULAR: &[&str] = &[
    "en-gb-oed", "i-ami", "i-bnn", "i-default", "i-enochian", "i-hak", "i-klingon", "i-lux",
    "i-mingo", "i-navajo", "i-pwn", "i-tao", "i-tay", "i-tsu", "sgn-be-fr", "sgn-be-nl",
    "sgn-ch-de",
];
const REGULAR: &[&str] = &[
    "art-lojban", "cel-gaulish", "no-bok", "no-nyn", "zh-guoyu", "zh-hakka", "zh-min",
    "zh-min-nan", "zh-xiang",
];

fn alpha(s: &str, min: usize, max: usize) -> bool {
    (min..=max).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_alphabetic())
}

fn alnum(s: &str, min: usize, max: usize) -> bool {
    (min..=max).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_alphanumeric())
}

fn is_variant(s: &str) -> bool {
    alnum(s, 5, 8) || (s.len() == 4 && s.as_bytes()[0].is_ascii_digit() && alnum(s, 4, 4))
}

fn is_region(s: &str) -> bool {
    alpha(s, 2, 2) || (s.len() == 3 && s.bytes().all(|b| b.is_ascii_digit()))
}

fn private_use(parts: &[&str]) -> bool {
    !parts.is_empty() && parts.iter().all(|p| alnum(p, 1, 8))
}

pub fn is_well_formed(tag: &str) -> bool {
    if tag.is_empty() || !tag.is_ascii() {
        return false;
    }
    let lower = tag.to_ascii_lowercase();
    if IRREGULAR.contains(&lower.as_str()) || REGULAR.contains(&lower.as_str()) {
        return true;
    }
    let parts: Vec<&str> = lower.split('-').collect();
    if parts[0] == "x" {
        return private_use(&parts[1..]);
    }

    let lang = parts[0];
    let mut i = 1;
    if alpha(lang, 2, 3) {
        // Up to three extended language subtags.
        let mut ext = 0;
        while ext < 3 && i < parts.len() && alpha(parts[i], 3, 3) {
            i += 1;
            ext += 1;
        }
    } else if !alpha(lang, 4, 8) {
        return false;
    }
    if i < parts.len() && alpha(parts[i], 4, 4) {
        i += 1;
    }
    if i < parts.len() && is_region(parts[i]) {
        i += 1;
    }
    while i < parts.len() && is_variant(parts[i]) {
        i += 1;
    }
    while i < parts.len() && parts[i].len() == 1 && parts[i] != "x" {
        if !alnum(parts[i], 1, 1) {
            return false;
        }
        i += 1;
        let start = i;
        while i < parts.len() && alnum(parts[i], 2, 8) {
            i += 1;
        }
        if i == start {
            return false;
        }
    }
    if i < parts.len() && parts[i] == "x" {
        return private_use(&parts[i + 1..]);
    }
    i == parts.len()
}
