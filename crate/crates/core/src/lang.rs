//! Language identification.
//!
//! Three members vote on the language of a text sample:
//!
//! * **Script**: a non-Latin script that maps to a single language
//!   (Greek, Hebrew, kana, Hangul, Thai) decides immediately.
//! * **Remote**: an optional external classifier, trusted at or above
//!   [`REMOTE_THRESHOLD`].
//! * **Statistical**: rank-order ("out-of-place") distance between
//!   character trigram profiles.
//!
//! Profiles for ten languages are embedded; they are rebuilt from the
//! corpora under `data/lang/corpus` with
//! `cargo run -p altgen-core --example build_profiles`.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Trigrams kept per profile; also the penalty for an absent trigram.
pub const PROFILE_SIZE: usize = 300;
/// Minimum number of letters the statistical member accepts.
pub const MIN_LETTERS: usize = 40;
pub const SCRIPT_CONFIDENCE: f64 = 0.95;
pub const SCRIPT_SHARE: f64 = 0.9;
pub const REMOTE_THRESHOLD: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LangError {
    #[error("text has {0} letters, at least {MIN_LETTERS} are needed")]
    TextTooShort(usize),
    #[error("no language profiles loaded")]
    NoProfiles,
    #[error("language could not be determined")]
    Undetermined,
    #[error("invalid profile for `{lang}`: {reason}")]
    InvalidProfile { lang: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Member {
    Statistical,
    Script,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageVote {
    pub member: Member,
    pub lang: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageProfile {
    pub lang: String,
    pub ranked_trigrams: Vec<String>,
}

/// Lowercases letters and turns every other character into a space.
pub fn normalize(text: &str) -> String {
    text.chars()
        .flat_map(|c| {
            let keep = c.is_alphabetic();
            let lower: Vec<char> = if keep { c.to_lowercase().collect() } else { vec![' '] };
            lower
        })
        .collect()
}

pub fn letter_count(text: &str) -> usize {
    text.chars().filter(|c| c.is_alphabetic()).count()
}

/// Trigram frequencies of the normalized text; each word is padded with a
/// single space on both sides.
pub fn trigram_counts(text: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for word in normalize(text).split_whitespace() {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(word.chars())
            .chain(std::iter::once(' '))
            .collect();
        for w in padded.windows(3) {
            *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
        }
    }
    counts
}

/// The `k` most frequent trigrams; equal counts are ordered by the trigram.
pub fn rank_trigrams(text: &str, k: usize) -> Vec<String> {
    let mut counts: Vec<(String, usize)> = trigram_counts(text).into_iter().collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    counts.into_iter().take(k).map(|(t, _)| t).collect()
}

fn valid_trigram(t: &str) -> bool {
    let chars: Vec<char> = t.chars().collect();
    chars.len() == 3
        && chars
            .iter()
            .all(|&c| c == ' ' || (c.is_alphabetic() && !c.is_uppercase()))
        && chars[1] != ' '
}

impl LanguageProfile {
    pub fn from_text(lang: &str, text: &str) -> Self {
        Self {
            lang: lang.to_string(),
            ranked_trigrams: rank_trigrams(text, PROFILE_SIZE),
        }
    }

    /// Reads the file format: one trigram per line, most frequent first.
    /// Lines are not trimmed because trigrams carry padding spaces.
    pub fn parse(lang: &str, contents: &str) -> Result<Self, LangError> {
        let invalid = |reason: String| LangError::InvalidProfile {
            lang: lang.to_string(),
            reason,
        };
        let mut seen = HashSet::new();
        let mut ranked = Vec::new();
        for (n, line) in contents.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            if !valid_trigram(line) {
                return Err(invalid(format!("line {}: `{line}` is not a trigram", n + 1)));
            }
            if !seen.insert(line) {
                return Err(invalid(format!("line {}: duplicate `{line}`", n + 1)));
            }
            ranked.push(line.to_string());
        }
        if ranked.is_empty() || ranked.len() > PROFILE_SIZE {
            return Err(invalid(format!("{} trigrams", ranked.len())));
        }
        Ok(Self {
            lang: lang.to_string(),
            ranked_trigrams: ranked,
        })
    }

    pub fn to_file_contents(&self) -> String {
        let mut out = String::new();
        for t in &self.ranked_trigrams {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    /// Out-of-place distance from a document's ranked trigrams.
    pub fn distance(&self, doc: &[String]) -> usize {
        let ranks: HashMap<&str, usize> = self
            .ranked_trigrams
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        doc.iter()
            .enumerate()
            .map(|(i, t)| match ranks.get(t.as_str()) {
                Some(&r) => r.abs_diff(i),
                None => PROFILE_SIZE,
            })
            .sum()
    }
}

macro_rules! embedded {
    ($($lang:literal),*) => {
        &[$(($lang, include_str!(concat!("../data/lang/profiles/", $lang, ".profile")))),*]
    };
}

/// `(subtag, profile file)` pairs compiled into the library.
pub const EMBEDDED_PROFILES: &[(&str, &str)] =
    embedded!("de", "en", "es", "fi", "fr", "it", "nl", "pl", "pt", "sv");

pub fn builtin_profiles() -> &'static [LanguageProfile] {
    static PROFILES: OnceLock<Vec<LanguageProfile>> = OnceLock::new();
    PROFILES.get_or_init(|| {
        EMBEDDED_PROFILES
            .iter()
            .map(|(lang, body)| LanguageProfile::parse(lang, body).expect("embedded profile"))
            .collect()
    })
}

pub fn detect_statistical(
    text: &str,
    profiles: &[LanguageProfile],
) -> Result<LanguageVote, LangError> {
    let letters = letter_count(text);
    if letters < MIN_LETTERS {
        return Err(LangError::TextTooShort(letters));
    }
    if profiles.is_empty() {
        return Err(LangError::NoProfiles);
    }
    let doc = rank_trigrams(text, PROFILE_SIZE);
    let (best, d) = profiles
        .iter()
        .map(|p| (p, p.distance(&doc)))
        .min_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.lang.cmp(&b.0.lang)))
        .expect("profiles non-empty");
    let d_max = (PROFILE_SIZE * PROFILE_SIZE) as f64;
    Ok(LanguageVote {
        member: Member::Statistical,
        lang: best.lang.clone(),
        confidence: (1.0 - d as f64 / d_max).clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Script {
    Greek,
    Hebrew,
    Kana,
    Han,
    Hangul,
    Thai,
    Other,
}

fn script_of(c: char) -> Script {
    match c as u32 {
        0x0370..=0x03FF | 0x1F00..=0x1FFF => Script::Greek,
        0x0590..=0x05FF | 0xFB1D..=0xFB4F => Script::Hebrew,
        0x3040..=0x30FF | 0x31F0..=0x31FF | 0xFF66..=0xFF9F => Script::Kana,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF => Script::Han,
        0x1100..=0x11FF | 0x3130..=0x318F | 0xAC00..=0xD7AF => Script::Hangul,
        0x0E00..=0x0E7F => Script::Thai,
        _ => Script::Other,
    }
}

/// Japanese text mixes kana with Han ideographs, so Han letters count
/// toward Japanese once any kana is present.
pub fn detect_script(text: &str) -> Option<LanguageVote> {
    let mut counts: HashMap<Script, usize> = HashMap::new();
    let mut total = 0usize;
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        total += 1;
        *counts.entry(script_of(c)).or_insert(0) += 1;
    }
    if total == 0 {
        return None;
    }
    let get = |s| counts.get(&s).copied().unwrap_or(0);
    let kana = get(Script::Kana);
    let candidates = [
        ("el", get(Script::Greek)),
        ("he", get(Script::Hebrew)),
        ("ja", if kana > 0 { kana + get(Script::Han) } else { 0 }),
        ("ko", get(Script::Hangul)),
        ("th", get(Script::Thai)),
    ];
    candidates
        .into_iter()
        .find(|&(_, n)| n > 0 && n as f64 >= SCRIPT_SHARE * total as f64)
        .map(|(lang, _)| LanguageVote {
            member: Member::Script,
            lang: lang.to_string(),
            confidence: SCRIPT_CONFIDENCE,
        })
}

/// An external classifier taking part in the vote.
pub trait LanguageMember: Send + Sync {
    fn detect(&self, text: &str) -> Option<(String, f64)>;
}

#[derive(Clone, Copy)]
pub struct EnsembleConfig<'a> {
    pub profiles: &'a [LanguageProfile],
    pub remote: Option<&'a dyn LanguageMember>,
}

impl Default for EnsembleConfig<'static> {
    fn default() -> Self {
        Self {
            profiles: builtin_profiles(),
            remote: None,
        }
    }
}

fn primary_subtag(tag: &str) -> String {
    tag.trim()
        .split(['-', '_'])
        .next()
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Script beats Remote (when confident enough), which beats Statistical.
pub fn detect_language(text: &str, config: &EnsembleConfig) -> Result<LanguageVote, LangError> {
    if let Some(vote) = detect_script(text) {
        return Ok(vote);
    }
    if let Some(remote) = config.remote {
        if let Some((lang, confidence)) = remote.detect(text) {
            let lang = primary_subtag(&lang);
            let plausible = (2..=3).contains(&lang.len()) && lang.bytes().all(|b| b.is_ascii_lowercase());
            if plausible && confidence.is_finite() && (REMOTE_THRESHOLD..=1.0).contains(&confidence) {
                return Ok(LanguageVote {
                    member: Member::Remote,
                    lang,
                    confidence,
                });
            }
        }
    }
    detect_statistical(text, config.profiles).map_err(|_| LangError::Undetermined)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigrams_are_padded_per_word() {
        let counts = trigram_counts("Ab, ab!");
        assert_eq!(counts.get(" ab"), Some(&2));
        assert_eq!(counts.get("ab "), Some(&2));
        assert_eq!(counts.len(), 2);
        assert_eq!(trigram_counts("a").get(" a "), Some(&1));
    }

    #[test]
    fn ranking_breaks_ties_by_trigram() {
        assert_eq!(rank_trigrams("ba ab", 10), vec![" ab", " ba", "ab ", "ba "]);
    }

    #[test]
    fn distance_counts_out_of_place() {
        let p = LanguageProfile {
            lang: "xx".into(),
            ranked_trigrams: vec!["abc".into(), "bcd".into()],
        };
        let doc = vec!["bcd".to_string(), "abc".to_string(), "zzz".to_string()];
        assert_eq!(p.distance(&doc), 1 + 1 + PROFILE_SIZE);
    }

    #[test]
    fn profile_parse_rejects_bad_lines() {
        assert!(LanguageProfile::parse("xx", " ab\nabc\n").is_ok());
        assert!(LanguageProfile::parse("xx", "abc\nabc\n").is_err());
        assert!(LanguageProfile::parse("xx", "ABC\n").is_err());
        assert!(LanguageProfile::parse("xx", "ab1\n").is_err());
        assert!(LanguageProfile::parse("xx", "").is_err());
    }

    #[test]
    fn builtin_profiles_are_full() {
        let profiles = builtin_profiles();
        assert_eq!(profiles.len(), 10);
        assert!(profiles.iter().all(|p| p.ranked_trigrams.len() == PROFILE_SIZE));
    }

    #[test]
    fn short_text_is_rejected() {
        assert_eq!(
            detect_statistical("0123456789", builtin_profiles()),
            Err(LangError::TextTooShort(0))
        );
        assert_eq!(
            detect_statistical("ten letter", builtin_profiles()),
            Err(LangError::TextTooShort(9))
        );
        assert_eq!(
            detect_statistical(&"word ".repeat(20), &[]),
            Err(LangError::NoProfiles)
        );
    }

    #[test]
    fn english_sentence() {
        let text = "The quick brown fox jumps over the lazy dog and keeps running through the quiet field";
        let four: Vec<LanguageProfile> = builtin_profiles()
            .iter()
            .filter(|p| ["en", "es", "de", "fr"].contains(&p.lang.as_str()))
            .cloned()
            .collect();
        assert_eq!(detect_statistical(text, &four).unwrap().lang, "en");
        assert_eq!(detect_statistical(text, builtin_profiles()).unwrap().lang, "en");
    }

    #[test]
    fn training_corpus_matches_itself_exactly() {
        let corpus = include_str!("../data/lang/corpus/es.txt");
        let vote = detect_statistical(corpus, builtin_profiles()).unwrap();
        assert_eq!(vote.lang, "es");
        assert_eq!(vote.confidence, 1.0);
    }

    #[test]
    fn script_votes() {
        let vote = detect_script("Ελληνική γλώσσα και κείμενο").unwrap();
        assert_eq!((vote.lang.as_str(), vote.confidence), ("el", 0.95));
        assert_eq!(detect_script("שלום עולם, מה שלומך היום").unwrap().lang, "he");
        assert_eq!(detect_script("日本語の文章です。ひらがなとカタカナ").unwrap().lang, "ja");
        assert_eq!(detect_script("한국어 문장입니다").unwrap().lang, "ko");
        assert_eq!(detect_script("ภาษาไทยเป็นภาษาที่สวยงาม").unwrap().lang, "th");
        assert_eq!(detect_script("Plain English text only"), None);
        assert_eq!(detect_script("中文文本没有假名"), None);
        assert_eq!(detect_script(""), None);
    }

    #[test]
    fn half_greek_half_latin_abstains() {
        // 10 Greek letters, 10 Latin letters.
        let text = "αβγδεζηθικ abcdefghij";
        assert_eq!(letter_count(text), 20);
        assert_eq!(detect_script(text), None);
        // 18 of 20 is exactly the threshold.
        assert_eq!(detect_script("αβγδεζηθικλμνξοπρσ ab").unwrap().lang, "el");
        assert_eq!(detect_script("αβγδεζηθικλμνξοπρ abc"), None);
    }

    struct Fixed(&'static str, f64);
    impl LanguageMember for Fixed {
        fn detect(&self, _: &str) -> Option<(String, f64)> {
            Some((self.0.to_string(), self.1))
        }
    }

    #[test]
    fn fusion_precedence() {
        let greek = "Ελληνική γλώσσα και κείμενο";
        let remote = Fixed("fr", 0.99);
        let cfg = EnsembleConfig {
            remote: Some(&remote),
            ..Default::default()
        };
        let vote = detect_language(greek, &cfg).unwrap();
        assert_eq!((vote.member, vote.lang.as_str()), (Member::Script, "el"));

        let english = include_str!("../data/lang/corpus/en.txt");
        let vote = detect_language(english, &cfg).unwrap();
        assert_eq!((vote.member, vote.lang.as_str(), vote.confidence), (Member::Remote, "fr", 0.99));

        let weak = Fixed("fr-CA", 0.79);
        let cfg = EnsembleConfig {
            remote: Some(&weak),
            ..Default::default()
        };
        let vote = detect_language(english, &cfg).unwrap();
        assert_eq!((vote.member, vote.lang.as_str()), (Member::Statistical, "en"));
        assert!(vote.confidence > 0.5);

        let strong = Fixed("PT-br", 0.8);
        let cfg = EnsembleConfig {
            remote: Some(&strong),
            ..Default::default()
        };
        assert_eq!(detect_language(english, &cfg).unwrap().lang, "pt");
    }

    #[test]
    fn empty_text_is_undetermined() {
        assert_eq!(
            detect_language("", &EnsembleConfig::default()),
            Err(LangError::Undetermined)
        );
    }
}
