//! Caption and embedding backends.
//!
//! [`StubBackend`] is deterministic and offline. [`RemoteBackend`] speaks a
//! small JSON-over-HTTP protocol:
//!
//! | endpoint            | request                         | response                            |
//! |---------------------|---------------------------------|-------------------------------------|
//! | `POST /v1/caption`  | image, media type, context, ... | `{"alt_text": str, "confidence": n}` |
//! | `POST /v1/embed`    | `{"texts": [str]}`              | `{"embeddings": [[n]]}`             |
//! | `POST /v1/language` | `{"text": str}`                 | `{"lang": str, "confidence": n}`    |
//!
//! Error responses carry `{"error": str}`.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::ContextBundle;
use crate::lang::LanguageMember;
use crate::metrics::tokenize;
use crate::path;

pub const DEFAULT_MAX_LENGTH: usize = 250;
pub const MIN_MAX_LENGTH: usize = 20;
pub const MAX_MAX_LENGTH: usize = 1000;
pub const MAX_EMBED_TEXT: usize = 2000;
pub const MEDIA_TYPES: &[&str] = &["image/jpeg", "image/png", "image/gif", "image/svg+xml", "image/webp"];
pub const STUB_ID: &str = "stub";
const STUB_CONTEXT_WORDS: usize = 8;
const BODY_EXCERPT: usize = 200;

pub const ENV_URL: &str = "ALTGEN_BACKEND_URL";
pub const ENV_TOKEN: &str = "ALTGEN_BACKEND_TOKEN";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend rejected request with status {status}: {body}")]
    BackendRejected { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("invalid alt candidate: {0}")]
    CandidateInvalid(String),
    #[error("expected {expected} embeddings, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionRequest {
    pub image_bytes: Vec<u8>,
    pub media_type: String,
    pub context: ContextBundle,
    pub max_length: usize,
    pub language: Option<String>,
    /// Archive path of the image; local only, never sent.
    pub source_path: String,
}

impl CaptionRequest {
    pub fn new(source_path: &str, image_bytes: Vec<u8>, media_type: &str, context: ContextBundle) -> Self {
        Self {
            image_bytes,
            media_type: media_type.to_string(),
            context,
            max_length: DEFAULT_MAX_LENGTH,
            language: None,
            source_path: source_path.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !MEDIA_TYPES.contains(&self.media_type.as_str()) {
            return Err(BackendError::InvalidRequest(format!(
                "unsupported media type `{}`",
                self.media_type
            )));
        }
        if !(MIN_MAX_LENGTH..=MAX_MAX_LENGTH).contains(&self.max_length) {
            return Err(BackendError::InvalidRequest(format!(
                "max_length {} outside [{MIN_MAX_LENGTH}, {MAX_MAX_LENGTH}]",
                self.max_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltCandidate {
    pub alt_text: String,
    pub confidence: f64,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

pub trait CaptionBackend: Send + Sync {
    fn id(&self) -> &str;
    fn generate_alt(&self, request: &CaptionRequest) -> Result<AltCandidate, BackendError>;
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError>;
    /// Optional language vote; `None` when unsupported or failed.
    fn detect_language(&self, _text: &str) -> Option<(String, f64)> {
        None
    }
}

/// Lets a backend take part in language detection.
pub struct BackendLanguage<'a>(pub &'a dyn CaptionBackend);

impl LanguageMember for BackendLanguage<'_> {
    fn detect(&self, text: &str) -> Option<(String, f64)> {
        self.0.detect_language(text)
    }
}

/// Collapses whitespace and cuts at a word boundary so the result, ending
/// with a period, has at most `max` characters.
pub fn fit_length(text: &str, max: usize) -> String {
    let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if text.chars().count() <= max {
        return text;
    }
    let head: String = text.chars().take(max.saturating_sub(1)).collect();
    let at_boundary = text.chars().nth(head.chars().count()) == Some(' ');
    let cut = match head.rfind(' ') {
        _ if at_boundary => head.as_str(),
        Some(i) if i > 0 => &head[..i],
        _ => head.as_str(),
    };
    let cut = cut.trim_end_matches(|c: char| !c.is_alphanumeric());
    let cut = if cut.is_empty() { head.as_str() } else { cut };
    format!("{cut}.")
}

/// Checks and normalizes a candidate against the request's limits.
pub fn check_candidate(
    alt_text: &str,
    confidence: f64,
    max_length: usize,
    backend_id: &str,
) -> Result<AltCandidate, BackendError> {
    if alt_text.contains(['\n', '\r', '\u{2028}', '\u{2029}']) {
        return Err(BackendError::CandidateInvalid("alt text contains a line break".into()));
    }
    if !confidence.is_finite() || !(0.0..=1.0).contains(&confidence) {
        return Err(BackendError::CandidateInvalid(format!("confidence {confidence} outside [0, 1]")));
    }
    let alt_text = fit_length(alt_text, max_length);
    if alt_text.is_empty() {
        return Err(BackendError::CandidateInvalid("alt text is empty".into()));
    }
    Ok(AltCandidate {
        alt_text,
        confidence,
        backend_id: backend_id.to_string(),
    })
}

fn check_texts(texts: &[String]) -> Result<(), BackendError> {
    if texts.is_empty() {
        return Err(BackendError::InvalidRequest("no texts to embed".into()));
    }
    match texts.iter().position(|t| t.chars().count() > MAX_EMBED_TEXT) {
        Some(i) => Err(BackendError::InvalidRequest(format!(
            "text #{i} exceeds {MAX_EMBED_TEXT} characters"
        ))),
        None => Ok(()),
    }
}

/// Text of the first `<title>` element in an SVG document.
pub fn svg_title(svg: &[u8]) -> Option<String> {
    let doc = crate::xhtml::Document::parse(svg).ok()?;
    let title = doc.elements("title").next()?;
    let text = crate::xhtml::normalize_ws(&doc.text_content(title));
    (!text.is_empty()).then_some(text)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend;

impl StubBackend {
    fn context_words(ctx: &ContextBundle) -> Vec<String> {
        let words = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let pick = [ctx.figcaption.as_deref(), ctx.nearest_heading.as_deref()]
            .into_iter()
            .flatten()
            .map(words)
            .find(|w| !w.is_empty());
        let mut chosen = match pick {
            Some(w) => w.into_iter().take(STUB_CONTEXT_WORDS).collect(),
            None => {
                let before = words(&ctx.preceding_text);
                if before.is_empty() {
                    words(&ctx.following_text).into_iter().take(STUB_CONTEXT_WORDS).collect()
                } else {
                    let skip = before.len().saturating_sub(STUB_CONTEXT_WORDS);
                    before.into_iter().skip(skip).collect::<Vec<_>>()
                }
            }
        };
        while let Some(last) = chosen.last_mut() {
            let trimmed = last.trim_end_matches(|c: char| !c.is_alphanumeric()).to_string();
            if trimmed.is_empty() {
                chosen.pop();
            } else {
                *last = trimmed;
                break;
            }
        }
        chosen
    }
}

impl CaptionBackend for StubBackend {
    fn id(&self) -> &str {
        STUB_ID
    }

    /// `Image: <stem>. Context: <words>.` with at most eight context words
    /// taken from the caption, else the heading, else the nearest text.
    fn generate_alt(&self, request: &CaptionRequest) -> Result<AltCandidate, BackendError> {
        request.validate()?;
        let stem = match path::file_stem(&request.source_path) {
            "" => "image",
            s => s,
        };
        let mut text = format!("Image: {stem}.");
        if request.media_type == "image/svg+xml" {
            if let Some(title) = svg_title(&request.image_bytes) {
                text.push_str(&format!(" Title: {}.", title.trim_end_matches('.')));
            }
        }
        let words = Self::context_words(&request.context);
        if !words.is_empty() {
            text.push_str(&format!(" Context: {}.", words.join(" ")));
        }
        let confidence = if words.is_empty() { 0.5 } else { 0.6 };
        check_candidate(&text, confidence, request.max_length, STUB_ID)
    }

    /// L2-normalized term frequencies over the batch vocabulary.
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        check_texts(texts)?;
        let tokenized: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
        let mut vocab = BTreeMap::new();
        for t in tokenized.iter().flatten() {
            vocab.entry(t.clone()).or_insert(0usize);
        }
        for (i, v) in vocab.values_mut().enumerate() {
            *v = i;
        }
        Ok(tokenized
            .iter()
            .map(|tokens| {
                let mut values = vec![0.0; vocab.len()];
                for t in tokens {
                    values[vocab[t]] += 1.0;
                }
                let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    values.iter_mut().for_each(|x| *x /= norm);
                }
                EmbeddingVector { values }
            })
            .collect())
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub base_url: String,
    pub token: Option<String>,
    pub timeout: Duration,
    /// Wait before each retry; retries happen on connection failures only.
    pub retry_delays: Vec<Duration>,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(base_url: &str) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            token: None,
            timeout: Duration::from_secs(60),
            retry_delays: vec![Duration::from_millis(500), Duration::from_secs(2)],
            max_in_flight: 4,
        }
    }

    /// Reads the URL and optional token from the environment.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(ENV_URL).ok().filter(|u| !u.trim().is_empty())?;
        let mut cfg = Self::new(url.trim());
        cfg.token = std::env::var(ENV_TOKEN).ok().filter(|t| !t.is_empty());
        Some(cfg)
    }
}

#[derive(Serialize)]
struct CaptionWire<'a> {
    image_base64: String,
    media_type: &'a str,
    context: &'a ContextBundle,
    max_length: usize,
    language: Option<&'a str>,
}

#[derive(Serialize)]
struct EmbedWire<'a> {
    texts: &'a [String],
}

#[derive(Serialize)]
struct LanguageWire<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct CaptionReply {
    alt_text: String,
    confidence: f64,
}

#[derive(Deserialize)]
struct EmbedReply {
    embeddings: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct LanguageReply {
    lang: String,
    confidence: f64,
}

#[derive(Deserialize)]
struct ErrorReply {
    error: String,
}

/// Serialized `/v1/caption` body.
pub fn caption_body(request: &CaptionRequest) -> Vec<u8> {
    let wire = CaptionWire {
        image_base64: base64::engine::general_purpose::STANDARD.encode(&request.image_bytes),
        media_type: &request.media_type,
        context: &request.context,
        max_length: request.max_length,
        language: request.language.as_deref(),
    };
    serde_json::to_vec(&wire).expect("caption request serializes")
}

/// Serialized `/v1/embed` body.
pub fn embed_body(texts: &[String]) -> Vec<u8> {
    serde_json::to_vec(&EmbedWire { texts }).expect("embed request serializes")
}

fn excerpt(body: &[u8]) -> String {
    let text = match serde_json::from_slice::<ErrorReply>(body) {
        Ok(reply) => reply.error,
        Err(_) => String::from_utf8_lossy(body).into_owned(),
    };
    text.chars().take(BODY_EXCERPT).collect()
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::BackendUnavailable(e.to_string()))?;
        Ok(Self {
            gate: Gate::new(config.max_in_flight),
            config,
            client,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn post_once(&self, url: &str, body: &[u8]) -> Result<Vec<u8>, BackendError> {
        let mut req = self
            .client
            .post(url)
            .header("Content-Type", "application/json")
            .body(body.to_vec());
        if let Some(token) = &self.config.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let resp = req
            .send()
            .map_err(|e| BackendError::BackendUnavailable(e.to_string()))?;
        let status = resp.status();
        let bytes = resp
            .bytes()
            .map_err(|e| BackendError::BackendUnavailable(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::BackendRejected {
                status: status.as_u16(),
                body: excerpt(&bytes),
            });
        }
        Ok(bytes.to_vec())
    }

    fn post(&self, endpoint: &str, body: &[u8]) -> Result<Vec<u8>, BackendError> {
        let url = format!("{}{endpoint}", self.config.base_url);
        let _permit = self.gate.acquire();
        let mut delays = self.config.retry_delays.iter();
        loop {
            match self.post_once(&url, body) {
                Err(BackendError::BackendUnavailable(msg)) => match delays.next() {
                    Some(d) => std::thread::sleep(*d),
                    None => return Err(BackendError::BackendUnavailable(msg)),
                },
                other => return other,
            }
        }
    }
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, BackendError> {
    serde_json::from_slice(body).map_err(|e| BackendError::MalformedResponse(e.to_string()))
}

impl CaptionBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.config.base_url
    }

    fn generate_alt(&self, request: &CaptionRequest) -> Result<AltCandidate, BackendError> {
        request.validate()?;
        let reply: CaptionReply = parse(&self.post("/v1/caption", &caption_body(request))?)?;
        check_candidate(&reply.alt_text, reply.confidence, request.max_length, self.id())
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        check_texts(texts)?;
        let reply: EmbedReply = parse(&self.post("/v1/embed", &embed_body(texts))?)?;
        if reply.embeddings.len() != texts.len() {
            return Err(BackendError::LengthMismatch {
                expected: texts.len(),
                got: reply.embeddings.len(),
            });
        }
        let dim = reply.embeddings.first().map_or(0, Vec::len);
        if reply
            .embeddings
            .iter()
            .any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite()))
        {
            return Err(BackendError::MalformedResponse(
                "embeddings differ in length or contain non-finite values".into(),
            ));
        }
        Ok(reply
            .embeddings
            .into_iter()
            .map(|values| EmbeddingVector { values })
            .collect())
    }

    fn detect_language(&self, text: &str) -> Option<(String, f64)> {
        let body = serde_json::to_vec(&LanguageWire { text }).ok()?;
        let reply: LanguageReply = parse(&self.post("/v1/language", &body).ok()?).ok()?;
        Some((reply.lang, reply.confidence))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cosine_similarity;

    fn request(src: &str, ctx: ContextBundle) -> CaptionRequest {
        CaptionRequest::new(src, crate::fixtures::TINY_PNG.to_vec(), "image/png", ctx)
    }

    #[test]
    fn stub_without_context() {
        let c = StubBackend.generate_alt(&request("OEBPS/fox.png", ContextBundle::default())).unwrap();
        assert_eq!(c.alt_text, "Image: fox.");
        assert_eq!(c.backend_id, "stub");
    }

    #[test]
    fn stub_context_priority() {
        let ctx = ContextBundle {
            figcaption: Some("Map of Amsterdam canals".into()),
            nearest_heading: Some("Travel".into()),
            preceding_text: "Before it.".into(),
            ..Default::default()
        };
        let c = StubBackend.generate_alt(&request("OEBPS/fox.png", ctx.clone())).unwrap();
        assert_eq!(c.alt_text, "Image: fox. Context: Map of Amsterdam canals.");

        let ctx = ContextBundle { figcaption: None, ..ctx };
        let c = StubBackend.generate_alt(&request("fox.png", ctx)).unwrap();
        assert_eq!(c.alt_text, "Image: fox. Context: Travel.");

        let ctx = ContextBundle {
            preceding_text: "one two three four five six seven eight nine ten.".into(),
            following_text: "after".into(),
            ..Default::default()
        };
        let c = StubBackend.generate_alt(&request("fox.png", ctx)).unwrap();
        assert_eq!(c.alt_text, "Image: fox. Context: three four five six seven eight nine ten.");

        let ctx = ContextBundle {
            following_text: "alpha beta gamma delta epsilon zeta eta theta iota kappa".into(),
            ..Default::default()
        };
        let c = StubBackend.generate_alt(&request("fox.png", ctx)).unwrap();
        assert_eq!(c.alt_text, "Image: fox. Context: alpha beta gamma delta epsilon zeta eta theta.");
    }

    #[test]
    fn stub_reads_svg_title() {
        let svg = br#"<svg xmlns="http://www.w3.org/2000/svg"><title>Bar chart of rainfall</title></svg>"#;
        let req = CaptionRequest::new("Images/rain.svg", svg.to_vec(), "image/svg+xml", ContextBundle::default());
        assert_eq!(
            StubBackend.generate_alt(&req).unwrap().alt_text,
            "Image: rain. Title: Bar chart of rainfall."
        );
    }

    #[test]
    fn stub_honours_max_length() {
        let ctx = ContextBundle {
            figcaption: Some("A very long caption about many different things".into()),
            ..Default::default()
        };
        let mut req = request("OEBPS/photograph.png", ctx);
        req.max_length = 30;
        let c = StubBackend.generate_alt(&req).unwrap();
        assert!(c.alt_text.chars().count() <= 30, "{}", c.alt_text);
        assert_eq!(c.alt_text, "Image: photograph. Context: A.");
    }

    #[test]
    fn request_validation() {
        let mut req = request("a.png", ContextBundle::default());
        req.media_type = "image/bmp".into();
        assert!(matches!(StubBackend.generate_alt(&req), Err(BackendError::InvalidRequest(_))));
        let mut req = request("a.png", ContextBundle::default());
        req.max_length = 19;
        assert!(req.validate().is_err());
        req.max_length = 1001;
        assert!(req.validate().is_err());
        req.max_length = 20;
        assert!(req.validate().is_ok());
    }

    #[test]
    fn fit_length_cases() {
        assert_eq!(fit_length("short", 10), "short");
        assert_eq!(fit_length("one two three four", 12), "one two.");
        assert_eq!(fit_length("abcdefghijklmnop", 6), "abcde.");
        assert_eq!(fit_length("a\n b", 10), "a b");
    }

    #[test]
    fn candidate_checks() {
        assert!(matches!(check_candidate("", 0.5, 100, "x"), Err(BackendError::CandidateInvalid(_))));
        assert!(matches!(check_candidate("a\nb", 0.5, 100, "x"), Err(BackendError::CandidateInvalid(_))));
        assert!(matches!(check_candidate("ok", 1.5, 100, "x"), Err(BackendError::CandidateInvalid(_))));
        assert!(matches!(check_candidate("ok", f64::NAN, 100, "x"), Err(BackendError::CandidateInvalid(_))));
        assert_eq!(check_candidate("  A red fox. ", 0.9, 100, "x").unwrap().alt_text, "A red fox.");
    }

    #[test]
    fn stub_embeddings() {
        let e = |a: &str, b: &str| StubBackend.embed_texts(&[a.into(), b.into()]).unwrap();
        let v = e("a b", "a b");
        assert_eq!(v[0], v[1]);
        let v = e("a a", "b b");
        assert_eq!(v[0].values.iter().zip(&v[1].values).map(|(x, y)| x * y).sum::<f64>(), 0.0);
        let v = e("a b", "a c");
        assert!((cosine_similarity(&v[0].values, &v[1].values).unwrap() - 0.5).abs() < 1e-12);
        let v = e("...", "a");
        assert!(v[0].values.iter().all(|&x| x == 0.0));
        assert!(StubBackend.embed_texts(&[]).is_err());
        assert!(StubBackend.embed_texts(&["x".repeat(2001)]).is_err());
    }

    #[test]
    fn wire_bodies_follow_schema_order() {
        let ctx = ContextBundle {
            figcaption: None,
            preceding_text: "p".into(),
            following_text: "f".into(),
            nearest_heading: Some("h".into()),
            doc_title: None,
        };
        let mut req = CaptionRequest::new("x.png", b"abc".to_vec(), "image/png", ctx);
        req.language = Some("en".into());
        assert_eq!(
            String::from_utf8(caption_body(&req)).unwrap(),
            r#"{"image_base64":"YWJj","media_type":"image/png","context":{"figcaption":null,"preceding_text":"p","following_text":"f","nearest_heading":"h","doc_title":null},"max_length":250,"language":"en"}"#
        );
        assert_eq!(String::from_utf8(embed_body(&["a".into(), "\"b\"".into()])).unwrap(), r#"{"texts":["a","\"b\""]}"#);
    }

    #[test]
    fn gate_limits_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let gate = Gate::new(2);
        let active = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _p = gate.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    active.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn unreachable_backend_is_unavailable() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        drop(listener);
        let mut cfg = RemoteConfig::new(&format!("http://127.0.0.1:{port}"));
        cfg.retry_delays = vec![Duration::ZERO; 2];
        let backend = RemoteBackend::new(cfg).unwrap();
        let err = backend.generate_alt(&request("a.png", ContextBundle::default())).unwrap_err();
        assert!(matches!(err, BackendError::BackendUnavailable(_)), "{err:?}");
        assert_eq!(backend.detect_language("hello"), None);
    }
}
