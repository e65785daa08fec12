use std::sync::OnceLock;

use altgen_core::audit::{audit, IssueCode};
use altgen_core::content::{find_images, set_alt_text};
use altgen_core::enrichment::{enrich_metadata, EnrichOptions};
use altgen_core::fixtures::{BookSpec, Chapter, ImageSpec};
use altgen_core::lang::{detect_language, EnsembleConfig, LangError, LanguageMember, LanguageVote, Member};
use altgen_core::metrics::{bleu, cosine_similarity, tokenize, BleuOptions};
use altgen_core::ocf::{self, open_epub, write_epub, ArchiveEntry, Compression, EpubArchive};
use altgen_core::opf::read_package;
use altgen_core::reconstruct::rebuild;
use altgen_core::xhtml::is_well_formed;
use proptest::prelude::*;

fn corpus() -> &'static [String] {
    static TEXTS: OnceLock<Vec<String>> = OnceLock::new();
    TEXTS.get_or_init(|| {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/lang/corpus");
        let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect()
    })
}

fn excerpt() -> impl Strategy<Value = String> {
    (0..corpus().len(), 0.0..0.8f64, 150..600usize).prop_map(|(i, start, len)| {
        let chars: Vec<char> = corpus()[i].chars().collect();
        let s = (start * chars.len() as f64) as usize;
        chars[s..(s + len).min(chars.len())].iter().collect()
    })
}

fn detect(text: &str) -> Result<LanguageVote, LangError> {
    detect_language(text, &EnsembleConfig::default())
}

struct Fixed(&'static str, f64);

impl LanguageMember for Fixed {
    fn detect(&self, _: &str) -> Option<(String, f64)> {
        Some((self.0.to_string(), self.1))
    }
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, 1..12).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-6))
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "red", "fox", "on", "the", "hill", "boat", "sea"]), 1..12)
        .prop_map(|w| w.into_iter().map(str::to_string).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cosine_bounds_and_symmetry(pair in vector().prop_flat_map(|a| {
        let n = a.len();
        (Just(a), prop::collection::vec(-1e3..1e3f64, n).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-6)))
    })) {
        let (a, b) = pair;
        let ab = cosine_similarity(&a, &b).unwrap();
        let ba = cosine_similarity(&b, &a).unwrap();
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_scale_invariant(a in vector(), k in 1e-6..1e6f64) {
        let scaled: Vec<f64> = a.iter().map(|x| x * k).collect();
        prop_assert!((cosine_similarity(&a, &scaled).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_range_identity_and_reference_order(
        c in sentence(), r1 in sentence(), r2 in sentence(), smoothing in any::<bool>()
    ) {
        let o = BleuOptions { max_n: 4, smoothing };
        prop_assert_eq!(bleu(&c, std::slice::from_ref(&c), o).unwrap(), 1.0);
        let s = bleu(&c, &[r1.clone(), r2.clone()], o).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, bleu(&c, &[r2, r1], o).unwrap());
    }

    #[test]
    fn tokenize_is_idempotent(s in "\\PC{0,60}") {
        let once = tokenize(&s);
        prop_assert_eq!(tokenize(&once.join(" ")), once);
    }

    #[test]
    fn ocf_round_trip(
        files in prop::collection::btree_map("[a-z]{1,8}\\.(xhtml|png|css)", prop::collection::vec(any::<u8>(), 0..300), 0..8),
        deflate in prop::collection::vec(any::<bool>(), 8),
    ) {
        let mut entries = vec![
            ArchiveEntry::new(ocf::MIMETYPE_PATH, ocf::MIMETYPE, Compression::Stored),
            ArchiveEntry::new(ocf::CONTAINER_PATH, ocf::container_xml("OEBPS/content.opf"), Compression::Deflated),
            ArchiveEntry::new("OEBPS/content.opf", "<package/>", Compression::Deflated),
        ];
        for (i, (name, data)) in files.into_iter().enumerate() {
            let c = if deflate[i] { Compression::Deflated } else { Compression::Stored };
            entries.push(ArchiveEntry::new(format!("OEBPS/{name}"), data, c));
        }
        let archive = EpubArchive { entries, rootfile_path: "OEBPS/content.opf".into() };
        let bytes = write_epub(&archive).unwrap();
        let reopened = open_epub(&bytes).unwrap();
        prop_assert_eq!(&reopened, &archive);
        prop_assert_eq!(write_epub(&reopened).unwrap(), bytes);
    }

    #[test]
    fn set_alt_touches_only_its_image(n in 1..5usize, pick in 0..5usize, alt in "\\PC{1,40}") {
        let mut spec = BookSpec::clean("p");
        for i in 0..n {
            spec.chapters[0].images.push(ImageSpec::missing_alt(&format!("i{i}.png")));
        }
        let archive = spec.archive();
        let doc = archive.get("OEBPS/Text/ch01.xhtml").unwrap();
        let before = find_images(doc, &doc.path).unwrap();
        let target = &before[pick % before.len()];
        let updated = set_alt_text(doc, target, &alt).unwrap();
        prop_assert!(is_well_formed(&updated.data));
        let after = find_images(&updated, &doc.path).unwrap();
        prop_assert_eq!(after.len(), before.len());
        for (b, a) in before.iter().zip(&after) {
            if b.element_index == target.element_index {
                prop_assert_eq!(a.existing_alt.as_deref(), Some(alt.as_str()));
            } else {
                prop_assert_eq!(a, b);
            }
        }
        // The change is confined to the target's start tag.
        let prefix = doc.data.iter().zip(&updated.data).take_while(|(x, y)| x == y).count();
        let suffix = doc.data.iter().rev().zip(updated.data.iter().rev()).take_while(|(x, y)| x == y).count();
        let end = (doc.data.len() - suffix).max(prefix);
        let tag_start = doc.data[..prefix].iter().rposition(|&b| b == b'<').unwrap();
        prop_assert!(!doc.data[tag_start..prefix].contains(&b'>'));
        prop_assert!(!doc.data[prefix..end].contains(&b'<'));
        prop_assert!(doc.data[tag_start..].starts_with(b"<img"));
    }

    #[test]
    fn detection_is_scale_free(t in excerpt()) {
        let doubled = format!("{t} {t}");
        prop_assert_eq!(detect(&t).ok(), detect(&doubled).ok());
    }

    #[test]
    fn member_precedence(t in excerpt(), conf in 0.8..1.0f64, low in 0.0..0.79f64) {
        let statistical = detect(&t).unwrap();
        let confident = Fixed("ko", conf);
        let vote = detect_language(&t, &EnsembleConfig { remote: Some(&confident), ..Default::default() }).unwrap();
        prop_assert_eq!((vote.member, vote.lang.as_str()), (Member::Remote, "ko"));
        let unsure = Fixed("ko", low);
        let vote = detect_language(&t, &EnsembleConfig { remote: Some(&unsure), ..Default::default() }).unwrap();
        prop_assert_eq!(vote, statistical);
        let kana = format!("{}{t}", "ひらがなとカタカナのぶんしょうです。".repeat(400));
        let vote = detect_language(&kana, &EnsembleConfig { remote: Some(&confident), ..Default::default() }).unwrap();
        prop_assert_eq!((vote.member, vote.lang.as_str()), (Member::Script, "ja"));
    }

    #[test]
    fn enrichment_is_idempotent(
        lang in prop::option::of(prop::sample::select(vec!["en", "en_GB", "english!", "fr"])),
        title in any::<bool>(),
        a11y in any::<bool>(),
        alt_repair in any::<bool>(),
    ) {
        let mut spec = BookSpec::clean("idem");
        spec.language = lang.map(str::to_string);
        if !title { spec.title = None; }
        spec.accessibility_metadata = a11y;
        let archive = spec.archive();
        let pkg = read_package(&archive).unwrap();
        let opts = EnrichOptions { file_stem: "idem".into(), alt_repair };
        let (once, _) = enrich_metadata(&pkg, &archive, &detect, &opts);
        let (twice, fixes) = enrich_metadata(&once, &archive, &detect, &opts);
        prop_assert_eq!(twice, once.clone());
        prop_assert!(fixes.is_empty());
        // Well-formed existing languages survive.
        for l in pkg.languages() {
            if l == "en" || l == "fr" {
                prop_assert!(once.languages().contains(&l));
            }
        }
    }

    #[test]
    fn fixing_alts_never_adds_errors(mask in prop::collection::vec(any::<bool>(), 6)) {
        let mut spec = BookSpec::clean("mono");
        spec.chapters.push(Chapter::new("Two", vec![]));
        for i in 0..6 {
            spec.chapters[i % 2].images.push(ImageSpec::missing_alt(&format!("m{i}.png")));
        }
        let archive = spec.archive();
        let pkg = read_package(&archive).unwrap();
        let pre = audit(&archive, &pkg);
        let mut docs = Vec::new();
        let mut seen = 0;
        for ch in ["OEBPS/Text/ch01.xhtml", "OEBPS/Text/ch02.xhtml"] {
            let mut doc = archive.get(ch).unwrap().clone();
            for occ in find_images(&doc, ch).unwrap().into_iter().filter(|o| o.existing_alt.is_none()) {
                if mask[seen] {
                    doc = set_alt_text(&doc, &occ, "A small illustration").unwrap();
                }
                seen += 1;
            }
            docs.push(doc);
        }
        let applied = mask.iter().filter(|&&m| m).count();
        let out = open_epub(&rebuild(&archive, &pkg, &docs).unwrap()).unwrap();
        let post = audit(&out, &read_package(&out).unwrap());
        prop_assert_eq!(post.count(IssueCode::ImgMissingAlt) + applied, pre.count(IssueCode::ImgMissingAlt));
        prop_assert!(post.error_count <= pre.error_count);
    }
}
