//! Synthetic EPUB builder.
//!
//! Produces small, deterministic EPUB 3 files with precisely controlled
//! defects. Used by the test suites and handy for demos; every book has
//! the layout
//!
//! ```text
//! mimetype
//! META-INF/container.xml
//! OEBPS/content.opf
//! OEBPS/nav.xhtml
//! OEBPS/Text/chNN.xhtml
//! OEBPS/Images/<file>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::audit::IssueCode;
use crate::ocf::{self, ArchiveEntry, Compression, EpubArchive};
use crate::path;
use crate::xhtml::escape_attr;

/// A valid 1x1 RGB PNG.
pub const TINY_PNG: &[u8] = &[
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00, 0x00, 0x90,
    0x77, 0x53, 0xde, 0x00, 0x00, 0x00, 0x0c, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xf8,
    0xcf, 0xc0, 0x00, 0x00, 0x03, 0x01, 0x01, 0x00, 0xc9, 0xfe, 0x92, 0xef, 0x00, 0x00, 0x00,
    0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
];

const DEFAULT_PARAGRAPHS: &[&str] = &[
    "The harbour was quiet in the early morning, and the fishing boats rocked gently against \
     the old stone pier while the gulls circled overhead looking for breakfast.",
    "By noon the market square had filled with traders selling bread, cheese, and bright \
     baskets of fruit, and the children ran between the stalls laughing loudly.",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSpec {
    /// File name under `OEBPS/Images/`.
    pub file: String,
    pub alt: Option<String>,
    pub role: Option<String>,
    pub figcaption: Option<String>,
    /// Whether the image bytes are packaged (and manifested).
    pub present: bool,
    /// `<title>` for generated SVG images.
    pub svg_title: Option<String>,
}

impl ImageSpec {
    fn base(file: &str) -> Self {
        Self {
            file: file.to_string(),
            alt: None,
            role: None,
            figcaption: None,
            present: true,
            svg_title: None,
        }
    }

    pub fn missing_alt(file: &str) -> Self {
        Self::base(file)
    }

    pub fn described(file: &str, alt: &str) -> Self {
        Self {
            alt: Some(alt.into()),
            ..Self::base(file)
        }
    }

    pub fn empty_alt(file: &str) -> Self {
        Self {
            alt: Some(String::new()),
            ..Self::base(file)
        }
    }

    pub fn decorative(file: &str, alt: Option<&str>) -> Self {
        Self {
            alt: alt.map(str::to_string),
            role: Some("presentation".into()),
            ..Self::base(file)
        }
    }

    /// Referenced from the chapter but absent from the container.
    pub fn dangling(file: &str, alt: &str) -> Self {
        Self {
            alt: Some(alt.into()),
            present: false,
            ..Self::base(file)
        }
    }

    pub fn with_figcaption(mut self, caption: &str) -> Self {
        self.figcaption = Some(caption.into());
        self
    }

    pub fn with_svg_title(mut self, title: &str) -> Self {
        self.svg_title = Some(title.into());
        self
    }

    pub fn media_type(&self) -> &'static str {
        media_type_for(&self.file)
    }

    fn bytes(&self) -> Vec<u8> {
        match path::extension(&self.file).as_deref() {
            Some("svg") => {
                let title = self
                    .svg_title
                    .as_deref()
                    .map(|t| format!("<title>{}</title>", escape_attr(t)))
                    .unwrap_or_default();
                format!(
                    "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"10\" height=\"10\">{title}<rect width=\"10\" height=\"10\"/></svg>"
                )
                .into_bytes()
            }
            _ => TINY_PNG.to_vec(),
        }
    }
}

/// Media type guessed from a file extension.
pub fn media_type_for(file: &str) -> &'static str {
    match path::extension(file).as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("svg") => "image/svg+xml",
        Some("webp") => "image/webp",
        Some("png") => "image/png",
        Some("xhtml" | "html" | "htm") => "application/xhtml+xml",
        Some("css") => "text/css",
        _ => "application/octet-stream",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chapter {
    pub heading: String,
    pub paragraphs: Vec<String>,
    pub images: Vec<ImageSpec>,
    /// Replaces the generated XHTML entirely.
    pub raw_body: Option<Vec<u8>>,
}

impl Chapter {
    pub fn new(heading: &str, images: Vec<ImageSpec>) -> Self {
        Self {
            heading: heading.to_string(),
            paragraphs: DEFAULT_PARAGRAPHS.iter().map(|s| s.to_string()).collect(),
            images,
            raw_body: None,
        }
    }

    pub fn with_paragraphs(mut self, paragraphs: &[&str]) -> Self {
        self.paragraphs = paragraphs.iter().map(|s| s.to_string()).collect();
        self
    }

    fn xhtml(&self, language: Option<&str>) -> Vec<u8> {
        if let Some(raw) = &self.raw_body {
            return raw.clone();
        }
        let lang = language
            .map(|l| format!(" lang=\"{0}\" xml:lang=\"{0}\"", escape_attr(l)))
            .unwrap_or_default();
        let mut out = String::new();
        let _ = write!(
            out,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!DOCTYPE html>\n\
             <html xmlns=\"http://www.w3.org/1999/xhtml\" xmlns:epub=\"http://www.idpf.org/2007/ops\"{lang}>\n\
             <head>\n<title>{0}</title>\n</head>\n<body>\n<section>\n<h1>{0}</h1>\n",
            escape_attr(&self.heading)
        );
        let n = self.paragraphs.len().max(self.images.len());
        for i in 0..n {
            if let Some(p) = self.paragraphs.get(i) {
                let _ = writeln!(out, "<p>{}</p>", escape_attr(p));
            }
            if let Some(img) = self.images.get(i) {
                let mut tag = format!("<img src=\"../Images/{}\"", escape_attr(&img.file));
                if let Some(alt) = &img.alt {
                    let _ = write!(tag, " alt=\"{}\"", escape_attr(alt));
                }
                if let Some(role) = &img.role {
                    let _ = write!(tag, " role=\"{}\"", escape_attr(role));
                }
                tag.push_str("/>");
                match &img.figcaption {
                    Some(cap) => {
                        let _ = writeln!(
                            out,
                            "<figure>\n{tag}\n<figcaption>{}</figcaption>\n</figure>",
                            escape_attr(cap)
                        );
                    }
                    None => {
                        let _ = writeln!(out, "<div class=\"illustration\">{tag}</div>");
                    }
                }
            }
        }
        out.push_str("</section>\n</body>\n</html>\n");
        out.into_bytes()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BookSpec {
    pub identifier: String,
    pub title: Option<String>,
    pub language: Option<String>,
    pub accessibility_metadata: bool,
    pub chapters: Vec<Chapter>,
}

impl BookSpec {
    /// A book with no audit issues: one chapter with a described,
    /// captioned image.
    pub fn clean(name: &str) -> Self {
        Self {
            identifier: format!("urn:altgen:fixture:{name}"),
            title: Some(format!("The {name} Book")),
            language: Some("en".into()),
            accessibility_metadata: true,
            chapters: vec![Chapter::new(
                "Chapter One",
                vec![ImageSpec::described("harbour.png", "Fishing boats moored at a stone pier")
                    .with_figcaption("The harbour at dawn")],
            )],
        }
    }

    fn chapter_path(i: usize) -> String {
        format!("OEBPS/Text/ch{:02}.xhtml", i + 1)
    }

    fn opf(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <package xmlns=\"http://www.idpf.org/2007/opf\" version=\"3.0\" unique-identifier=\"uid\">\n  \
             <metadata xmlns:dc=\"http://purl.org/dc/elements/1.1/\">\n",
        );
        let _ = writeln!(
            out,
            "    <dc:identifier id=\"uid\">{}</dc:identifier>",
            escape_attr(&self.identifier)
        );
        if let Some(t) = &self.title {
            let _ = writeln!(out, "    <dc:title>{}</dc:title>", escape_attr(t));
        }
        if let Some(l) = &self.language {
            let _ = writeln!(out, "    <dc:language>{}</dc:language>", escape_attr(l));
        }
        out.push_str("    <meta property=\"dcterms:modified\">2024-01-01T00:00:00Z</meta>\n");
        if self.accessibility_metadata {
            out.push_str(
                "    <meta property=\"schema:accessMode\">textual</meta>\n    \
                 <meta property=\"schema:accessMode\">visual</meta>\n    \
                 <meta property=\"schema:accessibilityFeature\">alternativeText</meta>\n",
            );
        }
        out.push_str("  </metadata>\n  <manifest>\n");
        out.push_str(
            "    <item id=\"nav\" href=\"nav.xhtml\" media-type=\"application/xhtml+xml\" properties=\"nav\"/>\n",
        );
        for i in 0..self.chapters.len() {
            let _ = writeln!(
                out,
                "    <item id=\"ch{0:02}\" href=\"Text/ch{0:02}.xhtml\" media-type=\"application/xhtml+xml\"/>",
                i + 1
            );
        }
        for (n, img) in self.unique_images().iter().enumerate() {
            let _ = writeln!(
                out,
                "    <item id=\"img{:02}\" href=\"Images/{}\" media-type=\"{}\"/>",
                n + 1,
                escape_attr(&img.file),
                img.media_type()
            );
        }
        out.push_str("  </manifest>\n  <spine>\n");
        for i in 0..self.chapters.len() {
            let _ = writeln!(out, "    <itemref idref=\"ch{:02}\"/>", i + 1);
        }
        out.push_str("  </spine>\n</package>\n");
        out
    }

    fn nav(&self) -> String {
        let mut items = String::new();
        for (i, ch) in self.chapters.iter().enumerate() {
            let _ = writeln!(
                items,
                "<li><a href=\"Text/ch{:02}.xhtml\">{}</a></li>",
                i + 1,
                escape_attr(&ch.heading)
            );
        }
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!DOCTYPE html>\n\
             <html xmlns=\"http://www.w3.org/1999/xhtml\" xmlns:epub=\"http://www.idpf.org/2007/ops\">\n\
             <head><title>Contents</title></head>\n<body>\n<nav epub:type=\"toc\"><ol>\n{items}</ol></nav>\n</body>\n</html>\n"
        )
    }

    fn unique_images(&self) -> Vec<&ImageSpec> {
        let mut seen = std::collections::HashSet::new();
        self.chapters
            .iter()
            .filter(|c| c.raw_body.is_none())
            .flat_map(|c| c.images.iter())
            .filter(|img| img.present && seen.insert(img.file.as_str()))
            .collect()
    }

    pub fn archive(&self) -> EpubArchive {
        let mut entries = vec![
            ArchiveEntry::new(ocf::MIMETYPE_PATH, ocf::MIMETYPE, Compression::Stored),
            ArchiveEntry::new(
                ocf::CONTAINER_PATH,
                ocf::container_xml("OEBPS/content.opf"),
                Compression::Deflated,
            ),
            ArchiveEntry::new("OEBPS/content.opf", self.opf(), Compression::Deflated),
            ArchiveEntry::new("OEBPS/nav.xhtml", self.nav(), Compression::Deflated),
        ];
        for (i, ch) in self.chapters.iter().enumerate() {
            entries.push(ArchiveEntry::new(
                Self::chapter_path(i),
                ch.xhtml(self.language.as_deref()),
                Compression::Deflated,
            ));
        }
        for img in self.unique_images() {
            entries.push(ArchiveEntry::new(
                format!("OEBPS/Images/{}", img.file),
                img.bytes(),
                Compression::Stored,
            ));
        }
        EpubArchive {
            entries,
            rootfile_path: "OEBPS/content.opf".into(),
        }
    }

    /// Serialized EPUB bytes.
    pub fn build(&self) -> Vec<u8> {
        ocf::write_epub(&self.archive()).expect("fixture archives satisfy OCF invariants")
    }
}

/// A fixture book with the Error-level issues it was built to contain.
#[derive(Debug, Clone, PartialEq)]
pub struct SeededBook {
    pub name: String,
    pub spec: BookSpec,
    pub defects: BTreeMap<IssueCode, usize>,
    /// The language of the body text.
    pub text_language: &'static str,
}

const FR: &[&str] = &[
    "Le marché du samedi ouvrait très tôt sur la place de la mairie, et les marchands installaient \
     leurs tables pendant que le boulanger sortait les premières baguettes encore chaudes du four.",
    "Vers midi, les familles se promenaient entre les étals de fromages et de légumes, puis elles \
     rentraient déjeuner à la maison avant la pluie annoncée pour l'après-midi.",
];
const DE: &[&str] = &[
    "Am frühen Morgen lag dichter Nebel über dem Tal, und die Bauern fuhren mit ihren Traktoren \
     langsam auf die Felder, während im Dorf die Kirchenglocken zum ersten Mal läuteten.",
    "Gegen Mittag hatte die Sonne den Nebel vertrieben, und die Kinder spielten am Bach, bis ihre \
     Mütter sie zum Essen nach Hause riefen, weil es schon spät geworden war.",
];
const ES: &[&str] = &[
    "Por la mañana el puerto estaba lleno de barcos de pesca que volvían con las redes cargadas, y \
     los vecinos bajaban a la playa para comprar pescado fresco directamente a los marineros.",
    "Después de comer, los abuelos se sentaban a la sombra de los árboles de la plaza y hablaban \
     durante horas sobre el tiempo, la cosecha y las fiestas del verano.",
];
const IT: &[&str] = &[
    "La mattina presto il fornaio del paese apriva la sua bottega, e il profumo del pane appena \
     sfornato si diffondeva per tutte le strade strette del centro storico.",
    "Nel pomeriggio i ragazzi giocavano a pallone nella piazza davanti alla chiesa, mentre le \
     nonne guardavano dalle finestre e commentavano ogni partita con grande passione.",
];

fn missing(prefix: &str, n: usize) -> Vec<ImageSpec> {
    (1..=n).map(|i| ImageSpec::missing_alt(&format!("{prefix}{i}.png"))).collect()
}

fn book(name: &str, language: Option<&str>, title: bool, chapters: Vec<Chapter>) -> BookSpec {
    BookSpec {
        identifier: format!("urn:altgen:fixture:{name}"),
        title: title.then(|| format!("The {name} Book")),
        language: language.map(str::to_string),
        accessibility_metadata: true,
        chapters,
    }
}

type SeedRow = (&'static str, BookSpec, &'static str, Vec<(IssueCode, usize)>);

/// Ten books seeded with 40 Error-level issues in total. One of them, a
/// reference to an image missing from the container, cannot be repaired.
pub fn seeded_corpus() -> Vec<SeededBook> {
    use IssueCode::*;
    let ch = |heading: &str, images: Vec<ImageSpec>| Chapter::new(heading, images);
    let rows: Vec<SeedRow> = vec![
        (
            "alder",
            book("alder", Some("en"), true, vec![ch("Boats", missing("boat", 4))]),
            "en",
            vec![(ImgMissingAlt, 4)],
        ),
        (
            "birch",
            book("birch", None, true, vec![ch("Le marché", missing("marche", 2)).with_paragraphs(FR)]),
            "fr",
            vec![(ImgMissingAlt, 2), (MissingDcLanguage, 1)],
        ),
        (
            "cedar",
            book("cedar", Some("en"), false, vec![ch("Fields", missing("field", 3))]),
            "en",
            vec![(ImgMissingAlt, 3), (MissingDcTitle, 1)],
        ),
        (
            "dogwood",
            book("dogwood", None, false, vec![ch("Das Tal", missing("tal", 2)).with_paragraphs(DE)]),
            "de",
            vec![(ImgMissingAlt, 2), (MissingDcLanguage, 1), (MissingDcTitle, 1)],
        ),
        (
            "elm",
            book(
                "elm",
                Some("en"),
                true,
                vec![ch("Morning", missing("dawn", 3)), ch("Evening", missing("dusk", 2))],
            ),
            "en",
            vec![(ImgMissingAlt, 5)],
        ),
        (
            "fir",
            book(
                "fir",
                Some("en"),
                true,
                vec![ch("Maps", {
                    let mut imgs = missing("map", 2);
                    imgs.push(ImageSpec::dangling("lost.png", "A hand-drawn map of the coast"));
                    imgs
                })],
            ),
            "en",
            vec![(ImgMissingAlt, 2), (DanglingImageResource, 1)],
        ),
        (
            "ginkgo",
            book("ginkgo", None, true, vec![ch("El puerto", missing("puerto", 3)).with_paragraphs(ES)]),
            "es",
            vec![(ImgMissingAlt, 3), (MissingDcLanguage, 1)],
        ),
        (
            "hazel",
            book(
                "hazel",
                Some("en"),
                true,
                vec![ch("Diagrams", {
                    let mut imgs = missing("figure", 2);
                    imgs.push(ImageSpec::missing_alt("compass.svg").with_svg_title("A compass rose"));
                    imgs.push(ImageSpec::missing_alt("tide.png").with_figcaption("Tide table for March"));
                    imgs.push(ImageSpec::decorative("rule.png", None));
                    imgs
                })],
            ),
            "en",
            vec![(ImgMissingAlt, 4)],
        ),
        (
            "ivy",
            book("ivy", Some("en"), false, vec![ch("Birds", missing("bird", 4))]),
            "en",
            vec![(ImgMissingAlt, 4), (MissingDcTitle, 1)],
        ),
        (
            "juniper",
            book(
                "juniper",
                None,
                true,
                vec![ch("Il paese", {
                    let mut imgs = missing("paese", 3);
                    imgs.push(ImageSpec::empty_alt("ornament.png"));
                    imgs
                })
                .with_paragraphs(IT)],
            ),
            "it",
            vec![(ImgMissingAlt, 3), (MissingDcLanguage, 1)],
        ),
    ];
    rows.into_iter()
        .map(|(name, spec, text_language, defects)| SeededBook {
            name: name.to_string(),
            spec,
            defects: defects.into_iter().collect(),
            text_language,
        })
        .collect()
}
