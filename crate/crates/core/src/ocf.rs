//! OCF container reading and writing.
//!
//! An [`EpubArchive`] is an ordered, fully decompressed view of the ZIP
//! container. Writing re-deflates every entry, so fidelity holds at the
//! level of decompressed entry contents rather than compressed bytes.

use std::io::{Cursor, Read, Write};

use quick_xml::events::Event;
use quick_xml::Reader;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use crate::path;

pub const MIMETYPE_PATH: &str = "mimetype";
pub const MIMETYPE: &[u8] = b"application/epub+zip";
pub const CONTAINER_PATH: &str = "META-INF/container.xml";

const LOCAL_HEADER_SIG: &[u8] = b"PK\x03\x04";
const EOCD_SIG: &[u8] = b"PK\x05\x06";
const ZIP64_LOCATOR_SIG: &[u8] = b"PK\x06\x07";

#[derive(Debug, thiserror::Error)]
pub enum OcfError {
    #[error("input is not a ZIP archive")]
    NotZip,
    #[error("archive has no `mimetype` entry")]
    MissingMimetype,
    #[error("bad `mimetype` entry: {0}")]
    WrongMimetype(String),
    #[error("archive has no META-INF/container.xml")]
    MissingContainerXml,
    #[error("malformed META-INF/container.xml: {0}")]
    MalformedContainerXml(String),
    #[error("not supported: {0}")]
    NotSupported(&'static str),
    #[error("invalid entry path `{0}`")]
    InvalidEntryPath(String),
    #[error("archive invariant violated: {0}")]
    InvariantViolation(String),
    #[error("zip error: {0}")]
    Zip(#[from] zip::result::ZipError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Compression {
    Stored,
    Deflated,
}

/// MS-DOS date/time pair as stored in ZIP headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DosTimestamp {
    pub date: u16,
    pub time: u16,
}

impl DosTimestamp {
    /// 1980-01-01 00:00:00, the ZIP epoch.
    pub const EPOCH: DosTimestamp = DosTimestamp { date: 0x0021, time: 0 };

    fn to_zip(self) -> DateTime {
        DateTime::try_from_msdos(self.date, self.time).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveEntry {
    pub path: String,
    pub data: Vec<u8>,
    pub compression: Compression,
    /// Set once a pipeline stage has rewritten `data`.
    pub modified: bool,
    pub timestamp: DosTimestamp,
}

impl ArchiveEntry {
    pub fn new(path: impl Into<String>, data: impl Into<Vec<u8>>, compression: Compression) -> Self {
        Self {
            path: path.into(),
            data: data.into(),
            compression,
            modified: false,
            timestamp: DosTimestamp::EPOCH,
        }
    }

    pub fn is_dir(&self) -> bool {
        self.path.ends_with('/')
    }

    /// Returns a copy carrying `data`, flagged as modified.
    pub fn with_data(&self, data: Vec<u8>) -> Self {
        Self {
            data,
            modified: true,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpubArchive {
    pub entries: Vec<ArchiveEntry>,
    /// Path of the package document named by the first `rootfile`.
    pub rootfile_path: String,
}

impl EpubArchive {
    pub fn get(&self, path: &str) -> Option<&ArchiveEntry> {
        self.entries.iter().find(|e| e.path == path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.get(path).is_some()
    }

    /// Replaces the entry with the same path. Returns false when no such
    /// entry exists.
    pub fn replace(&mut self, entry: ArchiveEntry) -> bool {
        match self.entries.iter_mut().find(|e| e.path == entry.path) {
            Some(slot) => {
                *slot = entry;
                true
            }
            None => false,
        }
    }

    pub fn remove(&mut self, path: &str) -> Option<ArchiveEntry> {
        let idx = self.entries.iter().position(|e| e.path == path)?;
        Some(self.entries.remove(idx))
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.path.as_str())
    }

    /// Checks the OCF layout rules. Returns the first violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        let first = self.entries.first().ok_or("archive is empty")?;
        if first.path != MIMETYPE_PATH {
            return Err(format!("first entry is `{}`, not `mimetype`", first.path));
        }
        if first.compression != Compression::Stored {
            return Err("`mimetype` entry is compressed".into());
        }
        if first.data != MIMETYPE {
            return Err("`mimetype` content is not `application/epub+zip`".into());
        }
        if !self.contains(CONTAINER_PATH) {
            return Err("META-INF/container.xml is missing".into());
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !path::is_valid_entry_path(&e.path) {
                return Err(format!("invalid entry path `{}`", e.path));
            }
            if !seen.insert(e.path.as_str()) {
                return Err(format!("duplicate entry path `{}`", e.path));
            }
        }
        Ok(())
    }
}

fn is_zip64(bytes: &[u8]) -> bool {
    // The ZIP64 end-of-central-directory locator sits right before the
    // classic EOCD record, which itself lives in the last 64 KiB + 22 bytes.
    let tail_start = bytes.len().saturating_sub(65_557 + 20);
    bytes[tail_start..]
        .windows(4)
        .any(|w| w == ZIP64_LOCATOR_SIG)
}

/// Reads an EPUB container from raw ZIP bytes.
pub fn open_epub(bytes: &[u8]) -> Result<EpubArchive, OcfError> {
    if !(bytes.starts_with(LOCAL_HEADER_SIG) || bytes.starts_with(EOCD_SIG)) {
        return Err(OcfError::NotZip);
    }
    if is_zip64(bytes) {
        return Err(OcfError::NotSupported("ZIP64 archives"));
    }
    let mut zip = ZipArchive::new(Cursor::new(bytes))?;

    let mut entries = Vec::with_capacity(zip.len());
    for i in 0..zip.len() {
        let mut file = zip.by_index(i)?;
        let name = file.name().to_string();
        if !path::is_valid_entry_path(&name) {
            return Err(OcfError::InvalidEntryPath(name));
        }
        let compression = match file.compression() {
            CompressionMethod::Stored => Compression::Stored,
            CompressionMethod::Deflated => Compression::Deflated,
            _ => return Err(OcfError::NotSupported("compression methods other than Stored/Deflate")),
        };
        let timestamp = file
            .last_modified()
            .map(|dt| DosTimestamp {
                date: dt.datepart(),
                time: dt.timepart(),
            })
            .unwrap_or(DosTimestamp::EPOCH);
        let header_start = file.header_start();
        let mut data = Vec::with_capacity(file.size() as usize);
        file.read_to_end(&mut data)?;
        if i == 0 && name == MIMETYPE_PATH && header_start != 0 {
            return Err(OcfError::WrongMimetype("entry is not at offset 0".into()));
        }
        entries.push(ArchiveEntry {
            path: name,
            data,
            compression,
            modified: false,
            timestamp,
        });
    }

    let mimetype_pos = entries
        .iter()
        .position(|e| e.path == MIMETYPE_PATH)
        .ok_or(OcfError::MissingMimetype)?;
    let mimetype = &entries[mimetype_pos];
    if mimetype_pos != 0 {
        return Err(OcfError::WrongMimetype("entry is not first in the archive".into()));
    }
    if mimetype.compression != Compression::Stored {
        return Err(OcfError::WrongMimetype("entry is compressed".into()));
    }
    if mimetype.data != MIMETYPE {
        return Err(OcfError::WrongMimetype(format!(
            "content is {:?}",
            String::from_utf8_lossy(&mimetype.data)
        )));
    }
    {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.path.as_str()) {
                return Err(OcfError::InvalidEntryPath(e.path.clone()));
            }
        }
    }

    let container = entries
        .iter()
        .find(|e| e.path == CONTAINER_PATH)
        .ok_or(OcfError::MissingContainerXml)?;
    let rootfile_path = parse_container_xml(&container.data)?;

    Ok(EpubArchive {
        entries,
        rootfile_path,
    })
}

/// Extracts the `full-path` of the first `rootfile` element.
pub fn parse_container_xml(data: &[u8]) -> Result<String, OcfError> {
    let text = std::str::from_utf8(data)
        .map_err(|e| OcfError::MalformedContainerXml(e.to_string()))?;
    let mut reader = Reader::from_str(text.trim_start_matches('\u{feff}'));
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) | Ok(Event::Empty(e)) if e.local_name().as_ref() == b"rootfile" => {
                for attr in e.attributes() {
                    let attr = attr.map_err(|e| OcfError::MalformedContainerXml(e.to_string()))?;
                    if attr.key.as_ref() == b"full-path" {
                        let value = attr
                            .unescape_value()
                            .map_err(|e| OcfError::MalformedContainerXml(e.to_string()))?;
                        let resolved = path::resolve("", &value);
                        if resolved.is_empty() {
                            return Err(OcfError::MalformedContainerXml(
                                "empty `full-path`".into(),
                            ));
                        }
                        return Ok(resolved);
                    }
                }
                return Err(OcfError::MalformedContainerXml(
                    "`rootfile` has no `full-path`".into(),
                ));
            }
            Ok(Event::Eof) => {
                return Err(OcfError::MalformedContainerXml("no `rootfile` element".into()))
            }
            Ok(_) => {}
            Err(e) => return Err(OcfError::MalformedContainerXml(e.to_string())),
        }
    }
}

/// Serializes the archive, `mimetype` first and stored.
pub fn write_epub(archive: &EpubArchive) -> Result<Vec<u8>, OcfError> {
    archive
        .check_invariants()
        .map_err(OcfError::InvariantViolation)?;

    let mut writer = ZipWriter::new(Cursor::new(Vec::new()));
    for entry in &archive.entries {
        let method = match entry.compression {
            Compression::Stored => CompressionMethod::Stored,
            Compression::Deflated => CompressionMethod::Deflated,
        };
        let options = SimpleFileOptions::default()
            .compression_method(method)
            .last_modified_time(entry.timestamp.to_zip())
            .unix_permissions(if entry.is_dir() { 0o755 } else { 0o644 });
        if entry.is_dir() {
            writer.add_directory(entry.path.trim_end_matches('/'), options)?;
        } else {
            writer.start_file(entry.path.as_str(), options)?;
            writer.write_all(&entry.data)?;
        }
    }
    Ok(writer.finish()?.into_inner())
}

/// Minimal `container.xml` naming a single package document.
pub fn container_xml(rootfile: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <container version=\"1.0\" xmlns=\"urn:oasis:names:tc:opendocument:xmlns:container\">\n  \
         <rootfiles>\n    \
         <rootfile full-path=\"{}\" media-type=\"application/oebps-package+xml\"/>\n  \
         </rootfiles>\n\
         </container>\n",
        quick_xml::escape::escape(rootfile)
    )
}
