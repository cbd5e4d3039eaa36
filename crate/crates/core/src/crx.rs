//! CRX package reader.
//!
//! A CRX file is a ZIP archive preceded by a signed binary header. The header
//! is located and skipped; its contents are retained as opaque bytes and never
//! interpreted.

use std::collections::BTreeMap;
use std::io::{Cursor, Read, Write};

use thiserror::Error;

const MAGIC: &[u8; 4] = b"Cr24";

/// Default per-entry decompressed size cap (64 MiB).
pub const DEFAULT_ENTRY_CAP: u64 = 64 * 1024 * 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CrxError {
    #[error("bad magic: expected \"Cr24\"")]
    BadMagic,
    #[error("unsupported CRX version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated header: need {needed} bytes, have {available}")]
    TruncatedHeader { needed: u64, available: u64 },
    #[error("archive error: {0}")]
    ArchiveError(String),
    #[error("duplicate path in archive: {0}")]
    DuplicatePath(String),
}

impl CrxError {
    pub fn name(&self) -> &'static str {
        match self {
            CrxError::BadMagic => "BadMagic",
            CrxError::UnsupportedVersion(_) => "UnsupportedVersion",
            CrxError::TruncatedHeader { .. } => "TruncatedHeader",
            CrxError::ArchiveError(_) => "ArchiveError",
            CrxError::DuplicatePath(_) => "DuplicatePath",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrxHeader {
    pub magic: [u8; 4],
    pub version: u32,
    /// Length of the opaque header region following the fixed prefix.
    pub header_length: u32,
    pub header_bytes: Vec<u8>,
}

impl CrxHeader {
    /// Bytes preceding the opaque header region (magic, version and length fields).
    pub fn prefix_len(&self) -> usize {
        match self.version {
            2 => 16,
            _ => 12,
        }
    }

    /// Offset of the embedded ZIP payload from the start of the file.
    pub fn payload_offset(&self) -> usize {
        self.prefix_len() + self.header_length as usize
    }
}

/// Decoded package contents keyed by normalized relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileTree {
    entries: BTreeMap<String, Vec<u8>>,
}

impl FileTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a file under its normalized path.
    pub fn insert(&mut self, path: &str, content: impl Into<Vec<u8>>) -> Result<(), CrxError> {
        let norm = normalize_path(path)?;
        if self.entries.contains_key(&norm) {
            return Err(CrxError::DuplicatePath(norm));
        }
        self.entries.insert(norm, content.into());
        Ok(())
    }

    /// Inserts or overwrites a file.
    pub fn replace(&mut self, path: &str, content: impl Into<Vec<u8>>) -> Result<(), CrxError> {
        let norm = normalize_path(path)?;
        self.entries.insert(norm, content.into());
        Ok(())
    }

    pub fn remove(&mut self, path: &str) -> Option<Vec<u8>> {
        self.entries.remove(path)
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.entries.get(path).map(Vec::as_slice)
    }

    pub fn get_text(&self, path: &str) -> Option<String> {
        self.get(path).map(|b| String::from_utf8_lossy(b).into_owned())
    }

    pub fn contains(&self, path: &str) -> bool {
        self.entries.contains_key(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[u8])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn manifest_bytes(&self) -> Option<&[u8]> {
        self.get("manifest.json")
    }

    /// Serializes the tree into a deflate-compressed ZIP archive.
    pub fn to_zip(&self) -> Vec<u8> {
        let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let options = zip::write::SimpleFileOptions::default()
            .compression_method(zip::CompressionMethod::Deflated)
            .last_modified_time(zip::DateTime::default());
        for (path, content) in &self.entries {
            writer
                .start_file(path.as_str(), options)
                .and_then(|_| writer.write_all(content).map_err(Into::into))
                .expect("writing to an in-memory buffer cannot fail");
        }
        writer
            .finish()
            .expect("finishing an in-memory archive cannot fail")
            .into_inner()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrxPackage {
    pub header: CrxHeader,
    pub tree: FileTree,
}

/// Normalizes an archive entry path: forward slashes, no leading slash, no
/// `.` or `..` segments. Absolute paths and traversal above the root are
/// rejected.
pub fn normalize_path(raw: &str) -> Result<String, CrxError> {
    let unified = raw.replace('\\', "/");
    if unified.starts_with('/') || unified.as_bytes().get(1) == Some(&b':') {
        return Err(CrxError::ArchiveError(format!("absolute path: {raw}")));
    }
    let mut segments: Vec<&str> = Vec::new();
    for seg in unified.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                if segments.pop().is_none() {
                    return Err(CrxError::ArchiveError(format!("path escapes root: {raw}")));
                }
            }
            s => segments.push(s),
        }
    }
    if segments.is_empty() {
        return Err(CrxError::ArchiveError(format!("empty path: {raw:?}")));
    }
    Ok(segments.join("/"))
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, CrxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(CrxError::TruncatedHeader {
            needed: (at + 4) as u64,
            available: bytes.len() as u64,
        })
}

/// Parses only the CRX header, validating that the declared header region
/// fits within the input.
pub fn parse_header(bytes: &[u8]) -> Result<CrxHeader, CrxError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CrxError::BadMagic);
    }
    let version = read_u32(bytes, 4)?;
    let (prefix, header_length) = match version {
        3 => (12usize, read_u32(bytes, 8)? as u64),
        2 => {
            let key_len = read_u32(bytes, 8)? as u64;
            let sig_len = read_u32(bytes, 12)? as u64;
            (16usize, key_len + sig_len)
        }
        v => return Err(CrxError::UnsupportedVersion(v)),
    };
    let needed = prefix as u64 + header_length;
    if needed > bytes.len() as u64 || header_length > u32::MAX as u64 {
        return Err(CrxError::TruncatedHeader {
            needed,
            available: bytes.len() as u64,
        });
    }
    Ok(CrxHeader {
        magic: *MAGIC,
        version,
        header_length: header_length as u32,
        header_bytes: bytes[prefix..needed as usize].to_vec(),
    })
}

/// Prefixes a ZIP archive with a CRX3 header carrying `header` as its opaque body.
pub fn wrap_crx3(zip: &[u8], header: &[u8]) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend(3u32.to_le_bytes());
    out.extend((header.len() as u32).to_le_bytes());
    out.extend(header);
    out.extend(zip);
    out
}

/// Parses a CRX2/CRX3 package into its header and file tree.
pub fn parse_crx(bytes: &[u8]) -> Result<CrxPackage, CrxError> {
    parse_crx_with_cap(bytes, DEFAULT_ENTRY_CAP)
}

pub fn parse_crx_with_cap(bytes: &[u8], entry_cap: u64) -> Result<CrxPackage, CrxError> {
    let header = parse_header(bytes)?;
    let tree = load_zip_with_cap(&bytes[header.payload_offset()..], entry_cap)?;
    Ok(CrxPackage { header, tree })
}

/// Reads a plain ZIP archive (no CRX header) into a file tree.
pub fn load_plain_zip(bytes: &[u8]) -> Result<FileTree, CrxError> {
    load_zip_with_cap(bytes, DEFAULT_ENTRY_CAP)
}

pub fn load_zip_with_cap(bytes: &[u8], entry_cap: u64) -> Result<FileTree, CrxError> {
    let archive_err = |e: zip::result::ZipError| CrxError::ArchiveError(e.to_string());
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(archive_err)?;
    let mut tree = FileTree::new();
    for i in 0..archive.len() {
        let file = archive.by_index(i).map_err(archive_err)?;
        if file.is_dir() {
            continue;
        }
        let name = String::from_utf8_lossy(file.name_raw()).into_owned();
        if file.size() > entry_cap {
            return Err(CrxError::ArchiveError(format!(
                "entry {name} exceeds size cap ({} > {entry_cap})",
                file.size()
            )));
        }
        let mut content = Vec::with_capacity(file.size().min(1 << 20) as usize);
        // Declared sizes can lie; bound the actual read as well.
        file.take(entry_cap + 1)
            .read_to_end(&mut content)
            .map_err(|e| CrxError::ArchiveError(format!("entry {name}: {e}")))?;
        if content.len() as u64 > entry_cap {
            return Err(CrxError::ArchiveError(format!("entry {name} exceeds size cap")));
        }
        tree.insert(&name, content)?;
    }
    Ok(tree)
}

/// Reads either a CRX package or a plain ZIP, dispatching on the leading magic.
pub fn load_package(bytes: &[u8]) -> Result<FileTree, CrxError> {
    if bytes.starts_with(MAGIC) {
        parse_crx(bytes).map(|p| p.tree)
    } else {
        load_plain_zip(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zip_of(entries: &[(&str, &[u8])]) -> Vec<u8> {
        let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let options = zip::write::SimpleFileOptions::default();
        for (name, content) in entries {
            writer.start_file(*name, options).unwrap();
            writer.write_all(content).unwrap();
        }
        writer.finish().unwrap().into_inner()
    }

    fn crx3(zip: &[u8], header: &[u8]) -> Vec<u8> {
        wrap_crx3(zip, header)
    }

    #[test]
    fn plain_zip_two_entries() {
        let tree = load_plain_zip(&zip_of(&[("manifest.json", b"{}"), ("bg.js", b"x()")])).unwrap();
        assert_eq!(tree.paths().collect::<Vec<_>>(), ["bg.js", "manifest.json"]);
        assert_eq!(tree.get("bg.js"), Some(&b"x()"[..]));
    }

    #[test]
    fn parent_segment_is_normalized() {
        let tree = load_plain_zip(&zip_of(&[("a/../manifest.json", b"{}")])).unwrap();
        assert!(tree.contains("manifest.json"));
        assert_eq!(tree.len(), 1);
    }

    #[test]
    fn duplicate_entries_rejected() {
        let err = load_plain_zip(&zip_of(&[("x.js", b"1"), ("./x.js", b"2")])).unwrap_err();
        assert_eq!(err, CrxError::DuplicatePath("x.js".into()));
    }

    #[test]
    fn escaping_and_absolute_paths_rejected() {
        assert!(matches!(normalize_path("../etc/passwd"), Err(CrxError::ArchiveError(_))));
        assert!(matches!(normalize_path("/etc/passwd"), Err(CrxError::ArchiveError(_))));
        assert_eq!(normalize_path("a\\b\\.\\c.js").unwrap(), "a/b/c.js");
    }

    #[test]
    fn raw_zip_is_bad_magic() {
        let zip = zip_of(&[("manifest.json", b"{}")]);
        assert!(zip.starts_with(b"PK\x03\x04"));
        assert_eq!(parse_crx(&zip).unwrap_err(), CrxError::BadMagic);
    }

    #[test]
    fn version_seven_unsupported() {
        let mut bytes = crx3(&zip_of(&[("manifest.json", b"{}")]), b"");
        bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert_eq!(parse_crx(&bytes).unwrap_err(), CrxError::UnsupportedVersion(7));
    }

    #[test]
    fn truncated_header_detected() {
        let mut bytes = b"Cr24".to_vec();
        bytes.extend(3u32.to_le_bytes());
        bytes.extend(1000u32.to_le_bytes());
        bytes.extend([0u8; 10]);
        assert!(matches!(parse_crx(&bytes), Err(CrxError::TruncatedHeader { .. })));
        assert!(matches!(parse_crx(b"Cr24\x03\x00"), Err(CrxError::TruncatedHeader { .. })));
        assert_eq!(parse_crx(b"Cr"), Err(CrxError::BadMagic));
    }

    #[test]
    fn crx3_header_is_opaque() {
        let zip = zip_of(&[("manifest.json", b"{\"manifest_version\":3}")]);
        let pkg = parse_crx(&crx3(&zip, b"\x12\x34garbage-protobuf")).unwrap();
        assert_eq!(pkg.header.version, 3);
        assert_eq!(pkg.header.header_bytes, b"\x12\x34garbage-protobuf");
        assert_eq!(pkg.tree, load_plain_zip(&zip).unwrap());
    }

    #[test]
    fn crx2_layout() {
        let zip = zip_of(&[("manifest.json", b"{}")]);
        let mut bytes = b"Cr24".to_vec();
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(3u32.to_le_bytes());
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(b"KEYSG");
        bytes.extend(&zip);
        let pkg = parse_crx(&bytes).unwrap();
        assert_eq!(pkg.header.header_length, 5);
        assert_eq!(pkg.header.payload_offset(), 21);
        assert!(pkg.tree.contains("manifest.json"));
    }

    #[test]
    fn entry_cap_enforced() {
        let zip = zip_of(&[("big.bin", &[0u8; 4096])]);
        assert!(matches!(load_zip_with_cap(&zip, 1024), Err(CrxError::ArchiveError(_))));
        assert!(load_zip_with_cap(&zip, 4096).is_ok());
    }

    #[test]
    fn not_a_zip() {
        assert!(matches!(load_plain_zip(b"hello world"), Err(CrxError::ArchiveError(_))));
        let bytes = crx3(b"not a zip", b"");
        assert!(matches!(parse_crx(&bytes), Err(CrxError::ArchiveError(_))));
    }
}
