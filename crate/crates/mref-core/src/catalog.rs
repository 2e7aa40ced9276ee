//! On-device asset registry: maps asset identifiers to byte sizes and content
//! hashes. Instruction documents link against this catalog instead of carrying
//! model geometry.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::instructions::AssetRef;

/// Catalog metadata for one locally stored asset. Geometry itself never enters
/// the system; the digest is carried opaquely for integrity checks downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub display_name: String,
    pub byte_size: u64,
    pub content_hash: [u8; 32],
}

/// Registry of locally stored assets, keyed by asset id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssetCatalog {
    entries: BTreeMap<String, CatalogEntry>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("line {line}: duplicate asset id `{id}`")]
    DuplicateAsset { line: usize, id: String },
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("asset byte size must be > 0")]
    ZeroByteSize,
    #[error("duplicate asset id `{0}`")]
    DuplicateInsert(String),
    #[error("invalid asset id: {0}")]
    BadAssetId(String),
}

impl AssetCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, asset_id: &str, entry: CatalogEntry) -> Result<(), CatalogError> {
        AssetRef::new(asset_id).map_err(|e| CatalogError::BadAssetId(e.to_string()))?;
        if entry.byte_size == 0 {
            return Err(CatalogError::ZeroByteSize);
        }
        if self.entries.contains_key(asset_id) {
            return Err(CatalogError::DuplicateInsert(asset_id.to_string()));
        }
        self.entries.insert(asset_id.to_string(), entry);
        Ok(())
    }

    pub fn get(&self, asset_id: &str) -> Option<&CatalogEntry> {
        self.entries.get(asset_id)
    }

    pub fn contains(&self, asset_id: &str) -> bool {
        self.entries.contains_key(asset_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CatalogEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Parses the catalog file format: one entry per line,
    ///
    /// ```text
    /// asset <asset_id> name="<display name>" bytes=<u64> sha="<64 hex chars>"
    /// ```
    ///
    /// `#` starts a comment, blank lines are ignored, duplicate ids are an
    /// error.
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut catalog = AssetCatalog::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: &str| CatalogError::BadLine {
                line: line_no,
                message: message.to_string(),
            };

            let rest = line
                .strip_prefix("asset ")
                .ok_or_else(|| bad("expected `asset <id> ...`"))?;
            let rest = rest.trim_start();
            let (id, rest) = rest
                .split_once(char::is_whitespace)
                .ok_or_else(|| bad("missing fields after asset id"))?;
            let rest = rest.trim_start();

            let rest = rest
                .strip_prefix("name=\"")
                .ok_or_else(|| bad("expected name=\"...\""))?;
            let (display_name, rest) = rest
                .split_once('"')
                .ok_or_else(|| bad("unterminated display name"))?;
            let rest = rest.trim_start();

            let rest = rest
                .strip_prefix("bytes=")
                .ok_or_else(|| bad("expected bytes=<u64>"))?;
            let (bytes_str, rest) = rest
                .split_once(char::is_whitespace)
                .ok_or_else(|| bad("missing sha field"))?;
            let byte_size: u64 = bytes_str
                .parse()
                .map_err(|_| bad("bytes is not an unsigned integer"))?;
            if byte_size == 0 {
                return Err(bad("bytes must be > 0"));
            }
            let rest = rest.trim_start();

            let rest = rest
                .strip_prefix("sha=\"")
                .ok_or_else(|| bad("expected sha=\"<64 hex chars>\""))?;
            let (hash_str, rest) = rest
                .split_once('"')
                .ok_or_else(|| bad("unterminated sha field"))?;
            if !rest.trim().is_empty() {
                return Err(bad("unexpected trailing content"));
            }
            let content_hash =
                parse_hash(hash_str).ok_or_else(|| bad("sha must be exactly 64 hex characters"))?;

            if catalog.contains(id) {
                return Err(CatalogError::DuplicateAsset {
                    line: line_no,
                    id: id.to_string(),
                });
            }
            catalog
                .insert(
                    id,
                    CatalogEntry {
                        display_name: display_name.to_string(),
                        byte_size,
                        content_hash,
                    },
                )
                .map_err(|e| bad(&e.to_string()))?;
        }
        Ok(catalog)
    }
}

fn parse_hash(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
        let hi = (chunk[0] as char).to_digit(16)?;
        let lo = (chunk[1] as char).to_digit(16)?;
        out[i] = (hi * 16 + lo) as u8;
    }
    Some(out)
}
