//! Content-addressed on-disk embedding store.
//!
//! One file per entry at `<dir>/<hh>/<sha256>` where the hash covers the
//! format version, provider name, pooling mode, level and exact text.
//! Entry layout, little endian:
//!
//! ```text
//! magic "SSEM" | version u16 | level u8 | dim u32 | count u32 | count*dim f64
//! ```
//!
//! `count` is 1 for sentence vectors and the number of tokens otherwise.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{EmbeddingError, EmbeddingVector, Level, PoolingMode, Result, TokenEmbeddings};

pub const CACHE_FORMAT_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"SSEM";
const HEADER_LEN: usize = 4 + 2 + 1 + 4 + 4;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct CacheKey {
    pub provider: String,
    pub pooling: Option<PoolingMode>,
    pub level: Level,
    pub text: String,
}

impl CacheKey {
    fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(CACHE_FORMAT_VERSION.to_le_bytes());
        for part in [
            self.provider.as_str(),
            self.pooling.map_or("none", PoolingMode::as_str),
            self.level.as_str(),
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        h.update(self.text.as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum CachedValue {
    Sentence(EmbeddingVector),
    Tokens(TokenEmbeddings),
}

#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

fn cache_err(e: impl std::fmt::Display) -> EmbeddingError {
    EmbeddingError::Cache(e.to_string())
}

impl DiskCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(cache_err)?;
        Ok(DiskCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        let d = key.digest();
        self.dir.join(&d[..2]).join(d)
    }

    pub(crate) fn get(&self, key: &CacheKey) -> Result<Option<CachedValue>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(e)),
        };
        match decode(&bytes, key.level) {
            Some(v) => Ok(Some(v)),
            None => {
                log::warn!("ignoring unreadable cache entry {}", path.display());
                Ok(None)
            }
        }
    }

    pub(crate) fn put(&self, key: &CacheKey, value: &CachedValue) -> Result<()> {
        let path = self.path_for(key);
        let parent = path.parent().expect("entry has a parent directory");
        fs::create_dir_all(parent).map_err(cache_err)?;
        let mut tmp = tempfile_in(parent)?;
        tmp.1.write_all(&encode(value)).map_err(cache_err)?;
        tmp.1.sync_all().map_err(cache_err)?;
        drop(tmp.1);
        fs::rename(&tmp.0, &path).map_err(cache_err)
    }
}

fn tempfile_in(dir: &Path) -> Result<(PathBuf, fs::File)> {
    static COUNTER: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    let path = dir.join(format!(".tmp-{}-{n}", std::process::id()));
    let f = fs::File::create(&path).map_err(cache_err)?;
    Ok((path, f))
}

fn encode(value: &CachedValue) -> Vec<u8> {
    let (level, dim, vectors): (u8, usize, Vec<&EmbeddingVector>) = match value {
        CachedValue::Sentence(v) => (0, v.dimension(), vec![v]),
        CachedValue::Tokens(t) => (
            1,
            t.0.first().map_or(0, |v| v.dimension()),
            t.0.iter().collect(),
        ),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + vectors.len() * dim * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CACHE_FORMAT_VERSION.to_le_bytes());
    out.push(level);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(vectors.len() as u32).to_le_bytes());
    for v in vectors {
        for x in &v.0 {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn decode(bytes: &[u8], level: Level) -> Option<CachedValue> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return None;
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().ok()?);
    if version != CACHE_FORMAT_VERSION {
        return None;
    }
    let stored_level = bytes[6];
    let dim = u32::from_le_bytes(bytes[7..11].try_into().ok()?) as usize;
    let count = u32::from_le_bytes(bytes[11..15].try_into().ok()?) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != dim.checked_mul(count)?.checked_mul(8)? {
        return None;
    }
    let mut vectors: Vec<EmbeddingVector> = body
        .chunks_exact(8 * dim.max(1))
        .take(count)
        .map(|chunk| {
            EmbeddingVector(
                chunk
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            )
        })
        .collect();
    if dim == 0 {
        vectors = vec![EmbeddingVector(Vec::new()); count];
    }
    match (level, stored_level) {
        (Level::Sentence, 0) if vectors.len() == 1 => {
            Some(CachedValue::Sentence(vectors.remove(0)))
        }
        (Level::Token, 1) => Some(CachedValue::Tokens(TokenEmbeddings(vectors))),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(text: &str, level: Level, pooling: Option<PoolingMode>) -> CacheKey {
        CacheKey {
            provider: "p".into(),
            pooling,
            level,
            text: text.into(),
        }
    }

    #[test]
    fn round_trips_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::open(dir.path()).unwrap();
        let s = CachedValue::Sentence(EmbeddingVector(vec![0.1, -2.5e-300, 1.0 / 3.0]));
        let k = key("hello", Level::Sentence, None);
        assert_eq!(cache.get(&k).unwrap(), None);
        cache.put(&k, &s).unwrap();
        assert_eq!(cache.get(&k).unwrap(), Some(s));

        let t = CachedValue::Tokens(TokenEmbeddings(vec![
            EmbeddingVector(vec![1.0, 2.0]),
            EmbeddingVector(vec![3.0, 4.0]),
        ]));
        let k = key("hello", Level::Token, None);
        cache.put(&k, &t).unwrap();
        assert_eq!(cache.get(&k).unwrap(), Some(t));
        let empty = CachedValue::Tokens(TokenEmbeddings::default());
        let k = key("", Level::Token, None);
        cache.put(&k, &empty).unwrap();
        assert_eq!(cache.get(&k).unwrap(), Some(empty));
    }

    #[test]
    fn pooling_mode_separates_entries() {
        let a = key("x", Level::Sentence, Some(PoolingMode::Mean));
        let b = key("x", Level::Sentence, Some(PoolingMode::Cls));
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn corrupt_or_foreign_version_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::open(dir.path()).unwrap();
        let k = key("x", Level::Sentence, None);
        cache
            .put(&k, &CachedValue::Sentence(EmbeddingVector(vec![1.0])))
            .unwrap();
        let path = cache.path_for(&k);
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 9;
        fs::write(&path, &bytes).unwrap();
        assert_eq!(cache.get(&k).unwrap(), None);
        fs::write(&path, b"junk").unwrap();
        assert_eq!(cache.get(&k).unwrap(), None);
    }
}
