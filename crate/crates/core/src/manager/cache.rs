use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::fingerprint::Fingerprint;
use crate::analysis::ValueMap;
use crate::ir::QName;

/// Persisted results of one analysis on one module.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheEntry {
    pub module: String,
    pub analysis: String,
    pub version: u32,
    pub fingerprint: Fingerprint,
    /// Values of exported entities; this is what importers see.
    pub public_values: ValueMap,
    /// Values of every entity defined in the module.
    pub all_values: ValueMap,
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt cache file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

#[derive(Serialize)]
struct Body {
    module: String,
    analysis: String,
    version: u32,
    fingerprint: Fingerprint,
    public: BTreeMap<String, Value>,
    all: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    module: String,
    analysis: String,
    version: u32,
    fingerprint: Fingerprint,
    public: BTreeMap<String, Value>,
    all: BTreeMap<String, Value>,
    checksum: String,
}

impl File {
    fn new(body: Body) -> Self {
        File {
            checksum: checksum(&body),
            module: body.module,
            analysis: body.analysis,
            version: body.version,
            fingerprint: body.fingerprint,
            public: body.public,
            all: body.all,
        }
    }

    fn split(self) -> (Body, String) {
        let body = Body {
            module: self.module,
            analysis: self.analysis,
            version: self.version,
            fingerprint: self.fingerprint,
            public: self.public,
            all: self.all,
        };
        (body, self.checksum)
    }
}

fn checksum(body: &Body) -> String {
    let bytes = serde_json::to_vec(body).expect("cache body serializes");
    hex::encode(Sha256::digest(bytes))
}

fn render_keys(values: &ValueMap) -> BTreeMap<String, Value> {
    values.iter().map(|(q, v)| (q.to_string(), v.clone())).collect()
}

fn parse_keys(module: &str, values: BTreeMap<String, Value>) -> Result<ValueMap, String> {
    values
        .into_iter()
        .map(|(k, v)| {
            QName::strip_module(module, &k)
                .map(|q| (q, v))
                .ok_or_else(|| format!("entity {k} does not belong to module {module}"))
        })
        .collect()
}

impl CacheEntry {
    /// Canonical on-disk form: key order is fixed, so equal entries render
    /// to identical bytes.
    pub fn to_json(&self) -> String {
        let body = Body {
            module: self.module.clone(),
            analysis: self.analysis.clone(),
            version: self.version,
            fingerprint: self.fingerprint,
            public: render_keys(&self.public_values),
            all: render_keys(&self.all_values),
        };
        let file = File::new(body);
        let mut s = serde_json::to_string_pretty(&file).expect("cache entry serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: File = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let (b, sum) = file.split();
        if checksum(&b) != sum {
            return Err("checksum mismatch".into());
        }
        let public_values = parse_keys(&b.module, b.public)?;
        let all_values = parse_keys(&b.module, b.all)?;
        if let Some(q) = public_values.keys().find(|q| !all_values.contains_key(q)) {
            return Err(format!("public entity {q} missing from full results"));
        }
        Ok(CacheEntry {
            module: b.module,
            analysis: b.analysis,
            version: b.version,
            fingerprint: b.fingerprint,
            public_values,
            all_values,
        })
    }
}

pub fn cache_path(cache_dir: &Path, module: &str, analysis: &str) -> PathBuf {
    cache_dir.join(module).join(format!("{analysis}.json"))
}

/// Cached entry if present and computed from the same inputs. A stale
/// fingerprint or version is a plain miss; an unreadable file is an error.
pub fn cache_lookup(
    cache_dir: &Path,
    module: &str,
    analysis: &str,
    version: u32,
    expected: Fingerprint,
) -> Result<Option<CacheEntry>, CacheError> {
    let path = cache_path(cache_dir, module, analysis);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) if e.kind() == io::ErrorKind::InvalidData => {
            return Err(CacheError::Corrupt {
                path,
                reason: e.to_string(),
            })
        }
        Err(source) => return Err(CacheError::Io { path, source }),
    };
    let entry = CacheEntry::from_json(&text).map_err(|reason| CacheError::Corrupt {
        path: path.clone(),
        reason,
    })?;
    if entry.module != module || entry.analysis != analysis {
        return Err(CacheError::Corrupt {
            path,
            reason: format!("holds {} for {}", entry.analysis, entry.module),
        });
    }
    if entry.version != version || entry.fingerprint != expected {
        return Ok(None);
    }
    Ok(Some(entry))
}

/// Atomically replaces the cache file of `entry`: readers see either the
/// old or the new content, never a partial write.
pub fn cache_store(cache_dir: &Path, entry: &CacheEntry) -> Result<(), CacheError> {
    let path = cache_path(cache_dir, &entry.module, &entry.analysis);
    let dir = path.parent().expect("cache path has a parent");
    let io_err = |source| CacheError::Io {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(entry.to_json().as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(&path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Removes every cached result under `cache_dir`.
pub fn delete_cache(cache_dir: &Path) -> Result<(), CacheError> {
    match std::fs::remove_dir_all(cache_dir) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
        Err(source) => Err(CacheError::Io {
            path: cache_dir.to_path_buf(),
            source,
        }),
    }
}
