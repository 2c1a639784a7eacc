use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::JudgeError;

/// One line of the verdict cache. `score` is null when the reply could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedVerdict {
    pub judge: String,
    pub model: String,
    pub id: String,
    pub response_hash: String,
    pub score: Option<u8>,
    pub raw_reply: String,
}

type Key = (String, String, String, String);

fn key_of(v: &CachedVerdict) -> Key {
    (
        v.judge.clone(),
        v.model.clone(),
        v.id.clone(),
        v.response_hash.clone(),
    )
}

/// Append-only verdict store; optional file backing so interrupted runs resume.
#[derive(Debug, Default)]
pub struct VerdictCache {
    entries: RwLock<HashMap<Key, CachedVerdict>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl VerdictCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads existing lines and appends new verdicts to `path`.
    ///
    /// Unreadable lines (for example a line cut short by a crash) are skipped.
    pub fn open(path: &Path) -> Result<Self, JudgeError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(path).map_err(|e| JudgeError::Cache(e.to_string()))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| JudgeError::Cache(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CachedVerdict>(&line) {
                    Ok(v) => {
                        entries.insert(key_of(&v), v);
                    }
                    Err(e) => log::warn!("{}:{}: skipping cache line: {e}", path.display(), i + 1),
                }
            }
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| JudgeError::Cache(e.to_string()))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| JudgeError::Cache(e.to_string()))?;
        Ok(VerdictCache {
            entries: RwLock::new(entries),
            file: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(
        &self,
        judge: &str,
        model: &str,
        id: &str,
        response_hash: &str,
    ) -> Option<CachedVerdict> {
        let key = (
            judge.to_string(),
            model.to_string(),
            id.to_string(),
            response_hash.to_string(),
        );
        self.entries.read().unwrap().get(&key).cloned()
    }

    pub fn insert(&self, verdict: CachedVerdict) -> Result<(), JudgeError> {
        let key = key_of(&verdict);
        if let Some(file) = &self.file {
            let line = serde_json::to_string(&verdict).expect("verdict serializes");
            let mut f = file.lock().unwrap();
            writeln!(f, "{line}").map_err(|e| JudgeError::Cache(e.to_string()))?;
            f.flush().map_err(|e| JudgeError::Cache(e.to_string()))?;
        }
        self.entries.write().unwrap().insert(key, verdict);
        Ok(())
    }
}
