//! Content-addressed, append-only audio store, optionally mirrored to a
//! directory of `{id}.wav` files.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use sha2::{Digest, Sha256};

use crate::backend::protocol::hex;
use crate::dsp::{read_wav_native, write_wav, Waveform};

/// Identifier derived from the rate and the exact sample bits.
pub fn artifact_id(wav: &Waveform) -> String {
    let mut hasher = Sha256::new();
    hasher.update(wav.sample_rate.to_le_bytes());
    for s in wav.samples.iter() {
        hasher.update(s.to_le_bytes());
    }
    hex(&hasher.finalize()[..16])
}

/// An id is valid when it is 32 lowercase hex digits.
pub fn is_artifact_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[derive(Debug, Default)]
pub struct ArtifactStore {
    items: RwLock<HashMap<String, Waveform>>,
    dir: Option<PathBuf>,
}

impl ArtifactStore {
    pub fn new() -> ArtifactStore {
        ArtifactStore::default()
    }

    /// A store persisting every artifact under `dir`, which is created if
    /// needed. Existing files are read lazily.
    pub fn with_dir(dir: impl Into<PathBuf>) -> std::io::Result<ArtifactStore> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ArtifactStore { items: RwLock::default(), dir: Some(dir) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn path_of(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().filter(|_| is_artifact_id(id)).map(|d| d.join(format!("{id}.wav")))
    }

    /// Stores `wav` unless an identical artifact exists; returns its id.
    /// With a directory, the file appears atomically and is never rewritten.
    pub fn put(&self, wav: &Waveform) -> String {
        self.try_put(wav).expect("artifact directory is writable")
    }

    pub fn try_put(&self, wav: &Waveform) -> std::io::Result<String> {
        let id = artifact_id(wav);
        if let Some(path) = self.path_of(&id) {
            if !path.exists() {
                let dir = self.dir.as_ref().expect("path implies a directory");
                let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
                tmp.write_all(&write_wav(wav))?;
                tmp.as_file().sync_all()?;
                tmp.persist(&path).map_err(|e| e.error)?;
            }
        }
        let mut items = self.items.write().expect("artifact store lock poisoned");
        items.entry(id.clone()).or_insert_with(|| wav.clone());
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<Waveform> {
        if let Some(wav) = self.items.read().expect("artifact store lock poisoned").get(id) {
            return Some(wav.clone());
        }
        let bytes = std::fs::read(self.path_of(id)?).ok()?;
        let wav = read_wav_native(&bytes).ok()?;
        self.items.write().expect("artifact store lock poisoned").insert(id.to_string(), wav.clone());
        Some(wav)
    }

    /// Raw WAV bytes of an artifact.
    pub fn wav_bytes(&self, id: &str) -> Option<Vec<u8>> {
        if let Some(path) = self.path_of(id) {
            if let Ok(bytes) = std::fs::read(path) {
                return Some(bytes);
            }
        }
        self.items.read().expect("artifact store lock poisoned").get(id).map(write_wav)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.items.read().expect("artifact store lock poisoned").contains_key(id)
            || self.path_of(id).is_some_and(|p| p.exists())
    }

    /// Ids held in memory or on disk, sorted.
    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.items.read().expect("artifact store lock poisoned").keys().cloned().collect();
        if let Some(dir) = &self.dir {
            if let Ok(entries) = std::fs::read_dir(dir) {
                for entry in entries.flatten() {
                    let name = entry.file_name().to_string_lossy().to_string();
                    if let Some(id) = name.strip_suffix(".wav").filter(|id| is_artifact_id(id)) {
                        ids.push(id.to_string());
                    }
                }
            }
        }
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn len(&self) -> usize {
        self.ids().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_follow_content() {
        let store = ArtifactStore::new();
        let a = Waveform::new(vec![0.1, 0.2], 16000);
        let id = store.put(&a);
        assert!(is_artifact_id(&id));
        assert_eq!(store.put(&a.clone()), id);
        assert_eq!(store.len(), 1);
        assert_ne!(store.put(&Waveform::new(vec![0.1, 0.2], 48000)), id);
        assert_ne!(artifact_id(&Waveform::new(vec![0.1, 0.25], 16000)), id);
        assert_eq!(store.get(&id), Some(a));
        assert!(!is_artifact_id("../etc/passwd"));
    }

    #[test]
    fn directory_backed_store() {
        let dir = tempfile::tempdir().unwrap();
        let a = Waveform::new(vec![0.5, -0.25, 0.125], 22050);
        let id = ArtifactStore::with_dir(dir.path()).unwrap().put(&a);
        let reopened = ArtifactStore::with_dir(dir.path()).unwrap();
        assert!(reopened.contains(&id));
        assert_eq!(reopened.ids(), vec![id.clone()]);
        assert_eq!(reopened.get(&id), Some(a));
        assert_eq!(&reopened.wav_bytes(&id).unwrap()[..4], b"RIFF");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
