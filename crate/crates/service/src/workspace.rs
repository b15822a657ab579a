//! On-disk session layout:
//!
//! ```text
//! {root}/sessions/{id}/session.json
//! {root}/sessions/{id}/rounds/{k}.json
//! {root}/sessions/{id}/artifacts/{artifact}.wav
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place, so
//! a reader sees either the previous or the new version.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wavcraft_core::exec::{is_artifact_id, ArtifactStore};
use wavcraft_core::orchestrator::{RoundRecord, SessionState};

pub const SESSION_FILE: &str = "session.json";

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("invalid session id {0:?}")]
    InvalidId(String),
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Io { path: path.to_path_buf(), source }
}

/// Session ids are restricted so they can never escape the workspace.
pub fn is_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub inputs: usize,
    pub rounds: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsckReport {
    pub sessions: usize,
    /// `(session, artifact)` pairs referenced but absent.
    pub missing_artifacts: Vec<(String, String)>,
    /// Session or round files that cannot be read back.
    pub unreadable: Vec<String>,
    /// Rounds in session.json without a matching rounds/{k}.json.
    pub missing_rounds: Vec<(String, usize)>,
}

impl FsckReport {
    pub fn is_clean(&self) -> bool {
        self.missing_artifacts.is_empty() && self.unreadable.is_empty() && self.missing_rounds.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Workspace {
    root: PathBuf,
}

/// Writes `bytes` to `path` through a renamed temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> Result<Workspace, WorkspaceError> {
        let root = root.into();
        let sessions = root.join("sessions");
        std::fs::create_dir_all(&sessions).map_err(io_at(&sessions))?;
        Ok(Workspace { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn checked(&self, id: &str) -> Result<PathBuf, WorkspaceError> {
        if !is_session_id(id) {
            return Err(WorkspaceError::InvalidId(id.to_string()));
        }
        Ok(self.root.join("sessions").join(id))
    }

    pub fn session_dir(&self, id: &str) -> Result<PathBuf, WorkspaceError> {
        self.checked(id)
    }

    pub fn exists(&self, id: &str) -> bool {
        self.checked(id).is_ok_and(|dir| dir.join(SESSION_FILE).is_file())
    }

    /// The artifact store of session `id`.
    pub fn store(&self, id: &str) -> Result<ArtifactStore, WorkspaceError> {
        let dir = self.checked(id)?.join("artifacts");
        ArtifactStore::with_dir(&dir).map_err(io_at(&dir))
    }

    /// Writes round files, then session.json. A round file is only
    /// replaced when it differs, which happens only for a file left by a
    /// save that never reached session.json.
    pub fn save(&self, session: &SessionState) -> Result<(), WorkspaceError> {
        let dir = self.checked(&session.session_id)?;
        for round in &session.rounds {
            let path = dir.join("rounds").join(format!("{}.json", round.index));
            let json = serde_json::to_vec_pretty(round).expect("round serializes");
            if std::fs::read(&path).ok().as_deref() != Some(json.as_slice()) {
                write_atomic(&path, &json).map_err(io_at(&path))?;
            }
        }
        let path = dir.join(SESSION_FILE);
        let json = serde_json::to_vec_pretty(session).expect("session serializes");
        write_atomic(&path, &json).map_err(io_at(&path))
    }

    pub fn load(&self, id: &str) -> Result<SessionState, WorkspaceError> {
        let path = self.checked(id)?.join(SESSION_FILE);
        let bytes = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(WorkspaceError::NotFound(id.to_string())),
            Err(e) => return Err(WorkspaceError::Io { path, source: e }),
        };
        let session: SessionState = serde_json::from_slice(&bytes)
            .map_err(|e| WorkspaceError::Corrupt { path: path.clone(), message: e.to_string() })?;
        if session.session_id != id {
            return Err(WorkspaceError::Corrupt { path, message: format!("holds session {:?}", session.session_id) });
        }
        Ok(session)
    }

    pub fn load_round(&self, id: &str, index: usize) -> Result<RoundRecord, WorkspaceError> {
        let path = self.checked(id)?.join("rounds").join(format!("{index}.json"));
        let bytes = std::fs::read(&path).map_err(io_at(&path))?;
        serde_json::from_slice(&bytes).map_err(|e| WorkspaceError::Corrupt { path, message: e.to_string() })
    }

    /// Ids of every session directory holding a session file, sorted.
    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = std::fs::read_dir(self.root.join("sessions"))
            .into_iter()
            .flatten()
            .flatten()
            .filter_map(|e| e.file_name().to_str().map(str::to_string))
            .filter(|id| self.exists(id))
            .collect();
        ids.sort();
        ids
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        self.session_ids()
            .into_iter()
            .filter_map(|id| self.load(&id).ok())
            .map(|s| SessionSummary { session_id: s.session_id, inputs: s.inputs.len(), rounds: s.rounds.len() })
            .collect()
    }

    pub fn delete(&self, id: &str) -> Result<(), WorkspaceError> {
        let dir = self.checked(id)?;
        if !dir.join(SESSION_FILE).is_file() {
            return Err(WorkspaceError::NotFound(id.to_string()));
        }
        std::fs::remove_dir_all(&dir).map_err(io_at(&dir))
    }

    /// Path of an artifact in any session.
    pub fn find_artifact(&self, artifact: &str) -> Option<PathBuf> {
        if !is_artifact_id(artifact) {
            return None;
        }
        self.session_ids()
            .into_iter()
            .map(|id| self.root.join("sessions").join(id).join("artifacts").join(format!("{artifact}.wav")))
            .find(|p| p.is_file())
    }

    /// Checks that every session loads and every referenced artifact and
    /// round file exists.
    pub fn fsck(&self) -> FsckReport {
        let mut report = FsckReport::default();
        let dirs = std::fs::read_dir(self.root.join("sessions")).into_iter().flatten().flatten();
        for entry in dirs {
            let Some(id) = entry.file_name().to_str().map(str::to_string) else { continue };
            if !entry.path().is_dir() {
                continue;
            }
            report.sessions += 1;
            let session = match self.load(&id) {
                Ok(session) => session,
                Err(e) => {
                    report.unreadable.push(e.to_string());
                    continue;
                }
            };
            let artifacts = entry.path().join("artifacts");
            for artifact in session.referenced_artifacts() {
                if !artifacts.join(format!("{artifact}.wav")).is_file() {
                    report.missing_artifacts.push((id.clone(), artifact));
                }
            }
            for round in &session.rounds {
                match self.load_round(&id, round.index) {
                    Ok(stored) if &stored == round => {}
                    Ok(_) => {
                        report.unreadable.push(format!("{id}: rounds/{}.json differs from session.json", round.index))
                    }
                    Err(WorkspaceError::Io { .. }) => report.missing_rounds.push((id.clone(), round.index)),
                    Err(e) => report.unreadable.push(e.to_string()),
                }
            }
        }
        report.missing_artifacts.sort();
        report.unreadable.sort();
        report.missing_rounds.sort();
        report
    }
}
