//! Append-only session persistence: one JSON record per turn in
//! `<dir>/<session_id>.jsonl`.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{step, AgentConfig, AgentTurn, Session};
use crate::error::{Error, Result};
use crate::pipeline::Engine;

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(SessionStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, session_id: &str) -> Result<PathBuf> {
        let ok = !session_id.is_empty()
            && session_id.len() <= 64
            && session_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(Error::Contract(format!("invalid session id {session_id:?}")));
        }
        Ok(self.dir.join(format!("{session_id}.jsonl")))
    }

    pub fn exists(&self, session_id: &str) -> Result<bool> {
        Ok(self.path(session_id)?.is_file())
    }

    pub fn create(&self, session_id: &str) -> Result<Session> {
        let path = self.path(session_id)?;
        OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Error::Contract(format!("session {session_id} already exists"))
            } else {
                e.into()
            }
        })?;
        Ok(Session::new(session_id))
    }

    pub fn append(&self, session_id: &str, turn: &AgentTurn) -> Result<()> {
        let path = self.path(session_id)?;
        if !path.is_file() {
            return Err(Error::UnknownSession(session_id.to_string()));
        }
        let mut line = serde_json::to_string(turn)?;
        line.push('\n');
        let mut file = OpenOptions::new().append(true).open(&path)?;
        file.write_all(line.as_bytes())?;
        file.flush()?;
        Ok(())
    }

    pub fn load(&self, session_id: &str) -> Result<Session> {
        let path = self.path(session_id)?;
        let file = std::fs::File::open(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::UnknownSession(session_id.to_string()),
            _ => e.into(),
        })?;
        let mut session = Session::new(session_id);
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            session.push(serde_json::from_str(&line)?);
        }
        Ok(session)
    }

    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids: Vec<String> = std::fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".jsonl")).map(str::to_string))
            .collect();
        ids.sort();
        Ok(ids)
    }
}

/// Re-runs the utterances of `session` from scratch.
pub fn replay(session: &Session, engine: &Engine, config: &AgentConfig) -> Result<Session> {
    let mut fresh = Session::new(session.session_id.clone());
    for turn in &session.turns {
        let next = step(&fresh, &turn.utterance, engine, config)?;
        fresh.push(next);
    }
    Ok(fresh)
}
