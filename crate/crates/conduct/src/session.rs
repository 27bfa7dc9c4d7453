//! Trial sessions and their append-only event logs.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};

use combodose_core::designs::DesignId;
use combodose_core::history::{Recommendation, TrialHistory};
use combodose_core::{CohortRecord, Error};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        id: String,
        history: TrialHistory,
    },
    Cohort {
        cohort: CohortRecord,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        idempotency_key: Option<String>,
        /// Audit note recorded when the dose differs from the recommendation.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    Undo,
}

/// Everything a client sees about a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub design: DesignId,
    pub revision: u64,
    /// Replayable with `combodose decide --history`.
    pub history: TrialHistory,
    /// Audit notes aligned with `history.log`.
    pub notes: Vec<Option<String>>,
    pub recommendation: Recommendation,
    pub terminated: bool,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub history: TrialHistory,
    pub revision: u64,
    keys: Vec<Option<String>>,
    notes: Vec<Option<String>>,
    responses: HashMap<String, SessionView>,
    view: SessionView,
}

impl Session {
    pub fn new(id: String, history: TrialHistory) -> Result<Self, Error> {
        history.validate()?;
        let view = render(&id, &history, 0, &[])?;
        Ok(Session {
            id,
            history,
            revision: 0,
            keys: Vec::new(),
            notes: Vec::new(),
            responses: HashMap::new(),
            view,
        })
    }

    pub fn view(&self) -> &SessionView {
        &self.view
    }

    pub fn cached_response(&self, key: &str) -> Option<&SessionView> {
        self.responses.get(key)
    }

    /// Apply a mutation in memory. Validation is the caller's job.
    pub fn apply(&mut self, event: &Event) -> Result<(), Error> {
        match event {
            Event::Created { .. } => {
                return Err(Error::InvalidHistory("session already exists".into()))
            }
            Event::Cohort {
                cohort,
                idempotency_key,
                note,
            } => {
                let mut next = self.history.clone();
                next.log.push(*cohort);
                next.state()?;
                self.history = next;
                self.keys.push(idempotency_key.clone());
                self.notes.push(note.clone());
            }
            Event::Undo => {
                if self.history.log.pop().is_none() {
                    return Err(Error::InvalidHistory("nothing to undo".into()));
                }
                self.notes.pop();
                if let Some(Some(key)) = self.keys.pop() {
                    self.responses.remove(&key);
                }
            }
        }
        self.revision += 1;
        self.view = render(&self.id, &self.history, self.revision, &self.notes)?;
        if let Event::Cohort {
            idempotency_key: Some(key),
            ..
        } = event
        {
            self.responses.insert(key.clone(), self.view.clone());
        }
        Ok(())
    }
}

fn render(
    id: &str,
    history: &TrialHistory,
    revision: u64,
    notes: &[Option<String>],
) -> Result<SessionView, Error> {
    let recommendation = history.evaluate()?;
    Ok(SessionView {
        id: id.to_string(),
        design: history.design.id(),
        revision,
        history: history.clone(),
        notes: notes.to_vec(),
        terminated: recommendation.decision.is_terminate(),
        recommendation,
    })
}

/// All sessions, optionally persisted as one JSON-lines file per session.
pub struct Store {
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl Store {
    pub fn in_memory() -> Self {
        Store {
            dir: None,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    /// Open a data directory and replay every session found in it.
    pub fn open(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir)?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let s = replay(&path)?;
            sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
        }
        Ok(Store {
            dir: Some(dir.to_path_buf()),
            sessions: RwLock::new(sessions),
        })
    }

    fn path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    /// Write an event durably before it is applied in memory.
    pub fn append(&self, id: &str, event: &Event) -> Result<(), Error> {
        let Some(path) = self.path(id) else {
            return Ok(());
        };
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    pub async fn create(&self, history: TrialHistory) -> Result<Arc<Mutex<Session>>, Error> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::new(id.clone(), history.clone())?;
        self.append(
            &id,
            &Event::Created {
                id: id.clone(),
                history,
            },
        )?;
        let session = Arc::new(Mutex::new(session));
        self.sessions.write().await.insert(id, session.clone());
        Ok(session)
    }

    pub async fn get(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.read().await.get(id).cloned()
    }
}

fn replay(path: &Path) -> Result<Session, Error> {
    let reader = BufReader::new(File::open(path)?);
    let mut session: Option<Session> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), i + 1)))?;
        match (&mut session, event) {
            (None, Event::Created { id, history }) => session = Some(Session::new(id, history)?),
            (Some(s), e @ (Event::Cohort { .. } | Event::Undo)) => s.apply(&e)?,
            _ => {
                return Err(Error::InvalidHistory(format!(
                    "{} line {}: unexpected event",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    session.ok_or_else(|| Error::InvalidHistory(format!("{} is empty", path.display())))
}
