//! Interactive sessions and their in-memory store.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{OrchestratorError, Pipeline};
use crate::question_gen::{option_covers, Answer, MultiChoiceQuestion};
use crate::sql::SqlQuery;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Created,
    Asking,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub db_id: String,
    pub question: String,
    pub sql_before: Option<SqlQuery>,
    pub restated: Option<String>,
    /// Every question generated, addressed by position.
    pub questions: Vec<MultiChoiceQuestion>,
    /// Positions still to ask; the first is the current question.
    pub pending: Vec<usize>,
    pub answers: Vec<Answer>,
    /// Positions dropped because an earlier answer already covered them.
    pub skipped: Vec<usize>,
    pub modified_question: Option<String>,
    pub sql_after: Option<SqlQuery>,
    pub phase: Phase,
}

impl SessionState {
    pub fn new(id: impl Into<String>, db_id: impl Into<String>, question: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            db_id: db_id.into(),
            question: question.into(),
            sql_before: None,
            restated: None,
            questions: Vec::new(),
            pending: Vec::new(),
            answers: Vec::new(),
            skipped: Vec::new(),
            modified_question: None,
            sql_after: None,
            phase: Phase::Created,
        }
    }

    pub fn current(&self) -> Option<(usize, &MultiChoiceQuestion)> {
        self.pending.first().map(|&i| (i, &self.questions[i]))
    }

    /// Runs the loop's first pass. With no uncertain tokens the session
    /// finalizes at once and keeps the first prediction.
    pub fn start(&mut self, pipeline: &Pipeline) -> Result<(), OrchestratorError> {
        if self.phase != Phase::Created {
            return Err(OrchestratorError::Finalized(self.id.clone()));
        }
        let run = pipeline.run_once(&self.question, &self.db_id)?;
        self.sql_before = Some(run.sql.clone());
        self.restated = Some(run.restated.text);
        self.pending = (0..run.questions.len()).collect();
        self.questions = run.questions;
        if self.pending.is_empty() {
            self.modified_question = Some(self.question.clone());
            self.sql_after = Some(run.sql);
            self.phase = Phase::Finalized;
        } else {
            self.phase = Phase::Asking;
        }
        Ok(())
    }

    /// Records an answer to the current question, drops pending questions
    /// it covers, and finalizes once nothing is left.
    pub fn submit_answer(&mut self, pipeline: &Pipeline, answer: Answer) -> Result<(), OrchestratorError> {
        if self.phase != Phase::Asking {
            return Err(OrchestratorError::Finalized(self.id.clone()));
        }
        let Some((current, q)) = self.current() else {
            return Err(OrchestratorError::Finalized(self.id.clone()));
        };
        if answer.question != current {
            return Err(OrchestratorError::WrongQuestion { given: answer.question, expected: Some(current) });
        }
        if answer.option >= q.options.len() {
            return Err(OrchestratorError::BadOption { index: answer.option, len: q.options.len() });
        }
        let chosen = q.options[answer.option].clone();
        self.answers.push(answer);
        self.pending.remove(0);
        let questions = &self.questions;
        let (covered, rest): (Vec<usize>, Vec<usize>) =
            self.pending.iter().partition(|&&i| option_covers(&chosen, &questions[i].token));
        self.skipped.extend(covered);
        self.pending = rest;
        if self.pending.is_empty() {
            self.finalize(pipeline)?;
        }
        Ok(())
    }

    fn finalize(&mut self, pipeline: &Pipeline) -> Result<(), OrchestratorError> {
        let edits: Vec<_> = self
            .answers
            .iter()
            .map(|a| {
                let q = &self.questions[a.question];
                (q.token_index, q.options[a.option].clone())
            })
            .collect();
        let modified = pipeline.rewrite(&self.question, &edits)?;
        let sql = pipeline.gateway.parse(&modified.text, &self.db_id)?;
        self.modified_question = Some(modified.text);
        self.sql_after = Some(sql);
        self.phase = Phase::Finalized;
        Ok(())
    }
}

/// JSON view served over HTTP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub db_id: String,
    pub question: String,
    pub phase: Phase,
    pub sql_before: Option<String>,
    pub restated: Option<String>,
    pub questions: Vec<MultiChoiceQuestion>,
    pub current_question: Option<usize>,
    pub pending: Vec<usize>,
    pub answers: Vec<Answer>,
    pub skipped: Vec<usize>,
    pub answered: usize,
    pub total: usize,
    pub modified_question: Option<String>,
    pub sql_after: Option<String>,
}

impl From<&SessionState> for SessionView {
    fn from(s: &SessionState) -> Self {
        Self {
            id: s.id.clone(),
            db_id: s.db_id.clone(),
            question: s.question.clone(),
            phase: s.phase,
            sql_before: s.sql_before.as_ref().map(ToString::to_string),
            restated: s.restated.clone(),
            questions: s.questions.clone(),
            current_question: s.pending.first().copied(),
            pending: s.pending.clone(),
            answers: s.answers.clone(),
            skipped: s.skipped.clone(),
            answered: s.answers.len(),
            total: s.questions.len() - s.skipped.len(),
            modified_question: s.modified_question.clone(),
            sql_after: s.sql_after.as_ref().map(ToString::to_string),
        }
    }
}

struct Entry {
    state: SessionState,
    touched: Instant,
}

/// Sessions keyed by id, each behind its own lock, expiring after `ttl`
/// of inactivity. Every change can be appended to a JSON-lines log that
/// `open` replays.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
    ttl: Duration,
    log: Option<Mutex<File>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self { sessions: Mutex::new(HashMap::new()), ttl, log: None }
    }

    /// Store backed by an append-only log; sessions already in the log are
    /// restored with the latest state recorded for them.
    pub fn open(ttl: Duration, log: &Path) -> Result<Self, OrchestratorError> {
        let err = |e: std::io::Error| OrchestratorError::Log(format!("{}: {e}", log.display()));
        let mut restored: HashMap<String, SessionState> = HashMap::new();
        if log.exists() {
            for (n, line) in BufReader::new(File::open(log).map_err(err)?).lines().enumerate() {
                let line = line.map_err(err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let state: SessionState = serde_json::from_str(&line)
                    .map_err(|e| OrchestratorError::Log(format!("{}:{}: {e}", log.display(), n + 1)))?;
                restored.insert(state.id.clone(), state);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(log).map_err(err)?;
        let now = Instant::now();
        let sessions = restored
            .into_iter()
            .map(|(id, state)| (id, Arc::new(Mutex::new(Entry { state, touched: now }))))
            .collect();
        Ok(Self { sessions: Mutex::new(sessions), ttl, log: Some(Mutex::new(file)) })
    }

    fn record(&self, state: &SessionState) -> Result<(), OrchestratorError> {
        if let Some(log) = &self.log {
            let mut f = log.lock().unwrap_or_else(|p| p.into_inner());
            let line = serde_json::to_string(state).expect("state serializes");
            writeln!(f, "{line}").map_err(|e| OrchestratorError::Log(e.to_string()))?;
        }
        Ok(())
    }

    fn new_id() -> String {
        format!("{:032x}", rand::thread_rng().gen::<u128>())
    }

    /// Creates and starts a session. A failing first pass is reported and
    /// nothing is stored.
    pub fn create(&self, pipeline: &Pipeline, db_id: &str, question: &str) -> Result<SessionState, OrchestratorError> {
        self.purge_expired();
        let mut state = SessionState::new(Self::new_id(), db_id, question);
        state.start(pipeline)?;
        self.record(&state)?;
        let entry = Arc::new(Mutex::new(Entry { state: state.clone(), touched: Instant::now() }));
        self.sessions.lock().unwrap_or_else(|p| p.into_inner()).insert(state.id.clone(), entry);
        Ok(state)
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, OrchestratorError> {
        let map = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        let entry = map.get(id).cloned().ok_or_else(|| OrchestratorError::UnknownSession(id.to_string()))?;
        drop(map);
        let expired = entry.lock().unwrap_or_else(|p| p.into_inner()).touched.elapsed() > self.ttl;
        if expired {
            self.sessions.lock().unwrap_or_else(|p| p.into_inner()).remove(id);
            return Err(OrchestratorError::UnknownSession(id.to_string()));
        }
        Ok(entry)
    }

    pub fn get(&self, id: &str) -> Result<SessionState, OrchestratorError> {
        let entry = self.entry(id)?;
        let mut e = entry.lock().unwrap_or_else(|p| p.into_inner());
        e.touched = Instant::now();
        Ok(e.state.clone())
    }

    /// Applies an answer under the session's lock. A failed re-parse
    /// leaves the session unchanged.
    pub fn answer(&self, pipeline: &Pipeline, id: &str, answer: Answer) -> Result<SessionState, OrchestratorError> {
        let entry = self.entry(id)?;
        let mut e = entry.lock().unwrap_or_else(|p| p.into_inner());
        let mut next = e.state.clone();
        next.submit_answer(pipeline, answer)?;
        self.record(&next)?;
        e.state = next;
        e.touched = Instant::now();
        Ok(e.state.clone())
    }

    pub fn purge_expired(&self) -> usize {
        let mut map = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        let before = map.len();
        map.retain(|_, e| e.lock().map_or(true, |e| e.touched.elapsed() <= self.ttl));
        before - map.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
