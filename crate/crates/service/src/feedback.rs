//! Human decisions on recommendations, kept in an append-only JSONL log.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use anchorlink::linker::RejectedTriple;
use anchorlink::span::Span;
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const DEFAULT_REASON: &str = "incorrect link destination";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accepted,
    Rejected,
    Skipped,
}

impl std::str::FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accepted" => Ok(Decision::Accepted),
            "rejected" => Ok(Decision::Rejected),
            "skipped" => Ok(Decision::Skipped),
            other => Err(format!("unknown decision {other:?}")),
        }
    }
}

/// A decision as submitted, before it gets an id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSubmission {
    pub article: String,
    pub span: Span,
    pub surface: String,
    pub target: String,
    pub probability: f64,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection_reason: Option<String>,
    #[serde(default)]
    pub client_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub id: u64,
    pub article: String,
    pub span: Span,
    pub surface: String,
    pub target: String,
    pub probability: f64,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection_reason: Option<String>,
    pub client_id: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{field}: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        ValidationError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, name: &str) -> Result<T, ValidationError> {
    let value = obj
        .get(name)
        .ok_or_else(|| ValidationError::new(name, "missing"))?;
    serde_json::from_value(value.clone()).map_err(|e| ValidationError::new(name, e.to_string()))
}

fn optional<T: DeserializeOwned>(
    obj: &Map<String, Value>,
    name: &str,
) -> Result<Option<T>, ValidationError> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| ValidationError::new(name, e.to_string())),
    }
}

impl FeedbackSubmission {
    /// Checks a JSON payload field by field so that errors name the field.
    pub fn from_json(value: &Value, reasons: &[String]) -> Result<Self, ValidationError> {
        let obj = value
            .as_object()
            .ok_or_else(|| ValidationError::new("body", "expected a JSON object"))?;
        let decision: String = field(obj, "decision")?;
        let decision: Decision = decision
            .parse()
            .map_err(|m: String| ValidationError::new("decision", m))?;
        let submission = FeedbackSubmission {
            article: field(obj, "article")?,
            span: field(obj, "span")?,
            surface: field(obj, "surface")?,
            target: field(obj, "target")?,
            probability: field(obj, "probability")?,
            decision,
            rejection_reason: optional(obj, "rejection_reason")?,
            client_id: optional(obj, "client_id")?.unwrap_or_default(),
            timestamp: optional(obj, "timestamp")?,
        };
        submission.validate(reasons)?;
        Ok(submission)
    }

    pub fn validate(&self, reasons: &[String]) -> Result<(), ValidationError> {
        if self.article.is_empty() {
            return Err(ValidationError::new("article", "must not be empty"));
        }
        if self.target.is_empty() {
            return Err(ValidationError::new("target", "must not be empty"));
        }
        if self.span.start > self.span.end {
            return Err(ValidationError::new("span", "start after end"));
        }
        if self.surface.chars().count() != self.span.len() {
            return Err(ValidationError::new("surface", "length differs from span"));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(ValidationError::new("probability", "must lie in [0, 1]"));
        }
        if let Some(reason) = &self.rejection_reason {
            if self.decision != Decision::Rejected {
                return Err(ValidationError::new(
                    "rejection_reason",
                    "only allowed when decision is rejected",
                ));
            }
            if !reasons.contains(reason) {
                return Err(ValidationError::new(
                    "rejection_reason",
                    format!("unknown reason {reason:?}"),
                ));
            }
        }
        Ok(())
    }

    fn into_event(self, id: u64, now: DateTime<Utc>) -> FeedbackEvent {
        FeedbackEvent {
            id,
            article: self.article,
            span: self.span,
            surface: self.surface,
            target: self.target,
            probability: self.probability,
            decision: self.decision,
            rejection_reason: self.rejection_reason,
            client_id: self.client_id,
            timestamp: self.timestamp.unwrap_or(now),
        }
    }
}

/// Everything derived from the log. Rebuilt identically by replay.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeedbackState {
    pub events: Vec<FeedbackEvent>,
    pub by_decision: BTreeMap<Decision, u64>,
    /// Judged-wrong suggestions kept out of later batches.
    pub rejected: BTreeSet<RejectedTriple>,
}

impl FeedbackState {
    pub fn from_events(events: impl IntoIterator<Item = FeedbackEvent>) -> Self {
        let mut state = FeedbackState::default();
        for e in events {
            state.apply(e);
        }
        state
    }

    pub fn apply(&mut self, event: FeedbackEvent) {
        *self.by_decision.entry(event.decision).or_default() += 1;
        if event.decision == Decision::Rejected {
            self.rejected.insert(RejectedTriple::new(
                &event.article,
                &event.surface,
                &event.target,
            ));
        }
        self.events.push(event);
    }

    pub fn next_id(&self) -> u64 {
        self.events.last().map_or(1, |e| e.id + 1)
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Reads every event in the log. A final line without a newline is a torn
/// write and is ignored.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<FeedbackEvent>, LogError> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut events = Vec::new();
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        if !line.ends_with('\n') {
            tracing::warn!("{}:{line_no}: ignoring torn final line", path.display());
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| LogError::Format {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

pub fn replay(path: impl AsRef<Path>) -> Result<FeedbackState, LogError> {
    Ok(FeedbackState::from_events(read_log(path)?))
}

#[derive(Debug)]
pub struct FeedbackLog {
    path: PathBuf,
    file: File,
    state: FeedbackState,
}

impl FeedbackLog {
    /// Opens the log for appending, replaying what is already there.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, LogError> {
        let path = path.into();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let state = replay(&path)?;
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)?;
        drop_torn_tail(&mut file)?;
        Ok(FeedbackLog { path, file, state })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn state(&self) -> &FeedbackState {
        &self.state
    }

    /// Appends the events in one write and syncs before returning them.
    pub fn append(
        &mut self,
        submissions: Vec<FeedbackSubmission>,
    ) -> Result<Vec<FeedbackEvent>, LogError> {
        let now = Utc::now();
        let mut buf = Vec::new();
        let mut events = Vec::with_capacity(submissions.len());
        for (id, s) in (self.state.next_id()..).zip(submissions) {
            let event = s.into_event(id, now);
            serde_json::to_writer(&mut buf, &event).map_err(io::Error::other)?;
            buf.push(b'\n');
            events.push(event);
        }
        if events.is_empty() {
            return Ok(events);
        }
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        for e in &events {
            self.state.apply(e.clone());
        }
        Ok(events)
    }
}

fn drop_torn_tail(file: &mut File) -> io::Result<()> {
    let len = file.metadata()?.len();
    if len == 0 {
        return Ok(());
    }
    let mut bytes = Vec::with_capacity(len as usize);
    file.seek(SeekFrom::Start(0))?;
    file.read_to_end(&mut bytes)?;
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep as u64 != len {
        file.set_len(keep as u64)?;
        file.sync_data()?;
    }
    Ok(())
}
