//! Episode logs as JSON lines: one header, one line per step, and a footer
//! once the episode ends. A log without a footer is partial.

use super::session::{SessionStatus, StepOutcome};
use crate::action::{ActionSpec, RawAgentOutput};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const LOG_FORMAT: &str = "graphbench-episode/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub task: String,
    pub seed: u64,
    pub manifest_digest: String,
    pub max_steps: u32,
    pub engine_version: String,
}

impl LogHeader {
    pub fn new(task: &str, seed: u64, manifest_digest: &str, max_steps: u32) -> Self {
        Self {
            format: LOG_FORMAT.to_string(),
            task: task.to_string(),
            seed,
            manifest_digest: manifest_digest.to_string(),
            max_steps,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: u32,
    pub observation_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawAgentOutput>,
    pub action: ActionSpec,
    pub outcome: StepOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogFooter {
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub steps: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "line", rename_all = "snake_case")]
enum LogLine {
    Header(LogHeader),
    Step(StepRecord),
    End(LogFooter),
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("log is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub steps: Vec<StepRecord>,
    pub footer: Option<LogFooter>,
}

impl EpisodeLog {
    pub fn new(header: LogHeader) -> Self {
        Self { header, steps: Vec::new(), footer: None }
    }

    pub fn is_partial(&self) -> bool {
        self.footer.is_none()
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        write_line(&mut w, &LogLine::Header(self.header.clone()))?;
        for s in &self.steps {
            write_line(&mut w, &LogLine::Step(s.clone()))?;
        }
        if let Some(f) = &self.footer {
            write_line(&mut w, &LogLine::End(f.clone()))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Reads a log, accepting a missing footer. Blank lines are skipped.
    pub fn read_jsonl(r: impl BufRead) -> Result<Self, LogError> {
        let mut log: Option<EpisodeLog> = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| LogError::Malformed { line: i + 1, message };
            let parsed: LogLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            match (parsed, log.as_mut()) {
                (LogLine::Header(h), None) => log = Some(EpisodeLog::new(h)),
                (LogLine::Header(_), Some(_)) => return Err(malformed("second header".into())),
                (_, None) => return Err(malformed("first line must be the header".into())),
                (_, Some(l)) if l.footer.is_some() => return Err(malformed("line after footer".into())),
                (LogLine::Step(s), Some(l)) => l.steps.push(s),
                (LogLine::End(f), Some(l)) => l.footer = Some(f),
            }
        }
        log.ok_or(LogError::Empty)
    }

    pub fn from_jsonl(s: &str) -> Result<Self, LogError> {
        Self::read_jsonl(s.as_bytes())
    }
}

fn write_line(w: &mut impl Write, line: &LogLine) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, line)?;
    w.write_all(b"\n")
}

/// Appends log lines to a file as they happen, so a crash leaves a partial
/// log rather than nothing.
#[derive(Debug)]
pub struct LogWriter {
    out: std::io::BufWriter<std::fs::File>,
    written_steps: usize,
    footer_written: bool,
}

impl LogWriter {
    pub fn create(path: &std::path::Path, header: &LogHeader) -> std::io::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_line(&mut out, &LogLine::Header(header.clone()))?;
        out.flush()?;
        Ok(Self { out, written_steps: 0, footer_written: false })
    }

    /// Writes whatever `log` holds beyond what was already written.
    pub fn sync(&mut self, log: &EpisodeLog) -> std::io::Result<()> {
        for s in &log.steps[self.written_steps..] {
            write_line(&mut self.out, &LogLine::Step(s.clone()))?;
        }
        self.written_steps = log.steps.len();
        if let (Some(f), false) = (&log.footer, self.footer_written) {
            write_line(&mut self.out, &LogLine::End(f.clone()))?;
            self.footer_written = true;
        }
        self.out.flush()
    }
}
