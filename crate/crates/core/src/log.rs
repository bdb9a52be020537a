//! Episode persistence: one structured record per control step plus a
//! terminal end signal, written line-delimited so logs stream and diff.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostReport;
use crate::types::Action;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("out-of-order step: expected {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("log line {line} malformed: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("record after end signal")]
    AfterEnd,
}

/// Why an episode stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndSignal {
    Success,
    BudgetExhausted,
    Error(String),
}

/// Everything one control step decided and observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub obs_digest: String,
    pub mu: [f64; 7],
    pub chosen: usize,
    pub action: Action,
    pub costs: Vec<CostReport>,
    #[serde(rename = "w_D")]
    pub w_d: f64,
    pub duration_ms: u64,
    pub degraded: bool,
}

/// Ordered step records plus the end signal. Everything except the
/// wall-clock durations is a pure function of (config, seed, scripted
/// deps); [`EpisodeLog::canonical_jsonl`] zeroes the durations so that
/// reproducibility can be checked bitwise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub steps: Vec<StepRecord>,
    pub end: Option<EndSignal>,
}

impl EpisodeLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; steps must be contiguous from 0.
    pub fn append_step(&mut self, record: StepRecord) -> Result<(), LogError> {
        if self.end.is_some() {
            return Err(LogError::AfterEnd);
        }
        let expected = self.steps.last().map(|r| r.step + 1).unwrap_or(0);
        if record.step != expected {
            return Err(LogError::OutOfOrder { expected, got: record.step });
        }
        self.steps.push(record);
        Ok(())
    }

    pub fn set_end(&mut self, end: EndSignal) {
        self.end = Some(end);
    }

    pub fn succeeded(&self) -> bool {
        self.end == Some(EndSignal::Success)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_duration_ms(&self) -> u64 {
        self.steps.iter().map(|r| r.duration_ms).sum()
    }

    /// One JSON object per line: every step, then `{"end": ...}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.steps {
            out.push_str(&serde_json::to_string(record).expect("step records serialize"));
            out.push('\n');
        }
        if let Some(end) = &self.end {
            out.push_str(
                &serde_json::to_string(&EndLine { end: end.clone() })
                    .expect("end signal serializes"),
            );
            out.push('\n');
        }
        out
    }

    /// The identity surface for reproducibility checks: the same log with
    /// every wall-clock duration zeroed. Two runs with identical config,
    /// seed and scripted dependencies produce byte-identical output here.
    pub fn canonical_jsonl(&self) -> String {
        let mut clone = self.clone();
        for r in clone.steps.iter_mut() {
            r.duration_ms = 0;
        }
        clone.to_jsonl()
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<(), LogError> {
        w.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LogError> {
        let file = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self, LogError> {
        let mut log = EpisodeLog::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(end) = serde_json::from_str::<EndLine>(&line) {
                log.set_end(end.end);
                continue;
            }
            let record: StepRecord = serde_json::from_str(&line)
                .map_err(|e| LogError::Malformed { line: i + 1, reason: e.to_string() })?;
            log.append_step(record)?;
        }
        Ok(log)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

#[derive(Serialize, Deserialize)]
struct EndLine {
    end: EndSignal,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: u64) -> StepRecord {
        StepRecord {
            step,
            obs_digest: format!("digest{step}"),
            mu: [0.01, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            chosen: 3,
            action: Action { dx: 0.01, ..Action::ZERO },
            costs: vec![CostReport {
                candidate_id: 0,
                c_pixel: 1.5,
                c_vlm: -2.0,
                w_d: 0.5,
                c_total: 0.25,
                pixel_trace: vec![0.5, 1.0],
                vlm_trace: vec![-1.0, -1.0],
            }],
            w_d: 0.5,
            duration_ms: 12,
            degraded: false,
        }
    }

    #[test]
    fn append_contiguous_steps() {
        let mut log = EpisodeLog::new();
        log.append_step(record(0)).unwrap();
        assert_eq!(log.len(), 1);
        log.append_step(record(1)).unwrap();
        log.append_step(record(2)).unwrap();
        log.append_step(record(3)).unwrap();
        log.append_step(record(4)).unwrap();
        assert_eq!(log.len(), 5);
    }

    #[test]
    fn gap_is_rejected() {
        let mut log = EpisodeLog::new();
        for i in 0..4 {
            log.append_step(record(i)).unwrap();
        }
        let err = log.append_step(record(5)).unwrap_err();
        assert!(matches!(err, LogError::OutOfOrder { expected: 4, got: 5 }));
    }

    #[test]
    fn jsonl_round_trip_field_by_field() {
        let mut log = EpisodeLog::new();
        log.append_step(record(0)).unwrap();
        log.append_step(record(1)).unwrap();
        log.set_end(EndSignal::BudgetExhausted);
        let text = log.to_jsonl();
        let back = EpisodeLog::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn jsonl_uses_spec_keys() {
        let mut log = EpisodeLog::new();
        log.append_step(record(0)).unwrap();
        let line = log.to_jsonl();
        for key in ["\"step\"", "\"mu\"", "\"chosen\"", "\"action\"", "\"costs\"", "\"w_D\"", "\"duration_ms\""] {
            assert!(line.contains(key), "missing {key} in {line}");
        }
    }

    #[test]
    fn canonical_form_ignores_durations() {
        let mut a = EpisodeLog::new();
        let mut b = EpisodeLog::new();
        let mut ra = record(0);
        ra.duration_ms = 10;
        let mut rb = record(0);
        rb.duration_ms = 99;
        a.append_step(ra).unwrap();
        b.append_step(rb).unwrap();
        a.set_end(EndSignal::Success);
        b.set_end(EndSignal::Success);
        assert_ne!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.canonical_jsonl(), b.canonical_jsonl());
    }

    #[test]
    fn error_end_signal_round_trips() {
        let mut log = EpisodeLog::new();
        log.set_end(EndSignal::Error("obstacle contact".into()));
        let back = EpisodeLog::read_jsonl(log.to_jsonl().as_bytes()).unwrap();
        assert_eq!(back.end, Some(EndSignal::Error("obstacle contact".into())));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episode.jsonl");
        let mut log = EpisodeLog::new();
        log.append_step(record(0)).unwrap();
        log.set_end(EndSignal::Success);
        log.save(&path).unwrap();
        assert_eq!(EpisodeLog::load(&path).unwrap(), log);
    }
}
