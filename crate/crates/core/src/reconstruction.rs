//! Chronological day reconstruction.
//!
//! Episodes are entered strictly in time order: each new episode starts no
//! earlier than the previous one ended, and only the last episode may be
//! amended. Gaps are allowed and reported when the session is finalized.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{DayWindow, Timestamp};

pub const RATING_MIN: u8 = 1;
pub const RATING_MAX: u8 = 7;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub activity: String,
    #[serde(default)]
    pub notes: String,
    /// Scale name to rating in `1..=7`.
    #[serde(default)]
    pub affect: BTreeMap<String, u8>,
    pub created_at: Timestamp,
}

/// Reviewer input for a new or amended episode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeInput {
    pub start: Timestamp,
    pub end: Timestamp,
    pub activity: String,
    #[serde(default)]
    pub notes: String,
    #[serde(default)]
    pub affect: BTreeMap<String, u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Open,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ReconstructionError {
    #[error("episode starting {start} precedes previous end {previous_end}")]
    ChronologyViolation { start: Timestamp, previous_end: Timestamp },
    #[error("episode {start}..{end} is outside the day")]
    OutOfDay { start: Timestamp, end: Timestamp },
    #[error("session is finalized")]
    SessionFinalized,
    #[error("session has no episodes")]
    EmptySession,
    #[error("invalid episode: {reason}")]
    InvalidEpisode { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub start: Timestamp,
    pub end: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapSummary {
    pub count: usize,
    pub total_s: i64,
    pub gaps: Vec<Gap>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructionSession {
    pub session_id: String,
    pub window: DayWindow,
    pub state: SessionState,
    pub episodes: Vec<Episode>,
    /// Sequence number for the next episode id.
    #[serde(default)]
    pub next_seq: u64,
}

impl ReconstructionSession {
    pub fn new(session_id: impl Into<String>, window: DayWindow) -> Self {
        ReconstructionSession {
            session_id: session_id.into(),
            window,
            state: SessionState::Open,
            episodes: Vec::new(),
            next_seq: 0,
        }
    }

    pub fn is_finalized(&self) -> bool {
        self.state == SessionState::Finalized
    }

    fn ensure_open(&self) -> Result<(), ReconstructionError> {
        if self.is_finalized() {
            Err(ReconstructionError::SessionFinalized)
        } else {
            Ok(())
        }
    }

    fn check_input(&self, input: &EpisodeInput, previous_end: Option<Timestamp>) -> Result<(), ReconstructionError> {
        let invalid = |reason: String| ReconstructionError::InvalidEpisode { reason };
        if input.start >= input.end {
            return Err(invalid(format!("start {} is not before end {}", input.start, input.end)));
        }
        if input.activity.trim().is_empty() {
            return Err(invalid("activity is empty".into()));
        }
        for (scale, rating) in &input.affect {
            if scale.trim().is_empty() {
                return Err(invalid("affect scale name is empty".into()));
            }
            if !(RATING_MIN..=RATING_MAX).contains(rating) {
                return Err(invalid(format!("{scale} rating {rating} outside {RATING_MIN}..{RATING_MAX}")));
            }
        }
        if input.start < self.window.start || input.end > self.window.end {
            return Err(ReconstructionError::OutOfDay { start: input.start, end: input.end });
        }
        if let Some(previous_end) = previous_end {
            if input.start < previous_end {
                return Err(ReconstructionError::ChronologyViolation { start: input.start, previous_end });
            }
        }
        Ok(())
    }

    /// Appends an episode that starts at or after the last episode's end.
    pub fn append_episode(&mut self, input: EpisodeInput, created_at: Timestamp) -> Result<&Episode, ReconstructionError> {
        self.ensure_open()?;
        self.check_input(&input, self.episodes.last().map(|e| e.end))?;
        let episode_id = format!("ep-{:04}", self.next_seq);
        self.next_seq += 1;
        self.episodes.push(Episode {
            episode_id,
            start: input.start,
            end: input.end,
            activity: input.activity,
            notes: input.notes,
            affect: input.affect,
            created_at,
        });
        Ok(self.episodes.last().unwrap())
    }

    /// Replaces the last episode, keeping its id.
    pub fn amend_last_episode(&mut self, input: EpisodeInput, created_at: Timestamp) -> Result<&Episode, ReconstructionError> {
        self.ensure_open()?;
        let n = self.episodes.len();
        if n == 0 {
            return Err(ReconstructionError::EmptySession);
        }
        let previous_end = n.checked_sub(2).map(|i| self.episodes[i].end);
        self.check_input(&input, previous_end)?;
        let last = &mut self.episodes[n - 1];
        last.start = input.start;
        last.end = input.end;
        last.activity = input.activity;
        last.notes = input.notes;
        last.affect = input.affect;
        last.created_at = created_at;
        Ok(last)
    }

    pub fn finalize(&mut self) -> Result<GapSummary, ReconstructionError> {
        self.ensure_open()?;
        self.state = SessionState::Finalized;
        Ok(self.gap_summary())
    }

    /// Unreported stretches of the day between and around episodes.
    pub fn gap_summary(&self) -> GapSummary {
        let mut gaps = Vec::new();
        let mut cursor = self.window.start;
        for ep in &self.episodes {
            if ep.start > cursor {
                gaps.push(Gap { start: cursor, end: ep.start });
            }
            cursor = cursor.max(ep.end);
        }
        if cursor < self.window.end {
            gaps.push(Gap { start: cursor, end: self.window.end });
        }
        let total_ms: i64 = gaps.iter().map(|g| g.end.millis_since(g.start)).sum();
        GapSummary { count: gaps.len(), total_s: total_ms / 1000, gaps }
    }

    /// Verifies the stored episode list; used when loading persisted sessions.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut ids = BTreeSet::new();
        for (i, ep) in self.episodes.iter().enumerate() {
            if ep.start >= ep.end {
                return Err(format!("episode {i} has start >= end"));
            }
            if ep.start < self.window.start || ep.end > self.window.end {
                return Err(format!("episode {i} outside the day"));
            }
            if ep.activity.trim().is_empty() {
                return Err(format!("episode {i} has no activity"));
            }
            if ep.affect.values().any(|r| !(RATING_MIN..=RATING_MAX).contains(r)) {
                return Err(format!("episode {i} has a rating out of range"));
            }
            if i > 0 && self.episodes[i - 1].end > ep.start {
                return Err(format!("episode {i} overlaps or precedes episode {}", i - 1));
            }
            if !ids.insert(ep.episode_id.as_str()) {
                return Err(format!("duplicate episode id {}", ep.episode_id));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown export format {other:?}")),
        }
    }
}

pub fn affect_scales(episodes: &[Episode]) -> Vec<String> {
    let scales: BTreeSet<&String> = episodes.iter().flat_map(|e| e.affect.keys()).collect();
    scales.into_iter().cloned().collect()
}

pub fn export_episodes(session: &ReconstructionSession, format: ExportFormat) -> String {
    match format {
        ExportFormat::Csv => export_csv(&session.episodes),
        ExportFormat::Json => serde_json::to_string_pretty(&session.episodes).expect("episodes serialize") + "\n",
    }
}

/// CSV with one column per affect scale, scales in lexicographic order.
/// A scale an episode did not rate is left empty.
pub fn export_csv(episodes: &[Episode]) -> String {
    let scales = affect_scales(episodes);
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["episode_id", "start", "end", "activity", "notes"];
    header.extend(scales.iter().map(String::as_str));
    writer.write_record(&header).expect("in-memory write");
    for ep in episodes {
        let mut row = vec![ep.episode_id.clone(), ep.start.to_string(), ep.end.to_string(), ep.activity.clone(), ep.notes.clone()];
        row.extend(scales.iter().map(|s| ep.affect.get(s).map(|r| r.to_string()).unwrap_or_default()));
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8")
}

/// One exported CSV row. The CSV form carries everything but `created_at`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeRow {
    pub episode_id: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub activity: String,
    pub notes: String,
    pub affect: BTreeMap<String, u8>,
}

impl From<&Episode> for EpisodeRow {
    fn from(ep: &Episode) -> Self {
        EpisodeRow {
            episode_id: ep.episode_id.clone(),
            start: ep.start,
            end: ep.end,
            activity: ep.activity.clone(),
            notes: ep.notes.clone(),
            affect: ep.affect.clone(),
        }
    }
}

pub fn import_csv(text: &str) -> Result<Vec<EpisodeRow>, String> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    let fixed = ["episode_id", "start", "end", "activity", "notes"];
    if header.len() < fixed.len() || header.iter().take(5).ne(fixed.iter().copied()) {
        return Err("unexpected episode csv header".into());
    }
    let scales: Vec<String> = header.iter().skip(5).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let ts = |i: usize| Timestamp::parse(&rec[i]).map_err(|e| e.to_string());
        let mut affect = BTreeMap::new();
        for (k, scale) in scales.iter().enumerate() {
            let cell = &rec[5 + k];
            if !cell.is_empty() {
                affect.insert(scale.clone(), cell.parse::<u8>().map_err(|e| format!("{scale}: {e}"))?);
            }
        }
        rows.push(EpisodeRow {
            episode_id: rec[0].to_string(),
            start: ts(1)?,
            end: ts(2)?,
            activity: rec[3].to_string(),
            notes: rec[4].to_string(),
            affect,
        });
    }
    Ok(rows)
}

pub fn import_json(text: &str) -> Result<Vec<Episode>, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn window() -> DayWindow {
        DayWindow::new(NaiveDate::from_ymd_opt(2013, 5, 1).unwrap(), 0)
    }

    fn at(hm: &str) -> Timestamp {
        Timestamp::parse(&format!("2013-05-01T{hm}:00Z")).unwrap()
    }

    fn input(from: &str, to: &str, activity: &str) -> EpisodeInput {
        EpisodeInput { start: at(from), end: at(to), activity: activity.into(), notes: String::new(), affect: BTreeMap::new() }
    }

    fn now() -> Timestamp {
        at("23:00")
    }

    #[test]
    fn append_rules() {
        let mut s = ReconstructionSession::new("s1", window());
        s.append_episode(input("09:00", "10:30", "commute"), now()).unwrap();
        assert_eq!(s.episodes.len(), 1);
        assert_eq!(s.episodes[0].episode_id, "ep-0000");
        s.append_episode(input("10:30", "11:00", "coffee"), now()).unwrap();
        let err = s.append_episode(input("10:00", "12:00", "meeting"), now()).unwrap_err();
        assert_eq!(err, ReconstructionError::ChronologyViolation { start: at("10:00"), previous_end: at("11:00") });
        assert_eq!(s.episodes.len(), 2);
    }

    #[test]
    fn append_validation() {
        let mut s = ReconstructionSession::new("s1", window());
        assert!(matches!(s.append_episode(input("10:00", "10:00", "x"), now()), Err(ReconstructionError::InvalidEpisode { .. })));
        assert!(matches!(s.append_episode(input("10:00", "11:00", "  "), now()), Err(ReconstructionError::InvalidEpisode { .. })));
        let mut bad = input("10:00", "11:00", "x");
        bad.affect.insert("valence".into(), 8);
        assert!(matches!(s.append_episode(bad, now()), Err(ReconstructionError::InvalidEpisode { .. })));
        let mut late = input("23:00", "23:30", "x");
        late.end = window().end.plus_secs(60);
        assert!(matches!(s.append_episode(late, now()), Err(ReconstructionError::OutOfDay { .. })));
        assert!(s.episodes.is_empty());
    }

    #[test]
    fn amend_rules() {
        let mut s = ReconstructionSession::new("s1", window());
        assert_eq!(s.amend_last_episode(input("09:00", "10:00", "x"), now()).unwrap_err(), ReconstructionError::EmptySession);
        s.append_episode(input("09:00", "10:00", "work"), now()).unwrap();
        s.append_episode(input("10:00", "11:00", "lunch"), now()).unwrap();
        s.amend_last_episode(input("10:00", "11:15", "lunch"), now()).unwrap();
        assert_eq!(s.episodes[1].end, at("11:15"));
        assert_eq!(s.episodes[1].episode_id, "ep-0001");
        let err = s.amend_last_episode(input("09:30", "11:15", "lunch"), now()).unwrap_err();
        assert!(matches!(err, ReconstructionError::ChronologyViolation { .. }));
        assert_eq!(s.episodes[1].start, at("10:00"));
    }

    #[test]
    fn finalize_reports_gaps() {
        let mut s = ReconstructionSession::new("s1", window());
        s.append_episode(input("09:00", "10:00", "a"), now()).unwrap();
        s.append_episode(input("11:00", "12:00", "b"), now()).unwrap();
        let summary = s.finalize().unwrap();
        assert_eq!(summary.count, 3);
        assert_eq!(summary.total_s, 79_200);
        assert_eq!(s.append_episode(input("13:00", "14:00", "c"), now()).unwrap_err(), ReconstructionError::SessionFinalized);
        assert_eq!(s.amend_last_episode(input("11:00", "12:00", "c"), now()).unwrap_err(), ReconstructionError::SessionFinalized);
        assert_eq!(s.finalize().unwrap_err(), ReconstructionError::SessionFinalized);
    }

    #[test]
    fn empty_session_finalizes_to_one_gap() {
        let mut s = ReconstructionSession::new("s1", window());
        let summary = s.finalize().unwrap();
        assert_eq!(summary.count, 1);
        assert_eq!(summary.total_s, 86_400);
    }

    #[test]
    fn csv_export() {
        let s = ReconstructionSession::new("s1", window());
        assert_eq!(export_episodes(&s, ExportFormat::Csv), "episode_id,start,end,activity,notes\n");

        let mut s = ReconstructionSession::new("s1", window());
        let mut ep = input("09:00", "10:00", "walk, then bus");
        ep.affect.insert("valence".into(), 6);
        ep.affect.insert("arousal".into(), 5);
        s.append_episode(ep, now()).unwrap();
        let csv = export_episodes(&s, ExportFormat::Csv);
        assert_eq!(
            csv,
            "episode_id,start,end,activity,notes,arousal,valence\nep-0000,2013-05-01T09:00:00Z,2013-05-01T10:00:00Z,\"walk, then bus\",,5,6\n"
        );
    }

    #[test]
    fn exports_round_trip() {
        let mut s = ReconstructionSession::new("s1", window());
        let mut a = input("09:00", "10:00", "breakfast");
        a.notes = "with \"quotes\"\nand a newline".into();
        a.affect.insert("tired".into(), 2);
        s.append_episode(a, now()).unwrap();
        let mut b = input("10:00", "12:00", "work");
        b.affect.insert("happy".into(), 4);
        s.append_episode(b, now()).unwrap();

        let rows = import_csv(&export_episodes(&s, ExportFormat::Csv)).unwrap();
        assert_eq!(rows, s.episodes.iter().map(EpisodeRow::from).collect::<Vec<_>>());
        let back = import_json(&export_episodes(&s, ExportFormat::Json)).unwrap();
        assert_eq!(back, s.episodes);
    }
}
