//! On-disk layout:
//!
//! ```text
//! <root>/days/<date>/daylog.json
//!                    timeline.json
//!                    analysis.json
//!                    summary.json
//!                    sessions/<session_id>.json
//!                    media/<index>.<ext>
//! ```
//!
//! Single documents are replaced atomically (temp file, fsync, rename). A day
//! is ingested into a staging directory that is swapped in with renames, so a
//! crash leaves either the old day or the new one.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use footprint_core::model::DayLog;
use footprint_core::pipeline::{DayArtifacts, DaySummary};
use footprint_core::reconstruction::ReconstructionSession;

const TMP_MARK: &str = ".tmp-";
const STAGING_PREFIX: &str = ".staging-";
const RETIRED_PREFIX: &str = ".retired-";

static NONCE: AtomicU64 = AtomicU64::new(0);

fn nonce() -> String {
    format!("{}-{}", std::process::id(), NONCE.fetch_add(1, Ordering::Relaxed))
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

/// Replaces `path` with `bytes` so readers see either the old or new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().ok_or_else(|| io::Error::other("path has no parent"))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("doc");
    let tmp = dir.join(format!("{name}{TMP_MARK}{}", nonce()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    sync_dir(dir)
}

/// Ingestion counts and warnings persisted alongside the day.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub date: NaiveDate,
    #[serde(flatten)]
    pub counts: DaySummary,
    pub warnings: Vec<String>,
}

/// A media file to persist with a day, keyed by the image manifest path.
#[derive(Clone, Debug)]
pub struct MediaFile {
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("day {0} already ingested")]
    AlreadyIngested(NaiveDate),
    #[error("unknown day {0}")]
    UnknownDay(NaiveDate),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("corrupt document {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

fn media_file_name(media_id: &str, path: &str) -> Option<String> {
    let index = media_id.rsplit_once('#')?.1;
    if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let ext = Path::new(path)
        .extension()
        .and_then(|e| e.to_str())
        .filter(|e| e.bytes().all(|b| b.is_ascii_alphanumeric()))
        .map(|e| e.to_ascii_lowercase());
    Some(match ext {
        Some(ext) => format!("{index}.{ext}"),
        None => index.to_string(),
    })
}

pub fn content_type_for(file_name: &str) -> &'static str {
    match Path::new(file_name).extension().and_then(|e| e.to_str()) {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("bmp") => "image/bmp",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

/// Session ids are generated as `s<N>`; anything else is never a file name.
pub fn valid_session_id(id: &str) -> bool {
    id.len() > 1 && id.starts_with('s') && id[1..].bytes().all(|b| b.is_ascii_digit())
}

impl Store {
    /// Opens (creating if needed) a store and finishes or rolls back any
    /// interrupted writes.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("days"))?;
        let store = Store { root };
        store.recover()?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn days_dir(&self) -> PathBuf {
        self.root.join("days")
    }

    pub fn day_dir(&self, date: NaiveDate) -> PathBuf {
        self.days_dir().join(date.to_string())
    }

    fn recover(&self) -> Result<(), StoreError> {
        let days = self.days_dir();
        for entry in fs::read_dir(&days)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().to_string();
            if name.starts_with(STAGING_PREFIX) {
                fs::remove_dir_all(entry.path())?;
            } else if let Some(rest) = name.strip_prefix(RETIRED_PREFIX) {
                // a swap was interrupted after retiring the old day
                let date = rest.split('.').next().unwrap_or_default();
                let live = days.join(date);
                if live.exists() {
                    fs::remove_dir_all(entry.path())?;
                } else {
                    fs::rename(entry.path(), &live)?;
                }
            }
        }
        for entry in fs::read_dir(&days)? {
            let dir = entry?.path();
            if dir.is_dir() {
                remove_tmp_files(&dir)?;
                remove_tmp_files(&dir.join("sessions"))?;
            }
        }
        sync_dir(&days)?;
        Ok(())
    }

    pub fn has_day(&self, date: NaiveDate) -> bool {
        self.day_dir(date).join("daylog.json").is_file()
    }

    pub fn list_days(&self) -> Result<Vec<NaiveDate>, StoreError> {
        let mut days = Vec::new();
        for entry in fs::read_dir(self.days_dir())? {
            let name = entry?.file_name().to_string_lossy().to_string();
            if let Ok(date) = name.parse::<NaiveDate>() {
                if self.has_day(date) {
                    days.push(date);
                }
            }
        }
        days.sort();
        Ok(days)
    }

    /// Persists a freshly compiled day. Existing sessions of the day are
    /// carried over when `force` replaces a previous ingest.
    pub fn write_day(&self, artifacts: &DayArtifacts, media: &[MediaFile], force: bool) -> Result<IngestSummary, StoreError> {
        let date = artifacts.day.window.date;
        let live = self.day_dir(date);
        if live.exists() && !force {
            return Err(StoreError::AlreadyIngested(date));
        }
        let summary = IngestSummary { date, counts: artifacts.summary.clone(), warnings: artifacts.warnings.clone() };

        let staging = self.days_dir().join(format!("{STAGING_PREFIX}{date}.{}", nonce()));
        fs::create_dir_all(staging.join("sessions"))?;
        fs::create_dir_all(staging.join("media"))?;
        write_atomic(&staging.join("daylog.json"), artifacts.day.to_json().as_bytes())?;
        write_atomic(&staging.join("timeline.json"), artifacts.timeline.to_json().as_bytes())?;
        write_atomic(&staging.join("analysis.json"), artifacts.analysis_json().as_bytes())?;
        write_atomic(&staging.join("summary.json"), to_json(&summary).as_bytes())?;
        for img in &artifacts.day.images {
            let Some(file) = media.iter().find(|m| m.path == img.path) else { continue };
            if let Some(name) = media_file_name(&img.media_id, &img.path) {
                write_atomic(&staging.join("media").join(name), &file.bytes)?;
            }
        }
        if live.exists() {
            for entry in fs::read_dir(live.join("sessions"))? {
                let entry = entry?;
                let name = entry.file_name().to_string_lossy().to_string();
                if !name.contains(TMP_MARK) {
                    let bytes = fs::read(entry.path())?;
                    write_atomic(&staging.join("sessions").join(name), &bytes)?;
                }
            }
        }
        sync_dir(&staging)?;

        if live.exists() {
            let retired = self.days_dir().join(format!("{RETIRED_PREFIX}{date}.{}", nonce()));
            fs::rename(&live, &retired)?;
            fs::rename(&staging, &live)?;
            sync_dir(&self.days_dir())?;
            fs::remove_dir_all(&retired)?;
        } else {
            fs::rename(&staging, &live)?;
        }
        sync_dir(&self.days_dir())?;
        Ok(summary)
    }

    fn read_text(&self, date: NaiveDate, name: &str) -> Result<String, StoreError> {
        if !self.has_day(date) {
            return Err(StoreError::UnknownDay(date));
        }
        Ok(fs::read_to_string(self.day_dir(date).join(name))?)
    }

    pub fn timeline_text(&self, date: NaiveDate) -> Result<String, StoreError> {
        self.read_text(date, "timeline.json")
    }

    pub fn analysis_text(&self, date: NaiveDate) -> Result<String, StoreError> {
        self.read_text(date, "analysis.json")
    }

    pub fn read_doc<T: for<'de> Deserialize<'de>>(&self, date: NaiveDate, name: &str) -> Result<T, StoreError> {
        let text = self.read_text(date, name)?;
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt { path: self.day_dir(date).join(name), reason: e.to_string() })
    }

    pub fn daylog(&self, date: NaiveDate) -> Result<DayLog, StoreError> {
        self.read_doc(date, "daylog.json")
    }

    pub fn summary(&self, date: NaiveDate) -> Result<IngestSummary, StoreError> {
        self.read_doc(date, "summary.json")
    }

    /// Resolves a media id to its stored file. Ids are looked up in the day
    /// log, never interpreted as paths.
    pub fn media_file(&self, date: NaiveDate, media_id: &str) -> Result<Option<PathBuf>, StoreError> {
        let day = self.daylog(date)?;
        let Some(img) = day.images.iter().find(|i| i.media_id == media_id) else {
            return Ok(None);
        };
        let Some(name) = media_file_name(&img.media_id, &img.path) else {
            return Ok(None);
        };
        let path = self.day_dir(date).join("media").join(name);
        Ok(path.is_file().then_some(path))
    }

    fn session_path(&self, date: NaiveDate, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_session_id(id) {
            return Err(StoreError::UnknownSession(id.to_string()));
        }
        Ok(self.day_dir(date).join("sessions").join(format!("{id}.json")))
    }

    pub fn session_ids(&self, date: NaiveDate) -> Result<Vec<String>, StoreError> {
        if !self.has_day(date) {
            return Err(StoreError::UnknownDay(date));
        }
        let mut ids: Vec<(u64, String)> = Vec::new();
        for entry in fs::read_dir(self.day_dir(date).join("sessions"))? {
            let name = entry?.file_name().to_string_lossy().to_string();
            if let Some(id) = name.strip_suffix(".json") {
                if valid_session_id(id) {
                    ids.push((id[1..].parse().unwrap_or(u64::MAX), id.to_string()));
                }
            }
        }
        ids.sort();
        Ok(ids.into_iter().map(|(_, id)| id).collect())
    }

    /// Next free session id for the day; callers hold the day's write lock.
    pub fn next_session_id(&self, date: NaiveDate) -> Result<String, StoreError> {
        let last = self.session_ids(date)?.iter().filter_map(|id| id[1..].parse::<u64>().ok()).max();
        Ok(format!("s{}", last.map_or(1, |n| n + 1)))
    }

    pub fn load_session(&self, date: NaiveDate, id: &str) -> Result<ReconstructionSession, StoreError> {
        if !self.has_day(date) {
            return Err(StoreError::UnknownDay(date));
        }
        let path = self.session_path(date, id)?;
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::UnknownSession(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let session: ReconstructionSession =
            serde_json::from_str(&text).map_err(|e| StoreError::Corrupt { path: path.clone(), reason: e.to_string() })?;
        session.check_invariants().map_err(|reason| StoreError::Corrupt { path, reason })?;
        Ok(session)
    }

    pub fn save_session(&self, date: NaiveDate, session: &ReconstructionSession) -> Result<(), StoreError> {
        if !self.has_day(date) {
            return Err(StoreError::UnknownDay(date));
        }
        let path = self.session_path(date, &session.session_id)?;
        write_atomic(&path, to_json(session).as_bytes())?;
        Ok(())
    }
}

fn remove_tmp_files(dir: &Path) -> io::Result<()> {
    let entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e),
    };
    for entry in entries {
        let entry = entry?;
        if entry.file_name().to_string_lossy().contains(TMP_MARK) {
            fs::remove_file(entry.path())?;
        }
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn media_names_come_from_ids() {
        assert_eq!(media_file_name("2013-05-01#000042", "cam/IMG_1.JPG").as_deref(), Some("000042.jpg"));
        assert_eq!(media_file_name("2013-05-01#000042", "noext").as_deref(), Some("000042"));
        assert_eq!(media_file_name("../../etc/passwd", "x.jpg"), None);
        assert_eq!(media_file_name("2013-05-01#../x", "x.jpg"), None);
        assert_eq!(content_type_for("000001.jpg"), "image/jpeg");
    }

    #[test]
    fn session_ids_are_checked() {
        assert!(valid_session_id("s12"));
        assert!(!valid_session_id("s"));
        assert!(!valid_session_id("../s1"));
        assert!(!valid_session_id("s1.json"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn recovery_restores_retired_day_and_drops_debris() {
        let dir = tempfile::tempdir().unwrap();
        let days = dir.path().join("days");
        fs::create_dir_all(days.join(".retired-2013-05-01.1-0/sessions")).unwrap();
        fs::write(days.join(".retired-2013-05-01.1-0/daylog.json"), "{}").unwrap();
        fs::create_dir_all(days.join(".staging-2013-05-01.1-1")).unwrap();
        fs::create_dir_all(days.join("2013-05-02/sessions")).unwrap();
        fs::write(days.join("2013-05-02/sessions/s1.json.tmp-1-3"), "partial").unwrap();

        Store::open(dir.path()).unwrap();
        assert!(days.join("2013-05-01/daylog.json").is_file());
        assert!(!days.join(".staging-2013-05-01.1-1").exists());
        assert_eq!(fs::read_dir(days.join("2013-05-02/sessions")).unwrap().count(), 0);
    }
}
