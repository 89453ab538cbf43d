//! Channel parsers and day assembly.
//!
//! Every CSV format has a mandatory lowercase header. Line numbers in errors
//! are 1-based and count the header as line 1.

use std::collections::HashSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{
    coords_valid, validate_day, Channel, ContextChannel, ContextEvent, CoverageInterval, DayLog, DayWindow,
    Direction, GpsFix, ImageSample, Timestamp,
};

pub const GPS_HEADER: &str = "timestamp,lat,lon";
pub const CONTEXT_HEADER: &str = "timestamp,channel,direction,duration_s";
pub const IMAGE_HEADER: &str = "timestamp,path";
pub const COVERAGE_HEADER: &str = "channel,start,end";

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum IngestError {
    #[error("missing header, expected `{expected}`")]
    MissingHeader { expected: &'static str },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("conflicting fixes at {t}")]
    ConflictingFix { t: Timestamp },
    #[error("line {line}: invalid duration {value}")]
    InvalidDuration { line: u64, value: String },
    #[error("duplicate image path {path:?}")]
    DuplicatePath { path: String },
    #[error("line {line}: empty interval")]
    EmptyInterval { line: u64 },
    #[error("malformed document: {reason}")]
    MalformedDocument { reason: String },
    #[error("every channel is empty")]
    EmptyDay,
}

pub type Result<T> = std::result::Result<T, IngestError>;

fn malformed(line: u64, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedRow { line, reason: reason.into() }
}

/// Reads a headed CSV document into `(line_no, fields)` rows.
fn read_rows(text: &str, header: &'static str) -> Result<Vec<(u64, Vec<String>)>> {
    let columns = header.split(',').count();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let first = match records.next() {
        Some(Ok(rec)) => rec,
        Some(Err(_)) | None => return Err(IngestError::MissingHeader { expected: header }),
    };
    let found: Vec<&str> = first.iter().collect();
    let found = found.join(",");
    if found.trim_start_matches('\u{feff}') != header {
        return Err(IngestError::MissingHeader { expected: header });
    }

    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != columns {
            return Err(malformed(line, format!("expected {columns} columns, found {}", rec.len())));
        }
        rows.push((line, rec.iter().map(|f| f.to_string()).collect()));
    }
    Ok(rows)
}

fn parse_ts(line: u64, s: &str) -> Result<Timestamp> {
    Timestamp::parse(s).map_err(|e| malformed(line, e.to_string()))
}

fn parse_coord(line: u64, s: &str, name: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| malformed(line, format!("unparseable {name} {s:?}")))
}

/// Sorts fixes, collapses exact duplicates and rejects same-time conflicts.
fn normalize_fixes(mut fixes: Vec<GpsFix>) -> Result<Vec<GpsFix>> {
    fixes.sort_by_key(|f| f.t);
    let mut out: Vec<GpsFix> = Vec::with_capacity(fixes.len());
    for fix in fixes {
        if let Some(last) = out.last() {
            if last.t == fix.t {
                if last.lat == fix.lat && last.lon == fix.lon {
                    continue;
                }
                return Err(IngestError::ConflictingFix { t: fix.t });
            }
        }
        out.push(fix);
    }
    Ok(out)
}

pub fn parse_gps_csv(text: &str) -> Result<Vec<GpsFix>> {
    let mut fixes = Vec::new();
    for (line, row) in read_rows(text, GPS_HEADER)? {
        let t = parse_ts(line, &row[0])?;
        let lat = parse_coord(line, &row[1], "lat")?;
        let lon = parse_coord(line, &row[2], "lon")?;
        if !coords_valid(lat, lon) {
            return Err(malformed(line, format!("coordinate out of bounds ({lat}, {lon})")));
        }
        fixes.push(GpsFix::new(t, lat, lon));
    }
    normalize_fixes(fixes)
}

pub fn write_gps_csv(fixes: &[GpsFix]) -> String {
    let mut out = format!("{GPS_HEADER}\n");
    for f in fixes {
        out.push_str(&format!("{},{},{}\n", f.t, f.lat, f.lon));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GpxTrack {
    pub fixes: Vec<GpsFix>,
    pub warnings: Vec<String>,
}

/// Reads every `trkpt` of a GPX document; points without `time` are skipped
/// with a warning.
pub fn parse_gpx(text: &str) -> Result<GpxTrack> {
    let doc = roxmltree::Document::parse(text)
        .map_err(|e| IngestError::MalformedDocument { reason: e.to_string() })?;
    let bad = |reason: String| IngestError::MalformedDocument { reason };

    let mut track = GpxTrack::default();
    for (n, pt) in doc.descendants().filter(|n| n.has_tag_name("trkpt")).enumerate() {
        let pos = doc.text_pos_at(pt.range().start);
        let lat = pt.attribute("lat").and_then(|v| v.trim().parse::<f64>().ok());
        let lon = pt.attribute("lon").and_then(|v| v.trim().parse::<f64>().ok());
        let (lat, lon) = match (lat, lon) {
            (Some(lat), Some(lon)) if coords_valid(lat, lon) => (lat, lon),
            _ => return Err(bad(format!("trkpt {n} at {pos}: missing or invalid lat/lon"))),
        };
        let time = pt.children().find(|c| c.has_tag_name("time")).and_then(|c| c.text());
        let Some(time) = time else {
            track.warnings.push(format!("trkpt {n} at {pos} has no time; skipped"));
            continue;
        };
        let t = Timestamp::parse(time).map_err(|e| bad(format!("trkpt {n} at {pos}: {e}")))?;
        track.fixes.push(GpsFix::new(t, lat, lon));
    }
    track.fixes = normalize_fixes(track.fixes)?;
    Ok(track)
}

pub fn parse_context_csv(text: &str) -> Result<Vec<ContextEvent>> {
    let mut events = Vec::new();
    for (line, row) in read_rows(text, CONTEXT_HEADER)? {
        let t = parse_ts(line, &row[0])?;
        let channel = match row[1].as_str() {
            "call" => ContextChannel::Call,
            "sms" => ContextChannel::Sms,
            other => return Err(malformed(line, format!("unknown channel {other:?}"))),
        };
        let direction = match row[2].as_str() {
            "in" => Direction::Incoming,
            "out" => Direction::Outgoing,
            other => return Err(malformed(line, format!("unknown direction {other:?}"))),
        };
        let raw = row[3].trim();
        let duration: i64 = raw
            .parse()
            .map_err(|_| malformed(line, format!("unparseable duration {raw:?}")))?;
        let invalid = || IngestError::InvalidDuration { line, value: raw.to_string() };
        if duration < 0 || (channel == ContextChannel::Sms && duration != 0) {
            return Err(invalid());
        }
        let duration_s = u32::try_from(duration).map_err(|_| invalid())?;
        events.push(ContextEvent { t, channel, direction, duration_s });
    }
    events.sort_by_key(|e| e.t);
    Ok(events)
}

pub fn write_context_csv(events: &[ContextEvent]) -> String {
    let mut out = format!("{CONTEXT_HEADER}\n");
    for e in events {
        let channel = match e.channel {
            ContextChannel::Call => "call",
            ContextChannel::Sms => "sms",
        };
        let direction = match e.direction {
            Direction::Incoming => "in",
            Direction::Outgoing => "out",
        };
        out.push_str(&format!("{},{channel},{direction},{}\n", e.t, e.duration_s));
    }
    out
}

pub fn media_id(date: NaiveDate, index: usize) -> String {
    format!("{}#{index:06}", date.format("%Y-%m-%d"))
}

/// Parses an image manifest; ids follow sorted position within `date`.
pub fn parse_image_manifest(text: &str, date: NaiveDate) -> Result<Vec<ImageSample>> {
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (line, row) in read_rows(text, IMAGE_HEADER)? {
        let t = parse_ts(line, &row[0])?;
        let path = row[1].trim().to_string();
        if path.is_empty() {
            return Err(malformed(line, "empty path"));
        }
        if !seen.insert(path.clone()) {
            return Err(IngestError::DuplicatePath { path });
        }
        rows.push((t, path));
    }
    rows.sort_by_key(|(t, _)| *t);
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, (t, path))| ImageSample { t, media_id: media_id(date, i), path })
        .collect())
}

pub fn write_image_manifest(images: &[ImageSample]) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(["timestamp", "path"]).unwrap();
    for img in images {
        writer.write_record([img.t.to_string(), img.path.clone()]).unwrap();
    }
    String::from_utf8(writer.into_inner().unwrap()).unwrap()
}

/// Merges overlapping or touching intervals of the same channel.
pub fn merge_coverage(mut intervals: Vec<CoverageInterval>) -> Vec<CoverageInterval> {
    intervals.sort_by_key(|c| (c.channel, c.start, c.end));
    let mut out: Vec<CoverageInterval> = Vec::with_capacity(intervals.len());
    for c in intervals {
        match out.last_mut() {
            Some(last) if last.channel == c.channel && c.start <= last.end => {
                last.end = last.end.max(c.end);
            }
            _ => out.push(c),
        }
    }
    out
}

pub fn parse_coverage_csv(text: &str) -> Result<Vec<CoverageInterval>> {
    let mut intervals = Vec::new();
    for (line, row) in read_rows(text, COVERAGE_HEADER)? {
        let channel: Channel = row[0]
            .parse()
            .map_err(|_| malformed(line, format!("unknown channel {:?}", row[0])))?;
        let start = parse_ts(line, &row[1])?;
        let end = parse_ts(line, &row[2])?;
        if start >= end {
            return Err(IngestError::EmptyInterval { line });
        }
        intervals.push(CoverageInterval { channel, start, end });
    }
    Ok(merge_coverage(intervals))
}

pub fn write_coverage_csv(coverage: &[CoverageInterval]) -> String {
    let mut out = format!("{COVERAGE_HEADER}\n");
    for c in coverage {
        out.push_str(&format!("{},{},{}\n", c.channel, c.start, c.end));
    }
    out
}

/// Day identity plus the optional channel file paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestManifest {
    pub date: NaiveDate,
    #[serde(default)]
    pub tz_offset_minutes: i32,
    #[serde(default, rename = "gps", skip_serializing_if = "Option::is_none")]
    pub gps_path: Option<String>,
    #[serde(default, rename = "context", skip_serializing_if = "Option::is_none")]
    pub context_path: Option<String>,
    #[serde(default, rename = "images", skip_serializing_if = "Option::is_none")]
    pub images_path: Option<String>,
    #[serde(default, rename = "coverage", skip_serializing_if = "Option::is_none")]
    pub coverage_path: Option<String>,
}

impl IngestManifest {
    pub fn window(&self) -> DayWindow {
        DayWindow::new(self.date, self.tz_offset_minutes)
    }

    pub fn has_channel(&self) -> bool {
        self.gps_path.is_some() || self.context_path.is_some() || self.images_path.is_some()
    }
}

/// Parsed channel contents awaiting assembly. `coverage: None` selects the
/// first-to-last default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedChannels {
    pub fixes: Vec<GpsFix>,
    pub images: Vec<ImageSample>,
    pub events: Vec<ContextEvent>,
    pub coverage: Option<Vec<CoverageInterval>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledDay {
    pub day: DayLog,
    pub warnings: Vec<String>,
}

fn default_coverage(channel: Channel, spans: &[(Timestamp, Timestamp)], window: &DayWindow) -> Option<CoverageInterval> {
    let start = spans.iter().map(|s| s.0).min()?;
    let mut end = spans.iter().map(|s| s.1).max()?.min(window.end);
    if end <= start {
        end = start.plus_secs(1).min(window.end);
    }
    Some(CoverageInterval { channel, start, end })
}

/// Builds the validated `DayLog` for `window` from parsed channels.
///
/// Out-of-window samples are dropped with one warning each. Supplied
/// coverage is clipped to the window; without it each channel is covered from
/// its first to its last sample (call spans included).
pub fn assemble_day(window: DayWindow, channels: ParsedChannels) -> Result<AssembledDay> {
    if channels.fixes.is_empty() && channels.images.is_empty() && channels.events.is_empty() {
        return Err(IngestError::EmptyDay);
    }
    let mut warnings = Vec::new();
    let mut drop_note = |what: &str, t: Timestamp| warnings.push(format!("{what} at {t} outside day window; dropped"));

    let fixes: Vec<GpsFix> = channels
        .fixes
        .into_iter()
        .filter(|f| window.contains(f.t) || { drop_note("gps fix", f.t); false })
        .collect();
    let images: Vec<ImageSample> = channels
        .images
        .into_iter()
        .filter(|i| window.contains(i.t) || { drop_note("image", i.t); false })
        .collect();
    let events: Vec<ContextEvent> = channels
        .events
        .into_iter()
        .filter(|e| window.contains(e.t) || { drop_note("context event", e.t); false })
        .collect();

    let coverage = match channels.coverage {
        Some(list) => {
            let mut clipped = Vec::new();
            for c in list {
                let start = c.start.max(window.start);
                let end = c.end.min(window.end);
                if start < end {
                    clipped.push(CoverageInterval { start, end, ..c });
                } else {
                    warnings.push(format!("{} coverage {}..{} outside day window; dropped", c.channel, c.start, c.end));
                }
            }
            merge_coverage(clipped)
        }
        None => {
            let instant = |t: Timestamp| (t, t);
            let visual: Vec<_> = images.iter().map(|i| instant(i.t)).collect();
            let location: Vec<_> = fixes.iter().map(|f| instant(f.t)).collect();
            let calls: Vec<_> = events.iter().filter(|e| e.is_call()).map(|e| (e.t, e.end())).collect();
            let sms: Vec<_> = events.iter().filter(|e| !e.is_call()).map(|e| instant(e.t)).collect();
            [
                default_coverage(Channel::Visual, &visual, &window),
                default_coverage(Channel::Location, &location, &window),
                default_coverage(Channel::Call, &calls, &window),
                default_coverage(Channel::Sms, &sms, &window),
            ]
            .into_iter()
            .flatten()
            .collect()
        }
    };

    let day = DayLog { window, fixes, images, events, coverage };
    debug_assert!(validate_day(&day).is_empty(), "{:?}", validate_day(&day));
    Ok(AssembledDay { day, warnings })
}
