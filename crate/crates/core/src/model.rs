//! Shared domain types for one reviewed day and the cross-channel validator.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An instant in UTC with millisecond resolution.
///
/// Finer input precision is truncated, never rounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn from_secs(s: i64) -> Self {
        Timestamp(s * 1000)
    }

    pub const fn as_millis(self) -> i64 {
        self.0
    }

    pub fn parse(s: &str) -> Result<Self, TimestampError> {
        let dt = DateTime::parse_from_rfc3339(s.trim()).map_err(|_| TimestampError(s.to_string()))?;
        Ok(Timestamp(dt.timestamp_millis()))
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp_millis(self.0).expect("timestamp within chrono range")
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Timestamp(self.0 + ms)
    }

    pub fn plus_secs(self, s: i64) -> Self {
        Timestamp(self.0 + s * 1000)
    }

    /// Signed distance `self - earlier` in milliseconds.
    pub fn millis_since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid ISO-8601 timestamp {0:?}")]
pub struct TimestampError(pub String);

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let format = if self.0.rem_euclid(1000) == 0 {
            SecondsFormat::Secs
        } else {
            SecondsFormat::Millis
        };
        f.write_str(&self.to_datetime().to_rfc3339_opts(format, true))
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// The 24 hours from local midnight of `date` to the next local midnight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayWindow {
    pub date: NaiveDate,
    pub tz_offset_minutes: i32,
    pub start: Timestamp,
    pub end: Timestamp,
}

pub const DAY_MILLIS: i64 = 24 * 60 * 60 * 1000;

impl DayWindow {
    pub fn new(date: NaiveDate, tz_offset_minutes: i32) -> Self {
        let local_midnight = date.and_hms_opt(0, 0, 0).unwrap().and_utc();
        let start = local_midnight - Duration::minutes(tz_offset_minutes as i64);
        let start = Timestamp(start.timestamp_millis());
        DayWindow {
            date,
            tz_offset_minutes,
            start,
            end: start.plus_millis(DAY_MILLIS),
        }
    }

    /// Half-open membership test.
    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    pub fn duration_ms(&self) -> i64 {
        self.end.millis_since(self.start)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub t: Timestamp,
    pub lat: f64,
    pub lon: f64,
}

impl GpsFix {
    pub fn new(t: Timestamp, lat: f64, lon: f64) -> Self {
        GpsFix { t, lat, lon }
    }

    pub fn coords_valid(&self) -> bool {
        coords_valid(self.lat, self.lon)
    }
}

pub fn coords_valid(lat: f64, lon: f64) -> bool {
    lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSample {
    pub t: Timestamp,
    pub media_id: String,
    pub path: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextChannel {
    Call,
    Sms,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Incoming,
    Outgoing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEvent {
    pub t: Timestamp,
    pub channel: ContextChannel,
    pub direction: Direction,
    pub duration_s: u32,
}

impl ContextEvent {
    pub fn call(t: Timestamp, direction: Direction, duration_s: u32) -> Self {
        ContextEvent { t, channel: ContextChannel::Call, direction, duration_s }
    }

    pub fn sms(t: Timestamp, direction: Direction) -> Self {
        ContextEvent { t, channel: ContextChannel::Sms, direction, duration_s: 0 }
    }

    pub fn is_call(&self) -> bool {
        self.channel == ContextChannel::Call
    }

    /// End of the event's span; equal to `t` for SMS.
    pub fn end(&self) -> Timestamp {
        self.t.plus_secs(self.duration_s as i64)
    }
}

/// The four recorded channels, one per timeline bar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Visual,
    Location,
    Call,
    Sms,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Visual, Channel::Location, Channel::Call, Channel::Sms];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Visual => "visual",
            Channel::Location => "location",
            Channel::Call => "call",
            Channel::Sms => "sms",
        }
    }
}

impl FromStr for Channel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "visual" => Ok(Channel::Visual),
            "location" => Ok(Channel::Location),
            "call" => Ok(Channel::Call),
            "sms" => Ok(Channel::Sms),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A span during which a channel's recording device was known to be active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageInterval {
    pub channel: Channel,
    pub start: Timestamp,
    pub end: Timestamp,
}

/// Everything recorded for one day, all lists time-ordered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayLog {
    pub window: DayWindow,
    pub fixes: Vec<GpsFix>,
    pub images: Vec<ImageSample>,
    pub events: Vec<ContextEvent>,
    pub coverage: Vec<CoverageInterval>,
}

impl DayLog {
    pub fn empty(window: DayWindow) -> Self {
        DayLog { window, fixes: Vec::new(), images: Vec::new(), events: Vec::new(), coverage: Vec::new() }
    }

    pub fn coverage_for(&self, channel: Channel) -> Vec<CoverageInterval> {
        self.coverage.iter().filter(|c| c.channel == channel).copied().collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("day log serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    WindowLength,
    WindowStart,
    CoordinateBounds,
    Unsorted,
    DuplicateTimestamp,
    OutOfWindow,
    DuplicateMediaId,
    EmptyPath,
    SmsDuration,
    EmptyInterval,
    OverlappingCoverage,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Dotted path to the offending field, e.g. `fixes[3].lat`.
    pub field: String,
    pub rule: Rule,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    fn push(&mut self, field: impl Into<String>, rule: Rule) {
        self.violations.push(Violation { field: field.into(), rule });
    }
}

/// Checks every `DayLog` invariant and reports all violations found.
///
/// Fix timestamps must be strictly increasing. Images and events may share a
/// timestamp with their predecessor (burst shots, two texts in one second).
pub fn validate_day(day: &DayLog) -> ValidationReport {
    let mut report = ValidationReport::default();
    let w = &day.window;

    if w.duration_ms() != DAY_MILLIS {
        report.push("window.end", Rule::WindowLength);
    }
    if DayWindow::new(w.date, w.tz_offset_minutes).start != w.start {
        report.push("window.start", Rule::WindowStart);
    }

    for (i, fix) in day.fixes.iter().enumerate() {
        if !(fix.lat.is_finite() && (-90.0..=90.0).contains(&fix.lat)) {
            report.push(format!("fixes[{i}].lat"), Rule::CoordinateBounds);
        }
        if !(fix.lon.is_finite() && (-180.0..=180.0).contains(&fix.lon)) {
            report.push(format!("fixes[{i}].lon"), Rule::CoordinateBounds);
        }
        if !w.contains(fix.t) {
            report.push(format!("fixes[{i}].t"), Rule::OutOfWindow);
        }
        if i > 0 {
            let prev = day.fixes[i - 1].t;
            if fix.t < prev {
                report.push(format!("fixes[{i}].t"), Rule::Unsorted);
            } else if fix.t == prev {
                report.push(format!("fixes[{i}].t"), Rule::DuplicateTimestamp);
            }
        }
    }

    let mut seen_ids = std::collections::HashSet::new();
    for (i, img) in day.images.iter().enumerate() {
        if !w.contains(img.t) {
            report.push(format!("images[{i}].t"), Rule::OutOfWindow);
        }
        if i > 0 && img.t < day.images[i - 1].t {
            report.push(format!("images[{i}].t"), Rule::Unsorted);
        }
        if !seen_ids.insert(img.media_id.as_str()) {
            report.push(format!("images[{i}].media_id"), Rule::DuplicateMediaId);
        }
        if img.path.is_empty() {
            report.push(format!("images[{i}].path"), Rule::EmptyPath);
        }
    }

    for (i, ev) in day.events.iter().enumerate() {
        if !w.contains(ev.t) {
            report.push(format!("events[{i}].t"), Rule::OutOfWindow);
        }
        if i > 0 && ev.t < day.events[i - 1].t {
            report.push(format!("events[{i}].t"), Rule::Unsorted);
        }
        if ev.channel == ContextChannel::Sms && ev.duration_s != 0 {
            report.push(format!("events[{i}].duration_s"), Rule::SmsDuration);
        }
    }

    for (i, c) in day.coverage.iter().enumerate() {
        if c.start >= c.end {
            report.push(format!("coverage[{i}]"), Rule::EmptyInterval);
        }
        if c.start < w.start || c.end > w.end {
            report.push(format!("coverage[{i}]"), Rule::OutOfWindow);
        }
    }
    for channel in Channel::ALL {
        let mut spans: Vec<(usize, &CoverageInterval)> =
            day.coverage.iter().enumerate().filter(|(_, c)| c.channel == channel).collect();
        spans.sort_by_key(|(_, c)| c.start);
        for pair in spans.windows(2) {
            if pair[1].1.start < pair[0].1.end {
                report.push(format!("coverage[{}]", pair[1].0), Rule::OverlappingCoverage);
            }
        }
    }

    report
}
