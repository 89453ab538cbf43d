//! The four timeline bars and window selection for the data pane.
//!
//! Every track partitions the day into half-open segments `[start, end)`.
//! Kinds map to the review UI's colors: visual `present` green and `absent`
//! blue; location `stationary` solid green, `transition` dashed green and
//! `absent` blue; `call` solid green for the call's duration, `covered-idle`
//! neutral and `absent` blue; sms markers are red lines for incoming
//! messages over a `covered`/`absent` background.

use serde::{Deserialize, Serialize};

use crate::geo::DayAnalysis;
use crate::model::{Channel, ContextChannel, ContextEvent, CoverageInterval, DayLog, DayWindow, Direction, GpsFix, ImageSample, Timestamp};

pub const DEFAULT_VISUAL_GAP_S: f64 = 600.0;
pub const BASE_FRAME_MS: u32 = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    Present,
    Absent,
    Stationary,
    Transition,
    Call,
    CoveredIdle,
    Covered,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Present => "present",
            SegmentKind::Absent => "absent",
            SegmentKind::Stationary => "stationary",
            SegmentKind::Transition => "transition",
            SegmentKind::Call => "call",
            SegmentKind::CoveredIdle => "covered-idle",
            SegmentKind::Covered => "covered",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calls: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stay: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub place: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Timestamp,
    pub end: Timestamp,
    pub kind: SegmentKind,
    #[serde(default)]
    pub meta: SegmentMeta,
}

impl Segment {
    fn new(start: Timestamp, end: Timestamp, kind: SegmentKind) -> Self {
        Segment { start, end, kind, meta: SegmentMeta::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub t: Timestamp,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub channel: Channel,
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markers: Option<Vec<Marker>>,
}

impl Track {
    /// Checks that segments are sorted, non-empty, adjacent and cover the window.
    pub fn check_partition(&self, window: &DayWindow) -> Result<(), String> {
        let segs = &self.segments;
        let first = segs.first().ok_or_else(|| format!("{}: no segments", self.channel))?;
        if first.start != window.start {
            return Err(format!("{}: first segment starts at {}", self.channel, first.start));
        }
        if segs.last().unwrap().end != window.end {
            return Err(format!("{}: last segment ends at {}", self.channel, segs.last().unwrap().end));
        }
        for (i, s) in segs.iter().enumerate() {
            if s.start >= s.end {
                return Err(format!("{}: segment {i} is empty", self.channel));
            }
            if i > 0 && segs[i - 1].end != s.start {
                return Err(format!("{}: gap or overlap before segment {i}", self.channel));
            }
        }
        Ok(())
    }

    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }

    /// The segment whose half-open span holds `t`.
    pub fn segment_at(&self, t: Timestamp) -> Option<&Segment> {
        let idx = self.segments.partition_point(|s| s.end <= t);
        self.segments.get(idx).filter(|s| s.start <= t)
    }
}

/// All four bars of one day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub window: DayWindow,
    pub visual: Track,
    pub location: Track,
    pub call: Track,
    pub sms: Track,
}

impl Timeline {
    pub fn tracks(&self) -> [&Track; 4] {
        [&self.visual, &self.location, &self.call, &self.sms]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("timeline serializes")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimelineError {
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("invalid window {from}..{to}")]
    InvalidWindow { from: Timestamp, to: Timestamp },
}

/// Partitions the window by overlaying layers in precedence order.
///
/// Each layer must be sorted and internally non-overlapping; the first layer
/// covering a stretch of time wins and uncovered time is `absent`. Adjacent
/// segments with equal kind and meta are coalesced.
fn compose(window: &DayWindow, layers: &[Vec<Segment>]) -> Vec<Segment> {
    let clamp = |t: Timestamp| t.max(window.start).min(window.end);
    let mut cuts = vec![window.start, window.end];
    for seg in layers.iter().flatten() {
        cuts.push(clamp(seg.start));
        cuts.push(clamp(seg.end));
    }
    cuts.sort();
    cuts.dedup();

    let mut cursors = vec![0usize; layers.len()];
    let mut out: Vec<Segment> = Vec::new();
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let mut chosen = None;
        for (layer, cursor) in layers.iter().zip(cursors.iter_mut()) {
            while *cursor < layer.len() && layer[*cursor].end <= a {
                *cursor += 1;
            }
            if let Some(seg) = layer.get(*cursor) {
                if seg.start <= a {
                    chosen = Some(seg);
                    break;
                }
            }
        }
        let (kind, meta) = match chosen {
            Some(seg) => (seg.kind, seg.meta.clone()),
            None => (SegmentKind::Absent, SegmentMeta::default()),
        };
        match out.last_mut() {
            Some(last) if last.kind == kind && last.meta == meta && last.end == a => last.end = b,
            _ => out.push(Segment { start: a, end: b, kind, meta }),
        }
    }
    out
}

fn coverage_layer(coverage: &[CoverageInterval], channel: Channel, kind: SegmentKind) -> Vec<Segment> {
    let mut spans: Vec<Segment> = coverage
        .iter()
        .filter(|c| c.channel == channel)
        .map(|c| Segment::new(c.start, c.end, kind))
        .collect();
    spans.sort_by_key(|s| s.start);
    // guard against unmerged input
    let mut merged: Vec<Segment> = Vec::with_capacity(spans.len());
    for s in spans {
        match merged.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => merged.push(s),
        }
    }
    merged
}

/// Visual bar: images closer than `gap_s` chain into one `present` segment
/// from the first to the last image of the chain. A lone image gets a
/// `present` segment `gap_s / 10` wide centred on it.
pub fn build_visual_track(window: &DayWindow, images: &[ImageSample], gap_s: f64) -> Track {
    let gap_ms = (gap_s * 1000.0) as i64;
    let half_lone = gap_ms / 20;
    let mut present: Vec<Segment> = Vec::new();
    let mut flush = |first: Timestamp, last: Timestamp, count: usize| {
        let (start, end) = if last > first {
            (first, last)
        } else {
            (first.plus_millis(-half_lone), last.plus_millis(half_lone))
        };
        let (start, end) = (start.max(window.start), end.min(window.end));
        if start < end {
            let mut seg = Segment::new(start, end, SegmentKind::Present);
            seg.meta.images = Some(count);
            present.push(seg);
        }
    };

    let mut chain: Option<(Timestamp, Timestamp, usize)> = None;
    for img in images {
        chain = match chain {
            Some((first, last, n)) if img.t.millis_since(last) <= gap_ms => Some((first, img.t, n + 1)),
            Some((first, last, n)) => {
                flush(first, last, n);
                Some((img.t, img.t, 1))
            }
            None => Some((img.t, img.t, 1)),
        };
    }
    if let Some((first, last, n)) = chain {
        flush(first, last, n);
    }

    Track { channel: Channel::Visual, segments: compose(window, &[present]), markers: None }
}

/// Location bar: stay spans are `stationary`, transitions `transition`.
pub fn build_location_track(window: &DayWindow, analysis: &DayAnalysis) -> Result<Track, TimelineError> {
    let owner = crate::geo::place_of_stay(&analysis.places, analysis.stay_points.len());
    let mut stationary = Vec::with_capacity(analysis.stay_points.len());
    for (idx, sp) in analysis.stay_points.iter().enumerate() {
        if sp.arrival < window.start || sp.departure > window.end {
            return Err(TimelineError::InconsistentInputs(format!(
                "stay point {idx} ({}..{}) lies outside the day",
                sp.arrival, sp.departure
            )));
        }
        if sp.departure > sp.arrival {
            let mut seg = Segment::new(sp.arrival, sp.departure, SegmentKind::Stationary);
            seg.meta.stay = Some(idx);
            seg.meta.place = owner.get(idx).copied().filter(|p| *p != usize::MAX);
            stationary.push(seg);
        }
    }
    let mut moving = Vec::with_capacity(analysis.transitions.len());
    for tr in &analysis.transitions {
        if tr.start < window.start || tr.end > window.end {
            return Err(TimelineError::InconsistentInputs(format!("transition {}..{} lies outside the day", tr.start, tr.end)));
        }
        moving.push(Segment::new(tr.start, tr.end, SegmentKind::Transition));
    }
    moving.sort_by_key(|s| s.start);
    Ok(Track { channel: Channel::Location, segments: compose(window, &[stationary, moving]), markers: None })
}

/// Span of a call as drawn: at least one second, clipped to the day.
pub fn call_span(window: &DayWindow, event: &ContextEvent) -> (Timestamp, Timestamp) {
    let end = event.t.plus_secs(event.duration_s.max(1) as i64).min(window.end);
    (event.t, end)
}

/// Call bar: overlapping calls merge into one segment keeping the earlier
/// call's direction. Covered time without calls is `covered-idle`.
pub fn build_call_track(window: &DayWindow, events: &[ContextEvent], coverage: &[CoverageInterval]) -> Track {
    let mut calls: Vec<&ContextEvent> = events.iter().filter(|e| e.channel == ContextChannel::Call).collect();
    calls.sort_by_key(|e| e.t);
    let mut spans: Vec<Segment> = Vec::new();
    for ev in calls {
        let (start, end) = call_span(window, ev);
        match spans.last_mut() {
            Some(last) if start < last.end => {
                last.end = last.end.max(end);
                *last.meta.calls.get_or_insert(1) += 1;
            }
            _ => {
                let mut seg = Segment::new(start, end, SegmentKind::Call);
                seg.meta.direction = Some(ev.direction);
                seg.meta.calls = Some(1);
                spans.push(seg);
            }
        }
    }
    for seg in &mut spans {
        seg.meta.duration_s = Some(seg.end.millis_since(seg.start) as f64 / 1000.0);
    }
    let idle = coverage_layer(coverage, Channel::Call, SegmentKind::CoveredIdle);
    Track { channel: Channel::Call, segments: compose(window, &[spans, idle]), markers: None }
}

/// SMS bar: one marker per message over a coverage background.
pub fn build_sms_track(window: &DayWindow, events: &[ContextEvent], coverage: &[CoverageInterval]) -> Track {
    let markers = events
        .iter()
        .filter(|e| e.channel == ContextChannel::Sms)
        .map(|e| Marker { t: e.t, direction: e.direction })
        .collect();
    let background = coverage_layer(coverage, Channel::Sms, SegmentKind::Covered);
    Track { channel: Channel::Sms, segments: compose(window, &[background]), markers: Some(markers) }
}

pub fn compile_timeline(day: &DayLog, analysis: &DayAnalysis, visual_gap_s: f64) -> Result<Timeline, TimelineError> {
    let w = &day.window;
    Ok(Timeline {
        window: *w,
        visual: build_visual_track(w, &day.images, visual_gap_s),
        location: build_location_track(w, analysis)?,
        call: build_call_track(w, &day.events, &day.coverage),
        sms: build_sms_track(w, &day.events, &day.coverage),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSelection {
    pub from: Timestamp,
    pub to: Timestamp,
}

impl WindowSelection {
    pub fn new(window: &DayWindow, from: Timestamp, to: Timestamp) -> Result<Self, TimelineError> {
        if window.start <= from && from < to && to <= window.end {
            Ok(WindowSelection { from, to })
        } else {
            Err(TimelineError::InvalidWindow { from, to })
        }
    }

    pub fn whole_day(window: &DayWindow) -> Self {
        WindowSelection { from: window.start, to: window.end }
    }

    fn overlap_ms(&self, start: Timestamp, end: Timestamp) -> i64 {
        (end.min(self.to).millis_since(start.max(self.from))).max(0)
    }

    fn holds(&self, t: Timestamp) -> bool {
        self.from <= t && t < self.to
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPlace {
    /// Index into the day's place list.
    pub place: usize,
    pub centroid_lat: f64,
    pub centroid_lon: f64,
    pub total_dwell_s: f64,
    /// Dwell inside the selected window only.
    pub window_dwell_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowData {
    pub frames: Vec<ImageSample>,
    pub fixes: Vec<GpsFix>,
    pub places: Vec<WindowPlace>,
    pub events: Vec<ContextEvent>,
}

impl WindowData {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty() && self.fixes.is_empty() && self.places.is_empty() && self.events.is_empty()
    }
}

/// Data for a selected period. Calls are included when their span
/// intersects the window even if they started before it.
pub fn select_window(day: &DayLog, analysis: &DayAnalysis, sel: WindowSelection) -> Result<WindowData, TimelineError> {
    let sel = WindowSelection::new(&day.window, sel.from, sel.to)?;
    let frames = day.images.iter().filter(|i| sel.holds(i.t)).cloned().collect();
    let fixes = day.fixes.iter().filter(|f| sel.holds(f.t)).copied().collect();
    let events = day
        .events
        .iter()
        .filter(|e| sel.holds(e.t) || (e.is_call() && sel.overlap_ms(e.t, e.end()) > 0))
        .copied()
        .collect();
    let places = analysis
        .places
        .iter()
        .enumerate()
        .filter_map(|(idx, place)| {
            let ms: i64 = place
                .visits
                .iter()
                .map(|&v| {
                    let sp = &analysis.stay_points[v];
                    sel.overlap_ms(sp.arrival, sp.departure)
                })
                .sum();
            (ms > 0).then(|| WindowPlace {
                place: idx,
                centroid_lat: place.centroid_lat,
                centroid_lon: place.centroid_lon,
                total_dwell_s: place.total_dwell_s,
                window_dwell_s: ms as f64 / 1000.0,
            })
        })
        .collect();
    Ok(WindowData { frames, fixes, places, events })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub media_id: String,
    pub t: Timestamp,
    /// Display time at 1x; players divide by the speed factor.
    pub suggested_display_ms: u32,
}

pub fn frame_sequence(data: &WindowData) -> Vec<Frame> {
    let mut frames: Vec<Frame> = data
        .frames
        .iter()
        .map(|f| Frame { media_id: f.media_id.clone(), t: f.t, suggested_display_ms: BASE_FRAME_MS })
        .collect();
    frames.sort_by_key(|f| f.t);
    frames
}

/// Per-frame display time at a playback speed (negative speeds rewind).
pub fn display_ms_at(frame: &Frame, speed: f64) -> f64 {
    frame.suggested_display_ms as f64 / speed.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{analyze, GeoParams};
    use chrono::NaiveDate;

    fn window() -> DayWindow {
        DayWindow::new(NaiveDate::from_ymd_opt(2013, 5, 1).unwrap(), 0)
    }

    fn at(hms: &str) -> Timestamp {
        Timestamp::parse(&format!("2013-05-01T{hms}Z")).unwrap()
    }

    fn image(t: Timestamp, i: usize) -> ImageSample {
        ImageSample { t, media_id: format!("2013-05-01#{i:06}"), path: format!("{i}.jpg") }
    }

    fn spans(track: &Track) -> Vec<(String, String, &'static str)> {
        track
            .segments
            .iter()
            .map(|s| (s.start.to_string()[11..19].to_string(), s.end.to_string()[11..19].to_string(), s.kind.as_str()))
            .collect()
    }

    #[test]
    fn visual_empty_day() {
        let track = build_visual_track(&window(), &[], 600.0);
        assert_eq!(track.segments.len(), 1);
        assert_eq!(track.segments[0].kind, SegmentKind::Absent);
        track.check_partition(&window()).unwrap();
    }

    #[test]
    fn visual_dense_burst() {
        let images: Vec<_> = (0..=20).map(|k| image(at("09:00:00").plus_secs(30 * k), k as usize)).collect();
        let track = build_visual_track(&window(), &images, 600.0);
        assert_eq!(
            spans(&track),
            vec![
                ("00:00:00".into(), "09:00:00".into(), "absent"),
                ("09:00:00".into(), "09:10:00".into(), "present"),
                ("09:10:00".into(), "00:00:00".into(), "absent"),
            ]
        );
        assert_eq!(track.segments[1].meta.images, Some(21));
    }

    #[test]
    fn visual_lone_images() {
        let images = vec![image(at("09:00:00"), 0), image(at("09:20:00"), 1)];
        let track = build_visual_track(&window(), &images, 600.0);
        assert_eq!(track.count(SegmentKind::Present), 2);
        assert_eq!(track.count(SegmentKind::Absent), 3);
        assert_eq!(
            spans(&track)[1],
            ("08:59:30".into(), "09:00:30".into(), "present")
        );
        // lone image at midnight is clamped to the day start
        let track = build_visual_track(&window(), &[image(window().start, 0)], 600.0);
        assert_eq!(track.segments[0].kind, SegmentKind::Present);
        assert_eq!(track.segments[0].end, window().start.plus_secs(30));
    }

    fn fixes_between(from: Timestamp, count: i64, step_s: i64, lat: impl Fn(i64) -> f64) -> Vec<GpsFix> {
        (0..count).map(|k| GpsFix::new(from.plus_secs(k * step_s), lat(k), -16.9167)).collect()
    }

    fn north(m: f64) -> f64 {
        (m / crate::geo::EARTH_RADIUS_M).to_degrees()
    }

    fn location_cov(start: Timestamp, end: Timestamp) -> Vec<CoverageInterval> {
        vec![CoverageInterval { channel: Channel::Location, start, end }]
    }

    #[test]
    fn location_no_fixes() {
        let analysis = analyze(&[], &[], &GeoParams::default()).unwrap();
        let track = build_location_track(&window(), &analysis).unwrap();
        assert_eq!(spans(&track), vec![("00:00:00".into(), "00:00:00".into(), "absent")]);
    }

    #[test]
    fn location_stay_then_move() {
        let mut fixes = fixes_between(at("09:00:00"), 181, 60, |_| 32.65);
        fixes.extend(fixes_between(at("12:01:00"), 30, 60, |k| 32.65 + north(100.0 * (k + 1) as f64)));
        let analysis = analyze(&fixes, &location_cov(at("09:00:00"), at("12:30:00")), &GeoParams::default()).unwrap();
        assert_eq!(analysis.stay_points.len(), 1);
        let track = build_location_track(&window(), &analysis).unwrap();
        assert_eq!(
            spans(&track),
            vec![
                ("00:00:00".into(), "09:00:00".into(), "absent"),
                ("09:00:00".into(), "12:00:00".into(), "stationary"),
                ("12:00:00".into(), "12:30:00".into(), "transition"),
                ("12:30:00".into(), "00:00:00".into(), "absent"),
            ]
        );
        assert_eq!(track.segments[1].meta.place, Some(0));
    }

    #[test]
    fn location_moving_only() {
        let fixes = fixes_between(at("10:00:00"), 30, 60, |k| 32.65 + north(100.0 * k as f64));
        let analysis = analyze(&fixes, &location_cov(at("10:00:00"), at("10:29:00")), &GeoParams::default()).unwrap();
        let track = build_location_track(&window(), &analysis).unwrap();
        assert_eq!(track.count(SegmentKind::Transition), 1);
        assert_eq!(spans(&track)[1], ("10:00:00".into(), "10:29:00".into(), "transition"));
    }

    #[test]
    fn location_rejects_foreign_stay() {
        let fixes = fixes_between(at("09:00:00"), 10, 60, |_| 32.65);
        let analysis = analyze(&fixes, &[], &GeoParams::default()).unwrap();
        let other_day = DayWindow::new(NaiveDate::from_ymd_opt(2013, 5, 2).unwrap(), 0);
        assert!(matches!(build_location_track(&other_day, &analysis), Err(TimelineError::InconsistentInputs(_))));
    }

    #[test]
    fn call_fixtures() {
        let call = ContextEvent::call(at("14:00:00"), Direction::Incoming, 120);
        let track = build_call_track(&window(), &[call], &[]);
        assert_eq!(spans(&track)[1], ("14:00:00".into(), "14:02:00".into(), "call"));
        assert_eq!(track.segments[1].meta.direction, Some(Direction::Incoming));

        let track = build_call_track(&window(), &[], &[]);
        assert_eq!(spans(&track), vec![("00:00:00".into(), "00:00:00".into(), "absent")]);

        let overlapping = [
            ContextEvent::call(at("14:00:00"), Direction::Outgoing, 300),
            ContextEvent::call(at("14:03:00"), Direction::Incoming, 300),
        ];
        let track = build_call_track(&window(), &overlapping, &[]);
        assert_eq!(track.count(SegmentKind::Call), 1);
        let seg = &track.segments[1];
        assert_eq!((seg.start, seg.end), (at("14:00:00"), at("14:08:00")));
        assert_eq!(seg.meta.direction, Some(Direction::Outgoing));
        assert_eq!(seg.meta.calls, Some(2));
    }

    #[test]
    fn call_idle_vs_uncovered() {
        let cov = vec![CoverageInterval { channel: Channel::Call, start: at("08:00:00"), end: at("20:00:00") }];
        let calls = [ContextEvent::call(at("14:00:00"), Direction::Incoming, 0)];
        let track = build_call_track(&window(), &calls, &cov);
        assert_eq!(
            spans(&track),
            vec![
                ("00:00:00".into(), "08:00:00".into(), "absent"),
                ("08:00:00".into(), "14:00:00".into(), "covered-idle"),
                ("14:00:00".into(), "14:00:01".into(), "call"),
                ("14:00:01".into(), "20:00:00".into(), "covered-idle"),
                ("20:00:00".into(), "00:00:00".into(), "absent"),
            ]
        );
    }

    #[test]
    fn call_clamped_at_day_end() {
        let call = ContextEvent::call(window().end.plus_secs(-30), Direction::Incoming, 600);
        let track = build_call_track(&window(), &[call], &[]);
        track.check_partition(&window()).unwrap();
        assert_eq!(track.segments.last().unwrap().kind, SegmentKind::Call);
    }

    #[test]
    fn sms_fixtures() {
        let cov = vec![CoverageInterval { channel: Channel::Sms, start: at("07:00:00"), end: at("22:00:00") }];
        let track = build_sms_track(&window(), &[], &cov);
        assert_eq!(track.markers.as_ref().unwrap().len(), 0);
        assert_eq!(track.count(SegmentKind::Covered), 1);

        let one = [ContextEvent::sms(at("10:05:00"), Direction::Incoming)];
        let track = build_sms_track(&window(), &one, &cov);
        assert_eq!(track.markers.unwrap(), vec![Marker { t: at("10:05:00"), direction: Direction::Incoming }]);

        let burst = [
            ContextEvent::sms(at("10:05:00"), Direction::Incoming),
            ContextEvent::sms(at("10:05:20"), Direction::Outgoing),
            ContextEvent::sms(at("10:05:40"), Direction::Incoming),
        ];
        let markers = build_sms_track(&window(), &burst, &cov).markers.unwrap();
        assert_eq!(markers.iter().map(|m| m.direction).collect::<Vec<_>>(), vec![
            Direction::Incoming,
            Direction::Outgoing,
            Direction::Incoming
        ]);
    }

    #[test]
    fn segment_kinds_serialize_lowercase() {
        let json = serde_json::to_string(&SegmentKind::CoveredIdle).unwrap();
        assert_eq!(json, "\"covered-idle\"");
        for kind in [
            SegmentKind::Present,
            SegmentKind::Absent,
            SegmentKind::Stationary,
            SegmentKind::Transition,
            SegmentKind::Call,
            SegmentKind::Covered,
        ] {
            assert_eq!(serde_json::to_string(&kind).unwrap(), format!("\"{}\"", kind.as_str()));
        }
    }

    fn stay_day() -> (DayLog, DayAnalysis) {
        let mut day = DayLog::empty(window());
        day.fixes = fixes_between(at("09:00:00"), 181, 60, |_| 32.65);
        day.images = vec![image(at("09:30:00"), 0), image(at("13:00:00"), 1)];
        day.events = vec![
            ContextEvent::call(at("09:55:00"), Direction::Incoming, 600),
            ContextEvent::sms(at("15:00:00"), Direction::Incoming),
        ];
        day.coverage = location_cov(at("09:00:00"), at("12:00:00"));
        let analysis = analyze(&day.fixes, &day.coverage, &GeoParams::default()).unwrap();
        (day, analysis)
    }

    #[test]
    fn window_cuts_stay() {
        let (day, analysis) = stay_day();
        let data = select_window(&day, &analysis, WindowSelection::new(&window(), at("10:00:00"), at("14:00:00")).unwrap()).unwrap();
        assert_eq!(data.places.len(), 1);
        assert_eq!(data.places[0].window_dwell_s, 7200.0);
        assert_eq!(data.places[0].total_dwell_s, 10800.0);
        assert_eq!(data.frames.len(), 1);
        // call started 09:55 and runs into the window
        assert_eq!(data.events.len(), 1);
        assert_eq!(data.fixes.len(), 121);
    }

    #[test]
    fn window_whole_day_and_empty() {
        let (day, analysis) = stay_day();
        let all = select_window(&day, &analysis, WindowSelection::whole_day(&window())).unwrap();
        assert_eq!(all.frames.len(), day.images.len());
        assert_eq!(all.fixes.len(), day.fixes.len());
        assert_eq!(all.events.len(), day.events.len());
        let none = select_window(&day, &analysis, WindowSelection::new(&window(), at("20:00:00"), at("21:00:00")).unwrap()).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn window_validation() {
        let (day, analysis) = stay_day();
        assert!(WindowSelection::new(&window(), at("10:00:00"), at("10:00:00")).is_err());
        assert!(WindowSelection::new(&window(), window().start.plus_secs(-1), at("10:00:00")).is_err());
        let bad = WindowSelection { from: at("12:00:00"), to: at("11:00:00") };
        assert!(matches!(select_window(&day, &analysis, bad), Err(TimelineError::InvalidWindow { .. })));
    }

    #[test]
    fn frames_paced() {
        assert!(frame_sequence(&WindowData::default()).is_empty());
        let data = WindowData {
            frames: (0..3).map(|k| image(at("09:00:00").plus_secs(30 * k), k as usize)).collect(),
            ..Default::default()
        };
        let seq = frame_sequence(&data);
        assert_eq!(seq.len(), 3);
        assert!(seq.iter().all(|f| f.suggested_display_ms == 500));
        assert_eq!(display_ms_at(&seq[0], 4.0), 125.0);
        assert_eq!(display_ms_at(&seq[0], -2.0), 250.0);
    }
}
