//! Raw channel text to persisted-ready day artifacts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geo::{analyze, DayAnalysis, GeoError, GeoParams};
use crate::ingest::{
    assemble_day, parse_context_csv, parse_coverage_csv, parse_gps_csv, parse_gpx, parse_image_manifest, IngestError,
    ParsedChannels,
};
use crate::model::{Channel, ContextChannel, DayLog, DayWindow, Direction};
use crate::timeline::{compile_timeline, SegmentKind, Timeline, TimelineError, DEFAULT_VISUAL_GAP_S};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub geo: GeoParams,
    pub visual_gap_s: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams { geo: GeoParams::default(), visual_gap_s: DEFAULT_VISUAL_GAP_S }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GpsFormat {
    #[default]
    Csv,
    Gpx,
}

impl GpsFormat {
    /// Picks GPX for `.gpx` paths, CSV otherwise.
    pub fn from_path(path: &str) -> Self {
        if path.to_ascii_lowercase().ends_with(".gpx") {
            GpsFormat::Gpx
        } else {
            GpsFormat::Csv
        }
    }
}

/// Unparsed channel documents for one day.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelTexts {
    #[serde(default)]
    pub gps: Option<String>,
    #[serde(default)]
    pub gps_format: GpsFormat,
    #[serde(default)]
    pub context: Option<String>,
    #[serde(default)]
    pub images: Option<String>,
    #[serde(default)]
    pub coverage: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("{channel}: {source}")]
    Parse { channel: &'static str, source: IngestError },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaySummary {
    pub fixes: usize,
    pub images: usize,
    pub events: usize,
    pub stay_points: usize,
    pub places: usize,
    pub transitions: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DayArtifacts {
    pub day: DayLog,
    pub analysis: DayAnalysis,
    pub timeline: Timeline,
    pub summary: DaySummary,
    pub warnings: Vec<String>,
}

impl DayArtifacts {
    pub fn analysis_json(&self) -> String {
        serde_json::to_string_pretty(&self.analysis).expect("analysis serializes")
    }
}

pub fn parse_channels(window: &DayWindow, texts: &ChannelTexts) -> Result<(ParsedChannels, Vec<String>), PipelineError> {
    let parse = |channel: &'static str| move |source: IngestError| PipelineError::Parse { channel, source };
    let mut warnings = Vec::new();
    let mut parsed = ParsedChannels::default();
    if let Some(text) = &texts.gps {
        parsed.fixes = match texts.gps_format {
            GpsFormat::Csv => parse_gps_csv(text).map_err(parse("gps"))?,
            GpsFormat::Gpx => {
                let track = parse_gpx(text).map_err(parse("gps"))?;
                warnings.extend(track.warnings);
                track.fixes
            }
        };
    }
    if let Some(text) = &texts.context {
        parsed.events = parse_context_csv(text).map_err(parse("context"))?;
    }
    if let Some(text) = &texts.images {
        parsed.images = parse_image_manifest(text, window.date).map_err(parse("images"))?;
    }
    if let Some(text) = &texts.coverage {
        parsed.coverage = Some(parse_coverage_csv(text).map_err(parse("coverage"))?);
    }
    Ok((parsed, warnings))
}

pub fn build_artifacts(day: DayLog, params: &PipelineParams, warnings: Vec<String>) -> Result<DayArtifacts, PipelineError> {
    let analysis = analyze(&day.fixes, &day.coverage_for(Channel::Location), &params.geo)?;
    let timeline = compile_timeline(&day, &analysis, params.visual_gap_s)?;
    let summary = DaySummary {
        fixes: day.fixes.len(),
        images: day.images.len(),
        events: day.events.len(),
        stay_points: analysis.stay_points.len(),
        places: analysis.places.len(),
        transitions: analysis.transitions.len(),
    };
    Ok(DayArtifacts { day, analysis, timeline, summary, warnings })
}

/// Parses, assembles, analyses and compiles one day.
pub fn process_day(window: DayWindow, texts: &ChannelTexts, params: &PipelineParams) -> Result<DayArtifacts, PipelineError> {
    let (parsed, mut warnings) = parse_channels(&window, texts)?;
    let assembled = assemble_day(window, parsed)?;
    warnings.extend(assembled.warnings);
    build_artifacts(assembled.day, params, warnings)
}

fn hms(secs: f64) -> String {
    let s = secs.round() as i64;
    format!("{}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60)
}

/// Plain-text rendering of the four bars, the places and event totals.
pub fn render_summary(day: &DayLog, analysis: &DayAnalysis, timeline: &Timeline) -> String {
    let mut out = String::new();
    let w = &day.window;
    let _ = writeln!(out, "day {} (utc offset {:+} min)", w.date, w.tz_offset_minutes);
    let _ = writeln!(out, "window {} .. {}", w.start, w.end);
    let _ = writeln!(out);
    let _ = writeln!(out, "tracks");
    for track in timeline.tracks() {
        let mut kinds: Vec<(SegmentKind, usize)> = Vec::new();
        for seg in &track.segments {
            match kinds.iter_mut().find(|(k, _)| *k == seg.kind) {
                Some((_, n)) => *n += 1,
                None => kinds.push((seg.kind, 1)),
            }
        }
        kinds.sort_by_key(|(k, _)| k.as_str());
        let detail: Vec<String> = kinds
            .iter()
            .map(|(k, n)| {
                let secs: i64 = track.segments.iter().filter(|s| s.kind == *k).map(|s| s.end.millis_since(s.start)).sum();
                format!("{}={} ({})", k.as_str(), n, hms(secs as f64 / 1000.0))
            })
            .collect();
        let _ = write!(out, "  {:<9} {:>3} segments  {}", track.channel.as_str(), track.segments.len(), detail.join(" "));
        if let Some(markers) = &track.markers {
            let incoming = markers.iter().filter(|m| m.direction == Direction::Incoming).count();
            let _ = write!(out, "  markers={} (in={} out={})", markers.len(), incoming, markers.len() - incoming);
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "places ({}, by dwell)", analysis.places.len());
    for (i, p) in analysis.places.iter().enumerate() {
        let _ = writeln!(
            out,
            "  #{i} {:>10.6} {:>11.6}  dwell {}  visits {}",
            p.centroid_lat,
            p.centroid_lon,
            hms(p.total_dwell_s),
            p.visits.len()
        );
    }
    let _ = writeln!(out, "stay points {}  transitions {}", analysis.stay_points.len(), analysis.transitions.len());
    let _ = writeln!(out);
    let count = |channel: ContextChannel, dir: Direction| {
        day.events.iter().filter(|e| e.channel == channel && e.direction == dir).count()
    };
    let call_secs: u64 = day.events.iter().filter(|e| e.is_call()).map(|e| e.duration_s as u64).sum();
    let _ = writeln!(out, "events");
    let _ = writeln!(
        out,
        "  calls {} (in={} out={}) total {}",
        count(ContextChannel::Call, Direction::Incoming) + count(ContextChannel::Call, Direction::Outgoing),
        count(ContextChannel::Call, Direction::Incoming),
        count(ContextChannel::Call, Direction::Outgoing),
        hms(call_secs as f64)
    );
    let _ = writeln!(
        out,
        "  sms   {} (in={} out={})",
        count(ContextChannel::Sms, Direction::Incoming) + count(ContextChannel::Sms, Direction::Outgoing),
        count(ContextChannel::Sms, Direction::Incoming),
        count(ContextChannel::Sms, Direction::Outgoing)
    );
    let _ = writeln!(out, "  images {}  fixes {}", day.images.len(), day.fixes.len());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn window() -> DayWindow {
        DayWindow::new(NaiveDate::from_ymd_opt(2013, 5, 1).unwrap(), 0)
    }

    #[test]
    fn parse_errors_name_channel() {
        let texts = ChannelTexts { context: Some("timestamp,channel,direction,duration_s\nbad\n".into()), ..Default::default() };
        let err = process_day(window(), &texts, &PipelineParams::default()).unwrap_err();
        assert!(matches!(err, PipelineError::Parse { channel: "context", .. }), "{err}");
    }

    #[test]
    fn empty_channels_are_empty_day() {
        let texts = ChannelTexts { gps: Some("timestamp,lat,lon\n".into()), ..Default::default() };
        let err = process_day(window(), &texts, &PipelineParams::default()).unwrap_err();
        assert_eq!(err, PipelineError::Ingest(IngestError::EmptyDay));
    }

    #[test]
    fn gpx_channel_carries_warnings() {
        let gpx = r#"<gpx><trk><trkseg>
            <trkpt lat="32.65" lon="-16.9"><time>2013-05-01T09:00:00Z</time></trkpt>
            <trkpt lat="32.65" lon="-16.9"/>
        </trkseg></trk></gpx>"#;
        let texts = ChannelTexts { gps: Some(gpx.into()), gps_format: GpsFormat::Gpx, ..Default::default() };
        let art = process_day(window(), &texts, &PipelineParams::default()).unwrap();
        assert_eq!(art.summary.fixes, 1);
        assert_eq!(art.warnings.len(), 1);
        assert_eq!(GpsFormat::from_path("day/track.GPX"), GpsFormat::Gpx);
    }

    #[test]
    fn summary_is_deterministic() {
        let texts = ChannelTexts {
            context: Some("timestamp,channel,direction,duration_s\n2013-05-01T14:00:00Z,call,in,120\n2013-05-01T10:05:00Z,sms,in,0\n".into()),
            ..Default::default()
        };
        let art = process_day(window(), &texts, &PipelineParams::default()).unwrap();
        let a = render_summary(&art.day, &art.analysis, &art.timeline);
        let b = render_summary(&art.day, &art.analysis, &art.timeline);
        assert_eq!(a, b);
        assert!(a.contains("calls 1 (in=1 out=0) total 0:02:00"), "{a}");
    }
}
