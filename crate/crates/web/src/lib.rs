//! WebAssembly entry points for the static demo page in `www/`.
//!
//! Each binding takes and returns plain strings or numbers; structured
//! results are JSON. The `*_view` functions hold the logic and are what the
//! native tests exercise.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use footprint_core::geo::{analyze, circle_radius_px, GeoParams, StayPoint};
use footprint_core::ingest::parse_gps_csv;
use footprint_core::pipeline::{process_day, render_summary, ChannelTexts, PipelineParams};
use footprint_core::timeline::DEFAULT_VISUAL_GAP_S;
use footprint_core::{Channel, CoverageInterval, DayWindow, Timeline};

pub const CIRCLE_MIN_PX: f64 = 6.0;
pub const CIRCLE_MAX_PX: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaceView {
    pub centroid_lat: f64,
    pub centroid_lon: f64,
    pub total_dwell_s: f64,
    pub visits: usize,
    pub radius_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacesView {
    /// `[lat, lon]` per fix, in time order.
    pub track: Vec<[f64; 2]>,
    /// `[min_lat, min_lon, max_lat, max_lon]`, absent for an empty trace.
    pub bounds: Option<[f64; 4]>,
    pub stay_points: Vec<StayPoint>,
    pub transitions: usize,
    pub places: Vec<PlaceView>,
}

/// Stay points and places of a GPS CSV trace, with circle sizes.
pub fn places_view(gps_csv: &str, radius_m: f64, min_dwell_s: f64, merge_radius_m: f64) -> Result<PlacesView, String> {
    let params = GeoParams { radius_m, min_dwell_s, merge_radius_m, ..GeoParams::default() };
    params.validate().map_err(|e| e.to_string())?;
    let fixes = parse_gps_csv(gps_csv).map_err(|e| e.to_string())?;
    // the trace's own span, as ingestion assumes without a coverage file
    let coverage: Vec<CoverageInterval> = match (fixes.first(), fixes.last()) {
        (Some(a), Some(b)) => vec![CoverageInterval { channel: Channel::Location, start: a.t, end: b.t.max(a.t.plus_millis(1000)) }],
        _ => Vec::new(),
    };
    let analysis = analyze(&fixes, &coverage, &params).map_err(|e| e.to_string())?;

    let max = analysis.places.iter().map(|p| p.total_dwell_s).fold(0.0, f64::max);
    let places = analysis
        .places
        .iter()
        .map(|p| {
            let radius_px = circle_radius_px(p.total_dwell_s, max, CIRCLE_MIN_PX, CIRCLE_MAX_PX).map_err(|e| e.to_string())?;
            Ok(PlaceView {
                centroid_lat: p.centroid_lat,
                centroid_lon: p.centroid_lon,
                total_dwell_s: p.total_dwell_s,
                visits: p.visits.len(),
                radius_px,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let bounds = fixes.first().map(|f| {
        fixes.iter().fold([f.lat, f.lon, f.lat, f.lon], |b, f| [b[0].min(f.lat), b[1].min(f.lon), b[2].max(f.lat), b[3].max(f.lon)])
    });
    Ok(PlacesView {
        track: fixes.iter().map(|f| [f.lat, f.lon]).collect(),
        bounds,
        stay_points: analysis.stay_points,
        transitions: analysis.transitions.len(),
        places,
    })
}

fn default_radius() -> f64 {
    GeoParams::default().radius_m
}

fn default_dwell() -> f64 {
    GeoParams::default().min_dwell_s
}

fn default_gap() -> f64 {
    DEFAULT_VISUAL_GAP_S
}

/// A day's channel documents plus the tunable parameters.
#[derive(Debug, Clone, Deserialize)]
pub struct TimelineRequest {
    pub date: NaiveDate,
    #[serde(default)]
    pub tz_offset_minutes: i32,
    #[serde(flatten)]
    pub texts: ChannelTexts,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    #[serde(default = "default_dwell")]
    pub min_dwell_s: f64,
    #[serde(default = "default_gap")]
    pub visual_gap_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimelineView {
    pub timeline: Timeline,
    pub summary: String,
    pub warnings: Vec<String>,
}

pub fn timeline_view(request: &TimelineRequest) -> Result<TimelineView, String> {
    let geo = GeoParams { radius_m: request.radius_m, min_dwell_s: request.min_dwell_s, ..GeoParams::default() };
    let params = PipelineParams { geo, visual_gap_s: request.visual_gap_s };
    let window = DayWindow::new(request.date, request.tz_offset_minutes);
    let art = process_day(window, &request.texts, &params).map_err(|e| e.to_string())?;
    Ok(TimelineView {
        summary: render_summary(&art.day, &art.analysis, &art.timeline),
        timeline: art.timeline,
        warnings: art.warnings,
    })
}

fn to_js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

fn json<T: Serialize>(value: &T) -> Result<String, JsValue> {
    serde_json::to_string(value).map_err(|e| to_js(e.to_string()))
}

/// JSON [`PlacesView`] for a GPS CSV trace.
#[wasm_bindgen]
pub fn detect_places(gps_csv: &str, radius_m: f64, min_dwell_s: f64, merge_radius_m: f64) -> Result<String, JsValue> {
    json(&places_view(gps_csv, radius_m, min_dwell_s, merge_radius_m).map_err(to_js)?)
}

/// JSON [`TimelineView`] for a JSON [`TimelineRequest`].
#[wasm_bindgen]
pub fn compile_timeline(request_json: &str) -> Result<String, JsValue> {
    let request: TimelineRequest = serde_json::from_str(request_json).map_err(|e| to_js(e.to_string()))?;
    json(&timeline_view(&request).map_err(to_js)?)
}

#[wasm_bindgen]
pub fn circle_radius(dwell_s: f64, max_dwell_s: f64, r_min: f64, r_max: f64) -> Result<f64, JsValue> {
    circle_radius_px(dwell_s, max_dwell_s, r_min, r_max).map_err(|e| to_js(e.to_string()))
}
