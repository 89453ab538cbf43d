//! Test-only oracles and generators.
//!
//! Nothing here calls into the code paths it checks: distances use the 3-D
//! chord formula rather than haversine, stay points are found by exhaustive
//! window enumeration, and track checks re-derive coverage from raw events.

use chrono::NaiveDate;
use rand::rngs::StdRng;
use rand::Rng;

use footprint_core::model::{
    Channel, ContextChannel, ContextEvent, CoverageInterval, DayLog, DayWindow, Direction, GpsFix, ImageSample, Timestamp,
};
use footprint_core::reconstruction::{EpisodeInput, ReconstructionError};
use footprint_core::timeline::{SegmentKind, Timeline, Track};

pub const R_EARTH: f64 = 6_371_000.0;

/// Great-circle distance from the straight chord between unit vectors.
pub fn chord_distance_m(a: (f64, f64), b: (f64, f64), radius: f64) -> f64 {
    let v = |(lat, lon): (f64, f64)| {
        let (lat, lon) = (lat.to_radians(), lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (p, q) = (v(a), v(b));
    let chord = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    2.0 * radius * (chord / 2.0).min(1.0).asin()
}

/// Exhaustive stay point oracle returning `(anchor, last_member)` pairs.
///
/// For each anchor (scanning left to right, skipping past accepted runs) every
/// candidate end `k` is tested by checking all fixes in `anchor..=k` against
/// the radius; the largest valid `k` is kept and accepted if its span exceeds
/// the dwell threshold.
pub fn brute_force_stay_points(fixes: &[GpsFix], radius_m: f64, min_dwell_s: f64) -> Vec<(usize, usize)> {
    let n = fixes.len();
    let in_radius = |i: usize, k: usize| {
        (i..=k).all(|m| chord_distance_m((fixes[i].lat, fixes[i].lon), (fixes[m].lat, fixes[m].lon), R_EARTH) <= radius_m)
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut best = i;
        for k in i..n {
            if in_radius(i, k) {
                best = k;
            } else {
                break;
            }
        }
        let span_ms = fixes[best].t.as_millis() - fixes[i].t.as_millis();
        if span_ms as f64 > min_dwell_s * 1000.0 {
            out.push((i, best));
            i = best + 1;
        } else {
            i += 1;
        }
    }
    out
}

pub fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 5, 1).unwrap()
}

/// Meters to degrees of latitude.
pub fn north_deg(m: f64) -> f64 {
    (m / R_EARTH).to_degrees()
}

/// Random trace mixing dwells (jitter well inside or straddling 50 m) and
/// moves, sampled every 10..=120 s, at most `max_len` fixes.
pub fn random_trace(rng: &mut StdRng, max_len: usize) -> Vec<GpsFix> {
    let len = rng.gen_range(0..=max_len);
    let mut t = Timestamp::parse("2013-05-01T06:00:00Z").unwrap().as_millis();
    let (mut lat, mut lon) = (rng.gen_range(-60.0..60.0), rng.gen_range(-170.0..170.0));
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let regime = rng.gen_range(0..3);
        let run = rng.gen_range(1..40).min(len - out.len());
        let jitter_m = match regime {
            0 => rng.gen_range(0.0..20.0),
            1 => rng.gen_range(20.0..70.0),
            _ => 0.0,
        };
        let (center_lat, center_lon) = (lat, lon);
        for _ in 0..run {
            t += rng.gen_range(10_000..=120_000);
            if regime == 2 {
                lat += north_deg(rng.gen_range(30.0..200.0));
                lon += north_deg(rng.gen_range(-100.0..100.0));
            } else {
                lat = center_lat + north_deg(rng.gen_range(-jitter_m..=jitter_m));
                lon = center_lon + north_deg(rng.gen_range(-jitter_m..=jitter_m));
            }
            out.push(GpsFix::new(Timestamp::from_millis(t), lat, lon));
        }
    }
    out
}

/// Random but valid day: sorted channels, merged in-window coverage.
pub fn random_day(rng: &mut StdRng) -> DayLog {
    let tz = rng.gen_range(-12..=14) * 60;
    let window = DayWindow::new(date(), tz);
    let span = window.duration_ms();
    let at = |rng: &mut StdRng| Timestamp::from_millis(window.start.as_millis() + rng.gen_range(0..span));
    let mut day = DayLog::empty(window);

    if rng.gen_bool(0.8) {
        let mut t = window.start.as_millis() + rng.gen_range(0..span / 2);
        let (mut lat, lon) = (32.65, -16.9167);
        let n = rng.gen_range(0..300);
        for _ in 0..n {
            t += rng.gen_range(5_000..400_000);
            if t >= window.end.as_millis() {
                break;
            }
            if rng.gen_bool(0.3) {
                lat += north_deg(rng.gen_range(0.0..300.0));
            }
            day.fixes.push(GpsFix::new(Timestamp::from_millis(t), lat, lon));
        }
    }

    if rng.gen_bool(0.8) {
        let mut times: Vec<Timestamp> = Vec::new();
        for _ in 0..rng.gen_range(0..5) {
            let mut t = at(rng);
            for _ in 0..rng.gen_range(1..60) {
                times.push(t);
                t = t.plus_millis(rng.gen_range(0..90_000));
                if t >= window.end {
                    break;
                }
            }
        }
        times.sort();
        day.images = times
            .into_iter()
            .enumerate()
            .map(|(i, t)| ImageSample { t, media_id: format!("2013-05-01#{i:06}"), path: format!("img/{i}.jpg") })
            .collect();
    }

    for _ in 0..rng.gen_range(0..12) {
        let t = at(rng);
        let direction = if rng.gen_bool(0.5) { Direction::Incoming } else { Direction::Outgoing };
        day.events.push(if rng.gen_bool(0.5) {
            ContextEvent::call(t, direction, rng.gen_range(0..3600))
        } else {
            ContextEvent::sms(t, direction)
        });
    }
    day.events.sort_by_key(|e| e.t);

    for channel in Channel::ALL {
        let mut cuts: Vec<Timestamp> = (0..rng.gen_range(0..3) * 2).map(|_| at(rng)).collect();
        cuts.sort();
        cuts.dedup();
        for pair in cuts.chunks_exact(2) {
            if pair[0] < pair[1] {
                day.coverage.push(CoverageInterval { channel, start: pair[0], end: pair[1] });
            }
        }
    }
    day
}

/// Independent partition check: sorted, adjacent, covering `[start, end)`.
pub fn partition_violations(track: &Track, window: &DayWindow) -> Vec<String> {
    let mut errs = Vec::new();
    let segs = &track.segments;
    if segs.is_empty() {
        errs.push("no segments".to_string());
        return errs;
    }
    if segs[0].start != window.start {
        errs.push(format!("starts at {} not {}", segs[0].start, window.start));
    }
    if segs[segs.len() - 1].end != window.end {
        errs.push(format!("ends at {} not {}", segs[segs.len() - 1].end, window.end));
    }
    for (i, s) in segs.iter().enumerate() {
        if s.end <= s.start {
            errs.push(format!("segment {i} empty or reversed"));
        }
        if i + 1 < segs.len() && s.end != segs[i + 1].start {
            errs.push(format!("segment {i} not adjacent to {}", i + 1));
        }
    }
    errs
}

fn covered_by(track: &Track, kind: SegmentKind, start: Timestamp, end: Timestamp) -> bool {
    // union of `kind` segments must contain [start, end)
    let mut cursor = start;
    for s in track.segments.iter().filter(|s| s.kind == kind) {
        if s.start <= cursor && s.end > cursor {
            cursor = s.end;
        }
        if cursor >= end {
            return true;
        }
    }
    cursor >= end
}

/// Every input event must be visible on its bar.
pub fn attribution_violations(day: &DayLog, timeline: &Timeline) -> Vec<String> {
    let mut errs = Vec::new();
    for img in &day.images {
        let inside = timeline
            .visual
            .segments
            .iter()
            .any(|s| s.kind == SegmentKind::Present && s.start <= img.t && img.t <= s.end);
        if !inside {
            errs.push(format!("image {} not in a present segment", img.t));
        }
    }
    for ev in day.events.iter().filter(|e| e.channel == ContextChannel::Call) {
        let end = Timestamp::from_millis(ev.t.as_millis() + 1000 * ev.duration_s.max(1) as i64).min(day.window.end);
        if !covered_by(&timeline.call, SegmentKind::Call, ev.t, end) {
            errs.push(format!("call {} not covered by call segments", ev.t));
        }
    }
    let sms: Vec<(Timestamp, Direction)> =
        day.events.iter().filter(|e| e.channel == ContextChannel::Sms).map(|e| (e.t, e.direction)).collect();
    let markers: Vec<(Timestamp, Direction)> =
        timeline.sms.markers.iter().flatten().map(|m| (m.t, m.direction)).collect();
    if sms != markers {
        errs.push(format!("{} sms but {} markers", sms.len(), markers.len()));
    }
    for sp in &[&timeline.visual, &timeline.location, &timeline.call, &timeline.sms] {
        errs.extend(partition_violations(sp, &day.window).into_iter().map(|e| format!("{}: {e}", sp.channel)));
    }
    errs
}

/// Operations applied in the reconstruction state machine test.
#[derive(Clone, Debug)]
pub enum SessionOp {
    Append(EpisodeInput),
    Amend(EpisodeInput),
    Finalize,
}

pub fn random_session_op(rng: &mut StdRng, window: &DayWindow, last_end: Option<Timestamp>) -> SessionOp {
    let anchor = last_end.unwrap_or(window.start).as_millis();
    let start = match rng.gen_range(0..4) {
        0 => anchor,
        1 => anchor + rng.gen_range(0..3_600_000),
        2 => anchor - rng.gen_range(1..3_600_000),
        _ => window.start.as_millis() + rng.gen_range(-600_000..window.duration_ms() + 600_000),
    };
    let len = if rng.gen_bool(0.05) { -rng.gen_range(0..60_000) } else { rng.gen_range(60_000..7_200_000) };
    let mut affect = std::collections::BTreeMap::new();
    for scale in ["valence", "arousal", "tired"] {
        if rng.gen_bool(0.5) {
            affect.insert(scale.to_string(), rng.gen_range(0..=8));
        }
    }
    let activity = if rng.gen_bool(0.05) { " ".to_string() } else { format!("activity {}", rng.gen_range(0..100)) };
    let input = EpisodeInput {
        start: Timestamp::from_millis(start),
        end: Timestamp::from_millis(start + len),
        activity,
        notes: String::new(),
        affect,
    };
    match rng.gen_range(0..20) {
        0 => SessionOp::Finalize,
        1..=4 => SessionOp::Amend(input),
        _ => SessionOp::Append(input),
    }
}

/// Reference model: predicts the outcome of an operation from the plain
/// facts of the session (finalized flag, episode ends) without the store.
pub fn expected_outcome(
    finalized: bool,
    ends: &[(Timestamp, Timestamp)],
    window: &DayWindow,
    op: &SessionOp,
) -> Result<(), &'static str> {
    if finalized {
        return Err("SessionFinalized");
    }
    let (input, previous_end) = match op {
        SessionOp::Finalize => return Ok(()),
        SessionOp::Append(input) => (input, ends.last().map(|e| e.1)),
        SessionOp::Amend(input) => {
            if ends.is_empty() {
                return Err("EmptySession");
            }
            (input, if ends.len() >= 2 { Some(ends[ends.len() - 2].1) } else { None })
        }
    };
    let ratings_ok = input.affect.values().all(|r| (1..=7).contains(r));
    if input.start >= input.end || input.activity.trim().is_empty() || !ratings_ok {
        return Err("InvalidEpisode");
    }
    if input.start < window.start || input.end > window.end {
        return Err("OutOfDay");
    }
    if let Some(prev) = previous_end {
        if input.start < prev {
            return Err("ChronologyViolation");
        }
    }
    Ok(())
}

pub fn error_name(err: &ReconstructionError) -> &'static str {
    match err {
        ReconstructionError::ChronologyViolation { .. } => "ChronologyViolation",
        ReconstructionError::OutOfDay { .. } => "OutOfDay",
        ReconstructionError::SessionFinalized => "SessionFinalized",
        ReconstructionError::EmptySession => "EmptySession",
        ReconstructionError::InvalidEpisode { .. } => "InvalidEpisode",
    }
}
