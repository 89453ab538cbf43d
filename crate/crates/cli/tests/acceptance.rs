//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

use common::{Server, DATE};
use footprint_core::geo::{detect_stay_points, haversine_m, GeoParams};
use footprint_core::model::{validate_day, GpsFix, Timestamp};
use footprint_core::pipeline::{build_artifacts, PipelineParams};
use footprint_core::reconstruction::{EpisodeInput, ReconstructionSession, SessionState};
use footprint_core::timeline::SegmentKind;
use footprint_core::{DayWindow, Timeline};
use footprint_service::Store;
use footprint_testkit as kit;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;
/// Episode `(id, start, end, activity)` rows plus the session state.
type SessionShape = (Vec<(String, Timestamp, Timestamp, String)>, SessionState);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn stay_point_oracle() -> Outcome {
    let params = GeoParams::default();
    let mut rng = StdRng::seed_from_u64(0x5747);
    let traces: Vec<Vec<GpsFix>> = (0..1000).map(|_| kit::random_trace(&mut rng, 200)).collect();
    let started = Instant::now();
    let mut mismatches = 0;
    let mut found = 0;
    for fixes in &traces {
        let got: Vec<(usize, usize)> = detect_stay_points(fixes, &params)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|sp| (sp.member_range[0], sp.member_range[1]))
            .collect();
        found += got.len();
        if got != kit::brute_force_stay_points(fixes, params.radius_m, params.min_dwell_s) {
            mismatches += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(mismatches == 0, || format!("{mismatches} of 1000 traces differ from the oracle"))?;
    check(found > 0, || "no stay points in any trace".into())?;
    check(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("1000 traces, {found} stay points, 0 mismatches, {secs:.2} s"))
}

fn threshold_fidelity() -> Outcome {
    let cluster = |span_s: i64| -> Vec<GpsFix> {
        let t0 = Timestamp::parse("2013-05-01T09:00:00Z").unwrap();
        let mut fixes: Vec<GpsFix> = (0..=span_s / 30)
            .map(|k| GpsFix::new(t0.plus_secs(k * 30), 32.65 + kit::north_deg(((k % 3) as f64) * 5.0), -16.9167))
            .collect();
        fixes.last_mut().unwrap().t = t0.plus_secs(span_s);
        // leave the cluster
        fixes.push(GpsFix::new(t0.plus_secs(span_s + 60), 32.65 + kit::north_deg(500.0), -16.9167));
        fixes
    };
    let params = GeoParams::default();
    let at_300 = detect_stay_points(&cluster(300), &params).map_err(|e| e.to_string())?.len();
    let at_301 = detect_stay_points(&cluster(301), &params).map_err(|e| e.to_string())?.len();
    check(at_300 == 0, || format!("300 s cluster gave {at_300} stay points"))?;
    check(at_301 == 1, || format!("301 s cluster gave {at_301} stay points"))?;
    Ok("300 s -> 0 stay points, 301 s -> 1".into())
}

fn haversine() -> Outcome {
    let expected = kit::R_EARTH * std::f64::consts::PI / 180.0;
    let d = haversine_m((0.0, 0.0), (0.0, 1.0));
    check((d - 111_194.9).abs() <= 0.1, || format!("equator degree {d} m"))?;
    check((d - expected).abs() <= 1e-6, || format!("equator degree {d} m vs closed form {expected} m"))?;
    let mut rng = StdRng::seed_from_u64(0xa7e5);
    let mut point = || (rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0));
    for i in 0..10_000 {
        let (a, b, c) = (point(), point(), point());
        let ab = haversine_m(a, b);
        check(ab == haversine_m(b, a), || format!("triple {i}: not symmetric"))?;
        check(haversine_m(a, a) == 0.0, || format!("triple {i}: d(a,a) != 0"))?;
        check(ab >= 0.0, || format!("triple {i}: negative"))?;
        check(ab <= haversine_m(a, c) + haversine_m(c, b) + 1e-6, || format!("triple {i}: triangle inequality"))?;
    }
    Ok(format!("equator 1 deg = {d:.3} m, 10000 triples satisfy the metric axioms"))
}

fn track_partition() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x7a11);
    let mut violations = Vec::new();
    let mut segments = 0;
    for i in 0..500 {
        let day = kit::random_day(&mut rng);
        if !validate_day(&day).is_empty() {
            violations.push(format!("day {i}: generator produced an invalid day"));
            continue;
        }
        let art = build_artifacts(day.clone(), &PipelineParams::default(), vec![]).map_err(|e| format!("day {i}: {e}"))?;
        segments += art.timeline.tracks().iter().map(|t| t.segments.len()).sum::<usize>();
        violations.extend(kit::attribution_violations(&day, &art.timeline).into_iter().map(|v| format!("day {i}: {v}")));
    }
    check(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(format!("500 days, {segments} segments, 0 violations"))
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = common::ingest_fixture(dir.path());
        check(out.status.success(), || format!("ingest failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    }
    for doc in ["timeline.json", "analysis.json", "daylog.json", "summary.json"] {
        let path = |root: &Path| root.join("days").join(DATE).join(doc);
        check(read(&path(a.path())) == read(&path(b.path())), || format!("{doc} differs between runs"))?;
    }
    Ok("two ingests produce byte-identical timeline, analysis, daylog and summary".into())
}

fn reconstruction_state_machine() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5e55);
    let window = DayWindow::new(kit::date(), 0);
    let now = Timestamp::parse("2013-05-02T09:00:00Z").unwrap();
    let (mut ops, mut rejected) = (0usize, 0usize);
    for seq in 0..10_000 {
        let mut session = ReconstructionSession::new("s", window);
        for _ in 0..rng.gen_range(1..=30) {
            let ends: Vec<_> = session.episodes.iter().map(|e| (e.start, e.end)).collect();
            let op = kit::random_session_op(&mut rng, &window, ends.last().map(|e| e.1));
            let expected = kit::expected_outcome(session.state == SessionState::Finalized, &ends, &window, &op);
            let before = session.clone();
            let got = match &op {
                kit::SessionOp::Append(i) => session.append_episode(i.clone(), now).map(|_| ()),
                kit::SessionOp::Amend(i) => session.amend_last_episode(i.clone(), now).map(|_| ()),
                kit::SessionOp::Finalize => session.finalize().map(|_| ()),
            };
            ops += 1;
            let got = got.map_err(|e| kit::error_name(&e));
            check(got == expected, || format!("sequence {seq}: {op:?} gave {got:?}, model says {expected:?}"))?;
            if got.is_err() {
                rejected += 1;
                check(session == before, || format!("sequence {seq}: rejected op changed the session"))?;
            }
            let eps = &session.episodes;
            let ordered = eps.windows(2).all(|w| w[0].end <= w[1].start);
            let inside = eps.iter().all(|e| e.start < e.end && e.start >= window.start && e.end <= window.end);
            check(ordered && inside, || format!("sequence {seq}: overlapping or out-of-order episodes"))?;
            session.check_invariants().map_err(|e| format!("sequence {seq}: {e}"))?;
        }
    }
    Ok(format!("10000 sequences, {ops} operations, {rejected} rejections all match declared errors"))
}

fn end_to_end_fixture() -> Outcome {
    let store = tempfile::tempdir().unwrap();
    let out = common::ingest_fixture(store.path());
    check(out.status.success(), || format!("ingest exit {:?}", out.status.code()))?;
    let table = common::stdout(&out);
    for row in ["stay points       3", "places            3", "transitions       2", "images           40", "events            3"] {
        check(table.contains(row), || format!("ingest table lacks {row:?}:\n{table}"))?;
    }
    let summary = common::run(&["summarize", "--date", DATE, "--store", store.path().to_str().unwrap()]);
    check(summary.status.success(), || "summarize failed".into())?;
    check(common::stdout(&summary) == common::golden_summary(), || format!("summary differs from golden:\n{}", common::stdout(&summary)))?;

    let timeline: Timeline = serde_json::from_slice(&read(&store.path().join("days").join(DATE).join("timeline.json"))).unwrap();
    check(timeline.location.count(SegmentKind::Transition) == 2, || "transition segments != 2".into())?;
    check(timeline.call.count(SegmentKind::Call) == 1, || "call segments != 1".into())?;
    check(timeline.sms.markers.as_ref().map_or(0, Vec::len) == 2, || "sms markers != 2".into())?;

    let server = Server::start(store.path());
    let uri = format!("/api/days/{DATE}/window?from={DATE}T10:00:00%2B01:00&to={DATE}T14:00:00%2B01:00");
    let (status, body) = server.request("GET", &uri, None);
    check(status == 200, || format!("window query status {status}: {body}"))?;
    let v: Value = serde_json::from_str(&body).unwrap();
    let first = v["places"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| haversine_m((p["centroid_lat"].as_f64().unwrap(), p["centroid_lon"].as_f64().unwrap()), (32.65, -16.9167)) < 10.0)
        .cloned()
        .ok_or("09:00-12:00 place missing from window")?;
    let dwell = first["window_dwell_s"].as_f64().unwrap();
    // 10:00 to the 12:00 departure
    check(dwell == 7200.0, || format!("windowed dwell {dwell} s"))?;
    let frames = v["frames"].as_array().unwrap().len();
    check(frames == 15, || format!("{frames} frames in window"))?;
    server.kill();
    Ok(format!("golden summary matches; window [10:00,14:00) dwell {dwell} s, {frames} frames"))
}

/// The scripted session: each step is one persisted mutation.
fn script() -> Vec<(&'static str, &'static str, Option<String>)> {
    let ep = |s: &str, e: &str, what: &str| {
        Some(format!(r#"{{"start":"{DATE}T{s}:00Z","end":"{DATE}T{e}:00Z","activity":"{what}","affect":{{"valence":4}}}}"#))
    };
    vec![
        ("POST", "", None),
        ("POST", "/episodes", ep("07:00", "08:00", "breakfast")),
        ("POST", "/episodes", ep("08:00", "10:00", "office")),
        ("PUT", "/episodes/last", ep("08:00", "10:30", "office")),
        ("POST", "/episodes", ep("11:00", "12:00", "walk")),
        ("POST", "/episodes", ep("12:30", "13:00", "lunch")),
        ("PUT", "/episodes/last", ep("12:15", "13:15", "lunch")),
        ("POST", "/finalize", None),
    ]
}

/// Session state after the first `k` script steps, from the in-memory model.
fn expected_after(k: usize, window: DayWindow) -> Option<SessionShape> {
    if k == 0 {
        return None;
    }
    let mut s = ReconstructionSession::new("x", window);
    let now = Timestamp::from_millis(0);
    for (method, suffix, body) in script().into_iter().take(k).skip(1) {
        let input = || serde_json::from_str::<EpisodeInput>(body.as_deref().unwrap()).unwrap();
        match (method, suffix) {
            ("POST", "/episodes") => s.append_episode(input(), now).map(|_| ()).unwrap(),
            ("PUT", _) => s.amend_last_episode(input(), now).map(|_| ()).unwrap(),
            _ => s.finalize().map(|_| ()).unwrap(),
        }
    }
    Some((s.episodes.iter().map(|e| (e.episode_id.clone(), e.start, e.end, e.activity.clone())).collect(), s.state))
}

fn debris(root: &Path, found: &mut Vec<String>) {
    for entry in std::fs::read_dir(root).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.contains(".tmp-") || name.starts_with(".staging-") || name.starts_with(".retired-") {
            found.push(entry.path().display().to_string());
        }
        if entry.file_type().unwrap().is_dir() {
            debris(&entry.path(), found);
        }
    }
}

/// Reopens the store as a restarted service would and checks every invariant.
fn store_state(root: &Path) -> Result<Option<SessionShape>, String> {
    let store = Store::open(root).map_err(|e| e.to_string())?;
    let mut left = Vec::new();
    debris(root, &mut left);
    check(left.is_empty(), || format!("debris after recovery: {left:?}"))?;
    let date = kit::date();
    let day = store.daylog(date).map_err(|e| e.to_string())?;
    check(validate_day(&day).is_empty(), || "stored day fails validation".into())?;
    let timeline: Timeline = store.read_doc(date, "timeline.json").map_err(|e| e.to_string())?;
    for track in timeline.tracks() {
        track.check_partition(&day.window).map_err(|e| e.to_string())?;
    }
    let ids = store.session_ids(date).map_err(|e| e.to_string())?;
    check(ids.len() <= 1, || format!("sessions {ids:?}"))?;
    let Some(id) = ids.first() else { return Ok(None) };
    let s = store.load_session(date, id).map_err(|e| e.to_string())?;
    Ok(Some((s.episodes.iter().map(|e| (e.episode_id.clone(), e.start, e.end, e.activity.clone())).collect(), s.state)))
}

fn crash_safety() -> Outcome {
    let steps = script();
    let params = PipelineParams::default();
    let loaded = footprint_service::load_manifest(&common::manifest()).map_err(|e| e.to_string())?;
    let window = loaded.manifest.window();
    let mut kills = 0;
    for k in 0..=steps.len() {
        for in_flight in [false, true] {
            if in_flight && k == steps.len() {
                continue;
            }
            let dir = tempfile::tempdir().unwrap();
            footprint_service::ingest_loaded(&Store::open(dir.path()).unwrap(), &loaded, &params, false).map_err(|e| e.to_string())?;
            let server = Server::start(dir.path());
            let mut session = String::new();
            for (i, (method, suffix, body)) in steps.iter().enumerate().take(k) {
                let path = format!("/api/days/{DATE}/sessions{session}{suffix}");
                let (status, reply) = server.request(method, &path, body.as_deref());
                check(status == 200 || status == 201, || format!("step {i} status {status}: {reply}"))?;
                if i == 0 {
                    let v: Value = serde_json::from_str(&reply).unwrap();
                    session = format!("/{}", v["session_id"].as_str().unwrap());
                }
            }
            if in_flight {
                let (method, suffix, body) = &steps[k];
                let _stream = server.fire(method, &format!("/api/days/{DATE}/sessions{session}{suffix}"), body.as_deref());
                server.kill();
            } else {
                server.kill();
            }
            kills += 1;
            let state = store_state(dir.path()).map_err(|e| format!("kill after {k} steps: {e}"))?;
            let ok = state == expected_after(k, window) || (in_flight && state == expected_after(k + 1, window));
            check(ok, || format!("kill after {k} steps (in flight {in_flight}): state {state:?}"))?;
        }
    }
    Ok(format!("{kills} kills across {} mutations, every restart consistent", steps.len()))
}

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("stay-point oracle equivalence", stay_point_oracle),
        ("threshold fidelity", threshold_fidelity),
        ("haversine", haversine),
        ("track partition suite", track_partition),
        ("determinism", determinism),
        ("reconstruction state machine", reconstruction_state_machine),
        ("end-to-end fixture", end_to_end_fixture),
        ("crash-safety", crash_safety),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
