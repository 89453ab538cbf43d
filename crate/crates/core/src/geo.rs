//! Great-circle distance, stay points, transitions and place merging.

use serde::{Deserialize, Serialize};

use crate::model::{CoverageInterval, GpsFix, Timestamp};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoParams {
    pub radius_m: f64,
    pub min_dwell_s: f64,
    pub earth_radius_m: f64,
    pub merge_radius_m: f64,
}

impl Default for GeoParams {
    fn default() -> Self {
        GeoParams { radius_m: 50.0, min_dwell_s: 300.0, earth_radius_m: EARTH_RADIUS_M, merge_radius_m: 50.0 }
    }
}

impl GeoParams {
    pub fn validate(&self) -> Result<(), GeoError> {
        let fields = [
            ("radius_m", self.radius_m),
            ("min_dwell_s", self.min_dwell_s),
            ("earth_radius_m", self.earth_radius_m),
            ("merge_radius_m", self.merge_radius_m),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeoError::InvalidParam { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("fixes not strictly sorted at index {index}")]
    UnsortedInput { index: usize },
    #[error("parameter {name} must be positive, got {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("invalid circle range")]
    InvalidRange,
}

/// Haversine distance in meters on a sphere of radius `earth_radius_m`.
pub fn haversine_with_radius(a: (f64, f64), b: (f64, f64), earth_radius_m: f64) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * earth_radius_m * h.sqrt().min(1.0).asin()
}

/// Haversine distance in meters between `(lat, lon)` pairs given in degrees.
pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    haversine_with_radius(a, b, EARTH_RADIUS_M)
}

fn fix_distance(a: &GpsFix, b: &GpsFix, params: &GeoParams) -> f64 {
    haversine_with_radius((a.lat, a.lon), (b.lat, b.lon), params.earth_radius_m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StayPoint {
    pub centroid_lat: f64,
    pub centroid_lon: f64,
    pub arrival: Timestamp,
    pub departure: Timestamp,
    /// Inclusive index span `[first, last]` into the day's fix list.
    pub member_range: [usize; 2],
}

impl StayPoint {
    pub fn dwell_ms(&self) -> i64 {
        self.departure.millis_since(self.arrival)
    }

    pub fn dwell_s(&self) -> f64 {
        self.dwell_ms() as f64 / 1000.0
    }
}

fn dwell_exceeds(ms: i64, params: &GeoParams) -> bool {
    ms as f64 > params.min_dwell_s * 1000.0
}

/// Anchor-sweep stay point detection.
///
/// From anchor `i`, extend while fixes stay within `radius_m` of the anchor.
/// The run is a stay point when its span strictly exceeds `min_dwell_s`; the
/// sweep then resumes at the first fix outside the radius, otherwise at `i+1`.
pub fn detect_stay_points(fixes: &[GpsFix], params: &GeoParams) -> Result<Vec<StayPoint>, GeoError> {
    if let Some(index) = (1..fixes.len()).find(|&i| fixes[i].t <= fixes[i - 1].t) {
        return Err(GeoError::UnsortedInput { index });
    }
    let n = fixes.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let anchor = &fixes[i];
        let mut j = i + 1;
        while j < n && fix_distance(anchor, &fixes[j], params) <= params.radius_m {
            j += 1;
        }
        let k = j - 1;
        if dwell_exceeds(fixes[k].t.millis_since(anchor.t), params) {
            let members = &fixes[i..=k];
            let count = members.len() as f64;
            out.push(StayPoint {
                centroid_lat: members.iter().map(|f| f.lat).sum::<f64>() / count,
                centroid_lon: members.iter().map(|f| f.lon).sum::<f64>() / count,
                arrival: anchor.t,
                departure: fixes[k].t,
                member_range: [i, k],
            });
            i = j;
        } else {
            i += 1;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub start: Timestamp,
    pub end: Timestamp,
    /// Index of the stay point left, if the transition follows one.
    pub from_stay: Option<usize>,
    pub to_stay: Option<usize>,
    /// Place indices, filled once places are merged.
    pub from_place: Option<usize>,
    pub to_place: Option<usize>,
}

/// Movement intervals between stay points, restricted to location coverage.
///
/// Each gap (coverage edge or stay departure to the next arrival or coverage
/// edge) is cut by the coverage intervals; every covered piece holding at
/// least one fix outside all stay points becomes a transition.
pub fn derive_transitions(
    fixes: &[GpsFix],
    stay_points: &[StayPoint],
    coverage: &[CoverageInterval],
) -> Vec<Transition> {
    let mut cov: Vec<(Timestamp, Timestamp)> = coverage.iter().map(|c| (c.start, c.end)).collect();
    cov.sort();
    let (Some(cov_start), Some(cov_end)) = (cov.iter().map(|c| c.0).min(), cov.iter().map(|c| c.1).max()) else {
        return Vec::new();
    };

    let mut member = vec![false; fixes.len()];
    for sp in stay_points {
        for m in &mut member[sp.member_range[0]..=sp.member_range[1]] {
            *m = true;
        }
    }
    let free: Vec<Timestamp> = fixes.iter().zip(&member).filter(|(_, m)| !**m).map(|(f, _)| f.t).collect();

    // Gaps as (start, end, from_stay, to_stay).
    let mut gaps = Vec::with_capacity(stay_points.len() + 1);
    let mut cursor = (cov_start, None);
    for (idx, sp) in stay_points.iter().enumerate() {
        gaps.push((cursor.0, sp.arrival, cursor.1, Some(idx)));
        cursor = (sp.departure, Some(idx));
    }
    gaps.push((cursor.0, cov_end.max(cursor.0), cursor.1, None));

    let mut out = Vec::new();
    for (gap_start, gap_end, from_stay, to_stay) in gaps {
        for &(c_start, c_end) in &cov {
            let start = gap_start.max(c_start);
            let end = gap_end.min(c_end);
            if start >= end {
                continue;
            }
            let lo = free.partition_point(|t| *t < start);
            if lo < free.len() && free[lo] < end {
                out.push(Transition { start, end, from_stay, to_stay, from_place: None, to_place: None });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub centroid_lat: f64,
    pub centroid_lon: f64,
    pub total_dwell_s: f64,
    /// Indices into the stay point list, ascending.
    pub visits: Vec<usize>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-linkage clustering of stay points whose centroids lie within
/// `merge_radius_m`. Places are ordered by total dwell, longest first, ties
/// by earliest arrival.
pub fn merge_places(stay_points: &[StayPoint], params: &GeoParams) -> Vec<Place> {
    let n = stay_points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for a in 0..n {
        for b in a + 1..n {
            let d = haversine_with_radius(
                (stay_points[a].centroid_lat, stay_points[a].centroid_lon),
                (stay_points[b].centroid_lat, stay_points[b].centroid_lon),
                params.earth_radius_m,
            );
            if d <= params.merge_radius_m {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }

    let mut places: Vec<(Place, i64, Timestamp)> = groups
        .into_iter()
        .map(|visits| {
            let total_ms: i64 = visits.iter().map(|&v| stay_points[v].dwell_ms()).sum();
            let weight = |v: usize| stay_points[v].dwell_ms() as f64;
            let (lat, lon) = visits.iter().fold((0.0, 0.0), |(lat, lon), &v| {
                (lat + weight(v) * stay_points[v].centroid_lat, lon + weight(v) * stay_points[v].centroid_lon)
            });
            let first_arrival = visits.iter().map(|&v| stay_points[v].arrival).min().unwrap();
            let place = Place {
                centroid_lat: lat / total_ms as f64,
                centroid_lon: lon / total_ms as f64,
                total_dwell_s: total_ms as f64 / 1000.0,
                visits,
            };
            (place, total_ms, first_arrival)
        })
        .collect();
    places.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    places.into_iter().map(|(p, _, _)| p).collect()
}

/// Maps each stay point index to the index of the place holding it.
pub fn place_of_stay(places: &[Place], stay_count: usize) -> Vec<usize> {
    let mut out = vec![usize::MAX; stay_count];
    for (p, place) in places.iter().enumerate() {
        for &v in &place.visits {
            out[v] = p;
        }
    }
    out
}

/// Circle radius whose area grows linearly with dwell above `r_min_px`.
pub fn circle_radius_px(dwell_s: f64, max_dwell_s: f64, r_min_px: f64, r_max_px: f64) -> Result<f64, GeoError> {
    let ok = dwell_s > 0.0 && dwell_s <= max_dwell_s && r_min_px >= 0.0 && r_min_px < r_max_px && r_max_px.is_finite();
    if !ok {
        return Err(GeoError::InvalidRange);
    }
    Ok(r_min_px + (r_max_px - r_min_px) * (dwell_s / max_dwell_s).sqrt())
}

/// Stay points, transitions and places computed for one day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayAnalysis {
    pub params: GeoParams,
    pub stay_points: Vec<StayPoint>,
    pub transitions: Vec<Transition>,
    pub places: Vec<Place>,
}

pub fn analyze(fixes: &[GpsFix], location_coverage: &[CoverageInterval], params: &GeoParams) -> Result<DayAnalysis, GeoError> {
    params.validate()?;
    let stay_points = detect_stay_points(fixes, params)?;
    let places = merge_places(&stay_points, params);
    let owner = place_of_stay(&places, stay_points.len());
    let mut transitions = derive_transitions(fixes, &stay_points, location_coverage);
    for tr in &mut transitions {
        tr.from_place = tr.from_stay.map(|s| owner[s]);
        tr.to_place = tr.to_stay.map(|s| owner[s]);
    }
    Ok(DayAnalysis { params: *params, stay_points, transitions, places })
}
