//! Nonempty compact subsets of the plane and the Hausdorff metric between them.
//!
//! Three kinds cover every set the laboratory produces: finite point clouds,
//! closed discs centred at the origin, and convex polygons. Polygons with one
//! or two vertices stand for a point or a segment (hulls of collinear data).
//!
//! Distances are exact up to rounding. A directed sup-distance from a region
//! (disc or polygon) to a cloud is found by evaluating the nearest-point
//! distance at every candidate maximizer: region vertices, Voronoi vertices
//! inside the region, Voronoi edges crossing the boundary, and for a disc the
//! antipode of each cloud point.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};

/// Largest imaginary part tolerated by [`extremes_of_real_sets`].
pub const REAL_TOL: f64 = 1e-12;
/// Relative tolerance for collinearity when building hulls.
const HULL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetFile", into = "SetFile")]
pub enum CompactSet {
    PointCloud(Vec<Complex64>),
    /// Closed disc of the given radius centred at 0.
    Disc(f64),
    /// Vertices in counterclockwise order.
    ConvexPolygon(Vec<Complex64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetFile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[f64; 2]>>,
}

impl TryFrom<SetFile> for CompactSet {
    type Error = Error;

    fn try_from(file: SetFile) -> Result<Self> {
        let points = |file: &SetFile| -> Result<Vec<Complex64>> {
            file.points
                .as_ref()
                .map(|p| p.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                .ok_or_else(|| Error::Parse(format!("set of kind {:?} needs \"points\"", file.kind)))
        };
        match file.kind.as_str() {
            "disc" => {
                if file.points.is_some() {
                    return Err(Error::Parse("a disc takes \"radius\", not \"points\"".into()));
                }
                let r = file.radius.ok_or_else(|| Error::Parse("disc needs \"radius\"".into()))?;
                CompactSet::disc(r)
            }
            "point-cloud" | "convex-polygon" => {
                if file.radius.is_some() {
                    return Err(Error::Parse(format!("set of kind {:?} takes no radius", file.kind)));
                }
                let p = points(&file)?;
                if file.kind == "point-cloud" {
                    CompactSet::point_cloud(p)
                } else {
                    CompactSet::convex_polygon(p)
                }
            }
            other => Err(Error::Parse(format!(
                "unknown set kind {other:?} (expected point-cloud, disc or convex-polygon)"
            ))),
        }
    }
}

impl From<CompactSet> for SetFile {
    fn from(set: CompactSet) -> Self {
        let pts = |p: Vec<Complex64>| Some(p.iter().map(|z| [z.re, z.im]).collect());
        match set {
            CompactSet::PointCloud(p) => SetFile {
                kind: "point-cloud".into(),
                radius: None,
                points: pts(p),
            },
            CompactSet::Disc(r) => SetFile {
                kind: "disc".into(),
                radius: Some(r),
                points: None,
            },
            CompactSet::ConvexPolygon(p) => SetFile {
                kind: "convex-polygon".into(),
                radius: None,
                points: pts(p),
            },
        }
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    re: f64,
    im: f64,
}

fn check_finite(points: &[Complex64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    if points.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument("set points must be finite".into()));
    }
    Ok(())
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

impl CompactSet {
    pub fn point_cloud(points: Vec<Complex64>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self::PointCloud(points))
    }

    pub fn disc(radius: f64) -> Result<Self> {
        if radius < 0.0 || radius.is_nan() {
            return Err(Error::NegativeRadius(radius));
        }
        if !radius.is_finite() {
            return Err(Error::InvalidArgument("disc radius must be finite".into()));
        }
        Ok(Self::Disc(radius))
    }

    /// Validates a polygon: one point, two distinct points, or at least three
    /// vertices in strictly convex counterclockwise order.
    pub fn convex_polygon(vertices: Vec<Complex64>) -> Result<Self> {
        check_finite(&vertices)?;
        let n = vertices.len();
        match n {
            1 => {}
            2 => {
                if vertices[0] == vertices[1] {
                    return Err(Error::InvalidArgument("segment endpoints coincide".into()));
                }
            }
            _ => {
                let mut turning = 0.0;
                for i in 0..n {
                    let a = vertices[(i + 1) % n] - vertices[i];
                    let b = vertices[(i + 2) % n] - vertices[(i + 1) % n];
                    if cross(a, b) <= 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "polygon is not strictly convex counterclockwise at vertex {}",
                            (i + 1) % n
                        )));
                    }
                    turning += (b / a).arg();
                }
                if (turning - 2.0 * PI).abs() > 1e-6 {
                    return Err(Error::InvalidArgument("polygon winds more than once".into()));
                }
            }
        }
        Ok(Self::ConvexPolygon(vertices))
    }

    /// Convex hull of `points` as a polygon (monotone chain).
    pub fn convex_hull(points: &[Complex64]) -> Result<Self> {
        check_finite(points)?;
        Self::convex_polygon(hull_vertices(points))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::PointCloud(_) => "point-cloud",
            Self::Disc(_) => "disc",
            Self::ConvexPolygon(_) => "convex-polygon",
        }
    }

    /// Cloud points or polygon vertices; empty for a disc.
    pub fn points(&self) -> &[Complex64] {
        match self {
            Self::PointCloud(p) | Self::ConvexPolygon(p) => p,
            Self::Disc(_) => &[],
        }
    }

    /// Distance from `z` to the set.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        match self {
            Self::PointCloud(p) => p.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min),
            Self::Disc(r) => (z.norm() - r).max(0.0),
            Self::ConvexPolygon(v) => polygon_distance(v, z),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sets serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Point cloud from `re,im` rows; a header line is optional.
    pub fn from_csv(text: &str) -> Result<Self> {
        let has_header = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .is_some_and(|l| l.split(',').next().is_some_and(|f| f.trim().parse::<f64>().is_err()));
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut points = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("CSV: {e}")))?;
            if i == 0 && has_header {
                let names: Vec<&str> = record.iter().collect();
                if names != ["re", "im"] {
                    return Err(Error::Parse(format!("CSV header must be re,im, got {}", names.join(","))));
                }
                continue;
            }
            let row: CsvRow = record
                .deserialize(Some(&csv::StringRecord::from(vec!["re", "im"])))
                .map_err(|e| Error::Parse(format!("CSV line {}: {e}", i + 1)))?;
            points.push(Complex64::new(row.re, row.im));
        }
        Self::point_cloud(points)
    }

    /// `re,im` rows with a header; discs have no point list.
    pub fn to_csv(&self) -> Result<String> {
        if let Self::Disc(_) = self {
            return Err(Error::InvalidArgument("a disc has no CSV form".into()));
        }
        Ok(points_to_csv(self.points()))
    }

    /// Reads JSON, or a CSV cloud when the extension is `.csv`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::from_csv(&text)
        } else {
            Self::from_json(&text)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            self.to_csv()?
        } else {
            self.to_json() + "\n"
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub(crate) fn points_to_csv(points: &[Complex64]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["re", "im"]).expect("in-memory CSV");
    for z in points {
        writer
            .write_record([z.re.to_string(), z.im.to_string()])
            .expect("in-memory CSV");
    }
    String::from_utf8(writer.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
}

/// Strictly convex counterclockwise hull; one or two points when degenerate.
fn hull_vertices(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let scale = pts.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = HULL_TOL * scale * scale;
    let chain = |iter: &mut dyn Iterator<Item = &Complex64>| {
        let mut half: Vec<Complex64> = Vec::new();
        for &p in iter {
            while half.len() >= 2 {
                let k = half.len();
                if cross(half[k - 1] - half[k - 2], p - half[k - 2]) <= tol {
                    half.pop();
                } else {
                    break;
                }
            }
            half.push(p);
        }
        half.pop();
        half
    };
    let mut hull = chain(&mut pts.iter());
    hull.extend(chain(&mut pts.iter().rev()));
    if hull.len() < 3 {
        // all collinear: the two extreme points
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        return if (last - first).norm() > 0.0 { vec![first, last] } else { vec![first] };
    }
    hull
}

fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let s = ((z - a).re * d.re + (z - a).im * d.im) / len2;
    (z - (a + d * s.clamp(0.0, 1.0))).norm()
}

fn polygon_distance(v: &[Complex64], z: Complex64) -> f64 {
    match v.len() {
        1 => (z - v[0]).norm(),
        2 => segment_distance(z, v[0], v[1]),
        n => {
            let inside = (0..n).all(|i| cross(v[(i + 1) % n] - v[i], z - v[i]) >= 0.0);
            if inside {
                0.0
            } else {
                (0..n)
                    .map(|i| segment_distance(z, v[i], v[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Outward unit normals of the polygon edges `v_i → v_{i+1}` (cyclic).
///
/// A segment has the two opposite normals of its two orientations.
fn edge_normals(v: &[Complex64]) -> Vec<(usize, Complex64)> {
    let n = v.len();
    if n < 2 {
        return Vec::new();
    }
    (0..n)
        .map(|i| {
            let d = v[(i + 1) % n] - v[i];
            (i, Complex64::new(d.im, -d.re) / d.norm())
        })
        .collect()
}

/// Parameters `s ≥ 0` (or all real `s` when `line`) with `|p + s d| = r`.
fn circle_hits(p: Complex64, d: Complex64, r: f64, line: bool) -> Vec<f64> {
    let a = d.norm_sqr();
    if a == 0.0 {
        return Vec::new();
    }
    let b = p.re * d.re + p.im * d.im;
    let c = p.norm_sqr() - r * r;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let root = disc.sqrt();
    [(-b - root) / a, (-b + root) / a]
        .into_iter()
        .filter(|&s| line || s >= 0.0)
        .collect()
}

/// Points where the line `m + s d` crosses the segment `a b`.
fn line_segment_hit(m: Complex64, d: Complex64, a: Complex64, b: Complex64) -> Option<Complex64> {
    let e = b - a;
    let denom = cross(d, e);
    if denom == 0.0 {
        return None;
    }
    // m + s d = a + u e; crossing with d eliminates s
    let u = cross(d, m - a) / denom;
    (0.0..=1.0).contains(&u).then(|| a + e * u)
}

/// `sup_{z ∈ disc(r)} d(z, P)` for a convex polygon `P`.
fn disc_to_polygon(r: f64, v: &[Complex64]) -> f64 {
    let mut candidates = vec![Complex64::new(r, 0.0)];
    for &p in v {
        let norm = p.norm();
        candidates.push(if norm > 0.0 { -p * (r / norm) } else { Complex64::new(r, 0.0) });
    }
    let n = v.len();
    for (i, normal) in edge_normals(v) {
        candidates.push(normal * r);
        for vertex in [v[i], v[(i + 1) % n]] {
            for s in circle_hits(vertex, normal, r, false) {
                candidates.push(vertex + normal * s);
            }
        }
    }
    candidates
        .into_iter()
        .map(|z| polygon_distance(v, z))
        .fold(0.0, f64::max)
}

enum Region<'a> {
    Disc(f64),
    Polygon(&'a [Complex64]),
}

/// `sup_{z ∈ region} min_{p ∈ cloud} |z − p|`.
fn region_to_cloud(region: Region<'_>, cloud: &[Complex64]) -> f64 {
    let mut dt: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let mut ok = true;
    for z in cloud {
        if dt.insert(Point2::new(z.re, z.im)).is_err() {
            ok = false;
            break;
        }
    }
    let mut candidates: Vec<Complex64> = Vec::new();
    let to_c = |p: Point2<f64>| Complex64::new(p.x, p.y);

    let mut bisectors: Vec<(Complex64, Complex64)> = Vec::new();
    if ok {
        for edge in dt.undirected_edges() {
            let [p, q] = edge.positions();
            let (p, q) = (to_c(p), to_c(q));
            bisectors.push(((p + q) * 0.5, (q - p) * Complex64::new(0.0, 1.0)));
        }
        for face in dt.inner_faces() {
            candidates.push(to_c(face.circumcenter()));
        }
    } else {
        // coordinates spade rejects: fall back to all pairs
        for (i, &p) in cloud.iter().enumerate() {
            for &q in &cloud[i + 1..] {
                if p != q {
                    bisectors.push(((p + q) * 0.5, (q - p) * Complex64::new(0.0, 1.0)));
                }
            }
        }
        for (i, &a) in cloud.iter().enumerate() {
            for (j, &b) in cloud.iter().enumerate().skip(i + 1) {
                for &c in &cloud[j + 1..] {
                    if let Some(z) = circumcenter(a, b, c) {
                        candidates.push(z);
                    }
                }
            }
        }
    }

    match region {
        Region::Disc(r) => {
            candidates.retain(|z| z.norm() <= r);
            for &p in cloud {
                let norm = p.norm();
                candidates.push(if norm > 0.0 { -p * (r / norm) } else { Complex64::new(r, 0.0) });
            }
            for &(m, d) in &bisectors {
                for s in circle_hits(m, d, r, true) {
                    candidates.push(m + d * s);
                }
            }
        }
        Region::Polygon(v) => {
            candidates.retain(|&z| polygon_distance(v, z) == 0.0);
            candidates.extend_from_slice(v);
            let n = v.len();
            if n >= 2 {
                for &(m, d) in &bisectors {
                    for i in 0..n {
                        if let Some(z) = line_segment_hit(m, d, v[i], v[(i + 1) % n]) {
                            candidates.push(z);
                        }
                    }
                }
            }
        }
    }

    let nearest = |z: &Complex64| -> f64 {
        if ok {
            let handle = dt.nearest_neighbor(Point2::new(z.re, z.im)).expect("nonempty cloud");
            (z - to_c(handle.position())).norm()
        } else {
            cloud.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min)
        }
    };
    candidates.par_iter().map(nearest).reduce(|| 0.0, f64::max)
}

fn circumcenter(a: Complex64, b: Complex64, c: Complex64) -> Option<Complex64> {
    let (b, c) = (b - a, c - a);
    let d = 2.0 * cross(b, c);
    if d == 0.0 {
        return None;
    }
    let (b2, c2) = (b.norm_sqr(), c.norm_sqr());
    Some(a + Complex64::new(c.im * b2 - b.im * c2, b.re * c2 - c.re * b2) / d)
}

/// `sup_{a ∈ A} d(a, B)`.
pub fn directed_distance(a: &CompactSet, b: &CompactSet) -> f64 {
    use CompactSet::*;
    match (a, b) {
        (PointCloud(p), _) => p.par_iter().map(|&z| b.distance_to(z)).reduce(|| 0.0, f64::max),
        (Disc(r), Disc(s)) => (r - s).max(0.0),
        (Disc(r), ConvexPolygon(v)) => disc_to_polygon(*r, v),
        (Disc(r), PointCloud(p)) => region_to_cloud(Region::Disc(*r), p),
        // distance to a convex set is convex, so the sup sits at a vertex
        (ConvexPolygon(v), Disc(_) | ConvexPolygon(_)) => {
            v.iter().map(|&z| b.distance_to(z)).fold(0.0, f64::max)
        }
        (ConvexPolygon(v), PointCloud(p)) => region_to_cloud(Region::Polygon(v), p),
    }
}

fn check_nonempty(set: &CompactSet) -> Result<()> {
    match set {
        CompactSet::PointCloud(p) | CompactSet::ConvexPolygon(p) if p.is_empty() => Err(Error::EmptySet),
        _ => Ok(()),
    }
}

/// Hausdorff distance: the larger of the two directed sup-distances.
pub fn hausdorff_distance(a: &CompactSet, b: &CompactSet) -> Result<f64> {
    check_nonempty(a)?;
    check_nonempty(b)?;
    Ok(directed_distance(a, b).max(directed_distance(b, a)))
}

/// Whether every point of `a` lies within `eps` of `b` and vice versa.
pub fn epsilon_cover_check(a: &CompactSet, b: &CompactSet, eps: f64) -> Result<bool> {
    check_nonempty(a)?;
    check_nonempty(b)?;
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be non-negative, got {eps}")));
    }
    let covered = |x: &CompactSet, y: &CompactSet| match x {
        CompactSet::PointCloud(p) => p.iter().all(|&z| y.distance_to(z) <= eps),
        _ => directed_distance(x, y) <= eps,
    };
    Ok(covered(a, b) && covered(b, a))
}

/// Real extremes `(max, min)` of a set lying on the real line.
fn real_extremes(set: &CompactSet) -> Result<(f64, f64)> {
    match set {
        CompactSet::Disc(r) => {
            if *r > REAL_TOL {
                Err(Error::NotRealSet(*r))
            } else {
                Ok((0.0, 0.0))
            }
        }
        CompactSet::PointCloud(p) | CompactSet::ConvexPolygon(p) => {
            let worst = p.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            if worst >= REAL_TOL {
                return Err(Error::NotRealSet(worst));
            }
            let max = p.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let min = p.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            Ok((max, min))
        }
    }
}

/// Per-set maxima and minima of a sequence of real sets.
pub fn extremes_of_real_sets(sequence: &[CompactSet]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut maxima = Vec::with_capacity(sequence.len());
    let mut minima = Vec::with_capacity(sequence.len());
    for set in sequence {
        check_nonempty(set)?;
        let (max, min) = real_extremes(set)?;
        maxima.push(max);
        minima.push(min);
    }
    Ok((maxima, minima))
}

/// Max/min tracking along a sequence of real sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremesTrack {
    pub max: Vec<f64>,
    pub min: Vec<f64>,
    pub limit_max: f64,
    pub limit_min: f64,
    /// `|max A_n − max A| ≤ Δ_n` and `|min A_n − min A| ≤ Δ_n` for every n.
    pub within_delta: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub deltas: Vec<f64>,
    pub final_delta: f64,
    pub threshold: f64,
    /// The last third of the Δ sequence never rises by more than 10%.
    pub tail_non_increasing: bool,
    pub verdict: bool,
    /// Present when all sets and the limit lie on the real line.
    pub extremes: Option<ExtremesTrack>,
}

/// Allowed rise between consecutive tail values.
const TAIL_JITTER: f64 = 1.1;

/// Hausdorff distances of a sequence to its claimed limit, with a verdict.
pub fn convergence_harness(
    sequence: &[CompactSet],
    limit: &CompactSet,
    threshold: f64,
) -> Result<ConvergenceReport> {
    if sequence.len() < 2 {
        return Err(Error::EmptySequence);
    }
    let deltas = sequence
        .iter()
        .map(|set| hausdorff_distance(set, limit))
        .collect::<Result<Vec<_>>>()?;
    let final_delta = *deltas.last().expect("length ≥ 2");
    let tail_len = deltas.len().div_ceil(3).max(2);
    let tail = &deltas[deltas.len() - tail_len..];
    let tail_non_increasing = tail.windows(2).all(|w| w[1] <= TAIL_JITTER * w[0]);

    let extremes = match (extremes_of_real_sets(sequence), real_extremes(limit)) {
        (Ok((max, min)), Ok((limit_max, limit_min))) => {
            let within_delta = max
                .iter()
                .zip(&min)
                .zip(&deltas)
                .all(|((hi, lo), d)| (hi - limit_max).abs() <= d + REAL_TOL && (lo - limit_min).abs() <= d + REAL_TOL);
            Some(ExtremesTrack {
                max,
                min,
                limit_max,
                limit_min,
                within_delta,
            })
        }
        _ => None,
    };
    Ok(ConvergenceReport {
        verdict: final_delta < threshold && tail_non_increasing,
        deltas,
        final_delta,
        threshold,
        tail_non_increasing,
        extremes,
    })
}
