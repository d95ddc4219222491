//! Word enumeration, limit-set sampling and rendering.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufWriter;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circletree::{ArcGeom, CircleTree, NodeKind};
use crate::error::{Error, Result};
use crate::groups::GroupSpec;
use crate::moebius::{hyp_distance, Complex, DiskShape, ExtPoint, MapKind, MoebiusMap, RoundDisk, UhsPoint};
use crate::tolerances::TOL;

pub const DEFAULT_NODE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter {
    pub gen: usize,
    pub inverse: bool,
}

impl Letter {
    fn cancels(&self, other: &Letter) -> bool {
        self.gen == other.gen && self.inverse != other.inverse
    }
}

/// Freely reduced word; the map is the product of the letters left to right.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct Word {
    pub letters: Vec<Letter>,
}

impl Word {
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// `a b^-1 ...` using the group's labels.
    pub fn display(&self, g: &GroupSpec) -> String {
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|l| {
                let label = &g.generators[l.gen].label;
                if l.inverse {
                    format!("{label}^-1")
                } else {
                    label.clone()
                }
            })
            .collect();
        parts.join(" ")
    }
}

struct LetterData {
    letter: Letter,
    map: MoebiusMap,
    /// Ping-pong disk the letter maps into.
    disk: Option<RoundDisk>,
}

fn letters_of(g: &GroupSpec) -> Vec<LetterData> {
    let mut out = Vec::new();
    for (i, gen) in g.generators.iter().enumerate() {
        let pp = g.pingpong_for(i);
        out.push(LetterData { letter: Letter { gen: i, inverse: false }, map: gen.map, disk: pp.map(|p| p.target) });
        out.push(LetterData {
            letter: Letter { gen: i, inverse: true },
            map: gen.map.inverse(),
            disk: pp.map(|p| p.source),
        });
    }
    out
}

#[derive(Clone)]
struct Node {
    word: Word,
    map: MoebiusMap,
    /// Image of the last letter's disk under the prefix.
    disk: Option<RoundDisk>,
}

fn disk_radius(d: &RoundDisk) -> f64 {
    if d.is_bounded() {
        d.radius()
    } else {
        f64::INFINITY
    }
}

/// Depth-first iterator over freely reduced words and their maps.
pub struct WordEnumerator {
    letters: Vec<LetterData>,
    stack: Vec<Node>,
    max_depth: usize,
    prune_eps: f64,
    cap: usize,
    visited: Arc<AtomicUsize>,
    failed: bool,
}

impl WordEnumerator {
    pub fn new(g: &GroupSpec, max_depth: usize, prune_eps: f64) -> Result<Self> {
        Self::with_cap(g, max_depth, prune_eps, DEFAULT_NODE_CAP)
    }

    pub fn with_cap(g: &GroupSpec, max_depth: usize, prune_eps: f64, cap: usize) -> Result<Self> {
        let letters = letters_of(g);
        let roots: Vec<usize> = (0..letters.len()).collect();
        Self::rooted(g, letters, &roots, max_depth, prune_eps, cap, Arc::new(AtomicUsize::new(0)))
    }

    fn rooted(
        g: &GroupSpec,
        letters: Vec<LetterData>,
        roots: &[usize],
        max_depth: usize,
        prune_eps: f64,
        cap: usize,
        visited: Arc<AtomicUsize>,
    ) -> Result<Self> {
        if max_depth == 0 {
            return Err(Error::ParamsOutOfRange("max_depth must be at least 1".into()));
        }
        if g.generators.is_empty() {
            return Err(Error::InvalidGroup("no generators".into()));
        }
        let stack = roots
            .iter()
            .rev()
            .map(|&i| Node { word: Word { letters: vec![letters[i].letter] }, map: letters[i].map, disk: letters[i].disk })
            .collect();
        Ok(WordEnumerator { letters, stack, max_depth, prune_eps, cap, visited, failed: false })
    }
}

impl Iterator for WordEnumerator {
    type Item = Result<(Word, MoebiusMap)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let node = self.stack.pop()?;
        let nodes = self.visited.fetch_add(1, Ordering::Relaxed) + 1;
        if nodes > self.cap {
            self.failed = true;
            return Some(Err(Error::ExplosionGuard { nodes }));
        }
        let extend = node.word.len() < self.max_depth && node.disk.is_none_or(|d| disk_radius(&d) >= self.prune_eps);
        if extend {
            let last = *node.word.letters.last().expect("nonempty word");
            for ld in self.letters.iter().rev() {
                if ld.letter.cancels(&last) {
                    continue;
                }
                let mut word = node.word.clone();
                word.letters.push(ld.letter);
                self.stack.push(Node {
                    word,
                    map: node.map.compose(&ld.map),
                    disk: ld.disk.map(|d| node.map.map_disk(&d)),
                });
            }
        }
        Some(Ok((node.word, node.map)))
    }
}

/// Collect every enumerated word.
pub fn enumerate_maps(g: &GroupSpec, max_depth: usize, prune_eps: f64) -> Result<Vec<(Word, MoebiusMap)>> {
    WordEnumerator::new(g, max_depth, prune_eps)?.collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudMeta {
    pub spec_hash: String,
    pub depth: usize,
    pub prune_eps: f64,
    /// `p` when the cloud was moved by `z -> 1/(z - p)`.
    pub chart: Option<Complex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Complex>,
    pub meta: CloudMeta,
}

pub fn spec_hash(g: &GroupSpec) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(g)?);
    Ok(digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Sort and merge points closer than the dedup resolution on a grid.
pub fn dedup_points(points: &mut Vec<Complex>) {
    let res = TOL.dedup;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(points.len());
    let mut keyed: Vec<((i64, i64), Complex)> =
        points.iter().map(|p| (((p.re / res).round() as i64, (p.im / res).round() as i64), *p)).collect();
    keyed.sort_by_key(|a| a.0);
    for (k, p) in keyed {
        if seen.insert(k) {
            out.push(p);
        }
    }
    *points = out;
}

struct Sample {
    points: Vec<ExtPoint>,
}

fn sample_subtree(
    g: &GroupSpec,
    root: usize,
    max_depth: usize,
    prune_eps: f64,
    cap: usize,
    visited: Arc<AtomicUsize>,
) -> Result<Sample> {
    let letters = letters_of(g);
    let disk_of: Vec<Option<RoundDisk>> = letters.iter().map(|l| l.disk).collect();
    let use_centers = g.generators.len() >= 2;
    let en = WordEnumerator::rooted(g, letters, &[root], max_depth, prune_eps, cap, visited)?;
    let mut points = Vec::new();
    for item in en {
        let (word, map) = item?;
        match map.classify() {
            MapKind::Loxodromic => points.push(map.attracting_fixed_point()?),
            MapKind::Parabolic => points.push(map.fixed_points()?[0]),
            _ => {}
        }
        if use_centers {
            let last = *word.letters.last().expect("nonempty word");
            let idx = 2 * last.gen + last.inverse as usize;
            if let Some(d) = disk_of[idx] {
                let prefix = map.compose(&if last.inverse {
                    g.generators[last.gen].map
                } else {
                    g.generators[last.gen].map.inverse()
                });
                let image = prefix.map_disk(&d);
                if let DiskShape::Disk { center, radius } = image.shape() {
                    if radius < prune_eps {
                        points.push(ExtPoint::Finite(center));
                    }
                }
            }
        }
    }
    Ok(Sample { points })
}

/// Limit-set sample: fixed points of enumerated loxodromic and parabolic
/// words, plus centers of pruned ping-pong disks.
pub fn sample_limit_set(g: &GroupSpec, max_depth: usize, prune_eps: f64) -> Result<PointCloud> {
    sample_limit_set_capped(g, max_depth, prune_eps, DEFAULT_NODE_CAP)
}

pub fn sample_limit_set_capped(g: &GroupSpec, max_depth: usize, prune_eps: f64, cap: usize) -> Result<PointCloud> {
    let visited = Arc::new(AtomicUsize::new(0));
    let roots: Vec<usize> = (0..2 * g.generators.len()).collect();
    let samples: Vec<Sample> = roots
        .par_iter()
        .map(|&r| sample_subtree(g, r, max_depth, prune_eps, cap, visited.clone()))
        .collect::<Result<_>>()?;
    let raw: Vec<ExtPoint> = samples.into_iter().flat_map(|s| s.points).collect();
    let finite: Vec<Complex> = raw.iter().filter_map(|p| p.as_finite()).collect();
    let chart = if raw.iter().any(|p| p.is_infinite()) { Some(chart_point(&finite)) } else { None };
    let mut points: Vec<Complex> = match chart {
        None => finite,
        Some(p) => raw
            .iter()
            .map(|z| match z {
                ExtPoint::Infinity => Complex::new(0.0, 0.0),
                ExtPoint::Finite(z) => Complex::new(1.0, 0.0) / (z - p),
            })
            .filter(|z| z.re.is_finite() && z.im.is_finite())
            .collect(),
    };
    dedup_points(&mut points);
    Ok(PointCloud { points, meta: CloudMeta { spec_hash: spec_hash(g)?, depth: max_depth, prune_eps, chart } })
}

/// First candidate with at least half the best clearance from the finite
/// sample points; real candidates come first so real circles stay real.
fn chart_point(finite: &[Complex]) -> Complex {
    let candidates = [
        Complex::new(-1.0, 0.0),
        Complex::new(1.0, 0.0),
        Complex::new(-0.5, 0.0),
        Complex::new(0.5, 0.0),
        Complex::new(0.0, 0.0),
        Complex::new(0.0, 1.0),
        Complex::new(0.5, 0.5),
        Complex::new(-0.5, 0.25),
        Complex::new(0.25, -0.75),
    ];
    let clearance = |c: &Complex| finite.iter().map(|z| (z - c).norm()).fold(f64::INFINITY, f64::min);
    let best = candidates.iter().map(clearance).fold(0.0, f64::max);
    *candidates.iter().find(|c| clearance(c) >= 0.5 * best).expect("some candidate attains the best")
}

/// Orbit points seen so far. Distinct orbit points of a discrete group are a
/// definite hyperbolic distance apart, while rounding drift along long words
/// stays far below `ORBIT_MATCH`; points are bucketed on a grid of that size
/// in `(log t, z / t)` and compared against the neighboring cells.
#[derive(Default)]
struct OrbitSet {
    cells: HashMap<(i64, i64, i64), Vec<UhsPoint>>,
}

const ORBIT_MATCH: f64 = 1e-3;

impl OrbitSet {
    fn cell(x: &UhsPoint) -> (i64, i64, i64) {
        let q = |v: f64| (v / ORBIT_MATCH).floor() as i64;
        (q(x.t.ln()), q(x.z.re / x.t), q(x.z.im / x.t))
    }

    /// Inserts `x` unless a point within `ORBIT_MATCH` is present.
    fn insert(&mut self, x: UhsPoint) -> bool {
        let (a, b, c) = Self::cell(&x);
        for da in -1..=1 {
            for db in -1..=1 {
                for dc in -1..=1 {
                    if let Some(v) = self.cells.get(&(a + da, b + db, c + dc)) {
                        if v.iter().any(|y| hyp_distance(&x, y) < ORBIT_MATCH) {
                            return false;
                        }
                    }
                }
            }
        }
        self.cells.entry((a, b, c)).or_default().push(x);
        true
    }
}

/// Point minimizing `Σ cosh d(x, g x)` over the generators, by pattern
/// search in `(Re z, Im z, log t)` from `(0, 1)`. Orbits of such a point
/// stay close to the convex hull, which keeps shadow walks connected.
pub fn central_basepoint(g: &GroupSpec) -> UhsPoint {
    let cost = |v: [f64; 3]| {
        let x = UhsPoint { z: Complex::new(v[0], v[1]), t: v[2].exp() };
        g.generators
            .iter()
            .map(|gen| {
                let y = gen.map.apply_h3(&x);
                1.0 + ((x.z - y.z).norm_sqr() + (x.t - y.t).powi(2)) / (2.0 * x.t * y.t)
            })
            .sum::<f64>()
    };
    let mut v = [0.0f64; 3];
    let mut best = cost(v);
    let mut step = 1.0;
    while step > 1e-6 {
        let mut moved = false;
        for i in 0..3 {
            for dir in [1.0, -1.0] {
                let mut w = v;
                w[i] += dir * step;
                let c = cost(w);
                if c < best {
                    best = c;
                    v = w;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    UhsPoint { z: Complex::new(v[0], v[1]), t: v[2].exp() }
}

/// Samples the limit set through orbit shadows: a breadth-first walk over
/// the Cayley graph visits each orbit point of [`central_basepoint`] once.
/// An orbit point whose ball-model depth `1 − |x|²` drops below `2 eps` is
/// projected radially to the sphere and not expanded further, so every limit
/// point lies within a few multiples of `eps` of the cloud. The chart rule of
/// [`sample_limit_set`] applies when the sample reaches ∞.
pub fn sample_orbit_shadows(g: &GroupSpec, eps: f64, cap: usize) -> Result<PointCloud> {
    sample_orbit_shadows_from(g, &central_basepoint(g), eps, cap)
}

/// [`sample_orbit_shadows`] for the orbit of `x0`.
pub fn sample_orbit_shadows_from(g: &GroupSpec, x0: &UhsPoint, eps: f64, cap: usize) -> Result<PointCloud> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::ParamsOutOfRange(format!("shadow scale {eps} outside (0, 1)")));
    }
    if g.generators.is_empty() {
        return Err(Error::InvalidGroup("no generators".into()));
    }
    let x0 = *x0;
    let mut letters = Vec::new();
    for gen in &g.generators {
        letters.push(gen.map);
        letters.push(gen.map.inverse());
    }
    let mut seen = OrbitSet::default();
    seen.insert(x0);
    let mut frontier = vec![MoebiusMap::identity()];
    let mut raw = Vec::new();
    let mut visited = 1usize;
    let mut rounds = 0usize;
    while !frontier.is_empty() {
        rounds += 1;
        let mut next = Vec::new();
        for w in &frontier {
            for l in &letters {
                let h = w.compose(l);
                let x = h.apply_h3(&x0);
                if !seen.insert(x) {
                    continue;
                }
                visited += 1;
                if visited > cap {
                    return Err(Error::ExplosionGuard { nodes: visited });
                }
                let b = x.to_ball();
                let n2 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
                if 1.0 - n2 < 2.0 * eps {
                    let n = n2.sqrt();
                    let w3 = b[2] / n;
                    raw.push(if w3 >= 1.0 {
                        ExtPoint::Infinity
                    } else {
                        ExtPoint::Finite(Complex::new(b[0] / n, b[1] / n) / (1.0 - w3))
                    });
                } else {
                    next.push(h);
                }
            }
        }
        frontier = next;
    }
    let near_infinity = |p: &ExtPoint| p.chordal_distance(&ExtPoint::Infinity) < 10.0 * eps;
    let finite: Vec<Complex> = raw.iter().filter(|p| !near_infinity(p)).filter_map(|p| p.as_finite()).collect();
    let chart = if raw.iter().any(near_infinity) { Some(chart_point(&finite)) } else { None };
    let mut points: Vec<Complex> = raw
        .iter()
        .map(|p| match (chart, p) {
            (None, p) => p.as_finite().unwrap_or(Complex::new(f64::NAN, f64::NAN)),
            (Some(_), ExtPoint::Infinity) => Complex::new(0.0, 0.0),
            (Some(c), ExtPoint::Finite(z)) => Complex::new(1.0, 0.0) / (z - c),
        })
        .filter(|z| z.re.is_finite() && z.im.is_finite())
        .collect();
    dedup_points(&mut points);
    Ok(PointCloud { points, meta: CloudMeta { spec_hash: spec_hash(g)?, depth: rounds, prune_eps: eps, chart } })
}

/// Symmetric discrete Hausdorff distance between two point sets.
pub fn hausdorff_distance(a: &[Complex], b: &[Complex]) -> f64 {
    let one_way = |x: &[Complex], y: &[Complex]| {
        x.par_iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Window {
    /// Bounding box of the cloud with a 5% margin, square pixels not enforced.
    pub fn fit(points: &[Complex]) -> Result<Window> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            xmin = xmin.min(p.re);
            xmax = xmax.max(p.re);
            ymin = ymin.min(p.im);
            ymax = ymax.max(p.im);
        }
        let pad = 0.05 * (xmax - xmin).max(ymax - ymin).max(1e-9);
        let pad = if xmax - xmin == 0.0 && ymax - ymin == 0.0 { 1.0 } else { pad };
        Ok(Window { xmin: xmin - pad, xmax: xmax + pad, ymin: ymin - pad, ymax: ymax + pad })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    /// Row-major 8-bit RGB.
    pub rgb: Vec<u8>,
    pub lit: usize,
    pub warnings: Vec<String>,
}

const BACKGROUND: [u8; 3] = [0, 0, 0];
const INK: [u8; 3] = [255, 255, 255];

/// Splat each point onto one pixel.
pub fn render(cloud: &PointCloud, width: u32, height: u32, window: &Window) -> Result<Raster> {
    if cloud.points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if width == 0 || height == 0 {
        return Err(Error::ParamsOutOfRange("image size must be positive".into()));
    }
    let mut rgb: Vec<u8> = BACKGROUND.iter().copied().cycle().take((width * height * 3) as usize).collect();
    let mut lit = 0;
    for p in &cloud.points {
        let fx = (p.re - window.xmin) / (window.xmax - window.xmin) * width as f64;
        let fy = (window.ymax - p.im) / (window.ymax - window.ymin) * height as f64;
        if !(fx >= 0.0 && fx < width as f64 && fy >= 0.0 && fy < height as f64) {
            continue;
        }
        let idx = ((fy as u32 * width + fx as u32) * 3) as usize;
        if rgb[idx..idx + 3] != INK {
            rgb[idx..idx + 3].copy_from_slice(&INK);
            lit += 1;
        }
    }
    let warnings = if lit == 0 { vec!["window contains no cloud points".to_string()] } else { vec![] };
    Ok(Raster { width, height, rgb, lit, warnings })
}

/// Write an 8-bit RGB PNG, with `comment` stored as a `tEXt` chunk.
pub fn write_png(raster: &Raster, path: &Path, comment: Option<&str>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), raster.width, raster.height);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    if let Some(text) = comment {
        enc.add_text_chunk("Comment".into(), text.into()).map_err(|e| Error::Io(e.to_string()))?;
    }
    let mut writer = enc.write_header().map_err(|e| Error::Io(e.to_string()))?;
    writer.write_image_data(&raster.rgb).map_err(|e| Error::Io(e.to_string()))?;
    writer.finish().map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// SVG of the ping-pong disk images down to `max_depth`.
pub fn render_svg(g: &GroupSpec, max_depth: usize, prune_eps: f64, width: u32, height: u32, window: &Window) -> Result<String> {
    if g.pingpong.is_none() {
        return Err(Error::InvalidGroup("vector output needs ping-pong disks".into()));
    }
    let sx = width as f64 / (window.xmax - window.xmin);
    let sy = height as f64 / (window.ymax - window.ymin);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"black\"/>\n"
    );
    let mut circle = |d: &RoundDisk| {
        if let Some((c, r)) = d.circle() {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.4}\" cy=\"{:.4}\" r=\"{:.4}\" fill=\"none\" stroke=\"white\" stroke-width=\"0.5\"/>",
                (c.re - window.xmin) * sx,
                (window.ymax - c.im) * sy,
                r * sx.min(sy)
            );
        }
    };
    for d in g.complement_disks() {
        circle(&d);
    }
    let letters = letters_of(g);
    for item in WordEnumerator::new(g, max_depth, prune_eps)? {
        let (word, map) = item?;
        for ld in &letters {
            if ld.letter.cancels(word.letters.last().expect("nonempty")) {
                continue;
            }
            if let Some(d) = ld.disk {
                circle(&map.map_disk(&d));
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Nested ping-pong disks as a circle tree: level one holds the disks of
/// the letters, and the children of `w'(D_x)` are `w' x (D_y)` for every
/// `y ≠ x⁻¹`. The root is the origin-centered circle enclosing level one.
pub fn disk_tree(g: &GroupSpec, depth: usize, cap: usize) -> Result<CircleTree> {
    if depth == 0 {
        return Err(Error::ParamsOutOfRange("tree depth must be at least 1".into()));
    }
    let letters = letters_of(g);
    let mut level = Vec::new();
    let mut r0 = 0f64;
    for ld in &letters {
        let d = ld.disk.ok_or_else(|| Error::InvalidGroup("disk tree needs ping-pong disks".into()))?;
        let (c, r) = match d.shape() {
            DiskShape::Disk { center, radius } => (center, radius),
            _ => return Err(Error::InvalidGroup("disk tree needs bounded ping-pong disks".into())),
        };
        r0 = r0.max(c.norm() + r);
        level.push((ld.letter, ld.map, d));
    }
    let mut tree = CircleTree::new(2.0 * r0, Some(ArcGeom::Circle { center: Complex::new(0.0, 0.0), radius: r0 }))?;
    let mut frontier = Vec::new();
    for (letter, map, d) in level {
        let id = tree.add_child(0, 2.0 * d.radius(), NodeKind::Type1, Word { letters: vec![letter] }.display(g), d.circle().map(|(center, radius)| ArcGeom::Circle { center, radius }))?;
        frontier.push((id, Word { letters: vec![letter] }, map));
    }
    for _ in 1..depth {
        let mut next = Vec::new();
        for (parent, word, map) in &frontier {
            let last = *word.letters.last().expect("nonempty word");
            for ld in &letters {
                if ld.letter.cancels(&last) {
                    continue;
                }
                let d = map.map_disk(&ld.disk.expect("checked above"));
                if !d.is_bounded() {
                    return Err(Error::InvalidGroup("disk image is unbounded".into()));
                }
                let mut w = word.clone();
                w.letters.push(ld.letter);
                let geom = d.circle().map(|(center, radius)| ArcGeom::Circle { center, radius });
                let id = tree.add_child(*parent, 2.0 * d.radius(), NodeKind::Type1, w.display(g), geom)?;
                if tree.len() > cap {
                    return Err(Error::NodeCapExceeded(tree.len()));
                }
                next.push((id, w, map.compose(&ld.map)));
            }
        }
        frontier = next;
    }
    Ok(tree)
}

pub fn cloud_csv(cloud: &PointCloud) -> String {
    let mut out = String::from("re,im\n");
    for p in &cloud.points {
        let _ = writeln!(out, "{},{}", p.re, p.im);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{cyclic_group, fuchsian_one_holed_torus, rank2_parabolic, schottky_group, SurfaceGroupParams};

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn schottky2() -> GroupSpec {
        let d = |x: f64, y: f64| RoundDisk::disk(c(x, y), 0.4).unwrap();
        schottky_group(&[(d(-1.0, 0.0), d(1.0, 0.0)), (d(0.0, -1.0), d(0.0, 1.0))]).unwrap()
    }

    #[test]
    fn disk_tree_nests() {
        let g = schottky2();
        let t = disk_tree(&g, 3, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(t.len(), 1 + 4 + 12 + 36);
        assert!((t.root().r - 2.8).abs() < 1e-12);
        for n in t.nodes().iter().skip(5) {
            let (Some(ArcGeom::Circle { center, radius }), Some(p)) = (n.geom, n.parent) else { panic!() };
            let Some(ArcGeom::Circle { center: pc, radius: pr }) = t.node(p).geom else { panic!() };
            assert!((center - pc).norm() + radius < pr, "{}", n.word);
        }
        assert!(disk_tree(&fuchsian_one_holed_torus(SurfaceGroupParams { boundary_length: 1.0 }).unwrap(), 2, 100).is_err());
    }

    #[test]
    fn cyclic_words() {
        let g = cyclic_group(&MoebiusMap::diagonal(c(2.0, 0.0)).unwrap()).unwrap();
        let words: BTreeSet<String> =
            enumerate_maps(&g, 3, 0.0).unwrap().iter().map(|(w, _)| w.display(&g)).collect();
        let expected: BTreeSet<String> =
            ["g", "g g", "g g g", "g^-1", "g^-1 g^-1", "g^-1 g^-1 g^-1"].iter().map(|s| s.to_string()).collect();
        assert_eq!(words, expected);
    }

    #[test]
    fn free_group_level_counts() {
        let g = schottky2();
        let words = enumerate_maps(&g, 5, 0.0).unwrap();
        for n in 1..=5 {
            let count = words.iter().filter(|(w, _)| w.len() == n).count();
            assert_eq!(count, 4 * 3usize.pow(n as u32 - 1), "level {n}");
        }
        let unique: BTreeSet<&Word> = words.iter().map(|(w, _)| w).collect();
        assert_eq!(unique.len(), words.len());
    }

    #[test]
    fn aggressive_pruning_keeps_depth_one() {
        let g = schottky2();
        let words = enumerate_maps(&g, 6, 100.0).unwrap();
        assert_eq!(words.len(), 4);
    }

    #[test]
    fn explosion_guard() {
        let g = schottky2();
        let res: Result<Vec<_>> = WordEnumerator::with_cap(&g, 10, 0.0, 100).unwrap().collect();
        assert_eq!(res, Err(Error::ExplosionGuard { nodes: 101 }));
    }

    #[test]
    fn cyclic_cloud_is_two_fixed_points() {
        let gamma = MoebiusMap::loxodromic_with_axis(c(1.0, 0.0).into(), c(-1.0, 0.0).into(), 1.0, 0.0).unwrap();
        let g = cyclic_group(&gamma).unwrap();
        let cloud = sample_limit_set(&g, 8, 1e-6).unwrap();
        assert_eq!(cloud.points.len(), 2);
        assert!(cloud.points.iter().any(|p| (p - c(1.0, 0.0)).norm() < 1e-9));
        assert!(cloud.points.iter().any(|p| (p - c(-1.0, 0.0)).norm() < 1e-9));
    }

    #[test]
    fn parabolic_cloud_is_chart_point() {
        let g = rank2_parabolic(1.0, 1.0, 1).unwrap();
        let cloud = sample_limit_set(&g, 3, 1e-3).unwrap();
        assert_eq!(cloud.points, vec![c(0.0, 0.0)], "∞ maps to 0 in the chart");
        assert!(cloud.meta.chart.is_some());
    }

    #[test]
    fn fuchsian_cloud_on_real_line() {
        let g = fuchsian_one_holed_torus(SurfaceGroupParams { boundary_length: 1.0 }).unwrap();
        let cloud = sample_limit_set(&g, 6, 1e-4).unwrap();
        assert!(cloud.points.len() > 100);
        for p in &cloud.points {
            assert!(p.im.abs() < 1e-6, "{p}");
        }
    }

    #[test]
    fn cloud_monotone_in_depth() {
        let g = schottky2();
        let a = sample_limit_set(&g, 4, 1e-3).unwrap();
        let b = sample_limit_set(&g, 5, 1e-3).unwrap();
        assert!(hausdorff_distance(&a.points, &b.points) < 1.0);
        for p in &a.points {
            assert!(b.points.iter().any(|q| (p - q).norm() <= 2.0 * TOL.dedup));
        }
    }

    #[test]
    fn render_single_point_and_blank() {
        let cloud = PointCloud {
            points: vec![c(0.5, 0.5)],
            meta: CloudMeta { spec_hash: String::new(), depth: 1, prune_eps: 0.0, chart: None },
        };
        let w = Window { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 };
        let r = render(&cloud, 16, 16, &w).unwrap();
        assert_eq!(r.lit, 1);
        assert_eq!(r.rgb.iter().filter(|&&v| v == 255).count(), 3);
        let far = Window { xmin: 5.0, xmax: 6.0, ymin: 5.0, ymax: 6.0 };
        let blank = render(&cloud, 16, 16, &far).unwrap();
        assert_eq!(blank.lit, 0);
        assert_eq!(blank.warnings.len(), 1);
        let empty = PointCloud { points: vec![], ..cloud };
        assert_eq!(render(&empty, 4, 4, &w), Err(Error::EmptyCloud));
    }
}
