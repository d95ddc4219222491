//! Books of I-bundles with solid-torus bindings: broken-geodesic bounds,
//! the book group, its tree of flats and the boundary-length sweep.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::circletree::{ArcGeom, CircleNode, CircleTree, NodeKind};
use crate::dimension::{box_counting, certify_dimension_upper, CoveringConstants};
use crate::error::{Error, Result};
use crate::groups::{one_holed_torus, Generator, GroupSpec, OneHoledTorus, SurfaceGroupParams};
use crate::limitset::{enumerate_maps, sample_orbit_shadows_from, PointCloud, DEFAULT_NODE_CAP};
use crate::moebius::{hyp_distance, Complex, ExtPoint, MoebiusMap, RoundDisk, UhsPoint};

/// `K` with `cosh²(K/2) = 2 / (1 − cos θ)`.
pub fn broken_geodesic_k(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= std::f64::consts::PI) {
        return Err(Error::AngleOutOfRange(theta));
    }
    let c = (2.0 / (1.0 - theta.cos())).sqrt();
    // Rounding can push cosh slightly below 1 at θ = π.
    Ok(2.0 * c.max(1.0).acosh())
}

/// `(n − 2)(k − K) + k − K/2`.
pub fn dist_lower_bound(n: i64, k: f64, big_k: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::BadChainLength(n));
    }
    if !(big_k >= 0.0 && k > big_k) {
        return Err(Error::ParamsOutOfRange(format!("need k > K >= 0, got k={k}, K={big_k}")));
    }
    Ok((n - 2) as f64 * (k - big_k) + k - big_k / 2.0)
}

/// Isometry sending `x` to the basepoint `(0, 1)`.
fn to_basepoint(x: &UhsPoint) -> MoebiusMap {
    MoebiusMap::new(Complex::new(1.0, 0.0), -x.z, Complex::new(0.0, 0.0), Complex::new(x.t, 0.0))
        .expect("t > 0 keeps the map regular")
}

/// Angle at `v` between the geodesics towards `a` and `b`.
pub fn bend_angle(a: &UhsPoint, v: &UhsPoint, b: &UhsPoint) -> f64 {
    let m = to_basepoint(v);
    let pa = m.apply_h3(a).to_ball();
    let pb = m.apply_h3(b).to_ball();
    let dot = pa[0] * pb[0] + pa[1] * pb[1] + pa[2] * pb[2];
    let na = (pa[0] * pa[0] + pa[1] * pa[1] + pa[2] * pa[2]).sqrt();
    let nb = (pb[0] * pb[0] + pb[1] * pb[1] + pb[2] * pb[2]).sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Orthogonal bisecting plane of `[a, b]`, as the disk of its boundary
/// circle on the side of `b`.
pub fn bisecting_plane(a: &UhsPoint, b: &UhsPoint) -> Result<RoundDisk> {
    // b_t |x − a|² − a_t |x − b|² is negative on the side of a.
    let q = b.t * a.z - a.t * b.z;
    let aa = b.t - a.t;
    let cc = b.t * a.z.norm_sqr() - a.t * b.z.norm_sqr() + a.t * b.t * (a.t - b.t);
    Ok(RoundDisk::from_hermitian(aa, -q, cc)?.complement())
}

/// Hyperbolic distance between the hemispheres over two disjoint circles.
pub fn plane_distance(p: &RoundDisk, q: &RoundDisk) -> f64 {
    let i = p.inversive_product(q).abs();
    if i <= 1.0 {
        0.0
    } else {
        i.acosh()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub separated: bool,
    pub k: f64,
    /// `dist(P_i, P_{i+1}) − ((k_i + k_{i+1})/2 − K)` for each consecutive pair.
    pub slack: Vec<f64>,
}

/// Check the bisecting planes of a broken geodesic through `points`.
pub fn verify_separation(points: &[UhsPoint], theta_min: f64) -> Result<SeparationReport> {
    let k = broken_geodesic_k(theta_min)?;
    if points.len() < 2 {
        return Err(Error::BadChainLength(points.len() as i64 - 1));
    }
    let lengths: Vec<f64> = points.windows(2).map(|w| hyp_distance(&w[0], &w[1])).collect();
    for (index, &length) in lengths.iter().enumerate() {
        if length <= k {
            return Err(Error::SegmentTooShort { index, length, k });
        }
    }
    for (index, w) in points.windows(3).enumerate() {
        let angle = bend_angle(&w[0], &w[1], &w[2]);
        if angle < theta_min - 1e-9 {
            return Err(Error::AngleTooSharp { index: index + 1, angle, min: theta_min });
        }
    }
    let planes: Vec<RoundDisk> = points.windows(2).map(|w| bisecting_plane(&w[0], &w[1])).collect::<Result<_>>()?;
    let mut separated = true;
    let mut slack = Vec::new();
    for i in 0..planes.len().saturating_sub(1) {
        // Nested forward sides give disjointness and the linear order.
        if !planes[i + 1].closure_inside(&planes[i]) {
            separated = false;
        }
        let d = plane_distance(&planes[i], &planes[i + 1]);
        let s = d - (0.5 * (lengths[i] + lengths[i + 1]) - k);
        if s < -1e-9 {
            separated = false;
        }
        slack.push(s);
    }
    Ok(SeparationReport { separated, k, slack })
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Default safety bound on the binding length.
pub const MAX_BINDING_LENGTH: f64 = 2.0;
pub const DEFAULT_TREE_NODE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BookParams {
    pub m: u32,
    pub ell: f64,
    pub p: i64,
    pub q: i64,
    pub depth: usize,
}

impl BookParams {
    pub fn new(m: u32, ell: f64, depth: usize) -> Self {
        BookParams { m, ell, p: 0, q: 1, depth }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::ParamsOutOfRange(format!("m = {} pages, need at least 2", self.m)));
        }
        if !(self.ell > 0.0 && self.ell <= MAX_BINDING_LENGTH) {
            return Err(Error::ParamsOutOfRange(format!("binding length {} outside (0, {MAX_BINDING_LENGTH}]", self.ell)));
        }
        if self.q < 1 || gcd(self.p, self.q) != 1 {
            return Err(Error::ParamsOutOfRange(format!("slope ({}, {}) must have q >= 1 and gcd 1", self.p, self.q)));
        }
        Ok(())
    }

    /// Smallest angle between flats around the binding.
    pub fn theta0(&self) -> f64 {
        std::f64::consts::TAU / (self.m as f64 * self.q as f64)
    }
}

/// Book group together with the data used to grow its tree of flats.
#[derive(Debug, Clone, PartialEq)]
pub struct Book {
    pub params: BookParams,
    /// Generators in the normalized frame (root flat over the unit circle).
    pub spec: GroupSpec,
    pub page: OneHoledTorus,
    /// Normalization `T`: page-0 plane to the unit hemisphere, thick point to `(0, 1)`.
    pub frame: MoebiusMap,
    /// Binding element `b` in base coordinates (`b^q` is the page boundary element).
    pub binding: MoebiusMap,
}

impl Book {
    /// Maps placing flat `s` around the binding axis, `s = 0..mq`.
    fn sheet(&self, s: i64) -> MoebiusMap {
        let m = self.params.m as i64;
        let (k, i) = (s % m, s / m);
        let rot = MoebiusMap::rotation(std::f64::consts::TAU * k as f64 / (m * self.params.q) as f64);
        self.binding.pow(i).compose(&rot)
    }
}

pub fn build_book_group(params: BookParams) -> Result<Book> {
    params.validate()?;
    let page = one_holed_torus(SurfaceGroupParams { boundary_length: params.ell })?;
    let w = page.thick_point;
    let frame = MoebiusMap::new(Complex::new(1.0, 0.0), -w, Complex::new(1.0, 0.0), -w.conj())?;
    let (m, q, p) = (params.m as i64, params.q, params.p);
    let binding = if q > 1 {
        MoebiusMap::loxodromic_with_axis(
            ExtPoint::finite(0.0, 0.0),
            ExtPoint::Infinity,
            params.ell / q as f64,
            std::f64::consts::TAU * p as f64 / q as f64,
        )?
    } else {
        page.boundary
    };
    let mut generators = Vec::new();
    for j in 0..m {
        let rot = MoebiusMap::rotation(std::f64::consts::TAU * j as f64 / (m * q) as f64);
        for (name, g) in [("A", page.a), ("B", page.b)] {
            let g = g.conjugate_by(&rot).conjugate_by(&frame);
            generators.push(Generator { label: format!("{name}{j}"), map: g });
        }
    }
    if q > 1 {
        generators.push(Generator { label: "b".into(), map: binding.conjugate_by(&frame) });
    }
    let spec = GroupSpec { generators, pingpong: None, parabolic: vec![] };
    spec.validate()?;
    Ok(Book { params, spec, page, frame, binding })
}

/// Coset representatives of the page group modulo the boundary subgroup,
/// one per lift of the boundary geodesic, from words up to `max_len`.
fn boundary_lifts(page: &OneHoledTorus, max_len: usize) -> Result<Vec<(String, MoebiusMap)>> {
    let g = GroupSpec {
        generators: vec![Generator { label: "A".into(), map: page.a }, Generator { label: "B".into(), map: page.b }],
        pingpong: None,
        parabolic: vec![],
    };
    let mut out: Vec<(String, MoebiusMap, [ExtPoint; 2])> =
        vec![(String::new(), MoebiusMap::identity(), [ExtPoint::finite(0.0, 0.0), ExtPoint::Infinity])];
    for (word, map) in enumerate_maps(&g, max_len, 0.0)? {
        let ends = [map.apply(&ExtPoint::finite(0.0, 0.0)), map.apply(&ExtPoint::Infinity)];
        let same = |e: &[ExtPoint; 2]| {
            (e[0].chordal_distance(&ends[0]) < 1e-9 && e[1].chordal_distance(&ends[1]) < 1e-9)
                || (e[0].chordal_distance(&ends[1]) < 1e-9 && e[1].chordal_distance(&ends[0]) < 1e-9)
        };
        if !out.iter().any(|(_, _, e)| same(e)) {
            let label = word.display(&g).replace(' ', "").replace("^-1", "'");
            out.push((label, map, ends));
        }
    }
    Ok(out.into_iter().map(|(w, m, _)| (w, m)).collect())
}

/// Arc cut on the sphere by the half-plane of the flat `T ∘ n (F0)`, with
/// the arc translated so its start is 0. The translated copy is computed
/// from exact difference formulas and keeps full relative precision for
/// arcs far below the resolution of their absolute position.
fn flat_arc(book: &Book, n: &MoebiusMap) -> Option<(ArcGeom, ArcGeom)> {
    let m = book.frame.compose(n);
    let (a, c, d) = (m.a(), m.c(), m.d());
    let zero = Complex::new(0.0, 0.0);
    let mid = Complex::new(book.page.side, 0.0);
    // M(z) - M(0) = z / ((cz + d) d);  M(∞) - M(0) = 1 / (c d).
    let den_mid = (c * mid + d) * d;
    let den_end = c * d;
    if den_mid == zero || den_end == zero {
        return None;
    }
    let start = m.apply_c(zero).as_finite()?;
    let rel = ArcGeom::Arc { start: zero, mid: mid / den_mid, end: Complex::new(1.0, 0.0) / den_end };
    let abs = ArcGeom::Arc { start, mid: m.apply_c(mid).as_finite()?, end: a / c };
    Some((abs, rel))
}

/// Default word length for lift representatives.
pub const DEFAULT_LIFT_WORD_LEN: usize = 2;

/// Tree of flats to `depth`, children generated at every enumerated lift
/// of the boundary geodesic.
pub fn generate_flat_tree(book: &Book, depth: usize) -> Result<CircleTree> {
    generate_flat_tree_with(book, depth, DEFAULT_LIFT_WORD_LEN, DEFAULT_TREE_NODE_CAP)
}

pub fn generate_flat_tree_with(book: &Book, depth: usize, lift_len: usize, cap: usize) -> Result<CircleTree> {
    if depth < 1 {
        return Err(Error::ParamsOutOfRange("tree depth must be at least 1".into()));
    }
    let lifts = boundary_lifts(&book.page, lift_len)?;
    let sheets = book.params.m as i64 * book.params.q;
    let mut tree = CircleTree::new(2.0, Some(ArcGeom::Circle { center: Complex::new(0.0, 0.0), radius: 1.0 }))?;
    let mut frontier = vec![(0usize, MoebiusMap::identity())];
    for level in 0..depth {
        let mut next = Vec::new();
        for (node, n) in &frontier {
            // The parent flat is attached at the identity lift.
            let skip = if level == 0 { 0 } else { 1 };
            for (word, gamma) in lifts.iter().skip(skip) {
                for s in 1..sheets {
                    let child = n.compose(gamma).compose(&book.sheet(s));
                    let (geom, rel) = flat_arc(book, &child)
                        .ok_or_else(|| Error::ParamsOutOfRange("flat arc passes through ∞".into()))?;
                    let r = rel.diameter();
                    let label = format!("{}({word},{s})", tree.node(*node).word);
                    let id = tree.add_child(*node, r, NodeKind::Type1, label, Some(geom))?;
                    if tree.len() > cap {
                        return Err(Error::NodeCapExceeded(tree.len()));
                    }
                    next.push((id, child));
                }
            }
        }
        frontier = next;
    }
    Ok(tree)
}

/// Largest ratio `r(child) / r(parent)`.
pub fn measure_rho(tree: &CircleTree) -> Result<f64> {
    let mut rho = f64::NEG_INFINITY;
    for n in tree.nodes() {
        if let Some(p) = n.parent {
            rho = rho.max(n.r / tree.node(p).r);
        }
    }
    if rho == f64::NEG_INFINITY {
        Err(Error::TrivialTree)
    } else {
        Ok(rho)
    }
}

/// Arcs of non-adjacent nodes up to `max_level` never cross transversally.
pub fn arcs_non_crossing(tree: &CircleTree, max_level: usize) -> bool {
    let ids: Vec<usize> = (0..tree.len()).filter(|&i| tree.node(i).level <= max_level).collect();
    let adjacent = |a: usize, b: usize| tree.node(a).parent == Some(b) || tree.node(b).parent == Some(a);
    ids.par_iter().all(|&i| {
        ids.iter().filter(|&&j| j > i && !adjacent(i, j)).all(|&j| {
            let (Some(gi), Some(gj)) = (tree.node(i).geom, tree.node(j).geom) else {
                return true;
            };
            !arcs_cross(&gi, &gj)
        })
    })
}

fn arcs_cross(a: &ArcGeom, b: &ArcGeom) -> bool {
    let (Some((c1, r1)), Some((c2, r2))) = (a.circle(), b.circle()) else {
        return false;
    };
    let d = (c2 - c1).norm();
    let scale = r1.max(r2);
    // Cosine of the intersection angle; near ±1 for tangent or coincident circles.
    let cos_angle = (r1 * r1 + r2 * r2 - d * d) / (2.0 * r1 * r2);
    if cos_angle.abs() >= 1.0 - 1e-6 || d == 0.0 {
        return false;
    }
    let x = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let h = (r1 * r1 - x * x).max(0.0).sqrt();
    let u = (c2 - c1) / d;
    let base = c1 + u * x;
    let perp = u * Complex::new(0.0, 1.0);
    let tol = 1e-9 * scale;
    [base + perp * h, base - perp * h].iter().any(|&z| a.contains_interior(z, tol) && b.contains_interior(z, tol))
}

/// Radii `r1 / n` of the nested earring circles, each obtained by inverting
/// the line `Im w = n / (2 r1)` through `z -> 1/z`.
pub fn earring_radii(r1: f64, n_max: usize) -> Vec<f64> {
    let inv = MoebiusMap::inversion();
    (1..=n_max)
        .map(|n| {
            let line = RoundDisk::half_plane(Complex::new(0.0, 1.0), n as f64 / (2.0 * r1)).expect("unit normal");
            inv.map_disk(&line).radius()
        })
        .collect()
}

/// Default shadow scale for book limit-set samples.
pub const DEFAULT_SHADOW_EPS: f64 = 1e-4;

/// Orbit-shadow sample of the book limit set, walking the orbit of the
/// normalized thick point `(0, 1)`.
pub fn sample_book_limit_set(book: &Book, eps: f64, cap: usize) -> Result<PointCloud> {
    sample_orbit_shadows_from(&book.spec, &UhsPoint::basepoint(), eps, cap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ell: f64,
    pub m: u32,
    pub q: i64,
    pub depth: usize,
    pub rho: f64,
    pub certified: bool,
    pub alpha: f64,
    pub box_estimate: f64,
    pub r2: f64,
    pub n_points: usize,
    pub wall_ms: u128,
    pub tree_nodes: usize,
    pub arcs_non_crossing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alpha: f64,
    pub m: u32,
    pub depth: usize,
    pub shadow_eps: f64,
    pub constants: CoveringConstants,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { alpha: 1.5, m: 2, depth: 4, shadow_eps: DEFAULT_SHADOW_EPS, constants: CoveringConstants::default() }
    }
}

/// One row of the sweep for a single binding length.
pub fn sweep_row(cfg: &SweepConfig, ell: f64) -> Result<SweepRow> {
    let start = Instant::now();
    let book = build_book_group(BookParams::new(cfg.m, ell, cfg.depth))?;
    let tree = generate_flat_tree(&book, cfg.depth)?;
    let rho = measure_rho(&tree)?;
    let certified = rho < 0.5 && certify_dimension_upper(&tree, cfg.alpha, rho, &cfg.constants, cfg.depth)?.certified;
    let cloud = sample_book_limit_set(&book, cfg.shadow_eps, DEFAULT_NODE_CAP)?;
    let est = box_counting(&cloud.points, None)?;
    Ok(SweepRow {
        ell,
        m: cfg.m,
        q: 1,
        depth: cfg.depth,
        rho,
        certified,
        alpha: cfg.alpha,
        box_estimate: est.value,
        r2: est.r2.unwrap_or(f64::NAN),
        n_points: cloud.points.len(),
        wall_ms: start.elapsed().as_millis(),
        tree_nodes: tree.len(),
        arcs_non_crossing: arcs_non_crossing(&tree, 2),
    })
}

/// Rows for a decreasing grid of binding lengths, in grid order.
pub fn sweep_ell(cfg: &SweepConfig, ell_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if !(cfg.alpha > 1.0 && cfg.alpha <= 2.0) {
        return Err(Error::AlphaOutOfRange(cfg.alpha));
    }
    if ell_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::ParamsOutOfRange("ell grid must be strictly decreasing".into()));
    }
    ell_grid.par_iter().map(|&ell| sweep_row(cfg, ell)).collect()
}

/// Largest binding length in the sweep that certified, if any.
pub fn largest_certified(rows: &[SweepRow]) -> Option<f64> {
    rows.iter().filter(|r| r.certified).map(|r| r.ell).fold(None, |acc, x| Some(acc.map_or(x, |a: f64| a.max(x))))
}

/// Sweep CSV; `wall_ms` is written only when `timing` is set.
pub fn sweep_csv(rows: &[SweepRow], timing: bool) -> String {
    let mut out = String::from("ell,m,q,depth,rho,certified,alpha,box_estimate,r2,n_points");
    out.push_str(if timing { ",wall_ms\n" } else { "\n" });
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.12e},{},{},{:.6},{:.6},{}",
            r.ell, r.m, r.q, r.depth, r.rho, r.certified, r.alpha, r.box_estimate, r.r2, r.n_points
        ));
        if timing {
            out.push_str(&format!(",{}", r.wall_ms));
        }
        out.push('\n');
    }
    out
}
