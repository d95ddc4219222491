//! Dimension estimates: box counting, λ₀ conversion and covering-mass
//! certificates over circle trees.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circletree::CircleTree;
use crate::error::{Error, Result};
use crate::moebius::Complex;
use crate::tolerances::TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BoxCount,
    Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub method: Method,
    /// Box-count slope, or the certified upper bound α.
    pub value: f64,
    /// `(ε, N(ε))` for box counting, `(k, M_k)` for certificates.
    pub table: Vec<(f64, f64)>,
    pub r2: Option<f64>,
    pub warnings: Vec<String>,
}

/// Clouds with fewer distinct points are treated as finite sets.
pub const MIN_BOX_POINTS: usize = 1000;
/// Largest scale as a fraction of the cloud diameter.
pub const BOX_TOP_FRACTION: f64 = 1.0 / 20.0;
/// Smallest admissible mean number of points per occupied box.
pub const BOX_MIN_OCCUPANCY: f64 = 5.0;
const BOX_STEP: f64 = std::f64::consts::SQRT_2;

fn count_boxes(points: &[Complex], origin: Complex, eps: f64) -> usize {
    let cells: HashSet<(i64, i64)> = points
        .iter()
        .map(|p| (((p.re - origin.re) / eps).floor() as i64, ((p.im - origin.im) / eps).floor() as i64))
        .collect();
    cells.len()
}

/// Automatic scale window: from `diam · BOX_TOP_FRACTION` down by factors
/// of √2 while the mean occupancy stays at least `BOX_MIN_OCCUPANCY`.
pub fn auto_scales(points: &[Complex]) -> Result<Vec<f64>> {
    let (origin, diam) = bbox(points)?;
    let n = points.len() as f64;
    let mut scales = Vec::new();
    let mut eps = diam * BOX_TOP_FRACTION;
    while eps > diam * 1e-12 {
        if count_boxes(points, origin, eps) as f64 > n / BOX_MIN_OCCUPANCY {
            break;
        }
        scales.push(eps);
        eps /= BOX_STEP;
    }
    Ok(scales)
}

fn bbox(points: &[Complex]) -> Result<(Complex, f64)> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
        return Err(Error::DegenerateCloud);
    }
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = Complex::new(lo.re.min(p.re), lo.im.min(p.im));
        hi = Complex::new(hi.re.max(p.re), hi.im.max(p.im));
    }
    Ok((lo, (hi - lo).norm()))
}

/// Least-squares slope of `log N(ε)` against `log(1/ε)`.
pub fn box_counting(points: &[Complex], scales: Option<&[f64]>) -> Result<DimensionEstimate> {
    let (origin, diam) = bbox(points)?;
    let distinct = count_boxes(points, origin, TOL.dedup);
    if diam == 0.0 || distinct < MIN_BOX_POINTS {
        return Ok(DimensionEstimate {
            method: Method::BoxCount,
            value: 0.0,
            table: vec![],
            r2: None,
            warnings: vec![format!("finite sample of {distinct} distinct points; dimension 0")],
        });
    }
    let scales = match scales {
        Some(s) => s.to_vec(),
        None => auto_scales(points)?,
    };
    if scales.len() < 5 {
        return Err(Error::InsufficientScales(format!("{} usable scales, need 5", scales.len())));
    }
    let table: Vec<(f64, f64)> =
        scales.par_iter().map(|&eps| (eps, count_boxes(points, origin, eps) as f64)).collect();
    let xs: Vec<f64> = table.iter().map(|(e, _)| -e.ln()).collect();
    let ys: Vec<f64> = table.iter().map(|(_, n)| n.ln()).collect();
    let (slope, r2) = linear_fit(&xs, &ys);
    let mut warnings = Vec::new();
    if r2 < 0.99 {
        warnings.push(format!("poor fit: r2 = {r2:.4}"));
    }
    let span = scales.iter().cloned().fold(0.0, f64::max) / scales.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < 100.0 {
        warnings.push(format!("scales span {:.2} decades", span.log10()));
    }
    let value = if (0.0..=2.0).contains(&slope) {
        slope
    } else {
        warnings.push(format!("slope {slope:.4} clamped to [0, 2]"));
        slope.clamp(0.0, 2.0)
    };
    Ok(DimensionEstimate { method: Method::BoxCount, value, table, r2: Some(r2), warnings })
}

/// Slope and coefficient of determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Bottom of the spectrum from the dimension of the limit set.
pub fn lambda0_from_dim(d: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&d) {
        return Err(Error::OutOfRange(d, "dimension must lie in [0, 2]"));
    }
    Ok(if d < 1.0 { 1.0 } else { d * (2.0 - d) })
}

/// `ζ(α)` for `α > 1`: a partial sum plus the integral tail over
/// `[N + ½, ∞)`, with `N` chosen so the tail error is below `TOL.zeta_tail`.
pub fn zeta(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 + 1e-6) || !alpha.is_finite() {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    // The midpoint tail error is about α(α+1)/24 · N^{-α-2} · N, bounded
    // here by α/24 · N^{-α-1}.
    let n = ((alpha / (24.0 * TOL.zeta_tail * 0.1)).powf(1.0 / (alpha + 1.0))).ceil().max(16.0) as u64;
    // Sum small terms first.
    let partial: f64 = (1..=n).rev().map(|k| (k as f64).powf(-alpha)).sum();
    let tail = (n as f64 + 0.5).powf(1.0 - alpha) / (alpha - 1.0);
    Ok(partial + tail)
}

/// `c0^α · ζ(α) · r1^α`.
pub fn earring_mass_bound(r1: f64, c0: f64, alpha: f64) -> Result<f64> {
    let z = zeta(alpha)?;
    if r1 < 0.0 || c0 < 0.0 {
        return Err(Error::OutOfRange(r1.min(c0), "radius and constant must be nonnegative"));
    }
    Ok(c0.powf(alpha) * z * r1.powf(alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringConstants {
    pub a0: f64,
    pub a3: f64,
    pub c0: f64,
}

impl Default for CoveringConstants {
    fn default() -> Self {
        CoveringConstants { a0: 1.0, a3: 1.0, c0: 1.0 }
    }
}

/// Trees whose nodes carry diameters, visited top-down.
pub trait RadiusTree {
    type Node: Clone;
    fn root(&self) -> Self::Node;
    fn radius(&self, node: &Self::Node) -> f64;
    fn children(&self, node: &Self::Node) -> Vec<Self::Node>;
    fn depth(&self) -> usize;
}

impl RadiusTree for CircleTree {
    type Node = usize;
    fn root(&self) -> usize {
        0
    }
    fn radius(&self, node: &usize) -> f64 {
        self.node(*node).r
    }
    fn children(&self, node: &usize) -> Vec<usize> {
        self.node(*node).children.clone()
    }
    fn depth(&self) -> usize {
        CircleTree::depth(self)
    }
}

/// Self-similar tree stored implicitly: `b` children of ratio `ratio` at
/// every node down to `depth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarTree {
    pub b: usize,
    pub ratio: f64,
    pub depth: usize,
    pub r0: f64,
}

impl RadiusTree for SelfSimilarTree {
    type Node = (usize, f64);
    fn root(&self) -> (usize, f64) {
        (0, self.r0)
    }
    fn radius(&self, node: &(usize, f64)) -> f64 {
        node.1
    }
    fn children(&self, node: &(usize, f64)) -> Vec<(usize, f64)> {
        if node.0 >= self.depth {
            vec![]
        } else {
            vec![(node.0 + 1, node.1 * self.ratio); self.b]
        }
    }
    fn depth(&self) -> usize {
        self.depth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringMass {
    pub k: usize,
    pub alpha: f64,
    pub rho: f64,
    pub eps0: f64,
    #[serde(rename = "Mk")]
    pub mk: f64,
    /// `max(A(α), 2)`.
    #[serde(rename = "A_alpha")]
    pub a_alpha: f64,
    pub a_alpha_raw: f64,
    pub condition_holds: bool,
    /// Mass contributed by each level `0..=k`.
    pub level_masses: Vec<f64>,
    /// Largest `ε(C) / ε0` over visited nodes.
    pub max_eps_ratio: f64,
    /// Largest relative gap between the recursive `ε(C)` and its closed form.
    pub closed_form_dev: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

/// `A(α) = a0 · a3 · ζ(α) / (2^{α−1} − 1)`.
pub fn a_of_alpha(alpha: f64, consts: &CoveringConstants) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(consts.a0 * consts.a3 * zeta(alpha)? / (2f64.powf(alpha - 1.0) - 1.0))
}

/// Mass of the level-`k` covering, with `ε` assigned down the tree by
/// `ε(D) = r(D) / (ρ r(C)) · ε(C)` from `ε(C0) = ρ^k r(C0)`.
pub fn covering_certificate<T: RadiusTree>(
    tree: &T,
    alpha: f64,
    rho: f64,
    consts: &CoveringConstants,
    k: usize,
) -> Result<CoveringMass> {
    check_alpha(alpha)?;
    if !(rho > 0.0) {
        return Err(Error::OutOfRange(rho, "rho must be positive"));
    }
    if tree.depth() < k {
        return Err(Error::TreeTooShallow { have: tree.depth(), want: k });
    }
    let root = tree.root();
    let r0 = tree.radius(&root);
    let eps0 = rho.powi(k as i32) * r0;
    let mut level_masses = vec![0.0; k + 1];
    let mut max_eps_ratio = 0f64;
    let mut closed_form_dev = 0f64;
    // (node, level, ε)
    let mut stack = vec![(root, 0usize, eps0)];
    while let Some((node, level, eps)) = stack.pop() {
        let r = tree.radius(&node);
        level_masses[level] += consts.a3 * r * eps.powf(alpha - 1.0);
        max_eps_ratio = max_eps_ratio.max(eps / eps0);
        let closed = r * eps0 / (rho.powi(level as i32) * r0);
        closed_form_dev = closed_form_dev.max((eps - closed).abs() / closed);
        if level == k {
            continue;
        }
        for child in tree.children(&node) {
            let rc = tree.radius(&child);
            if rc > rho * r * (1.0 + 1e-12) {
                return Err(Error::GeometricBoundViolated { ratio: rc / r, rho });
            }
            stack.push((child, level + 1, rc / (rho * r) * eps));
        }
    }
    let a_raw = a_of_alpha(alpha, consts)?;
    let a_alpha = a_raw.max(2.0);
    Ok(CoveringMass {
        k,
        alpha,
        rho,
        eps0,
        mk: level_masses.iter().sum(),
        a_alpha,
        a_alpha_raw: a_raw,
        condition_holds: rho.powf(alpha - 1.0) < 1.0 / a_alpha,
        level_masses,
        max_eps_ratio,
        closed_form_dev,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub certified: bool,
    pub monotone: bool,
    pub condition_holds: bool,
    pub estimate: DimensionEstimate,
    pub masses: Vec<CoveringMass>,
}

/// Certified iff `M_k` strictly decreases over `k = k_max/2 ..= k_max` and
/// `ρ^{α−1} < 1/A(α)`.
pub fn certify_dimension_upper<T: RadiusTree + Sync>(
    tree: &T,
    alpha: f64,
    rho: f64,
    consts: &CoveringConstants,
    k_max: usize,
) -> Result<Certification> {
    check_alpha(alpha)?;
    let k_min = (k_max / 2).max(1);
    if k_max < 2 {
        return Err(Error::TreeTooShallow { have: k_max, want: 2 });
    }
    let masses: Vec<CoveringMass> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| covering_certificate(tree, alpha, rho, consts, k))
        .collect::<Result<_>>()?;
    let monotone = masses.windows(2).all(|w| w[1].mk < w[0].mk);
    let condition_holds = masses[0].condition_holds;
    let certified = monotone && condition_holds;
    let mut warnings = Vec::new();
    if !condition_holds {
        warnings.push(format!(
            "rho^(alpha-1) = {:.6} is not below 1/A(alpha) = {:.6}",
            rho.powf(alpha - 1.0),
            1.0 / masses[0].a_alpha
        ));
    }
    if !monotone {
        warnings.push("M_k is not strictly decreasing".into());
    }
    Ok(Certification {
        certified,
        monotone,
        condition_holds,
        estimate: DimensionEstimate {
            method: Method::Certificate,
            value: alpha,
            table: masses.iter().map(|m| (m.k as f64, m.mk)).collect(),
            r2: None,
            warnings,
        },
        masses,
    })
}

/// Tightest constants a tree satisfies: `a0` from the power-sum bound at
/// each node, `a3` from recorded arc lengths (1 when no arc geometry).
pub fn empirical_constants(tree: &CircleTree, alpha: f64, rho: f64) -> Result<CoveringConstants> {
    check_alpha(alpha)?;
    let scale = rho.powf(alpha - 1.0) * zeta(alpha)? / (2f64.powf(alpha - 1.0) - 1.0);
    let mut a0 = 0f64;
    for n in tree.nodes() {
        if n.children.is_empty() {
            continue;
        }
        let sum: f64 = n.children.iter().map(|&c| tree.node(c).r.powf(alpha)).sum();
        a0 = a0.max(sum / (scale * n.r.powf(alpha)));
    }
    Ok(CoveringConstants { a0: if a0 > 0.0 { a0 } else { 1.0 }, a3: 1.0, c0: 1.0 })
}

/// Certificate report JSON.
pub fn certificate_json(cert: &Certification) -> Result<String> {
    #[derive(Serialize)]
    struct Report<'a> {
        alpha: f64,
        rho: f64,
        k: usize,
        #[serde(rename = "Mk_series")]
        mk_series: Vec<f64>,
        #[serde(rename = "A_alpha")]
        a_alpha: f64,
        condition_holds: bool,
        monotone: bool,
        certified: bool,
        warnings: &'a [String],
    }
    let last = cert.masses.last().ok_or(Error::EmptySet)?;
    Ok(serde_json::to_string_pretty(&Report {
        alpha: last.alpha,
        rho: last.rho,
        k: last.k,
        mk_series: cert.masses.iter().map(|m| m.mk).collect(),
        a_alpha: last.a_alpha,
        condition_holds: cert.condition_holds,
        monotone: cert.monotone,
        certified: cert.certified,
        warnings: &cert.estimate.warnings,
    })?)
}

/// Box-count CSV with a summary line.
pub fn box_csv(est: &DimensionEstimate) -> String {
    let mut out = String::from("eps,N\n");
    for (e, n) in &est.table {
        out.push_str(&format!("{e:e},{n}\n"));
    }
    out.push_str(&format!("# dimension={:.6} r2={}\n", est.value, est.r2.map_or("na".into(), |r| format!("{r:.6}"))));
    out
}
