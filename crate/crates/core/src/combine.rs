//! Klein combination and the pull-apart construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{loxodromic_pingpong, Generator, GroupSpec, PingPong};
use crate::moebius::{
    euclidean_set_distance, Complex, DiskShape, ExtPoint, HalfSpace, MapKind, MoebiusMap, RoundDisk, SetPiece,
    UhsPoint,
};
use crate::tolerances::TOL;

/// Fundamental polyhedron `F = H³ \ ∪ H(D)`, recorded by the disks `D` of
/// the removed half-spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PolyhedronData {
    pub complement_disks: Vec<RoundDisk>,
}

impl PolyhedronData {
    pub fn from_group(g: &GroupSpec) -> Result<Self> {
        if g.generators.is_empty() {
            return Ok(PolyhedronData::default());
        }
        if g.pingpong.is_none() {
            return Err(Error::InvalidGroup("no ping-pong data for a fundamental polyhedron".into()));
        }
        Ok(PolyhedronData { complement_disks: g.complement_disks() })
    }

    pub fn transformed(&self, h: &MoebiusMap) -> Self {
        PolyhedronData { complement_disks: self.complement_disks.iter().map(|d| h.map_disk(d)).collect() }
    }

    fn pieces(&self) -> Vec<SetPiece> {
        self.complement_disks.iter().map(|d| SetPiece::HalfSpace(HalfSpace::new(*d))).collect()
    }
}

/// Klein's hypothesis: the closure of each polyhedron's complement lies in
/// the interior of the other polyhedron. Symmetric in its arguments.
pub fn verify_klein(f0: &PolyhedronData, f1: &PolyhedronData) -> bool {
    f0.complement_disks
        .iter()
        .all(|d0| f1.complement_disks.iter().all(|d1| d0.closures_disjoint(d1)))
}

/// Group generated by `g0` and `g1`, with the union of their ping-pong data.
/// Clashing labels of `g1` get a `_1` suffix.
pub fn combine(g0: &GroupSpec, f0: &PolyhedronData, g1: &GroupSpec, f1: &PolyhedronData) -> Result<GroupSpec> {
    if !verify_klein(f0, f1) {
        return Err(Error::KleinHypothesisFails);
    }
    let mut out = g0.clone();
    let mut pingpong = g0.pingpong.clone().unwrap_or_default();
    for g in &g1.generators {
        let mut label = g.label.clone();
        while out.index_of(&label).is_some() {
            label.push_str("_1");
        }
        out.generators.push(Generator { label: label.clone(), map: g.map });
        if g1.parabolic.contains(&g.label) {
            out.parabolic.push(label.clone());
        }
        if let Some(p) = g1.pingpong.iter().flatten().find(|p| p.label == g.label) {
            pingpong.push(PingPong { label, source: p.source, target: p.target });
        }
    }
    out.pingpong = if g0.pingpong.is_some() || g1.pingpong.is_some() { Some(pingpong) } else { None };
    out.validate()?;
    Ok(out)
}

/// Sup of `|h'|` over the closure of `F1`'s complement, with the sample
/// refined until the relative change drops below `TOL.sup_refine`.
pub fn sup_derivative(f1: &PolyhedronData, h: &MoebiusMap) -> Result<f64> {
    if f1.complement_disks.is_empty() {
        return Err(Error::EmptySet);
    }
    let pole = h.inverse().apply(&ExtPoint::Infinity);
    if let ExtPoint::Finite(p) = pole {
        for d in &f1.complement_disks {
            if d.form(p) <= TOL.geometric {
                return Err(Error::PoleInsideRegion);
            }
        }
    }
    let mut n = 64;
    let mut prev = sample_sup(f1, h, pole, n)?;
    for _ in 0..10 {
        n *= 2;
        let next = sample_sup(f1, h, pole, n)?;
        let done = (next - prev).abs() <= TOL.sup_refine * next;
        prev = prev.max(next);
        if done {
            break;
        }
    }
    Ok(prev)
}

fn sample_sup(f1: &PolyhedronData, h: &MoebiusMap, pole: ExtPoint, n: usize) -> Result<f64> {
    let mut best = 0f64;
    for d in &f1.complement_disks {
        let pts: Vec<Complex> = match d.shape() {
            DiskShape::Disk { center, radius } => {
                // Concentric rings, including the boundary circle.
                let rings = (n / 8).max(2);
                let mut pts = vec![center];
                for k in 1..=rings {
                    let r = radius * k as f64 / rings as f64;
                    pts.extend((0..n).map(|j| center + Complex::from_polar(r, j as f64 * std::f64::consts::TAU / n as f64)));
                }
                pts
            }
            // |h'| tends to 0 at ∞ when h moves ∞, so the boundary carries the sup.
            DiskShape::Exterior { .. } => d.boundary_sample(n, 0.0),
            DiskShape::HalfPlane { normal, offset } => {
                let foot = match pole {
                    ExtPoint::Finite(p) => p - normal * ((p.re * normal.re + p.im * normal.im) - offset),
                    ExtPoint::Infinity => normal * offset,
                };
                let dir = normal * Complex::new(0.0, 1.0);
                let span = 1.0 + match pole {
                    ExtPoint::Finite(p) => 10.0 * (p - foot).norm(),
                    ExtPoint::Infinity => 0.0,
                };
                (0..=n).map(|k| foot + dir * (span * (2.0 * k as f64 / n as f64 - 1.0))).collect()
            }
        };
        for z in pts {
            best = best.max(h.derivative_norm(z)?);
        }
    }
    Ok(best)
}

/// `sup |h'| / d(F0ᶜ, h(F1ᶜ))`, plus both ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PattersonRatio {
    pub ratio: f64,
    pub sup_derivative: f64,
    pub set_distance: f64,
}

pub fn patterson_ratio(f0: &PolyhedronData, f1: &PolyhedronData, h: &MoebiusMap) -> Result<PattersonRatio> {
    let sup = sup_derivative(f1, h)?;
    let dist = euclidean_set_distance(&f0.pieces(), &f1.transformed(h).pieces())?;
    if dist <= 0.0 {
        return Err(Error::ZeroDistance);
    }
    Ok(PattersonRatio { ratio: sup / dist, sup_derivative: sup, set_distance: dist })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullApartTrace {
    pub k: u32,
    pub ratio: f64,
    pub set_distance: f64,
    pub sup_derivative: f64,
    /// Translation length of the pulling map `γ`.
    pub gamma_length: f64,
    pub combined: GroupSpec,
}

/// Disks `D̃0 ∋ z0` and `D̃1 = D̃0ᶜ ∋ z1` with `F1ᶜ ⊂ D̃0` and `F0ᶜ ⊂ D̃1`.
pub fn separating_disks(
    f0: &PolyhedronData,
    f1: &PolyhedronData,
    z0: Complex,
    z1: Complex,
) -> Result<(RoundDisk, RoundDisk)> {
    // Try a round disk about z0 swallowing F1ᶜ, then one about z1 swallowing F0ᶜ.
    let attempt = |center: Complex, inside: &PolyhedronData, outside: &PolyhedronData, other: Complex| {
        let reach = |d: &RoundDisk| match d.shape() {
            DiskShape::Disk { center: c, radius } => Some(((c - center).norm() + radius, (c - center).norm() - radius)),
            _ => None,
        };
        let mut r_min = 0f64;
        for d in &inside.complement_disks {
            r_min = r_min.max(reach(d)?.0);
        }
        let mut r_max = (other - center).norm();
        for d in &outside.complement_disks {
            r_max = r_max.min(reach(d)?.1);
        }
        (r_min < r_max && r_max > 0.0).then(|| RoundDisk::disk(center, 0.5 * (r_min + r_max)).ok()).flatten()
    };
    if let Some(d0) = attempt(z0, f1, f0, z1) {
        return Ok((d0, d0.complement()));
    }
    if let Some(d1) = attempt(z1, f0, f1, z0) {
        return Ok((d1.complement(), d1));
    }
    Err(Error::NoSeparatingDisks(format!("no round circle separates the polyhedra around {z0} and {z1}")))
}

/// Smallest length `0.5 · 2^j` whose loxodromic map (attracting `z0`,
/// repelling `z1`) pushes `closure(D̃0)` into its own interior.
pub fn pulling_map(d0: &RoundDisk, z0: Complex, z1: Complex) -> Result<MoebiusMap> {
    let mut length = 0.5;
    for _ in 0..40 {
        let gamma = MoebiusMap::loxodromic_with_axis(z0.into(), z1.into(), length, 0.0)?;
        if gamma.map_disk(d0).closure_inside(d0) {
            return Ok(gamma);
        }
        length *= 2.0;
    }
    Err(Error::NoSeparatingDisks("no pulling length nests the disk".into()))
}

/// Amalgamated-product pull-apart: conjugate `g1` by `γ^k` and combine.
pub fn pull_apart_amalgam(g0: &GroupSpec, g1: &GroupSpec, z0: Complex, z1: Complex, k: u32) -> Result<PullApartTrace> {
    let f0 = PolyhedronData::from_group(g0)?;
    let f1 = PolyhedronData::from_group(g1)?;
    let (d0, _) = separating_disks(&f0, &f1, z0, z1)?;
    let gamma = pulling_map(&d0, z0, z1)?;
    let h = gamma.pow(k as i64);
    let g1k = g1.conjugated(&h);
    let f1k = f1.transformed(&h);
    let combined = combine(g0, &f0, &g1k, &f1k)?;
    let pr = patterson_ratio(&f0, &f1, &h)?;
    Ok(PullApartTrace {
        k,
        ratio: pr.ratio,
        set_distance: pr.set_distance,
        sup_derivative: pr.sup_derivative,
        gamma_length: gamma.translation_length()?,
        combined,
    })
}

/// HNN pull-apart: add `γ^k` as a new generator `t`, where `γ` pairs its
/// isometric disks and those disks sit inside `g0`'s polyhedron.
pub fn pull_apart_hnn(g0: &GroupSpec, gamma: &MoebiusMap, k: u32) -> Result<PullApartTrace> {
    if k == 0 {
        return Err(Error::ParamsOutOfRange("k must be at least 1".into()));
    }
    if gamma.classify() != MapKind::Loxodromic {
        return Err(Error::NonLoxodromic);
    }
    let f0 = PolyhedronData::from_group(g0)?;
    let (src, tgt) = loxodromic_pingpong(gamma)?.ok_or(Error::NonLoxodromic)?;
    if !src.closures_disjoint(&tgt)
        || !f0.complement_disks.iter().all(|d| d.closures_disjoint(&src) && d.closures_disjoint(&tgt))
    {
        return Err(Error::DisksNotInDomain);
    }
    let gk = gamma.pow(k as i64);
    let inner = gamma.pow(k as i64 - 1).map_disk(&tgt);
    let fk = PolyhedronData { complement_disks: vec![src, inner] };
    let mut label = "t".to_string();
    while g0.index_of(&label).is_some() {
        label.push_str("_1");
    }
    let single = GroupSpec {
        generators: vec![Generator { label: label.clone(), map: gk }],
        pingpong: Some(vec![PingPong { label, source: src, target: inner }]),
        parabolic: vec![],
    };
    let combined = combine(g0, &f0, &single, &fk)?;
    // The new generator contracts the target disk toward the attracting point.
    let target_only = PolyhedronData { complement_disks: vec![tgt] };
    let sup = sup_derivative(&target_only, &gk)?;
    let dist = if f0.complement_disks.is_empty() {
        euclidean_set_distance(&fk.pieces()[..1], &fk.pieces()[1..])?
    } else {
        euclidean_set_distance(&f0.pieces(), &fk.pieces())?
    };
    if dist <= 0.0 {
        return Err(Error::ZeroDistance);
    }
    Ok(PullApartTrace {
        k,
        ratio: sup / dist,
        set_distance: dist,
        sup_derivative: sup,
        gamma_length: gamma.translation_length()?,
        combined,
    })
}

/// Euclidean scaling of `g` at `x` in the ball model, computed from the
/// half-space coordinates of `x` and `g(x)`.
pub fn ball_derivative(x: &UhsPoint, gx: &UhsPoint) -> f64 {
    let den = |p: &UhsPoint| p.z.norm_sqr() + (p.t + 1.0).powi(2);
    (gx.t / x.t) * (den(x) / den(gx))
}

/// `Σ_{j≠0} |(γ^{jk})'(w)|^s` with ball-model derivatives. Powers are
/// taken in the frame that diagonalizes `γ`.
pub fn power_series_sum(gamma: &MoebiusMap, w: &UhsPoint, s: f64, k: u32) -> Result<f64> {
    if gamma.classify() != MapKind::Loxodromic {
        return Err(Error::NonLoxodromic);
    }
    if k == 0 || !(s > 0.0) {
        return Err(Error::ParamsOutOfRange(format!("k={k}, s={s}")));
    }
    let fp = gamma.fixed_points()?;
    let frame = MoebiusMap::frame(fp[0], fp[1])?;
    let diag = gamma.conjugate_by(&frame.inverse());
    let mu = diag.a() / diag.d();
    let u = frame.inverse().apply_h3(w);
    let term = |n: i64| {
        let m = (mu.ln() * n as f64).exp();
        let moved = UhsPoint { z: m * u.z, t: m.norm() * u.t };
        ball_derivative(w, &frame.apply_h3(&moved)).powf(s)
    };
    let mut sum = 0.0;
    for sign in [1i64, -1] {
        let mut prev = f64::INFINITY;
        let mut j = 1i64;
        loop {
            let t = term(sign * j * k as i64);
            if !t.is_finite() {
                return Err(Error::DivergentSeries);
            }
            sum += t;
            if t <= TOL.series_rel * sum && t <= prev {
                break;
            }
            prev = t;
            j += 1;
            if j > 1_000_000 {
                return Err(Error::DivergentSeries);
            }
        }
    }
    Ok(sum)
}

/// CSV of a pull-apart sweep.
pub fn sweep_csv(traces: &[PullApartTrace]) -> String {
    let mut out = String::from("k,ratio,set_distance,sup_derivative,gamma_length\n");
    for t in traces {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{}\n",
            t.k, t.ratio, t.set_distance, t.sup_derivative, t.gamma_length
        ));
    }
    out
}
