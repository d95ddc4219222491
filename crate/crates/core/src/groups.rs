//! Finitely generated Kleinian groups with optional ping-pong data.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moebius::{Complex, ExtPoint, MapKind, MoebiusMap, RoundDisk};
use crate::tolerances::TOL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub label: String,
    #[serde(flatten)]
    pub map: MoebiusMap,
}

/// `label` maps the exterior of `source` onto the interior of `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PingPong {
    pub label: String,
    pub source: RoundDisk,
    pub target: RoundDisk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GroupSpec {
    pub generators: Vec<Generator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pingpong: Option<Vec<PingPong>>,
    #[serde(default)]
    pub parabolic: Vec<String>,
}

impl GroupSpec {
    pub fn trivial() -> Self {
        GroupSpec::default()
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generator(&self, label: &str) -> Option<&MoebiusMap> {
        self.generators.iter().find(|g| g.label == label).map(|g| &g.map)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.label == label)
    }

    /// Ping-pong entry of generator `index`, if any.
    pub fn pingpong_for(&self, index: usize) -> Option<&PingPong> {
        let label = &self.generators[index].label;
        self.pingpong.as_ref()?.iter().find(|p| &p.label == label)
    }

    /// Disks whose half-spaces are removed to form the fundamental
    /// polyhedron: every source and target.
    pub fn complement_disks(&self) -> Vec<RoundDisk> {
        self.pingpong
            .iter()
            .flatten()
            .flat_map(|p| [p.source, p.target])
            .collect()
    }

    /// Check label uniqueness, references, determinants and disk relations.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for g in &self.generators {
            if g.label.is_empty() || !seen.insert(g.label.as_str()) {
                return Err(Error::InvalidGroup(format!("duplicate or empty label {:?}", g.label)));
            }
            let scale = g.map.entries().iter().map(|e| e.norm_sqr()).fold(1.0, f64::max);
            if (g.map.det() - 1.0).norm() > TOL.normalization * 10.0 * scale {
                return Err(Error::InvalidGroup(format!("generator {} is not normalized", g.label)));
            }
        }
        for label in &self.parabolic {
            let map = self
                .generator(label)
                .ok_or_else(|| Error::InvalidGroup(format!("unknown parabolic label {label}")))?;
            if map.classify() != MapKind::Parabolic {
                return Err(Error::InvalidGroup(format!("{label} is not parabolic")));
            }
        }
        if let Some(pp) = &self.pingpong {
            let mut seen = HashSet::new();
            for p in pp {
                let map = self
                    .generator(&p.label)
                    .ok_or_else(|| Error::InvalidGroup(format!("ping-pong for unknown label {}", p.label)))?;
                if !seen.insert(p.label.as_str()) {
                    return Err(Error::InvalidGroup(format!("two ping-pong entries for {}", p.label)));
                }
                if !p.source.is_normalized() || !p.target.is_normalized() {
                    return Err(Error::InvalidGroup(format!("degenerate disk for {}", p.label)));
                }
                let image = map.map_disk(&p.source.complement());
                if !image.approx_eq(&p.target, TOL.geometric) {
                    return Err(Error::InvalidGroup(format!(
                        "{} does not map the exterior of its source onto its target",
                        p.label
                    )));
                }
            }
            let disks = self.complement_disks();
            for i in 0..disks.len() {
                for j in i + 1..disks.len() {
                    if !disks[i].closures_disjoint(&disks[j]) {
                        return Err(Error::OverlappingDisks(i, j));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GroupSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Conjugate every generator and transport ping-pong disks by `h`.
    pub fn conjugated(&self, h: &MoebiusMap) -> GroupSpec {
        GroupSpec {
            generators: self
                .generators
                .iter()
                .map(|g| Generator { label: g.label.clone(), map: g.map.conjugate_by(h) })
                .collect(),
            pingpong: self.pingpong.as_ref().map(|pp| {
                pp.iter()
                    .map(|p| PingPong {
                        label: p.label.clone(),
                        source: h.map_disk(&p.source),
                        target: h.map_disk(&p.target),
                    })
                    .collect()
            }),
            parabolic: self.parabolic.clone(),
        }
    }
}

/// Boundary length of a one-holed torus page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGroupParams {
    pub boundary_length: f64,
}

/// Cyclic group, with isometric-circle ping-pong data when available.
pub fn cyclic_group(gamma: &MoebiusMap) -> Result<GroupSpec> {
    let label = "g".to_string();
    match gamma.classify() {
        MapKind::Elliptic => Err(Error::EllipticGenerator(label)),
        MapKind::Identity => Err(Error::InvalidGroup("identity generator".into())),
        MapKind::Parabolic => Ok(GroupSpec {
            generators: vec![Generator { label: label.clone(), map: *gamma }],
            pingpong: None,
            parabolic: vec![label],
        }),
        MapKind::Loxodromic => {
            let pingpong = loxodromic_pingpong(gamma)?;
            let pingpong = pingpong.filter(|(s, t)| s.closures_disjoint(t)).map(|(source, target)| {
                vec![PingPong { label: label.clone(), source, target }]
            });
            Ok(GroupSpec {
                generators: vec![Generator { label, map: *gamma }],
                pingpong,
                parabolic: vec![],
            })
        }
    }
}

/// `(source, target)` for a loxodromic map: isometric circles of `γ` and
/// `γ⁻¹`, or an annulus pair around the finite fixed point when `γ` fixes ∞.
pub(crate) fn loxodromic_pingpong(gamma: &MoebiusMap) -> Result<Option<(RoundDisk, RoundDisk)>> {
    if let (Some((c_src, r)), Some((c_tgt, _))) = (gamma.isometric_circle(), gamma.inverse().isometric_circle()) {
        let source = RoundDisk::disk(c_src, r)?;
        let target = RoundDisk::disk(c_tgt, r)?;
        return Ok(Some((source, target)));
    }
    // z -> k z + w, fixed point z0 = w / (1 - k).
    let k = gamma.a() / gamma.d();
    let w = gamma.b() / gamma.d();
    let z0 = w / (Complex::new(1.0, 0.0) - k);
    let kn = k.norm();
    if (kn - 1.0).abs() < TOL.geometric {
        return Ok(None);
    }
    let (expand, inner) = if kn > 1.0 { (kn, 1.0 / kn.sqrt()) } else { (1.0 / kn, kn.sqrt()) };
    let small = RoundDisk::disk(z0, inner)?;
    let big_ext = RoundDisk::exterior(z0, inner * expand)?;
    // Expanding: the exterior of `small` goes onto the exterior of the big
    // circle. Contracting: the reverse.
    Ok(Some(if kn > 1.0 { (small, big_ext) } else { (big_ext, small) }))
}

/// Map sending the exterior of `source` onto the interior of `target`,
/// pinned by three marked boundary points.
pub fn pairing_map(source: &RoundDisk, target: &RoundDisk) -> Result<MoebiusMap> {
    let from = source.boundary_points();
    let to = target.boundary_points();
    for order in [[0usize, 2, 1], [0, 1, 2]] {
        let g = MoebiusMap::three_point(from, [to[order[0]], to[order[1]], to[order[2]]])?;
        if g.map_disk(&source.complement()).approx_eq(target, TOL.geometric) {
            return Ok(g);
        }
    }
    Err(Error::InvalidGroup("no orientation of the marked points pairs the disks".into()))
}

/// Classical Schottky group on disjoint disk pairs.
pub fn schottky_group(pairs: &[(RoundDisk, RoundDisk)]) -> Result<GroupSpec> {
    let disks: Vec<RoundDisk> = pairs.iter().flat_map(|(s, t)| [*s, *t]).collect();
    for i in 0..disks.len() {
        for j in i + 1..disks.len() {
            if !disks[i].closures_disjoint(&disks[j]) {
                return Err(Error::OverlappingDisks(i, j));
            }
        }
    }
    let mut generators = Vec::new();
    let mut pingpong = Vec::new();
    for (i, (s, t)) in pairs.iter().enumerate() {
        let label = schottky_label(i);
        generators.push(Generator { label: label.clone(), map: pairing_map(s, t)? });
        pingpong.push(PingPong { label, source: *s, target: *t });
    }
    Ok(GroupSpec { generators, pingpong: Some(pingpong), parabolic: vec![] })
}

fn schottky_label(i: usize) -> String {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    if i < LETTERS.len() {
        (LETTERS[i] as char).to_string()
    } else {
        format!("g{i}")
    }
}

/// A one-holed torus group with its boundary element normalized to fix
/// 0 (attracting) and ∞ (repelling).
#[derive(Debug, Clone, PartialEq)]
pub struct OneHoledTorus {
    pub a: MoebiusMap,
    pub b: MoebiusMap,
    /// `[A, B]` or its inverse, whichever attracts to 0.
    pub boundary: MoebiusMap,
    /// Crossing point of the axes of `A` and `B`, a point in the thick part.
    pub thick_point: Complex,
    /// `+1` when the limit set lies in `[0, ∞]`, `-1` for `[-∞, 0]`.
    pub side: f64,
    /// `cosh` of half the translation length of `A` (and `B`).
    pub cosh_half: f64,
}

/// Symmetric one-holed torus: `A`, `B` with perpendicular axes through `i`
/// and equal traces, with the trace parameter solved by bisection so that
/// `tr[A, B] = -2 cosh(ℓ/2)`.
pub fn one_holed_torus(params: SurfaceGroupParams) -> Result<OneHoledTorus> {
    let ell = params.boundary_length;
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(Error::ParamsOutOfRange(format!("boundary length {ell} must be > 0")));
    }
    let target = -2.0 * (ell / 2.0).cosh();
    // tr[A,B] = 8c² - 4c⁴ - 2, decreasing for c > 1; equals -2 at c² = 2.
    let commutator_trace = |c: f64| 8.0 * c * c - 4.0 * c.powi(4) - 2.0;
    let mut lo = 2f64.sqrt();
    let mut hi = 2.0;
    while commutator_trace(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if commutator_trace(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let s = (c * c - 1.0).sqrt();
    let a = MoebiusMap::from_real(c, s, s, c)?;
    let b = MoebiusMap::from_real(c + s, 0.0, 0.0, c - s)?;
    let k = a.compose(&b).compose(&a.inverse()).compose(&b.inverse());
    let fp = k.fixed_points()?;
    let mut xs: Vec<f64> = fp.iter().filter_map(|p| p.as_finite()).map(|z| z.re).collect();
    if xs.len() != 2 {
        return Err(Error::ParamsOutOfRange("commutator fixes ∞".into()));
    }
    xs.sort_by(f64::total_cmp);
    let (x2, x1) = (xs[0], xs[1]);
    // Real map with positive determinant: x1 -> 0, x2 -> ∞.
    let frame = MoebiusMap::from_real(1.0, -x1, 1.0, -x2)?;
    let a = a.conjugate_by(&frame);
    let b = b.conjugate_by(&frame);
    let mut boundary = k.conjugate_by(&frame);
    if boundary.attracting_fixed_point()?.is_infinite() {
        boundary = boundary.inverse();
    }
    let thick = frame.apply_c(Complex::new(0.0, 1.0)).as_finite().ok_or(Error::PoleAt("i".into()))?;
    let side = match a.attracting_fixed_point()? {
        ExtPoint::Finite(z) if z.re < 0.0 => -1.0,
        _ => 1.0,
    };
    Ok(OneHoledTorus { a, b, boundary, thick_point: thick, side, cosh_half: c })
}

/// Fuchsian one-holed torus group with boundary geodesic of length `ℓ`.
pub fn fuchsian_one_holed_torus(params: SurfaceGroupParams) -> Result<GroupSpec> {
    let t = one_holed_torus(params)?;
    Ok(GroupSpec {
        generators: vec![
            Generator { label: "A".into(), map: t.a },
            Generator { label: "B".into(), map: t.b },
        ],
        pingpong: None,
        parabolic: vec![],
    })
}

/// Rank-2 parabolic group `⟨z + μ0, z + i m d⟩`.
pub fn rank2_parabolic(mu0: f64, d: f64, m: u32) -> Result<GroupSpec> {
    if !(mu0 > 0.0) || !(d > 0.0) || m == 0 {
        return Err(Error::ParamsOutOfRange(format!("mu0={mu0}, d={d}, m={m}")));
    }
    Ok(GroupSpec {
        generators: vec![
            Generator { label: "u".into(), map: MoebiusMap::translation(Complex::new(mu0, 0.0)) },
            Generator { label: "v".into(), map: MoebiusMap::translation(Complex::new(0.0, m as f64 * d)) },
        ],
        pingpong: None,
        parabolic: vec!["u".into(), "v".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn cyclic_diagonal_gets_annulus_pair() {
        let g = MoebiusMap::diagonal(c(10.0, 0.0)).unwrap();
        let spec = cyclic_group(&g).unwrap();
        let pp = spec.pingpong.as_ref().unwrap();
        assert_eq!(pp.len(), 1);
        assert!(g.map_disk(&pp[0].source.complement()).approx_eq(&pp[0].target, 1e-9));
        spec.validate().unwrap();
    }

    #[test]
    fn cyclic_isometric_circles() {
        // conjugate diag(10, 1/10) by z -> 1/(z - 1)
        let g = MoebiusMap::diagonal(c(10.0, 0.0)).unwrap();
        let h = MoebiusMap::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)).unwrap();
        let gamma = g.conjugate_by(&h);
        let spec = cyclic_group(&gamma).unwrap();
        let pp = &spec.pingpong.as_ref().expect("isometric disks disjoint")[0];
        let (_, r) = gamma.isometric_circle().unwrap();
        assert!((pp.source.radius() - r).abs() < 1e-12);
        assert!((r - 1.0 / gamma.c().norm()).abs() < 1e-15);
        spec.validate().unwrap();
    }

    #[test]
    fn cyclic_parabolic_and_elliptic() {
        let spec = cyclic_group(&MoebiusMap::translation(c(1.0, 0.0))).unwrap();
        assert!(spec.pingpong.is_none());
        assert_eq!(spec.parabolic, vec!["g".to_string()]);
        assert!(matches!(cyclic_group(&MoebiusMap::rotation(1.0)), Err(Error::EllipticGenerator(_))));
    }

    #[test]
    fn schottky_rank_one_and_tangent() {
        let s = RoundDisk::disk(c(-1.0, 0.0), 0.25).unwrap();
        let t = RoundDisk::disk(c(1.0, 0.0), 0.25).unwrap();
        let spec = schottky_group(&[(s, t)]).unwrap();
        spec.validate().unwrap();
        let g = spec.generators[0].map;
        assert_eq!(g.classify(), MapKind::Loxodromic);
        // the standard pairing z -> c2 + r1 r2 / (z - c1)
        let z = c(0.3, 0.7);
        let expected = c(1.0, 0.0) + 0.0625 / (z - c(-1.0, 0.0));
        assert!((g.apply_c(z).as_finite().unwrap() - expected).norm() < 1e-12);
        let tangent = RoundDisk::disk(c(-0.5, 0.0), 0.25).unwrap();
        assert_eq!(schottky_group(&[(s, tangent)]), Err(Error::OverlappingDisks(0, 1)));
    }

    #[test]
    fn one_holed_torus_boundary_length() {
        for ell in [0.1, 0.5, 1.0, 2.0] {
            let t = one_holed_torus(SurfaceGroupParams { boundary_length: ell }).unwrap();
            assert_eq!(t.boundary.classify(), MapKind::Loxodromic);
            assert!((t.boundary.translation_length().unwrap() - ell).abs() < 1e-6, "ell={ell}");
            // closed form c² = 1 + cosh(ℓ/4)
            assert!((t.cosh_half.powi(2) - (1.0 + (ell / 4.0).cosh())).abs() < 1e-12);
            for m in [t.a, t.b, t.boundary] {
                for e in m.entries() {
                    assert!(e.im.abs() < 1e-12, "entries must be real");
                }
            }
            let fp = t.boundary.fixed_points().unwrap();
            assert!(fp[0].approx_eq(&ExtPoint::finite(0.0, 0.0), 1e-9));
            assert!(fp[1].is_infinite());
            assert!(t.thick_point.im > 0.0);
        }
    }

    #[test]
    fn fuchsian_generators_preserve_real_line() {
        let spec = fuchsian_one_holed_torus(SurfaceGroupParams { boundary_length: 1.0 }).unwrap();
        for g in &spec.generators {
            for x in [-2.0, 0.3, 5.0] {
                if let ExtPoint::Finite(w) = g.map.apply_c(c(x, 0.0)) {
                    assert!(w.im.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rank2_parabolic_lattice() {
        let spec = rank2_parabolic(1.0, 1.0, 1).unwrap();
        let (u, v) = (spec.generators[0].map, spec.generators[1].map);
        assert!(u.compose(&v).approx_eq(&v.compose(&u), 1e-15));
        assert!(u.approx_eq(&MoebiusMap::translation(c(1.0, 0.0)), 0.0));
        spec.validate().unwrap();
        assert!(rank2_parabolic(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_stable() {
        let s = RoundDisk::disk(c(-1.0, 0.1), 0.3).unwrap();
        let t = RoundDisk::disk(c(1.0, -0.2), 0.2).unwrap();
        let spec = schottky_group(&[(s, t)]).unwrap();
        let text = spec.to_json().unwrap();
        let back = GroupSpec::from_json(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn validate_rejects_bad_specs() {
        let mut spec = rank2_parabolic(1.0, 1.0, 1).unwrap();
        spec.generators[1].label = "u".into();
        assert!(spec.validate().is_err());
        assert!(GroupSpec::from_json("{not json").is_err());
    }
}
