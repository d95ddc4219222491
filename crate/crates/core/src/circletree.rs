//! Rooted trees of circular arcs with recorded diameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moebius::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Root,
    /// Meets its parent along a geodesic.
    Type1,
    /// Meets its parent at a parabolic point.
    Type2,
}

/// Arc of the circle through `start`, `mid`, `end`, traversed in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArcGeom {
    Circle { center: Complex, radius: f64 },
    Arc { start: Complex, mid: Complex, end: Complex },
}

impl ArcGeom {
    /// Euclidean diameter of the point set.
    pub fn diameter(&self) -> f64 {
        match *self {
            ArcGeom::Circle { radius, .. } => 2.0 * radius,
            ArcGeom::Arc { start, mid, end } => match circumcircle(start, mid, end) {
                Some((center, radius)) => {
                    let span = arc_span(center, start, mid, end);
                    if span >= std::f64::consts::PI {
                        2.0 * radius
                    } else {
                        (end - start).norm()
                    }
                }
                // Collinear: a segment when mid lies between the ends.
                None => {
                    let t = (mid - start).re * (end - start).re + (mid - start).im * (end - start).im;
                    if t >= 0.0 && t <= (end - start).norm_sqr() {
                        (end - start).norm()
                    } else {
                        f64::INFINITY
                    }
                }
            },
        }
    }

    /// Supporting circle, `None` for straight arcs.
    pub fn circle(&self) -> Option<(Complex, f64)> {
        match *self {
            ArcGeom::Circle { center, radius } => Some((center, radius)),
            ArcGeom::Arc { start, mid, end } => circumcircle(start, mid, end),
        }
    }

    /// Whether `z` (assumed on the supporting circle) lies strictly inside
    /// the arc, away from its endpoints by more than `tol`.
    pub fn contains_interior(&self, z: Complex, tol: f64) -> bool {
        match *self {
            ArcGeom::Circle { .. } => true,
            ArcGeom::Arc { start, mid, end } => {
                let Some((center, _)) = circumcircle(start, mid, end) else {
                    return false;
                };
                if (z - start).norm() <= tol || (z - end).norm() <= tol {
                    return false;
                }
                let span = arc_span(center, start, mid, end);
                let at = ccw_angle(center, start, z);
                let mid_at = ccw_angle(center, start, mid);
                if mid_at <= span {
                    at < span
                } else {
                    at > std::f64::consts::TAU - span
                }
            }
        }
    }
}

fn ccw_angle(center: Complex, from: Complex, to: Complex) -> f64 {
    ((to - center) / (from - center)).arg().rem_euclid(std::f64::consts::TAU)
}

/// Angular span of the arc from `start` through `mid` to `end`.
fn arc_span(center: Complex, start: Complex, mid: Complex, end: Complex) -> f64 {
    let to_end = ccw_angle(center, start, end);
    let to_mid = ccw_angle(center, start, mid);
    if to_mid <= to_end {
        to_end
    } else {
        std::f64::consts::TAU - to_end
    }
}

pub fn circumcircle(a: Complex, b: Complex, c: Complex) -> Option<(Complex, f64)> {
    let ab = b - a;
    let ac = c - a;
    let cross = ab.re * ac.im - ab.im * ac.re;
    let scale = ab.norm() * ac.norm();
    if cross.abs() <= 1e-14 * scale || scale == 0.0 {
        return None;
    }
    let d = 2.0 * cross;
    let ux = (ac.im * ab.norm_sqr() - ab.im * ac.norm_sqr()) / d;
    let uy = (ab.re * ac.norm_sqr() - ac.re * ab.norm_sqr()) / d;
    let u = Complex::new(ux, uy);
    Some((a + u, u.norm()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleNode {
    pub parent: Option<usize>,
    pub level: usize,
    pub r: f64,
    pub kind: NodeKind,
    pub word: String,
    pub geom: Option<ArcGeom>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleTree {
    nodes: Vec<CircleNode>,
}

impl CircleTree {
    pub fn new(r: f64, geom: Option<ArcGeom>) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::OutOfRange(r, "node diameter must be positive"));
        }
        Ok(CircleTree {
            nodes: vec![CircleNode {
                parent: None,
                level: 0,
                r,
                kind: NodeKind::Root,
                word: String::new(),
                geom,
                children: vec![],
            }],
        })
    }

    pub fn add_child(
        &mut self,
        parent: usize,
        r: f64,
        kind: NodeKind,
        word: String,
        geom: Option<ArcGeom>,
    ) -> Result<usize> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::OutOfRange(r, "node diameter must be positive"));
        }
        let id = self.nodes.len();
        let level = self.nodes[parent].level + 1;
        self.nodes.push(CircleNode { parent: Some(parent), level, r, kind, word, geom, children: vec![] });
        self.nodes[parent].children.push(id);
        Ok(id)
    }

    /// Self-similar tree: every node has `b` children of diameter
    /// `ratio · r(parent)`.
    pub fn self_similar(b: usize, ratio: f64, depth: usize, r0: f64) -> Result<Self> {
        let mut tree = CircleTree::new(r0, None)?;
        let mut frontier = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(frontier.len() * b);
            for &p in &frontier {
                let r = tree.nodes[p].r * ratio;
                for i in 0..b {
                    let word = format!("{}{}", tree.nodes[p].word, i);
                    next.push(tree.add_child(p, r, NodeKind::Type1, word, None)?);
                }
            }
            frontier = next;
        }
        Ok(tree)
    }

    pub fn root(&self) -> &CircleNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &CircleNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[CircleNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// Node ids grouped by level.
    pub fn levels(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.depth() + 1];
        for (i, n) in self.nodes.iter().enumerate() {
            out[n.level].push(i);
        }
        out
    }

    /// JSON adjacency export with per-node word, diameter and kind.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            id: usize,
            parent: Option<usize>,
            word: &'a str,
            r: f64,
            kind: NodeKind,
            children: &'a [usize],
        }
        let rows: Vec<Row> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| Row { id, parent: n.parent, word: &n.word, r: n.r, kind: n.kind, children: &n.children })
            .collect();
        Ok(serde_json::to_string_pretty(&rows)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn arc_diameters() {
        let half = ArcGeom::Arc { start: c(1.0, 0.0), mid: c(0.0, 1.0), end: c(-1.0, 0.0) };
        assert!((half.diameter() - 2.0).abs() < 1e-12);
        let quarter = ArcGeom::Arc {
            start: c(1.0, 0.0),
            mid: Complex::from_polar(1.0, std::f64::consts::FRAC_PI_4),
            end: c(0.0, 1.0),
        };
        assert!((quarter.diameter() - 2f64.sqrt()).abs() < 1e-12);
        let major = ArcGeom::Arc { start: c(1.0, 0.0), mid: c(0.0, -1.0), end: c(0.0, 1.0) };
        assert!((major.diameter() - 2.0).abs() < 1e-12);
        let seg = ArcGeom::Arc { start: c(0.0, 0.0), mid: c(1.0, 0.0), end: c(3.0, 0.0) };
        assert_eq!(seg.diameter(), 3.0);
    }

    #[test]
    fn arc_membership() {
        let quarter = ArcGeom::Arc {
            start: c(1.0, 0.0),
            mid: Complex::from_polar(1.0, std::f64::consts::FRAC_PI_4),
            end: c(0.0, 1.0),
        };
        assert!(quarter.contains_interior(Complex::from_polar(1.0, 0.3), 1e-12));
        assert!(!quarter.contains_interior(Complex::from_polar(1.0, 2.0), 1e-12));
        let reversed = ArcGeom::Arc { start: c(0.0, 1.0), mid: c(-1.0, 0.0), end: c(1.0, 0.0) };
        assert!(reversed.contains_interior(c(0.0, -1.0), 1e-12));
        assert!(!reversed.contains_interior(Complex::from_polar(1.0, 0.3), 1e-12));
    }

    #[test]
    fn self_similar_shape() {
        let t = CircleTree::self_similar(3, 0.2, 3, 2.0).unwrap();
        assert_eq!(t.len(), 1 + 3 + 9 + 27);
        assert_eq!(t.depth(), 3);
        let lv = t.levels();
        assert!((t.node(lv[3][0]).r - 2.0 * 0.008).abs() < 1e-15);
        assert!(CircleTree::new(0.0, None).is_err());
    }
}
