//! Numerical tolerances used across the crate, kept in one record.

/// Named tolerances. [`TOL`] is the instance everything reads from.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Allowed `|ad - bc - 1|` after normalization.
    pub normalization: f64,
    /// Geometric identities (disk relations, fixed points, isometry checks).
    pub geometric: f64,
    /// Trace classification: distance of `tr^2` from 4 or from the real axis.
    pub classify: f64,
    /// Grid used to deduplicate limit-set samples.
    pub dedup: f64,
    /// Relative change at which adaptive supremum sampling stops refining.
    pub sup_refine: f64,
    /// Tail bound for zeta-function summation.
    pub zeta_tail: f64,
    /// Relative cutoff for power-series truncation.
    pub series_rel: f64,
    /// Below this `|A|` a normalized circle form is treated as a line.
    pub line_threshold: f64,
}

pub const TOL: Tolerances = Tolerances {
    normalization: 1e-12,
    geometric: 1e-9,
    classify: 1e-9,
    dedup: 1e-7,
    sup_refine: 1e-3,
    zeta_tail: 1e-12,
    series_rel: 1e-15,
    line_threshold: 1e-12,
};
