//! Decorated-contour weights and two-point functions: free, restricted to a
//! half-plane, and pinned (modified potential), plus the no-pinning ratio
//! experiment and finite-size surface-tension estimates.
//!
//! Weights live in the log domain throughout. For a contour γ the positivized
//! weight is
//!
//! ```text
//! log q(γ) = -β|γ| + Σ_{C ∩ ∇_γ ≠ ∅, diam ≤ cap} Φ'(C, γ)
//!          = -β|γ| + 3|γ| ĉ(β) + Σ_{C ∩ Δ_γ ≠ ∅, diam ≤ cap} Φ(C, Δ_γ ∩ C)
//! ```
//!
//! where ĉ is the diameter-truncated c(β); the second form is what gets
//! evaluated (the |C ∩ ∇_γ| term telescopes into 3|γ| ĉ exactly).

use crate::contour::{enumerate_contours, enumerate_contours_cached, Contour, DeltaVertexRule};
use crate::lattice::{Point, Wall};
use crate::numeric::{fit_line, logsumexp, LineFit};
use crate::potential::{
    base_cluster_sum, boundary_difference_sum, c_beta, CBeta, Decoration, ModifiedPotential,
    PotentialError,
};
use crate::Real;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum EnsembleError {
    #[error("endpoint must differ from the origin")]
    ZeroEndpoint,
    #[error("length cutoff {max_len} is below the l1 distance {dist}")]
    CutoffTooSmall { max_len: usize, dist: i64 },
    #[error("variant needs a wall direction")]
    MissingWall,
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("cache i/o: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Variant {
    Free,
    RestrictedHalfplane,
    Pinned,
}

/// Weight evaluation parameters shared across an experiment.
#[derive(Clone, Debug)]
pub struct WeightParams {
    pub beta: Real,
    pub diam_cap: i64,
    /// Lattice-animal growth constant for tail bounds (8-adjacency).
    pub lambda: Real,
    pub delta_rule: DeltaVertexRule,
    /// RAW mode: bare weights e^{-β|γ|}, no decoration at all.
    pub raw: bool,
}

impl WeightParams {
    pub fn new(beta: Real) -> WeightParams {
        WeightParams { beta, diam_cap: 2, lambda: 8.0, delta_rule: DeltaVertexRule::AllVertices, raw: false }
    }

    pub fn raw(beta: Real) -> WeightParams {
        WeightParams { raw: true, ..WeightParams::new(beta) }
    }
}

/// Precomputed per-(β, χ, cap) context: the truncated c(β).
#[derive(Clone, Debug)]
pub struct WeightContext {
    pub params: WeightParams,
    pub c_hat: CBeta,
    chi: Real,
    prefactor: Real,
}

impl WeightContext {
    pub fn new(params: WeightParams, mp: &ModifiedPotential) -> Result<WeightContext, EnsembleError> {
        let chi = mp.base.chi;
        let c_hat = if params.raw {
            CBeta { value: 0.0, tail: 0.0, diam_cap: params.diam_cap }
        } else {
            c_beta(params.beta, chi, params.diam_cap, params.lambda)?
        };
        let prefactor = mp.tilde_prefactor(params.beta).max(mp.base.prefactor);
        Ok(WeightContext { params, c_hat, chi, prefactor })
    }
}

/// Log-domain contour weight with its cluster-cap truncation bound.
#[derive(Clone, Copy, Debug)]
pub struct ContourWeight {
    pub log_q: Real,
    pub truncation_err: Real,
}

/// q(γ) under the base potential.
pub fn q_weight(c: &Contour, mp: &ModifiedPotential, ctx: &WeightContext) -> ContourWeight {
    let len = c.len() as Real;
    if ctx.params.raw {
        return ContourWeight { log_q: -ctx.params.beta * len, truncation_err: 0.0 };
    }
    let dec = Decoration::of(c, ctx.params.delta_rule);
    let cluster_sum = base_cluster_sum(&mp.base, &dec, ctx.params.beta, ctx.params.diam_cap);
    ContourWeight {
        log_q: -ctx.params.beta * len + 3.0 * len * ctx.c_hat.value + cluster_sum,
        truncation_err: 3.0 * (1.0 + ctx.prefactor) * len * ctx.c_hat.tail,
    }
}

/// q̃(γ) under the modified potential (the contour must lie in the wall
/// half-plane for the pinned ensemble; the caller enumerates accordingly).
pub fn q_weight_tilde(c: &Contour, mp: &ModifiedPotential, wall: &Wall, ctx: &WeightContext) -> ContourWeight {
    let base = q_weight(c, mp, ctx);
    if ctx.params.raw {
        return base;
    }
    let dec = Decoration::of(c, ctx.params.delta_rule);
    let diff = boundary_difference_sum(mp, &dec, wall, ctx.params.beta, ctx.params.diam_cap);
    ContourWeight { log_q: base.log_q + diff, truncation_err: base.truncation_err }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoPointResult {
    pub endpoint: Point,
    pub variant: Variant,
    pub value_log: Real,
    pub err_lo: Real,
    pub err_hi: Real,
    pub cutoff_used: usize,
    /// log of the estimated mass beyond the length cutoff (geometric
    /// extrapolation of the measured length decay); -inf when negligible,
    /// +inf when not estimable from the enumerated range.
    pub cutoff_tail_log: Real,
    pub contour_count: usize,
}

#[derive(Clone, Debug, Default)]
pub struct TwoPointOptions {
    pub max_len: usize,
    pub cache_dir: Option<PathBuf>,
    pub parallel_prefix: usize,
}

impl TwoPointOptions {
    pub fn with_max_len(max_len: usize) -> TwoPointOptions {
        TwoPointOptions { max_len, cache_dir: None, parallel_prefix: 0 }
    }
}

fn enumerate(
    x: Point,
    wall: Option<&Wall>,
    opts: &TwoPointOptions,
) -> Result<Vec<Contour>, EnsembleError> {
    match &opts.cache_dir {
        Some(dir) => Ok(enumerate_contours_cached(Point::ZERO, x, opts.max_len, wall, dir)?),
        None => Ok(enumerate_contours(Point::ZERO, x, opts.max_len, wall)),
    }
}

/// Two-point function by exhaustive enumeration up to the length cutoff.
pub fn two_point(
    x: Point,
    variant: Variant,
    mp: &ModifiedPotential,
    wall: Option<&Wall>,
    ctx: &WeightContext,
    opts: &TwoPointOptions,
) -> Result<TwoPointResult, EnsembleError> {
    if x == Point::ZERO {
        return Err(EnsembleError::ZeroEndpoint);
    }
    if (opts.max_len as i64) < x.l1() {
        return Err(EnsembleError::CutoffTooSmall { max_len: opts.max_len, dist: x.l1() });
    }
    let wall_for_enum = match variant {
        Variant::Free => None,
        Variant::RestrictedHalfplane | Variant::Pinned => Some(wall.ok_or(EnsembleError::MissingWall)?),
    };
    let contours = enumerate(x, wall_for_enum, opts)?;
    let weights: Vec<ContourWeight> = contours
        .par_iter()
        .map(|c| match variant {
            Variant::Pinned => q_weight_tilde(c, mp, wall.expect("checked"), ctx),
            _ => q_weight(c, mp, ctx),
        })
        .collect();
    let logs: Vec<Real> = weights.iter().map(|w| w.log_q).collect();
    let value_log = logsumexp(&logs);
    let max_trunc = weights.iter().map(|w| w.truncation_err).fold(0.0, Real::max);
    let tail_log = length_tail_estimate(&contours, &logs, opts.max_len);
    let err_hi = if tail_log.is_infinite() && tail_log > 0.0 {
        Real::INFINITY
    } else {
        crate::numeric::logsumexp2(value_log, tail_log) + max_trunc
    };
    Ok(TwoPointResult {
        endpoint: x,
        variant,
        value_log,
        err_lo: value_log - max_trunc,
        err_hi,
        cutoff_used: opts.max_len,
        cutoff_tail_log: tail_log,
        contour_count: contours.len(),
    })
}

/// Geometric extrapolation of the mass beyond the cutoff from the measured
/// per-length decay (never from a priori constants). Returns -inf when the
/// enumeration budget truncated nothing, +inf when fewer than three length
/// classes exist or the measured ratio is not contracting.
fn length_tail_estimate(contours: &[Contour], logs: &[Real], max_len: usize) -> Real {
    let mut by_len: BTreeMap<usize, Vec<Real>> = BTreeMap::new();
    for (c, &l) in contours.iter().zip(logs) {
        by_len.entry(c.len()).or_default().push(l);
    }
    let masses: Vec<(usize, Real)> = by_len.iter().map(|(&l, v)| (l, logsumexp(v))).collect();
    let Some(&(last_len, last_mass)) = masses.last() else {
        return Real::INFINITY;
    };
    if last_len + 2 <= max_len {
        return Real::NEG_INFINITY;
    }
    if masses.len() < 3 {
        return Real::INFINITY;
    }
    let k = masses.len().min(4);
    let xs: Vec<Real> = masses[masses.len() - k..].iter().map(|(l, _)| *l as Real).collect();
    let ys: Vec<Real> = masses[masses.len() - k..].iter().map(|(_, m)| *m).collect();
    let Some(LineFit { slope, .. }) = fit_line(&xs, &ys) else {
        return Real::INFINITY;
    };
    let step = 2.0; // length parity is fixed by the endpoint
    let r = (slope * step).exp();
    if r >= 1.0 {
        return Real::INFINITY;
    }
    last_mass + (r / (1.0 - r)).ln()
}

/// Per-contour verification of the two-sided weight bracket between q and
/// q̃ (pinned vs free weights of the same path).
#[derive(Clone, Copy, Debug)]
pub struct SandwichReport {
    pub log_q: Real,
    pub log_q_tilde: Real,
    pub envelope: Real,
    pub slack: Real,
    pub holds: bool,
}

pub fn sandwich_check(
    c: &Contour,
    mp: &ModifiedPotential,
    wall: &Wall,
    ctx: &WeightContext,
) -> SandwichReport {
    let q = q_weight(c, mp, ctx);
    let qt = q_weight_tilde(c, mp, wall, ctx);
    let mut envelope = 0.0;
    for v in c.vertices() {
        let d = wall.distance(v).expect("contour inside wall") as Real;
        envelope += ctx.prefactor * (-ctx.chi * ctx.params.beta * (d + 1.0)).exp();
    }
    let slack = q.truncation_err + qt.truncation_err + 1e-12 * (1.0 + envelope.abs());
    let diff = qt.log_q - q.log_q;
    SandwichReport {
        log_q: q.log_q,
        log_q_tilde: qt.log_q,
        envelope,
        slack,
        holds: diff.abs() <= envelope + slack,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioRow {
    pub l: i64,
    pub beta: Real,
    pub ratio_log: Real,
    pub band: Real,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioFit {
    pub beta: Real,
    pub slope: Real,
    pub slope_stderr: Real,
    pub intercept: Real,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioTable {
    pub rows: Vec<RatioRow>,
    pub fits: Vec<RatioFit>,
}

/// Endpoint on the lattice approximation of the wall line at parameter `l`.
pub fn wall_point(wall: &Wall, l: i64) -> Point {
    Point { x: wall.b * l, y: -wall.a * l }
}

/// The no-pinning ratio experiment: per (L, β) the log-ratio of the pinned
/// two-point function to the restricted one, with a least-squares slope fit
/// in L per β.
#[allow(clippy::too_many_arguments)]
pub fn nopinning_ratio_experiment(
    l_values: &[i64],
    beta_values: &[Real],
    mp: &ModifiedPotential,
    wall: &Wall,
    base_params: &WeightParams,
    extra_len: usize,
    cache_dir: Option<PathBuf>,
) -> Result<RatioTable, EnsembleError> {
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &beta in beta_values {
        let params = WeightParams { beta, ..base_params.clone() };
        let ctx = WeightContext::new(params, mp)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &l in l_values {
            let x = wall_point(wall, l);
            let opts = TwoPointOptions {
                max_len: x.l1() as usize + extra_len,
                cache_dir: cache_dir.clone(),
                parallel_prefix: 0,
            };
            let pinned = two_point(x, Variant::Pinned, mp, Some(wall), &ctx, &opts)?;
            let restricted = two_point(x, Variant::RestrictedHalfplane, mp, Some(wall), &ctx, &opts)?;
            let ratio = pinned.value_log - restricted.value_log;
            let band = (pinned.value_log - pinned.err_lo) + (restricted.value_log - restricted.err_lo);
            rows.push(RatioRow { l, beta, ratio_log: ratio, band });
            xs.push(l as Real);
            ys.push(ratio);
        }
        if let Some(fit) = fit_line(&xs, &ys) {
            fits.push(RatioFit { beta, slope: fit.slope, slope_stderr: fit.slope_stderr, intercept: fit.intercept });
        }
    }
    Ok(RatioTable { rows, fits })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceTensionRow {
    pub n: i64,
    pub distance: Real,
    pub tau_free: Real,
    pub tau_pinned: Real,
}

/// τ̂(N) = -(1/(β d_N)) log Σ w(γ), reported for the free and pinned
/// ensembles side by side; no extrapolation beyond the raw trend.
pub fn surface_tension_estimate(
    direction: Point,
    n_values: &[i64],
    mp: &ModifiedPotential,
    wall: &Wall,
    params: &WeightParams,
    extra_len: usize,
) -> Result<Vec<SurfaceTensionRow>, EnsembleError> {
    let ctx = WeightContext::new(params.clone(), mp)?;
    let mut out = Vec::new();
    for &n in n_values {
        let x = direction.scale(n);
        if x == Point::ZERO {
            continue;
        }
        let opts = TwoPointOptions::with_max_len(x.l1() as usize + extra_len);
        let free = two_point(x, Variant::Free, mp, Some(wall), &ctx, &opts)?;
        let pinned = two_point(x, Variant::Pinned, mp, Some(wall), &ctx, &opts)?;
        let dist = ((x.x * x.x + x.y * x.y) as Real).sqrt();
        out.push(SurfaceTensionRow {
            n,
            distance: dist,
            tau_free: -free.value_log / (params.beta * dist),
            tau_pinned: -pinned.value_log / (params.beta * dist),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::Step;
    use crate::lattice::pt;
    use crate::potential::Potential;

    fn zero_mp(chi: Real) -> ModifiedPotential {
        ModifiedPotential::unmodified(Potential::zero(chi))
    }

    #[test]
    fn raw_weight_is_beta_times_length() {
        let mp = zero_mp(2.0);
        let ctx = WeightContext::new(WeightParams::raw(4.0), &mp).unwrap();
        let c = Contour::from_steps(Point::ZERO, vec![Step::E; 5]).unwrap();
        let w = q_weight(&c, &mp, &ctx);
        assert_eq!(w.log_q, -20.0);
        assert_eq!(w.truncation_err, 0.0);
    }

    #[test]
    fn two_point_raw_single_geodesic() {
        let mp = zero_mp(2.0);
        let ctx = WeightContext::new(WeightParams::raw(4.0), &mp).unwrap();
        let r = two_point(pt(1, 0), Variant::Free, &mp, None, &ctx, &TwoPointOptions::with_max_len(1)).unwrap();
        assert!((r.value_log - (-4.0)).abs() < 1e-15);
        assert_eq!(r.contour_count, 1);
    }

    #[test]
    fn two_point_raw_matches_per_length_counts() {
        let mp = zero_mp(2.0);
        let beta = 3.0;
        let ctx = WeightContext::new(WeightParams::raw(beta), &mp).unwrap();
        let counts: BTreeMap<usize, usize> = {
            let mut m = BTreeMap::new();
            for c in enumerate_contours(Point::ZERO, pt(2, 0), 4, None) {
                *m.entry(c.len()).or_default() += 1;
            }
            m
        };
        let expect: Real = counts
            .iter()
            .map(|(&l, &n)| n as Real * (-beta * l as Real).exp())
            .sum::<Real>()
            .ln();
        let r = two_point(pt(2, 0), Variant::Free, &mp, None, &ctx, &TwoPointOptions::with_max_len(4)).unwrap();
        assert!((r.value_log - expect).abs() < 1e-12);
    }

    #[test]
    fn pinned_equals_restricted_without_modification() {
        let mp = zero_mp(2.0);
        let ctx = WeightContext::new(WeightParams::new(4.0), &mp).unwrap();
        let wall = Wall::HORIZONTAL;
        let opts = TwoPointOptions::with_max_len(8);
        for x in [pt(3, 1), pt(2, 2), pt(4, 0)] {
            let p = two_point(x, Variant::Pinned, &mp, Some(&wall), &ctx, &opts).unwrap();
            let r = two_point(x, Variant::RestrictedHalfplane, &mp, Some(&wall), &ctx, &opts).unwrap();
            assert!((p.value_log - r.value_log).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_in_cutoff() {
        let mp = zero_mp(2.0);
        let ctx = WeightContext::new(WeightParams::new(3.0), &mp).unwrap();
        let a = two_point(pt(2, 0), Variant::Free, &mp, None, &ctx, &TwoPointOptions::with_max_len(4)).unwrap();
        let b = two_point(pt(2, 0), Variant::Free, &mp, None, &ctx, &TwoPointOptions::with_max_len(6)).unwrap();
        assert!(b.value_log >= a.value_log);
    }

    #[test]
    fn lattice_symmetry_for_symmetric_potential() {
        let mp = zero_mp(2.0);
        let ctx = WeightContext::new(WeightParams::new(3.0), &mp).unwrap();
        let a = two_point(pt(2, 1), Variant::Free, &mp, None, &ctx, &TwoPointOptions::with_max_len(7)).unwrap();
        let b = two_point(pt(1, 2), Variant::Free, &mp, None, &ctx, &TwoPointOptions::with_max_len(7)).unwrap();
        assert!((a.value_log - b.value_log).abs() < 1e-12);
    }

    #[test]
    fn sandwich_trivial_when_tilde_equals_base() {
        let mp = zero_mp(2.0);
        let ctx = WeightContext::new(WeightParams::new(4.0), &mp).unwrap();
        let wall = Wall::HORIZONTAL;
        let c = Contour::from_steps(Point::ZERO, vec![Step::E, Step::N, Step::E, Step::S, Step::E]).unwrap();
        let rep = sandwich_check(&c, &mp, &wall, &ctx);
        assert!(rep.holds);
        assert_eq!(rep.log_q, rep.log_q_tilde);
    }

    #[test]
    fn ratio_experiment_zero_for_unmodified_potential() {
        let mp = zero_mp(2.0);
        let wall = Wall::HORIZONTAL;
        let table =
            nopinning_ratio_experiment(&[2, 3, 4], &[3.0], &mp, &wall, &WeightParams::new(3.0), 4, None)
                .unwrap();
        for row in &table.rows {
            assert_eq!(row.ratio_log, 0.0);
        }
        assert!(table.fits[0].slope.abs() < 1e-15);
    }

    #[test]
    fn surface_tension_single_geodesic_is_one() {
        // RAW weights, horizontal direction, max_len = N: only the straight
        // segment contributes and τ̂ = 1 exactly.
        let mp = zero_mp(2.0);
        let wall = Wall::HORIZONTAL;
        let rows = surface_tension_estimate(pt(1, 0), &[3, 5], &mp, &wall, &WeightParams::raw(4.0), 0).unwrap();
        for r in rows {
            assert!((r.tau_free - 1.0).abs() < 1e-14);
            assert!((r.tau_pinned - 1.0).abs() < 1e-14);
        }
    }
}
