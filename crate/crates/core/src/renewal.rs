//! Renewal structure of decorated contours: break points, the irreducible
//! decomposition, exhaustive tables of irreducible animals with their
//! weights, tilt solving (the point on the Wulff boundary whose tilted
//! weights are a probability law with prescribed mean direction), mass-gap
//! measurement, and numeric curvature of the Wulff boundary.

use crate::cluster::clusters_touching;
use crate::contour::{for_each_contour_from, Contour, DeltaVertexRule, Step};
use crate::lattice::{in_cone, pt, Point};
use crate::numeric::fit_line;
use crate::potential::{positivize, Decoration, Potential};
use crate::Real;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RenewalError {
    #[error("tilt solver did not converge: residual {0}")]
    NoConvergence(Real),
    #[error("fewer than three usable length classes for the mass-gap fit")]
    InsufficientRange,
    #[error("animal table is empty")]
    EmptyTable,
    #[error("direction must point into the closed positive quadrant")]
    BadDirection,
}

/// Interior vertex indices that split the path into a backward-cone prefix
/// and a forward-cone suffix. Linear sweep via running cone-functional
/// extrema (the definition itself is the quadratic scan in the test oracle).
pub fn break_points(c: &Contour) -> Vec<usize> {
    let verts = c.vertices();
    let m = verts.len();
    let f = |p: Point| p.x + 2 * p.y;
    let g = |p: Point| 2 * p.x + p.y;
    let mut prefix_ok = vec![false; m];
    let (mut max_f, mut max_g) = (i64::MIN, i64::MIN);
    for (i, &v) in verts.iter().enumerate() {
        prefix_ok[i] = i > 0 && f(v) >= max_f && g(v) >= max_g;
        max_f = max_f.max(f(v));
        max_g = max_g.max(g(v));
    }
    let mut out = Vec::new();
    let (mut min_f, mut min_g) = (i64::MAX, i64::MAX);
    for i in (0..m).rev() {
        let v = verts[i];
        if i < m - 1 && i > 0 && prefix_ok[i] && f(v) <= min_f && g(v) <= min_g {
            out.push(i);
        }
        min_f = min_f.min(f(v));
        min_g = min_g.min(g(v));
    }
    out.reverse();
    out
}

/// γ = left ∘ middle₁ ∘ … ∘ middleₙ ∘ right, split at every break point.
/// A path with no break points is stored as `left` alone.
#[derive(Clone, Debug)]
pub struct IrreducibleDecomposition {
    pub left: Contour,
    pub middle: Vec<Contour>,
    pub right: Option<Contour>,
    pub break_indices: Vec<usize>,
}

pub fn decompose(c: &Contour) -> IrreducibleDecomposition {
    let breaks = break_points(c);
    let verts = c.vertices();
    if breaks.is_empty() {
        return IrreducibleDecomposition {
            left: c.clone(),
            middle: Vec::new(),
            right: None,
            break_indices: breaks,
        };
    }
    let piece = |from: usize, to: usize| {
        Contour::from_vertices(&verts[from..=to]).expect("pieces of a valid contour are valid")
    };
    let left = piece(0, breaks[0]);
    let mut middle = Vec::new();
    for w in breaks.windows(2) {
        middle.push(piece(w[0], w[1]));
    }
    let right = Some(piece(*breaks.last().expect("nonempty"), verts.len() - 1));
    IrreducibleDecomposition { left, middle, right, break_indices: breaks }
}

impl IrreducibleDecomposition {
    /// Re-concatenation; inverse of [`decompose`].
    pub fn concatenate(&self) -> Contour {
        let mut steps: Vec<Step> = self.left.steps().to_vec();
        for m in &self.middle {
            steps.extend_from_slice(m.steps());
        }
        if let Some(r) = &self.right {
            steps.extend_from_slice(r.steps());
        }
        Contour::from_steps(self.left.start(), steps).expect("concatenation of a decomposition")
    }
}

/// Membership in the letter alphabet P = P_l ∩ P_r: no break points and the
/// whole path inside the diamond of its endpoints.
pub fn is_letter(c: &Contour) -> bool {
    if !break_points(c).is_empty() {
        return false;
    }
    let end = c.end();
    c.vertices().iter().all(|&v| in_cone(v, c.start()) && in_cone(end, v))
}

/// Aggregated weight of irreducible animals with a common displacement and
/// path length. `bare_count` counts undecorated irreducible paths (their
/// weight is exactly `count · e^{-β·len}`); `decorated_mass` carries every
/// animal with a nonempty cluster collection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnimalEntry {
    pub x: Point,
    pub len: usize,
    pub bare_count: u64,
    pub decorated_mass: Real,
}

impl AnimalEntry {
    /// Untilted weight q summed over the animals of this entry.
    #[inline]
    pub fn weight(&self, beta: Real) -> Real {
        self.bare_count as Real * (-beta * self.len as Real).exp() + self.decorated_mass
    }
}

#[derive(Clone, Debug)]
pub struct AnimalTableParams {
    pub beta: Real,
    pub len_cap: usize,
    pub diam_cap: i64,
    pub delta_rule: DeltaVertexRule,
}

impl AnimalTableParams {
    pub fn new(beta: Real, len_cap: usize) -> AnimalTableParams {
        AnimalTableParams { beta, len_cap, diam_cap: 2, delta_rule: DeltaVertexRule::AllVertices }
    }
}

/// Exhaustive table of irreducible animals up to the caps.
#[derive(Clone, Debug)]
pub struct AnimalTable {
    pub beta: Real,
    pub len_cap: usize,
    pub diam_cap: i64,
    pub entries: Vec<AnimalEntry>,
}

/// The four basic animals: single edges and the two 5-step staircases.
pub const BASIC_DISPLACEMENTS: [(Point, usize); 4] =
    [(pt(1, 0), 1), (pt(0, 1), 1), (pt(4, -1), 5), (pt(-1, 4), 5)];

impl AnimalTable {
    /// Enumerate every irreducible animal `[γ, C]` with `|γ| ≤ len_cap` and
    /// cluster diameters ≤ `diam_cap`, under the positivized weights of the
    /// given base potential.
    ///
    /// For a path γ with break points B, a collection of clusters makes an
    /// irreducible animal iff every u ∈ B is bridged (the cluster union is
    /// not contained in `(u-Y) ∪ (u+Y)`) and everything stays inside the
    /// endpoint diamond; summing Π Ψ over such collections is done by
    /// inclusion-exclusion over the subsets of B.
    pub fn build(pot: &Potential, params: &AnimalTableParams) -> AnimalTable {
        let mut acc: BTreeMap<(Point, usize), (u64, Real)> = BTreeMap::new();
        let beta = params.beta;
        for_each_contour_from(Point::ZERO, params.len_cap, &mut |steps, end| {
            let c = match Contour::from_steps(Point::ZERO, steps.to_vec()) {
                Ok(c) => c,
                Err(_) => return,
            };
            let verts = c.vertices();
            // Path inside D(0, end): required for left- and right-irreducibility.
            if !verts.iter().all(|&v| in_cone(v, Point::ZERO) && in_cone(end, v)) {
                return;
            }
            let breaks = break_points(&c);
            let nb = breaks.len();
            if nb > 20 {
                return; // 2^nb inclusion-exclusion guard; unreachable at desk caps
            }
            let dec = Decoration::of(&c, params.delta_rule);
            // Clusters inside the diamond meeting ∇_γ, with their Φ' values
            // and bridging masks.
            let mut seeds: Vec<Point> = dec
                .nabla
                .keys()
                .flat_map(|b| b.touching_sites())
                .filter(|&s| in_cone(s, Point::ZERO) && in_cone(end, s))
                .collect();
            seeds.sort();
            seeds.dedup();
            let mut t = vec![0.0 as Real; 1 << nb];
            for cl in clusters_touching(&seeds, params.diam_cap) {
                if !cl.sites().iter().all(|&s| in_cone(s, Point::ZERO) && in_cone(end, s)) {
                    continue;
                }
                let nabla_count = dec.nabla_count(&cl);
                if nabla_count == 0 {
                    continue;
                }
                let inter = dec.intersection(&cl);
                let diam = cl.diam().expect("connected");
                let phi_prime =
                    positivize(pot.evaluate(beta, &cl, &inter), nabla_count, pot.chi, beta, diam);
                let mut mask = 0usize;
                for (bit, &bi) in breaks.iter().enumerate() {
                    let u = verts[bi];
                    if cl.sites().iter().all(|&s| in_cone(u, s) || in_cone(s, u)) {
                        mask |= 1 << bit;
                    }
                }
                t[mask] += phi_prime;
            }
            // Superset-sum zeta transform: t[S] = Σ_{C ⊆ R_S} Φ'.
            for bit in 0..nb {
                for mask in 0..(1usize << nb) {
                    if mask & (1 << bit) == 0 {
                        t[mask] += t[mask | (1 << bit)];
                    }
                }
            }
            let base = (-beta * c.len() as Real).exp();
            let entry = acc.entry((end, c.len())).or_insert((0, 0.0));
            if nb == 0 {
                entry.0 += 1;
                entry.1 += base * t[0].exp_m1();
            } else {
                // Σ_{S⊆B} (-1)^{|S|} e^{t[S]}; the constant 1 telescopes out.
                let mut alt = 0.0;
                for (mask, &ts) in t.iter().enumerate() {
                    let sign = if (mask.count_ones() & 1) == 0 { 1.0 } else { -1.0 };
                    alt += sign * ts.exp_m1();
                }
                entry.1 += base * alt;
            }
        });
        let entries = acc
            .into_iter()
            .map(|((x, len), (bare_count, decorated_mass))| AnimalEntry {
                x,
                len,
                bare_count,
                decorated_mass,
            })
            .collect();
        AnimalTable { beta, len_cap: params.len_cap, diam_cap: params.diam_cap, entries }
    }

    pub fn entry(&self, x: Point, len: usize) -> Option<&AnimalEntry> {
        self.entries.iter().find(|e| e.x == x && e.len == len)
    }

    /// Tilted probability mass of one entry.
    #[inline]
    pub fn tilted_mass(&self, e: &AnimalEntry, h: [Real; 2]) -> Real {
        let hx = h[0] * e.x.x as Real + h[1] * e.x.y as Real;
        hx.exp() * e.weight(self.beta)
    }

    /// Total tilted mass Σ e^{h·X} q(Γ).
    pub fn normalization(&self, h: [Real; 2]) -> Real {
        self.entries.iter().map(|e| self.tilted_mass(e, h)).sum()
    }

    /// Geometric extrapolation of the tilted mass beyond the length cap,
    /// from the measured per-length decay.
    pub fn tail_estimate(&self, h: [Real; 2]) -> Real {
        let mut by_len: BTreeMap<usize, Real> = BTreeMap::new();
        for e in &self.entries {
            *by_len.entry(e.len).or_default() += self.tilted_mass(e, h);
        }
        let masses: Vec<(usize, Real)> = by_len.into_iter().filter(|&(_, m)| m > 0.0).collect();
        if masses.len() < 2 {
            return Real::INFINITY;
        }
        let (l1, m1) = masses[masses.len() - 2];
        let (l2, m2) = masses[masses.len() - 1];
        let r = (m2 / m1).powf(1.0 / (l2 - l1) as Real);
        if r >= 1.0 {
            return Real::INFINITY;
        }
        m2 * r / (1.0 - r)
    }
}

/// A solved tilt: the point h on the Wulff-shape boundary whose tilted
/// animal weights are a probability law with mean displacement along the
/// requested direction.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tilt {
    pub h: [Real; 2],
    pub a: Real,
    pub b: Real,
    pub delta_a: Real,
    pub delta_b: Real,
    pub residual: Real,
    pub iterations: usize,
    /// Estimated tilted mass beyond the length cap.
    pub tail: Real,
}

impl Tilt {
    /// Closed-form probabilities of the four basic animals.
    pub fn basic_probs(&self, beta: Real) -> [Real; 4] {
        [
            (-self.a).exp(),
            (-self.b).exp(),
            (-beta - self.delta_a).exp(),
            (-beta - self.delta_b).exp(),
        ]
    }
}

/// Solve `Σ e^{h·X} q(Γ) = 1` and `E[X] ∥ direction` by damped Newton
/// iteration; the direction must lie in the closed positive quadrant.
pub fn tilt_solve(direction: [Real; 2], table: &AnimalTable) -> Result<Tilt, RenewalError> {
    if table.entries.is_empty() {
        return Err(RenewalError::EmptyTable);
    }
    if direction[0] < 0.0 || direction[1] < 0.0 || direction == [0.0, 0.0] {
        return Err(RenewalError::BadDirection);
    }
    let beta = table.beta;
    let eps = direction[1] / (direction[0] + direction[1]);
    // Leading-order initialization from the basic-step asymptotics.
    let a0 = eps.max((-beta).exp());
    let b0 = if eps > 0.0 { (-eps.ln()).clamp(0.0, beta) } else { beta };
    let mut h = [beta - a0, beta - b0];
    let residual_of = |f: [Real; 2]| f[0].abs().max(f[1].abs());
    let eval = |h: [Real; 2]| -> ([Real; 2], [[Real; 2]; 2]) {
        let mut f = [0.0, 0.0];
        let mut j = [[0.0, 0.0], [0.0, 0.0]];
        for e in &table.entries {
            let m = table.tilted_mass(e, h);
            let (x0, x1) = (e.x.x as Real, e.x.y as Real);
            let cross = x0 * direction[1] - x1 * direction[0];
            f[0] += m;
            f[1] += m * cross;
            j[0][0] += m * x0;
            j[0][1] += m * x1;
            j[1][0] += m * cross * x0;
            j[1][1] += m * cross * x1;
        }
        f[0] -= 1.0;
        (f, j)
    };
    let (mut f, mut jac) = eval(h);
    let mut res = residual_of(f);
    let mut iterations = 0;
    for _ in 0..200 {
        if res < 1e-13 {
            break;
        }
        iterations += 1;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dh = [
            (-f[0] * jac[1][1] + f[1] * jac[0][1]) / det,
            (-jac[0][0] * f[1] + jac[1][0] * f[0]) / det,
        ];
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..50 {
            let cand = [h[0] + lambda * dh[0], h[1] + lambda * dh[1]];
            let (fc, jc) = eval(cand);
            let rc = residual_of(fc);
            if rc < res {
                h = cand;
                f = fc;
                jac = jc;
                res = rc;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let a = beta - h[0];
    let b = beta - h[1];
    let tilt = Tilt {
        h,
        a,
        b,
        delta_a: 4.0 * a + (beta - b),
        delta_b: 4.0 * b + (beta - a),
        residual: res,
        iterations,
        tail: table.tail_estimate(h),
    };
    if res.is_finite() {
        Ok(tilt)
    } else {
        Err(RenewalError::NoConvergence(res))
    }
}

/// Mean displacement under the tilted law (unnormalized by the deficiency).
pub fn tilted_mean(table: &AnimalTable, h: [Real; 2]) -> [Real; 2] {
    let mut m = [0.0, 0.0];
    for e in &table.entries {
        let w = table.tilted_mass(e, h);
        m[0] += w * e.x.x as Real;
        m[1] += w * e.x.y as Real;
    }
    m
}

/// Displacement covariance under the tilted law.
pub fn tilted_covariance(table: &AnimalTable, h: [Real; 2]) -> [[Real; 2]; 2] {
    let mean = tilted_mean(table, h);
    let total = table.normalization(h);
    let mu = [mean[0] / total, mean[1] / total];
    let mut c = [[0.0, 0.0], [0.0, 0.0]];
    for e in &table.entries {
        let w = table.tilted_mass(e, h) / total;
        let dx = e.x.x as Real - mu[0];
        let dy = e.x.y as Real - mu[1];
        c[0][0] += w * dx * dx;
        c[0][1] += w * dx * dy;
        c[1][0] += w * dy * dx;
        c[1][1] += w * dy * dy;
    }
    c
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MassGap {
    /// Fitted decay rate of log P(|Γ| ≥ k) per unit length (β ν̂_g).
    pub rate: Real,
    pub nu_g_hat: Real,
    pub fit_residual_rms: Real,
    pub usable_points: usize,
    pub degenerate: bool,
}

/// Fit of the tilted length-tail distribution. Degenerate tables (no mass
/// beyond length 1) report an infinite rate.
pub fn mass_gap_measure(table: &AnimalTable, h: [Real; 2]) -> Result<MassGap, RenewalError> {
    let mut by_len: BTreeMap<usize, Real> = BTreeMap::new();
    for e in &table.entries {
        *by_len.entry(e.len).or_default() += table.tilted_mass(e, h);
    }
    let max_len = *by_len.keys().max().ok_or(RenewalError::EmptyTable)?;
    let mut points = Vec::new();
    for k in 2..=max_len {
        let tail: Real = by_len.iter().filter(|&(&l, _)| l >= k).map(|(_, &m)| m).sum();
        if tail > 0.0 {
            points.push((k as Real, tail.ln()));
        }
    }
    if points.is_empty() {
        return Ok(MassGap {
            rate: Real::INFINITY,
            nu_g_hat: Real::INFINITY,
            fit_residual_rms: 0.0,
            usable_points: 0,
            degenerate: true,
        });
    }
    if points.len() < 3 {
        return Err(RenewalError::InsufficientRange);
    }
    let xs: Vec<Real> = points.iter().map(|p| p.0).collect();
    let ys: Vec<Real> = points.iter().map(|p| p.1).collect();
    let fit = fit_line(&xs, &ys).ok_or(RenewalError::InsufficientRange)?;
    Ok(MassGap {
        rate: -fit.slope,
        nu_g_hat: -fit.slope / table.beta,
        fit_residual_rms: fit.residual_rms,
        usable_points: points.len(),
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Curvature {
    pub mean: [Real; 2],
    pub mean_l1: Real,
    pub grad_norm: Real,
    pub curvature: Real,
    /// Variance of X·m⊥ (the Hessian quadratic form at m⊥).
    pub variance_perp: Real,
    /// Two-atom lower bound min_c { e^{-a}(v·e1 - c)² + e^{-b}(v·e2 - c)² }.
    pub hessian_lower_bound: Real,
}

/// Curvature of the Wulff boundary at the solved tilt, via
/// χ = (Hess F m⊥)·m⊥ / |∇F| with Hess F the displacement covariance and
/// ∇F the mean displacement.
pub fn wulff_curvature(tilt: &Tilt, direction: [Real; 2], table: &AnimalTable) -> Curvature {
    let norm = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
    let m_perp = [-direction[1] / norm, direction[0] / norm];
    let total = table.normalization(tilt.h);
    let mean_raw = tilted_mean(table, tilt.h);
    let mean = [mean_raw[0] / total, mean_raw[1] / total];
    let cov = tilted_covariance(table, tilt.h);
    let variance_perp = cov[0][0] * m_perp[0] * m_perp[0]
        + (cov[0][1] + cov[1][0]) * m_perp[0] * m_perp[1]
        + cov[1][1] * m_perp[1] * m_perp[1];
    let grad_norm = (mean[0] * mean[0] + mean[1] * mean[1]).sqrt();
    // min over c of e^{-a}(v1 - c)^2 + e^{-b}(v2 - c)^2.
    let (wa, wb) = ((-tilt.a).exp(), (-tilt.b).exp());
    let c_star = (wa * m_perp[0] + wb * m_perp[1]) / (wa + wb);
    let lower = wa * (m_perp[0] - c_star).powi(2) + wb * (m_perp[1] - c_star).powi(2);
    Curvature {
        mean,
        mean_l1: mean[0].abs() + mean[1].abs(),
        grad_norm,
        curvature: variance_perp / grad_norm,
        variance_perp,
        hessian_lower_bound: lower,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn staircase_g3() -> Contour {
        Contour::from_steps(Point::ZERO, vec![Step::E, Step::E, Step::S, Step::E, Step::E]).unwrap()
    }

    #[test]
    fn straight_segment_break_points() {
        let c = Contour::from_steps(Point::ZERO, vec![Step::E; 3]).unwrap();
        assert_eq!(break_points(&c), vec![1, 2]);
        let single = Contour::from_steps(Point::ZERO, vec![Step::E]).unwrap();
        assert!(break_points(&single).is_empty());
    }

    #[test]
    fn staircase_is_irreducible_letter() {
        let c = staircase_g3();
        assert!(break_points(&c).is_empty());
        assert!(is_letter(&c));
    }

    #[test]
    fn break_points_match_definition_scan() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let c = crate::potential::random_contour(&mut rng, 8);
            assert_eq!(break_points(&c), oracle::break_points_scan(&c), "{:?}", c.steps());
        }
    }

    #[test]
    fn decompose_round_trips_and_letters_fit_diamonds() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let c = crate::potential::random_contour(&mut rng, 9);
            let d = decompose(&c);
            assert_eq!(d.concatenate(), c);
            for letter in &d.middle {
                assert!(is_letter(letter));
            }
        }
    }

    #[test]
    fn straight_segment_decomposes_into_unit_letters() {
        let c = Contour::from_steps(Point::ZERO, vec![Step::E; 4]).unwrap();
        let d = decompose(&c);
        assert_eq!(d.break_indices, vec![1, 2, 3]);
        assert_eq!(d.left.len(), 1);
        assert_eq!(d.middle.len(), 2);
        assert_eq!(d.right.as_ref().unwrap().len(), 1);
    }

    #[test]
    fn double_staircase_splits_at_junction() {
        let mut steps = staircase_g3().steps().to_vec();
        steps.extend_from_slice(staircase_g3().steps());
        let c = Contour::from_steps(Point::ZERO, steps).unwrap();
        assert_eq!(break_points(&c), vec![5]);
        let d = decompose(&c);
        assert_eq!(d.left.len(), 5);
        assert_eq!(d.right.as_ref().unwrap().len(), 5);
        assert!(d.middle.is_empty());
    }

    #[test]
    fn table_len_cap_one_is_the_two_unit_edges() {
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(4.0, 1));
        let xs: Vec<(Point, usize, u64)> =
            table.entries.iter().map(|e| (e.x, e.len, e.bare_count)).collect();
        assert_eq!(xs, vec![(pt(0, 1), 1, 1), (pt(1, 0), 1, 1)]);
        // Backward unit edges fail the cone condition and are excluded.
    }

    #[test]
    fn table_contains_basic_staircases_at_cap_five() {
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(4.0, 5));
        for (x, len) in [(pt(4, -1), 5usize), (pt(-1, 4), 5usize)] {
            let e = table.entry(x, len).expect("staircase present");
            assert_eq!(e.bare_count, 1);
        }
    }

    #[test]
    fn bare_counts_match_letter_scan() {
        // Independent path: enumerate contours, test is_letter directly.
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(3.0, 6));
        let mut expect: BTreeMap<(Point, usize), u64> = BTreeMap::new();
        for_each_contour_from(Point::ZERO, 6, &mut |steps, end| {
            if let Ok(c) = Contour::from_steps(Point::ZERO, steps.to_vec()) {
                if is_letter(&c) {
                    *expect.entry((end, c.len())).or_default() += 1;
                }
            }
        });
        for e in &table.entries {
            let want = expect.get(&(e.x, e.len)).copied().unwrap_or(0);
            assert_eq!(e.bare_count, want, "at {:?} len {}", e.x, e.len);
        }
    }

    #[test]
    fn tilt_symmetric_direction_gives_equal_components() {
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(4.0, 6));
        let tilt = tilt_solve([1.0, 1.0], &table).unwrap();
        assert!((tilt.h[0] - tilt.h[1]).abs() < 1e-9, "a != b: {tilt:?}");
        assert!(tilt.residual < 1e-13);
    }

    #[test]
    fn tilt_normalization_and_collinearity() {
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(4.0, 6));
        for dir in [[1.0, 0.0], [1.0, 1.0], [0.6, 0.4]] {
            let tilt = tilt_solve(dir, &table).unwrap();
            assert!((table.normalization(tilt.h) - 1.0).abs() < 1e-12);
            let m = tilted_mean(&table, tilt.h);
            assert!((m[0] * dir[1] - m[1] * dir[0]).abs() < 1e-10);
            assert!(tilt.a >= -1e-12 && tilt.a <= table.beta + 1e-12);
            assert!(tilt.b >= -1e-12 && tilt.b <= table.beta + 1e-12);
        }
    }

    #[test]
    fn basic_animal_probabilities_match_closed_forms() {
        let beta = 4.0;
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(beta, 6));
        let tilt = tilt_solve([1.0, 0.0], &table).unwrap();
        let probs = tilt.basic_probs(beta);
        for (i, (x, len)) in BASIC_DISPLACEMENTS.iter().enumerate() {
            let e = table.entry(*x, *len).expect("basic animal in table");
            assert_eq!(e.bare_count, 1);
            let table_prob =
                (tilt.h[0] * x.x as Real + tilt.h[1] * x.y as Real - beta * *len as Real).exp();
            assert!(
                ((table_prob - probs[i]) / probs[i]).abs() < 1e-14,
                "atom {i}: {table_prob} vs {}",
                probs[i]
            );
        }
    }

    #[test]
    fn mass_gap_degenerate_on_unit_table() {
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(4.0, 1));
        let tilt = tilt_solve([1.0, 1.0], &table).unwrap();
        let gap = mass_gap_measure(&table, tilt.h).unwrap();
        assert!(gap.degenerate);
        assert!(gap.rate.is_infinite());
    }

    #[test]
    fn mass_gap_negative_slope_and_grows_with_beta() {
        let mut rates = Vec::new();
        for beta in [3.0, 5.0] {
            let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(beta, 7));
            let tilt = tilt_solve([1.0, 0.0], &table).unwrap();
            let gap = mass_gap_measure(&table, tilt.h).unwrap();
            assert!(!gap.degenerate);
            assert!(gap.rate > 0.0);
            rates.push(gap.rate);
        }
        assert!(rates[1] > rates[0]);
    }

    #[test]
    fn curvature_and_mean_norm() {
        let beta = 4.0;
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(beta, 6));
        let dir = [1.0, 0.0];
        let tilt = tilt_solve(dir, &table).unwrap();
        let cur = wulff_curvature(&tilt, dir, &table);
        assert!(cur.variance_perp >= cur.hessian_lower_bound * (1.0 - 1e-9));
        assert!(cur.curvature > 0.0);
        // |E[X]|_1 = 1 + O(e^{-β-Δ}) and never below 1 (up to the tilt tail).
        assert!(cur.mean_l1 >= 1.0 - 1e-6 - tilt.tail);
        assert!(cur.mean_l1 <= 1.0 + 10.0 * (-beta - tilt.delta_a).exp() + tilt.tail);
    }

    #[test]
    fn symmetric_direction_mean_is_axis_swap_invariant() {
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(4.0, 6));
        let dir = [1.0, 1.0];
        let tilt = tilt_solve(dir, &table).unwrap();
        let cur = wulff_curvature(&tilt, dir, &table);
        assert!((cur.mean[0] - cur.mean[1]).abs() < 1e-9);
    }

    #[test]
    fn basic_four_deficiency_shrinks_like_exp_minus_two_beta() {
        let mut ratios = Vec::new();
        let mut defs = Vec::new();
        for beta in [3.0, 4.0, 5.0] {
            let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(beta, 7));
            let tilt = tilt_solve([1.0, 0.0], &table).unwrap();
            let s: Real = tilt.basic_probs(beta).iter().sum();
            let deficiency = 1.0 - s;
            defs.push(deficiency);
            ratios.push(deficiency / (-2.0 * beta).exp());
        }
        assert!(defs[0] > defs[1] && defs[1] > defs[2]);
        let mid = ratios[1];
        for r in ratios {
            assert!(r > mid / 5.0 && r < mid * 5.0, "deficiency off the e^-2β scale");
        }
    }

    #[test]
    fn horizontal_tilt_a_is_on_exp_minus_beta_scale() {
        let beta = 4.0;
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(beta, 6));
        let tilt = tilt_solve([1.0, 0.0], &table).unwrap();
        let scale = (-beta).exp();
        assert!(tilt.a > scale / 10.0 && tilt.a < scale * 10.0, "a = {}", tilt.a);
    }

    #[test]
    fn animal_displacements_stay_in_the_cone() {
        let table = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(3.0, 5));
        for e in &table.entries {
            assert!(in_cone(e.x, Point::ZERO));
            assert!(e.bare_count > 0 || e.decorated_mass != 0.0);
        }
    }

    #[test]
    fn decorated_mass_matches_bruteforce_on_two_step_paths() {
        // Independent check of the inclusion-exclusion: brute-force over all
        // cluster collections for the two reducible staircases E∘N and N∘E,
        // which make an animal only when a cluster bridges the corner.
        let beta = 3.0;
        let pot = Potential::zero(2.0);
        let params = AnimalTableParams {
            beta,
            len_cap: 2,
            diam_cap: 2,
            delta_rule: DeltaVertexRule::AllVertices,
        };
        let table = AnimalTable::build(&pot, &params);
        let mut brute = 0.0;
        for steps in [vec![Step::E, Step::N], vec![Step::N, Step::E]] {
            let c = Contour::from_steps(Point::ZERO, steps).unwrap();
            brute += oracle::irreducible_animal_mass_bruteforce(
                &c,
                &pot,
                beta,
                params.diam_cap,
                params.delta_rule,
            );
        }
        let e = table.entry(pt(1, 1), 2).expect("bridged staircases");
        assert_eq!(e.bare_count, 0);
        assert!(
            (e.decorated_mass - brute).abs() <= 1e-14 * brute.abs().max(1e-300),
            "{} vs {brute}",
            e.decorated_mass
        );
    }

    #[test]
    fn table_build_is_deterministic() {
        let t1 = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(4.0, 5));
        let t2 = AnimalTable::build(&Potential::zero(2.0), &AnimalTableParams::new(4.0, 5));
        let key = |t: &AnimalTable| -> Vec<(Point, usize, u64, u64)> {
            t.entries.iter().map(|e| (e.x, e.len, e.bare_count, e.decorated_mass.to_bits())).collect()
        };
        assert_eq!(key(&t1), key(&t2));
    }

    #[test]
    fn no_backward_single_edges_as_letters() {
        for s in [Step::W, Step::S] {
            let c = Contour::from_steps(Point::ZERO, vec![s]).unwrap();
            assert!(!is_letter(&c));
        }
    }
}
