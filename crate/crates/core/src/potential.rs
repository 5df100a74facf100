//! Cluster potentials: the base potential Φ (local, decay-bounded,
//! translation covariant), its half-plane modification Φ̃, the positivization
//! Φ → Φ′, decoration weights Ψ, and the lattice constant c(β).
//!
//! Convention: a potential evaluates to 0 when the intersection with the
//! contour neighbourhood `Δ_γ` is empty, so sums over clusters meeting `∇_γ`
//! and sums over clusters meeting `Δ_γ` agree term by term.

use crate::cluster::{clusters_touching, Cluster};
use crate::contour::{delta_gamma, nabla_gamma, Contour, DeltaVertexRule};
use crate::lattice::{Point, Wall};
use crate::Real;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::sync::Arc;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PotentialError {
    #[error("cluster tail diverges: lambda * exp(-chi*beta) = {0} >= 1")]
    DivergentTail(f64),
    #[error("decay audit failed: |phi| = {value} exceeds {bound} on a cluster of diameter {diam}")]
    DecayViolation { value: f64, bound: f64, diam: i64 },
    #[error("positivized potential went negative ({0}) on a cluster meeting nabla")]
    NegativePositivized(f64),
    #[error("cluster meets delta but not nabla; neighbourhood geometry is broken")]
    DeltaWithoutNabla,
}

/// Built-in base potentials. `User` is for tests and embedding.
#[derive(Clone)]
pub enum PotentialKind {
    /// Φ ≡ 0.
    Zero,
    /// Reproducible worst-case-sign potential: Φ(C, ·) = σ · e^{-χβ(diam+1)}
    /// with σ ∈ {-1, +1} drawn from a seeded hash of the canonicalized
    /// (shape, shape ∩ Δ_γ) pair.
    RandomSign { seed: u64 },
    /// Caller-supplied evaluation of (cluster, C ∩ Δ_γ); must satisfy the
    /// declared decay bound.
    User(Arc<dyn Fn(&Cluster, &[Point]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PotentialKind::Zero => write!(f, "Zero"),
            PotentialKind::RandomSign { seed } => write!(f, "RandomSign{{seed:{seed}}}"),
            PotentialKind::User(_) => write!(f, "User(..)"),
        }
    }
}

/// A base potential Φ together with its declared decay exponent χ and
/// prefactor: |Φ(C, ·)| ≤ prefactor · e^{-χβ(diam_∞(C)+1)}.
#[derive(Clone, Debug)]
pub struct Potential {
    pub kind: PotentialKind,
    pub chi: f64,
    pub prefactor: f64,
}

impl Potential {
    pub fn zero(chi: f64) -> Potential {
        Potential { kind: PotentialKind::Zero, chi, prefactor: 1.0 }
    }

    pub fn random_sign(chi: f64, seed: u64) -> Potential {
        Potential { kind: PotentialKind::RandomSign { seed }, chi, prefactor: 1.0 }
    }

    /// Decay bound for a cluster of the given diameter.
    #[inline]
    pub fn decay_bound(&self, beta: Real, diam: i64) -> Real {
        self.prefactor * (-self.chi * beta * (diam as Real + 1.0)).exp()
    }

    /// Whether the decorated sum needs cluster enumeration at all.
    pub fn needs_clusters(&self) -> bool {
        !matches!(self.kind, PotentialKind::Zero)
    }

    /// Φ(C, C ∩ Δ_γ). Empty intersections evaluate to 0.
    pub fn evaluate(&self, beta: Real, cluster: &Cluster, intersection: &[Point]) -> Real {
        if intersection.is_empty() {
            return 0.0;
        }
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::RandomSign { seed } => {
                let anchor = cluster.anchor();
                let rel: Vec<Point> = intersection.iter().map(|p| p.sub(anchor)).collect();
                let sigma = hash_sign(*seed, &cluster.shape(), &rel, None);
                let d = cluster.diam().expect("connected cluster");
                sigma * (-self.chi * beta * (d as Real + 1.0)).exp()
            }
            PotentialKind::User(f) => f(cluster, intersection),
        }
    }
}

/// Boundary modification: how Φ̃ differs from Φ on clusters not contained in
/// the wall half-plane. Φ̃ = Φ whenever the cluster lies inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryMode {
    /// Φ̃ = Φ everywhere.
    None,
    /// Φ̃ - Φ = M e^{-β} on singleton wall-row sites touching the contour.
    Pin { m: f64 },
    /// Φ̃ = position-dependent random sign times the decay bound on clusters
    /// crossing the wall (the modified potential need not be translation
    /// covariant, so the hash includes the anchor).
    RandomSign { seed: u64 },
}

/// The pair (Φ, Φ̃) for experiments near a wall.
#[derive(Clone, Debug)]
pub struct ModifiedPotential {
    pub base: Potential,
    pub boundary: BoundaryMode,
}

impl ModifiedPotential {
    pub fn unmodified(base: Potential) -> ModifiedPotential {
        ModifiedPotential { base, boundary: BoundaryMode::None }
    }

    /// Built-in pinning modification of strength `M ≥ 0`.
    pub fn boundary_pin(base: Potential, m: f64) -> ModifiedPotential {
        ModifiedPotential { base, boundary: BoundaryMode::Pin { m } }
    }

    /// Φ̃(C, C ∩ Δ_γ) given the wall.
    pub fn evaluate_tilde(&self, beta: Real, wall: &Wall, cluster: &Cluster, intersection: &[Point]) -> Real {
        if cluster.sites().iter().all(|&s| wall.site_inside(s)) {
            return self.base.evaluate(beta, cluster, intersection);
        }
        match &self.boundary {
            BoundaryMode::None => self.base.evaluate(beta, cluster, intersection),
            BoundaryMode::Pin { m } => {
                let mut v = self.base.evaluate(beta, cluster, intersection);
                if cluster.len() == 1 && !intersection.is_empty() && wall.site_on_wall_row(cluster.anchor()) {
                    v += m * (-beta).exp();
                }
                v
            }
            BoundaryMode::RandomSign { seed } => {
                if intersection.is_empty() {
                    return 0.0;
                }
                let anchor = cluster.anchor();
                let rel: Vec<Point> = intersection.iter().map(|p| p.sub(anchor)).collect();
                let sigma = hash_sign(*seed, &cluster.shape(), &rel, Some(anchor));
                let d = cluster.diam().expect("connected cluster");
                sigma * (-self.base.chi * beta * (d as Real + 1.0)).exp()
            }
        }
    }

    /// Decay prefactor declared for Φ̃ (the pin adds M e^{-β} on diameter-1
    /// clusters, which is M times the χ = 1/2 bound).
    pub fn tilde_prefactor(&self, beta: Real) -> Real {
        match &self.boundary {
            BoundaryMode::None => self.base.prefactor,
            BoundaryMode::RandomSign { .. } => self.base.prefactor.max(1.0),
            BoundaryMode::Pin { m } => {
                let pin_over_bound = m * (-beta).exp() / (-self.base.chi * beta * 2.0).exp();
                self.base.prefactor + pin_over_bound
            }
        }
    }
}

fn hash_sign(seed: u64, shape: &[Point], intersection: &[Point], anchor: Option<Point>) -> Real {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in shape {
        h.update(p.x.to_le_bytes());
        h.update(p.y.to_le_bytes());
    }
    h.update([0xff]);
    for p in intersection {
        h.update(p.x.to_le_bytes());
        h.update(p.y.to_le_bytes());
    }
    if let Some(a) = anchor {
        h.update([0xee]);
        h.update(a.x.to_le_bytes());
        h.update(a.y.to_le_bytes());
    }
    if h.finalize()[0] & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Ψ(C; γ) = (e^{Φ'} - 1) · 1{C ∩ ∇_γ ≠ ∅}; always ≥ 0 for positivized input.
#[inline]
pub fn psi_weight(phi_prime: Real, meets_nabla: bool) -> Real {
    if meets_nabla {
        phi_prime.exp_m1()
    } else {
        0.0
    }
}

/// Φ'(C, γ) = Φ(C, Δ_γ ∩ C) + |C ∩ ∇_γ| e^{-χβ(diam+1)}.
#[inline]
pub fn positivize(phi_value: Real, nabla_count: u32, chi: Real, beta: Real, diam: i64) -> Real {
    phi_value + nabla_count as Real * (-chi * beta * (diam as Real + 1.0)).exp()
}

/// Truncated c(β) with a geometric tail bound.
#[derive(Clone, Copy, Debug)]
pub struct CBeta {
    pub value: Real,
    /// Bound on the omitted mass, for weights majorized by
    /// `e^{-χβ(sites+1)}` beyond the cap (the diameter-only bound is not
    /// summable over all connected clusters).
    pub tail: Real,
    pub diam_cap: i64,
}

/// c(β) = Σ over connected clusters touching a fixed bond of
/// e^{-χβ(diam_∞+1)}, truncated at `diam_cap`. The tail uses the supplied
/// lattice-animal growth constant λ (connected sets of k sites containing a
/// fixed site ≤ λ^k; 8-adjacency needs λ ≈ 8).
pub fn c_beta(beta: Real, chi: Real, diam_cap: i64, lambda: Real) -> Result<CBeta, PotentialError> {
    let q = lambda * (-chi * beta).exp();
    if q >= 1.0 {
        return Err(PotentialError::DivergentTail(q));
    }
    let bond = crate::contour::Bond { base: Point::ZERO, axis: crate::contour::Axis::H };
    let seeds = bond.touching_sites();
    let mut value = 0.0;
    for c in clusters_touching(&seeds, diam_cap) {
        let d = c.diam().expect("connected");
        value += (-chi * beta * (d as Real + 1.0)).exp();
    }
    // Every omitted cluster has ≥ diam_cap + 1 sites and touches one of the
    // six stencil sites.
    let tail = 6.0 * (-chi * beta).exp() * q.powi(diam_cap as i32 + 1) / (1.0 - q);
    Ok(CBeta { value, tail, diam_cap })
}

/// Per-contour decoration data: Δ_γ, ∇_γ, and the cluster sums feeding the
/// log-weights.
pub struct Decoration {
    pub delta: HashSet<Point>,
    pub nabla: std::collections::HashMap<crate::contour::Bond, u32>,
}

impl Decoration {
    pub fn of(contour: &Contour, rule: DeltaVertexRule) -> Decoration {
        Decoration { delta: delta_gamma(contour, rule), nabla: nabla_gamma(contour) }
    }

    pub fn intersection(&self, cluster: &Cluster) -> Vec<Point> {
        cluster.sites().iter().copied().filter(|s| self.delta.contains(s)).collect()
    }

    pub fn nabla_count(&self, cluster: &Cluster) -> u32 {
        let sites: HashSet<Point> = cluster.sites().iter().copied().collect();
        crate::contour::nabla_intersection_count(&self.nabla, &sites)
    }
}

/// Σ over clusters meeting Δ_γ (diam ≤ cap) of Φ(C, Δ_γ ∩ C).
pub fn base_cluster_sum(pot: &Potential, dec: &Decoration, beta: Real, diam_cap: i64) -> Real {
    if !pot.needs_clusters() {
        return 0.0;
    }
    let seeds: Vec<Point> = {
        let mut v: Vec<Point> = dec.delta.iter().copied().collect();
        v.sort();
        v
    };
    let mut sum = 0.0;
    for c in clusters_touching(&seeds, diam_cap) {
        let inter = dec.intersection(&c);
        sum += pot.evaluate(beta, &c, &inter);
    }
    sum
}

/// Σ over clusters meeting Δ_γ, not contained in the half-plane, of
/// (Φ̃ - Φ)(C, Δ_γ ∩ C). Seeds are restricted to Δ-sites close enough to the
/// wall for a diam ≤ cap cluster to cross it.
pub fn boundary_difference_sum(
    mp: &ModifiedPotential,
    dec: &Decoration,
    wall: &Wall,
    beta: Real,
    diam_cap: i64,
) -> Real {
    if mp.boundary == BoundaryMode::None {
        return 0.0;
    }
    let reach = (diam_cap - 1) * (wall.a.abs() + wall.b.abs());
    let mut seeds: Vec<Point> = dec
        .delta
        .iter()
        .copied()
        .filter(|&s| 2 * (wall.dot(s) - reach) < wall.a + wall.b)
        .collect();
    seeds.sort();
    if seeds.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for c in clusters_touching(&seeds, diam_cap) {
        if c.sites().iter().all(|&s| wall.site_inside(s)) {
            continue;
        }
        let inter = dec.intersection(&c);
        if inter.is_empty() {
            continue;
        }
        sum += mp.evaluate_tilde(beta, wall, &c, &inter) - mp.base.evaluate(beta, &c, &inter);
    }
    sum
}

/// Randomized audit of (P2) decay, positivity of Φ', and the geometric fact
/// that meeting Δ_γ implies meeting ∇_γ.
pub fn audit_potential(
    pot: &Potential,
    beta: Real,
    trials: usize,
    seed: u64,
    diam_cap: i64,
) -> Result<(), PotentialError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let len = 1 + rng.gen_range(0..8);
        let contour = random_contour(&mut rng, len);
        let dec = Decoration::of(&contour, DeltaVertexRule::AllVertices);
        // Random connected cluster near the contour.
        let verts = contour.vertices();
        let base = verts[rng.gen_range(0..verts.len())];
        let offset = Point { x: rng.gen_range(-2..=2), y: rng.gen_range(-2..=2) };
        let mut sites = vec![base.add(offset)];
        for _ in 0..rng.gen_range(0..diam_cap.max(1) as usize + 1) {
            let from = sites[rng.gen_range(0..sites.len())];
            let d = Point { x: rng.gen_range(-1..=1), y: rng.gen_range(-1..=1) };
            sites.push(from.add(d));
        }
        let cluster = Cluster::new(sites);
        let Some(diam) = cluster.diam() else { continue };
        let inter = dec.intersection(&cluster);
        let value = pot.evaluate(beta, &cluster, &inter);
        let bound = pot.decay_bound(beta, diam);
        if value.abs() > bound * (1.0 + 1e-12) {
            return Err(PotentialError::DecayViolation { value, bound, diam });
        }
        let nabla_count = dec.nabla_count(&cluster);
        if !inter.is_empty() && nabla_count == 0 {
            return Err(PotentialError::DeltaWithoutNabla);
        }
        if nabla_count > 0 && pot.prefactor <= 1.0 {
            let phi_prime = positivize(value, nabla_count, pot.chi, beta, diam);
            if phi_prime < -1e-12 {
                return Err(PotentialError::NegativePositivized(phi_prime));
            }
        }
    }
    Ok(())
}

/// Seeded random valid contour, for audits and randomized identities.
pub fn random_contour<R: rand::Rng>(rng: &mut R, len: usize) -> Contour {
    use crate::contour::{Step, ALL_STEPS};
    loop {
        let mut steps: Vec<Step> = Vec::with_capacity(len);
        let mut ok = true;
        for _ in 0..len {
            let mut order = ALL_STEPS;
            // Fisher-Yates on four entries.
            for i in (1..4).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let mut placed = false;
            for cand in order {
                steps.push(cand);
                if Contour::from_steps(Point::ZERO, steps.clone()).is_ok()
                    || partial_ok(&steps)
                {
                    placed = true;
                    break;
                }
                steps.pop();
            }
            if !placed {
                ok = false;
                break;
            }
        }
        if ok {
            if let Ok(c) = Contour::from_steps(Point::ZERO, steps) {
                return c;
            }
        }
    }
}

fn partial_ok(steps: &[crate::contour::Step]) -> bool {
    // A prefix is acceptable when the only failure mode is the closed-loop
    // check (the endpoint may still move away).
    matches!(
        Contour::from_steps(Point::ZERO, steps.to_vec()),
        Ok(_) | Err(crate::contour::ContourError::ClosedLoop)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::Step;
    use crate::lattice::pt;

    #[test]
    fn c_beta_cap_one_counts_singletons() {
        let (beta, chi) = (4.0, 2.0);
        let c = c_beta(beta, chi, 1, 8.0).unwrap();
        let expect = 6.0 * (-2.0 * chi * beta).exp();
        assert!((c.value - expect).abs() < 1e-15, "{} vs {expect}", c.value);
        assert!(c.tail > 0.0);
    }

    #[test]
    fn c_beta_monotone_in_cap_and_vanishing_in_beta() {
        let c2 = c_beta(4.0, 2.0, 2, 8.0).unwrap();
        let c3 = c_beta(4.0, 2.0, 3, 8.0).unwrap();
        assert!(c3.value >= c2.value);
        let big = c_beta(40.0, 2.0, 2, 8.0).unwrap();
        assert!(big.value < 1e-30);
    }

    #[test]
    fn c_beta_divergence_guard() {
        assert!(matches!(c_beta(0.1, 0.5, 2, 8.0), Err(PotentialError::DivergentTail(_))));
    }

    #[test]
    fn positivize_examples() {
        let (beta, chi) = (4.0, 2.0);
        // Zero potential, singleton meeting nabla once.
        let v = positivize(0.0, 1, chi, beta, 1);
        assert!((v - (-2.0 * chi * beta).exp()).abs() < 1e-18);
        // Potential at its decay-bound minimum cancels exactly.
        let v = positivize(-(-chi * beta * 2.0).exp(), 1, chi, beta, 1);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn psi_weight_examples() {
        assert_eq!(psi_weight(0.0, true), 0.0);
        assert_eq!(psi_weight(0.5, false), 0.0);
        let x = (-16.0f64).exp();
        assert!((psi_weight(x, true) - x.exp_m1()).abs() < 1e-30);
        assert!(psi_weight(x, true) > 0.0);
    }

    #[test]
    fn zero_and_random_sign_pass_audit() {
        audit_potential(&Potential::zero(2.0), 4.0, 300, 7, 2).unwrap();
        audit_potential(&Potential::random_sign(2.0, 11), 4.0, 1000, 13, 2).unwrap();
        audit_potential(&Potential::random_sign(0.5, 11), 3.0, 1000, 17, 2).unwrap();
    }

    #[test]
    fn audit_catches_decay_violation() {
        let bad = Potential {
            kind: PotentialKind::User(Arc::new(|_c, _i| 1.0)),
            chi: 2.0,
            prefactor: 1.0,
        };
        assert!(audit_potential(&bad, 4.0, 200, 3, 2).is_err());
    }

    #[test]
    fn random_sign_is_translation_covariant() {
        let pot = Potential::random_sign(2.0, 42);
        let beta = 4.0;
        let c = Cluster::new(vec![pt(0, 0), pt(1, 0)]);
        let inter = vec![pt(0, 0)];
        let t = pt(5, -2);
        let ct = c.translate(t);
        let intert: Vec<Point> = inter.iter().map(|p| p.add(t)).collect();
        assert_eq!(pot.evaluate(beta, &c, &inter), pot.evaluate(beta, &ct, &intert));
    }

    #[test]
    fn boundary_pin_only_hits_wall_row_singletons() {
        let wall = Wall::HORIZONTAL;
        let mp = ModifiedPotential::boundary_pin(Potential::zero(0.5), 3.0);
        let beta = 3.0;
        let on_wall = Cluster::singleton(pt(2, 0));
        let off_wall = Cluster::singleton(pt(2, 1));
        let inter = vec![pt(2, 0)];
        let inter_off = vec![pt(2, 1)];
        assert!((mp.evaluate_tilde(beta, &wall, &on_wall, &inter) - 3.0 * (-beta).exp()).abs() < 1e-18);
        assert_eq!(mp.evaluate_tilde(beta, &wall, &off_wall, &inter_off), 0.0);
        // M = 0 leaves the potential untouched.
        let mp0 = ModifiedPotential::boundary_pin(Potential::zero(0.5), 0.0);
        assert_eq!(mp0.evaluate_tilde(beta, &wall, &on_wall, &inter), 0.0);
    }

    #[test]
    fn tilde_equals_base_inside_half_plane() {
        let wall = Wall::HORIZONTAL;
        let mp = ModifiedPotential {
            base: Potential::random_sign(2.0, 5),
            boundary: BoundaryMode::RandomSign { seed: 99 },
        };
        let c = Cluster::new(vec![pt(1, 2), pt(2, 2)]);
        let inter = vec![pt(1, 2)];
        assert_eq!(
            mp.evaluate_tilde(4.0, &wall, &c, &inter),
            mp.base.evaluate(4.0, &c, &inter)
        );
    }

    #[test]
    fn decoration_sum_zero_for_zero_potential() {
        let c = Contour::from_steps(Point::ZERO, vec![Step::E, Step::N]).unwrap();
        let dec = Decoration::of(&c, DeltaVertexRule::AllVertices);
        assert_eq!(base_cluster_sum(&Potential::zero(2.0), &dec, 4.0, 2), 0.0);
    }
}
