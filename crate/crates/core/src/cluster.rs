//! Connected clusters of lattice sites: the decoration universe for cluster
//! potentials.
//!
//! A cluster is a finite site set identified with the union of the closed
//! unit squares around its sites; connectivity is therefore 8-adjacency
//! (squares sharing only a corner touch). Enumeration is bounded by an
//! ∞-norm diameter cap and seeded on a given site set.

use crate::lattice::{diam_inf, pt, Point};
use std::collections::HashSet;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Cluster {
    /// Sorted, deduplicated sites; the first site is the lexicographic anchor.
    sites: Vec<Point>,
}

impl Cluster {
    pub fn new(mut sites: Vec<Point>) -> Cluster {
        sites.sort();
        sites.dedup();
        Cluster { sites }
    }

    pub fn singleton(p: Point) -> Cluster {
        Cluster { sites: vec![p] }
    }

    #[inline]
    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    #[inline]
    pub fn anchor(&self) -> Point {
        self.sites[0]
    }

    /// Sites translated so the anchor sits at the origin.
    pub fn shape(&self) -> Vec<Point> {
        let a = self.anchor();
        self.sites.iter().map(|p| p.sub(a)).collect()
    }

    pub fn translate(&self, t: Point) -> Cluster {
        Cluster { sites: self.sites.iter().map(|p| p.add(t)).collect() }
    }

    /// `diam_∞` as a square union; `None` encodes a disconnected set.
    pub fn diam(&self) -> Option<i64> {
        diam_inf(&self.sites).expect("clusters are nonempty")
    }

    pub fn contains(&self, p: Point) -> bool {
        self.sites.binary_search(&p).is_ok()
    }
}

/// All connected clusters with `diam_∞ ≤ diam_cap` containing at least one
/// seed site. Deterministic order (sorted site lists).
pub fn clusters_touching(seeds: &[Point], diam_cap: i64) -> Vec<Cluster> {
    let mut seen: HashSet<Vec<Point>> = HashSet::new();
    let mut queue: Vec<Vec<Point>> = Vec::new();
    for &s in seeds {
        let c = vec![s];
        if seen.insert(c.clone()) {
            queue.push(c);
        }
    }
    let spread_cap = diam_cap - 1;
    let mut head = 0;
    while head < queue.len() {
        let current = queue[head].clone();
        head += 1;
        for &site in &current {
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let cand = site.add(pt(dx, dy));
                    if current.binary_search(&cand).is_ok() {
                        continue;
                    }
                    let (mut min_x, mut max_x, mut min_y, mut max_y) =
                        (cand.x, cand.x, cand.y, cand.y);
                    for &p in &current {
                        min_x = min_x.min(p.x);
                        max_x = max_x.max(p.x);
                        min_y = min_y.min(p.y);
                        max_y = max_y.max(p.y);
                    }
                    if max_x - min_x > spread_cap || max_y - min_y > spread_cap {
                        continue;
                    }
                    let mut next = current.clone();
                    let pos = next.binary_search(&cand).unwrap_err();
                    next.insert(pos, cand);
                    if seen.insert(next.clone()) {
                        queue.push(next);
                    }
                }
            }
        }
    }
    let mut out: Vec<Cluster> = queue.into_iter().map(|sites| Cluster { sites }).collect();
    out.sort_by(|l, r| l.sites.cmp(&r.sites));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_cluster_basics() {
        let c = Cluster::singleton(pt(2, 3));
        assert_eq!(c.diam(), Some(1));
        assert_eq!(c.shape(), vec![pt(0, 0)]);
    }

    #[test]
    fn enumeration_at_cap_one_is_singletons() {
        let found = clusters_touching(&[pt(0, 0), pt(1, 0)], 1);
        assert_eq!(found.len(), 2);
        assert!(found.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn enumeration_counts_match_direct_count_at_cap_two() {
        // A cluster with diam ≤ 2 through the origin fits in the 3x3 window
        // around it; brute-force all subsets of that window as the oracle.
        let window: Vec<Point> = (-1..=1)
            .flat_map(|x| (-1..=1).map(move |y| pt(x, y)))
            .collect();
        let mut expect = 0usize;
        for mask in 1u32..(1 << 9) {
            let sites: Vec<Point> = (0..9).filter(|i| mask >> i & 1 == 1).map(|i| window[i]).collect();
            if !sites.contains(&pt(0, 0)) {
                continue;
            }
            if let Some(d) = diam_inf(&sites).unwrap() {
                if d <= 2 {
                    expect += 1;
                }
            }
        }
        let got = clusters_touching(&[pt(0, 0)], 2).len();
        assert_eq!(got, expect);
    }

    #[test]
    fn every_enumerated_cluster_is_connected_bounded_and_seeded() {
        let seeds = [pt(0, 0), pt(2, 1)];
        for c in clusters_touching(&seeds, 3) {
            let d = c.diam().expect("connected");
            assert!(d <= 3);
            assert!(seeds.iter().any(|s| c.contains(*s)));
        }
    }
}
