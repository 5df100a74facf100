//! Open contours with the south-west splitting rule, their site and bond
//! neighbourhoods, and exhaustive enumeration with pruning.
//!
//! Contours are stored as a start point plus a step sequence (2 bits per step
//! in the cache encoding). All coordinates are in the direct-lattice
//! convention: the dual lattice is identified with `Z²` by subtracting the
//! dual origin `(1/2, 1/2)`.

use crate::lattice::{pt, Point, Wall};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Unit step, in the fixed enumeration order E < N < W < S.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Step {
    E = 0,
    N = 1,
    W = 2,
    S = 3,
}

pub const ALL_STEPS: [Step; 4] = [Step::E, Step::N, Step::W, Step::S];

impl Step {
    #[inline]
    pub fn delta(self) -> Point {
        match self {
            Step::E => pt(1, 0),
            Step::N => pt(0, 1),
            Step::W => pt(-1, 0),
            Step::S => pt(0, -1),
        }
    }

    #[inline]
    pub fn from_code(code: u8) -> Step {
        match code & 3 {
            0 => Step::E,
            1 => Step::N,
            2 => Step::W,
            _ => Step::S,
        }
    }
}

/// Axis of a dual bond; a bond is `(base, base + e_axis)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Axis {
    H,
    V,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Bond {
    pub base: Point,
    pub axis: Axis,
}

impl Bond {
    #[inline]
    pub fn axis_delta(&self) -> Point {
        match self.axis {
            Axis::H => pt(1, 0),
            Axis::V => pt(0, 1),
        }
    }

    /// Canonical bond of the edge from `v` in direction `s`.
    #[inline]
    pub fn of_edge(v: Point, s: Step) -> Bond {
        match s {
            Step::E => Bond { base: v, axis: Axis::H },
            Step::W => Bond { base: v.add(pt(-1, 0)), axis: Axis::H },
            Step::N => Bond { base: v, axis: Axis::V },
            Step::S => Bond { base: v.add(pt(0, -1)), axis: Axis::V },
        }
    }

    /// The six sites whose closed unit squares touch the closed bond segment
    /// (the segment lives on the dual lattice, offset by `(1/2, 1/2)`).
    pub fn touching_sites(&self) -> [Point; 6] {
        let u = self.base;
        match self.axis {
            Axis::H => [
                u.add(pt(0, 0)),
                u.add(pt(1, 0)),
                u.add(pt(2, 0)),
                u.add(pt(0, 1)),
                u.add(pt(1, 1)),
                u.add(pt(2, 1)),
            ],
            Axis::V => [
                u.add(pt(0, 0)),
                u.add(pt(0, 1)),
                u.add(pt(0, 2)),
                u.add(pt(1, 0)),
                u.add(pt(1, 1)),
                u.add(pt(1, 2)),
            ],
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ContourError {
    #[error("a contour needs at least two vertices")]
    TooShort,
    #[error("vertices {0} and {1} are not lattice neighbours")]
    BrokenChain(usize, usize),
    #[error("edge {0} repeats an earlier edge")]
    DuplicateEdge(usize),
    #[error("south-west splitting rule violated at vertex index {0}")]
    SwRuleViolation(usize),
    #[error("endpoints coincide; open contours connect two distinct points")]
    ClosedLoop,
}

/// A validated open contour.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Contour {
    start: Point,
    steps: Vec<Step>,
}

/// Side of the slope-(+1) line spanned by an incident edge direction:
/// `+1` for {E, S} (south-east side), `-1` for {W, N}.
#[inline]
fn line_side(dir: Point) -> i64 {
    (dir.x - dir.y).signum()
}

impl Contour {
    pub fn from_vertices(vertices: &[Point]) -> Result<Contour, ContourError> {
        if vertices.len() < 2 {
            return Err(ContourError::TooShort);
        }
        let mut steps = Vec::with_capacity(vertices.len() - 1);
        for i in 1..vertices.len() {
            let d = vertices[i].sub(vertices[i - 1]);
            let step = match (d.x, d.y) {
                (1, 0) => Step::E,
                (0, 1) => Step::N,
                (-1, 0) => Step::W,
                (0, -1) => Step::S,
                _ => return Err(ContourError::BrokenChain(i - 1, i)),
            };
            steps.push(step);
        }
        Contour::from_steps(vertices[0], steps)
    }

    pub fn from_steps(start: Point, steps: Vec<Step>) -> Result<Contour, ContourError> {
        if steps.is_empty() {
            return Err(ContourError::TooShort);
        }
        let c = Contour { start, steps };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), ContourError> {
        let mut edges = HashSet::with_capacity(self.steps.len());
        let mut passes: HashMap<Point, Vec<i64>> = HashMap::new();
        let mut v = self.start;
        let mut prev_in: Option<Step> = None;
        for (i, &s) in self.steps.iter().enumerate() {
            if !edges.insert(Bond::of_edge(v, s)) {
                return Err(ContourError::DuplicateEdge(i));
            }
            if let Some(inc) = prev_in {
                // Completing the pass (in, out) at interior vertex index i.
                let d_in = inc.delta().neg();
                let d_out = s.delta();
                let entry = passes.entry(v).or_default();
                let side = if line_side(d_in) == line_side(d_out) { line_side(d_in) } else { 0 };
                entry.push(side);
                if entry.len() == 2 && entry.iter().any(|&sd| sd == 0) {
                    return Err(ContourError::SwRuleViolation(i));
                }
            }
            v = v.add(s.delta());
            prev_in = Some(s);
        }
        if v == self.start {
            return Err(ContourError::ClosedLoop);
        }
        Ok(())
    }

    #[inline]
    pub fn start(&self) -> Point {
        self.start
    }

    pub fn end(&self) -> Point {
        self.steps.iter().fold(self.start, |v, s| v.add(s.delta()))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn vertices(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut v = self.start;
        out.push(v);
        for &s in &self.steps {
            v = v.add(s.delta());
            out.push(v);
        }
        out
    }

    pub fn displacement(&self) -> Point {
        self.end().sub(self.start)
    }

    pub fn translate(&self, t: Point) -> Contour {
        Contour { start: self.start.add(t), steps: self.steps.clone() }
    }

    pub fn reversed(&self) -> Contour {
        Contour {
            start: self.end(),
            steps: self.steps.iter().rev().map(|&s| rev_step(s)).collect(),
        }
    }

    /// Whether every vertex lies in the closed half-plane of `wall`.
    pub fn inside(&self, wall: &Wall) -> bool {
        let mut v = self.start;
        if !wall.contains(v) {
            return false;
        }
        for &s in &self.steps {
            v = v.add(s.delta());
            if !wall.contains(v) {
                return false;
            }
        }
        true
    }
}

#[inline]
fn rev_step(s: Step) -> Step {
    match s {
        Step::E => Step::W,
        Step::W => Step::E,
        Step::N => Step::S,
        Step::S => Step::N,
    }
}

/// Which vertices carry the diagonal pair {v, v + (1,1)} of `Δ_γ`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub enum DeltaVertexRule {
    /// Diagonal sites at every vertex (matches the metric definition).
    #[default]
    AllVertices,
    /// Diagonal sites only at endpoints and direction changes.
    CornersOnly,
}

/// `Δ_γ`: sites at Euclidean distance 1/2 from the contour, plus the
/// south-west / north-east diagonal sites of its vertices.
pub fn delta_gamma(c: &Contour, rule: DeltaVertexRule) -> HashSet<Point> {
    let mut out = HashSet::with_capacity(3 * c.len());
    let verts = c.vertices();
    for w in verts.windows(2) {
        let (u, v) = (w[0], w[1]);
        let base = pt(u.x.min(v.x), u.y.min(v.y));
        if u.y == v.y {
            out.insert(base.add(pt(1, 0)));
            out.insert(base.add(pt(1, 1)));
        } else {
            out.insert(base.add(pt(0, 1)));
            out.insert(base.add(pt(1, 1)));
        }
    }
    for (i, &v) in verts.iter().enumerate() {
        let corner = i == 0
            || i == verts.len() - 1
            || c.steps[i - 1] != c.steps[i];
        if rule == DeltaVertexRule::AllVertices || corner {
            out.insert(v);
            out.insert(v.add(pt(1, 1)));
        }
    }
    out
}

/// `∇_γ` as a bond multiset: each contour bond `b = (x, x+e)` contributes
/// `b`, `b+e`, `b-e`; multiplicities accumulate.
pub fn nabla_gamma(c: &Contour) -> HashMap<Bond, u32> {
    let mut out = HashMap::with_capacity(3 * c.len());
    let mut v = c.start;
    for &s in &c.steps {
        let b = Bond::of_edge(v, s);
        let e = b.axis_delta();
        for shifted in [b.base.sub(e), b.base, b.base.add(e)] {
            *out.entry(Bond { base: shifted, axis: b.axis }).or_insert(0) += 1;
        }
        v = v.add(s.delta());
    }
    out
}

/// Number of bonds of `∇_γ` (with multiplicity) whose closed segment touches
/// the square-union of `sites`.
pub fn nabla_intersection_count(nabla: &HashMap<Bond, u32>, sites: &HashSet<Point>) -> u32 {
    let mut total = 0;
    for (bond, mult) in nabla {
        if bond.touching_sites().iter().any(|s| sites.contains(s)) {
            total += mult;
        }
    }
    total
}

/// Exhaustive enumeration of open contours `a ↦ b` with `|γ| ≤ max_len`,
/// optionally confined to a half-plane. Deterministic lexicographic order in
/// the step alphabet E < N < W < S. Pruning: repeated edges, SW-rule dead
/// ends, and the remaining l1 budget.
pub fn enumerate_contours(a: Point, b: Point, max_len: usize, wall: Option<&Wall>) -> Vec<Contour> {
    let mut out = Vec::new();
    if a == b {
        return out;
    }
    if let Some(w) = wall {
        if !w.contains(a) || !w.contains(b) {
            return out;
        }
    }
    let mut st = DfsState::new(a, b, max_len, wall);
    st.run(&mut |steps| out.push(Contour { start: a, steps: steps.to_vec() }));
    out
}

/// Visit every valid contour starting at `start` with `|γ| ≤ max_len`, in
/// lexicographic step order. Prefixes whose endpoint has returned to the
/// start are traversed but not reported (they are not open contours).
pub fn for_each_contour_from(start: Point, max_len: usize, visit: &mut dyn FnMut(&[Step], Point)) {
    fn recurse(st: &mut DfsState, visit: &mut dyn FnMut(&[Step], Point)) {
        if !st.steps.is_empty() && st.v != st.origin {
            visit(&st.steps, st.v);
        }
        for s in ALL_STEPS {
            if st.push(s) {
                recurse(st, visit);
                st.pop();
            }
        }
    }
    // Target far away so the l1 budget prune never fires.
    let sentinel = pt(start.x + 4 * max_len as i64 + 4, start.y);
    let mut st = DfsState::new(start, sentinel, max_len, None);
    st.budget_prune = false;
    recurse(&mut st, visit);
}

/// Prefix-partitioned parallel enumeration. Each worker owns a disjoint
/// length-`prefix_depth` prefix; results are merged in traversal order, so
/// the output is bit-identical to [`enumerate_contours`].
pub fn enumerate_contours_parallel(
    a: Point,
    b: Point,
    max_len: usize,
    wall: Option<&Wall>,
    prefix_depth: usize,
) -> Vec<Contour> {
    use rayon::prelude::*;
    let depth = prefix_depth.min(max_len.saturating_sub(1));
    if a == b || depth == 0 || max_len < a.sub(b).l1() as usize {
        return enumerate_contours(a, b, max_len, wall);
    }
    let mut items = Vec::new();
    {
        let mut st = DfsState::new(a, b, max_len, wall);
        st.collect_items(depth, &mut items);
    }
    items
        .into_par_iter()
        .map(|item| match item {
            WorkItem::Short(steps) => vec![Contour { start: a, steps }],
            WorkItem::Prefix(prefix) => {
                let mut st = DfsState::new(a, b, max_len, wall);
                for &s in &prefix {
                    assert!(st.push(s), "stored prefix must re-apply");
                }
                let mut out = Vec::new();
                st.run(&mut |steps| out.push(Contour { start: a, steps: steps.to_vec() }));
                out
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Unit of parallel work: a finished short contour, or a prefix owning the
/// subtree of all its extensions.
enum WorkItem {
    Short(Vec<Step>),
    Prefix(Vec<Step>),
}

struct DfsState<'a> {
    origin: Point,
    target: Point,
    max_len: usize,
    wall: Option<&'a Wall>,
    budget_prune: bool,
    v: Point,
    steps: Vec<Step>,
    edges: HashSet<Bond>,
    passes: HashMap<Point, Vec<i64>>,
}

impl<'a> DfsState<'a> {
    fn new(a: Point, b: Point, max_len: usize, wall: Option<&'a Wall>) -> Self {
        DfsState {
            origin: a,
            target: b,
            max_len,
            wall,
            budget_prune: true,
            v: a,
            steps: Vec::with_capacity(max_len),
            edges: HashSet::with_capacity(2 * max_len),
            passes: HashMap::new(),
        }
    }

    /// Try to append step `s`; returns false when pruned.
    fn push(&mut self, s: Step) -> bool {
        if self.steps.len() >= self.max_len {
            return false;
        }
        let next = self.v.add(s.delta());
        if self.budget_prune
            && self.steps.len() + 1 + next.sub(self.target).l1() as usize > self.max_len
        {
            return false;
        }
        if let Some(w) = self.wall {
            if !w.contains(next) {
                return false;
            }
        }
        let bond = Bond::of_edge(self.v, s);
        if self.edges.contains(&bond) {
            return false;
        }
        if let Some(&inc) = self.steps.last() {
            let d_in = inc.delta().neg();
            let d_out = s.delta();
            let side = if line_side(d_in) == line_side(d_out) { line_side(d_in) } else { 0 };
            let existing = self.passes.get(&self.v).map(|p| p.len()).unwrap_or(0);
            if existing >= 1 {
                let prior = self.passes.get(&self.v).unwrap();
                if side == 0 || prior.iter().any(|&sd| sd == 0) {
                    return false;
                }
            }
            self.passes.entry(self.v).or_default().push(side);
        }
        self.edges.insert(bond);
        self.steps.push(s);
        self.v = next;
        true
    }

    fn pop(&mut self) {
        let s = self.steps.pop().expect("pop on empty path");
        let prev = self.v.sub(s.delta());
        self.edges.remove(&Bond::of_edge(prev, s));
        if self.steps.last().is_some() {
            let list = self.passes.get_mut(&prev).expect("pass bookkeeping");
            list.pop();
            if list.is_empty() {
                self.passes.remove(&prev);
            }
        }
        self.v = prev;
    }

    fn run(&mut self, emit: &mut dyn FnMut(&[Step])) {
        if self.v == self.target && !self.steps.is_empty() {
            emit(&self.steps);
        }
        for s in ALL_STEPS {
            if self.push(s) {
                self.run(emit);
                self.pop();
            }
        }
    }

    /// Traversal-ordered split into short contours (length < depth) and
    /// depth-length prefixes; concatenating the expansions in this order
    /// reproduces the sequential enumeration exactly.
    fn collect_items(&mut self, depth: usize, out: &mut Vec<WorkItem>) {
        if self.steps.len() == depth {
            out.push(WorkItem::Prefix(self.steps.clone()));
            return;
        }
        if self.v == self.target && !self.steps.is_empty() {
            out.push(WorkItem::Short(self.steps.clone()));
        }
        for s in ALL_STEPS {
            if self.push(s) {
                self.collect_items(depth, out);
                self.pop();
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Binary cache: header {magic, version, key}, varint-compressed step
// sequences, sha256 checksum. Purely an optimization; contents are
// bit-identical to a fresh enumeration.
// ---------------------------------------------------------------------------

const CACHE_MAGIC: &[u8; 4] = b"PLYC";
const CACHE_VERSION: u32 = 1;

fn write_varint(buf: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            buf.push(byte);
            break;
        }
        buf.push(byte | 0x80);
    }
}

fn read_varint(data: &[u8], pos: &mut usize) -> Option<u64> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let byte = *data.get(*pos)?;
        *pos += 1;
        v |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Some(v);
        }
        shift += 7;
        if shift > 63 {
            return None;
        }
    }
}

fn key_bytes(a: Point, b: Point, max_len: usize, wall: Option<&Wall>) -> Vec<u8> {
    let mut k = Vec::new();
    for v in [a.x, a.y, b.x, b.y, max_len as i64] {
        k.extend_from_slice(&v.to_le_bytes());
    }
    match wall {
        None => k.push(0),
        Some(w) => {
            k.push(1);
            k.extend_from_slice(&w.a.to_le_bytes());
            k.extend_from_slice(&w.b.to_le_bytes());
        }
    }
    k
}

pub fn cache_path(dir: &Path, a: Point, b: Point, max_len: usize, wall: Option<&Wall>) -> PathBuf {
    let mut h = Sha256::new();
    h.update(key_bytes(a, b, max_len, wall));
    let digest = h.finalize();
    let mut name = String::from("contours-");
    for byte in digest.iter().take(12) {
        name.push_str(&format!("{byte:02x}"));
    }
    name.push_str(".bin");
    dir.join(name)
}

fn encode_cache(key: &[u8], contours: &[Contour]) -> Vec<u8> {
    let mut payload = Vec::new();
    write_varint(&mut payload, contours.len() as u64);
    for c in contours {
        write_varint(&mut payload, c.steps.len() as u64);
        let mut byte = 0u8;
        for (i, &s) in c.steps.iter().enumerate() {
            byte |= (s as u8) << ((i & 3) * 2);
            if i & 3 == 3 {
                payload.push(byte);
                byte = 0;
            }
        }
        if c.steps.len() % 4 != 0 {
            payload.push(byte);
        }
    }
    let mut out = Vec::with_capacity(payload.len() + key.len() + 44);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    write_varint(&mut out, key.len() as u64);
    out.extend_from_slice(key);
    let mut h = Sha256::new();
    h.update(&payload);
    out.extend_from_slice(&h.finalize());
    out.extend_from_slice(&payload);
    out
}

fn decode_cache(data: &[u8], key: &[u8], start: Point) -> Option<Vec<Contour>> {
    if data.len() < 8 || &data[0..4] != CACHE_MAGIC {
        return None;
    }
    if u32::from_le_bytes(data[4..8].try_into().ok()?) != CACHE_VERSION {
        return None;
    }
    let mut pos = 8usize;
    let klen = read_varint(data, &mut pos)? as usize;
    if data.len() < pos + klen || &data[pos..pos + klen] != key {
        return None;
    }
    pos += klen;
    if data.len() < pos + 32 {
        return None;
    }
    let checksum = &data[pos..pos + 32];
    pos += 32;
    let payload = &data[pos..];
    let mut h = Sha256::new();
    h.update(payload);
    if h.finalize().as_slice() != checksum {
        return None;
    }
    let mut p = 0usize;
    let count = read_varint(payload, &mut p)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_varint(payload, &mut p)? as usize;
        let nbytes = len.div_ceil(4);
        if payload.len() < p + nbytes {
            return None;
        }
        let mut steps = Vec::with_capacity(len);
        for i in 0..len {
            let byte = payload[p + i / 4];
            steps.push(Step::from_code(byte >> ((i & 3) * 2)));
        }
        p += nbytes;
        out.push(Contour { start, steps });
    }
    Some(out)
}

/// Enumeration through the on-disk cache. Corrupt or mismatched files are
/// recomputed and rewritten.
pub fn enumerate_contours_cached(
    a: Point,
    b: Point,
    max_len: usize,
    wall: Option<&Wall>,
    cache_dir: &Path,
) -> std::io::Result<Vec<Contour>> {
    let key = key_bytes(a, b, max_len, wall);
    let path = cache_path(cache_dir, a, b, max_len, wall);
    if let Ok(mut f) = std::fs::File::open(&path) {
        let mut data = Vec::new();
        f.read_to_end(&mut data)?;
        if let Some(contours) = decode_cache(&data, &key, a) {
            return Ok(contours);
        }
    }
    let contours = enumerate_contours(a, b, max_len, wall);
    std::fs::create_dir_all(cache_dir)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&encode_cache(&key, &contours))?;
    }
    std::fs::rename(&tmp, &path)?;
    Ok(contours)
}
