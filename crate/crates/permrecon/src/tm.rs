//! Intersection sets, the cell graph rebuilt from them, and the boundary and
//! cut structure of curve segments.
//!
//! Intersection sets are resolved at the level of points: every cell carries
//! [`SLOTS`] fine indices, one per lattice point on its closure (four corners
//! and four edge midpoints). Fine index `SLOTS * rank + slot` stands for the
//! time at which the curve, inside the cell of that rank, passes through that
//! point. Two fine indices are related when their points coincide.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use serde::Serialize;

use crate::curve::{frame_ring, Cell, CellCurve};
use crate::error::{Error, Result};
use crate::permuton::{AugmentedSupport, SupportSet};
use crate::seeds;

pub const SLOTS: usize = 8;

/// Lattice point in doubled coordinates: cell `(x, y)` spans `[2x, 2x+2]^2`.
pub type Point = (i32, i32);

/// Local slot order: LL, bottom mid, LR, right mid, UR, top mid, UL, left mid.
const SLOT_OFFSETS: [(i32, i32); SLOTS] = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

pub fn slot_point(c: Cell, slot: usize) -> Point {
    let (dx, dy) = SLOT_OFFSETS[slot];
    (2 * c.x + dx, 2 * c.y + dy)
}

/// Undirected graph on `0..n`, adjacency lists sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellGraph {
    n: usize,
    adj: Vec<Vec<usize>>,
}

#[derive(Serialize)]
struct GraphJson {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl CellGraph {
    pub fn from_edges<I: IntoIterator<Item = (usize, usize)>>(n: usize, edges: I) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (a, b) in edges {
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        Self { n, adj }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }
    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for (a, l) in self.adj.iter().enumerate() {
            e.extend(l.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        e
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    /// Symmetric difference of the edge sets.
    pub fn mismatched_edges(&self, other: &CellGraph) -> usize {
        let a: BTreeSet<_> = self.edges().into_iter().collect();
        let b: BTreeSet<_> = other.edges().into_iter().collect();
        a.symmetric_difference(&b).count()
    }

    /// Canonical JSON with 1-based vertices.
    pub fn to_json(&self) -> String {
        let g = GraphJson {
            n: self.n,
            edges: self.edges().into_iter().map(|(a, b)| [a + 1, b + 1]).collect(),
        };
        serde_json::to_string(&g).expect("plain data")
    }
}

/// Subgraph induced on the vertices `a..=b`, relabelled `0..=b-a`.
pub fn interval_subgraph(g: &CellGraph, a: usize, b: usize) -> Result<CellGraph> {
    if a > b || b >= g.n {
        return Err(Error::BadRange { a, b, n: g.n });
    }
    let edges = g
        .edges()
        .into_iter()
        .filter(|&(x, y)| x >= a && y <= b)
        .map(|(x, y)| (x - a, y - a));
    Ok(CellGraph::from_edges(b - a + 1, edges))
}

/// Symmetric, reflexive relation on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionSet {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl IntersectionSet {
    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(n: usize, pairs: I) -> Self {
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (a, b) in pairs {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        Self { n, adj }
    }

    /// Relation in which every class is related to itself entirely.
    pub fn from_classes<'a, I: IntoIterator<Item = &'a [usize]>>(n: usize, classes: I) -> Self {
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for class in classes {
            for &a in class {
                adj[a].extend_from_slice(class);
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        Self { n, adj }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn related(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    /// Pairs `(i, j)` with `i <= j`, sorted.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut p = Vec::new();
        for (i, l) in self.adj.iter().enumerate() {
            p.extend(l.iter().filter(|&&j| j >= i).map(|&j| (i, j)));
        }
        p
    }

    pub fn is_subset(&self, other: &IntersectionSet) -> bool {
        self.n == other.n && self.adj.iter().enumerate().all(|(i, l)| l.iter().all(|&j| other.contains(i, j)))
    }

    /// Groups of `k` consecutive indices become one index.
    pub fn coarsen(&self, k: usize) -> Result<IntersectionSet> {
        if k == 0 || self.n % k != 0 {
            return Err(Error::Divisibility { fine: self.n, n: k });
        }
        let pairs = self.pairs().into_iter().map(|(i, j)| (i / k, j / k)).collect::<Vec<_>>();
        Ok(IntersectionSet::from_pairs(self.n / k, pairs))
    }

    /// Sorted `i,j` lines with `i <= j`, 1-based.
    pub fn to_csv(&self) -> String {
        let mut s = format!("n\n{}\ni,j\n", self.n);
        for (i, j) in self.pairs() {
            s.push_str(&format!("{},{}\n", i + 1, j + 1));
        }
        s
    }
}

fn point_groups(cells: &[Cell]) -> BTreeMap<Point, Vec<usize>> {
    let mut groups: BTreeMap<Point, Vec<usize>> = BTreeMap::new();
    for (k, &c) in cells.iter().enumerate() {
        for s in 0..SLOTS {
            groups.entry(slot_point(c, s)).or_default().push(SLOTS * k + s);
        }
    }
    groups
}

/// Ground truth for an arbitrary list of cells: fine indices are related iff
/// they sit on the same lattice point.
pub fn tm_oracle_from_cells(cells: &[Cell]) -> IntersectionSet {
    let groups = point_groups(cells);
    IntersectionSet::from_classes(SLOTS * cells.len(), groups.values().map(Vec::as_slice))
}

/// Cells of the curve, followed by the surrounding frame ring when `frame` is set.
pub fn extended_cells(curve: &CellCurve, frame: bool) -> Vec<Cell> {
    let mut cells = curve.cells().to_vec();
    if frame {
        cells.extend(frame_ring(curve.side()));
    }
    cells
}

pub fn tm_oracle_from_curve(curve: &CellCurve, frame: bool) -> IntersectionSet {
    tm_oracle_from_cells(&extended_cells(curve, frame))
}

/// Cells sharing a positive-length side.
pub fn geometric_graph(cells: &[Cell]) -> CellGraph {
    let index: BTreeMap<Cell, usize> = cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut edges = Vec::new();
    for (k, c) in cells.iter().enumerate() {
        for (dx, dy) in [(1, 0), (0, 1)] {
            if let Some(&j) = index.get(&Cell::new(c.x + dx, c.y + dy)) {
                edges.push((k.min(j), k.max(j)));
            }
        }
    }
    CellGraph::from_edges(cells.len(), edges)
}

/// Blocks `x != y` are adjacent iff some fine `u` in block `x` is related to
/// some `v` in block `y` while everything related to `u` lies in the two blocks.
pub fn graph_from_tm(tm: &IntersectionSet, n: usize) -> Result<CellGraph> {
    if n == 0 || tm.n % n != 0 {
        return Err(Error::Divisibility { fine: tm.n, n });
    }
    let k = tm.n / n;
    let mut edges = BTreeSet::new();
    for u in 0..tm.n {
        let bu = u / k;
        let rel = tm.related(u);
        for &v in rel {
            let bv = v / k;
            if bv == bu || edges.contains(&(bu.min(bv), bu.max(bv))) {
                continue;
            }
            if rel.iter().all(|&q| q / k == bu || q / k == bv) {
                edges.insert((bu.min(bv), bu.max(bv)));
            }
        }
    }
    Ok(CellGraph::from_edges(n, edges))
}

/// Fine indices sharing a column of the augmented support are related.
pub fn tm_from_augmented(a: &AugmentedSupport) -> IntersectionSet {
    let s = a.support();
    let mut by_col: Vec<Vec<usize>> = vec![Vec::new(); s.cols];
    for &(i, j) in &s.cells {
        by_col[j].push(i);
    }
    IntersectionSet::from_classes(s.rows, by_col.iter().map(Vec::as_slice))
}

/// Maximal runs of consecutive ranks.
fn runs(ranks: &[usize]) -> Vec<Vec<usize>> {
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for r in sorted {
        match out.last_mut() {
            Some(run) if *run.last().expect("non-empty") + 1 == r => run.push(r),
            _ => out.push(vec![r]),
        }
    }
    out
}

fn ranks_at_points(cells: &[Cell]) -> BTreeMap<Point, Vec<(usize, usize)>> {
    let mut at: BTreeMap<Point, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, &c) in cells.iter().enumerate() {
        for s in 0..SLOTS {
            at.entry(slot_point(c, s)).or_default().push((k, s));
        }
    }
    at
}

/// Points hit at several times by both curves with the same set of cells
/// around them; these are where the second curve may be given several visits.
pub fn plantable_points(c1: &[Cell], c2: &[Cell]) -> Vec<Point> {
    let a1 = ranks_at_points(c1);
    let a2 = ranks_at_points(c2);
    a1.iter()
        .filter(|(p, v)| {
            v.len() >= 2
                && a2.get(p).is_some_and(|w| {
                    let s1: BTreeSet<Cell> = v.iter().map(|&(k, _)| c1[k]).collect();
                    let s2: BTreeSet<Cell> = w.iter().map(|&(k, _)| c2[k]).collect();
                    s1 == s2
                })
        })
        .map(|(p, _)| *p)
        .collect()
}

/// Seeded subset of [`plantable_points`], each kept with probability `fraction`.
pub fn plant_points(c1: &[Cell], c2: &[Cell], fraction: f64, seed: u64) -> BTreeSet<Point> {
    let mut rng = seeds::stream(seed, "plant", 0);
    plantable_points(c1, c2)
        .into_iter()
        .filter(|_| rng.random::<f64>() < fraction)
        .collect()
}

struct PointVisits {
    /// Second-curve visits at the point, each a set of cells (empty when unresolved).
    visits: Vec<BTreeSet<Cell>>,
    keys: Vec<(usize, usize)>,
}

fn second_curve_visits(p: Point, planted: bool, c2: &[Cell], at2: &BTreeMap<Point, Vec<(usize, usize)>>, first_fine: usize) -> PointVisits {
    match at2.get(&p) {
        Some(hits) if planted => {
            let ranks: Vec<usize> = hits.iter().map(|h| h.0).collect();
            let mut visits = Vec::new();
            let mut keys = Vec::new();
            for run in runs(&ranks) {
                let slot = hits.iter().find(|h| h.0 == run[0]).expect("rank present").1;
                keys.push((run[0], slot));
                visits.push(run.iter().map(|&r| c2[r]).collect());
            }
            PointVisits { visits, keys }
        }
        Some(hits) => {
            let &(r, s) = hits.iter().min().expect("non-empty");
            PointVisits {
                visits: vec![BTreeSet::new()],
                keys: vec![(r, s)],
            }
        }
        None => PointVisits {
            visits: vec![BTreeSet::new()],
            keys: vec![(usize::MAX, first_fine)],
        },
    }
}

/// Support of the pair resolved at multiple points. Rows are the first
/// curve's fine indices. Columns are the second curve's visits to lattice
/// points, ordered by the second curve's time: a single visit per point,
/// except at `planted` points where every maximal run of consecutive
/// second-curve ranks around the point is a separate visit. A row meets a
/// column when their points agree and, at planted points, the first curve's
/// visit and the second curve's visit cover a common cell.
pub fn resolved_support(c1: &[Cell], c2: &[Cell], planted: &BTreeSet<Point>) -> SupportSet {
    let at1 = ranks_at_points(c1);
    let at2 = ranks_at_points(c2);
    let mut columns: Vec<((usize, usize), Point, BTreeSet<Cell>)> = Vec::new();
    for (&p, hits) in &at1 {
        let first_fine = hits.iter().map(|&(k, s)| SLOTS * k + s).min().expect("non-empty");
        let pv = second_curve_visits(p, planted.contains(&p), c2, &at2, first_fine);
        for (v, key) in pv.visits.into_iter().zip(pv.keys) {
            columns.push((key, p, v));
        }
    }
    columns.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut by_point: BTreeMap<Point, Vec<usize>> = BTreeMap::new();
    for (j, (_, p, _)) in columns.iter().enumerate() {
        by_point.entry(*p).or_default().push(j);
    }
    let mut cells = BTreeSet::new();
    for (&p, hits) in &at1 {
        let ranks: Vec<usize> = hits.iter().map(|h| h.0).collect();
        let first_runs = runs(&ranks);
        for &(k, s) in hits {
            let run = first_runs.iter().find(|r| r.contains(&k)).expect("rank present");
            let run_cells: BTreeSet<Cell> = run.iter().map(|&r| c1[r]).collect();
            for &j in &by_point[&p] {
                let visit = &columns[j].2;
                if visit.is_empty() || !visit.is_disjoint(&run_cells) {
                    cells.insert((SLOTS * k + s, j));
                }
            }
        }
    }
    SupportSet::new(SLOTS * c1.len(), columns.len(), cells)
}

/// Independent route to the intersection set of the resolved support: at
/// each point, join the first curve's visits with the second curve's visits
/// whenever they cover a common cell, then relate all fine indices in a joined class.
pub fn tm_partition_join(c1: &[Cell], c2: &[Cell], planted: &BTreeSet<Point>) -> IntersectionSet {
    let at1 = ranks_at_points(c1);
    let at2 = ranks_at_points(c2);
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (p, hits) in &at1 {
        let fine = |run: &[usize]| -> Vec<usize> {
            hits.iter().filter(|h| run.contains(&h.0)).map(|&(k, s)| SLOTS * k + s).collect()
        };
        let ranks: Vec<usize> = hits.iter().map(|h| h.0).collect();
        let r1 = runs(&ranks);
        match at2.get(p).filter(|_| planted.contains(p)) {
            None => classes.push(hits.iter().map(|&(k, s)| SLOTS * k + s).collect()),
            Some(h2) => {
                let r2 = runs(&h2.iter().map(|h| h.0).collect::<Vec<_>>());
                // label propagation over the bipartite overlap relation
                let mut label: Vec<usize> = (0..r1.len()).collect();
                let cells1: Vec<BTreeSet<Cell>> = r1.iter().map(|r| r.iter().map(|&k| c1[k]).collect()).collect();
                let cells2: Vec<BTreeSet<Cell>> = r2.iter().map(|r| r.iter().map(|&k| c2[k]).collect()).collect();
                let mut changed = true;
                while changed {
                    changed = false;
                    for b in &cells2 {
                        let touching: Vec<usize> = (0..r1.len()).filter(|&a| !cells1[a].is_disjoint(b)).collect();
                        if let Some(m) = touching.iter().map(|&a| label[a]).min() {
                            for &a in &touching {
                                if label[a] != m {
                                    label[a] = m;
                                    changed = true;
                                }
                            }
                        }
                    }
                }
                let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for (a, run) in r1.iter().enumerate() {
                    groups.entry(label[a]).or_default().extend(fine(run));
                }
                classes.extend(groups.into_values());
            }
        }
    }
    IntersectionSet::from_classes(SLOTS * c1.len(), classes.iter().map(Vec::as_slice))
}

/// Sorted set of time indices.
pub type TimeSet = Vec<usize>;

/// Times strictly inside `(a, b)` related to some time outside `[a, b]`.
/// `tm` is resolved with `k` fine indices per time.
pub fn boundary_times(tm: &IntersectionSet, k: usize, a: usize, b: usize) -> Result<TimeSet> {
    check_range(tm, k, a, b)?;
    let mut out = Vec::new();
    for t in a + 1..b {
        let outside = (k * t..k * (t + 1)).any(|u| tm.related(u).iter().any(|&q| q / k < a || q / k > b));
        if outside {
            out.push(t);
        }
    }
    Ok(out)
}

fn check_range(tm: &IntersectionSet, k: usize, a: usize, b: usize) -> Result<usize> {
    if k == 0 || tm.n % k != 0 {
        return Err(Error::Divisibility { fine: tm.n, n: k });
    }
    let n = tm.n / k;
    if a > b || b >= n {
        return Err(Error::BadRange { a, b, n });
    }
    Ok(n)
}

/// `t` in `[a, b]` is a cut time iff it is an endpoint or no edge joins
/// `[a, t-1]` with `[t+1, b]`.
pub fn cut_times_in_graph(g: &CellGraph, a: usize, b: usize) -> Result<TimeSet> {
    if a > b || b >= g.n() {
        return Err(Error::BadRange { a, b, n: g.n() });
    }
    let mut diff = vec![0i64; b - a + 2];
    for (x, y) in g.edges() {
        if x >= a && y <= b && y >= x + 2 {
            diff[x + 1 - a] += 1;
            diff[y - a] -= 1;
        }
    }
    let mut out = Vec::new();
    let mut cover = 0;
    for t in a..=b {
        cover += diff[t - a];
        if t == a || t == b || cover == 0 {
            out.push(t);
        }
    }
    Ok(out)
}

pub fn cut_times(tm: &IntersectionSet, k: usize, a: usize, b: usize) -> Result<TimeSet> {
    let n = check_range(tm, k, a, b)?;
    cut_times_in_graph(&graph_from_tm(tm, n)?, a, b)
}

fn components(g: &CellGraph, vertices: &[usize]) -> Vec<Vec<usize>> {
    let inside: BTreeSet<usize> = vertices.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &v in vertices {
        if !seen.insert(v) {
            continue;
        }
        let mut comp = vec![v];
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            for &y in g.neighbors(x) {
                if inside.contains(&y) && seen.insert(y) {
                    comp.push(y);
                    stack.push(y);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Splits the boundary times of `[u, v]` into the two boundary arcs.
///
/// For a margin `eps`, the boundary times in `[u + eps, v - eps]` are grouped
/// into connected components of the cell graph; the margin starts at
/// `ceil((v - u) / 8)` and halves until exactly two components appear. The
/// remaining boundary times near the endpoints join the nearer arc through
/// the graph on boundary times (both arcs on ties), and `u`, `v` join both.
/// The pair is returned in lexicographic order.
pub fn boundary_bipartition(tm: &IntersectionSet, k: usize, u: usize, v: usize) -> Result<(TimeSet, TimeSet)> {
    let n = check_range(tm, k, u, v)?;
    if u >= v {
        return Err(Error::BadRange { a: u, b: v, n });
    }
    let g = graph_from_tm(tm, n)?;
    let bdy = boundary_times(tm, k, u, v)?;
    let mut margins = vec![(v - u).div_ceil(8).max(1)];
    while let Some(&e) = margins.last().filter(|&&e| e > 1) {
        margins.push(e.div_ceil(2));
    }
    let arcs = margins
        .into_iter()
        .map(|eps| {
            let core: Vec<usize> = bdy.iter().copied().filter(|&t| t >= u + eps && t + eps <= v).collect();
            components(&g, &core)
        })
        .find(|comps| comps.len() == 2)
        .ok_or(Error::DegenerateBipartition { u, v })?;
    let allowed: BTreeSet<usize> = bdy.iter().copied().chain([u, v]).collect();
    let dist = |sources: &[usize]| -> BTreeMap<usize, usize> {
        let mut d: BTreeMap<usize, usize> = sources.iter().map(|&s| (s, 0)).collect();
        let mut queue: VecDeque<usize> = sources.iter().copied().collect();
        while let Some(x) = queue.pop_front() {
            let dx = d[&x];
            for &y in g.neighbors(x) {
                if allowed.contains(&y) && !d.contains_key(&y) {
                    d.insert(y, dx + 1);
                    queue.push_back(y);
                }
            }
        }
        d
    };
    let d0 = dist(&arcs[0]);
    let d1 = dist(&arcs[1]);
    let (mut p0, mut p1): (BTreeSet<usize>, BTreeSet<usize>) = (arcs[0].iter().copied().collect(), arcs[1].iter().copied().collect());
    for &t in &bdy {
        if p0.contains(&t) || p1.contains(&t) {
            continue;
        }
        match (d0.get(&t), d1.get(&t)) {
            (Some(a), Some(b)) if a < b => {
                p0.insert(t);
            }
            (Some(a), Some(b)) if b < a => {
                p1.insert(t);
            }
            (Some(_), None) => {
                p0.insert(t);
            }
            (None, Some(_)) => {
                p1.insert(t);
            }
            _ => {
                p0.insert(t);
                p1.insert(t);
            }
        }
    }
    for e in [u, v] {
        p0.insert(e);
        p1.insert(e);
    }
    let (a, b): (Vec<usize>, Vec<usize>) = (p0.into_iter().collect(), p1.into_iter().collect());
    Ok(if a <= b { (a, b) } else { (b, a) })
}

/// Closed boundary walk: one arc in increasing order from `yminus` to
/// `yplus`, then the other arc back down to `yminus`. The arc traced first is
/// the one whose smallest vertex not shared with the other arc is smaller.
pub fn boundary_path(g: &CellGraph, parts: (&[usize], &[usize]), yminus: usize, yplus: usize) -> Result<Vec<usize>> {
    let mut p: Vec<usize> = parts.0.to_vec();
    let mut q: Vec<usize> = parts.1.to_vec();
    p.sort_unstable();
    p.dedup();
    q.sort_unstable();
    q.dedup();
    for e in [yminus, yplus] {
        if !(p.contains(&e) && q.contains(&e)) {
            return Err(Error::EndpointNotInParts(e));
        }
    }
    if let Some(&bad) = p.iter().chain(&q).find(|&&x| x >= g.n()) {
        return Err(Error::BadRange { a: bad, b: bad, n: g.n() });
    }
    let excl = |a: &[usize], b: &[usize]| a.iter().copied().find(|x| !b.contains(x));
    let p_first = match (excl(&p, &q), excl(&q, &p)) {
        (Some(x), Some(y)) => x < y,
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (None, None) => true,
    };
    let (first, second) = if p_first { (p, q) } else { (q, p) };
    let mut path = first;
    path.extend(second.iter().rev().skip(1));
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{build_curve, conjugate, CurveKind, Symmetry};
    use crate::permuton::augment_support;
    use proptest::prelude::*;

    #[test]
    fn oracle_relates_points_not_cells() {
        let c = build_curve(CurveKind::Hilbert, 1, Symmetry::Identity).unwrap();
        let tm = tm_oracle_from_curve(&c, false);
        assert_eq!(tm.n(), 32);
        // UR corner of LL (rank 0) is the LL corner of UR (rank 2): the center point
        assert!(tm.contains(SLOTS * 0 + 4, SLOTS * 2));
        let ranks = tm.coarsen(SLOTS).unwrap();
        assert!(ranks.contains(0, 2));
        for i in 0..3 {
            assert!(ranks.contains(i, i + 1));
        }
        assert!(tm.pairs().iter().all(|&(i, j)| tm.contains(j, i)));
    }

    #[test]
    fn graph_excludes_corner_contacts() {
        let c = build_curve(CurveKind::Hilbert, 2, Symmetry::Identity).unwrap();
        let g = graph_from_tm(&tm_oracle_from_curve(&c, false), 16).unwrap();
        assert_eq!(g, geometric_graph(c.cells()));
        assert!(matches!(graph_from_tm(&tm_oracle_from_curve(&c, false), 7), Err(Error::Divisibility { .. })));
    }

    #[test]
    fn point_resolved_consecutive_relation_gives_a_path() {
        // two slots per time; slot 1 of time t and slot 0 of time t + 1 are the same point
        let n = 5;
        let pairs: Vec<_> = (0..n - 1).map(|t| (2 * t + 1, 2 * t + 2)).collect();
        let tm = IntersectionSet::from_pairs(2 * n, pairs);
        let g = graph_from_tm(&tm, n).unwrap();
        assert_eq!(g.edges(), (0..n - 1).map(|t| (t, t + 1)).collect::<Vec<_>>());
    }

    #[test]
    fn interval_subgraph_examples() {
        let path = CellGraph::from_edges(6, (0..5).map(|i| (i, i + 1)));
        let s = interval_subgraph(&path, 1, 3).unwrap();
        assert_eq!(s.edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(interval_subgraph(&path, 0, 5).unwrap(), path);
        assert!(interval_subgraph(&path, 3, 6).is_err());
    }

    #[test]
    fn path_cut_times() {
        let path = CellGraph::from_edges(6, (0..5).map(|i| (i, i + 1)));
        assert_eq!(cut_times_in_graph(&path, 0, 5).unwrap(), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn full_square_has_no_interior_cut_times() {
        for kind in CurveKind::ALL {
            for d in 2..=4 {
                let c = build_curve(kind, d, Symmetry::Identity).unwrap();
                let tm = tm_oracle_from_curve(&c, false);
                let n = c.len();
                assert_eq!(cut_times(&tm, SLOTS, 0, n - 1).unwrap(), vec![0, n - 1]);
                assert!(boundary_times(&tm, SLOTS, 0, n - 1).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn interior_cells_are_not_boundary_times() {
        let c = build_curve(CurveKind::Hilbert, 3, Symmetry::Identity).unwrap();
        let tm = tm_oracle_from_curve(&c, false);
        // first depth-2 block occupies [0,4)^2; its cells at distance 2 from the block edge
        // never touch outside cells
        let b = boundary_times(&tm, SLOTS, 0, 15).unwrap();
        for t in 1..15 {
            let cell = c.cell(t);
            let deep = cell.x >= 1 && cell.y >= 1 && cell.x <= 2 && cell.y <= 2;
            let touches_out = (0..c.len()).filter(|&r| r > 15).any(|r| c.cell(r).touches(cell));
            assert_eq!(b.contains(&t), touches_out, "rank {t}");
            if deep {
                assert!(!b.contains(&t));
            }
        }
        assert!(!b.is_empty());
    }

    #[test]
    fn bipartition_of_framed_square() {
        let c = build_curve(CurveKind::Hilbert, 2, Symmetry::Identity).unwrap();
        let tm = tm_oracle_from_curve(&c, true);
        let (a, b) = boundary_bipartition(&tm, SLOTS, 0, 15).unwrap();
        assert_eq!(a, vec![0, 1, 14, 15]);
        assert_eq!(b, vec![0, 3, 4, 5, 6, 9, 10, 11, 12, 15]);
        let cc = conjugate(&c);
        let tmc = tm_oracle_from_curve(&cc, true);
        assert_eq!(boundary_bipartition(&tmc, SLOTS, 0, 15).unwrap(), (a, b));
    }

    #[test]
    fn boundary_path_tiebreak() {
        let g = CellGraph::from_edges(6, [(1, 2), (2, 5), (1, 3), (3, 4), (4, 5)]);
        let p = boundary_path(&g, (&[1, 3, 4, 5], &[1, 2, 5]), 1, 5).unwrap();
        assert_eq!(p, vec![1, 2, 5, 4, 3, 1]);
        let again = boundary_path(&g, (&[1, 2, 5], &[1, 3, 4, 5]), 1, 5).unwrap();
        assert_eq!(p, again);
        assert!(matches!(boundary_path(&g, (&[1, 2], &[1, 3, 5]), 1, 5), Err(Error::EndpointNotInParts(5))));
        let same = boundary_path(&g, (&[1, 5], &[1, 5]), 1, 5).unwrap();
        assert_eq!(same, vec![1, 5, 1]);
    }

    #[test]
    fn augmented_support_recovers_the_oracle_without_planting() {
        for d in 1..=3 {
            let c1 = build_curve(CurveKind::Hilbert, d, Symmetry::Identity).unwrap();
            let c2 = build_curve(CurveKind::Hilbert, d, Symmetry::Rot180).unwrap();
            let s = resolved_support(c1.cells(), c2.cells(), &BTreeSet::new());
            assert!(s.is_marginally_full());
            let tm = tm_from_augmented(&augment_support(&s));
            assert_eq!(tm, tm_oracle_from_cells(c1.cells()));
        }
    }

    #[test]
    fn hand_support_examples() {
        let s = SupportSet::new(3, 3, [(0, 0), (1, 1), (2, 2)].into_iter().collect());
        let tm = tm_from_augmented(&augment_support(&s));
        assert_eq!(tm.pairs(), vec![(0, 0), (1, 1), (2, 2)]);
        let s = SupportSet::new(2, 2, [(0, 0), (1, 0), (1, 1)].into_iter().collect());
        assert!(tm_from_augmented(&augment_support(&s)).contains(0, 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn chain_is_contained_in_oracle_and_matches_partition_join(d in 1u32..4, k2 in 0usize..2, g2 in 0usize..8, frac in 0.0f64..1.0, seed in any::<u64>(), frame in any::<bool>()) {
            let c1 = build_curve(CurveKind::Hilbert, d, Symmetry::Identity).unwrap();
            let c2 = build_curve(CurveKind::ALL[k2], d, Symmetry::ALL[g2]).unwrap();
            let e1 = extended_cells(&c1, frame);
            let planted = plant_points(&e1, c2.cells(), frac, seed);
            let s = resolved_support(&e1, c2.cells(), &planted);
            prop_assert!(s.is_marginally_full());
            let tm = tm_from_augmented(&augment_support(&s));
            prop_assert!(tm.is_subset(&tm_oracle_from_cells(&e1)));
            prop_assert_eq!(&tm, &tm_partition_join(&e1, c2.cells(), &planted));
            // consecutive cells always stay related through their shared side
            let g = graph_from_tm(&tm, e1.len()).unwrap();
            for t in 0..c1.len() - 1 {
                prop_assert!(g.has_edge(t, t + 1));
            }
            prop_assert_eq!(g.mismatched_edges(&geometric_graph(&e1)) == 0, g == geometric_graph(&e1));
        }

        #[test]
        fn graph_is_symmetric_irreflexive(pairs in proptest::collection::vec((0usize..24, 0usize..24), 0..40), k in prop_oneof![Just(1usize), Just(2), Just(3)]) {
            let tm = IntersectionSet::from_pairs(24, pairs);
            let g = graph_from_tm(&tm, 24 / k).unwrap();
            for (a, b) in g.edges() {
                prop_assert!(a < b);
                prop_assert!(g.has_edge(b, a));
            }
        }
    }
}
