//! Permutons on an `m x m` grid, their supports, the augmented-support
//! closure and re-rooting.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::curve::TimedCurve;
use crate::error::{Error, Result};
use crate::measure::GridMeasure;
use crate::numeric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    CurvePair,
    Permutation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Permuton {
    m: usize,
    mass: Vec<f64>,
    provenance: Provenance,
}

impl Permuton {
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
    pub fn mass(&self, row: usize, col: usize) -> f64 {
        self.mass[row * self.m + col]
    }
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.m).map(|r| numeric::sum((0..self.m).map(|c| self.mass(r, c)))).collect()
    }
    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.m).map(|c| numeric::sum((0..self.m).map(|r| self.mass(r, c)))).collect()
    }
    pub fn total(&self) -> f64 {
        numeric::sum(self.mass.iter().copied())
    }

    /// Largest deviation of a row or column sum from `1/m`.
    pub fn marginal_defect(&self) -> f64 {
        let target = 1.0 / self.m as f64;
        self.row_sums()
            .into_iter()
            .chain(self.col_sums())
            .map(|s| (s - target).abs())
            .fold(0.0, f64::max)
    }

    /// Nonzero cells as `row,col,mass` with 1-based indices.
    pub fn to_csv(&self) -> String {
        let prov = match self.provenance {
            Provenance::CurvePair => "curvepair",
            Provenance::Permutation => "permutation",
        };
        let mut s = format!("m,provenance\n{},{}\nrow,col,mass\n", self.m, prov);
        for r in 0..self.m {
            for c in 0..self.m {
                let x = self.mass(r, c);
                if x != 0.0 {
                    s.push_str(&format!("{},{},{}\n", r + 1, c + 1, x));
                }
            }
        }
        s
    }
}

fn check_same_measure(c: &TimedCurve, measure: &GridMeasure) -> Result<()> {
    if c.curve().depth() != measure.depth() {
        return Err(Error::DepthMismatch(c.curve().depth(), measure.depth()));
    }
    for (k, cell) in c.curve().cells().iter().enumerate() {
        if c.masses()[k] != measure.mass(cell.x as usize, cell.y as usize) {
            return Err(Error::MeasureMismatch);
        }
    }
    Ok(())
}

/// Splits the slope-one segment `{(t + s, u + s) : 0 <= s <= w}` at every grid
/// line of resolution `m`, returning `(s_start, s_end)` pieces.
fn pieces(t: f64, u: f64, w: f64, m: usize) -> Vec<(f64, f64)> {
    let mf = m as f64;
    let mut cuts = vec![0.0, w];
    for base in [t, u] {
        let first = (base * mf).floor() as i64 + 1;
        let last = ((base + w) * mf).ceil() as i64;
        for j in first..last {
            let s = j as f64 / mf - base;
            if s > 0.0 && s < w {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).map(|p| (p[0], p[1])).filter(|p| p.1 > p.0).collect()
}

fn bin(x: f64, m: usize) -> usize {
    ((x * m as f64).floor().max(0.0) as usize).min(m - 1)
}

/// Mass of each grid rectangle is the time the first curve spends in the
/// row bin while the second curve is at the same point in the column bin.
pub fn permuton_from_pair(c1: &TimedCurve, c2: &TimedCurve, measure: &GridMeasure, m: usize) -> Result<Permuton> {
    check_same_measure(c1, measure)?;
    check_same_measure(c2, measure)?;
    let n = c1.len();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("resolution {m} not in [1, {n}]")));
    }
    let rank2 = |k: usize| c2.curve().rank(c1.curve().cell(k));
    let mut acc = vec![numeric::KahanSum::new(); m * m];
    for k in 0..n {
        let t = c1.breakpoints()[k];
        let u = c2.breakpoints()[rank2(k)];
        let w = c1.masses()[k];
        for (a, b) in pieces(t, u, w, m) {
            let mid = 0.5 * (a + b);
            acc[bin(t + mid, m) * m + bin(u + mid, m)].add(b - a);
        }
    }
    Ok(Permuton {
        m,
        mass: acc.iter().map(|s| s.value()).collect(),
        provenance: Provenance::CurvePair,
    })
}

/// `sigma` is 0-based; mass `weights[k]` (default `1/n`) sits at `(k, sigma[k])`.
pub fn permuton_from_permutation(sigma: &[usize], weights: Option<&[f64]>) -> Result<Permuton> {
    let n = sigma.len();
    check_permutation(sigma)?;
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::WeightsLength { got: w.len(), expected: n });
        }
        if (numeric::sum(w.iter().copied()) - 1.0).abs() > 1e-9 || w.iter().any(|x| *x < 0.0) {
            return Err(Error::InvalidParameter("weights must be nonnegative and sum to 1".into()));
        }
    }
    let mut mass = vec![0.0; n * n];
    for (k, &s) in sigma.iter().enumerate() {
        mass[k * n + s] = weights.map_or(1.0 / n as f64, |w| w[k]);
    }
    Ok(Permuton {
        m: n,
        mass,
        provenance: Provenance::Permutation,
    })
}

pub(crate) fn check_permutation(sigma: &[usize]) -> Result<()> {
    let n = sigma.len();
    if n == 0 {
        return Err(Error::InvalidPermutation("empty".into()));
    }
    let mut seen = vec![false; n];
    for &s in sigma {
        if s >= n || std::mem::replace(&mut seen[s], true) {
            return Err(Error::InvalidPermutation(format!("{sigma:?}")));
        }
    }
    Ok(())
}

/// Cells of a `rows x cols` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    pub rows: usize,
    pub cols: usize,
    pub cells: BTreeSet<(usize, usize)>,
}

impl SupportSet {
    pub fn new(rows: usize, cols: usize, cells: BTreeSet<(usize, usize)>) -> Self {
        Self { rows, cols, cells }
    }

    /// Every row and every column meets the support.
    pub fn is_marginally_full(&self) -> bool {
        let mut r = vec![false; self.rows];
        let mut c = vec![false; self.cols];
        for &(i, j) in &self.cells {
            r[i] = true;
            c[j] = true;
        }
        r.iter().all(|&x| x) && c.iter().all(|&x| x)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("rows,cols\n{},{}\nrow,col\n", self.rows, self.cols);
        for &(i, j) in &self.cells {
            s.push_str(&format!("{},{}\n", i + 1, j + 1));
        }
        s
    }
}

pub fn support_of(p: &Permuton, threshold: f64) -> SupportSet {
    let mut cells = BTreeSet::new();
    for r in 0..p.m {
        for c in 0..p.m {
            if p.mass(r, c) > threshold {
                cells.insert((r, c));
            }
        }
    }
    SupportSet::new(p.m, p.m, cells)
}

/// A support closed under the line-intersection rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedSupport(SupportSet);

impl AugmentedSupport {
    pub fn support(&self) -> &SupportSet {
        &self.0
    }
    pub fn into_support(self) -> SupportSet {
        self.0
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Two support cells on a common row or column start an event; the event
/// collects every line reachable by alternating row and column moves through
/// support cells, and all intersections of its collected lines are added.
/// Events are the connected components of the row/column incidence graph.
pub fn augment_support(s: &SupportSet) -> AugmentedSupport {
    let mut uf = UnionFind::new(s.rows + s.cols);
    for &(i, j) in &s.cells {
        uf.union(i, s.rows + j);
    }
    let mut count = vec![0usize; s.rows + s.cols];
    for &(i, _) in &s.cells {
        let r = uf.find(i);
        count[r] += 1;
    }
    let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); s.rows + s.cols];
    let mut cols_of: Vec<Vec<usize>> = vec![Vec::new(); s.rows + s.cols];
    for i in 0..s.rows {
        let r = uf.find(i);
        if count[r] >= 2 {
            rows_of[r].push(i);
        }
    }
    for j in 0..s.cols {
        let r = uf.find(s.rows + j);
        if count[r] >= 2 {
            cols_of[r].push(j);
        }
    }
    let mut cells = s.cells.clone();
    for (rows, cols) in rows_of.iter().zip(&cols_of) {
        for &i in rows {
            for &j in cols {
                cells.insert((i, j));
            }
        }
    }
    AugmentedSupport(SupportSet::new(s.rows, s.cols, cells))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RootChoice {
    /// Fail when the row meets the support more than once.
    #[default]
    Unique,
    /// Take the smallest support column in the row.
    FirstHit,
}

/// Cyclic shift sending row `t` and its support column to `(0, 0)`.
pub fn reroot_permuton(p: &Permuton, t: usize, choice: RootChoice) -> Result<Permuton> {
    let m = p.m;
    if t >= m {
        return Err(Error::BadRange { a: t, b: t, n: m });
    }
    let cols: Vec<usize> = (0..m).filter(|&c| p.mass(t, c) > 0.0).collect();
    let psi = match (cols.len(), choice) {
        (1, _) => cols[0],
        (k, RootChoice::FirstHit) if k > 1 => cols[0],
        (k, _) => return Err(Error::AmbiguousRoot { row: t, count: k }),
    };
    let mut mass = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            mass[((r + m - t) % m) * m + (c + m - psi) % m] = p.mass(r, c);
        }
    }
    Ok(Permuton {
        m,
        mass,
        provenance: p.provenance,
    })
}

fn bins_meeting(a: f64, b: f64, m: usize, tol: f64) -> std::ops::RangeInclusive<usize> {
    let mf = m as f64;
    let lo = ((a - tol) * mf - 1.0).ceil().max(0.0) as usize;
    let hi = (((b + tol) * mf).floor().max(0.0) as usize).min(m - 1);
    lo..=hi
}

fn bins_at(x: f64, m: usize, tol: f64) -> std::ops::RangeInclusive<usize> {
    bins_meeting(x, x, m, tol)
}

const GRID_TOL: f64 = 1e-12;

/// Closed grid bins met by the closure of the graph of the cell-level time change.
pub fn graph_of_psi_cells(c1: &TimedCurve, c2: &TimedCurve, m: usize) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for k in 0..c1.len() {
        let t = c1.breakpoints()[k];
        let u = c2.breakpoints()[c2.curve().rank(c1.curve().cell(k))];
        let w = c1.masses()[k];
        let ps = pieces(t, u, w, m);
        let mut probes: Vec<f64> = ps.iter().map(|p| 0.5 * (p.0 + p.1)).collect();
        probes.extend(ps.iter().flat_map(|p| [p.0, p.1]));
        probes.push(0.0);
        probes.push(w);
        for s in probes {
            for i in bins_at(t + s, m, GRID_TOL) {
                for j in bins_at(u + s, m, GRID_TOL) {
                    out.insert((i, j));
                }
            }
        }
    }
    out
}

/// Bins `(i, j)` such that some first-curve cell active during row bin `i`
/// and some second-curve cell active during column bin `j` have intersecting closures.
pub fn tm_compatible_cells(c1: &TimedCurve, c2: &TimedCurve, m: usize) -> BTreeSet<(usize, usize)> {
    let side = c1.curve().side() as i32;
    let mut out = BTreeSet::new();
    for k in 0..c1.len() {
        let rows = bins_meeting(c1.breakpoints()[k], c1.breakpoints()[k + 1], m, GRID_TOL);
        let c = c1.curve().cell(k);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let (x, y) = (c.x + dx, c.y + dy);
                if x < 0 || y < 0 || x >= side || y >= side {
                    continue;
                }
                let l = c2.curve().rank(crate::curve::Cell::new(x, y));
                let cols = bins_meeting(c2.breakpoints()[l], c2.breakpoints()[l + 1], m, GRID_TOL);
                for i in rows.clone() {
                    for j in cols.clone() {
                        out.insert((i, j));
                    }
                }
            }
        }
    }
    out
}
