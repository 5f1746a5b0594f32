//! Correlated walk pairs and the mated-CRT cell graph they encode.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;
use crate::tm::CellGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Free,
    Bridge,
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Boundary::Free),
            "bridge" => Ok(Boundary::Bridge),
            _ => Err(Error::Config(format!("unknown boundary mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkPair {
    pub n: usize,
    pub l: Vec<f64>,
    pub r: Vec<f64>,
    pub rho: f64,
    pub boundary: Boundary,
}

impl WalkPair {
    pub fn increments(&self) -> (Vec<f64>, Vec<f64>) {
        let dl = self.l.windows(2).map(|w| w[1] - w[0]).collect();
        let dr = self.r.windows(2).map(|w| w[1] - w[0]).collect();
        (dl, dr)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,L,R\n");
        for k in 0..=self.n {
            s.push_str(&format!("{},{},{}\n", k, self.l[k], self.r[k]));
        }
        s
    }
}

/// Step `k` uses two standard normals `(Z1, Z2)` drawn in that order from
/// the `"walks"` stream; `dL = Z1 / sqrt n`, `dR = (rho Z1 + sqrt(1 - rho^2) Z2) / sqrt n`.
pub fn sample_walk_pair(n: usize, rho: f64, seed: u64, boundary: Boundary) -> Result<WalkPair> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::InvalidRho(rho));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("walk length {n} < 2")));
    }
    let mut rng = seeds::stream(seed, "walks", 0);
    let scale = 1.0 / (n as f64).sqrt();
    let c = (1.0 - rho * rho).sqrt();
    let mut l = Vec::with_capacity(n + 1);
    let mut r = Vec::with_capacity(n + 1);
    l.push(0.0);
    r.push(0.0);
    for k in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        l.push(l[k] + z1 * scale);
        r.push(r[k] + (rho * z1 + c * z2) * scale);
    }
    if boundary == Boundary::Bridge {
        let (ln, rn) = (l[n], r[n]);
        for k in 0..=n {
            let s = k as f64 / n as f64;
            l[k] -= s * ln;
            r[k] -= s * rn;
        }
        l[n] = 0.0;
        r[n] = 0.0;
    }
    Ok(WalkPair { n, l, r, rho, boundary })
}

/// Pearson correlation of the two increment sequences.
pub fn increment_correlation(w: &WalkPair) -> f64 {
    let (a, b) = w.increments();
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Sparse table for range minima.
struct MinTable {
    levels: Vec<Vec<f64>>,
}

impl MinTable {
    fn new(v: &[f64]) -> Self {
        let mut levels = vec![v.to_vec()];
        let mut w = 1;
        while 2 * w <= v.len() {
            let prev = levels.last().expect("non-empty");
            let next: Vec<f64> = (0..=v.len() - 2 * w).map(|i| prev[i].min(prev[i + w])).collect();
            levels.push(next);
            w *= 2;
        }
        Self { levels }
    }

    /// Minimum over `lo..=hi`.
    fn min(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let k = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        self.levels[k][lo].min(self.levels[k][hi + 1 - (1 << k)])
    }
}

/// Segment tree over `I(y)` reporting every `y` in a range with `I(y) < x`.
struct LowTree {
    size: usize,
    mins: Vec<i64>,
}

impl LowTree {
    fn new(vals: &[i64]) -> Self {
        let size = vals.len().next_power_of_two();
        let mut mins = vec![i64::MAX; 2 * size];
        mins[size..size + vals.len()].copy_from_slice(vals);
        for i in (1..size).rev() {
            mins[i] = mins[2 * i].min(mins[2 * i + 1]);
        }
        Self { size, mins }
    }

    fn report(&self, lo: usize, hi: usize, bound: i64, out: &mut Vec<usize>) {
        self.walk(1, 0, self.size - 1, lo, hi, bound, out);
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(&self, node: usize, nl: usize, nr: usize, lo: usize, hi: usize, bound: i64, out: &mut Vec<usize>) {
        if nr < lo || nl > hi || self.mins[node] >= bound {
            return;
        }
        if nl == nr {
            out.push(nl);
            return;
        }
        let mid = (nl + nr) / 2;
        self.walk(2 * node, nl, mid, lo, hi, bound, out);
        self.walk(2 * node + 1, mid + 1, nr, lo, hi, bound, out);
    }
}

/// Edges `(x, y)`, `x < y`, 1-based, satisfying the running-minimum rule for one coordinate.
fn one_side_edges(v: &[f64]) -> Vec<(usize, usize)> {
    let n = v.len() - 1;
    let table = MinTable::new(v);
    // a[x] = min(v[x-1], v[x]) for x in 1..=n
    let a: Vec<f64> = (0..=n).map(|x| if x == 0 { f64::NAN } else { v[x - 1].min(v[x]) }).collect();
    // J(x): first j >= x with v[j] < a[x], or n + 1
    let mut jx = vec![n + 1; n + 1];
    for x in 1..=n {
        if table.min(x, n) < a[x] {
            let (mut lo, mut hi) = (x, n);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if table.min(x, mid) < a[x] {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            jx[x] = lo;
        }
    }
    // I(y): last j <= y - 1 with v[j] < a[y], or -1
    let mut iy = vec![i64::MAX; n + 1];
    for y in 1..=n {
        iy[y] = -1;
        if table.min(0, y - 1) < a[y] {
            let (mut lo, mut hi) = (0, y - 1);
            while lo < hi {
                let mid = (lo + hi + 1) / 2;
                if table.min(mid, y - 1) < a[y] {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            iy[y] = lo as i64;
        }
    }
    let tree = LowTree::new(&iy);
    let mut edges = Vec::new();
    let mut hits = Vec::new();
    for x in 1..n {
        let hi = jx[x].min(n);
        if hi <= x {
            continue;
        }
        hits.clear();
        tree.report(x + 1, hi, x as i64, &mut hits);
        edges.extend(hits.iter().map(|&y| (x, y)));
    }
    edges
}

/// Mated-CRT adjacency on vertices `1..=n` in `O((n + E) log n)`.
/// Vertices `x < y` are adjacent iff for `L` (or for `R`)
/// `max(min v[x-1..=x], min v[y-1..=y]) <= min v[x..=y-1]`.
pub fn mated_crt_graph(w: &WalkPair) -> CellGraph {
    let mut edges = one_side_edges(&w.l);
    edges.extend(one_side_edges(&w.r));
    CellGraph::from_edges(w.n, edges.into_iter().map(|(x, y)| (x - 1, y - 1)))
}

/// Direct `O(n^2)` evaluation of the adjacency rule.
pub fn mated_crt_graph_brute(w: &WalkPair) -> CellGraph {
    let n = w.n;
    let cond = |v: &[f64], x: usize, y: usize| {
        let lhs = v[x - 1].min(v[x]).max(v[y - 1].min(v[y]));
        let rhs = v[x..y].iter().copied().fold(f64::INFINITY, f64::min);
        lhs <= rhs
    };
    let mut edges = Vec::new();
    for x in 1..=n {
        for y in x + 1..=n {
            if cond(&w.l, x, y) || cond(&w.r, x, y) {
                edges.push((x - 1, y - 1));
            }
        }
    }
    CellGraph::from_edges(n, edges)
}
