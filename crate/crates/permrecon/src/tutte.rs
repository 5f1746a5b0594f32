//! Harmonic measure seen from a marked vertex and the Tutte embedding with
//! boundary placed by it.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric;
use crate::seeds;
use crate::tm::CellGraph;

/// Below this many interior vertices the Laplacian is factored densely.
pub const DENSE_LIMIT: usize = 2000;

pub const DEFAULT_TOL: f64 = 1e-10;

/// `L_II`, the graph Laplacian restricted to interior vertices, with a solver.
struct InteriorSystem {
    interior: Vec<usize>,
    slot: Vec<Option<usize>>,
    solver: Solver,
}

enum Solver {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Iterative(Csr),
}

/// Symmetric sparse matrix in compressed rows.
struct Csr {
    start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    diag: Vec<f64>,
}

impl Csr {
    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.start[i]..self.start[i + 1] {
                s += self.val[p] * x[self.col[p]];
            }
            *yi = s;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    numeric::sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Jacobi-preconditioned conjugate gradients; returns the iteration count.
fn pcg(a: &Csr, b: &[f64], tol: f64) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut z: Vec<f64> = r.iter().zip(&a.diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = 20 * n + 100;
    for it in 1..=max_iter {
        a.mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Singular("Laplacian is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] / a.diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Singular(format!("conjugate gradients did not reach {tol} in {max_iter} steps")))
}

impl InteriorSystem {
    fn new(g: &CellGraph, boundary: &BTreeSet<usize>) -> Result<Self> {
        let n = g.n();
        let interior: Vec<usize> = (0..n).filter(|v| !boundary.contains(v)).collect();
        let mut slot = vec![None; n];
        for (i, &v) in interior.iter().enumerate() {
            slot[v] = Some(i);
        }
        check_interior_reaches_boundary(g, boundary)?;
        let m = interior.len();
        let solver = if m < DENSE_LIMIT {
            let mut a = DMatrix::<f64>::zeros(m, m);
            for (i, &v) in interior.iter().enumerate() {
                a[(i, i)] = g.neighbors(v).len() as f64;
                for &w in g.neighbors(v) {
                    if let Some(j) = slot[w] {
                        a[(i, j)] -= 1.0;
                    }
                }
            }
            Solver::Dense(a.cholesky().ok_or_else(|| Error::Singular("interior Laplacian".into()))?)
        } else {
            let mut start = vec![0];
            let (mut col, mut val, mut diag) = (Vec::new(), Vec::new(), Vec::new());
            for &v in &interior {
                let d = g.neighbors(v).len() as f64;
                diag.push(d);
                let mut row: Vec<(usize, f64)> = vec![(slot[v].expect("interior"), d)];
                row.extend(g.neighbors(v).iter().filter_map(|&w| slot[w].map(|j| (j, -1.0))));
                row.sort_by_key(|e| e.0);
                for (j, x) in row {
                    col.push(j);
                    val.push(x);
                }
                start.push(col.len());
            }
            Solver::Iterative(Csr { start, col, val, diag })
        };
        Ok(Self { interior, slot, solver })
    }

    fn solve(&self, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, usize)> {
        match &self.solver {
            Solver::Dense(ch) => Ok((ch.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec(), 1)),
            Solver::Iterative(a) => pcg(a, rhs, tol),
        }
    }
}

fn check_interior_reaches_boundary(g: &CellGraph, boundary: &BTreeSet<usize>) -> Result<()> {
    let mut seen = vec![false; g.n()];
    let mut stack: Vec<usize> = boundary.iter().copied().collect();
    for &b in boundary {
        seen[b] = true;
    }
    while let Some(v) = stack.pop() {
        for &w in g.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(v) => Err(Error::Disconnected(format!("vertex {v} cannot reach the boundary"))),
        None => Ok(()),
    }
}

fn boundary_set(g: &CellGraph, boundary: &[usize]) -> Result<BTreeSet<usize>> {
    if let Some(&v) = boundary.iter().find(|&&v| v >= g.n()) {
        return Err(Error::BadRange { a: v, b: v, n: g.n() });
    }
    Ok(boundary.iter().copied().collect())
}

/// First-hit distribution and its prefix sums along the boundary sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicMeasure {
    /// `prefix[k]`: probability that the walk from the marked vertex first
    /// hits the boundary at one of `boundary[0..=k]`.
    pub prefix: Vec<f64>,
    /// Hitting probability of each entry at its first occurrence, zero at repeats.
    pub increments: Vec<f64>,
    pub solver_iters: usize,
}

fn prefix_from_hits(boundary: &[usize], hit: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut seen = BTreeSet::new();
    let increments: Vec<f64> = boundary.iter().map(|&b| if seen.insert(b) { hit(b) } else { 0.0 }).collect();
    let mut prefix = numeric::prefix_sums(&increments);
    prefix.remove(0);
    // roundoff may push partial totals a hair above one
    prefix.iter_mut().for_each(|p| *p = p.min(1.0));
    if let Some(last) = prefix.last_mut() {
        // the absorbed walk is stochastic: the total is one
        *last = 1.0;
    }
    (prefix, increments)
}

/// Exact hitting distribution from `x` by one solve of `L_II w = e_x`:
/// the probability of first hitting `b` is `sum_i w_i A_ib`.
pub fn harmonic_measure(g: &CellGraph, x: usize, boundary: &[usize]) -> Result<HarmonicMeasure> {
    harmonic_measure_tol(g, x, boundary, DEFAULT_TOL)
}

pub fn harmonic_measure_tol(g: &CellGraph, x: usize, boundary: &[usize], tol: f64) -> Result<HarmonicMeasure> {
    let bset = boundary_set(g, boundary)?;
    if bset.contains(&x) {
        return Err(Error::OnBoundary(x));
    }
    if x >= g.n() {
        return Err(Error::BadRange { a: x, b: x, n: g.n() });
    }
    if !g.is_connected() {
        return Err(Error::Disconnected("graph".into()));
    }
    let sys = InteriorSystem::new(g, &bset)?;
    let (hit, iters) = hits_from(g, &sys, x, tol)?;
    let (prefix, increments) = prefix_from_hits(boundary, |b| hit[b]);
    Ok(HarmonicMeasure {
        prefix,
        increments,
        solver_iters: iters,
    })
}

fn hits_from(g: &CellGraph, sys: &InteriorSystem, x: usize, tol: f64) -> Result<(Vec<f64>, usize)> {
    let mut e = vec![0.0; sys.interior.len()];
    e[sys.slot[x].expect("interior")] = 1.0;
    let (w, iters) = sys.solve(&e, tol)?;
    let mut acc = vec![numeric::KahanSum::new(); g.n()];
    for (i, &v) in sys.interior.iter().enumerate() {
        for &b in g.neighbors(v) {
            if sys.slot[b].is_none() {
                acc[b].add(w[i]);
            }
        }
    }
    Ok((acc.iter().map(|s| s.value()).collect(), iters))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TutteEmbedding {
    /// Position of every vertex of the graph.
    pub positions: Vec<(f64, f64)>,
    pub boundary_cycle: Vec<usize>,
    pub prefix: Vec<f64>,
    /// Largest `|phi(v) - mean of neighbours|` over interior vertices.
    pub residual: f64,
    pub solver_iters: usize,
}

impl TutteEmbedding {
    pub fn to_csv(&self, offset: usize) -> String {
        let mut s = String::from("vertex,x,y\n");
        for (v, (x, y)) in self.positions.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", v + offset + 1, x, y));
        }
        s
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_cycle.contains(&v)
    }
}

/// Boundary vertex `pstar[k]` (first occurrence) goes to `exp(2 pi i prefix[k])`;
/// interior positions solve the discrete Laplace equation.
pub fn tutte_embedding(g: &CellGraph, pstar: &[usize], x: usize, tol: f64) -> Result<TutteEmbedding> {
    let bset = boundary_set(g, pstar)?;
    if bset.contains(&x) {
        return Err(Error::OnBoundary(x));
    }
    let sys = InteriorSystem::new(g, &bset)?;
    let (hit, iters_h) = hits_from(g, &sys, x, tol)?;
    let (prefix, _) = prefix_from_hits(pstar, |b| hit[b]);
    let mut pos = vec![(0.0, 0.0); g.n()];
    let mut placed = BTreeSet::new();
    for (k, &b) in pstar.iter().enumerate() {
        if placed.insert(b) {
            let a = 2.0 * PI * prefix[k];
            pos[b] = (a.cos(), a.sin());
        }
    }
    let m = sys.interior.len();
    let (mut rx, mut ry) = (vec![0.0; m], vec![0.0; m]);
    for (i, &v) in sys.interior.iter().enumerate() {
        for &w in g.neighbors(v) {
            if sys.slot[w].is_none() {
                rx[i] += pos[w].0;
                ry[i] += pos[w].1;
            }
        }
    }
    let (sx, ix) = sys.solve(&rx, tol)?;
    let (sy, iy) = sys.solve(&ry, tol)?;
    for (i, &v) in sys.interior.iter().enumerate() {
        pos[v] = (sx[i], sy[i]);
    }
    let residual = sys
        .interior
        .iter()
        .map(|&v| {
            let d = g.neighbors(v).len() as f64;
            let mx = g.neighbors(v).iter().map(|&w| pos[w].0).sum::<f64>() / d;
            let my = g.neighbors(v).iter().map(|&w| pos[w].1).sum::<f64>() / d;
            (pos[v].0 - mx).hypot(pos[v].1 - my)
        })
        .fold(0.0, f64::max);
    Ok(TutteEmbedding {
        positions: pos,
        boundary_cycle: pstar.to_vec(),
        prefix,
        residual,
        solver_iters: iters_h + ix + iy,
    })
}

const MC_CHUNK: usize = 4096;

/// Empirical first-hit prefix sequence from seeded simple random walks.
/// Chunks of walks draw from independent streams and merge in order, so the
/// result does not depend on the thread count.
pub fn mc_harmonic_oracle(g: &CellGraph, x: usize, boundary: &[usize], walks: usize, seed: u64) -> Result<Vec<f64>> {
    let bset = boundary_set(g, boundary)?;
    if walks == 0 {
        return Err(Error::InvalidParameter("walks must be positive".into()));
    }
    if bset.contains(&x) {
        return Err(Error::OnBoundary(x));
    }
    check_interior_reaches_boundary(g, &bset)?;
    let chunks = walks.div_ceil(MC_CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seeds::stream(seed, "mc-walks", c as u64);
            let mut local = vec![0u64; g.n()];
            let todo = MC_CHUNK.min(walks - c * MC_CHUNK);
            for _ in 0..todo {
                let mut v = x;
                while !bset.contains(&v) {
                    let nb = g.neighbors(v);
                    v = nb[rng.random_range(0..nb.len())];
                }
                local[v] += 1;
            }
            local
        })
        .collect();
    let mut total = vec![0u64; g.n()];
    for c in counts {
        for (t, x) in total.iter_mut().zip(c) {
            *t += x;
        }
    }
    let (prefix, _) = prefix_from_hits(boundary, |b| total[b] as f64 / walks as f64);
    Ok(prefix)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub angle: f64,
    pub conjugate: bool,
    pub rms: f64,
}

fn best_rotation(a: &[(f64, f64)], b: &[(f64, f64)]) -> (f64, f64) {
    // maximize Re(e^{i t} sum conj(a) b)
    let (mut zr, mut zi) = (0.0, 0.0);
    for (&(ax, ay), &(bx, by)) in a.iter().zip(b) {
        zr += ax * bx + ay * by;
        zi += ax * by - ay * bx;
    }
    let angle = zi.atan2(zr);
    let (c, s) = (angle.cos(), angle.sin());
    let mse = a
        .iter()
        .zip(b)
        .map(|(&(ax, ay), &(bx, by))| {
            let (rx, ry) = (c * ax - s * ay, s * ax + c * ay);
            (rx - bx).powi(2) + (ry - by).powi(2)
        })
        .sum::<f64>()
        / a.len() as f64;
    (angle, mse.sqrt())
}

/// Rotation (optionally after complex conjugation) of `a` closest to `b` in RMS.
pub fn align_embeddings(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<Alignment> {
    let n = a.len().min(b.len());
    if a.len() != b.len() || n < 2 {
        return Err(Error::TooFewVertices(n));
    }
    let (t0, r0) = best_rotation(a, b);
    let conj: Vec<(f64, f64)> = a.iter().map(|&(x, y)| (x, -y)).collect();
    let (t1, r1) = best_rotation(&conj, b);
    Ok(if r1 < r0 {
        Alignment {
            angle: t1,
            conjugate: true,
            rms: r1,
        }
    } else {
        Alignment {
            angle: t0,
            conjugate: false,
            rms: r0,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path3() -> CellGraph {
        CellGraph::from_edges(3, [(0, 1), (1, 2)])
    }

    fn star(d: usize) -> CellGraph {
        CellGraph::from_edges(d + 1, (1..=d).map(|i| (0, i)))
    }

    fn wheel(d: usize) -> CellGraph {
        CellGraph::from_edges(d + 1, (1..=d).map(|i| (0, i)).chain((1..=d).map(|i| (i, i % d + 1))))
    }

    #[test]
    fn path_and_star() {
        let h = harmonic_measure(&path3(), 1, &[0, 2]).unwrap();
        assert!((h.prefix[0] - 0.5).abs() < 1e-12);
        assert_eq!(h.prefix[1], 1.0);
        let h = harmonic_measure(&star(4), 0, &[1, 2, 3, 4]).unwrap();
        for inc in h.increments {
            assert!((inc - 0.25).abs() < 1e-12);
        }
        assert!(matches!(harmonic_measure(&path3(), 0, &[0, 2]), Err(Error::OnBoundary(0))));
        let split = CellGraph::from_edges(4, [(0, 1), (2, 3)]);
        assert!(matches!(harmonic_measure(&split, 1, &[0, 2]), Err(Error::Disconnected(_))));
    }

    #[test]
    fn boundary_placement_formula() {
        let g = star(4);
        let e = tutte_embedding(&g, &[1, 2, 3, 4], 0, 1e-12).unwrap();
        let expect = [PI / 2.0, PI, 3.0 * PI / 2.0, 2.0 * PI];
        for (k, a) in expect.iter().enumerate() {
            let (x, y) = e.positions[k + 1];
            assert!((x - a.cos()).abs() < 1e-12 && (y - a.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn wheel_hub_at_boundary_mean() {
        let g = wheel(6);
        let e = tutte_embedding(&g, &[1, 2, 3, 4, 5, 6, 1], 0, 1e-12).unwrap();
        let mx = (1..=6).map(|v| e.positions[v].0).sum::<f64>() / 6.0;
        let my = (1..=6).map(|v| e.positions[v].1).sum::<f64>() / 6.0;
        assert!((e.positions[0].0 - mx).abs() < 1e-12 && (e.positions[0].1 - my).abs() < 1e-12);
        assert!(e.residual < 1e-12);
    }

    #[test]
    fn dense_and_iterative_agree() {
        // a 50 x 50 grid crosses the dense limit
        let side = 50usize;
        let id = |i: usize, j: usize| i * side + j;
        let mut edges = Vec::new();
        for i in 0..side {
            for j in 0..side {
                if i + 1 < side {
                    edges.push((id(i, j), id(i + 1, j)));
                }
                if j + 1 < side {
                    edges.push((id(i, j), id(i, j + 1)));
                }
            }
        }
        let g = CellGraph::from_edges(side * side, edges);
        let mut ring: Vec<usize> = (0..side).map(|j| id(0, j)).collect();
        ring.extend((1..side).map(|i| id(i, side - 1)));
        ring.extend((0..side - 1).rev().map(|j| id(side - 1, j)));
        ring.extend((1..side - 1).rev().map(|i| id(i, 0)));
        let x = id(side / 2, side / 2);
        let big = harmonic_measure_tol(&g, x, &ring, 1e-12).unwrap();
        assert!(big.solver_iters > 1);
        let e = tutte_embedding(&g, &ring, x, 1e-12).unwrap();
        assert!(e.residual < 1e-8);
        assert!((big.increments.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn monte_carlo_single_walk_is_one_hot() {
        let p = mc_harmonic_oracle(&path3(), 1, &[0, 2], 1, 3).unwrap();
        assert!(p[0] == 0.0 || p[0] == 1.0);
        assert_eq!(p[1], 1.0);
        let a = mc_harmonic_oracle(&star(4), 0, &[1, 2, 3, 4], 10_000, 5).unwrap();
        let b = mc_harmonic_oracle(&star(4), 0, &[1, 2, 3, 4], 10_000, 5).unwrap();
        assert_eq!(a, b);
        let sigma = (0.25f64 * 0.75 / 10_000.0).sqrt();
        let mut prev = 0.0;
        for v in &a {
            assert!((v - prev - 0.25).abs() < 3.0 * sigma);
            prev = *v;
        }
    }

    #[test]
    fn alignment_examples() {
        let a = vec![(1.0, 0.0), (0.0, 0.5), (-0.3, -0.2), (0.1, 0.7)];
        let rot: Vec<_> = a.iter().map(|&(x, y)| (1f64.cos() * x - 1f64.sin() * y, 1f64.sin() * x + 1f64.cos() * y)).collect();
        let al = align_embeddings(&a, &rot).unwrap();
        assert!((al.angle - 1.0).abs() < 1e-9 && !al.conjugate && al.rms < 1e-12);
        let conj: Vec<_> = a.iter().map(|&(x, y)| (x, -y)).collect();
        let al = align_embeddings(&a, &conj).unwrap();
        assert!(al.conjugate && al.rms < 1e-12);
        assert!(align_embeddings(&a[..1], &a[..1]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn wheel_prefix_nondecreasing_and_maximum_principle(d in 3usize..12, extra in proptest::collection::vec((1usize..12, 1usize..12), 0..6)) {
            let mut edges: Vec<(usize, usize)> = (1..=d).map(|i| (0, i)).chain((1..=d).map(|i| (i, i % d + 1))).collect();
            // chords between rim vertices keep the hub the only interior vertex
            edges.extend(extra.into_iter().filter(|&(a, b)| a <= d && b <= d));
            let g = CellGraph::from_edges(d + 1, edges);
            let rim: Vec<usize> = (1..=d).collect();
            let h = harmonic_measure(&g, 0, &rim).unwrap();
            prop_assert!(h.prefix.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(*h.prefix.last().unwrap(), 1.0);
            let e = tutte_embedding(&g, &rim, 0, 1e-12).unwrap();
            let (x, y) = e.positions[0];
            prop_assert!(x.hypot(y) < 1.0);
            for &v in &rim {
                let (x, y) = e.positions[v];
                prop_assert!((x.hypot(y) - 1.0).abs() < 1e-9);
            }
        }
    }
}
