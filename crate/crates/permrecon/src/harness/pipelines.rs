//! Reusable stages of the reconstruction chain.

use std::collections::BTreeSet;

use crate::curve::{conjugate, CellCurve};
use crate::error::{Error, Result};
use crate::measure::GridMeasure;
use crate::permuton::{augment_support, AugmentedSupport, SupportSet};
use crate::tm::{
    boundary_bipartition, boundary_path, boundary_times, cut_times, extended_cells, geometric_graph, graph_from_tm, interval_subgraph,
    plant_points, resolved_support, tm_from_augmented, tm_oracle_from_curve, tm_partition_join, CellGraph, IntersectionSet, TimeSet,
    SLOTS,
};
use crate::tutte::{align_embeddings, tutte_embedding, Alignment, TutteEmbedding};

use super::config::TmSource;

/// Intersection set and cell graph of a curve pair, with the frame ring
/// appended after the curve's own cells when requested.
#[derive(Debug, Clone)]
pub struct Chain {
    /// Number of curve cells; frame cells have ranks `n..`.
    pub n: usize,
    pub cells: Vec<crate::curve::Cell>,
    pub planted: usize,
    pub support: Option<SupportSet>,
    pub augmented: Option<AugmentedSupport>,
    pub tm: IntersectionSet,
    pub graph: CellGraph,
}

pub fn build_chain(c1: &CellCurve, c2: &CellCurve, source: TmSource, frame: bool, planted: f64, seed: u64) -> Result<Chain> {
    let cells = extended_cells(c1, frame);
    let (tm, support, augmented, count) = match source {
        TmSource::Oracle => (tm_oracle_from_curve(c1, frame), None, None, 0),
        TmSource::Support => {
            let other = extended_cells(c2, frame);
            let points = plant_points(&cells, &other, planted, seed);
            let s = resolved_support(&cells, &other, &points);
            let a = augment_support(&s);
            (tm_from_augmented(&a), Some(s), Some(a), points.len())
        }
    };
    let graph = graph_from_tm(&tm, cells.len())?;
    Ok(Chain {
        n: c1.len(),
        cells,
        planted: count,
        support,
        augmented,
        tm,
        graph,
    })
}

impl Chain {
    pub fn geometric(&self) -> CellGraph {
        geometric_graph(&self.cells)
    }
}

/// Boundary and cut structure of the window `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub a: usize,
    pub b: usize,
    pub cuts: TimeSet,
    pub boundary: TimeSet,
    pub parts: (TimeSet, TimeSet),
    /// Closed boundary walk in absolute ranks.
    pub pstar: Vec<usize>,
}

impl Geometry {
    pub fn to_json(&self) -> String {
        let one = |v: &[usize]| v.iter().map(|t| t + 1).collect::<Vec<_>>();
        serde_json::json!({
            "window": [self.a + 1, self.b + 1],
            "cut_times": one(&self.cuts),
            "boundary_times": one(&self.boundary),
            "bipartition": [one(&self.parts.0), one(&self.parts.1)],
            "boundary_path": one(&self.pstar),
        })
        .to_string()
    }
}

/// Last cut time at or before `delta (n - 1)` and first at or after
/// `(1 - delta)(n - 1)`; the endpoints are always cut times.
pub fn delta_window(cuts: &[usize], n: usize, delta: f64) -> (usize, usize) {
    let last = (n - 1) as f64;
    let lo = (delta * last).floor() as usize;
    let hi = ((1.0 - delta) * last).ceil() as usize;
    let a = cuts.iter().copied().filter(|&c| c <= lo).max().unwrap_or(0);
    let b = cuts.iter().copied().filter(|&c| c >= hi).min().unwrap_or(n - 1);
    (a, b)
}

pub fn recover_geometry(chain: &Chain, delta: f64) -> Result<Geometry> {
    let n = chain.n;
    let cuts = cut_times(&chain.tm, SLOTS, 0, n - 1)?;
    let (a, b) = delta_window(&cuts, n, delta);
    let boundary = boundary_times(&chain.tm, SLOTS, a, b)?;
    let parts = boundary_bipartition(&chain.tm, SLOTS, a, b)?;
    let pstar = boundary_path(&chain.graph, (&parts.0, &parts.1), a, b)?;
    Ok(Geometry {
        a,
        b,
        cuts,
        boundary,
        parts,
        pstar,
    })
}

/// Cell `ceil(m / 2)` (1-based) of the window, moved to the nearest interior
/// rank when it lies on the boundary walk.
pub fn marked_vertex(m: usize, boundary: &BTreeSet<usize>) -> Result<usize> {
    let x = m.div_ceil(2).max(1) - 1;
    (0..m)
        .flat_map(|d| [x.checked_sub(d), Some(x + d)])
        .flatten()
        .find(|&v| v < m && !boundary.contains(&v))
        .ok_or(Error::TooFewVertices(m))
}

/// Cell centers of the window mapped into the unit disk: the square is
/// stretched radially onto the disk, then a disk automorphism sends the
/// marked cell to the origin.
pub fn normalized_truth(curve: &CellCurve, a: usize, b: usize, x: usize) -> Vec<(f64, f64)> {
    let side = curve.side() as f64;
    let stretch = |r: usize| {
        let c = curve.cell(r);
        let (u, v) = ((c.x as f64 + 0.5) / side * 2.0 - 1.0, (c.y as f64 + 0.5) / side * 2.0 - 1.0);
        let norm = u.hypot(v);
        if norm == 0.0 {
            (0.0, 0.0)
        } else {
            let k = u.abs().max(v.abs()) / norm;
            (u * k, v * k)
        }
    };
    let (ar, ai) = stretch(a + x);
    (a..=b)
        .map(|r| {
            // (z - a) / (1 - conj(a) z)
            let (zr, zi) = stretch(r);
            let (nr, ni) = (zr - ar, zi - ai);
            let (dr, di) = (1.0 - (ar * zr + ai * zi), -(ar * zi - ai * zr));
            let d2 = dr * dr + di * di;
            ((nr * dr + ni * di) / d2, (ni * dr - nr * di) / d2)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EmbedResult {
    pub geometry: Geometry,
    pub subgraph: CellGraph,
    /// Marked vertex, relative to the window start.
    pub x: usize,
    pub pstar: Vec<usize>,
    pub embedding: TutteEmbedding,
    pub truth: Vec<(f64, f64)>,
    pub alignment: Alignment,
}

impl EmbedResult {
    /// Largest interior modulus, which the maximum principle keeps below one.
    pub fn max_interior_modulus(&self) -> f64 {
        let bset: BTreeSet<usize> = self.pstar.iter().copied().collect();
        self.embedding
            .positions
            .iter()
            .enumerate()
            .filter(|(v, _)| !bset.contains(v))
            .map(|(_, &(x, y))| x.hypot(y))
            .fold(0.0, f64::max)
    }
}

pub fn embed_chain(chain: &Chain, curve: &CellCurve, delta: f64, tol: f64) -> Result<EmbedResult> {
    let geometry = recover_geometry(chain, delta)?;
    let (a, b) = (geometry.a, geometry.b);
    let subgraph = interval_subgraph(&chain.graph, a, b)?;
    let pstar: Vec<usize> = geometry.pstar.iter().map(|&t| t - a).collect();
    let bset: BTreeSet<usize> = pstar.iter().copied().collect();
    let x = marked_vertex(b - a + 1, &bset)?;
    let embedding = tutte_embedding(&subgraph, &pstar, x, tol)?;
    let truth = normalized_truth(curve, a, b, x);
    let alignment = align_embeddings(&embedding.positions, &truth)?;
    Ok(EmbedResult {
        geometry,
        subgraph,
        x,
        pstar,
        embedding,
        truth,
        alignment,
    })
}

/// Embedding of the original pair against the embedding of the conjugated pair.
#[derive(Debug, Clone)]
pub struct ConjugationCheck {
    /// Graphs on the curve ranks; frame labels are not conjugation-equivariant.
    pub same_graph: bool,
    pub rms: f64,
    /// Conjugation flag of each run's alignment to its own ground truth.
    pub truth_flags: (bool, bool),
    pub original: EmbedResult,
    pub conjugated: EmbedResult,
}

pub fn conjugation_check(c1: &CellCurve, c2: &CellCurve, tol: f64) -> Result<ConjugationCheck> {
    let (d1, d2) = (conjugate(c1), conjugate(c2));
    let base = build_chain(c1, c2, TmSource::Support, true, 0.0, 0)?;
    let mirr = build_chain(&d1, &d2, TmSource::Support, true, 0.0, 0)?;
    let original = embed_chain(&base, c1, 0.0, tol)?;
    let conjugated = embed_chain(&mirr, &d1, 0.0, tol)?;
    let rms = align_embeddings(&conjugated.embedding.positions, &original.embedding.positions)?.rms;
    Ok(ConjugationCheck {
        same_graph: interval_subgraph(&base.graph, 0, base.n - 1)? == interval_subgraph(&mirr.graph, 0, mirr.n - 1)?,
        rms,
        truth_flags: (original.alignment.conjugate, conjugated.alignment.conjugate),
        original,
        conjugated,
    })
}

pub fn rms_between(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(p, q)| (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sum();
    (s / a.len().max(1) as f64).sqrt()
}

/// Per-block comparison of the recovered log-mass field with the planted
/// cascade log-weights at the dyadic level matching the ball diameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRecovery {
    pub level: u32,
    pub errors: Vec<f64>,
    pub max_error: f64,
}

pub fn matching_level(depth: u32, eps_cells: f64) -> u32 {
    let diameter = (2.0 * eps_cells).max(1.0);
    let drop = diameter.log2().ceil() as u32;
    depth.saturating_sub(drop).max(1)
}

pub fn field_recovery(measure: &GridMeasure, gamma: f64, eps_cells: f64) -> Result<FieldRecovery> {
    let weights = measure.cascade_log_weights();
    if weights.is_empty() {
        return Err(Error::InvalidParameter("field recovery needs a cascade measure".into()));
    }
    let field = crate::measure::log_mass_field(measure, gamma, eps_cells * measure.spacing())?;
    let level = matching_level(measure.depth(), eps_cells);
    let bs = 1usize << level;
    let recovered: Vec<f64> = field.block_means(level).into_iter().map(|v| v * gamma).collect();
    let planted: Vec<f64> = (0..bs * bs)
        .map(|k| {
            let (bi, bj) = (k / bs, k % bs);
            (1..=level)
                .map(|l| {
                    let shift = level - l;
                    weights[l as usize - 1][(bi >> shift) * (1 << l) + (bj >> shift)]
                })
                .sum::<f64>()
        })
        .collect();
    let center = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - m).collect::<Vec<_>>()
    };
    let errors: Vec<f64> = center(&recovered).iter().zip(center(&planted)).map(|(r, p)| (r - p).abs()).collect();
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(FieldRecovery { level, errors, max_error })
}

/// Zero when the oracle intersection set rebuilds the geometric adjacency graph.
pub fn oracle_graph_mismatches(curve: &CellCurve) -> Result<usize> {
    let g = graph_from_tm(&tm_oracle_from_curve(curve, false), curve.len())?;
    Ok(g.mismatched_edges(&geometric_graph(curve.cells())))
}

/// Violations of `support ⊆ graph of psi ⊆ compatible cells` at resolution `m`.
pub fn support_chain_violations(
    c1: &crate::curve::TimedCurve,
    c2: &crate::curve::TimedCurve,
    measure: &GridMeasure,
    m: usize,
) -> Result<(usize, usize)> {
    let p = crate::permuton::permuton_from_pair(c1, c2, measure, m)?;
    let support = crate::permuton::support_of(&p, 0.0);
    let psi = crate::permuton::graph_of_psi_cells(c1, c2, m);
    let compatible = crate::permuton::tm_compatible_cells(c1, c2, m);
    let first = support.cells.iter().filter(|c| !psi.contains(c)).count();
    let second = psi.iter().filter(|c| !compatible.contains(c)).count();
    Ok((first, second))
}

/// Augmented-support intersection set against the independent partition join.
pub fn augmentation_agrees(c1: &[crate::curve::Cell], c2: &[crate::curve::Cell], fraction: f64, seed: u64) -> (bool, bool) {
    let points = plant_points(c1, c2, fraction, seed);
    let s = resolved_support(c1, c2, &points);
    let a = augment_support(&s);
    let idempotent = augment_support(a.support()) == a;
    (tm_from_augmented(&a) == tm_partition_join(c1, c2, &points), idempotent)
}
