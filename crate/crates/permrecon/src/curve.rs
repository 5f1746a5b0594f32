//! Deterministic space-filling grid curves and their mass parametrization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::GridMeasure;
use crate::numeric;

pub const MAX_CURVE_DEPTH: u32 = 10;

/// Grid cell with its lower-left corner at `(x, y)`. Cells of a curve on a
/// `2^d` grid have coordinates in `[0, 2^d)`; frame cells may lie outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn edge_adjacent(self, other: Cell) -> bool {
        (self.x - other.x).abs() + (self.y - other.y).abs() == 1
    }

    pub fn touches(self, other: Cell) -> bool {
        (self.x - other.x).abs() <= 1 && (self.y - other.y).abs() <= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Hilbert,
    Moore,
}

impl CurveKind {
    pub const ALL: [CurveKind; 2] = [CurveKind::Hilbert, CurveKind::Moore];

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Hilbert => "hilbert",
            CurveKind::Moore => "moore",
        }
    }
}

impl std::str::FromStr for CurveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hilbert" => Ok(CurveKind::Hilbert),
            "moore" => Ok(CurveKind::Moore),
            _ => Err(Error::Config(format!("unknown curve kind {s:?}"))),
        }
    }
}

/// The eight isometries of the square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    /// Mirror across the vertical axis.
    FlipX,
    /// Mirror across the horizontal axis.
    FlipY,
    Transpose,
    AntiTranspose,
}

impl Symmetry {
    pub const ALL: [Symmetry; 8] = [
        Symmetry::Identity,
        Symmetry::Rot90,
        Symmetry::Rot180,
        Symmetry::Rot270,
        Symmetry::FlipX,
        Symmetry::FlipY,
        Symmetry::Transpose,
        Symmetry::AntiTranspose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Symmetry::Identity => "identity",
            Symmetry::Rot90 => "rot90",
            Symmetry::Rot180 => "rot180",
            Symmetry::Rot270 => "rot270",
            Symmetry::FlipX => "flipx",
            Symmetry::FlipY => "flipy",
            Symmetry::Transpose => "transpose",
            Symmetry::AntiTranspose => "antitranspose",
        }
    }

    /// Image of `c` on a `side x side` grid (counterclockwise rotations).
    pub fn apply(self, c: Cell, side: i32) -> Cell {
        let m = side - 1;
        let (x, y) = (c.x, c.y);
        let (x, y) = match self {
            Symmetry::Identity => (x, y),
            Symmetry::Rot90 => (m - y, x),
            Symmetry::Rot180 => (m - x, m - y),
            Symmetry::Rot270 => (y, m - x),
            Symmetry::FlipX => (m - x, y),
            Symmetry::FlipY => (x, m - y),
            Symmetry::Transpose => (y, x),
            Symmetry::AntiTranspose => (m - y, m - x),
        };
        Cell::new(x, y)
    }
}

impl std::str::FromStr for Symmetry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Symmetry::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown symmetry {s:?}")))
    }
}

/// A traversal of every cell of the `2^depth` grid, consecutive cells sharing an edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCurve {
    depth: u32,
    cells: Vec<Cell>,
    rank_of: Vec<usize>,
}

impl CellCurve {
    pub fn new(depth: u32, cells: Vec<Cell>) -> Result<Self> {
        let side = 1i32 << depth;
        let n = (side * side) as usize;
        if cells.len() != n {
            return Err(Error::InvalidCurve(format!("{} cells, expected {}", cells.len(), n)));
        }
        let mut rank_of = vec![usize::MAX; n];
        for (k, c) in cells.iter().enumerate() {
            if c.x < 0 || c.y < 0 || c.x >= side || c.y >= side {
                return Err(Error::InvalidCurve(format!("cell {c:?} outside the grid")));
            }
            let idx = (c.x * side + c.y) as usize;
            if rank_of[idx] != usize::MAX {
                return Err(Error::InvalidCurve(format!("cell {c:?} visited twice")));
            }
            rank_of[idx] = k;
        }
        if let Some(w) = cells.windows(2).find(|w| !w[0].edge_adjacent(w[1])) {
            return Err(Error::InvalidCurve(format!("{:?} and {:?} are not edge-adjacent", w[0], w[1])));
        }
        Ok(Self { depth, cells, rank_of })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }
    pub fn side(&self) -> usize {
        1usize << self.depth
    }
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }
    pub fn cell(&self, rank: usize) -> Cell {
        self.cells[rank]
    }
    /// Rank at which the curve visits `c`.
    pub fn rank(&self, c: Cell) -> usize {
        self.rank_of[(c.x as usize) * self.side() + c.y as usize]
    }

    pub fn transform(&self, g: Symmetry) -> CellCurve {
        let side = self.side() as i32;
        let cells = self.cells.iter().map(|&c| g.apply(c, side)).collect();
        CellCurve::new(self.depth, cells).expect("isometries preserve validity")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,cell_i,cell_j\n");
        for (k, c) in self.cells.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", k + 1, c.x, c.y));
        }
        s
    }
}

fn hilbert_d2xy(side: i32, d: usize) -> (i32, i32) {
    let (mut x, mut y) = (0i32, 0i32);
    let mut t = d as i64;
    let mut s = 1i32;
    while s < side {
        let rx = (1 & (t / 2)) as i32;
        let ry = (1 & (t ^ rx as i64)) as i32;
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
        s *= 2;
    }
    (x, y)
}

fn hilbert_cells(depth: u32) -> Vec<Cell> {
    let side = 1i32 << depth;
    (0..(side * side) as usize)
        .map(|d| {
            let (x, y) = hilbert_d2xy(side, d);
            Cell::new(x, y)
        })
        .collect()
}

/// Closed variant: four Hilbert quadrants arranged so the curve starts and
/// ends on the two bottom-middle cells.
fn moore_cells(depth: u32) -> Vec<Cell> {
    let h = 1i32 << (depth - 1);
    let sub = if depth == 1 { vec![Cell::new(0, 0)] } else { hilbert_cells(depth - 1) };
    let mut out = Vec::with_capacity(4 * sub.len());
    let left = |c: Cell| (h - 1 - c.y, c.x);
    let right = |c: Cell| (c.y, h - 1 - c.x);
    for (ox, oy, f) in [(0, 0, 0), (0, h, 0), (h, h, 1), (h, 0, 1)] {
        for &c in &sub {
            let (x, y) = if f == 0 { left(c) } else { right(c) };
            out.push(Cell::new(ox + x, oy + y));
        }
    }
    out
}

pub fn build_curve(kind: CurveKind, depth: u32, symmetry: Symmetry) -> Result<CellCurve> {
    if !(1..=MAX_CURVE_DEPTH).contains(&depth) {
        return Err(Error::DepthOutOfRange {
            depth,
            min: 1,
            max: MAX_CURVE_DEPTH,
        });
    }
    let cells = match kind {
        CurveKind::Hilbert => hilbert_cells(depth),
        CurveKind::Moore => moore_cells(depth),
    };
    Ok(CellCurve::new(depth, cells)?.transform(symmetry))
}

/// Reflects the geometry across the horizontal axis, keeping the visit order.
pub fn conjugate(curve: &CellCurve) -> CellCurve {
    curve.transform(Symmetry::FlipY)
}

/// Reflection across the horizontal axis of a `side` grid, for arbitrary cell lists.
pub fn conjugate_cells(cells: &[Cell], side: usize) -> Vec<Cell> {
    let m = side as i32 - 1;
    cells.iter().map(|c| Cell::new(c.x, m - c.y)).collect()
}

/// Ring of cells surrounding the `side x side` square, counterclockwise from
/// the lower-left outer corner.
pub fn frame_ring(side: usize) -> Vec<Cell> {
    let s = side as i32;
    let mut ring = Vec::with_capacity(4 * (side + 1));
    for x in -1..s {
        ring.push(Cell::new(x, -1));
    }
    for y in -1..s {
        ring.push(Cell::new(s, y));
    }
    for x in (0..=s).rev() {
        ring.push(Cell::new(x, s));
    }
    for y in (0..=s).rev() {
        ring.push(Cell::new(-1, y));
    }
    ring
}

/// A curve with cumulative-mass breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedCurve {
    curve: CellCurve,
    masses: Vec<f64>,
    breakpoints: Vec<f64>,
}

impl TimedCurve {
    pub fn curve(&self) -> &CellCurve {
        &self.curve
    }
    /// Mass of the `k`-th visited cell.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    /// `t_0 = 0 < t_1 < ... < t_n = 1`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
    pub fn len(&self) -> usize {
        self.masses.len()
    }
    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,cell_i,cell_j,t\n");
        for (k, c) in self.curve.cells().iter().enumerate() {
            s.push_str(&format!("{},{},{},{}\n", k + 1, c.x, c.y, self.breakpoints[k + 1]));
        }
        s
    }
}

pub fn mass_parametrize(curve: &CellCurve, measure: &GridMeasure) -> Result<TimedCurve> {
    if curve.depth() != measure.depth() {
        return Err(Error::DepthMismatch(curve.depth(), measure.depth()));
    }
    let masses: Vec<f64> = curve.cells().iter().map(|c| measure.mass(c.x as usize, c.y as usize)).collect();
    let mut breakpoints = numeric::prefix_sums(&masses);
    *breakpoints.last_mut().expect("non-empty") = 1.0;
    Ok(TimedCurve {
        curve: curve.clone(),
        masses,
        breakpoints,
    })
}

/// `sigma[k]` is the rank in the second curve of the first curve's `k`-th cell.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedPermutation {
    pub sigma: Vec<usize>,
    pub weights: Vec<f64>,
    t1: Vec<f64>,
    t2: Vec<f64>,
}

impl InducedPermutation {
    /// Step map at cell granularity: inside the first curve's `k`-th cell,
    /// time advances in parallel inside the second curve's copy of that cell.
    pub fn psi(&self, t: f64) -> f64 {
        let n = self.sigma.len();
        if t >= 1.0 {
            return 1.0;
        }
        let k = self.t1.partition_point(|&b| b <= t).saturating_sub(1).min(n - 1);
        self.t2[self.sigma[k]] + (t - self.t1[k])
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.sigma.len()];
        for (k, &s) in self.sigma.iter().enumerate() {
            inv[s] = k;
        }
        inv
    }
}

pub fn induced_permutation(c1: &TimedCurve, c2: &TimedCurve) -> Result<InducedPermutation> {
    if c1.curve.depth() != c2.curve.depth() {
        return Err(Error::DepthMismatch(c1.curve.depth(), c2.curve.depth()));
    }
    let sigma: Vec<usize> = c1.curve.cells().iter().map(|&c| c2.curve.rank(c)).collect();
    for (k, &s) in sigma.iter().enumerate() {
        if c1.masses[k] != c2.masses[s] {
            return Err(Error::MeasureMismatch);
        }
    }
    Ok(InducedPermutation {
        sigma,
        weights: c1.masses.clone(),
        t1: c1.breakpoints.clone(),
        t2: c2.breakpoints.clone(),
    })
}
