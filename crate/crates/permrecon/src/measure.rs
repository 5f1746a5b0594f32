//! Toy area measures on a dyadic grid of the unit square.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::seeds;

pub const MIN_DEPTH: u32 = 1;
pub const MAX_DEPTH: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    Lebesgue,
    Cascade,
    ExpField,
}

impl MeasureKind {
    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Lebesgue => "lebesgue",
            MeasureKind::Cascade => "cascade",
            MeasureKind::ExpField => "exp-field",
        }
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lebesgue" => Ok(MeasureKind::Lebesgue),
            "cascade" => Ok(MeasureKind::Cascade),
            "exp-field" | "expfield" => Ok(MeasureKind::ExpField),
            _ => Err(Error::Config(format!("unknown measure kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureParams {
    /// Log-standard-deviation of the unit-mean lognormal cascade weights.
    pub sigma: f64,
    /// Coupling of the exponentiated field.
    pub gamma: f64,
}

impl Default for MeasureParams {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            gamma: std::f64::consts::SQRT_2,
        }
    }
}

/// Correlation of the mating-of-trees Brownian motions for a given gamma.
pub fn rho_of_gamma(gamma: f64) -> f64 {
    -(PI * gamma * gamma / 4.0).cos()
}

/// `Q = 2/gamma + gamma/2`.
pub fn q_of_gamma(gamma: f64) -> f64 {
    2.0 / gamma + gamma / 2.0
}

/// Grid cell, `i` horizontal and `j` vertical. Linear index is `i * side + j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    depth: u32,
    kind: MeasureKind,
    gamma: Option<f64>,
    rho: Option<f64>,
    mass: Vec<f64>,
    /// Per-level cascade log-weights; level `l` (1-based) is a `2^l x 2^l` array.
    cascade_log_weights: Vec<Vec<f64>>,
}

impl GridMeasure {
    pub fn depth(&self) -> u32 {
        self.depth
    }
    pub fn side(&self) -> usize {
        1usize << self.depth
    }
    pub fn cells(&self) -> usize {
        self.mass.len()
    }
    pub fn kind(&self) -> MeasureKind {
        self.kind
    }
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }
    pub fn rho(&self) -> Option<f64> {
        self.rho
    }
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }
    pub fn spacing(&self) -> f64 {
        1.0 / self.side() as f64
    }
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.side() + j
    }
    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.mass[self.index(i, j)]
    }
    pub fn cascade_log_weights(&self) -> &[Vec<f64>] {
        &self.cascade_log_weights
    }

    pub fn from_masses(depth: u32, kind: MeasureKind, masses: Vec<f64>) -> Result<Self> {
        check_depth(depth)?;
        let n = 1usize << (2 * depth);
        if masses.len() != n {
            return Err(Error::WeightsLength {
                got: masses.len(),
                expected: n,
            });
        }
        Ok(Self {
            depth,
            kind,
            gamma: None,
            rho: None,
            mass: normalize(masses)?,
            cascade_log_weights: Vec::new(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("depth,kind,gamma\n");
        let g = self.gamma.map(|g| g.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{}\n", self.depth, self.kind.name(), g));
        s.push_str("cell_i,cell_j,mass\n");
        let side = self.side();
        for i in 0..side {
            for j in 0..side {
                s.push_str(&format!("{},{},{}\n", i, j, self.mass(i, j)));
            }
        }
        s
    }
}

fn check_depth(depth: u32) -> Result<()> {
    if !(MIN_DEPTH..=MAX_DEPTH).contains(&depth) {
        return Err(Error::DepthOutOfRange {
            depth,
            min: MIN_DEPTH,
            max: MAX_DEPTH,
        });
    }
    Ok(())
}

fn normalize(mut mass: Vec<f64>) -> Result<Vec<f64>> {
    let total = numeric::sum(mass.iter().copied());
    if !(total.is_finite() && total > 0.0) || mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::NonNormalizable(total));
    }
    for m in mass.iter_mut() {
        *m /= total;
    }
    // one more pass absorbs the rounding of the division
    let again = numeric::sum(mass.iter().copied());
    for m in mass.iter_mut() {
        *m /= again;
    }
    if mass.iter().any(|m| *m <= 0.0) {
        return Err(Error::NonNormalizable(total));
    }
    Ok(mass)
}

pub fn build_measure(kind: MeasureKind, depth: u32, params: MeasureParams, seed: u64) -> Result<GridMeasure> {
    check_depth(depth)?;
    let side = 1usize << depth;
    match kind {
        MeasureKind::Lebesgue => Ok(GridMeasure {
            depth,
            kind,
            gamma: None,
            rho: None,
            mass: vec![1.0 / (side * side) as f64; side * side],
            cascade_log_weights: Vec::new(),
        }),
        MeasureKind::Cascade => {
            if !(params.sigma.is_finite() && params.sigma >= 0.0) {
                return Err(Error::InvalidParameter(format!("cascade sigma {}", params.sigma)));
            }
            let levels: Vec<Vec<f64>> = (1..=depth).map(|l| cascade_level(seed, l, params.sigma)).collect();
            let mut logm = vec![0.0; side * side];
            for (l, w) in levels.iter().enumerate() {
                let bs = 1usize << (l + 1);
                let shift = depth as usize - (l + 1);
                for i in 0..side {
                    for j in 0..side {
                        logm[i * side + j] += w[(i >> shift) * bs + (j >> shift)];
                    }
                }
            }
            let mass = normalize(logm.into_iter().map(f64::exp).collect())?;
            Ok(GridMeasure {
                depth,
                kind,
                gamma: None,
                rho: None,
                mass,
                cascade_log_weights: levels,
            })
        }
        MeasureKind::ExpField => {
            let gamma = params.gamma;
            if !(gamma > 0.0 && gamma < 2.0) {
                return Err(Error::InvalidGamma(gamma));
            }
            let h = gaussian_field(depth, seed);
            let mass = normalize(h.iter().map(|x| (gamma * x).exp()).collect())?;
            Ok(GridMeasure {
                depth,
                kind,
                gamma: Some(gamma),
                rho: Some(rho_of_gamma(gamma)),
                mass,
                cascade_log_weights: Vec::new(),
            })
        }
    }
}

/// Log-weights `sigma Z - sigma^2 / 2` of one cascade level, block `(bi, bj)`
/// drawn from its own stream.
pub fn cascade_block_log_weight(seed: u64, level: u32, bi: usize, bj: usize, sigma: f64) -> f64 {
    let bs = 1u64 << level;
    let index = ((level as u64) << 40) | (bi as u64 * bs + bj as u64);
    let z: f64 = seeds::stream(seed, "cascade", index).sample(StandardNormal);
    sigma * z - sigma * sigma / 2.0
}

fn cascade_level(seed: u64, level: u32, sigma: f64) -> Vec<f64> {
    let bs = 1usize << level;
    let mut w = Vec::with_capacity(bs * bs);
    for bi in 0..bs {
        for bj in 0..bs {
            w.push(cascade_block_log_weight(seed, level, bi, bj, sigma));
        }
    }
    w
}

/// Mean-zero log-correlated field on the discrete torus, synthesized with
/// spectrum `1 / (2 pi |k|^2)` (zero mode removed). Row-major `i * side + j`.
pub fn gaussian_field(depth: u32, seed: u64) -> Vec<f64> {
    let side = 1usize << depth;
    let mut rng = seeds::stream(seed, "exp-field", 0);
    let mut buf: Vec<Complex64> = (0..side * side)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    fft2(&mut buf, side, &mut planner, false);
    for ki in 0..side {
        for kj in 0..side {
            let fi = wrap_freq(ki, side);
            let fj = wrap_freq(kj, side);
            let k2 = (fi * fi + fj * fj) as f64;
            let a = if k2 == 0.0 { 0.0 } else { (1.0 / (2.0 * PI * k2)).sqrt() };
            buf[ki * side + kj] *= a;
        }
    }
    fft2(&mut buf, side, &mut planner, true);
    buf.iter().map(|c| c.re / side as f64).collect()
}

fn wrap_freq(k: usize, side: usize) -> i64 {
    if k <= side / 2 {
        k as i64
    } else {
        k as i64 - side as i64
    }
}

fn fft2(buf: &mut [Complex64], side: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let fft = if inverse {
        planner.plan_fft_inverse(side)
    } else {
        planner.plan_fft_forward(side)
    };
    for row in buf.chunks_mut(side) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); side];
    for j in 0..side {
        for i in 0..side {
            col[i] = buf[i * side + j];
        }
        fft.process(&mut col);
        for i in 0..side {
            buf[i * side + j] = col[i];
        }
    }
}

pub fn mass_of_region(measure: &GridMeasure, cells: &[CellIndex]) -> Result<f64> {
    let n = measure.cells();
    let mut s = numeric::KahanSum::new();
    for c in cells {
        if c.0 >= n {
            return Err(Error::IndexOutOfGrid { index: c.0, cells: n });
        }
        s.add(measure.mass[c.0]);
    }
    Ok(s.value())
}

/// Scalar field on cell centers, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub side: usize,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.side + j]
    }

    /// Averages over the `2^level x 2^level` dyadic blocks.
    pub fn block_means(&self, level: u32) -> Vec<f64> {
        let bs = 1usize << level;
        let w = self.side / bs;
        let mut out = Vec::with_capacity(bs * bs);
        for bi in 0..bs {
            for bj in 0..bs {
                let s = numeric::sum((0..w).flat_map(|a| (0..w).map(move |b| (a, b))).map(|(a, b)| self.get(bi * w + a, bj * w + b)));
                out.push(s / (w * w) as f64);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,value\n");
        for i in 0..self.side {
            for j in 0..self.side {
                s.push_str(&format!("{},{},{}\n", i, j, self.get(i, j)));
            }
        }
        s
    }
}

/// `(1/gamma) log mu(B_eps(z))` at every cell center, where the ball is the
/// set of cells whose centers lie within distance `eps` (ties included).
pub fn log_mass_field(measure: &GridMeasure, gamma: f64, eps: f64) -> Result<CellField> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    let h = measure.spacing();
    if !(eps >= h * (1.0 - 1e-12)) {
        return Err(Error::EmptyBall { eps, spacing: h });
    }
    let side = measure.side();
    let r = eps / h;
    let r2 = r * r * (1.0 + 1e-12);
    let reach = r.floor() as i64;
    let offsets: Vec<(i64, i64)> = (-reach..=reach)
        .flat_map(|a| (-reach..=reach).map(move |b| (a, b)))
        .filter(|&(a, b)| ((a * a + b * b) as f64) <= r2)
        .collect();
    let mut values = Vec::with_capacity(side * side);
    for i in 0..side as i64 {
        for j in 0..side as i64 {
            let mut s = numeric::KahanSum::new();
            for &(a, b) in &offsets {
                let (x, y) = (i + a, j + b);
                if x >= 0 && y >= 0 && (x as usize) < side && (y as usize) < side {
                    s.add(measure.mass(x as usize, y as usize));
                }
            }
            values.push(s.value().ln() / gamma);
        }
    }
    Ok(CellField { side, values })
}
