//! Cosine basis on [0, 1], empirical Fourier and characteristic-function
//! coefficients, partial-sum synthesis and characteristic-function inversion.

use std::f64::consts::{FRAC_1_PI, FRAC_PI_4, PI, SQRT_2};
use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;

use crate::data::SamplePairs;
use crate::design::PredictorDensity;
use crate::error::{check_unit, Error, Result};
use crate::quadrature::simpson_weights;

/// Spacing of the u-lattice used for every characteristic-function integral.
pub const U_STEP: f64 = 0.05;

/// Number of lattice nodes per unit of u.
pub const U_NODES_PER_UNIT: usize = 20;

/// phi_j(x): 1 for j = 0, sqrt(2) cos(pi j x) otherwise.
pub fn cosine(j: usize, x: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(cosine_unchecked(j, x))
}

#[inline]
pub(crate) fn cosine_unchecked(j: usize, x: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        SQRT_2 * (PI * j as f64 * x).cos()
    }
}

/// Fills `out[j] = phi_j(x)` for `j < out.len()` using the Chebyshev recurrence.
pub(crate) fn cosine_row(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    let c = (PI * x).cos();
    // plain cos(j pi x) recurrence, rescaled afterwards
    let mut prev = 1.0;
    let mut cur = c;
    out[1] = SQRT_2 * cur;
    for slot in out.iter_mut().skip(2) {
        let next = 2.0 * c * cur - prev;
        prev = cur;
        cur = next;
        *slot = SQRT_2 * cur;
    }
}

/// `n^-1 sum I(Y in [0,1]) phi_j(Y) phi_r(X) / p(X)`.
pub fn empirical_theta(
    data: &SamplePairs,
    phat: &dyn PredictorDensity,
    j: usize,
    r: usize,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = data.len() as f64;
    let total: f64 = data
        .iter()
        .filter(|(y, _)| (0.0..=1.0).contains(y))
        .map(|(y, x)| cosine_unchecked(j, y) * cosine_unchecked(r, x) / phat.density(x))
        .sum();
    Ok(total / n)
}

/// Dense table of empirical coefficients `theta[j][r]`, `j < rows`, `r < cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CoefficientTable {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CoefficientTable {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, j: usize, r: usize) -> f64 {
        self.values[j * self.cols + r]
    }

    #[inline]
    pub fn set(&mut self, j: usize, r: usize, v: f64) {
        self.values[j * self.cols + r] = v;
    }

    /// Sum of squares over every stored entry.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Non-zero entries as `(j, r, value)` triples.
    pub fn triples(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for j in 0..self.rows {
            for r in 0..self.cols {
                let v = self.get(j, r);
                if v != 0.0 {
                    out.push((j, r, v));
                }
            }
        }
        out
    }
}

/// Every empirical coefficient with `j < rows`, `r < cols` in one pass.
pub fn empirical_table(
    data: &SamplePairs,
    phat: &dyn PredictorDensity,
    rows: usize,
    cols: usize,
) -> Result<CoefficientTable> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = data.len() as f64;
    let mut table = CoefficientTable::zeros(rows, cols);
    let mut phi_y = vec![0.0; rows];
    let mut phi_x = vec![0.0; cols];
    for (y, x) in data.iter() {
        if !(0.0..=1.0).contains(&y) {
            continue;
        }
        let w = 1.0 / (n * phat.density(x));
        cosine_row(y, &mut phi_y);
        cosine_row(x, &mut phi_x);
        for (j, py) in phi_y.iter().enumerate() {
            let a = w * py;
            let row = &mut table.values[j * cols..(j + 1) * cols];
            for (slot, px) in row.iter_mut().zip(&phi_x) {
                *slot += a * px;
            }
        }
    }
    Ok(table)
}

/// Samples of one characteristic-function coefficient `h_r(u)` on a u-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CharSlice {
    pub r: usize,
    pub u_grid: Vec<f64>,
    pub values: Vec<Complex64>,
}

fn check_u_grid(u_grid: &[f64]) -> Result<()> {
    if u_grid.iter().any(|u| !u.is_finite() || *u < 0.0) {
        return Err(Error::InvalidArgument(
            "u-grid must contain finite nonnegative frequencies".into(),
        ));
    }
    if u_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NotAscending("u-grid"));
    }
    Ok(())
}

/// `h_r(u) = n^-1 sum exp(i u Y) phi_r(X) / p(X)` on `u_grid`.
pub fn empirical_h(
    data: &SamplePairs,
    phat: &dyn PredictorDensity,
    r: usize,
    u_grid: &[f64],
) -> Result<CharSlice> {
    let mut slices = empirical_h_slices(data, phat, r + 1, u_grid)?;
    Ok(slices.swap_remove(r))
}

/// `h_r` for every `r < count`, sharing the `exp(i u Y)` evaluations.
pub fn empirical_h_slices(
    data: &SamplePairs,
    phat: &dyn PredictorDensity,
    count: usize,
    u_grid: &[f64],
) -> Result<Vec<CharSlice>> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    check_u_grid(u_grid)?;
    let n = data.len() as f64;
    let m = u_grid.len();
    let mut acc = vec![Complex64::new(0.0, 0.0); count * m];
    let mut phase = vec![Complex64::new(0.0, 0.0); m];
    let mut phi_x = vec![0.0; count];
    for (y, x) in data.iter() {
        let w = 1.0 / (n * phat.density(x));
        for (slot, u) in phase.iter_mut().zip(u_grid) {
            let (s, c) = (u * y).sin_cos();
            *slot = Complex64::new(c, s);
        }
        cosine_row(x, &mut phi_x);
        for (r, px) in phi_x.iter().enumerate() {
            let a = w * px;
            if a == 0.0 {
                continue;
            }
            let row = &mut acc[r * m..(r + 1) * m];
            for (slot, z) in row.iter_mut().zip(&phase) {
                *slot += z * a;
            }
        }
    }
    Ok((0..count)
        .map(|r| CharSlice {
            r,
            u_grid: u_grid.to_vec(),
            values: acc[r * m..(r + 1) * m].to_vec(),
        })
        .collect())
}

/// The shared u-lattice `0, U_STEP, ..., upper` (upper is an integer).
pub fn u_lattice(upper: usize) -> Vec<f64> {
    (0..=upper * U_NODES_PER_UNIT)
        .map(|i| i as f64 / U_NODES_PER_UNIT as f64)
        .collect()
}

/// `sum value * phi_j(y) * phi_r(x)`.
pub fn synth_sq(coeffs: &[(usize, usize, f64)], y: f64, x: f64) -> Result<f64> {
    check_unit("y", y)?;
    check_unit("x", x)?;
    Ok(coeffs
        .iter()
        .map(|&(j, r, v)| v * cosine_unchecked(j, y) * cosine_unchecked(r, x))
        .sum())
}

/// A run of lattice values `values[m]` at `u = (start + m) * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharSegment {
    pub start: usize,
    pub values: Vec<Complex64>,
}

/// A piecewise characteristic-function aggregate with its composite Simpson
/// weights already folded in, ready for inversion.
///
/// Segments meeting at a node keep their own one-sided values, so block-wise
/// shrinkage weights that jump at block edges are integrated exactly per block.
#[derive(Debug, Clone, PartialEq)]
pub struct CharAggregate {
    step: f64,
    folded: Vec<Complex64>,
}

static COARSE_WARNED: AtomicBool = AtomicBool::new(false);

impl CharAggregate {
    pub fn empty(step: f64) -> Self {
        CharAggregate {
            step,
            folded: Vec::new(),
        }
    }

    pub fn from_segments(step: f64, segments: &[CharSegment]) -> Self {
        let end = segments
            .iter()
            .map(|s| s.start + s.values.len())
            .max()
            .unwrap_or(0);
        let mut folded = vec![Complex64::new(0.0, 0.0); end];
        for seg in segments {
            let w = simpson_weights(seg.values.len(), step);
            for (m, (v, wm)) in seg.values.iter().zip(&w).enumerate() {
                folded[seg.start + m] += v * wm;
            }
        }
        CharAggregate { step, folded }
    }

    /// Single-segment aggregate from a slice on a uniform grid starting at 0.
    pub fn from_slice(slice: &CharSlice) -> Result<Self> {
        let g = &slice.u_grid;
        if g.len() < 2 {
            return Ok(Self::empty(U_STEP));
        }
        let step = g[1] - g[0];
        let uniform = g
            .iter()
            .enumerate()
            .all(|(i, u)| (u - step * i as f64).abs() <= 1e-9 * (1.0 + u.abs()));
        if g[0] != 0.0 || !uniform {
            return Err(Error::InvalidArgument(
                "aggregate needs a uniform grid starting at u = 0".into(),
            ));
        }
        Ok(Self::from_segments(
            step,
            &[CharSegment {
                start: 0,
                values: slice.values.clone(),
            }],
        ))
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Largest frequency carried by the aggregate.
    pub fn upper(&self) -> f64 {
        self.folded.len().saturating_sub(1) as f64 * self.step
    }

    pub fn is_zero(&self) -> bool {
        self.folded.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Quadrature-folded values, one per lattice node.
    pub fn folded(&self) -> &[Complex64] {
        &self.folded
    }

    /// Phase advance between neighbouring nodes at `y`.
    pub fn phase_step(&self, y: f64) -> f64 {
        self.step * y.abs()
    }
}

/// Logs once per process when the lattice phase step at `y` exceeds pi/4.
pub(crate) fn warn_if_coarse(step: f64, y: f64) {
    let phase = step * y.abs();
    if phase > FRAC_PI_4 && !COARSE_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("u-grid too coarse for y = {y}: phase step {phase} exceeds pi/4");
    }
}

/// `pi^-1 * integral of Re{agg(u) exp(-i u y)} du` over the supported u-range.
pub fn invert_char(agg: &CharAggregate, y: f64) -> f64 {
    warn_if_coarse(agg.step, y);
    let mut total = 0.0;
    for (m, z) in agg.folded.iter().enumerate() {
        let u = m as f64 * agg.step;
        let (s, c) = (u * y).sin_cos();
        // Re{z e^{-iuy}} = re cos(uy) + im sin(uy)
        total += z.re * c + z.im * s;
    }
    FRAC_1_PI * total
}

/// Table of `(cos(u_m y_i), sin(u_m y_i))` shared across many aggregates.
pub(crate) struct TrigTable {
    nodes: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigTable {
    pub(crate) fn new(ys: &[f64], step: f64, nodes: usize) -> Self {
        let mut cos = Vec::with_capacity(ys.len() * nodes);
        let mut sin = Vec::with_capacity(ys.len() * nodes);
        for &y in ys {
            for m in 0..nodes {
                let (s, c) = (m as f64 * step * y).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        TrigTable { nodes, cos, sin }
    }

    /// `invert_char(agg, ys[i])` for the table's i-th abscissa.
    pub(crate) fn invert(&self, agg: &CharAggregate, i: usize) -> f64 {
        let base = i * self.nodes;
        let len = agg.folded.len().min(self.nodes);
        let c = &self.cos[base..base + len];
        let s = &self.sin[base..base + len];
        let mut total = 0.0;
        for ((z, cm), sm) in agg.folded[..len].iter().zip(c).zip(s) {
            total += z.re * cm + z.im * sm;
        }
        FRAC_1_PI * total
    }
}
