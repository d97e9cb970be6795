//! The blockwise-shrinkage (EP) conditional density estimator.
//!
//! A fit is `f~(y|x) = f~(y) + psi~(y,x)`: a univariate response component
//! built from the `r = 0` coefficients and an interaction component built from
//! `r >= 1`. Under the square loss both are cosine series on the unit square;
//! under the line loss both are characteristic-function inversions in `y`.

use num_complex::Complex64;

use crate::data::{Loss, SamplePairs};
use crate::design::{estimate_design, ConstantDensity, PredictorDensity};
use crate::error::{check_unit, Error, Result};
use crate::fourier::{
    cosine_row, empirical_h_slices, empirical_table, invert_char, u_lattice, CharAggregate,
    CharSegment, CoefficientTable, TrigTable, U_NODES_PER_UNIT, U_STEP, warn_if_coarse,
};
use crate::quadrature::{simpson_weights, GaussLegendre};
use crate::schedule::{build_schedule, BlockSchedule};

/// Plug-in coefficient of difficulty.
///
/// Square loss: `n^-1 sum I(Y in [0,1]) p^-2(X)`. Line loss: `integral p^-1`.
pub fn estimate_difficulty(data: &SamplePairs, phat: &dyn PredictorDensity, loss: Loss) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(match loss {
        Loss::Square => {
            let n = data.len() as f64;
            data.iter()
                .filter(|(y, _)| (0.0..=1.0).contains(y))
                .map(|(_, x)| phat.density(x).powi(-2))
                .sum::<f64>()
                / n
        }
        Loss::Line => GaussLegendre::new(8).integrate(0.0, 1.0, 128, |x| 1.0 / phat.density(x)),
    })
}

/// `sum_sq / length - difficulty / n`; negative when the block looks like noise.
pub fn block_energy(sum_sq: f64, length: f64, difficulty: f64, n: usize) -> f64 {
    sum_sq / length - difficulty / n as f64
}

/// Plugged-in Wiener weight `E / (E + d/n)` gated by `E > t d/n`.
///
/// Expects `difficulty > 0`; the gate is checked first so pure-noise blocks
/// never divide by zero.
pub fn shrink_weight(energy: f64, threshold: f64, difficulty: f64, n: usize) -> f64 {
    let noise = difficulty / n as f64;
    if !(energy > threshold * noise) {
        return 0.0;
    }
    energy / (energy + noise)
}

/// Indicator-free Wiener weight `E / (E + d/n)` from a true block functional.
pub fn wiener_weight(functional: f64, difficulty: f64, n: usize) -> f64 {
    let noise = difficulty / n as f64;
    if functional <= 0.0 {
        return 0.0;
    }
    functional / (functional + noise)
}

/// Block functionals `Theta_k` and `Theta_{k,tau}` with their difficulty.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFunctionals {
    /// `Theta_k`, `k = 1..=K`.
    pub uni: Vec<f64>,
    /// `Theta_{k,tau}` row-major over `k, tau = 1..=T`.
    pub bi: Vec<f64>,
    pub t_cut: usize,
    pub difficulty: f64,
}

impl BlockFunctionals {
    pub fn bi_at(&self, k: usize, tau: usize) -> f64 {
        self.bi[(k - 1) * self.t_cut + (tau - 1)]
    }
}

/// How block weights are chosen.
#[derive(Debug, Clone, Copy)]
pub enum WeightRule<'a> {
    /// Empirical energies, thresholds and the plug-in difficulty.
    Plugin,
    /// True functionals and difficulty, no threshold gate.
    Oracle(&'a BlockFunctionals),
}

#[derive(Debug, Clone, PartialEq)]
enum FitParts {
    Square {
        /// shrunken `theta_j`, `j < b_{K+1}`
        uni: Vec<f64>,
        /// shrunken `theta_jr`, `r >= 1` (column 0 unused)
        bi: CoefficientTable,
    },
    Line {
        uni: CharAggregate,
        /// aggregate for predictor index `r` at position `r - 1`
        bi: Vec<CharAggregate>,
    },
}

/// A fitted conditional density.
#[derive(Debug, Clone, PartialEq)]
pub struct CondDensityFit {
    loss: Loss,
    n: usize,
    difficulty: f64,
    schedule: BlockSchedule,
    uni_weights: Vec<f64>,
    bi_weights: Vec<f64>,
    uni_energy: Vec<f64>,
    bi_energy: Vec<f64>,
    shrunk_bi_energy: f64,
    bivariate: bool,
    parts: FitParts,
}

/// Fits the EP estimator, building the schedule and design estimate from the
/// data when they are not supplied.
pub fn fit(
    data: &SamplePairs,
    loss: Loss,
    schedule: Option<BlockSchedule>,
    phat: Option<&dyn PredictorDensity>,
) -> Result<CondDensityFit> {
    fit_with_rule(data, loss, schedule, phat, WeightRule::Plugin)
}

/// The shared pipeline behind [`fit`] and the oracle fit.
pub fn fit_with_rule(
    data: &SamplePairs,
    loss: Loss,
    schedule: Option<BlockSchedule>,
    phat: Option<&dyn PredictorDensity>,
    rule: WeightRule<'_>,
) -> Result<CondDensityFit> {
    let schedule = match schedule {
        Some(s) => {
            if s.loss() != loss {
                return Err(Error::InvalidSchedule(format!(
                    "schedule built for {} loss, fit requested for {loss}",
                    s.loss()
                )));
            }
            s
        }
        None => build_schedule(data.len(), loss, None)?,
    };
    let owned;
    let phat: &dyn PredictorDensity = match phat {
        Some(p) => p,
        None => {
            owned = estimate_design(data.x())?;
            &owned
        }
    };
    run_pipeline(data, schedule, phat, rule, true)
}

/// Univariate-only pipeline on responses alone, with unit design density.
pub(crate) fn fit_univariate(ys: &[f64], schedule: BlockSchedule) -> Result<CondDensityFit> {
    let data = SamplePairs::new(ys.to_vec(), vec![0.5; ys.len()], crate::data::DesignKind::Random)?;
    run_pipeline(&data, schedule, &ConstantDensity(1.0), WeightRule::Plugin, false)
}

fn weight_for(rule: WeightRule<'_>, energy: f64, threshold: f64, d: f64, n: usize, truth: impl FnOnce(&BlockFunctionals) -> f64) -> f64 {
    match rule {
        WeightRule::Plugin => shrink_weight(energy, threshold, d, n),
        WeightRule::Oracle(f) => wiener_weight(truth(f), f.difficulty, n),
    }
}

fn check_functionals(rule: WeightRule<'_>, schedule: &BlockSchedule) -> Result<()> {
    if let WeightRule::Oracle(f) = rule {
        let t = schedule.t_cut();
        if f.uni.len() != schedule.k_cut() || f.t_cut != t || f.bi.len() != t * t {
            return Err(Error::InvalidArgument(
                "block functionals do not match the schedule".into(),
            ));
        }
        if !(f.difficulty > 0.0) {
            return Err(Error::NonPositive {
                what: "difficulty",
                value: f.difficulty,
                at: 0.0,
            });
        }
    }
    Ok(())
}

fn run_pipeline(
    data: &SamplePairs,
    schedule: BlockSchedule,
    phat: &dyn PredictorDensity,
    rule: WeightRule<'_>,
    bivariate: bool,
) -> Result<CondDensityFit> {
    check_functionals(rule, &schedule)?;
    let n = data.len();
    let loss = schedule.loss();
    let d = estimate_difficulty(data, phat, loss)?;
    let k_cut = schedule.k_cut();
    let t_cut = if bivariate { schedule.t_cut() } else { 0 };

    let mut uni_weights = Vec::with_capacity(k_cut);
    let mut uni_energy = Vec::with_capacity(k_cut);
    let mut bi_weights = vec![0.0; t_cut * t_cut];
    let mut bi_energy = vec![0.0; t_cut * t_cut];
    let mut shrunk_bi_energy = 0.0;

    let parts = match loss {
        Loss::Square => {
            let uni_ext = schedule.uni_extent();
            let bi_ext = if bivariate { schedule.bi_extent() } else { 0 };
            let cols = if bivariate { bi_ext + 1 } else { 1 };
            let table = empirical_table(data, phat, uni_ext.max(bi_ext), cols)?;

            let mut uni = vec![0.0; uni_ext];
            for k in 1..=k_cut {
                let block = schedule.uni_block(k);
                let sum_sq: f64 = block.clone().map(|j| table.get(j, 0).powi(2)).sum();
                let e = block_energy(sum_sq, block.len() as f64, d, n);
                let w = weight_for(rule, e, schedule.uni_threshold(k), d, n, |f| f.uni[k - 1]);
                for j in block {
                    uni[j] = w * table.get(j, 0);
                }
                uni_weights.push(w);
                uni_energy.push(e);
            }

            let mut bi = CoefficientTable::zeros(bi_ext, cols);
            for k in 1..=t_cut {
                for tau in 1..=t_cut {
                    let js = schedule.bi_response_range(k);
                    let rs = schedule.bi_predictor_range(tau);
                    let mut sum_sq = 0.0;
                    for j in js.clone() {
                        for r in rs.clone() {
                            sum_sq += table.get(j, r).powi(2);
                        }
                    }
                    let e = block_energy(sum_sq, schedule.bi_length(k, tau) as f64, d, n);
                    let w = weight_for(rule, e, schedule.bi_threshold(k, tau), d, n, |f| f.bi_at(k, tau));
                    for j in js {
                        for r in rs.clone() {
                            bi.set(j, r, w * table.get(j, r));
                        }
                    }
                    shrunk_bi_energy += w * w * sum_sq;
                    bi_weights[(k - 1) * t_cut + tau - 1] = w;
                    bi_energy[(k - 1) * t_cut + tau - 1] = e;
                }
            }
            FitParts::Square { uni, bi }
        }
        Loss::Line => {
            let uni_grid = u_lattice(schedule.uni_extent());
            let h0 = empirical_h_slices(data, phat, 1, &uni_grid)?.swap_remove(0).values;
            let edges = schedule.uni_edges();
            let mut segments = Vec::with_capacity(k_cut);
            for k in 1..=k_cut {
                let (lo, hi) = (edges[k - 1], edges[k]);
                let nodes = &h0[lo * U_NODES_PER_UNIT..=hi * U_NODES_PER_UNIT];
                let e = block_energy(lattice_energy(nodes), (hi - lo) as f64, d, n);
                let w = weight_for(rule, e, schedule.uni_threshold(k), d, n, |f| f.uni[k - 1]);
                if w > 0.0 {
                    segments.push(CharSegment {
                        start: lo * U_NODES_PER_UNIT,
                        values: nodes.iter().map(|z| z * w).collect(),
                    });
                }
                uni_weights.push(w);
                uni_energy.push(e);
            }
            let uni = CharAggregate::from_segments(U_STEP, &segments);

            let mut bi = Vec::new();
            if bivariate {
                let bi_ext = schedule.bi_extent();
                let slices = empirical_h_slices(data, phat, bi_ext + 1, &u_lattice(bi_ext))?;
                let bedges = schedule.bi_edges();
                let node_range = |k: usize| bedges[k - 1] * U_NODES_PER_UNIT..=bedges[k] * U_NODES_PER_UNIT;
                // block integrals of |h_r|^2 per (r, k)
                let integrals: Vec<Vec<f64>> = slices
                    .iter()
                    .map(|s| (1..=t_cut).map(|k| lattice_energy(&s.values[node_range(k)])).collect())
                    .collect();
                for k in 1..=t_cut {
                    for tau in 1..=t_cut {
                        let sum_sq: f64 = schedule.bi_predictor_range(tau).map(|r| integrals[r][k - 1]).sum();
                        let e = block_energy(sum_sq, schedule.bi_length(k, tau) as f64, d, n);
                        let w = weight_for(rule, e, schedule.bi_threshold(k, tau), d, n, |f| f.bi_at(k, tau));
                        shrunk_bi_energy += w * w * sum_sq;
                        bi_weights[(k - 1) * t_cut + tau - 1] = w;
                        bi_energy[(k - 1) * t_cut + tau - 1] = e;
                    }
                }
                for tau in 1..=t_cut {
                    for r in schedule.bi_predictor_range(tau) {
                        let segs: Vec<CharSegment> = (1..=t_cut)
                            .filter_map(|k| {
                                let w = bi_weights[(k - 1) * t_cut + tau - 1];
                                (w > 0.0).then(|| CharSegment {
                                    start: bedges[k - 1] * U_NODES_PER_UNIT,
                                    values: slices[r].values[node_range(k)].iter().map(|z| z * w).collect(),
                                })
                            })
                            .collect();
                        bi.push(CharAggregate::from_segments(U_STEP, &segs));
                    }
                }
            }
            FitParts::Line { uni, bi }
        }
    };

    Ok(CondDensityFit {
        loss,
        n,
        difficulty: d,
        schedule,
        uni_weights,
        bi_weights,
        uni_energy,
        bi_energy,
        shrunk_bi_energy,
        bivariate,
        parts,
    })
}

/// Composite Simpson integral of `|z|^2` over consecutive lattice nodes.
pub(crate) fn lattice_energy(nodes: &[Complex64]) -> f64 {
    simpson_weights(nodes.len(), U_STEP)
        .iter()
        .zip(nodes)
        .map(|(w, z)| w * z.norm_sqr())
        .sum()
}

/// Values on a rectangular grid, row-major with `y` outer and `x` inner.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub ys: Vec<f64>,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn get(&self, iy: usize, ix: usize) -> f64 {
        self.values[iy * self.xs.len() + ix]
    }
}

impl CondDensityFit {
    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Plug-in difficulty used by the weights (`d^` or `d~`).
    pub fn difficulty(&self) -> f64 {
        self.difficulty
    }

    pub fn schedule(&self) -> &BlockSchedule {
        &self.schedule
    }

    pub fn has_bivariate(&self) -> bool {
        self.bivariate
    }

    /// Weights per univariate block, `k = 1..=K`.
    pub fn uni_weights(&self) -> &[f64] {
        &self.uni_weights
    }

    /// Weights per bivariate block, row-major over `k, tau = 1..=T`.
    pub fn bi_weights(&self) -> &[f64] {
        &self.bi_weights
    }

    pub fn bi_weight(&self, k: usize, tau: usize) -> f64 {
        if !self.bivariate {
            return 0.0;
        }
        self.bi_weights[(k - 1) * self.schedule.t_cut() + tau - 1]
    }

    /// Empirical block energies, same layout as the weights.
    pub fn uni_energies(&self) -> &[f64] {
        &self.uni_energy
    }

    pub fn bi_energies(&self) -> &[f64] {
        &self.bi_energy
    }

    /// Squared norm of the shrunken interaction component.
    pub fn bivariate_energy(&self) -> f64 {
        self.shrunk_bi_energy
    }

    /// Shrunken cosine coefficients `(j, r, value)` of a square-loss fit, the
    /// univariate component in column `r = 0`.
    pub fn square_coefficients(&self) -> Option<Vec<(usize, usize, f64)>> {
        match &self.parts {
            FitParts::Square { uni, bi } => {
                let mut out: Vec<_> = uni
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, 0, *v))
                    .collect();
                out.extend(bi.triples());
                Some(out)
            }
            FitParts::Line { .. } => None,
        }
    }

    fn check_point(&self, y: f64, x: f64) -> Result<()> {
        check_unit("x", x)?;
        match self.loss {
            Loss::Square => check_unit("y", y),
            Loss::Line if y.is_finite() => Ok(()),
            Loss::Line => Err(Error::NonFinite("y")),
        }
    }

    /// The raw estimate at `(y, x)`; may be negative.
    pub fn evaluate(&self, y: f64, x: f64) -> Result<f64> {
        self.check_point(y, x)?;
        Ok(match &self.parts {
            FitParts::Square { uni, bi } => {
                let rows = uni.len().max(bi.rows());
                let mut py = vec![0.0; rows];
                let mut px = vec![0.0; bi.cols()];
                cosine_row(y, &mut py);
                cosine_row(x, &mut px);
                square_value(uni, bi, &py, &px)
            }
            FitParts::Line { uni, bi } => {
                let mut px = vec![0.0; bi.len() + 1];
                cosine_row(x, &mut px);
                invert_char(uni, y)
                    + bi.iter()
                        .zip(&px[1..])
                        .map(|(agg, p)| p * invert_char(agg, y))
                        .sum::<f64>()
            }
        })
    }

    /// Evaluates on the tensor grid `ys x xs`.
    pub fn evaluate_grid(&self, ys: &[f64], xs: &[f64]) -> Result<DensityGrid> {
        for &x in xs {
            check_unit("x", x)?;
        }
        for &y in ys {
            self.check_point(y, 0.0)?;
        }
        let mut values = Vec::with_capacity(ys.len() * xs.len());
        match &self.parts {
            FitParts::Square { uni, bi } => {
                let rows = uni.len().max(bi.rows());
                let cols = bi.cols();
                let px: Vec<Vec<f64>> = xs
                    .iter()
                    .map(|&x| {
                        let mut v = vec![0.0; cols];
                        cosine_row(x, &mut v);
                        v
                    })
                    .collect();
                let mut py = vec![0.0; rows];
                for &y in ys {
                    cosine_row(y, &mut py);
                    // collapse the y-sum once per row: c_r = sum_j phi_j(y) theta_jr
                    let mut c = vec![0.0; cols];
                    for (j, p) in py.iter().enumerate() {
                        if j < uni.len() {
                            c[0] += p * uni[j];
                        }
                        if j < bi.rows() {
                            for (r, slot) in c.iter_mut().enumerate().skip(1) {
                                *slot += p * bi.get(j, r);
                            }
                        }
                    }
                    for pxi in &px {
                        values.push(c[0] + c.iter().zip(pxi).skip(1).map(|(a, b)| a * b).sum::<f64>());
                    }
                }
            }
            FitParts::Line { uni, bi } => {
                let nodes = uni
                    .folded()
                    .len()
                    .max(bi.iter().map(|a| a.folded().len()).max().unwrap_or(0));
                let widest = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
                warn_if_coarse(U_STEP, widest);
                let table = TrigTable::new(ys, U_STEP, nodes);
                let px: Vec<Vec<f64>> = xs
                    .iter()
                    .map(|&x| {
                        let mut v = vec![0.0; bi.len() + 1];
                        cosine_row(x, &mut v);
                        v
                    })
                    .collect();
                let mut g = vec![0.0; bi.len()];
                for i in 0..ys.len() {
                    let base = table.invert(uni, i);
                    for (slot, agg) in g.iter_mut().zip(bi) {
                        *slot = table.invert(agg, i);
                    }
                    for pxi in &px {
                        values.push(base + g.iter().zip(&pxi[1..]).map(|(a, b)| a * b).sum::<f64>());
                    }
                }
            }
        }
        Ok(DensityGrid {
            ys: ys.to_vec(),
            xs: xs.to_vec(),
            values,
        })
    }

    /// The univariate component `f~(y)` alone.
    pub fn evaluate_response(&self, y: f64) -> Result<f64> {
        self.check_point(y, 0.0)?;
        Ok(match &self.parts {
            FitParts::Square { uni, .. } => {
                let mut py = vec![0.0; uni.len()];
                cosine_row(y, &mut py);
                py.iter().zip(uni).map(|(a, b)| a * b).sum()
            }
            FitParts::Line { uni, .. } => invert_char(uni, y),
        })
    }
}

fn square_value(uni: &[f64], bi: &CoefficientTable, py: &[f64], px: &[f64]) -> f64 {
    let mut total: f64 = uni.iter().zip(py).map(|(a, b)| a * b).sum();
    for (j, wy) in py.iter().enumerate().take(bi.rows()) {
        let row: f64 = (1..bi.cols()).map(|r| bi.get(j, r) * px[r]).sum();
        total += wy * row;
    }
    total
}

/// Result of [`project_nonneg`]: the x-columns left at zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProjectionReport {
    pub zero_slices: Vec<usize>,
}

/// Clips a grid to nonnegative values. Under the line loss each x-slice is
/// rescaled to unit mass with cells of width `ys[1] - ys[0]`.
pub fn project_nonneg(grid: &mut DensityGrid, loss: Loss) -> ProjectionReport {
    for v in &mut grid.values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let nx = grid.xs.len();
    let ny = grid.ys.len();
    let width = if ny > 1 { grid.ys[1] - grid.ys[0] } else { 1.0 };
    let mut report = ProjectionReport::default();
    for ix in 0..nx {
        let mass: f64 = (0..ny).map(|iy| grid.values[iy * nx + ix]).sum::<f64>() * width;
        if mass <= 0.0 {
            report.zero_slices.push(ix);
            continue;
        }
        if loss == Loss::Line {
            for iy in 0..ny {
                grid.values[iy * nx + ix] /= mass;
            }
        }
    }
    report
}
