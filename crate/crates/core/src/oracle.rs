//! Benchmarks that know the truth: block functionals of a [`TrueModel`], the
//! Wiener oracle fit, the oracle MISE expression with its remainder bounds, and
//! univariate density oracles for null-hypothesis studies.

use num_complex::Complex64;

use crate::data::{Loss, SamplePairs};
use crate::design::PredictorDensity;
use crate::error::{Error, Result};
use crate::estimator::{fit_univariate, fit_with_rule, lattice_energy, BlockFunctionals, CondDensityFit, WeightRule};
use crate::fourier::{cosine_row, CoefficientTable, U_NODES_PER_UNIT, U_STEP};
use crate::model::TrueModel;
use crate::quadrature::{simpson, GaussLegendre};
use crate::risk::coefficient_of_difficulty;
use crate::schedule::{adjusted_length, BlockSchedule};

/// Gauss-Legendre panels per unit axis when projecting a truth on the square.
const SQUARE_PANELS: usize = 128;
/// Gauss-Legendre panels on [0, 1] for x-integrals of characteristic functions.
const STRIP_PANELS: usize = 32;
/// Unit u-blocks that must stay negligible before the line-loss tail stops.
const TAIL_QUIET_BLOCKS: usize = 50;
const TAIL_NEGLIGIBLE: f64 = 1e-14;
const TAIL_MAX_U: usize = 1000;

/// Cosine coefficients of a truth on the unit square plus its Parseval totals.
#[derive(Debug, Clone)]
pub struct SquareTruth {
    /// `theta_jr` for `j < rows`, `r < cols`.
    pub coeffs: CoefficientTable,
    /// `int int_[0,1]^2 f^2`.
    pub total_energy: f64,
    /// `int_0^1 (int_0^1 f(y|x) dx)^2 dy`, the energy of the `r = 0` column.
    pub marginal_energy: f64,
}

/// Projects `f(y|x)` onto `phi_j(y) phi_r(x)` by tensor Gauss-Legendre quadrature.
pub fn square_truth(model: &TrueModel, rows: usize, cols: usize) -> SquareTruth {
    let gl = GaussLegendre::new(8);
    let (ys, wy) = gl.composite(0.0, 1.0, SQUARE_PANELS);
    let (xs, wx) = gl.composite(0.0, 1.0, SQUARE_PANELS);
    let phi_y: Vec<Vec<f64>> = ys
        .iter()
        .map(|&y| {
            let mut v = vec![0.0; rows];
            cosine_row(y, &mut v);
            v
        })
        .collect();
    let mut coeffs = CoefficientTable::zeros(rows, cols);
    let mut marginal = vec![0.0; ys.len()];
    let mut total = 0.0;
    let mut g = vec![0.0; rows];
    let mut phi_x = vec![0.0; cols];
    for (&x, &wxi) in xs.iter().zip(&wx) {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (iy, (&y, &wyi)) in ys.iter().zip(&wy).enumerate() {
            let f = model.cd(y, x);
            total += wxi * wyi * f * f;
            marginal[iy] += wxi * f;
            let fw = wyi * f;
            for (slot, p) in g.iter_mut().zip(&phi_y[iy]) {
                *slot += fw * p;
            }
        }
        cosine_row(x, &mut phi_x);
        for (j, gj) in g.iter().enumerate() {
            for (r, p) in phi_x.iter().enumerate() {
                let v = coeffs.get(j, r) + wxi * gj * p;
                coeffs.set(j, r, v);
            }
        }
    }
    let marginal_energy = marginal.iter().zip(&wy).map(|(m, w)| w * m * m).sum();
    SquareTruth {
        coeffs,
        total_energy: total,
        marginal_energy,
    }
}

/// `h_r(u)` for `r < count` on the lattice nodes `first..=last`, together with
/// `int_0^1 |h(u|x)|^2 dx` at the same nodes.
fn strip_truth(model: &TrueModel, first: usize, last: usize, count: usize) -> (Vec<Vec<Complex64>>, Vec<f64>) {
    let gl = GaussLegendre::new(8);
    let (xs, wx) = gl.composite(0.0, 1.0, STRIP_PANELS);
    let phi_x: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| {
            let mut v = vec![0.0; count];
            cosine_row(x, &mut v);
            v
        })
        .collect();
    let m = last + 1 - first;
    let mut h = vec![vec![Complex64::new(0.0, 0.0); m]; count];
    let mut energy = vec![0.0; m];
    for (i, node) in (first..=last).enumerate() {
        let u = node as f64 * U_STEP;
        for (ix, (&x, &w)) in xs.iter().zip(&wx).enumerate() {
            let z = model.char_at(u, x);
            energy[i] += w * z.norm_sqr();
            for (r, p) in phi_x[ix].iter().enumerate() {
                h[r][i] += z * (w * p);
            }
        }
    }
    (h, energy)
}

/// The Wiener functionals `Theta_k`, `Theta_{k,tau}` and the true difficulty.
pub fn true_functionals(model: &TrueModel, schedule: &BlockSchedule) -> Result<BlockFunctionals> {
    let loss = schedule.loss();
    let difficulty = coefficient_of_difficulty(model, loss)?;
    let k_cut = schedule.k_cut();
    let t_cut = schedule.t_cut();
    let mut uni = Vec::with_capacity(k_cut);
    let mut bi = vec![0.0; t_cut * t_cut];
    match loss {
        Loss::Square => {
            let rows = schedule.uni_extent().max(schedule.bi_extent());
            let truth = square_truth(model, rows, schedule.bi_extent() + 1);
            for k in 1..=k_cut {
                let b = schedule.uni_block(k);
                let len = b.len() as f64;
                uni.push(b.map(|j| truth.coeffs.get(j, 0).powi(2)).sum::<f64>() / len);
            }
            for k in 1..=t_cut {
                for tau in 1..=t_cut {
                    let mut s = 0.0;
                    for j in schedule.bi_response_range(k) {
                        for r in schedule.bi_predictor_range(tau) {
                            s += truth.coeffs.get(j, r).powi(2);
                        }
                    }
                    bi[(k - 1) * t_cut + tau - 1] = s / schedule.bi_length(k, tau) as f64;
                }
            }
        }
        Loss::Line => {
            let upper = schedule.uni_extent().max(schedule.bi_extent()) * U_NODES_PER_UNIT;
            let (h, _) = strip_truth(model, 0, upper, schedule.bi_extent() + 1);
            let edges = schedule.uni_edges();
            for k in 1..=k_cut {
                let (lo, hi) = (edges[k - 1], edges[k]);
                let e = lattice_energy(&h[0][lo * U_NODES_PER_UNIT..=hi * U_NODES_PER_UNIT]);
                uni.push(e / (hi - lo) as f64);
            }
            let bedges = schedule.bi_edges();
            for k in 1..=t_cut {
                let nodes = bedges[k - 1] * U_NODES_PER_UNIT..=bedges[k] * U_NODES_PER_UNIT;
                for tau in 1..=t_cut {
                    let s: f64 = schedule
                        .bi_predictor_range(tau)
                        .map(|r| lattice_energy(&h[r][nodes.clone()]))
                        .sum();
                    bi[(k - 1) * t_cut + tau - 1] = s / schedule.bi_length(k, tau) as f64;
                }
            }
        }
    }
    Ok(BlockFunctionals {
        uni,
        bi,
        t_cut,
        difficulty,
    })
}

/// The EP pipeline with Wiener weights computed from the truth.
pub fn oracle_fit(
    data: &SamplePairs,
    model: &TrueModel,
    schedule: &BlockSchedule,
    phat: Option<&dyn PredictorDensity>,
) -> Result<CondDensityFit> {
    let functionals = true_functionals(model, schedule)?;
    oracle_fit_with(data, &functionals, schedule, phat)
}

/// [`oracle_fit`] with precomputed functionals, for repeated fits on one truth.
pub fn oracle_fit_with(
    data: &SamplePairs,
    functionals: &BlockFunctionals,
    schedule: &BlockSchedule,
    phat: Option<&dyn PredictorDensity>,
) -> Result<CondDensityFit> {
    fit_with_rule(
        data,
        schedule.loss(),
        Some(schedule.clone()),
        phat,
        WeightRule::Oracle(functionals),
    )
}

/// Free arrays of the `delta*` bound, one entry per block, each in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NuArrays {
    pub uni: Vec<f64>,
    /// row-major over `k, tau = 1..=T`
    pub bi: Vec<f64>,
}

/// Terms of the oracle MISE expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMise {
    /// `c* d/n [sum L_k mu_k + sum L_{k,tau} mu_{k,tau}]`
    pub main: f64,
    /// `c*` times the energy outside the cutoffs.
    pub tail: f64,
    /// Bound on `|delta*|` with the generic constant set to 1.
    pub delta_star_bound: f64,
    /// Bound on `delta` with the generic constant set to 1.
    pub delta_bound: f64,
    /// Set when the tail had not decayed below `1e-10 * main` at the horizon.
    pub tail_overflow: bool,
}

/// Evaluates the oracle MISE expression for the schedule's sample size.
pub fn oracle_mise_expression(
    model: &TrueModel,
    schedule: &BlockSchedule,
    nu: Option<&NuArrays>,
) -> Result<OracleMise> {
    let loss = schedule.loss();
    let n = schedule.n();
    let nf = n as f64;
    let c_star = loss.risk_constant();
    let f = true_functionals(model, schedule)?;
    let d = f.difficulty;
    let (k_cut, t_cut) = (schedule.k_cut(), schedule.t_cut());
    if let Some(nu) = nu {
        if nu.uni.len() != k_cut || nu.bi.len() != t_cut * t_cut {
            return Err(Error::InvalidArgument("nu arrays do not match the schedule".into()));
        }
        if nu.uni.iter().chain(&nu.bi).any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::InvalidArgument("nu entries must lie in (0, 1)".into()));
        }
    }
    let mu = |theta: f64| if theta > 0.0 { theta / (theta + d / nf) } else { 0.0 };
    let clip = |v: f64| v.clamp(1e-12, 1.0 - 1e-12);
    let quarter = nf.powf(-0.25);

    let mut adjusted = vec![f64::INFINITY; t_cut * t_cut];
    for k in 1..=t_cut {
        for tau in 1..=t_cut {
            adjusted[(k - 1) * t_cut + tau - 1] = match adjusted_length(schedule, k, tau, model) {
                Ok(l) => l,
                Err(Error::DegenerateBlock { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
        }
    }

    let (mut main, mut dstar, mut delta) = (0.0, 0.0, 0.0);
    for k in 1..=k_cut {
        let len = schedule.uni_length(k) as f64;
        let t = schedule.uni_threshold(k);
        let m = mu(f.uni[k - 1]);
        main += len * m;
        delta += len * m * (t.sqrt() + len.powf(-0.5) * t.powf(-1.5)) + len.powi(-2) * t.powi(-5);
        if m > 0.0 {
            let v = nu.map_or_else(|| clip((m * (1.0 / len + quarter)).sqrt()), |a| a.uni[k - 1]);
            dstar += len * m * (v + m * (1.0 / len + quarter) / v);
        }
    }
    for k in 1..=t_cut {
        for tau in 1..=t_cut {
            let idx = (k - 1) * t_cut + tau - 1;
            let len = schedule.bi_length(k, tau) as f64;
            let t = schedule.bi_threshold(k, tau);
            let star = adjusted[idx];
            let m = mu(f.bi[idx]);
            main += len * m;
            delta += len * m * (t.sqrt() + star.powf(-0.5) * t.powf(-1.5)) + star.powi(-2) * t.powi(-5);
            if m > 0.0 {
                let v = nu.map_or_else(|| clip((m / star).sqrt()), |a| a.bi[idx]);
                dstar += len * m * (v + m / (star * v));
            }
        }
    }
    let main = c_star * d / nf * main;
    let (tail, tail_overflow) = tail_energy(model, schedule)?;
    let tail = c_star * tail;
    if tail_overflow {
        log::warn!("oracle MISE tail had not decayed by u = {TAIL_MAX_U}");
    }
    Ok(OracleMise {
        main,
        tail,
        delta_star_bound: c_star * d / nf * dstar,
        delta_bound: delta / nf,
        tail_overflow,
    })
}

/// Energy of the truth outside the retained blocks, by Parseval against the
/// in-cutoff coefficients.
fn tail_energy(model: &TrueModel, schedule: &BlockSchedule) -> Result<(f64, bool)> {
    let uni_ext = schedule.uni_extent();
    let bi_ext = schedule.bi_extent();
    match schedule.loss() {
        Loss::Square => {
            let truth = square_truth(model, uni_ext.max(bi_ext), bi_ext + 1);
            let kept_uni: f64 = (0..uni_ext).map(|j| truth.coeffs.get(j, 0).powi(2)).sum();
            let mut kept_bi = 0.0;
            for j in 0..bi_ext {
                for r in 1..=bi_ext {
                    kept_bi += truth.coeffs.get(j, r).powi(2);
                }
            }
            let uni_tail = (truth.marginal_energy - kept_uni).max(0.0);
            let bi_tail = (truth.total_energy - truth.marginal_energy - kept_bi).max(0.0);
            Ok((uni_tail + bi_tail, false))
        }
        Loss::Line => {
            let step = U_NODES_PER_UNIT;
            let mut tail = 0.0;
            // inside the bivariate square: energy of r > b'_{T+1} at u < b'_{T+1}
            let (h, energy) = strip_truth(model, 0, bi_ext * step, bi_ext + 1);
            let rest: Vec<f64> = energy
                .iter()
                .enumerate()
                .map(|(i, e)| (e - h.iter().map(|hr| hr[i].norm_sqr()).sum::<f64>()).max(0.0))
                .collect();
            tail += simpson(&rest, U_STEP);
            if uni_ext < bi_ext {
                tail += lattice_energy(&h[0][uni_ext * step..]);
            }
            // beyond the bivariate square: every r >= 1, plus r = 0 past b_{K+1}
            let mut u = bi_ext;
            let mut quiet = 0;
            let mut overflow = true;
            while u < TAIL_MAX_U {
                let (h, energy) = strip_truth(model, u * step, (u + 1) * step, 1);
                let rest: Vec<f64> = energy
                    .iter()
                    .zip(&h[0])
                    .map(|(e, z)| (e - z.norm_sqr()).max(0.0))
                    .collect();
                let mut block = simpson(&rest, U_STEP);
                if u >= uni_ext {
                    block += lattice_energy(&h[0]);
                }
                tail += block;
                quiet = if block < TAIL_NEGLIGIBLE { quiet + 1 } else { 0 };
                u += 1;
                if quiet >= TAIL_QUIET_BLOCKS && u >= uni_ext {
                    overflow = false;
                    break;
                }
            }
            Ok((tail, overflow))
        }
    }
}

/// `(4/3)^(1/5) n^(-1/5)`, the AMISE-optimal Gaussian-kernel bandwidth for a
/// standard normal density.
pub fn super_oracle_bandwidth(n: usize) -> f64 {
    (4.0f64 / 3.0).powf(0.2) * (n as f64).powf(-0.2)
}

/// Silverman's rule `0.9 min(sd, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(ys: &[f64]) -> Result<f64> {
    let n = ys.len();
    if n < 3 {
        return Err(Error::SampleTooSmall { n, min: 3 });
    }
    let nf = n as f64;
    let mean = ys.iter().sum::<f64>() / nf;
    let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("sample has zero variance".into()));
    }
    let mut sorted = ys.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * nf.powf(-0.2))
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Gaussian kernel density estimate with bandwidth `h` on `grid`.
pub fn gaussian_kde(ys: &[f64], grid: &[f64], h: f64) -> Result<Vec<f64>> {
    if ys.is_empty() {
        return Err(Error::EmptyData);
    }
    if !(h > 0.0) {
        return Err(Error::NonPositive {
            what: "bandwidth",
            value: h,
            at: 0.0,
        });
    }
    let norm = 1.0 / (ys.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&g| {
            norm * ys
                .iter()
                .map(|&y| {
                    let z = (g - y) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect())
}

/// Kernel estimate with the bandwidth that is optimal when the truth is N(0, 1).
pub fn kernel_super_oracle(ys: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if ys.len() < 2 {
        return Err(Error::SampleTooSmall { n: ys.len(), min: 2 });
    }
    gaussian_kde(ys, grid, super_oracle_bandwidth(ys.len()))
}

/// Kernel estimate with a data-driven (Silverman) bandwidth.
pub fn kernel_sub_oracle(ys: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    gaussian_kde(ys, grid, silverman_bandwidth(ys)?)
}

/// The univariate EP density estimate from responses alone; the returned fit
/// has no interaction component and ignores `x`.
pub fn univariate_ep_density(ys: &[f64], schedule: &BlockSchedule) -> Result<CondDensityFit> {
    if ys.len() < crate::design::MIN_SAMPLE_SIZE {
        return Err(Error::SampleTooSmall {
            n: ys.len(),
            min: crate::design::MIN_SAMPLE_SIZE,
        });
    }
    fit_univariate(ys, schedule.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DesignKind;
    use crate::design::DesignSpec;
    use crate::model::{CharFn, CondDensityFn, ResponseDomain};
    use crate::schedule::build_schedule;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::sync::Arc;

    fn unit_uniform() -> TrueModel {
        let cd: CondDensityFn = Arc::new(|y, _| if (0.0..=1.0).contains(&y) { 1.0 } else { 0.0 });
        TrueModel::new(cd, DesignSpec::uniform(DesignKind::Random), None, ResponseDomain::UnitInterval).unwrap()
    }

    fn standard_normal() -> TrueModel {
        let cd: CondDensityFn = Arc::new(|y: f64, _| (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt());
        let ch: CharFn = Arc::new(|u: f64, _| Complex64::new((-0.5 * u * u).exp(), 0.0));
        TrueModel::new(cd, DesignSpec::uniform(DesignKind::Random), Some(ch), ResponseDomain::real_line()).unwrap()
    }

    #[test]
    fn uniform_truth_functionals() {
        let s = build_schedule(1000, Loss::Square, None).unwrap();
        let f = true_functionals(&unit_uniform(), &s).unwrap();
        assert_abs_diff_eq!(f.uni[0], 1.0, epsilon = 1e-10);
        assert!(f.uni[1..].iter().all(|v| v.abs() < 1e-10));
        assert!(f.bi.iter().all(|v| v.abs() < 1e-10));
        assert_abs_diff_eq!(f.difficulty, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn normal_truth_line_functional() {
        let s = build_schedule(1000, Loss::Line, None).unwrap();
        let f = true_functionals(&standard_normal(), &s).unwrap();
        // blocks [0,1) and [1,3): L^-1 int e^{-u^2}
        let erf = |x: f64| statrs::function::erf::erf(x);
        let half_root_pi = 0.5 * std::f64::consts::PI.sqrt();
        assert_abs_diff_eq!(f.uni[0], half_root_pi * erf(1.0), epsilon = 1e-7);
        assert_abs_diff_eq!(f.uni[1], half_root_pi * (erf(3.0) - erf(1.0)) / 2.0, epsilon = 1e-7);
        assert!(f.bi.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn oracle_weights_follow_wiener_rule() {
        let s = build_schedule(200, Loss::Square, None).unwrap();
        let model = unit_uniform();
        let f = true_functionals(&model, &s).unwrap();
        let spec = DesignSpec::uniform(DesignKind::Random);
        let x = crate::design::sample_random_design(&spec, 200, 4).unwrap();
        let y = crate::design::sample_random_design(&spec, 200, 5).unwrap();
        let data = SamplePairs::new(y, x, DesignKind::Random).unwrap();
        let oracle = oracle_fit_with(&data, &f, &s, None).unwrap();
        let ep = crate::estimator::fit(&data, Loss::Square, Some(s.clone()), None).unwrap();
        assert_relative_eq!(oracle.uni_weights()[0], 1.0 / (1.0 + 1.0 / 200.0), max_relative = 1e-9);
        // quadrature leaves ~1e-30 of signal in empty blocks
        assert!(oracle.uni_weights()[1..].iter().all(|w| *w < 1e-12));
        assert!(oracle.bi_weights().iter().all(|w| *w < 1e-12));
        assert_eq!(oracle.uni_energies(), ep.uni_energies());
        assert_eq!(oracle.difficulty(), ep.difficulty());
    }

    #[test]
    fn wiener_weight_minimises_surrogate_loss() {
        let (theta, noise, len) = (0.02, 0.01, 7.0);
        let loss = |c: f64| (1.0 - c) * (1.0 - c) * theta * len + c * c * len * noise;
        let best = theta / (theta + noise);
        for i in 0..=1000 {
            let c = i as f64 / 1000.0;
            assert!(loss(c) >= loss(best) - 1e-15);
        }
        assert_relative_eq!(crate::estimator::wiener_weight(theta, noise * 100.0, 100), best, max_relative = 1e-12);
    }

    #[test]
    fn mise_for_uniform_truth() {
        let s = build_schedule(1000, Loss::Square, None).unwrap();
        let m = oracle_mise_expression(&unit_uniform(), &s, None).unwrap();
        let mu = 1.0 / (1.0 + 1e-3);
        assert_relative_eq!(m.main, 1e-3 * mu, max_relative = 1e-8);
        assert!(m.tail.abs() < 1e-9);
        assert!(m.delta_star_bound > 0.0 && m.delta_bound > 0.0);
        assert!(!m.tail_overflow);
    }

    #[test]
    fn mise_line_loss_normal_truth() {
        let s = build_schedule(500, Loss::Line, None).unwrap();
        let m = oracle_mise_expression(&standard_normal(), &s, None).unwrap();
        // tail is int_{b_{K+1}}^inf e^{-u^2} du / pi, negligible for b = 25
        assert!(m.tail < 1e-12);
        assert!(m.main > 0.0);
        assert!(!m.tail_overflow);
        assert_abs_diff_eq!(Loss::Line.risk_constant(), std::f64::consts::FRAC_1_PI, epsilon = 1e-5);
    }

    #[test]
    fn main_term_monotone_in_signal() {
        let base = |scale: f64| {
            let cd: CondDensityFn = Arc::new(move |y: f64, x: f64| {
                if (0.0..=1.0).contains(&y) {
                    1.0 + scale * (std::f64::consts::PI * y).cos() * (std::f64::consts::PI * x).cos()
                } else {
                    0.0
                }
            });
            TrueModel::new(cd, DesignSpec::uniform(DesignKind::Random), None, ResponseDomain::UnitInterval).unwrap()
        };
        let s = build_schedule(500, Loss::Square, None).unwrap();
        let a = oracle_mise_expression(&base(0.1), &s, None).unwrap().main;
        let b = oracle_mise_expression(&base(0.5), &s, None).unwrap().main;
        assert!(b > a);
    }

    #[test]
    fn bandwidths() {
        assert_abs_diff_eq!(super_oracle_bandwidth(100), 0.421685, epsilon = 1e-6);
        assert_relative_eq!(super_oracle_bandwidth(3200) / super_oracle_bandwidth(100), 0.5, max_relative = 1e-14);
        let ideal: Vec<f64> = (1..=100)
            .map(|i| {
                use statrs::distribution::{ContinuousCDF, Normal};
                Normal::new(0.0, 1.0).unwrap().inverse_cdf((i as f64 - 0.5) / 100.0)
            })
            .collect();
        let h = silverman_bandwidth(&ideal).unwrap();
        assert!((h - 0.3583).abs() < 0.01, "bandwidth {h}");
        assert!(silverman_bandwidth(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn kernel_estimates_have_unit_mass() {
        let grid = crate::quadrature::linspace(-12.0, 12.0, 4801);
        let ys = [-1.0, 1.0, 0.3, 2.0];
        for est in [kernel_super_oracle(&ys, &grid).unwrap(), kernel_sub_oracle(&ys, &grid).unwrap()] {
            assert!(est.iter().all(|v| v.is_finite()));
            assert_abs_diff_eq!(crate::quadrature::simpson(&est, 0.005), 1.0, epsilon = 1e-6);
        }
        let at_zero = gaussian_kde(&[0.0], &[0.0], 1.0).unwrap();
        assert_abs_diff_eq!(at_zero[0], 0.3989422804, epsilon = 1e-9);
        assert!(kernel_sub_oracle(&[-1.0, 1.0, 0.0], &[0.0]).unwrap()[0].is_finite());
    }

    #[test]
    fn univariate_density_fit() {
        let s = build_schedule(100, Loss::Square, None).unwrap();
        let ys: Vec<f64> = (0..100).map(|i| 3.0 + i as f64).collect();
        let f = univariate_ep_density(&ys, &s).unwrap();
        assert_eq!(f.evaluate_response(0.4).unwrap(), 0.0);
        let ys: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let a = univariate_ep_density(&ys, &s).unwrap();
        let b = univariate_ep_density(&ys, &s).unwrap();
        assert_eq!(a, b);
        assert!((a.evaluate(0.5, 0.9).unwrap() - 1.0).abs() < 0.1);
        assert!(univariate_ep_density(&ys[..10], &s).is_err());
    }
}
