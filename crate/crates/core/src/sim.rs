//! Synthetic truths, dataset generation, integrated squared error and
//! convergence-rate regression.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::data::{DesignKind, Loss, SamplePairs};
use crate::design::{generate_fixed_design, sample_design_with, DesignSpec};
use crate::error::{Error, Result};
use crate::estimator::{CondDensityFit, DensityGrid};
use crate::schedule::BlockSchedule;
use crate::model::{CharFn, CondDensityFn, ResponseDomain, TrueModel};
use crate::quadrature::{linspace, simpson_weights, GaussLegendre};

/// Standardised error law `q`; responses are `m(x) + sigma(x) Z` with `Z ~ q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorLaw {
    /// N(0, 1).
    Normal,
    /// Density `exp(-|z|) / 2`.
    Laplace,
    /// U[0, 1].
    Uniform,
    /// N(0, 1) conditioned on `[lo, hi]`.
    TruncatedNormal { lo: f64, hi: f64 },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

impl ErrorLaw {
    fn validate(&self) -> Result<()> {
        if let ErrorLaw::TruncatedNormal { lo, hi } = *self {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "truncation interval [{lo}, {hi}] is empty"
                )));
            }
        }
        Ok(())
    }

    pub fn pdf(&self, z: f64) -> f64 {
        match *self {
            ErrorLaw::Normal => std_normal().pdf(z),
            ErrorLaw::Laplace => 0.5 * (-z.abs()).exp(),
            ErrorLaw::Uniform => {
                if (0.0..=1.0).contains(&z) {
                    1.0
                } else {
                    0.0
                }
            }
            ErrorLaw::TruncatedNormal { lo, hi } => {
                if (lo..=hi).contains(&z) {
                    let nd = std_normal();
                    nd.pdf(z) / (nd.cdf(hi) - nd.cdf(lo))
                } else {
                    0.0
                }
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            ErrorLaw::Normal => std_normal().cdf(z),
            ErrorLaw::Laplace => {
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            ErrorLaw::Uniform => z.clamp(0.0, 1.0),
            ErrorLaw::TruncatedNormal { lo, hi } => {
                let nd = std_normal();
                let (a, b) = (nd.cdf(lo), nd.cdf(hi));
                ((nd.cdf(z.clamp(lo, hi)) - a) / (b - a)).clamp(0.0, 1.0)
            }
        }
    }

    /// Inverse CDF on (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            ErrorLaw::Normal => std_normal().inverse_cdf(p),
            ErrorLaw::Laplace => {
                if p < 0.5 {
                    (2.0 * p).ln()
                } else {
                    -(2.0 * (1.0 - p)).ln()
                }
            }
            ErrorLaw::Uniform => p,
            ErrorLaw::TruncatedNormal { lo, hi } => {
                let nd = std_normal();
                let (a, b) = (nd.cdf(lo), nd.cdf(hi));
                nd.inverse_cdf(a + p * (b - a)).clamp(lo, hi)
            }
        }
    }

    /// Characteristic function `E exp(i u Z)`; the truncated normal is
    /// integrated over its support, where it is smooth.
    pub fn char_fn(&self, u: f64) -> Complex64 {
        match *self {
            ErrorLaw::Normal => Complex64::new((-0.5 * u * u).exp(), 0.0),
            ErrorLaw::Laplace => Complex64::new(1.0 / (1.0 + u * u), 0.0),
            ErrorLaw::Uniform => {
                if u.abs() < 1e-8 {
                    Complex64::new(1.0, 0.5 * u)
                } else {
                    (Complex64::new(0.0, u).exp() - 1.0) / Complex64::new(0.0, u)
                }
            }
            ErrorLaw::TruncatedNormal { lo, hi } => {
                let gl = GaussLegendre::new(8);
                let panels = ((hi - lo) * (4.0 + u.abs())).ceil().max(16.0) as usize;
                let re = gl.integrate(lo, hi, panels, |z| self.pdf(z) * (u * z).cos());
                let im = gl.integrate(lo, hi, panels, |z| self.pdf(z) * (u * z).sin());
                Complex64::new(re, im)
            }
        }
    }

    /// `(lo, hi)` covering all but a negligible tail of `q`.
    fn effective_support(&self) -> (f64, f64) {
        match *self {
            ErrorLaw::Normal => (-9.0, 9.0),
            ErrorLaw::Laplace => (-36.0, 36.0),
            ErrorLaw::Uniform => (0.0, 1.0),
            ErrorLaw::TruncatedNormal { lo, hi } => (lo, hi),
        }
    }
}

/// `c + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)` on [0, 1].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigPoly {
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        TrigPoly {
            constant: c,
            ..Default::default()
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.constant;
        for (k, a) in self.cos.iter().enumerate() {
            v += a * (TAU * (k + 1) as f64 * x).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            v += b * (TAU * (k + 1) as f64 * x).sin();
        }
        v
    }

    fn range(&self) -> (f64, f64) {
        (0..=2000)
            .map(|i| self.eval(i as f64 / 2000.0))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// How the conditional law depends on the predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// `Y = location + scale Z`, independent of `X`.
    Independent { law: ErrorLaw, location: f64, scale: f64 },
    /// `Y = m(X) + sigma(X) Z`.
    Additive { mean: TrigPoly, scale: TrigPoly, law: ErrorLaw },
}

/// A synthetic truth together with its design.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    kind: ModelKind,
    design: DesignSpec,
    domain: ResponseDomainKind,
    conditioned: bool,
}

/// Smallest admissible `P(Y in [0, 1] | x)` for a conditioned model.
pub const MIN_CONDITIONING_MASS: f64 = 1e-6;

/// Where responses are declared to live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseDomainKind {
    UnitInterval,
    RealLine,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, design: DesignSpec, domain: ResponseDomainKind) -> Result<Self> {
        let spec = ModelSpec {
            kind,
            design,
            domain,
            conditioned: false,
        };
        let law = spec.law();
        law.validate()?;
        let (lo, _) = spec.scale_poly().range();
        if !(lo > 0.0) {
            return Err(Error::NonPositive {
                what: "scale function",
                value: lo,
                at: f64::NAN,
            });
        }
        if domain == ResponseDomainKind::UnitInterval {
            let (ylo, yhi) = spec.response_range();
            if ylo < -1e-12 || yhi > 1.0 + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "responses range over [{ylo}, {yhi}], outside the declared unit interval"
                )));
            }
        }
        Ok(spec)
    }

    /// `Y ~ N(0, 1)` independent of a uniform random design.
    pub fn standard_normal_null() -> Self {
        ModelSpec {
            kind: ModelKind::Independent {
                law: ErrorLaw::Normal,
                location: 0.0,
                scale: 1.0,
            },
            design: DesignSpec::uniform(DesignKind::Random),
            domain: ResponseDomainKind::RealLine,
            conditioned: false,
        }
    }

    /// `Y ~ U[0, 1]` independent of a uniform random design.
    pub fn uniform_null() -> Self {
        ModelSpec {
            kind: ModelKind::Independent {
                law: ErrorLaw::Uniform,
                location: 0.0,
                scale: 1.0,
            },
            design: DesignSpec::uniform(DesignKind::Random),
            domain: ResponseDomainKind::UnitInterval,
            conditioned: false,
        }
    }

    /// The law of `Y` given `X = x` and `Y in [0, 1]`, for responses that
    /// may leave the unit interval.
    pub fn conditioned_on_unit(kind: ModelKind, design: DesignSpec) -> Result<Self> {
        let mut spec = ModelSpec::new(kind, design, ResponseDomainKind::RealLine)?;
        spec.domain = ResponseDomainKind::UnitInterval;
        spec.conditioned = true;
        let worst = (0..=200)
            .map(|i| spec.unit_window(i as f64 / 200.0).2)
            .fold(f64::INFINITY, f64::min);
        if !(worst > MIN_CONDITIONING_MASS) {
            return Err(Error::InvalidArgument(format!(
                "P(Y in [0, 1] | x) drops to {worst:e}"
            )));
        }
        Ok(spec)
    }

    /// Whether responses are conditioned on the unit interval.
    pub fn is_conditioned(&self) -> bool {
        self.conditioned
    }

    /// `(F(z_lo), F(z_hi), mass)` of the error law over `[0, 1]` at `x`.
    fn unit_window(&self, x: f64) -> (f64, f64, f64) {
        let law = self.law();
        let (m, s) = (self.mean_poly().eval(x), self.scale_poly().eval(x));
        let a = law.cdf(-m / s);
        let b = law.cdf((1.0 - m) / s);
        (a, b, b - a)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn design(&self) -> &DesignSpec {
        &self.design
    }

    pub fn domain(&self) -> ResponseDomainKind {
        self.domain
    }

    fn law(&self) -> ErrorLaw {
        match &self.kind {
            ModelKind::Independent { law, .. } | ModelKind::Additive { law, .. } => *law,
        }
    }

    fn mean_poly(&self) -> TrigPoly {
        match &self.kind {
            ModelKind::Independent { location, .. } => TrigPoly::constant(*location),
            ModelKind::Additive { mean, .. } => mean.clone(),
        }
    }

    fn scale_poly(&self) -> TrigPoly {
        match &self.kind {
            ModelKind::Independent { scale, .. } => TrigPoly::constant(*scale),
            ModelKind::Additive { scale, .. } => scale.clone(),
        }
    }

    /// Range of responses with non-negligible probability.
    fn response_range(&self) -> (f64, f64) {
        let (mlo, mhi) = self.mean_poly().range();
        let (_, shi) = self.scale_poly().range();
        let (zlo, zhi) = self.law().effective_support();
        let a = if zlo < 0.0 { zlo * shi } else { 0.0 };
        let b = if zhi > 0.0 { zhi * shi } else { 0.0 };
        (mlo + a, mhi + b)
    }

    /// The conditional density, characteristic function and design as a truth.
    pub fn true_model(&self) -> Result<TrueModel> {
        if self.conditioned {
            let spec = self.clone();
            let cd: CondDensityFn = Arc::new(move |y, x| {
                if !(0.0..=1.0).contains(&y) {
                    return 0.0;
                }
                let (m, s) = (spec.mean_poly().eval(x), spec.scale_poly().eval(x));
                spec.law().pdf((y - m) / s) / (s * spec.unit_window(x).2)
            });
            return Ok(TrueModel::normalised(cd, self.design.clone(), None, ResponseDomain::UnitInterval));
        }
        let law = self.law();
        let mean = self.mean_poly();
        let scale = self.scale_poly();
        let (m1, s1) = (mean.clone(), scale.clone());
        let cd: CondDensityFn = Arc::new(move |y, x| {
            let s = s1.eval(x);
            law.pdf((y - m1.eval(x)) / s) / s
        });
        let ch: CharFn = Arc::new(move |u, x| {
            let s = scale.eval(x);
            Complex64::new(0.0, u * mean.eval(x)).exp() * law.char_fn(s * u)
        });
        let domain = match self.domain {
            ResponseDomainKind::UnitInterval => ResponseDomain::UnitInterval,
            ResponseDomainKind::RealLine => {
                let (lo, hi) = self.response_range();
                ResponseDomain::RealLine { lo, hi }
            }
        };
        Ok(TrueModel::normalised(cd, self.design.clone(), Some(ch), domain))
    }
}

/// Uniform on the open interval (0, 1) from 53 random bits.
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Draws `n` pairs: predictors first (fixed quantiles or random draws), then
/// responses by inverse CDF, all from one ChaCha8 stream seeded by `seed`.
pub fn generate_dataset(model: &ModelSpec, n: usize, seed: u64) -> Result<SamplePairs> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = model.design();
    let x = match design.kind() {
        DesignKind::Fixed => generate_fixed_design(design, n)?,
        DesignKind::Random => sample_design_with(design, n, &mut rng)?,
    };
    let law = model.law();
    let mean = model.mean_poly();
    let scale = model.scale_poly();
    let y = x
        .iter()
        .map(|&xi| {
            let p = open_unit(&mut rng);
            let (m, s) = (mean.eval(xi), scale.eval(xi));
            if model.conditioned {
                let (a, b, _) = model.unit_window(xi);
                (m + s * law.quantile(a + p * (b - a))).clamp(0.0, 1.0)
            } else {
                m + s * law.quantile(p)
            }
        })
        .collect();
    SamplePairs::new(y, x, design.kind())
}

/// Rectangle and resolution for ISE quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IseGrid {
    pub y_lo: f64,
    pub y_hi: f64,
    pub ny: usize,
    pub nx: usize,
}

/// Default half-width of the line-loss response window.
pub const DEFAULT_Y_WINDOW: f64 = 8.0;
/// Minimum grid nodes per axis.
pub const MIN_GRID_NODES: usize = 257;
/// Truth mass allowed outside the line-loss window before a warning.
pub const TAIL_MASS_TOLERANCE: f64 = 1e-6;

impl IseGrid {
    /// Unit square for the square loss, `[-window, window] x [0, 1]` for the
    /// line loss, with at least 16 nodes per period of the highest frequency
    /// the schedule can retain.
    pub fn for_schedule(schedule: &BlockSchedule, window: f64) -> Self {
        let nx = MIN_GRID_NODES.max(8 * schedule.bi_extent() + 1);
        let top = schedule.uni_extent().max(schedule.bi_extent());
        match schedule.loss() {
            Loss::Square => IseGrid {
                y_lo: 0.0,
                y_hi: 1.0,
                ny: MIN_GRID_NODES.max(8 * top + 1),
                nx,
            },
            Loss::Line => {
                let dy = TAU / (16.0 * top.max(1) as f64);
                IseGrid {
                    y_lo: -window,
                    y_hi: window,
                    ny: MIN_GRID_NODES.max((2.0 * window / dy).ceil() as usize + 1),
                    nx,
                }
            }
        }
    }

    pub fn for_fit(fit: &CondDensityFit, window: f64) -> Self {
        Self::for_schedule(fit.schedule(), window)
    }

    /// Same rectangle with the step halved on both axes.
    pub fn refined(&self) -> Self {
        IseGrid {
            ny: 2 * self.ny - 1,
            nx: 2 * self.nx - 1,
            ..*self
        }
    }

    pub fn ys(&self) -> Vec<f64> {
        linspace(self.y_lo, self.y_hi, self.ny)
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(0.0, 1.0, self.nx)
    }
}

fn step_of(v: &[f64]) -> Result<f64> {
    if v.len() < 2 {
        return Err(Error::InvalidArgument("grid needs at least two nodes per axis".into()));
    }
    let h = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
    if v.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0)) {
        return Err(Error::InvalidArgument("ISE grids must be uniform".into()));
    }
    Ok(h)
}

/// Warns when the truth puts more than [`TAIL_MASS_TOLERANCE`] outside `[lo, hi]`.
fn audit_tail_mass(truth: &TrueModel, lo: f64, hi: f64) -> f64 {
    let mut worst = 0.0f64;
    for &x in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let inside = GaussLegendre::new(8).integrate(lo, hi, 256, |y| truth.cd(y, x));
        worst = worst.max(truth.response_mass(x) - inside);
    }
    if worst > TAIL_MASS_TOLERANCE {
        log::warn!("truth mass {worst:e} lies outside the ISE window [{lo}, {hi}]");
    }
    worst
}

/// Tensor composite Simpson ISE of gridded estimates against the truth.
pub fn ise(estimate: &DensityGrid, truth: &TrueModel) -> Result<f64> {
    let hy = step_of(&estimate.ys)?;
    let hx = step_of(&estimate.xs)?;
    if estimate.values.len() != estimate.ys.len() * estimate.xs.len() {
        return Err(Error::InvalidArgument("grid values do not match its axes".into()));
    }
    if truth.domain() != ResponseDomain::UnitInterval {
        audit_tail_mass(truth, estimate.ys[0], estimate.ys[estimate.ys.len() - 1]);
    }
    let wy = simpson_weights(estimate.ys.len(), hy);
    let wx = simpson_weights(estimate.xs.len(), hx);
    let mut total = 0.0;
    for (iy, (&y, w1)) in estimate.ys.iter().zip(&wy).enumerate() {
        for (ix, (&x, w2)) in estimate.xs.iter().zip(&wx).enumerate() {
            let d = estimate.get(iy, ix) - truth.cd(y, x);
            total += w1 * w2 * d * d;
        }
    }
    Ok(total)
}

/// ISE of a fit on `grid`.
pub fn fit_ise(fit: &CondDensityFit, truth: &TrueModel, grid: &IseGrid) -> Result<f64> {
    ise(&fit.evaluate_grid(&grid.ys(), &grid.xs())?, truth)
}

/// ISE of a response-only estimate `g(y)` given on `grid.ys()`, compared with
/// `f(y|x)` over the whole rectangle.
pub fn response_ise(values: &[f64], truth: &TrueModel, grid: &IseGrid) -> Result<f64> {
    let ys = grid.ys();
    if values.len() != ys.len() {
        return Err(Error::InvalidArgument("one value per response node expected".into()));
    }
    let xs = grid.xs();
    let mut v = Vec::with_capacity(ys.len() * xs.len());
    for g in values {
        v.extend(std::iter::repeat_n(*g, xs.len()));
    }
    ise(&DensityGrid { ys, xs, values: v }, truth)
}

/// Least-squares fit of `ln(ISE)` on `ln(n)`, returning `(slope, intercept)`.
pub fn rate_regression(points: &[(usize, f64)]) -> Result<(f64, f64)> {
    let mut distinct: Vec<usize> = points.iter().map(|p| p.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Degenerate(format!(
            "rate regression needs 3 distinct sample sizes, got {}",
            distinct.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(Error::NonPositive {
            what: "ISE",
            value: p.1,
            at: p.0 as f64,
        });
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Normal-density helper used by tests and configs: `exp(-z^2/2)/sqrt(2 pi)`.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}
