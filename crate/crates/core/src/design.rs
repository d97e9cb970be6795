//! Design densities: the truncated series estimate used inside the estimator,
//! declared design laws for simulation (fixed quantile and random designs),
//! and the optimal-design calculators.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DesignKind;
use crate::error::{check_unit, Error, Result};
use crate::fourier::{cosine_row, cosine_unchecked};
use crate::quadrature::{integrate, simpson_weights};

/// Anything that can be evaluated as a design density on [0, 1].
pub trait PredictorDensity: Send + Sync {
    fn density(&self, x: f64) -> f64;
}

/// A flat design density, mostly useful in tests and for univariate estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDensity(pub f64);

impl PredictorDensity for ConstantDensity {
    fn density(&self, _x: f64) -> f64 {
        self.0
    }
}

pub type Callable = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smallest sample size for which `1/lnln(n)` is below one.
pub const MIN_SAMPLE_SIZE: usize = 16;

/// `1 / ln(ln(n))`, the lower truncation level of the design estimate.
pub fn truncation_floor(n: usize) -> f64 {
    1.0 / (n as f64).ln().ln()
}

/// Largest `m` with `m^3 <= n`.
pub(crate) fn integer_cbrt(n: usize) -> usize {
    let mut m = (n as f64).cbrt().round() as usize;
    while m.pow(3) > n {
        m -= 1;
    }
    while (m + 1).pow(3) <= n {
        m += 1;
    }
    m
}

/// The untruncated series estimate `1 + sum_r c_r phi_r(x)`, `r = 1..=floor(n^(1/3))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotalDesign {
    coeffs: Vec<f64>,
}

impl PivotalDesign {
    pub fn from_samples(x: &[f64]) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::SampleTooSmall { n: x.len(), min: 2 });
        }
        for &xi in x {
            check_unit("design sample", xi)?;
        }
        let terms = integer_cbrt(x.len());
        let mut coeffs = vec![0.0; terms];
        let mut row = vec![0.0; terms + 1];
        for &xi in x {
            cosine_row(xi, &mut row);
            for (c, phi) in coeffs.iter_mut().zip(&row[1..]) {
                *c += phi;
            }
        }
        let n = x.len() as f64;
        coeffs.iter_mut().for_each(|c| *c /= n);
        Ok(PivotalDesign { coeffs })
    }

    /// `coeffs()[r - 1]` is the coefficient of `phi_r`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self, x: f64) -> f64 {
        1.0 + self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * cosine_unchecked(i + 1, x))
            .sum::<f64>()
    }
}

/// Design density estimate truncated from below at `1/lnln(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignDensityEstimate {
    pivotal: PivotalDesign,
    floor: f64,
    n: usize,
}

/// Fits the truncated series design estimate to predictor samples.
pub fn estimate_design(x: &[f64]) -> Result<DesignDensityEstimate> {
    if x.len() < MIN_SAMPLE_SIZE {
        return Err(Error::SampleTooSmall {
            n: x.len(),
            min: MIN_SAMPLE_SIZE,
        });
    }
    let pivotal = PivotalDesign::from_samples(x)?;
    Ok(DesignDensityEstimate {
        pivotal,
        floor: truncation_floor(x.len()),
        n: x.len(),
    })
}

impl DesignDensityEstimate {
    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        self.pivotal.coeffs()
    }

    /// Value of the untruncated series at `x`.
    pub fn pivotal(&self, x: f64) -> f64 {
        self.pivotal.value(x)
    }

    /// `integral_0^1 1/p(x) dx` of the truncated estimate.
    pub fn inverse_integral(&self) -> f64 {
        // kinks where the floor binds rule out Gauss rules; a fine Simpson grid is enough
        let nodes = 4097;
        let h = 1.0 / (nodes - 1) as f64;
        simpson_weights(nodes, h)
            .iter()
            .enumerate()
            .map(|(i, w)| w / self.density(i as f64 * h))
            .sum()
    }
}

impl PredictorDensity for DesignDensityEstimate {
    fn density(&self, x: f64) -> f64 {
        self.floor.max(self.pivotal.value(x))
    }
}

/// A design density declared by the experimenter.
#[derive(Clone)]
pub enum DesignDensity {
    Uniform,
    /// `1 + slope (x - 1/2)`, requires `|slope| < 2`.
    Linear { slope: f64 },
    Custom { label: String, pdf: Callable },
}

impl fmt::Debug for DesignDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignDensity::Uniform => f.write_str("Uniform"),
            DesignDensity::Linear { slope } => write!(f, "Linear {{ slope: {slope} }}"),
            DesignDensity::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl DesignDensity {
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            DesignDensity::Uniform => 1.0,
            DesignDensity::Linear { slope } => 1.0 + slope * (x - 0.5),
            DesignDensity::Custom { pdf, .. } => pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            DesignDensity::Uniform => x,
            DesignDensity::Linear { slope } => x + 0.5 * slope * (x * x - x),
            DesignDensity::Custom { pdf, .. } => integrate(0.0, x, |t| pdf(t)),
        }
    }
}

/// Tolerance used when a declared design density is checked for unit mass.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;

/// A design law together with how predictors are placed.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    kind: DesignKind,
    density: DesignDensity,
}

impl DesignSpec {
    pub fn new(kind: DesignKind, density: DesignDensity) -> Result<Self> {
        Self::with_tolerance(kind, density, NORMALIZATION_TOLERANCE)
    }

    pub fn with_tolerance(kind: DesignKind, density: DesignDensity, tolerance: f64) -> Result<Self> {
        if let DesignDensity::Linear { slope } = density {
            if !(slope.abs() < 2.0) {
                return Err(Error::InvalidArgument(format!(
                    "linear design slope {slope} must satisfy |slope| < 2"
                )));
            }
        }
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let v = density.pdf(x);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositive {
                    what: "design density",
                    value: v,
                    at: x,
                });
            }
        }
        let mass = integrate(0.0, 1.0, |x| density.pdf(x));
        if (mass - 1.0).abs() > tolerance {
            return Err(Error::InvalidArgument(format!(
                "design density integrates to {mass}, not 1"
            )));
        }
        Ok(DesignSpec { kind, density })
    }

    pub fn uniform(kind: DesignKind) -> Self {
        DesignSpec {
            kind,
            density: DesignDensity::Uniform,
        }
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn law(&self) -> &DesignDensity {
        &self.density
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.density, DesignDensity::Uniform)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.density.pdf(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.density.cdf(x)
    }

    /// Inverse CDF by bisection to `|F(x) - q| <= 1e-12`; the identity for the uniform law.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        check_unit("probability", q)?;
        if self.is_uniform() {
            return Ok(q);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let f = self.cdf(mid);
            if (f - q).abs() <= 1e-12 {
                return Ok(mid);
            }
            if f < q {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * 0.5 {
                return Ok(0.5 * (lo + hi));
            }
        }
        Err(Error::RootFinding(format!("design CDF inversion at q = {q}")))
    }
}

impl PredictorDensity for DesignSpec {
    fn density(&self, x: f64) -> f64 {
        self.pdf(x)
    }
}

/// Ordered quantile design: cell `[X_(l), X_(l+1)]` carries mass `1/(n+1)`.
pub fn generate_fixed_design(spec: &DesignSpec, n: usize) -> Result<Vec<f64>> {
    if spec.kind() != DesignKind::Fixed {
        return Err(Error::InvalidArgument(
            "fixed-design generation needs a fixed design spec".into(),
        ));
    }
    let denom = (n + 1) as f64;
    (1..=n).map(|l| spec.quantile(l as f64 / denom)).collect()
}

/// `n` independent inverse-CDF draws, reproducible from `seed`.
pub fn sample_random_design(spec: &DesignSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    if spec.kind() != DesignKind::Random {
        return Err(Error::InvalidArgument(
            "random-design sampling needs a random design spec".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_design_with(spec, n, &mut rng)
}

pub(crate) fn sample_design_with<R: Rng>(spec: &DesignSpec, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    (0..n).map(|_| spec.quantile(rng.random::<f64>())).collect()
}

/// What the experiment is optimised for.
#[derive(Clone)]
pub enum DesignTarget {
    /// Regression with scale function `sigma(x)`.
    Regression(Callable),
    /// Conditional density estimation with `mass(x) = integral_A f(y|x) dy`.
    ConditionalDensity(Callable),
}

/// A normalised optimal design density.
#[derive(Clone)]
pub struct OptimalDesign {
    source: Callable,
    power: f64,
    norm: f64,
}

impl fmt::Debug for OptimalDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OptimalDesign")
            .field("power", &self.power)
            .field("norm", &self.norm)
            .finish()
    }
}

impl OptimalDesign {
    pub fn density(&self, x: f64) -> f64 {
        (self.source)(x).powf(self.power) / self.norm
    }

    pub fn into_design_density(self) -> DesignDensity {
        let label = format!("optimal(power = {})", self.power);
        DesignDensity::Custom {
            label,
            pdf: Arc::new(move |x| self.density(x)),
        }
    }
}

impl PredictorDensity for OptimalDesign {
    fn density(&self, x: f64) -> f64 {
        OptimalDesign::density(self, x)
    }
}

/// `sigma / integral sigma` for regression, `sqrt(mass) / integral sqrt(mass)`
/// for conditional density estimation.
pub fn optimal_design(target: DesignTarget) -> Result<OptimalDesign> {
    let (source, power, what) = match target {
        DesignTarget::Regression(s) => (s, 1.0, "scale function"),
        DesignTarget::ConditionalDensity(m) => (m, 0.5, "conditional mass"),
    };
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        let v = source(x);
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositive { what, value: v, at: x });
        }
    }
    let norm = integrate(0.0, 1.0, |x| source(x).powf(power));
    Ok(OptimalDesign { source, power, norm })
}
