//! Sharp minimax risk: coefficients of difficulty, Pinsker constants, the
//! anisotropic J-integrals, closed-form class risks and the series risk
//! obtained from the `eta` equation.

use std::f64::consts::PI;

use crate::data::Loss;
use crate::error::{Error, Result};
use crate::model::TrueModel;
use crate::quadrature::{tanh_sinh_unit, GaussLegendre};

/// Smoothness class of the conditional density, in coefficient form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassKind {
    /// Anisotropic Sobolev: `m_y` derivatives in the response, `m_x` in the predictor.
    Sobolev { m_y: u32, m_x: u32 },
    /// Analytic in the response with width `gamma`, Sobolev of order `m_x` in the predictor.
    AnalyticSobolev { gamma: f64, m_x: u32 },
    /// Analytic in both directions.
    Analytic { gamma_y: f64, gamma_x: f64 },
    /// Univariate Sobolev density class of order `alpha`.
    UniSobolev { alpha: u32 },
    /// Univariate analytic density class.
    UniAnalytic { gamma: f64 },
    /// Univariate densities whose spectrum is confined to `q` frequencies.
    BoundedSpectrum { q: f64 },
}

/// A smoothness class with its radius `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessClass {
    kind: ClassKind,
    radius: f64,
}

impl SmoothnessClass {
    pub fn new(kind: ClassKind, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonPositive {
                what: "class radius Q",
                value: radius,
                at: 0.0,
            });
        }
        let bad = |what: &'static str, v: f64| Err(Error::NonPositive { what, value: v, at: 0.0 });
        match kind {
            ClassKind::Sobolev { m_y, m_x } if m_y == 0 || m_x == 0 => {
                return Err(Error::InvalidArgument("Sobolev orders must be positive integers".into()))
            }
            ClassKind::UniSobolev { alpha: 0 } | ClassKind::AnalyticSobolev { m_x: 0, .. } => {
                return Err(Error::InvalidArgument("Sobolev orders must be positive integers".into()))
            }
            ClassKind::AnalyticSobolev { gamma, .. } | ClassKind::UniAnalytic { gamma } if !(gamma > 0.0) => {
                return bad("analytic width gamma", gamma)
            }
            ClassKind::Analytic { gamma_y, gamma_x } if !(gamma_y > 0.0 && gamma_x > 0.0) => {
                return bad("analytic width gamma", gamma_y.min(gamma_x))
            }
            ClassKind::BoundedSpectrum { q } if !(q > 0.0) => return bad("spectrum size q", q),
            _ => {}
        }
        Ok(SmoothnessClass { kind, radius })
    }

    pub fn sobolev(m_y: u32, m_x: u32, radius: f64) -> Result<Self> {
        Self::new(ClassKind::Sobolev { m_y, m_x }, radius)
    }

    pub fn kind(&self) -> ClassKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Risk quantities for one class, difficulty and sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub coefficient_of_difficulty: f64,
    /// Sharp constant, where the class has one.
    pub pinsker: Option<f64>,
    pub risk_closed_form: f64,
    pub risk_series: Option<f64>,
    pub eta: Option<f64>,
    /// Relative residual of the `eta` equation.
    pub eta_residual: Option<f64>,
}

/// `d(f, p)`: `int int_[0,1]^2 f(y|x) / p(x)` for the square loss and
/// `int_0^1 1 / p(x)` for the line loss.
pub fn coefficient_of_difficulty(model: &TrueModel, loss: Loss) -> Result<f64> {
    let gl = GaussLegendre::new(8);
    let design = model.design();
    let mut bad = None;
    let inv_p = |x: f64, bad: &mut Option<f64>| {
        let p = design.pdf(x);
        if !(p > 1e-12) {
            *bad = Some(x);
        }
        1.0 / p
    };
    let d = match loss {
        Loss::Line => gl.integrate(0.0, 1.0, 128, |x| inv_p(x, &mut bad)),
        Loss::Square => gl.integrate(0.0, 1.0, 64, |x| model.unit_mass(x) * inv_p(x, &mut bad)),
    };
    if let Some(x) = bad {
        return Err(Error::Quadrature(format!("design density vanishes near x = {x}")));
    }
    if !d.is_finite() {
        return Err(Error::Quadrature("coefficient of difficulty is not finite".into()));
    }
    Ok(d)
}

fn pinsker_real(m: f64) -> f64 {
    let e = 2.0 * m + 1.0;
    e.powf(1.0 / e) * (m / (PI * (m + 1.0))).powf(2.0 * m / e)
}

/// Univariate Pinsker constant `P(m)`.
pub fn pinsker_uni(m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("Pinsker order must be at least 1".into()));
    }
    Ok(pinsker_real(m as f64))
}

/// `tau` with `1/(2 tau) = 1/(2 alpha) + 1/(2 beta)`.
pub fn effective_smoothness(alpha: f64, beta: f64) -> f64 {
    alpha * beta / (alpha + beta)
}

/// `(J1, J2)`: integrals of `sqrt(s) - s` and `1 - sqrt(s)` with
/// `s = u^(2 alpha) + v^(2 beta)` over `{s <= 1, u, v >= 0}`.
pub fn j_integrals(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::NonPositive {
            what: "smoothness",
            value: alpha.min(beta),
            at: 0.0,
        });
    }
    // v = (1 - u^(2a))^(1/(2b)) t maps the region onto the unit square
    let rule = tanh_sinh_unit(1.0 / 64.0);
    let (mut j1, mut j2) = (0.0, 0.0);
    for nu in &rule {
        let ua = nu.x.powf(2.0 * alpha);
        // 1 - u^(2a) without cancellation near u = 1
        let rest = -(2.0 * alpha * (-nu.one_minus_x).ln_1p()).exp_m1();
        let height = rest.powf(1.0 / (2.0 * beta));
        for nt in &rule {
            let s = ua + rest * nt.x.powf(2.0 * beta);
            let w = nu.weight * nt.weight * height;
            let root = s.sqrt();
            j1 += w * (root - s);
            j2 += w * (1.0 - root);
        }
    }
    if !(j1 > 0.0 && j2 > 0.0 && j1.is_finite() && j2.is_finite()) {
        return Err(Error::Quadrature(format!(
            "J-integrals did not converge for alpha = {alpha}, beta = {beta}"
        )));
    }
    Ok((j1, j2))
}

/// Anisotropic Pinsker constant `pi^(-4tau/(2tau+1)) J1^(-1/(2tau+1)) J2`.
pub fn pinsker_aniso(alpha: f64, beta: f64) -> Result<f64> {
    // symmetric in (alpha, beta); a fixed argument order makes it bitwise so
    let (alpha, beta) = if alpha <= beta { (alpha, beta) } else { (beta, alpha) };
    let (j1, j2) = j_integrals(alpha, beta)?;
    let tau = effective_smoothness(alpha, beta);
    let e = 2.0 * tau + 1.0;
    Ok(PI.powf(-4.0 * tau / e) * j1.powf(-1.0 / e) * j2)
}

/// Closed-form sharp risk of `class` at difficulty `d` and sample size `n`.
///
/// The bounded-spectrum value is an upper bound up to an unspecified constant,
/// reported with that constant set to 1.
pub fn class_risk(class: &SmoothnessClass, difficulty: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    if !(difficulty > 0.0) || !difficulty.is_finite() {
        return Err(Error::NonPositive {
            what: "difficulty",
            value: difficulty,
            at: 0.0,
        });
    }
    let nf = n as f64;
    let q = class.radius;
    let dn = difficulty / nf;
    Ok(match class.kind {
        ClassKind::Sobolev { m_y, m_x } => {
            let tau = effective_smoothness(m_y as f64, m_x as f64);
            let e = 2.0 * tau + 1.0;
            pinsker_aniso(m_y as f64, m_x as f64)? * q.powf(1.0 / e) * dn.powf(2.0 * tau / e)
        }
        ClassKind::AnalyticSobolev { gamma, m_x } => {
            let m = m_x as f64;
            let e = 2.0 * m + 1.0;
            let log_factor = 2.0 * m * nf.ln() / (e * PI * gamma);
            pinsker_real(m) * q.powf(1.0 / e) * dn.powf(2.0 * m / e) * log_factor.powf(2.0 * m / e)
        }
        ClassKind::Analytic { gamma_y, gamma_x } => dn * nf.ln().powi(2) / (PI * gamma_y * gamma_x),
        ClassKind::UniSobolev { alpha } => {
            let m = alpha as f64;
            let e = 2.0 * m + 1.0;
            pinsker_real(m) * q.powf(1.0 / e) * dn.powf(2.0 * m / e)
        }
        ClassKind::UniAnalytic { gamma } => difficulty * nf.ln() / (PI * gamma * nf),
        ClassKind::BoundedSpectrum { q: spectrum } => spectrum * dn,
    })
}

/// Sharp constant of the class, if it has one.
pub fn class_constant(class: &SmoothnessClass) -> Result<Option<f64>> {
    Ok(match class.kind {
        ClassKind::Sobolev { m_y, m_x } => Some(pinsker_aniso(m_y as f64, m_x as f64)?),
        ClassKind::AnalyticSobolev { m_x, .. } => Some(pinsker_real(m_x as f64)),
        ClassKind::UniSobolev { alpha } => Some(pinsker_real(alpha as f64)),
        ClassKind::Analytic { .. } | ClassKind::UniAnalytic { .. } | ClassKind::BoundedSpectrum { .. } => None,
    })
}

/// Solution of the `eta` equation with the resulting series risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSolution {
    pub eta: f64,
    pub series_risk: f64,
    /// `|S(eta) - Qn/d| / (Qn/d)`.
    pub residual: f64,
}

type WeightFn = Box<dyn Fn(usize, usize) -> f64>;

/// Sequence weights `a_jr` of a class (`a_00 = 0`); univariate classes ignore `r`.
fn sequence_weight(kind: ClassKind) -> Result<(bool, WeightFn)> {
    Ok(match kind {
        ClassKind::Sobolev { m_y, m_x } => (
            true,
            Box::new(move |j, r| (PI * j as f64).powi(2 * m_y as i32) + (PI * r as f64).powi(2 * m_x as i32)),
        ),
        ClassKind::AnalyticSobolev { gamma, m_x } => (
            true,
            Box::new(move |j, r| {
                if j + r == 0 {
                    0.0
                } else {
                    (PI * gamma * j as f64).exp() + (PI * r as f64).powi(2 * m_x as i32)
                }
            }),
        ),
        ClassKind::Analytic { gamma_y, gamma_x } => (
            true,
            Box::new(move |j, r| {
                if j + r == 0 {
                    0.0
                } else {
                    (PI * gamma_y * j as f64).exp() + (gamma_x * r as f64).exp()
                }
            }),
        ),
        ClassKind::UniSobolev { alpha } => (false, Box::new(move |j, _| (PI * j as f64).powi(2 * alpha as i32))),
        other => {
            return Err(Error::InvalidArgument(format!(
                "no series risk for class {other:?}"
            )))
        }
    })
}

/// Sums `(f(a), g(a))` over every index with `a < limit`; `a` is increasing
/// in each index so the scan stops at the first excess.
fn lattice_sums(bivariate: bool, a: &dyn Fn(usize, usize) -> f64, limit: f64, eta: f64) -> (f64, f64) {
    let (mut s, mut risk) = (0.0, 0.0);
    let mut j = 0usize;
    loop {
        if a(j, 0) >= limit {
            break;
        }
        let mut r = 0usize;
        loop {
            let v = a(j, r);
            if v >= limit {
                break;
            }
            s += (v / eta).sqrt() - v;
            risk += 1.0 - (v * eta).sqrt();
            if !bivariate {
                break;
            }
            r += 1;
        }
        j += 1;
    }
    (s, risk)
}

/// Solves `sum ([a_jr/eta]^(1/2) - a_jr)_+ = Qn/d` by log-space bisection and
/// returns `R* = (d/n) sum (1 - [a_jr eta]^(1/2))_+`.
pub fn solve_eta(class: &SmoothnessClass, difficulty: f64, n: usize) -> Result<EtaSolution> {
    if n < 1 {
        return Err(Error::SampleTooSmall { n, min: 1 });
    }
    if !(difficulty > 0.0) {
        return Err(Error::NonPositive {
            what: "difficulty",
            value: difficulty,
            at: 0.0,
        });
    }
    let (bivariate, a) = sequence_weight(class.kind)?;
    let target = class.radius * n as f64 / difficulty;
    let lhs = |eta: f64| lattice_sums(bivariate, a.as_ref(), 1.0 / eta, eta).0;

    let mut hi = 1.0f64;
    let mut steps = 0;
    while lhs(hi) >= target {
        hi *= 2.0;
        steps += 1;
        if steps > 2000 {
            return Err(Error::RootFinding("could not bracket eta from above".into()));
        }
    }
    let mut lo = hi;
    steps = 0;
    while lhs(lo) <= target {
        lo *= 0.5;
        steps += 1;
        if steps > 2000 || lo == 0.0 {
            return Err(Error::RootFinding("could not bracket eta from below".into()));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if lhs(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let eta = (lo * hi).sqrt();
    let (s, risk) = lattice_sums(bivariate, a.as_ref(), 1.0 / eta, eta);
    let residual = (s - target).abs() / target;
    if residual > 1e-6 {
        return Err(Error::RootFinding(format!(
            "eta equation residual {residual:e} exceeds 1e-6"
        )));
    }
    Ok(EtaSolution {
        eta,
        series_risk: difficulty / n as f64 * risk,
        residual,
    })
}

/// Closed-form risk plus, for classes with a sequence form, the series risk.
pub fn risk_report(class: &SmoothnessClass, difficulty: f64, n: usize) -> Result<RiskReport> {
    let closed = class_risk(class, difficulty, n)?;
    let series = match class.kind {
        ClassKind::Sobolev { .. }
        | ClassKind::AnalyticSobolev { .. }
        | ClassKind::Analytic { .. }
        | ClassKind::UniSobolev { .. } => Some(solve_eta(class, difficulty, n)?),
        _ => None,
    };
    Ok(RiskReport {
        coefficient_of_difficulty: difficulty,
        pinsker: class_constant(class)?,
        risk_closed_form: closed,
        risk_series: series.map(|s| s.series_risk),
        eta: series.map(|s| s.eta),
        eta_residual: series.map(|s| s.residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DesignKind;
    use crate::design::{DesignDensity, DesignSpec};
    use crate::model::{CondDensityFn, ResponseDomain};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::sync::Arc;

    /// Closed form via `a = u^(2 alpha)`, `b = v^(2 beta)` and simplex polar
    /// coordinates: `J = B(1/(2a), 1/(2b)) / (4ab) * int_0^1 g(s) s^(c-1) ds`.
    fn beta_oracle(alpha: f64, beta: f64) -> (f64, f64) {
        let (p, q) = (0.5 / alpha, 0.5 / beta);
        let c = p + q;
        let b = statrs::function::beta::beta(p, q);
        let scale = b / (4.0 * alpha * beta);
        (scale * (1.0 / (c + 0.5) - 1.0 / (c + 1.0)), scale * (1.0 / c - 1.0 / (c + 0.5)))
    }

    #[test]
    fn j_integrals_match_polar_closed_form() {
        let (j1, j2) = j_integrals(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(j1, PI / 24.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j2, PI / 12.0, epsilon = 1e-8);
    }

    #[test]
    fn j_integrals_match_beta_oracle_on_grid() {
        for &a in &[0.5, 1.0, 2.0, 4.0] {
            for &b in &[0.5, 1.0, 2.0, 4.0] {
                let (j1, j2) = j_integrals(a, b).unwrap();
                let (o1, o2) = beta_oracle(a, b);
                assert_abs_diff_eq!(j1, o1, epsilon = 1e-8);
                assert_abs_diff_eq!(j2, o2, epsilon = 1e-8);
                assert!(j2 > j1);
            }
        }
    }

    #[test]
    fn pinsker_values() {
        assert_abs_diff_eq!(pinsker_uni(1).unwrap(), 3f64.cbrt() * (2.0 * PI).powf(-2.0 / 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(pinsker_uni(1).unwrap(), 0.423565, epsilon = 1e-6);
        assert_abs_diff_eq!(pinsker_uni(2).unwrap(), 0.399210, epsilon = 1e-6);
        assert!(pinsker_uni(2).unwrap() < pinsker_uni(1).unwrap());
        assert_abs_diff_eq!(pinsker_aniso(1.0, 1.0).unwrap(), 0.23033, epsilon = 1e-5);
        assert_eq!(pinsker_aniso(1.0, 3.0).unwrap(), pinsker_aniso(1.0, 3.0).unwrap());
        assert_relative_eq!(pinsker_aniso(1.0, 2.0).unwrap(), pinsker_aniso(2.0, 1.0).unwrap(), max_relative = 1e-12);
        assert_abs_diff_eq!(effective_smoothness(1.0, 2.0), 2.0 / 3.0, epsilon = 1e-15);
        assert!(pinsker_uni(0).is_err());
    }

    #[test]
    fn class_risk_examples() {
        let n = 22027;
        let analytic = SmoothnessClass::new(ClassKind::Analytic { gamma_y: 1.0, gamma_x: 1.0 }, 1.0).unwrap();
        let nf = n as f64;
        assert_relative_eq!(class_risk(&analytic, 1.0, n).unwrap(), nf.ln().powi(2) / (PI * nf), max_relative = 1e-12);
        assert_abs_diff_eq!(class_risk(&analytic, 1.0, n).unwrap(), 1.4451e-3, epsilon = 1e-6);
        let sob = SmoothnessClass::sobolev(1, 1, 1.0).unwrap();
        assert_abs_diff_eq!(class_risk(&sob, 1.0, 10_000).unwrap(), 2.3033e-3, epsilon = 1e-7);
        let ua = SmoothnessClass::new(ClassKind::UniAnalytic { gamma: 1.0 }, 1.0).unwrap();
        assert_abs_diff_eq!(class_risk(&ua, 1.0, n).unwrap(), 1.4451e-4, epsilon = 1e-7);
        assert!(class_risk(&sob, 0.0, 100).is_err());
    }

    #[test]
    fn sobolev_rate_exponents() {
        let (a, b) = (1.0, 1.0);
        let t = effective_smoothness(a, b);
        assert_eq!(2.0 * t / (2.0 * t + 1.0), 0.5);
        let t = effective_smoothness(2.0, 2.0);
        assert_abs_diff_eq!(2.0 * t / (2.0 * t + 1.0), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn class_risk_monotonicity() {
        for (my, mx) in [(1, 1), (1, 2), (2, 2), (3, 1)] {
            let c1 = SmoothnessClass::sobolev(my, mx, 1.0).unwrap();
            let c2 = SmoothnessClass::sobolev(my, mx, 2.0).unwrap();
            let mut prev = f64::INFINITY;
            for n in [100, 1000, 10_000, 100_000] {
                let r = class_risk(&c1, 1.0, n).unwrap();
                assert!(r < prev);
                prev = r;
                assert!(class_risk(&c2, 1.0, n).unwrap() > r);
                assert!(class_risk(&c1, 1.5, n).unwrap() > r);
            }
        }
    }

    #[test]
    fn eta_residual_and_degenerate_limit() {
        let sob = SmoothnessClass::sobolev(1, 1, 1.0).unwrap();
        let sol = solve_eta(&sob, 1.0, 10_000).unwrap();
        assert!(sol.residual <= 1e-6);
        // hand evaluation of the defining sum at the returned eta
        let n_inv = 1.0 / sol.eta;
        let mut s = 0.0;
        for j in 0..200 {
            for r in 0..200 {
                let a = (PI * j as f64).powi(2) + (PI * r as f64).powi(2);
                if a < n_inv {
                    s += (a / sol.eta).sqrt() - a;
                }
            }
        }
        assert_relative_eq!(s, 10_000.0, max_relative = 1e-6);

        let tiny = SmoothnessClass::sobolev(1, 1, 1e-6).unwrap();
        let sol = solve_eta(&tiny, 1.0, 10).unwrap();
        assert_relative_eq!(sol.series_risk, 0.1, max_relative = 1e-3);
    }

    #[test]
    fn series_risk_for_univariate_class() {
        let c = SmoothnessClass::new(ClassKind::UniSobolev { alpha: 2 }, 1.0).unwrap();
        let sol = solve_eta(&c, 1.0, 1_000_000).unwrap();
        let closed = class_risk(&c, 1.0, 1_000_000).unwrap();
        assert!((sol.series_risk / closed - 1.0).abs() < 0.1);
        let bs = SmoothnessClass::new(ClassKind::BoundedSpectrum { q: 3.0 }, 1.0).unwrap();
        assert!(solve_eta(&bs, 1.0, 100).is_err());
    }

    #[test]
    fn class_validation() {
        assert!(SmoothnessClass::sobolev(0, 1, 1.0).is_err());
        assert!(SmoothnessClass::sobolev(1, 1, -1.0).is_err());
        assert!(SmoothnessClass::new(ClassKind::UniAnalytic { gamma: 0.0 }, 1.0).is_err());
    }

    #[test]
    fn difficulty_examples() {
        let cd: CondDensityFn = Arc::new(|y, _| if (0.0..=1.0).contains(&y) { 1.0 } else { 0.0 });
        let uniform = TrueModel::new(cd.clone(), DesignSpec::uniform(DesignKind::Random), None, ResponseDomain::UnitInterval).unwrap();
        assert_abs_diff_eq!(coefficient_of_difficulty(&uniform, Loss::Square).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(coefficient_of_difficulty(&uniform, Loss::Line).unwrap(), 1.0, epsilon = 1e-12);
        let lin = DesignSpec::new(DesignKind::Random, DesignDensity::Linear { slope: 2.0 / 3.0 }).unwrap();
        let m = TrueModel::new(cd, lin, None, ResponseDomain::UnitInterval).unwrap();
        assert_abs_diff_eq!(coefficient_of_difficulty(&m, Loss::Line).unwrap(), 1.5 * 2f64.ln(), epsilon = 1e-10);
    }
}
