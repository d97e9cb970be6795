//! Known conditional densities used as ground truth by the oracles, risk
//! calculators and the simulation lab.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// `f(y | x)`, called as `cd(y, x)`.
pub type CondDensityFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `h(u | x) = integral f(y|x) exp(i u y) dy`, called as `ch(u, x)`.
pub type CharFn = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// Where the response lives. On the real line a finite window stands in for
/// the whole axis whenever an integral over `y` has to be computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseDomain {
    UnitInterval,
    RealLine { lo: f64, hi: f64 },
}

impl ResponseDomain {
    pub const DEFAULT_WINDOW: f64 = 8.0;

    pub fn real_line() -> Self {
        ResponseDomain::RealLine {
            lo: -Self::DEFAULT_WINDOW,
            hi: Self::DEFAULT_WINDOW,
        }
    }

    pub fn window(&self) -> (f64, f64) {
        match *self {
            ResponseDomain::UnitInterval => (0.0, 1.0),
            ResponseDomain::RealLine { lo, hi } => (lo, hi),
        }
    }
}

/// Tolerance of the unit-mass check performed at construction.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// A conditional density with its design law.
///
/// Callables must be safe to invoke concurrently.
#[derive(Clone)]
pub struct TrueModel {
    cd: CondDensityFn,
    design: DesignSpec,
    ch: Option<CharFn>,
    domain: ResponseDomain,
}

impl fmt::Debug for TrueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrueModel")
            .field("design", &self.design)
            .field("has_char", &self.ch.is_some())
            .field("domain", &self.domain)
            .finish()
    }
}

impl TrueModel {
    pub fn new(
        cd: CondDensityFn,
        design: DesignSpec,
        ch: Option<CharFn>,
        domain: ResponseDomain,
    ) -> Result<Self> {
        let model = TrueModel {
            cd,
            design,
            ch,
            domain,
        };
        for &x in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let mass = model.response_mass(x);
            if (mass - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "f(.|x = {x}) integrates to {mass} over the response window"
                )));
            }
        }
        Ok(model)
    }

    /// Skips the mass check; for truths normalised in closed form whose
    /// jumps defeat the quadrature check.
    pub(crate) fn normalised(
        cd: CondDensityFn,
        design: DesignSpec,
        ch: Option<CharFn>,
        domain: ResponseDomain,
    ) -> Self {
        TrueModel {
            cd,
            design,
            ch,
            domain,
        }
    }

    pub fn cd(&self, y: f64, x: f64) -> f64 {
        (self.cd)(y, x)
    }

    pub fn design(&self) -> &DesignSpec {
        &self.design
    }

    pub fn domain(&self) -> ResponseDomain {
        self.domain
    }

    pub fn has_char(&self) -> bool {
        self.ch.is_some()
    }

    /// Mass of `f(.|x)` inside the response window.
    pub fn response_mass(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain.window();
        let gl = GaussLegendre::new(8);
        let panels = ((hi - lo) * 32.0).ceil().max(64.0) as usize;
        gl.integrate(lo, hi, panels, |y| self.cd(y, x))
    }

    /// Mass of `f(.|x)` inside `[0, 1]`.
    pub fn unit_mass(&self, x: f64) -> f64 {
        GaussLegendre::new(8).integrate(0.0, 1.0, 64, |y| self.cd(y, x))
    }

    /// The conditional characteristic function, by quadrature over the window
    /// when no closed form was supplied.
    pub fn char_at(&self, u: f64, x: f64) -> Complex64 {
        if let Some(ch) = &self.ch {
            return ch(u, x);
        }
        let (lo, hi) = self.domain.window();
        let gl = GaussLegendre::new(8);
        let panels = ((hi - lo) * (8.0 + u.abs())).ceil().max(64.0) as usize;
        let re = gl.integrate(lo, hi, panels, |y| self.cd(y, x) * (u * y).cos());
        let im = gl.integrate(lo, hi, panels, |y| self.cd(y, x) * (u * y).sin());
        Complex64::new(re, im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DesignKind;
    use approx::assert_abs_diff_eq;

    fn normal_model(with_char: bool) -> TrueModel {
        let cd: CondDensityFn = Arc::new(|y: f64, _x| (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt());
        let ch: Option<CharFn> = with_char.then(|| {
            let f: CharFn = Arc::new(|u: f64, _x| Complex64::new((-0.5 * u * u).exp(), 0.0));
            f
        });
        TrueModel::new(cd, DesignSpec::uniform(DesignKind::Random), ch, ResponseDomain::real_line()).unwrap()
    }

    #[test]
    fn numeric_char_matches_closed_form() {
        let exact = normal_model(true);
        let numeric = normal_model(false);
        for u in [0.0, 0.5, 2.0, 7.5] {
            let a = exact.char_at(u, 0.3);
            let b = numeric.char_at(u, 0.3);
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-10);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_unnormalised_density() {
        let cd: CondDensityFn = Arc::new(|_y, _x| 0.5);
        let err = TrueModel::new(cd, DesignSpec::uniform(DesignKind::Random), None, ResponseDomain::UnitInterval);
        assert!(err.is_err());
    }
}
