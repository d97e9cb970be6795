use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the predictors were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    /// Deterministic quantile design.
    Fixed,
    /// Independent draws from the design density.
    Random,
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignKind::Fixed => "fixed",
            DesignKind::Random => "random",
        })
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Ok(DesignKind::Fixed),
            "random" => Ok(DesignKind::Random),
            other => Err(Error::InvalidArgument(format!("unknown design kind `{other}`"))),
        }
    }
}

/// Integrated squared error regime.
///
/// `Square` integrates over the unit square, `Line` over the strip
/// `(-inf, inf) x [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Square,
    Line,
}

impl Loss {
    /// Constant in front of the oracle risk: 1 for the square, 1/pi on the strip.
    pub fn risk_constant(self) -> f64 {
        match self {
            Loss::Square => 1.0,
            Loss::Line => std::f64::consts::FRAC_1_PI,
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::Square => "square",
            Loss::Line => "line",
        })
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "square" => Ok(Loss::Square),
            "line" => Ok(Loss::Line),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

/// The observed `(Y, X)` pairs. Predictors live in [0, 1]; responses are any
/// finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePairs {
    y: Vec<f64>,
    x: Vec<f64>,
    design: DesignKind,
}

impl SamplePairs {
    pub fn new(y: Vec<f64>, x: Vec<f64>, design: DesignKind) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::InvalidArgument(format!(
                "{} responses but {} predictors",
                y.len(),
                x.len()
            )));
        }
        if y.is_empty() {
            return Err(Error::EmptyData);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        for &xi in &x {
            if !xi.is_finite() {
                return Err(Error::NonFinite("predictors"));
            }
            crate::error::check_unit("predictor", xi)?;
        }
        Ok(SamplePairs { y, x, design })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn design(&self) -> DesignKind {
        self.design
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.y.iter().copied().zip(self.x.iter().copied())
    }

    /// Same pairs, rows permuted by `order` (used by the symmetry tests).
    pub fn permuted(&self, order: &[usize]) -> Self {
        SamplePairs {
            y: order.iter().map(|&i| self.y[i]).collect(),
            x: order.iter().map(|&i| self.x[i]).collect(),
            design: self.design,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_predictor_outside_unit_interval() {
        let err = SamplePairs::new(vec![0.1], vec![1.2], DesignKind::Random).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert_eq!(
            SamplePairs::new(vec![], vec![], DesignKind::Fixed).unwrap_err(),
            Error::EmptyData
        );
        assert!(SamplePairs::new(vec![0.0, 1.0], vec![0.5], DesignKind::Fixed).is_err());
    }

    #[test]
    fn parses_enums() {
        assert_eq!("Line".parse::<Loss>().unwrap(), Loss::Line);
        assert_eq!("fixed".parse::<DesignKind>().unwrap(), DesignKind::Fixed);
        assert!("cube".parse::<Loss>().is_err());
    }
}
