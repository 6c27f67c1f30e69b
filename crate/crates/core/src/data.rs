//! Observed samples `(x_i, y_i)`.

use crate::error::{Error, Result};
use crate::hypothesis::Hypothesis;
use crate::noise::Input;

/// Paired observations with scalar inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<Input>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<Input>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} inputs but {} responses",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::DegenerateSample { needed: 1, got: 0 });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observations must be finite".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Dataset::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[Input] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `y_i - f(x_i)`.
    pub fn residuals(&self, f: &Hypothesis) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(&x, &y)| y - f.eval(x)).collect()
    }
}
