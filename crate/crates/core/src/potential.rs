//! Regularized double-well potential.
//!
//! `f0(c) = ¼(c²−1)²` on `[−K, K]`, continued by quadratics so that `f0''` is
//! bounded by `L = 3K² − 1`.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum PotentialError {
    #[error("cutoff K must be a finite number greater than 1, got {0}")]
    BadCutoff(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    k: f64,
}

impl Default for Potential {
    fn default() -> Self {
        Self { k: 1.1 }
    }
}

impl Potential {
    pub fn new(k: f64) -> Result<Self, PotentialError> {
        if !(k.is_finite() && k > 1.0) {
            return Err(PotentialError::BadCutoff(k));
        }
        Ok(Self { k })
    }

    pub fn cutoff(&self) -> f64 {
        self.k
    }

    /// Lipschitz bound `L = 3K² − 1` of `f0'`.
    pub fn lipschitz(&self) -> f64 {
        3.0 * self.k * self.k - 1.0
    }

    pub fn f0(&self, c: f64) -> f64 {
        let k = self.k;
        if c.abs() <= k {
            let s = c * c - 1.0;
            0.25 * s * s
        } else {
            let l = self.lipschitz();
            0.5 * l * c * c - 2.0 * k.powi(3) * c.abs() + 0.25 * (3.0 * k.powi(4) + 1.0)
        }
    }

    pub fn df0(&self, c: f64) -> f64 {
        let k = self.k;
        if c.abs() <= k {
            c * c * c - c
        } else {
            self.lipschitz() * c - 2.0 * k.powi(3) * c.signum()
        }
    }

    pub fn ddf0(&self, c: f64) -> f64 {
        if c.abs() <= self.k {
            3.0 * c * c - 1.0
        } else {
            self.lipschitz()
        }
    }
}
