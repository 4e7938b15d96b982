//! Second-order forward-mode differentiation in three variables.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Matrix3;

use crate::mesh::Vec3;

/// Value, gradient and Hessian of a scalar function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec3,
    pub hess: Matrix3<f64>,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            grad: Vec3::zeros(),
            hess: Matrix3::zeros(),
        }
    }

    /// The coordinate functions `x₁, x₂, x₃` seeded at `x`.
    pub fn variables(x: &Vec3) -> [Jet; 3] {
        std::array::from_fn(|i| {
            let mut grad = Vec3::zeros();
            grad[i] = 1.0;
            Jet {
                value: x[i],
                grad,
                hess: Matrix3::zeros(),
            }
        })
    }

    /// `f ∘ self` given `f`, `f'` and `f''` at `self.value`.
    pub fn compose(self, f: f64, df: f64, ddf: f64) -> Self {
        Self {
            value: f,
            grad: self.grad * df,
            hess: self.hess * df + self.grad * self.grad.transpose() * ddf,
        }
    }

    pub fn powi(self, n: i32) -> Self {
        let v = self.value;
        let nf = f64::from(n);
        self.compose(
            v.powi(n),
            nf * v.powi(n - 1),
            nf * (nf - 1.0) * v.powi(n - 2),
        )
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn laplacian(&self) -> f64 {
        self.hess.trace()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            value: self.value + o.value,
            grad: self.grad + o.grad,
            hess: self.hess + o.hess,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            value: -self.value,
            grad: -self.grad,
            hess: -self.hess,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let cross = self.grad * o.grad.transpose();
        Jet {
            value: self.value * o.value,
            grad: self.grad * o.value + o.grad * self.value,
            hess: self.hess * o.value + o.hess * self.value + cross + cross.transpose(),
        }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        Jet {
            value: self.value + c,
            ..self
        }
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        self + (-c)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        Jet {
            value: self.value * c,
            grad: self.grad * c,
            hess: self.hess * c,
        }
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Vec3::new(0.3, -1.2, 2.0);
        let [a, b, c] = Jet::variables(&x);
        let f = a * b * c;
        assert_eq!(f.value, 0.3 * -1.2 * 2.0);
        assert!((f.grad - Vec3::new(-2.4, 0.6, -0.36)).norm() < 1e-14);
        assert_eq!(f.hess[(0, 1)], 2.0);
        assert_eq!(f.hess[(1, 0)], 2.0);
        assert_eq!(f.hess[(0, 2)], -1.2);
        assert_eq!(f.hess[(0, 0)], 0.0);
    }

    #[test]
    fn matches_finite_differences() {
        let f = |x: &Vec3| {
            let [a, b, c] = Jet::variables(x);
            (a * b + 1.0).powi(3) - (c * 0.5).exp() * a + 2.0 * b
        };
        let scalar = |x: &Vec3| f(x).value;
        let x = Vec3::new(0.4, -0.7, 0.2);
        let j = f(&x);
        let h = 1e-4;
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = h;
            let fd = (scalar(&(x + e)) - scalar(&(x - e))) / (2.0 * h);
            assert!((fd - j.grad[i]).abs() < 1e-6 * (1.0 + fd.abs()));
            for k in 0..3 {
                let mut d = Vec3::zeros();
                d[k] = h;
                let fd2 = (scalar(&(x + e + d)) - scalar(&(x + e - d)) - scalar(&(x - e + d))
                    + scalar(&(x - e - d)))
                    / (4.0 * h * h);
                assert!((fd2 - j.hess[(i, k)]).abs() < 1e-5 * (1.0 + fd2.abs()));
            }
        }
    }
}
