//! The quadratic family `T(z) = z^2 + c`: forward map, derivative, inverse
//! branches, orbits and chain-rule derivative products.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A point of the complex plane. Operations reject non-finite components.
pub type ComplexPoint = Complex64;

/// Above this many factors a modulus product is accumulated in log space.
const DIRECT_PRODUCT_MAX: usize = 64;

pub(crate) fn ensure_finite(z: ComplexPoint, what: &str) -> Result<ComplexPoint> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::Range(format!("{what} is not finite: {z}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticMap {
    c: ComplexPoint,
}

impl QuadraticMap {
    pub fn new(c: ComplexPoint) -> Result<Self> {
        ensure_finite(c, "map parameter")?;
        Ok(Self { c })
    }

    /// `z -> z^2 + 1/8`, the running example.
    pub fn eighth() -> Self {
        Self {
            c: ComplexPoint::new(0.125, 0.0),
        }
    }

    pub fn c(&self) -> ComplexPoint {
        self.c
    }

    pub fn forward(&self, z: ComplexPoint) -> Result<ComplexPoint> {
        ensure_finite(z, "input")?;
        ensure_finite(self.apply(z), "forward image")
    }

    /// Unchecked forward step for hot loops over already validated data.
    #[inline]
    pub fn apply(&self, z: ComplexPoint) -> ComplexPoint {
        z * z + self.c
    }

    pub fn derivative(&self, z: ComplexPoint) -> ComplexPoint {
        2.0 * z
    }

    /// Both preimages of `z`; the first uses the principal square root and
    /// the second is its exact negation.
    pub fn inverse_branches(&self, z: ComplexPoint) -> (ComplexPoint, ComplexPoint) {
        let w = self.inverse_plus(z);
        (w, -w)
    }

    #[inline]
    pub fn inverse_plus(&self, z: ComplexPoint) -> ComplexPoint {
        (z - self.c).sqrt()
    }

    /// `[z, T(z), ..., T^n(z)]`.
    pub fn orbit(&self, z: ComplexPoint, n: usize) -> Result<Vec<ComplexPoint>> {
        let mut out = Vec::with_capacity(n + 1);
        let mut cur = ensure_finite(z, "orbit start")?;
        out.push(cur);
        for k in 1..=n {
            cur = self.apply(cur);
            if !(cur.re.is_finite() && cur.im.is_finite()) {
                return Err(Error::Range(format!("orbit iterate {k} is not finite")));
            }
            out.push(cur);
        }
        Ok(out)
    }

    /// `|(T^n)'(y)| = 2^n * prod_{k<n} |T^k(y)|`.
    pub fn orbit_derivative_modulus_product(&self, y: ComplexPoint, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidArgument("derivative product needs n >= 1".into()));
        }
        let mut cur = ensure_finite(y, "input")?;
        let value = if n <= DIRECT_PRODUCT_MAX {
            let mut prod = 1.0;
            for _ in 0..n {
                prod *= 2.0 * cur.norm();
                cur = self.apply(cur);
            }
            prod
        } else {
            let mut log_sum = 0.0;
            for _ in 0..n {
                log_sum += (2.0 * cur.norm()).ln();
                cur = self.apply(cur);
            }
            log_sum.exp()
        };
        if value.is_finite() && cur.re.is_finite() && cur.im.is_finite() {
            Ok(value)
        } else {
            Err(Error::Range(format!(
                "derivative product over {n} steps is not finite"
            )))
        }
    }
}
