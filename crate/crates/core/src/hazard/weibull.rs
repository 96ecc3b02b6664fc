//! P(X > t) = exp(-2 sqrt(t + 1)) on t >= -1; every tail quantity is closed form.

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeibullType;

impl WeibullType {
    pub const SUPPORT_INF: f64 = -1.0;
    pub const BETA0: f64 = 0.5;

    pub fn mean(&self) -> f64 {
        -0.5
    }

    pub fn variance(&self) -> f64 {
        1.25
    }

    pub fn ln_sf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            0.0
        } else {
            -2.0 * (x + 1.0).sqrt()
        }
    }

    pub fn ln_cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            f64::NEG_INFINITY
        } else {
            (-(-2.0 * (x + 1.0).sqrt()).exp_m1()).ln()
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return f64::NEG_INFINITY;
        }
        let v = (x + 1.0).sqrt();
        -v.ln() - 2.0 * v
    }

    pub fn ln_integrated_tail(&self, x: f64) -> f64 {
        if x < -1.0 {
            return (-0.5 - x).ln();
        }
        let v = (x + 1.0).sqrt();
        (v + 0.5).ln() - 2.0 * v
    }

    /// Λ⁻¹ for y >= 0.
    pub fn inv_cum_hazard(&self, y: f64) -> f64 {
        0.25 * y * y - 1.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let e = -(-u).ln_1p();
        0.25 * e * e - 1.0
    }
}
