//! X = V - T with P(V > v) = (1 + v)^(-ι) and T exponential.
//!
//! With J_α(y) = E[(y + T)^(-α)], for x >= 0 the right tail, density and
//! integrated tail are J_ι(1 + x), ι J_{ι+1}(1 + x) and J_{ι-1}(1 + x)/(ι - 1).
//! Below zero only T contributes and everything is closed form in e^{rx}.
//! ln J_α is tabulated against ln y with exact first and second derivatives
//! (J_α' = -α J_{α+1}) and evaluated by quintic Hermite interpolation; past the
//! table an asymptotic series in 1/(r y) takes over.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Result, RuinError};
use crate::quadrature::{integrate_split, QuadOptions};

const U_MAX: f64 = 23.025_850_929_940_457; // ln 1e10
const INITIAL_STEP: f64 = 0.05;
const TABLE_TOL: f64 = 5e-13;

/// ln J_α(y) by direct quadrature of ∫₀^∞ e^{-t} (y + t/r)^{-α} dt.
pub(crate) fn ln_j_direct(alpha: f64, y: f64, rate: f64) -> Result<f64> {
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-13, max_intervals: 500 };
    // Scale out y^{-α} so the integrand is O(1) near t = 0.
    let knee = rate * y;
    let r =
        integrate_split(|t: f64| (-t - alpha * (t / knee).ln_1p()).exp(), 0.0, f64::INFINITY, &[knee.min(50.0), 1.0, 10.0, 40.0], &opts)?;
    Ok(-alpha * y.ln() + r.value.ln())
}

#[derive(Debug)]
struct LogLogTable {
    alpha: f64,
    rate: f64,
    h: f64,
    inv_h: f64,
    v: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl LogLogTable {
    /// (ln J_α(e^u), d ln J_α / du) for u >= 0.
    #[inline]
    fn eval(&self, u: f64) -> (f64, f64) {
        if u >= U_MAX {
            return self.series(u);
        }
        let s = u * self.inv_h;
        let i = (s as usize).min(self.v.len() - 2);
        let t = s - i as f64;
        let h = self.h;
        let (p0, p1) = (self.v[i], self.v[i + 1]);
        let (m0, m1) = (self.d1[i] * h, self.d1[i + 1] * h);
        let (a0, a1) = (self.d2[i] * h * h, self.d2[i + 1] * h * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let val = (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5) * p0
            + (t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5) * m0
            + 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5) * a0
            + 0.5 * (t3 - 2.0 * t4 + t5) * a1
            + (-4.0 * t3 + 7.0 * t4 - 3.0 * t5) * m1
            + (10.0 * t3 - 15.0 * t4 + 6.0 * t5) * p1;
        let der = (30.0 * (-t2 + 2.0 * t3 - t4)) * (p0 - p1)
            + (1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4) * m0
            + (t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4) * a0
            + (1.5 * t2 - 4.0 * t3 + 2.5 * t4) * a1
            + (-12.0 * t2 + 28.0 * t3 - 15.0 * t4) * m1;
        (val, der * self.inv_h)
    }

    /// ln J_α(e^u) alone.
    #[inline]
    fn value(&self, u: f64) -> f64 {
        if u >= U_MAX {
            return self.series(u).0;
        }
        let s = u * self.inv_h;
        let i = (s as usize).min(self.v.len() - 2);
        let t = s - i as f64;
        let h = self.h;
        let (p0, p1) = (self.v[i], self.v[i + 1]);
        let (m0, m1) = (self.d1[i] * h, self.d1[i + 1] * h);
        let (a0, a1) = (self.d2[i] * h * h, self.d2[i + 1] * h * h);
        let t2 = t * t;
        let t3 = t2 * t;
        // Same quintic as `eval`, grouped by powers of t.
        let dp = p1 - p0;
        let c3 = 10.0 * dp - 6.0 * m0 - 4.0 * m1 - 1.5 * a0 + 0.5 * a1;
        let c4 = -15.0 * dp + 8.0 * m0 + 7.0 * m1 + 1.5 * a0 - a1;
        let c5 = 6.0 * dp - 3.0 * m0 - 3.0 * m1 - 0.5 * a0 + 0.5 * a1;
        p0 + t * m0 + 0.5 * t2 * a0 + t3 * (c3 + t * (c4 + t * c5))
    }

    fn series(&self, u: f64) -> (f64, f64) {
        let a = self.alpha;
        let e = (-u).exp() / self.rate;
        let c1 = a;
        let c2 = a * (a + 1.0);
        let c3 = c2 * (a + 2.0);
        let s = 1.0 - c1 * e + c2 * e * e - c3 * e * e * e;
        let ds = c1 * e - 2.0 * c2 * e * e + 3.0 * c3 * e * e * e;
        (-a * u + s.ln(), -a + ds / s)
    }
}

#[derive(Debug)]
struct Tables {
    // α = ι - 1, ι, ι + 1.
    g: LogLogTable,
    sf: LogLogTable,
    pdf: LogLogTable,
}

fn build_tables(iota: f64, rate: f64) -> Result<Tables> {
    let alphas = [iota - 1.0, iota, iota + 1.0, iota + 2.0, iota + 3.0];
    let mut h = INITIAL_STEP;
    loop {
        let n = (U_MAX / h).ceil() as usize + 1;
        let h_eff = U_MAX / (n - 1) as f64;
        let mut vals = vec![vec![0.0; n]; alphas.len()];
        for i in 0..n {
            let y = (i as f64 * h_eff).exp();
            for (m, &a) in alphas.iter().enumerate() {
                vals[m][i] = ln_j_direct(a, y, rate)?;
            }
        }
        let mut tables = Vec::with_capacity(3);
        for m in 0..3 {
            let a = alphas[m];
            let mut d1 = Vec::with_capacity(n);
            let mut d2 = Vec::with_capacity(n);
            for i in 0..n {
                let u = i as f64 * h_eff;
                // L' = -α y J_{α+1}/J_α, L'' = L' + α(α+1) y² J_{α+2}/J_α - L'².
                let l1 = -a * (u + vals[m + 1][i] - vals[m][i]).exp();
                let l2 = l1 + a * (a + 1.0) * (2.0 * u + vals[m + 2][i] - vals[m][i]).exp() - l1 * l1;
                d1.push(l1);
                d2.push(l2);
            }
            tables.push(LogLogTable { alpha: a, rate, h: h_eff, inv_h: 1.0 / h_eff, v: vals[m].clone(), d1, d2 });
        }
        let mut worst = 0.0f64;
        for t in &tables {
            for i in 0..n - 1 {
                let u = (i as f64 + 0.5) * h_eff;
                let exact = ln_j_direct(t.alpha, u.exp(), rate)?;
                worst = worst.max((t.eval(u).0 - exact).abs());
            }
        }
        if worst < TABLE_TOL {
            let mut it = tables.into_iter();
            let g = it.next().unwrap();
            let sf = it.next().unwrap();
            let pdf = it.next().unwrap();
            return Ok(Tables { g, sf, pdf });
        }
        if h < 1e-3 {
            return Err(RuinError::Selection(format!("tail table failed to reach {TABLE_TOL:e} (worst {worst:e})")));
        }
        h *= 0.5;
    }
}

#[derive(Debug, Clone)]
pub struct Mg1Pareto {
    iota: f64,
    interarrival_mean: f64,
    rate: f64,
    ln_c: f64,
    ln_pdf0: f64,
    g0: f64,
    lambda0: f64,
    tables: Arc<Tables>,
}

impl Mg1Pareto {
    pub fn new(service_index: f64, interarrival_mean: f64) -> Result<Self> {
        if !(service_index > 1.0 && service_index.is_finite()) {
            return Err(RuinError::InvalidParameter(format!("service index {service_index} must exceed 1")));
        }
        if !(interarrival_mean > 0.0 && interarrival_mean.is_finite()) {
            return Err(RuinError::InvalidParameter(format!("interarrival mean {interarrival_mean} must be positive")));
        }
        let drift = 1.0 / (service_index - 1.0) - interarrival_mean;
        if drift >= 0.0 {
            return Err(RuinError::InvalidParameter(format!("drift {drift} is not negative")));
        }
        let rate = 1.0 / interarrival_mean;
        let tables = build_tables(service_index, rate)?;
        let ln_sf0 = tables.sf.eval(0.0).0;
        let ln_c = (-ln_sf0.exp_m1()).ln();
        let ln_pdf0 = service_index.ln() + tables.pdf.eval(0.0).0;
        let g0 = (tables.g.eval(0.0).0).exp() / (service_index - 1.0);
        Ok(Self { iota: service_index, interarrival_mean, rate, ln_c, ln_pdf0, g0, lambda0: -ln_sf0, tables: Arc::new(tables) })
    }

    pub fn service_index(&self) -> f64 {
        self.iota
    }

    pub fn interarrival_mean(&self) -> f64 {
        self.interarrival_mean
    }

    pub fn mean(&self) -> f64 {
        1.0 / (self.iota - 1.0) - self.interarrival_mean
    }

    /// Traffic intensity E V / E T.
    pub fn load(&self) -> f64 {
        1.0 / ((self.iota - 1.0) * self.interarrival_mean)
    }

    pub fn variance(&self) -> Option<f64> {
        if self.iota <= 2.0 {
            return None;
        }
        let i = self.iota;
        let var_v = 2.0 / ((i - 1.0) * (i - 2.0)) - 1.0 / ((i - 1.0) * (i - 1.0));
        Some(var_v + self.interarrival_mean * self.interarrival_mean)
    }

    #[inline]
    pub fn ln_sf(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.tables.sf.value(x.ln_1p())
        } else {
            (-(self.ln_c + self.rate * x).exp()).ln_1p()
        }
    }

    #[inline]
    pub fn ln_cdf(&self, x: f64) -> f64 {
        if x >= 0.0 {
            (-self.tables.sf.value(x.ln_1p()).exp_m1()).ln()
        } else {
            self.ln_c + self.rate * x
        }
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.iota.ln() + self.tables.pdf.value(x.ln_1p())
        } else {
            self.ln_pdf0 + self.rate * x
        }
    }

    pub fn ln_integrated_tail(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.tables.g.value(x.ln_1p()) - (self.iota - 1.0).ln()
        } else {
            (self.g0 - x + self.ln_c.exp() * (self.rate * x).exp_m1() / self.rate).ln()
        }
    }

    /// (ln F̄(x), ln G(x)) sharing one ln(1 + x).
    #[inline]
    pub fn ln_sf_and_g(&self, x: f64) -> (f64, f64) {
        if x >= 0.0 {
            let u = x.ln_1p();
            (self.tables.sf.value(u), self.tables.g.value(u) - (self.iota - 1.0).ln())
        } else {
            (self.ln_sf(x), self.ln_integrated_tail(x))
        }
    }

    /// Λ⁻¹(y) for y >= 0 (−∞ at y = 0).
    pub fn inv_cum_hazard(&self, y: f64) -> f64 {
        self.inv_cum_hazard_from(y, ((y / self.iota).exp() - self.interarrival_mean).max(1.0).ln())
    }

    /// Λ⁻¹(y) with Newton started at u₀ = ln(1 + x₀).
    pub fn inv_cum_hazard_from(&self, y: f64, u0: f64) -> f64 {
        if y <= self.lambda0 {
            return ((-(-y).exp_m1()).ln() - self.ln_c) / self.rate;
        }
        // Solve ln J_ι(e^u) = -y on u > 0; the map is decreasing and nearly linear.
        let table = &self.tables.sf;
        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        let mut u = if u0 > 0.0 && u0.is_finite() { u0 } else { 1.0 };
        for _ in 0..100 {
            let (v, dv) = table.eval(u);
            let phi = v + y;
            // Rounding in the table stalls Newton at a few ulps of y; stop there.
            if phi.abs() <= 4.0 * f64::EPSILON * y {
                break;
            }
            if phi > 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let mut next = u - phi / dv;
            if !(next > lo && next < hi) {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * u + 1.0 };
            }
            if (next - u).abs() <= 4.0 * f64::EPSILON * u.max(1.0) {
                u = next;
                break;
            }
            u = next;
        }
        u.exp_m1()
    }

    /// x < 0 with ln F(x) = w, when that lies in the closed-form piece.
    #[inline]
    pub fn lower_quantile_closed_form(&self, w: f64) -> Option<f64> {
        (w <= self.ln_c).then(|| (w - self.ln_c) / self.rate)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let v = ((-u1).ln_1p() * (-1.0 / self.iota)).exp_m1();
        let t = -self.interarrival_mean * (-u2).ln_1p();
        v - t
    }

    /// Direct-quadrature reference for ln F̄(x), x >= 0.
    pub fn ln_sf_by_quadrature(&self, x: f64) -> Result<f64> {
        ln_j_direct(self.iota, 1.0 + x, self.rate)
    }
}
