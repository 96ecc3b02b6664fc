//! Increment laws and their hazard toolkit.
//!
//! Every tail quantity has a log-space form; linear values are derived from it.

mod mg1;
mod weibull;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use mg1::Mg1Pareto;
pub use weibull::WeibullType;

use crate::error::{Result, RuinError};
use crate::quadrature::{integrate_split, QuadOptions, QuadResult};

/// |Λ⁻¹(Λ(x)) − x| tolerance, relative to max(1, |x|).
pub const TOL_INV: f64 = 1e-10;
/// Relative tolerance on G.
pub const TOL_G: f64 = 1e-10;
/// Conditional masses below this (log space) are degenerate.
pub const LN_MASS_FLOOR: f64 = -690.775_527_898_213_7; // ln 1e-300
/// Intervals narrower than this multiple of TOL_INV cannot be resolved by inversion.
const MIN_WIDTH_FACTOR: f64 = 100.0;
const LN_HALF: f64 = -std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailClass {
    RegularlyVarying { index: f64 },
    ConcaveHazard { beta0: f64 },
}

/// Declarative model description, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Mg1Pareto {
        #[serde(default = "default_service_index")]
        service_index: f64,
        #[serde(default = "default_interarrival_mean")]
        interarrival_mean: f64,
    },
    /// Struct form so that stray keys are rejected.
    WeibullType {},
}

fn default_service_index() -> f64 {
    2.5
}
fn default_interarrival_mean() -> f64 {
    4.0 / 3.0
}

impl ModelSpec {
    pub fn build(&self) -> Result<IncrementModel> {
        match *self {
            ModelSpec::Mg1Pareto { service_index, interarrival_mean } => {
                Ok(IncrementModel::Mg1Pareto(Mg1Pareto::new(service_index, interarrival_mean)?))
            }
            ModelSpec::WeibullType {} => Ok(IncrementModel::Weibull(WeibullType)),
        }
    }
}

/// A heavy-tailed increment law. Immutable after construction.
#[derive(Debug, Clone)]
pub enum IncrementModel {
    Mg1Pareto(Mg1Pareto),
    Weibull(WeibullType),
}

impl IncrementModel {
    pub fn mg1_pareto(service_index: f64, interarrival_mean: f64) -> Result<Self> {
        Ok(Self::Mg1Pareto(Mg1Pareto::new(service_index, interarrival_mean)?))
    }

    pub fn weibull() -> Self {
        Self::Weibull(WeibullType)
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Self::Mg1Pareto(m) => ModelSpec::Mg1Pareto { service_index: m.service_index(), interarrival_mean: m.interarrival_mean() },
            Self::Weibull(_) => ModelSpec::WeibullType {},
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mg1Pareto(_) => "mg1-pareto",
            Self::Weibull(_) => "weibull-type",
        }
    }

    pub fn mean_drift(&self) -> f64 {
        match self {
            Self::Mg1Pareto(m) => m.mean(),
            Self::Weibull(w) => w.mean(),
        }
    }

    /// Var X, `None` when infinite.
    pub fn variance(&self) -> Option<f64> {
        match self {
            Self::Mg1Pareto(m) => m.variance(),
            Self::Weibull(w) => Some(w.variance()),
        }
    }

    pub fn tail_class(&self) -> TailClass {
        match self {
            Self::Mg1Pareto(m) => TailClass::RegularlyVarying { index: m.service_index() },
            Self::Weibull(_) => TailClass::ConcaveHazard { beta0: WeibullType::BETA0 },
        }
    }

    pub fn b0(&self) -> f64 {
        0.0
    }

    pub fn support_inf(&self) -> f64 {
        match self {
            Self::Mg1Pareto(_) => f64::NEG_INFINITY,
            Self::Weibull(_) => WeibullType::SUPPORT_INF,
        }
    }

    /// Points where the density is not smooth.
    pub fn kinks(&self) -> &'static [f64] {
        match self {
            Self::Mg1Pareto(_) => &[0.0],
            Self::Weibull(_) => &[-1.0],
        }
    }

    #[inline]
    pub fn ln_sf(&self, x: f64) -> f64 {
        match self {
            Self::Mg1Pareto(m) => m.ln_sf(x),
            Self::Weibull(w) => w.ln_sf(x),
        }
    }

    #[inline]
    pub fn sf(&self, x: f64) -> f64 {
        self.ln_sf(x).exp()
    }

    #[inline]
    pub fn ln_cdf(&self, x: f64) -> f64 {
        match self {
            Self::Mg1Pareto(m) => m.ln_cdf(x),
            Self::Weibull(w) => w.ln_cdf(x),
        }
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            Self::Mg1Pareto(m) => m.ln_pdf(x),
            Self::Weibull(w) => w.ln_pdf(x),
        }
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cumulative_hazard(&self, x: f64) -> Result<f64> {
        if x < self.support_inf() {
            return Err(RuinError::Domain { what: "cumulative hazard", value: x });
        }
        let l = -self.ln_sf(x);
        if !l.is_finite() {
            return Err(RuinError::Domain { what: "cumulative hazard", value: x });
        }
        Ok(l)
    }

    /// λ = f / F̄.
    pub fn hazard(&self, x: f64) -> f64 {
        (self.ln_pdf(x) - self.ln_sf(x)).exp()
    }

    pub fn inverse_cumulative_hazard(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) || y.is_infinite() {
            return Err(RuinError::Domain { what: "inverse cumulative hazard", value: y });
        }
        Ok(self.inv_cum_hazard_unchecked(y))
    }

    /// Λ⁻¹(y) with a starting point near the answer (used only as a Newton seed).
    #[inline]
    pub fn inverse_cumulative_hazard_near(&self, y: f64, x_hint: f64) -> Result<f64> {
        if !(y >= 0.0) || y.is_infinite() {
            return Err(RuinError::Domain { what: "inverse cumulative hazard", value: y });
        }
        Ok(match self {
            Self::Mg1Pareto(m) => m.inv_cum_hazard_from(y, x_hint.max(0.0).ln_1p()),
            Self::Weibull(w) => w.inv_cum_hazard(y),
        })
    }

    /// (ln F̄(x), ln G(x)).
    #[inline]
    pub fn ln_sf_and_integrated_tail(&self, x: f64) -> (f64, f64) {
        match self {
            Self::Mg1Pareto(m) => m.ln_sf_and_g(x),
            Self::Weibull(w) => (w.ln_sf(x), w.ln_integrated_tail(x)),
        }
    }

    /// ln F(x) reusing a known ln F̄(x).
    #[inline]
    pub fn ln_cdf_given_sf(&self, x: f64, ln_sf: f64) -> f64 {
        if ln_sf <= LN_HALF {
            ln_one_minus_exp(ln_sf)
        } else {
            self.ln_cdf(x)
        }
    }

    /// ln P(lo < X ≤ hi) reusing known ln F̄ at both ends.
    #[inline]
    pub fn ln_interval_mass_given_sf(&self, lo: f64, hi: f64, ln_sf_lo: f64, ln_sf_hi: f64) -> f64 {
        if lo < hi && ln_sf_lo <= LN_HALF {
            ln_sf_lo + ln_one_minus_exp(ln_sf_hi - ln_sf_lo)
        } else {
            self.ln_interval_mass(lo, hi)
        }
    }

    #[inline]
    fn inv_cum_hazard_unchecked(&self, y: f64) -> f64 {
        match self {
            Self::Mg1Pareto(m) => m.inv_cum_hazard(y),
            Self::Weibull(w) => w.inv_cum_hazard(y),
        }
    }

    #[inline]
    pub fn ln_integrated_tail(&self, x: f64) -> f64 {
        match self {
            Self::Mg1Pareto(m) => m.ln_integrated_tail(x),
            Self::Weibull(w) => w.ln_integrated_tail(x),
        }
    }

    pub fn integrated_tail(&self, x: f64) -> f64 {
        self.ln_integrated_tail(x).exp()
    }

    /// G⁻¹(v) for v > 0: the unique x with G(x) = v.
    pub fn inverse_integrated_tail(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(RuinError::Domain { what: "inverse integrated tail", value: v });
        }
        let target = v.ln();
        // ln G is decreasing with slope -F̄/G; bracket then Newton with bisection fallback.
        let phi = |x: f64| self.ln_integrated_tail(x) - target;
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        if phi(0.0) > 0.0 {
            hi = 1.0;
            while phi(hi) > 0.0 {
                lo = hi;
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(RuinError::Domain { what: "inverse integrated tail", value: v });
                }
            }
        } else {
            lo = -1.0;
            while phi(lo) < 0.0 {
                hi = lo;
                lo *= 2.0;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let p = phi(x);
            if p == 0.0 {
                return Ok(x);
            }
            if p > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let slope = -(self.ln_sf(x) - self.ln_integrated_tail(x)).exp();
            let mut next = x - p / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1.0) {
                return Ok(next);
            }
            x = next;
        }
        Ok(x)
    }

    /// a(b) = G(b) / F̄(b), formed in log space.
    pub fn mean_excess_scale(&self, b: f64) -> Result<f64> {
        let ln_sf = self.ln_sf(b);
        if ln_sf == f64::NEG_INFINITY {
            return Err(RuinError::Domain { what: "mean excess scale", value: b });
        }
        Ok((self.ln_integrated_tail(b) - ln_sf).exp())
    }

    #[inline]
    pub fn sample_nominal<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Mg1Pareto(m) => m.sample(rng),
            Self::Weibull(w) => w.sample(rng),
        }
    }

    /// x with ln F̄(x) = z.
    #[inline]
    fn quantile_upper(&self, z: f64) -> f64 {
        self.inv_cum_hazard_unchecked(-z)
    }

    /// x with ln F(x) = w.
    #[inline]
    fn quantile_lower(&self, w: f64) -> f64 {
        if let Self::Mg1Pareto(m) = self {
            let x = m.lower_quantile_closed_form(w);
            if let Some(x) = x {
                return x;
            }
        }
        self.inv_cum_hazard_unchecked(-(-w.exp()).ln_1p())
    }

    /// ln P(lo < X <= hi).
    pub fn ln_interval_mass(&self, lo: f64, hi: f64) -> f64 {
        if !(lo < hi) {
            return f64::NEG_INFINITY;
        }
        let ls_lo = self.ln_sf(lo);
        if ls_lo <= LN_HALF {
            let ls_hi = if hi == f64::INFINITY { f64::NEG_INFINITY } else { self.ln_sf(hi) };
            return ls_lo + ln_one_minus_exp(ls_hi - ls_lo);
        }
        let lc_hi = if hi == f64::INFINITY { 0.0 } else { self.ln_cdf(hi) };
        if lc_hi <= LN_HALF {
            let lc_lo = if lo == f64::NEG_INFINITY { f64::NEG_INFINITY } else { self.ln_cdf(lo) };
            return lc_hi + ln_one_minus_exp(lc_lo - lc_hi);
        }
        // Straddles the median: both pieces are at most 1/2.
        let sf_hi = if hi == f64::INFINITY { 0.0 } else { self.ln_sf(hi).exp() };
        let cdf_lo = if lo == f64::NEG_INFINITY { 0.0 } else { self.ln_cdf(lo).exp() };
        (1.0 - sf_hi - cdf_lo).ln()
    }

    /// Draw from f restricted to (lo, hi].
    pub fn sample_conditional_interval<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
        let ln_mass = self.ln_interval_mass(lo, hi);
        self.sample_conditional_with_mass(lo, hi, ln_mass, rng)
    }

    /// As [`Self::sample_conditional_interval`] with a precomputed ln P(lo < X <= hi).
    pub fn sample_conditional_with_mass<R: Rng + ?Sized>(&self, lo: f64, hi: f64, ln_mass: f64, rng: &mut R) -> Result<f64> {
        let too_narrow = lo.is_finite() && hi.is_finite() && hi - lo <= MIN_WIDTH_FACTOR * TOL_INV * lo.abs().max(1.0);
        if !(lo < hi) || too_narrow || !(ln_mass >= LN_MASS_FLOOR) {
            return Err(RuinError::DegenerateInterval { lo, hi, ln_mass });
        }
        if ln_mass > LN_HALF {
            loop {
                let x = self.sample_nominal(rng);
                if x > lo && x <= hi {
                    return Ok(x);
                }
            }
        }
        let u: f64 = rng.random();
        let ls_lo = self.ln_sf(lo);
        let x = if ls_lo <= LN_HALF {
            let ls_hi = if hi == f64::INFINITY { f64::NEG_INFINITY } else { self.ln_sf(hi) };
            self.quantile_upper(ls_lo + (u * (ls_hi - ls_lo).exp_m1()).ln_1p())
        } else {
            let lc_hi = if hi == f64::INFINITY { 0.0 } else { self.ln_cdf(hi) };
            if lc_hi <= LN_HALF {
                let lc_lo = if lo == f64::NEG_INFINITY { f64::NEG_INFINITY } else { self.ln_cdf(lo) };
                self.quantile_lower(lc_hi + (u * (lc_lo - lc_hi).exp_m1()).ln_1p())
            } else {
                let cdf_lo = if lo == f64::NEG_INFINITY { 0.0 } else { self.ln_cdf(lo).exp() };
                let p = cdf_lo + u * ln_mass.exp();
                if p <= 0.5 {
                    self.quantile_lower(p.ln())
                } else {
                    self.quantile_upper((-p).ln_1p())
                }
            }
        };
        // Inversion rounding can land a hair outside; clamp onto the closed end.
        Ok(if x > hi {
            hi
        } else if x <= lo {
            next_up(lo).min(hi)
        } else {
            x
        })
    }

    /// ∫_{lo}^{hi} f(x) φ(x) dx, split at `breaks`, with a model-specific change of
    /// variable that removes density singularities.
    pub fn integrate_density<F: FnMut(f64) -> f64>(
        &self,
        lo: f64,
        hi: f64,
        breaks: &[f64],
        mut phi: F,
        opts: &QuadOptions,
    ) -> Result<QuadResult> {
        let lo = lo.max(self.support_inf());
        if !(lo < hi) {
            return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
        }
        match self {
            Self::Weibull(_) => {
                // f(x) dx = 2 e^{-2v} dv with v = sqrt(x + 1).
                let to_v = |x: f64| if x == f64::INFINITY { f64::INFINITY } else { (x + 1.0).max(0.0).sqrt() };
                let vb: Vec<f64> = breaks.iter().map(|&x| to_v(x)).collect();
                integrate_split(
                    |v: f64| {
                        let w = 2.0 * (-2.0 * v).exp();
                        if w == 0.0 {
                            0.0
                        } else {
                            w * phi(v * v - 1.0)
                        }
                    },
                    to_v(lo),
                    to_v(hi),
                    &vb,
                    opts,
                )
            }
            Self::Mg1Pareto(_) => {
                let mut all: Vec<f64> = breaks.to_vec();
                all.extend_from_slice(self.kinks());
                integrate_split(
                    |x: f64| {
                        let w = self.pdf(x);
                        if w == 0.0 {
                            0.0
                        } else {
                            w * phi(x)
                        }
                    },
                    lo,
                    hi,
                    &all,
                    opts,
                )
            }
        }
    }

    /// Reference ln F̄ computed without the tail machinery (quadrature for MG1, closed form otherwise).
    pub fn ln_sf_reference(&self, x: f64) -> Result<f64> {
        match self {
            Self::Mg1Pareto(m) if x >= 0.0 => m.ln_sf_by_quadrature(x),
            _ => Ok(self.ln_sf(x)),
        }
    }
}

/// ln(1 - e^a) for a <= 0.
#[inline]
pub(crate) fn ln_one_minus_exp(a: f64) -> f64 {
    if a > -std::f64::consts::LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

#[inline]
fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == f64::NEG_INFINITY {
        return f64::MIN;
    }
    let bits = x.to_bits();
    if x == 0.0 {
        f64::from_bits(1)
    } else if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

/// ∫ f over the whole support, for normalisation checks.
pub fn total_mass(model: &IncrementModel, opts: &QuadOptions) -> Result<f64> {
    Ok(model.integrate_density(f64::NEG_INFINITY, f64::INFINITY, &[], |_| 1.0, opts)?.value)
}

/// ∫_x^∞ F̄ by quadrature, independent of the closed forms.
pub fn integrated_tail_by_quadrature(model: &IncrementModel, x: f64) -> Result<f64> {
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: TOL_G * 0.1, max_intervals: 4000 };
    let mut breaks: Vec<f64> = model.kinks().iter().copied().filter(|&k| k > x).collect();
    breaks.push(x.abs().max(1.0) + x);
    let r = integrate_split(|s: f64| model.sf(s), x, f64::INFINITY, &breaks, &opts)?;
    Ok(r.value)
}
