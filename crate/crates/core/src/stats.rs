//! Streaming moments of log-space samples and Kolmogorov–Smirnov distances.

use serde::{Deserialize, Serialize};

/// Mean/variance of Z from ln Z, with every quantity held relative to e^shift.
///
/// `shift` is the running maximum of ln Z, so scaled values lie in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogAccumulator {
    n: u64,
    shift: f64,
    mean: f64,
    m2: f64,
    /// Exponent p for the extra moment Σ Z^p (0 disables it).
    power: f64,
    pow_sum: f64,
}

impl LogAccumulator {
    pub fn new() -> Self {
        Self::with_power(0.0)
    }

    pub fn with_power(power: f64) -> Self {
        Self { n: 0, shift: f64::NEG_INFINITY, mean: 0.0, m2: 0.0, power, pow_sum: 0.0 }
    }

    fn rescale(&mut self, new_shift: f64) {
        if self.shift == f64::NEG_INFINITY {
            // Nothing but zeros so far; scaled values are unaffected.
            self.shift = new_shift;
            return;
        }
        let f = (self.shift - new_shift).exp();
        self.mean *= f;
        self.m2 *= f * f;
        if self.power > 0.0 {
            self.pow_sum *= (self.power * (self.shift - new_shift)).exp();
        }
        self.shift = new_shift;
    }

    pub fn push(&mut self, ln_z: f64) {
        debug_assert!(!ln_z.is_nan());
        if ln_z > self.shift {
            self.rescale(ln_z);
        }
        let v = if ln_z == f64::NEG_INFINITY { 0.0 } else { (ln_z - self.shift).exp() };
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
        if self.power > 0.0 && v > 0.0 {
            self.pow_sum += (self.power * (ln_z - self.shift)).exp();
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let mut o = other.clone();
        let s = self.shift.max(o.shift);
        if s > f64::NEG_INFINITY {
            if self.shift < s {
                self.rescale(s);
            }
            if o.shift < s {
                o.rescale(s);
            }
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let delta = o.mean - self.mean;
        self.mean += delta * nb / n;
        self.m2 += o.m2 + delta * delta * na * nb / n;
        self.pow_sum += o.pow_sum;
        self.n += o.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// ln of the sample mean (−∞ when every sample is zero).
    pub fn ln_mean(&self) -> f64 {
        if self.mean > 0.0 {
            self.shift + self.mean.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn mean(&self) -> f64 {
        self.ln_mean().exp()
    }

    /// ln of the unbiased sample standard deviation.
    pub fn ln_sd(&self) -> f64 {
        if self.n < 2 || self.m2 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shift + 0.5 * (self.m2 / (self.n - 1) as f64).ln()
    }

    pub fn sd(&self) -> f64 {
        self.ln_sd().exp()
    }

    pub fn std_error(&self) -> f64 {
        (self.ln_sd() - 0.5 * (self.n as f64).ln()).exp()
    }

    /// Per-replication coefficient of variation.
    pub fn cv(&self) -> f64 {
        if self.mean > 0.0 {
            (self.ln_sd() - self.ln_mean()).exp()
        } else {
            f64::NAN
        }
    }

    /// (Σ Z^p / n) / (Σ Z / n)^p for the configured power p.
    pub fn power_moment_ratio(&self) -> Option<f64> {
        if self.power <= 0.0 || self.mean <= 0.0 {
            return None;
        }
        Some(((self.pow_sum / self.n as f64).ln() - self.power * self.mean.ln()).exp())
    }
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

/// sup |F_n − F| for an unweighted sample.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// sup |F_w − F| for a self-normalised weighted sample; `pairs` are (value, weight).
pub fn weighted_ks_statistic<F: Fn(f64) -> f64>(pairs: &[(f64, f64)], cdf: F) -> f64 {
    let mut ps = pairs.to_vec();
    ps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = ps.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < ps.len() {
        let x = ps[i].0;
        let f = cdf(x);
        let before = acc / total;
        while i < ps.len() && ps[i].0 == x {
            acc += ps[i].1;
            i += 1;
        }
        d = d.max((acc / total - f).abs()).max((f - before).abs());
    }
    d
}

/// Weighted empirical CDF sampled at `points` sorted evaluation points.
pub fn weighted_ecdf(pairs: &[(f64, f64)], points: &[f64]) -> Vec<f64> {
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    points.iter().map(|&t| pairs.iter().filter(|p| p.0 <= t).map(|p| p.1).sum::<f64>() / total).collect()
}

/// Kish effective sample size (Σw)² / Σw².
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}
