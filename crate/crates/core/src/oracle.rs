//! Test-only reference computations, deliberately independent of `quadrature`.

/// Double-exponential (tanh-sinh) quadrature on a finite [a, b].
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let h2 = 0.5 * (b - a);
    let mut prev = f64::NAN;
    let mut step = 0.5;
    loop {
        let mut sum = 0.0;
        let kmax = (4.0 / step) as i64;
        for k in -kmax..=kmax {
            let t = k as f64 * step;
            let s = std::f64::consts::FRAC_PI_2 * t.sinh();
            let u = s.tanh();
            let w = std::f64::consts::FRAC_PI_2 * t.cosh() / (s.cosh() * s.cosh());
            // Distance to the nearer endpoint without cancellation.
            let e = 1.0 / (s.abs().exp() * s.cosh());
            let x = if u < 0.0 { a + h2 * e } else { b - h2 * e };
            if w == 0.0 || !(x > a && x < b) {
                continue;
            }
            sum += w * f(x);
        }
        let est = sum * step * h2;
        if (est - prev).abs() <= 1e-13 * est.abs() || step < 1e-3 {
            return est;
        }
        prev = est;
        step *= 0.5;
    }
}

/// ∫_a^∞ via x = a + t/(1 - t) on (0, 1).
pub fn tanh_sinh_upper<F: Fn(f64) -> f64>(f: F, a: f64) -> f64 {
    tanh_sinh(
        |t| {
            let x = a + t / (1.0 - t);
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v / ((1.0 - t) * (1.0 - t))
            }
        },
        0.0,
        1.0,
    )
}

/// P(V − T > x) = E[(1 + x + T)^(-ι)] for x >= 0 by the oracle quadrature.
pub fn mg1_sf(iota: f64, interarrival_mean: f64, x: f64) -> f64 {
    let r = 1.0 / interarrival_mean;
    tanh_sinh_upper(|t| r * (-r * t).exp() * (1.0 + x + t).powf(-iota), 0.0)
}

/// Weibull-type conditional mean E[X | lo < X <= hi] from the density.
pub fn weibull_conditional_mean(lo: f64, hi: f64) -> f64 {
    // In v = sqrt(x + 1) the law is Exp(2) with x = v² − 1.
    let (vl, vh) = ((lo + 1.0).sqrt(), (hi + 1.0).sqrt());
    let g = |v: f64| 2.0 * (-2.0 * v).exp() * (v * v - 1.0);
    let num = if vh.is_finite() { tanh_sinh(g, vl, vh) } else { tanh_sinh_upper(g, vl) };
    let den = (-2.0 * vl).exp() - (-2.0 * vh).exp();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_self_check() {
        assert!((tanh_sinh(|x| x.exp(), 0.0, 1.0) - (1f64.exp() - 1.0)).abs() < 1e-13);
        assert!((tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0) - 2.0).abs() < 1e-9);
        assert!((tanh_sinh_upper(|x| (-x).exp(), 0.0) - 1.0).abs() < 1e-12);
    }
}
