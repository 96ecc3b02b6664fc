//! Per-state mixture change of measure.
//!
//! At distance d = b − s the increment density is a mixture of f restricted to
//! (−∞, c₀], to each (c_{j−1}, c_j] for j < k, a reflected piece
//! f(d − x) on (c_{k−1}, c_k], and f restricted to (c_k, ∞). Supports partition
//! the line, so the likelihood ratio is determined by position alone.

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Result, RuinError};
use crate::hazard::{IncrementModel, TailClass};
use crate::tuning::TuningParams;

type Cuts = SmallVec<[f64; 8]>;

/// Cutoff recipe evaluated at distance d, for reproducing fixed experimental designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffRule {
    /// a · d
    Fraction(f64),
    /// √d
    Sqrt,
    /// d − √d
    DistanceMinusSqrt,
    /// d − Λ⁻¹(Λ(d) − a), the lower hazard rule with a = a_*.
    HazardLower(f64),
    /// Λ⁻¹(Λ(d) − a), the upper hazard rule with a = a_**.
    HazardUpper(f64),
}

impl CutoffRule {
    pub fn eval(&self, model: &IncrementModel, d: f64) -> Result<f64> {
        Ok(match *self {
            CutoffRule::Fraction(a) => a * d,
            CutoffRule::Sqrt => d.sqrt(),
            CutoffRule::DistanceMinusSqrt => d - d.sqrt(),
            CutoffRule::HazardLower(a) => d - model.inverse_cumulative_hazard((model.cumulative_hazard(d)? - a).max(0.0))?,
            CutoffRule::HazardUpper(a) => model.inverse_cumulative_hazard((model.cumulative_hazard(d)? - a).max(0.0))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixturePlan {
    pub distance: f64,
    pub nominal: bool,
    /// c₀ < c₁ < … < c_k.
    pub cutoffs: Cuts,
    pub p_star: f64,
    pub p_star_star: f64,
    /// Common value of p₁ … p_k.
    pub p_mid: f64,
    /// ln P(X ≤ c₀).
    pub ln_mass_star: f64,
    /// ln P(X > c_k).
    pub ln_mass_tail: f64,
    /// ln P(X ∈ (c_{j−1}, c_j]) for j < k, then ln P(X ∈ (d − c_k, d − c_{k−1}]).
    pub ln_mass_mid: Cuts,
}

impl MixturePlan {
    pub fn nominal(distance: f64) -> Self {
        Self {
            distance,
            nominal: true,
            cutoffs: Cuts::new(),
            p_star: 1.0,
            p_star_star: 0.0,
            p_mid: 0.0,
            ln_mass_star: 0.0,
            ln_mass_tail: f64::NEG_INFINITY,
            ln_mass_mid: Cuts::new(),
        }
    }

    /// Plan at walk position s for barrier b.
    pub fn for_state(model: &IncrementModel, params: &TuningParams, b: f64, s: f64) -> Result<Self> {
        Self::for_distance(model, params, b - s)
    }

    pub fn for_distance(model: &IncrementModel, params: &TuningParams, d: f64) -> Result<Self> {
        let mut plan = Self::nominal(d);
        plan.refresh(model, params, d)?;
        Ok(plan)
    }

    /// Recompute the plan for distance d in place, reusing storage.
    pub fn refresh(&mut self, model: &IncrementModel, params: &TuningParams, d: f64) -> Result<()> {
        if !(d > 0.0) {
            return Err(RuinError::Domain { what: "plan distance b - s", value: d });
        }
        self.distance = d;
        self.cutoffs.clear();
        self.ln_mass_mid.clear();
        if d <= params.eta_star {
            self.nominal = true;
            self.p_star = 1.0;
            self.p_star_star = 0.0;
            self.p_mid = 0.0;
            self.ln_mass_star = 0.0;
            self.ln_mass_tail = f64::NEG_INFINITY;
            return Ok(());
        }
        self.nominal = false;
        let (ln_sf_d, ln_g_d) = model.ln_sf_and_integrated_tail(d);
        let p_ss = (params.theta * (1.0 + params.gamma) * (ln_sf_d - ln_g_d).exp()).min(params.eps_tilde);

        let cutoffs = &mut self.cutoffs;
        // Λ(c_k) when c_k came from the hazard rule, which spares one tail evaluation.
        let mut hazard_level = None;
        if let Some(rules) = &params.cutoff_override {
            for r in rules {
                cutoffs.push(r.eval(model, d)?);
            }
        } else {
            let y = (-ln_sf_d - params.a_star_star).max(0.0);
            let c_k = match model.tail_class() {
                // F̄ is close to Pareto, so (1 + c_k) ≈ (1 + d) e^{−a**/ι} seeds Newton well.
                TailClass::RegularlyVarying { index } => {
                    model.inverse_cumulative_hazard_near(y, (1.0 + d) * (-params.a_star_star / index).exp() - 1.0)?
                }
                TailClass::ConcaveHazard { .. } => {
                    let a = params.a_star.ok_or_else(|| RuinError::InvalidParameter("a_star is required".into()))?;
                    cutoffs.push(d - model.inverse_cumulative_hazard((-ln_sf_d - a).max(0.0))?);
                    for &aj in &params.a_grid {
                        cutoffs.push(aj * d);
                    }
                    model.inverse_cumulative_hazard(y)?
                }
            };
            // Under regular variation c₀ = c_k, which fixes a_* per state.
            cutoffs.push(c_k);
            if y > 0.0 {
                hazard_level = Some(y);
            }
        }
        let k = cutoffs.len() - 1;
        let ordered = cutoffs[k] < d && cutoffs.iter().all(|c| c.is_finite()) && cutoffs.windows(2).all(|w| w[0] < w[1]);
        if !ordered {
            return Err(RuinError::InconsistentCutoffs { distance: d, cutoffs: cutoffs.to_vec() });
        }
        self.p_star_star = p_ss;
        self.p_mid = params.eps_tilde1 * p_ss;
        self.p_star = 1.0 - p_ss * (1.0 + k as f64 * params.eps_tilde1);

        let c = &self.cutoffs;
        let ln_sf_k = hazard_level.map_or_else(|| model.ln_sf(c[k]), |y| -y);
        let ln_sf_0 = if k == 0 { ln_sf_k } else { model.ln_sf(c[0]) };
        self.ln_mass_star = model.ln_cdf_given_sf(c[0], ln_sf_0);
        self.ln_mass_tail = ln_sf_k;
        if k >= 1 {
            let mut prev = ln_sf_0;
            for j in 1..k {
                let cur = model.ln_sf(c[j]);
                self.ln_mass_mid.push(model.ln_interval_mass_given_sf(c[j - 1], c[j], prev, cur));
                prev = cur;
            }
            self.ln_mass_mid.push(model.ln_interval_mass(d - c[k], d - c[k - 1]));
        }
        Ok(())
    }

    /// The a_* implied by c₀: Λ(d) − Λ(d − c₀).
    pub fn a_star(&self, model: &IncrementModel) -> Result<f64> {
        if self.nominal {
            return Err(RuinError::NotApplicable("a_star of a nominal plan"));
        }
        Ok(model.cumulative_hazard(self.distance)? - model.cumulative_hazard(self.distance - self.cutoffs[0])?)
    }

    /// Number of intermediate components (k).
    pub fn k(&self) -> usize {
        self.cutoffs.len().saturating_sub(1)
    }

    /// Probabilities in sampling order (p_*, p₁, …, p_k, p_**).
    pub fn probabilities(&self) -> Vec<f64> {
        if self.nominal {
            return vec![1.0];
        }
        let mut v = vec![self.p_star];
        v.extend(std::iter::repeat_n(self.p_mid, self.k()));
        v.push(self.p_star_star);
        v
    }

    /// ln r_s(x) = ln f(x) − ln q_s(x), by position.
    pub fn log_weight(&self, model: &IncrementModel, x: f64) -> Result<f64> {
        if !(x > model.support_inf()) {
            return Err(RuinError::Domain { what: "likelihood ratio (f(x) = 0)", value: x });
        }
        if self.nominal {
            return Ok(0.0);
        }
        let c = &self.cutoffs;
        let k = c.len() - 1;
        if x <= c[0] {
            return Ok(self.ln_mass_star - self.p_star.ln());
        }
        if x > c[k] {
            return Ok(self.ln_mass_tail - self.p_star_star.ln());
        }
        let j = c.partition_point(|&cj| cj < x);
        if j < k {
            Ok(self.ln_mass_mid[j - 1] - self.p_mid.ln())
        } else {
            let ln_f = model.ln_pdf(x);
            let ln_fr = model.ln_pdf(self.distance - x);
            Ok(ln_f - ln_fr + self.ln_mass_mid[k - 1] - self.p_mid.ln())
        }
    }

    /// ln q_s(x), summing every component density independently.
    pub fn ln_density(&self, model: &IncrementModel, x: f64) -> f64 {
        if self.nominal {
            return model.ln_pdf(x);
        }
        let c = &self.cutoffs;
        let k = c.len() - 1;
        let mut terms: SmallVec<[f64; 4]> = SmallVec::new();
        if x <= c[0] {
            terms.push(self.p_star.ln() + model.ln_pdf(x) - self.ln_mass_star);
        }
        for j in 1..k {
            if c[j - 1] < x && x <= c[j] {
                terms.push(self.p_mid.ln() + model.ln_pdf(x) - self.ln_mass_mid[j - 1]);
            }
        }
        if k >= 1 && c[k - 1] < x && x <= c[k] {
            terms.push(self.p_mid.ln() + model.ln_pdf(self.distance - x) - self.ln_mass_mid[k - 1]);
        }
        if x > c[k] {
            terms.push(self.p_star_star.ln() + model.ln_pdf(x) - self.ln_mass_tail);
        }
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }

    pub fn density(&self, model: &IncrementModel, x: f64) -> f64 {
        self.ln_density(model, x).exp()
    }

    /// Draw x ~ q_s and return (x, ln r_s(x)).
    #[inline]
    pub fn sample_increment<R: Rng + ?Sized>(&self, model: &IncrementModel, rng: &mut R) -> Result<(f64, f64)> {
        if self.nominal {
            return Ok((model.sample_nominal(rng), 0.0));
        }
        let u: f64 = rng.random();
        let x = self.draw(model, u, rng)?;
        Ok((x, self.log_weight(model, x)?))
    }

    /// Draw from q_s conditioned on X > c₀ (every component except f_*).
    pub fn sample_beyond_first_cutoff<R: Rng + ?Sized>(&self, model: &IncrementModel, rng: &mut R) -> Result<(f64, f64)> {
        if self.nominal {
            return Err(RuinError::NotApplicable("conditioning a nominal plan on its cutoffs"));
        }
        let r: f64 = rng.random();
        let x = self.draw(model, self.p_star + r * (1.0 - self.p_star), rng)?;
        Ok((x, self.log_weight(model, x)?))
    }

    /// Component selected by u ∈ [0, 1) in the order (f_*, f_1, …, f_k, f_**), then drawn.
    #[inline]
    fn draw<R: Rng + ?Sized>(&self, model: &IncrementModel, mut u: f64, rng: &mut R) -> Result<f64> {
        let c = &self.cutoffs;
        let k = c.len() - 1;
        if u < self.p_star {
            return model.sample_conditional_with_mass(f64::NEG_INFINITY, c[0], self.ln_mass_star, rng);
        }
        u -= self.p_star;
        let j = if self.p_mid > 0.0 { (u / self.p_mid) as usize + 1 } else { k + 1 };
        if j < k {
            model.sample_conditional_with_mass(c[j - 1], c[j], self.ln_mass_mid[j - 1], rng)
        } else if j == k {
            let d = self.distance;
            Ok(d - model.sample_conditional_with_mass(d - c[k], d - c[k - 1], self.ln_mass_mid[k - 1], rng)?)
        } else {
            model.sample_conditional_with_mass(c[k], f64::INFINITY, self.ln_mass_tail, rng)
        }
    }

    /// Support pieces (lo, hi] of each component, in sampling order.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        if self.nominal {
            return vec![(f64::NEG_INFINITY, f64::INFINITY)];
        }
        let c = &self.cutoffs;
        let mut v = vec![(f64::NEG_INFINITY, c[0])];
        for j in 1..c.len() {
            v.push((c[j - 1], c[j]));
        }
        v.push((c[c.len() - 1], f64::INFINITY));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_split, QuadOptions};
    use crate::tuning::{select_variance_params, Mode, Overrides};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn mg1() -> &'static IncrementModel {
        static M: OnceLock<IncrementModel> = OnceLock::new();
        M.get_or_init(|| IncrementModel::mg1_pareto(2.5, 4.0 / 3.0).unwrap())
    }

    fn table1_params() -> TuningParams {
        let o = Overrides { cutoff_override: Some(vec![CutoffRule::Fraction(0.9)]), ..Default::default() };
        select_variance_params(mg1(), Mode::StrongEfficiency, &o).unwrap()
    }

    fn table2_params() -> TuningParams {
        let o = Overrides {
            cutoff_override: Some(vec![
                CutoffRule::Sqrt,
                CutoffRule::Fraction(0.1),
                CutoffRule::Fraction(0.5),
                CutoffRule::Fraction(0.9),
                CutoffRule::DistanceMinusSqrt,
            ]),
            eta_floor: Some(100.0),
            ..Default::default()
        };
        select_variance_params(&IncrementModel::weibull(), Mode::StrongEfficiency, &o).unwrap()
    }

    fn default_params(m: &IncrementModel) -> TuningParams {
        select_variance_params(m, Mode::StrongEfficiency, &Overrides::default()).unwrap()
    }

    fn cases() -> Vec<(IncrementModel, TuningParams)> {
        let w = IncrementModel::weibull();
        vec![
            (mg1().clone(), default_params(mg1())),
            (mg1().clone(), table1_params()),
            (w.clone(), default_params(&w)),
            (w, table2_params()),
        ]
    }

    #[test]
    fn probabilities_sum_to_one_and_follow_the_rule() {
        for (m, p) in cases() {
            for &d in &[p.eta_star * 1.01, 2.0 * p.eta_star, 10.0 * p.eta_star, 1e4] {
                let plan = MixturePlan::for_distance(&m, &p, d).unwrap();
                let probs = plan.probabilities();
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
                assert!(probs.iter().all(|&q| (0.0..1.0).contains(&q)));
                let rule = (2.0 * p.theta * m.sf(d) / m.integrated_tail(d)).min(p.eps_tilde);
                assert!((plan.p_star_star - rule).abs() <= 1e-14 * rule);
                assert!((plan.p_mid - p.eps_tilde1 * plan.p_star_star).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn nominal_inside_eta_star() {
        for (m, p) in cases() {
            let plan = MixturePlan::for_distance(&m, &p, p.eta_star).unwrap();
            assert!(plan.nominal);
            for &x in &[-0.5, 0.3, 7.0] {
                assert_eq!(plan.log_weight(&m, x).unwrap(), 0.0);
                assert!((plan.ln_density(&m, x) - m.ln_pdf(x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn table1_override_gives_two_components() {
        let p = table1_params();
        let plan = MixturePlan::for_distance(mg1(), &p, 1000.0).unwrap();
        assert_eq!(plan.cutoffs.as_slice(), &[900.0]);
        assert_eq!(plan.probabilities().len(), 2);
    }

    #[test]
    fn regularly_varying_collapse() {
        let m = mg1();
        let p = default_params(m);
        for &d in &[50.0f64, 300.0, 1e4] {
            let d = d.max(1.5 * p.eta_star);
            let plan = MixturePlan::for_distance(m, &p, d).unwrap();
            assert_eq!(plan.k(), 0);
            // c₀ from the lower rule with the solved a_* equals c_k.
            let lam = m.cumulative_hazard(d).unwrap();
            let c0 = d - m.inverse_cumulative_hazard(lam - plan.a_star(m).unwrap()).unwrap();
            assert!((c0 - plan.cutoffs[0]).abs() <= 1e-10 * d, "{c0} vs {}", plan.cutoffs[0]);
            let ck = m.inverse_cumulative_hazard(lam - p.a_star_star).unwrap();
            assert!((ck - plan.cutoffs[0]).abs() <= 1e-10 * d);
        }
    }

    #[test]
    fn weibull_default_cutoffs_closed_form() {
        let w = IncrementModel::weibull();
        let p = default_params(&w);
        let d = 400.0f64.max(1.5 * p.eta_star);
        let plan = MixturePlan::for_distance(&w, &p, d).unwrap();
        let a = p.a_star.unwrap();
        let c0 = d - ((d + 1.0).sqrt() - 0.5 * a).powi(2) + 1.0;
        assert!((plan.cutoffs[0] - c0).abs() < 1e-9 * d);
        assert!(plan.cutoffs[0] < plan.cutoffs[1]);
        assert!((plan.cutoffs[1] - p.a_grid[0] * d).abs() < 1e-12 * d);
        let ck = ((d + 1.0).sqrt() - 0.5 * p.a_star_star).powi(2) - 1.0;
        assert!((plan.cutoffs[plan.k()] - ck).abs() < 1e-9 * d);
    }

    #[test]
    fn inconsistent_cutoffs_surface() {
        let w = IncrementModel::weibull();
        let mut p = table2_params();
        // √d > 0.1 d when d < 100: ordering breaks inside the override.
        p.eta_star = 1.0;
        assert!(matches!(MixturePlan::for_distance(&w, &p, 50.0), Err(RuinError::InconsistentCutoffs { .. })));
    }

    #[test]
    fn weight_branches() {
        let p = table1_params();
        let plan = MixturePlan::for_distance(mg1(), &p, 1000.0).unwrap();
        let lw = plan.log_weight(mg1(), 10.0).unwrap();
        assert!((lw - (mg1().ln_cdf(900.0) - plan.p_star.ln())).abs() < 1e-15);
        let w = IncrementModel::weibull();
        assert!(plan.log_weight(&w, -2.0).is_err());
    }

    #[test]
    fn weight_matches_density_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (m, p) in cases() {
            for &d in &[1.3 * p.eta_star, 4.0 * p.eta_star, 3000.0] {
                let plan = MixturePlan::for_distance(&m, &p, d).unwrap();
                for _ in 0..1000 {
                    let (x, lw) = plan.sample_increment(&m, &mut rng).unwrap();
                    let direct = m.pdf(x) / plan.density(&m, x);
                    let via = (m.ln_pdf(x) - plan.ln_density(&m, x)).exp();
                    assert!((lw.exp() / via - 1.0).abs() < 1e-9, "{} d={d} x={x}", m.name());
                    if direct.is_finite() && direct > 0.0 {
                        assert!((lw.exp() / direct - 1.0).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn reflected_density_formula() {
        let w = IncrementModel::weibull();
        let p = table2_params();
        let d = 500.0;
        let plan = MixturePlan::for_distance(&w, &p, d).unwrap();
        let k = plan.k();
        let (lo, hi) = (plan.cutoffs[k - 1], plan.cutoffs[k]);
        let x = 0.5 * (lo + hi);
        let expect = plan.p_mid * w.pdf(d - x) / w.ln_interval_mass(d - hi, d - lo).exp();
        assert!((plan.density(&w, x) / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_integrates_to_one() {
        let opts = QuadOptions { rel_tol: 1e-10, ..Default::default() };
        for (m, p) in cases() {
            for i in 0..20 {
                let d = p.eta_star * 1.05 * (1e4 / p.eta_star).powf(i as f64 / 19.0);
                let plan = MixturePlan::for_distance(&m, &p, d).unwrap();
                let mut total = 0.0;
                for (lo, hi) in plan.pieces() {
                    let lo = lo.max(m.support_inf());
                    let mut br = m.kinks().to_vec();
                    br.push(d - 1.0);
                    total += integrate_split(|x| plan.density(&m, x), lo, hi, &br, &opts).unwrap().value;
                }
                assert!((total - 1.0).abs() <= 1e-6, "{} d={d}: {total}", m.name());
            }
        }
    }

    #[test]
    fn tail_component_lands_beyond_the_barrier_with_the_right_frequency() {
        // P(X > d | X > c_k) = F̄(d)/F̄(c_k), which equals e^{-a**} when c_k = Λ⁻¹(Λ(d) − a**).
        let m = mg1();
        let p = default_params(m);
        let d = 2000.0;
        let plan = MixturePlan::for_distance(m, &p, d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let hits = (0..n).filter(|_| m.sample_conditional_interval(plan.cutoffs[0], f64::INFINITY, &mut rng).unwrap() > d).count() as f64;
        let target = (-p.a_star_star).exp();
        let se = (target * (1.0 - target) / n as f64).sqrt();
        assert!((hits / n as f64 - target).abs() < 3.0 * se, "{} vs {target}", hits / n as f64);
    }

    #[test]
    fn inverse_weights_average_to_one() {
        for (m, p) in cases() {
            let d = 5.0 * p.eta_star;
            let plan = MixturePlan::for_distance(&m, &p, d).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let n = 100_000;
            // E^Q[r] = ∫ f = 1, and r is bounded here, so the mean has a clean SE.
            let ws: Vec<f64> = (0..n).map(|_| plan.sample_increment(&m, &mut rng).unwrap().1.exp()).collect();
            let mean = ws.iter().sum::<f64>() / n as f64;
            let var = ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((mean - 1.0).abs() < 3.0 * (var / n as f64).sqrt() + 1e-12, "{}: {mean}", m.name());
        }
    }

    #[test]
    fn reflection_reproduces_the_reflected_density() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let w = IncrementModel::weibull();
        let p = table2_params();
        let d = 400.0;
        let plan = MixturePlan::for_distance(&w, &p, d).unwrap();
        let k = plan.k();
        let (lo, hi) = (plan.cutoffs[k - 1], plan.cutoffs[k]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let bins = 50;
        let mut counts = vec![0usize; bins];
        let n = 100_000;
        for _ in 0..n {
            let x = d - w.sample_conditional_interval(d - hi, d - lo, &mut rng).unwrap();
            assert!(x > lo && x <= hi + 1e-9 * d);
            let b = (((x - lo) / (hi - lo)) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let opts = QuadOptions::default();
        let mass: f64 = integrate_split(|x| plan.density(&w, x), lo, hi, &[], &opts).unwrap().value;
        let mut stat = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let a = lo + (hi - lo) * b as f64 / bins as f64;
            let z = lo + (hi - lo) * (b + 1) as f64 / bins as f64;
            let e = n as f64 * integrate_split(|x| plan.density(&w, x), a, z, &[], &opts).unwrap().value / mass;
            stat += (c as f64 - e).powi(2) / e;
        }
        let pval = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
        assert!(pval > 1e-3, "p = {pval}");
    }

    proptest! {
        #[test]
        fn supports_partition_the_line(x in -50.0f64..5000.0, dfrac in 1.05f64..200.0) {
            for (m, p) in cases() {
                if x <= m.support_inf() { continue; }
                let plan = MixturePlan::for_distance(&m, &p, dfrac * p.eta_star).unwrap();
                let active = plan.pieces().iter().filter(|(lo, hi)| *lo < x && x <= *hi).count();
                prop_assert_eq!(active, 1);
                // Absolute continuity.
                if m.pdf(x) > 0.0 {
                    prop_assert!(plan.ln_density(&m, x) > f64::NEG_INFINITY);
                }
            }
        }
    }
}
