//! Asymptotic formulas and conditional-law diagnostics.
//!
//! Given ruin, τ_b/a(b) → Y₀/|μ| and (S_τ − b)/a(b) → Y₁, where Y₀ and Y₁ share
//! one law (Pareto type with index ι − 1, or unit exponential) and
//! P(Y₀ > y₀, Y₁ > y₁) = P(Y₀ > y₀ + y₁). Pre-jump fluctuations are Brownian, so
//! the midpoint (S_{⌊τ/2⌋} − τμ/2)/(σ√τ) → N(0, 1/2).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::PathFunctionals;
use crate::error::{Result, RuinError};
use crate::hazard::IncrementModel;
use crate::parallel::map_blocks;
use crate::rng::{replication_rng, Purpose};
use crate::sampler::MixturePlan;
use crate::stats::{effective_sample_size, ks_statistic, weighted_ecdf, weighted_ks_statistic};
use crate::tuning::{Mode, TuningParams};

/// Minimum number of hitting paths for diagnostics.
pub const MIN_PATHS: usize = 1000;
/// Desk-scale KS acceptance threshold; a choice, not a theorem.
pub const KS_THRESHOLD: f64 = 0.05;
pub const BOOTSTRAP_RESAMPLES: u64 = 200;
const ECDF_POINTS: usize = 41;
const JOINT_GRID: [f64; 3] = [0.25, 1.0, 3.0];

/// ln(G(b)/|μ|), the first-order ruin asymptotic. Meaningful for b > b₀.
pub fn pv_approx(model: &IncrementModel, b: f64) -> f64 {
    model.ln_integrated_tail(b) - model.mean_drift().abs().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvBound {
    pub bound: f64,
    /// Inputs crossed (noise) or the bound exceeded 1; the value was clamped.
    pub clamped: bool,
}

/// √(E Z²/u² − 1), clamped into [0, 1].
pub fn tv_upper_bound(second_moment: f64, u_squared: f64) -> TvBound {
    let excess = second_moment / u_squared - 1.0;
    if !(excess >= 0.0) {
        return TvBound { bound: 0.0, clamped: true };
    }
    let v = excess.sqrt();
    if v > 1.0 {
        TvBound { bound: 1.0, clamped: true }
    } else {
        TvBound { bound: v, clamped: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LimitLaw {
    /// P(Y > t) = (1 + t/(ι − 1))^{−(ι − 1)}.
    ParetoType { iota: f64 },
    /// P(Y > t) = e^{−t}.
    UnitExponential,
}

impl LimitLaw {
    pub fn for_model(model: &IncrementModel) -> Self {
        match model {
            IncrementModel::Mg1Pareto(m) => LimitLaw::ParetoType { iota: m.service_index() },
            IncrementModel::Weibull(_) => LimitLaw::UnitExponential,
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            LimitLaw::ParetoType { iota } => {
                let r = iota - 1.0;
                (-r * (t / r).ln_1p()).exp()
            }
            LimitLaw::UnitExponential => (-t).exp(),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            LimitLaw::ParetoType { iota } => {
                let r = iota - 1.0;
                -(-r * (t / r).ln_1p()).exp_m1()
            }
            LimitLaw::UnitExponential => -(-t).exp_m1(),
        }
    }

    /// Smallest t with cdf(t) ≥ p, for p ∈ [0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        let ln_s = (-p).ln_1p();
        match *self {
            LimitLaw::ParetoType { iota } => {
                let r = iota - 1.0;
                r * (-ln_s / r).exp_m1()
            }
            LimitLaw::UnitExponential => -ln_s,
        }
    }
}

/// CDF of N(0, 1/2), i.e. Φ(x√2).
pub fn half_normal_variance_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfRow {
    pub t: f64,
    pub empirical: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalDiagnostic {
    pub ks: f64,
    pub pass: bool,
    pub ecdf: Vec<EcdfRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCell {
    pub y0: f64,
    pub y1: f64,
    /// Weighted P(|μ|τ/a > y₀, overshoot/a > y₁).
    pub empirical: f64,
    /// P(Y > y₀ + y₁).
    pub limit: f64,
    pub bootstrap_se: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub b: f64,
    pub paths: usize,
    pub effective_sample_size: f64,
    pub mean_excess_scale: f64,
    pub mu: f64,
    pub sigma: Option<f64>,
    pub law: LimitLaw,
    pub ks_threshold: f64,
    /// τ/a(b) against Y₀/|μ|.
    pub tau: FunctionalDiagnostic,
    /// (S_τ − b)/a(b) against Y₁.
    pub overshoot: FunctionalDiagnostic,
    /// Absent when σ² is infinite.
    pub midpoint: Option<FunctionalDiagnostic>,
    pub joint: Vec<JointCell>,
    pub bootstrap_resamples: u64,
}

impl DiagnosticsReport {
    pub fn pass(&self) -> bool {
        self.tau.pass && self.overshoot.pass && self.midpoint.as_ref().is_none_or(|m| m.pass)
    }
}

fn functional<F: Fn(f64) -> f64>(pairs: &[(f64, f64)], grid: &[f64], cdf: F) -> FunctionalDiagnostic {
    let ks = weighted_ks_statistic(pairs, &cdf);
    let emp = weighted_ecdf(pairs, grid);
    let ecdf = grid.iter().zip(emp).map(|(&t, e)| EcdfRow { t, empirical: e, limit: cdf(t) }).collect();
    FunctionalDiagnostic { ks, pass: ks <= KS_THRESHOLD, ecdf }
}

fn quantile_grid<Q: Fn(f64) -> f64>(q: Q) -> Vec<f64> {
    (1..ECDF_POINTS).map(|i| q(i as f64 / ECDF_POINTS as f64)).collect()
}

/// Self-normalised weights exp(lw − max lw); invariant to a common weight factor.
fn normalised_weights(paths: &[PathFunctionals]) -> Vec<f64> {
    let m = paths.iter().map(|p| p.log_weight).fold(f64::NEG_INFINITY, f64::max);
    paths.iter().map(|p| (p.log_weight - m).exp()).collect()
}

/// Compares the reweighted law of hitting paths with the conditional limit laws.
pub fn conditional_diagnostics(paths: &[PathFunctionals], model: &IncrementModel, b: f64, seed: u64) -> Result<DiagnosticsReport> {
    if paths.len() < MIN_PATHS {
        return Err(RuinError::InsufficientSample { needed: MIN_PATHS, have: paths.len() });
    }
    let a = model.mean_excess_scale(b)?;
    let mu = model.mean_drift();
    let m = mu.abs();
    let sigma = model.variance().map(f64::sqrt);
    let law = LimitLaw::for_model(model);
    let w = normalised_weights(paths);

    let tau_pairs: Vec<(f64, f64)> = paths.iter().zip(&w).map(|(p, &w)| (p.tau as f64 / a, w)).collect();
    let tau = functional(&tau_pairs, &quantile_grid(|p| law.quantile(p) / m), |t| law.cdf(m * t));

    let over_pairs: Vec<(f64, f64)> = paths.iter().zip(&w).map(|(p, &w)| (p.overshoot / a, w)).collect();
    let overshoot = functional(&over_pairs, &quantile_grid(|p| law.quantile(p)), |t| law.cdf(t));

    let midpoint = sigma.map(|sd| {
        let pairs: Vec<(f64, f64)> = paths
            .iter()
            .zip(&w)
            .map(|(p, &w)| {
                let t = p.tau as f64;
                ((p.midpoint - 0.5 * t * mu) / (sd * t.sqrt()), w)
            })
            .collect();
        let grid: Vec<f64> = (0..ECDF_POINTS).map(|i| -2.0 + 4.0 * i as f64 / (ECDF_POINTS - 1) as f64).collect();
        functional(&pairs, &grid, half_normal_variance_cdf)
    });

    let joint = joint_cells(&tau_pairs, &over_pairs, m, &law, seed);

    Ok(DiagnosticsReport {
        b,
        paths: paths.len(),
        effective_sample_size: effective_sample_size(&w),
        mean_excess_scale: a,
        mu,
        sigma,
        law,
        ks_threshold: KS_THRESHOLD,
        tau,
        overshoot,
        midpoint,
        joint,
        bootstrap_resamples: BOOTSTRAP_RESAMPLES,
    })
}

fn joint_estimates(tau: &[(f64, f64)], over: &[(f64, f64)], m: f64, idx: impl Iterator<Item = usize> + Clone) -> [f64; 9] {
    let mut num = [0.0; 9];
    let mut total = 0.0;
    for i in idx {
        let (t, w) = tau[i];
        let y0 = m * t;
        let y1 = over[i].0;
        total += w;
        for (gi, &g0) in JOINT_GRID.iter().enumerate() {
            if y0 <= g0 {
                continue;
            }
            for (gj, &g1) in JOINT_GRID.iter().enumerate() {
                if y1 > g1 {
                    num[3 * gi + gj] += w;
                }
            }
        }
    }
    num.map(|v| v / total)
}

fn joint_cells(tau: &[(f64, f64)], over: &[(f64, f64)], m: f64, law: &LimitLaw, seed: u64) -> Vec<JointCell> {
    let n = tau.len();
    let point = joint_estimates(tau, over, m, 0..n);
    let mut sum = [0.0; 9];
    let mut sum_sq = [0.0; 9];
    let mut idx = vec![0usize; n];
    for rep in 0..BOOTSTRAP_RESAMPLES {
        let mut rng = replication_rng(seed, Purpose::Bootstrap, rep);
        for v in idx.iter_mut() {
            *v = rng.random_range(0..n);
        }
        let e = joint_estimates(tau, over, m, idx.iter().copied());
        for c in 0..9 {
            sum[c] += e[c];
            sum_sq[c] += e[c] * e[c];
        }
    }
    let bn = BOOTSTRAP_RESAMPLES as f64;
    let mut cells = Vec::with_capacity(9);
    for (gi, &y0) in JOINT_GRID.iter().enumerate() {
        for (gj, &y1) in JOINT_GRID.iter().enumerate() {
            let c = 3 * gi + gj;
            let mean = sum[c] / bn;
            let se = ((sum_sq[c] / bn - mean * mean).max(0.0) * bn / (bn - 1.0)).sqrt();
            let limit = law.survival(y0 + y1);
            cells.push(JointCell {
                y0,
                y1,
                empirical: point[c],
                limit,
                bootstrap_se: se,
                within_3se: (point[c] - limit).abs() <= 3.0 * se,
            });
        }
    }
    cells
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    /// First step at which the importance walk leaves the nominal one; None when
    /// that never happens before ruin (the ∞ marker: past the barrier p(s) = 1).
    pub n_b: Option<u64>,
    pub tau: u64,
    /// τ_b = N_b.
    pub equal: bool,
    pub censored: bool,
}

/// p(s) = p_*/P(X ≤ c₀) off the nominal region, 1 inside it.
pub fn coupling_probability(plan: &MixturePlan) -> f64 {
    if plan.nominal {
        1.0
    } else {
        (plan.p_star.ln() - plan.ln_mass_star).exp()
    }
}

/// Draw from q*_s = (q_s − p f)/(1 − p) by rejection.
///
/// q*_s vanishes on (−∞, c₀], so proposals come from q_s conditioned on X > c₀
/// and are accepted with probability 1 − p·f/q_s.
pub fn sample_residual<R: Rng + ?Sized>(plan: &MixturePlan, model: &IncrementModel, p: f64, rng: &mut R) -> Result<f64> {
    loop {
        let (x, ln_r) = plan.sample_beyond_first_cutoff(model, rng)?;
        let accept = 1.0 - p * ln_r.exp();
        if accept < -1e-9 {
            return Err(RuinError::NegativeResidual { x, distance: plan.distance, value: accept });
        }
        if rng.random::<f64>() < accept {
            return Ok(x);
        }
    }
}

/// Evolve the importance walk Ŝ coupled to a nominal walk S̃.
///
/// With probability p(s) both take the same f-draw; otherwise Ŝ draws from q*_s
/// and S̃ from f independently, so the walks separate almost surely. S̃ is not
/// needed past that point and is not simulated.
pub fn coupled_replication<R: Rng + ?Sized>(
    model: &IncrementModel,
    tv_params: &TuningParams,
    b: f64,
    rng: &mut R,
    step_cap: u64,
) -> Result<CouplingResult> {
    if !(b > 0.0) {
        return Err(RuinError::Domain { what: "barrier b", value: b });
    }
    let (mut s, mut tau) = (0.0f64, 0u64);
    let mut n_b = None;
    let mut plan = MixturePlan::nominal(b);
    loop {
        if tau >= step_cap {
            return Ok(CouplingResult { n_b, tau, equal: false, censored: true });
        }
        plan.refresh(model, tv_params, b - s)?;
        tau += 1;
        let x = if n_b.is_some() {
            plan.sample_increment(model, rng)?.0
        } else {
            let p = coupling_probability(&plan);
            if p > 1.0 + 1e-12 {
                return Err(RuinError::NegativeResidual { x: plan.cutoffs[0], distance: plan.distance, value: 1.0 - p });
            }
            if p >= 1.0 || rng.random::<f64>() < p {
                model.sample_nominal(rng)
            } else {
                n_b = Some(tau);
                sample_residual(&plan, model, p, rng)?
            }
        };
        s += x;
        if s > b {
            return Ok(CouplingResult { n_b, tau, equal: n_b == Some(tau), censored: false });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub b: f64,
    pub n: u64,
    pub seed: u64,
    pub theta: f64,
    pub mean_excess_scale: f64,
    /// Q*(τ_b = N_b).
    pub equal_fraction: f64,
    /// Q*(N_b ≤ τ_b).
    pub decoupled_fraction: f64,
    pub censored: u64,
    /// N_b/a(b) against P(Z_θ > t|μ|); non-decoupled paths count as +∞.
    pub ks_n_b: f64,
    pub ks_threshold: f64,
    pub ecdf: Vec<EcdfRow>,
}

/// P(N_b/a(b) > t) in the limit: P(Y > |μ|t)^{2θ/|μ|}.
pub fn n_b_survival(law: &LimitLaw, theta: f64, mu_abs: f64, t: f64) -> f64 {
    law.survival(mu_abs * t).powf(2.0 * theta / mu_abs)
}

/// n coupled replications; requires TotalVariation-mode parameters.
pub fn coupling_experiment(
    model: &IncrementModel,
    tv_params: &TuningParams,
    b: f64,
    n: u64,
    seed: u64,
    shards: usize,
    step_cap: u64,
) -> Result<CouplingReport> {
    if !matches!(tv_params.mode, Mode::TotalVariation { .. }) {
        return Err(RuinError::InvalidParameter("coupling needs TotalVariation-mode parameters".into()));
    }
    if n == 0 {
        return Err(RuinError::InvalidParameter("n = 0 coupled replications".into()));
    }
    let parts = map_blocks(n, shards, |lo, hi| {
        (lo..hi)
            .map(|i| {
                let mut rng = replication_rng(seed, Purpose::Coupling, i);
                coupled_replication(model, tv_params, b, &mut rng, step_cap)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let results: Vec<CouplingResult> = parts.into_iter().flatten().collect();
    let a = model.mean_excess_scale(b)?;
    let m = model.mean_drift().abs();
    let law = LimitLaw::for_model(model);
    let theta = tv_params.theta;
    let cdf = |t: f64| 1.0 - n_b_survival(&law, theta, m, t);

    let nf = n as f64;
    let equal = results.iter().filter(|r| r.equal).count() as f64;
    let decoupled = results.iter().filter(|r| r.n_b.is_some()).count() as f64;
    let censored = results.iter().filter(|r| r.censored).count() as u64;
    let scaled: Vec<f64> = results.iter().map(|r| r.n_b.map_or(f64::INFINITY, |k| k as f64 / a)).collect();
    let ks = ks_statistic(&scaled, cdf);
    let grid = quantile_grid(|p| law.quantile(1.0 - (1.0 - p).powf(m / (2.0 * theta))) / m);
    let unit: Vec<(f64, f64)> = scaled.iter().map(|&v| (v, 1.0)).collect();
    let ecdf = grid.iter().zip(weighted_ecdf(&unit, &grid)).map(|(&t, e)| EcdfRow { t, empirical: e, limit: cdf(t) }).collect();

    Ok(CouplingReport {
        b,
        n,
        seed,
        theta,
        mean_excess_scale: a,
        equal_fraction: equal / nf,
        decoupled_fraction: decoupled / nf,
        censored,
        ks_n_b: ks,
        ks_threshold: KS_THRESHOLD,
        ecdf,
    })
}
