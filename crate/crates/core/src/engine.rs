//! Replication loop and estimators: importance sampling, crude Monte Carlo and
//! the Asmussen–Kroese conditional estimator for the M/G/1 waiting time.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RuinError};
use crate::hazard::IncrementModel;
use crate::parallel::map_blocks;
use crate::rng::{replication_rng, Purpose};
use crate::sampler::MixturePlan;
use crate::stats::LogAccumulator;
use crate::tuning::{Mode, TuningParams};

pub const STEP_CAP: u64 = 10_000_000;
/// Crude runs with fewer hits than this are flagged.
pub const LOW_HIT: u64 = 10;
/// Barrier rule: G(b + B) ≤ BARRIER_RATIO · G(b).
pub const BARRIER_RATIO: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub step_cap: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { step_cap: STEP_CAP }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub hit: bool,
    pub censored: bool,
    /// ln Z_b; −∞ without a hit.
    pub log_estimate: f64,
    pub tau: u64,
    /// S₀ = 0, S₁, …, S_τ when requested.
    pub path: Option<Vec<f64>>,
}

/// The path statistics needed by the conditional-law diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathFunctionals {
    pub log_weight: f64,
    pub tau: u64,
    /// S_τ − b.
    pub overshoot: f64,
    /// S_{⌊τ/2⌋}.
    pub midpoint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Is,
    Crude,
    Ak,
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Is => "is",
            Estimator::Crude => "crude",
            Estimator::Ak => "ak",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub estimator: Estimator,
    pub b: f64,
    pub n: u64,
    pub mean: f64,
    pub ln_mean: f64,
    pub std_error: f64,
    pub cv: f64,
    pub mean_tau: f64,
    /// (mean of Z^{1+γ}) / mean^{1+γ} for γ-moment runs.
    pub gamma_moment: Option<f64>,
    pub hits: u64,
    pub censored: u64,
    pub censored_frac: f64,
    pub seed: u64,
    pub wall_seconds: f64,
    pub barrier: Option<f64>,
    /// Upper bound on the crude estimator's barrier bias, G(b + B)/|μ|.
    pub bias_bound: Option<f64>,
    pub low_hit: bool,
}

#[derive(Debug, Clone)]
struct Tally {
    acc: LogAccumulator,
    tau: u64,
    hits: u64,
    censored: u64,
}

impl Tally {
    fn new(power: f64) -> Self {
        Self { acc: LogAccumulator::with_power(power), tau: 0, hits: 0, censored: 0 }
    }

    fn push(&mut self, hit: bool, censored: bool, ln_z: f64, tau: u64) {
        self.acc.push(ln_z);
        self.tau += tau;
        self.hits += hit as u64;
        self.censored += censored as u64;
    }

    fn merge(&mut self, o: &Self) {
        self.acc.merge(&o.acc);
        self.tau += o.tau;
        self.hits += o.hits;
        self.censored += o.censored;
    }

    fn summary(&self, estimator: Estimator, b: f64, seed: u64, started: Instant) -> EstimateSummary {
        let n = self.acc.count();
        EstimateSummary {
            estimator,
            b,
            n,
            mean: self.acc.mean(),
            ln_mean: self.acc.ln_mean(),
            std_error: self.acc.std_error(),
            cv: self.acc.cv(),
            mean_tau: self.tau as f64 / n as f64,
            gamma_moment: self.acc.power_moment_ratio(),
            hits: self.hits,
            censored: self.censored,
            censored_frac: self.censored as f64 / n as f64,
            seed,
            wall_seconds: started.elapsed().as_secs_f64(),
            barrier: None,
            bias_bound: None,
            low_hit: false,
        }
    }
}

struct Walk {
    hit: bool,
    censored: bool,
    log_weight: f64,
    tau: u64,
    s: f64,
}

#[inline]
fn walk<R: Rng + ?Sized>(
    model: &IncrementModel,
    params: &TuningParams,
    b: f64,
    rng: &mut R,
    step_cap: u64,
    mut path: Option<&mut Vec<f64>>,
) -> Result<Walk> {
    let (mut s, mut lw, mut tau) = (0.0f64, 0.0f64, 0u64);
    if let Some(p) = path.as_deref_mut() {
        p.clear();
        p.push(0.0);
    }
    let mut plan = MixturePlan::nominal(b);
    loop {
        if tau >= step_cap {
            return Ok(Walk { hit: false, censored: true, log_weight: lw, tau, s });
        }
        plan.refresh(model, params, b - s)?;
        let (x, w) = plan.sample_increment(model, rng)?;
        s += x;
        lw += w;
        tau += 1;
        if let Some(p) = path.as_deref_mut() {
            p.push(s);
        }
        if s > b {
            return Ok(Walk { hit: true, censored: false, log_weight: lw, tau, s });
        }
    }
}

/// One importance-sampling replication from s₀ = 0. Censored replications score 0.
pub fn run_replication<R: Rng + ?Sized>(
    model: &IncrementModel,
    params: &TuningParams,
    b: f64,
    rng: &mut R,
    opts: &RunOptions,
    record_path: bool,
) -> Result<ReplicationResult> {
    if !(b > 0.0) {
        return Err(RuinError::Domain { what: "barrier b", value: b });
    }
    let mut buf = record_path.then(Vec::new);
    let w = walk(model, params, b, rng, opts.step_cap, buf.as_mut())?;
    Ok(ReplicationResult {
        hit: w.hit,
        censored: w.censored,
        log_estimate: if w.hit { w.log_weight } else { f64::NEG_INFINITY },
        tau: w.tau,
        path: buf,
    })
}

fn moment_power(params: &TuningParams) -> f64 {
    match params.mode {
        Mode::GammaMoment { gamma } => 1.0 + gamma,
        _ => 0.0,
    }
}

fn check_n(n: u64) -> Result<()> {
    if n < 2 {
        return Err(RuinError::InvalidParameter(format!("n = {n}; at least 2 replications are needed")));
    }
    Ok(())
}

/// Importance-sampling estimate of u(b) from n replications.
pub fn estimate(model: &IncrementModel, params: &TuningParams, b: f64, n: u64, seed: u64, shards: usize) -> Result<EstimateSummary> {
    estimate_with(model, params, b, n, seed, shards, &RunOptions::default())
}

pub fn estimate_with(
    model: &IncrementModel,
    params: &TuningParams,
    b: f64,
    n: u64,
    seed: u64,
    shards: usize,
    opts: &RunOptions,
) -> Result<EstimateSummary> {
    check_n(n)?;
    let started = Instant::now();
    let power = moment_power(params);
    let tallies = map_blocks(n, shards, |lo, hi| {
        let mut t = Tally::new(power);
        for i in lo..hi {
            let mut rng = replication_rng(seed, Purpose::Estimate, i);
            let r = run_replication(model, params, b, &mut rng, opts, false)?;
            t.push(r.hit, r.censored, r.log_estimate, r.tau);
        }
        Ok(t)
    })?;
    Ok(fold(tallies, power).summary(Estimator::Is, b, seed, started))
}

/// As [`estimate`], also returning path functionals of every hitting replication.
///
/// Replication streams are those of [`estimate`], so both views describe the same run.
pub fn estimate_with_paths(
    model: &IncrementModel,
    params: &TuningParams,
    b: f64,
    n: u64,
    seed: u64,
    shards: usize,
    opts: &RunOptions,
) -> Result<(EstimateSummary, Vec<PathFunctionals>)> {
    check_n(n)?;
    let started = Instant::now();
    let power = moment_power(params);
    let parts = map_blocks(n, shards, |lo, hi| {
        let mut t = Tally::new(power);
        let mut fs = Vec::with_capacity((hi - lo) as usize);
        let mut buf = Vec::new();
        for i in lo..hi {
            let mut rng = replication_rng(seed, Purpose::Estimate, i);
            let w = walk(model, params, b, &mut rng, opts.step_cap, Some(&mut buf))?;
            let ln_z = if w.hit { w.log_weight } else { f64::NEG_INFINITY };
            t.push(w.hit, w.censored, ln_z, w.tau);
            if w.hit {
                fs.push(PathFunctionals { log_weight: w.log_weight, tau: w.tau, overshoot: w.s - b, midpoint: buf[(w.tau / 2) as usize] });
            }
        }
        Ok((t, fs))
    })?;
    let mut total = Tally::new(power);
    let mut fs = Vec::new();
    for (t, f) in parts {
        total.merge(&t);
        fs.extend(f);
    }
    Ok((total.summary(Estimator::Is, b, seed, started), fs))
}

fn fold(tallies: Vec<Tally>, power: f64) -> Tally {
    let mut total = Tally::new(power);
    for t in &tallies {
        total.merge(t);
    }
    total
}

/// (mean of Z^{1+γ}) / (mean of Z)^{1+γ}.
pub fn gamma_moment_summary(results: &[ReplicationResult], gamma: f64) -> f64 {
    let mut acc = LogAccumulator::with_power(1.0 + gamma);
    for r in results {
        acc.push(r.log_estimate);
    }
    acc.power_moment_ratio().unwrap_or(f64::NAN)
}

/// Smallest barrier B (to relative 1e-10) with G(b + B) ≤ 0.01 G(b).
pub fn crude_barrier(model: &IncrementModel, b: f64) -> Result<f64> {
    let target = model.ln_integrated_tail(b) + BARRIER_RATIO.ln();
    let ok = |x: f64| model.ln_integrated_tail(b + x) <= target;
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(RuinError::Selection("no barrier satisfies the rule".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid
        } else {
            lo = mid
        }
    }
    Ok(hi)
}

/// Crude Monte Carlo: nominal walks until S > b (score 1) or S < −B (score 0).
pub fn crude_mc(model: &IncrementModel, b: f64, n: u64, barrier: f64, seed: u64, shards: usize) -> Result<EstimateSummary> {
    check_n(n)?;
    if !(barrier > 0.0) || model.ln_integrated_tail(b + barrier) > model.ln_integrated_tail(b) + BARRIER_RATIO.ln() + 1e-12 {
        return Err(RuinError::InvalidParameter(format!("barrier {barrier} fails G(b + B) <= {BARRIER_RATIO} G(b)")));
    }
    let started = Instant::now();
    let tallies = map_blocks(n, shards, |lo, hi| {
        let mut t = Tally::new(0.0);
        for i in lo..hi {
            let mut rng = replication_rng(seed, Purpose::Crude, i);
            let (mut s, mut tau) = (0.0f64, 0u64);
            let mut censored = false;
            let hit = loop {
                if tau >= STEP_CAP {
                    censored = true;
                    break false;
                }
                s += model.sample_nominal(&mut rng);
                tau += 1;
                if s > b {
                    break true;
                }
                if s < -barrier {
                    break false;
                }
            };
            t.push(hit, censored, if hit { 0.0 } else { f64::NEG_INFINITY }, tau);
        }
        Ok(t)
    })?;
    let mut s = fold(tallies, 0.0).summary(Estimator::Crude, b, seed, started);
    s.barrier = Some(barrier);
    s.bias_bound = Some((model.ln_integrated_tail(b + barrier) - (-model.mean_drift()).ln()).exp());
    s.low_hit = s.hits < LOW_HIT;
    Ok(s)
}

/// Asmussen–Kroese estimator for the M/G/1 waiting-time tail.
///
/// u(b) = P(Y₁ + … + Y_K > b) with K geometric(ρ) and Y distributed as the
/// integrated service tail F̄_I(y) = (1 + y)^{−(ι−1)}; each replication scores
/// K · F̄_I(max(M_{K−1}, b − S_{K−1})).
pub fn ak_estimate(model: &IncrementModel, b: f64, n: u64, seed: u64, shards: usize) -> Result<EstimateSummary> {
    let IncrementModel::Mg1Pareto(m) = model else {
        return Err(RuinError::NotApplicable("Asmussen-Kroese estimator needs an M/G/1 model"));
    };
    check_n(n)?;
    let alpha = m.service_index() - 1.0;
    let rho = m.load();
    let started = Instant::now();
    let tallies = map_blocks(n, shards, |lo, hi| {
        let mut t = Tally::new(0.0);
        for i in lo..hi {
            let mut rng = replication_rng(seed, Purpose::Ak, i);
            let k = ak_replication(alpha, rho, b, &mut rng);
            t.push(k.1 > f64::NEG_INFINITY, false, k.1, k.0);
        }
        Ok(t)
    })?;
    Ok(fold(tallies, 0.0).summary(Estimator::Ak, b, seed, started))
}

/// Returns (K, ln Z).
fn ak_replication<R: Rng + ?Sized>(alpha: f64, rho: f64, b: f64, rng: &mut R) -> (u64, f64) {
    let u: f64 = rng.random();
    // P(K ≥ k) = ρ^k.
    let k = ((-u).ln_1p() / rho.ln()).floor() as u64;
    if k == 0 {
        return (0, f64::NEG_INFINITY);
    }
    let (mut s, mut m) = (0.0f64, 0.0f64);
    for _ in 1..k {
        let v: f64 = rng.random();
        let y = ((-v).ln_1p() * (-1.0 / alpha)).exp_m1();
        s += y;
        m = m.max(y);
    }
    let y = m.max(b - s).max(0.0);
    (k, (k as f64).ln() - alpha * y.ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuning::{select_gamma_params, select_variance_params, Overrides};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mg1() -> IncrementModel {
        IncrementModel::mg1_pareto(2.5, 4.0 / 3.0).unwrap()
    }

    fn params(m: &IncrementModel) -> TuningParams {
        select_variance_params(m, Mode::StrongEfficiency, &Overrides::default()).unwrap()
    }

    #[test]
    fn single_step_hit_scores_its_weight() {
        let m = mg1();
        let p = params(&m);
        let b = 1e-9;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = run_replication(&m, &p, b, &mut rng, &RunOptions::default(), true).unwrap();
            assert!(r.hit);
            let path = r.path.unwrap();
            assert!(*path.last().unwrap() > b);
            if r.tau == 1 {
                let plan = MixturePlan::for_distance(&m, &p, b).unwrap();
                assert_eq!(r.log_estimate, plan.log_weight(&m, path[1]).unwrap());
            }
        }
    }

    #[test]
    fn path_weight_is_the_sum_of_step_weights() {
        let m = mg1();
        let p = params(&m);
        let b = 60.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let r = run_replication(&m, &p, b, &mut rng, &RunOptions::default(), true).unwrap();
            let path = r.path.unwrap();
            assert_eq!(path.len() as u64, r.tau + 1);
            let lw: f64 =
                path.windows(2).map(|w| MixturePlan::for_distance(&m, &p, b - w[0]).unwrap().log_weight(&m, w[1] - w[0]).unwrap()).sum();
            assert!((lw - r.log_estimate).abs() < 1e-9 * lw.abs().max(1.0));
            assert!(path[..path.len() - 1].iter().all(|&s| s <= b));
        }
    }

    #[test]
    fn step_cap_censors() {
        let m = mg1();
        let p = params(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = run_replication(&m, &p, 1e6, &mut rng, &RunOptions { step_cap: 10 }, false).unwrap();
        assert!(r.censored && !r.hit);
        assert_eq!(r.log_estimate, f64::NEG_INFINITY);
        assert_eq!(r.tau, 10);
    }

    #[test]
    fn estimate_is_shard_invariant() {
        let m = mg1();
        let p = params(&m);
        let mut a = estimate(&m, &p, 100.0, 3000, 11, 1).unwrap();
        let mut b = estimate(&m, &p, 100.0, 3000, 11, 8).unwrap();
        a.wall_seconds = 0.0;
        b.wall_seconds = 0.0;
        assert_eq!(a, b);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn paths_and_summary_describe_the_same_run() {
        let m = IncrementModel::weibull();
        let p = params(&m);
        let s = estimate(&m, &p, 150.0, 600, 3, 1).unwrap();
        let (s2, fs) = estimate_with_paths(&m, &p, 150.0, 600, 3, 1, &RunOptions::default()).unwrap();
        assert_eq!(s.mean.to_bits(), s2.mean.to_bits());
        assert_eq!(fs.len() as u64, s.hits);
        assert!(fs.iter().all(|f| f.overshoot > 0.0));
    }

    #[test]
    fn gamma_moment_identities() {
        let c = |z: f64| ReplicationResult { hit: true, censored: false, log_estimate: z.ln(), tau: 1, path: None };
        let same: Vec<_> = (0..10).map(|_| c(0.3)).collect();
        assert!((gamma_moment_summary(&same, 0.3) - 1.0).abs() < 1e-12);
        let zs = [0.1, 1.0, 2.0, 0.5];
        let rs: Vec<_> = zs.iter().map(|&z| c(z)).collect();
        let n = zs.len() as f64;
        let m = zs.iter().sum::<f64>() / n;
        let var_pop = zs.iter().map(|z| (z - m).powi(2)).sum::<f64>() / n;
        assert!((gamma_moment_summary(&rs, 1.0) - (1.0 + var_pop / (m * m))).abs() < 1e-12);
    }

    #[test]
    fn gamma_run_reports_the_moment() {
        let m = IncrementModel::mg1_pareto(1.4, 5.0).unwrap();
        let p = select_gamma_params(&m, 0.3, &Overrides::default()).unwrap();
        let s = estimate(&m, &p, 100.0, 500, 2, 1).unwrap();
        assert!(s.gamma_moment.is_some_and(|g| g >= 1.0));
    }

    #[test]
    fn barrier_rule_values() {
        let m = mg1();
        let bm = crude_barrier(&m, 10.0).unwrap();
        assert!((m.integrated_tail(10.0 + bm) / m.integrated_tail(10.0) - 0.01).abs() < 1e-8);
        // Pareto-like G: (1 + b + B)^{-1.5} ≈ 0.01 (1 + b)^{-1.5} puts B near 21.5 · 11 = 226.
        assert!(bm > 200.0 && bm < 300.0, "{bm}");
        let w = IncrementModel::weibull();
        let bw = crude_barrier(&w, 20.0).unwrap();
        assert!((w.integrated_tail(20.0 + bw) / w.integrated_tail(20.0) - 0.01).abs() < 1e-8);
        assert!(crude_mc(&m, 10.0, 10, 0.5 * bm, 1, 1).is_err());
    }

    #[test]
    fn crude_no_hits_far_out() {
        let m = mg1();
        let b = 1e6;
        let s = crude_mc(&m, b, 50, crude_barrier(&m, b).unwrap().min(1e5).max(crude_barrier(&m, b).unwrap()), 3, 1).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.std_error, 0.0);
        assert!(s.low_hit);
    }

    #[test]
    fn ak_first_branch_is_the_integrated_tail() {
        // With K = 1 the score is F̄_I(b) exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rho = 0.5;
        for _ in 0..200 {
            let (k, lz) = ak_replication(1.5, rho, 100.0, &mut rng);
            if k == 1 {
                assert!((lz - (-1.5 * 101f64.ln())).abs() < 1e-12);
            }
        }
        assert!(ak_estimate(&IncrementModel::weibull(), 10.0, 10, 1, 1).is_err());
    }

    #[test]
    fn ak_geometric_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 200_000;
        let ks: Vec<u64> = (0..n).map(|_| ak_replication(1.5, 0.5, 1.0, &mut rng).0).collect();
        let p0 = ks.iter().filter(|&&k| k == 0).count() as f64 / n as f64;
        let mean = ks.iter().sum::<u64>() as f64 / n as f64;
        assert!((p0 - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
        // E K = ρ/(1 − ρ) = 1, Var K = ρ/(1 − ρ)² = 2.
        assert!((mean - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }
}
