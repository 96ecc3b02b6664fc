//! Parameter selection for the mixture and numeric Lyapunov/drift verifiers.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RuinError};
use crate::hazard::{IncrementModel, TailClass};
use crate::quadrature::QuadOptions;
use crate::sampler::{CutoffRule, MixturePlan};

pub const DEFAULT_DELTA0: f64 = 0.1;
pub const DEFAULT_A_STAR_STAR_RV: f64 = 0.1;
pub const DEFAULT_A_CONCAVE: f64 = 1.0;
pub const MAX_HALVINGS: usize = 60;
pub const TOL_LYAP: f64 = 1e-6;
const RHO_MAX: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Mode {
    StrongEfficiency,
    TerminationControlled,
    GammaMoment { gamma: f64 },
    TotalVariation { epsilon: f64 },
}

/// User-supplied values that replace defaults during selection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub delta0: Option<f64>,
    pub a_star: Option<f64>,
    pub a_star_star: Option<f64>,
    pub kappa: Option<f64>,
    pub eta_floor: Option<f64>,
    pub cutoff_override: Option<Vec<CutoffRule>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    pub mode: Mode,
    /// `None` under regular variation, where a_* is solved per state.
    pub a_star: Option<f64>,
    pub a_star_star: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub a_grid: Vec<f64>,
    pub k: usize,
    pub theta: f64,
    pub eps_tilde: f64,
    pub eps_tilde1: f64,
    pub kappa: f64,
    pub kappa_floor: f64,
    pub eta_star: f64,
    pub eta_floor: f64,
    pub gamma: f64,
    pub cutoff_override: Option<Vec<CutoffRule>>,
}

impl TuningParams {
    /// g(s) = min{κ G(b − s)^{1+γ}, 1} in log space; 0 at or beyond the barrier.
    pub fn ln_g(&self, model: &IncrementModel, d: f64) -> f64 {
        if d <= 0.0 {
            return 0.0;
        }
        (self.kappa.ln() + (1.0 + self.gamma) * model.ln_integrated_tail(d)).min(0.0)
    }

    /// Replace κ and re-derive η_*.
    pub fn with_kappa(&self, model: &IncrementModel, kappa: f64) -> Result<Self> {
        let mut p = self.clone();
        p.kappa = kappa;
        p.eta_star = eta_for(model, kappa, p.gamma)?;
        Ok(p)
    }
}

/// Result of [`build_cutoff_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffGrid {
    pub sigma1: f64,
    pub a_grid: Vec<f64>,
    pub k: usize,
    pub sigma2: f64,
}

pub fn build_cutoff_grid(beta0: f64) -> Result<CutoffGrid> {
    if !(beta0 > 0.0 && beta0 < 1.0) {
        return Err(RuinError::InvalidParameter(format!("beta0 = {beta0} outside (0, 1)")));
    }
    let ok = |s1: f64| {
        (0..=10_000).all(|i| {
            let x = s1 * i as f64 / 10_000.0;
            2.0 - 2.0 * (1.0 - x).powf(beta0) - x.powf(beta0) <= 1e-15
        })
    };
    let sigma1 = (1..=10)
        .rev()
        .map(|i| 0.05 * i as f64)
        .find(|&s| ok(s))
        .ok_or_else(|| RuinError::Selection(format!("no sigma1 qualifies for beta0 = {beta0}")))?;
    let step = 0.5 * sigma1;
    let mut a_grid = Vec::new();
    let mut j = 1;
    while j as f64 * step <= 1.0 - step + 1e-12 {
        a_grid.push(j as f64 * step);
        j += 1;
    }
    let sigma2 = if a_grid.len() >= 2 {
        a_grid.windows(2).map(|w| w[0].powf(beta0) + (1.0 - w[1]).powf(beta0)).fold(f64::INFINITY, f64::min) - 1.0
    } else {
        2.0 * a_grid[0].powf(beta0) - 1.0
    };
    if !(sigma2 > 0.0) {
        return Err(RuinError::Selection(format!("sigma2 = {sigma2} is not positive")));
    }
    // Cutoffs are c₀ < a₁d < … < a_{k−1}d < c_k.
    let k = a_grid.len() + 1;
    Ok(CutoffGrid { sigma1, a_grid, k, sigma2 })
}

/// δ₂* for the termination-controlled second-moment construction.
pub fn delta2_termination(iota: f64, delta0: f64, a_ss: f64) -> f64 {
    2.0 * (iota - 1.0) * (1.0 - delta0).powi(2) * (1.0 + delta0).powi(-5) * (-a_ss).exp()
        - 1.0
        - 2.0 * (1.0 - (-2.0 * a_ss / iota).exp()) * (iota - 1.0)
}

/// δ₂* for the γ-moment construction.
pub fn delta2_gamma(iota: f64, gamma: f64, delta: f64, a_ss: f64) -> f64 {
    (1.0 + gamma) * (iota - 1.0) * (1.0 - delta).powi(3) * (-a_ss).exp() / (gamma * (1.0 + delta))
        - 1.0
        - (1.0 + gamma) * (1.0 - (-2.0 * a_ss / iota).exp()) * (iota - 1.0)
}

fn eta_for(model: &IncrementModel, kappa: f64, gamma: f64) -> Result<f64> {
    model.inverse_integrated_tail(kappa.powf(-1.0 / (1.0 + gamma)))
}

/// Smallest κ = floor·2^j (or the override) with η_* ≥ η_floor.
fn grow_kappa(model: &IncrementModel, floor: f64, start: Option<f64>, gamma: f64, eta_floor: f64) -> Result<(f64, f64)> {
    let mut kappa = match start {
        Some(k) if k < floor => {
            return Err(RuinError::InvalidParameter(format!("kappa {k} is below the floor {floor}")));
        }
        Some(k) => k,
        None => floor,
    };
    for _ in 0..2000 {
        let eta = eta_for(model, kappa, gamma)?;
        if eta >= eta_floor {
            return Ok((kappa, eta));
        }
        kappa *= 2.0;
    }
    Err(RuinError::Selection("kappa search did not reach eta_floor".into()))
}

struct Base {
    delta0: f64,
    a_star: Option<f64>,
    a_ss: f64,
    sigma1: Option<f64>,
    sigma2: Option<f64>,
    a_grid: Vec<f64>,
    k: usize,
}

fn base_for(model: &IncrementModel, o: &Overrides, default_a_ss_rv: f64) -> Result<Base> {
    let delta0 = o.delta0.unwrap_or(DEFAULT_DELTA0);
    if !(delta0 > 0.0 && delta0 < 0.25) {
        return Err(RuinError::InvalidParameter(format!("delta0 = {delta0} outside (0, 1/4)")));
    }
    let mut b = match model.tail_class() {
        TailClass::RegularlyVarying { .. } => Base {
            delta0,
            a_star: None,
            a_ss: o.a_star_star.unwrap_or(default_a_ss_rv),
            sigma1: None,
            sigma2: None,
            a_grid: Vec::new(),
            k: 0,
        },
        TailClass::ConcaveHazard { beta0 } => {
            let grid = build_cutoff_grid(beta0)?;
            Base {
                delta0,
                a_star: Some(o.a_star.unwrap_or(DEFAULT_A_CONCAVE)),
                a_ss: o.a_star_star.unwrap_or(DEFAULT_A_CONCAVE),
                sigma1: Some(grid.sigma1),
                sigma2: Some(grid.sigma2),
                a_grid: grid.a_grid,
                k: grid.k,
            }
        }
    };
    if let Some(rules) = &o.cutoff_override {
        if rules.is_empty() {
            return Err(RuinError::InvalidParameter("cutoff_override is empty".into()));
        }
        b.k = rules.len() - 1;
    }
    if !(b.a_ss > 0.0) || b.a_star.is_some_and(|a| !(a > 0.0)) {
        return Err(RuinError::InvalidParameter("a_star and a_star_star must be positive".into()));
    }
    Ok(b)
}

fn assemble(model: &IncrementModel, mode: Mode, base: Base, o: &Overrides) -> Result<TuningParams> {
    let mu = -model.mean_drift();
    if !(mu > 0.0) {
        return Err(RuinError::InvalidParameter("drift must be negative".into()));
    }
    let (theta, eps_tilde, eps_tilde1, floor_delta) = match mode {
        Mode::StrongEfficiency | Mode::TerminationControlled => (
            mu * (1.0 - base.delta0) / (1.0 + base.delta0).powi(5),
            base.delta0 * base.delta0,
            base.delta0 / (base.k as f64 + 1.0),
            base.delta0,
        ),
        Mode::TotalVariation { epsilon } => {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(RuinError::InvalidParameter(format!("epsilon = {epsilon} outside (0, 1)")));
            }
            (mu * (1.0 - epsilon) / 2.0, epsilon, epsilon * epsilon, epsilon)
        }
        Mode::GammaMoment { .. } => unreachable!("gamma mode is assembled by select_gamma_params"),
    };
    let kappa_floor = (2.0 * base.a_ss).exp() / (4.0 * theta * theta * floor_delta);
    let eta_floor = o.eta_floor.unwrap_or(10.0 * mu);
    let (kappa, eta_star) = grow_kappa(model, kappa_floor, o.kappa, 1.0, eta_floor)?;
    let k1 = base.k as f64 + 1.0;
    let p = ensure_ordered_cutoffs(
        model,
        TuningParams {
            mode,
            a_star: base.a_star,
            a_star_star: base.a_ss,
            delta0: base.delta0,
            delta1: 0.5 * base.delta0 * mu * mu * (1.0 - base.delta0).powi(2) * (1.0 + base.delta0).powi(-10) / (k1 * k1),
            delta2: None,
            sigma1: base.sigma1,
            sigma2: base.sigma2,
            a_grid: base.a_grid,
            k: base.k,
            theta,
            eps_tilde,
            eps_tilde1,
            kappa,
            kappa_floor,
            eta_star,
            eta_floor,
            gamma: 1.0,
            cutoff_override: o.cutoff_override.clone(),
        },
    )?;
    calibrate_kappa(model, p, o)
}

/// Doubles κ until the cutoffs are strictly ordered just beyond η_* and on a few multiples of it.
fn ensure_ordered_cutoffs(model: &IncrementModel, mut p: TuningParams) -> Result<TuningParams> {
    for _ in 0..2000 {
        let ordered = [1.0 + 1e-9, 1.001, 1.1, 1.5, 2.0, 4.0, 10.0, 100.0]
            .iter()
            .all(|&m| !matches!(MixturePlan::for_distance(model, &p, m * p.eta_star), Err(RuinError::InconsistentCutoffs { .. })));
        if ordered {
            return Ok(p);
        }
        p = p.with_kappa(model, 2.0 * p.kappa)?;
    }
    Err(RuinError::Selection("cutoffs never become ordered".into()))
}

/// Distances probed when κ is calibrated: log-spaced from just beyond η_* to max(100 η_*, 10⁴).
pub fn probe_distances(eta_star: f64, n: usize) -> Vec<f64> {
    let lo = eta_star.max(1e-3) * (1.0 + 1e-9);
    let hi = (100.0 * eta_star).max(1e4);
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// The κ floor is sufficient only asymptotically; double κ until the Lyapunov
/// inequality holds numerically on the probe distances. An explicit κ is kept as given.
fn calibrate_kappa(model: &IncrementModel, mut p: TuningParams, o: &Overrides) -> Result<TuningParams> {
    if o.kappa.is_some() {
        return Ok(p);
    }
    for _ in 0..2000 {
        let ok = probe_distances(p.eta_star, 48).into_iter().all(|d| lyapunov_ratio(model, &p, d).is_ok_and(|r| r <= 1.0 + TOL_LYAP));
        if ok {
            return Ok(p);
        }
        p = ensure_ordered_cutoffs(model, p.with_kappa(model, 2.0 * p.kappa)?)?;
    }
    Err(RuinError::Selection("kappa calibration did not converge".into()))
}

/// Constructive selection of the second-moment (or total-variation) parameters.
pub fn select_variance_params(model: &IncrementModel, mode: Mode, o: &Overrides) -> Result<TuningParams> {
    match mode {
        Mode::GammaMoment { gamma } => select_gamma_params(model, gamma, o),
        Mode::TerminationControlled => {
            let base = base_for(model, o, DEFAULT_A_STAR_STAR_RV)?;
            let p = assemble(model, mode, base, o)?;
            match model.tail_class() {
                TailClass::RegularlyVarying { .. } => enforce_termination_params(&p, model, o),
                TailClass::ConcaveHazard { .. } => Ok(p),
            }
        }
        Mode::TotalVariation { .. } | Mode::StrongEfficiency => {
            let base = base_for(model, o, DEFAULT_A_STAR_STAR_RV)?;
            assemble(model, mode, base, o)
        }
    }
}

/// Halve a_** and δ₀ until δ₂* > 0, re-deriving everything downstream.
pub fn enforce_termination_params(params: &TuningParams, model: &IncrementModel, o: &Overrides) -> Result<TuningParams> {
    let TailClass::RegularlyVarying { index: iota } = model.tail_class() else {
        return Err(RuinError::NotApplicable("termination control for non-regularly-varying tails"));
    };
    let (mut delta0, mut a_ss) = (params.delta0, params.a_star_star);
    for _ in 0..=MAX_HALVINGS {
        let d2 = delta2_termination(iota, delta0, a_ss);
        if d2 > 0.0 {
            let o2 = Overrides { delta0: Some(delta0), a_star_star: Some(a_ss), ..o.clone() };
            let base = base_for(model, &o2, a_ss)?;
            let mut p = assemble(model, Mode::TerminationControlled, base, &o2)?;
            p.delta2 = Some(d2);
            return Ok(p);
        }
        delta0 *= 0.5;
        a_ss *= 0.5;
    }
    Err(RuinError::Selection(format!("no delta2 > 0 after {MAX_HALVINGS} halvings (index {iota})")))
}

/// Parameters for bounded (1+γ)-th relative moments when 1 < ι ≤ 1.5.
pub fn select_gamma_params(model: &IncrementModel, gamma: f64, o: &Overrides) -> Result<TuningParams> {
    let TailClass::RegularlyVarying { index: iota } = model.tail_class() else {
        return Err(RuinError::NotApplicable("gamma-moment mode for non-regularly-varying tails"));
    };
    if !(iota > 1.0 && iota <= 1.5) {
        return Err(RuinError::InvalidParameter(format!("gamma-moment mode needs 1 < index <= 1.5, got {iota}")));
    }
    let bound = (iota - 1.0) / (2.0 - iota);
    if !(gamma > 0.0 && gamma < bound) {
        return Err(RuinError::InvalidParameter(format!("gamma = {gamma} outside (0, {bound})")));
    }
    let mu = -model.mean_drift();
    let mut delta = o.delta0.unwrap_or(DEFAULT_DELTA0);
    let mut a_ss = o.a_star_star.unwrap_or(DEFAULT_A_STAR_STAR_RV);
    for _ in 0..=MAX_HALVINGS {
        let d2 = delta2_gamma(iota, gamma, delta, a_ss);
        if d2 > 0.0 {
            let k = o.cutoff_override.as_ref().map_or(0, |r| r.len() - 1);
            let theta = mu * (1.0 - delta).powi(2) / (gamma * (1.0 + delta));
            // First-order Lyapunov slack: e^{a**(1+γ)} / ((1+γ)^γ θ^γ κ) < (1+γ) |μ| δ (1 − δ).
            let kappa_floor =
                2.0 * (a_ss * (1.0 + gamma)).exp() / ((1.0 + gamma).powf(1.0 + gamma) * theta.powf(gamma) * mu * delta * (1.0 - delta));
            let eta_floor = o.eta_floor.unwrap_or(10.0 * mu);
            let (kappa, eta_star) = grow_kappa(model, kappa_floor, o.kappa, gamma, eta_floor)?;
            let p = ensure_ordered_cutoffs(
                model,
                TuningParams {
                    mode: Mode::GammaMoment { gamma },
                    a_star: None,
                    a_star_star: a_ss,
                    delta0: delta,
                    delta1: 0.0,
                    delta2: Some(d2),
                    sigma1: None,
                    sigma2: None,
                    a_grid: Vec::new(),
                    k,
                    theta,
                    eps_tilde: delta * delta,
                    eps_tilde1: delta / (k as f64 + 1.0),
                    kappa,
                    kappa_floor,
                    eta_star,
                    eta_floor,
                    gamma,
                    cutoff_override: o.cutoff_override.clone(),
                },
            )?;
            return calibrate_kappa(model, p, o);
        }
        delta *= 0.5;
        a_ss *= 0.5;
    }
    Err(RuinError::Selection(format!("no gamma-mode delta2 > 0 after {MAX_HALVINGS} halvings")))
}

// ---------------------------------------------------------------------------
// Verifiers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub s: f64,
    pub distance: f64,
    pub g: f64,
    /// Lyapunov ratio E[r^γ g(s+X)]/g(s), or drift margin h(s) − E^Q h(s+X).
    pub value: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub kind: String,
    pub b: f64,
    pub tolerance: f64,
    /// Drift constant ρ used (drift reports only).
    pub rho: Option<f64>,
    /// Max Lyapunov ratio, or min drift margin over points with g(s) < 1.
    pub worst: f64,
    pub pass: bool,
    pub points: Vec<PointReport>,
}

/// s-grid with b − s log-spaced over [0.5, 20 b].
pub fn default_s_grid(b: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (0.5f64, 20.0 * b.max(1.0));
    (0..n).map(|i| b - lo * (hi / lo).powf(i as f64 / (n.max(2) - 1) as f64)).collect()
}

fn verifier_quad() -> QuadOptions {
    QuadOptions { abs_tol: 1e-300, rel_tol: 1e-10, max_intervals: 4000 }
}

/// E[r_s(X)^γ g(s+X)] / g(s) at distance d with g(s) < 1.
pub fn lyapunov_ratio(model: &IncrementModel, params: &TuningParams, d: f64) -> Result<f64> {
    let plan = MixturePlan::for_distance(model, params, d)?;
    let gam = params.gamma;
    let ln_gd = model.ln_integrated_tail(d);
    let cap = -params.kappa.ln() - (1.0 + gam) * ln_gd;
    // ln of g(s + x)/g(s).
    let ln_ratio = |x: f64| ((1.0 + gam) * (model.ln_integrated_tail(d - x) - ln_gd)).min(cap);
    let opts = verifier_quad();
    let mut breaks: Vec<f64> = plan.cutoffs.to_vec();
    breaks.push(d - params.eta_star);
    breaks.push(d);
    if plan.nominal {
        let r = model.integrate_density(f64::NEG_INFINITY, f64::INFINITY, &breaks, |x| (ln_ratio(x)).exp(), &opts)?;
        return Ok(r.value);
    }
    let c = &plan.cutoffs;
    let k = plan.k();
    let mut total = 0.0;
    let j_star = model.integrate_density(f64::NEG_INFINITY, c[0], &breaks, |x| ln_ratio(x).exp(), &opts)?;
    total += (gam * (plan.ln_mass_star - plan.p_star.ln())).exp() * j_star.value;
    for j in 1..k {
        let r = model.integrate_density(c[j - 1], c[j], &breaks, |x| ln_ratio(x).exp(), &opts)?;
        total += (gam * (plan.ln_mass_mid[j - 1] - plan.p_mid.ln())).exp() * r.value;
    }
    if k >= 1 {
        let r = model.integrate_density(
            c[k - 1],
            c[k],
            &breaks,
            |x| (gam * (model.ln_pdf(x) - model.ln_pdf(d - x)) + ln_ratio(x)).exp(),
            &opts,
        )?;
        total += (gam * (plan.ln_mass_mid[k - 1] - plan.p_mid.ln())).exp() * r.value;
    }
    let j_ss = model.integrate_density(c[k], f64::INFINITY, &breaks, |x| ln_ratio(x).exp(), &opts)?;
    total += (gam * (plan.ln_mass_tail - plan.p_star_star.ln())).exp() * j_ss.value;
    Ok(total)
}

pub fn verify_lyapunov(model: &IncrementModel, params: &TuningParams, b: f64, s_grid: &[f64]) -> VerificationReport {
    let tol = 1.0 + TOL_LYAP;
    let mut points = Vec::with_capacity(s_grid.len());
    let mut worst = f64::NEG_INFINITY;
    for &s in s_grid {
        let d = b - s;
        let g = params.ln_g(model, d).exp();
        if !(d > 0.0) || g >= 1.0 {
            points.push(PointReport { s, distance: d, g, value: None, pass: true, error: None });
            continue;
        }
        match lyapunov_ratio(model, params, d) {
            Ok(r) => {
                worst = worst.max(r);
                points.push(PointReport { s, distance: d, g, value: Some(r), pass: r <= tol, error: None });
            }
            Err(e) => points.push(PointReport { s, distance: d, g, value: None, pass: false, error: Some(e.to_string()) }),
        }
    }
    let pass = points.iter().all(|p| p.pass);
    VerificationReport { kind: "lyapunov".into(), b, tolerance: TOL_LYAP, rho: None, worst, pass, points }
}

/// Parts of the drift computation at distance d: (Q(X ≥ d), ψ(d)Q(X ≥ d) + E^Q[ψ(d) − ψ(d − X); X < d]).
fn drift_parts(model: &IncrementModel, params: &TuningParams, d: f64) -> Result<(f64, f64)> {
    let plan = MixturePlan::for_distance(model, params, d)?;
    let beta = match model.tail_class() {
        TailClass::RegularlyVarying { .. } => 0.0,
        TailClass::ConcaveHazard { beta0 } => beta0,
    };
    let psi = |y: f64| if beta == 0.0 { y } else { y.powf(1.0 - beta) };
    // ψ(d) − ψ(d − x) without cancellation.
    let dpsi = |x: f64| {
        if beta == 0.0 {
            x
        } else {
            -psi(d) * ((1.0 - beta) * (-x / d).ln_1p()).exp_m1()
        }
    };
    let opts = verifier_quad();
    let breaks = [d - params.eta_star];
    if plan.nominal {
        let q_ge = model.sf(d);
        let e = model.integrate_density(f64::NEG_INFINITY, d, &breaks, dpsi, &opts)?.value;
        return Ok((q_ge, psi(d) * q_ge + e));
    }
    let c = &plan.cutoffs;
    let k = plan.k();
    let w_star = (plan.p_star.ln() - plan.ln_mass_star).exp();
    let w_tail = (plan.p_star_star.ln() - plan.ln_mass_tail).exp();
    let q_ge = w_tail * model.sf(d);
    let mut e = w_star * model.integrate_density(f64::NEG_INFINITY, c[0], &[], dpsi, &opts)?.value;
    for j in 1..k {
        let w = (plan.p_mid.ln() - plan.ln_mass_mid[j - 1]).exp();
        e += w * model.integrate_density(c[j - 1], c[j], &[], dpsi, &opts)?.value;
    }
    if k >= 1 {
        // x = d − y with y ~ f on (d − c_k, d − c_{k−1}]; ψ(d) − ψ(y).
        let w = (plan.p_mid.ln() - plan.ln_mass_mid[k - 1]).exp();
        e += w * model.integrate_density(d - c[k], d - c[k - 1], &[], |y| psi(d) - psi(y), &opts)?.value;
    }
    e += w_tail * model.integrate_density(c[k], d, &[], dpsi, &opts)?.value;
    Ok((q_ge, psi(d) * q_ge + e))
}

pub fn verify_drift(model: &IncrementModel, params: &TuningParams, b: f64, s_grid: &[f64]) -> VerificationReport {
    let mut parts = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let d = b - s;
        if !(d > 0.0) {
            parts.push((s, d, Ok(None)));
            continue;
        }
        parts.push((s, d, drift_parts(model, params, d).map(Some)));
    }
    // Smallest doubling of ρ that makes every margin positive.
    let need = parts
        .iter()
        .filter_map(|(_, _, r)| match r {
            Ok(Some((q, m))) if *m <= 0.0 => Some(if *q > 0.0 { -m / q } else { f64::INFINITY }),
            _ => None,
        })
        .fold(0.0f64, f64::max);
    let mut rho = 1.0;
    while rho <= need && rho < RHO_MAX {
        rho *= 2.0;
    }
    let mut points = Vec::with_capacity(parts.len());
    let mut worst = f64::INFINITY;
    for (s, d, r) in parts {
        let g = params.ln_g(model, d).exp();
        match r {
            Ok(None) => points.push(PointReport { s, distance: d, g, value: Some(0.0), pass: true, error: None }),
            Ok(Some((q, m))) => {
                let margin = m + rho * q;
                if g < 1.0 {
                    worst = worst.min(margin);
                }
                let error = (margin <= 0.0).then(|| format!("no rho <= {RHO_MAX:e} gives a positive margin"));
                points.push(PointReport { s, distance: d, g, value: Some(margin), pass: margin > 0.0, error });
            }
            Err(e) => points.push(PointReport { s, distance: d, g, value: None, pass: false, error: Some(e.to_string()) }),
        }
    }
    let pass = points.iter().all(|p| p.pass);
    VerificationReport { kind: "drift".into(), b, tolerance: 0.0, rho: Some(rho), worst, pass, points }
}
