//! Strang-split integration of `∂t u = J*u − u + f(u)` with adaptive steps,
//! blow-up detection and outcome classification.
//!
//! One step is `L(dt/2) ∘ N(dt) ∘ L(dt/2)` where `L` is the exact linear
//! propagator and `N` solves `u' = f(u)` pointwise (exactly for the
//! Bernoulli family, by RK4 with sub-stepping otherwise).

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::kernels::least_squares;
use crate::semigroup::{r_squared, DiscreteKernel, BOUNDARY_TOLERANCE};

/// Number of points checked by the sandwich condition of custom reactions.
pub const SANDWICH_SAMPLES: usize = 1000;

/// Only sup norms above this enter the blow-up time extrapolation.
pub const EXTRAPOLATION_FLOOR: f64 = 1e3;

/// Number of trailing samples used for the blow-up time extrapolation.
pub const EXTRAPOLATION_POINTS: usize = 20;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied reaction sandwiched between
/// `lower·u^{1+p}(1−u)` and `upper·u^{1+p}(1−u)` on `[0, 1]`.
#[derive(Clone)]
pub struct CustomReaction {
    f: ScalarFn,
    p: f64,
    lower: f64,
    upper: f64,
    label: String,
}

impl fmt::Debug for CustomReaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomReaction")
            .field("label", &self.label)
            .field("p", &self.p)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Reaction {
    /// `u_+^{1+p}`.
    PureGrowth { p: f64 },
    /// `u_+^{1+p}(1 − u)`.
    AlleeLogistic { p: f64 },
    /// `a u_+^{1+p} − b u`.
    Bernoulli { a: f64, b: f64, p: f64 },
    Custom(CustomReaction),
}

fn positive_power(u: f64, q: f64) -> f64 {
    if u > 0.0 {
        u.powf(q)
    } else {
        0.0
    }
}

impl Reaction {
    pub fn pure_growth(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Reaction::PureGrowth { p })
    }

    pub fn allee_logistic(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Reaction::AlleeLogistic { p })
    }

    pub fn bernoulli(a: f64, b: f64, p: f64) -> Result<Self> {
        check_exponent(p)?;
        if !(a > 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Precondition(format!("need a > 0 and b >= 0, got a={a}, b={b}")));
        }
        Ok(Reaction::Bernoulli { a, b, p })
    }

    /// Validates the sandwich condition on an even sample of `[0, 1]`.
    pub fn custom<F>(label: &str, f: F, p: f64, lower: f64, upper: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_exponent(p)?;
        if !(0.0 < lower && lower <= upper && upper.is_finite()) {
            return Err(Error::Precondition(format!(
                "need 0 < lower <= upper, got lower={lower}, upper={upper}"
            )));
        }
        for i in 0..SANDWICH_SAMPLES {
            let u = i as f64 / (SANDWICH_SAMPLES - 1) as f64;
            let base = u.powf(1.0 + p) * (1.0 - u);
            let v = f(u);
            let slack = 1e-12 * base.abs().max(1e-300);
            if !(v.is_finite() && lower * base - slack <= v && v <= upper * base + slack) {
                return Err(Error::Precondition(format!(
                    "custom reaction '{label}' violates the sandwich bound at u = {u}: f = {v}, bounds [{}, {}]",
                    lower * base,
                    upper * base
                )));
            }
        }
        Ok(Reaction::Custom(CustomReaction {
            f: Arc::new(f),
            p,
            lower,
            upper,
            label: label.to_string(),
        }))
    }

    pub fn exponent(&self) -> f64 {
        match self {
            Reaction::PureGrowth { p } | Reaction::AlleeLogistic { p } | Reaction::Bernoulli { p, .. } => *p,
            Reaction::Custom(c) => c.p,
        }
    }

    /// Coefficient `a` with `f(u) ≤ a·u_+^{1+p}` for `u ≥ 0`.
    pub fn growth_coefficient(&self) -> f64 {
        match self {
            Reaction::PureGrowth { .. } | Reaction::AlleeLogistic { .. } => 1.0,
            Reaction::Bernoulli { a, .. } => *a,
            Reaction::Custom(c) => c.upper,
        }
    }

    /// True when `u ≡ 1` is a stable state (the Allee-type reactions).
    pub fn saturates(&self) -> bool {
        matches!(self, Reaction::AlleeLogistic { .. } | Reaction::Custom(_))
    }

    pub fn label(&self) -> String {
        match self {
            Reaction::PureGrowth { p } => format!("pure_growth(p={p})"),
            Reaction::AlleeLogistic { p } => format!("allee_logistic(p={p})"),
            Reaction::Bernoulli { a, b, p } => format!("bernoulli(a={a},b={b},p={p})"),
            Reaction::Custom(c) => format!("custom({},p={})", c.label, c.p),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Reaction::PureGrowth { p } => positive_power(u, 1.0 + p),
            Reaction::AlleeLogistic { p } => positive_power(u, 1.0 + p) * (1.0 - u),
            Reaction::Bernoulli { a, b, p } => a * positive_power(u, 1.0 + p) - b * u,
            Reaction::Custom(c) => (c.f)(u),
        }
    }

    fn derivative_bound(&self, u: f64) -> f64 {
        match self {
            Reaction::AlleeLogistic { p } => {
                let up = positive_power(u, *p);
                ((1.0 + p) * up - (2.0 + p) * up * u.max(0.0)).abs()
            }
            _ => {
                let d = 1e-6 * u.abs().max(1e-3);
                ((self.eval(u + d) - self.eval(u - d)) / (2.0 * d)).abs()
            }
        }
    }

    /// Solves `u' = f(u)` over `dt` from `u`; `None` signals a singularity.
    fn advance(&self, u: f64, dt: f64) -> Option<f64> {
        match self {
            Reaction::PureGrowth { p } => bernoulli_flow(1.0, 0.0, *p, u, dt),
            Reaction::Bernoulli { a, b, p } => bernoulli_flow(*a, *b, *p, u, dt),
            _ => {
                let n = ((self.derivative_bound(u) * dt / 0.2).ceil() as usize).clamp(1, 100_000);
                let h = dt / n as f64;
                let f = |x: f64| self.eval(x);
                let mut x = u;
                for _ in 0..n {
                    let k1 = f(x);
                    let k2 = f(x + 0.5 * h * k1);
                    let k3 = f(x + 0.5 * h * k2);
                    let k4 = f(x + h * k3);
                    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                x.is_finite().then_some(x)
            }
        }
    }
}

/// Exact flow of `x' = a x_+^{1+p} − b x` over `dt`.
fn bernoulli_flow(a: f64, b: f64, p: f64, x: f64, dt: f64) -> Option<f64> {
    if x <= 0.0 {
        return Some(x * (-b * dt).exp());
    }
    // y = x^{−p} obeys y' = p b y − p a.
    let y0 = x.powf(-p);
    let y = if b == 0.0 {
        y0 - p * a * dt
    } else {
        y0 + (y0 - a / b) * (p * b * dt).exp_m1()
    };
    (y > 0.0).then(|| y.powf(-1.0 / p))
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("exponent p must be positive, got {p}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub dt_init: f64,
    /// Smallest step; `None` picks `0.01/(p·U_max^p)` so the sub-step stays
    /// regular below the cap.
    pub dt_min: Option<f64>,
    pub dt_max: f64,
    /// Step growth factor is `1 + safety` after a calm step.
    pub safety: f64,
    pub u_max: f64,
    pub t_max: f64,
    /// Keep a field snapshot every this many accepted steps (0 = never).
    pub snapshot_stride: usize,
    /// Fixed step when false.
    pub adaptive: bool,
    pub converge_radius: f64,
    pub converge_eps: f64,
    /// Declare decay once `‖u‖∞ < decay_ratio·‖u0‖∞`.
    pub decay_ratio: f64,
    /// Also accept decay on the supersolution certificate.
    pub decay_certificate: bool,
    /// Radius of the recorded localized mass.
    pub localized_radius: f64,
    pub max_steps: usize,
    /// Stop as inconclusive when mass reaches the outer cells. Off only for
    /// data meant to be periodic (e.g. spatially constant).
    pub boundary_check: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_init: 0.05,
            dt_min: None,
            dt_max: 1.0,
            safety: 0.25,
            u_max: 1e8,
            t_max: 1e3,
            snapshot_stride: 0,
            adaptive: true,
            converge_radius: 5.0,
            converge_eps: 0.01,
            decay_ratio: 1e-6,
            decay_certificate: true,
            localized_radius: 5.0,
            max_steps: 5_000_000,
            boundary_check: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt_init > 0.0 && self.dt_max >= self.dt_init) {
            return bad(format!("need 0 < dt_init <= dt_max, got {} and {}", self.dt_init, self.dt_max));
        }
        if let Some(m) = self.dt_min {
            if !(m > 0.0 && m <= self.dt_init) {
                return bad(format!("need 0 < dt_min <= dt_init, got {m}"));
            }
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad(format!("safety must lie in (0, 1], got {}", self.safety));
        }
        if !(self.u_max > 1.0) {
            return bad(format!("u_max must exceed 1, got {}", self.u_max));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.converge_eps > 0.0 && self.converge_eps < 1.0) {
            return bad(format!("converge_eps must lie in (0, 1), got {}", self.converge_eps));
        }
        Ok(())
    }

    pub fn resolved_dt_min(&self, p: f64) -> f64 {
        if !self.adaptive {
            return self.dt_init;
        }
        self.dt_min
            .unwrap_or_else(|| (0.01 / (p * self.u_max.powf(p))).min(1e-3 * self.dt_init))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayEvidence {
    /// The initial datum vanishes identically.
    ZeroData,
    /// The sup norm fell below the configured fraction of its start value.
    Threshold,
    /// A power-law supersolution bound guarantees global existence.
    Supersolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimOutcome {
    Blowup {
        t_star: f64,
        t_last: f64,
    },
    GlobalDecay {
        slope: Option<f64>,
        r2: Option<f64>,
        evidence: DecayEvidence,
        t_last: f64,
    },
    ConvergeToOne {
        hit_time: f64,
    },
    Inconclusive {
        reason: String,
        t_last: f64,
    },
}

impl SimOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            SimOutcome::Blowup { .. } => "blowup",
            SimOutcome::GlobalDecay { .. } => "global_decay",
            SimOutcome::ConvergeToOne { .. } => "converge_to_one",
            SimOutcome::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub linf: f64,
    pub l1: f64,
    pub localized_mass: f64,
    pub dt: f64,
    /// `h^N Σ u`.
    pub mass: f64,
    /// `h^N Σ f(u)`.
    pub reaction_integral: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: SimOutcome,
    pub diagnostics: Vec<DiagnosticRow>,
    pub snapshots: Vec<(f64, Field)>,
    pub final_field: Field,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub dt_min: f64,
}

/// Result of one split step.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Advanced(Field),
    /// The pointwise sub-step is singular at this cell.
    BlowupSignal { index: usize, value: f64 },
}

/// Split stepper with cached half-step multipliers.
pub struct Stepper<'a> {
    dk: &'a DiscreteKernel,
    reaction: Reaction,
    cache: Option<(f64, Vec<f64>)>,
}

impl<'a> Stepper<'a> {
    pub fn new(dk: &'a DiscreteKernel, reaction: Reaction) -> Self {
        Self {
            dk,
            reaction,
            cache: None,
        }
    }

    fn ensure_cache(&mut self, dt: f64) {
        if !matches!(&self.cache, Some((d, _)) if *d == dt) {
            self.cache = Some((dt, self.dk.linear_multiplier(0.5 * dt)));
        }
    }

    pub fn step(&mut self, u: &Field, dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("step needs dt > 0, got {dt}")));
        }
        self.ensure_cache(dt);
        let spectral = self.dk.spectral();
        let half = &self.cache.as_ref().expect("cache filled").1;
        let mut v = spectral.multiply(u, half)?;
        clip_roundoff(&mut v);
        for (index, x) in v.values_mut().iter_mut().enumerate() {
            match self.reaction.advance(*x, dt) {
                Some(y) => *x = y,
                None => return Ok(StepOutcome::BlowupSignal { index, value: *x }),
            }
        }
        let mut w = spectral.multiply(&v, half)?;
        clip_roundoff(&mut w);
        Ok(StepOutcome::Advanced(w))
    }
}

/// Negative values above `-ROUNDOFF_FLOOR·‖u‖∞` left by the transform are
/// set to zero; larger ones are kept so real sign errors stay visible.
pub const ROUNDOFF_FLOOR: f64 = 1e3 * f64::EPSILON;

fn clip_roundoff(u: &mut Field) {
    let floor = -ROUNDOFF_FLOOR * u.norms().linf;
    for x in u.values_mut() {
        if *x < 0.0 && *x >= floor {
            *x = 0.0;
        }
    }
}

/// One Strang step.
pub fn step(u: &Field, dk: &DiscreteKernel, reaction: &Reaction, dt: f64) -> Result<StepOutcome> {
    Stepper::new(dk, reaction.clone()).step(u, dt)
}

fn diagnostic_row(u: &Field, reaction: &Reaction, t: f64, dt: f64, radius: f64) -> DiagnosticRow {
    let norms = u.norms();
    let dv = u.grid().cell_volume();
    DiagnosticRow {
        t,
        linf: norms.linf,
        l1: norms.l1,
        localized_mass: u.localized_mass(radius),
        dt,
        mass: u.integral(),
        reaction_integral: dv * u.values().iter().map(|&x| reaction.eval(x)).sum::<f64>(),
    }
}

/// Fits `‖u‖∞^{−p}` linearly in `t` over the last samples above the floor
/// and returns the zero crossing. Heuristic: borrowed from the ODE profile.
pub fn extrapolate_blowup_time(rows: &[DiagnosticRow], p: f64) -> Option<f64> {
    let tail: Vec<&DiagnosticRow> = rows.iter().filter(|r| r.linf > EXTRAPOLATION_FLOOR).collect();
    if tail.len() < 3 {
        return None;
    }
    let start = tail.len().saturating_sub(EXTRAPOLATION_POINTS);
    let xs: Vec<f64> = tail[start..].iter().map(|r| r.t).collect();
    let ys: Vec<f64> = tail[start..].iter().map(|r| r.linf.powf(-p)).collect();
    if xs.iter().all(|&x| x == xs[0]) {
        return Some(xs[0]);
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    if slope >= 0.0 {
        return None;
    }
    Some(-intercept / slope)
}

/// Log-log regression of the sup norm over rows with `t ∈ [t0, t1]`.
pub fn fit_decay(rows: &[DiagnosticRow], t0: f64, t1: f64) -> Option<(f64, f64)> {
    let pts: Vec<&DiagnosticRow> = rows
        .iter()
        .filter(|r| r.t >= t0 && r.t <= t1 && r.t > 0.0 && r.linf > 0.0)
        .collect();
    if pts.len() < 5 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|r| r.t.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|r| r.linf.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    Some((slope, r_squared(&xs, &ys, slope, intercept)))
}

/// Supersolution check: with `‖u(s)‖∞ ≤ ‖u(t)‖∞ (s/t)^{slope}` for `s ≥ t`
/// and `p|slope| > 1`, `h(s)·e^{(s−t)(J−1)}u(t)` bounds `u` from above as long as
/// `p a ∫_t^∞ ‖·‖∞^p < 1`. We demand `< 1/2` on a clean power-law window.
fn supersolution_certificate(rows: &[DiagnosticRow], p: f64, a: f64) -> Option<(f64, f64)> {
    let last = rows.last()?;
    let (slope, r2) = fit_decay(rows, 0.25 * last.t, last.t)?;
    let rate = -p * slope;
    if r2 < 0.99 || rate <= 1.0 {
        return None;
    }
    let budget = p * a * last.linf.powf(p) * last.t / (rate - 1.0);
    (budget < 0.5).then_some((slope, r2))
}

/// Integrates from `u0` and classifies the outcome.
pub fn run(u0: &Field, dk: &DiscreteKernel, reaction: &Reaction, cfg: &SolverConfig) -> Result<RunResult> {
    cfg.validate()?;
    if u0.grid() != dk.grid() {
        return Err(Error::GridMismatch);
    }
    if !u0.is_nonnegative() {
        return Err(Error::Precondition("initial datum must be nonnegative".into()));
    }
    let p = reaction.exponent();
    let dt_min = cfg.resolved_dt_min(p);
    let mut stepper = Stepper::new(dk, reaction.clone());
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut dt = cfg.dt_init;
    let mut rows = vec![diagnostic_row(&u, reaction, 0.0, dt, cfg.localized_radius)];
    let mut snapshots = Vec::new();
    if cfg.snapshot_stride > 0 {
        snapshots.push((0.0, u.clone()));
    }
    let linf0 = rows[0].linf;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut next_certificate = 20.0;

    let finish = |outcome, rows, snapshots, field, accepted, rejected| {
        Ok(RunResult {
            outcome,
            diagnostics: rows,
            snapshots,
            final_field: field,
            accepted_steps: accepted,
            rejected_steps: rejected,
            dt_min,
        })
    };

    if linf0 == 0.0 {
        let outcome = SimOutcome::GlobalDecay {
            slope: None,
            r2: None,
            evidence: DecayEvidence::ZeroData,
            t_last: 0.0,
        };
        return finish(outcome, rows, snapshots, u, 0, 0);
    }

    loop {
        if t >= cfg.t_max * (1.0 - 1e-12) {
            let outcome = SimOutcome::Inconclusive {
                reason: "t_max reached".into(),
                t_last: t,
            };
            return finish(outcome, rows, snapshots, u, accepted, rejected);
        }
        if accepted + rejected >= cfg.max_steps {
            let outcome = SimOutcome::Inconclusive {
                reason: format!("step budget {} exhausted", cfg.max_steps),
                t_last: t,
            };
            return finish(outcome, rows, snapshots, u, accepted, rejected);
        }
        let h = dt.min(cfg.t_max - t);
        let linf = rows.last().unwrap().linf;
        let next = match stepper.step(&u, h)? {
            StepOutcome::BlowupSignal { .. } => {
                if cfg.adaptive && dt > dt_min {
                    dt = (0.5 * dt).max(dt_min);
                    rejected += 1;
                    continue;
                }
                let outcome = if linf > cfg.u_max {
                    SimOutcome::Blowup {
                        t_star: extrapolate_blowup_time(&rows, p).unwrap_or(t).max(t),
                        t_last: t,
                    }
                } else {
                    SimOutcome::Inconclusive {
                        reason: format!("singular reaction sub-step at dt_min with sup norm {linf:e} below the cap"),
                        t_last: t,
                    }
                };
                return finish(outcome, rows, snapshots, u, accepted, rejected);
            }
            StepOutcome::Advanced(next) => next,
        };
        let row = diagnostic_row(&next, reaction, t + h, h, cfg.localized_radius);
        let ratio = row.linf / linf;
        if cfg.adaptive && ratio > 1.2 && dt > dt_min {
            dt = (0.5 * dt).max(dt_min);
            rejected += 1;
            continue;
        }
        t += h;
        u = next;
        accepted += 1;
        rows.push(row);
        if cfg.snapshot_stride > 0 && accepted.is_multiple_of(cfg.snapshot_stride) {
            snapshots.push((t, u.clone()));
        }

        if row.linf > cfg.u_max {
            if !cfg.adaptive || dt <= dt_min {
                let outcome = SimOutcome::Blowup {
                    t_star: extrapolate_blowup_time(&rows, p).unwrap_or(t).max(t),
                    t_last: t,
                };
                return finish(outcome, rows, snapshots, u, accepted, rejected);
            }
            dt = (0.5 * dt).max(dt_min);
            continue;
        }
        if cfg.boundary_check && u.boundary_fraction() > BOUNDARY_TOLERANCE {
            let outcome = SimOutcome::Inconclusive {
                reason: format!(
                    "boundary: mass fraction {:.3e} within the outer layer exceeds {BOUNDARY_TOLERANCE:e}",
                    u.boundary_fraction()
                ),
                t_last: t,
            };
            return finish(outcome, rows, snapshots, u, accepted, rejected);
        }
        if reaction.saturates() && u.min_over_ball(cfg.converge_radius) >= 1.0 - cfg.converge_eps {
            return finish(SimOutcome::ConvergeToOne { hit_time: t }, rows, snapshots, u, accepted, rejected);
        }
        if row.linf < cfg.decay_ratio * linf0 {
            let fit = fit_decay(&rows, (0.1 * t).max(1.0), t);
            let outcome = SimOutcome::GlobalDecay {
                slope: fit.map(|f| f.0),
                r2: fit.map(|f| f.1),
                evidence: DecayEvidence::Threshold,
                t_last: t,
            };
            return finish(outcome, rows, snapshots, u, accepted, rejected);
        }
        if cfg.decay_certificate && t >= next_certificate {
            next_certificate = 2.0 * t;
            if let Some((slope, r2)) = supersolution_certificate(&rows, p, reaction.growth_coefficient()) {
                let outcome = SimOutcome::GlobalDecay {
                    slope: Some(slope),
                    r2: Some(r2),
                    evidence: DecayEvidence::Supersolution,
                    t_last: t,
                };
                return finish(outcome, rows, snapshots, u, accepted, rejected);
            }
        }
        if cfg.adaptive && ratio <= 1.05 {
            dt = (dt * (1.0 + cfg.safety)).min(cfg.dt_max);
        }
    }
}

/// Max relative gap between the central-difference derivative of the mass
/// and `h^N Σ f(u)`, over rows with `t ∈ window` (all rows when `None`).
pub fn mass_ode_residual(rows: &[DiagnosticRow], window: Option<(f64, f64)>) -> f64 {
    let mut worst = 0.0f64;
    for w in rows.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        if let Some((lo, hi)) = window {
            if a.t < lo || c.t > hi {
                continue;
            }
        }
        let (h1, h2) = (b.t - a.t, c.t - b.t);
        if h1 <= 0.0 || h2 <= 0.0 {
            continue;
        }
        // Three-point derivative on a nonuniform stencil.
        let d = -h2 / (h1 * (h1 + h2)) * a.mass + (h2 - h1) / (h1 * h2) * b.mass + h1 / (h2 * (h1 + h2)) * c.mass;
        let scale = b.reaction_integral.abs();
        if scale == 0.0 {
            if d != 0.0 {
                worst = f64::INFINITY;
            }
            continue;
        }
        worst = worst.max((d - b.reaction_integral).abs() / scale);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub ordered: bool,
    /// `max (u_low − u_high)_+` over all compared times.
    pub max_violation: f64,
    pub t_last: f64,
}

/// Tolerance of the comparison check.
pub const COMPARISON_TOLERANCE: f64 = 1e-8;

/// Steps both data with the fixed step `cfg.dt_init` in lockstep and checks
/// `u_low ≤ u_high` until `t_max`, a blow-up signal or the cap.
pub fn comparison_check(
    low: &Field,
    high: &Field,
    dk: &DiscreteKernel,
    reaction: &Reaction,
    cfg: &SolverConfig,
) -> Result<ComparisonReport> {
    if low.grid() != dk.grid() || high.grid() != dk.grid() {
        return Err(Error::GridMismatch);
    }
    if low.values().iter().zip(high.values()).any(|(a, b)| a > b) {
        return Err(Error::Precondition("comparison needs u0_low <= u0_high pointwise".into()));
    }
    let violation = |a: &Field, b: &Field| {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x - y)
            .fold(0.0f64, f64::max)
    };
    let mut a = low.clone();
    let mut b = high.clone();
    let mut lo_step = Stepper::new(dk, reaction.clone());
    let mut hi_step = Stepper::new(dk, reaction.clone());
    let mut t = 0.0;
    let mut worst = violation(&a, &b);
    let dt = cfg.dt_init;
    while t < cfg.t_max * (1.0 - 1e-12) {
        let h = dt.min(cfg.t_max - t);
        let (StepOutcome::Advanced(na), StepOutcome::Advanced(nb)) = (lo_step.step(&a, h)?, hi_step.step(&b, h)?) else {
            break;
        };
        a = na;
        b = nb;
        t += h;
        worst = worst.max(violation(&a, &b));
        if a.norms().linf > cfg.u_max || b.norms().linf > cfg.u_max {
            break;
        }
    }
    Ok(ComparisonReport {
        ordered: worst <= COMPARISON_TOLERANCE,
        max_violation: worst,
        t_last: t,
    })
}

pub fn write_diagnostics_csv(path: &Path, rows: &[DiagnosticRow]) -> Result<()> {
    let mut out = String::from("t,linf,l1,localized_mass,dt,mass,reaction_integral\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.t, r.linf, r.l1, r.localized_mass, r.dt, r.mass, r.reaction_integral
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
