//! Invariant suite behind `fujita verify`: one JSON line per invariant.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::Result;
use fujita_core::diagnostics::{ball_constant, ball_shift_monte_carlo, kaplan_f, kaplan_f_dual};
use fujita_core::kernels::{estimate_expansion, fujita_exponent, DEFAULT_FIT_WINDOW};
use fujita_core::semigroup::{profile_g_a, terms_for_tolerance};
use fujita_core::solver::run;
use fujita_core::{DiscreteKernel, Grid, KernelSpec, Reaction, SecondMoment, SimOutcome, SolverConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Scale the discrete kernel mass by 1.05.
    KernelMass,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "kernel-mass" => Ok(Fault::KernelMass),
            other => Err(format!("unknown fault '{other}' (known: kernel-mass)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub invariant: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// The suite failed; carries the number of failed invariants.
#[derive(Debug, thiserror::Error)]
#[error("{0} invariant(s) failed")]
pub struct SuiteFailure(pub usize);

struct Ctx {
    fault: Option<Fault>,
    seed: u64,
}

impl Ctx {
    fn kernel_on(&self, kernel: KernelSpec, grid: Grid) -> fujita_core::Result<DiscreteKernel> {
        match self.fault {
            Some(Fault::KernelMass) => DiscreteKernel::with_mass_scale(kernel, grid, 1.05),
            None => DiscreteKernel::new(kernel, grid),
        }
    }

    fn gaussian_1d(&self, points: usize, half_width: f64) -> fujita_core::Result<DiscreteKernel> {
        self.kernel_on(KernelSpec::gaussian(1.0, 1)?, Grid::new(1, points, half_width)?)
    }
}

type Outcome = fujita_core::Result<(bool, String)>;

fn families(dim: usize) -> fujita_core::Result<Vec<KernelSpec>> {
    let mut v = vec![
        KernelSpec::gaussian(1.0, dim)?,
        KernelSpec::laplace(1.0, dim)?,
        KernelSpec::compact_bump(1.0, dim)?,
        KernelSpec::algebraic_tail(dim as f64 + 0.5, 1.0, dim)?,
    ];
    if dim == 1 {
        v.push(KernelSpec::cauchy());
    }
    Ok(v)
}

fn hat_bounded(_: &Ctx) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut gap = f64::INFINITY;
    for dim in 1..=2 {
        for k in families(dim)? {
            for i in 0..400 {
                let xi = 1e-3 * (1e5f64).powf(i as f64 / 399.0);
                worst = worst.max(k.hat(xi)?.abs());
                gap = gap.min(k.one_minus_hat(xi)?);
            }
        }
    }
    Ok((worst <= 1.0 && gap > 0.0, format!("max |J^| = {worst:.6}, min 1 - J^ = {gap:.2e}")))
}

fn quadratic_expansion(_: &Ctx) -> Outcome {
    let mut worst = 0.0f64;
    for dim in 1..=2 {
        for k in families(dim)? {
            if let SecondMoment::Finite(m2) = k.second_moment()? {
                let e = estimate_expansion(&k, DEFAULT_FIT_WINDOW)?;
                let a = m2 / (2.0 * dim as f64);
                worst = worst.max((e.beta - 2.0).abs()).max((e.a - a).abs() / a);
            }
        }
    }
    Ok((worst <= 0.02, format!("max deviation in beta and A/(m2/2N) {worst:.2e}")))
}

fn rescaling(_: &Ctx) -> Outcome {
    let mut worst = 0.0f64;
    for k in [KernelSpec::gaussian(1.0, 1)?, KernelSpec::algebraic_tail(2.5, 1.0, 1)?] {
        let base = fujita_exponent(&estimate_expansion(&k, DEFAULT_FIT_WINDOW)?, 1);
        for lambda in [0.5, 2.0] {
            let r = fujita_exponent(&estimate_expansion(&k.rescaled(lambda)?, DEFAULT_FIT_WINDOW)?, 1);
            worst = worst.max((r - base).abs());
        }
    }
    Ok((worst <= 0.05, format!("max p_F change {worst:.2e}")))
}

fn ball_constants(_: &Ctx) -> Outcome {
    let c1 = ball_constant(1)?;
    let c2 = ball_constant(2)?;
    Ok((
        c1 == 0.5 && (c2 - 1.0 / 3.0).abs() <= 1e-10,
        format!("C_1 = {c1}, C_2 - 1/3 = {:.1e}", c2 - 1.0 / 3.0),
    ))
}

fn ball_shift(ctx: &Ctx) -> Outcome {
    let mut ok = true;
    let mut min_ratio = f64::INFINITY;
    for dim in 1..=2 {
        for k in families(dim)? {
            let r = ball_shift_monte_carlo(&k, 1.5, 1000, ctx.seed)?;
            ok &= r.holds;
            min_ratio = min_ratio.min(r.min_ratio / r.constant);
        }
    }
    Ok((ok, format!("min ratio / C_N = {min_ratio:.4}")))
}

fn commutativity(ctx: &Ctx) -> Outcome {
    let dk = ctx.gaussian_1d(128, 16.0)?;
    let g = *dk.grid();
    let f = g.sample(|x| (-(x[0] - 1.0).powi(2)).exp())?;
    let h = g.sample(|x| 1.0 / (1.0 + x[0] * x[0]))?;
    let a = dk.spectral().convolve(&f, &h)?;
    let b = dk.spectral().convolve(&h, &f)?;
    let diff = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let min = a.values().iter().copied().fold(f64::INFINITY, f64::min);
    Ok((diff <= 1e-12 && min >= -1e-12, format!("sup |f*g - g*f| = {diff:.1e}, min {min:.1e}")))
}

fn mass_and_sign(ctx: &Ctx) -> Outcome {
    let dk = ctx.gaussian_1d(256, 30.0)?;
    let u0 = dk.grid().sample_radial(|r| (-r * r).exp())?;
    let mut drift = 0.0f64;
    let mut min = 0.0f64;
    for t in [0.5, 2.0, 5.0] {
        let v = dk.evolve_linear(&u0, t)?;
        drift = drift.max((v.integral() - u0.integral()).abs());
        min = min.min(v.values().iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok((drift <= 1e-10 && min >= -1e-12, format!("mass drift {drift:.1e}, min {min:.1e}")))
}

fn oracle(ctx: &Ctx) -> Outcome {
    let dk = ctx.gaussian_1d(256, 20.0)?;
    let u0 = dk.grid().sample_radial(|r| (-r * r).exp())?;
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 5.0] {
        let s = dk.series_k(&u0, t, terms_for_tolerance(t, 1e-12))?;
        let v = dk.evolve_linear(&u0, t)?;
        let err = s.field.values().iter().zip(v.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err - s.truncation_bound);
    }
    Ok((worst <= 1e-8, format!("sup error beyond truncation bound {worst:.1e}")))
}

fn psi_mass(ctx: &Ctx) -> Outcome {
    let dk = ctx.gaussian_1d(256, 20.0)?;
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 5.0] {
        let (m, _) = dk.psi_mass(t, terms_for_tolerance(t, 1e-14))?;
        worst = worst.max((m + (-t).exp_m1()).abs());
    }
    Ok((worst <= 1e-6, format!("max |h sum psi - (1 - e^-t)| = {worst:.2e}")))
}

fn duality(ctx: &Ctx) -> Outcome {
    let dk = ctx.gaussian_1d(256, 20.0)?;
    let u0 = dk.grid().sample_radial(|r| (-r * r).exp())?;
    let mut worst = 0.0f64;
    for t in [1.0, 5.0, 10.0] {
        let f = kaplan_f(&dk, &u0, t)?;
        worst = worst.max((f - kaplan_f_dual(&dk, &u0, t)?).abs() / f);
    }
    Ok((worst <= 1e-4, format!("max relative gap {worst:.2e}")))
}

fn bernoulli(ctx: &Ctx) -> Outcome {
    let dk = ctx.gaussian_1d(16, 4.0)?;
    let u0 = dk.grid().sample(|_| 2.0)?;
    let cfg = SolverConfig {
        dt_init: 1e-3,
        boundary_check: false,
        ..SolverConfig::default()
    };
    let res = run(&u0, &dk, &Reaction::bernoulli(1.0, 1.0, 1.0)?, &cfg)?;
    Ok(match res.outcome {
        SimOutcome::Blowup { t_star, .. } => {
            let rel = (t_star - 2f64.ln()).abs() / 2f64.ln();
            (rel <= 0.01, format!("t* = {t_star:.6}, relative error {rel:.1e}"))
        }
        other => (false, format!("outcome {}", other.label())),
    })
}

fn profiles(_: &Ctx) -> Outcome {
    let a = 0.7;
    let mut worst = 0.0f64;
    for i in 0..=20 {
        let y = 0.25 * i as f64;
        let gauss = (-y * y / (4.0 * a)).exp() / (4.0 * PI * a).sqrt();
        let poisson = a / (PI * (a * a + y * y));
        worst = worst
            .max((profile_g_a(a, 2.0, 1, y)?.value - gauss).abs())
            .max((profile_g_a(a, 1.0, 1, y)?.value - poisson).abs());
    }
    Ok((worst <= 1e-6, format!("max error {worst:.1e}")))
}

fn allee_bounds(ctx: &Ctx) -> Outcome {
    let dk = ctx.gaussian_1d(128, 40.0)?;
    let u0 = dk.grid().sample_radial(|r| 0.9 * (-r * r).exp())?;
    let cfg = SolverConfig {
        t_max: 20.0,
        snapshot_stride: 1,
        boundary_check: false,
        ..SolverConfig::default()
    };
    let res = run(&u0, &dk, &Reaction::allee_logistic(1.0)?, &cfg)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, s) in &res.snapshots {
        for &v in s.values() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok((lo >= -1e-12 && hi <= 1.0 + 1e-8, format!("range [{lo:.2e}, {hi:.6}]")))
}

type Invariant = (&'static str, fn(&Ctx) -> Outcome);

const INVARIANTS: [Invariant; 14] = [
    ("symbol_bounded_by_one", hat_bounded),
    ("quadratic_expansion_from_second_moment", quadratic_expansion),
    ("fujita_exponent_rescaling_invariant", rescaling),
    ("ball_constant_closed_forms", ball_constants),
    ("ball_shift_inequality", ball_shift),
    ("convolution_commutes_and_keeps_sign", commutativity),
    ("linear_flow_mass_and_sign", mass_and_sign),
    ("series_matches_spectral_flow", oracle),
    ("psi_mass_identity", psi_mass),
    ("kaplan_duality", duality),
    ("bernoulli_blowup_time", bernoulli),
    ("limit_profile_closed_forms", profiles),
    ("allee_stays_in_unit_interval", allee_bounds),
    ("convolution_self_convergence", self_convergence),
];

fn self_convergence(ctx: &Ctx) -> Outcome {
    let k = KernelSpec::gaussian(1.0, 1)?;
    let coarse = ctx.kernel_on(k.clone(), Grid::new(1, 128, 16.0)?)?;
    let fine = ctx.kernel_on(k, Grid::new(1, 256, 16.0)?)?;
    let f = |r: f64| (-r * r).exp();
    let a = coarse.convolve(&coarse.grid().sample_radial(f)?)?;
    let b = fine.convolve(&fine.grid().sample_radial(f)?)?;
    let diff = (0..128).map(|i| (a.values()[i] - b.values()[2 * i]).abs()).fold(0.0, f64::max);
    Ok((diff <= 1e-10, format!("sup change under M -> 2M {diff:.1e}")))
}

pub fn run_suite(fault: Option<Fault>, seed: u64) -> VerifyReport {
    let ctx = Ctx { fault, seed };
    let checks = INVARIANTS
        .par_iter()
        .map(|(name, f)| {
            let (pass, detail) = match f(&ctx) {
                Ok(v) => v,
                Err(e) => (false, format!("error: {e}")),
            };
            Check {
                invariant: name.to_string(),
                pass,
                detail,
            }
        })
        .collect();
    VerifyReport { checks }
}

pub fn cmd_verify(fault: Option<Fault>, seed: u64, out_dir: &Path) -> Result<VerifyReport> {
    let report = run_suite(fault, seed);
    let mut lines = String::new();
    for c in &report.checks {
        lines.push_str(&serde_json::to_string(c)?);
        lines.push('\n');
    }
    print!("{lines}");
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("verify.jsonl"), lines)?;
    let failed = report.checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(SuiteFailure(failed).into());
    }
    Ok(report)
}
