//! Closed-form objects of the blow-up/extinction analysis.
//!
//! Kaplan functional `f(t) = ∫ e^{t(Ĵ(ξ)−1)} û₀(ξ) dξ` and its dual
//! `(2π)^N ∫ K(t,x) u₀(x) dx`, the two-sided bounds on `f`, the ball-shift
//! constant `C_N`, the indicator blow-up threshold, the supercritical
//! extinction certificate and the hair-trigger subsolution.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::kernels::{FourierExpansion, KernelSpec};
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};
use crate::semigroup::{terms_for_tolerance, DiscreteKernel};
use crate::special;

/// Symmetry tolerance (relative to the sup norm) for the radial precondition.
pub const RADIAL_TOLERANCE: f64 = 1e-12;

/// Truncation tolerance used for the series in the dual form.
pub const DUAL_SERIES_TOLERANCE: f64 = 1e-13;

fn check_kaplan_input(u0: &Field) -> Result<()> {
    if !u0.is_nonnegative() {
        return Err(Error::Precondition("Kaplan functional needs a nonnegative datum".into()));
    }
    if !u0.is_symmetric(RADIAL_TOLERANCE) {
        return Err(Error::Precondition(
            "Kaplan functional needs a datum radial about the origin".into(),
        ));
    }
    Ok(())
}

/// Discrete transform `û₀(ξ_k) = h^N Σ_j u₀(x_j) e^{−iξ_k·x_j}` (real part;
/// the datum is symmetric).
fn discrete_transform(dk: &DiscreteKernel, u0: &Field) -> Vec<f64> {
    let grid = dk.grid();
    let dv = grid.cell_volume();
    dk.spectral()
        .forward(u0.values())
        .into_iter()
        .enumerate()
        .map(|(k, z)| dv * z.re * grid.checkerboard(k))
        .collect()
}

fn frequency_cell(dk: &DiscreteKernel) -> f64 {
    let grid = dk.grid();
    (PI / grid.half_width()).powi(grid.dim() as i32)
}

/// `f(t)` as a lattice sum with the closed-form `Ĵ`.
pub fn kaplan_f(dk: &DiscreteKernel, u0: &Field, t: f64) -> Result<f64> {
    check_kaplan_input(u0)?;
    if u0.grid() != dk.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = dk.grid();
    let hat = discrete_transform(dk, u0);
    let mut sum = 0.0;
    for (k, h) in hat.iter().enumerate() {
        let gap = dk.kernel().one_minus_hat(grid.frequency(k))?;
        sum += (-t * gap).exp() * h;
    }
    Ok(sum * frequency_cell(dk))
}

/// `(2π)^N (e^{−t} u₀(0) + h^N Σ ψ_K(t) u₀)` with `K` from the certified bound.
pub fn kaplan_f_dual(dk: &DiscreteKernel, u0: &Field, t: f64) -> Result<f64> {
    check_kaplan_input(u0)?;
    if u0.grid() != dk.grid() {
        return Err(Error::GridMismatch);
    }
    let n = dk.grid().dim() as i32;
    let terms = terms_for_tolerance(t, DUAL_SERIES_TOLERANCE);
    let psi = dk.psi_series(t, terms)?.field;
    let dv = dk.grid().cell_volume();
    let pairing: f64 = psi.values().iter().zip(u0.values()).map(|(a, b)| a * b).sum::<f64>() * dv;
    Ok((2.0 * PI).powi(n) * ((-t).exp() * u0.at_origin() + pairing))
}

/// `∫ |û₀(ξ)| dξ` on the lattice.
pub fn fourier_l1(dk: &DiscreteKernel, u0: &Field) -> f64 {
    discrete_transform(dk, u0).iter().map(|v| v.abs()).sum::<f64>() * frequency_cell(dk)
}

/// `G = ½ ∫_{R^N} e^{−2A|z|^β} dz` by radial quadrature.
pub fn kaplan_g(exp: &FourierExpansion, dim: usize) -> Result<f64> {
    let (a, beta) = (exp.a, exp.beta);
    let power = dim as i32 - 1;
    let f = |r: f64| r.powi(power) * (-2.0 * a * r.powf(beta)).exp();
    let scale = (2.0 * a).powf(-1.0 / beta);
    let tol = Tolerance::new(1e-15, 1e-13);
    let head = integrate(f, 0.0, scale, tol)?.value;
    let tail = integrate_to_infinity(f, scale, tol)?.value;
    Ok(0.5 * special::sphere_area(dim) * (head + tail))
}

/// `G ‖u₀‖₁ t^{−N/β}`.
pub fn kaplan_lower_bound(exp: &FourierExpansion, dim: usize, u0_l1: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("lower bound needs t > 0, got {t}")));
    }
    Ok(kaplan_g(exp, dim)? * u0_l1 * t.powf(-(dim as f64) / exp.beta))
}

/// `(2π)^N (((p+1)/p)^{1/p} t^{−1/p} + e^{−t} u₀(0))`.
pub fn kaplan_upper_bound(p: f64, u0_at_0: f64, t: f64, dim: usize) -> Result<f64> {
    if !(t > 0.0 && p > 0.0) {
        return Err(Error::Domain(format!("upper bound needs t > 0 and p > 0, got t={t}, p={p}")));
    }
    let lead = ((p + 1.0) / p).powf(1.0 / p) * t.powf(-1.0 / p);
    Ok((2.0 * PI).powi(dim as i32) * (lead + (-t).exp() * u0_at_0))
}

/// First `t` on a log grid of `[t_lo, t_hi]` at which the lower bound
/// exceeds the upper bound.
pub fn bound_crossing(
    exp: &FourierExpansion,
    dim: usize,
    p: f64,
    u0_l1: f64,
    u0_at_0: f64,
    (t_lo, t_hi): (f64, f64),
    samples: usize,
) -> Result<Option<f64>> {
    let g = kaplan_g(exp, dim)?;
    for i in 0..samples {
        let s = i as f64 / (samples.max(2) - 1) as f64;
        let t = (t_lo.ln() * (1.0 - s) + t_hi.ln() * s).exp();
        let lower = g * u0_l1 * t.powf(-(dim as f64) / exp.beta);
        if lower > kaplan_upper_bound(p, u0_at_0, t, dim)? {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanReport {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub f_dual: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub g: f64,
    pub p: f64,
    pub beta: f64,
    pub a: f64,
}

impl KaplanReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,f,f_dual,lower_bound,upper_bound\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.times[i], self.f[i], self.f_dual[i], self.lower[i], self.upper[i]
            ));
        }
        out
    }
}

/// Evaluates `f`, its dual and both bounds at each time, in parallel.
pub fn kaplan_report(
    dk: &DiscreteKernel,
    u0: &Field,
    exp: &FourierExpansion,
    p: f64,
    times: &[f64],
) -> Result<KaplanReport> {
    let dim = dk.grid().dim();
    let g = kaplan_g(exp, dim)?;
    let l1 = u0.norms().l1;
    let rows: Vec<Result<(f64, f64, f64, f64)>> = times
        .par_iter()
        .map(|&t| {
            Ok((
                kaplan_f(dk, u0, t)?,
                kaplan_f_dual(dk, u0, t)?,
                g * l1 * t.powf(-(dim as f64) / exp.beta),
                kaplan_upper_bound(p, u0.at_origin(), t, dim)?,
            ))
        })
        .collect();
    let mut report = KaplanReport {
        times: times.to_vec(),
        f: Vec::new(),
        f_dual: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        g,
        p,
        beta: exp.beta,
        a: exp.a,
    };
    for r in rows {
        let (f, fd, lo, up) = r?;
        report.f.push(f);
        report.f_dual.push(fd);
        report.lower.push(lo);
        report.upper.push(up);
    }
    Ok(report)
}

/// Half-angle of the cone that fits inside every shifted ball.
pub fn ball_theta_star(dim: usize) -> f64 {
    if dim < 2 {
        return PI / 2.0;
    }
    (2f64.powf(-1.0 / (dim as f64 - 1.0))).acos()
}

/// `C_N`: `1/2` in 1D, otherwise the ratio of products of
/// `∫_{−θ*}^{θ*} cos^{N−1−i}θ dθ` over their full-range counterparts.
pub fn ball_constant(dim: usize) -> Result<f64> {
    match dim {
        0 => Err(Error::Domain("dimension must be positive".into())),
        1 => Ok(0.5),
        _ => {
            let theta = ball_theta_star(dim);
            let tol = Tolerance::new(1e-15, 1e-14);
            let mut num = 1.0;
            let mut den = 1.0;
            for i in 1..dim {
                let power = (dim - 1 - i) as i32;
                let f = |x: f64| x.cos().powi(power);
                num *= integrate(f, -theta, theta, tol)?.value;
                den *= if i == dim - 1 {
                    2.0 * PI
                } else {
                    integrate(f, -PI / 2.0, PI / 2.0, tol)?.value
                };
            }
            Ok(num / den)
        }
    }
}

/// `λ_min = (1 − C_N ∫_{|z| ≤ R} J)^{1/p}`.
pub fn blowup_threshold(kernel: &KernelSpec, radius: f64, p: f64) -> Result<f64> {
    if !(radius > 0.0 && p > 0.0) {
        return Err(Error::Domain(format!("need R > 0 and p > 0, got R={radius}, p={p}")));
    }
    let c = ball_constant(kernel.dim())?;
    Ok((1.0 - c * kernel.ball_mass(radius)?).powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallShiftReport {
    pub samples: usize,
    /// Smallest `∫_{|z−y|≤R} J / ∫_{|z|≤R} J` seen.
    pub min_ratio: f64,
    pub constant: f64,
    pub holds: bool,
}

/// Monte Carlo check of `∫_{|z−y|≤R} J ≥ C_N ∫_{|z|≤R} J` for `y` uniform
/// in `B_R`.
pub fn ball_shift_monte_carlo(kernel: &KernelSpec, radius: f64, samples: usize, seed: u64) -> Result<BallShiftReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = ball_constant(kernel.dim())?;
    let base = kernel.ball_mass(radius)?;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..samples {
        let shift = match kernel.dim() {
            1 => radius * rng.random::<f64>(),
            _ => radius * rng.random::<f64>().sqrt(),
        };
        let ratio = kernel.shifted_ball_mass(shift, radius)? / base;
        min_ratio = min_ratio.min(ratio);
    }
    Ok(BallShiftReport {
        samples,
        min_ratio,
        constant: c,
        holds: min_ratio >= c * (1.0 - 1e-12),
    })
}

/// Supercritical smallness certificate and the supersolution factor `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionCertificate {
    pub p: f64,
    /// `q = pN/β − 1 > 0`.
    pub q: f64,
    pub c_est: f64,
    /// `‖u₀‖₁ + ‖û₀‖₁`.
    pub size: f64,
    pub delta: f64,
    pub small: bool,
}

impl ExtinctionCertificate {
    fn load(&self) -> f64 {
        self.p * (self.c_est * self.size).powf(self.p) / self.q
    }

    /// `g(t) = (1 − pC^p s^p/q · (1 − (1+t)^{−q}))^{−1/p}`; `None` once the
    /// bracket is no longer positive.
    pub fn g(&self, t: f64) -> Option<f64> {
        let bracket = 1.0 - self.load() * (1.0 - (1.0 + t).powf(-self.q));
        (bracket > 0.0).then(|| bracket.powf(-1.0 / self.p))
    }

    /// `lim_{t→∞} g(t)`, finite exactly when the datum is small.
    pub fn g_limit(&self) -> Option<f64> {
        let bracket = 1.0 - self.load();
        (bracket > 0.0).then(|| bracket.powf(-1.0 / self.p))
    }
}

pub fn extinction_certificate(
    p: f64,
    exp: &FourierExpansion,
    dim: usize,
    size: f64,
    c_est: f64,
) -> Result<ExtinctionCertificate> {
    let critical = exp.beta / dim as f64;
    if p <= critical {
        return Err(Error::UnsupportedRegime(format!(
            "extinction certificate needs p > beta/N = {critical}, got p = {p}"
        )));
    }
    if !(c_est > 0.0 && size >= 0.0) {
        return Err(Error::Precondition(format!("need C > 0 and size >= 0, got C={c_est}, size={size}")));
    }
    let q = p * dim as f64 / exp.beta - 1.0;
    let delta = (q / p).powf(1.0 / p) / c_est;
    Ok(ExtinctionCertificate {
        p,
        q,
        c_est,
        size,
        delta,
        small: size < delta,
    })
}

/// Safety factor applied to the empirical decay constant.
pub const C_EST_SAFETY: f64 = 2.0;

/// `C_est = 2 · max_t ‖v(t)‖∞ (1+t)^{N/β} / (‖v₀‖₁ + ‖v̂₀‖₁)` over the
/// probe data and times.
pub fn estimate_decay_constant(dk: &DiscreteKernel, probes: &[Field], times: &[f64], beta: f64) -> Result<f64> {
    let n = dk.grid().dim() as f64;
    let mut worst = 0.0f64;
    for v0 in probes {
        let size = v0.norms().l1 + fourier_l1(dk, v0);
        if size == 0.0 {
            continue;
        }
        for &t in times {
            let v = dk.evolve_linear(v0, t)?;
            worst = worst.max(v.norms().linf * (1.0 + t).powf(n / beta) / size);
        }
    }
    Ok(C_EST_SAFETY * worst)
}

/// `w(t, X) = X (1 − ε p t X^p)^{−1/p}`.
pub fn hairtrigger_w(t: f64, x: f64, eps: f64, p: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(x.max(0.0));
    }
    let singular_time = 1.0 / (eps * p * x.powf(p));
    if t >= singular_time {
        return Err(Error::Singularity { t, singular_time });
    }
    Ok(x * (1.0 - eps * p * t * x.powf(p)).powf(-1.0 / p))
}

/// `T(τ) = (1/(εp)) (τ^{pN/β}/((1−ε)^p γ^p) − (1−ε)^{−p})`.
pub fn hairtrigger_horizon(tau: f64, eps: f64, p: f64, gamma: f64, dim: usize, beta: f64) -> f64 {
    let n = dim as f64;
    let one = (1.0 - eps).powf(p);
    (tau.powf(p * n / beta) / (one * gamma.powf(p)) - 1.0 / one) / (eps * p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionReport {
    pub times: Vec<f64>,
    /// Largest positive residual over nodes and times.
    pub max_positive: f64,
    /// Largest residual (any sign).
    pub max_signed: f64,
    /// Largest `‖W(t)‖∞`.
    pub linf_w: f64,
    /// `max |R_δ − R_{δ/2}|`, an estimate of the finite-difference error.
    pub fd_error: f64,
    /// `W ≤ 1 − ε` held at every evaluated node.
    pub bounded_by_one_minus_eps: bool,
}

fn w_field(dk: &DiscreteKernel, phi0: &Field, t: f64, eps: f64, p: f64) -> Result<Field> {
    let phi = dk.evolve_linear(phi0, t)?;
    let values = phi
        .values()
        .iter()
        .map(|&x| hairtrigger_w(t, x, eps, p))
        .collect::<Result<Vec<f64>>>()?;
    Field::from_vec(*dk.grid(), values)
}

fn residual_at(dk: &DiscreteKernel, phi0: &Field, t: f64, eps: f64, p: f64, delta: f64) -> Result<(Vec<f64>, Field)> {
    let w = w_field(dk, phi0, t, eps, p)?;
    let plus = w_field(dk, phi0, t + delta, eps, p)?;
    let minus = w_field(dk, phi0, t - delta, eps, p)?;
    let jw = dk.convolve(&w)?;
    let r = w
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let dt = (plus.values()[i] - minus.values()[i]) / (2.0 * delta);
            dt - (jw.values()[i] - x) - x.max(0.0).powf(1.0 + p) * (1.0 - x)
        })
        .collect();
    Ok((r, w))
}

/// Residual of `W(t,x) = w(t, Φ(t,x))` in the Allee equation, with `Φ` the
/// exact linear flow from `Φ₀`; time derivative by centered differences of
/// half-width `delta`.
pub fn subsolution_residual(
    dk: &DiscreteKernel,
    eps: f64,
    p: f64,
    phi0: &Field,
    times: &[f64],
    delta: f64,
) -> Result<SubsolutionReport> {
    if !(eps > 0.0 && eps < 1.0 && p > 0.0 && delta > 0.0) {
        return Err(Error::Precondition(format!(
            "need 0 < eps < 1, p > 0, delta > 0; got eps={eps}, p={p}, delta={delta}"
        )));
    }
    let mut report = SubsolutionReport {
        times: times.to_vec(),
        max_positive: 0.0,
        max_signed: f64::NEG_INFINITY,
        linf_w: 0.0,
        fd_error: 0.0,
        bounded_by_one_minus_eps: true,
    };
    for &t in times {
        if t < delta {
            return Err(Error::Domain(format!("time {t} closer to 0 than the stencil half-width {delta}")));
        }
        let (r, w) = residual_at(dk, phi0, t, eps, p, delta)?;
        let (r_half, _) = residual_at(dk, phi0, t, eps, p, 0.5 * delta)?;
        for (a, b) in r.iter().zip(&r_half) {
            report.max_positive = report.max_positive.max(*a);
            report.max_signed = report.max_signed.max(*a);
            report.fd_error = report.fd_error.max((a - b).abs());
        }
        report.linf_w = report.linf_w.max(w.norms().linf);
        if w.max() > 1.0 - eps {
            report.bounded_by_one_minus_eps = false;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn gaussian_dk(m: usize, l: f64) -> DiscreteKernel {
        DiscreteKernel::new(KernelSpec::gaussian(1.0, 1).unwrap(), Grid::new(1, m, l).unwrap()).unwrap()
    }

    #[test]
    fn ball_constants() {
        assert_eq!(ball_constant(1).unwrap(), 0.5);
        assert!((ball_constant(2).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((ball_theta_star(2) - PI / 3.0).abs() < 1e-15);
        for n in 2..6 {
            let c = ball_constant(n).unwrap();
            assert!(c > 0.0 && c < 1.0);
        }
    }

    #[test]
    fn ball_constant_three_dimensions() {
        // θ* = arccos(2^{−1/2}) = π/4; C₃ = (∫cos)(∫1)/(2·2π) = (√2)(π/2)/(4π).
        let exact = 2f64.sqrt() * (PI / 2.0) / (4.0 * PI);
        assert!((ball_constant(3).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn threshold_examples() {
        let g = KernelSpec::gaussian(1.0, 1).unwrap();
        let lam = blowup_threshold(&g, 2.0, 3.0).unwrap();
        let oracle = (1.0 - 0.5 * special::erf(2.0 / 2f64.sqrt())).powf(1.0 / 3.0);
        assert!((lam - oracle).abs() < 1e-12);
        let far = blowup_threshold(&g, 60.0, 2.0).unwrap();
        assert!((far - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(blowup_threshold(&g, 2.0, 400.0).unwrap() > 0.998);
    }

    #[test]
    fn kaplan_constant_g() {
        let e = FourierExpansion::exact(0.5, 2.0).unwrap();
        assert!((kaplan_g(&e, 1).unwrap() - PI.sqrt() / 2.0).abs() < 1e-12);
        // Closed form: |S| Γ(N/β) / (2 β (2A)^{N/β}).
        let e = FourierExpansion::exact(0.7, 1.3).unwrap();
        let exact = 2.0 * PI * special::gamma(2.0 / 1.3) / (2.0 * 1.3 * 1.4f64.powf(2.0 / 1.3));
        assert!((kaplan_g(&e, 2).unwrap() - exact).abs() < 1e-11);
    }

    #[test]
    fn upper_bound_arithmetic() {
        assert!((kaplan_upper_bound(1.0, 0.0, 2.0, 1).unwrap() - 2.0 * PI).abs() < 1e-14);
        assert!(kaplan_upper_bound(1.0, 1.0, 1e6, 1).unwrap() < 1e-4);
    }

    #[test]
    fn subcritical_crossing() {
        let e = FourierExpansion::exact(0.5, 2.0).unwrap();
        // Near p_F the crossing moves out to t ~ 1e36.
        for &p in &[0.5, 1.0, 1.9] {
            assert!(bound_crossing(&e, 1, p, 1.0, 1.0, (1.0, 1e60), 2000).unwrap().is_some(), "p {p}");
        }
        assert!(bound_crossing(&e, 1, 3.0, 1.0, 1.0, (1.0, 1e12), 400).unwrap().is_none());
    }

    #[test]
    fn kaplan_at_zero_time() {
        let dk = gaussian_dk(256, 20.0);
        let u0 = dk.grid().sample_radial(|r| (-r * r).exp()).unwrap();
        let f0 = kaplan_f(&dk, &u0, 0.0).unwrap();
        assert!((f0 - 2.0 * PI).abs() < 1e-10);
        assert!((kaplan_f_dual(&dk, &u0, 0.0).unwrap() - 2.0 * PI).abs() < 1e-12);
        let z = dk.grid().zeros();
        assert_eq!(kaplan_f(&dk, &z, 3.0).unwrap(), 0.0);
        assert_eq!(kaplan_f_dual(&dk, &z, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn kaplan_rejects_off_centre_data() {
        let dk = gaussian_dk(64, 10.0);
        let u0 = dk.grid().sample(|x| (-(x[0] - 1.0).powi(2)).exp()).unwrap();
        assert!(matches!(kaplan_f(&dk, &u0, 1.0), Err(Error::Precondition(_))));
        assert!(matches!(kaplan_f_dual(&dk, &u0, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn kaplan_gaussian_matches_quadrature() {
        // û₀ = √π e^{−ξ²/4}, Ĵ = e^{−ξ²/2}; the integral over R by adaptive
        // quadrature is independent of the lattice sum.
        let dk = gaussian_dk(256, 20.0);
        let u0 = dk.grid().sample_radial(|r| (-r * r).exp()).unwrap();
        for &t in &[0.5, 1.0, 4.0] {
            let integrand = |xi: f64| {
                (t * (-0.5 * xi * xi).exp_m1()).exp() * PI.sqrt() * (-0.25 * xi * xi).exp()
            };
            let tol = Tolerance::new(1e-15, 1e-14);
            let exact = 2.0 * integrate_to_infinity(integrand, 0.0, tol).unwrap().value;
            assert!((kaplan_f(&dk, &u0, t).unwrap() - exact).abs() < 1e-10 * exact, "t {t}");
        }
    }

    #[test]
    fn duality_gap_of_cusped_kernel_is_second_order() {
        // The closed-form side sees the exact symbol; the dual side samples the
        // kernel, whose cusp at 0 costs O(h²).
        let gap = |m: usize| {
            let grid = Grid::new(1, m, 25.0).unwrap();
            let dk = DiscreteKernel::new(KernelSpec::laplace(1.0, 1).unwrap(), grid).unwrap();
            let u0 = grid.sample_radial(|r| (-4.0 * r * r).exp()).unwrap();
            let f = kaplan_f(&dk, &u0, 1.0).unwrap();
            (f - kaplan_f_dual(&dk, &u0, 1.0).unwrap()).abs() / f
        };
        let (a, b) = (gap(512), gap(1024));
        assert!((a / b - 4.0).abs() < 0.2, "gaps {a:e} {b:e}");
    }

    #[test]
    fn extinction_certificate_shape() {
        let e = FourierExpansion::exact(0.5, 2.0).unwrap();
        assert!(matches!(
            extinction_certificate(2.0, &e, 1, 0.1, 1.0),
            Err(Error::UnsupportedRegime(_))
        ));
        let c = extinction_certificate(3.0, &e, 1, 0.1, 1.0).unwrap();
        assert!((c.delta - (0.5f64 / 3.0).powf(1.0 / 3.0)).abs() < 1e-15);
        assert!(c.small);
        assert_eq!(c.g(0.0), Some(1.0));
        let mut prev = 1.0;
        for i in 0..=1000 {
            let g = c.g(i as f64).unwrap();
            assert!(g >= prev);
            prev = g;
        }
        assert!(prev <= c.g_limit().unwrap());
        let big = extinction_certificate(3.0, &e, 1, 10.0, 1.0).unwrap();
        assert!(!big.small);
        assert!(big.g_limit().is_none());
    }

    #[test]
    fn hairtrigger_formulas() {
        assert_eq!(hairtrigger_w(0.0, 0.3, 0.1, 2.0).unwrap(), 0.3);
        assert!((hairtrigger_w(0.5, 1.0, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            hairtrigger_w(1.0, 1.0, 1.0, 1.0),
            Err(Error::Singularity { singular_time, .. }) if singular_time == 1.0
        ));
        let t = |tau| hairtrigger_horizon(tau, 0.1, 0.4, 0.3, 1, 2.0);
        assert!(t(1e6) > 0.0 && t(1e6) / 1e6 < 0.1);
        // τ^{pN/β} = γ^p ((1−ε)^p εpT + 1) inverts T.
        let tau = (0.3f64.powf(0.4) * (0.9f64.powf(0.4) * 0.04 * 7.0 + 1.0)).powf(5.0);
        assert!((t(tau) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn ball_shift_samples() {
        for k in [KernelSpec::gaussian(1.0, 1).unwrap(), KernelSpec::gaussian(1.0, 2).unwrap()] {
            let r = ball_shift_monte_carlo(&k, 1.5, 100, 7).unwrap();
            assert!(r.holds, "{r:?}");
        }
    }
}
