//! The linear flow `∂t v = J*v − v` on a grid.
//!
//! Two independent routes are provided: the exact spectral propagator
//! `e^{t(Ĵ_d − 1)}` and the truncated series
//! `K(t) = e^{−t}δ₀ + e^{−t} Σ_{k≥1} t^k/k! J^{*k}` evaluated by iterated
//! convolution in physical space. `Ĵ_d` is the symbol of the grid-sampled,
//! mass-renormalized kernel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Spectral, BOUNDARY_LAYER};
use crate::kernels::{least_squares, KernelSpec};
use crate::quadrature::{integrate, Tolerance};
use crate::special;

/// A kernel sampled on a grid together with its discrete symbol.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    kernel: KernelSpec,
    spectral: Spectral,
    samples: Field,
    symbol: Vec<f64>,
    raw_mass: f64,
    truncated_mass: f64,
}

/// A field produced by the truncated series with its certified bound.
#[derive(Debug, Clone)]
pub struct SeriesField {
    pub field: Field,
    pub terms: usize,
    /// Sup-norm bound on the omitted terms.
    pub truncation_bound: f64,
}

impl DiscreteKernel {
    /// Samples `J` on the grid and rescales so that `h^N Σ J = 1`.
    pub fn new(kernel: KernelSpec, grid: Grid) -> Result<Self> {
        Self::with_mass_scale(kernel, grid, 1.0)
    }

    /// Like [`DiscreteKernel::new`], but the renormalized samples are then
    /// multiplied by `scale`. Only useful to inject faults in checks.
    pub fn with_mass_scale(kernel: KernelSpec, grid: Grid, scale: f64) -> Result<Self> {
        if kernel.dim() != grid.dim() {
            return Err(Error::GridMismatch);
        }
        let raw = grid.sample(|x| kernel.eval(x))?;
        let raw_mass = raw.integral();
        if !(raw_mass > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "sampled kernel {} has no mass on this grid (h = {})",
                kernel.label(),
                grid.spacing()
            )));
        }
        let factor = scale / raw_mass;
        let values = raw.into_values().into_iter().map(|v| v * factor).collect();
        let samples = Field::from_vec(grid, values)?;
        let spectral = Spectral::new(grid);
        let symbol = spectral.kernel_symbol(&samples)?;
        let truncated_mass = kernel.mass_beyond(grid.half_width())?;
        Ok(Self {
            kernel,
            spectral,
            samples,
            symbol,
            raw_mass,
            truncated_mass,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn samples(&self) -> &Field {
        &self.samples
    }

    /// Discrete symbol `Ĵ_d(ξ_k)`, indexed like the DFT output.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// `h^N Σ J` before renormalization.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    /// Continuum mass of `J` outside `|x| ≤ L`.
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// `h^N Σ J` of the stored samples.
    pub fn mass(&self) -> f64 {
        self.samples.integral()
    }

    /// `J * u` by FFT.
    pub fn convolve(&self, u: &Field) -> Result<Field> {
        self.spectral.convolve(u, &self.samples)
    }

    /// `e^{t(Ĵ_d − 1)}` per mode.
    pub fn linear_multiplier(&self, t: f64) -> Vec<f64> {
        self.symbol.iter().map(|s| (t * (s - 1.0)).exp()).collect()
    }

    /// Exact-in-time linear propagation.
    pub fn evolve_linear(&self, u0: &Field, t: f64) -> Result<Field> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(u0.clone());
        }
        self.spectral.multiply(u0, &self.linear_multiplier(t))
    }

    /// `e^{−t}(u0 + Σ_{k=1..K} t^k/k! J^{*k} * u0)`.
    pub fn series_k(&self, u0: &Field, t: f64, terms: usize) -> Result<SeriesField> {
        check_time(t)?;
        let scale = u0.norms().linf;
        let mut term: Vec<f64> = u0.values().iter().map(|v| v * (-t).exp()).collect();
        let mut sum = term.clone();
        for k in 1..=terms {
            let next = self.convolve(&Field::from_vec(*self.grid(), term)?)?;
            let c = t / k as f64;
            term = next.into_values().into_iter().map(|v| v * c).collect();
            for (s, v) in sum.iter_mut().zip(&term) {
                *s += v;
            }
        }
        Ok(SeriesField {
            field: Field::from_vec(*self.grid(), sum)?,
            terms,
            truncation_bound: poisson_tail(t, terms) * scale,
        })
    }

    /// Series with `K` chosen so the truncation bound is `≤ tol`.
    pub fn series_auto(&self, u0: &Field, t: f64, tol: f64) -> Result<SeriesField> {
        let scale = u0.norms().linf;
        let rel = if scale > 0.0 { tol / scale } else { 1.0 };
        self.series_k(u0, t, terms_for_tolerance(t, rel))
    }

    /// `ψ(t,·)` from the spectral propagator: symbol `e^{t(Ĵ_d − 1)} − e^{−t}`.
    pub fn psi(&self, t: f64) -> Result<Field> {
        check_time(t)?;
        let grid = self.grid();
        let inv_dv = 1.0 / grid.cell_volume();
        let spec = self
            .symbol
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let v = (t * (s - 1.0)).exp() - (-t).exp();
                num_complex::Complex64::new(v * inv_dv * grid.checkerboard(k), 0.0)
            })
            .collect();
        Field::from_vec(*grid, self.spectral.inverse(spec)?)
    }

    /// `ψ_K(t,·) = e^{−t} Σ_{k=1..K} t^k/k! J^{*k}` by iterated convolution.
    /// The bound is on `h^N Σ |ψ − ψ_K|`.
    pub fn psi_series(&self, t: f64, terms: usize) -> Result<SeriesField> {
        check_time(t)?;
        let grid = *self.grid();
        let mut term: Vec<f64> = self.samples.values().iter().map(|v| v * t * (-t).exp()).collect();
        let mut sum = term.clone();
        for k in 2..=terms.max(1) {
            let next = self.convolve(&Field::from_vec(grid, term)?)?;
            let c = t / k as f64;
            term = next.into_values().into_iter().map(|v| v * c).collect();
            for (s, v) in sum.iter_mut().zip(&term) {
                *s += v;
            }
        }
        Ok(SeriesField {
            field: Field::from_vec(grid, sum)?,
            terms: terms.max(1),
            truncation_bound: poisson_tail(t, terms.max(1)) * self.mass().abs(),
        })
    }

    /// `h^N Σ ψ_K(t,·)` with its truncation bound.
    pub fn psi_mass(&self, t: f64, terms: usize) -> Result<(f64, f64)> {
        let s = self.psi_series(t, terms)?;
        Ok((s.field.integral(), s.truncation_bound))
    }

    /// `h^N Σ_{|x| ≥ r} ψ(t, x)`.
    pub fn psi_tail_mass(&self, t: f64, radius: f64) -> Result<f64> {
        let psi = self.psi(t)?;
        Ok(psi.integral() - psi.localized_mass(radius - 1e-12 * radius.abs()))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be finite and nonnegative, got {t}")))
    }
}

/// `e^{−t} Σ_{k>K} t^k/k!`, summed directly (no `1 − …` cancellation).
pub fn poisson_tail(t: f64, terms: usize) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let mut k = terms + 1;
    let mut log_term = -t + k as f64 * t.ln() - special::ln_gamma(k as f64 + 1.0);
    let mut sum = 0.0;
    loop {
        let term = log_term.exp();
        sum += term;
        // Terms decrease once k > t; stop when negligible.
        if (k as f64 > t && term <= 1e-17 * sum) || term == 0.0 && k as f64 > t {
            break;
        }
        k += 1;
        log_term += t.ln() - (k as f64).ln();
        if k > terms + 100_000 {
            break;
        }
    }
    sum.min(1.0)
}

/// Smallest `K ≥ 1` whose Poisson tail is at most `tol`.
pub fn terms_for_tolerance(t: f64, tol: f64) -> usize {
    let mut k = 1;
    while poisson_tail(t, k) > tol && k < 100_000 {
        k += 1;
    }
    k
}

/// Value of the limit profile with quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileValue {
    pub value: f64,
    /// Quadrature error estimate plus the certified cutoff tail.
    pub error: f64,
    pub accurate: bool,
}

/// Bound on the error of a profile value accepted as accurate.
pub const PROFILE_ACCURACY: f64 = 1e-8;

const PROFILE_TAIL: f64 = 1e-10;

/// `G_A(y) = (2π)^{−N} ∫ e^{iy·ξ} e^{−A|ξ|^β} dξ` for `|y| = y`.
pub fn profile_g_a(a: f64, beta: f64, dim: usize, y: f64) -> Result<ProfileValue> {
    if !(a > 0.0 && beta > 0.0 && beta <= 2.0) || !(1..=2).contains(&dim) {
        return Err(Error::Precondition(format!(
            "profile needs A > 0, 0 < beta <= 2, N in {{1, 2}}; got A={a}, beta={beta}, N={dim}"
        )));
    }
    let y = y.abs();
    let n = dim as f64;
    // ∫_Ξ^∞ ξ^{N−1} e^{−Aξ^β} dξ = Γ(N/β, AΞ^β) / (β A^{N/β})
    let tail = |cut: f64| {
        let s = n / beta;
        special::gamma(s) * special::gamma_ur(s, a * cut.powf(beta)) / (beta * a.powf(s))
    };
    let mut cut = a.powf(-1.0 / beta);
    while tail(cut) > PROFILE_TAIL {
        cut *= 1.5;
    }
    let tol = Tolerance::new(1e-14, 1e-12);
    let width = if y > 0.0 { (PI / y).min(cut) } else { cut };
    let pieces = ((cut / width).ceil() as usize).max(1);
    let step = cut / pieces as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    // Resolve the cusp of e^{−Aξ^β} at the origin with a dedicated panel.
    let first = step.min(0.1 * a.powf(-1.0 / beta));
    let mut knots = vec![0.0, first];
    for i in 1..=pieces {
        let x = i as f64 * step;
        if x > first {
            knots.push(x);
        }
    }
    for w in knots.windows(2) {
        let e = match dim {
            1 => integrate(|xi: f64| (y * xi).cos() * (-a * xi.powf(beta)).exp(), w[0], w[1], tol),
            _ => integrate(
                |xi: f64| special::bessel_j(0, y * xi) * xi * (-a * xi.powf(beta)).exp(),
                w[0],
                w[1],
                tol,
            ),
        };
        match e {
            Ok(e) => {
                value += e.value;
                error += e.error;
            }
            Err(_) => {
                return Ok(ProfileValue {
                    value: f64::NAN,
                    error: f64::INFINITY,
                    accurate: false,
                })
            }
        }
    }
    let norm = match dim {
        1 => 1.0 / PI,
        _ => 1.0 / (2.0 * PI),
    };
    let total_error = norm * (error + tail(cut));
    Ok(ProfileValue {
        value: norm * value,
        error: total_error,
        accurate: total_error <= PROFILE_ACCURACY,
    })
}

/// Power-law fit of the sup norm of the linear flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Largest boundary-layer mass fraction seen over the samples.
    pub boundary_fraction: f64,
    pub boundary_contaminated: bool,
}

/// Boundary mass fraction above which a run is considered contaminated.
pub const BOUNDARY_TOLERANCE: f64 = 1e-4;

/// Regression of `log‖v(t)‖∞` against `log t` at `samples` log-spaced times.
pub fn decay_fit(dk: &DiscreteKernel, u0: &Field, window: (f64, f64), samples: usize) -> Result<DecayFit> {
    let (t1, t2) = window;
    if !(t1 >= 1.0 && t2 > t1) || samples < 5 {
        return Err(Error::Precondition(format!(
            "decay fit needs 1 <= t1 < t2 and at least 5 samples, got [{t1}, {t2}], n={samples}"
        )));
    }
    let mut xs = Vec::with_capacity(samples);
    let mut ys = Vec::with_capacity(samples);
    let mut worst = 0.0f64;
    for i in 0..samples {
        let s = i as f64 / (samples - 1) as f64;
        let t = (t1.ln() * (1.0 - s) + t2.ln() * s).exp();
        let v = dk.evolve_linear(u0, t)?;
        worst = worst.max(v.boundary_mass(BOUNDARY_LAYER) / v.norms().l1.max(f64::MIN_POSITIVE));
        xs.push(t.ln());
        ys.push(v.norms().linf.ln());
    }
    Ok(fit_power_law(&xs, &ys, worst))
}

fn fit_power_law(xs: &[f64], ys: &[f64], boundary_fraction: f64) -> DecayFit {
    let (slope, intercept) = least_squares(xs, ys);
    DecayFit {
        slope,
        intercept,
        r2: r_squared(xs, ys, slope, intercept),
        boundary_fraction,
        boundary_contaminated: boundary_fraction > BOUNDARY_TOLERANCE,
    }
}

pub fn r_squared(xs: &[f64], ys: &[f64], slope: f64, intercept: f64) -> f64 {
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Empirical constants of the lower bound
/// `φ(τ, x) ≥ γ τ^{−N/β} 1_{|x| ≤ m τ^{1/β}}` for `φ₀ = 1_{B_R}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerProfileFit {
    pub gamma: f64,
    pub m: f64,
    pub taus: Vec<f64>,
    /// `τ^{N/β} min_{|x| ≤ mτ^{1/β}} φ(τ, x)` per sampled `τ`.
    pub rescaled_minima: Vec<f64>,
    pub boundary_fraction: f64,
}

/// Radius at which `G_A` falls to half its central value.
pub fn profile_half_max_radius(a: f64, beta: f64, dim: usize) -> Result<f64> {
    let g0 = profile_g_a(a, beta, dim, 0.0)?.value;
    let target = 0.5 * g0;
    let mut lo = 0.0;
    let mut hi = a.powf(1.0 / beta);
    while profile_g_a(a, beta, dim, hi)?.value > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if profile_g_a(a, beta, dim, mid)?.value > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fits `(γ, m)`: `m` is the half-max radius of `G_A`, `γ` the smallest
/// rescaled minimum over the ball `|x| ≤ m τ^{1/β}` for `τ ∈ taus`.
pub fn fit_lower_profile(
    dk: &DiscreteKernel,
    ball_radius: f64,
    a: f64,
    beta: f64,
    taus: &[f64],
) -> Result<LowerProfileFit> {
    if taus.is_empty() {
        return Err(Error::Precondition("need at least one tau".into()));
    }
    let grid = *dk.grid();
    let n = grid.dim() as f64;
    let phi0 = grid.sample_radial(|r| if r <= ball_radius { 1.0 } else { 0.0 })?;
    let m = profile_half_max_radius(a, beta, grid.dim())?;
    let mut minima = Vec::with_capacity(taus.len());
    let mut worst = 0.0f64;
    for &tau in taus {
        let phi = dk.evolve_linear(&phi0, tau)?;
        worst = worst.max(phi.boundary_fraction());
        let r = m * tau.powf(1.0 / beta);
        minima.push(tau.powf(n / beta) * phi.min_over_ball(r));
    }
    let gamma = minima.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LowerProfileFit {
        gamma,
        m,
        taus: taus.to_vec(),
        rescaled_minima: minima,
        boundary_fraction: worst,
    })
}

/// Empirical `C'` in `∫_{|z| ≥ (m/2) τ^{1/β}} ψ(T, z) dz ≤ C' T/τ`: the
/// largest ratio `τ · tail / T` over the sampled pairs.
pub fn estimate_psi_tail_constant(
    dk: &DiscreteKernel,
    m: f64,
    beta: f64,
    pairs: &[(f64, f64)],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(big_t, tau) in pairs {
        if big_t <= 0.0 || tau <= 0.0 {
            return Err(Error::Precondition("T and tau must be positive".into()));
        }
        let tail = dk.psi_tail_mass(big_t, 0.5 * m * tau.powf(1.0 / beta))?;
        worst = worst.max(tail * tau / big_t);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_setup(m: usize, l: f64) -> (DiscreteKernel, Field) {
        let grid = Grid::new(1, m, l).unwrap();
        let dk = DiscreteKernel::new(KernelSpec::gaussian(1.0, 1).unwrap(), grid).unwrap();
        let u0 = grid.sample_radial(|r| (-r * r).exp()).unwrap();
        (dk, u0)
    }

    #[test]
    fn renormalized_mass_is_one() {
        let (dk, _) = gaussian_setup(256, 20.0);
        assert!((dk.mass() - 1.0).abs() < 1e-14);
        assert!((dk.raw_mass() - 1.0).abs() < 1e-8);
        assert!(dk.truncated_mass() < 1e-80);
        let zero = dk.grid().frequency(0);
        assert_eq!(zero, 0.0);
        assert!((dk.symbol()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_at_time_zero_and_constants() {
        let (dk, u0) = gaussian_setup(128, 10.0);
        assert_eq!(dk.evolve_linear(&u0, 0.0).unwrap(), u0);
        let c = dk.grid().sample(|_| 3.5).unwrap();
        let v = dk.evolve_linear(&c, 7.0).unwrap();
        assert!(v.values().iter().all(|x| (x - 3.5).abs() < 1e-12));
        assert!(dk.evolve_linear(&u0, -1.0).is_err());
    }

    #[test]
    fn series_agrees_with_propagator() {
        let (dk, u0) = gaussian_setup(256, 20.0);
        let s = dk.series_auto(&u0, 1.0, 1e-12).unwrap();
        assert!(s.truncation_bound < 1e-12);
        let v = dk.evolve_linear(&u0, 1.0).unwrap();
        let err = s
            .field
            .values()
            .iter()
            .zip(v.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn first_order_series() {
        let (dk, u0) = gaussian_setup(64, 8.0);
        let t = 0.01;
        let s = dk.series_k(&u0, t, 1).unwrap();
        let ju = dk.convolve(&u0).unwrap();
        for ((a, b), c) in s.field.values().iter().zip(u0.values()).zip(ju.values()) {
            assert!((a - (-t).exp() * (b + t * c)).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_mass_identity() {
        let (dk, _) = gaussian_setup(256, 20.0);
        for &t in &[0.0, 0.5, 1.0, 5.0] {
            let k = terms_for_tolerance(t, 1e-12);
            let (mass, bound) = dk.psi_mass(t, k).unwrap();
            assert!((mass - (1.0 - (-t).exp())).abs() <= bound + 1e-12, "t {t}");
            let spectral = dk.psi(t).unwrap().integral();
            assert!((spectral - (1.0 - (-t).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_tail_matches_complement() {
        for &t in &[0.5f64, 1.0, 5.0, 20.0] {
            for &k in &[1usize, 5, 30] {
                let head: f64 = (0..=k)
                    .map(|j| (-t + j as f64 * t.ln() - special::ln_gamma(j as f64 + 1.0)).exp())
                    .sum();
                assert!((poisson_tail(t, k) - (1.0 - head).max(0.0)).abs() < 1e-13, "t {t} k {k}");
            }
        }
        assert!(poisson_tail(1.0, terms_for_tolerance(1.0, 1e-10)) < 1e-10);
    }

    #[test]
    fn gaussian_profile_closed_form() {
        for &a in &[0.5, 2.0] {
            for &y in &[0.0, 0.7, 3.0] {
                let exact1 = (4.0 * PI * a).powf(-0.5) * (-y * y / (4.0 * a)).exp();
                let g = profile_g_a(a, 2.0, 1, y).unwrap();
                assert!(g.accurate);
                assert!((g.value - exact1).abs() < 1e-9);
                let exact2 = (4.0 * PI * a).powf(-1.0) * (-y * y / (4.0 * a)).exp();
                assert!((profile_g_a(a, 2.0, 2, y).unwrap().value - exact2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn poisson_profile_closed_form() {
        for &y in &[0.0, 1.0, 4.5] {
            let exact = 1.0 / (PI * (1.0 + y * y));
            assert!((profile_g_a(1.0, 1.0, 1, y).unwrap().value - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_rejects_bad_parameters() {
        assert!(profile_g_a(0.0, 1.0, 1, 0.0).is_err());
        assert!(profile_g_a(1.0, 2.5, 1, 0.0).is_err());
    }

    #[test]
    fn half_max_radius_gaussian() {
        // G_A ∝ e^{−y²/(4A)} halves at y = sqrt(4A ln 2).
        let r = profile_half_max_radius(0.5, 2.0, 1).unwrap();
        assert!((r - (2.0 * 2f64.ln()).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn gaussian_decay_rate() {
        let (dk, u0) = gaussian_setup(1024, 200.0);
        let fit = decay_fit(&dk, &u0, (50.0, 500.0), 9).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "slope {}", fit.slope);
        assert!(!fit.boundary_contaminated);
    }
}
