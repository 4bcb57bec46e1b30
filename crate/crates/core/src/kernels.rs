//! Radial dispersal kernels, their Fourier transforms and small-frequency
//! expansion `Ĵ(ξ) = 1 − A|ξ|^β + o(|ξ|^β)`.
//!
//! Fourier convention: `Ĵ(ξ) = ∫ e^{−iξ·x} J(x) dx`, so `Ĵ(0) = 1` for a
//! probability kernel.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_panels, integrate_to_infinity, Tolerance};
use crate::special;

/// Default window for the expansion fit, in units where the kernel has
/// unit scale.
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (1e-4, 1e-2);

/// Fits with a larger max relative residual are flagged low-confidence.
pub const FIT_RESIDUAL_THRESHOLD: f64 = 0.05;

const FIT_SAMPLES: usize = 41;

fn quad_tol() -> Tolerance {
    Tolerance::new(1e-15, 1e-12)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Gaussian { sigma: f64 },
    Laplace { lambda: f64 },
    /// Uniform density on the ball of the given radius.
    CompactBump { radius: f64 },
    /// `c·(r₀² + |x|²)^{−α/2}`; tail exponent `α > N`.
    AlgebraicTail { alpha: f64, core_radius: f64 },
    /// `(1/π)/(1 + x²)`, one dimension only.
    Cauchy,
    /// Piecewise-linear radial profile, zero beyond the last radius.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: Family,
    dim: usize,
    normalization: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SecondMoment {
    Finite(f64),
    Infinite,
}

impl SecondMoment {
    pub fn is_finite(&self) -> bool {
        matches!(self, SecondMoment::Finite(_))
    }
}

impl KernelSpec {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidKernel(format!("dimension {dim} not in {{1, 2}}")));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidKernel(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let n = dim as f64;
        let normalization = match &family {
            Family::Gaussian { sigma } => {
                positive("sigma", *sigma)?;
                (2.0 * PI * sigma * sigma).powf(-0.5 * n)
            }
            Family::Laplace { lambda } => {
                positive("lambda", *lambda)?;
                match dim {
                    1 => 0.5 * lambda,
                    _ => lambda * lambda / (2.0 * PI),
                }
            }
            Family::CompactBump { radius } => {
                positive("radius", *radius)?;
                1.0 / (special::ball_volume(dim) * radius.powi(dim as i32))
            }
            Family::AlgebraicTail { alpha, core_radius } => {
                positive("core_radius", *core_radius)?;
                if !(alpha.is_finite() && *alpha > n) {
                    return Err(Error::InvalidKernel(format!(
                        "algebraic tail exponent alpha = {alpha} must exceed the dimension {dim}"
                    )));
                }
                let log_c = special::ln_gamma(0.5 * alpha) - 0.5 * n * PI.ln()
                    - special::ln_gamma(0.5 * (alpha - n))
                    + (alpha - n) * core_radius.ln();
                log_c.exp()
            }
            Family::Cauchy => {
                if dim != 1 {
                    return Err(Error::InvalidKernel("the Cauchy kernel is one-dimensional".into()));
                }
                1.0 / PI
            }
            Family::Tabulated { radii, values } => {
                validate_table(radii, values)?;
                let raw = KernelSpec {
                    family: family.clone(),
                    dim,
                    normalization: 1.0,
                };
                let mass = raw.radial_integral(0, None)?;
                if !(mass > 0.0 && mass.is_finite()) {
                    return Err(Error::InvalidKernel("tabulated kernel has zero mass".into()));
                }
                1.0 / mass
            }
        };
        Ok(Self {
            family,
            dim,
            normalization,
        })
    }

    pub fn gaussian(sigma: f64, dim: usize) -> Result<Self> {
        Self::new(Family::Gaussian { sigma }, dim)
    }

    pub fn laplace(lambda: f64, dim: usize) -> Result<Self> {
        Self::new(Family::Laplace { lambda }, dim)
    }

    pub fn compact_bump(radius: f64, dim: usize) -> Result<Self> {
        Self::new(Family::CompactBump { radius }, dim)
    }

    pub fn algebraic_tail(alpha: f64, core_radius: f64, dim: usize) -> Result<Self> {
        Self::new(Family::AlgebraicTail { alpha, core_radius }, dim)
    }

    pub fn cauchy() -> Self {
        Self::new(Family::Cauchy, 1).expect("Cauchy kernel is valid in 1D")
    }

    pub fn tabulated(radii: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        Self::new(Family::Tabulated { radii, values }, dim)
    }

    /// Reads a two-column `radius value` text file (whitespace or comma
    /// separated, `#` comments) and renormalizes it to unit mass.
    pub fn load_tabulated(path: &Path, dim: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let (radii, values) = parse_table(&text)?;
        Self::tabulated(radii, values, dim)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Constant `c` such that `J(x) = c·profile(|x|)`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn label(&self) -> String {
        match &self.family {
            Family::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            Family::Laplace { lambda } => format!("laplace(lambda={lambda})"),
            Family::CompactBump { radius } => format!("compact_bump(radius={radius})"),
            Family::AlgebraicTail { alpha, core_radius } => {
                format!("algebraic_tail(alpha={alpha},core_radius={core_radius})")
            }
            Family::Cauchy => "cauchy".to_string(),
            Family::Tabulated { radii, .. } => format!("tabulated({} samples)", radii.len()),
        }
    }

    fn profile(&self, r: f64) -> f64 {
        match &self.family {
            Family::Gaussian { sigma } => (-0.5 * r * r / (sigma * sigma)).exp(),
            Family::Laplace { lambda } => (-lambda * r).exp(),
            Family::CompactBump { radius } => {
                if r <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Family::AlgebraicTail { alpha, core_radius } => {
                (core_radius * core_radius + r * r).powf(-0.5 * alpha)
            }
            Family::Cauchy => 1.0 / (1.0 + r * r),
            Family::Tabulated { radii, values } => interpolate(radii, values, r),
        }
    }

    /// Density at radius `r = |x|`.
    pub fn eval_radial(&self, r: f64) -> f64 {
        self.normalization * self.profile(r.abs())
    }

    /// Density at the point `x ∈ R^N`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.eval_radial(r)
    }

    /// Radius beyond which the kernel vanishes, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.family {
            Family::CompactBump { radius } => Some(*radius),
            Family::Tabulated { radii, .. } => radii.last().copied(),
            _ => None,
        }
    }

    /// Fourier transform `Ĵ(|ξ|)`.
    pub fn hat(&self, xi: f64) -> Result<f64> {
        let k = xi.abs();
        let n = self.dim as f64;
        Ok(match &self.family {
            Family::Gaussian { sigma } => (-0.5 * sigma * sigma * k * k).exp(),
            Family::Laplace { lambda } => {
                let q = (k / lambda).powi(2);
                (1.0 + q).powf(-0.5 * (n + 1.0))
            }
            Family::CompactBump { radius } => match self.dim {
                1 => 1.0 - special::one_minus_sinc(k * radius),
                _ => special::disk_hat(k * radius),
            },
            Family::AlgebraicTail { alpha, core_radius } => {
                special::student_hat(0.5 * (alpha - n), k * core_radius)
            }
            Family::Cauchy => (-k).exp(),
            Family::Tabulated { .. } => 1.0 - self.tabulated_one_minus_hat(k)?,
        })
    }

    /// `1 − Ĵ(|ξ|)`, computed without cancellation near the origin.
    pub fn one_minus_hat(&self, xi: f64) -> Result<f64> {
        let k = xi.abs();
        let n = self.dim as f64;
        Ok(match &self.family {
            Family::Gaussian { sigma } => -(-0.5 * sigma * sigma * k * k).exp_m1(),
            Family::Laplace { lambda } => {
                let q = (k / lambda).powi(2);
                -(-0.5 * (n + 1.0) * q.ln_1p()).exp_m1()
            }
            Family::CompactBump { radius } => match self.dim {
                1 => special::one_minus_sinc(k * radius),
                _ => special::one_minus_disk_hat(k * radius),
            },
            Family::AlgebraicTail { alpha, core_radius } => {
                special::student_one_minus_hat(0.5 * (alpha - n), k * core_radius)
            }
            Family::Cauchy => -(-k).exp_m1(),
            Family::Tabulated { .. } => self.tabulated_one_minus_hat(k)?,
        })
    }

    fn tabulated_one_minus_hat(&self, k: f64) -> Result<f64> {
        let Family::Tabulated { radii, .. } = &self.family else {
            unreachable!()
        };
        if radii.len() < 4 {
            return Err(Error::Quadrature(format!(
                "tabulated kernel has {} samples; at least 4 are needed for a radial transform",
                radii.len()
            )));
        }
        if k == 0.0 {
            return Ok(0.0);
        }
        let c = self.normalization;
        let width = (PI / k).min(radii[radii.len() - 1] - radii[0]).max(1e-12);
        let mut total = 0.0;
        let mut lo = 0.0;
        for &hi in radii.iter() {
            if hi <= lo {
                continue;
            }
            let e = match self.dim {
                1 => integrate_panels(
                    |r| {
                        let s = (0.5 * k * r).sin();
                        2.0 * c * self.profile(r) * 2.0 * s * s
                    },
                    lo,
                    hi,
                    width,
                    quad_tol(),
                )?,
                _ => integrate_panels(
                    |r| 2.0 * PI * c * self.profile(r) * special::one_minus_bessel_j0(k * r) * r,
                    lo,
                    hi,
                    width,
                    quad_tol(),
                )?,
            };
            total += e.value;
            lo = hi;
        }
        Ok(total)
    }

    /// `|S_{N−1}| ∫_0^R r^{N−1+extra} profile(r) dr`, to infinity when
    /// `upper` is `None`. Algebraic tails beyond `50 r₀` are summed
    /// analytically.
    fn radial_integral(&self, extra: i32, upper: Option<f64>) -> Result<f64> {
        let power = self.dim as i32 - 1 + extra;
        let f = |r: f64| r.powi(power) * self.profile(r);
        let area = special::sphere_area(self.dim);
        let scale = self.length_scale();
        let top = match (upper, self.support_radius()) {
            (Some(u), Some(s)) => Some(u.min(s)),
            (Some(u), None) => Some(u),
            (None, s) => s,
        };
        let mut knots = vec![0.0];
        if let Family::Tabulated { radii, .. } = &self.family {
            knots.extend(radii.iter().copied().filter(|&r| r > 0.0));
        } else {
            knots.extend([1.0, 4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0].map(|m| m * scale));
        }
        let integral = match top {
            Some(top) => {
                let mut pts: Vec<f64> = knots.into_iter().filter(|&k| k < top).collect();
                pts.push(top);
                let mut sum = 0.0;
                for w in pts.windows(2) {
                    sum += integrate(f, w[0], w[1], quad_tol())?.value;
                }
                sum
            }
            None => match &self.family {
                Family::AlgebraicTail { alpha, core_radius } => {
                    let cut = 50.0 * core_radius;
                    let tail = algebraic_tail_integral(*alpha, *core_radius, power, cut)?;
                    if tail.is_infinite() {
                        return Ok(f64::INFINITY);
                    }
                    let mut sum = 0.0;
                    let mut lo = 0.0;
                    for hi in [*core_radius, 4.0 * core_radius, 16.0 * core_radius, cut] {
                        sum += integrate(f, lo, hi, quad_tol())?.value;
                        lo = hi;
                    }
                    sum + tail
                }
                Family::Cauchy => {
                    if power >= 1 {
                        return Ok(f64::INFINITY);
                    }
                    integrate(f, 0.0, 1.0, quad_tol())?.value
                        + integrate_to_infinity(f, 1.0, quad_tol())?.value
                }
                _ => {
                    let mut sum = 0.0;
                    let mut lo = 0.0;
                    for hi in [scale, 4.0 * scale, 16.0 * scale, 80.0 * scale] {
                        sum += integrate(f, lo, hi, quad_tol())?.value;
                        lo = hi;
                    }
                    sum
                }
            },
        };
        Ok(area * integral)
    }

    fn length_scale(&self) -> f64 {
        match &self.family {
            Family::Gaussian { sigma } => *sigma,
            Family::Laplace { lambda } => 1.0 / lambda,
            Family::CompactBump { radius } => *radius,
            Family::AlgebraicTail { core_radius, .. } => *core_radius,
            Family::Cauchy => 1.0,
            Family::Tabulated { radii, .. } => *radii.last().unwrap(),
        }
    }

    /// Total mass by radial quadrature; equals 1 for every valid kernel.
    pub fn mass(&self) -> Result<f64> {
        Ok(self.normalization * self.radial_integral(0, None)?)
    }

    /// `∫_{|z| ≤ R} J(z) dz` by radial quadrature.
    pub fn ball_mass(&self, radius: f64) -> Result<f64> {
        if radius <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.normalization * self.radial_integral(0, Some(radius))?)
    }

    /// `∫_{|z| > R} J(z) dz`, computed directly (no `1 − ball_mass`
    /// cancellation).
    pub fn mass_beyond(&self, radius: f64) -> Result<f64> {
        let area = special::sphere_area(self.dim);
        let c = self.normalization;
        let power = self.dim as i32 - 1;
        if let Some(s) = self.support_radius() {
            if radius >= s {
                return Ok(0.0);
            }
            return Ok((1.0 - self.ball_mass(radius)?).max(0.0));
        }
        let f = |r: f64| r.powi(power) * self.profile(r);
        let tail = match &self.family {
            Family::AlgebraicTail { alpha, core_radius } if radius >= 4.0 * core_radius => {
                algebraic_tail_integral(*alpha, *core_radius, power, radius)?
            }
            Family::Cauchy => 0.5 * PI - radius.atan(),
            _ => integrate_to_infinity(f, radius, quad_tol())?.value,
        };
        Ok(area * c * tail)
    }

    /// `∫_{|z − y| ≤ R} J(z) dz` for a shift of length `shift = |y|`.
    pub fn shifted_ball_mass(&self, shift: f64, radius: f64) -> Result<f64> {
        let y = shift.abs();
        let c = self.normalization;
        match self.dim {
            1 => {
                let (lo, hi) = (y - radius, y + radius);
                let mut knots = vec![lo, hi];
                if lo < 0.0 && hi > 0.0 {
                    knots.push(0.0);
                }
                if let Some(s) = self.support_radius() {
                    for k in [-s, s] {
                        if k > lo && k < hi {
                            knots.push(k);
                        }
                    }
                }
                knots.sort_by(f64::total_cmp);
                let mut sum = 0.0;
                for w in knots.windows(2) {
                    sum += integrate(|x: f64| self.profile(x.abs()), w[0], w[1], quad_tol())?.value;
                }
                Ok(c * sum)
            }
            _ => {
                if y == 0.0 {
                    return self.ball_mass(radius);
                }
                let arc = |r: f64| {
                    if r == 0.0 {
                        return if y < radius { 2.0 * PI } else { 0.0 };
                    }
                    let cosine = (r * r + y * y - radius * radius) / (2.0 * r * y);
                    2.0 * cosine.clamp(-1.0, 1.0).acos()
                };
                let f = |r: f64| self.profile(r) * r * arc(r);
                let inner = (radius - y).abs();
                let outer = radius + y;
                let mut knots = vec![0.0, inner, outer];
                if let Some(s) = self.support_radius() {
                    if s < outer {
                        knots.push(s);
                    }
                }
                knots.sort_by(f64::total_cmp);
                knots.dedup();
                let mut sum = 0.0;
                for w in knots.windows(2) {
                    if w[1] > w[0] {
                        sum += integrate(f, w[0], w[1], quad_tol())?.value;
                    }
                }
                Ok(c * sum)
            }
        }
    }

    /// `m₂ = ∫ |x|² J(x) dx` by radial quadrature.
    pub fn second_moment(&self) -> Result<SecondMoment> {
        let n = self.dim as f64;
        match &self.family {
            Family::Cauchy => return Ok(SecondMoment::Infinite),
            Family::AlgebraicTail { alpha, .. } if *alpha <= n + 2.0 => {
                return Ok(SecondMoment::Infinite)
            }
            _ => {}
        }
        let m2 = self.normalization * self.radial_integral(2, None)?;
        Ok(SecondMoment::Finite(m2))
    }

    /// `J_λ(x) = λ^N J(λx)`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        let family = match &self.family {
            Family::Gaussian { sigma } => Family::Gaussian { sigma: sigma / lambda },
            Family::Laplace { lambda: l } => Family::Laplace { lambda: l * lambda },
            Family::CompactBump { radius } => Family::CompactBump { radius: radius / lambda },
            Family::AlgebraicTail { alpha, core_radius } => Family::AlgebraicTail {
                alpha: *alpha,
                core_radius: core_radius / lambda,
            },
            Family::Cauchy => Family::AlgebraicTail {
                alpha: 2.0,
                core_radius: 1.0 / lambda,
            },
            Family::Tabulated { radii, values } => Family::Tabulated {
                radii: radii.iter().map(|r| r / lambda).collect(),
                values: values.clone(),
            },
        };
        Self::new(family, self.dim)
    }
}

fn validate_table(radii: &[f64], values: &[f64]) -> Result<()> {
    if radii.len() != values.len() {
        return Err(Error::InvalidKernel("radius and value columns differ in length".into()));
    }
    if radii.len() < 2 {
        return Err(Error::InvalidKernel("tabulated kernel needs at least two samples".into()));
    }
    if radii[0] < 0.0 || !radii.iter().all(|r| r.is_finite()) {
        return Err(Error::InvalidKernel("radii must be finite and nonnegative".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidKernel("radii must be strictly increasing".into()));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidKernel("values must be finite and nonnegative".into()));
    }
    Ok(())
}

fn interpolate(radii: &[f64], values: &[f64], r: f64) -> f64 {
    let last = radii.len() - 1;
    if r > radii[last] {
        return 0.0;
    }
    if r <= radii[0] {
        return values[0];
    }
    let i = radii.partition_point(|&x| x < r);
    let (r0, r1) = (radii[i - 1], radii[i]);
    let w = (r - r0) / (r1 - r0);
    values[i - 1] * (1.0 - w) + values[i] * w
}

pub fn parse_table(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected two columns (radius, value), found {}",
                lineno + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        radii.push(parse(cols[0])?);
        values.push(parse(cols[1])?);
    }
    Ok((radii, values))
}

/// `∫_R^∞ r^power (r₀² + r²)^{−α/2} dr` for `R > r₀`, by the binomial
/// expansion in `(r₀/R)²`.
fn algebraic_tail_integral(alpha: f64, core: f64, power: i32, from: f64) -> Result<f64> {
    let exponent = power as f64 + 1.0 - alpha;
    if exponent >= 0.0 {
        return Ok(f64::INFINITY);
    }
    if from <= core {
        return Err(Error::Domain("analytic tail needs R > r₀".into()));
    }
    let ratio = (core / from).powi(2);
    let mut coeff = 1.0; // binom(−α/2, j) r₀^{2j} R^{−2j}
    let mut sum = 0.0;
    for j in 0..400 {
        let jf = j as f64;
        let term = coeff / (alpha + 2.0 * jf - power as f64 - 1.0);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        coeff *= -(0.5 * alpha + jf) / (jf + 1.0) * ratio;
    }
    Ok(sum * from.powf(exponent))
}

/// Small-frequency expansion `Ĵ(ξ) ≈ 1 − A|ξ|^β` with fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierExpansion {
    pub beta: f64,
    pub a: f64,
    pub window: (f64, f64),
    /// Max relative deviation of `A ξ^β` from `1 − Ĵ(ξ)` on the window.
    pub residual: f64,
    pub second_moment: SecondMoment,
    /// Raw fitted slope (before any clamp to 2).
    pub fitted_beta: f64,
    pub clamped: bool,
    pub low_confidence: bool,
}

impl FourierExpansion {
    /// Expansion with known exact parameters.
    pub fn exact(a: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 2.0) || !(a > 0.0 && a.is_finite()) {
            return Err(Error::Precondition(format!("need 0 < beta <= 2 and A > 0, got beta={beta}, A={a}")));
        }
        Ok(Self {
            beta,
            a,
            window: (0.0, 0.0),
            residual: 0.0,
            second_moment: if beta == 2.0 {
                SecondMoment::Finite(2.0 * a)
            } else {
                SecondMoment::Infinite
            },
            fitted_beta: beta,
            clamped: false,
            low_confidence: false,
        })
    }
}

/// Least-squares fit of `log(1 − Ĵ(ξ)) = log A + β log ξ` over log-spaced
/// frequencies in `window`.
pub fn estimate_expansion(kernel: &KernelSpec, window: (f64, f64)) -> Result<FourierExpansion> {
    let (lo, hi) = window;
    let bad = |reason: &str| Error::InvalidWindow {
        xi_min: lo,
        xi_max: hi,
        reason: reason.to_string(),
    };
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(bad("need 0 < xi_min < xi_max"));
    }
    let mut xs = Vec::with_capacity(FIT_SAMPLES);
    let mut ys = Vec::with_capacity(FIT_SAMPLES);
    let mut gaps = Vec::with_capacity(FIT_SAMPLES);
    for i in 0..FIT_SAMPLES {
        let s = i as f64 / (FIT_SAMPLES - 1) as f64;
        let xi = (lo.ln() * (1.0 - s) + hi.ln() * s).exp();
        let gap = kernel.one_minus_hat(xi)?;
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(bad(&format!("1 - Ĵ({xi:e}) = {gap:e} is not positive")));
        }
        xs.push(xi.ln());
        ys.push(gap.ln());
        gaps.push((xi, gap));
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    let a = intercept.exp();
    let residual = gaps
        .iter()
        .map(|&(xi, gap)| (a * xi.powf(slope) / gap - 1.0).abs())
        .fold(0.0, f64::max);
    let clamped = slope > 2.0;
    Ok(FourierExpansion {
        beta: slope.min(2.0),
        a,
        window,
        residual,
        second_moment: kernel.second_moment()?,
        fitted_beta: slope,
        clamped,
        low_confidence: residual > FIT_RESIDUAL_THRESHOLD,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Critical exponent `p_F = β/N`.
pub fn fujita_exponent(expansion: &FourierExpansion, dim: usize) -> f64 {
    expansion.beta / dim as f64
}

/// Text-config representation: family name, parameter map, dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: String,
    pub dim: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Two-column file for `tabulated` kernels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl KernelConfig {
    pub fn build(&self) -> Result<KernelSpec> {
        self.build_relative_to(None)
    }

    /// Resolves a relative `path` against `base` when given.
    pub fn build_relative_to(&self, base: Option<&Path>) -> Result<KernelSpec> {
        let get = |key: &str| {
            self.params.get(key).copied().ok_or_else(|| {
                Error::InvalidConfig(format!("kernel family '{}' needs parameter '{key}'", self.family))
            })
        };
        let family = match self.family.as_str() {
            "gaussian" => Family::Gaussian { sigma: get("sigma")? },
            "laplace" => Family::Laplace { lambda: get("lambda")? },
            "compact_bump" => Family::CompactBump { radius: get("radius")? },
            "algebraic_tail" => Family::AlgebraicTail {
                alpha: get("alpha")?,
                core_radius: self.params.get("core_radius").copied().unwrap_or(1.0),
            },
            "cauchy" => Family::Cauchy,
            "tabulated" => {
                let path = self.path.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("tabulated kernel needs a 'path'".into())
                })?;
                let mut full = std::path::PathBuf::from(path);
                if let (Some(b), true) = (base, full.is_relative()) {
                    full = b.join(full);
                }
                return KernelSpec::load_tabulated(&full, self.dim);
            }
            other => return Err(Error::InvalidConfig(format!("unknown kernel family '{other}'"))),
        };
        KernelSpec::new(family, self.dim)
    }
}

impl From<&KernelSpec> for KernelConfig {
    fn from(k: &KernelSpec) -> Self {
        let mut params = BTreeMap::new();
        let family = match &k.family {
            Family::Gaussian { sigma } => {
                params.insert("sigma".into(), *sigma);
                "gaussian"
            }
            Family::Laplace { lambda } => {
                params.insert("lambda".into(), *lambda);
                "laplace"
            }
            Family::CompactBump { radius } => {
                params.insert("radius".into(), *radius);
                "compact_bump"
            }
            Family::AlgebraicTail { alpha, core_radius } => {
                params.insert("alpha".into(), *alpha);
                params.insert("core_radius".into(), *core_radius);
                "algebraic_tail"
            }
            Family::Cauchy => "cauchy",
            Family::Tabulated { .. } => "tabulated",
        };
        KernelConfig {
            family: family.to_string(),
            dim: k.dim,
            params,
            path: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cauchy_at_origin() {
        assert!(close(KernelSpec::cauchy().eval(&[0.0]), 1.0 / PI, 1e-15));
    }

    #[test]
    fn gaussian_at_origin_matches_quadrature_normalization() {
        // Oracle: normalize e^{-x²/2} by direct quadrature.
        let z = integrate(|x: f64| (-0.5 * x * x).exp(), -40.0, 40.0, Tolerance::default())
            .unwrap()
            .value;
        let g = KernelSpec::gaussian(1.0, 1).unwrap();
        assert!(close(g.eval(&[0.0]), 1.0 / z, 1e-14));
        assert!(close(g.eval(&[0.0]), 0.398_942_280_401_432_7, 1e-15));
    }

    #[test]
    fn eval_is_radial() {
        let kernels = [
            KernelSpec::gaussian(0.7, 2).unwrap(),
            KernelSpec::laplace(2.0, 2).unwrap(),
            KernelSpec::algebraic_tail(3.3, 0.5, 2).unwrap(),
        ];
        for k in &kernels {
            assert_eq!(k.eval(&[0.3, -1.2]), k.eval(&[-0.3, 1.2]));
            assert!(close(k.eval(&[0.3, -1.2]), k.eval(&[1.2, 0.3]), 1e-16));
        }
    }

    #[test]
    fn closed_form_hats() {
        assert!(close(KernelSpec::cauchy().hat(1.0).unwrap(), (-1f64).exp(), 1e-15));
        let g = KernelSpec::gaussian(1.0, 1).unwrap();
        assert!(close(g.hat(2.0).unwrap(), (-2f64).exp(), 1e-15));
        for k in [g, KernelSpec::laplace(1.5, 2).unwrap(), KernelSpec::compact_bump(2.0, 2).unwrap()] {
            assert_eq!(k.hat(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn hat_matches_radial_quadrature() {
        // 1D: Ĵ(ξ) = 2∫_0^∞ J(r) cos(ξr) dr; 2D: 2π∫ J(r) J0(ξr) r dr.
        let cases = [
            (KernelSpec::laplace(1.3, 1).unwrap(), 60.0),
            (KernelSpec::compact_bump(1.5, 1).unwrap(), 1.5),
            (KernelSpec::algebraic_tail(3.5, 1.0, 1).unwrap(), 4000.0),
        ];
        for (k, top) in &cases {
            for &xi in &[0.3, 1.0, 2.7] {
                let q = integrate_panels(
                    |r| 2.0 * k.eval_radial(r) * (xi * r).cos(),
                    0.0,
                    *top,
                    PI / xi,
                    Tolerance::default(),
                )
                .unwrap()
                .value;
                assert!(close(k.hat(xi).unwrap(), q, 2e-6), "{} xi {xi}", k.label());
            }
        }
        let cases2 = [
            (KernelSpec::laplace(1.0, 2).unwrap(), 60.0),
            (KernelSpec::compact_bump(1.0, 2).unwrap(), 1.0),
            (KernelSpec::algebraic_tail(5.0, 1.0, 2).unwrap(), 3000.0),
        ];
        for (k, top) in &cases2 {
            for &xi in &[0.5, 2.0] {
                let q = integrate_panels(
                    |r| 2.0 * PI * k.eval_radial(r) * special::bessel_j(0, xi * r) * r,
                    0.0,
                    *top,
                    PI / xi,
                    Tolerance::default(),
                )
                .unwrap()
                .value;
                assert!(close(k.hat(xi).unwrap(), q, 1e-6), "{} xi {xi}", k.label());
            }
        }
    }

    #[test]
    fn unit_mass() {
        let kernels = [
            KernelSpec::gaussian(1.0, 1).unwrap(),
            KernelSpec::gaussian(0.4, 2).unwrap(),
            KernelSpec::laplace(0.5, 1).unwrap(),
            KernelSpec::laplace(2.0, 2).unwrap(),
            KernelSpec::compact_bump(3.0, 1).unwrap(),
            KernelSpec::compact_bump(3.0, 2).unwrap(),
            KernelSpec::algebraic_tail(2.5, 1.0, 1).unwrap(),
            KernelSpec::algebraic_tail(2.5, 0.7, 2).unwrap(),
            KernelSpec::cauchy(),
        ];
        for k in &kernels {
            assert!(close(k.mass().unwrap(), 1.0, 1e-10), "{}", k.label());
        }
    }

    #[test]
    fn algebraic_tail_requires_alpha_above_dimension() {
        assert!(matches!(KernelSpec::algebraic_tail(1.0, 1.0, 1), Err(Error::InvalidKernel(_))));
        assert!(matches!(KernelSpec::algebraic_tail(1.9, 1.0, 2), Err(Error::InvalidKernel(_))));
        assert!(KernelSpec::new(Family::Cauchy, 2).is_err());
    }

    #[test]
    fn algebraic_with_alpha_two_is_cauchy() {
        let a = KernelSpec::algebraic_tail(2.0, 1.0, 1).unwrap();
        let c = KernelSpec::cauchy();
        for &x in &[0.0, 0.5, 3.0] {
            assert!(close(a.eval(&[x]), c.eval(&[x]), 1e-15));
        }
        for &xi in &[1e-3, 0.7, 5.0] {
            assert!(close(a.hat(xi).unwrap(), c.hat(xi).unwrap(), 1e-13));
        }
    }

    #[test]
    fn tabulated_is_renormalized_and_matches_compact() {
        let radii: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let values = vec![3.0; radii.len()];
        let t = KernelSpec::tabulated(radii, values, 1).unwrap();
        assert!(close(t.mass().unwrap(), 1.0, 1e-6));
        let b = KernelSpec::compact_bump(2.0, 1).unwrap();
        assert!(close(t.eval(&[0.5]), 0.25, 1e-12));
        for &xi in &[0.1, 1.0, 4.0] {
            assert!(close(t.hat(xi).unwrap(), b.hat(xi).unwrap(), 1e-9));
        }
    }

    #[test]
    fn tabulated_rejects_bad_tables() {
        assert!(KernelSpec::tabulated(vec![0.0, 1.0, 0.5], vec![1.0; 3], 1).is_err());
        assert!(KernelSpec::tabulated(vec![0.0, 1.0], vec![1.0, -1.0], 1).is_err());
        assert!(KernelSpec::tabulated(vec![0.0, 1.0], vec![0.0, 0.0], 1).is_err());
        let sparse = KernelSpec::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.0], 1).unwrap();
        assert!(matches!(sparse.hat(1.0), Err(Error::Quadrature(_))));
    }

    #[test]
    fn parse_two_column_table() {
        let (r, v) = parse_table("# radius value\n0 1\n0.5, 0.8\n\n1.0\t0.2 # tail\n").unwrap();
        assert_eq!(r, vec![0.0, 0.5, 1.0]);
        assert_eq!(v, vec![1.0, 0.8, 0.2]);
        assert!(parse_table("0 1 2\n").is_err());
        assert!(parse_table("0 x\n").is_err());
    }

    #[test]
    fn expansion_cauchy() {
        let e = estimate_expansion(&KernelSpec::cauchy(), DEFAULT_FIT_WINDOW).unwrap();
        assert!(close(e.beta, 1.0, 0.02), "beta {}", e.beta);
        assert!(close(e.a, 1.0, 0.02), "A {}", e.a);
        assert!(!e.low_confidence);
    }

    #[test]
    fn expansion_gaussian() {
        let e = estimate_expansion(&KernelSpec::gaussian(1.0, 1).unwrap(), DEFAULT_FIT_WINDOW).unwrap();
        assert!(close(e.beta, 2.0, 0.04));
        assert!(close(e.a, 0.5, 0.01));
    }

    #[test]
    fn expansion_algebraic() {
        let k = KernelSpec::algebraic_tail(2.5, 1.0, 1).unwrap();
        let e = estimate_expansion(&k, DEFAULT_FIT_WINDOW).unwrap();
        assert!(close(e.beta, 1.5, 0.075), "beta {}", e.beta);
        assert_eq!(e.second_moment, SecondMoment::Infinite);
    }

    #[test]
    fn expansion_rejects_bad_windows() {
        let g = KernelSpec::gaussian(1.0, 1).unwrap();
        assert!(matches!(estimate_expansion(&g, (0.0, 0.1)), Err(Error::InvalidWindow { .. })));
        assert!(matches!(estimate_expansion(&g, (0.1, 0.01)), Err(Error::InvalidWindow { .. })));
        assert!(matches!(estimate_expansion(&g, (f64::NAN, 0.1)), Err(Error::InvalidWindow { .. })));
    }

    #[test]
    fn second_moments() {
        let SecondMoment::Finite(m) = KernelSpec::gaussian(1.0, 1).unwrap().second_moment().unwrap() else {
            panic!()
        };
        assert!(close(m, 1.0, 1e-10));
        assert_eq!(KernelSpec::cauchy().second_moment().unwrap(), SecondMoment::Infinite);
        assert!(KernelSpec::compact_bump(1.0, 2).unwrap().second_moment().unwrap().is_finite());
        // Student law: m₂ = N r₀²/(α − N − 2).
        let SecondMoment::Finite(m) = KernelSpec::algebraic_tail(7.0, 1.0, 2).unwrap().second_moment().unwrap() else {
            panic!()
        };
        assert!(close(m, 2.0 / 3.0, 1e-9), "m2 {m}");
        assert_eq!(
            KernelSpec::algebraic_tail(4.0, 1.0, 2).unwrap().second_moment().unwrap(),
            SecondMoment::Infinite
        );
    }

    #[test]
    fn fujita_exponents() {
        let e2 = FourierExpansion::exact(0.5, 2.0).unwrap();
        assert_eq!(fujita_exponent(&e2, 1), 2.0);
        assert_eq!(fujita_exponent(&FourierExpansion::exact(1.0, 1.0).unwrap(), 1), 1.0);
        assert_eq!(fujita_exponent(&FourierExpansion::exact(1.0, 1.5).unwrap(), 1), 1.5);
        assert_eq!(fujita_exponent(&e2, 2), 1.0);
    }

    #[test]
    fn ball_and_tail_masses() {
        let g = KernelSpec::gaussian(1.0, 1).unwrap();
        // erf(√2) to 16 digits.
        assert!(close(g.ball_mass(2.0).unwrap(), 0.954_499_736_103_641_6, 1e-13));
        let g2 = KernelSpec::gaussian(1.0, 2).unwrap();
        assert!(close(g2.ball_mass(1.5).unwrap(), 1.0 - (-1.125f64).exp(), 1e-13));
        let c = KernelSpec::cauchy();
        assert!(close(c.ball_mass(3.0).unwrap(), 2.0 / PI * 3f64.atan(), 1e-12));
        assert!(close(c.mass_beyond(1e4).unwrap(), 1.0 - 2.0 / PI * 1e4f64.atan(), 1e-15));
        let a = KernelSpec::algebraic_tail(2.5, 1.0, 1).unwrap();
        assert!(close(a.ball_mass(100.0).unwrap() + a.mass_beyond(100.0).unwrap(), 1.0, 1e-10));
        let l2 = KernelSpec::laplace(1.0, 2).unwrap();
        assert!(close(l2.ball_mass(2.0).unwrap(), 1.0 - 3.0 * (-2f64).exp(), 1e-12));
    }

    #[test]
    fn shifted_ball_mass_reduces_to_ball_at_zero_shift() {
        for k in [KernelSpec::gaussian(1.0, 1).unwrap(), KernelSpec::gaussian(1.0, 2).unwrap()] {
            let a = k.shifted_ball_mass(0.0, 1.7).unwrap();
            let b = k.ball_mass(1.7).unwrap();
            assert!(close(a, b, 1e-12));
            let near = k.shifted_ball_mass(1e-9, 1.7).unwrap();
            assert!(close(near, b, 1e-8));
        }
    }

    #[test]
    fn config_round_trip() {
        let k = KernelSpec::algebraic_tail(2.5, 0.5, 1).unwrap();
        let cfg = KernelConfig::from(&k);
        assert_eq!(cfg.build().unwrap(), k);
        let bad = KernelConfig {
            family: "gaussian".into(),
            dim: 1,
            params: BTreeMap::new(),
            path: None,
        };
        assert!(matches!(bad.build(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rescaling_keeps_exponent() {
        let k = KernelSpec::algebraic_tail(2.5, 1.0, 1).unwrap();
        let e = estimate_expansion(&k, (1e-5, 1e-3)).unwrap();
        let r = k.rescaled(2.0).unwrap();
        let er = estimate_expansion(&r, (1e-5, 1e-3)).unwrap();
        assert!(close(e.beta, er.beta, 0.02));
        assert!(close(r.mass().unwrap(), 1.0, 1e-10));
    }
}
