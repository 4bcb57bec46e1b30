//! Special functions needed by the radial Fourier transforms.
//!
//! Bessel functions are evaluated from their integral representations with
//! the trapezoid rule, which converges geometrically for periodic (J_n) and
//! doubly-exponentially decaying (K_ν) analytic integrands.

use std::f64::consts::PI;

pub use statrs::function::erf::erf;
pub use statrs::function::gamma::{gamma, gamma_ur, ln_gamma};

fn periodic_points(x: f64) -> usize {
    let p = (1.5 * x.abs()).ceil() as usize + 48;
    p + (p % 2)
}

/// Bessel function of the first kind `J_n(x)` for small integer `n`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let p = periodic_points(x);
    let nf = n as f64;
    let sum: f64 = (0..p)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / p as f64;
            (nf * theta - x * theta.sin()).cos()
        })
        .sum();
    sum / p as f64
}

/// `1 − J_0(x)` without cancellation for small `x`.
pub fn one_minus_bessel_j0(x: f64) -> f64 {
    let p = periodic_points(x);
    let sum: f64 = (0..p)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / p as f64;
            let s = (0.5 * x * theta.sin()).sin();
            2.0 * s * s
        })
        .sum();
    sum / p as f64
}

/// Modified Bessel function of the second kind `K_ν(z)`, `z > 0`, from
/// `K_ν(z) = ∫_0^∞ e^{−z cosh t} cosh(νt) dt`.
pub fn bessel_k(nu: f64, z: f64) -> f64 {
    assert!(z > 0.0, "bessel_k requires z > 0");
    let step = 0.02;
    let term = |t: f64| {
        let log_cosh_nu = nu.abs() * t + (-2.0 * nu.abs() * t).exp().ln_1p() - std::f64::consts::LN_2;
        (-z * t.cosh() + log_cosh_nu).exp()
    };
    let mut sum = 0.5 * term(0.0);
    let mut k = 1usize;
    loop {
        let t = k as f64 * step;
        let v = term(t);
        sum += v;
        // Past the peak the integrand decays doubly exponentially.
        if z * t.sinh() > nu.abs() && v < 1e-18 * sum {
            break;
        }
        k += 1;
    }
    sum * step
}

fn near_integer(nu: f64) -> bool {
    (nu - nu.round()).abs() < 1e-3
}

/// Characteristic function of the generalized Student law,
/// `φ_ν(z) = 2^{1−ν}/Γ(ν) · z^ν K_ν(z)`, with `φ_ν(0) = 1`.
pub fn student_hat(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    if z < 2.0 && !near_integer(nu) {
        return 1.0 - student_one_minus_hat(nu, z);
    }
    let log_pref = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * z.ln();
    log_pref.exp() * bessel_k(nu, z)
}

/// `1 − φ_ν(z)`, evaluated by the ascending series when it is stable.
pub fn student_one_minus_hat(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    if z >= 2.0 || near_integer(nu) {
        return 1.0 - student_hat(nu, z);
    }
    let q = 0.25 * z * z;
    let half = 0.5 * z;
    // Σ_k (z/2)^{2k+2ν} / (k! Γ(k+1+ν))
    let mut a = half.powf(2.0 * nu) / gamma(1.0 + nu);
    let mut sum_a = a;
    // Σ_{k≥1} (z/2)^{2k} / (k! Γ(k+1−ν))
    let mut b = q / gamma(2.0 - nu);
    let mut sum_b = b;
    for k in 1..80 {
        let kf = k as f64;
        a *= q / (kf * (kf + nu));
        b *= q / ((kf + 1.0) * (kf + 1.0 - nu));
        sum_a += a;
        sum_b += b;
        if a.abs() < 1e-18 * sum_a.abs() && b.abs() < 1e-18 * sum_b.abs().max(1e-300) {
            break;
        }
    }
    gamma(1.0 - nu) * (sum_a - sum_b)
}

/// `1 − sin(z)/z`.
pub fn one_minus_sinc(z: f64) -> f64 {
    if z.abs() < 0.5 {
        // z²/6 − z⁴/120 + z⁶/5040 − …
        let q = z * z;
        let mut term = q / 6.0;
        let mut sum = term;
        for k in 2..12 {
            term *= -q / ((2 * k) as f64 * (2 * k + 1) as f64);
            sum += term;
        }
        sum
    } else {
        1.0 - z.sin() / z
    }
}

/// `2 J_1(z)/z`, the transform of the normalized unit disk.
pub fn disk_hat(z: f64) -> f64 {
    if z.abs() < 0.5 {
        1.0 - one_minus_disk_hat(z)
    } else {
        2.0 * bessel_j(1, z) / z
    }
}

/// `1 − 2 J_1(z)/z`.
pub fn one_minus_disk_hat(z: f64) -> f64 {
    if z.abs() < 0.5 {
        // 2J_1(z)/z = Σ_k (−1)^k (z/2)^{2k} / (k! (k+1)!)
        let q = 0.25 * z * z;
        let mut term = 0.5 * q;
        let mut sum = term;
        for k in 1..16 {
            let kf = k as f64;
            term *= -q / ((kf + 1.0) * (kf + 2.0));
            sum += term;
        }
        sum
    } else {
        1.0 - 2.0 * bessel_j(1, z) / z
    }
}

/// Surface area `|S_{N−1}|` of the unit sphere in `R^N`.
pub fn sphere_area(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * PI.powf(0.5 * n) / gamma(0.5 * n)
}

/// Volume of the unit ball in `R^N`.
pub fn ball_volume(dim: usize) -> f64 {
    sphere_area(dim) / dim as f64
}
