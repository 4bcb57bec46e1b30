//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Global bisection: the subinterval with the largest error estimate is split
//! until the summed estimate falls below `max(abs, rel·|I|)`.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Panel { a, b, value, error }
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite bounds [{a}, {b}]")));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut panels = vec![gk15(&f, lo, hi)];
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature("integrand produced non-finite values".into()));
        }
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Estimate {
                value: sign * value,
                error,
            });
        }
        if panels.len() >= tol.max_subdivisions {
            return Err(Error::Quadrature(format!(
                "error estimate {error:e} after {} subdivisions (value {value:e})",
                panels.len()
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature("subinterval below floating-point resolution".into()));
        }
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
    }
}

/// Integrate `f` over `[a, ∞)` through the substitution `x = a + (1 − s)/s`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<Estimate> {
    integrate(
        |s: f64| {
            let x = a + (1.0 - s) / s;
            let v = f(x) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integrate over `[a, b]` split into panels no wider than `width`.
///
/// Used for oscillatory integrands, where one panel per half period keeps
/// each Kronrod estimate honest.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    width: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let n = (((b - a) / width).ceil() as usize).max(1);
    let step = (b - a) / n as f64;
    let mut total = Estimate { value: 0.0, error: 0.0 };
    let per_panel = Tolerance {
        abs: tol.abs / n as f64,
        ..tol
    };
    for i in 0..n {
        let lo = a + i as f64 * step;
        let hi = if i + 1 == n { b } else { lo + step };
        let e = integrate(&f, lo, hi, per_panel)?;
        total.value += e.value;
        total.error += e.error;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let e = integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0, Tolerance::default()).unwrap();
        // ∫ x^5 − 3x² + 1 = 64/6 − 1/6 − (8 + 1) + 3
        let exact = 63.0 / 6.0 - 9.0 + 3.0;
        assert!((e.value - exact).abs() < 1e-13);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let fwd = integrate(f64::exp, 0.0, 1.0, Tolerance::default()).unwrap();
        let back = integrate(f64::exp, 1.0, 0.0, Tolerance::default()).unwrap();
        assert!((fwd.value + back.value).abs() < 1e-15);
        assert!((fwd.value - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let e = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::new(1e-10, 1e-10)).unwrap();
        assert!((e.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn semi_infinite() {
        let e = integrate_to_infinity(|x: f64| (-x * x).exp(), 0.0, Tolerance::default()).unwrap();
        assert!((e.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
        let e = integrate_to_infinity(|x: f64| 1.0 / (1.0 + x * x), 1.0, Tolerance::default()).unwrap();
        assert!((e.value - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_panels() {
        // ∫_0^{40} cos(3x) e^{-x} dx = (1 − e^{-40}(cos 120 − 3 sin 120)) / 10
        let e = integrate_panels(
            |x: f64| (3.0 * x).cos() * (-x).exp(),
            0.0,
            40.0,
            std::f64::consts::PI / 3.0,
            Tolerance::default(),
        )
        .unwrap();
        let exact = (1.0 - (-40f64).exp() * (120f64.cos() - 3.0 * 120f64.sin())) / 10.0;
        assert!((e.value - exact).abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let tol = Tolerance {
            abs: 1e-15,
            rel: 0.0,
            max_subdivisions: 4,
        };
        assert!(matches!(
            integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol),
            Err(Error::Quadrature(_))
        ));
    }
}
