use fujita_core::diagnostics::{ball_constant, ball_shift_monte_carlo, hairtrigger_w, kaplan_f, kaplan_f_dual};
use fujita_core::kernels::{estimate_expansion, fujita_exponent, DEFAULT_FIT_WINDOW};
use fujita_core::semigroup::terms_for_tolerance;
use fujita_core::solver::{run, SimOutcome};
use fujita_core::{DiscreteKernel, Field, Grid, KernelSpec, Reaction, SecondMoment, SolverConfig};
use proptest::prelude::*;

fn analytic_kernels(dim: usize) -> Vec<KernelSpec> {
    let mut out = vec![
        KernelSpec::gaussian(1.3, dim).unwrap(),
        KernelSpec::laplace(0.8, dim).unwrap(),
        KernelSpec::compact_bump(1.5, dim).unwrap(),
        KernelSpec::algebraic_tail(dim as f64 + 0.7, 1.0, dim).unwrap(),
    ];
    if dim == 1 {
        out.push(KernelSpec::cauchy());
    }
    out
}

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.3f64..3.0, 1usize..=2).prop_map(|(s, n)| KernelSpec::gaussian(s, n).unwrap()),
        (0.3f64..3.0, 1usize..=2).prop_map(|(l, n)| KernelSpec::laplace(l, n).unwrap()),
        (0.3f64..3.0, 1usize..=2).prop_map(|(r, n)| KernelSpec::compact_bump(r, n).unwrap()),
        (0.1f64..0.95, 0.5f64..2.0).prop_map(|(f, c)| KernelSpec::algebraic_tail(1.0 + 2.0 * f, c, 1).unwrap()),
        Just(KernelSpec::cauchy()),
    ]
}

fn smooth_datum(grid: &Grid, amplitude: f64, width: f64, shift: f64) -> Field {
    grid.sample(|x| {
        let r2: f64 = x.iter().enumerate().map(|(i, v)| (v - if i == 0 { shift } else { 0.0 }).powi(2)).sum();
        amplitude * (-r2 / (width * width)).exp()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hat_bounded_by_one(k in kernel_strategy(), xi in 1e-3f64..100.0) {
        let h = k.hat(xi).unwrap();
        prop_assert!(h.abs() <= 1.0);
        prop_assert!(k.one_minus_hat(xi).unwrap() > 0.0);
        prop_assert!((k.hat(0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescaling_keeps_the_fujita_exponent(lambda in 0.3f64..3.0, which in 0usize..3) {
        let k = match which {
            0 => KernelSpec::gaussian(1.0, 1).unwrap(),
            1 => KernelSpec::laplace(1.0, 1).unwrap(),
            _ => KernelSpec::algebraic_tail(2.5, 1.0, 1).unwrap(),
        };
        let e0 = estimate_expansion(&k, DEFAULT_FIT_WINDOW).unwrap();
        let e1 = estimate_expansion(&k.rescaled(lambda).unwrap(), DEFAULT_FIT_WINDOW).unwrap();
        prop_assert!((fujita_exponent(&e0, 1) - fujita_exponent(&e1, 1)).abs() < 0.05);
    }

    #[test]
    fn convolution_commutes_and_keeps_sign(
        a in 0.1f64..2.0, b in 0.1f64..2.0, wa in 0.5f64..3.0, wb in 0.5f64..3.0, shift in -3.0f64..3.0,
    ) {
        let grid = Grid::new(1, 128, 16.0).unwrap();
        let dk = DiscreteKernel::new(KernelSpec::gaussian(1.0, 1).unwrap(), grid).unwrap();
        let f = smooth_datum(&grid, a, wa, shift);
        let g = smooth_datum(&grid, b, wb, -shift);
        let fg = dk.spectral().convolve(&f, &g).unwrap();
        let gf = dk.spectral().convolve(&g, &f).unwrap();
        let diff = fg.values().iter().zip(gf.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-12);
        prop_assert!(fg.values().iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn linear_flow_conserves_mass_and_sign(
        amp in 0.01f64..5.0, width in 0.5f64..3.0, shift in -4.0f64..4.0, t in 0.0f64..5.0,
    ) {
        let grid = Grid::new(1, 256, 30.0).unwrap();
        let dk = DiscreteKernel::new(KernelSpec::laplace(1.0, 1).unwrap(), grid).unwrap();
        let u0 = smooth_datum(&grid, amp, width, shift);
        let v = dk.evolve_linear(&u0, t).unwrap();
        prop_assert!((v.integral() - u0.integral()).abs() <= 1e-10 * u0.integral().max(1.0));
        prop_assert!(v.values().iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn series_matches_spectral_flow(width in 0.7f64..3.0, t in 0.05f64..5.0, which in 0usize..3) {
        let grid = Grid::new(1, 128, 20.0).unwrap();
        let k = match which {
            0 => KernelSpec::gaussian(1.0, 1).unwrap(),
            1 => KernelSpec::laplace(1.0, 1).unwrap(),
            _ => KernelSpec::compact_bump(1.0, 1).unwrap(),
        };
        let dk = DiscreteKernel::new(k, grid).unwrap();
        let u0 = smooth_datum(&grid, 1.0, width, 0.0);
        let series = dk.series_k(&u0, t, terms_for_tolerance(t, 1e-12)).unwrap();
        let spectral = dk.evolve_linear(&u0, t).unwrap();
        let err = series.field.values().iter().zip(spectral.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= series.truncation_bound + 1e-8);
    }

    #[test]
    fn kaplan_duality_holds(width in 0.5f64..3.0, t in 0.1f64..10.0, which in 0usize..2) {
        // The Laplace cusp costs O((λh)²) on the sampled side; λh ≈ 0.02 here.
        let grid = Grid::new(1, 1024, 25.0).unwrap();
        let k = if which == 0 { KernelSpec::gaussian(1.0, 1).unwrap() } else { KernelSpec::laplace(0.5, 1).unwrap() };
        let dk = DiscreteKernel::new(k, grid).unwrap();
        let u0 = smooth_datum(&grid, 1.0, width, 0.0);
        let f = kaplan_f(&dk, &u0, t).unwrap();
        let d = kaplan_f_dual(&dk, &u0, t).unwrap();
        prop_assert!((f - d).abs() <= 1e-4 * f.abs(), "f {} dual {}", f, d);
    }

    #[test]
    fn allee_stays_in_unit_interval(amp in 0.05f64..1.0, width in 0.3f64..4.0, p in 0.2f64..4.0) {
        let grid = Grid::new(1, 128, 40.0).unwrap();
        let dk = DiscreteKernel::new(KernelSpec::gaussian(1.0, 1).unwrap(), grid).unwrap();
        let u0 = smooth_datum(&grid, amp, width, 0.0);
        let cfg = SolverConfig { t_max: 30.0, snapshot_stride: 1, boundary_check: false, ..SolverConfig::default() };
        let res = run(&u0, &dk, &Reaction::allee_logistic(p).unwrap(), &cfg).unwrap();
        for (_, snap) in &res.snapshots {
            prop_assert!(snap.values().iter().all(|&v| (-1e-12..=1.0 + 1e-8).contains(&v)));
        }
        prop_assert!(res.final_field.values().iter().all(|&v| (-1e-12..=1.0 + 1e-8).contains(&v)));
    }

    #[test]
    fn pure_growth_keeps_sign(amp in 0.01f64..0.5, p in 0.5f64..4.0) {
        let grid = Grid::new(1, 128, 40.0).unwrap();
        let dk = DiscreteKernel::new(KernelSpec::gaussian(1.0, 1).unwrap(), grid).unwrap();
        let u0 = smooth_datum(&grid, amp, 1.0, 0.0);
        let cfg = SolverConfig { t_max: 10.0, snapshot_stride: 1, boundary_check: false, ..SolverConfig::default() };
        let res = run(&u0, &dk, &Reaction::pure_growth(p).unwrap(), &cfg).unwrap();
        for (_, snap) in &res.snapshots {
            prop_assert!(snap.values().iter().all(|&v| v >= -1e-12));
        }
    }

    #[test]
    fn bernoulli_blowup_time(x0 in 1.5f64..4.0, p in 0.5f64..2.0) {
        // ẋ = x^{1+p} − x: t* = (1/p) ln(1/(1 − x0^{−p})).
        let grid = Grid::new(1, 8, 2.0).unwrap();
        let dk = DiscreteKernel::new(KernelSpec::gaussian(1.0, 1).unwrap(), grid).unwrap();
        let u0 = grid.sample(|_| x0).unwrap();
        let cfg = SolverConfig { dt_init: 1e-3, boundary_check: false, ..SolverConfig::default() };
        let res = run(&u0, &dk, &Reaction::bernoulli(1.0, 1.0, p).unwrap(), &cfg).unwrap();
        let exact = (1.0 / (1.0 - x0.powf(-p))).ln() / p;
        let SimOutcome::Blowup { t_star, .. } = res.outcome else {
            return Err(TestCaseError::fail(format!("{:?}", res.outcome)));
        };
        prop_assert!((t_star - exact).abs() <= 0.01 * exact, "t* {} exact {}", t_star, exact);
    }

    #[test]
    fn hairtrigger_w_is_convex_in_x(t in 0.0f64..5.0, eps in 0.01f64..0.5, p in 0.1f64..3.0, x in 0.01f64..0.3) {
        let h = 1e-3 * x;
        let (a, b, c) = (hairtrigger_w(t, x - h, eps, p), hairtrigger_w(t, x, eps, p), hairtrigger_w(t, x + h, eps, p));
        if let (Ok(a), Ok(b), Ok(c)) = (a, b, c) {
            prop_assert!(a + c - 2.0 * b >= -1e-12 * b);
            prop_assert!(b >= x);
        }
    }
}

#[test]
fn finite_second_moment_gives_quadratic_expansion() {
    for dim in 1..=2 {
        for k in analytic_kernels(dim) {
            let e = estimate_expansion(&k, DEFAULT_FIT_WINDOW).unwrap();
            if let SecondMoment::Finite(m2) = k.second_moment().unwrap() {
                assert!((e.beta - 2.0).abs() < 0.02, "{} beta {}", k.label(), e.beta);
                let a = m2 / (2.0 * dim as f64);
                assert!((e.a - a).abs() < 0.02 * a, "{}: A {} vs m2/2N {}", k.label(), e.a, a);
            }
        }
    }
}

#[test]
fn symbol_gap_away_from_origin() {
    for dim in 1..=2 {
        for k in analytic_kernels(dim) {
            let xi0 = 0.5;
            let gap = (0..=2000)
                .map(|i| xi0 + (100.0 - xi0) * i as f64 / 2000.0)
                .map(|xi| k.one_minus_hat(xi).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(gap > 0.01, "{} gap {gap}", k.label());
        }
    }
}

#[test]
fn convolution_self_converges_under_refinement() {
    let f = |r: f64| (-r * r).exp();
    let k = KernelSpec::gaussian(1.0, 1).unwrap();
    let coarse = Grid::new(1, 128, 16.0).unwrap();
    let fine = Grid::new(1, 256, 16.0).unwrap();
    let a = DiscreteKernel::new(k.clone(), coarse).unwrap().convolve(&coarse.sample_radial(f).unwrap()).unwrap();
    let b = DiscreteKernel::new(k, fine).unwrap().convolve(&fine.sample_radial(f).unwrap()).unwrap();
    let diff = (0..128).map(|i| (a.values()[i] - b.values()[2 * i]).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-10, "diff {diff}");
}

#[test]
fn cauchy_rescaled_flow_approaches_poisson_profile() {
    // A = 1, beta = 1: G_A(y) = 1/(π(1 + y²)).
    let grid = Grid::new(1, 65536, 20000.0).unwrap();
    let dk = DiscreteKernel::new(KernelSpec::cauchy(), grid).unwrap();
    let u0 = grid.sample_radial(|r| if r < 4.0 { (1.0 - (r / 4.0).powi(2)).powi(2) } else { 0.0 }).unwrap();
    let mass = u0.integral();
    let t = 500.0;
    let v = dk.evolve_linear(&u0, t).unwrap();
    let h = grid.spacing();
    for i in 0..=10 {
        let y = 0.1 * i as f64;
        let x = y * t;
        let k = ((x + grid.half_width()) / h).round() as usize;
        let profile = 1.0 / (std::f64::consts::PI * (1.0 + y * y));
        let got = t * v.values()[k];
        assert!((got - mass * profile).abs() <= 0.1 * mass * profile, "y {y}: {got} vs {}", mass * profile);
    }
}

#[test]
fn ball_shift_for_every_family() {
    for dim in 1..=2 {
        for k in analytic_kernels(dim) {
            for &r in &[0.5, 2.0, 6.0] {
                let rep = ball_shift_monte_carlo(&k, r, 1000, 3).unwrap();
                assert!(rep.holds, "{} R {r}: {rep:?}", k.label());
            }
        }
    }
    for n in 1..=6 {
        let c = ball_constant(n).unwrap();
        assert!(c > 0.0 && c < 1.0);
    }
}

#[test]
fn refinement_keeps_classification() {
    let k = KernelSpec::gaussian(1.0, 1).unwrap();
    for (p, amp) in [(3.0, 0.05), (3.0, 2.0), (1.0, 0.5)] {
        let labels: Vec<&str> = [512usize, 1024]
            .iter()
            .map(|&m| {
                let grid = Grid::new(1, m, 100.0).unwrap();
                let dk = DiscreteKernel::new(k.clone(), grid).unwrap();
                let u0 = smooth_datum(&grid, amp, 1.5, 0.0);
                run(&u0, &dk, &Reaction::pure_growth(p).unwrap(), &SolverConfig::default())
                    .unwrap()
                    .outcome
                    .label()
            })
            .collect();
        assert_eq!(labels[0], labels[1], "p {p} amp {amp}");
        assert_ne!(labels[0], "inconclusive");
    }
}
