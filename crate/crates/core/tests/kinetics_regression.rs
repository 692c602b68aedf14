use num_complex::Complex64;
use proptest::prelude::*;
use wrk_core::equilibria::{find_roots, DEFAULT_ROOT_TOL};
use wrk_core::gf_algebra::TestFunctionPair;
use wrk_core::kinetics::{
    homogeneous_reduce, picard_solve, rhs, rk4_solve, verify_exponential_ansatz, ConvolutionMethod, Convolver,
    DensityField2, KineticRun, SolveMethod, TorusGrid,
};
use wrk_core::{Dim, PairPotential, PeriodicKernel, Point};

fn smooth_initial(grid: TorusGrid) -> DensityField2 {
    let l = grid.side;
    let w = 2.0 * std::f64::consts::PI / l;
    DensityField2::from_fns(
        grid,
        |x| {
            let y = if x.dim() == Dim::Two { x.coord(1) } else { 0.0 };
            1.0 + 0.5 * (w * x.coord(0)).cos() + 0.2 * (w * y).sin()
        },
        |x| 0.8 + 0.4 * (2.0 * w * x.coord(0)).sin(),
    )
    .unwrap()
}

fn regression_case(dim: Dim) -> (DensityField2, PeriodicKernel) {
    let (n, side) = match dim {
        Dim::One => (256, 12.0),
        Dim::Two => (64, 8.0),
    };
    let grid = TorusGrid::new(dim, n, side).unwrap();
    let phi = PairPotential::gaussian(dim, 1.0, 0.5).unwrap();
    let kernel = phi.periodize(side, n).unwrap();
    (smooth_initial(grid), kernel)
}

#[test]
fn no_births_gives_exact_decay() {
    let (rho0, kernel) = regression_case(Dim::One);
    let run = KineticRun::new(1.3, 0.0, kernel, 2.0, 1e-3);
    let tr = picard_solve(&rho0, &run).unwrap();
    let mut worst: f64 = 0.0;
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let f = (-1.3 * t).exp();
        for i in 0..rho0.plus().len() {
            worst = worst.max((s.plus()[i] - f * rho0.plus()[i]).abs());
            worst = worst.max((s.minus()[i] - f * rho0.minus()[i]).abs());
        }
    }
    assert!(worst <= 1e-8, "{worst:e}");
}

#[test]
fn zero_potential_relaxes_to_z_over_m() {
    let grid = TorusGrid::new(Dim::One, 64, 4.0).unwrap();
    let rho0 = smooth_initial(grid);
    let kernel = PeriodicKernel::zero(Dim::One, 64, 4.0).unwrap();
    let (m, z) = (0.7, 2.1);
    let run = KineticRun::new(m, z, kernel, 3.0, 1e-3);
    let tr = picard_solve(&rho0, &run).unwrap();
    let mut worst: f64 = 0.0;
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let f = (-m * t).exp();
        for i in 0..64 {
            let want = f * rho0.plus()[i] + z / m * (1.0 - f);
            worst = worst.max((s.plus()[i] - want).abs());
        }
    }
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn picard_and_rk4_agree_on_regression_suite() {
    for dim in [Dim::One, Dim::Two] {
        let (rho0, kernel) = regression_case(dim);
        let (m, z) = (1.0, 2.0);
        let mut run = KineticRun::new(m, z, kernel, 1.0, 1e-3);
        run.store_every = 50;
        let p = picard_solve(&rho0, &run).unwrap();
        run.method = SolveMethod::Rk4;
        let r = rk4_solve(&rho0, &run).unwrap();
        assert_eq!(p.times, r.times);
        let diff = p.states.iter().zip(&r.states).map(|(a, b)| a.sup_distance(b)).fold(0.0, f64::max);
        assert!(diff <= 1e-6, "{dim:?}: {diff:e}");

        let c = run.bound(rho0.max_value());
        for s in &p.states {
            assert!(s.min_value() >= -1e-12 && s.max_value() <= c + 1e-12);
        }
        let rep = p.picard.as_ref().unwrap();
        assert!(rep.contraction_bound <= 0.5 + 1e-15);
        assert!(rep.max_observed_contraction() <= rep.contraction_bound + 1e-12);
        assert!(rep.subintervals.len() >= 4);
    }
}

#[test]
fn large_data_stays_below_initial_bound() {
    let grid = TorusGrid::new(Dim::One, 128, 10.0).unwrap();
    let rho0 = DensityField2::from_fns(grid, |x| 6.0 * (1.0 + (x.coord(0)).sin()).powi(2), |_| 0.0).unwrap();
    let kernel = PairPotential::top_hat(Dim::One, 2.0, 0.75).unwrap().periodize(10.0, 128).unwrap();
    let run = KineticRun::new(1.0, 5.0, kernel, 2.0, 1e-3);
    let tr = picard_solve(&rho0, &run).unwrap();
    let c = run.bound(rho0.max_value());
    for s in &tr.states {
        assert!(s.min_value() >= 0.0 && s.max_value() <= c + 1e-12);
    }
}

#[test]
fn one_cell_shift_is_exact_for_direct_convolution() {
    let n = 48;
    let grid = TorusGrid::new(Dim::One, n, 6.0).unwrap();
    let rho0 =
        DensityField2::from_fns(grid, |x| 1.0 + (x.coord(0) * 1.3).sin().abs(), |x| 0.5 + 0.1 * x.coord(0)).unwrap();
    let shifted = DensityField2::new(
        grid,
        (0..n).map(|i| rho0.plus()[(i + n - 1) % n]).collect(),
        (0..n).map(|i| rho0.minus()[(i + n - 1) % n]).collect(),
    )
    .unwrap();
    let kernel = PairPotential::exponential(Dim::One, 1.0, 1.5, 1.2).unwrap().periodize(6.0, n).unwrap();
    let mut run = KineticRun::new(1.0, 1.5, kernel, 0.5, 1e-3);
    run.convolution = ConvolutionMethod::Direct;
    let a = picard_solve(&rho0, &run).unwrap();
    let b = picard_solve(&shifted, &run).unwrap();
    for (sa, sb) in a.states.iter().zip(&b.states) {
        for i in 0..n {
            assert_eq!(sb.plus()[i].to_bits(), sa.plus()[(i + n - 1) % n].to_bits());
            assert_eq!(sb.minus()[i].to_bits(), sa.minus()[(i + n - 1) % n].to_bits());
        }
    }
}

#[test]
fn species_swap_swaps_solution() {
    let (rho0, kernel) = regression_case(Dim::One);
    let mut run = KineticRun::new(1.0, 2.0, kernel, 0.5, 1e-3);
    run.store_every = 100;
    let a = picard_solve(&rho0, &run).unwrap();
    let b = picard_solve(&rho0.swapped(), &run).unwrap();
    for (sa, sb) in a.states.iter().zip(&b.states) {
        assert_eq!(sa.plus(), sb.minus());
        assert_eq!(sa.minus(), sb.plus());
    }
}

#[test]
fn homogeneous_data_stays_homogeneous_under_rk4() {
    let grid = TorusGrid::new(Dim::Two, 16, 4.0).unwrap();
    let rho0 = DensityField2::constant(grid, 1.2, 0.4).unwrap();
    let kernel = PairPotential::gaussian(Dim::Two, 1.0, 0.3).unwrap().periodize(4.0, 16).unwrap();
    let mut run = KineticRun::new(1.0, 2.0, kernel, 0.5, 1e-2);
    run.method = SolveMethod::Rk4;
    let tr = rk4_solve(&rho0, &run).unwrap();
    for s in &tr.states {
        let spread = s.plus().iter().fold(0.0f64, |m, v| m.max((v - s.plus()[0]).abs()));
        assert!(spread <= 1e-13);
    }
}

#[test]
fn homogeneous_reduction_matches_constant_fields() {
    let grid = TorusGrid::new(Dim::One, 32, 8.0).unwrap();
    let kernel = PairPotential::top_hat(Dim::One, 1.0, 0.5).unwrap().periodize(8.0, 32).unwrap();
    let beta = kernel.mass();
    let rho0 = DensityField2::constant(grid, 1.5, 0.2).unwrap();
    let run = KineticRun::new(1.0, 3.0, kernel, 4.0, 1e-3);
    let field = picard_solve(&rho0, &run).unwrap();
    let scalar = homogeneous_reduce(1.5, 0.2, 1.0, 3.0, beta, 4.0, 1e-3).unwrap();
    assert_eq!(field.times.len(), scalar.times.len());
    for (k, s) in field.states.iter().enumerate() {
        for i in 0..32 {
            assert!((s.plus()[i] - scalar.plus[k]).abs() <= 1e-8);
            assert!((s.minus()[i] - scalar.minus[k]).abs() <= 1e-8);
        }
    }
}

#[test]
fn fixed_points_are_stationary() {
    for a in [2.0, 3.0] {
        let (m, beta) = (1.0, 1.0);
        let z = a * m / beta;
        let roots = find_roots(a, DEFAULT_ROOT_TOL).unwrap();
        for x in roots {
            let y = a * (-x).exp();
            let tr = homogeneous_reduce(x / beta, y / beta, m, z, beta, 5.0, 1e-3).unwrap();
            for (p, q) in tr.plus.iter().zip(&tr.minus) {
                assert!((p - x).abs() <= 1e-10 && (q - y).abs() <= 1e-10);
            }
            let grid = TorusGrid::new(Dim::One, 16, 4.0).unwrap();
            let kernel = PeriodicKernel::point_mass(Dim::One, 16, 4.0, beta).unwrap();
            let rho = DensityField2::constant(grid, x / beta, y / beta).unwrap();
            let d = rhs(&rho, m, z, &mut Convolver::new(kernel, ConvolutionMethod::Fft)).unwrap();
            assert!(d.sup_norm() <= 1e-10);
        }
    }
}

#[test]
fn diagonal_is_invariant() {
    let tr = homogeneous_reduce(0.7, 0.7, 1.0, 3.0, 1.0, 20.0, 1e-2).unwrap();
    assert_eq!(tr.plus, tr.minus);
}

fn ansatz_setup(stationary: bool) -> (wrk_core::kinetics::Trajectory, PeriodicKernel, TorusGrid) {
    let n = 256;
    let side = 12.0;
    let grid = TorusGrid::new(Dim::One, n, side).unwrap();
    let phi = PairPotential::gaussian(Dim::One, 1.0, 0.5).unwrap();
    let kernel = phi.periodize(side, n).unwrap();
    let (m, z) = (1.0, 1.5);
    let rho0 = if stationary {
        let a = z * kernel.mass() / m;
        let x = find_roots(a, DEFAULT_ROOT_TOL).unwrap()[0];
        DensityField2::constant(grid, x / kernel.mass(), x / kernel.mass()).unwrap()
    } else {
        smooth_initial(grid)
    };
    let run = KineticRun::new(m, z, kernel.clone(), 0.2, 1e-4);
    (picard_solve(&rho0, &run).unwrap(), kernel, grid)
}

#[test]
fn exponential_ansatz_residuals() {
    let (tr, kernel, grid) = ansatz_setup(false);
    let q = grid.quad_grid();
    let zero = TestFunctionPair::zero(q);
    let r0 = verify_exponential_ansatz(&tr, &kernel, 1.0, 1.5, &zero, 0.1, 1e-4).unwrap();
    assert_eq!(r0.residual, 0.0);
    assert_eq!(r0.b, Complex64::new(1.0, 0.0));

    let theta = TestFunctionPair::from_fns(
        q,
        |x: Point| Complex64::new(0.1 * (-(x.coord(0) - 6.0).powi(2)).exp(), 0.05 * (x.coord(0) * 0.5).sin()),
        |x: Point| Complex64::new(-0.08 * (x.coord(0) * 0.5).cos(), 0.0),
    );
    for t in [0.05, 0.1, 0.15] {
        let chk = verify_exponential_ansatz(&tr, &kernel, 1.0, 1.5, &theta, t, 1e-4).unwrap();
        assert!(chk.residual <= 1e-4, "t = {t}: {:e}", chk.residual);
        assert!(chk.generator.norm() > 1e-3);
    }
    assert!(verify_exponential_ansatz(&tr, &kernel, 1.0, 1.5, &theta, 0.2, 1e-4).is_err());

    let (st, kernel, _) = ansatz_setup(true);
    let chk = verify_exponential_ansatz(&st, &kernel, 1.0, 1.5, &theta, 0.1, 1e-4).unwrap();
    assert!(chk.dbdt.norm() <= 1e-8 && chk.generator.norm() <= 1e-8, "{chk:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn picard_respects_bound_and_contraction(
        z in 0.0f64..4.0,
        m in 0.3f64..2.0,
        c0 in 0.0f64..4.0,
        h in 0.0f64..2.0,
        r in 0.2f64..1.0,
    ) {
        let grid = TorusGrid::new(Dim::One, 32, 5.0).unwrap();
        let rho0 = DensityField2::from_fns(grid, |x| c0 * (0.5 + 0.5 * x.coord(0).cos()), |x| c0 * (0.5 - 0.5 * x.coord(0).sin())).unwrap();
        let kernel = PairPotential::top_hat(Dim::One, h, r).unwrap().periodize(5.0, 32).unwrap();
        let run = KineticRun::new(m, z, kernel, 1.0, 2e-3);
        let tr = picard_solve(&rho0, &run).unwrap();
        let c = run.bound(rho0.max_value());
        for s in &tr.states {
            prop_assert!(s.min_value() >= 0.0);
            prop_assert!(s.max_value() <= c + 1e-12);
        }
        let rep = tr.picard.unwrap();
        prop_assert!(rep.max_observed_contraction() <= rep.contraction_bound + 1e-12);
    }
}
