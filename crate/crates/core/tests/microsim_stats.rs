use wrk_core::kinetics::homogeneous_reduce;
use wrk_core::microsim::{
    empirical_density, lp_convergence_experiment, mean_stderr, run_counts, run_replicas, run_with_rng,
    sample_poisson_initial, Configuration2State, Intensity, LpExperiment, SimBox, SimParams, Species,
};
use wrk_core::{Dim, PairPotential, Point};

fn top_hat() -> PairPotential {
    PairPotential::top_hat(Dim::One, 1.0, 0.5).unwrap()
}

fn params(m: f64, z: f64, phi: PairPotential, t_end: f64, snapshot_dt: f64) -> SimParams {
    SimParams { m, z, phi, t_end, seed: 0, snapshot_dt, eps: 1.0 }
}

#[test]
fn empty_intensity_gives_empty_configuration() {
    let sbox = SimBox::new(Dim::Two, 3.0).unwrap();
    let mut rng = wrk_core::rng::rng_from_seed(1);
    let st = sample_poisson_initial(&Intensity::Constant(0.0), &Intensity::Constant(0.0), sbox, 0.5, &mut rng).unwrap();
    assert_eq!(st.count(Species::Plus) + st.count(Species::Minus), 0);
}

#[test]
fn poisson_count_moments() {
    let sbox = SimBox::new(Dim::Two, 10.0).unwrap();
    let counts = run_replicas(1000, 4, 42, 0, |_, rng| {
        let st = sample_poisson_initial(&Intensity::Constant(1.0), &Intensity::Constant(0.0), sbox, 1.0, rng)?;
        Ok(st.count(Species::Plus) as f64)
    })
    .unwrap();
    let (mean, se) = mean_stderr(&counts);
    assert!((mean - 100.0).abs() <= 3.0 * se, "{mean} ± {se}");
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 999.0;
    // sd of the sample variance of Poisson(100) ≈ sqrt((2σ⁴ + μ)/(n−1))
    let var_se = ((2.0 * 100.0f64.powi(2) + 100.0) / 999.0).sqrt();
    assert!((var - 100.0).abs() <= 3.0 * var_se, "{var}");
}

#[test]
fn bin_counts_follow_poisson() {
    let sbox = SimBox::new(Dim::One, 50.0).unwrap();
    let bins = 25;
    let snaps = run_replicas(200, 4, 7, 0, |_, rng| {
        let st = sample_poisson_initial(&Intensity::Constant(2.0), &Intensity::Constant(2.0), sbox, 0.5, rng)?;
        Ok(st.snapshot(0.0))
    })
    .unwrap();
    let dens = empirical_density(&snaps, sbox, bins).unwrap();
    let mut freq = [0usize; 12];
    for (_, d) in &dens {
        for v in d.plus() {
            let k = (v * 2.0).round() as usize;
            freq[k.min(11)] += 1;
        }
    }
    let total = (200 * bins) as f64;
    let lambda: f64 = 4.0;
    let mut probs = [0.0; 12];
    let mut p = (-lambda).exp();
    for (k, slot) in probs.iter_mut().enumerate().take(11) {
        if k > 0 {
            p *= lambda / k as f64;
        }
        *slot = p;
    }
    probs[11] = 1.0 - probs[..11].iter().sum::<f64>();
    let chi2: f64 = freq.iter().zip(&probs).map(|(&o, &q)| (o as f64 - total * q).powi(2) / (total * q)).sum();
    // χ²₁₁ upper 0.001 quantile
    assert!(chi2 < 31.264, "chi² = {chi2}");

    let grand: f64 = dens.iter().flat_map(|(_, d)| d.minus().iter()).sum::<f64>() / total;
    assert!((grand - 2.0).abs() < 3.0 * (2.0 / (2.0 * total)).sqrt());
}

#[test]
fn pure_death_mean_decays_exponentially() {
    let sbox = SimBox::new(Dim::One, 20.0).unwrap();
    let n0 = 30;
    let init = Configuration2State::new(
        sbox,
        0.5,
        (0..n0).map(|i| Point::new1(0.5 * i as f64 + 0.1)).collect(),
        vec![Point::new1(19.0)],
    )
    .unwrap();
    let p = params(0.8, 0.0, top_hat(), 2.0, 0.5);
    let reps = run_replicas(2000, 4, 3, 0, |_, rng| run_counts(&init, &p, rng)).unwrap();
    for (k, t) in [(1, 0.5), (2, 1.0), (4, 2.0)] {
        let ratios: Vec<f64> = reps.iter().map(|r| r[k].plus as f64 / n0 as f64).collect();
        let (mean, se) = mean_stderr(&ratios);
        assert!((mean - (-0.8f64 * t).exp()).abs() <= 3.0 * se, "t = {t}: {mean} ± {se}");
    }
}

#[test]
fn free_species_reach_z_over_m() {
    let sbox = SimBox::new(Dim::One, 10.0).unwrap();
    let phi = PairPotential::top_hat(Dim::One, 0.0, 0.5).unwrap();
    let (m, z) = (1.0, 1.5);
    let init = Configuration2State::empty(sbox, 0.5);
    let p = params(m, z, phi, 12.0, 12.0);
    let reps = run_replicas(2000, 4, 5, 0, |_, rng| run_counts(&init, &p, rng)).unwrap();
    let dens: Vec<f64> = reps.iter().map(|r| r[1].plus as f64 / 10.0).collect();
    let (mean, se) = mean_stderr(&dens);
    let want = z / m * (1.0 - (-m * 12.0f64).exp());
    assert!((mean - want).abs() <= 3.0 * se, "{mean} ± {se} vs {want}");
}

/// `(L N⁺)(γ) = −m N⁺ + z ∫_box e^{−E(x, γ⁻)} dx`, integral by a fine midpoint rule.
fn generator_oracle(m: f64, z: f64, side: f64, plus: &[f64], minus: &[f64], h: f64, r: f64) -> f64 {
    let n = 300_000;
    let dx = side / n as f64;
    let mut integral = 0.0;
    for i in 0..n {
        let x = (i as f64 + 0.5) * dx;
        let e: f64 = minus
            .iter()
            .map(|y| {
                let d = (x - y).abs();
                let d = d.min(side - d);
                if d <= r {
                    h
                } else {
                    0.0
                }
            })
            .sum();
        integral += (-e).exp() * dx;
    }
    -m * plus.len() as f64 + z * integral
}

#[test]
fn generator_matches_small_time_increment() {
    let (m, z, side, hgt, r) = (1.0, 2.0, 3.0, 1.2, 0.5);
    let plus = [0.4];
    let minus = [1.0, 2.3];
    let sbox = SimBox::new(Dim::One, side).unwrap();
    let init = Configuration2State::new(
        sbox,
        r,
        plus.iter().map(|&x| Point::new1(x)).collect(),
        minus.iter().map(|&x| Point::new1(x)).collect(),
    )
    .unwrap();
    let dt = 2e-3;
    let p = params(m, z, PairPotential::top_hat(Dim::One, hgt, r).unwrap(), dt, dt);
    let reps = run_replicas(400_000, 8, 17, 0, |_, rng| {
        let c = run_counts(&init, &p, rng)?;
        Ok((c[1].plus as f64 - plus.len() as f64) / dt)
    })
    .unwrap();
    let (mean, se) = mean_stderr(&reps);
    let want = generator_oracle(m, z, side, &plus, &minus, hgt, r);
    assert!((mean - want).abs() <= 3.0 * se, "{mean} ± {se} vs {want}");
}

#[test]
fn snapshots_and_log_are_consistent() {
    let sbox = SimBox::new(Dim::Two, 4.0).unwrap();
    let phi = PairPotential::gaussian_with_cutoff(Dim::Two, 1.0, 0.3, 1.0).unwrap();
    let mut rng = wrk_core::rng::rng_from_seed(9);
    let st = sample_poisson_initial(&Intensity::Constant(1.0), &Intensity::Constant(1.0), sbox, 1.0, &mut rng).unwrap();
    let p = params(1.0, 2.0, phi, 1.0, 0.1);
    let (log, snaps) = run_with_rng(&st, &p, &mut rng).unwrap();
    assert_eq!(snaps.len(), 11);
    for w in log.records.windows(2) {
        assert!(w[1].t > w[0].t);
    }
    let dens = empirical_density(&snaps, sbox, 4).unwrap();
    for ((_, d), s) in dens.iter().zip(&snaps) {
        let total: f64 = d.plus().iter().sum::<f64>() * 1.0;
        assert!((total - s.plus.len() as f64).abs() < 1e-9);
    }
}

#[test]
fn lp_experiment_without_births_is_noise_around_decay() {
    let phi = top_hat();
    let m = 1.0;
    let reference = homogeneous_reduce(1.0, 1.0, m, 0.0, 1.0, 1.0, 0.05).unwrap();
    let exp = LpExperiment {
        eps: vec![1.0, 0.5],
        replicas: 300,
        m,
        z: 0.0,
        phi,
        macro_side: 10.0,
        rho0_plus: 1.0,
        rho0_minus: 1.0,
        t_end: 1.0,
        snapshot_dt: 0.25,
        seed: 4,
        threads: 2,
    };
    let rows = lp_convergence_experiment(&exp, &reference).unwrap();
    for row in &rows {
        assert!(row.sup_error <= 4.0 * row.stderr.max(1e-12) + 1e-12, "{row:?}");
    }
    let mut bad_ref = reference.clone();
    bad_ref.times.iter_mut().for_each(|t| *t += 0.01);
    assert!(lp_convergence_experiment(&exp, &bad_ref).is_err());
}
