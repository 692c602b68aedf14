//! One function per command. Each returns the files to write; nothing here
//! touches the filesystem.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde_json::json;
use wrk_core::equilibria::{bifurcation_scan, phase_portrait, EquilibriumReport};
use wrk_core::gf_algebra::{
    hat_l_on_exponential, k_inverse, k_transform, lp_exponential1, meanlp_check, verify_equation8,
    FiniteConfiguration2, QuadGrid, Quadrature, TestFunctionPair,
};
use wrk_core::kinetics::{homogeneous_reduce, solve, DensityField2, KineticRun, TorusGrid};
use wrk_core::microsim::{
    empirical_density, lp_convergence_experiment, run_with_rng, sample_poisson_initial, Intensity, LpExperiment,
    SimBox, SimParams,
};
use wrk_core::rng::{replica_rng, SimRng};
use wrk_core::{Dim, PairPotential, Point};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::plot::{emit_plot, PlotStyle, Series, SeriesBundle};

/// Named file contents, in emission order.
#[derive(Debug, Default)]
pub struct Output {
    pub files: Vec<(String, Vec<u8>)>,
    /// Set when the run completed but a checked quantity missed its threshold.
    pub failure: Option<String>,
}

impl Output {
    fn add(&mut self, name: impl Into<String>, data: impl Into<Vec<u8>>) {
        self.files.push((name.into(), data.into()));
    }

    fn add_json(&mut self, name: &str, v: &impl serde::Serialize) {
        let mut s = serde_json::to_string_pretty(v).expect("serializable output");
        s.push('\n');
        self.add(name, s);
    }
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Numerical(format!("csv encoding: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Numerical(format!("csv encoding: {e}")))
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn plot(bundle: &SeriesBundle, style: PlotStyle) -> Result<String, CliError> {
    emit_plot(bundle, style).map_err(|e| CliError::Numerical(e.to_string()))
}

/// Conventions recorded in the manifest for each command.
pub fn conventions(cmd: Command) -> Vec<String> {
    let mut c = vec!["a = z·β/m".to_string()];
    match cmd {
        Command::Equilibria | Command::PhasePortrait | Command::BifurcationScan => {
            c.push(
                "the reference figures are reproduced with m = 1, β = 1, z = a; m and β are not given with them".into(),
            );
            c.push("densities are x/β for the roots x of x = a·exp(−a·exp(−x))".into());
        }
        Command::SolveKinetic => {
            c.push("trajectory.csv columns plus_i/minus_i are grid nodes i, row-major, node i at i·L/n".into())
        }
        Command::Simulate => {
            c.push("the simulation box has side box_side/ε with the scaled potential ε^d·φ(ε·)".into());
            c.push("density.csv bins are row-major over the box, values are counts per unit volume".into());
        }
        Command::LpConverge => {
            c.push("each ε uses replica streams replica_rng(seed, index of ε, replica)".into());
            c.push("the kinetic reference is the space-homogeneous system with β from model.beta or ∫φ".into());
        }
        Command::VerifyIdentities => c.push("instances are drawn from ChaCha8 seeded with simulation.seed".into()),
    }
    c
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.validate(cmd)?;
    match cmd {
        Command::Equilibria => equilibria(cfg),
        Command::PhasePortrait => portrait(cfg),
        Command::BifurcationScan => bifurcation(cfg),
        Command::SolveKinetic => solve_kinetic(cfg),
        Command::Simulate => simulate(cfg),
        Command::LpConverge => lp_converge(cfg),
        Command::VerifyIdentities => identities(cfg),
    }
}

/// `(a, m, β)` for the homogeneous commands.
fn homogeneous_params(cfg: &RunConfig) -> Result<(f64, f64, f64), CliError> {
    let m = cfg.model.m;
    let beta = cfg.beta()?;
    let a = cfg.equilibria.a.unwrap_or(cfg.model.z * beta / m);
    Ok((a, m, beta))
}

fn equilibria(cfg: &RunConfig) -> Result<Output, CliError> {
    let (a, m, beta) = homogeneous_params(cfg)?;
    let report = EquilibriumReport::new(m, a * m / beta, beta)?;
    let mut out = Output::default();
    out.add_json("report.json", &json!({ "labels": report.labels(), "report": report }));
    Ok(out)
}

fn portrait(cfg: &RunConfig) -> Result<Output, CliError> {
    let (a, m, beta) = homogeneous_params(cfg)?;
    let ics: Vec<(f64, f64)> = cfg.equilibria.initial_conditions.iter().map(|ic| (ic[0], ic[1])).collect();
    let p = phase_portrait(a, m, beta, &ics, cfg.time.t_end, cfg.time.dt, cfg.equilibria.stride)?;
    let mut out = Output::default();
    let width = format!("{}", ics.len().saturating_sub(1)).len().max(2);
    let mut series = vec![];
    let mut summary = vec![];
    for (i, t) in p.trajectories.iter().enumerate() {
        let tr = &t.trajectory;
        let rows = (0..tr.times.len()).map(|k| vec![f(tr.times[k]), f(tr.plus[k]), f(tr.minus[k])]);
        out.add(format!("trajectory_{i:0width$}.csv"), csv_bytes(&header(&["t", "rho_plus", "rho_minus"]), rows)?);
        series.push(Series {
            label: format!("({}, {})", t.initial.0, t.initial.1),
            points: tr.plus.iter().copied().zip(tr.minus.iter().copied()).collect(),
        });
        summary.push(json!({
            "index": i,
            "initial": t.initial,
            "terminal": t.terminal,
            "nearest": t.nearest,
            "distance": t.distance,
            "drift": t.drift,
        }));
    }
    let bundle =
        SeriesBundle {
            title: format!("phase plane, a = {a}"), x_label: "ρ⁺".into(), y_label: "ρ⁻".into(), series
        };
    out.add("phase_plane.svg", plot(&bundle, PlotStyle::PhasePlane)?);
    out.add_json(
        "portrait.json",
        &json!({ "report": p.report, "labels": p.report.labels(), "t_end": p.t_end, "dt": p.dt, "trajectories": summary }),
    );
    Ok(out)
}

fn bifurcation(cfg: &RunConfig) -> Result<Output, CliError> {
    let s = &cfg.scan;
    let rows = bifurcation_scan(s.a_min, s.a_max, s.steps, cfg.model.m)?;
    let body = rows.iter().map(|r| {
        let mut xs = vec![String::new(); 3];
        let mut cs = vec![String::new(); 3];
        if r.roots.len() == 1 {
            xs[1] = f(r.roots[0].x);
            cs[1] = r.roots[0].class.as_str().to_string();
        } else {
            for (k, root) in r.roots.iter().enumerate().take(3) {
                xs[k] = f(root.x);
                cs[k] = root.class.as_str().to_string();
            }
        }
        let mut row = vec![f(r.a)];
        row.extend(xs);
        row.extend(cs);
        row
    });
    let mut out = Output::default();
    out.add("bifurcation.csv", csv_bytes(&header(&["a", "x1", "x2", "x3", "class1", "class2", "class3"]), body)?);
    Ok(out)
}

fn solve_kinetic(cfg: &RunConfig) -> Result<Output, CliError> {
    let phi = cfg.potential()?;
    let k = &cfg.kinetic;
    let grid = TorusGrid::new(phi.dim(), cfg.grid.n, cfg.grid.side)?;
    let kernel = phi.periodize(cfg.grid.side, cfg.grid.n)?;
    let (amp, mode, side) = (k.perturbation.amplitude, k.perturbation.mode as f64, cfg.grid.side);
    let wave = move |x: Point| (2.0 * PI * mode * x.coord(0) / side).cos();
    let rho0 = DensityField2::from_fns(
        grid,
        |x| k.rho0_plus * (1.0 + amp * wave(x)),
        |x| k.rho0_minus * (1.0 - amp * wave(x)),
    )?;
    let mut run = KineticRun::new(cfg.model.m, cfg.model.z, kernel, cfg.time.t_end, cfg.time.dt);
    run.method = k.method;
    run.convolution = k.convolution;
    run.tol = k.tol;
    run.max_iter = k.max_iter;
    run.store_every = k.store_every;
    let traj = solve(&rho0, &run)?;

    let n = grid.len();
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("plus_{i}")));
    cols.extend((0..n).map(|i| format!("minus_{i}")));
    let rows = traj.times.iter().zip(&traj.states).map(|(&t, s)| {
        let mut r = Vec::with_capacity(2 * n + 1);
        r.push(f(t));
        r.extend(s.plus().iter().map(|&v| f(v)));
        r.extend(s.minus().iter().map(|&v| f(v)));
        r
    });
    let mut out = Output::default();
    out.add("trajectory.csv", csv_bytes(&cols, rows)?);
    let bound = run.bound(rho0.sup_norm());
    let max_norm = traj.states.iter().map(|s| s.sup_norm()).fold(0.0, f64::max);
    out.add_json(
        "summary.json",
        &json!({
            "grid": grid,
            "kernel_mass": run.kernel.mass(),
            "bound": bound,
            "max_sup_norm": max_norm,
            "bound_violation": (max_norm - bound).max(0.0),
            "picard": traj.picard.as_ref().map(|p| json!({
                "tau": p.tau,
                "contraction_bound": p.contraction_bound,
                "max_observed_contraction": p.max_observed_contraction(),
                "subintervals": p.subintervals,
            })),
            "summary": traj.summary(),
        }),
    );
    let series = vec![
        Series {
            label: "max ρ⁺".into(),
            points: traj.times.iter().zip(&traj.states).map(|(&t, s)| (t, max(s.plus()))).collect(),
        },
        Series {
            label: "max ρ⁻".into(),
            points: traj.times.iter().zip(&traj.states).map(|(&t, s)| (t, max(s.minus()))).collect(),
        },
    ];
    let bundle =
        SeriesBundle { title: "kinetic solution".into(), x_label: "t".into(), y_label: "density".into(), series };
    out.add("sup_norm.svg", plot(&bundle, PlotStyle::TimeSeries)?);
    Ok(out)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let s = &cfg.simulation;
    let phi = cfg.potential()?;
    let eps = s.eps.first().copied().unwrap_or(1.0);
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(CliError::Schema { path: "simulation.eps[0]".into(), message: "must lie in (0, 1]".into() });
    }
    let sbox = SimBox::new(phi.dim(), s.box_side / eps)?;
    let params = SimParams {
        m: cfg.model.m,
        z: cfg.model.z,
        phi,
        t_end: cfg.time.t_end,
        seed: s.seed,
        snapshot_dt: s.snapshot_dt,
        eps,
    };
    let cutoff = params.validate(&sbox)?.support_radius();
    let mut rng: SimRng = replica_rng(s.seed, 0, 0);
    let init = sample_poisson_initial(
        &Intensity::Constant(s.rho0_plus),
        &Intensity::Constant(s.rho0_minus),
        sbox,
        cutoff,
        &mut rng,
    )?;
    let (log, snaps) = run_with_rng(&init, &params, &mut rng)?;
    let dens = empirical_density(&snaps, sbox, s.bins)?;

    let mut out = Output::default();
    out.add("events.ndjson", log.to_ndjson());
    let rows = dens.iter().flat_map(|(t, d)| {
        (0..d.plus().len()).map(move |i| vec![f(*t), i.to_string(), f(d.plus()[i]), f(d.minus()[i])])
    });
    out.add("density.csv", csv_bytes(&header(&["t", "bin_index", "rho_plus", "rho_minus"]), rows)?);
    let rows = snaps.iter().map(|sn| vec![f(sn.t), sn.plus.len().to_string(), sn.minus.len().to_string()]);
    out.add("counts.csv", csv_bytes(&header(&["t", "plus", "minus"]), rows)?);
    Ok(out)
}

fn lp_converge(cfg: &RunConfig) -> Result<Output, CliError> {
    let s = &cfg.simulation;
    let phi = cfg.potential()?;
    let beta = cfg.beta()?;
    let (m, z) = (cfg.model.m, cfg.model.z);
    let reference = homogeneous_reduce(s.rho0_plus, s.rho0_minus, m, z, beta, cfg.time.t_end, cfg.time.dt)?;
    let exp = LpExperiment {
        eps: s.eps.clone(),
        replicas: s.replicas,
        m,
        z,
        phi,
        macro_side: s.box_side,
        rho0_plus: s.rho0_plus,
        rho0_minus: s.rho0_minus,
        t_end: cfg.time.t_end,
        snapshot_dt: s.snapshot_dt,
        seed: s.seed,
        threads: s.threads,
    };
    let rows = lp_convergence_experiment(&exp, &reference)?;
    let kin_at = |t: f64| {
        let i = reference
            .times
            .iter()
            .position(|&r| (r - t).abs() <= 1e-9 * t.max(1.0))
            .expect("experiment checked reference times");
        (reference.plus[i], reference.minus[i])
    };
    let mut out = Output::default();
    let body = rows.iter().map(|r| vec![f(r.eps), f(r.sup_error), f(r.stderr), f(r.t_at_sup)]);
    out.add("lp_convergence.csv", csv_bytes(&header(&["eps", "sup_error", "stderr", "t_at_sup"]), body)?);
    let body = rows.iter().flat_map(|r| {
        (0..r.times.len()).map(move |k| {
            let (kp, km) = kin_at(r.times[k]);
            vec![f(r.eps), f(r.times[k]), f(r.mean_plus[k]), f(r.mean_minus[k]), f(kp), f(km)]
        })
    });
    out.add(
        "lp_densities.csv",
        csv_bytes(&header(&["eps", "t", "mean_plus", "mean_minus", "kinetic_plus", "kinetic_minus"]), body)?,
    );
    let mut series: Vec<Series> = rows
        .iter()
        .map(|r| Series {
            label: format!("ρ⁺, ε = {}", r.eps),
            points: r.times.iter().copied().zip(r.mean_plus.iter().copied()).collect(),
        })
        .collect();
    series.push(Series {
        label: "kinetic ρ⁺".into(),
        points: reference.times.iter().copied().zip(reference.plus.iter().copied()).collect(),
    });
    let bundle = SeriesBundle {
        title: "mean density vs kinetic limit".into(),
        x_label: "t".into(),
        y_label: "density".into(),
        series,
    };
    out.add("lp_density.svg", plot(&bundle, PlotStyle::TimeSeries)?);
    Ok(out)
}

fn random_points(rng: &mut SimRng, n: usize, dim: Dim, lo: f64, hi: f64) -> Vec<Point> {
    (0..n)
        .map(|_| match dim {
            Dim::One => Point::new1(rng.random_range(lo..hi)),
            Dim::Two => Point::new2(rng.random_range(lo..hi), rng.random_range(lo..hi)),
        })
        .collect()
}

fn random_config(rng: &mut SimRng, max: usize, dim: Dim) -> Result<FiniteConfiguration2, CliError> {
    let total = rng.random_range(0..=max);
    let np = rng.random_range(0..=total);
    let plus = random_points(rng, np, dim, -2.0, 2.0);
    let minus = random_points(rng, total - np, dim, -2.0, 2.0);
    Ok(FiniteConfiguration2::new(plus, minus)?)
}

fn random_potential(rng: &mut SimRng, dim: Dim) -> Result<PairPotential, CliError> {
    Ok(match rng.random_range(0..3) {
        0 => PairPotential::top_hat(dim, rng.random_range(0.0..2.0), rng.random_range(0.2..1.5))?,
        1 => PairPotential::gaussian(dim, rng.random_range(0.0..2.0), rng.random_range(0.2..0.8))?,
        _ => PairPotential::exponential(dim, rng.random_range(0.0..2.0), rng.random_range(0.5..3.0), 2.0)?,
    })
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// `L̂ e_λ(θ)` by inclusion–exclusion over `L K e_λ(θ)`.
fn hat_l_by_subsets(
    theta: &TestFunctionPair,
    eta: &FiniteConfiguration2,
    m: f64,
    z: f64,
    phi: &PairPotential,
) -> Result<Complex64, CliError> {
    let kexp = |p: &[Point], q: &[Point]| -> Complex64 {
        p.iter().map(|x| 1.0 + theta.plus_at(*x)).product::<Complex64>()
            * q.iter().map(|y| 1.0 + theta.minus_at(*y)).product::<Complex64>()
    };
    let generator = |p: &[Point], q: &[Point]| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..p.len() {
            let mut rest = p.to_vec();
            rest.remove(i);
            acc -= m * theta.plus_at(p[i]) * kexp(&rest, q);
        }
        for j in 0..q.len() {
            let mut rest = q.to_vec();
            rest.remove(j);
            acc -= m * theta.minus_at(q[j]) * kexp(p, &rest);
        }
        let base = kexp(p, q);
        let g = &theta.grid;
        for i in 0..g.len() {
            let x = g.node(i);
            let em: f64 = q.iter().map(|y| phi.evaluate(x - *y)).sum();
            let ep: f64 = p.iter().map(|y| phi.evaluate(x - *y)).sum();
            acc += z * g.weight(i) * (theta.plus[i] * (-em).exp() + theta.minus[i] * (-ep).exp()) * base;
        }
        acc
    };
    Ok(k_inverse(generator, eta)?)
}

fn identities(cfg: &RunConfig) -> Result<Output, CliError> {
    let n = cfg.identities.instances;
    let max_pts = cfg.identities.max_points;
    let seed = cfg.simulation.seed;
    let mut rng = replica_rng(seed, 0, 0);

    let mut product: f64 = 0.0;
    for _ in 0..n {
        let gamma = random_config(&mut rng, max_pts, Dim::One)?;
        let (a, b, k) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.5..3.0));
        let fp = move |x: Point| Complex64::new(a * (k * x.coord(0)).cos(), 0.3 * b);
        let fm = move |x: Point| Complex64::new(b - 0.2 * x.coord(0), a * x.coord(0).sin());
        let lhs = k_transform(|p, q| lp_exponential1(fp, p) * lp_exponential1(fm, q), &gamma)?;
        let rhs: Complex64 = gamma.plus.iter().map(|x| 1.0 + fp(*x)).product::<Complex64>()
            * gamma.minus.iter().map(|y| 1.0 + fm(*y)).product::<Complex64>();
        product = product.max(rel(lhs, rhs));
    }

    let mut round_trip: f64 = 0.0;
    let mut rng = replica_rng(seed, 1, 0);
    for _ in 0..n {
        let gamma = random_config(&mut rng, max_pts, Dim::One)?;
        let s = rng.random_range(0.5..4.0);
        let g = move |a: &[Point], b: &[Point]| {
            let sp: f64 = a.iter().map(|p| (s * p.coord(0) + 0.3).sin()).sum();
            let sm: f64 = b.iter().map(|p| (s * p.coord(0) - 1.1).cos()).sum();
            Complex64::new(sp - 0.5 * sm + a.len() as f64, sp * sm + 0.25 * b.len() as f64)
        };
        let sub = |p: &[Point], q: &[Point]| FiniteConfiguration2 { plus: p.to_vec(), minus: q.to_vec() };
        let direct = g(&gamma.plus, &gamma.minus);
        let a = k_transform(|p, q| k_inverse(g, &sub(p, q)).unwrap_or_default(), &gamma)?;
        let b = k_inverse(|p, q| k_transform(g, &sub(p, q)).unwrap_or_default(), &gamma)?;
        round_trip = round_trip.max(rel(a, direct)).max(rel(b, direct));
    }

    let mut eq8: f64 = 0.0;
    let mut rng = replica_rng(seed, 2, 0);
    for i in 0..n {
        let dim = if i % 2 == 0 { Dim::One } else { Dim::Two };
        let k = rng.random_range(0..=max_pts);
        let eta = random_points(&mut rng, k, dim, -1.5, 1.5);
        let x = random_points(&mut rng, 1, dim, -1.0, 1.0)[0];
        let phi = random_potential(&mut rng, dim)?;
        let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let theta = move |y: Point| Complex64::new(a * y.coord(0).cos(), b * y.norm());
        eq8 = eq8.max(verify_equation8(theta, x, &eta, &phi)?);
    }

    let mut hat_l: f64 = 0.0;
    let mut rng = replica_rng(seed, 3, 0);
    let hat_cases = n.min(40);
    for i in 0..hat_cases {
        let (dim, q) = if i % 4 == 3 { (Dim::Two, 25) } else { (Dim::One, 161) };
        let grid = QuadGrid::new(dim, q, -4.0, 8.0, Quadrature::Trapezoid)?;
        let phi = PairPotential::top_hat(dim, rng.random_range(0.1..1.5), rng.random_range(0.3..1.0))?;
        let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let bump = move |x: Point, s: f64| {
            let r2 = x.coords().iter().map(|c| c * c).sum::<f64>();
            if r2 < 4.0 {
                s * (1.0 - r2 / 4.0).powi(2)
            } else {
                0.0
            }
        };
        let theta = TestFunctionPair::from_fns(
            grid,
            move |x| Complex64::new(bump(x, a), 0.2 * bump(x, 1.0)),
            move |x| Complex64::new(bump(x, b), -0.1 * x.coord(0) * bump(x, 1.0)),
        );
        let total = rng.random_range(0..=4usize.min(max_pts));
        let np = rng.random_range(0..=total);
        let eta = FiniteConfiguration2::new(
            random_points(&mut rng, np, dim, -1.8, 1.8),
            random_points(&mut rng, total - np, dim, -1.8, 1.8),
        )?;
        let (m, z) = (rng.random_range(0.2..2.0), rng.random_range(0.0..3.0));
        let closed = hat_l_on_exponential(&theta, &eta, m, z, &phi)?;
        let oracle = hat_l_by_subsets(&theta, &eta, m, z, &phi)?;
        hat_l = hat_l.max(rel(closed, oracle));
    }

    let grid = QuadGrid::new(Dim::One, 201, 0.0, 2.0, Quadrature::Trapezoid)?;
    let unit =
        TestFunctionPair::from_fns(grid, |_| Complex64::new(0.5, 0.0), |x| Complex64::new(-0.1 * x.coord(0), 0.0));
    let meanlp = meanlp_check(&unit, 1.0, 2.0, 30);

    let checks = [
        ("product_formula", product, 1e-12),
        ("k_round_trip", round_trip, 1e-12),
        ("subset_sum_identity", eq8, 1e-12),
        ("hat_l_subset_sum", hat_l, 1e-10),
        ("mean_lp_series", meanlp, 1e-12),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| c.1.is_nan() || c.1 > c.2).map(|c| c.0).collect();
    let mut out = Output::default();
    out.add_json(
        "identities.json",
        &json!({
            "instances": n,
            "hat_l_instances": hat_cases,
            "max_points": max_pts,
            "seed": seed,
            "checks": checks.iter().map(|(name, r, tol)| json!({
                "name": name, "max_residual": r, "tolerance": tol, "pass": r <= tol
            })).collect::<Vec<_>>(),
        }),
    );
    if !failed.is_empty() {
        out.failure = Some(format!("identity residuals above tolerance: {}", failed.join(", ")));
    }
    Ok(out)
}
