//! Calculus on finite two-type configurations.
//!
//! Functions on `Γ₀²` are plain closures `G(η⁺, η⁻)`; subsets are enumerated
//! by bitmask, so every operation here is exponential in the configuration
//! size and guarded by [`DEFAULT_MAX_POINTS`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Dim, Point};
use crate::potential::PairPotential;

/// Largest configuration accepted by the subset-sum routines (2¹² terms).
pub const DEFAULT_MAX_POINTS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GfError {
    #[error("configuration has {size} points, above the limit of {limit}")]
    SizeLimit { size: usize, limit: usize },
    #[error("duplicate point {0:?} in configuration")]
    Duplicate(Vec<f64>),
    #[error("point {0:?} appears in both species")]
    NotDisjoint(Vec<f64>),
    #[error("mixed or non-finite point coordinates")]
    BadPoint,
    #[error("quadrature box too small: θ is nonzero within {margin} of the boundary (need ≥ {needed})")]
    BoxTooSmall { margin: f64, needed: f64 },
    #[error("invalid quadrature grid: {0}")]
    BadGrid(String),
    #[error("malformed fixture: {0}")]
    Fixture(String),
}

/// A finite pair `(η⁺, η⁻)` of disjoint point sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteConfiguration2 {
    pub plus: Vec<Point>,
    pub minus: Vec<Point>,
}

impl FiniteConfiguration2 {
    pub fn empty() -> Self {
        FiniteConfiguration2 { plus: Vec::new(), minus: Vec::new() }
    }

    pub fn new(plus: Vec<Point>, minus: Vec<Point>) -> Result<Self, GfError> {
        Self::with_limit(plus, minus, DEFAULT_MAX_POINTS)
    }

    pub fn with_limit(plus: Vec<Point>, minus: Vec<Point>, limit: usize) -> Result<Self, GfError> {
        let c = FiniteConfiguration2 { plus, minus };
        c.validate(limit)?;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, limit: usize) -> Result<(), GfError> {
        if self.len() > limit {
            return Err(GfError::SizeLimit { size: self.len(), limit });
        }
        let all: Vec<&Point> = self.plus.iter().chain(&self.minus).collect();
        if let Some(first) = all.first() {
            if all.iter().any(|p| p.dim() != first.dim() || !p.is_finite()) {
                return Err(GfError::BadPoint);
            }
        }
        for set in [&self.plus, &self.minus] {
            for (i, p) in set.iter().enumerate() {
                if set[..i].contains(p) {
                    return Err(GfError::Duplicate(p.coords().to_vec()));
                }
            }
        }
        if let Some(p) = self.plus.iter().find(|p| self.minus.contains(p)) {
            return Err(GfError::NotDisjoint(p.coords().to_vec()));
        }
        Ok(())
    }

    /// Parses a JSON fixture `{"plus": [[x], ...], "minus": [...]}` and validates it.
    pub fn from_json_str(s: &str) -> Result<Self, GfError> {
        let c: FiniteConfiguration2 = serde_json::from_str(s).map_err(|e| GfError::Fixture(e.to_string()))?;
        c.validate(DEFAULT_MAX_POINTS)?;
        Ok(c)
    }
}

fn subset(points: &[Point], mask: usize) -> Vec<Point> {
    points.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| *p).collect()
}

fn check_size(n: usize) -> Result<(), GfError> {
    if n > DEFAULT_MAX_POINTS {
        Err(GfError::SizeLimit { size: n, limit: DEFAULT_MAX_POINTS })
    } else {
        Ok(())
    }
}

/// `e_λ(f⁺, f⁻; η) = ∏_{x∈η⁺} f⁺(x) ∏_{y∈η⁻} f⁻(y)`; the empty product is 1.
pub fn lp_exponential<F, G>(f_plus: F, f_minus: G, eta: &FiniteConfiguration2) -> Complex64
where
    F: Fn(Point) -> Complex64,
    G: Fn(Point) -> Complex64,
{
    lp_exponential1(f_plus, &eta.plus) * lp_exponential1(f_minus, &eta.minus)
}

/// One-species Lebesgue–Poisson exponential.
pub fn lp_exponential1<F: Fn(Point) -> Complex64>(f: F, eta: &[Point]) -> Complex64 {
    eta.iter().fold(Complex64::new(1.0, 0.0), |acc, &x| acc * f(x))
}

/// `(KG)(γ) = Σ_{η⁺⊆γ⁺} Σ_{η⁻⊆γ⁻} G(η⁺, η⁻)`.
pub fn k_transform<G>(g: G, gamma: &FiniteConfiguration2) -> Result<Complex64, GfError>
where
    G: Fn(&[Point], &[Point]) -> Complex64,
{
    check_size(gamma.len())?;
    let mut acc = Complex64::new(0.0, 0.0);
    for mp in 0..1usize << gamma.plus.len() {
        let ep = subset(&gamma.plus, mp);
        for mm in 0..1usize << gamma.minus.len() {
            acc += g(&ep, &subset(&gamma.minus, mm));
        }
    }
    Ok(acc)
}

/// `(K⁻¹F)(η) = Σ_{ξ⊆η} (−1)^{|η⁺∖ξ⁺|+|η⁻∖ξ⁻|} F(ξ⁺, ξ⁻)`.
pub fn k_inverse<F>(f: F, eta: &FiniteConfiguration2) -> Result<Complex64, GfError>
where
    F: Fn(&[Point], &[Point]) -> Complex64,
{
    check_size(eta.len())?;
    let (np, nm) = (eta.plus.len(), eta.minus.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for mp in 0..1usize << np {
        let xp = subset(&eta.plus, mp);
        for mm in 0..1usize << nm {
            let removed = (np - mp.count_ones() as usize) + (nm - mm.count_ones() as usize);
            let v = f(&xp, &subset(&eta.minus, mm));
            if removed.is_multiple_of(2) {
                acc += v;
            } else {
                acc -= v;
            }
        }
    }
    Ok(acc)
}

/// `E(x, γ) = Σ_{y∈γ} φ(x − y)`.
pub fn relative_energy(x: Point, gamma: &[Point], phi: &PairPotential) -> f64 {
    gamma.iter().map(|&y| phi.evaluate(x - y)).sum()
}

/// Residual `|LHS − RHS|` of the subset-sum identity
/// `Σ_{ξ⊆η} e_λ(θ, ξ) e^{−E(x,ξ)} e_λ(e^{−φ(x−·)} − 1, η∖ξ) = e_λ(θ e^{−φ(x−·)} + e^{−φ(x−·)} − 1, η)`.
pub fn verify_equation8<T>(theta: T, x: Point, eta: &[Point], phi: &PairPotential) -> Result<f64, GfError>
where
    T: Fn(Point) -> Complex64,
{
    check_size(eta.len())?;
    let n = eta.len();
    let mut lhs = Complex64::new(0.0, 0.0);
    for mask in 0..1usize << n {
        let xi = subset(eta, mask);
        let rest = subset(eta, !mask & ((1 << n) - 1));
        let w = (-relative_energy(x, &xi, phi)).exp();
        let left = lp_exponential1(&theta, &xi) * w;
        let right = lp_exponential1(|y| Complex64::new((-phi.evaluate(x - y)).exp_m1(), 0.0), &rest);
        lhs += left * right;
    }
    let rhs = lp_exponential1(
        |y| {
            let e = (-phi.evaluate(x - y)).exp();
            theta(y) * e + (e - 1.0)
        },
        eta,
    );
    Ok((lhs - rhs).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Tensor trapezoid on a closed box; nodes include both endpoints.
    Trapezoid,
    /// Uniform weights on a torus; nodes exclude the right endpoint.
    Periodic,
}

/// Tensor grid on `[origin, origin + extent]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadGrid {
    pub dim: Dim,
    pub n: usize,
    pub origin: f64,
    pub extent: f64,
    pub rule: Quadrature,
}

impl QuadGrid {
    pub fn new(dim: Dim, n: usize, origin: f64, extent: f64, rule: Quadrature) -> Result<Self, GfError> {
        let min_n = if rule == Quadrature::Trapezoid { 2 } else { 1 };
        if n < min_n {
            return Err(GfError::BadGrid(format!("need at least {min_n} nodes per side")));
        }
        if !(extent.is_finite() && extent > 0.0 && origin.is_finite()) {
            return Err(GfError::BadGrid("box extent must be finite and positive".into()));
        }
        Ok(QuadGrid { dim, n, origin, extent, rule })
    }

    pub fn spacing(&self) -> f64 {
        match self.rule {
            Quadrature::Trapezoid => self.extent / (self.n - 1) as f64,
            Quadrature::Periodic => self.extent / self.n as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim.get() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn split(&self, idx: usize) -> (usize, usize) {
        match self.dim {
            Dim::One => (idx, 0),
            Dim::Two => (idx / self.n, idx % self.n),
        }
    }

    pub fn node(&self, idx: usize) -> Point {
        let h = self.spacing();
        let (i, j) = self.split(idx);
        match self.dim {
            Dim::One => Point::new1(self.origin + i as f64 * h),
            Dim::Two => Point::new2(self.origin + i as f64 * h, self.origin + j as f64 * h),
        }
    }

    pub fn weight(&self, idx: usize) -> f64 {
        let h = self.spacing();
        let w1 = |i: usize| match self.rule {
            Quadrature::Periodic => h,
            Quadrature::Trapezoid if i == 0 || i == self.n - 1 => 0.5 * h,
            Quadrature::Trapezoid => h,
        };
        let (i, j) = self.split(idx);
        match self.dim {
            Dim::One => w1(i),
            Dim::Two => w1(i) * w1(j),
        }
    }

    /// Distance from node `idx` to the box boundary (infinite on a torus).
    fn boundary_margin(&self, idx: usize) -> f64 {
        if self.rule == Quadrature::Periodic {
            return f64::INFINITY;
        }
        let p = self.node(idx);
        p.coords().iter().map(|&c| (c - self.origin).min(self.origin + self.extent - c)).fold(f64::INFINITY, f64::min)
    }
}

/// Grid samples of `(θ⁺, θ⁻)`. Off-grid values come from multilinear
/// interpolation (periodic wrap on a torus, zero outside a closed box), so the
/// quadrature sums are exact integrals of the interpolants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionPair {
    pub grid: QuadGrid,
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
}

impl TestFunctionPair {
    pub fn new(grid: QuadGrid, plus: Vec<Complex64>, minus: Vec<Complex64>) -> Result<Self, GfError> {
        if plus.len() != grid.len() || minus.len() != grid.len() {
            return Err(GfError::BadGrid("sample count does not match grid".into()));
        }
        if plus.iter().chain(&minus).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(GfError::BadGrid("samples must be finite".into()));
        }
        Ok(TestFunctionPair { grid, plus, minus })
    }

    pub fn from_fns<F, G>(grid: QuadGrid, f_plus: F, f_minus: G) -> Self
    where
        F: Fn(Point) -> Complex64,
        G: Fn(Point) -> Complex64,
    {
        let plus = (0..grid.len()).map(|i| f_plus(grid.node(i))).collect();
        let minus = (0..grid.len()).map(|i| f_minus(grid.node(i))).collect();
        TestFunctionPair { grid, plus, minus }
    }

    pub fn zero(grid: QuadGrid) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        TestFunctionPair { grid, plus: z.clone(), minus: z }
    }

    /// Quadrature of `∫ w(x) s(x) dx` over the sample vector `s`.
    pub fn integrate(&self, samples: &[Complex64]) -> Complex64 {
        samples.iter().enumerate().map(|(i, v)| v * self.grid.weight(i)).sum()
    }

    /// `Σ_i w_i |θ⁺_i| + Σ_i w_i |θ⁻_i|`.
    pub fn l1_norm(&self) -> f64 {
        (0..self.grid.len()).map(|i| self.grid.weight(i) * (self.plus[i].norm() + self.minus[i].norm())).sum()
    }

    fn interp(&self, samples: &[Complex64], x: Point) -> Complex64 {
        let g = &self.grid;
        let h = g.spacing();
        let mut idx = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for k in 0..g.dim.get() {
            let s = (x.coord(k) - g.origin) / h;
            match g.rule {
                Quadrature::Trapezoid => {
                    if !(0.0..=(g.n - 1) as f64).contains(&s) {
                        return Complex64::new(0.0, 0.0);
                    }
                    let i = (s.floor() as usize).min(g.n - 2);
                    idx[k] = i;
                    frac[k] = s - i as f64;
                }
                Quadrature::Periodic => {
                    let s = s.rem_euclid(g.n as f64);
                    let i = (s.floor() as usize).min(g.n - 1);
                    idx[k] = i;
                    frac[k] = s - i as f64;
                }
            }
        }
        let next = |i: usize| if g.rule == Quadrature::Periodic { (i + 1) % g.n } else { i + 1 };
        match g.dim {
            Dim::One => samples[idx[0]] * (1.0 - frac[0]) + samples[next(idx[0])] * frac[0],
            Dim::Two => {
                let at = |i: usize, j: usize| samples[i * g.n + j];
                let (i, j) = (idx[0], idx[1]);
                let (fx, fy) = (frac[0], frac[1]);
                at(i, j) * ((1.0 - fx) * (1.0 - fy))
                    + at(next(i), j) * (fx * (1.0 - fy))
                    + at(i, next(j)) * ((1.0 - fx) * fy)
                    + at(next(i), next(j)) * (fx * fy)
            }
        }
    }

    pub fn plus_at(&self, x: Point) -> Complex64 {
        self.interp(&self.plus, x)
    }

    pub fn minus_at(&self, x: Point) -> Complex64 {
        self.interp(&self.minus, x)
    }

    /// Checks that `supp θ±` enlarged by `r` fits inside the box.
    pub fn check_support(&self, r: f64) -> Result<(), GfError> {
        let mut margin = f64::INFINITY;
        for i in 0..self.grid.len() {
            if self.plus[i].norm() != 0.0 || self.minus[i].norm() != 0.0 {
                margin = margin.min(self.grid.boundary_margin(i));
            }
        }
        if margin < r {
            Err(GfError::BoxTooSmall { margin, needed: r })
        } else {
            Ok(())
        }
    }
}

/// Closed form of `L̂ e_λ(θ⁺, θ⁻)` at `η`:
///
/// `−m(|η⁺|+|η⁻|) e_λ(θ; η)
///  + z ∫dx θ⁺(x) e_λ(θ⁺, θ⁻e^{−φ(x−·)} + e^{−φ(x−·)} − 1; η)
///  + z ∫dy θ⁻(y) e_λ(θ⁺e^{−φ(y−·)} + e^{−φ(y−·)} − 1, θ⁻; η)`,
///
/// with the integrals taken by the quadrature of `theta`.
pub fn hat_l_on_exponential(
    theta: &TestFunctionPair,
    eta: &FiniteConfiguration2,
    m: f64,
    z: f64,
    phi: &PairPotential,
) -> Result<Complex64, GfError> {
    check_size(eta.len())?;
    theta.check_support(phi.support_radius())?;
    let tp = |x: Point| theta.plus_at(x);
    let tm = |x: Point| theta.minus_at(x);
    let e_plus = lp_exponential1(tp, &eta.plus);
    let e_minus = lp_exponential1(tm, &eta.minus);
    let death = -m * (eta.len() as f64) * e_plus * e_minus;

    let grid = &theta.grid;
    let mut birth_plus = Complex64::new(0.0, 0.0);
    let mut birth_minus = Complex64::new(0.0, 0.0);
    for i in 0..grid.len() {
        let x = grid.node(i);
        let w = grid.weight(i);
        let shifted = |other: &dyn Fn(Point) -> Complex64, pts: &[Point]| {
            lp_exponential1(
                |y| {
                    let e = (-phi.evaluate(x - y)).exp();
                    other(y) * e + (e - 1.0)
                },
                pts,
            )
        };
        if theta.plus[i].norm() != 0.0 {
            birth_plus += theta.plus[i] * w * e_plus * shifted(&tm, &eta.minus);
        }
        if theta.minus[i].norm() != 0.0 {
            birth_minus += theta.minus[i] * w * shifted(&tp, &eta.plus) * e_minus;
        }
    }
    Ok(death + z * (birth_plus + birth_minus))
}

/// Compares the truncated double series `Σ_{n,k≤N} I₊ⁿ I₋ᵏ / n! k!` with
/// `exp(I₊ + I₋)`, `I± = ρ± ∫ f±`. Returns `|series − exp|`.
pub fn meanlp_check(f: &TestFunctionPair, rho_plus: f64, rho_minus: f64, truncation: usize) -> f64 {
    let ip = f.integrate(&f.plus) * rho_plus;
    let im = f.integrate(&f.minus) * rho_minus;
    let partial = |v: Complex64| {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..=truncation {
            term *= v / n as f64;
            sum += term;
        }
        sum
    };
    (partial(ip) * partial(im) - (ip + im).exp()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_config(rng: &mut ChaCha8Rng, np: usize, nm: usize) -> FiniteConfiguration2 {
        let plus = (0..np).map(|_| Point::new1(rng.random_range(-2.0..2.0))).collect();
        let minus = (0..nm).map(|_| Point::new1(rng.random_range(-2.0..2.0))).collect();
        FiniteConfiguration2::new(plus, minus).unwrap()
    }

    #[test]
    fn lp_exponential_cases() {
        let e = FiniteConfiguration2::empty();
        assert_eq!(lp_exponential(|_| c(5.0), |_| c(7.0), &e), c(1.0));
        let eta =
            FiniteConfiguration2::new(vec![Point::new1(0.0), Point::new1(1.0), Point::new1(2.0)], vec![]).unwrap();
        assert_eq!(lp_exponential(|_| c(2.0), |_| c(-9.0), &eta), c(8.0));
    }

    #[test]
    fn lp_exponential_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let eta = random_config(&mut rng, 4, 3);
        let fp = |x: Point| Complex64::new(x.coord(0).sin(), x.coord(0));
        let fm = |x: Point| Complex64::new(1.0 + x.coord(0) * x.coord(0), -0.5);
        let mut prod = c(1.0);
        for p in &eta.plus {
            prod *= fp(*p);
        }
        for p in &eta.minus {
            prod *= fm(*p);
        }
        assert!((lp_exponential(fp, fm, &eta) - prod).norm() < 1e-14);
    }

    #[test]
    fn k_transform_of_empty_indicator_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ind = |a: &[Point], b: &[Point]| c(if a.is_empty() && b.is_empty() { 1.0 } else { 0.0 });
        for n in 0..5 {
            let g = random_config(&mut rng, n, 4 - n.min(4));
            assert_eq!(k_transform(ind, &g).unwrap(), c(1.0));
        }
        assert_eq!(k_inverse(|_, _| c(1.0), &FiniteConfiguration2::empty()).unwrap(), c(1.0));
        let g = random_config(&mut rng, 2, 1);
        assert_eq!(k_inverse(|_, _| c(1.0), &g).unwrap(), c(0.0));
    }

    #[test]
    fn k_inverse_single_point() {
        let eta = FiniteConfiguration2::new(vec![Point::new1(0.5)], vec![]).unwrap();
        let f = |a: &[Point], _: &[Point]| c(3.0 * a.len() as f64);
        assert_eq!(k_inverse(f, &eta).unwrap(), c(3.0));
    }

    #[test]
    fn size_limit_enforced() {
        let plus: Vec<Point> = (0..13).map(|i| Point::new1(i as f64)).collect();
        assert!(matches!(
            FiniteConfiguration2::new(plus.clone(), vec![]),
            Err(GfError::SizeLimit { size: 13, limit: 12 })
        ));
        let big = FiniteConfiguration2::with_limit(plus, vec![], 20).unwrap();
        assert!(k_transform(|_, _| c(1.0), &big).is_err());
    }

    #[test]
    fn configuration_validation() {
        let p = Point::new1(1.0);
        assert!(matches!(FiniteConfiguration2::new(vec![p, p], vec![]), Err(GfError::Duplicate(_))));
        assert!(matches!(FiniteConfiguration2::new(vec![p], vec![p]), Err(GfError::NotDisjoint(_))));
        assert!(matches!(FiniteConfiguration2::new(vec![p], vec![Point::new2(0.0, 0.0)]), Err(GfError::BadPoint)));
        let c = FiniteConfiguration2::from_json_str(r#"{"plus":[[0.5],[1.5]],"minus":[]}"#).unwrap();
        assert_eq!(c.plus.len(), 2);
        assert!(FiniteConfiguration2::from_json_str(r#"{"plus":[[0.5],[0.5]],"minus":[]}"#).is_err());
        assert!(FiniteConfiguration2::from_json_str(r#"{"plus":[],"minus":[],"x":1}"#).is_err());
    }

    #[test]
    fn relative_energy_basics() {
        let phi = PairPotential::top_hat(Dim::One, 1.5, 0.5).unwrap();
        let x = Point::new1(0.0);
        assert_eq!(relative_energy(x, &[], &phi), 0.0);
        assert_eq!(relative_energy(x, &[Point::new1(0.8)], &phi), 0.0);
        assert_eq!(relative_energy(x, &[Point::new1(0.2), Point::new1(-0.4), Point::new1(3.0)], &phi), 3.0);
    }

    #[test]
    fn subset_sum_identity_small_cases() {
        let phi = PairPotential::gaussian(Dim::One, 0.9, 0.6).unwrap();
        let theta = |y: Point| Complex64::new(y.coord(0).cos(), 0.3);
        let x = Point::new1(0.1);
        assert_eq!(verify_equation8(theta, x, &[], &phi).unwrap(), 0.0);
        assert!(verify_equation8(theta, x, &[Point::new1(0.4)], &phi).unwrap() <= 1e-14);
    }

    #[test]
    fn hat_l_trivial_cases() {
        let phi = PairPotential::top_hat(Dim::One, 1.0, 0.25).unwrap();
        let grid = QuadGrid::new(Dim::One, 81, -2.0, 4.0, Quadrature::Trapezoid).unwrap();
        let zero = TestFunctionPair::zero(grid);
        let empty = FiniteConfiguration2::empty();
        assert_eq!(hat_l_on_exponential(&zero, &empty, 1.0, 2.0, &phi).unwrap(), c(0.0));

        let bump = |x: Point| {
            let r = x.coord(0);
            c(if r.abs() < 1.0 { 1.0 - r * r } else { 0.0 })
        };
        let theta = TestFunctionPair::from_fns(grid, bump, |x| bump(x) * 0.5);
        let eta = FiniteConfiguration2::new(vec![Point::new1(0.3)], vec![Point::new1(-0.2)]).unwrap();
        let got = hat_l_on_exponential(&theta, &eta, 1.3, 0.0, &phi).unwrap();
        let expect = -1.3 * 2.0 * theta.plus_at(eta.plus[0]) * theta.minus_at(eta.minus[0]);
        assert!((got - expect).norm() < 1e-15);
    }

    #[test]
    fn hat_l_rejects_small_box() {
        let phi = PairPotential::top_hat(Dim::One, 1.0, 0.5).unwrap();
        let grid = QuadGrid::new(Dim::One, 41, -1.0, 2.0, Quadrature::Trapezoid).unwrap();
        let theta = TestFunctionPair::from_fns(grid, |_| c(1.0), |_| c(0.0));
        let r = hat_l_on_exponential(&theta, &FiniteConfiguration2::empty(), 1.0, 1.0, &phi);
        assert!(matches!(r, Err(GfError::BoxTooSmall { .. })));
    }

    #[test]
    fn meanlp_cases() {
        let grid = QuadGrid::new(Dim::One, 101, 0.0, 1.0, Quadrature::Trapezoid).unwrap();
        assert_eq!(meanlp_check(&TestFunctionPair::zero(grid), 2.0, 3.0, 20), 0.0);
        // ∫₀¹ 1 dx = 1 exactly under the trapezoid rule
        let f = TestFunctionPair::from_fns(grid, |_| c(1.0), |_| c(0.0));
        assert!(meanlp_check(&f, 1.0, 0.0, 15) <= 1e-12);
        let f = TestFunctionPair::from_fns(grid, |_| c(-0.5), |_| c(0.0));
        assert!(meanlp_check(&f, 1.0, 0.0, 15) <= 1e-12);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_wraps() {
        let grid = QuadGrid::new(Dim::Two, 8, 0.0, 4.0, Quadrature::Periodic).unwrap();
        let f = |x: Point| c(x.coord(0) + 10.0 * x.coord(1));
        let t = TestFunctionPair::from_fns(grid, f, f);
        for i in 0..grid.len() {
            assert!((t.plus_at(grid.node(i)) - t.plus[i]).norm() < 1e-12);
        }
        let p = Point::new2(0.25, 0.75);
        let shifted = Point::new2(4.25, -3.25);
        assert!((t.plus_at(p) - t.plus_at(shifted)).norm() < 1e-12);
    }
}
