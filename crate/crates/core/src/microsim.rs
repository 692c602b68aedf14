//! Exact simulation of the two-species Widom–Rowlinson birth-and-death
//! dynamics on a periodic box.
//!
//! Deaths occur at rate `m` per particle. A `+` particle is born at `x` with
//! rate `z·exp(−E(x, γ⁻))` and symmetrically for `−`. Births are generated by
//! thinning: proposals arrive at the dominating rate `z|box|` per species and
//! are accepted with probability `exp(−E)`, which is at most one because
//! `φ ≥ 0`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_coord, Dim, Point};
use crate::kinetics::{DensityField2, HomogeneousTrajectory, KineticError, TorusGrid};
use crate::potential::{PairPotential, PotentialError, PotentialShape};
use crate::rng::{replica_rng, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MicrosimError {
    #[error("invalid simulation parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("potential takes negative values")]
    NegativePotential,
    #[error("negative or non-finite intensity")]
    NegativeIntensity,
    #[error("point {0:?} lies outside the box")]
    OutsideBox(Vec<f64>),
    #[error("event log line {line}: {reason}")]
    EventLog { line: usize, reason: String },
    #[error("kinetic reference: {0}")]
    Reference(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Kinetic(#[from] KineticError),
}

fn bad(name: &'static str, reason: impl Into<String>) -> MicrosimError {
    MicrosimError::InvalidParameter { name, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimBox {
    pub dim: Dim,
    pub side: f64,
}

impl SimBox {
    pub fn new(dim: Dim, side: f64) -> Result<Self, MicrosimError> {
        if !(side.is_finite() && side > 0.0) {
            return Err(bad("box_side", format!("{side} is not finite and > 0")));
        }
        Ok(SimBox { dim, side })
    }

    pub fn volume(&self) -> f64 {
        self.dim.pow(self.side)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim && p.coords().iter().all(|&c| (0.0..self.side).contains(&c))
    }

    fn uniform(&self, rng: &mut SimRng) -> Point {
        let mut draw = || wrap_coord(rng.random::<f64>() * self.side, self.side);
        match self.dim {
            Dim::One => Point::new1(draw()),
            Dim::Two => {
                let x = draw();
                Point::new2(x, draw())
            }
        }
    }
}

/// One species, bucketed on a uniform cell grid with cell side ≥ the cutoff.
#[derive(Debug, Clone)]
struct PointSet {
    points: Vec<Point>,
    cell_of: Vec<usize>,
    slot: Vec<usize>,
    cells: Vec<Vec<usize>>,
    per_side: usize,
    neighbours: Vec<Vec<usize>>,
}

impl PointSet {
    fn new(sbox: SimBox, cutoff: f64) -> Self {
        let per_side = if cutoff > 0.0 { ((sbox.side / cutoff).floor() as usize).max(1) } else { 1 };
        let ncells = per_side.pow(sbox.dim.get() as u32);
        let wrap = |c: usize, o: isize| ((c as isize + o).rem_euclid(per_side as isize)) as usize;
        let neighbours = (0..ncells)
            .map(|c| {
                let mut v: Vec<usize> = match sbox.dim {
                    Dim::One => (-1..=1).map(|o| wrap(c, o)).collect(),
                    Dim::Two => {
                        let (i, j) = (c / per_side, c % per_side);
                        let mut out = Vec::with_capacity(9);
                        for oi in -1..=1 {
                            for oj in -1..=1 {
                                out.push(wrap(i, oi) * per_side + wrap(j, oj));
                            }
                        }
                        out
                    }
                };
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        PointSet {
            points: vec![],
            cell_of: vec![],
            slot: vec![],
            cells: vec![Vec::new(); ncells],
            per_side,
            neighbours,
        }
    }

    fn cell_index(&self, p: &Point, side: f64) -> usize {
        let h = side / self.per_side as f64;
        let idx = |c: f64| ((c / h) as usize).min(self.per_side - 1);
        match p.dim() {
            Dim::One => idx(p.coord(0)),
            Dim::Two => idx(p.coord(0)) * self.per_side + idx(p.coord(1)),
        }
    }

    fn insert(&mut self, p: Point, side: f64) {
        let c = self.cell_index(&p, side);
        self.cell_of.push(c);
        self.slot.push(self.cells[c].len());
        self.cells[c].push(self.points.len());
        self.points.push(p);
    }

    fn remove(&mut self, i: usize) -> Point {
        let c = self.cell_of[i];
        let s = self.slot[i];
        self.cells[c].swap_remove(s);
        if s < self.cells[c].len() {
            let moved = self.cells[c][s];
            self.slot[moved] = s;
        }
        let last = self.points.len() - 1;
        if i != last {
            let lc = self.cell_of[last];
            let ls = self.slot[last];
            self.cells[lc][ls] = i;
        }
        self.cell_of.swap_remove(i);
        self.slot.swap_remove(i);
        self.points.swap_remove(i)
    }

    fn energy(&self, x: &Point, phi: &PairPotential, side: f64) -> f64 {
        let c = self.cell_index(x, side);
        let mut e = 0.0;
        for &nc in &self.neighbours[c] {
            for &j in &self.cells[nc] {
                e += phi.evaluate(x.min_image_sub(&self.points[j], side));
            }
        }
        e
    }

    fn consistent(&self, side: f64) -> bool {
        self.points.iter().enumerate().all(|(i, p)| {
            let c = self.cell_index(p, side);
            c == self.cell_of[i] && self.cells[c][self.slot[i]] == i
        }) && self.cells.iter().map(Vec::len).sum::<usize>() == self.points.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Species {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

/// A two-species finite configuration in a periodic box.
#[derive(Debug, Clone)]
pub struct Configuration2State {
    sbox: SimBox,
    cutoff: f64,
    plus: PointSet,
    minus: PointSet,
}

impl Configuration2State {
    pub fn empty(sbox: SimBox, cutoff: f64) -> Self {
        Configuration2State { sbox, cutoff, plus: PointSet::new(sbox, cutoff), minus: PointSet::new(sbox, cutoff) }
    }

    pub fn new(sbox: SimBox, cutoff: f64, plus: Vec<Point>, minus: Vec<Point>) -> Result<Self, MicrosimError> {
        let mut st = Self::empty(sbox, cutoff);
        for (pts, sp) in [(plus, Species::Plus), (minus, Species::Minus)] {
            for p in pts {
                if !sbox.contains(&p) {
                    return Err(MicrosimError::OutsideBox(p.coords().to_vec()));
                }
                st.insert(sp, p);
            }
        }
        Ok(st)
    }

    pub fn sim_box(&self) -> SimBox {
        self.sbox
    }

    pub fn count(&self, sp: Species) -> usize {
        self.set(sp).points.len()
    }

    pub fn points(&self, sp: Species) -> &[Point] {
        &self.set(sp).points
    }

    fn set(&self, sp: Species) -> &PointSet {
        match sp {
            Species::Plus => &self.plus,
            Species::Minus => &self.minus,
        }
    }

    fn set_mut(&mut self, sp: Species) -> &mut PointSet {
        match sp {
            Species::Plus => &mut self.plus,
            Species::Minus => &mut self.minus,
        }
    }

    fn insert(&mut self, sp: Species, p: Point) {
        let side = self.sbox.side;
        self.set_mut(sp).insert(p, side);
    }

    fn remove(&mut self, sp: Species, i: usize) -> Point {
        self.set_mut(sp).remove(i)
    }

    /// Relative energy of a candidate `sp` particle at `x`: interaction with the other species.
    pub fn energy(&self, sp: Species, x: &Point, phi: &PairPotential) -> f64 {
        let other = match sp {
            Species::Plus => &self.minus,
            Species::Minus => &self.plus,
        };
        other.energy(x, phi, self.sbox.side)
    }

    /// Same points, bucketed for a (possibly larger) cutoff.
    pub fn rebinned(&self, cutoff: f64) -> Self {
        let mut st = Self::empty(self.sbox, cutoff);
        for sp in [Species::Plus, Species::Minus] {
            for p in self.points(sp) {
                st.insert(sp, *p);
            }
        }
        st
    }

    /// Checks the cell-list bookkeeping.
    pub fn is_consistent(&self) -> bool {
        let side = self.sbox.side;
        self.plus.consistent(side)
            && self.minus.consistent(side)
            && self.plus.points.iter().chain(&self.minus.points).all(|p| self.sbox.contains(p))
    }

    pub fn snapshot(&self, t: f64) -> Snapshot {
        Snapshot { t, plus: self.plus.points.clone(), minus: self.minus.points.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub m: f64,
    pub z: f64,
    pub phi: PairPotential,
    pub t_end: f64,
    pub seed: u64,
    pub snapshot_dt: f64,
    /// Lebowitz–Penrose scale; the dynamics use `φ_ε = ε^d φ(ε·)`.
    pub eps: f64,
}

impl SimParams {
    pub fn validate(&self, sbox: &SimBox) -> Result<PairPotential, MicrosimError> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.m) {
            return Err(bad("m", format!("{} is not finite and > 0", self.m)));
        }
        if !(self.z.is_finite() && self.z >= 0.0) {
            return Err(bad("z", format!("{} is not finite and >= 0", self.z)));
        }
        if !finite_pos(self.t_end) {
            return Err(bad("t_end", format!("{} is not finite and > 0", self.t_end)));
        }
        if !finite_pos(self.snapshot_dt) {
            return Err(bad("snapshot_dt", format!("{} is not finite and > 0", self.snapshot_dt)));
        }
        if !(finite_pos(self.eps) && self.eps <= 1.0) {
            return Err(bad("eps", format!("{} is not in (0, 1]", self.eps)));
        }
        if self.phi.dim() != sbox.dim {
            return Err(bad("phi", "potential dimension does not match the box"));
        }
        if !nonnegative(&self.phi) {
            return Err(MicrosimError::NegativePotential);
        }
        let phi = if self.eps == 1.0 { self.phi.clone() } else { self.phi.scale_lp(self.eps)? };
        if !phi.is_zero() && sbox.side <= 2.0 * phi.support_radius() {
            return Err(bad(
                "box_side",
                format!("box side {} must exceed twice the interaction range {}", sbox.side, phi.support_radius()),
            ));
        }
        let rate = 2.0 * self.z * sbox.volume();
        if !rate.is_finite() {
            return Err(bad("z", "birth proposal rate is not finite"));
        }
        Ok(phi)
    }
}

fn nonnegative(phi: &PairPotential) -> bool {
    match phi.shape() {
        PotentialShape::TopHat { height, .. } => *height >= 0.0,
        PotentialShape::TruncatedGaussian { amplitude, .. } => *amplitude >= 0.0,
        PotentialShape::TruncatedExponential { amplitude, .. } => *amplitude >= 0.0,
        PotentialShape::Tabulated { values } => values.iter().all(|v| *v >= 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "birth+")]
    BirthPlus,
    #[serde(rename = "birth-")]
    BirthMinus,
    #[serde(rename = "death+")]
    DeathPlus,
    #[serde(rename = "death-")]
    DeathMinus,
    #[serde(rename = "rejected-birth+")]
    RejectedBirthPlus,
    #[serde(rename = "rejected-birth-")]
    RejectedBirthMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub x: Point,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_ndjson(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 48);
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("event records always serialize"));
            s.push('\n');
        }
        s
    }

    /// Parses NDJSON, rejecting non-increasing times and mixed dimensions.
    pub fn from_ndjson(text: &str) -> Result<Self, MicrosimError> {
        let mut records = Vec::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: String| MicrosimError::EventLog { line: i + 1, reason };
            let r: EventRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if !r.t.is_finite() || r.t < 0.0 {
                return Err(err(format!("invalid time {}", r.t)));
            }
            if let Some(prev) = records.last().map(|p: &EventRecord| p.t) {
                if r.t <= prev {
                    return Err(err(format!("time {} does not exceed previous {}", r.t, prev)));
                }
            }
            match dim {
                None => dim = Some(r.x.dim()),
                Some(d) if d != r.x.dim() => return Err(err("location dimension changes".into())),
                _ => {}
            }
            records.push(r);
        }
        Ok(EventLog { records })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub plus: Vec<Point>,
    pub minus: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountSample {
    pub t: f64,
    pub plus: usize,
    pub minus: usize,
}

/// Snapshot times `0, Δ, 2Δ, …` up to `t_end`.
pub fn snapshot_times(t_end: f64, snapshot_dt: f64) -> Vec<f64> {
    let n = (t_end / snapshot_dt * (1.0 + 1e-12)).floor() as usize;
    (0..=n).map(|k| k as f64 * snapshot_dt).collect()
}

fn simulate<O: FnMut(f64, &Configuration2State)>(
    state: &Configuration2State,
    p: &SimParams,
    rng: &mut SimRng,
    mut log: Option<&mut EventLog>,
    mut observe: O,
) -> Result<Configuration2State, MicrosimError> {
    let phi = p.validate(&state.sbox)?;
    let mut st = if state.cutoff < phi.support_radius() || state.cutoff > 2.0 * phi.support_radius() {
        state.rebinned(phi.support_radius())
    } else {
        state.clone()
    };
    let sbox = st.sbox;
    let proposal = p.z * sbox.volume();
    let times = snapshot_times(p.t_end, p.snapshot_dt);
    let mut next_snap = 0;
    let mut t = 0.0;
    loop {
        let np = st.count(Species::Plus) as f64;
        let nm = st.count(Species::Minus) as f64;
        let total = p.m * (np + nm) + 2.0 * proposal;
        let wait = if total > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / total
        } else {
            f64::INFINITY
        };
        let t_next = t + wait;
        while next_snap < times.len() && times[next_snap] < t_next {
            observe(times[next_snap], &st);
            next_snap += 1;
        }
        if t_next > p.t_end {
            break;
        }
        t = t_next;
        let u = rng.random::<f64>() * total;
        let (kind, x) = if u < p.m * np {
            let i = rng.random_range(0..st.count(Species::Plus));
            (EventKind::DeathPlus, st.remove(Species::Plus, i))
        } else if u < p.m * (np + nm) {
            let i = rng.random_range(0..st.count(Species::Minus));
            (EventKind::DeathMinus, st.remove(Species::Minus, i))
        } else {
            let sp = if u < p.m * (np + nm) + proposal { Species::Plus } else { Species::Minus };
            let x = sbox.uniform(rng);
            let accept = (-st.energy(sp, &x, &phi)).exp();
            debug_assert!((0.0..=1.0).contains(&accept));
            if rng.random::<f64>() < accept {
                st.insert(sp, x);
                (if sp == Species::Plus { EventKind::BirthPlus } else { EventKind::BirthMinus }, x)
            } else if sp == Species::Plus {
                (EventKind::RejectedBirthPlus, x)
            } else {
                (EventKind::RejectedBirthMinus, x)
            }
        };
        if let Some(l) = log.as_deref_mut() {
            l.records.push(EventRecord { t, kind, x });
        }
    }
    Ok(st)
}

/// Runs one trajectory with its RNG seeded from `p.seed`.
pub fn run(state: &Configuration2State, p: &SimParams) -> Result<(EventLog, Vec<Snapshot>), MicrosimError> {
    let mut rng = crate::rng::rng_from_seed(p.seed);
    run_with_rng(state, p, &mut rng)
}

pub fn run_with_rng(
    state: &Configuration2State,
    p: &SimParams,
    rng: &mut SimRng,
) -> Result<(EventLog, Vec<Snapshot>), MicrosimError> {
    let mut log = EventLog::default();
    let mut snaps = Vec::new();
    simulate(state, p, rng, Some(&mut log), |t, s| snaps.push(s.snapshot(t)))?;
    Ok((log, snaps))
}

/// Population counts at the snapshot times, without an event log.
pub fn run_counts(
    state: &Configuration2State,
    p: &SimParams,
    rng: &mut SimRng,
) -> Result<Vec<CountSample>, MicrosimError> {
    let mut out = Vec::new();
    simulate(state, p, rng, None, |t, s| {
        out.push(CountSample { t, plus: s.count(Species::Plus), minus: s.count(Species::Minus) })
    })?;
    Ok(out)
}

/// Initial intensity of one species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Intensity {
    Constant(f64),
    /// Piecewise constant on `n` cells per side, row-major.
    Grid {
        n: usize,
        values: Vec<f64>,
    },
}

fn poisson(mean: f64, rng: &mut SimRng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as usize
}

fn sample_species(
    st: &mut Configuration2State,
    sp: Species,
    rho: &Intensity,
    rng: &mut SimRng,
) -> Result<(), MicrosimError> {
    let sbox = st.sbox;
    match rho {
        Intensity::Constant(r) => {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(MicrosimError::NegativeIntensity);
            }
            for _ in 0..poisson(r * sbox.volume(), rng) {
                let p = sbox.uniform(rng);
                st.insert(sp, p);
            }
        }
        Intensity::Grid { n, values } => {
            let cells = n.pow(sbox.dim.get() as u32);
            if *n == 0 || values.len() != cells {
                return Err(bad("intensity", format!("grid of {} values does not match n = {n}", values.len())));
            }
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(MicrosimError::NegativeIntensity);
            }
            let h = sbox.side / *n as f64;
            let cell_vol = sbox.dim.pow(h);
            for (c, v) in values.iter().enumerate() {
                for _ in 0..poisson(v * cell_vol, rng) {
                    let mut off = || rng.random::<f64>() * h;
                    let p = match sbox.dim {
                        Dim::One => Point::new1(wrap_coord(c as f64 * h + off(), sbox.side)),
                        Dim::Two => {
                            let x = wrap_coord((c / n) as f64 * h + off(), sbox.side);
                            Point::new2(x, wrap_coord((c % n) as f64 * h + off(), sbox.side))
                        }
                    };
                    st.insert(sp, p);
                }
            }
        }
    }
    Ok(())
}

/// Independent Poisson samples with intensities `ρ₀⁺`, `ρ₀⁻`.
pub fn sample_poisson_initial(
    rho_plus: &Intensity,
    rho_minus: &Intensity,
    sbox: SimBox,
    cutoff: f64,
    rng: &mut SimRng,
) -> Result<Configuration2State, MicrosimError> {
    let mut st = Configuration2State::empty(sbox, cutoff);
    sample_species(&mut st, Species::Plus, rho_plus, rng)?;
    sample_species(&mut st, Species::Minus, rho_minus, rng)?;
    Ok(st)
}

/// Binned densities (count / bin volume) per snapshot.
pub fn empirical_density(
    snapshots: &[Snapshot],
    sbox: SimBox,
    bins: usize,
) -> Result<Vec<(f64, DensityField2)>, MicrosimError> {
    if bins == 0 {
        return Err(bad("bins", "must be at least 1"));
    }
    let grid = TorusGrid::new(sbox.dim, bins, sbox.side)?;
    let h = sbox.side / bins as f64;
    let inv_vol = 1.0 / grid.cell_volume();
    let bin = |p: &Point| {
        let i = |c: f64| ((c / h) as usize).min(bins - 1);
        match sbox.dim {
            Dim::One => i(p.coord(0)),
            Dim::Two => i(p.coord(0)) * bins + i(p.coord(1)),
        }
    };
    snapshots
        .iter()
        .map(|s| {
            let mut plus = vec![0.0; grid.len()];
            let mut minus = vec![0.0; grid.len()];
            for p in &s.plus {
                plus[bin(p)] += inv_vol;
            }
            for p in &s.minus {
                minus[bin(p)] += inv_vol;
            }
            Ok((s.t, DensityField2::new(grid, plus, minus)?))
        })
        .collect()
}

/// Runs `f(replica, rng)` for every replica on a pool of `threads` workers.
/// Each replica gets the stream `replica_rng(master, group, replica)`, and
/// results come back in replica order whatever the thread count.
pub fn run_replicas<T, F>(
    replicas: usize,
    threads: usize,
    master: u64,
    group: u64,
    f: F,
) -> Result<Vec<T>, MicrosimError>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> Result<T, MicrosimError> + Sync,
{
    let body = || {
        (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_rng(master, group, r as u64);
                f(r, &mut rng)
            })
            .collect::<Result<Vec<T>, MicrosimError>>()
    };
    if threads == 1 {
        return (0..replicas)
            .map(|r| {
                let mut rng = replica_rng(master, group, r as u64);
                f(r, &mut rng)
            })
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| MicrosimError::ThreadPool(e.to_string()))?;
    pool.install(body)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpExperiment {
    pub eps: Vec<f64>,
    pub replicas: usize,
    pub m: f64,
    pub z: f64,
    pub phi: PairPotential,
    /// Side of the macroscopic box; the simulation box is `side/ε`.
    pub macro_side: f64,
    pub rho0_plus: f64,
    pub rho0_minus: f64,
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub seed: u64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub eps: f64,
    /// `sup_t max± |mean density − ρ_t^kin|`.
    pub sup_error: f64,
    /// Standard error of the mean density at the maximising time and species.
    pub stderr: f64,
    pub t_at_sup: f64,
    pub times: Vec<f64>,
    pub mean_plus: Vec<f64>,
    pub mean_minus: Vec<f64>,
}

/// Compares replica-averaged densities under `φ_ε` with a homogeneous kinetic
/// reference that must contain every snapshot time.
pub fn lp_convergence_experiment(
    exp: &LpExperiment,
    reference: &HomogeneousTrajectory,
) -> Result<Vec<LpRow>, MicrosimError> {
    if exp.replicas < 2 {
        return Err(bad("replicas", "need at least two replicas for a standard error"));
    }
    if exp.eps.is_empty() {
        return Err(bad("eps", "at least one ε is required"));
    }
    if exp.threads == 0 {
        return Err(bad("threads", "must be at least 1"));
    }
    let times = snapshot_times(exp.t_end, exp.snapshot_dt);
    let ref_idx = times
        .iter()
        .map(|&t| {
            let tol = 1e-9 * t.max(1.0);
            reference
                .times
                .iter()
                .position(|&s| (s - t).abs() <= tol)
                .ok_or_else(|| MicrosimError::Reference(format!("no reference value at t = {t}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    exp.eps
        .iter()
        .enumerate()
        .map(|(g, &eps)| {
            let sbox = SimBox::new(exp.phi.dim(), exp.macro_side / eps)?;
            let vol = sbox.volume();
            let params = SimParams {
                m: exp.m,
                z: exp.z,
                phi: exp.phi.clone(),
                t_end: exp.t_end,
                seed: exp.seed,
                snapshot_dt: exp.snapshot_dt,
                eps,
            };
            let cutoff = params.validate(&sbox)?.support_radius();
            let (rp, rm) = (Intensity::Constant(exp.rho0_plus), Intensity::Constant(exp.rho0_minus));
            let counts = run_replicas(exp.replicas, exp.threads, exp.seed, g as u64, |_, rng| {
                let st = sample_poisson_initial(&rp, &rm, sbox, cutoff, rng)?;
                run_counts(&st, &params, rng)
            })?;
            let mut row = LpRow {
                eps,
                sup_error: 0.0,
                stderr: 0.0,
                t_at_sup: 0.0,
                times: times.clone(),
                mean_plus: vec![],
                mean_minus: vec![],
            };
            for (k, &t) in times.iter().enumerate() {
                let dp: Vec<f64> = counts.iter().map(|c| c[k].plus as f64 / vol).collect();
                let dm: Vec<f64> = counts.iter().map(|c| c[k].minus as f64 / vol).collect();
                let (mp, sp) = mean_stderr(&dp);
                let (mm, sm) = mean_stderr(&dm);
                row.mean_plus.push(mp);
                row.mean_minus.push(mm);
                let ep = (mp - reference.plus[ref_idx[k]]).abs();
                let em = (mm - reference.minus[ref_idx[k]]).abs();
                let (err, se) = if ep >= em { (ep, sp) } else { (em, sm) };
                if err > row.sup_error || k == 0 {
                    row.sup_error = err;
                    row.stderr = se;
                    row.t_at_sup = t;
                }
            }
            Ok(row)
        })
        .collect()
}
