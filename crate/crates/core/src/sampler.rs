//! Shot and run sampling over Ising models.
//!
//! A run is a batch of independent shots, each one anneal followed by a
//! measurement that yields a basis state and its energy. Three backends are
//! provided: exact enumeration, single-spin Metropolis simulated annealing,
//! and state-vector adiabatic evolution.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adiabatic::{self, HamiltonianPair};
use crate::error::{arg, Error, Result};
use crate::qubo::{brute_force_solve, BitVector, IsingModel, BRUTE_FORCE_LIMIT};
use crate::util::{group_sorted, stream_rng, ENERGY_TOL};

/// Maximum number of shots in one run.
pub const MAX_SHOTS: usize = 10_000;
/// Final temperature of the simulated-annealing schedule.
pub const SA_T_COLD: f64 = 0.01;
/// Lower bound on the number of Metropolis sweeps per shot.
pub const SA_MIN_SWEEPS: usize = 10;

/// Seed of the `index`-th child run of `seed` (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Sa,
    Adiabatic,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Sa => "sa",
            Backend::Adiabatic => "adiabatic",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "sa" => Ok(Backend::Sa),
            "adiabatic" => Ok(Backend::Adiabatic),
            other => arg(format!("unknown backend {other:?} (expected exact, sa or adiabatic)")),
        }
    }
}

/// Settings for one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    pub backend: Backend,
    /// Shots per run, `1..=MAX_SHOTS`.
    pub shots: usize,
    /// Anneal time in microseconds. The SA backend uses it as a sweep count,
    /// the adiabatic backend as dimensionless evolution time.
    pub anneal_time_us: f64,
    pub seed: u64,
}

impl AnnealParams {
    pub fn new(backend: Backend, shots: usize, anneal_time_us: f64, seed: u64) -> Result<Self> {
        let p = Self { backend, shots, anneal_time_us, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 || self.shots > MAX_SHOTS {
            return arg(format!("shots must lie in 1..={MAX_SHOTS}, got {}", self.shots));
        }
        if !(self.anneal_time_us > 0.0) || !self.anneal_time_us.is_finite() {
            return arg(format!("anneal time must be positive, got {}", self.anneal_time_us));
        }
        Ok(())
    }

    /// Metropolis sweeps per shot for the SA backend.
    pub fn sweeps(&self) -> usize {
        (self.anneal_time_us.round() as usize).max(SA_MIN_SWEEPS)
    }
}

impl Default for AnnealParams {
    fn default() -> Self {
        Self { backend: Backend::Sa, shots: 1000, anneal_time_us: 20.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shot {
    pub state: BitVector,
    pub energy: f64,
}

/// Outcome of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub backend: Backend,
    pub seed: u64,
    pub anneal_time_us: f64,
    pub shots: Vec<Shot>,
    e_hat0: f64,
}

impl RunResult {
    pub fn from_shots(backend: Backend, seed: u64, anneal_time_us: f64, shots: Vec<Shot>) -> Result<Self> {
        if shots.is_empty() {
            return arg("a run needs at least one shot");
        }
        let e_hat0 = shots.iter().map(|s| s.energy).fold(f64::INFINITY, f64::min);
        Ok(Self { backend, seed, anneal_time_us, shots, e_hat0 })
    }

    /// Lowest shot energy.
    pub fn e_hat0(&self) -> f64 {
        self.e_hat0
    }

    pub fn n_shots(&self) -> usize {
        self.shots.len()
    }

    /// Distinct states attaining the lowest energy, ordered by state index.
    pub fn argmin_states(&self) -> Vec<BitVector> {
        let mut states: Vec<BitVector> = self
            .shots
            .iter()
            .filter(|s| s.energy <= self.e_hat0 + ENERGY_TOL)
            .map(|s| s.state.clone())
            .collect();
        sort_dedup(&mut states);
        states
    }

    pub fn to_record(&self) -> RunRecord {
        RunRecord {
            backend: self.backend,
            seed: self.seed,
            n_s: self.shots.len(),
            t_f_us: self.anneal_time_us,
            e_hat0: self.e_hat0,
            shots: self
                .shots
                .iter()
                .map(|s| ShotRecord { state: s.state.to_string(), energy: s.energy })
                .collect(),
            histogram: density_of_states(self).expect("run is nonempty"),
        }
    }
}

fn sort_dedup(states: &mut Vec<BitVector>) {
    states.sort_by(|a, b| a.index().cmp(&b.index()).then_with(|| a.as_slice().cmp(b.as_slice())));
    states.dedup();
}

/// Serialized form of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub backend: Backend,
    pub seed: u64,
    pub n_s: usize,
    pub t_f_us: f64,
    pub e_hat0: f64,
    pub shots: Vec<ShotRecord>,
    pub histogram: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub state: String,
    pub energy: f64,
}

impl RunRecord {
    pub fn to_run(&self) -> Result<RunResult> {
        let shots = self
            .shots
            .iter()
            .map(|s| Ok(Shot { state: BitVector::parse(&s.state)?, energy: s.energy }))
            .collect::<Result<Vec<_>>>()?;
        RunResult::from_shots(self.backend, self.seed, self.t_f_us, shots)
    }
}

/// Samples one run of `p.shots` shots from `model`.
pub fn run(model: &IsingModel, p: &AnnealParams) -> Result<RunResult> {
    p.validate()?;
    let shots = match p.backend {
        Backend::Exact => run_exact(model, p)?,
        Backend::Sa => run_sa(model, p),
        Backend::Adiabatic => run_adiabatic(model, p)?,
    };
    RunResult::from_shots(p.backend, p.seed, p.anneal_time_us, shots)
}

fn shot_of(model: &IsingModel, state: BitVector) -> Shot {
    let energy = model.energy_spins(state.to_spins().as_slice());
    Shot { state, energy }
}

fn run_exact(model: &IsingModel, p: &AnnealParams) -> Result<Vec<Shot>> {
    if model.n() > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit { what: "exact backend qubit count", actual: model.n(), limit: BRUTE_FORCE_LIMIT });
    }
    let sol = brute_force_solve(&model.to_qubo())?;
    let ground: Vec<BitVector> = sol.argmins().collect();
    Ok((0..p.shots)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(p.seed, i as u64);
            shot_of(model, ground[rng.random_range(0..ground.len())].clone())
        })
        .collect())
}

fn run_adiabatic(model: &IsingModel, p: &AnnealParams) -> Result<Vec<Shot>> {
    let pair = HamiltonianPair::new(model)?;
    let steps = adiabatic::recommended_steps(&pair, p.anneal_time_us);
    let state = adiabatic::evolve_state(&pair, p.anneal_time_us, steps)?;
    let mut rng = stream_rng(p.seed, 0);
    Ok(state.measure(&mut rng, p.shots).into_iter().map(|x| shot_of(model, x)).collect())
}

fn run_sa(model: &IsingModel, p: &AnnealParams) -> Vec<Shot> {
    let sa = SimulatedAnnealer::new(model, p.sweeps());
    (0..p.shots)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(p.seed, i as u64);
            shot_of(model, sa.anneal(&mut rng))
        })
        .collect()
}

/// Single-spin Metropolis annealer with a geometric temperature schedule.
///
/// Each sweep visits every spin once in a fresh random order.
#[derive(Clone, Debug)]
pub struct SimulatedAnnealer {
    n: usize,
    couplings: Vec<f64>,
    field: Vec<f64>,
    temperatures: Vec<f64>,
}

impl SimulatedAnnealer {
    pub fn new(model: &IsingModel, sweeps: usize) -> Self {
        let n = model.n();
        let mut couplings = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    couplings[i * n + k] = model.coupling(i, k);
                }
            }
        }
        let field = model.field().iter().map(|h| model.mu() * h).collect();
        let scale = model.max_abs_coefficient();
        let t_hot = if scale > 0.0 { 2.0 * scale } else { 1.0 }.max(SA_T_COLD);
        let sweeps = sweeps.max(1);
        let ratio = SA_T_COLD / t_hot;
        let temperatures = (0..sweeps)
            .map(|s| {
                if sweeps == 1 {
                    SA_T_COLD
                } else {
                    t_hot * ratio.powf(s as f64 / (sweeps - 1) as f64)
                }
            })
            .collect();
        Self { n, couplings, field, temperatures }
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temperatures
    }

    /// One anneal from a uniformly random spin state; returns the final state.
    pub fn anneal<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVector {
        let n = self.n;
        let mut spin: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        // local[k] = Σ_{j≠k} J_kj σ_j
        let mut local: Vec<f64> = (0..n)
            .map(|k| (0..n).map(|j| self.couplings[k * n + j] * spin[j]).sum())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        for &t in &self.temperatures {
            // Random visiting order keeps zero-energy plateaus from cycling.
            order.shuffle(rng);
            for &k in &order {
                let delta = 4.0 * spin[k] * local[k] + 2.0 * self.field[k] * spin[k];
                if delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp() {
                    let old = spin[k];
                    spin[k] = -old;
                    let row = &self.couplings[k * n..(k + 1) * n];
                    for (l, &jk) in local.iter_mut().zip(row) {
                        *l -= 2.0 * jk * old;
                    }
                }
            }
        }
        let mut x = BitVector::zeros(n);
        for (i, s) in spin.iter().enumerate() {
            x.set(i, *s > 0.0);
        }
        x
    }
}

/// Normalized energy histogram: `(energy, fraction)` pairs in ascending energy.
pub fn density_of_states(r: &RunResult) -> Result<Vec<(f64, f64)>> {
    let energies: Vec<f64> = r.shots.iter().map(|s| s.energy).collect();
    energy_histogram(&energies)
}

/// [`density_of_states`] over raw energies, e.g. pooled from several runs.
pub fn energy_histogram(energies: &[f64]) -> Result<Vec<(f64, f64)>> {
    if energies.is_empty() {
        return arg("density of states of an empty sample");
    }
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    Ok(group_sorted(&sorted, ENERGY_TOL)
        .into_iter()
        .map(|(e, count)| (e, count as f64 / total))
        .collect())
}

/// Fraction of shots within `1e-9` of `e0`.
pub fn ground_state_fraction(r: &RunResult, e0: f64) -> f64 {
    if r.shots.is_empty() {
        return 0.0;
    }
    let hits = r.shots.iter().filter(|s| (s.energy - e0).abs() <= ENERGY_TOL).count();
    hits as f64 / r.shots.len() as f64
}

/// Fraction of `ground_set` that appears among the run's shots.
pub fn degenerate_coverage(r: &RunResult, ground_set: &[BitVector]) -> Result<f64> {
    if ground_set.is_empty() {
        return arg("ground set is empty");
    }
    let mut ground = ground_set.to_vec();
    sort_dedup(&mut ground);
    let mut seen: Vec<BitVector> = r.shots.iter().map(|s| s.state.clone()).collect();
    sort_dedup(&mut seen);
    let hit = ground.iter().filter(|g| seen.binary_search_by(|s| cmp_states(s, g)).is_ok()).count();
    Ok(hit as f64 / ground.len() as f64)
}

fn cmp_states(a: &BitVector, b: &BitVector) -> std::cmp::Ordering {
    a.index().cmp(&b.index()).then_with(|| a.as_slice().cmp(b.as_slice()))
}
