//! State-vector simulation of `H(s) = (1 − s) H_B + s H_P` with `H_B = −Σ σ_x`.
//!
//! Basis states are ordered as a Kronecker product with site 0 as the most
//! significant qubit: basis index `b` has site `i` in `σ_z` state
//! `(b >> (n − 1 − i)) & 1`, bit `1` meaning spin `+1`. Time is dimensionless
//! (`ħ = 1`), with `s = t / t_f`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{arg, Error, Result};
use crate::qubo::{BitVector, IsingModel};
use crate::util::ENERGY_TOL;

/// Largest simulated qubit count (dimension 4096).
pub const MAX_QUBITS: usize = 12;
/// Allowed deviation of the state norm from 1.
pub const NORM_TOL: f64 = 1e-6;
/// Target value of `dt · ‖H − E_ref‖` per integration step.
pub const PHASE_PER_STEP: f64 = 0.025;
/// Smallest eigenvalue separation treated as nondegenerate.
pub const GAP_TOL: f64 = 1e-9;

/// Driver and problem Hamiltonians of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianPair {
    n: usize,
    problem: Vec<f64>,
}

impl HamiltonianPair {
    pub fn new(model: &IsingModel) -> Result<Self> {
        let n = model.n();
        if n > MAX_QUBITS {
            return Err(Error::SizeLimit { what: "adiabatic qubit count", actual: n, limit: MAX_QUBITS });
        }
        let problem = (0..1usize << n)
            .map(|b| model.energy_spins(basis_bits(b, n).to_spins().as_slice()))
            .collect();
        Ok(Self { n, problem })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.problem.len()
    }

    /// Diagonal of `H_P` in the computational basis.
    pub fn problem_diagonal(&self) -> &[f64] {
        &self.problem
    }

    pub fn problem_min(&self) -> f64 {
        self.problem.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn problem_max(&self) -> f64 {
        self.problem.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dense `H_B`.
    pub fn driver_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for b in 0..d {
            for q in 0..self.n {
                m[(b, b ^ (1 << q))] = -1.0;
            }
        }
        m
    }

    /// Dense real symmetric `H(s)`.
    pub fn hamiltonian(&self, s: f64) -> DMatrix<f64> {
        let mut m = self.driver_matrix() * (1.0 - s);
        for (b, e) in self.problem.iter().enumerate() {
            m[(b, b)] += s * e;
        }
        m
    }

    /// Sorted eigenvalues and matching eigenvector columns of `H(s)`.
    pub fn eigen(&self, s: f64) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.hamiltonian(s));
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    /// `out = (H(s) − shift) ψ` without forming the matrix.
    fn apply_shifted(&self, s: f64, shift: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let driver = 1.0 - s;
        for (b, o) in out.iter_mut().enumerate() {
            let mut flip = Complex64::new(0.0, 0.0);
            for q in 0..self.n {
                flip += psi[b ^ (1 << q)];
            }
            *o = psi[b] * (s * self.problem[b] - shift) - flip * driver;
        }
    }

    /// Reference energy removed from `H(s)` during integration (a global phase).
    fn reference_energy(&self, s: f64) -> f64 {
        (1.0 - s) * -(self.n as f64) + s * self.problem_min()
    }

    /// Bound on `‖H(s) − E_ref(s)‖` over the whole schedule.
    fn shifted_radius(&self) -> f64 {
        (2.0 * self.n as f64).max(self.problem_max() - self.problem_min())
    }
}

/// Bits of basis index `b` with site 0 as the most significant qubit.
pub fn basis_bits(b: usize, n: usize) -> BitVector {
    let mut x = BitVector::zeros(n);
    for site in 0..n {
        x.set(site, (b >> (n - 1 - site)) & 1 == 1);
    }
    x
}

/// Basis index of a bit pattern, inverse of [`basis_bits`].
pub fn basis_index(x: &BitVector) -> usize {
    let n = x.len();
    (0..n).filter(|&site| x.get(site) == 1).map(|site| 1usize << (n - 1 - site)).sum()
}

/// Complex amplitudes over the computational basis.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    n: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    /// Ground state of `H_B`: the uniform superposition.
    pub fn uniform(n: usize) -> Self {
        let d = 1usize << n;
        let a = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        Self { n, amps: vec![a; d] }
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if index >= 1 << n {
            return arg(format!("basis index {index} out of range for {n} qubits"));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return arg(format!("amplitude count {} is not a power of two", amps.len()));
        }
        Ok(Self { n: amps.len().trailing_zeros() as usize, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|⟨v|ψ⟩|²` for a real vector `v`.
    pub fn overlap_sqr(&self, v: &[f64]) -> f64 {
        self.amps.iter().zip(v).map(|(a, &x)| a * x).sum::<Complex64>().norm_sqr()
    }

    /// `⟨ψ|H(s)|ψ⟩`.
    pub fn expectation(&self, pair: &HamiltonianPair, s: f64) -> f64 {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        pair.apply_shifted(s, 0.0, &self.amps, &mut out);
        self.amps.iter().zip(&out).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `n_s` independent Born-rule measurements in the computational basis.
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R, n_s: usize) -> Vec<BitVector> {
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        (0..n_s)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let b = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                basis_bits(b, self.n)
            })
            .collect()
    }
}

/// Lowest levels of `H(s)` on a grid of `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTrace {
    pub s: Vec<f64>,
    /// `levels[g]` holds the lowest eigenvalues at `s[g]`, ascending.
    pub levels: Vec<Vec<f64>>,
}

impl SpectrumTrace {
    /// `E_1 − E_0` per grid point (needs at least two levels).
    pub fn gaps(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.get(1).map_or(f64::NAN, |e1| e1 - l[0])).collect()
    }

    pub fn min_gap(&self) -> (f64, f64) {
        self.s
            .iter()
            .zip(self.gaps())
            .map(|(&s, g)| (s, g))
            .fold((f64::NAN, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
    }

    /// CSV with columns `s, E_0.., gap`.
    pub fn to_csv(&self) -> String {
        let l = self.levels.first().map_or(0, Vec::len);
        let mut out = String::from("s");
        for i in 0..l {
            out.push_str(&format!(",E_{i}"));
        }
        out.push_str(",gap\n");
        for ((s, lv), gap) in self.s.iter().zip(&self.levels).zip(self.gaps()) {
            out.push_str(&fmt_num(*s));
            for e in lv {
                out.push(',');
                out.push_str(&fmt_num(*e));
            }
            out.push(',');
            out.push_str(&fmt_num(gap));
            out.push('\n');
        }
        out
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.12e}")
}

/// `points` evenly spaced values in `[0, 1]`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

fn check_grid(s_grid: &[f64]) -> Result<()> {
    if s_grid.is_empty() {
        return arg("s grid is empty");
    }
    if let Some(s) = s_grid.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return arg(format!("s = {s} outside [0, 1]"));
    }
    Ok(())
}

pub fn spectrum(pair: &HamiltonianPair, s_grid: &[f64], levels: usize) -> Result<SpectrumTrace> {
    check_grid(s_grid)?;
    if levels == 0 || levels > pair.dim() {
        return arg(format!("level count must lie in 1..={}, got {levels}", pair.dim()));
    }
    let rows = s_grid
        .par_iter()
        .map(|&s| {
            let (values, _) = pair.eigen(s);
            values[..levels].to_vec()
        })
        .collect();
    Ok(SpectrumTrace { s: s_grid.to_vec(), levels: rows })
}

/// Step count keeping `dt · ‖H − E_ref‖` near [`PHASE_PER_STEP`].
pub fn recommended_steps(pair: &HamiltonianPair, t_f: f64) -> usize {
    ((t_f * pair.shifted_radius() / PHASE_PER_STEP).ceil() as usize).max(100)
}

fn rk4_step(pair: &HamiltonianPair, psi: &mut [Complex64], s0: f64, ds: f64, t_f: f64, scratch: &mut [Vec<Complex64>; 5]) {
    // dψ/ds = −i t_f (H(s) − E_ref(s)) ψ
    let d = psi.len();
    let mi = Complex64::new(0.0, -t_f);
    let [k1, k2, k3, k4, tmp] = scratch;
    let deriv = |s: f64, input: &[Complex64], out: &mut Vec<Complex64>| {
        pair.apply_shifted(s, pair.reference_energy(s), input, out);
        for o in out.iter_mut() {
            *o *= mi;
        }
    };
    deriv(s0, psi, k1);
    for b in 0..d {
        tmp[b] = psi[b] + k1[b] * (0.5 * ds);
    }
    deriv(s0 + 0.5 * ds, tmp, k2);
    for b in 0..d {
        tmp[b] = psi[b] + k2[b] * (0.5 * ds);
    }
    deriv(s0 + 0.5 * ds, tmp, k3);
    for b in 0..d {
        tmp[b] = psi[b] + k3[b] * ds;
    }
    deriv(s0 + ds, tmp, k4);
    for b in 0..d {
        psi[b] += (k1[b] + (k2[b] + k3[b]) * 2.0 + k4[b]) * (ds / 6.0);
    }
}

/// Runs the schedule from the ground state of `H_B`; `visit` sees each recorded `(s, ψ)`.
fn integrate(
    pair: &HamiltonianPair,
    t_f: f64,
    steps: usize,
    record: &[usize],
    mut visit: impl FnMut(f64, &QuantumState),
) -> Result<(QuantumState, f64)> {
    if !(t_f > 0.0) || !t_f.is_finite() {
        return arg(format!("anneal time must be positive, got {t_f}"));
    }
    if steps == 0 {
        return arg("step count must be positive");
    }
    let mut state = QuantumState::uniform(pair.n());
    let d = pair.dim();
    let mut scratch: [Vec<Complex64>; 5] = std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); d]);
    let ds = 1.0 / steps as f64;
    let mut drift: f64 = 0.0;
    let mut next = record.iter().peekable();
    for i in 0..=steps {
        if next.peek().is_some_and(|&&r| r == i) {
            next.next();
            drift = drift.max((state.norm() - 1.0).abs());
            visit(i as f64 * ds, &state);
        }
        if i < steps {
            rk4_step(pair, &mut state.amps, i as f64 * ds, ds, t_f, &mut scratch);
        }
    }
    drift = drift.max((state.norm() - 1.0).abs());
    if drift > NORM_TOL {
        // Norm loss of RK4 scales like steps^-5 at fixed t_f.
        let suggested = (steps as f64 * 1.2 * (drift / NORM_TOL).powf(0.2)).ceil() as usize;
        return Err(Error::Accuracy { drift, steps, suggested_steps: suggested.max(steps + 1) });
    }
    Ok((state, drift))
}

/// Final state of the schedule.
pub fn evolve_state(pair: &HamiltonianPair, t_f: f64, steps: usize) -> Result<QuantumState> {
    integrate(pair, t_f, steps, &[], |_, _| {}).map(|r| r.0)
}

/// Recorded occupations of the lowest instantaneous eigenstates.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub energies: Vec<Vec<f64>>,
    pub occupations: Vec<Vec<f64>>,
    pub final_state: QuantumState,
    pub norm_drift: f64,
}

impl Trajectory {
    /// CSV with columns `s, E_0..E_{L−1}, P_0..P_{L−1}`.
    pub fn to_csv(&self) -> String {
        let l = self.energies.first().map_or(0, Vec::len);
        let mut out = String::from("s");
        for i in 0..l {
            out.push_str(&format!(",E_{i}"));
        }
        for i in 0..l {
            out.push_str(&format!(",P_{i}"));
        }
        out.push('\n');
        for ((s, e), p) in self.s.iter().zip(&self.energies).zip(&self.occupations) {
            out.push_str(&fmt_num(*s));
            for v in e.iter().chain(p) {
                out.push(',');
                out.push_str(&fmt_num(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Evolves over `[0, t_f]` and records `levels` tracked occupations at `samples` points.
pub fn evolve(pair: &HamiltonianPair, t_f: f64, steps: usize, levels: usize, samples: usize) -> Result<Trajectory> {
    if levels == 0 || levels > pair.dim() {
        return arg(format!("level count must lie in 1..={}, got {levels}", pair.dim()));
    }
    if samples < 2 {
        return arg("need at least two recorded points");
    }
    let mut record: Vec<usize> = (0..samples)
        .map(|k| ((k as f64 * steps as f64) / (samples - 1) as f64).round() as usize)
        .collect();
    record.dedup();
    let (mut s_out, mut energies, mut occupations) = (Vec::new(), Vec::new(), Vec::new());
    let (final_state, norm_drift) = integrate(pair, t_f, steps, &record, |s, psi| {
        let (values, vectors) = pair.eigen(s);
        s_out.push(s);
        energies.push(values[..levels].to_vec());
        occupations.push((0..levels).map(|l| psi.overlap_sqr(vectors.column(l).as_slice())).collect());
    })?;
    Ok(Trajectory { s: s_out, energies, occupations, final_state, norm_drift })
}

/// Probability mass on the ground eigenspace of `H_P`.
pub fn final_ground_occupation(pair: &HamiltonianPair, state: &QuantumState) -> f64 {
    let e0 = pair.problem_min();
    pair.problem
        .iter()
        .zip(&state.amps)
        .filter(|(e, _)| **e <= e0 + ENERGY_TOL)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// `max_s max_{m>0} |⟨0|H_P − H_B|m⟩| / (E_m − E_0)`, divided by `t_f`.
pub fn adiabatic_metric(pair: &HamiltonianPair, t_f: f64, s_grid: &[f64]) -> Result<f64> {
    if !(t_f > 0.0) {
        return arg(format!("anneal time must be positive, got {t_f}"));
    }
    Ok(adiabatic_quotient(pair, s_grid)? / t_f)
}

/// The schedule-independent part of [`adiabatic_metric`].
pub fn adiabatic_quotient(pair: &HamiltonianPair, s_grid: &[f64]) -> Result<f64> {
    check_grid(s_grid)?;
    let dh = {
        let mut m = -pair.driver_matrix();
        for (b, e) in pair.problem.iter().enumerate() {
            m[(b, b)] += e;
        }
        m
    };
    let per_point: Vec<Result<f64>> = s_grid
        .par_iter()
        .map(|&s| {
            let (values, vectors) = pair.eigen(s);
            if values.len() < 2 {
                return Ok(0.0);
            }
            let gap = values[1] - values[0];
            if gap < GAP_TOL {
                return Err(Error::Degenerate { s, gap });
            }
            let ground: DVector<f64> = vectors.column(0).into_owned();
            let row = (&dh * &ground).transpose() * &vectors;
            Ok((1..values.len()).map(|m| row[m].abs() / (values[m] - values[0])).fold(0.0, f64::max))
        })
        .collect();
    per_point.into_iter().try_fold(0.0, |acc: f64, r| r.map(|v| acc.max(v)))
}

/// One row of an anneal-time sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub t_f: f64,
    pub final_ground_occupation: f64,
    pub adiabatic_metric: f64,
    pub norm_drift: f64,
}

/// Final ground occupation and adiabatic metric for each anneal time.
pub fn sweep(pair: &HamiltonianPair, t_fs: &[f64], s_grid: &[f64]) -> Result<Vec<SweepPoint>> {
    let quotient = adiabatic_quotient(pair, s_grid)?;
    t_fs.par_iter()
        .map(|&t_f| {
            let (state, drift) = integrate(pair, t_f, recommended_steps(pair, t_f), &[], |_, _| {})?;
            Ok(SweepPoint {
                t_f,
                final_ground_occupation: final_ground_occupation(pair, &state),
                adiabatic_metric: quotient / t_f,
                norm_drift: drift,
            })
        })
        .collect()
}

/// CSV with columns `t_f, final_ground_occupation, adiabatic_metric`.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("t_f,final_ground_occupation,adiabatic_metric\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", fmt_num(p.t_f), fmt_num(p.final_ground_occupation), fmt_num(p.adiabatic_metric)));
    }
    out
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || count == 0 {
        return arg(format!("bad log range [{lo}, {hi}] with {count} points"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect())
}
