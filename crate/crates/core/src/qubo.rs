//! QUBO, Ising and binary ILP problem forms.
//!
//! The three forms are related by the substitution `σ = 2x − e`. Constant
//! energy shifts that textbook derivations drop are carried in `offset`, so a
//! conversion preserves the energy of every state, not only the argmin.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::util::ENERGY_TOL;

/// Largest variable count accepted by [`brute_force_solve`].
pub const BRUTE_FORCE_LIMIT: usize = 24;

const SYMMETRY_TOL: f64 = 1e-12;

/// A binary assignment `x ∈ {0,1}^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector(Vec<u8>);

impl BitVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return arg(format!("bit value {b} is not 0 or 1"));
        }
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// Bits of `index`, site `i` taken from bit `i` (least significant first).
    pub fn from_index(index: u64, n: usize) -> Self {
        Self((0..n).map(|i| ((index >> i) & 1) as u8).collect())
    }

    /// Inverse of [`BitVector::from_index`].
    pub fn index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = bit as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn to_spins(&self) -> SpinVector {
        SpinVector(self.0.iter().map(|&b| 2 * b as i8 - 1).collect())
    }

    /// Parses the `"0101"` string form written by [`fmt::Display`].
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => arg(format!("invalid bit character {other:?}")),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Self)
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A spin configuration `σ ∈ {−1,+1}^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(s) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return arg(format!("spin value {s} is not -1 or +1"));
        }
        Ok(Self(spins))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// `x = (σ + e) / 2`.
    pub fn to_bits(&self) -> BitVector {
        BitVector(self.0.iter().map(|&s| ((s + 1) / 2) as u8).collect())
    }
}

fn check_square(rows: &[Vec<f64>], what: &str) -> Result<usize> {
    let n = rows.len();
    if n == 0 {
        return arg(format!("{what} must have at least one row"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return arg(format!("{what} is not square: row of length {} in {n}x{n}", r.len()));
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (rows[i][j], rows[j][i]);
            if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                return arg(format!("{what} is not symmetric at ({i}, {j}): {a} vs {b}"));
            }
        }
    }
    Ok(n)
}

fn flatten_symmetric(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = if i <= j { rows[i][j] } else { rows[j][i] };
        }
    }
    out
}

/// `min x^T Q x + offset` over `x ∈ {0,1}^n`, with `Q` symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct Qubo {
    n: usize,
    q: Vec<f64>,
    offset: f64,
}

impl Qubo {
    pub fn new(matrix: Vec<Vec<f64>>, offset: f64) -> Result<Self> {
        let n = check_square(&matrix, "QUBO matrix")?;
        Ok(Self { n, q: flatten_symmetric(&matrix), offset })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return arg("QUBO needs at least one variable");
        }
        Ok(Self { n, q: vec![0.0; n * n], offset: 0.0 })
    }

    /// A diagonal QUBO: the linear form `α^T x` written as `x^T Diag(α) x`.
    pub fn diagonal(alpha: &[f64]) -> Result<Self> {
        let mut q = Self::zeros(alpha.len())?;
        for (i, &a) in alpha.iter().enumerate() {
            q.q[i * q.n + i] = a;
        }
        Ok(q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    /// Adds `value` to both `Q[i][j]` and `Q[j][i]` (once on the diagonal).
    pub fn add_symmetric(&mut self, i: usize, j: usize, value: f64) {
        self.q[i * self.n + j] += value;
        if i != j {
            self.q[j * self.n + i] += value;
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.q.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// `x^T Q x + offset`.
    pub fn energy(&self, x: &BitVector) -> Result<f64> {
        if x.len() != self.n {
            return arg(format!("state has {} bits, QUBO has {} variables", x.len(), self.n));
        }
        Ok(self.energy_bits(x.as_slice()))
    }

    pub(crate) fn energy_bits(&self, x: &[u8]) -> f64 {
        let mut e = 0.0;
        for i in (0..self.n).filter(|&i| x[i] == 1) {
            let row = &self.q[i * self.n..(i + 1) * self.n];
            for j in (0..self.n).filter(|&j| x[j] == 1) {
                e += row[j];
            }
        }
        e + self.offset
    }

    fn energy_index(&self, index: u64) -> f64 {
        let bits: Vec<u8> = (0..self.n).map(|i| ((index >> i) & 1) as u8).collect();
        self.energy_bits(&bits)
    }

    /// Exact inverse mapping `x = (σ + e)/2`: `J = −Q/4`, `h = −Qe/2`, `μ = 1`.
    pub fn to_ising(&self) -> IsingModel {
        let n = self.n;
        let j: Vec<f64> = self.q.iter().map(|&v| -0.25 * v).collect();
        let row_sums: Vec<f64> = self.q.chunks(n).map(|r| r.iter().sum::<f64>()).collect();
        let h: Vec<f64> = row_sums.iter().map(|&s| -0.5 * s).collect();
        let total: f64 = row_sums.iter().sum();
        IsingModel { n, j, h, mu: 1.0, offset: self.offset + 0.25 * total }
    }
}

/// `H(σ) = −σ^T J σ − μ h^T σ + offset` over `σ ∈ {−1,+1}^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    n: usize,
    j: Vec<f64>,
    h: Vec<f64>,
    mu: f64,
    offset: f64,
}

impl IsingModel {
    pub fn new(couplings: Vec<Vec<f64>>, field: Vec<f64>, mu: f64, offset: f64) -> Result<Self> {
        let n = check_square(&couplings, "coupling matrix")?;
        if field.len() != n {
            return arg(format!("field has length {}, expected {n}", field.len()));
        }
        if !mu.is_finite() {
            return arg("magnetic moment must be finite");
        }
        Ok(Self { n, j: flatten_symmetric(&couplings), h: field, mu, offset })
    }

    /// Model with zero couplings, zero field, `μ = 1`.
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return arg("Ising model needs at least one spin");
        }
        Ok(Self { n, j: vec![0.0; n * n], h: vec![0.0; n], mu: 1.0, offset: 0.0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn field(&self) -> &[f64] {
        &self.h
    }

    #[inline]
    pub fn coupling(&self, i: usize, k: usize) -> f64 {
        self.j[i * self.n + k]
    }

    pub fn couplings(&self) -> Vec<Vec<f64>> {
        self.j.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn add_coupling(&mut self, i: usize, k: usize, value: f64) {
        self.j[i * self.n + k] += value;
        if i != k {
            self.j[k * self.n + i] += value;
        }
    }

    pub fn add_field(&mut self, i: usize, value: f64) {
        self.h[i] += value;
    }

    /// Largest absolute coupling or effective field `μ h_i`.
    pub fn max_abs_coefficient(&self) -> f64 {
        let jmax = self.j.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let hmax = self.h.iter().fold(0.0f64, |m, v| m.max((self.mu * v).abs()));
        jmax.max(hmax)
    }

    pub fn energy(&self, sigma: &SpinVector) -> Result<f64> {
        if sigma.len() != self.n {
            return arg(format!("state has {} spins, model has {}", sigma.len(), self.n));
        }
        Ok(self.energy_spins(sigma.as_slice()))
    }

    /// Energy of the spin state `2x − e`.
    pub fn energy_of_bits(&self, x: &BitVector) -> Result<f64> {
        if x.len() != self.n {
            return arg(format!("state has {} bits, model has {} spins", x.len(), self.n));
        }
        let spins: Vec<i8> = x.as_slice().iter().map(|&b| 2 * b as i8 - 1).collect();
        Ok(self.energy_spins(&spins))
    }

    pub(crate) fn energy_spins(&self, s: &[i8]) -> f64 {
        let n = self.n;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..n {
            let si = s[i] as f64;
            let row = &self.j[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for k in 0..n {
                acc += row[k] * s[k] as f64;
            }
            quad += si * acc;
            lin += self.h[i] * si;
        }
        -quad - self.mu * lin + self.offset
    }

    /// `Q = −4J + Diag(4Je − 2μh)`, offset adjusted so every state keeps its energy.
    pub fn to_qubo(&self) -> Qubo {
        let n = self.n;
        let mut q: Vec<f64> = self.j.iter().map(|&v| -4.0 * v).collect();
        let mut je_total = 0.0;
        let mut h_total = 0.0;
        for i in 0..n {
            let je: f64 = self.j[i * n..(i + 1) * n].iter().sum();
            je_total += je;
            h_total += self.h[i];
            q[i * n + i] += 4.0 * je - 2.0 * self.mu * self.h[i];
        }
        Qubo { n, q, offset: self.offset + self.mu * h_total - je_total }
    }
}

/// `min c^T x` subject to `A x = b`, `x ∈ {0,1}^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryIlp {
    a: Vec<Vec<i64>>,
    b: Vec<i64>,
    c: Vec<f64>,
}

impl BinaryIlp {
    pub fn new(a: Vec<Vec<i64>>, b: Vec<i64>, c: Vec<f64>) -> Result<Self> {
        let (m, n) = (a.len(), c.len());
        if m == 0 || n == 0 {
            return arg("ILP needs at least one constraint and one variable");
        }
        if b.len() != m {
            return arg(format!("b has length {}, A has {m} rows", b.len()));
        }
        if a.iter().any(|row| row.len() != n) {
            return arg(format!("every row of A must have {n} entries"));
        }
        Ok(Self { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn objective(&self, x: &BitVector) -> f64 {
        self.c.iter().zip(x.as_slice()).map(|(c, &b)| c * b as f64).sum()
    }

    fn residuals<'a>(&'a self, x: &'a BitVector) -> impl Iterator<Item = i64> + 'a {
        self.a.iter().zip(&self.b).map(move |(row, &bj)| {
            row.iter().zip(x.as_slice()).map(|(&a, &xi)| a * xi as i64).sum::<i64>() - bj
        })
    }

    pub fn is_feasible(&self, x: &BitVector) -> bool {
        self.residuals(x).all(|r| r == 0)
    }

    /// `Σ w_j (A_j x − b_j)^2`.
    pub fn penalty(&self, x: &BitVector, weights: &[f64]) -> f64 {
        self.residuals(x).zip(weights).map(|(r, w)| w * (r * r) as f64).sum()
    }

    /// A uniform weight above which every feasible point beats every infeasible one.
    pub fn feasibility_weight(&self) -> f64 {
        self.c.iter().map(|c| c.abs()).sum::<f64>() + 1.0
    }

    /// `Q_BILP = Diag(c) + Σ w_j (A_j^T A_j − 2 Diag(b_j A_j))` with offset `Σ w_j b_j²`.
    pub fn to_qubo(&self, weights: &[f64]) -> Result<Qubo> {
        if weights.len() != self.m() {
            return arg(format!("{} weights for {} constraints", weights.len(), self.m()));
        }
        if let Some(w) = weights.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
            return arg(format!("penalty weight {w} must be positive"));
        }
        let n = self.n();
        let mut q = Qubo::diagonal(&self.c)?;
        let mut offset = 0.0;
        for ((row, &bj), &w) in self.a.iter().zip(&self.b).zip(weights) {
            for i in 0..n {
                for k in 0..n {
                    q.q[i * n + k] += w * (row[i] * row[k]) as f64;
                }
                q.q[i * n + i] -= 2.0 * w * (bj * row[i]) as f64;
            }
            offset += w * (bj * bj) as f64;
        }
        q.offset = offset;
        Ok(q)
    }
}

/// Exact minimum of a QUBO and every state attaining it.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceSolution {
    pub energy: f64,
    n: usize,
    /// State indices (see [`BitVector::from_index`]), ascending.
    pub argmin_indices: Vec<u64>,
}

impl BruteForceSolution {
    pub fn argmins(&self) -> impl Iterator<Item = BitVector> + '_ {
        self.argmin_indices.iter().map(move |&i| BitVector::from_index(i, self.n))
    }

    pub fn degeneracy(&self) -> usize {
        self.argmin_indices.len()
    }
}

/// Exhaustive minimization over all `2^n` states.
///
/// The state space is split into blocks walked in Gray-code order; candidate
/// minima are re-evaluated directly before the tie set is formed, so the
/// returned energies carry no accumulated rounding.
pub fn brute_force_solve(q: &Qubo) -> Result<BruteForceSolution> {
    let n = q.n;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit { what: "brute-force variable count", actual: n, limit: BRUTE_FORCE_LIMIT });
    }
    let low_bits = n.min(16);
    let blocks = 1u64 << (n - low_bits);
    let slack = 1e-6 * (1.0 + q.q.iter().map(|v| v.abs()).sum::<f64>());

    let partials: Vec<(f64, Vec<u64>)> = (0..blocks)
        .into_par_iter()
        .map(|block| gray_block(q, block << low_bits, low_bits, slack))
        .collect();

    let coarse_min = partials.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut candidates: Vec<(u64, f64)> = partials
        .into_iter()
        .filter(|p| p.0 <= coarse_min + 2.0 * slack)
        .flat_map(|(_, c)| c)
        .map(|idx| (idx, q.energy_index(idx)))
        .collect();
    let energy = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    candidates.retain(|c| c.1 <= energy + ENERGY_TOL);
    let mut argmin_indices: Vec<u64> = candidates.into_iter().map(|c| c.0).collect();
    argmin_indices.sort_unstable();
    Ok(BruteForceSolution { energy, n, argmin_indices })
}

/// Walks the `2^low_bits` states sharing the high bits of `prefix`.
fn gray_block(q: &Qubo, prefix: u64, low_bits: usize, slack: f64) -> (f64, Vec<u64>) {
    let n = q.n;
    let mut x: Vec<u8> = (0..n).map(|i| ((prefix >> i) & 1) as u8).collect();
    // field[k] = Σ_{j≠k} Q_kj x_j
    let mut field: Vec<f64> = (0..n)
        .map(|k| (0..n).filter(|&j| j != k && x[j] == 1).map(|j| q.get(k, j)).sum())
        .collect();
    let mut energy = q.energy_bits(&x);
    let mut index = prefix;
    let mut best = energy;
    let mut cands = vec![index];

    for step in 1u64..(1u64 << low_bits) {
        let k = step.trailing_zeros() as usize;
        let delta = q.get(k, k) + 2.0 * field[k];
        let sign = if x[k] == 0 { 1.0 } else { -1.0 };
        energy += sign * delta;
        x[k] ^= 1;
        index ^= 1 << k;
        for j in (0..n).filter(|&j| j != k) {
            field[j] += sign * q.get(j, k);
        }
        if energy < best - slack {
            best = energy;
            cands.clear();
            cands.push(index);
        } else if energy <= best + slack {
            if energy < best {
                best = energy;
            }
            cands.push(index);
        }
    }
    // Drop anything that fell out of the window after later improvements.
    let keep: Vec<u64> = cands
        .into_iter()
        .filter(|&i| q.energy_index(i) <= best + 2.0 * slack)
        .collect();
    (best, keep)
}

/// Whether a serialized problem holds QUBO or Ising coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Qubo,
    Ising,
}

/// Site-to-cell map stored alongside association problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelBlock {
    pub rows: usize,
    pub cols: usize,
    /// `cells[site] = [i, j]`.
    pub cells: Vec<[usize; 2]>,
}

/// JSON problem file.
///
/// `quadratic` holds `[i, j, value]` with `i ≤ j`; the mirrored entry is
/// implied. For `qubo`, `linear` is added to the diagonal of `Q`. For `ising`,
/// `quadratic` holds `J` and `linear` holds `μh`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub kind: ProblemKind,
    pub n: usize,
    pub quadratic: Vec<(usize, usize, f64)>,
    pub linear: Vec<f64>,
    pub offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<LabelBlock>,
}

impl ProblemFile {
    pub fn from_qubo(q: &Qubo) -> Self {
        let n = q.n;
        let mut quadratic = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let v = q.get(i, j);
                if v != 0.0 {
                    quadratic.push((i, j, v));
                }
            }
        }
        let linear = (0..n).map(|i| q.get(i, i)).collect();
        Self { kind: ProblemKind::Qubo, n, quadratic, linear, offset: q.offset, labels: None }
    }

    pub fn from_ising(m: &IsingModel) -> Self {
        let n = m.n;
        let mut quadratic = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = m.coupling(i, j);
                if v != 0.0 {
                    quadratic.push((i, j, v));
                }
            }
        }
        let linear = m.h.iter().map(|&h| m.mu * h).collect();
        Self { kind: ProblemKind::Ising, n, quadratic, linear, offset: m.offset, labels: None }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return arg("problem needs at least one variable");
        }
        if self.linear.len() != self.n {
            return arg(format!("linear has {} entries, n = {}", self.linear.len(), self.n));
        }
        if let Some(&(i, j, _)) = self.quadratic.iter().find(|&&(i, j, _)| i > j || j >= self.n) {
            return arg(format!("quadratic entry ({i}, {j}) must satisfy i <= j < n"));
        }
        Ok(())
    }

    pub fn to_qubo(&self) -> Result<Qubo> {
        self.validate()?;
        match self.kind {
            ProblemKind::Ising => Ok(self.to_ising()?.to_qubo()),
            ProblemKind::Qubo => {
                let mut q = Qubo::zeros(self.n)?;
                for &(i, j, v) in &self.quadratic {
                    q.add_symmetric(i, j, v);
                }
                for (i, &v) in self.linear.iter().enumerate() {
                    q.add_symmetric(i, i, v);
                }
                q.offset = self.offset;
                Ok(q)
            }
        }
    }

    pub fn to_ising(&self) -> Result<IsingModel> {
        self.validate()?;
        match self.kind {
            ProblemKind::Qubo => Ok(self.to_qubo()?.to_ising()),
            ProblemKind::Ising => {
                let mut m = IsingModel::zeros(self.n)?;
                for &(i, j, v) in &self.quadratic {
                    m.add_coupling(i, j, v);
                }
                m.h.copy_from_slice(&self.linear);
                m.offset = self.offset;
                Ok(m)
            }
        }
    }
}
