//! Ising models for k-rooks, biased k-rooks and multi-target data association.
//!
//! Every builder produces the problem Hamiltonian
//! `H_P(σ) = σ^T Q σ + q^T σ` as an [`IsingModel`] (so `J = −Q`, `h = −q`,
//! `μ = 1`). A spin of `+1` (bit `1`) marks an occupied cell: a rook, or an
//! entry `S_ij = 1` of the association matrix. Cells are vectorized column by
//! column, so cell `(i, j)` of an `r`-row board is site `j·r + i`.

use nalgebra::{DMatrix, DVector};

use crate::assoc::{AssociationMatrix, CostMatrix};
use crate::error::{arg, Result};
use crate::qubo::{BitVector, IsingModel, LabelBlock};

/// Default quadratic constraint scale.
pub const DEFAULT_C: f64 = 10.0;
/// Default linear constraint scale; equal to [`DEFAULT_C`] so the penalty is exactly one-hot.
pub const DEFAULT_C_TILDE: f64 = 10.0;

/// `k × 1` column of ones.
pub fn ones(k: usize) -> DVector<f64> {
    DVector::from_element(k, 1.0)
}

/// `k × 1` column of ones with a zero first entry.
pub fn ones0(k: usize) -> DVector<f64> {
    let mut v = ones(k);
    if k > 0 {
        v[0] = 0.0;
    }
    v
}

pub fn identity(k: usize) -> DMatrix<f64> {
    DMatrix::identity(k, k)
}

/// Identity with a zero `(1,1)` entry.
pub fn identity0(k: usize) -> DMatrix<f64> {
    let mut m = identity(k);
    if k > 0 {
        m[(0, 0)] = 0.0;
    }
    m
}

/// `1 1^T − I`: ones with a zero diagonal.
pub fn offdiag_ones(k: usize) -> DMatrix<f64> {
    DMatrix::from_element(k, k, 1.0) - identity(k)
}

/// Column-major map between flat sites and `(row, col)` cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteLabels {
    pub rows: usize,
    pub cols: usize,
}

impl SiteLabels {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn site(&self, i: usize, j: usize) -> usize {
        j * self.rows + i
    }

    pub fn cell(&self, site: usize) -> (usize, usize) {
        (site % self.rows, site / self.rows)
    }

    pub fn to_block(&self) -> LabelBlock {
        LabelBlock {
            rows: self.rows,
            cols: self.cols,
            cells: (0..self.n_sites()).map(|s| {
                let (i, j) = self.cell(s);
                [i, j]
            }).collect(),
        }
    }
}

/// `vec(A)`: columns of `A` stacked.
pub fn vectorize(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

fn ising_from(quadratic: &DMatrix<f64>, linear: &DVector<f64>) -> IsingModel {
    let n = linear.len();
    let couplings: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| -quadratic[(i, j)]).collect()).collect();
    let field: Vec<f64> = linear.iter().map(|v| -v).collect();
    IsingModel::new(couplings, field, 1.0, 0.0).expect("builder matrices are square and symmetric")
}

/// k-rooks couplings `Q = I⊗J + J⊗I` and fields `q = θ_r + θ_c = 2(2k−4)·1`.
pub fn krooks_terms(k: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if k < 2 {
        return arg(format!("k-rooks needs k >= 2, got {k}"));
    }
    let wr = identity(k).kronecker(&offdiag_ones(k));
    let wc = offdiag_ones(k).kronecker(&identity(k));
    let theta = (2.0 * k as f64 - 4.0) * ones(k * k);
    Ok((wr + wc, &theta + &theta))
}

pub fn krooks_ising(k: usize) -> Result<IsingModel> {
    let (q, lin) = krooks_terms(k)?;
    Ok(ising_from(&q, &lin))
}

/// k-rooks plus `−|γ0|` on the diagonal cells `(1,1)…(m,m)`.
pub fn biased_krooks_ising(k: usize, gamma0: f64, m: usize) -> Result<IsingModel> {
    if m < 1 || m > k {
        return arg(format!("bias count m = {m} must lie in 1..={k}"));
    }
    let mut model = krooks_ising(k)?;
    let labels = SiteLabels::new(k, k);
    for d in 0..m {
        // H_bias = −|γ0| σ  ⇒  h += |γ0|
        model.add_field(labels.site(d, d), gamma0.abs());
    }
    Ok(model)
}

/// MTDA constraint pieces `(W'_r, W'_c, θ'_r, θ'_c)` for `N` targets, `M` measurements.
pub fn mtda_constraints(n: usize, m: usize) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let (r, c) = (n + 1, m + 1);
    let wr = identity0(c).kronecker(&offdiag_ones(r));
    let wc = offdiag_ones(c).kronecker(&identity0(r));
    let theta_r = (2.0 * n as f64 - 2.0) * ones0(c).kronecker(&ones(r));
    let theta_c = (2.0 * m as f64 - 2.0) * ones(c).kronecker(&ones0(r));
    (wr, wc, theta_r, theta_c)
}

/// `B_ij = (2N−2)·1[j>0] + (2M−2)·1[i>0]`.
pub fn constraint_field_matrix(n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n + 1, m + 1, |i, j| {
        let col = if j > 0 { 2.0 * n as f64 - 2.0 } else { 0.0 };
        let row = if i > 0 { 2.0 * m as f64 - 2.0 } else { 0.0 };
        col + row
    })
}

/// MTDA Hamiltonian with `Q = c(W'_r + W'_c)` and `q = c̃(θ'_r + θ'_c) + vec(Γ)`.
pub fn mtda_ising(gamma: &CostMatrix, c: f64, c_tilde: f64) -> Result<IsingModel> {
    if !(c > 0.0) {
        return arg(format!("constraint scale c = {c} must be positive"));
    }
    if !(c_tilde >= 0.0) {
        return arg(format!("constraint scale c_tilde = {c_tilde} must be nonnegative"));
    }
    let (n, m) = (gamma.n_targets(), gamma.n_meas());
    let (wr, wc, tr, tc) = mtda_constraints(n, m);
    let g = DMatrix::from_fn(n + 1, m + 1, |i, j| gamma.get(i, j));
    let linear = c_tilde * (tr + tc) + vectorize(&g);
    Ok(ising_from(&(c * (wr + wc)), &linear))
}

/// Association matrix encoded by a state; `S_00` is forced to 0.
pub fn decode_state(x: &BitVector, n_targets: usize, n_meas: usize) -> Result<AssociationMatrix> {
    let labels = SiteLabels::new(n_targets + 1, n_meas + 1);
    if x.len() != labels.n_sites() {
        return arg(format!("state has {} bits, expected {}", x.len(), labels.n_sites()));
    }
    let mut s = AssociationMatrix::zeros(n_targets, n_meas);
    for site in 1..labels.n_sites() {
        let (i, j) = labels.cell(site);
        s.set(i, j, x.get(site) == 1);
    }
    Ok(s)
}

/// Column-major bit encoding of an association matrix.
pub fn encode_state(s: &AssociationMatrix) -> BitVector {
    let labels = SiteLabels::new(s.n_targets() + 1, s.n_meas() + 1);
    let mut x = BitVector::zeros(labels.n_sites());
    for site in 0..labels.n_sites() {
        let (i, j) = labels.cell(site);
        x.set(site, s.get(i, j));
    }
    x
}
