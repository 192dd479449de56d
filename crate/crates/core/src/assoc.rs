//! Association cost matrix and feasible-association likelihoods.
//!
//! Rows `i = 0..=N` are the clutter row followed by the targets; columns
//! `j = 0..=M` are the missed-detection column followed by the measurements.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{arg, Error, Result};
use crate::tracking::{Scan, ScenarioParams, TargetState};

/// Kalman innovation for one target/measurement pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Innovation {
    /// `d = y − H m`.
    pub residual: f64,
    /// `S = H P H^T + σ_M²`.
    pub variance: f64,
}

pub fn innovation(pred: &TargetState, y: f64, sigma_m2: f64) -> Result<Innovation> {
    if !(sigma_m2 > 0.0) {
        return arg(format!("measurement variance {sigma_m2} must be positive"));
    }
    Ok(Innovation { residual: y - pred.mean[0], variance: pred.cov[(0, 0)] + sigma_m2 })
}

/// `½ d²/S + ½ log(2πS)`, the negative log of the predictive density.
pub fn gamma_term(inn: &Innovation) -> Result<f64> {
    let s = inn.variance;
    if !(s > 0.0) {
        return arg(format!("innovation variance {s} must be positive"));
    }
    Ok(0.5 * inn.residual * inn.residual / s + 0.5 * (2.0 * PI * s).ln())
}

/// Binary association matrix `S`; entry `(0, 0)` carries no meaning.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AssociationMatrix {
    n_targets: usize,
    n_meas: usize,
    /// Row-major `(N+1) × (M+1)`.
    cells: Vec<u8>,
}

impl AssociationMatrix {
    pub fn zeros(n_targets: usize, n_meas: usize) -> Self {
        Self { n_targets, n_meas, cells: vec![0; (n_targets + 1) * (n_meas + 1)] }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return arg("association matrix needs at least one row and column");
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return arg("ragged association matrix");
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return arg("association entries must be 0 or 1");
        }
        Ok(Self { n_targets: rows.len() - 1, n_meas: cols - 1, cells: rows.concat() })
    }

    /// All-missed, all-clutter hypothesis.
    pub fn all_missed(n_targets: usize, n_meas: usize) -> Self {
        let mut s = Self::zeros(n_targets, n_meas);
        for i in 1..=n_targets {
            s.set(i, 0, true);
        }
        for j in 1..=n_meas {
            s.set(0, j, true);
        }
        s
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * (self.n_meas + 1) + j] == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.cells[i * (self.n_meas + 1) + j] = v as u8;
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.cells.chunks(self.n_meas + 1).map(<[u8]>::to_vec).collect()
    }

    /// Number of target detections `Σ_{i,j>0} S_ij`.
    pub fn n_detections(&self) -> usize {
        (1..=self.n_targets)
            .map(|i| (1..=self.n_meas).filter(|&j| self.get(i, j)).count())
            .sum()
    }

    /// Every target row and every measurement column holds exactly one entry.
    pub fn is_feasible(&self) -> bool {
        let rows_ok = (1..=self.n_targets).all(|i| (0..=self.n_meas).filter(|&j| self.get(i, j)).count() == 1);
        let cols_ok = (1..=self.n_meas).all(|j| (0..=self.n_targets).filter(|&i| self.get(i, j)).count() == 1);
        rows_ok && cols_ok
    }

    /// Measurement assigned to target `i`, if any.
    pub fn assigned_measurement(&self, i: usize) -> Option<usize> {
        (1..=self.n_meas).find(|&j| self.get(i, j))
    }

    /// Every feasible association matrix for `N` targets and `M` measurements, `S_00 = 0`.
    pub fn enumerate_feasible(n_targets: usize, n_meas: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut used = vec![false; n_meas + 1];
        let mut choice = vec![0usize; n_targets + 1];
        fn rec(
            i: usize,
            n: usize,
            m: usize,
            choice: &mut [usize],
            used: &mut [bool],
            out: &mut Vec<AssociationMatrix>,
        ) {
            if i > n {
                let mut s = AssociationMatrix::zeros(n, m);
                for t in 1..=n {
                    s.set(t, choice[t], true);
                }
                for j in 1..=m {
                    if !used[j] {
                        s.set(0, j, true);
                    }
                }
                out.push(s);
                return;
            }
            choice[i] = 0;
            rec(i + 1, n, m, choice, used, out);
            for j in 1..=m {
                if !used[j] {
                    used[j] = true;
                    choice[i] = j;
                    rec(i + 1, n, m, choice, used, out);
                    used[j] = false;
                }
            }
        }
        rec(1, n_targets, n_meas, &mut choice, &mut used, &mut out);
        out
    }
}

/// Association cost matrix `Γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    n_targets: usize,
    n_meas: usize,
    /// Row-major `(N+1) × (M+1)`.
    entries: Vec<f64>,
    pub p_d: f64,
    pub lambda: f64,
    pub fov_len: f64,
}

impl CostMatrix {
    /// Wraps explicit entries, e.g. for synthetic problems.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 || rows[0].is_empty() {
            return arg("cost matrix needs at least one target row");
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return arg("ragged cost matrix");
        }
        Ok(Self {
            n_targets: rows.len() - 1,
            n_meas: cols - 1,
            entries: rows.concat(),
            p_d: f64::NAN,
            lambda: f64::NAN,
            fov_len: f64::NAN,
        })
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * (self.n_meas + 1) + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n_meas + 1).map(<[f64]>::to_vec).collect()
    }

    /// `Σ_{(i,j)≠(0,0)} Γ_ij S_ij`.
    pub fn cost(&self, s: &AssociationMatrix) -> Result<f64> {
        if s.n_targets != self.n_targets || s.n_meas != self.n_meas {
            return arg("association matrix shape does not match cost matrix");
        }
        let mut c = 0.0;
        for i in 0..=self.n_targets {
            for j in 0..=self.n_meas {
                if (i, j) != (0, 0) && s.get(i, j) {
                    c += self.get(i, j);
                }
            }
        }
        Ok(c)
    }

    /// CSV with header row `i\j,0,1,..,M`, one line per row `i`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i\\j");
        for j in 0..=self.n_meas {
            let _ = write!(out, ",{j}");
        }
        out.push('\n');
        for i in 0..=self.n_targets {
            let _ = write!(out, "{i}");
            for j in 0..=self.n_meas {
                let _ = write!(out, ",{}", self.get(i, j));
            }
            out.push('\n');
        }
        out
    }
}

fn check_likelihood_params(p: &ScenarioParams, n_meas: usize) -> Result<()> {
    p.validate()?;
    if p.lambda == 0.0 && n_meas > 0 {
        return arg("clutter mean 0 makes the false-alarm cost infinite; use lambda > 0");
    }
    Ok(())
}

/// Builds `Γ` from predicted target states and a scan.
pub fn build_cost_matrix(preds: &[TargetState], scan: &Scan, p: &ScenarioParams) -> Result<CostMatrix> {
    let (n, m) = (preds.len(), scan.len());
    if n == 0 {
        return arg("cost matrix needs at least one target");
    }
    check_likelihood_params(p, m)?;
    let miss = -(1.0 - p.p_d).ln();
    let clutter = (p.fov_len() / p.lambda).ln();
    let detect = -p.p_d.ln();
    let mut entries = vec![0.0; (n + 1) * (m + 1)];
    for i in 0..=n {
        for j in 0..=m {
            entries[i * (m + 1) + j] = match (i, j) {
                (_, 0) => miss,
                (0, _) => clutter,
                _ => detect + gamma_term(&innovation(&preds[i - 1], scan.measurements[j - 1], p.sigma_m2)?)?,
            };
        }
    }
    Ok(CostMatrix { n_targets: n, n_meas: m, entries, p_d: p.p_d, lambda: p.lambda, fov_len: p.fov_len() })
}

/// Natural log of the posterior association likelihood `L(S | y)`.
pub fn association_log_likelihood(
    s: &AssociationMatrix,
    preds: &[TargetState],
    scan: &Scan,
    p: &ScenarioParams,
) -> Result<f64> {
    if s.n_targets != preds.len() || s.n_meas != scan.len() {
        return arg("association matrix shape does not match scenario");
    }
    if !s.is_feasible() {
        return Err(Error::Infeasible);
    }
    check_likelihood_params(p, scan.len())?;
    let (n, m, nd) = (s.n_targets as f64, s.n_meas as f64, s.n_detections() as f64);
    let mut ll = 0.0;
    if m - nd > 0.0 {
        ll += (m - nd) * (p.lambda / p.fov_len()).ln();
    }
    ll += (n - nd) * (1.0 - p.p_d).ln() + nd * p.p_d.ln();
    for i in 1..=s.n_targets {
        if let Some(j) = s.assigned_measurement(i) {
            let inn = innovation(&preds[i - 1], scan.measurements[j - 1], p.sigma_m2)?;
            // log N(y; H m, S)
            ll -= gamma_term(&inn)?;
        }
    }
    Ok(ll)
}

/// `L(S | y)` for a feasible `S`.
pub fn association_likelihood(
    s: &AssociationMatrix,
    preds: &[TargetState],
    scan: &Scan,
    p: &ScenarioParams,
) -> Result<f64> {
    association_log_likelihood(s, preds, scan, p).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};

    fn state(pos: f64, cov: Matrix2<f64>) -> TargetState {
        TargetState { mean: Vector2::new(pos, 0.0), cov }
    }

    #[test]
    fn innovation_cases() {
        let p = state(3.0, Matrix2::new(1.0 / 3.0, 0.5, 0.5, 1.0));
        let inn = innovation(&p, 3.0, 0.1).unwrap();
        assert_eq!(inn.residual, 0.0);
        assert!((inn.variance - 0.433_333_333_333_333_3).abs() < 1e-15);
        let z = innovation(&state(0.0, Matrix2::zeros()), 1.0, 0.1).unwrap();
        assert_eq!(z.variance, 0.1);
        assert!(innovation(&p, 0.0, 0.0).is_err());
    }

    #[test]
    fn gamma_term_values() {
        let g = gamma_term(&Innovation { residual: 0.0, variance: 1.0 / (2.0 * PI) }).unwrap();
        assert!(g.abs() < 1e-15);
        let g = gamma_term(&Innovation { residual: 0.0, variance: 0.1 }).unwrap();
        assert!((g - (-0.232_354_013_292_350_1)).abs() < 1e-12, "{g}");
        assert!(gamma_term(&Innovation { residual: 0.0, variance: 0.0 }).is_err());
    }

    #[test]
    fn cost_matrix_defaults() {
        let params = ScenarioParams::default();
        let preds = vec![state(0.0, Matrix2::zeros()), state(10.0, Matrix2::zeros())];
        let scan = Scan::new(1, vec![0.0, 10.5]).unwrap();
        let g = build_cost_matrix(&preds, &scan, &params).unwrap();
        assert!((g.get(0, 1) - 100f64.ln()).abs() < 1e-12);
        assert!((g.get(2, 0) - (-(0.05f64).ln())).abs() < 1e-12);
        assert!((g.get(0, 0) - (-(0.05f64).ln())).abs() < 1e-12);
        let expected = -(0.95f64).ln() + 0.5 * (2.0 * PI * 0.1).ln();
        assert!((g.get(1, 1) - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_clutter_with_measurements_rejected() {
        let params = ScenarioParams { lambda: 0.0, ..Default::default() };
        let preds = vec![state(0.0, Matrix2::zeros())];
        assert!(build_cost_matrix(&preds, &Scan::new(1, vec![1.0]).unwrap(), &params).is_err());
        assert!(build_cost_matrix(&preds, &Scan::new(1, vec![]).unwrap(), &params).is_ok());
    }

    #[test]
    fn likelihood_small_cases() {
        let params = ScenarioParams::default();
        let preds = vec![state(0.0, Matrix2::zeros())];
        let empty = Scan::new(1, vec![]).unwrap();
        let missed = AssociationMatrix::all_missed(1, 0);
        assert!((association_likelihood(&missed, &preds, &empty, &params).unwrap() - 0.05).abs() < 1e-15);

        let one = Scan::new(1, vec![50.0]).unwrap();
        let s = AssociationMatrix::all_missed(1, 1);
        assert!((association_likelihood(&s, &preds, &one, &params).unwrap() - 0.0005).abs() < 1e-15);

        let mut bad = AssociationMatrix::zeros(1, 1);
        bad.set(1, 1, true);
        bad.set(0, 1, true);
        assert!(matches!(association_likelihood(&bad, &preds, &one, &params), Err(Error::Infeasible)));
    }

    #[test]
    fn feasibility_examples() {
        let example = AssociationMatrix::from_rows(&[
            vec![0, 0, 1, 0, 1],
            vec![0, 1, 0, 0, 0],
            vec![1, 0, 0, 0, 0],
            vec![0, 0, 0, 1, 0],
        ])
        .unwrap();
        assert!(example.is_feasible());
        assert_eq!(example.n_detections(), 2);

        let mut double = example.clone();
        double.set(0, 1, true);
        assert!(!double.is_feasible());

        let mut empty_row = example.clone();
        empty_row.set(2, 0, false);
        assert!(!empty_row.is_feasible());

        let mut corner = example;
        corner.set(0, 0, true);
        assert!(corner.is_feasible());
    }

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn feasible_count_formula() {
        for n in 1..=4 {
            for m in 0..=4 {
                let expected: usize = (0..=n.min(m))
                    .map(|d| binom(n, d) * binom(m, d) * (1..=d).product::<usize>())
                    .sum();
                let all = AssociationMatrix::enumerate_feasible(n, m);
                assert_eq!(all.len(), expected, "N={n} M={m}");
                assert!(all.iter().all(AssociationMatrix::is_feasible));
            }
        }
        assert_eq!(AssociationMatrix::enumerate_feasible(3, 3).len(), 34);
    }

    #[test]
    fn csv_layout() {
        let g = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.5]]).unwrap();
        assert_eq!(g.to_csv(), "i\\j,0,1\n0,1,2\n1,3,4.5\n");
    }
}
