//! Hybrid soft association and the JPDA tracking recursion.
//!
//! Sampled low-energy states are decoded into association matrices, weighted
//! by their classical likelihood and marginalized into target/measurement
//! weights, which drive a moment-matched Gaussian update.

use std::collections::HashMap;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::assoc::{association_log_likelihood, build_cost_matrix, innovation, AssociationMatrix, CostMatrix};
use crate::builders::{decode_state, encode_state, mtda_ising, DEFAULT_C, DEFAULT_C_TILDE};
use crate::error::{arg, Error, Result};
use crate::qubo::IsingModel;
use crate::sampler::{density_of_states, run, AnnealParams, RunResult};
use crate::tracking::{motion_matrices, predict, Scan, ScenarioParams, TargetState};

pub const DEFAULT_TOP_K: usize = 64;
/// Largest target or measurement count for [`exact_jpda_reference`].
pub const EXACT_REFERENCE_LIMIT: usize = 4;

/// Normalized weights over distinct feasible association matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociationPosterior {
    states: Vec<AssociationMatrix>,
    weights: Vec<f64>,
}

impl AssociationPosterior {
    /// Normalizes log-likelihoods with a log-sum-exp shift.
    pub fn from_log_likelihoods(states: Vec<AssociationMatrix>, log_likelihoods: &[f64]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyPosterior);
        }
        if states.len() != log_likelihoods.len() {
            return arg("state and likelihood counts differ");
        }
        if states.iter().any(|s| !s.is_feasible()) {
            return Err(Error::Infeasible);
        }
        let top = log_likelihoods.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return arg("no state has a finite likelihood");
        }
        let raw: Vec<f64> = log_likelihoods.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        Ok(Self { states, weights: raw.into_iter().map(|w| w / total).collect() })
    }

    pub fn certain(state: AssociationMatrix) -> Result<Self> {
        Self::from_log_likelihoods(vec![state], &[0.0])
    }

    pub fn states(&self) -> &[AssociationMatrix] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Highest-weight state (first one on ties).
    pub fn map_state(&self) -> &AssociationMatrix {
        let best = self
            .weights
            .iter()
            .enumerate()
            .fold(0, |b, (i, &w)| if w > self.weights[b] { i } else { b });
        &self.states[best]
    }

    /// Weight of `s`, zero if absent.
    pub fn weight_of(&self, s: &AssociationMatrix) -> f64 {
        self.states.iter().position(|t| t == s).map_or(0.0, |i| self.weights[i])
    }
}

/// `β[i][j]`: posterior probability that `S_ij = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalWeights {
    n_targets: usize,
    n_meas: usize,
    values: Vec<f64>,
}

impl MarginalWeights {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
            return arg("marginal weights must form a nonempty rectangle");
        }
        Ok(Self { n_targets: rows.len() - 1, n_meas: rows[0].len() - 1, values: rows.concat() })
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.n_meas + 1) + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n_meas + 1).map(<[f64]>::to_vec).collect()
    }
}

pub fn marginal_probs(post: &AssociationPosterior) -> MarginalWeights {
    let (n, m) = (post.states[0].n_targets(), post.states[0].n_meas());
    let mut values = vec![0.0; (n + 1) * (m + 1)];
    for (s, &w) in post.states.iter().zip(&post.weights) {
        for i in 0..=n {
            for j in 0..=m {
                if s.get(i, j) {
                    values[i * (m + 1) + j] += w;
                }
            }
        }
    }
    MarginalWeights { n_targets: n, n_meas: m, values }
}

/// A distinct feasible state drawn from a run, with its energy and shot count.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub state: AssociationMatrix,
    pub energy: f64,
    pub count: usize,
}

/// Distinct feasible decoded states of a run, lowest energy first, plus the infeasible shot count.
pub fn feasible_candidates(model: &IsingModel, r: &RunResult, n_targets: usize, n_meas: usize) -> Result<(Vec<Candidate>, usize)> {
    let mut seen: HashMap<AssociationMatrix, usize> = HashMap::new();
    let mut out: Vec<Candidate> = Vec::new();
    let mut infeasible = 0;
    for shot in &r.shots {
        let s = decode_state(&shot.state, n_targets, n_meas)?;
        if !s.is_feasible() {
            infeasible += 1;
            continue;
        }
        match seen.get(&s) {
            Some(&k) => out[k].count += 1,
            None => {
                let energy = model.energy_of_bits(&encode_state(&s))?;
                seen.insert(s.clone(), out.len());
                out.push(Candidate { state: s, energy, count: 1 });
            }
        }
    }
    sort_candidates(&mut out);
    Ok((out, infeasible))
}

fn sort_candidates(c: &mut [Candidate]) {
    c.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then_with(|| encode_state(&a.state).index().cmp(&encode_state(&b.state).index()))
    });
}

fn posterior_from_candidates(
    candidates: &[Candidate],
    preds: &[TargetState],
    scan: &Scan,
    p: &ScenarioParams,
    top_k: usize,
) -> Result<AssociationPosterior> {
    if top_k == 0 {
        return arg("top_k must be positive");
    }
    let kept: Vec<AssociationMatrix> = candidates.iter().take(top_k).map(|c| c.state.clone()).collect();
    let lls = kept
        .iter()
        .map(|s| association_log_likelihood(s, preds, scan, p))
        .collect::<Result<Vec<_>>>()?;
    AssociationPosterior::from_log_likelihoods(kept, &lls)
}

/// Posterior over the `top_k` lowest-energy distinct feasible states of a run.
///
/// Duplicate shots do not change a state's weight.
pub fn soft_association(
    r: &RunResult,
    model: &IsingModel,
    preds: &[TargetState],
    scan: &Scan,
    p: &ScenarioParams,
    top_k: usize,
) -> Result<AssociationPosterior> {
    if r.shots.is_empty() {
        return arg("run has no shots");
    }
    let (candidates, _) = feasible_candidates(model, r, preds.len(), scan.len())?;
    posterior_from_candidates(&candidates, preds, scan, p, top_k)
}

/// Posterior over every feasible association, by enumeration.
pub fn exact_jpda_reference(preds: &[TargetState], scan: &Scan, p: &ScenarioParams) -> Result<AssociationPosterior> {
    let (n, m) = (preds.len(), scan.len());
    if n > EXACT_REFERENCE_LIMIT {
        return Err(Error::SizeLimit { what: "reference target count", actual: n, limit: EXACT_REFERENCE_LIMIT });
    }
    if m > EXACT_REFERENCE_LIMIT {
        return Err(Error::SizeLimit { what: "reference measurement count", actual: m, limit: EXACT_REFERENCE_LIMIT });
    }
    let states = AssociationMatrix::enumerate_feasible(n, m);
    let lls = states
        .iter()
        .map(|s| association_log_likelihood(s, preds, scan, p))
        .collect::<Result<Vec<_>>>()?;
    AssociationPosterior::from_log_likelihoods(states, &lls)
}

/// Moment-matched update of each target over its marginal association weights.
pub fn jpda_update(preds: &[TargetState], scan: &Scan, beta: &MarginalWeights, sigma_m2: f64) -> Result<Vec<TargetState>> {
    if beta.n_targets() != preds.len() || beta.n_meas() != scan.len() {
        return arg("marginal weights shape does not match scenario");
    }
    preds
        .iter()
        .enumerate()
        .map(|(t, pred)| {
            let i = t + 1;
            let row_sum: f64 = (0..=scan.len()).map(|j| beta.get(i, j)).sum();
            if (row_sum - 1.0).abs() > 1e-6 {
                return arg(format!("weights of target {i} sum to {row_sum}, expected 1"));
            }
            let prior = pred.cov;
            let s = prior[(0, 0)] + sigma_m2;
            let gain: Vector2<f64> = prior.column(0) / s;
            let cond_cov = prior - gain * prior.row(0);

            let mut comps: Vec<(f64, Vector2<f64>, Matrix2<f64>)> = vec![(beta.get(i, 0), pred.mean, prior)];
            for (j, &y) in scan.measurements.iter().enumerate() {
                let w = beta.get(i, j + 1);
                if w > 0.0 {
                    let d = innovation(pred, y, sigma_m2)?.residual;
                    comps.push((w, pred.mean + gain * d, cond_cov));
                }
            }
            let mean: Vector2<f64> = comps.iter().map(|(w, m, _)| *w * m).sum::<Vector2<f64>>() / row_sum;
            let mut cov = Matrix2::zeros();
            for (w, m, c) in &comps {
                let dm = m - mean;
                cov += *w * (c + dm * dm.transpose());
            }
            cov /= row_sum;
            cov = 0.5 * (cov + cov.transpose());
            Ok(TargetState { mean, cov })
        })
        .collect()
}

/// Settings of the tracking recursion beyond the sampler.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionOptions {
    pub c: f64,
    pub c_tilde: f64,
    pub top_k: usize,
    /// Add every feasible association to the sampled candidates (small problems only).
    pub enumerate_feasible: bool,
}

impl Default for RecursionOptions {
    fn default() -> Self {
        Self { c: DEFAULT_C, c_tilde: DEFAULT_C_TILDE, top_k: DEFAULT_TOP_K, enumerate_feasible: false }
    }
}

/// Everything one recursion step produced besides the updated states.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub predicted: Vec<TargetState>,
    pub cost: CostMatrix,
    pub e_hat0: f64,
    pub density_of_states: Vec<(f64, f64)>,
    /// Lowest-energy feasible decoded state, if any shot was feasible.
    pub hard_assignment: Option<AssociationMatrix>,
    pub posterior: AssociationPosterior,
    pub marginals: MarginalWeights,
    /// Shot count of each posterior state, in posterior order.
    pub sample_counts: Vec<usize>,
    pub infeasible_shots: usize,
    /// True when no feasible state was sampled and the all-missed hypothesis was used.
    pub fallback: bool,
}

/// Predict, build and sample the association problem, then update.
pub fn recursion_step(
    states: &[TargetState],
    scan: &Scan,
    p: &ScenarioParams,
    ap: &AnnealParams,
    opts: &RecursionOptions,
) -> Result<(Vec<TargetState>, StepDiagnostics)> {
    let (f, q) = motion_matrices(p)?;
    let predicted: Vec<TargetState> = states.iter().map(|s| predict(s, &f, &q)).collect();
    step_from_predictions(predicted, scan, p, ap, opts)
}

/// [`recursion_step`] with predictions supplied by the caller.
pub fn step_from_predictions(
    predicted: Vec<TargetState>,
    scan: &Scan,
    p: &ScenarioParams,
    ap: &AnnealParams,
    opts: &RecursionOptions,
) -> Result<(Vec<TargetState>, StepDiagnostics)> {
    let (n, m) = (predicted.len(), scan.len());
    let cost = build_cost_matrix(&predicted, scan, p)?;
    let model = mtda_ising(&cost, opts.c, opts.c_tilde)?;
    let result = run(&model, ap)?;
    let (mut candidates, infeasible_shots) = feasible_candidates(&model, &result, n, m)?;
    let hard_assignment = candidates.first().map(|c| c.state.clone());
    if opts.enumerate_feasible {
        let known: Vec<AssociationMatrix> = candidates.iter().map(|c| c.state.clone()).collect();
        for s in AssociationMatrix::enumerate_feasible(n, m) {
            if !known.contains(&s) {
                let energy = model.energy_of_bits(&encode_state(&s))?;
                candidates.push(Candidate { state: s, energy, count: 0 });
            }
        }
        sort_candidates(&mut candidates);
    }
    let (posterior, sample_counts, fallback) = match posterior_from_candidates(&candidates, &predicted, scan, p, opts.top_k) {
        Ok(post) => {
            let counts = candidates.iter().take(post.len()).map(|c| c.count).collect();
            (post, counts, false)
        }
        Err(Error::EmptyPosterior) => (AssociationPosterior::certain(AssociationMatrix::all_missed(n, m))?, vec![0], true),
        Err(e) => return Err(e),
    };
    let marginals = marginal_probs(&posterior);
    let updated = jpda_update(&predicted, scan, &marginals, p.sigma_m2)?;
    let diagnostics = StepDiagnostics {
        predicted,
        cost,
        e_hat0: result.e_hat0(),
        density_of_states: density_of_states(&result)?,
        hard_assignment,
        posterior,
        marginals,
        sample_counts,
        infeasible_shots,
        fallback,
    };
    Ok((updated, diagnostics))
}

/// Mean and covariance in plain arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianRecord {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl From<&TargetState> for GaussianRecord {
    fn from(s: &TargetState) -> Self {
        Self {
            mean: [s.mean[0], s.mean[1]],
            cov: [[s.cov[(0, 0)], s.cov[(0, 1)]], [s.cov[(1, 0)], s.cov[(1, 1)]]],
        }
    }
}

/// One line of the track output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub scan: usize,
    pub measurements: Vec<f64>,
    pub predicted: Vec<GaussianRecord>,
    pub updated: Vec<GaussianRecord>,
    pub beta: Vec<Vec<f64>>,
    pub hard_assignment: Option<Vec<Vec<u8>>>,
    pub e_hat0: f64,
    pub infeasible_shots: usize,
    pub posterior_states: usize,
    pub fallback: bool,
    pub density_of_states: Vec<(f64, f64)>,
}

impl TrackRecord {
    pub fn new(scan: &Scan, updated: &[TargetState], d: &StepDiagnostics) -> Self {
        Self {
            scan: scan.k,
            measurements: scan.measurements.clone(),
            predicted: d.predicted.iter().map(GaussianRecord::from).collect(),
            updated: updated.iter().map(GaussianRecord::from).collect(),
            beta: d.marginals.rows(),
            hard_assignment: d.hard_assignment.as_ref().map(AssociationMatrix::rows),
            e_hat0: d.e_hat0,
            infeasible_shots: d.infeasible_shots,
            posterior_states: d.posterior.len(),
            fallback: d.fallback,
            density_of_states: d.density_of_states.clone(),
        }
    }
}
