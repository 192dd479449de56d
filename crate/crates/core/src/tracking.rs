//! One-dimensional linear-Gaussian target model.
//!
//! State is `(position, velocity)` in metres and metres per second. Targets
//! move under a nearly-constant-velocity model and are observed through
//! `H = [1 0]` with additive Gaussian noise, plus Poisson clutter that is
//! uniform over the field of view.

use nalgebra::{Matrix2, RowVector2, Vector2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

/// Measurement matrix `H = [1 0]`.
pub fn measurement_row() -> RowVector2<f64> {
    RowVector2::new(1.0, 0.0)
}

/// Gaussian state estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetState {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

impl TargetState {
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Result<Self> {
        let asym = (cov[(0, 1)] - cov[(1, 0)]).abs();
        if asym > 1e-12 * (1.0 + cov.abs().max()) {
            return arg("state covariance is not symmetric");
        }
        let s = Self { mean, cov };
        if s.min_eigenvalue() < -1e-12 {
            return arg("state covariance is not positive semidefinite");
        }
        Ok(s)
    }

    pub fn position(&self) -> f64 {
        self.mean[0]
    }

    /// Smallest eigenvalue of the (symmetric) covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        let (a, b, d) = (self.cov[(0, 0)], 0.5 * (self.cov[(0, 1)] + self.cov[(1, 0)]), self.cov[(1, 1)]);
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        mid - rad
    }
}

/// Scenario and sensor parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub n_targets: usize,
    /// Scan interval in seconds.
    pub dt: f64,
    /// Process noise intensity.
    pub sigma_p2: f64,
    /// Measurement variance in m².
    pub sigma_m2: f64,
    pub p_d: f64,
    /// Poisson mean of the clutter count per scan.
    pub lambda: f64,
    pub fov: [f64; 2],
    /// Diagonal of the initial covariance `P_{0|0}`.
    pub p0_diag: [f64; 2],
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            n_targets: 3,
            dt: 1.0,
            sigma_p2: 1.0,
            sigma_m2: 0.1,
            p_d: 0.95,
            lambda: 1.0,
            fov: [0.0, 100.0],
            p0_diag: [0.1, 0.1],
        }
    }
}

impl ScenarioParams {
    pub fn with_targets(n_targets: usize) -> Self {
        Self { n_targets, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_d > 0.0 && self.p_d < 1.0) {
            return arg(format!("detection probability {} must lie in (0, 1)", self.p_d));
        }
        if !(self.lambda >= 0.0) {
            return arg(format!("clutter mean {} must be nonnegative", self.lambda));
        }
        if !(self.sigma_m2 > 0.0) {
            return arg(format!("measurement variance {} must be positive", self.sigma_m2));
        }
        if !(self.fov_len() > 0.0) {
            return arg("field of view must have positive length");
        }
        if !(self.sigma_p2 >= 0.0) {
            return arg("process noise intensity must be nonnegative");
        }
        if self.p0_diag.iter().any(|v| !(*v >= 0.0)) {
            return arg("initial covariance diagonal must be nonnegative");
        }
        Ok(())
    }

    pub fn fov_len(&self) -> f64 {
        self.fov[1] - self.fov[0]
    }

    pub fn initial_cov(&self) -> Matrix2<f64> {
        Matrix2::new(self.p0_diag[0], 0.0, 0.0, self.p0_diag[1])
    }
}

/// Measurements collected at scan `k` (time `k·dt`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub k: usize,
    pub measurements: Vec<f64>,
}

impl Scan {
    pub fn new(k: usize, measurements: Vec<f64>) -> Result<Self> {
        if measurements.iter().any(|y| !y.is_finite()) {
            return arg("measurements must be finite");
        }
        Ok(Self { k, measurements })
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }
}

/// Motion matrix `F` and process covariance `Q_proc` for one scan interval.
pub fn motion_matrices(p: &ScenarioParams) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    let dt = p.dt;
    if !(dt > 0.0) {
        return arg(format!("scan interval {dt} must be positive"));
    }
    let f = Matrix2::new(1.0, dt, 0.0, 1.0);
    let q = p.sigma_p2
        * Matrix2::new(dt.powi(3) / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt);
    Ok((f, q))
}

/// Kalman prediction `(F m, F P F^T + Q)`.
pub fn predict(s: &TargetState, f: &Matrix2<f64>, q: &Matrix2<f64>) -> TargetState {
    let cov = f * s.cov * f.transpose() + q;
    TargetState { mean: f * s.mean, cov: 0.5 * (cov + cov.transpose()) }
}

/// Ground-truth initial kinematics: target `i` (1-based) starts at `(i−1) m` moving at `2(i−1) m/s`.
pub fn init_targets(p: &ScenarioParams) -> Result<Vec<Vector2<f64>>> {
    if p.n_targets == 0 {
        return arg("scenario needs at least one target");
    }
    Ok((0..p.n_targets)
        .map(|i| Vector2::new(i as f64, 2.0 * i as f64))
        .collect())
}

/// One step of the truth process; `stochastic = false` returns `F x`.
pub fn propagate_truth<R: Rng + ?Sized>(
    x: &Vector2<f64>,
    f: &Matrix2<f64>,
    q: &Matrix2<f64>,
    rng: &mut R,
    stochastic: bool,
) -> Vector2<f64> {
    let mean = f * x;
    if !stochastic {
        return mean;
    }
    // Cholesky of a PSD 2x2, tolerant of singular Q.
    let l11 = q[(0, 0)].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { q[(1, 0)] / l11 } else { 0.0 };
    let l22 = (q[(1, 1)] - l21 * l21).max(0.0).sqrt();
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let (z1, z2) = (std.sample(rng), std.sample(rng));
    mean + Vector2::new(l11 * z1, l21 * z1 + l22 * z2)
}

/// Simulates one scan: detections with probability `p_d`, Gaussian noise, Poisson clutter, shuffled.
pub fn simulate_scan<R: Rng + ?Sized>(
    k: usize,
    truth: &[Vector2<f64>],
    p: &ScenarioParams,
    rng: &mut R,
) -> Result<Scan> {
    p.validate()?;
    let noise = Normal::new(0.0, p.sigma_m2.sqrt()).map_err(|e| crate::Error::Argument(e.to_string()))?;
    let mut ys = Vec::with_capacity(truth.len() + 2);
    for x in truth {
        if rng.random::<f64>() < p.p_d {
            ys.push(x[0] + noise.sample(rng));
        }
    }
    let n_clutter = if p.lambda > 0.0 {
        let pois = Poisson::new(p.lambda).map_err(|e| crate::Error::Argument(e.to_string()))?;
        pois.sample(rng) as usize
    } else {
        0
    };
    for _ in 0..n_clutter {
        ys.push(p.fov[0] + p.fov_len() * rng.random::<f64>());
    }
    ys.shuffle(rng);
    Scan::new(k, ys)
}

/// Scenario configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(flatten)]
    pub params: ScenarioParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub deterministic_truth: bool,
    /// Optional fixed measurement sets; entry `k-1` replaces the simulated scan `k`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measurements: Vec<Vec<f64>>,
}

fn default_true() -> bool {
    true
}

impl ScenarioConfig {
    pub fn generate(&self, n_scans: usize) -> Result<Scenario> {
        let mut rng = crate::util::stream_rng(self.seed, 0);
        Scenario::generate(&self.params, n_scans, !self.deterministic_truth, &self.measurements, &mut rng)
    }
}

/// A generated scenario: truth trajectories and scans for `k = 1..=n_scans`.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub params: ScenarioParams,
    /// `truth[k][i]` is target `i` at scan `k`; `truth[0]` is the initial state.
    pub truth: Vec<Vec<Vector2<f64>>>,
    /// `scans[k-1]` is scan `k`.
    pub scans: Vec<Scan>,
}

impl Scenario {
    /// Generates truth and scans. Scans listed in `fixed` replace the simulated ones.
    pub fn generate<R: Rng + ?Sized>(
        params: &ScenarioParams,
        n_scans: usize,
        stochastic_truth: bool,
        fixed: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<Self> {
        params.validate()?;
        let (f, q) = motion_matrices(params)?;
        let mut truth = vec![init_targets(params)?];
        let mut scans = Vec::with_capacity(n_scans);
        for k in 1..=n_scans {
            let next: Vec<_> = truth[k - 1]
                .iter()
                .map(|x| propagate_truth(x, &f, &q, rng, stochastic_truth))
                .collect();
            let scan = simulate_scan(k, &next, params, rng)?;
            let scan = match fixed.get(k - 1) {
                Some(ys) => Scan::new(k, ys.clone())?,
                None => scan,
            };
            scans.push(scan);
            truth.push(next);
        }
        Ok(Self { params: params.clone(), truth, scans })
    }

    /// Initial estimates centred on the true initial states with covariance `P_{0|0}`.
    pub fn initial_estimates(&self) -> Vec<TargetState> {
        self.truth[0]
            .iter()
            .map(|&mean| TargetState { mean, cov: self.params.initial_cov() })
            .collect()
    }

    /// Predictions for scan `k` from estimates centred on the truth at scan `k−1`.
    pub fn truth_anchored_predictions(&self, k: usize) -> Result<Vec<TargetState>> {
        if k == 0 || k > self.scans.len() {
            return arg(format!("scan {k} outside 1..={}", self.scans.len()));
        }
        let (f, q) = motion_matrices(&self.params)?;
        Ok(self.truth[k - 1]
            .iter()
            .map(|&mean| predict(&TargetState { mean, cov: self.params.initial_cov() }, &f, &q))
            .collect())
    }
}
