//! Minimum-form Gumbel law and its maximum-likelihood fit.
//!
//! `p(x; α, β) = (1/β) exp(z − e^z)` with `z = (x − α)/β`.

use rand::Rng;
use rand_distr::{Distribution, Gumbel};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::sampler::RunResult;

/// Minimum number of samples accepted by [`fit_gumbel_mle`].
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GumbelParams {
    /// Location.
    pub alpha: f64,
    /// Scale, positive.
    pub beta: f64,
}

impl GumbelParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() || !alpha.is_finite() {
            return arg(format!("Gumbel parameters need finite alpha and beta > 0, got ({alpha}, {beta})"));
        }
        Ok(Self { alpha, beta })
    }

    fn z(&self, x: f64) -> f64 {
        (x - self.alpha) / self.beta
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = self.z(x);
        (z - z.exp()).exp() / self.beta
    }

    pub fn cdf(&self, x: f64) -> f64 {
        -(-self.z(x).exp()).exp_m1()
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        let n = samples.len() as f64;
        samples.iter().map(|&x| {
            let z = self.z(x);
            z - z.exp()
        }).sum::<f64>() - n * self.beta.ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Negated maximum-form draw with location −α.
        let g = Gumbel::new(-self.alpha, self.beta).expect("validated parameters");
        -g.sample(rng)
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Minimum-Gumbel density at `x`.
pub fn gumbel_pdf(x: f64, alpha: f64, beta: f64) -> Result<f64> {
    Ok(GumbelParams::new(alpha, beta)?.pdf(x))
}

/// `(Σ w_i x_i, log Σ e^{(x_i − x_max)/β})` with `w_i ∝ e^{x_i/β}`.
fn weighted_stats(samples: &[f64], x_max: f64, beta: f64) -> (f64, f64) {
    let (mut sw, mut swx) = (0.0, 0.0);
    for &x in samples {
        let w = ((x - x_max) / beta).exp();
        sw += w;
        swx += w * x;
    }
    (swx / sw, sw.ln())
}

/// Maximum-likelihood estimate of the minimum-Gumbel parameters.
///
/// The scale solves `β = Σ w_i x_i − x̄` by bisection; the location follows
/// in closed form as `α = β log(mean e^{x_i/β})`.
pub fn fit_gumbel_mle(samples: &[f64]) -> Result<GumbelParams> {
    if samples.len() < MIN_FIT_SAMPLES {
        return arg(format!("need at least {MIN_FIT_SAMPLES} samples, got {}", samples.len()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return arg("samples must be finite");
    }
    let n = samples.len() as f64;
    let x_max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x_min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let range = x_max - x_min;
    if !(range > 0.0) {
        return Err(Error::DegenerateData(format!("all {} samples equal {x_min}", samples.len())));
    }
    let mean = samples.iter().sum::<f64>() / n;
    let g = |beta: f64| weighted_stats(samples, x_max, beta).0 - mean - beta;

    // g > 0 as β → 0⁺ and g(range) < 0 for nonconstant data.
    let (mut lo, mut hi) = (range * 1e-8, range);
    if g(lo) <= 0.0 {
        return Err(Error::DegenerateData("likelihood has no interior maximum".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let beta = 0.5 * (lo + hi);
    let (_, log_sum) = weighted_stats(samples, x_max, beta);
    let alpha = x_max + beta * (log_sum - n.ln());
    GumbelParams::new(alpha, beta)
}

/// Lowest energy of each run, in order.
pub fn run_minima(runs: &[RunResult]) -> Result<Vec<f64>> {
    if runs.is_empty() {
        return arg("no runs given");
    }
    Ok(runs.iter().map(RunResult::e_hat0).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub alpha: f64,
    pub beta: f64,
    pub n_samples: usize,
    pub loglik: f64,
}

pub fn fit_report(samples: &[f64]) -> Result<FitReport> {
    let p = fit_gumbel_mle(samples)?;
    Ok(FitReport { alpha: p.alpha, beta: p.beta, n_samples: samples.len(), loglik: p.log_likelihood(samples) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
        let h = (b - a) / intervals as f64;
        let mut s = f(a) + f(b);
        for i in 1..intervals {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn pdf_values() {
        let p = GumbelParams::new(-21.52, 4.55).unwrap();
        assert!((p.pdf(-21.52) - 1.0 / (4.55 * std::f64::consts::E)).abs() < 1e-15);
        assert!(p.pdf(200.0) == 0.0);
        assert!(gumbel_pdf(0.0, 0.0, 0.0).is_err());
        assert!(GumbelParams::new(0.0, -1.0).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        let p = GumbelParams::new(-21.52, 4.55).unwrap();
        let total = simpson(|x| p.pdf(x), p.alpha - 45.0 * p.beta, p.alpha + 5.0 * p.beta, 200_000);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn cdf_matches_integrated_pdf() {
        let p = GumbelParams::new(1.0, 2.0).unwrap();
        for x in [-3.0, 0.0, 1.0, 4.0] {
            let num = simpson(|t| p.pdf(t), p.alpha - 90.0, x, 100_000);
            assert!((num - p.cdf(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_matches_cdf() {
        let p = GumbelParams::new(-3.0, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = p.sample_n(&mut rng, 20_000);
        for q in [-4.0, -3.0, -2.5] {
            let emp = xs.iter().filter(|&&x| x <= q).count() as f64 / xs.len() as f64;
            assert!((emp - p.cdf(q)).abs() < 0.015, "q={q}");
        }
    }

    #[test]
    fn recovers_parameters() {
        let truth = GumbelParams::new(-21.52, 4.55).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fit = fit_gumbel_mle(&truth.sample_n(&mut rng, 10_000)).unwrap();
        assert!((fit.alpha - truth.alpha).abs() < 0.2);
        assert!((fit.beta - truth.beta).abs() < 0.15);
    }

    #[test]
    fn fit_is_a_local_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = GumbelParams::new(2.0, 1.5).unwrap().sample_n(&mut rng, 500);
        let fit = fit_gumbel_mle(&xs).unwrap();
        let best = fit.log_likelihood(&xs);
        for da in [-0.05, -0.01, 0.0, 0.01, 0.05] {
            for db in [-0.05, -0.01, 0.0, 0.01, 0.05] {
                let q = GumbelParams::new(fit.alpha + da, fit.beta + db).unwrap();
                assert!(q.log_likelihood(&xs) <= best + 1e-9);
            }
        }
    }

    #[test]
    fn fit_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs = GumbelParams::new(0.0, 1.0).unwrap().sample_n(&mut rng, 300);
        let base = fit_gumbel_mle(&xs).unwrap();
        let (a, l) = (-7.25, 3.5);
        let moved = fit_gumbel_mle(&xs.iter().map(|x| a + l * x).collect::<Vec<_>>()).unwrap();
        assert!((moved.alpha - (a + l * base.alpha)).abs() < 1e-6);
        assert!((moved.beta - l * base.beta).abs() < 1e-6);
    }

    #[test]
    fn fit_rejects_bad_data() {
        assert!(matches!(fit_gumbel_mle(&[1.0; 20]), Err(Error::DegenerateData(_))));
        assert!(fit_gumbel_mle(&[1.0, 2.0, 3.0]).is_err());
        let mut xs: Vec<f64> = (0..12).map(f64::from).collect();
        xs[3] = f64::NAN;
        assert!(fit_gumbel_mle(&xs).is_err());
    }

    #[test]
    fn report_fields() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 3.0 - 10.0).collect();
        let r = fit_report(&xs).unwrap();
        assert_eq!(r.n_samples, 40);
        let v = serde_json::to_value(&r).unwrap();
        for k in ["alpha", "beta", "n_samples", "loglik"] {
            assert!(v.get(k).is_some());
        }
        assert!(run_minima(&[]).is_err());
    }
}
