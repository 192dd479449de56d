use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Absolute tolerance used when comparing energies for ties.
pub(crate) const ENERGY_TOL: f64 = 1e-9;

/// Deterministic generator for an independent stream of `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Groups sorted values whose distance to the first member of the group is at most `tol`.
pub(crate) fn group_sorted(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some((head, count)) if (v - *head).abs() <= tol => *count += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}
