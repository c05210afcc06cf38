//! Input builders shared by the benchmark targets.

use flockmeter_core::{sample_initial, validate_rate, InitialLaw, ModelParams, ParticleEnsemble, RateSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A box-sampled ensemble with the usual test physics (d = 2, gamma = 1/2).
pub fn bench_ensemble(count: usize, seed: u64) -> ParticleEnsemble {
    let law = InitialLaw::new(vec![3.0, 3.0], vec![1.0, 1.0]).expect("valid law");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_initial(&law, count, 2, &mut rng).expect("valid sample")
}

pub fn bench_params(strength: f64) -> ModelParams {
    let rate = validate_rate(&RateSpec::algebraic(0.5)).expect("valid rate");
    ModelParams::new(strength, rate).expect("valid params")
}

/// A dense random cost matrix for the assignment benchmarks.
pub fn bench_cost_matrix(n: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * n).map(|_| rng.gen_range(0.0..100.0)).collect()
}
