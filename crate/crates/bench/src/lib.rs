//! Fixtures shared by the solver benchmarks.

use maxent_core::scenario::{builtin_scenario, Setup};
use maxent_core::{Element, MeanValue};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A validated built-in scenario.
pub fn setup(name: &str) -> Setup {
    builtin_scenario(name).expect("built-in name").setup().expect("built-in scenarios validate")
}

/// Mean values of `n` seeded random states.
pub fn interior_means(setup: &Setup, n: usize, seed: u64) -> Vec<MeanValue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| setup.model.project_mean(&setup.model.space().random_state(&mut rng)).expect("state of the model"))
        .collect()
}

/// `n` seeded random states.
pub fn states(setup: &Setup, n: usize, seed: u64) -> Vec<Element> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| setup.model.space().random_state(&mut rng)).collect()
}
