#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retrial_core::analytic::Constants;
use retrial_core::{DistributionSpec, ModelSpec, RateProfile};

/// A law with the given mean from one of the supported families.
pub fn dist_with_mean<R: Rng>(rng: &mut R, mean: f64) -> DistributionSpec {
    match rng.random_range(0..4) {
        0 => DistributionSpec::exponential(1.0 / mean),
        1 => {
            let k = rng.random_range(2..=5u32);
            DistributionSpec::erlang(k, k as f64 / mean)
        }
        2 => DistributionSpec::deterministic(mean),
        _ => {
            // balanced-means two-phase hyperexponential
            let p: f64 = rng.random_range(0.1..0.9);
            DistributionSpec::hyperexponential(vec![p, 1.0 - p], vec![2.0 * p / mean, 2.0 * (1.0 - p) / mean])
        }
    }
}

pub fn random_model<R: Rng>(rng: &mut R) -> ModelSpec {
    let rates = RateProfile::new(
        rng.random_range(0.1..2.0),
        rng.random_range(0.0..1.2),
        rng.random_range(0.0..1.2),
        rng.random_range(0.0..1.2),
        rng.random_range(0.0..1.2),
    );
    let (b_mean, a_mean) = (rng.random_range(0.3..1.5), rng.random_range(0.1..1.0));
    let service = dist_with_mean(rng, b_mean);
    let seek = dist_with_mean(rng, a_mean);
    ModelSpec::new(rates, service, seek)
}

/// Deterministic corpus of stable models with margin at least `min_margin`
/// and mean orbit size at most `max_ex`.
pub fn stable_corpus(n: usize, seed: u64, min_margin: f64, max_ex: f64) -> Vec<ModelSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let m = random_model(&mut rng);
        let c = Constants::new(&m);
        if c.margin < min_margin {
            continue;
        }
        match retrial_core::analytic::moments_and_throughput(&m) {
            Ok(mo) if mo.ex <= max_ex => out.push(m),
            _ => {}
        }
    }
    out
}

pub fn erlang_model(rates: RateProfile, m: u32, mu: f64, n: u32, alpha: f64) -> ModelSpec {
    ModelSpec::new(rates, DistributionSpec::erlang(m, mu), DistributionSpec::erlang(n, alpha))
}
