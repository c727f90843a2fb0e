#![allow(dead_code)]

use std::sync::Arc;

use dske::sbox::{validate_params, SecretParams};
use proptest::prelude::*;

use crate::oracle;

pub fn primes_to(limit: u64) -> Vec<u64> {
    (2..=limit).filter(|&x| oracle::is_prime_naive(x)).collect()
}

/// Valid `(p, q, n)` with `q <= q_max`.
pub fn params_strategy(q_max: u64) -> impl Strategy<Value = SecretParams> {
    let primes = Arc::new(primes_to(q_max));
    let lookup = Arc::clone(&primes);
    (1..primes.len())
        .prop_flat_map(move |qi| (0..qi, Just(qi), 1..primes[qi]))
        .prop_map(move |(pi, qi, n)| {
            validate_params(lookup[pi] as i64, lookup[qi] as i64, n as i64).unwrap()
        })
}

pub fn plain(params: SecretParams) -> (u64, u64, u64) {
    (params.p() as u64, params.q() as u64, params.n() as u64)
}

pub const SMALL_BOUNDS: (u32, u32, u32) = (31, 31, 5);

/// One simulated k=3 session per parameter set within `SMALL_BOUNDS`, for
/// every set that has a duplicate-free 3×3 window at nonce 0.
pub fn small_instances() -> Vec<dske::attack::SimulatedSession> {
    use dske::attack::{simulate_session, ParamBounds};
    use dske::session::SessionConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let (pm, qm, nm) = SMALL_BOUNDS;
    ParamBounds::new(pm, qm, nm)
        .params(u64::MAX)
        .unwrap()
        .into_iter()
        .enumerate()
        .filter_map(|(i, params)| {
            let config = SessionConfig::new(params)
                .with_window_size(Some(3))
                .unwrap();
            simulate_session(&config, 0, &mut ChaCha8Rng::seed_from_u64(i as u64)).ok()
        })
        .collect()
}

/// The attacker's view in plain values, for the oracle.
pub fn oracle_view<'a>(
    sim: &dske::attack::SimulatedSession,
    layers: dske::attack::LayerState,
    labels: &'a [String],
    universe: &'a [[[u64; 6]; 6]],
) -> oracle::Knowledge<'a> {
    oracle::Knowledge {
        labels,
        k: sim.k(),
        params: layers.layer1.then(|| plain(sim.secrets.params)),
        s1_values: layers.layer2.then(|| {
            sim.secrets
                .s1_window
                .values()
                .iter()
                .map(|&v| v as u64)
                .collect()
        }),
        s2_origin: layers
            .layer3
            .then_some((sim.secrets.s2_origin.row, sim.secrets.s2_origin.col)),
        universe,
    }
}

pub fn label_strings(sim: &dske::attack::SimulatedSession) -> Vec<String> {
    sim.transcript
        .labels()
        .unwrap()
        .iter()
        .map(|l| l.as_str().to_string())
        .collect()
}
