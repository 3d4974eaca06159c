//! Small randomized instances shared by the integration tests.
#![allow(dead_code)]

use cfe_core::metrics::{quantile_of, scenario_scores};
use cfe_core::{AssetKind, AssetSpec, Bounds, CfeTarget, ScenarioSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One asset with `G = [100, 50]`, load `[100, 100]`, cost 10.
pub fn toy() -> ScenarioSet {
    let asset = AssetSpec {
        id: "toy".into(),
        kind: AssetKind::Other,
        capacity: 100.0,
        cost: 10.0,
        deterministic: true,
    };
    ScenarioSet::new(vec![asset], vec!["load".into()], 1, 2, vec![100.0, 50.0], vec![vec![100.0, 100.0]]).unwrap()
}

fn profile(rng: &mut ChaCha8Rng, kind: AssetKind, capacity: f64, hours: usize) -> Vec<f64> {
    match kind {
        AssetKind::Solar => (0..hours)
            .map(|t| {
                let h = (t % 24) as f64;
                let shape = (std::f64::consts::PI * (h - 6.0) / 12.0).sin().max(0.0);
                capacity * shape * rng.random_range(0.3..1.0)
            })
            .collect(),
        AssetKind::Wind => {
            let mut x: f64 = rng.random_range(-1.0..1.0);
            (0..hours)
                .map(|_| {
                    x = 0.8 * x + 0.6 * rng.random_range(-1.7..1.7);
                    capacity / (1.0 + (-2.0 * x).exp())
                })
                .collect()
        }
        _ => (0..hours).map(|_| capacity * rng.random_range(0.6..1.0)).collect(),
    }
}

/// Random universe of `assets` sources with `loads` load profiles.
pub fn random_set(seed: u64, assets: usize, scenarios: usize, days: usize, loads: usize) -> ScenarioSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hours = 24 * days;
    let kinds = [AssetKind::Solar, AssetKind::Wind, AssetKind::Other];
    let mut specs = Vec::new();
    let mut generation = Vec::new();
    for i in 0..assets {
        let kind = kinds[(seed as usize + i) % 3];
        let capacity = rng.random_range(60.0..160.0);
        specs.push(AssetSpec {
            id: format!("a{i}"),
            kind,
            capacity,
            cost: rng.random_range(20.0..100.0),
            deterministic: false,
        });
        for _ in 0..scenarios {
            generation.extend(profile(&mut rng, kind, capacity, hours));
        }
    }
    let load_blocks = (0..loads)
        .map(|_| {
            let level = rng.random_range(60.0..110.0);
            (0..scenarios * hours)
                .map(|t| {
                    let h = (t % 24) as f64;
                    level * (1.0 + 0.1 * (std::f64::consts::PI * h / 12.0).sin()) * rng.random_range(0.9..1.1)
                })
                .collect()
        })
        .collect();
    ScenarioSet::new(
        specs,
        (0..loads).map(|k| format!("load{k}")).collect(),
        scenarios,
        hours,
        generation,
        load_blocks,
    )
    .unwrap()
}

/// Random oracle-sized instance (`I <= 3`, `N <= 50`, `T <= 168`) with an attainable target.
pub fn random_instance(seed: u64) -> (ScenarioSet, CfeTarget) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let assets = 1 + (seed % 3) as usize;
    let scenarios = rng.random_range(5..=50);
    let days = rng.random_range(1..=7);
    let set = random_set(seed, assets, scenarios, days, 1);
    let alpha = [0.5, 0.7, 0.9, 1.0][rng.random_range(0..4)];
    let best = quantile_of(&scenario_scores(&set, 0, &vec![1.0; assets]).unwrap(), alpha).unwrap();
    let p_c = best * rng.random_range(0.4..0.97);
    (set, CfeTarget::new(p_c, alpha).unwrap())
}

pub fn unit(set: &ScenarioSet) -> Bounds {
    Bounds::unit(set.asset_count())
}
