mod common;

use cfe_core::metrics::{
    annual_scores, empirical_quantile, gaussian_quantile, hourly_heatmap, quantile_of, scenario_scores, shortfall,
    shortfall_var,
};
use cfe_core::oracle::{check_feasible_all, direct_scores};
use cfe_core::{AssetSpec, ScenarioSet};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (0u64..10_000, 1usize..4, 1usize..12, 1usize..4)
}

fn weights(seed: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| ((seed.wrapping_mul(2654435761).wrapping_add(i as u64 * 97)) % 1000) as f64 / 999.0)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_at_full_guarantee_is_the_minimum((seed, assets, scenarios, days) in instance()) {
        let set = common::random_set(seed, assets, scenarios, days, 1);
        let w = weights(seed, assets);
        let dist = annual_scores(&set, 0, &w).unwrap();
        let min = dist.scores.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(empirical_quantile(&dist, 1.0).unwrap(), min);
    }

    #[test]
    fn quantile_is_nonincreasing_in_alpha((seed, assets, scenarios, days) in instance(), a in 0.01..1.0f64, b in 0.01..1.0f64) {
        let set = common::random_set(seed, assets, scenarios, days, 1);
        let scores = scenario_scores(&set, 0, &weights(seed, assets)).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantile_of(&scores, hi).unwrap() <= quantile_of(&scores, lo).unwrap());
    }

    #[test]
    fn heatmap_average_equals_mean_score((seed, assets, scenarios, days) in instance()) {
        let set = common::random_set(seed, assets, scenarios, days, 1);
        let w = weights(seed, assets);
        let heat = hourly_heatmap(&set, 0, &w).unwrap();
        prop_assert_eq!(heat.values.len(), 24);
        prop_assert_eq!(heat.days(), days);
        let mu = annual_scores(&set, 0, &w).unwrap().mean;
        prop_assert!((heat.mean() - mu).abs() <= 1e-12, "{} vs {}", heat.mean(), mu);
        prop_assert!(heat.values.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn shortfall_is_bounded((seed, assets, scenarios, days) in instance()) {
        let set = common::random_set(seed, assets, scenarios, days, 1);
        let w = weights(seed, assets);
        let y = shortfall(&set, 0, &w).unwrap();
        let hours = set.hours() as f64;
        for (n, &v) in y.iter().enumerate() {
            prop_assert!(v <= 0.0);
            let load = set.load(0, n);
            let min_ratio = (0..set.hours())
                .map(|t| (0..assets).map(|i| w[i] * set.generation(i, n)[t]).sum::<f64>() / load[t])
                .fold(f64::INFINITY, f64::min)
                .min(1.0);
            prop_assert!(v >= hours * (min_ratio - 1.0) - 1e-9);
        }
        let max_y = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_y = y.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(shortfall_var(&y, 0.0).unwrap(), -max_y + 0.0);
        prop_assert_eq!(shortfall_var(&y, 1.0).unwrap(), -min_y + 0.0);
        prop_assert!(shortfall_var(&y, 0.9).unwrap() >= 0.0);
    }

    #[test]
    fn mean_equals_gaussian_quantile_at_half((seed, assets, days) in (0u64..10_000, 1usize..4, 1usize..4), scenarios in 2usize..12) {
        let set = common::random_set(seed, assets, scenarios, days, 1);
        let dist = annual_scores(&set, 0, &weights(seed, assets)).unwrap();
        prop_assert_eq!(gaussian_quantile(&dist, 0.5).unwrap(), dist.mean);
    }

    #[test]
    fn scores_are_monotone_and_concave_along_directions(
        (seed, assets, scenarios, days) in instance(),
        t in 0.0..1.0f64,
    ) {
        let set = common::random_set(seed, assets, scenarios, days, 1);
        let a = weights(seed, assets);
        let b: Vec<f64> = weights(seed ^ 0xabc, assets).iter().zip(&a).map(|(x, y)| x.max(*y)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        let sa = scenario_scores(&set, 0, &a).unwrap();
        let sb = scenario_scores(&set, 0, &b).unwrap();
        let sm = scenario_scores(&set, 0, &mid).unwrap();
        for n in 0..sa.len() {
            prop_assert!(sb[n] >= sa[n] - 1e-12);
            prop_assert!(sm[n] >= (1.0 - t) * sa[n] + t * sb[n] - 1e-12);
        }
    }

    #[test]
    fn oracle_feasibility_agrees_with_minimum((seed, assets, scenarios, days) in instance(), p in 0.0..1.0f64) {
        let set = common::random_set(seed, assets, scenarios, days, 1);
        let w = weights(seed, assets);
        let scores = scenario_scores(&set, 0, &w).unwrap();
        let min = quantile_of(&scores, 1.0).unwrap();
        let check = check_feasible_all(&set, 0, &w, p).unwrap();
        if (min - p).abs() > 1e-9 {
            prop_assert_eq!(check.feasible, min >= p);
        }
        let direct = direct_scores(&set, 0, &w);
        for (x, y) in direct.iter().zip(&scores) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn average_generation_is_linear((seed, assets, scenarios, days) in instance(), c in 0.1..3.0f64) {
        let set = common::random_set(seed, assets, scenarios, days, 1);
        let g = set.average_generation();
        let assets_scaled: Vec<_> = set
            .assets()
            .iter()
            .map(|a| AssetSpec { capacity: a.capacity * c, ..a.clone() })
            .collect();
        let generation: Vec<f64> = (0..set.asset_count()).flat_map(|i| set.asset_block(i).iter().map(|g| g * c)).collect();
        let loads = (0..set.load_count()).map(|k| set.load_block(k).to_vec()).collect();
        let scaled = ScenarioSet::new(assets_scaled, set.load_ids().to_vec(), set.scenarios(), set.hours(), generation, loads).unwrap();
        for (x, y) in scaled.average_generation().iter().zip(&g) {
            prop_assert!((x - c * y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }
}
