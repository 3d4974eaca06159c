//! Fixture manifests written to temporary directories.
#![allow(dead_code)]

use std::path::PathBuf;

use cfe_core::scenario::save_scenarios;
use cfe_core::{AssetKind, AssetSpec, ScenarioSet};
use tempfile::TempDir;

/// One asset with `G = [100, 50]`, load `[100, 100]`, cost 10.
pub fn toy_set() -> ScenarioSet {
    let asset = AssetSpec {
        id: "toy".into(),
        kind: AssetKind::Other,
        capacity: 100.0,
        cost: 10.0,
        deterministic: true,
    };
    ScenarioSet::new(vec![asset], vec!["load".into()], 1, 2, vec![100.0, 50.0], vec![vec![100.0, 100.0]]).unwrap()
}

/// Three assets, two loads, four scenarios over two days.
pub fn small_set() -> ScenarioSet {
    let hours = 48;
    let scenarios = 4;
    let kinds = [(AssetKind::Solar, 120.0, 30.0), (AssetKind::Wind, 90.0, 50.0), (AssetKind::Hydro, 60.0, 80.0)];
    let mut generation = Vec::new();
    for (i, &(kind, cap, _)) in kinds.iter().enumerate() {
        for n in 0..scenarios {
            for t in 0..hours {
                let h = (t % 24) as f64;
                let noise = (((i * 31 + n * 17 + t * 7) % 13) as f64) / 13.0;
                let g = match kind {
                    AssetKind::Solar => cap * (std::f64::consts::PI * (h - 6.0) / 12.0).sin().max(0.0) * (0.5 + 0.5 * noise),
                    AssetKind::Wind => cap * (0.2 + 0.7 * noise),
                    _ => cap * 0.8,
                };
                generation.push(g);
            }
        }
    }
    let assets = kinds
        .iter()
        .enumerate()
        .map(|(i, &(kind, capacity, cost))| AssetSpec {
            id: format!("{}_{i}", kind.as_str()),
            kind,
            capacity,
            cost,
            deterministic: kind == AssetKind::Hydro,
        })
        .collect();
    let loads = (0..2)
        .map(|k| {
            (0..scenarios * hours)
                .map(|t| 40.0 + 10.0 * k as f64 + 5.0 * (((t * 3 + k) % 7) as f64) / 7.0)
                .collect()
        })
        .collect();
    ScenarioSet::new(assets, vec!["l1".into(), "l2".into()], scenarios, hours, generation, loads).unwrap()
}

pub fn write(set: &ScenarioSet) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_scenarios(set, dir.path()).unwrap();
    (dir, manifest)
}
