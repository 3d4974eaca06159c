//! JSON manifest plus one wide CSV per entity.
//!
//! Each CSV has a header row `s1,...,sN` and one data row per hour. Values are
//! written rounded to 6 decimal places in shortest round-trip form, so
//! `save(load(save(x)))` reproduces the files byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AssetKind, AssetSpec, ScenarioSet};
use crate::error::{CfeError, Result};
use crate::numeric::round_decimals;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestAsset {
    pub id: String,
    pub kind: AssetKind,
    pub capacity: f64,
    pub cost: f64,
    #[serde(default)]
    pub deterministic: bool,
    pub file: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestLoad {
    pub id: String,
    pub file: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenarios: usize,
    pub hours: usize,
    pub assets: Vec<ManifestAsset>,
    pub loads: Vec<ManifestLoad>,
}

/// Reads a manifest and every CSV it references. Relative paths resolve
/// against the manifest's directory.
pub fn load_scenarios(manifest_path: impl AsRef<Path>) -> Result<ScenarioSet> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| CfeError::io(manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CfeError::parse(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let (n, t) = (manifest.scenarios, manifest.hours);
    let mut generation = Vec::with_capacity(manifest.assets.len() * n * t);
    let mut assets = Vec::with_capacity(manifest.assets.len());
    for entry in &manifest.assets {
        generation.extend(read_wide_csv(&resolve(&entry.file), n, t)?);
        assets.push(AssetSpec {
            id: entry.id.clone(),
            kind: entry.kind,
            capacity: entry.capacity,
            cost: entry.cost,
            deterministic: entry.deterministic,
        });
    }
    let mut loads = Vec::with_capacity(manifest.loads.len());
    for entry in &manifest.loads {
        loads.push(read_wide_csv(&resolve(&entry.file), n, t)?);
    }
    if loads.is_empty() {
        return Err(CfeError::parse(manifest_path, "manifest lists no loads"));
    }
    ScenarioSet::new(
        assets,
        manifest.loads.iter().map(|l| l.id.clone()).collect(),
        n,
        t,
        generation,
        loads,
    )
}

/// Writes `manifest.json`, `gen_<id>.csv` per asset and `load_<id>.csv` per
/// load into `dir`. Returns the manifest path.
pub fn save_scenarios(set: &ScenarioSet, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| CfeError::io(dir, e))?;
    let mut manifest = Manifest {
        scenarios: set.scenarios(),
        hours: set.hours(),
        assets: Vec::new(),
        loads: Vec::new(),
    };
    for (i, asset) in set.assets().iter().enumerate() {
        let file = PathBuf::from(format!("gen_{}.csv", asset.id));
        write_wide_csv(&dir.join(&file), set.asset_block(i), set.scenarios(), set.hours())?;
        manifest.assets.push(ManifestAsset {
            id: asset.id.clone(),
            kind: asset.kind,
            capacity: asset.capacity,
            cost: asset.cost,
            deterministic: asset.deterministic,
            file,
        });
    }
    for (k, id) in set.load_ids().iter().enumerate() {
        let file = PathBuf::from(format!("load_{id}.csv"));
        write_wide_csv(&dir.join(&file), set.load_block(k), set.scenarios(), set.hours())?;
        manifest.loads.push(ManifestLoad {
            id: id.clone(),
            file,
        });
    }
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, body + "\n").map_err(|e| CfeError::io(&path, e))?;
    Ok(path)
}

/// Reads a wide CSV into `[scenario][hour]` order.
fn read_wide_csv(path: &Path, scenarios: usize, hours: usize) -> Result<Vec<f64>> {
    let file = fs::File::open(path).map_err(|e| CfeError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(|e| CfeError::parse(path, e))?;
    if header.len() != scenarios {
        return Err(CfeError::invalid(format!(
            "{}: dimension mismatch, {} scenario columns but manifest declares {}",
            path.display(),
            header.len(),
            scenarios
        )));
    }
    let mut values = vec![0.0; scenarios * hours];
    let mut row_count = 0;
    for (t, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CfeError::parse(path, e))?;
        if t >= hours {
            row_count = t + 1;
            continue;
        }
        if record.len() != scenarios {
            return Err(CfeError::invalid(format!(
                "{}: dimension mismatch, hour {} has {} values, expected {}",
                path.display(),
                t + 1,
                record.len(),
                scenarios
            )));
        }
        for (n, field) in record.iter().enumerate() {
            values[n * hours + t] = field.trim().parse::<f64>().map_err(|e| {
                CfeError::parse(path, format!("hour {} scenario {}: {e}", t + 1, n + 1))
            })?;
        }
        row_count = t + 1;
    }
    if row_count != hours {
        return Err(CfeError::invalid(format!(
            "{}: dimension mismatch, {} hourly rows but manifest declares {}",
            path.display(),
            row_count,
            hours
        )));
    }
    Ok(values)
}

fn write_wide_csv(path: &Path, values: &[f64], scenarios: usize, hours: usize) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CfeError::parse(path, e))?;
    let header: Vec<String> = (1..=scenarios).map(|n| format!("s{n}")).collect();
    writer.write_record(&header).map_err(|e| CfeError::parse(path, e))?;
    let mut row = Vec::with_capacity(scenarios);
    for t in 0..hours {
        row.clear();
        row.extend((0..scenarios).map(|n| format_value(values[n * hours + t])));
        writer.write_record(&row).map_err(|e| CfeError::parse(path, e))?;
    }
    writer.flush().map_err(|e| CfeError::io(path, e))
}

pub(crate) fn format_value(x: f64) -> String {
    let rounded = round_decimals(x, 6);
    // avoid "-0"
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}
