//! Dataset loading and output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use daqc_core::problems::{DatasetCell, DatasetManifest};
use serde::Serialize;

pub const MANIFEST: &str = "manifest.json";

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Loads the cells listed in the manifest, optionally restricted to `only`.
pub fn load_cells(dir: &Path, only: &[String]) -> Result<Vec<DatasetCell>> {
    let manifest: DatasetManifest = read_json(&dir.join(MANIFEST))?;
    for name in only {
        if !manifest.cells.iter().any(|c| &c.cell == name) {
            bail!("cell {name:?} not in {}", dir.display());
        }
    }
    let mut cells = Vec::new();
    for entry in &manifest.cells {
        if !only.is_empty() && !only.contains(&entry.cell) {
            continue;
        }
        let cell: DatasetCell = read_json(&dir.join(&entry.file))?;
        if cell.instances.len() != entry.instances {
            bail!(
                "{} holds {} instances, manifest says {}",
                entry.file,
                cell.instances.len(),
                entry.instances
            );
        }
        cells.push(cell);
    }
    if cells.iter().all(|c| c.instances.is_empty()) {
        bail!("dataset {} has no instances", dir.display());
    }
    Ok(cells)
}

/// Writes CSV rows after a `# config=` comment line. The body depends only
/// on the rows, so identical configurations give identical files.
pub fn write_csv<R: Serialize, C: Serialize>(path: &Path, config: &C, rows: &[R]) -> Result<()> {
    let mut buf = format!("# config={}\n", serde_json::to_string(config)?).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Meta<'a, C: Serialize, S: Serialize> {
    file: String,
    created_unix_s: u64,
    version: &'a str,
    config: &'a C,
    summary: &'a S,
}

/// `<file>.meta.json` with the creation time and run summary.
pub fn write_meta<C: Serialize, S: Serialize>(path: &Path, config: &C, summary: &S) -> Result<PathBuf> {
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = Meta {
        file: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        created_unix_s: created,
        version: env!("CARGO_PKG_VERSION"),
        config,
        summary,
    };
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    let meta_path = PathBuf::from(name);
    write_json(&meta_path, &meta)?;
    Ok(meta_path)
}

/// Reads CSV rows, skipping `#` comment lines. Returns the config line too.
pub fn read_csv<R: serde::de::DeserializeOwned>(path: &Path) -> Result<(Option<String>, Vec<R>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = text
        .lines()
        .find_map(|l| l.strip_prefix("# config="))
        .map(str::to_string);
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok((config, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
    struct Row {
        id: String,
        v: f64,
    }

    #[test]
    fn csv_round_trip_keeps_config_and_infinity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let rows = vec![Row { id: "a".into(), v: 1.5 }, Row { id: "b".into(), v: f64::INFINITY }];
        write_csv(&path, &serde_json::json!({"k": 1}), &rows).unwrap();
        let (config, back) = read_csv::<Row>(&path).unwrap();
        assert_eq!(config.as_deref(), Some(r#"{"k":1}"#));
        assert_eq!(back, rows);
        let meta = write_meta(&path, &1, &2).unwrap();
        assert!(meta.to_string_lossy().ends_with("x.csv.meta.json"));
    }
}
