use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::aae::LATENT_DIM;
use crate::ledger::{EntryLabel, EntryTable};
use crate::scoring::{ScoreRecord, ScoreTable, DEFAULT_ALPHA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Text(String),
    Number(f64),
}

/// One entry of the latent export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub id: u64,
    pub z: [f64; LATENT_DIM],
    /// 1-based closest mode.
    pub mode: usize,
    pub re: f64,
    pub md: f64,
    #[serde(rename = "as")]
    pub score: f64,
    pub label: Option<EntryLabel>,
    pub attributes: BTreeMap<String, AttributeValue>,
}

/// Companion file describing an export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportMeta {
    pub n: usize,
    pub tau: usize,
    /// AS in the export was computed with this alpha.
    pub alpha: f64,
    pub alpha_default: f64,
    pub centers: Vec<[f64; LATENT_DIM]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentExport {
    pub meta: ExportMeta,
    pub records: Vec<LatentRecord>,
}

/// `scores.json` -> `scores.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

pub fn latent_records(scores: &ScoreTable, table: &EntryTable) -> Result<Vec<LatentRecord>, ReportError> {
    let by_id: HashMap<u64, usize> = table.entries().iter().enumerate().map(|(i, e)| (e.id, i)).collect();
    let schema = table.schema();
    let cat_names = schema.categorical_names();
    let num_names = schema.numerical_names();
    scores
        .records
        .iter()
        .map(|r: &ScoreRecord| {
            let entry = by_id
                .get(&r.id)
                .map(|&i| &table.entries()[i])
                .ok_or_else(|| ReportError::Argument(format!("entry {} is not in the table", r.id)))?;
            let mut attributes = BTreeMap::new();
            for (name, value) in cat_names.iter().zip(&entry.categorical) {
                attributes.insert(name.to_string(), AttributeValue::Text(value.clone()));
            }
            for (name, value) in num_names.iter().zip(&entry.numerical) {
                attributes.insert(name.to_string(), AttributeValue::Number(*value));
            }
            Ok(LatentRecord {
                id: r.id,
                z: r.latent,
                mode: r.closest_mode,
                re: r.re,
                md: r.md,
                score: r.score,
                label: r.label,
                attributes,
            })
        })
        .collect()
}

/// Writes the record array to `path` and an [`ExportMeta`] next to it.
pub fn export_latent_json(
    scores: &ScoreTable,
    table: &EntryTable,
    centers: &[[f64; LATENT_DIM]],
    path: impl AsRef<Path>,
) -> Result<(), ReportError> {
    let path = path.as_ref();
    let records = latent_records(scores, table)?;
    let meta = ExportMeta {
        n: records.len(),
        tau: scores.tau,
        alpha: scores.alpha,
        alpha_default: DEFAULT_ALPHA,
        centers: centers.to_vec(),
    };
    write_json(path, &records)?;
    write_json(&meta_path(path), &meta)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_latent_json(path: impl AsRef<Path>) -> Result<Vec<LatentRecord>, ReportError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn read_latent_export(path: impl AsRef<Path>) -> Result<LatentExport, ReportError> {
    let path = path.as_ref();
    let records = read_latent_json(path)?;
    let meta: ExportMeta = serde_json::from_reader(BufReader::new(File::open(meta_path(path))?))?;
    if meta.n != records.len() {
        return Err(ReportError::Format(format!(
            "meta file lists {} entries, export holds {}",
            meta.n,
            records.len()
        )));
    }
    Ok(LatentExport { meta, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_path_swaps_extension() {
        assert_eq!(meta_path(Path::new("/tmp/out/latent.json")), PathBuf::from("/tmp/out/latent.meta.json"));
        assert_eq!(meta_path(Path::new("latent")), PathBuf::from("latent.meta.json"));
    }

    #[test]
    fn attribute_values_serialize_plainly() {
        let v = serde_json::to_string(&[AttributeValue::Text("SA".into()), AttributeValue::Number(12.5)]).unwrap();
        assert_eq!(v, r#"["SA",12.5]"#);
    }
}
