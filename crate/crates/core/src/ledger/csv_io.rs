use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{AttributeKind, AttributeSchema, DataError, EntryLabel, EntryTable, JournalEntry};

const ID_COLUMN: &str = "id";

/// Reads a comma-separated ledger with a header row.
///
/// The header may contain extra columns; only schema attributes are kept.
/// An optional `id` column supplies entry ids, otherwise the 0-based data
/// row index is used. A completely empty file yields an empty table.
pub fn load_journal_csv(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<EntryTable, DataError> {
    read_journal_csv(File::open(path)?, schema)
}

pub fn read_journal_csv<R: Read>(reader: R, schema: &AttributeSchema) -> Result<EntryTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(EntryTable::empty(schema.clone()));
    }

    let column_of = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut cat_cols = Vec::new();
    let mut num_cols = Vec::new();
    for attr in schema.attributes() {
        let col = column_of(&attr.name).ok_or_else(|| DataError::MissingColumn(attr.name.clone()))?;
        match attr.kind {
            AttributeKind::Categorical => cat_cols.push(col),
            AttributeKind::Numerical => num_cols.push((col, attr.name.as_str())),
        }
    }
    let id_col = column_of(ID_COLUMN);

    let mut entries = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |col: usize| record.get(col).unwrap_or("");
        let id = match id_col {
            Some(col) => cell(col).trim().parse::<u64>().map_err(|e| DataError::Row {
                row,
                message: format!("bad id `{}`: {e}", cell(col)),
            })?,
            None => row as u64,
        };
        let categorical = cat_cols.iter().map(|&c| cell(c).to_string()).collect();
        let numerical = num_cols
            .iter()
            .map(|&(c, name)| {
                cell(c).trim().parse::<f64>().map_err(|_| DataError::Row {
                    row,
                    message: format!("unparseable amount `{}` in `{name}`", cell(c)),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        entries.push(JournalEntry {
            id,
            categorical,
            numerical,
        });
    }
    EntryTable::unlabeled(schema.clone(), entries)
}

/// Writes `id` followed by the schema attributes in schema order.
pub fn write_journal_csv(table: &EntryTable, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_journal(table, File::create(path)?)
}

fn write_journal<W: Write>(table: &EntryTable, writer: W) -> Result<(), DataError> {
    let schema = table.schema();
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(schema.attributes().iter().map(|a| a.name.clone()));
    wtr.write_record(&header)?;
    for entry in table.entries() {
        let mut cat = entry.categorical.iter();
        let mut num = entry.numerical.iter();
        let mut record = vec![entry.id.to_string()];
        for attr in schema.attributes() {
            record.push(match attr.kind {
                AttributeKind::Categorical => cat.next().expect("arity checked").clone(),
                AttributeKind::Numerical => num.next().expect("arity checked").to_string(),
            });
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the `(entry_id, label)` sidecar.
pub fn write_label_sidecar(table: &EntryTable, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["entry_id", "label"])?;
    for (entry, label) in table.iter() {
        wtr.write_record([entry.id.to_string(), label.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_label_sidecar(path: impl AsRef<Path>) -> Result<BTreeMap<u64, EntryLabel>, DataError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut labels = BTreeMap::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let id = record
            .get(0)
            .unwrap_or("")
            .trim()
            .parse::<u64>()
            .map_err(|e| DataError::Row {
                row,
                message: format!("bad entry_id: {e}"),
            })?;
        let label = record.get(1).unwrap_or("").parse::<EntryLabel>()?;
        if labels.insert(id, label).is_some() {
            return Err(DataError::DuplicateId(id));
        }
    }
    Ok(labels)
}

/// Attaches sidecar labels; every entry must be covered.
pub fn apply_label_sidecar(
    mut table: EntryTable,
    labels: &BTreeMap<u64, EntryLabel>,
) -> Result<EntryTable, DataError> {
    let resolved = table
        .entries()
        .iter()
        .map(|e| {
            labels
                .get(&e.id)
                .copied()
                .ok_or_else(|| DataError::Argument(format!("no label for entry {}", e.id)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    table.set_labels(resolved);
    Ok(table)
}
