//! Journal-entry tables: schema, ingestion, synthetic generation, one-hot
//! encoding and anomaly injection.
//!
//! Every operation here is a pure transformation over its inputs. Anything
//! random takes an explicit seed and iterates ordered collections only, so
//! equal seeds give bit-identical tables.

mod csv_io;
mod encoding;
mod generator;
mod inject;

pub use csv_io::{
    apply_label_sidecar, load_journal_csv, read_journal_csv, read_label_sidecar, write_journal_csv,
    write_label_sidecar,
};
pub use encoding::{
    encode_entries, fit_encoding_spec, CategoricalVocabulary, EncodedMatrix, EncodingSpec,
    FeatureLayout, NumericalRange,
};
pub use generator::{generate_synthetic_ledger, GeneratorConfig, ProcessTemplate, PROCESS_CATALOGUE};
pub use inject::{global_token, inject_global_anomalies, inject_local_anomalies};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("input is missing required column `{0}`")]
    MissingColumn(String),
    #[error("data row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("cannot fit an encoding on an empty table")]
    EmptyTable,
    #[error("negative amount {value} for `{attribute}` in row {row}")]
    NegativeAmount {
        row: usize,
        attribute: String,
        value: f64,
    },
    #[error("value `{value}` of attribute `{attribute}` is not in the fitted vocabulary")]
    OutOfVocabulary { attribute: String, value: String },
    #[error("encoding spec does not match table schema: {0}")]
    SpecMismatch(String),
    #[error("no unused value combination left for attribute pair(s): {}", format_pairs(.pairs))]
    CombinationsExhausted { pairs: Vec<(String, String)> },
    #[error("duplicate entry id {0}")]
    DuplicateId(u64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("({a}, {b})"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Categorical,
        }
    }

    pub fn numerical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Numerical,
        }
    }
}

/// Ordered attribute list. Entries store categorical and numerical values
/// separately, each in the order they appear here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
}

impl AttributeSchema {
    /// Requires unique names and at least one attribute of each kind.
    pub fn new(attributes: Vec<Attribute>) -> Result<Self, DataError> {
        let mut seen = BTreeSet::new();
        for attr in &attributes {
            if attr.name.is_empty() {
                return Err(DataError::Schema("attribute names must be non-empty".into()));
            }
            if attr.name == "id" {
                return Err(DataError::Schema("`id` is reserved for the entry id".into()));
            }
            if !seen.insert(attr.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate attribute `{}`", attr.name)));
            }
        }
        let schema = Self { attributes };
        if schema.categorical_count() == 0 || schema.numerical_count() == 0 {
            return Err(DataError::Schema(
                "need at least one categorical and one numerical attribute".into(),
            ));
        }
        Ok(schema)
    }

    /// Six categorical and two amount attributes, named after the SAP
    /// document header/segment fields they stand in for.
    pub fn ledger_default() -> Self {
        Self::new(vec![
            Attribute::categorical("BUKRS"),
            Attribute::categorical("BLART"),
            Attribute::categorical("BSCHL"),
            Attribute::categorical("HKONT"),
            Attribute::categorical("KTOSL"),
            Attribute::categorical("WAERS"),
            Attribute::numerical("DMBTR"),
            Attribute::numerical("WRBTR"),
        ])
        .expect("default schema is valid")
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn categorical_names(&self) -> Vec<&str> {
        self.names_of(AttributeKind::Categorical)
    }

    pub fn numerical_names(&self) -> Vec<&str> {
        self.names_of(AttributeKind::Numerical)
    }

    pub fn categorical_count(&self) -> usize {
        self.count_of(AttributeKind::Categorical)
    }

    pub fn numerical_count(&self) -> usize {
        self.count_of(AttributeKind::Numerical)
    }

    /// Position of a categorical attribute within `JournalEntry::categorical`.
    pub fn categorical_index(&self, name: &str) -> Option<usize> {
        self.categorical_names().iter().position(|n| *n == name)
    }

    fn names_of(&self, kind: AttributeKind) -> Vec<&str> {
        self.attributes
            .iter()
            .filter(|a| a.kind == kind)
            .map(|a| a.name.as_str())
            .collect()
    }

    fn count_of(&self, kind: AttributeKind) -> usize {
        self.attributes.iter().filter(|a| a.kind == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub id: u64,
    pub categorical: Vec<String>,
    pub numerical: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryLabel {
    Regular,
    Global,
    Local,
}

impl EntryLabel {
    pub const ALL: [EntryLabel; 3] = [EntryLabel::Global, EntryLabel::Local, EntryLabel::Regular];

    pub fn as_str(self) -> &'static str {
        match self {
            EntryLabel::Regular => "regular",
            EntryLabel::Global => "global",
            EntryLabel::Local => "local",
        }
    }

    pub fn is_anomaly(self) -> bool {
        self != EntryLabel::Regular
    }
}

impl fmt::Display for EntryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntryLabel {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "regular" => Ok(EntryLabel::Regular),
            "global" => Ok(EntryLabel::Global),
            "local" => Ok(EntryLabel::Local),
            other => Err(DataError::Argument(format!("unknown label `{other}`"))),
        }
    }
}

/// Journal entries plus their class labels.
///
/// `labels` always has one element per entry (default `Regular`);
/// `ground_truth` records whether those labels are known rather than
/// defaulted, which decides whether evaluation metrics are meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryTable {
    schema: AttributeSchema,
    entries: Vec<JournalEntry>,
    labels: Vec<EntryLabel>,
    ground_truth: bool,
}

impl EntryTable {
    pub fn new(
        schema: AttributeSchema,
        entries: Vec<JournalEntry>,
        labels: Vec<EntryLabel>,
        ground_truth: bool,
    ) -> Result<Self, DataError> {
        if labels.len() != entries.len() {
            return Err(DataError::Argument(format!(
                "{} labels for {} entries",
                labels.len(),
                entries.len()
            )));
        }
        let (n_cat, n_num) = (schema.categorical_count(), schema.numerical_count());
        let mut ids = BTreeSet::new();
        for (row, entry) in entries.iter().enumerate() {
            if entry.categorical.len() != n_cat || entry.numerical.len() != n_num {
                return Err(DataError::Row {
                    row,
                    message: format!(
                        "expected {n_cat} categorical and {n_num} numerical values, got {} and {}",
                        entry.categorical.len(),
                        entry.numerical.len()
                    ),
                });
            }
            if !ids.insert(entry.id) {
                return Err(DataError::DuplicateId(entry.id));
            }
        }
        Ok(Self {
            schema,
            entries,
            labels,
            ground_truth,
        })
    }

    /// Table with every entry labelled `Regular` and no ground truth.
    pub fn unlabeled(schema: AttributeSchema, entries: Vec<JournalEntry>) -> Result<Self, DataError> {
        let labels = vec![EntryLabel::Regular; entries.len()];
        Self::new(schema, entries, labels, false)
    }

    pub fn empty(schema: AttributeSchema) -> Self {
        Self {
            schema,
            entries: Vec::new(),
            labels: Vec::new(),
            ground_truth: false,
        }
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn entries(&self) -> &[JournalEntry] {
        &self.entries
    }

    pub fn labels(&self) -> &[EntryLabel] {
        &self.labels
    }

    pub fn has_ground_truth(&self) -> bool {
        self.ground_truth
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&JournalEntry, EntryLabel)> {
        self.entries.iter().zip(self.labels.iter().copied())
    }

    pub fn count_label(&self, label: EntryLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    pub fn next_id(&self) -> u64 {
        self.entries.iter().map(|e| e.id + 1).max().unwrap_or(0)
    }

    /// Distinct observed values per categorical attribute.
    pub fn categorical_vocabularies(&self) -> Vec<BTreeSet<&str>> {
        let mut vocabs = vec![BTreeSet::new(); self.schema.categorical_count()];
        for entry in &self.entries {
            for (vocab, value) in vocabs.iter_mut().zip(&entry.categorical) {
                vocab.insert(value.as_str());
            }
        }
        vocabs
    }

    pub(crate) fn with_appended(
        &self,
        extra: Vec<JournalEntry>,
        label: EntryLabel,
    ) -> Result<Self, DataError> {
        let mut entries = self.entries.clone();
        let mut labels = self.labels.clone();
        labels.extend(std::iter::repeat_n(label, extra.len()));
        entries.extend(extra);
        Self::new(self.schema.clone(), entries, labels, true)
    }

    pub(crate) fn set_labels(&mut self, labels: Vec<EntryLabel>) {
        debug_assert_eq!(labels.len(), self.entries.len());
        self.labels = labels;
        self.ground_truth = true;
    }
}
