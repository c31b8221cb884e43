//! One-hot blocks for categorical attributes followed by log min-max
//! scaled amount columns.

use std::ops::Range;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataError, EntryLabel, EntryTable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalVocabulary {
    pub name: String,
    /// Lexicographically sorted; position = offset inside the block.
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericalRange {
    pub name: String,
    /// min and max of ln(1 + amount) at fit time.
    pub min_log: f64,
    pub max_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub categorical: Vec<CategoricalVocabulary>,
    pub numerical: Vec<NumericalRange>,
    pub total_dims: usize,
}

/// Column ranges of an encoded row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    pub categorical_blocks: Vec<Range<usize>>,
    pub numerical: Range<usize>,
}

impl FeatureLayout {
    pub fn total_dims(&self) -> usize {
        self.numerical.end
    }

    pub fn categorical_dims(&self) -> usize {
        self.numerical.start
    }

    pub fn numerical_dims(&self) -> usize {
        self.numerical.len()
    }
}

impl EncodingSpec {
    pub fn layout(&self) -> FeatureLayout {
        let mut start = 0;
        let categorical_blocks = self
            .categorical
            .iter()
            .map(|v| {
                let block = start..start + v.values.len();
                start = block.end;
                block
            })
            .collect();
        FeatureLayout {
            categorical_blocks,
            numerical: start..start + self.numerical.len(),
        }
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| DataError::Argument(format!("invalid encoding spec: {e}")))?;
        let expected = spec.categorical.iter().map(|v| v.values.len()).sum::<usize>() + spec.numerical.len();
        if spec.total_dims != expected {
            return Err(DataError::Argument(format!(
                "encoding spec declares {} dims but its vocabularies give {expected}",
                spec.total_dims
            )));
        }
        Ok(spec)
    }

    fn check_schema(&self, table: &EntryTable) -> Result<(), DataError> {
        let cat: Vec<&str> = self.categorical.iter().map(|v| v.name.as_str()).collect();
        let num: Vec<&str> = self.numerical.iter().map(|r| r.name.as_str()).collect();
        let schema = table.schema();
        if cat != schema.categorical_names() || num != schema.numerical_names() {
            return Err(DataError::SpecMismatch(format!(
                "spec attributes {cat:?}/{num:?} vs table {:?}/{:?}",
                schema.categorical_names(),
                schema.numerical_names()
            )));
        }
        Ok(())
    }
}

/// Encoded design matrix with the ids (and, when known, labels) of its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub ids: Vec<u64>,
    pub rows: Array2<f64>,
    pub spec: EncodingSpec,
    pub labels: Option<Vec<EntryLabel>>,
}

impl EncodedMatrix {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dims(&self) -> usize {
        self.rows.ncols()
    }
}

pub fn fit_encoding_spec(table: &EntryTable) -> Result<EncodingSpec, DataError> {
    if table.is_empty() {
        return Err(DataError::EmptyTable);
    }
    let schema = table.schema();
    let num_names = schema.numerical_names();
    let mut ranges: Vec<NumericalRange> = num_names
        .iter()
        .map(|name| NumericalRange {
            name: name.to_string(),
            min_log: f64::INFINITY,
            max_log: f64::NEG_INFINITY,
        })
        .collect();
    for (row, entry) in table.entries().iter().enumerate() {
        for (range, &amount) in ranges.iter_mut().zip(&entry.numerical) {
            check_amount(row, &range.name, amount)?;
            let v = amount.ln_1p();
            range.min_log = range.min_log.min(v);
            range.max_log = range.max_log.max(v);
        }
    }

    let categorical: Vec<CategoricalVocabulary> = schema
        .categorical_names()
        .into_iter()
        .zip(table.categorical_vocabularies())
        .map(|(name, vocab)| CategoricalVocabulary {
            name: name.to_string(),
            values: vocab.into_iter().map(str::to_string).collect(),
        })
        .collect();
    let total_dims = categorical.iter().map(|v| v.values.len()).sum::<usize>() + ranges.len();
    Ok(EncodingSpec {
        categorical,
        numerical: ranges,
        total_dims,
    })
}

fn check_amount(row: usize, attribute: &str, amount: f64) -> Result<(), DataError> {
    if amount.is_nan() || amount.is_infinite() {
        return Err(DataError::Row {
            row,
            message: format!("non-finite amount in `{attribute}`"),
        });
    }
    if amount < 0.0 {
        return Err(DataError::NegativeAmount {
            row,
            attribute: attribute.to_string(),
            value: amount,
        });
    }
    Ok(())
}

pub fn encode_entries(table: &EntryTable, spec: &EncodingSpec) -> Result<EncodedMatrix, DataError> {
    spec.check_schema(table)?;
    let layout = spec.layout();
    let mut rows = Array2::<f64>::zeros((table.len(), spec.total_dims));
    for (row, (entry, mut out)) in table.entries().iter().zip(rows.rows_mut()).enumerate() {
        for ((vocab, block), value) in spec
            .categorical
            .iter()
            .zip(&layout.categorical_blocks)
            .zip(&entry.categorical)
        {
            let offset = vocab
                .values
                .binary_search(value)
                .map_err(|_| DataError::OutOfVocabulary {
                    attribute: vocab.name.clone(),
                    value: value.clone(),
                })?;
            out[block.start + offset] = 1.0;
        }
        for ((j, range), &amount) in layout.numerical.clone().zip(&spec.numerical).zip(&entry.numerical) {
            check_amount(row, &range.name, amount)?;
            out[j] = scale_log(amount, range);
        }
    }
    Ok(EncodedMatrix {
        ids: table.entries().iter().map(|e| e.id).collect(),
        rows,
        spec: spec.clone(),
        labels: table.has_ground_truth().then(|| table.labels().to_vec()),
    })
}

fn scale_log(amount: f64, range: &NumericalRange) -> f64 {
    let span = range.max_log - range.min_log;
    if span <= 0.0 {
        return 0.0;
    }
    ((amount.ln_1p() - range.min_log) / span).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Attribute, AttributeSchema, JournalEntry};
    use ndarray::array;

    fn table(schema: AttributeSchema, rows: &[(&[&str], &[f64])]) -> EntryTable {
        let entries = rows
            .iter()
            .enumerate()
            .map(|(i, (c, n))| JournalEntry {
                id: i as u64,
                categorical: c.iter().map(|s| s.to_string()).collect(),
                numerical: n.to_vec(),
            })
            .collect();
        EntryTable::unlabeled(schema, entries).unwrap()
    }

    fn one_cat_schema() -> AttributeSchema {
        AttributeSchema::new(vec![Attribute::categorical("C"), Attribute::numerical("N")]).unwrap()
    }

    #[test]
    fn three_values_plus_amount_is_four_dims() {
        let t = table(
            one_cat_schema(),
            &[(&["B"], &[1.0]), (&["A"], &[2.0]), (&["C"], &[3.0])],
        );
        let spec = fit_encoding_spec(&t).unwrap();
        assert_eq!(spec.total_dims, 4);
        assert_eq!(spec.categorical[0].values, ["A", "B", "C"]);
    }

    #[test]
    fn sum_rule_two_plus_three_plus_two() {
        let schema = AttributeSchema::new(vec![
            Attribute::categorical("X"),
            Attribute::numerical("N1"),
            Attribute::categorical("Y"),
            Attribute::numerical("N2"),
        ])
        .unwrap();
        let t = table(
            schema,
            &[
                (&["a", "p"], &[1.0, 1.0]),
                (&["b", "q"], &[1.0, 1.0]),
                (&["a", "r"], &[1.0, 1.0]),
            ],
        );
        assert_eq!(fit_encoding_spec(&t).unwrap().total_dims, 7);
    }

    #[test]
    fn empty_and_negative_inputs_are_rejected() {
        assert!(matches!(
            fit_encoding_spec(&EntryTable::empty(one_cat_schema())),
            Err(DataError::EmptyTable)
        ));
        let t = table(one_cat_schema(), &[(&["A"], &[1.0]), (&["A"], &[-2.0])]);
        assert!(matches!(
            fit_encoding_spec(&t),
            Err(DataError::NegativeAmount { row: 1, .. })
        ));
    }

    #[test]
    fn one_hot_and_endpoints() {
        let t = table(
            one_cat_schema(),
            &[(&["A"], &[0.0]), (&["B"], &[99.0]), (&["C"], &[9.0])],
        );
        let spec = fit_encoding_spec(&t).unwrap();
        let m = encode_entries(&t, &spec).unwrap();
        assert_eq!(m.rows.row(1).to_vec(), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(m.rows[[0, 3]], 0.0);
        // ln(10)/ln(100) = 0.5
        assert!((m.rows[[2, 3]] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_amount_column_is_zero() {
        let t = table(one_cat_schema(), &[(&["A"], &[5.0]), (&["B"], &[5.0])]);
        let spec = fit_encoding_spec(&t).unwrap();
        let m = encode_entries(&t, &spec).unwrap();
        assert_eq!(m.rows.column(2).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn out_of_range_amounts_clamp() {
        let fit = table(one_cat_schema(), &[(&["A"], &[1.0]), (&["A"], &[10.0])]);
        let spec = fit_encoding_spec(&fit).unwrap();
        let probe = table(one_cat_schema(), &[(&["A"], &[0.0]), (&["A"], &[1e6])]);
        let m = encode_entries(&probe, &spec).unwrap();
        assert_eq!(m.rows.column(1).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn unknown_value_names_attribute_and_value() {
        let fit = table(one_cat_schema(), &[(&["A"], &[1.0])]);
        let spec = fit_encoding_spec(&fit).unwrap();
        let probe = table(one_cat_schema(), &[(&["Z"], &[1.0])]);
        let err = encode_entries(&probe, &spec).unwrap_err();
        assert!(
            matches!(&err, DataError::OutOfVocabulary { attribute, value } if attribute == "C" && value == "Z")
        );
    }

    #[test]
    fn five_row_fixture_matches_hand_encoding() {
        let schema = AttributeSchema::new(vec![
            Attribute::categorical("BLART"),
            Attribute::categorical("BSCHL"),
            Attribute::numerical("DMBTR"),
        ])
        .unwrap();
        let t = table(
            schema,
            &[
                (&["SA", "40"], &[0.0]),
                (&["KR", "50"], &[3.0]),
                (&["SA", "50"], &[15.0]),
                (&["DR", "40"], &[1.0]),
                (&["KR", "40"], &[255.0]),
            ],
        );
        let spec = fit_encoding_spec(&t).unwrap();
        let m = encode_entries(&t, &spec).unwrap();
        // Vocab BLART = [DR, KR, SA], BSCHL = [40, 50].
        // ln(1+a) = 0, 2ln2, 4ln2, ln2, 8ln2 over span 8ln2.
        let expected = array![
            [0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 1.0, 0.25],
            [0.0, 0.0, 1.0, 0.0, 1.0, 0.5],
            [1.0, 0.0, 0.0, 1.0, 0.0, 0.125],
            [0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
        ];
        for (a, b) in m.rows.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        assert_eq!(m.ids, vec![0, 1, 2, 3, 4]);
        assert!(m.labels.is_none());
    }

    #[test]
    fn digest_tracks_content() {
        let t = table(one_cat_schema(), &[(&["A"], &[1.0]), (&["B"], &[2.0])]);
        let spec = fit_encoding_spec(&t).unwrap();
        assert_eq!(spec.digest(), spec.clone().digest());
        assert_eq!(spec.digest().len(), 64);
        let mut other = spec.clone();
        other.categorical[0].values.push("C".into());
        other.total_dims += 1;
        assert_ne!(spec.digest(), other.digest());
        let back = EncodingSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back.digest(), spec.digest());
    }
}
