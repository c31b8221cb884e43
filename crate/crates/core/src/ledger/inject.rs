//! Synthetic anomaly injection.
//!
//! Injected rows start from a copy of a randomly drawn original row. Global
//! anomalies then receive attribute values never seen in the table, local
//! anomalies receive a pair of individually common values whose combination
//! never occurs. Original rows are never touched; new rows are appended with
//! fresh ids.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataError, EntryLabel, EntryTable, JournalEntry};

const GLOBAL_TOKEN_PREFIX: &str = "⊥GLOBAL⊥";

/// Number of attributes replaced by a fresh token in each global anomaly.
const GLOBAL_FRESH_ATTRIBUTES: usize = 3;

pub fn global_token(n: usize) -> String {
    format!("{GLOBAL_TOKEN_PREFIX}{n}")
}

pub fn inject_global_anomalies(table: &EntryTable, count: usize, seed: u64) -> Result<EntryTable, DataError> {
    if count == 0 {
        return Ok(table.clone());
    }
    if table.is_empty() {
        return Err(DataError::Argument("cannot inject into an empty table".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cat = table.schema().categorical_count();
    let fresh_per_entry = GLOBAL_FRESH_ATTRIBUTES.min(n_cat);
    let mut taken: BTreeSet<String> = table
        .entries()
        .iter()
        .flat_map(|e| e.categorical.iter().cloned())
        .collect();
    let mut next_token = 0usize;
    let mut fresh = || loop {
        let token = global_token(next_token);
        next_token += 1;
        if taken.insert(token.clone()) {
            return token;
        }
    };

    let attributes: Vec<usize> = (0..n_cat).collect();
    let mut injected = Vec::with_capacity(count);
    for next_id in (table.next_id()..).take(count) {
        let base = table.entries().choose(&mut rng).expect("non-empty table");
        let mut entry = JournalEntry {
            id: next_id,
            ..base.clone()
        };
        for &attr in attributes.choose_multiple(&mut rng, fresh_per_entry) {
            entry.categorical[attr] = fresh();
        }
        injected.push(entry);
    }
    table.with_appended(injected, EntryLabel::Global)
}

struct PairCandidates {
    attrs: (usize, usize),
    unused: Vec<(String, String)>,
}

pub fn inject_local_anomalies(table: &EntryTable, count: usize, seed: u64) -> Result<EntryTable, DataError> {
    if count == 0 {
        return Ok(table.clone());
    }
    let schema = table.schema();
    let vocabs = table.categorical_vocabularies();
    if vocabs.iter().filter(|v| v.len() >= 2).count() < 2 {
        return Err(DataError::Argument(
            "local injection needs two categorical attributes with at least two values each".into(),
        ));
    }

    let names = schema.categorical_names();
    let mut candidates = Vec::new();
    let mut exhausted = Vec::new();
    for a in 0..vocabs.len() {
        for b in a + 1..vocabs.len() {
            let seen: BTreeSet<(&str, &str)> = table
                .entries()
                .iter()
                .map(|e| (e.categorical[a].as_str(), e.categorical[b].as_str()))
                .collect();
            let unused: Vec<(String, String)> = vocabs[a]
                .iter()
                .flat_map(|va| vocabs[b].iter().map(move |vb| (*va, *vb)))
                .filter(|pair| !seen.contains(pair))
                .map(|(va, vb)| (va.to_string(), vb.to_string()))
                .collect();
            if unused.is_empty() {
                exhausted.push((names[a].to_string(), names[b].to_string()));
            } else {
                candidates.push(PairCandidates { attrs: (a, b), unused });
            }
        }
    }
    if candidates.is_empty() {
        return Err(DataError::CombinationsExhausted { pairs: exhausted });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut injected = Vec::with_capacity(count);
    for next_id in (table.next_id()..).take(count) {
        let pair = &candidates[rng.random_range(0..candidates.len())];
        let (va, vb) = pair.unused.choose(&mut rng).expect("non-empty");
        let base = table.entries().choose(&mut rng).expect("vocabularies imply rows");
        let mut entry = JournalEntry {
            id: next_id,
            ..base.clone()
        };
        entry.categorical[pair.attrs.0] = va.clone();
        entry.categorical[pair.attrs.1] = vb.clone();
        injected.push(entry);
    }
    table.with_appended(injected, EntryLabel::Local)
}
