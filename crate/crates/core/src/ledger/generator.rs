//! Templated synthetic ledger.
//!
//! Each process template owns its document types, posting keys, G/L
//! accounts and account keys outright, so those four attributes identify
//! the process. Company code and currency are shared across processes.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{AttributeSchema, DataError, EntryTable, JournalEntry};

/// One posting key together with the G/L accounts it is booked against.
#[derive(Debug, Clone, Copy)]
pub struct Posting {
    pub key: &'static str,
    pub accounts: &'static [&'static str],
}

#[derive(Debug, Clone, Copy)]
pub struct ProcessTemplate {
    pub name: &'static str,
    pub document_types: &'static [&'static str],
    pub postings: &'static [Posting],
    pub account_keys: &'static [&'static str],
    /// Parameters of ln(local amount).
    pub amount_log_mean: f64,
    pub amount_log_sd: f64,
}

pub const PROCESS_CATALOGUE: [ProcessTemplate; 6] = [
    ProcessTemplate {
        name: "payment_run",
        document_types: &["ZP"],
        postings: &[
            Posting { key: "25", accounts: &["160000", "160100"] },
            Posting { key: "50", accounts: &["113100", "113200", "113300"] },
        ],
        account_keys: &["ZAH", "BNK"],
        amount_log_mean: 8.5,
        amount_log_sd: 1.0,
    },
    ProcessTemplate {
        name: "customer_invoice",
        document_types: &["DR", "DG"],
        postings: &[
            Posting { key: "01", accounts: &["140000", "140100"] },
            Posting { key: "11", accounts: &["800000", "800100", "800200"] },
        ],
        account_keys: &["ERL", "MWS"],
        amount_log_mean: 7.0,
        amount_log_sd: 1.2,
    },
    ProcessTemplate {
        name: "material_movement",
        document_types: &["WE", "WA"],
        postings: &[
            Posting { key: "89", accounts: &["300000", "300100"] },
            Posting { key: "99", accounts: &["890000", "891000"] },
        ],
        account_keys: &["BSX", "GBB"],
        amount_log_mean: 6.0,
        amount_log_sd: 0.8,
    },
    ProcessTemplate {
        name: "vendor_invoice",
        document_types: &["KR", "RE"],
        postings: &[
            Posting { key: "31", accounts: &["160200", "160300"] },
            Posting { key: "40", accounts: &["400000", "410000", "420000"] },
        ],
        account_keys: &["WRX", "VST"],
        amount_log_mean: 7.5,
        amount_log_sd: 1.1,
    },
    ProcessTemplate {
        name: "depreciation",
        document_types: &["AF"],
        postings: &[
            Posting { key: "70", accounts: &["211500", "211600"] },
            Posting { key: "75", accounts: &["650000", "651000"] },
        ],
        account_keys: &["AFA"],
        amount_log_mean: 9.0,
        amount_log_sd: 0.6,
    },
    ProcessTemplate {
        name: "manual_payment",
        document_types: &["SA"],
        postings: &[
            Posting { key: "21", accounts: &["170000"] },
            Posting { key: "15", accounts: &["113400", "113500"] },
        ],
        account_keys: &["ZAM"],
        amount_log_mean: 8.0,
        amount_log_sd: 1.5,
    },
];

const COMPANY_CODES: [&str; 4] = ["C100", "C200", "C300", "C400"];
/// Currency, selection weight, local-per-foreign exchange rate.
const CURRENCIES: [(&str, f64, f64); 4] = [
    ("EUR", 0.55, 1.0),
    ("USD", 0.25, 0.92),
    ("CHF", 0.12, 1.05),
    ("GBP", 0.08, 1.17),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_entries: usize,
    pub seed: u64,
    /// Weight of each catalogue process, in catalogue order.
    pub process_mix: Vec<f64>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_entries: 20_000,
            seed: 0,
            process_mix: vec![0.30, 0.25, 0.20, 0.15, 0.10],
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), DataError> {
        let n = self.process_mix.len();
        if !(3..=PROCESS_CATALOGUE.len()).contains(&n) {
            return Err(DataError::Argument(format!(
                "process mix must name between 3 and {} processes, got {n}",
                PROCESS_CATALOGUE.len()
            )));
        }
        if self.process_mix.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(DataError::Argument("process weights must be positive".into()));
        }
        let total: f64 = self.process_mix.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DataError::Argument(format!(
                "process weights must sum to 1, got {total}"
            )));
        }
        Ok(())
    }
}

/// Draws `n_entries` line items over the ledger default schema.
pub fn generate_synthetic_ledger(config: &GeneratorConfig) -> Result<EntryTable, DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cumulative = Vec::with_capacity(config.process_mix.len());
    let mut acc = 0.0;
    for w in &config.process_mix {
        acc += w;
        cumulative.push(acc);
    }
    let amount_dists = PROCESS_CATALOGUE
        .iter()
        .map(|p| LogNormal::new(p.amount_log_mean, p.amount_log_sd).expect("valid log-normal"))
        .collect::<Vec<_>>();

    let entries = (0..config.n_entries)
        .map(|i| {
            let u: f64 = rng.random::<f64>() * acc;
            let process = cumulative.iter().position(|c| u < *c).unwrap_or(cumulative.len() - 1);
            let template = &PROCESS_CATALOGUE[process];
            draw_entry(i as u64, template, &amount_dists[process], &mut rng)
        })
        .collect();
    let mut table = EntryTable::unlabeled(AttributeSchema::ledger_default(), entries)?;
    // Generated data is fully labelled: every entry is regular.
    let labels = table.labels().to_vec();
    table.set_labels(labels);
    Ok(table)
}

fn draw_entry(
    id: u64,
    template: &ProcessTemplate,
    amounts: &LogNormal<f64>,
    rng: &mut ChaCha8Rng,
) -> JournalEntry {
    let pick = |rng: &mut ChaCha8Rng, values: &[&'static str]| -> String {
        values.choose(rng).expect("non-empty template").to_string()
    };
    let company = pick(rng, &COMPANY_CODES);
    let doc_type = pick(rng, template.document_types);
    let posting = template.postings.choose(rng).expect("non-empty template");
    let account = pick(rng, posting.accounts);
    let account_key = pick(rng, template.account_keys);

    let u: f64 = rng.random();
    let mut acc = 0.0;
    let (currency, _, rate) = CURRENCIES
        .iter()
        .find(|(_, w, _)| {
            acc += w;
            u < acc
        })
        .copied()
        .unwrap_or(CURRENCIES[0]);

    let local = round_cents(amounts.sample(rng));
    let foreign = round_cents(local / rate);
    JournalEntry {
        id,
        categorical: vec![
            company,
            doc_type,
            posting.key.to_string(),
            account,
            account_key,
            currency.to_string(),
        ],
        numerical: vec![local, foreign],
    }
}

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn zero_entries_is_empty() {
        let table = generate_synthetic_ledger(&GeneratorConfig {
            n_entries: 0,
            ..Default::default()
        })
        .unwrap();
        assert!(table.is_empty());
    }

    #[test]
    fn same_seed_same_table() {
        let config = GeneratorConfig {
            n_entries: 500,
            seed: 11,
            ..Default::default()
        };
        let first = generate_synthetic_ledger(&config).unwrap();
        assert_eq!(first, generate_synthetic_ledger(&config).unwrap());
        let other = generate_synthetic_ledger(&GeneratorConfig { seed: 12, ..config }).unwrap();
        assert_ne!(first.entries(), other.entries());
    }

    #[test]
    fn rejects_bad_mix() {
        for mix in [vec![0.5, 0.5], vec![0.5, 0.3, 0.3], vec![1.0, 0.0, 0.0]] {
            let config = GeneratorConfig {
                n_entries: 1,
                seed: 0,
                process_mix: mix,
            };
            assert!(matches!(generate_synthetic_ledger(&config), Err(DataError::Argument(_))));
        }
    }

    #[test]
    fn processes_are_disjoint_on_discriminating_attributes() {
        let config = GeneratorConfig {
            n_entries: 20_000,
            seed: 3,
            process_mix: vec![0.5, 0.3, 0.2],
        };
        let table = generate_synthetic_ledger(&config).unwrap();
        // BLART, BSCHL, HKONT, KTOSL
        let discriminating = [1usize, 2, 3, 4];
        let mut per_process: Vec<BTreeSet<Vec<&str>>> = vec![BTreeSet::new(); 3];
        for entry in table.entries() {
            let process = PROCESS_CATALOGUE
                .iter()
                .position(|p| p.document_types.contains(&entry.categorical[1].as_str()))
                .expect("document type from catalogue");
            assert!(process < 3);
            per_process[process]
                .insert(discriminating.iter().map(|&i| entry.categorical[i].as_str()).collect());
        }
        for (i, a) in per_process.iter().enumerate() {
            assert!(!a.is_empty());
            for b in &per_process[i + 1..] {
                assert!(a.is_disjoint(b));
            }
            // Also disjoint attribute by attribute.
            for &attr in &discriminating {
                let values_a: BTreeSet<_> = a.iter().map(|c| c[attr - 1]).collect();
                for b in &per_process[i + 1..] {
                    let values_b: BTreeSet<_> = b.iter().map(|c| c[attr - 1]).collect();
                    assert!(values_a.is_disjoint(&values_b));
                }
            }
        }
    }

    #[test]
    fn amounts_are_positive_cents() {
        let table = generate_synthetic_ledger(&GeneratorConfig {
            n_entries: 2_000,
            ..Default::default()
        })
        .unwrap();
        for entry in table.entries() {
            for &a in &entry.numerical {
                assert!(a >= 0.0);
                assert_eq!(round_cents(a), a);
            }
        }
    }
}
