#![allow(dead_code)]

use jeaudit_core::aae::{Architecture, TrainConfig};
use jeaudit_core::ledger::{
    encode_entries, fit_encoding_spec, generate_synthetic_ledger, EncodedMatrix, EntryTable, GeneratorConfig,
};

pub fn small_table(n: usize, seed: u64) -> EntryTable {
    generate_synthetic_ledger(&GeneratorConfig {
        n_entries: n,
        seed,
        process_mix: vec![0.5, 0.3, 0.2],
    })
    .unwrap()
}

pub fn encoded(table: &EntryTable) -> EncodedMatrix {
    let spec = fit_encoding_spec(table).unwrap();
    encode_entries(table, &spec).unwrap()
}

pub fn tiny_architecture() -> Architecture {
    Architecture {
        encoder_hidden: vec![32, 8],
        decoder_hidden: vec![8, 32],
        discriminator_hidden: vec![16, 8],
    }
}

pub fn tiny_config(seed: u64) -> TrainConfig {
    TrainConfig {
        architecture: tiny_architecture(),
        epochs_max: 3,
        batch_size: 32,
        lr_enc_dec: 1e-3,
        lr_disc: 1e-4,
        seed,
        tau: 3,
        ..TrainConfig::default()
    }
}
