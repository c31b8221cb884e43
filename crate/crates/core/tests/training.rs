mod common;

use common::{encoded, small_table, tiny_architecture, tiny_config};
use jeaudit_core::aae::{
    decode, discriminator_step, encode, generator_step, reconstruction_step, regularization_step, sample_prior,
    train, AaeError, AaeModel, ArchitectureProfile, GeneratorLoss, ModelProvenance, Optimizers, PriorSpec,
    TrainConfig, LATENT_DIM,
};
use jeaudit_core::ledger::{AttributeSchema, EncodedMatrix, EntryTable, FeatureLayout, JournalEntry};
use jeaudit_core::nn::{cross_entropy_loss, mse_loss, Mlp};
use ndarray::{s, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fresh_model(matrix: &EncodedMatrix, config: &TrainConfig) -> (AaeModel, Optimizers) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = AaeModel::initialize(
        matrix.dims(),
        &config.architecture,
        PriorSpec::ring(config.tau, config.ring_radius).unwrap(),
        matrix.spec.digest(),
        ModelProvenance {
            gamma: config.gamma,
            lrelu_slope: config.lrelu_slope,
            seed: config.seed,
        },
        &mut rng,
    )
    .unwrap();
    let opt = Optimizers::new(&model, config).unwrap();
    (model, opt)
}

fn batch(matrix: &EncodedMatrix, rows: std::ops::Range<usize>) -> Array2<f64> {
    matrix.rows.slice(s![rows, ..]).to_owned()
}

fn max_abs_diff(a: &Mlp, b: &Mlp) -> f64 {
    a.layers()
        .iter()
        .zip(b.layers())
        .flat_map(|(x, y)| {
            x.weights
                .iter()
                .zip(&y.weights)
                .chain(x.bias.iter().zip(&y.bias))
                .map(|(u, v)| (u - v).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

#[test]
fn zero_epochs_returns_initialised_model() {
    let m = encoded(&small_table(50, 1));
    let config = TrainConfig {
        epochs_max: 0,
        ..tiny_config(4)
    };
    let (model, trace) = train(&m, &config).unwrap();
    assert_eq!(trace.epochs_run(), 0);
    assert!(trace.discriminator.is_empty() && trace.generator.is_empty());
    let (fresh, _) = fresh_model(&m, &config);
    assert_eq!(model, fresh);
}

#[test]
fn empty_matrix_and_bad_config_rejected() {
    let m = encoded(&small_table(20, 1));
    let mut empty = m.clone();
    empty.rows = Array2::zeros((0, m.dims()));
    empty.ids.clear();
    assert_eq!(train(&empty, &tiny_config(0)).unwrap_err(), AaeError::EmptyInput);
    for bad in [
        TrainConfig { gamma: 1.5, ..tiny_config(0) },
        TrainConfig { lr_disc: 0.0, ..tiny_config(0) },
        TrainConfig { batch_size: 0, ..tiny_config(0) },
        TrainConfig { tau: 0, ..tiny_config(0) },
    ] {
        assert!(matches!(train(&m, &bad), Err(AaeError::Config(_))));
    }
}

#[test]
fn training_is_bit_identical_for_equal_seeds() {
    let m = encoded(&small_table(300, 2));
    let config = tiny_config(9);
    let (a, ta) = train(&m, &config).unwrap();
    let (b, tb) = train(&m, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert_eq!(ta.epochs_run(), 3);
    let (c, _) = train(&m, &tiny_config(10)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn early_stopping_fires_after_patience() {
    let m = encoded(&small_table(64, 3));
    let config = TrainConfig {
        epochs_max: 50,
        patience: 2,
        min_delta: 10.0,
        ..tiny_config(1)
    };
    let (_, trace) = train(&m, &config).unwrap();
    // Nothing can improve by 10, so epochs 2 and 3 are stale.
    assert_eq!(trace.early_stop_epoch, Some(3));
    assert_eq!(trace.epochs_run(), 3);
}

#[test]
fn divergence_reports_epoch_and_step() {
    let m = encoded(&small_table(100, 3));
    let config = TrainConfig {
        lr_enc_dec: 1e300,
        epochs_max: 5,
        ..tiny_config(1)
    };
    match train(&m, &config) {
        Err(AaeError::Training { epoch, step, .. }) => {
            assert!(epoch >= 1 && step >= 1);
        }
        other => panic!("expected a training error, got {other:?}"),
    }
}

#[test]
fn reconstruction_step_leaves_discriminator_alone() {
    let m = encoded(&small_table(64, 4));
    let config = tiny_config(2);
    let (mut model, mut opt) = fresh_model(&m, &config);
    let before = model.clone();
    reconstruction_step(&mut model, &mut opt, m.rows.view(), &m.spec.layout(), config.gamma).unwrap();
    assert_eq!(model.discriminator, before.discriminator);
    assert_ne!(model.encoder, before.encoder);
    assert_ne!(model.decoder, before.decoder);
}

#[test]
fn adversarial_sub_steps_are_scoped() {
    let m = encoded(&small_table(64, 5));
    let config = tiny_config(3);
    let (mut model, mut opt) = fresh_model(&m, &config);
    let prior = sample_prior(&model.prior, 64, 8);
    let codes = encode(&model, m.rows.view()).unwrap();

    let before = model.clone();
    discriminator_step(&mut model, &mut opt, codes.view(), prior.view()).unwrap();
    assert_eq!(model.encoder, before.encoder);
    assert_eq!(model.decoder, before.decoder);
    assert_ne!(model.discriminator, before.discriminator);

    let before = model.clone();
    generator_step(&mut model, &mut opt, m.rows.view(), GeneratorLoss::NonSaturating).unwrap();
    assert_eq!(model.decoder, before.decoder);
    assert_eq!(model.discriminator, before.discriminator);
    assert_ne!(model.encoder, before.encoder);

    let before = model.clone();
    regularization_step(&mut model, &mut opt, m.rows.view(), prior.view(), GeneratorLoss::MinMax).unwrap();
    assert_eq!(model.decoder, before.decoder);
}

/// Applies one hand-assembled Adam update of encoder and decoder from a
/// per-row gradient with respect to the decoder output.
fn manual_update(
    model: &mut AaeModel,
    opt: &mut Optimizers,
    x: ArrayView2<f64>,
    output_grad: impl Fn(&[f64], &[f64]) -> Vec<f64>,
) {
    let enc = model.encoder.forward(x).unwrap();
    let dec = model.decoder.forward(enc.output().view()).unwrap();
    let mut grad = Array2::zeros(x.raw_dim());
    for (i, mut row) in grad.rows_mut().into_iter().enumerate() {
        let t = x.row(i).to_vec();
        let p = dec.output().row(i).to_vec();
        row.assign(&ndarray::Array1::from(output_grad(&t, &p)));
    }
    let dg = model.decoder.backward(&dec, grad.view()).unwrap();
    let eg = model.encoder.backward(&enc, dg.input.view()).unwrap();
    opt.decoder.step(&mut model.decoder, &dg).unwrap();
    opt.encoder.step(&mut model.encoder, &eg).unwrap();
}

fn gamma_endpoint(gamma: f64, layout: &FeatureLayout, m: &EncodedMatrix, output_grad: impl Fn(&[f64], &[f64]) -> Vec<f64>) {
    let config = tiny_config(6);
    let (mut a, mut oa) = fresh_model(m, &config);
    let (mut b, mut ob) = (a.clone(), oa.clone());
    let x = batch(m, 0..32);
    reconstruction_step(&mut a, &mut oa, x.view(), layout, gamma).unwrap();
    manual_update(&mut b, &mut ob, x.view(), output_grad);
    let lr = config.lr_enc_dec;
    assert!(max_abs_diff(&a.encoder, &b.encoder) < 1e-6 * lr);
    assert!(max_abs_diff(&a.decoder, &b.decoder) < 1e-6 * lr);
}

#[test]
fn gamma_one_is_pure_cross_entropy() {
    let m = encoded(&small_table(64, 7));
    let layout = m.spec.layout();
    let blocks = layout.categorical_blocks.clone();
    gamma_endpoint(1.0, &layout, &m, |t, p| cross_entropy_loss(t, p, &blocks).unwrap().grad);
}

#[test]
fn gamma_zero_is_pure_mse() {
    let m = encoded(&small_table(64, 7));
    let layout = m.spec.layout();
    let num = layout.numerical.clone();
    gamma_endpoint(0.0, &layout, &m, |t, p| {
        let mut g = vec![0.0; t.len()];
        let part = mse_loss(&t[num.clone()], &p[num.clone()]).unwrap().grad;
        g[num.clone()].copy_from_slice(&part);
        g
    });
}

#[test]
fn reconstruction_loss_value_matches_reference_losses() {
    let m = encoded(&small_table(40, 8));
    let layout = m.spec.layout();
    let config = tiny_config(1);
    let (model, _) = fresh_model(&m, &config);
    let x_hat = decode(&model, encode(&model, m.rows.view()).unwrap().view()).unwrap();
    let gamma = 2.0 / 3.0;
    let (value, _) = jeaudit_core::aae::reconstruction_objective(m.rows.view(), x_hat.view(), &layout, gamma).unwrap();
    let mut expected = 0.0;
    for i in 0..m.len() {
        let t = m.rows.row(i).to_vec();
        let p = x_hat.row(i).to_vec();
        let ce = cross_entropy_loss(&t, &p, &layout.categorical_blocks).unwrap().value;
        let mse = mse_loss(&t[layout.numerical.clone()], &p[layout.numerical.clone()]).unwrap().value;
        expected += gamma * ce + (1.0 - gamma) * mse;
    }
    expected /= m.len() as f64;
    assert!((value - expected).abs() < 1e-12);
}

#[test]
fn untrained_discriminator_starts_near_chance() {
    let m = encoded(&small_table(128, 9));
    for profile in [ArchitectureProfile::A, ArchitectureProfile::B] {
        let config = TrainConfig::for_profile(profile);
        let (mut model, mut opt) = fresh_model(&m, &config);
        let prior = sample_prior(&model.prior, 128, 2);
        let (d, _) =
            regularization_step(&mut model, &mut opt, m.rows.view(), prior.view(), GeneratorLoss::NonSaturating)
                .unwrap();
        let chance = std::f64::consts::LN_2;
        assert!((d - chance).abs() < 0.5 * chance, "{profile}: {d}");
    }
}

#[test]
fn discriminator_separates_disjoint_clouds() {
    let m = encoded(&small_table(10, 1));
    let config = TrainConfig {
        architecture: ArchitectureProfile::B.architecture(),
        lr_disc: 1e-3,
        tau: 5,
        ..tiny_config(12)
    };
    let (mut model, mut opt) = fresh_model(&m, &config);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Frozen "encoder output": a tight cloud well outside the prior ring.
    let cloud = |n: usize, rng: &mut ChaCha8Rng| {
        Array2::from_shape_fn((n, LATENT_DIM), |_| 20.0 + rng.random_range(-1.0..1.0))
    };
    for step in 0..500 {
        let prior = sample_prior(&model.prior, 64, 1000 + step);
        let fake = cloud(64, &mut rng);
        discriminator_step(&mut model, &mut opt, fake.view(), prior.view()).unwrap();
    }
    let prior = sample_prior(&model.prior, 500, 1);
    let fake = cloud(500, &mut rng);
    let real_ok = model.discriminator.predict(prior.view()).unwrap().iter().filter(|p| **p > 0.5).count();
    let fake_ok = model.discriminator.predict(fake.view()).unwrap().iter().filter(|p| **p < 0.5).count();
    let accuracy = (real_ok + fake_ok) as f64 / 1000.0;
    assert!(accuracy > 0.9, "accuracy {accuracy}");
}

#[test]
fn smoke_training_moving_average_decreases() {
    let m = encoded(&small_table(500, 13));
    let config = tiny_config(5);
    let (mut model, mut opt) = fresh_model(&m, &config);
    let layout = m.spec.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut losses = Vec::new();
    for step in 0..200 {
        let start = (step * 32) % (500 - 32);
        let x = batch(&m, start..start + 32);
        losses.push(reconstruction_step(&mut model, &mut opt, x.view(), &layout, config.gamma).unwrap());
        let prior = jeaudit_core::aae::sample_prior_with(&model.prior, 32, &mut rng);
        regularization_step(&mut model, &mut opt, x.view(), prior.view(), GeneratorLoss::NonSaturating).unwrap();
    }
    let avg = |r: std::ops::Range<usize>| losses[r.clone()].iter().sum::<f64>() / r.len() as f64;
    assert!(avg(100..200) <= avg(0..100), "{} vs {}", avg(100..200), avg(0..100));
}

/// Three prototype entries repeated with small amount jitter.
fn clustered_table() -> EntryTable {
    let entries = (0..600u64)
        .map(|i| {
            let p = (i % 3) as usize;
            JournalEntry {
                id: i,
                categorical: (0..6).map(|c| format!("p{p}a{c}")).collect(),
                numerical: vec![100.0 * (p + 1) as f64 + (i % 7) as f64, 50.0 + (i % 5) as f64],
            }
        })
        .collect();
    EntryTable::unlabeled(AttributeSchema::ledger_default(), entries).unwrap()
}

#[test]
fn codes_gather_around_modes_on_clustered_data() {
    let m = encoded(&clustered_table());
    let config = TrainConfig {
        epochs_max: 30,
        lr_disc: 1e-3,
        ..tiny_config(3)
    };
    let (model, _) = train(&m, &config).unwrap();
    let z = encode(&model, m.rows.view()).unwrap();
    assert!(z.iter().all(|v| v.is_finite()));
    let near = z
        .axis_iter(Axis(0))
        .filter(|row| {
            model
                .prior
                .centers()
                .iter()
                .any(|c| ((row[0] - c[0]).powi(2) + (row[1] - c[1]).powi(2)).sqrt() < 3.0)
        })
        .count();
    let share = near as f64 / m.len() as f64;
    assert!(share >= 0.9, "only {share} of codes within 3 of a mode");
}

#[test]
fn memorises_a_small_set() {
    let table = small_table(10, 31);
    let m = encoded(&table);
    let config = TrainConfig {
        architecture: tiny_architecture(),
        epochs_max: 1500,
        batch_size: 10,
        lr_enc_dec: 3e-3,
        ..tiny_config(8)
    };
    let (model, _) = train(&m, &config).unwrap();
    let x_hat = decode(&model, encode(&model, m.rows.view()).unwrap().view()).unwrap();
    assert_eq!(x_hat.ncols(), m.dims());
    assert!(x_hat.iter().all(|v| *v > 0.0 && *v < 1.0));
    let layout = m.spec.layout();
    let argmax = |row: ndarray::ArrayView1<f64>, block: &std::ops::Range<usize>| {
        block.clone().max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap()
    };
    for i in 0..m.len() {
        for block in &layout.categorical_blocks {
            assert_eq!(argmax(x_hat.row(i), block), argmax(m.rows.row(i), block), "row {i}");
        }
    }
}
