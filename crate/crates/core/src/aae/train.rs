use log::{debug, info};
use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sample_prior_with, AaeError, AaeModel, Architecture, ArchitectureProfile, ModelProvenance, PriorSpec};
use crate::ledger::{EncodedMatrix, FeatureLayout};
use crate::nn::{ActivationTrace, AdamState, NnError, PROB_CLIP};

/// Encoder objective in the adversarial phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// Minimise `-log d(q(x))`.
    NonSaturating,
    /// Minimise `log(1 - d(q(x)))`, the literal min-max form.
    MinMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub epochs_max: usize,
    pub batch_size: usize,
    pub lr_enc_dec: f64,
    pub lr_disc: f64,
    /// Weight of the categorical cross-entropy; `1 - gamma` weights the MSE.
    pub gamma: f64,
    pub lrelu_slope: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub tau: usize,
    pub ring_radius: f64,
    pub seed: u64,
    pub patience: usize,
    pub min_delta: f64,
    pub generator_loss: GeneratorLoss,
}

impl TrainConfig {
    /// Layer widths and learning rates of one published profile.
    pub fn for_profile(profile: ArchitectureProfile) -> Self {
        let lr_enc_dec = match profile {
            ArchitectureProfile::A => 1e-4,
            ArchitectureProfile::B => 1e-3,
        };
        Self {
            architecture: profile.architecture(),
            epochs_max: 10_000,
            batch_size: 128,
            lr_enc_dec,
            lr_disc: 1e-5,
            gamma: 2.0 / 3.0,
            lrelu_slope: 0.4,
            beta1: 0.9,
            beta2: 0.999,
            tau: 5,
            ring_radius: super::DEFAULT_RING_RADIUS,
            seed: 0,
            patience: 100,
            min_delta: 1e-5,
            generator_loss: GeneratorLoss::NonSaturating,
        }
    }

    pub fn validate(&self) -> Result<(), AaeError> {
        let fail = |m: String| Err(AaeError::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(self.lr_enc_dec > 0.0 && self.lr_disc > 0.0) {
            return fail("learning rates must be positive".into());
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive".into());
        }
        if !(self.lrelu_slope > 0.0 && self.lrelu_slope < 1.0) {
            return fail(format!("leaky relu slope {} outside (0, 1)", self.lrelu_slope));
        }
        if !(self.min_delta >= 0.0) {
            return fail("min-delta must be non-negative".into());
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_profile(ArchitectureProfile::A)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub reconstruction: Vec<f64>,
    pub discriminator: Vec<f64>,
    pub generator: Vec<f64>,
    /// 1-based epoch at which early stopping fired.
    pub early_stop_epoch: Option<usize>,
}

impl TrainTrace {
    pub fn epochs_run(&self) -> usize {
        self.reconstruction.len()
    }
}

/// Epoch means reported to a training observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub reconstruction: f64,
    pub discriminator: f64,
    pub generator: f64,
}

/// Adam states. The generator phase keeps its own moments for the encoder,
/// separate from the ones used by the reconstruction phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    pub encoder: AdamState,
    pub decoder: AdamState,
    pub generator: AdamState,
    pub discriminator: AdamState,
}

impl Optimizers {
    pub fn new(model: &AaeModel, config: &TrainConfig) -> Result<Self, AaeError> {
        let (b1, b2) = (config.beta1, config.beta2);
        Ok(Self {
            encoder: AdamState::new(&model.encoder, config.lr_enc_dec, b1, b2)?,
            decoder: AdamState::new(&model.decoder, config.lr_enc_dec, b1, b2)?,
            generator: AdamState::new(&model.encoder, config.lr_enc_dec, b1, b2)?,
            discriminator: AdamState::new(&model.discriminator, config.lr_disc, b1, b2)?,
        })
    }
}

/// Mean over rows of `gamma * CE(categorical) + (1 - gamma) * MSE(numerical)`
/// and its per-row gradient with respect to the decoder's output logits.
///
/// CE averages binary cross-entropy over all categorical dimensions and MSE
/// averages over the numerical columns.
pub fn reconstruction_objective(
    x: ArrayView2<f64>,
    x_hat: ArrayView2<f64>,
    layout: &FeatureLayout,
    gamma: f64,
) -> Result<(f64, Array2<f64>), NnError> {
    if x.dim() != x_hat.dim() || x.ncols() != layout.total_dims() {
        return Err(NnError::Mismatch(format!(
            "targets {:?}, reconstructions {:?}, layout width {}",
            x.dim(),
            x_hat.dim(),
            layout.total_dims()
        )));
    }
    let n_cat = layout.categorical_dims() as f64;
    let n_num = layout.numerical_dims() as f64;
    let mut grad = Array2::zeros(x.raw_dim());
    let mut total = 0.0;
    for ((t, p), mut g) in x.rows().into_iter().zip(x_hat.rows()).zip(grad.rows_mut()) {
        let mut ce = 0.0;
        for (b, block) in layout.categorical_blocks.iter().enumerate() {
            if !is_one_hot(t.slice(s![block.clone()])) {
                return Err(NnError::InvalidTarget { block: b });
            }
            for j in block.clone() {
                let pc = p[j].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                ce -= t[j] * pc.ln() + (1.0 - t[j]) * (1.0 - pc).ln();
                g[j] = gamma * (p[j] - t[j]) / n_cat;
            }
        }
        let mut mse = 0.0;
        for j in layout.numerical.clone() {
            let d = p[j] - t[j];
            mse += d * d;
            g[j] = (1.0 - gamma) * 2.0 * d / n_num * p[j] * (1.0 - p[j]);
        }
        if n_cat > 0.0 {
            total += gamma * ce / n_cat;
        }
        if n_num > 0.0 {
            total += (1.0 - gamma) * mse / n_num;
        }
    }
    Ok((total / x.nrows().max(1) as f64, grad))
}

fn is_one_hot(block: ndarray::ArrayView1<f64>) -> bool {
    let mut ones = 0;
    for &v in block {
        if v == 1.0 {
            ones += 1;
        } else if v != 0.0 {
            return false;
        }
    }
    ones == 1
}

/// One Adam update of encoder and decoder on the reconstruction loss.
/// Returns the loss before the update.
pub fn reconstruction_step(
    model: &mut AaeModel,
    optimizers: &mut Optimizers,
    batch: ArrayView2<f64>,
    layout: &FeatureLayout,
    gamma: f64,
) -> Result<f64, AaeError> {
    let enc_trace = model.encoder.forward(batch)?;
    ensure_finite(enc_trace.output(), "latent code")?;
    let dec_trace = model.decoder.forward(enc_trace.output().view())?;
    let (loss, logit_grad) = reconstruction_objective(batch, dec_trace.output().view(), layout, gamma)?;
    if !loss.is_finite() {
        return Err(AaeError::NonFinite("reconstruction loss"));
    }
    let dec_grads = model.decoder.backward_from_logits(&dec_trace, logit_grad.view())?;
    let enc_grads = model.encoder.backward_params(&enc_trace, dec_grads.input.view())?;
    optimizers.decoder.step(&mut model.decoder, &dec_grads)?;
    optimizers.encoder.step(&mut model.encoder, &enc_grads)?;
    Ok(loss)
}

/// Discriminator update (prior samples labelled 1, encoder codes 0), then
/// a generator update of the encoder against the updated discriminator.
/// Returns `(discriminator loss, generator loss)`, each measured before its
/// own update.
pub fn regularization_step(
    model: &mut AaeModel,
    optimizers: &mut Optimizers,
    batch: ArrayView2<f64>,
    prior_samples: ArrayView2<f64>,
    generator_loss: GeneratorLoss,
) -> Result<(f64, f64), AaeError> {
    // The encoder is unchanged until the generator update, so one forward
    // pass serves both sub-steps.
    let enc_trace = model.encoder.forward(batch)?;
    ensure_finite(enc_trace.output(), "latent code")?;
    let disc_loss = discriminator_step(model, optimizers, enc_trace.output().view(), prior_samples)?;
    let gen_loss = generator_update(model, optimizers, &enc_trace, generator_loss)?;
    Ok((disc_loss, gen_loss))
}

/// One discriminator update separating `prior_samples` (label 1) from the
/// encoder codes `latent` (label 0). Binary cross-entropy is averaged over
/// both sets together. Returns the loss before the update.
pub fn discriminator_step(
    model: &mut AaeModel,
    optimizers: &mut Optimizers,
    latent: ArrayView2<f64>,
    prior_samples: ArrayView2<f64>,
) -> Result<f64, AaeError> {
    let n_real = prior_samples.nrows();
    let input = concatenate(Axis(0), &[prior_samples, latent])
        .map_err(|e| NnError::Mismatch(format!("prior samples vs latent codes: {e}")))?;
    let labels: Array1<f64> = (0..input.nrows()).map(|i| if i < n_real { 1.0 } else { 0.0 }).collect();
    let trace = model.discriminator.forward(input.view())?;
    let p = trace.output().column(0).to_owned();
    let loss = p
        .iter()
        .zip(&labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / p.len().max(1) as f64;
    if !loss.is_finite() {
        return Err(AaeError::NonFinite("discriminator loss"));
    }
    let logit_grad = (&p - &labels).insert_axis(Axis(1));
    let grads = model.discriminator.backward_from_logits(&trace, logit_grad.view())?;
    optimizers.discriminator.step(&mut model.discriminator, &grads)?;
    Ok(loss)
}

/// One encoder update against the current discriminator. The
/// discriminator and decoder are left untouched. Returns the loss before
/// the update.
pub fn generator_step(
    model: &mut AaeModel,
    optimizers: &mut Optimizers,
    batch: ArrayView2<f64>,
    generator_loss: GeneratorLoss,
) -> Result<f64, AaeError> {
    let enc_trace = model.encoder.forward(batch)?;
    ensure_finite(enc_trace.output(), "latent code")?;
    generator_update(model, optimizers, &enc_trace, generator_loss)
}

fn generator_update(
    model: &mut AaeModel,
    optimizers: &mut Optimizers,
    enc_trace: &ActivationTrace,
    generator_loss: GeneratorLoss,
) -> Result<f64, AaeError> {
    let disc_trace = model.discriminator.forward(enc_trace.output().view())?;
    let d = disc_trace.output();
    let mut logit_grad = Array2::zeros(d.raw_dim());
    let mut loss = 0.0;
    Zip::from(&mut logit_grad).and(d).for_each(|g, &p| {
        let pc = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        match generator_loss {
            GeneratorLoss::NonSaturating => {
                loss -= pc.ln();
                *g = p - 1.0;
            }
            GeneratorLoss::MinMax => {
                loss += (1.0 - pc).ln();
                *g = -p;
            }
        }
    });
    loss /= d.nrows().max(1) as f64;
    if !loss.is_finite() {
        return Err(AaeError::NonFinite("generator loss"));
    }
    let through_disc = model.discriminator.backward_from_logits(&disc_trace, logit_grad.view())?;
    let enc_grads = model.encoder.backward_params(enc_trace, through_disc.input.view())?;
    optimizers.generator.step(&mut model.encoder, &enc_grads)?;
    Ok(loss)
}

fn ensure_finite(values: &Array2<f64>, quantity: &'static str) -> Result<(), AaeError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(AaeError::NonFinite(quantity))
    }
}

pub fn train(matrix: &EncodedMatrix, config: &TrainConfig) -> Result<(AaeModel, TrainTrace), AaeError> {
    train_observed(matrix, config, |_| {})
}

/// [`train`] with a callback after every epoch.
///
/// A single seeded stream drives initialisation, shuffling and prior
/// sampling, so equal configs give bit-identical models and traces.
pub fn train_observed(
    matrix: &EncodedMatrix,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<(AaeModel, TrainTrace), AaeError> {
    config.validate()?;
    if matrix.is_empty() {
        return Err(AaeError::EmptyInput);
    }
    let layout = matrix.spec.layout();
    let prior = PriorSpec::ring(config.tau, config.ring_radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let provenance = ModelProvenance {
        gamma: config.gamma,
        lrelu_slope: config.lrelu_slope,
        seed: config.seed,
    };
    let mut model = AaeModel::initialize(
        matrix.dims(),
        &config.architecture,
        prior,
        matrix.spec.digest(),
        provenance,
        &mut rng,
    )?;
    let mut optimizers = Optimizers::new(&model, config)?;
    let mut trace = TrainTrace::default();
    let mut order: Vec<usize> = (0..matrix.len()).collect();
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let n = matrix.len() as f64;

    for epoch in 1..=config.epochs_max {
        order.shuffle(&mut rng);
        let (mut recon, mut disc, mut gen) = (0.0, 0.0, 0.0);
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let at = |e: AaeError| match e {
                AaeError::NonFinite(quantity) => AaeError::Training {
                    epoch,
                    step: step + 1,
                    quantity,
                },
                other => other,
            };
            let batch = matrix.rows.select(Axis(0), chunk);
            let r = reconstruction_step(&mut model, &mut optimizers, batch.view(), &layout, config.gamma)
                .map_err(at)?;
            let samples = sample_prior_with(&model.prior, chunk.len(), &mut rng);
            let (d, g) = regularization_step(
                &mut model,
                &mut optimizers,
                batch.view(),
                samples.view(),
                config.generator_loss,
            )
            .map_err(at)?;
            let w = chunk.len() as f64;
            recon += r * w;
            disc += d * w;
            gen += g * w;
        }
        let record = EpochRecord {
            epoch,
            reconstruction: recon / n,
            discriminator: disc / n,
            generator: gen / n,
        };
        debug!(
            "epoch {epoch}: reconstruction {:.6} discriminator {:.6} generator {:.6}",
            record.reconstruction, record.discriminator, record.generator
        );
        trace.reconstruction.push(record.reconstruction);
        trace.discriminator.push(record.discriminator);
        trace.generator.push(record.generator);
        observer(&record);

        if record.reconstruction < best - config.min_delta {
            best = record.reconstruction;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                info!("early stop at epoch {epoch}: no improvement for {stale} epochs");
                trace.early_stop_epoch = Some(epoch);
                break;
            }
        }
    }
    Ok((model, trace))
}
