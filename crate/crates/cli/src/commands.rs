use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use jeaudit_core::aae::{train_observed, AaeModel, ArchitectureProfile, GeneratorLoss, TrainConfig};
use jeaudit_core::ledger::{
    apply_label_sidecar, encode_entries, fit_encoding_spec, generate_synthetic_ledger, inject_global_anomalies,
    inject_local_anomalies, load_journal_csv, read_label_sidecar, write_journal_csv, write_label_sidecar,
    AttributeSchema, EncodedMatrix, EncodingSpec, EntryTable, GeneratorConfig,
};
use jeaudit_core::report::{
    aggregate_runs, auc_and_precision_at_k, export_latent_json, load_checkpoint_for, per_class_mean_scores,
    read_latent_export, read_score_csv, save_checkpoint, write_score_csv, write_summary_csv, ClassScoreSummary,
};
use jeaudit_core::scoring::{score_table, NormalizationScope, ScoreTable, DEFAULT_ALPHA};

#[derive(Debug, Parser)]
#[command(name = "jeaudit", version, about = "Adversarial-autoencoder anomaly scoring for journal entries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic ledger CSV plus its label sidecar.
    Generate {
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated process weights, catalogue order.
        #[arg(long, value_delimiter = ',')]
        process_mix: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append global and local anomalies to a ledger.
    Inject {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 35)]
        globals: usize,
        #[arg(long, default_value_t = 25)]
        locals: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the one-hot encoding spec of a ledger and write it as JSON.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an adversarial autoencoder and write a checkpoint.
    Train(TrainArgs),
    /// Score a ledger with a checkpoint and write the score CSV.
    Score(ScoreArgs),
    /// Per-class summary and ranking metrics over one or more score CSVs.
    Report {
        /// One score CSV per run (for example one per seed).
        #[arg(long, required = true, num_args = 1..)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a ledger and write the latent JSON export.
    Export(ScoreArgs),
    /// Serve a latent export over HTTP.
    Serve {
        #[arg(long)]
        latent: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Encoding spec JSON; fitted on the input when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value = "A")]
    pub arch: ArchitectureProfile,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub tau: usize,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub gamma: f64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    /// Defaults to the profile's rate.
    #[arg(long)]
    pub lr_encdec: Option<f64>,
    #[arg(long)]
    pub lr_disc: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Use the literal min-max generator objective.
    #[arg(long)]
    pub minmax: bool,
    /// Per-epoch loss CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        let mut config = TrainConfig::for_profile(self.arch);
        config.seed = self.seed;
        config.tau = self.tau;
        config.gamma = self.gamma;
        config.batch_size = self.batch_size;
        if let Some(e) = self.epochs {
            config.epochs_max = e;
        }
        if let Some(lr) = self.lr_encdec {
            config.lr_enc_dec = lr;
        }
        if let Some(lr) = self.lr_disc {
            config.lr_disc = lr;
        }
        if let Some(p) = self.patience {
            config.patience = p;
        }
        if self.minmax {
            config.generator_loss = GeneratorLoss::MinMax;
        }
        config
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = "per-mode")]
    pub scope: NormalizationScope,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            n,
            seed,
            process_mix,
            out,
        } => {
            let mut config = GeneratorConfig {
                n_entries: n,
                seed,
                ..GeneratorConfig::default()
            };
            if let Some(mix) = process_mix {
                config.process_mix = mix;
            }
            let table = generate_synthetic_ledger(&config)?;
            write_ledger(&table, &out)?;
            log::info!("wrote {} entries to {}", table.len(), out.display());
        }
        Command::Inject {
            input,
            globals,
            locals,
            seed,
            out,
        } => {
            let table = load_ledger(&input)?;
            let table = inject_global_anomalies(&table, globals, seed)?;
            let table = inject_local_anomalies(&table, locals, seed.wrapping_add(1))?;
            write_ledger(&table, &out)?;
            log::info!("wrote {} entries ({globals} global, {locals} local added)", table.len());
        }
        Command::Encode { input, out } => {
            let spec = fit_encoding_spec(&load_ledger(&input)?)?;
            std::fs::write(&out, spec.to_json()).with_context(|| format!("writing {}", out.display()))?;
            log::info!("{} encoded dimensions, digest {}", spec.total_dims, spec.digest());
        }
        Command::Train(args) => train_command(&args)?,
        Command::Score(args) => {
            let (scores, _, _) = score_command(&args)?;
            write_score_csv(&args.out, &scores.records)?;
            log::info!("scored {} entries", scores.len());
        }
        Command::Report { scores, out } => report_command(&scores, out.as_deref())?,
        Command::Export(args) => {
            let (scores, table, model) = score_command(&args)?;
            export_latent_json(&scores, &table, model.prior.centers(), &args.out)?;
            log::info!("exported {} records to {}", scores.len(), args.out.display());
        }
        Command::Serve { latent, addr } => {
            let export = read_latent_export(&latent)?;
            tokio::runtime::Runtime::new()?.block_on(crate::server::serve(export, addr))?;
        }
    }
    Ok(())
}

/// `ledger.csv` -> `ledger.labels.csv`.
pub fn label_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.labels.csv"))
}

pub fn write_ledger(table: &EntryTable, path: &Path) -> Result<()> {
    write_journal_csv(table, path).with_context(|| format!("writing {}", path.display()))?;
    if table.has_ground_truth() {
        write_label_sidecar(table, label_path(path))?;
    }
    Ok(())
}

/// Reads a ledger CSV in the default schema, attaching the label sidecar if
/// one sits next to it.
pub fn load_ledger(path: &Path) -> Result<EntryTable> {
    let table = load_journal_csv(path, &AttributeSchema::ledger_default())
        .with_context(|| format!("reading {}", path.display()))?;
    let sidecar = label_path(path);
    if sidecar.exists() {
        return Ok(apply_label_sidecar(table, &read_label_sidecar(&sidecar)?)?);
    }
    Ok(table)
}

fn matrix_spec(spec: &Option<PathBuf>, table: &EntryTable) -> Result<EncodingSpec> {
    match spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(EncodingSpec::from_json(&text)?)
        }
        None => Ok(fit_encoding_spec(table)?),
    }
}

fn encoded(input: &Path, spec: &Option<PathBuf>) -> Result<(EntryTable, EncodedMatrix)> {
    let table = load_ledger(input)?;
    let spec = matrix_spec(spec, &table)?;
    let matrix = encode_entries(&table, &spec)?;
    Ok((table, matrix))
}

fn train_command(args: &TrainArgs) -> Result<()> {
    let (_, matrix) = encoded(&args.input, &args.spec)?;
    let config = args.config();
    log::info!(
        "training profile {} on {} x {} (tau {}, seed {})",
        args.arch,
        matrix.len(),
        matrix.dims(),
        config.tau,
        config.seed
    );
    let (model, trace) = train_observed(&matrix, &config, |r| {
        if r.epoch == 1 || r.epoch % 10 == 0 {
            log::info!(
                "epoch {:>5}  reconstruction {:.6}  discriminator {:.6}  generator {:.6}",
                r.epoch,
                r.reconstruction,
                r.discriminator,
                r.generator
            );
        }
    })?;
    save_checkpoint(&model, &args.out)?;
    if let Some(path) = &args.trace {
        let mut wtr = csv_writer(path)?;
        use std::io::Write;
        writeln!(wtr, "epoch,reconstruction,discriminator,generator")?;
        for e in 0..trace.epochs_run() {
            writeln!(
                wtr,
                "{},{},{},{}",
                e + 1,
                trace.reconstruction[e],
                trace.discriminator[e],
                trace.generator[e]
            )?;
        }
        wtr.flush()?;
    }
    match trace.early_stop_epoch {
        Some(e) => log::info!("early stop at epoch {e}"),
        None => log::info!("ran {} epochs", trace.epochs_run()),
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(file))
}

fn score_command(args: &ScoreArgs) -> Result<(ScoreTable, EntryTable, AaeModel)> {
    let (table, matrix) = encoded(&args.input, &args.spec)?;
    let model = load_checkpoint_for(&args.checkpoint, &matrix.spec)?;
    if model.input_dims() != matrix.dims() {
        bail!("checkpoint expects {} dims, data has {}", model.input_dims(), matrix.dims());
    }
    let scores = score_table(&model, &matrix, args.alpha, args.scope)?;
    Ok((scores, table, model))
}

fn report_command(paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut runs: Vec<(String, ClassScoreSummary)> = Vec::new();
    for path in paths {
        let records = read_score_csv(path).with_context(|| format!("reading {}", path.display()))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let summary = per_class_mean_scores(&records)?;
        println!("{name}");
        print_summary(&summary);
        match auc_and_precision_at_k(&records) {
            Ok(m) => {
                let precision: Vec<String> = m.precision.iter().map(|(k, p)| format!("P@{k} {p:.3}")).collect();
                println!("  AUC {:.4}  {}", m.auc, precision.join("  "));
            }
            Err(e) => println!("  ranking metrics unavailable: {e}"),
        }
        runs.push((name, summary));
    }
    if runs.len() > 1 {
        println!("all runs");
        let summaries: Vec<ClassScoreSummary> = runs.iter().map(|(_, s)| s.clone()).collect();
        print_summary(&aggregate_runs(&summaries));
    }
    if let Some(out) = out {
        write_summary_csv(out, &runs)?;
    }
    Ok(())
}

fn print_summary(summary: &ClassScoreSummary) {
    for c in &summary.classes {
        println!("  {:<8} n={:<7} AS {:.3} ± {:.3}", c.label.as_str(), c.count, c.mean, c.std_dev);
    }
}
