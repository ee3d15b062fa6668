//! The five subcommands: train, compare, pso, gradcheck, fetch-data.

use crate::checkpoint;
use crate::error::{CliError, Result};
use crate::manifest::{
    git_describe, unix_now, DataManifest, ModelManifest, OptimizerManifest, RunManifest,
};
use crate::metrics::{MetricsRecord, MetricsTable};
use actgrad_core::data::{
    load_test_set, load_train_set, write_synthetic_corpus, Dataset, TEST_FILE, TRAIN_FILES,
};
use actgrad_core::gradcheck::{check_report, CheckComponent, TOL};
use actgrad_core::network::Network;
use actgrad_core::optim::{lr_schedule, train_epoch, RmspropState, EPSILON, RHO};
use actgrad_core::pretrain::{pretrain_network, AePretrainConfig};
use actgrad_core::pso::{pso_train, SwarmConfig};
use actgrad_core::rng::{component, component_seed, stream_seed};
use clap::Args;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// MD5 of the canonical CIFAR-10 binary archive.
pub const CIFAR10_MD5: &str = "c32a1d4ab5d03f1284b67883e8d87530";
pub const CIFAR10_URL: &str = "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz";

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Directory holding the CIFAR-10 binary batch files.
    #[arg(long, global = true, env = "ACTGRAD_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Where metrics CSVs, checkpoints and manifests are written.
    #[arg(long, global = true, default_value = "runs")]
    pub out_dir: PathBuf,
    /// Master seed; every random choice in a run derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

impl GlobalArgs {
    fn data_dir(&self) -> Result<PathBuf> {
        match &self.data_dir {
            Some(d) => Ok(d.clone()),
            None => Err(CliError::Usage(
                "no data directory: pass --data-dir or set ACTGRAD_DATA_DIR".to_string(),
            )),
        }
    }

    fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))
    }
}

fn load_datasets(dir: &Path) -> Result<(Dataset, Dataset)> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!(
            "data directory {} does not exist (run `actgrad fetch-data` first)",
            dir.display()
        )));
    }
    Ok((load_train_set(dir)?, load_test_set(dir)?))
}

// ── train ───────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Network size: small, middle or large.
    #[arg(long)]
    pub size: Option<String>,
    /// Activation: relu, fourier or lc.
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Stratified training subset size (default: full merged train set).
    #[arg(long)]
    pub subset: Option<usize>,
    /// Stratified validation subset size (default: full test batch).
    #[arg(long)]
    pub val_subset: Option<usize>,
    /// Number of Fourier harmonics for fourier activations.
    #[arg(long, default_value_t = 5)]
    pub fourier_rank: usize,
    /// One activation parameter set per conv channel instead of per layer.
    #[arg(long)]
    pub per_channel: bool,
    /// Greedy layerwise autoencoder pretraining before supervised training.
    #[arg(long)]
    pub pretrain_ae: bool,
    /// Autoencoder epochs per conv layer (with --pretrain-ae).
    #[arg(long, default_value_t = 5)]
    pub ae_epochs: usize,
    /// Also run the identically-seeded run without pretraining.
    #[arg(long)]
    pub with_baseline: bool,
    /// Re-run a recorded manifest instead of passing flags.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
}

pub struct TrainOutcome {
    pub csv_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub manifest_path: PathBuf,
    pub best_val_accuracy: f64,
}

pub fn run_train(global: &GlobalArgs, args: &TrainArgs) -> Result<Vec<TrainOutcome>> {
    let manifest = manifest_from_args(global, args)?;
    if args.with_baseline && !args.pretrain_ae {
        return Err(CliError::Usage(
            "--with-baseline only makes sense together with --pretrain-ae".to_string(),
        ));
    }
    global.ensure_out_dir()?;
    let dir = global.data_dir()?;
    let (train_full, val_full) = load_datasets(&dir)?;
    let train = match manifest.data.train_subset {
        Some(n) => train_full.subset(n, manifest.seed)?,
        None => train_full,
    };
    let val = match manifest.data.val_subset {
        Some(n) => val_full.subset(n, manifest.seed)?,
        None => val_full,
    };

    let mut outcomes = vec![run_one_training(global, &manifest, &train, &val)?];
    if args.with_baseline {
        let mut baseline = manifest.clone();
        baseline.optimizer.ae_epochs_per_layer = 0;
        println!("baseline run (no pretraining), same seed");
        outcomes.push(run_one_training(global, &baseline, &train, &val)?);
    }
    Ok(outcomes)
}

fn manifest_from_args(global: &GlobalArgs, args: &TrainArgs) -> Result<RunManifest> {
    if let Some(path) = &args.from_manifest {
        if args.size.is_some() || args.activation.is_some() || args.epochs.is_some() {
            return Err(CliError::Usage(
                "--from-manifest replaces --size/--activation/--epochs; drop them".to_string(),
            ));
        }
        let mut m = RunManifest::read(path)?;
        m.git_describe = git_describe();
        m.started_at = unix_now();
        return Ok(m);
    }
    let (size, activation, epochs) = match (&args.size, &args.activation, args.epochs) {
        (Some(s), Some(a), Some(e)) => (s.clone(), a.clone(), e),
        _ => {
            return Err(CliError::Usage(
                "train needs --size, --activation and --epochs (or --from-manifest)".to_string(),
            ))
        }
    };
    if epochs == 0 {
        return Err(CliError::Usage("--epochs must be at least 1".to_string()));
    }
    if args.batch_size == 0 {
        return Err(CliError::Usage("--batch-size must be at least 1".to_string()));
    }
    if args.fourier_rank == 0 {
        return Err(CliError::Usage("--fourier-rank must be at least 1".to_string()));
    }
    let manifest = RunManifest {
        model: ModelManifest {
            size,
            activation,
            fourier_rank: args.fourier_rank,
            per_channel: args.per_channel,
        },
        optimizer: OptimizerManifest {
            algorithm: "rmsprop".to_string(),
            rho: RHO,
            epsilon: EPSILON,
            batch_size: args.batch_size,
            epochs,
            lr_schedule: "staged".to_string(),
            ae_epochs_per_layer: if args.pretrain_ae { args.ae_epochs } else { 0 },
        },
        data: DataManifest {
            train_subset: args.subset,
            val_subset: args.val_subset,
        },
        seed: global.seed,
        git_describe: git_describe(),
        started_at: unix_now(),
    };
    // fail on unknown size/activation names before any data loads
    manifest.model_config().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(manifest)
}

fn run_stem(manifest: &RunManifest) -> String {
    let mut stem = format!(
        "{}-{}-seed{}",
        manifest.model.size, manifest.model.activation, manifest.seed
    );
    if manifest.optimizer.ae_epochs_per_layer > 0 {
        stem.push_str("-ae");
    }
    stem
}

fn run_one_training(
    global: &GlobalArgs,
    manifest: &RunManifest,
    train: &Dataset,
    val: &Dataset,
) -> Result<TrainOutcome> {
    let stem = run_stem(manifest);
    let csv_path = global.out_dir.join(format!("metrics-{stem}.csv"));
    let checkpoint_path = global.out_dir.join(format!("{stem}.ckpt"));
    let manifest_path = global.out_dir.join(format!("{stem}.manifest.json"));

    let cfg = manifest.model_config()?;
    let mut net = Network::build(&cfg)?;
    let pretrained = manifest.optimizer.ae_epochs_per_layer > 0;
    if pretrained {
        println!(
            "autoencoder pretraining: {} epochs per conv layer",
            manifest.optimizer.ae_epochs_per_layer
        );
        let ae_cfg = AePretrainConfig {
            epochs_per_layer: manifest.optimizer.ae_epochs_per_layer,
            batch_size: manifest.optimizer.batch_size,
            seed: manifest.seed,
            ..AePretrainConfig::default()
        };
        let histories = pretrain_network(&mut net, &train.images, &ae_cfg)?;
        for (i, h) in histories.iter().enumerate() {
            let last = h.last().copied().unwrap_or(f64::NAN);
            println!("  conv{} reconstruction mse {:.6} -> {:.6}", i + 1, h[0], last);
        }
    }

    let mut table = MetricsTable::new(if pretrained { Some(true) } else { None });
    let mut state = RmspropState::new(net.param_count());
    let shuffle_base = component_seed(manifest.seed, component::DATA_SHUFFLE);
    let mut best_val = f64::NEG_INFINITY;
    for epoch in 1..=manifest.optimizer.epochs {
        let t0 = Instant::now();
        let lr = lr_schedule(epoch)?;
        train_epoch(
            &mut net,
            &mut state,
            train,
            manifest.optimizer.batch_size,
            lr,
            stream_seed(shuffle_base, epoch as u64),
        )?;
        let (train_loss, train_accuracy) = net.evaluate(&train.images, &train.one_hot)?;
        let (val_loss, val_accuracy) = net.evaluate(&val.images, &val.one_hot)?;
        let wall_seconds = t0.elapsed().as_secs_f64();
        println!(
            "epoch {epoch}/{}: train_acc {train_accuracy:.4} train_loss {train_loss:.4} \
             val_acc {val_accuracy:.4} val_loss {val_loss:.4} ({wall_seconds:.1}s)",
            manifest.optimizer.epochs
        );
        table.push(MetricsRecord {
            epoch,
            train_accuracy,
            train_loss,
            val_accuracy,
            val_loss,
            wall_seconds,
        });
        if val_accuracy > best_val {
            best_val = val_accuracy;
            checkpoint::save(&checkpoint_path, manifest, &net)?;
        }
    }
    table.write(&csv_path)?;
    manifest.write(&manifest_path)?;

    let best = table
        .records
        .iter()
        .max_by(|a, b| a.val_accuracy.total_cmp(&b.val_accuracy))
        .expect("at least one epoch");
    println!(
        "{} {} best: train_acc {:.4} train_loss {:.4} val_acc {:.4} val_loss {:.4}",
        manifest.model.size,
        manifest.model.activation,
        best.train_accuracy,
        best.train_loss,
        best.val_accuracy,
        best.val_loss
    );
    println!("metrics: {}", csv_path.display());
    Ok(TrainOutcome {
        csv_path,
        checkpoint_path,
        manifest_path,
        best_val_accuracy: best.val_accuracy,
    })
}

// ── compare ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Metrics CSV of the baseline run.
    #[arg(long)]
    pub baseline: PathBuf,
    /// Metrics CSV of a variant run; repeatable.
    #[arg(long, required = true)]
    pub variant: Vec<PathBuf>,
}

pub fn run_compare(args: &CompareArgs) -> Result<String> {
    let baseline = MetricsTable::read(&args.baseline)?;
    let (base_val, base_train) = best_pair(&baseline, &args.baseline)?;
    let mut out = format!("{:<24}{:>14}{:>14}\n", "Variant", "Validation(%)", "Training(%)");
    for path in &args.variant {
        let variant = MetricsTable::read(path)?;
        let (val, train) = best_pair(&variant, path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let name = name.strip_prefix("metrics-").unwrap_or(&name);
        out.push_str(&format!(
            "{:<24}{:>14.2}{:>14.2}\n",
            name,
            (val - base_val) * 100.0,
            (train - base_train) * 100.0
        ));
    }
    print!("{out}");
    Ok(out)
}

fn best_pair(table: &MetricsTable, path: &Path) -> Result<(f64, f64)> {
    match (table.best_val_accuracy(), table.best_train_accuracy()) {
        (Some(v), Some(t)) => Ok((v, t)),
        _ => Err(CliError::Usage(format!(
            "metrics CSV {} has no data rows",
            path.display()
        ))),
    }
}

// ── pso ─────────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Args)]
pub struct PsoArgs {
    #[arg(long, default_value = "middle")]
    pub size: String,
    #[arg(long, default_value = "relu")]
    pub activation: String,
    #[arg(long, default_value_t = 10)]
    pub particles: usize,
    #[arg(long, default_value_t = 50)]
    pub generations: usize,
    #[arg(long, default_value_t = 0.7)]
    pub inertia: f64,
    #[arg(long, default_value_t = 2.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 2.0)]
    pub c2: f64,
    #[arg(long, default_value_t = 0.5)]
    pub velocity_clamp: f64,
    /// Fitness-evaluation subset drawn from the training set.
    #[arg(long, default_value_t = 1000)]
    pub eval_subset: usize,
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long)]
    pub val_subset: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub fourier_rank: usize,
    #[arg(long)]
    pub per_channel: bool,
    /// Backprop-trained accuracy to print next to the swarm's result.
    #[arg(long)]
    pub reference_accuracy: Option<f64>,
}

pub struct PsoOutcome {
    pub csv_path: PathBuf,
    pub final_val_accuracy: f64,
    pub final_best_fitness: f64,
}

pub fn run_pso(global: &GlobalArgs, args: &PsoArgs) -> Result<PsoOutcome> {
    let manifest = RunManifest {
        model: ModelManifest {
            size: args.size.clone(),
            activation: args.activation.clone(),
            fourier_rank: args.fourier_rank,
            per_channel: args.per_channel,
        },
        optimizer: OptimizerManifest {
            algorithm: "pso".to_string(),
            rho: 0.0,
            epsilon: 0.0,
            batch_size: 0,
            epochs: args.generations,
            lr_schedule: "none".to_string(),
            ae_epochs_per_layer: 0,
        },
        data: DataManifest {
            train_subset: args.subset,
            val_subset: args.val_subset,
        },
        seed: global.seed,
        git_describe: git_describe(),
        started_at: unix_now(),
    };
    let model_cfg = manifest.model_config().map_err(|e| CliError::Usage(e.to_string()))?;
    let swarm_cfg = SwarmConfig {
        n_particles: args.particles,
        generations: args.generations,
        inertia: args.inertia,
        c1: args.c1,
        c2: args.c2,
        velocity_clamp: args.velocity_clamp,
        eval_subset_size: args.eval_subset,
        seed: global.seed,
    };
    global.ensure_out_dir()?;
    let dir = global.data_dir()?;
    let (train_full, val_full) = load_datasets(&dir)?;
    let train = match args.subset {
        Some(n) => train_full.subset(n, global.seed)?,
        None => train_full,
    };
    let val = match args.val_subset {
        Some(n) => val_full.subset(n, global.seed)?,
        None => val_full,
    };

    println!(
        "swarm: {} particles x {} generations, {} {} network",
        args.particles, args.generations, args.size, args.activation
    );
    let (_, history) = pso_train(&swarm_cfg, &model_cfg, &train, &val)?;

    let mut csv = String::from("generation,best_fitness,val_accuracy\n");
    for rec in &history {
        csv.push_str(&format!(
            "{},{},{}\n",
            rec.generation, rec.best_fitness, rec.val_accuracy
        ));
    }
    let csv_path = global.out_dir.join(format!(
        "pso-{}-{}-seed{}.csv",
        args.size, args.activation, global.seed
    ));
    fs::write(&csv_path, &csv).map_err(|e| CliError::io(&csv_path, e))?;

    let last = history.last().expect("at least one generation");
    match args.reference_accuracy {
        Some(bp) => println!(
            "global best val_acc {:.4} (backprop reference {:.4})",
            last.val_accuracy, bp
        ),
        None => println!("global best val_acc {:.4}", last.val_accuracy),
    }
    println!("history: {}", csv_path.display());
    Ok(PsoOutcome {
        csv_path,
        final_val_accuracy: last.val_accuracy,
        final_best_fitness: last.best_fitness,
    })
}

// ── gradcheck ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// fourier, lc, conv, dense, loss, end2end or all.
    #[arg(long, default_value = "all")]
    pub component: String,
}

pub fn run_gradcheck(global: &GlobalArgs, args: &GradcheckArgs) -> Result<()> {
    let components: Vec<CheckComponent> = if args.component == "all" {
        CheckComponent::ALL.to_vec()
    } else {
        vec![CheckComponent::parse(&args.component).map_err(|e| CliError::Usage(e.to_string()))?]
    };
    let mut failed = false;
    for &component in &components {
        let report = check_report(component, global.seed)?;
        let verdict = if report.pass { "pass" } else { "FAIL" };
        println!(
            "{:<8} {} draws, max rel err {:.3e} (tol {:.0e}): {verdict}",
            component.name(),
            report.draws,
            report.max_rel_err,
            TOL
        );
        for group in &report.groups {
            println!("  {:<12} {:.3e}", group.name, group.max_rel_err);
        }
        failed |= !report.pass;
    }
    if failed {
        return Err(CliError::Runtime("gradient check failed".to_string()));
    }
    Ok(())
}

// ── fetch-data ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Args)]
pub struct FetchDataArgs {
    /// Write a deterministic synthetic corpus instead of downloading.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, default_value = CIFAR10_URL)]
    pub url: String,
}

pub fn run_fetch_data(global: &GlobalArgs, args: &FetchDataArgs) -> Result<()> {
    let dir = global.data_dir()?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let all_present = TRAIN_FILES
        .iter()
        .chain(std::iter::once(&TEST_FILE))
        .all(|f| dir.join(f).exists());
    if all_present {
        println!("data already present in {}", dir.display());
        return Ok(());
    }
    if args.synthetic {
        write_synthetic_corpus(&dir, global.seed)?;
        println!("synthetic corpus written to {}", dir.display());
        return Ok(());
    }

    println!("downloading {}", args.url);
    let response = ureq::get(&args.url)
        .call()
        .map_err(|e| CliError::Runtime(format!("download failed: {e}")))?;
    let mut archive_bytes = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut archive_bytes)
        .map_err(|e| CliError::Runtime(format!("download failed: {e}")))?;

    let digest = format!("{:x}", md5::compute(&archive_bytes));
    if digest != CIFAR10_MD5 {
        return Err(CliError::Runtime(format!(
            "checksum mismatch: got {digest}, expected {CIFAR10_MD5}"
        )));
    }
    println!("checksum ok ({CIFAR10_MD5})");

    let mut archive = tar::Archive::new(flate2::read::GzDecoder::new(&archive_bytes[..]));
    let mut written = 0;
    for entry in archive
        .entries()
        .map_err(|e| CliError::Runtime(format!("bad archive: {e}")))?
    {
        let mut entry = entry.map_err(|e| CliError::Runtime(format!("bad archive: {e}")))?;
        let path = entry
            .path()
            .map_err(|e| CliError::Runtime(format!("bad archive: {e}")))?
            .into_owned();
        let Some(name) = path.file_name().and_then(|n| n.to_str()).map(String::from) else {
            continue;
        };
        if !TRAIN_FILES.contains(&name.as_str()) && name != TEST_FILE {
            continue;
        }
        let target = dir.join(&name);
        let mut bytes = Vec::new();
        entry
            .read_to_end(&mut bytes)
            .map_err(|e| CliError::Runtime(format!("bad archive: {e}")))?;
        fs::write(&target, bytes).map_err(|e| CliError::io(&target, e))?;
        written += 1;
    }
    if written != TRAIN_FILES.len() + 1 {
        return Err(CliError::Runtime(format!(
            "archive held {written} of the {} expected batch files",
            TRAIN_FILES.len() + 1
        )));
    }
    println!("wrote {written} batch files to {}", dir.display());
    Ok(())
}
