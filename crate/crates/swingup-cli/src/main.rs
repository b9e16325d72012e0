//! Command-line driver for the swing-up pipeline: catalog inspection,
//! impulse calibration, dataset generation, training, evaluation,
//! disentanglement probes, closed-loop swing-up, and embedding analysis.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use swingup::analysis;
use swingup::catalog::{build_catalog, make_split, unseen_object_ids, SplitMode};
use swingup::config::RunConfig;
use swingup::control::{closed_loop_eval, Predictor, DEFAULT_N_SAMPLES};
use swingup::dataset::{generate_dataset, read_dataset, write_dataset};
use swingup::error::{exit_code, Error, Result};
use swingup::models::checkpoint::{read_checkpoint, write_checkpoint};
use swingup::models::Variant;
use swingup::pipeline::{evaluate, train, train_disentangle, Hyper, ProbeMode};
use swingup::simdyn::{calibrate_impulse, simulate_swing_recorded, trajectory_csv};
use swingup::tactile::synth_tilt_frame;

const EXIT_CODES_HELP: &str = "EXIT CODES:\n  \
    0  success\n  \
    2  bad arguments\n  \
    3  I/O failure\n  \
    4  file format or version mismatch\n  \
    5  numeric failure (divergence, failed calibration)";

#[derive(Parser)]
#[command(
    name = "swingup",
    about = "In-hand swing-up simulation and tactile-embedding pipeline",
    after_help = EXIT_CODES_HELP,
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration source plus ad-hoc overrides; flags win over the file.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Key=value configuration file (as written by `calibrate`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override single keys, e.g. --set sim.t_stop=0.5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for data-parallel stages (0 = all cores).
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for item in &self.overrides {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArg(format!("override {item:?} is not KEY=VALUE")))?;
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArg(format!("override {item:?}: bad number")))?;
            cfg.set(k.trim(), value)?;
        }
        cfg.validate()?;
        self.init_workers();
        Ok(cfg)
    }

    #[cfg(feature = "parallel")]
    fn init_workers(&self) {
        if self.workers != 1 {
            let threads = if self.workers == 0 { 0 } else { self.workers };
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn init_workers(&self) {}
}

#[derive(Subcommand)]
enum Command {
    /// Print the 33-object template catalog as CSV.
    Catalog {
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate the launch impulse and write the full configuration.
    Calibrate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output configuration file.
        #[arg(long)]
        out: PathBuf,
        /// Also dump a reference trajectory (lightest object, w=1) as CSV.
        #[arg(long)]
        dump_trajectory: Option<PathBuf>,
    },
    /// Generate the 1650-episode dataset.
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Dump the first episode's 45° tilt frame as CSV + SVG with this
        /// path prefix.
        #[arg(long)]
        dump_tactile: Option<PathBuf>,
    },
    /// Train one variant on a split.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_parser = Variant::parse)]
        variant: Variant,
        #[arg(long, value_parser = parse_split)]
        split: SplitMode,
        /// Dataset file from `gen`.
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        /// Print one line per epoch.
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate a checkpoint on a split; prints a CSV report.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_split)]
        split: SplitMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate the disentanglement probe for a checkpoint.
    Disentangle {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_split)]
        split: SplitMode,
        #[arg(long, value_parser = ProbeMode::parse, default_value = "frozen")]
        mode: ProbeMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop swing-up over the held-out objects.
    Swingup {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        /// Goal angles in degrees, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![45.0, 90.0, 135.0, 180.0])]
        goals: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_N_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the noise-free simulator as the predictor instead of the model.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project embeddings of the held-out objects and report the
    /// embedding-dynamics correlation.
    Embed {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Projection CSV output.
        #[arg(long)]
        out: PathBuf,
        /// Optional scatter SVG output.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Optional pairwise-distance table output.
        #[arg(long)]
        distances: Option<PathBuf>,
    },
}

fn parse_split(s: &str) -> Result<SplitMode> {
    match s {
        "seen" => Ok(SplitMode::Seen),
        "unseen" => Ok(SplitMode::Unseen),
        _ => Err(Error::InvalidArg(format!(
            "unknown split {s:?} (expected seen|unseen)"
        ))),
    }
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| Error::io(path, e)),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn fingerprint_header(cfg: &RunConfig) -> String {
    format!("# config_fingerprint={:016x}\n", cfg.fingerprint())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Catalog { out } => {
            let cat = build_catalog();
            write_or_print(out.as_deref(), &cat.to_csv())
        }
        Command::Calibrate {
            cfg,
            out,
            dump_trajectory,
        } => {
            let mut run_cfg = cfg.resolve()?;
            let cat = build_catalog();
            run_cfg.sim.l_imp = calibrate_impulse(&cat, &run_cfg.sim)?;
            run_cfg.save(&out)?;
            eprintln!(
                "calibrated l_imp = {:.6e} N·m·s (fingerprint {:016x})",
                run_cfg.sim.l_imp,
                run_cfg.fingerprint()
            );
            if let Some(path) = dump_trajectory {
                let lightest = cat
                    .specs
                    .iter()
                    .min_by(|a, b| a.moi_gm2.partial_cmp(&b.moi_gm2).unwrap())
                    .unwrap();
                let mut rng = seeded_rng(0);
                let outcome =
                    simulate_swing_recorded(lightest, 1.0, &run_cfg.sim.noise_free(), &mut rng)?;
                let csv = format!(
                    "{}{}",
                    fingerprint_header(&run_cfg),
                    trajectory_csv(&outcome.trajectory.unwrap_or_default())
                );
                std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
            }
            Ok(())
        }
        Command::Gen {
            cfg,
            seed,
            out,
            dump_tactile,
        } => {
            let run_cfg = cfg.resolve()?;
            let cat = build_catalog();
            let ds = generate_dataset(&cat, &run_cfg.sim, &run_cfg.tact, seed, run_cfg.fingerprint())?;
            write_dataset(&out, &ds)?;
            eprintln!(
                "wrote {} episodes to {} (fingerprint {:016x})",
                ds.episodes.len(),
                out.display(),
                run_cfg.fingerprint()
            );
            if let Some(prefix) = dump_tactile {
                let mut rng = seeded_rng(seed);
                let frame = synth_tilt_frame(&cat.specs[0], 45.0, &run_cfg.tact, &mut rng)?;
                let csv_path = prefix.with_extension("csv");
                let svg_path = prefix.with_extension("svg");
                let csv = format!("{}{}", fingerprint_header(&run_cfg), frame.to_csv());
                std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
                std::fs::write(&svg_path, frame.to_svg()).map_err(|e| Error::io(&svg_path, e))?;
            }
            Ok(())
        }
        Command::Train {
            cfg,
            variant,
            split,
            data,
            out,
            seed,
            epochs,
            lr,
            batch,
            quiet,
        } => {
            let run_cfg = cfg.resolve()?;
            let ds = read_dataset(&data)?;
            let split = make_split(&ds.catalog, split, seed);
            let hyper = Hyper {
                lr,
                batch_size: batch,
                epochs,
                seed,
                verbose: !quiet,
            };
            let (model, report) = train(&ds, &split, variant, &hyper)?;
            write_checkpoint(&out, &model, run_cfg.fingerprint())?;
            println!("{}", fingerprint_header(&run_cfg).trim_end());
            println!("variant,split,epochs,best_epoch,test_mae_deg,n_test");
            println!(
                "{},{},{},{},{:.4},{}",
                report.variant,
                split.mode,
                report.epochs_run,
                report.best_epoch,
                report.eval.mae_deg,
                report.eval.n_episodes
            );
            Ok(())
        }
        Command::Eval {
            cfg,
            model,
            data,
            split,
            out,
        } => {
            let run_cfg = cfg.resolve()?;
            let (model, _) = read_checkpoint(&model)?;
            let ds = read_dataset(&data)?;
            let split = make_split(&ds.catalog, split, 0);
            let report = evaluate(&model, &ds, &split)?;
            let mut csv = fingerprint_header(&run_cfg);
            csv.push_str("variant,split,test_mae_deg,n_test\n");
            csv.push_str(&format!(
                "{},{},{:.4},{}\n",
                model.variant, split.mode, report.mae_deg, report.n_episodes
            ));
            csv.push_str("object_id,mae_deg\n");
            for (id, mae) in &report.per_object {
                csv.push_str(&format!("{id},{mae:.4}\n"));
            }
            write_or_print(out.as_deref(), &csv)
        }
        Command::Disentangle {
            cfg,
            model,
            data,
            split,
            mode,
            seed,
            epochs,
            out,
        } => {
            let run_cfg = cfg.resolve()?;
            let (model, _) = read_checkpoint(&model)?;
            let ds = read_dataset(&data)?;
            let split = make_split(&ds.catalog, split, seed);
            let hyper = Hyper {
                epochs,
                seed,
                ..Hyper::default()
            };
            let (_, report) = train_disentangle(&model, &ds, &split, &hyper, mode)?;
            let mut csv = fingerprint_header(&run_cfg);
            csv.push_str("variant,split,mode,friction_acc,mass_mae,com_mae,moi_mae,n_test\n");
            csv.push_str(&format!(
                "{},{},{},{:.4},{:.4},{:.4},{:.4},{}\n",
                model.variant,
                split.mode,
                match mode {
                    ProbeMode::Frozen => "frozen",
                    ProbeMode::EndToEnd => "end2end",
                },
                report.friction_acc,
                report.mass_mae,
                report.com_mae,
                report.moi_mae,
                report.n_episodes
            ));
            write_or_print(out.as_deref(), &csv)
        }
        Command::Swingup {
            cfg,
            model,
            goals,
            trials,
            samples,
            seed,
            oracle,
            out,
        } => {
            let run_cfg = cfg.resolve()?;
            let cat = build_catalog();
            let unseen: Vec<_> = unseen_object_ids(&cat)
                .into_iter()
                .map(|id| cat.spec(id).cloned())
                .collect::<Result<Vec<_>>>()?;
            let loaded;
            let (predictor, sim, tact) = if oracle {
                (
                    Predictor::SimulatorOracle,
                    run_cfg.sim.noise_free(),
                    run_cfg.tact.noise_free(),
                )
            } else {
                loaded = read_checkpoint(&model)?.0;
                (
                    Predictor::Model(&loaded),
                    run_cfg.sim.clone(),
                    run_cfg.tact.clone(),
                )
            };
            let report =
                closed_loop_eval(&predictor, &unseen, &sim, &tact, &goals, trials, samples, seed)?;
            let mut csv = fingerprint_header(&run_cfg);
            csv.push_str(&report.to_csv());
            csv.push_str("object_id,mean_error_deg\n");
            for (id, mean) in &report.per_object_mean {
                csv.push_str(&format!("{id},{mean:.4}\n"));
            }
            csv.push_str(&format!("grand_mean,{:.4}\n", report.grand_mean));
            write_or_print(out.as_deref(), &csv)
        }
        Command::Embed {
            cfg,
            model,
            data,
            out,
            svg,
            distances,
        } => {
            let run_cfg = cfg.resolve()?;
            let (model, _) = read_checkpoint(&model)?;
            let ds = read_dataset(&data)?;
            let ids = unseen_object_ids(&ds.catalog);
            let (csv, pca) = analysis::projection_csv(&model, &ds, &ids)?;
            let corr = analysis::embedding_dynamics_correlation(&model, &ds, &ids)?;
            let full = format!(
                "{}# spearman_embedding_dynamics={corr:.6}\n# explained_variance={:.6},{:.6}\n{csv}",
                fingerprint_header(&run_cfg),
                pca.explained[0],
                pca.explained[1],
            );
            std::fs::write(&out, &full).map_err(|e| Error::io(&out, e))?;
            eprintln!("spearman(embedding, dynamics) = {corr:.4}");
            if let Some(path) = svg {
                let ep_ids: Vec<u32> = ds
                    .episodes
                    .iter()
                    .filter(|e| ids.contains(&e.object_id))
                    .map(|e| e.object_id)
                    .collect();
                std::fs::write(&path, analysis::projection_svg(&ep_ids, &pca.coords))
                    .map_err(|e| Error::io(&path, e))?;
            }
            if let Some(path) = distances {
                let table = analysis::distance_table_csv(&model, &ds, &ids)?;
                let content = format!("{}{}", fingerprint_header(&run_cfg), table);
                std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
            }
            Ok(())
        }
    }
}

fn seeded_rng(seed: u64) -> impl rand::Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
