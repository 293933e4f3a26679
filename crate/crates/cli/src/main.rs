//! `itcnet` command line: synthetic data, preparation, stage training,
//! stacking, fine-tuning, evaluation and curve export.

mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use itcnet::data::{load_sequences, save_sequences, tc_gei, GrayImage, RegisteredSequence, Role, GEI_SIZE, MANIFEST_FILE};
use itcnet::metrics::{cmc_csv, roc_csv, CmcCurve, RocCurve};
use itcnet::model::{load_net, load_stage, save_net, save_stage, stack_itcnet, IdentityReconstructor, ItcNet, Reconstructor, STAGE_COUNT};
use itcnet::pipeline::report::{self, check_writable, write_file};
use itcnet::pipeline::{
    evaluate_recognition, evaluate_reconstruction, finetune_net, generate_walkers, register_all, run_on,
    train_one_stage, with_threads, Prepared, TrainConfig,
};
use itcnet::{Error, Result};
use log::info;

const CONFIG_FILE: &str = "config.cfg";
const SPLIT_FILE: &str = "split.csv";
const STACKED_FILE: &str = "stacked.bin";
const NET_FILE: &str = "itcnet.bin";

#[derive(Parser, Debug)]
#[command(name = "itcnet", version, about = "Incomplete-to-complete GEI reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (`key = value` lines). Desk defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    /// Worker threads; 1 is the bit-reproducible reference.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct DataArg {
    /// Dataset directory or manifest. Synthetic walkers from the config when absent.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render synthetic walkers to PGM frames plus a manifest.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long)]
        cycle: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Register sequences, split subjects and write the complete GEIs.
    Prep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
    },
    /// Train one stage autoencoder.
    TrainStage {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        stage: usize,
    },
    /// Chain nine stage checkpoints into one network.
    Stack {
        #[command(flatten)]
        common: Common,
        /// Directory holding `stage1.ckpt` .. `stage9.ckpt`.
        #[arg(long)]
        stages: PathBuf,
    },
    /// Train the stacked network end to end.
    Finetune {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        /// Stacked network to fine-tune.
        #[arg(long)]
        net: PathBuf,
    },
    /// Reconstruction metrics on the test subjects.
    EvalRecon {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        /// Network checkpoint, or `identity` for the no-reconstruction baseline.
        #[arg(long)]
        net: String,
    },
    /// Recognition metrics and curves on the test subjects.
    EvalRecog {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        /// Network checkpoint, or `identity` for the no-reconstruction baseline.
        #[arg(long)]
        net: String,
    },
    /// Re-emit the curves of a recognition report as CSV or SVG.
    ExportCurves {
        /// Directory an `eval-recog` run wrote.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },
    /// Every step in sequence: stages, stack, fine-tune, both evaluations.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

fn load_config(common: &Common) -> Result<TrainConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            TrainConfig::parse(&text)?
        }
        None => TrainConfig::desk(),
    };
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        config.threads = t;
    }
    config.validate()?;
    Ok(config)
}

fn load_registered(data: &DataArg, config: &TrainConfig) -> Result<Vec<RegisteredSequence>> {
    let sequences = match &data.data {
        Some(path) => load_sequences(path)?,
        None => generate_walkers(config)?,
    };
    register_all(&sequences)
}

fn load_reconstructor(net: &str) -> Result<Box<dyn Reconstructor + Sync>> {
    if net == "identity" {
        Ok(Box::new(IdentityReconstructor))
    } else {
        Ok(Box::new(load_net(net)?))
    }
}

fn stage_file(stage: usize) -> String {
    format!("stage{stage}.ckpt")
}

fn save_config(dir: &Path, config: &TrainConfig) -> Result<()> {
    write_file(&dir.join(CONFIG_FILE), config.to_text())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenData {
            common,
            subjects,
            cycle,
            seed,
        } => {
            let mut config = load_config(&common)?;
            if let Some(s) = subjects {
                config.subjects = s;
            }
            if let Some(c) = cycle {
                config.cycle = c;
                config.boundaries = itcnet::pipeline::default_boundaries(c);
                config.frames = config.frames.max(2 * c);
            }
            if let Some(s) = seed {
                config.seed = s;
            }
            config.validate()?;
            check_writable(&[common.out.join(MANIFEST_FILE), common.out.join(CONFIG_FILE)], common.force)?;
            let walkers = with_threads(config.threads, || generate_walkers(&config))??;
            let manifest = save_sequences(&common.out, &walkers)?;
            save_config(&common.out, &config)?;
            println!("wrote {} sequences, manifest {}", walkers.len(), manifest.display());
        }
        Command::Prep { common, data } => {
            let config = load_config(&common)?;
            let split_path = common.out.join(SPLIT_FILE);
            check_writable(&[split_path.clone()], common.force)?;
            let prepared = with_threads(config.threads, || -> Result<Prepared> {
                Prepared::new(load_registered(&data, &config)?, &config)
            })??;
            let mut split = String::from("subject,part\n");
            for (part, ids) in [("train", &prepared.split.train), ("validation", &prepared.split.validation), ("test", &prepared.split.test)] {
                for id in ids {
                    split.push_str(&format!("{id},{part}\n"));
                }
            }
            write_file(&split_path, split)?;
            let geis = common.out.join("tc_gei");
            fs::create_dir_all(&geis).map_err(|e| Error::io(&geis, e))?;
            let all = prepared.train.iter().chain(&prepared.validation).chain(&prepared.test);
            let mut n = 0;
            for s in all {
                let g = tc_gei(s)?;
                GrayImage::from_unit(GEI_SIZE, GEI_SIZE, g.pixels()).write(&geis.join(format!("{}_{}.pgm", s.subject, s.sequence)))?;
                n += 1;
            }
            println!(
                "split {}/{}/{} subjects, {n} complete GEIs in {}",
                prepared.split.train.len(),
                prepared.split.validation.len(),
                prepared.split.test.len(),
                geis.display()
            );
        }
        Command::TrainStage { common, data, stage } => {
            if !(1..=STAGE_COUNT).contains(&stage) {
                return Err(Error::Config(format!("--stage must be in 1..={STAGE_COUNT}, got {stage}")));
            }
            let config = load_config(&common)?;
            let ckpt = common.out.join(stage_file(stage));
            let loss = report::loss_outputs(&common.out, &format!("stage{stage}"));
            check_writable(&[ckpt.clone(), loss], common.force)?;
            let (weights, history) = with_threads(config.threads, || {
                let prepared = Prepared::new(load_registered(&data, &config)?, &config)?;
                train_one_stage(&prepared, stage, &config)
            })??;
            fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
            save_stage(&weights, &ckpt)?;
            report::write_loss(&common.out, &format!("stage{stage}"), &history)?;
            println!(
                "stage {stage}: final train loss {}, checkpoint {}",
                history.train.last().copied().unwrap_or(f64::NAN),
                ckpt.display()
            );
        }
        Command::Stack { common, stages } => {
            let config = load_config(&common)?;
            let out = common.out.join(STACKED_FILE);
            check_writable(&[out.clone()], common.force)?;
            let weights = (1..=STAGE_COUNT)
                .map(|s| load_stage(stages.join(stage_file(s))))
                .collect::<Result<Vec<_>>>()?;
            let net = stack_itcnet(weights, config.cycle)?;
            fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
            save_net(&net, &out)?;
            println!("stacked {STAGE_COUNT} stages into {}", out.display());
        }
        Command::Finetune { common, data, net } => {
            let config = load_config(&common)?;
            let out = common.out.join(NET_FILE);
            let loss = report::loss_outputs(&common.out, "finetune");
            check_writable(&[out.clone(), loss], common.force)?;
            let stacked = load_net(&net)?;
            check_cycle(&stacked, &config)?;
            let (tuned, history) = with_threads(config.threads, || {
                let prepared = Prepared::new(load_registered(&data, &config)?, &config)?;
                finetune_net(stacked, &prepared, &config)
            })??;
            fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
            save_net(&tuned, &out)?;
            report::write_loss(&common.out, "finetune", &history)?;
            println!("fine-tuned {} epochs, network {}", history.train.len(), out.display());
        }
        Command::EvalRecon { common, data, net } => {
            let config = load_config(&common)?;
            check_writable(&report::recon_outputs(&common.out), common.force)?;
            let model = load_reconstructor(&net)?;
            let rep = with_threads(config.threads, || {
                let prepared = Prepared::new(load_registered(&data, &config)?, &config)?;
                evaluate_reconstruction(model.as_ref(), &prepared.test, &config)
            })??;
            report::write_recon_report(&common.out, &rep, &config)?;
            print!("{}", report::summary_text(&config, Some(&rep), None));
        }
        Command::EvalRecog { common, data, net } => {
            let config = load_config(&common)?;
            check_writable(&report::recog_outputs(&common.out, &config.eval_counts), common.force)?;
            let model = load_reconstructor(&net)?;
            let rep = with_threads(config.threads, || {
                let prepared = Prepared::new(load_registered(&data, &config)?, &config)?;
                evaluate_recognition(
                    model.as_ref(),
                    &prepared.test_role(Role::Gallery),
                    &prepared.test_role(Role::Probe),
                    &config,
                )
            })??;
            report::write_recog_report(&common.out, &rep, &config)?;
            print!("{}", report::summary_text(&config, None, Some(&rep)));
        }
        Command::ExportCurves {
            report: dir,
            format,
            out,
            force,
        } => {
            let curves = report::read_curves(&dir)?;
            let targets: Vec<PathBuf> = match format {
                Format::Csv => curves
                    .iter()
                    .flat_map(|c| ["cmc", "roc"].map(|k| out.join(report::curve_file_name(k, c.condition, c.count))))
                    .collect(),
                Format::Svg => vec![out.join("cmc.svg"), out.join("roc.svg")],
            };
            if out.canonicalize().ok() == dir.join(report::CURVE_DIR).canonicalize().ok() {
                return Err(Error::Config("--out must differ from the report's curve directory".into()));
            }
            check_writable(&targets, force)?;
            match format {
                Format::Csv => {
                    for (c, paths) in curves.iter().zip(targets.chunks(2)) {
                        let cmc = CmcCurve {
                            rates: c.cmc.clone(),
                            probe_ranks: Vec::new(),
                        };
                        let roc = RocCurve {
                            points: c.roc.clone(),
                            genuine: 0,
                            impostor: 0,
                        };
                        write_file(&paths[0], cmc_csv(&cmc))?;
                        write_file(&paths[1], roc_csv(&roc))?;
                    }
                }
                Format::Svg => {
                    write_file(&targets[0], svg::cmc_panels(&curves))?;
                    write_file(&targets[1], svg::roc_panels(&curves))?;
                }
            }
            println!("exported {} curve pairs to {}", curves.len(), out.display());
        }
        Command::Run { common, data } => {
            let config = load_config(&common)?;
            let mut outputs = vec![common.out.join(NET_FILE), common.out.join(report::SUMMARY_FILE)];
            outputs.extend(report::recon_outputs(&common.out));
            outputs.push(common.out.join(report::RECOG_FILE));
            check_writable(&outputs, common.force)?;
            let outcome = with_threads(config.threads, || run_on(load_registered(&data, &config)?, &config))??;
            for (i, h) in outcome.stage_histories.iter().enumerate() {
                report::write_loss(&common.out, &format!("stage{}", i + 1), h)?;
            }
            report::write_loss(&common.out, "finetune", &outcome.finetune_history)?;
            save_net(&outcome.net, common.out.join(NET_FILE))?;
            report::write_recon_report(&common.out, &outcome.recon, &config)?;
            report::write_recog_report(&common.out, &outcome.recog, &config)?;
            save_config(&common.out, &config)?;
            let summary = report::summary_text(&config, Some(&outcome.recon), Some(&outcome.recog));
            write_file(&common.out.join(report::SUMMARY_FILE), &summary)?;
            print!("{summary}");
        }
    }
    Ok(())
}

fn check_cycle(net: &ItcNet, config: &TrainConfig) -> Result<()> {
    if net.cycle_length() != config.cycle {
        return Err(Error::Config(format!(
            "network was stacked for cycle {} but the configuration has {}",
            net.cycle_length(),
            config.cycle
        )));
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    info!("{:?}", cli.command);
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
