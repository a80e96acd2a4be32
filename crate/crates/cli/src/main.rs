//! `s2v` command line: synthesize datasets, train, generate videos from
//! text prompts, and inspect checkpoints.
//!
//! Exit codes: 0 success, 1 usage, 2 input/IO, 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use s2v_core::checkpoint::verify_config_match;
use s2v_core::config::RunConfig;
use s2v_core::data::{generate_dataset, ingest_directory, write_dataset};
use s2v_core::error::Error;
use s2v_core::image_io::{save_frames_png, save_gif};
use s2v_core::text::{Vocab, UNK};
use s2v_core::train::{CsvLog, Trainer};

mod log;

#[derive(Parser)]
#[command(name = "s2v", version, about = "Desk-scale text-to-video sequence model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum OutputFormat {
    Gif,
    Png,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic moving-sprite dataset.
    MakeData {
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of samples.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train on a dataset directory.
    Train {
        /// Run configuration (TOML). Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset root directory.
        #[arg(long)]
        data: PathBuf,
        /// Number of optimization steps to run in this invocation.
        #[arg(long)]
        steps: u64,
        /// Resume from a checkpoint, continuing its step numbering.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Generate a video from a text prompt.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 8)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path: a .gif file or a directory of numbered PNGs.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Gif)]
        format: OutputFormat,
        /// GIF frame delay in milliseconds.
        #[arg(long, default_value_t = 120)]
        delay_ms: u32,
    },
    /// Print checkpoint config, parameter count, step, and last loss.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; all parse failures are usage errors
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            log::error(&msg);
            ExitCode::from(1)
        }
        Err(CliError::Core(e)) => {
            log::error(&e.to_string());
            let code = match e {
                Error::NonFinite { .. } => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::MakeData { out, n, seed } => cmd_make_data(&out, n, seed),
        Command::Train {
            config,
            data,
            steps,
            resume,
        } => cmd_train(config.as_deref(), &data, steps, resume.as_deref()),
        Command::Generate {
            checkpoint,
            prompt,
            frames,
            seed,
            out,
            format,
            delay_ms,
        } => cmd_generate(&checkpoint, &prompt, frames, seed, &out, format, delay_ms),
        Command::Inspect { checkpoint } => cmd_inspect(&checkpoint),
    }
}

fn cmd_make_data(out: &Path, n: usize, seed: u64) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let samples = generate_dataset(n, seed)?;
    write_dataset(out, &samples)?;
    log::info(&format!(
        "wrote {} samples to {}",
        samples.len(),
        out.display()
    ));
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(RunConfig::from_toml_str(&text)?)
        }
    }
}

fn cmd_train(
    config_path: Option<&Path>,
    data: &Path,
    steps: u64,
    resume: Option<&Path>,
) -> Result<(), CliError> {
    let dataset = ingest_directory(data)?;
    log::info(&format!(
        "loaded {} samples from {}",
        dataset.len(),
        data.display()
    ));

    let mut trainer = match resume {
        Some(ckpt) => {
            let trainer = Trainer::load_checkpoint(ckpt)?;
            if config_path.is_some() {
                let supplied = load_config(config_path)?;
                verify_config_match(&supplied, &trainer.config, ckpt)?;
            }
            log::info(&format!(
                "resumed from {} at step {}",
                ckpt.display(),
                trainer.step
            ));
            trainer
        }
        None => {
            let config = load_config(config_path)?;
            let captions: Vec<&str> = dataset.iter().map(|s| s.caption.as_str()).collect();
            let vocab = Vocab::build(&captions, 1)?;
            log::info(&format!("built vocabulary of {} entries", vocab.len()));
            Trainer::new(config, vocab)?
        }
    };

    let out_dir = PathBuf::from(&trainer.config.out_dir);
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut csv = CsvLog::open(&out_dir.join("train_log.csv"))?;

    let target = trainer.step + steps;
    log::info(&format!(
        "training steps {}..{} into {}",
        trainer.step,
        target,
        out_dir.display()
    ));
    let final_ckpt = trainer.train_loop(&dataset, steps, Some(&mut csv), Some(&out_dir))?;
    if let Some(tail) = trainer.history.back() {
        log::info(&format!(
            "step {}: total {:.4} (ce {:.4}, dec {:.4}, unet {:.4}, motion {:.4})",
            trainer.step, tail.total, tail.text_ce, tail.recon_decoder, tail.recon_unet, tail.motion
        ));
    }
    if let Some(path) = final_ckpt {
        log::info(&format!("final checkpoint: {}", path.display()));
    }
    Ok(())
}

fn cmd_generate(
    checkpoint: &Path,
    prompt: &str,
    frames: usize,
    seed: u64,
    out: &Path,
    format: OutputFormat,
    delay_ms: u32,
) -> Result<(), CliError> {
    let trainer = Trainer::load_checkpoint(checkpoint)?;
    let tokens = trainer.vocab.encode(prompt);
    if !tokens.is_empty() && tokens.ids.iter().all(|&id| id == UNK) {
        log::warn("every prompt word is out of vocabulary; generating from UNK context");
    }
    let video = trainer
        .model
        .generate(&trainer.store, &trainer.vocab, prompt, frames, seed)?;
    match format {
        OutputFormat::Png => {
            let paths = save_frames_png(out, &video)?;
            log::info(&format!(
                "wrote {} frames to {}",
                paths.len(),
                out.display()
            ));
        }
        OutputFormat::Gif => {
            save_gif(out, &video, delay_ms)?;
            log::info(&format!("wrote {}", out.display()));
        }
    }
    Ok(())
}

fn cmd_inspect(checkpoint: &Path) -> Result<(), CliError> {
    let trainer = Trainer::load_checkpoint(checkpoint)?;
    println!("checkpoint: {}", checkpoint.display());
    println!("step: {}", trainer.step);
    println!("parameters: {}", trainer.store.param_count());
    println!("vocab: {} entries", trainer.vocab.len());
    match trainer.history.back() {
        Some(b) => println!(
            "last loss: total {:.6} (text_ce {:.6}, recon_decoder {:.6}, recon_unet {:.6}, motion {:.6})",
            b.total, b.text_ce, b.recon_decoder, b.recon_unet, b.motion
        ),
        None => println!("last loss: none recorded"),
    }
    println!("config:\n{}", trainer.config.to_canonical_toml());
    Ok(())
}
