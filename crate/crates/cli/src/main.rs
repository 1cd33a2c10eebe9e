//! `rgbt` — pipelines over the RGB-thermal detection toolkit: ground-truth
//! pairing, NMS, LAMR evaluation, shift-robustness sweeps, homography
//! augmentation, feature mining, and synthetic fixtures.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use commands::CliError;

#[derive(Parser)]
#[command(name = "rgbt", version, about = "RGB-thermal detection post-processing and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pair per-modality ground-truth annotations into person groups
    PairGt(commands::pair_gt::PairGtArgs),
    /// Suppress paired detections (pairwise or decoupled mode)
    Nms(commands::nms_cmd::NmsArgs),
    /// Score detections against ground truth (FPPI / miss-rate / LAMR)
    Eval(commands::eval_cmd::EvalArgs),
    /// Evaluate robustness to manual inter-modality shifts
    ShiftSweep(commands::shift_sweep::ShiftSweepArgs),
    /// Warp an image (and its ground truth) by a random corner-jitter homography
    HomographyAug(commands::homography_aug::HomographyAugArgs),
    /// Run proposal-guided deformable feature mining over tensor files
    Mine(commands::mine::MineArgs),
    /// Generate a deterministic synthetic fixture
    Synth(commands::synth_cmd::SynthArgs),
    /// Dataset statistics
    Stats(StatsArgs),
}

#[derive(Args)]
struct StatsArgs {
    #[command(subcommand)]
    command: StatsCommand,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Mean center distance between paired ground-truth boxes
    MeanShift(commands::stats::MeanShiftArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::PairGt(args) => commands::pair_gt::run(&args),
        Command::Nms(args) => commands::nms_cmd::run(&args),
        Command::Eval(args) => commands::eval_cmd::run(&args),
        Command::ShiftSweep(args) => commands::shift_sweep::run(&args),
        Command::HomographyAug(args) => commands::homography_aug::run(&args),
        Command::Mine(args) => commands::mine::run(&args),
        Command::Synth(args) => commands::synth_cmd::run(&args),
        Command::Stats(args) => match args.command {
            StatsCommand::MeanShift(args) => commands::stats::mean_shift(&args),
        },
    };
    match result {
        Ok(()) => {}
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            std::process::exit(1);
        }
        Err(CliError::Data(message)) => {
            eprintln!("error: {message}");
            std::process::exit(2);
        }
    }
}
