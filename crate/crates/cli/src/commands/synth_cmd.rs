use super::{print_config, CliError};
use clap::Args;
use rgbt_core::io::{self, Modality};
use rgbt_core::synth::{synth_fixture, synth_image, ShiftModel, SynthConfig};
use serde_json::json;
use std::path::PathBuf;

#[derive(Args)]
pub struct SynthArgs {
    /// Directory for the generated files
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub images: usize,
    #[arg(long, default_value_t = 6)]
    pub persons: usize,
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    #[arg(long, default_value_t = 512)]
    pub height: u32,
    /// Inter-modality shift model
    #[arg(long = "shift-model", value_enum, default_value = "translation")]
    pub shift_model: ShiftModelArg,
    /// Translation shift (translation model)
    #[arg(long, default_value_t = 3.0)]
    pub dx: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dy: f64,
    /// Corner jitter bound (homography model)
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    /// Fraction of pedestrians left undetected (planted by count)
    #[arg(long = "miss-rate", default_value_t = 0.0)]
    pub miss_rate: f64,
    /// False positives planted per image
    #[arg(long = "fp-per-image", default_value_t = 0)]
    pub fp_per_image: usize,
    /// Uniform score perturbation amplitude
    #[arg(long = "score-noise", default_value_t = 0.0)]
    pub score_noise: f64,
    /// Extra suppressible duplicate detections per person
    #[arg(long, default_value_t = 0)]
    pub dups: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Render the manifest's PGM/PPM images too
    #[arg(long = "write-images")]
    pub write_images: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ShiftModelArg {
    Translation,
    Homography,
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    let shift = match args.shift_model {
        ShiftModelArg::Translation => ShiftModel::Translation {
            dx: args.dx,
            dy: args.dy,
        },
        ShiftModelArg::Homography => ShiftModel::Homography { alpha: args.alpha },
    };
    print_config(
        "synth",
        &json!({
            "out_dir": args.out_dir.display().to_string(),
            "images": args.images,
            "persons": args.persons,
            "width": args.width,
            "height": args.height,
            "shift_model": format!("{:?}", args.shift_model).to_lowercase(),
            "dx": args.dx,
            "dy": args.dy,
            "alpha": args.alpha,
            "miss_rate": args.miss_rate,
            "fp_per_image": args.fp_per_image,
            "score_noise": args.score_noise,
            "dups": args.dups,
            "seed": args.seed,
            "write_images": args.write_images,
        }),
    );
    if !(0.0..=1.0).contains(&args.miss_rate) {
        return Err(CliError::Usage("--miss-rate must be in [0, 1]".into()));
    }

    let cfg = SynthConfig {
        n_images: args.images,
        n_persons: args.persons,
        width: args.width,
        height: args.height,
        shift,
        miss_rate: args.miss_rate,
        fp_per_image: args.fp_per_image,
        score_noise: args.score_noise,
        dup_per_person: args.dups,
        seed: args.seed,
    };
    let fixture = synth_fixture(&cfg);

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.out_dir.display())))?;
    let path = |name: &str| args.out_dir.join(name);
    io::write_jsonl(&path("manifest.jsonl"), &fixture.manifest)?;
    io::write_jsonl(&path("gt.jsonl"), &fixture.gt)?;
    io::write_jsonl(&path("rgb_annotations.jsonl"), &fixture.rgb_annotations)?;
    io::write_jsonl(&path("thermal_annotations.jsonl"), &fixture.thermal_annotations)?;
    io::write_jsonl(&path("detections.jsonl"), &fixture.detections)?;
    io::write_jsonl(&path("paired.jsonl"), &fixture.paired)?;
    io::write_jsonl(&path("labels.jsonl"), &fixture.labels)?;

    if args.write_images {
        for (index, entry) in fixture.manifest.iter().enumerate() {
            let rgb = synth_image(&cfg, index, Modality::Rgb);
            io::write_pnm(&args.out_dir.join(&entry.rgb_path), &rgb)?;
            let thermal = synth_image(&cfg, index, Modality::Thermal);
            io::write_pnm(&args.out_dir.join(&entry.thermal_path), &thermal)?;
        }
    }
    println!(
        "wrote {} images, {} persons each, into {}",
        args.images,
        args.persons,
        args.out_dir.display()
    );
    Ok(())
}
