use super::{parse_mode, print_config, CliError};
use clap::Args;
use rgbt_core::eval::{evaluate_modality, EvalConfig, EvalCurve, EvalSide};
use rgbt_core::io::{self, Detections, Modality, Tag};
use serde_json::json;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

#[derive(Args)]
pub struct EvalArgs {
    /// Detections JSONL (per-modality or paired schema)
    #[arg(long)]
    pub dets: PathBuf,
    /// Ground-truth groups JSONL
    #[arg(long)]
    pub gt: PathBuf,
    /// Which boxes to score
    #[arg(long, value_enum, default_value = "thermal")]
    pub modality: ModalityArg,
    /// Matching IoU threshold
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// Curve CSV output (fppi,miss_rate rows plus a trailing lamr row)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest JSONL used to resolve day/night tags
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Restrict scoring to images with this manifest tag
    #[arg(long, value_enum)]
    pub tag: Option<TagArg>,
    /// Miss-rate clamp for the log average
    #[arg(long, default_value_t = 1e-4)]
    pub mr_floor: f64,
    /// Drop ground-truth boxes shorter than this before matching
    #[arg(long)]
    pub min_height: Option<f64>,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModalityArg {
    Rgb,
    Thermal,
    /// Score enclosing boxes of pairs/groups (modal-shared protocol)
    Enclosing,
}

impl ModalityArg {
    pub fn side(self) -> EvalSide {
        match self {
            ModalityArg::Rgb => EvalSide::Modality(Modality::Rgb),
            ModalityArg::Thermal => EvalSide::Modality(Modality::Thermal),
            ModalityArg::Enclosing => EvalSide::Enclosing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TagArg {
    Day,
    Night,
    Unknown,
}

pub fn write_curve_csv(path: &Path, curve: &EvalCurve) -> Result<(), CliError> {
    let mut text = String::from("fppi,miss_rate\n");
    for p in &curve.points {
        text.push_str(&format!("{},{}\n", p.fppi, p.miss_rate));
    }
    text.push_str(&format!("lamr,{}\n", curve.lamr));
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let side = args.modality.side();
    print_config(
        "eval",
        &json!({
            "dets": args.dets.display().to_string(),
            "gt": args.gt.display().to_string(),
            "modality": side.to_string(),
            "iou": args.iou,
            "out": args.out.as_ref().map(|p| p.display().to_string()),
            "manifest": args.manifest.as_ref().map(|p| p.display().to_string()),
            "tag": args.tag.map(|t| format!("{t:?}").to_lowercase()),
            "mr_floor": args.mr_floor,
            "min_height": args.min_height,
            "strict": args.strict,
        }),
    );
    if args.tag.is_some() && args.manifest.is_none() {
        return Err(CliError::Usage("--tag requires --manifest".into()));
    }

    let mode = parse_mode(args.strict);
    let mut gt = io::read_groups(&args.gt, mode)?;
    let mut dets = io::read_detections(&args.dets, mode)?;

    if let (Some(manifest_path), Some(tag)) = (&args.manifest, args.tag) {
        let manifest = io::read_manifest(manifest_path, mode)?;
        let known: HashSet<&str> = manifest.iter().map(|e| e.image_id.as_str()).collect();
        let wanted_tag = match tag {
            TagArg::Day => Tag::Day,
            TagArg::Night => Tag::Night,
            TagArg::Unknown => Tag::Unknown,
        };
        let wanted: HashSet<String> = manifest
            .iter()
            .filter(|e| e.tag == wanted_tag)
            .map(|e| e.image_id.clone())
            .collect();
        // detections must at least belong to the manifest
        let offenders: Vec<String> = match &dets {
            Detections::PerModality(records) => records
                .iter()
                .map(|r| r.image_id.clone())
                .filter(|id| !known.contains(id.as_str()))
                .collect(),
            Detections::Paired(records) => records
                .iter()
                .map(|r| r.image_id.clone())
                .filter(|id| !known.contains(id.as_str()))
                .collect(),
        };
        if !offenders.is_empty() {
            return Err(CliError::Data(format!(
                "detections name images outside the manifest: {offenders:?}"
            )));
        }
        gt.retain(|g| wanted.contains(&g.image_id));
        match &mut dets {
            Detections::PerModality(records) => records.retain(|r| wanted.contains(&r.image_id)),
            Detections::Paired(records) => records.retain(|r| wanted.contains(&r.image_id)),
        }
    }

    let cfg = EvalConfig {
        iou_threshold: args.iou,
        mr_floor: args.mr_floor,
        min_gt_height: args.min_height,
        ..EvalConfig::default()
    };
    let curve = evaluate_modality(&dets, &gt, side, &cfg)?;
    if let Some(out) = &args.out {
        write_curve_csv(out, &curve)?;
    }
    println!("lamr {}", curve.lamr);
    Ok(())
}
