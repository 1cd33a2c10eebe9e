use super::{parse_mode, print_config, CliError};
use clap::Args;
use rgbt_core::io::{self, ImageGroups};
use rgbt_core::pairing::{pair_annotations, PairCost, PairingConfig};
use serde_json::json;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Args)]
pub struct PairGtArgs {
    /// Per-modality RGB annotations (JSONL: image_id + boxes)
    #[arg(long)]
    pub rgb: PathBuf,
    /// Per-modality thermal annotations (same schema)
    #[arg(long)]
    pub thermal: PathBuf,
    /// Output ground-truth groups JSONL
    #[arg(long)]
    pub out: PathBuf,
    /// Assignment cost
    #[arg(long, value_enum, default_value = "center-distance")]
    pub cost: CostArg,
    /// Break assignments with center distance above this (px)
    #[arg(long, default_value_t = 50.0)]
    pub gate_distance: f64,
    /// Break assignments with IoU below this (IoU cost only)
    #[arg(long, default_value_t = 1e-9)]
    pub gate_iou: f64,
    /// Reject unknown fields instead of warning
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CostArg {
    CenterDistance,
    OneMinusIou,
}

pub fn run(args: &PairGtArgs) -> Result<(), CliError> {
    let cost = match args.cost {
        CostArg::CenterDistance => PairCost::CenterDistance,
        CostArg::OneMinusIou => PairCost::OneMinusIou,
    };
    let config = json!({
        "rgb": args.rgb.display().to_string(),
        "thermal": args.thermal.display().to_string(),
        "out": args.out.display().to_string(),
        "cost": cost,
        "gate_distance": args.gate_distance,
        "gate_iou": args.gate_iou,
        "strict": args.strict,
    });
    print_config("pair-gt", &config);

    let mode = parse_mode(args.strict);
    let rgb = io::read_annotations(&args.rgb, mode)?;
    let thermal = io::read_annotations(&args.thermal, mode)?;

    let mut thermal_by_id: BTreeMap<&str, &io::ModalAnnotations> = thermal
        .iter()
        .map(|record| (record.image_id.as_str(), record))
        .collect();
    let cfg = PairingConfig {
        cost,
        gate_distance: args.gate_distance,
        gate_iou: args.gate_iou,
    };

    let mut groups = Vec::with_capacity(rgb.len());
    for record in &rgb {
        let Some(partner) = thermal_by_id.remove(record.image_id.as_str()) else {
            return Err(CliError::Data(format!(
                "image {} present in {} but missing from {}",
                record.image_id,
                args.rgb.display(),
                args.thermal.display()
            )));
        };
        groups.push(ImageGroups {
            image_id: record.image_id.clone(),
            groups: pair_annotations(&record.boxes, &partner.boxes, &cfg),
        });
    }
    if let Some((id, _)) = thermal_by_id.into_iter().next() {
        return Err(CliError::Data(format!(
            "image {} present in {} but missing from {}",
            id,
            args.thermal.display(),
            args.rgb.display()
        )));
    }

    io::write_jsonl(&args.out, &groups)?;
    // the groups schema has no room for provenance, so the resolved
    // pairing config rides in a sidecar
    let meta_path = args.out.with_extension("meta.json");
    std::fs::write(&meta_path, format!("{config}\n"))
        .map_err(|e| CliError::Data(format!("{}: {e}", meta_path.display())))?;

    let paired: usize = groups
        .iter()
        .flat_map(|g| &g.groups)
        .filter(|g| g.rgb.is_some() && g.thermal.is_some())
        .count();
    let total: usize = groups.iter().map(|g| g.groups.len()).sum();
    println!("paired {paired} unpaired {} images {}", total - paired, groups.len());
    Ok(())
}
