use super::{parse_mode, print_config, CliError};
use clap::Args;
use rgbt_core::geometry::enclosing_box;
use rgbt_core::io::{self, ImagePairs, ModalDetections, Modality, PairRecord};
use rgbt_core::nms::{decoupled_nms, pairwise_nms, NmsConfig};
use serde_json::json;
use std::path::PathBuf;

#[derive(Args)]
pub struct NmsArgs {
    /// Paired detections JSONL
    #[arg(long)]
    pub dets: PathBuf,
    /// Output JSONL: paired schema for pairwise mode, per-modality schema
    /// for decoupled mode
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "pairwise")]
    pub mode: ModeArg,
    /// Greedy suppression IoU threshold
    #[arg(long = "iou-thr", default_value_t = 0.65)]
    pub iou_thr: f64,
    /// Gate threshold for group scores and surviving modality entries
    #[arg(long, default_value_t = 0.45)]
    pub tau: f64,
    /// Minimum score for a box to enter decoupled NMS
    #[arg(long, default_value_t = 0.0)]
    pub score_floor: f64,
    /// Attach the enclosing box of each surviving pair (pairwise mode)
    #[arg(long)]
    pub enclosing: bool,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Pairwise,
    Decoupled,
}

pub fn run(args: &NmsArgs) -> Result<(), CliError> {
    print_config(
        "nms",
        &json!({
            "dets": args.dets.display().to_string(),
            "out": args.out.display().to_string(),
            "mode": format!("{:?}", args.mode).to_lowercase(),
            "iou_thr": args.iou_thr,
            "tau": args.tau,
            "score_floor": args.score_floor,
            "enclosing": args.enclosing,
            "strict": args.strict,
        }),
    );
    if args.enclosing && args.mode == ModeArg::Decoupled {
        return Err(CliError::Usage(
            "--enclosing requires --mode pairwise (decoupled output has no pair identity)".into(),
        ));
    }

    let records = io::read_paired_detections(&args.dets, parse_mode(args.strict))?;
    let cfg = NmsConfig {
        iou_threshold: args.iou_thr,
        tau: args.tau,
        score_floor: args.score_floor,
    };

    match args.mode {
        ModeArg::Pairwise => {
            let mut out = Vec::with_capacity(records.len());
            for record in &records {
                let pairs: Vec<_> = record.pairs.iter().map(PairRecord::to_pair).collect();
                let survivors = pairwise_nms(&pairs, &cfg);
                out.push(ImagePairs {
                    image_id: record.image_id.clone(),
                    pairs: survivors
                        .iter()
                        .map(|p| PairRecord {
                            anchor_id: p.anchor_id,
                            rgb: p.rgb,
                            thermal: p.thermal,
                            enclosing: args.enclosing.then(|| match (p.rgb, p.thermal) {
                                (Some(r), Some(t)) => enclosing_box(&r.bbox, &t.bbox),
                                (Some(r), None) => r.bbox,
                                (None, Some(t)) => t.bbox,
                                (None, None) => unreachable!("survivors keep at least one side"),
                            }),
                        })
                        .collect(),
                });
            }
            io::write_jsonl(&args.out, &out)?;
            let kept: usize = out.iter().map(|r| r.pairs.len()).sum();
            println!("kept {kept} pairs over {} images", out.len());
        }
        ModeArg::Decoupled => {
            let mut out = Vec::with_capacity(records.len() * 2);
            for record in &records {
                let pairs: Vec<_> = record.pairs.iter().map(PairRecord::to_pair).collect();
                let (rgb, thermal) = decoupled_nms(&pairs, &cfg);
                out.push(ModalDetections {
                    image_id: record.image_id.clone(),
                    modality: Modality::Rgb,
                    boxes: rgb,
                });
                out.push(ModalDetections {
                    image_id: record.image_id.clone(),
                    modality: Modality::Thermal,
                    boxes: thermal,
                });
            }
            io::write_jsonl(&args.out, &out)?;
            let kept: usize = out.iter().map(|r| r.boxes.len()).sum();
            println!("kept {kept} boxes over {} images", records.len());
        }
    }
    Ok(())
}
