use super::{parse_mode, print_config, CliError};
use clap::Args;
use rgbt_core::codec::{GridSpec, KernelGrid};
use rgbt_core::geometry::BoundingBox;
use rgbt_core::io::{self, ParseMode};
use rgbt_core::mining::{
    decode_offset_field, deform_conv_forward, sigmoid_map, ConvWeights, FeatureTensor, OffsetField,
};
use serde::Deserialize;
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Args)]
pub struct MineArgs {
    /// Input features, rank-4 tensor (1, C, H, W)
    #[arg(long)]
    pub features: PathBuf,
    /// Raw offset field, rank-4 tensor (G, 2*K*K, H, W)
    #[arg(long)]
    pub offsets: PathBuf,
    /// Dense proposals JSONL: one record, a box per cell
    #[arg(long)]
    pub proposals: PathBuf,
    /// Convolution weights, rank-4 tensor (out, C, K, K)
    #[arg(long)]
    pub weights: PathBuf,
    /// Per-output-channel bias, rank-1 tensor (defaults to zeros)
    #[arg(long)]
    pub bias: Option<PathBuf>,
    /// Grid stride in input pixels
    #[arg(long)]
    pub stride: f64,
    /// Offsets file already holds sigmoid-normalized values in [0, 1]
    #[arg(long)]
    pub normalized: bool,
    /// Output mined features, rank-4 tensor (1, out, H, W)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub strict: bool,
}

/// `{"image_id":…, "proposals":[{"cell":[i,j],"box":[x1,y1,x2,y2]},…]}`
#[derive(Debug, Deserialize)]
struct ProposalRecord {
    #[allow(dead_code)]
    image_id: String,
    proposals: Vec<ProposalCell>,
}

#[derive(Debug, Deserialize)]
struct ProposalCell {
    cell: (usize, usize),
    #[serde(rename = "box")]
    bbox: BoundingBox,
}

fn read_proposals(path: &Path, grid: &GridSpec, _mode: ParseMode) -> Result<Vec<BoundingBox>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let Some(line) = lines.next() else {
        return Err(CliError::Data(format!("{}: empty proposals file", path.display())));
    };
    if lines.next().is_some() {
        return Err(CliError::Data(format!(
            "{}: expected a single-image proposals file",
            path.display()
        )));
    }
    let record: ProposalRecord = serde_json::from_str(line)
        .map_err(|e| CliError::Data(format!("{}:1: invalid JSON: {e}", path.display())))?;

    let cells = grid.width * grid.height;
    let mut boxes: Vec<Option<BoundingBox>> = vec![None; cells];
    for p in &record.proposals {
        let (i, j) = p.cell;
        if !grid.contains_cell((i, j)) {
            return Err(CliError::Data(format!(
                "{}: proposal cell ({i}, {j}) outside {}x{} grid",
                path.display(),
                grid.width,
                grid.height
            )));
        }
        if boxes[j * grid.width + i].replace(p.bbox).is_some() {
            return Err(CliError::Data(format!(
                "{}: duplicate proposal for cell ({i}, {j})",
                path.display()
            )));
        }
    }
    boxes
        .into_iter()
        .enumerate()
        .map(|(k, b)| {
            b.ok_or_else(|| {
                CliError::Data(format!(
                    "{}: missing proposal for cell ({}, {})",
                    path.display(),
                    k % grid.width,
                    k / grid.width
                ))
            })
        })
        .collect()
}

pub fn run(args: &MineArgs) -> Result<(), CliError> {
    print_config(
        "mine",
        &json!({
            "features": args.features.display().to_string(),
            "offsets": args.offsets.display().to_string(),
            "proposals": args.proposals.display().to_string(),
            "weights": args.weights.display().to_string(),
            "bias": args.bias.as_ref().map(|p| p.display().to_string()),
            "stride": args.stride,
            "normalized": args.normalized,
            "out": args.out.display().to_string(),
            "strict": args.strict,
        }),
    );
    if args.stride <= 0.0 {
        return Err(CliError::Usage("--stride must be positive".into()));
    }

    let rank4 = |path: &Path, what: &str| -> Result<([usize; 4], Vec<f64>), CliError> {
        let (dims, data) = io::read_tensor(path)?;
        if dims.len() != 4 {
            return Err(CliError::Data(format!(
                "{}: {what} must be rank 4, got rank {}",
                path.display(),
                dims.len()
            )));
        }
        Ok(([dims[0] as usize, dims[1] as usize, dims[2] as usize, dims[3] as usize], data))
    };

    let ([n, c, h, w], feat_data) = rank4(&args.features, "features")?;
    if n != 1 {
        return Err(CliError::Data(format!(
            "{}: mining runs one image at a time (batch {n})",
            args.features.display()
        )));
    }
    let features = FeatureTensor::from_vec(n, c, h, w, feat_data)?;

    let ([groups, values, oh, ow], offset_data) = rank4(&args.offsets, "offsets")?;
    let raw = OffsetField::from_vec(groups, values, oh, ow, offset_data)?;

    let ([out_c, in_c, k, k2], weight_data) = rank4(&args.weights, "weights")?;
    if k != k2 {
        return Err(CliError::Data(format!(
            "{}: kernel must be square, got {k}x{k2}",
            args.weights.display()
        )));
    }
    let bias = match &args.bias {
        Some(path) => {
            let (dims, data) = io::read_tensor(path)?;
            if dims.len() != 1 || dims[0] as usize != out_c {
                return Err(CliError::Data(format!(
                    "{}: bias must be rank 1 with {out_c} entries",
                    path.display()
                )));
            }
            data
        }
        None => vec![0.0; out_c],
    };
    let weights = ConvWeights::new(out_c, in_c, k, weight_data, bias)?;
    let kernel = KernelGrid::new(k).map_err(|e| CliError::Data(e.to_string()))?;

    let stage = args.stride.log2().round().max(0.0) as u32;
    let grid = GridSpec::new(args.stride, w, h, stage);
    let proposals = read_proposals(&args.proposals, &grid, parse_mode(args.strict))?;

    let normalized = if args.normalized {
        raw
    } else {
        sigmoid_map(&raw)
    };
    let decoded = decode_offset_field(&normalized, &proposals, &grid, &kernel)?;
    let mined = deform_conv_forward(&features, &decoded, &weights, &kernel)?;

    let (on, oc, out_h, out_w) = mined.dims();
    io::write_tensor(
        &args.out,
        &[on as u32, oc as u32, out_h as u32, out_w as u32],
        mined.data(),
    )?;
    println!("mined ({on}, {oc}, {out_h}, {out_w}) features");
    Ok(())
}
