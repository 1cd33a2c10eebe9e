use super::{parse_mode, print_config, CliError};
use clap::Args;
use rgbt_core::homography::{
    apply_jitter, image_corners, jitter_for_image, solve_homography, warp_box_clipped, warp_image,
};
use rgbt_core::io::{self, ImageGroups};
use rgbt_core::mining::FeatureTensor;
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Args)]
pub struct HomographyAugArgs {
    /// Input thermal image: .pgm, .ppm, or .cmft
    #[arg(long)]
    pub image: PathBuf,
    /// Output image (same format as the input)
    #[arg(long)]
    pub out: PathBuf,
    /// Corner jitter bound in pixels
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Image index within the dataset; jitter derives from (seed, index)
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    /// Ground-truth groups JSONL holding the image's annotations
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Output JSONL for the warped record (requires --gt and --image-id)
    #[arg(long = "gt-out")]
    pub gt_out: Option<PathBuf>,
    /// Which record of --gt belongs to this image
    #[arg(long = "image-id")]
    pub image_id: Option<String>,
    #[arg(long)]
    pub strict: bool,
}

fn read_image(path: &Path) -> Result<FeatureTensor, CliError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") | Some("ppm") => Ok(io::read_pnm(path)?),
        Some("cmft") => {
            let (dims, data) = io::read_tensor(path)?;
            if dims.len() != 4 {
                return Err(CliError::Data(format!(
                    "{}: image tensor must be rank 4, got rank {}",
                    path.display(),
                    dims.len()
                )));
            }
            let [n, c, h, w] = [dims[0], dims[1], dims[2], dims[3]].map(|d| d as usize);
            FeatureTensor::from_vec(n, c, h, w, data).map_err(CliError::from)
        }
        _ => Err(CliError::Usage(format!(
            "{}: unsupported image extension (expected .pgm, .ppm, or .cmft)",
            path.display()
        ))),
    }
}

fn write_image(path: &Path, img: &FeatureTensor) -> Result<(), CliError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") | Some("ppm") => Ok(io::write_pnm(path, img)?),
        Some("cmft") => {
            let (n, c, h, w) = img.dims();
            Ok(io::write_tensor(
                path,
                &[n as u32, c as u32, h as u32, w as u32],
                img.data(),
            )?)
        }
        _ => Err(CliError::Usage(format!(
            "{}: unsupported image extension (expected .pgm, .ppm, or .cmft)",
            path.display()
        ))),
    }
}

pub fn run(args: &HomographyAugArgs) -> Result<(), CliError> {
    print_config(
        "homography-aug",
        &json!({
            "image": args.image.display().to_string(),
            "out": args.out.display().to_string(),
            "alpha": args.alpha,
            "seed": args.seed,
            "index": args.index,
            "gt": args.gt.as_ref().map(|p| p.display().to_string()),
            "gt_out": args.gt_out.as_ref().map(|p| p.display().to_string()),
            "image_id": args.image_id,
            "strict": args.strict,
        }),
    );
    if args.gt.is_some() != args.gt_out.is_some() {
        return Err(CliError::Usage("--gt and --gt-out go together".into()));
    }
    if args.gt.is_some() && args.image_id.is_none() {
        return Err(CliError::Usage("--gt requires --image-id".into()));
    }
    if args.alpha < 0.0 {
        return Err(CliError::Usage("--alpha must be nonnegative".into()));
    }

    let img = read_image(&args.image)?;
    let (_, _, height, width) = img.dims();
    let jitter = jitter_for_image(args.alpha, args.seed, args.index);
    let corners = image_corners(width, height);
    let moved = apply_jitter(&corners, &jitter);
    let warp = solve_homography(&corners, &moved)?;

    let warped = warp_image(&img, &warp)?;
    write_image(&args.out, &warped)?;
    println!(
        "warped {}x{} image with corner shifts {:?}",
        width, height, jitter.shifts
    );

    if let (Some(gt_path), Some(gt_out), Some(image_id)) =
        (&args.gt, &args.gt_out, &args.image_id)
    {
        let groups = io::read_groups(gt_path, parse_mode(args.strict))?;
        let Some(record) = groups.iter().find(|g| &g.image_id == image_id) else {
            return Err(CliError::Data(format!(
                "image id {image_id} not found in {}",
                gt_path.display()
            )));
        };
        let mut dropped = 0usize;
        let mut warped_groups = Vec::new();
        for group in &record.groups {
            let mut group = group.clone();
            if let Some(b) = &group.thermal {
                group.thermal = warp_box_clipped(b, &warp, width, height)?;
            }
            if group.rgb.is_none() && group.thermal.is_none() {
                dropped += 1;
                continue;
            }
            warped_groups.push(group);
        }
        io::write_jsonl(
            gt_out,
            &[ImageGroups {
                image_id: image_id.clone(),
                groups: warped_groups,
            }],
        )?;
        println!("warped ground truth written, {dropped} groups dropped");
    }
    Ok(())
}
