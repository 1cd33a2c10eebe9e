use super::{parse_mode, print_config, CliError};
use clap::Args;
use rgbt_core::eval::{shift_sweep, EvalConfig, EvalError, ShiftSweepConfig};
use rgbt_core::io::{self, Modality};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Args)]
pub struct ShiftSweepArgs {
    /// Ground-truth groups JSONL (unshifted)
    #[arg(long)]
    pub gt: PathBuf,
    /// Detections path pattern; `{dir}` and `{level}` are substituted
    #[arg(long = "dets-pattern")]
    pub dets_pattern: String,
    /// Command template run when a detections file is missing; `{dir}`,
    /// `{level}`, `{dx}`, `{dy}` and `{out}` are substituted
    #[arg(long = "detector-cmd")]
    pub detector_cmd: Option<String>,
    /// Sweep CSV output (direction,level,mr rows plus direction,rho rows)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated shift directions in degrees
    #[arg(long, default_value = "0,45,90,135")]
    pub directions: String,
    /// Shift levels: `lo:hi` inclusive range or comma-separated list
    #[arg(long, default_value = "-10:10", allow_hyphen_values = true)]
    pub levels: String,
    /// Leave level 0 out of the per-direction averages
    #[arg(long = "exclude-zero")]
    pub exclude_zero: bool,
    /// Matching IoU threshold
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    #[arg(long)]
    pub strict: bool,
}

pub fn parse_directions(text: &str) -> Result<Vec<u32>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let value: u32 = part
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad direction `{part}`")))?;
        if ![0, 45, 90, 135].contains(&value) {
            return Err(CliError::Usage(format!(
                "direction {value} not in {{0, 45, 90, 135}}"
            )));
        }
        out.push(value);
    }
    Ok(out)
}

pub fn parse_levels(text: &str) -> Result<Vec<i32>, CliError> {
    if let Some((lo, hi)) = text.split_once(':') {
        let lo: i32 = lo
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad level bound `{lo}`")))?;
        let hi: i32 = hi
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad level bound `{hi}`")))?;
        if lo > hi {
            return Err(CliError::Usage(format!("empty level range {lo}:{hi}")));
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad level `{part}`")))
        })
        .collect()
}

fn substitute(template: &str, direction: u32, level: i32, shift: (i32, i32), out: &str) -> String {
    template
        .replace("{dir}", &direction.to_string())
        .replace("{level}", &level.to_string())
        .replace("{dx}", &shift.0.to_string())
        .replace("{dy}", &shift.1.to_string())
        .replace("{out}", out)
}

pub fn run(args: &ShiftSweepArgs) -> Result<(), CliError> {
    let directions = parse_directions(&args.directions)?;
    let levels = parse_levels(&args.levels)?;
    print_config(
        "shift-sweep",
        &json!({
            "gt": args.gt.display().to_string(),
            "dets_pattern": args.dets_pattern,
            "detector_cmd": args.detector_cmd,
            "out": args.out.as_ref().map(|p| p.display().to_string()),
            "directions": directions,
            "levels": levels,
            "exclude_zero": args.exclude_zero,
            "iou": args.iou,
            "strict": args.strict,
        }),
    );

    let mode = parse_mode(args.strict);
    let gt = io::read_groups(&args.gt, mode)?;
    let sweep_cfg = ShiftSweepConfig {
        directions_deg: directions,
        levels,
        exclude_zero: args.exclude_zero,
        shifted: Modality::Thermal,
    };
    let eval_cfg = EvalConfig {
        iou_threshold: args.iou,
        ..EvalConfig::default()
    };

    let result = shift_sweep(&gt, &sweep_cfg, &eval_cfg, |direction, level, shift| {
        let path_text = substitute(&args.dets_pattern, direction, level, shift, "");
        let path = Path::new(&path_text);
        if !path.exists() {
            if let Some(cmd) = &args.detector_cmd {
                let line = substitute(cmd, direction, level, shift, &path_text);
                let status = std::process::Command::new("sh")
                    .arg("-c")
                    .arg(&line)
                    .status()
                    .map_err(|e| EvalError::MissingDetections {
                        direction,
                        level,
                        detail: format!("detector command failed to start: {e}"),
                    })?;
                if !status.success() {
                    return Err(EvalError::MissingDetections {
                        direction,
                        level,
                        detail: format!("detector command exited with {status}"),
                    });
                }
            }
        }
        if !path.exists() {
            return Err(EvalError::MissingDetections {
                direction,
                level,
                detail: format!("no detections file at {path_text}"),
            });
        }
        io::read_detections(path, mode).map_err(|e| EvalError::MissingDetections {
            direction,
            level,
            detail: e.to_string(),
        })
    })?;

    write_outputs(args, &result)
}

fn write_outputs(
    args: &ShiftSweepArgs,
    result: &rgbt_core::eval::SweepResult,
) -> Result<(), CliError> {
    let mut csv = String::from("direction,level,mr\n");
    for row in &result.rows {
        csv.push_str(&format!("{},{},{}\n", row.direction, row.level, row.miss_rate));
        println!(
            "direction {} level {} shift ({},{}) mr {}",
            row.direction, row.level, row.shift.0, row.shift.1, row.miss_rate
        );
    }
    for (direction, rho) in &result.rho {
        csv.push_str(&format!("{direction},rho,{rho}\n"));
        println!("direction {direction} rho {rho}");
    }
    if let Some(out) = &args.out {
        std::fs::write(out, csv).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    }
    Ok(())
}
