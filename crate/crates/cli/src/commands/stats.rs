use super::{parse_mode, print_config, CliError};
use clap::Args;
use rgbt_core::io;
use rgbt_core::pairing::{mean_pair_shift, PersonGroup};
use serde_json::json;
use std::path::PathBuf;

#[derive(Args)]
pub struct MeanShiftArgs {
    /// Ground-truth groups JSONL
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub strict: bool,
}

pub fn mean_shift(args: &MeanShiftArgs) -> Result<(), CliError> {
    print_config(
        "stats mean-shift",
        &json!({
            "gt": args.gt.display().to_string(),
            "strict": args.strict,
        }),
    );
    let records = io::read_groups(&args.gt, parse_mode(args.strict))?;
    let groups: Vec<PersonGroup> = records
        .iter()
        .flat_map(|r| r.groups.iter().cloned())
        .collect();
    let paired = groups
        .iter()
        .filter(|g| g.rgb.is_some() && g.thermal.is_some())
        .count();
    let mean = mean_pair_shift(&groups).map_err(|e| CliError::Data(e.to_string()))?;
    println!("mean_shift {mean}");
    println!("paired {paired} of {} groups over {} images", groups.len(), records.len());
    Ok(())
}
