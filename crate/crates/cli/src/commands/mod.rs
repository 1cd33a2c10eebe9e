pub mod eval_cmd;
pub mod homography_aug;
pub mod mine;
pub mod nms_cmd;
pub mod pair_gt;
pub mod shift_sweep;
pub mod stats;
pub mod synth_cmd;

use rgbt_core::eval::EvalError;
use rgbt_core::homography::HomographyError;
use rgbt_core::io::{DataError, ParseMode};
use rgbt_core::mining::MiningError;

/// Usage errors exit 1, data errors exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<HomographyError> for CliError {
    fn from(e: HomographyError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MiningError> for CliError {
    fn from(e: MiningError) -> Self {
        CliError::Data(e.to_string())
    }
}

pub fn parse_mode(strict: bool) -> ParseMode {
    if strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

/// Every command announces its fully resolved configuration up front.
pub fn print_config(command: &str, config: &serde_json::Value) {
    let mut map = serde_json::Map::new();
    map.insert(
        "command".into(),
        serde_json::Value::String(command.into()),
    );
    if let serde_json::Value::Object(fields) = config {
        for (key, value) in fields {
            map.insert(key.clone(), value.clone());
        }
    }
    println!("config {}", serde_json::Value::Object(map));
}
