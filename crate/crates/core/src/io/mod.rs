//! File formats and dataset plumbing: the binary tensor format, PGM/PPM
//! images, the JSONL schemas for annotations and detections, and the
//! dataset manifest.

mod jsonl;
mod pnm;
mod tensor;

pub use jsonl::{
    read_annotations, read_detections, read_groups, read_manifest, read_modal_detections,
    read_paired_detections, write_jsonl, Detections, ImageGroups, ImagePairs, ManifestEntry,
    ModalAnnotations, ModalDetections, Modality, PairRecord, Tag,
};
pub use pnm::{read_pnm, write_pnm};
pub use tensor::{read_tensor, write_tensor, TENSOR_MAGIC, TENSOR_VERSION};

use thiserror::Error;

/// How much slack a reader gives malformed records. Strict mode rejects
/// unknown fields; lenient mode warns and ignores them. Type invariants
/// are enforced in both modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    Strict,
    #[default]
    Lenient,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid JSON: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: unknown field `{field}` in {context}")]
    UnknownField {
        path: String,
        line: usize,
        field: String,
        context: &'static str,
    },
    #[error("{path}:{line}: {message}")]
    Invariant {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message} (byte offset {offset})")]
    Binary {
        path: String,
        message: String,
        offset: u64,
    },
}

impl DataError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
