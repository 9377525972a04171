//! On-disk formats. Binary files are little-endian and end with the SHA-256
//! of every preceding byte.

mod checkpoint;
mod codec;
mod dataset;
mod ybus;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use dataset::{
    decode_dataset, encode_dataset, read_dataset_csv, record_width, write_dataset_csv, DatasetFile, DATASET_MAGIC,
    DATASET_VERSION,
};
pub use ybus::write_ybus_triplets;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("not a {expected} file")]
    BadMagic { expected: &'static str },
    #[error("unsupported version {found}, expected {expected}")]
    Version { expected: u32, found: u32 },
    #[error("file ends early at byte {0}")]
    Truncated(usize),
    #[error("content digest mismatch")]
    Digest,
    #[error("{0} trailing bytes after the content")]
    Trailing(usize),
    #[error("invalid field {field}: {detail}")]
    Invalid { field: &'static str, detail: String },
    #[error("layer sizes {found:?} do not match the expected {expected:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("csv: {0}")]
    Csv(String),
}
