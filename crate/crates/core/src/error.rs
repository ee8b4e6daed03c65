use std::io;

use thiserror::Error;

/// Errors produced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum RlzError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch { stored: u64, computed: u64 },

    #[error("dictionary mismatch: archive expects checksum {expected:#018x}, dictionary has {actual:#018x}")]
    DictMismatch { expected: u64, actual: u64 },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("corrupt factor ({position}, {length}) against dictionary of length {dict_len}")]
    CorruptFactor {
        position: u32,
        length: u32,
        dict_len: usize,
    },

    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    #[error("truncated variable-byte code")]
    TruncatedCode,

    #[error("document id {id} out of range (archive holds {count} documents)")]
    OutOfRange { id: u64, count: u64 },

    #[error("archive writer already finalized")]
    UseAfterFinalize,
}

pub type Result<T, E = RlzError> = std::result::Result<T, E>;
