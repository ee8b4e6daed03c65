//! Relative Lempel-Ziv compression for document collections.
//!
//! A dictionary is sampled evenly from the collection, every document is
//! greedily factorized against it with a suffix array, and the factor
//! streams are stored per document behind a document map so that any
//! document can be decoded on its own.

pub mod archive;
pub mod baseline;
pub mod bench;
pub mod codec;
pub mod corpus;
pub mod dictionary;
pub mod error;
pub mod factorize;
pub mod pipeline;
pub mod source;
pub mod suffix_index;

pub use archive::{open_archive, ArchiveReader, ArchiveWriter, OpenOptions};
pub use codec::{decode_document, encode_document, EncodedDocument, Scheme};
pub use corpus::{Corpus, CorpusSource};
pub use dictionary::{
    extend_dictionary, read_dictionary, sample_dictionary, write_dictionary, Dictionary,
};
pub use error::{Result, RlzError};
pub use factorize::{Factor, FactorDocument, IndexedDictionary};
pub use suffix_index::{SearchInterval, SuffixArray};
