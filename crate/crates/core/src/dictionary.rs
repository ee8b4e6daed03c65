//! Dictionary construction by evenly spaced sampling, extension for growing
//! collections, and the dictionary file format.
//!
//! File layout (little-endian): magic `RLZD`, version u16 = 1, reserved
//! u16 = 0, sample_size u64, dict_len u64, checksum u64, then the raw
//! dictionary bytes. The checksum is FNV-1a-64 over the raw bytes.

use std::fs;
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Result, RlzError};

pub const DICT_MAGIC: &[u8; 4] = b"RLZD";
pub const DICT_VERSION: u16 = 1;
pub const DICT_HEADER_LEN: usize = 32;
pub const DEFAULT_SAMPLE_SIZE: usize = 1024;

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental FNV-1a-64.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a64(u64);

impl Default for Fnv1a64 {
    fn default() -> Self {
        Fnv1a64(FNV_OFFSET_BASIS)
    }
}

impl Fnv1a64 {
    #[inline]
    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a64::default();
    h.update(bytes);
    h.finish()
}

/// Memory-resident reference text for all copy factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    bytes: Vec<u8>,
    sample_size: u64,
    checksum: u64,
}

impl Dictionary {
    pub fn new(bytes: Vec<u8>, sample_size: u64) -> Result<Self> {
        if bytes.len() > u32::MAX as usize {
            return Err(RlzError::InvalidParams(format!(
                "dictionary of {} bytes exceeds 32-bit positions",
                bytes.len()
            )));
        }
        let checksum = fnv1a64(&bytes);
        Ok(Dictionary {
            bytes,
            sample_size,
            checksum,
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn sample_size(&self) -> u64 {
        self.sample_size
    }

    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    /// Size of this dictionary once written to disk.
    pub fn file_len(&self) -> u64 {
        (DICT_HEADER_LEN + self.bytes.len()) as u64
    }

    /// Length of the shortest prefix whose FNV-1a-64 equals `checksum`, if any.
    /// Identifies the original dictionary inside an extended one.
    pub fn prefix_with_checksum(&self, checksum: u64) -> Option<usize> {
        let mut h = Fnv1a64::default();
        if h.finish() == checksum {
            return Some(0);
        }
        for (i, b) in self.bytes.iter().enumerate() {
            h.update(std::slice::from_ref(b));
            if h.finish() == checksum {
                return Some(i + 1);
            }
        }
        None
    }

    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(DICT_HEADER_LEN + self.bytes.len());
        out.extend_from_slice(DICT_MAGIC);
        out.extend_from_slice(&DICT_VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&self.sample_size.to_le_bytes());
        out.extend_from_slice(&(self.bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.checksum.to_le_bytes());
        out.extend_from_slice(&self.bytes);
        out
    }

    pub fn from_file_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < DICT_HEADER_LEN {
            return Err(RlzError::Format("dictionary file shorter than header".into()));
        }
        if &buf[0..4] != DICT_MAGIC {
            return Err(RlzError::Format(format!(
                "bad dictionary magic {:?}",
                String::from_utf8_lossy(&buf[0..4])
            )));
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != DICT_VERSION {
            return Err(RlzError::Format(format!(
                "unsupported dictionary version {version}"
            )));
        }
        let word = |at: usize| u64::from_le_bytes(buf[at..at + 8].try_into().unwrap());
        let sample_size = word(8);
        let dict_len = word(16);
        let stored = word(24);
        if (buf.len() - DICT_HEADER_LEN) as u64 != dict_len {
            return Err(RlzError::Format(format!(
                "dictionary header declares {dict_len} bytes, file carries {}",
                buf.len() - DICT_HEADER_LEN
            )));
        }
        let bytes = buf[DICT_HEADER_LEN..].to_vec();
        let computed = fnv1a64(&bytes);
        if computed != stored {
            return Err(RlzError::ChecksumMismatch { stored, computed });
        }
        Dictionary::new(bytes, sample_size)
    }
}

pub fn write_dictionary(dict: &Dictionary, path: &Path) -> Result<()> {
    fs::write(path, dict.to_file_bytes())?;
    Ok(())
}

pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    Dictionary::from_file_bytes(&fs::read(path)?)
}

/// Start offsets of the samples taken from a text of length `text_len`:
/// `floor(dict_size / sample_size)` samples at `round(j * n / k)`, each
/// clamped so it ends inside the text. Halves round to even.
pub fn sample_offsets(text_len: usize, dict_size: usize, sample_size: usize) -> Result<Vec<usize>> {
    check_params(dict_size, sample_size)?;
    if text_len == 0 {
        return Err(RlzError::EmptyCorpus);
    }
    if dict_size >= text_len {
        return Ok(vec![0]);
    }
    let k = (dict_size / sample_size) as u128;
    let n = text_len as u128;
    let last = (text_len - sample_size) as u128;
    Ok((0..k)
        .map(|j| {
            let (q, r) = (j * n / k, j * n % k);
            let rounded = match (2 * r).cmp(&k) {
                std::cmp::Ordering::Greater => q + 1,
                std::cmp::Ordering::Equal => q + (q & 1),
                std::cmp::Ordering::Less => q,
            };
            rounded.min(last) as usize
        })
        .collect())
}

fn check_params(dict_size: usize, sample_size: usize) -> Result<()> {
    if sample_size == 0 {
        return Err(RlzError::InvalidParams("sample size must be at least 1".into()));
    }
    if dict_size < sample_size {
        return Err(RlzError::InvalidParams(format!(
            "dictionary size {dict_size} is smaller than sample size {sample_size}"
        )));
    }
    Ok(())
}

/// Evenly spaced samples of `text`, concatenated in offset order. The whole
/// text is returned when `dict_size` covers it.
pub fn sample_text(text: &[u8], dict_size: usize, sample_size: usize) -> Result<Vec<u8>> {
    let offsets = sample_offsets(text.len(), dict_size, sample_size)?;
    if dict_size >= text.len() {
        return Ok(text.to_vec());
    }
    let mut out = Vec::with_capacity(offsets.len() * sample_size);
    for off in offsets {
        out.extend_from_slice(&text[off..off + sample_size]);
    }
    Ok(out)
}

/// Builds a dictionary of about `dict_size` bytes from `sample_size`-byte
/// samples taken evenly across the collection, treated as one string.
pub fn sample_dictionary(corpus: &Corpus, dict_size: usize, sample_size: usize) -> Result<Dictionary> {
    let bytes = sample_text(corpus.data(), dict_size, sample_size)?;
    Dictionary::new(bytes, sample_size as u64)
}

/// Samples `new_docs` and appends the samples to `dict`. Offsets into the old
/// dictionary stay valid; the suffix array must be rebuilt by the caller.
pub fn extend_dictionary(
    dict: &Dictionary,
    new_docs: &Corpus,
    added_size: usize,
    sample_size: usize,
) -> Result<Dictionary> {
    if new_docs.total_bytes() == 0 {
        return Err(RlzError::EmptyCorpus);
    }
    let added = sample_text(new_docs.data(), added_size, sample_size)?;
    let mut bytes = Vec::with_capacity(dict.len() + added.len());
    bytes.extend_from_slice(dict.bytes());
    bytes.extend_from_slice(&added);
    Dictionary::new(bytes, dict.sample_size())
}
