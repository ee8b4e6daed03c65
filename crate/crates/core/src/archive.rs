//! Random-access archive of encoded documents.
//!
//! Layout (little-endian):
//!
//! ```text
//! 0   magic "RLZA"
//! 4   version u16 = 1
//! 6   scheme u8 (high nibble positions 0=U 1=Z, low nibble lengths 0=V 1=Z)
//! 7   reserved u8 = 0
//! 8   dict_checksum u64
//! 16  doc_count u64
//! 24  table_offset u64
//! 32  payloads: per document, position stream then length stream
//! table_offset: doc_count x 28-byte map entries
//!     (offset u64, pos_len u32, len_len u32, factor_count u32, original_len u64)
//! ```

use std::fs::File;
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::Arc;

use crate::codec::{decode_document, EncodedDocument, Scheme};
use crate::dictionary::Dictionary;
use crate::error::{Result, RlzError};
use crate::factorize::{materialize_into, FactorDocument};
use crate::source::ReadAt;

pub const ARCHIVE_MAGIC: &[u8; 4] = b"RLZA";
pub const ARCHIVE_VERSION: u16 = 1;
pub const ARCHIVE_HEADER_LEN: u64 = 32;
pub const MAP_ENTRY_LEN: u64 = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchiveHeader {
    pub scheme: Scheme,
    pub dict_checksum: u64,
    pub doc_count: u64,
    pub table_offset: u64,
}

impl ArchiveHeader {
    pub fn to_bytes(&self) -> [u8; ARCHIVE_HEADER_LEN as usize] {
        let mut out = [0u8; ARCHIVE_HEADER_LEN as usize];
        out[0..4].copy_from_slice(ARCHIVE_MAGIC);
        out[4..6].copy_from_slice(&ARCHIVE_VERSION.to_le_bytes());
        out[6] = self.scheme.to_byte();
        out[7] = 0;
        out[8..16].copy_from_slice(&self.dict_checksum.to_le_bytes());
        out[16..24].copy_from_slice(&self.doc_count.to_le_bytes());
        out[24..32].copy_from_slice(&self.table_offset.to_le_bytes());
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < ARCHIVE_HEADER_LEN as usize {
            return Err(RlzError::Format("archive shorter than header".into()));
        }
        if &buf[0..4] != ARCHIVE_MAGIC {
            return Err(RlzError::Format(format!(
                "bad archive magic {:?}",
                String::from_utf8_lossy(&buf[0..4])
            )));
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != ARCHIVE_VERSION {
            return Err(RlzError::Format(format!("unsupported archive version {version}")));
        }
        let scheme = Scheme::from_byte(buf[6])?;
        if buf[7] != 0 {
            return Err(RlzError::Format("non-zero reserved header byte".into()));
        }
        let word = |at: usize| u64::from_le_bytes(buf[at..at + 8].try_into().unwrap());
        Ok(ArchiveHeader {
            scheme,
            dict_checksum: word(8),
            doc_count: word(16),
            table_offset: word(24),
        })
    }
}

/// Location and shape of one document's payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DocumentMapEntry {
    pub payload_offset: u64,
    pub pos_len: u32,
    pub len_len: u32,
    pub factor_count: u32,
    pub original_len: u64,
}

impl DocumentMapEntry {
    pub fn payload_len(&self) -> u64 {
        self.pos_len as u64 + self.len_len as u64
    }

    pub fn payload_end(&self) -> u64 {
        self.payload_offset + self.payload_len()
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.payload_offset.to_le_bytes());
        out.extend_from_slice(&self.pos_len.to_le_bytes());
        out.extend_from_slice(&self.len_len.to_le_bytes());
        out.extend_from_slice(&self.factor_count.to_le_bytes());
        out.extend_from_slice(&self.original_len.to_le_bytes());
    }

    fn parse(rec: &[u8]) -> Self {
        let u32_at = |at: usize| u32::from_le_bytes(rec[at..at + 4].try_into().unwrap());
        let u64_at = |at: usize| u64::from_le_bytes(rec[at..at + 8].try_into().unwrap());
        DocumentMapEntry {
            payload_offset: u64_at(0),
            pos_len: u32_at(8),
            len_len: u32_at(12),
            factor_count: u32_at(16),
            original_len: u64_at(20),
        }
    }
}

/// Streams encoded documents to an archive. The document map is written, and
/// the header patched, by [`finalize`](ArchiveWriter::finalize).
pub struct ArchiveWriter<W: Write + Seek = BufWriter<File>> {
    out: W,
    scheme: Scheme,
    dict_checksum: u64,
    entries: Vec<DocumentMapEntry>,
    offset: u64,
    finalized: bool,
}

impl ArchiveWriter<BufWriter<File>> {
    pub fn create(path: &Path, dict: &Dictionary, scheme: Scheme) -> Result<Self> {
        ArchiveWriter::new(BufWriter::new(File::create(path)?), dict.checksum(), scheme)
    }
}

impl<W: Write + Seek> ArchiveWriter<W> {
    pub fn new(mut out: W, dict_checksum: u64, scheme: Scheme) -> Result<Self> {
        let header = ArchiveHeader {
            scheme,
            dict_checksum,
            doc_count: 0,
            table_offset: 0,
        };
        out.write_all(&header.to_bytes())?;
        Ok(ArchiveWriter {
            out,
            scheme,
            dict_checksum,
            entries: Vec::new(),
            offset: ARCHIVE_HEADER_LEN,
            finalized: false,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Appends one document and returns its id (the 0-based append index).
    pub fn append_document(&mut self, enc: &EncodedDocument) -> Result<u64> {
        if self.finalized {
            return Err(RlzError::UseAfterFinalize);
        }
        let stream_len = |s: &[u8]| {
            u32::try_from(s.len())
                .map_err(|_| RlzError::InvalidParams("stream exceeds 4 GiB".into()))
        };
        let entry = DocumentMapEntry {
            payload_offset: self.offset,
            pos_len: stream_len(&enc.pos_stream)?,
            len_len: stream_len(&enc.len_stream)?,
            factor_count: enc.factor_count,
            original_len: enc.original_len,
        };
        self.out.write_all(&enc.pos_stream)?;
        self.out.write_all(&enc.len_stream)?;
        self.offset = entry.payload_end();
        self.entries.push(entry);
        Ok(self.entries.len() as u64 - 1)
    }

    pub fn doc_count(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn finalize(&mut self) -> Result<()> {
        if self.finalized {
            return Err(RlzError::UseAfterFinalize);
        }
        let mut table = Vec::with_capacity(self.entries.len() * MAP_ENTRY_LEN as usize);
        for e in &self.entries {
            e.write_to(&mut table);
        }
        self.out.write_all(&table)?;
        let header = ArchiveHeader {
            scheme: self.scheme,
            dict_checksum: self.dict_checksum,
            doc_count: self.entries.len() as u64,
            table_offset: self.offset,
        };
        self.out.seek(SeekFrom::Start(0))?;
        self.out.write_all(&header.to_bytes())?;
        self.out.seek(SeekFrom::End(0))?;
        self.out.flush()?;
        self.finalized = true;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OpenOptions {
    /// Accept a dictionary that extends the encoding dictionary by pure
    /// append; every stored offset remains valid against it.
    pub allow_extended_dict: bool,
}

/// Read side of an archive. The header and document map are resident; each
/// retrieval reads exactly one payload region.
pub struct ArchiveReader<R: ReadAt = File> {
    source: R,
    header: ArchiveHeader,
    entries: Vec<DocumentMapEntry>,
    dict: Arc<Dictionary>,
    file_len: u64,
}

pub fn open_archive(path: &Path, dict: Arc<Dictionary>) -> Result<ArchiveReader<File>> {
    ArchiveReader::open(path, dict, OpenOptions::default())
}

impl ArchiveReader<File> {
    pub fn open(path: &Path, dict: Arc<Dictionary>, opts: OpenOptions) -> Result<Self> {
        ArchiveReader::from_source(File::open(path)?, dict, opts)
    }
}

impl<R: ReadAt> ArchiveReader<R> {
    pub fn from_source(source: R, dict: Arc<Dictionary>, opts: OpenOptions) -> Result<Self> {
        let file_len = source.source_len()?;
        if file_len < ARCHIVE_HEADER_LEN {
            return Err(RlzError::Format("archive shorter than header".into()));
        }
        let mut head = [0u8; ARCHIVE_HEADER_LEN as usize];
        source.read_exact_at(&mut head, 0)?;
        let header = ArchiveHeader::from_bytes(&head)?;

        if header.dict_checksum != dict.checksum() {
            let prefix_ok = opts.allow_extended_dict
                && dict.prefix_with_checksum(header.dict_checksum).is_some();
            if !prefix_ok {
                return Err(RlzError::DictMismatch {
                    expected: header.dict_checksum,
                    actual: dict.checksum(),
                });
            }
        }

        let table_len = header
            .doc_count
            .checked_mul(MAP_ENTRY_LEN)
            .and_then(|t| t.checked_add(header.table_offset));
        if header.table_offset < ARCHIVE_HEADER_LEN || table_len != Some(file_len) {
            return Err(RlzError::Format(format!(
                "document map ({} entries at {}) does not end the {file_len}-byte file",
                header.doc_count, header.table_offset
            )));
        }
        let mut table = vec![0u8; (header.doc_count * MAP_ENTRY_LEN) as usize];
        source.read_exact_at(&mut table, header.table_offset)?;
        let entries: Vec<DocumentMapEntry> = table
            .chunks_exact(MAP_ENTRY_LEN as usize)
            .map(DocumentMapEntry::parse)
            .collect();

        let mut expected = ARCHIVE_HEADER_LEN;
        for (i, e) in entries.iter().enumerate() {
            if e.payload_offset != expected {
                return Err(RlzError::Format(format!(
                    "map entry {i} starts at {} but previous payload ends at {expected}",
                    e.payload_offset
                )));
            }
            expected = e.payload_end();
        }
        if expected != header.table_offset {
            return Err(RlzError::Format("payload region does not reach the map".into()));
        }

        Ok(ArchiveReader {
            source,
            header,
            entries,
            dict,
            file_len,
        })
    }

    pub fn header(&self) -> &ArchiveHeader {
        &self.header
    }

    pub fn scheme(&self) -> Scheme {
        self.header.scheme
    }

    pub fn doc_count(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn entries(&self) -> &[DocumentMapEntry] {
        &self.entries
    }

    pub fn dictionary(&self) -> &Arc<Dictionary> {
        &self.dict
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    pub fn source(&self) -> &R {
        &self.source
    }

    fn entry(&self, doc_id: u64) -> Result<&DocumentMapEntry> {
        usize::try_from(doc_id)
            .ok()
            .and_then(|i| self.entries.get(i))
            .ok_or(RlzError::OutOfRange {
                id: doc_id,
                count: self.doc_count(),
            })
    }

    /// Reads the payload region of `doc_id` in a single positioned read.
    pub fn read_encoded(&self, doc_id: u64) -> Result<EncodedDocument> {
        let e = *self.entry(doc_id)?;
        let mut payload = vec![0u8; e.payload_len() as usize];
        if !payload.is_empty() {
            self.source.read_exact_at(&mut payload, e.payload_offset)?;
        }
        let len_stream = payload.split_off(e.pos_len as usize);
        Ok(EncodedDocument {
            pos_stream: payload,
            len_stream,
            factor_count: e.factor_count,
            original_len: e.original_len,
        })
    }

    pub fn get_factors(&self, doc_id: u64) -> Result<FactorDocument> {
        decode_document(&self.read_encoded(doc_id)?, self.scheme())
    }

    pub fn get_document(&self, doc_id: u64) -> Result<Vec<u8>> {
        let fdoc = self.get_factors(doc_id)?;
        let mut out = Vec::with_capacity(fdoc.original_len as usize);
        materialize_into(self.dict.bytes(), &fdoc.factors, &mut out)?;
        Ok(out)
    }

    /// Every document in id order, in one forward pass over the payloads.
    pub fn stream_all(&self) -> impl Iterator<Item = Result<Vec<u8>>> + '_ {
        (0..self.doc_count()).map(move |id| self.get_document(id))
    }

    /// Factor lists of every document in id order.
    pub fn stream_factors(&self) -> impl Iterator<Item = Result<FactorDocument>> + '_ {
        (0..self.doc_count()).map(move |id| self.get_factors(id))
    }
}
