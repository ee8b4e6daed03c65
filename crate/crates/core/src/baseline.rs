//! Comparison store: documents packed into fixed-size blocks, each block
//! compressed independently as one zlib unit. Retrieving a document inflates
//! its block from the start up to the end of the document.
//!
//! Layout (little-endian): magic `RLZB`, version u16 = 1, level u8,
//! reserved u8, block_size u64, block_count u64, doc_count u64,
//! table_offset u64; compressed blocks; then at table_offset the block map
//! (block_count x (offset u64, compressed_len u32, raw_len u32)) followed by
//! the doc map (doc_count x (block u32, offset_in_block u32, length u32)).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Result, RlzError};
use crate::source::ReadAt;

pub const BLOCKED_MAGIC: &[u8; 4] = b"RLZB";
pub const BLOCKED_VERSION: u16 = 1;
pub const BLOCKED_HEADER_LEN: u64 = 40;
const BLOCK_ENTRY_LEN: u64 = 16;
const DOC_ENTRY_LEN: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockEntry {
    pub offset: u64,
    pub compressed_len: u32,
    pub raw_len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockedDocEntry {
    pub block: u32,
    pub offset_in_block: u32,
    pub length: u32,
}

/// An in-memory blocked archive, ready to be written out.
#[derive(Debug, Clone)]
pub struct BlockedArchive {
    pub block_size: u64,
    pub level: u32,
    pub blocks: Vec<Vec<u8>>,
    pub block_map: Vec<BlockEntry>,
    pub doc_map: Vec<BlockedDocEntry>,
}

/// Groups consecutive documents into blocks: a document opens a new block
/// when adding it would push the current one past `block_size`. A block size
/// of 0 gives every document its own block. Returns `(first_doc, end_doc)`.
pub fn pack_blocks(doc_lens: &[usize], block_size: u64) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut start = 0usize;
    let mut fill = 0u64;
    for (i, &len) in doc_lens.iter().enumerate() {
        let len = len as u64;
        if i > start && (block_size == 0 || fill + len > block_size) {
            blocks.push((start, i));
            start = i;
            fill = 0;
        }
        fill += len;
    }
    if start < doc_lens.len() {
        blocks.push((start, doc_lens.len()));
    }
    blocks
}

pub fn compress_blocked(corpus: &Corpus, block_size: u64, level: u32) -> Result<BlockedArchive> {
    if !(1..=9).contains(&level) {
        return Err(RlzError::InvalidParams(format!("zlib level {level} outside 1..=9")));
    }
    let lens: Vec<usize> = corpus.documents().map(<[u8]>::len).collect();
    let ranges = pack_blocks(&lens, block_size);

    let mut doc_map = Vec::with_capacity(corpus.len());
    let mut raw_lens = Vec::with_capacity(ranges.len());
    for (b, &(first, end)) in ranges.iter().enumerate() {
        let mut off = 0u64;
        for len in &lens[first..end] {
            doc_map.push(BlockedDocEntry {
                block: to_u32(b as u64, "block index")?,
                offset_in_block: to_u32(off, "offset in block")?,
                length: to_u32(*len as u64, "document length")?,
            });
            off += *len as u64;
        }
        raw_lens.push(to_u32(off, "block length")?);
    }

    let blocks: Vec<Vec<u8>> = ranges
        .par_iter()
        .map(|&(first, end)| {
            let mut enc = ZlibEncoder::new(Vec::new(), Compression::new(level));
            for doc in (first..end).map(|i| corpus.document(i)) {
                enc.write_all(doc).expect("writing to a Vec cannot fail");
            }
            enc.finish().expect("writing to a Vec cannot fail")
        })
        .collect();

    let mut offset = BLOCKED_HEADER_LEN;
    let mut block_map = Vec::with_capacity(blocks.len());
    for (blk, raw_len) in blocks.iter().zip(raw_lens) {
        block_map.push(BlockEntry {
            offset,
            compressed_len: to_u32(blk.len() as u64, "compressed block")?,
            raw_len,
        });
        offset += blk.len() as u64;
    }
    Ok(BlockedArchive {
        block_size,
        level,
        blocks,
        block_map,
        doc_map,
    })
}

fn to_u32(v: u64, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| RlzError::InvalidParams(format!("{what} exceeds 32 bits")))
}

impl BlockedArchive {
    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: u64 = self.blocks.iter().map(|b| b.len() as u64).sum();
        let table_offset = BLOCKED_HEADER_LEN + payload;
        let mut out = Vec::new();
        out.extend_from_slice(BLOCKED_MAGIC);
        out.extend_from_slice(&BLOCKED_VERSION.to_le_bytes());
        out.push(self.level as u8);
        out.push(0);
        out.extend_from_slice(&self.block_size.to_le_bytes());
        out.extend_from_slice(&(self.blocks.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.doc_map.len() as u64).to_le_bytes());
        out.extend_from_slice(&table_offset.to_le_bytes());
        for b in &self.blocks {
            out.extend_from_slice(b);
        }
        for e in &self.block_map {
            out.extend_from_slice(&e.offset.to_le_bytes());
            out.extend_from_slice(&e.compressed_len.to_le_bytes());
            out.extend_from_slice(&e.raw_len.to_le_bytes());
        }
        for d in &self.doc_map {
            out.extend_from_slice(&d.block.to_le_bytes());
            out.extend_from_slice(&d.offset_in_block.to_le_bytes());
            out.extend_from_slice(&d.length.to_le_bytes());
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }
}

/// Read side of a blocked archive, with a counter of inflated bytes.
pub struct BlockedReader<R: ReadAt = File> {
    source: R,
    block_size: u64,
    block_map: Vec<BlockEntry>,
    doc_map: Vec<BlockedDocEntry>,
    file_len: u64,
    inflated: AtomicU64,
}

impl BlockedReader<File> {
    pub fn open(path: &Path) -> Result<Self> {
        BlockedReader::from_source(File::open(path)?)
    }
}

impl<R: ReadAt> BlockedReader<R> {
    pub fn from_source(source: R) -> Result<Self> {
        let file_len = source.source_len()?;
        if file_len < BLOCKED_HEADER_LEN {
            return Err(RlzError::Format("blocked archive shorter than header".into()));
        }
        let mut head = [0u8; BLOCKED_HEADER_LEN as usize];
        source.read_exact_at(&mut head, 0)?;
        if &head[0..4] != BLOCKED_MAGIC {
            return Err(RlzError::Format("bad blocked archive magic".into()));
        }
        let version = u16::from_le_bytes([head[4], head[5]]);
        if version != BLOCKED_VERSION {
            return Err(RlzError::Format(format!("unsupported blocked archive version {version}")));
        }
        let word = |at: usize| u64::from_le_bytes(head[at..at + 8].try_into().unwrap());
        let (block_size, block_count, doc_count, table_offset) = (word(8), word(16), word(24), word(32));
        let table_len = block_count
            .checked_mul(BLOCK_ENTRY_LEN)
            .zip(doc_count.checked_mul(DOC_ENTRY_LEN))
            .and_then(|(a, b)| a.checked_add(b));
        if table_len.and_then(|t| t.checked_add(table_offset)) != Some(file_len) {
            return Err(RlzError::Format("blocked archive tables do not end the file".into()));
        }
        let mut table = vec![0u8; table_len.unwrap() as usize];
        source.read_exact_at(&mut table, table_offset)?;
        let (blocks_raw, docs_raw) = table.split_at((block_count * BLOCK_ENTRY_LEN) as usize);
        let u32_at = |b: &[u8], at: usize| u32::from_le_bytes(b[at..at + 4].try_into().unwrap());
        let block_map: Vec<BlockEntry> = blocks_raw
            .chunks_exact(BLOCK_ENTRY_LEN as usize)
            .map(|c| BlockEntry {
                offset: u64::from_le_bytes(c[0..8].try_into().unwrap()),
                compressed_len: u32_at(c, 8),
                raw_len: u32_at(c, 12),
            })
            .collect();
        let doc_map: Vec<BlockedDocEntry> = docs_raw
            .chunks_exact(DOC_ENTRY_LEN as usize)
            .map(|c| BlockedDocEntry {
                block: u32_at(c, 0),
                offset_in_block: u32_at(c, 4),
                length: u32_at(c, 8),
            })
            .collect();
        for b in &block_map {
            if b.offset + b.compressed_len as u64 > table_offset {
                return Err(RlzError::Format("block extends into the tables".into()));
            }
        }
        for d in &doc_map {
            let blk = block_map
                .get(d.block as usize)
                .ok_or_else(|| RlzError::Format("document refers to a missing block".into()))?;
            if d.offset_in_block as u64 + d.length as u64 > blk.raw_len as u64 {
                return Err(RlzError::Format("document overruns its block".into()));
            }
        }
        Ok(BlockedReader {
            source,
            block_size,
            block_map,
            doc_map,
            file_len,
            inflated: AtomicU64::new(0),
        })
    }

    pub fn doc_count(&self) -> u64 {
        self.doc_map.len() as u64
    }

    pub fn block_count(&self) -> usize {
        self.block_map.len()
    }

    pub fn block_size(&self) -> u64 {
        self.block_size
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    pub fn source(&self) -> &R {
        &self.source
    }

    pub fn doc_entry(&self, doc_id: u64) -> Result<BlockedDocEntry> {
        usize::try_from(doc_id)
            .ok()
            .and_then(|i| self.doc_map.get(i).copied())
            .ok_or(RlzError::OutOfRange {
                id: doc_id,
                count: self.doc_count(),
            })
    }

    /// Total bytes inflated since the last reset.
    pub fn inflated_bytes(&self) -> u64 {
        self.inflated.load(Ordering::Relaxed)
    }

    pub fn reset_inflated(&self) {
        self.inflated.store(0, Ordering::Relaxed);
    }

    fn read_block(&self, block: usize) -> Result<Vec<u8>> {
        let b = self.block_map[block];
        let mut buf = vec![0u8; b.compressed_len as usize];
        self.source.read_exact_at(&mut buf, b.offset)?;
        Ok(buf)
    }

    /// Inflates the first `upto` bytes of `block`.
    fn inflate_prefix(&self, block: usize, upto: u64) -> Result<Vec<u8>> {
        let compressed = self.read_block(block)?;
        let mut out = Vec::with_capacity(upto as usize);
        ZlibDecoder::new(compressed.as_slice())
            .take(upto)
            .read_to_end(&mut out)
            .map_err(|e| RlzError::CorruptStream(format!("zlib block {block}: {e}")))?;
        if (out.len() as u64) < upto {
            return Err(RlzError::CorruptStream(format!(
                "block {block} inflated to {} bytes, needed {upto}",
                out.len()
            )));
        }
        self.inflated.fetch_add(out.len() as u64, Ordering::Relaxed);
        Ok(out)
    }

    pub fn get_document(&self, doc_id: u64) -> Result<Vec<u8>> {
        let d = self.doc_entry(doc_id)?;
        let start = d.offset_in_block as usize;
        let end = start + d.length as usize;
        let mut raw = self.inflate_prefix(d.block as usize, end as u64)?;
        raw.truncate(end);
        Ok(raw.split_off(start))
    }

    /// Every document in id order, inflating each block once.
    pub fn stream_all(&self) -> impl Iterator<Item = Result<Vec<u8>>> + '_ {
        let mut current: Option<(u32, Vec<u8>)> = None;
        self.doc_map.iter().map(move |d| {
            if current.as_ref().map(|(b, _)| *b) != Some(d.block) {
                let raw_len = self.block_map[d.block as usize].raw_len as u64;
                current = Some((d.block, self.inflate_prefix(d.block as usize, raw_len)?));
            }
            let (_, raw) = current.as_ref().unwrap();
            let start = d.offset_in_block as usize;
            Ok(raw[start..start + d.length as usize].to_vec())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::TracingSource;

    fn docs(n: usize, len: usize) -> Corpus {
        Corpus::from_documents((0..n).map(|i| vec![b'a' + i as u8; len]))
    }

    #[test]
    fn packing_rules() {
        assert_eq!(pack_blocks(&[10, 10, 10], 0), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(pack_blocks(&[10, 10, 10], 25), vec![(0, 2), (2, 3)]);
        assert_eq!(pack_blocks(&[20], 10), vec![(0, 1)]);
        assert_eq!(pack_blocks(&[3, 20, 3], 10), vec![(0, 1), (1, 2), (2, 3)]);
        assert!(pack_blocks(&[], 10).is_empty());
    }

    #[test]
    fn block_counts() {
        let c = docs(3, 10);
        assert_eq!(compress_blocked(&c, 0, 6).unwrap().blocks.len(), 3);
        assert_eq!(compress_blocked(&c, 25, 6).unwrap().blocks.len(), 2);
        let big = docs(1, 20);
        assert_eq!(compress_blocked(&big, 10, 6).unwrap().blocks.len(), 1);
        assert!(matches!(compress_blocked(&c, 0, 0), Err(RlzError::InvalidParams(_))));
        assert!(matches!(compress_blocked(&c, 0, 10), Err(RlzError::InvalidParams(_))));
    }

    #[test]
    fn round_trip_and_single_block_reads() {
        let c = Corpus::from_documents((0..40u32).map(|i| format!("document {i} {}", "x".repeat(i as usize * 37))));
        for bs in [0u64, 64, 4096, 1 << 20] {
            let bytes = compress_blocked(&c, bs, 6).unwrap().to_bytes();
            let r = BlockedReader::from_source(TracingSource::new(bytes)).unwrap();
            r.source().take_log();
            for i in 0..c.len() {
                assert_eq!(r.get_document(i as u64).unwrap(), c.document(i));
                assert_eq!(r.source().take_log().len(), 1);
            }
            let all: Vec<Vec<u8>> = r.stream_all().collect::<Result<_>>().unwrap();
            assert_eq!(all.concat(), c.data());
            assert!(matches!(r.get_document(c.len() as u64), Err(RlzError::OutOfRange { .. })));
        }
    }

    #[test]
    fn last_document_inflates_whole_block() {
        let c = docs(10, 100);
        let r = BlockedReader::from_source(compress_blocked(&c, 10_000, 6).unwrap().to_bytes()).unwrap();
        assert_eq!(r.block_count(), 1);
        r.get_document(9).unwrap();
        assert_eq!(r.inflated_bytes(), 1000);
        r.reset_inflated();
        r.get_document(0).unwrap();
        assert_eq!(r.inflated_bytes(), 100);
    }
}
