//! End-to-end compression: factorize and encode documents in parallel, then
//! hand them to the archive writer strictly in document order.

use std::io::{Seek, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::archive::ArchiveWriter;
use crate::codec::{encode_document, EncodedDocument, Scheme};
use crate::corpus::Corpus;
use crate::error::{Result, RlzError};
use crate::factorize::IndexedDictionary;

/// Documents encoded per parallel batch before being written out.
const BATCH: usize = 256;

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RlzError::InvalidParams(format!("thread pool: {e}")))
}

/// Encodes every document of `corpus` and appends it to `writer` in order.
/// `threads == 0` uses rayon's default parallelism; `1` runs inline.
pub fn encode_corpus<W: Write + Seek>(
    corpus: &Corpus,
    index: &IndexedDictionary,
    writer: &mut ArchiveWriter<W>,
    threads: usize,
) -> Result<()> {
    let scheme = writer.scheme();
    let encode = |doc: &[u8]| encode_document(&index.factorize(doc), scheme);
    if threads == 1 {
        for doc in corpus.documents() {
            writer.append_document(&encode(doc))?;
        }
        return Ok(());
    }
    let pool = pool(threads)?;
    let docs: Vec<&[u8]> = corpus.documents().collect();
    for chunk in docs.chunks(BATCH) {
        let encoded: Vec<EncodedDocument> =
            pool.install(|| chunk.par_iter().map(|d| encode(d)).collect());
        for enc in &encoded {
            writer.append_document(enc)?;
        }
    }
    Ok(())
}

/// Writes a finalized archive of `corpus` to `path`.
pub fn compress_to_path(
    corpus: &Corpus,
    index: &IndexedDictionary,
    scheme: Scheme,
    path: &Path,
    threads: usize,
) -> Result<()> {
    let mut writer = ArchiveWriter::create(path, index.dictionary(), scheme)?;
    encode_corpus(corpus, index, &mut writer, threads)?;
    writer.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::sample_dictionary;
    use std::io::Cursor;

    #[test]
    fn parallel_output_matches_sequential() {
        let docs: Vec<Vec<u8>> = (0..700u32)
            .map(|i| format!("<doc id={i}> shared boilerplate {} tail {}", i % 13, i * 7).into_bytes())
            .collect();
        let corpus = Corpus::from_documents(&docs);
        let index = IndexedDictionary::new(sample_dictionary(&corpus, 2048, 64).unwrap());
        let run = |threads| {
            let mut w = ArchiveWriter::new(Cursor::new(Vec::new()), index.dictionary().checksum(), Scheme::ZZ).unwrap();
            encode_corpus(&corpus, &index, &mut w, threads).unwrap();
            w.finalize().unwrap();
            w.into_inner().into_inner()
        };
        let seq = run(1);
        assert_eq!(run(4), seq);
        assert_eq!(run(0), seq);
    }
}
