//! Document collections held in memory as one concatenated byte string.
//!
//! Two on-disk layouts are accepted: a data file of concatenated documents
//! with a lengths file holding one decimal byte length per line, or a
//! directory whose files (in lexicographic name order) are the documents.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Result, RlzError};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    data: Vec<u8>,
    /// `ends[i]` is the exclusive end offset of document `i` in `data`.
    ends: Vec<usize>,
}

/// Where a corpus is read from.
#[derive(Debug, Clone)]
pub enum CorpusSource {
    Concatenated { data: PathBuf, lengths: PathBuf },
    Directory(PathBuf),
}

impl CorpusSource {
    pub fn load(&self) -> Result<Corpus> {
        match self {
            CorpusSource::Concatenated { data, lengths } => Corpus::load_concatenated(data, lengths),
            CorpusSource::Directory(dir) => Corpus::load_directory(dir),
        }
    }
}

impl Corpus {
    pub fn from_documents<I, D>(docs: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: AsRef<[u8]>,
    {
        let mut corpus = Corpus::default();
        for d in docs {
            corpus.push(d.as_ref());
        }
        corpus
    }

    pub fn push(&mut self, doc: &[u8]) {
        self.data.extend_from_slice(doc);
        self.ends.push(self.data.len());
    }

    pub fn load_concatenated(data_path: &Path, lengths_path: &Path) -> Result<Self> {
        let data = fs::read(data_path)?;
        let lengths = fs::read_to_string(lengths_path)?;
        let mut ends = Vec::new();
        let mut end = 0usize;
        for (lineno, line) in lengths.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let len: usize = line.parse().map_err(|_| {
                RlzError::Format(format!(
                    "{}:{}: not a byte length: {line:?}",
                    lengths_path.display(),
                    lineno + 1
                ))
            })?;
            end = end
                .checked_add(len)
                .ok_or_else(|| RlzError::Format("document lengths overflow".into()))?;
            ends.push(end);
        }
        if end != data.len() {
            return Err(RlzError::Format(format!(
                "lengths sum to {end} bytes but {} holds {} bytes",
                data_path.display(),
                data.len()
            )));
        }
        Ok(Corpus { data, ends })
    }

    pub fn load_directory(dir: &Path) -> Result<Self> {
        let mut paths = Vec::new();
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                paths.push(entry.path());
            }
        }
        paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
        let mut corpus = Corpus::default();
        for p in paths {
            corpus.push(&fs::read(p)?);
        }
        Ok(corpus)
    }

    pub fn write_concatenated(&self, data_path: &Path, lengths_path: &Path) -> Result<()> {
        fs::write(data_path, &self.data)?;
        let mut out = BufWriter::new(fs::File::create(lengths_path)?);
        for doc in self.documents() {
            writeln!(out, "{}", doc.len())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes one file per document, named so that lexicographic order is
    /// document order.
    pub fn write_directory(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let width = self.len().max(1).to_string().len();
        for (i, doc) in self.documents().enumerate() {
            fs::write(dir.join(format!("{i:0width$}.doc")), doc)?;
        }
        Ok(())
    }

    /// Number of documents.
    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    /// The whole collection as a single string.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn total_bytes(&self) -> usize {
        self.data.len()
    }

    pub fn document(&self, i: usize) -> &[u8] {
        let start = if i == 0 { 0 } else { self.ends[i - 1] };
        &self.data[start..self.ends[i]]
    }

    pub fn documents(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        (0..self.len()).map(move |i| self.document(i))
    }

    /// Documents `0..count` as a new corpus.
    pub fn prefix(&self, count: usize) -> Corpus {
        Corpus::from_documents(self.documents().take(count))
    }

    /// Reorders documents so that new document `i` is old document `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Corpus {
        Corpus::from_documents(order.iter().map(|&i| self.document(i)))
    }
}
