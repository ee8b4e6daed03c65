//! Measurement harness: compression statistics over an archive, timed
//! access patterns against either store, and CSV reporting.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{ArchiveReader, OpenOptions};
use crate::baseline::{compress_blocked, BlockedReader};
use crate::codec::Scheme;
use crate::corpus::Corpus;
use crate::dictionary::{sample_dictionary, write_dictionary};
use crate::error::{Result, RlzError};
use crate::factorize::{Coverage, IndexedDictionary};
use crate::pipeline::compress_to_path;
use crate::source::ReadAt;

/// Factor-length counts: one bucket for literals, then `[2^k, 2^(k+1))`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LengthHistogram {
    pub literal: u64,
    pub buckets: Vec<u64>,
}

impl LengthHistogram {
    pub fn add(&mut self, length: u32) {
        if length == 0 {
            self.literal += 1;
            return;
        }
        let k = (31 - length.leading_zeros()) as usize;
        if self.buckets.len() <= k {
            self.buckets.resize(k + 1, 0);
        }
        self.buckets[k] += 1;
    }

    pub fn total(&self) -> u64 {
        self.literal + self.buckets.iter().sum::<u64>()
    }

    /// Count for the bucket whose lower bound is `lo` (0 = literals).
    pub fn count_at(&self, lo: u64) -> u64 {
        if lo == 0 {
            return self.literal;
        }
        if !lo.is_power_of_two() {
            return 0;
        }
        self.buckets.get(lo.trailing_zeros() as usize).copied().unwrap_or(0)
    }

    pub fn rows(&self) -> Vec<HistogramRow> {
        std::iter::once(HistogramRow {
            bucket_lo: 0,
            count: self.literal,
        })
        .chain(self.buckets.iter().enumerate().map(|(k, &count)| HistogramRow {
            bucket_lo: 1u64 << k,
            count,
        }))
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bucket_lo: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub doc_count: u64,
    pub corpus_bytes: u64,
    pub archive_bytes: u64,
    pub dict_file_bytes: u64,
    /// Archive size as a percentage of the corpus.
    pub payload_ratio: Option<f64>,
    /// Archive plus dictionary file as a percentage of the corpus.
    pub total_ratio: Option<f64>,
    pub factor_count: u64,
    pub copy_factor_count: u64,
    pub avg_factor_len: Option<f64>,
    pub unused_pct: Option<f64>,
    pub histogram: LengthHistogram,
}

fn percent(part: u64, whole: u64) -> Option<f64> {
    (whole > 0).then(|| 100.0 * part as f64 / whole as f64)
}

/// One pass over every factor stream of the archive.
pub fn collect_stats<R: ReadAt>(reader: &ArchiveReader<R>) -> Result<Stats> {
    let dict = reader.dictionary();
    let mut coverage = Coverage::new(dict.len());
    let mut histogram = LengthHistogram::default();
    let (mut factor_count, mut copy_count, mut copy_bytes, mut corpus_bytes) = (0u64, 0u64, 0u64, 0u64);
    for (id, fdoc) in reader.stream_factors().enumerate() {
        let fdoc = fdoc?;
        let covered = fdoc.covered_len();
        if covered != fdoc.original_len {
            return Err(RlzError::CorruptStream(format!(
                "document {id}: factors cover {covered} of {} bytes",
                fdoc.original_len
            )));
        }
        corpus_bytes += fdoc.original_len;
        coverage.add(&fdoc.factors);
        for f in &fdoc.factors {
            factor_count += 1;
            histogram.add(f.length);
            if !f.is_literal() {
                copy_count += 1;
                copy_bytes += f.length as u64;
            }
        }
    }
    let archive_bytes = reader.file_len();
    let dict_file_bytes = dict.file_len();
    Ok(Stats {
        doc_count: reader.doc_count(),
        corpus_bytes,
        archive_bytes,
        dict_file_bytes,
        payload_ratio: percent(archive_bytes, corpus_bytes),
        total_ratio: percent(archive_bytes + dict_file_bytes, corpus_bytes),
        factor_count,
        copy_factor_count: copy_count,
        avg_factor_len: (copy_count > 0).then(|| copy_bytes as f64 / copy_count as f64),
        unused_pct: coverage.unused_pct(),
        histogram,
    })
}

/// Anything documents can be fetched from by id.
pub trait DocumentStore {
    fn doc_count(&self) -> u64;
    fn fetch(&self, doc_id: u64) -> Result<Vec<u8>>;
    fn stream(&self) -> Box<dyn Iterator<Item = Result<Vec<u8>>> + '_>;
}

impl<R: ReadAt> DocumentStore for ArchiveReader<R> {
    fn doc_count(&self) -> u64 {
        ArchiveReader::doc_count(self)
    }

    fn fetch(&self, doc_id: u64) -> Result<Vec<u8>> {
        self.get_document(doc_id)
    }

    fn stream(&self) -> Box<dyn Iterator<Item = Result<Vec<u8>>> + '_> {
        Box::new(self.stream_all())
    }
}

impl<R: ReadAt> DocumentStore for BlockedReader<R> {
    fn doc_count(&self) -> u64 {
        BlockedReader::doc_count(self)
    }

    fn fetch(&self, doc_id: u64) -> Result<Vec<u8>> {
        self.get_document(doc_id)
    }

    fn stream(&self) -> Box<dyn Iterator<Item = Result<Vec<u8>>> + '_> {
        Box::new(self.stream_all())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccessPattern {
    /// Documents in id order via a forward stream; `None` means all of them.
    Sequential { count: Option<u64> },
    /// Ids drawn uniformly with a seeded generator.
    UniformRandom { count: u64, seed: u64 },
    /// One decimal id per line.
    IdFile(PathBuf),
    IdList(Vec<u64>),
}

impl AccessPattern {
    /// Concrete request list for a store of `doc_count` documents. Every id
    /// is checked against the store size.
    pub fn ids(&self, doc_count: u64) -> Result<Vec<u64>> {
        let ids = match self {
            AccessPattern::Sequential { count } => {
                (0..count.map_or(doc_count, |c| c.min(doc_count))).collect()
            }
            AccessPattern::UniformRandom { count, seed } => {
                if doc_count == 0 && *count > 0 {
                    return Err(RlzError::InvalidParams("random pattern over an empty store".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count).map(|_| rng.gen_range(0..doc_count)).collect()
            }
            AccessPattern::IdFile(path) => read_id_file(path)?,
            AccessPattern::IdList(ids) => ids.clone(),
        };
        if let Some(&bad) = ids.iter().find(|&&id| id >= doc_count) {
            return Err(RlzError::OutOfRange {
                id: bad,
                count: doc_count,
            });
        }
        Ok(ids)
    }
}

pub fn read_id_file(path: &Path) -> Result<Vec<u64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim().parse::<u64>().map_err(|_| {
                RlzError::Format(format!("{}:{}: not a document id: {l:?}", path.display(), n + 1))
            })
        })
        .collect()
}

pub fn write_id_file(path: &Path, ids: &[u64]) -> Result<()> {
    let mut text = String::with_capacity(ids.len() * 8);
    for id in ids {
        text.push_str(&id.to_string());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    pub docs: u64,
    pub bytes: u64,
    pub wall: Duration,
}

impl TimingReport {
    pub fn docs_per_second(&self) -> f64 {
        let secs = self.wall.as_secs_f64();
        if secs > 0.0 {
            self.docs as f64 / secs
        } else {
            f64::INFINITY
        }
    }
}

/// Issues the pattern's requests in order and times them by wall clock.
/// Sequential patterns go through the store's forward stream.
pub fn run_access_pattern(store: &dyn DocumentStore, pattern: &AccessPattern) -> Result<TimingReport> {
    let (mut docs, mut bytes) = (0u64, 0u64);
    let start;
    match pattern {
        AccessPattern::Sequential { count } => {
            let limit = count.unwrap_or(u64::MAX);
            start = Instant::now();
            for doc in store.stream().take(limit.min(usize::MAX as u64) as usize) {
                bytes += doc?.len() as u64;
                docs += 1;
            }
        }
        _ => {
            let ids = pattern.ids(store.doc_count())?;
            start = Instant::now();
            for id in ids {
                bytes += store.fetch(id)?.len() as u64;
                docs += 1;
            }
        }
    }
    Ok(TimingReport {
        docs,
        bytes,
        wall: start.elapsed(),
    })
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub system: String,
    pub config: String,
    pub payload_ratio: Option<f64>,
    pub total_ratio: Option<f64>,
    pub sequential_docs_per_sec: Option<f64>,
    pub random_docs_per_sec: Option<f64>,
    pub avg_factor_len: Option<f64>,
    pub unused_pct: Option<f64>,
}

fn csv_err(e: csv::Error) -> RlzError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => RlzError::Io(io),
        other => RlzError::Format(format!("csv: {other:?}")),
    }
}

pub fn emit_report(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record([
            "system",
            "config",
            "payload_ratio",
            "total_ratio",
            "sequential_docs_per_sec",
            "random_docs_per_sec",
            "avg_factor_len",
            "unused_pct",
        ])
        .map_err(csv_err)?;
    }
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn write_histogram(hist: &LengthHistogram, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in hist.rows() {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_histogram(path: &Path) -> Result<Vec<HistogramRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Parameters for a full comparison run over one corpus.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub dict_size: usize,
    pub sample_size: usize,
    pub schemes: Vec<Scheme>,
    pub block_sizes: Vec<u64>,
    pub zlib_level: u32,
    pub pattern: AccessPattern,
    pub threads: usize,
    /// Directory receiving the dictionary and archives built during the run.
    pub workdir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<ReportRow>,
    /// Factor-length histogram of the dictionary's factorization; identical
    /// across schemes.
    pub histogram: LengthHistogram,
}

/// Builds the dictionary, one archive per scheme, and one blocked archive per
/// block size, then measures each.
pub fn run_sweep(corpus: &Corpus, cfg: &SweepConfig) -> Result<SweepResult> {
    fs::create_dir_all(&cfg.workdir)?;
    let corpus_bytes = corpus.total_bytes() as u64;
    let mut rows = Vec::new();
    let mut histogram = LengthHistogram::default();

    let dict = sample_dictionary(corpus, cfg.dict_size, cfg.sample_size)?;
    let dict_path = cfg.workdir.join("dict.rlzd");
    write_dictionary(&dict, &dict_path)?;
    let index = IndexedDictionary::new(dict);
    let dict = Arc::new(index.dictionary().clone());

    for (i, &scheme) in cfg.schemes.iter().enumerate() {
        let path = cfg.workdir.join(format!("rlz-{scheme}.rlza"));
        compress_to_path(corpus, &index, scheme, &path, cfg.threads)?;
        let reader = ArchiveReader::open(&path, dict.clone(), OpenOptions::default())?;
        let stats = collect_stats(&reader)?;
        if i == 0 {
            histogram = stats.histogram.clone();
        }
        let seq = run_access_pattern(&reader, &AccessPattern::Sequential { count: None })?;
        let rnd = run_access_pattern(&reader, &cfg.pattern)?;
        rows.push(ReportRow {
            system: "rlz".into(),
            config: format!("dict={} sample={} scheme={scheme}", cfg.dict_size, cfg.sample_size),
            payload_ratio: stats.payload_ratio,
            total_ratio: stats.total_ratio,
            sequential_docs_per_sec: Some(seq.docs_per_second()),
            random_docs_per_sec: Some(rnd.docs_per_second()),
            avg_factor_len: stats.avg_factor_len,
            unused_pct: stats.unused_pct,
        });
    }

    for &bs in &cfg.block_sizes {
        let path = cfg.workdir.join(format!("zlib-{bs}.rlzb"));
        compress_blocked(corpus, bs, cfg.zlib_level)?.write_to(&path)?;
        let reader = BlockedReader::open(&path)?;
        let seq = run_access_pattern(&reader, &AccessPattern::Sequential { count: None })?;
        let rnd = run_access_pattern(&reader, &cfg.pattern)?;
        let ratio = percent(reader.file_len(), corpus_bytes);
        rows.push(ReportRow {
            system: "zlib".into(),
            config: format!("block={bs}"),
            payload_ratio: ratio,
            total_ratio: ratio,
            sequential_docs_per_sec: Some(seq.docs_per_second()),
            random_docs_per_sec: Some(rnd.docs_per_second()),
            avg_factor_len: None,
            unused_pct: None,
        });
    }
    Ok(SweepResult { rows, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_buckets() {
        let mut h = LengthHistogram::default();
        for len in [0, 1, 2, 3, 4, 7, 8, 1000] {
            h.add(len);
        }
        assert_eq!(h.literal, 1);
        assert_eq!(h.count_at(1), 1);
        assert_eq!(h.count_at(2), 2);
        assert_eq!(h.count_at(4), 2);
        assert_eq!(h.count_at(8), 1);
        assert_eq!(h.count_at(512), 1);
        assert_eq!(h.total(), 8);
        let rows = h.rows();
        assert_eq!(rows[0], HistogramRow { bucket_lo: 0, count: 1 });
        assert_eq!(rows.iter().map(|r| r.count).sum::<u64>(), 8);
    }

    #[test]
    fn pattern_ids() {
        assert_eq!(
            AccessPattern::Sequential { count: None }.ids(3).unwrap(),
            vec![0, 1, 2]
        );
        let r = AccessPattern::UniformRandom { count: 50, seed: 7 };
        let a = r.ids(10).unwrap();
        assert_eq!(a, r.ids(10).unwrap());
        assert!(a.iter().all(|&id| id < 10));
        assert_ne!(a, AccessPattern::UniformRandom { count: 50, seed: 8 }.ids(10).unwrap());
        assert!(matches!(
            AccessPattern::IdList(vec![0, 5]).ids(5),
            Err(RlzError::OutOfRange { id: 5, count: 5 })
        ));
    }

    #[test]
    fn id_file_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("ids.txt");
        write_id_file(&p, &[2, 0, 2, 1]).unwrap();
        assert_eq!(AccessPattern::IdFile(p.clone()).ids(3).unwrap(), vec![2, 0, 2, 1]);
        fs::write(&p, "1\nfoo\n").unwrap();
        assert!(matches!(read_id_file(&p), Err(RlzError::Format(_))));
    }

    #[test]
    fn report_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("report.csv");
        let rows = vec![
            ReportRow {
                system: "rlz".into(),
                config: "dict=4096 sample=1024 scheme=zz".into(),
                payload_ratio: Some(12.345678901234),
                total_ratio: Some(13.0),
                sequential_docs_per_sec: Some(1.0e5 / 3.0),
                random_docs_per_sec: Some(999.5),
                avg_factor_len: Some(37.25),
                unused_pct: Some(0.1),
            },
            ReportRow {
                system: "zlib".into(),
                config: "block=0".into(),
                payload_ratio: Some(24.13),
                total_ratio: Some(24.13),
                sequential_docs_per_sec: Some(6263.0),
                random_docs_per_sec: Some(96.0),
                avg_factor_len: None,
                unused_pct: None,
            },
        ];
        emit_report(&rows, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(
            "system,config,payload_ratio,total_ratio,sequential_docs_per_sec,random_docs_per_sec,avg_factor_len,unused_pct\n"
        ));
        assert_eq!(read_report(&p).unwrap(), rows);

        let mut h = LengthHistogram::default();
        h.add(0);
        h.add(5);
        let hp = tmp.path().join("hist.csv");
        write_histogram(&h, &hp).unwrap();
        assert_eq!(read_histogram(&hp).unwrap(), h.rows());
    }
}
