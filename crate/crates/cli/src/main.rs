use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use rlz::archive::{ArchiveReader, OpenOptions};
use rlz::baseline::{compress_blocked, BlockedReader};
use rlz::bench::{collect_stats, emit_report, run_sweep, write_histogram, AccessPattern, SweepConfig};
use rlz::dictionary::DEFAULT_SAMPLE_SIZE;
use rlz::pipeline::compress_to_path;
use rlz::{
    extend_dictionary, read_dictionary, sample_dictionary, write_dictionary, Corpus, CorpusSource,
    IndexedDictionary, Result, RlzError, Scheme,
};

/// Relative Lempel-Ziv corpus compression with random document access.
#[derive(Parser)]
#[command(name = "rlz", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CorpusArgs {
    /// Data file of concatenated documents.
    #[arg(long, requires = "lengths", conflicts_with = "corpus_dir")]
    corpus: Option<PathBuf>,
    /// One decimal byte length per line, one line per document.
    #[arg(long, requires = "corpus")]
    lengths: Option<PathBuf>,
    /// Directory whose files, in name order, are the documents.
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        let source = match (&self.corpus, &self.lengths, &self.corpus_dir) {
            (Some(data), Some(lengths), None) => CorpusSource::Concatenated {
                data: data.clone(),
                lengths: lengths.clone(),
            },
            (None, None, Some(dir)) => CorpusSource::Directory(dir.clone()),
            _ => {
                return Err(RlzError::InvalidParams(
                    "give either --corpus with --lengths, or --corpus-dir".into(),
                ))
            }
        };
        source.load()
    }
}

#[derive(Args)]
struct ReadArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Accept a dictionary extended from the one the archive was built with.
    #[arg(long)]
    allow_extended_dict: bool,
}

impl ReadArgs {
    fn open(&self) -> Result<ArchiveReader> {
        let dict = Arc::new(read_dictionary(&self.dict)?);
        ArchiveReader::open(
            &self.archive,
            dict,
            OpenOptions {
                allow_extended_dict: self.allow_extended_dict,
            },
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dictionary from a corpus.
    BuildDict {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        dict_size: usize,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
        sample_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append samples of new documents to an existing dictionary.
    ExtendDict {
        #[arg(long)]
        dict: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Bytes to add.
        #[arg(long)]
        dict_size: usize,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
        sample_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Factorize and encode a corpus against a dictionary.
    Compress {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long, default_value = "zz", value_parser = parse_scheme)]
        scheme: Scheme,
        #[arg(long)]
        out: PathBuf,
        /// Encoder threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Print one document.
    Get {
        #[command(flatten)]
        read: ReadArgs,
        #[arg(long)]
        doc_id: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print every document in order.
    Cat {
        #[command(flatten)]
        read: ReadArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compression ratio, factor length and dictionary usage statistics.
    Stats {
        #[command(flatten)]
        read: ReadArgs,
        /// Write the factor-length histogram as CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Compare RLZ against the blocked zlib baseline and write a CSV report.
    ///
    /// Drop the page cache between runs externally if cold-cache numbers are
    /// wanted, e.g. `sync && echo 3 > /proc/sys/vm/drop_caches` as root.
    Bench {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        dict_size: usize,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
        sample_size: usize,
        /// Only this scheme (default: all four).
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        /// Only this block size (default: 0, 0.1, 0.2, 0.5 and 1.0 MB).
        #[arg(long)]
        block_size: Option<u64>,
        /// sequential, random, or file:PATH
        #[arg(long, default_value = "random")]
        pattern: String,
        #[arg(long, default_value_t = 1000)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, default_value_t = 6)]
        level: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Build a blocked zlib archive.
    BaselineCompress {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Uncompressed bytes per block; 0 puts each document in its own block.
        #[arg(long, default_value_t = 0)]
        block_size: u64,
        #[arg(long, default_value_t = 6)]
        level: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print one document from a blocked zlib archive.
    BaselineGet {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        doc_id: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: RlzError| e.to_string())
}

fn parse_pattern(s: &str, count: u64, seed: u64) -> Result<AccessPattern> {
    match s {
        "sequential" => Ok(AccessPattern::Sequential { count: Some(count) }),
        "random" => Ok(AccessPattern::UniformRandom { count, seed }),
        _ => match s.strip_prefix("file:") {
            Some(path) => Ok(AccessPattern::IdFile(PathBuf::from(path))),
            None => Err(RlzError::InvalidParams(format!(
                "unknown pattern {s:?} (expected sequential, random or file:PATH)"
            ))),
        },
    }
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

const BLOCK_SWEEP: [u64; 5] = [0, 100_000, 200_000, 500_000, 1_000_000];

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildDict {
            corpus,
            dict_size,
            sample_size,
            out,
        } => {
            let dict = sample_dictionary(&corpus.load()?, dict_size, sample_size)?;
            write_dictionary(&dict, &out)?;
            eprintln!("dictionary: {} bytes, checksum {:#018x}", dict.len(), dict.checksum());
        }
        Command::ExtendDict {
            dict,
            corpus,
            dict_size,
            sample_size,
            out,
        } => {
            let base = read_dictionary(&dict)?;
            let ext = extend_dictionary(&base, &corpus.load()?, dict_size, sample_size)?;
            write_dictionary(&ext, &out)?;
            eprintln!("dictionary: {} -> {} bytes", base.len(), ext.len());
        }
        Command::Compress {
            corpus,
            dict,
            scheme,
            out,
            threads,
        } => {
            let corpus = corpus.load()?;
            let index = IndexedDictionary::new(read_dictionary(&dict)?);
            compress_to_path(&corpus, &index, scheme, &out, threads)?;
        }
        Command::Get { read, doc_id, out } => {
            let reader = read.open()?;
            let doc = reader.get_document(doc_id)?;
            let mut w = output(out.as_deref())?;
            w.write_all(&doc)?;
            w.flush()?;
        }
        Command::Cat { read, out } => {
            let reader = read.open()?;
            let mut w = output(out.as_deref())?;
            for doc in reader.stream_all() {
                w.write_all(&doc?)?;
            }
            w.flush()?;
        }
        Command::Stats { read, histogram } => {
            let stats = collect_stats(&read.open()?)?;
            if let Some(path) = histogram {
                write_histogram(&stats.histogram, &path)?;
            }
            let mut w = output(None)?;
            writeln!(w, "documents: {}", stats.doc_count)?;
            writeln!(w, "corpus_bytes: {}", stats.corpus_bytes)?;
            writeln!(w, "archive_bytes: {}", stats.archive_bytes)?;
            writeln!(w, "dict_file_bytes: {}", stats.dict_file_bytes)?;
            writeln!(w, "payload_ratio: {}", fmt_opt(stats.payload_ratio))?;
            writeln!(w, "total_ratio: {}", fmt_opt(stats.total_ratio))?;
            writeln!(w, "factors: {}", stats.factor_count)?;
            writeln!(w, "copy_factors: {}", stats.copy_factor_count)?;
            writeln!(w, "avg_factor_len: {}", fmt_opt(stats.avg_factor_len))?;
            writeln!(w, "unused_pct: {}", fmt_opt(stats.unused_pct))?;
            w.flush()?;
        }
        Command::Bench {
            corpus,
            dict_size,
            sample_size,
            scheme,
            block_size,
            pattern,
            count,
            seed,
            threads,
            level,
            out,
            histogram,
        } => {
            let corpus = corpus.load()?;
            let workdir = tempfile::tempdir()?;
            let cfg = SweepConfig {
                dict_size,
                sample_size,
                schemes: scheme.map_or_else(|| Scheme::ALL.to_vec(), |s| vec![s]),
                block_sizes: block_size.map_or_else(|| BLOCK_SWEEP.to_vec(), |b| vec![b]),
                zlib_level: level,
                pattern: parse_pattern(&pattern, count, seed)?,
                threads,
                workdir: workdir.path().to_path_buf(),
            };
            let result = run_sweep(&corpus, &cfg)?;
            emit_report(&result.rows, &out)?;
            if let Some(path) = histogram {
                write_histogram(&result.histogram, &path)?;
            }
            for row in &result.rows {
                eprintln!(
                    "{:<5} {:<40} total {:>8}%  seq {:>12} docs/s  random {:>12} docs/s",
                    row.system,
                    row.config,
                    fmt_opt(row.total_ratio),
                    fmt_opt(row.sequential_docs_per_sec),
                    fmt_opt(row.random_docs_per_sec)
                );
            }
        }
        Command::BaselineCompress {
            corpus,
            block_size,
            level,
            out,
        } => {
            compress_blocked(&corpus.load()?, block_size, level)?.write_to(&out)?;
        }
        Command::BaselineGet { archive, doc_id, out } => {
            let doc = BlockedReader::open(&archive)?.get_document(doc_id)?;
            let mut w = output(out.as_deref())?;
            w.write_all(&doc)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RlzError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rlz: {e}");
            ExitCode::from(1)
        }
    }
}
