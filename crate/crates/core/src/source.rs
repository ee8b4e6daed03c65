//! Positional read access to archive files, with an optional tracing wrapper
//! that records every byte range fetched.

use std::fs::File;
use std::io;
use std::sync::Mutex;

/// Positioned reads that do not disturb any shared cursor, so one source can
/// serve concurrent readers.
pub trait ReadAt: Send + Sync {
    fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> io::Result<()>;
    fn source_len(&self) -> io::Result<u64>;
}

impl ReadAt for File {
    #[cfg(unix)]
    fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> io::Result<()> {
        std::os::unix::fs::FileExt::read_exact_at(self, buf, offset)
    }

    #[cfg(windows)]
    fn read_exact_at(&self, mut buf: &mut [u8], mut offset: u64) -> io::Result<()> {
        use std::os::windows::fs::FileExt;
        while !buf.is_empty() {
            match self.seek_read(buf, offset)? {
                0 => return Err(io::ErrorKind::UnexpectedEof.into()),
                n => {
                    buf = &mut buf[n..];
                    offset += n as u64;
                }
            }
        }
        Ok(())
    }

    fn source_len(&self) -> io::Result<u64> {
        Ok(self.metadata()?.len())
    }
}

impl ReadAt for Vec<u8> {
    fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> io::Result<()> {
        let start = usize::try_from(offset).map_err(|_| io::Error::from(io::ErrorKind::UnexpectedEof))?;
        let src = start
            .checked_add(buf.len())
            .and_then(|end| self.get(start..end))
            .ok_or_else(|| io::Error::from(io::ErrorKind::UnexpectedEof))?;
        buf.copy_from_slice(src);
        Ok(())
    }

    fn source_len(&self) -> io::Result<u64> {
        Ok(self.len() as u64)
    }
}

/// One fetched byte range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadRecord {
    pub offset: u64,
    pub len: u64,
}

/// Wraps a source and logs every read.
#[derive(Debug)]
pub struct TracingSource<R> {
    inner: R,
    log: Mutex<Vec<ReadRecord>>,
}

impl<R: ReadAt> TracingSource<R> {
    pub fn new(inner: R) -> Self {
        TracingSource {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Drains and returns the reads recorded so far.
    pub fn take_log(&self) -> Vec<ReadRecord> {
        std::mem::take(&mut *self.log.lock().unwrap())
    }

    pub fn bytes_read(&self) -> u64 {
        self.log.lock().unwrap().iter().map(|r| r.len).sum()
    }

    pub fn into_inner(self) -> R {
        self.inner
    }
}

impl<R: ReadAt> ReadAt for TracingSource<R> {
    fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> io::Result<()> {
        self.log.lock().unwrap().push(ReadRecord {
            offset,
            len: buf.len() as u64,
        });
        self.inner.read_exact_at(buf, offset)
    }

    fn source_len(&self) -> io::Result<u64> {
        self.inner.source_len()
    }
}
