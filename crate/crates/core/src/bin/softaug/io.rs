use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use softaug::Error;

pub fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Buffered file, or stdout when `path` is `None`.
pub struct Output {
    inner: BufWriter<Box<dyn Write>>,
    path: PathBuf,
}

impl Output {
    pub fn create(path: Option<&Path>) -> Result<Self, Error> {
        let (inner, path): (Box<dyn Write>, PathBuf) = match path {
            Some(p) => (
                Box::new(File::create(p).map_err(|e| Error::io(p, e))?),
                p.to_path_buf(),
            ),
            None => (Box::new(io::stdout()), PathBuf::from("<stdout>")),
        };
        Ok(Output {
            inner: BufWriter::new(inner),
            path,
        })
    }

    pub fn write_all(&mut self, bytes: &[u8]) -> Result<(), Error> {
        self.inner
            .write_all(bytes)
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn with<F>(&mut self, f: F) -> Result<(), Error>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        f(&mut self.inner).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), Error> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Lines of a UTF-8 file without their terminators. Invalid UTF-8 is
/// reported with the byte offset of the first bad byte.
pub struct Lines {
    reader: BufReader<File>,
    path: PathBuf,
    offset: usize,
    line: usize,
    buf: Vec<u8>,
}

impl Lines {
    pub fn open(path: &Path) -> Result<Self, Error> {
        Ok(Lines {
            reader: open(path)?,
            path: path.to_path_buf(),
            offset: 0,
            line: 0,
            buf: Vec::new(),
        })
    }
}

impl Iterator for Lines {
    type Item = Result<String, Error>;

    fn next(&mut self) -> Option<Self::Item> {
        self.buf.clear();
        let n = match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => return None,
            Ok(n) => n,
            Err(e) => return Some(Err(Error::io(&self.path, e))),
        };
        let start = self.offset;
        self.offset += n;
        self.line += 1;
        if self.buf.last() == Some(&b'\n') {
            self.buf.pop();
            if self.buf.last() == Some(&b'\r') {
                self.buf.pop();
            }
        }
        Some(match std::str::from_utf8(&self.buf) {
            Ok(s) => Ok(s.to_string()),
            Err(e) => Err(Error::Parse {
                path: self.path.display().to_string(),
                line: self.line,
                msg: Error::Utf8 {
                    offset: start + e.valid_up_to(),
                }
                .to_string(),
            }),
        })
    }
}
