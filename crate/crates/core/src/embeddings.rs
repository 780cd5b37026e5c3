//! Word embedding storage and the cosine similarity used throughout the crate.
//!
//! Two on-disk layouts are supported. The text layout is a header line
//! `n d` followed by one `word f1 ... fd` line per entry. The binary layout
//! has the same header line, then each entry is the word, a single space and
//! `d` little-endian `f32` values, optionally followed by a newline.
//!
//! Vectors are held as `f64`. Values read from a binary file widen exactly,
//! and text values are written with the shortest representation that parses
//! back to the same bits, so a text save/load cycle is lossless.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed header: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension { line: usize, expected: usize, found: usize },
    #[error("line {line}: non-finite value {value:?}")]
    NonFinite { line: usize, value: String },
    #[error("line {line}: cannot parse {value:?} as a number")]
    Parse { line: usize, value: String },
    #[error("line {line}: {msg}")]
    Entry { line: usize, msg: String },
    #[error("expected {expected} entries, file ended after {found}")]
    Truncated { expected: usize, found: usize },
    #[error("embedding store must contain at least one word")]
    Empty,
    #[error("vector dimension must be positive")]
    ZeroDimension,
    #[error("cosine similarity is undefined for zero-norm vectors")]
    ZeroNorm,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

/// On-disk embedding layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Binary,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "text" | "txt" => Ok(Format::Text),
            "binary" | "bin" => Ok(Format::Binary),
            other => Err(format!("unknown embedding format {other:?}")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Text => f.write_str("text"),
            Format::Binary => f.write_str("binary"),
        }
    }
}

/// Bookkeeping produced while loading a store.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Entry count announced by the header.
    pub declared: usize,
    /// Entries dropped because their word was already present.
    pub duplicates: usize,
}

/// Vocabulary plus a dense row-major `n x d` matrix.
///
/// The store never changes after construction. Rows are stored exactly as
/// given; consumers that need unit vectors normalize their own copies.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f64>,
    dim: usize,
}

impl EmbeddingStore {
    /// Builds a store from `(word, vector)` rows. Later duplicates of a word
    /// are dropped and counted in the report.
    pub fn from_rows<I, S>(dim: usize, rows: I) -> Result<(Self, LoadReport)>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        let mut builder = Builder::new(dim);
        for (line, (word, vector)) in rows.into_iter().enumerate() {
            if vector.len() != dim {
                return Err(EmbeddingError::Dimension {
                    line: line + 1,
                    expected: dim,
                    found: vector.len(),
                });
            }
            if let Some(v) = vector.iter().find(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite {
                    line: line + 1,
                    value: v.to_string(),
                });
            }
            builder.push(word.into(), &vector);
        }
        let declared = builder.seen;
        Ok(builder.finish(declared))
    }

    pub fn load(path: impl AsRef<Path>, format: Format) -> Result<(Self, LoadReport)> {
        let mut reader = BufReader::new(File::open(path)?);
        match format {
            Format::Text => Self::read_text(&mut reader),
            Format::Binary => Self::read_binary(&mut reader),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: Format) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        match format {
            Format::Text => self.write_text(&mut writer)?,
            Format::Binary => self.write_binary(&mut writer)?,
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: &mut R) -> Result<(Self, LoadReport)> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => {
                return Err(EmbeddingError::Header {
                    line: 1,
                    msg: "empty file".into(),
                })
            }
        };
        let (n, dim) = parse_header(&header)?;
        let mut builder = Builder::new(dim);

        for (offset, line) in lines.enumerate() {
            let line_no = offset + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if builder.seen == n {
                return Err(EmbeddingError::Entry {
                    line: line_no,
                    msg: format!("more entries than the {n} declared in the header"),
                });
            }
            let mut fields = line.split_ascii_whitespace();
            let word = fields.next().expect("non-empty line has a field");
            let mut vector = Vec::with_capacity(dim);
            for field in fields {
                let value: f64 = field.parse().map_err(|_| EmbeddingError::Parse {
                    line: line_no,
                    value: field.to_string(),
                })?;
                if !value.is_finite() {
                    return Err(EmbeddingError::NonFinite {
                        line: line_no,
                        value: field.to_string(),
                    });
                }
                vector.push(value);
            }
            if vector.len() != dim {
                return Err(EmbeddingError::Dimension {
                    line: line_no,
                    expected: dim,
                    found: vector.len(),
                });
            }
            builder.push(word.to_string(), &vector);
        }

        if builder.seen < n {
            return Err(EmbeddingError::Truncated {
                expected: n,
                found: builder.seen,
            });
        }
        Ok(builder.finish(n))
    }

    /// Reads the packed binary layout. Line numbers in errors count entries,
    /// with the header as line 1.
    pub fn read_binary<R: BufRead>(reader: &mut R) -> Result<(Self, LoadReport)> {
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let (n, dim) = parse_header(header.trim_end())?;
        let mut builder = Builder::new(dim);
        let mut raw = vec![0u8; dim * 4];
        let mut vector = vec![0f64; dim];

        for entry in 0..n {
            let line_no = entry + 2;
            let mut word = Vec::new();
            // Entries may be separated by a newline after the float block.
            loop {
                let mut byte = [0u8; 1];
                if reader.read(&mut byte)? == 0 {
                    return Err(EmbeddingError::Truncated {
                        expected: n,
                        found: entry,
                    });
                }
                match byte[0] {
                    b' ' => break,
                    b'\n' if word.is_empty() => continue,
                    b => word.push(b),
                }
            }
            let word = String::from_utf8(word).map_err(|_| EmbeddingError::Entry {
                line: line_no,
                msg: "word is not valid UTF-8".into(),
            })?;
            reader.read_exact(&mut raw).map_err(|e| match e.kind() {
                io::ErrorKind::UnexpectedEof => EmbeddingError::Truncated {
                    expected: n,
                    found: entry,
                },
                _ => EmbeddingError::Io(e),
            })?;
            for (slot, chunk) in vector.iter_mut().zip(raw.chunks_exact(4)) {
                let value = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
                if !value.is_finite() {
                    return Err(EmbeddingError::NonFinite {
                        line: line_no,
                        value: value.to_string(),
                    });
                }
                *slot = f64::from(value);
            }
            builder.push(word, &vector);
        }
        Ok(builder.finish(n))
    }

    pub fn write_text<W: Write>(&self, writer: &mut W) -> io::Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            writer.write_all(word.as_bytes())?;
            for value in self.row(i) {
                write!(writer, " {value}")?;
            }
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Writes the packed binary layout. Values are narrowed to `f32`.
    pub fn write_binary<W: Write>(&self, writer: &mut W) -> io::Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            writer.write_all(word.as_bytes())?;
            writer.write_all(b" ")?;
            for &value in self.row(i) {
                writer.write_all(&(value as f32).to_le_bytes())?;
            }
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    /// The stored vector of `word`, if present.
    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

struct Builder {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f64>,
    seen: usize,
    duplicates: usize,
}

impl Builder {
    fn new(dim: usize) -> Self {
        Builder {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            matrix: Vec::new(),
            seen: 0,
            duplicates: 0,
        }
    }

    fn push(&mut self, word: String, vector: &[f64]) {
        debug_assert_eq!(vector.len(), self.dim);
        self.seen += 1;
        if self.index.contains_key(&word) {
            self.duplicates += 1;
            return;
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.matrix.extend_from_slice(vector);
    }

    fn finish(self, declared: usize) -> (EmbeddingStore, LoadReport) {
        (
            EmbeddingStore {
                words: self.words,
                index: self.index,
                matrix: self.matrix,
                dim: self.dim,
            },
            LoadReport {
                declared,
                duplicates: self.duplicates,
            },
        )
    }
}

fn parse_header(header: &str) -> Result<(usize, usize)> {
    let bad = |msg: &str| EmbeddingError::Header {
        line: 1,
        msg: msg.to_string(),
    };
    let mut fields = header.split_ascii_whitespace();
    let n: usize = fields
        .next()
        .ok_or_else(|| bad("missing word count"))?
        .parse()
        .map_err(|_| bad("word count is not an integer"))?;
    let dim: usize = fields
        .next()
        .ok_or_else(|| bad("missing dimension"))?
        .parse()
        .map_err(|_| bad("dimension is not an integer"))?;
    if fields.next().is_some() {
        return Err(bad("expected exactly two fields"));
    }
    if n == 0 {
        return Err(EmbeddingError::Empty);
    }
    if dim == 0 {
        return Err(EmbeddingError::ZeroDimension);
    }
    Ok((n, dim))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity of two nonzero vectors of equal length.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(EmbeddingError::DimensionMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Elementwise `a + b`.
pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Elementwise `a - b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
