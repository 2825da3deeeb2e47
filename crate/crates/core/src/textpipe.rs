//! Question cleaning, tokenization and pre-trained embedding lookup.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::scalar::Scalar;

/// Width of the GloVe vectors the classifiers are built for.
pub const GLOVE_DIM: usize = 300;

fn is_kept(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '\'' || c == '?'
}

/// Lowercases `raw`, turns every character outside `[a-z0-9'?]` into a
/// separator, detaches `?` as its own token and splits on whitespace.
pub fn clean_and_tokenize(raw: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(raw.len() + 8);
    for c in raw.chars().flat_map(char::to_lowercase) {
        match c {
            '?' => cleaned.push_str(" ? "),
            c if is_kept(c) => cleaned.push(c),
            _ => cleaned.push(' '),
        }
    }
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// Word → vector map with a fixed dimension.
#[derive(Debug)]
pub struct EmbeddingTable<T> {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<T>,
    oov: AtomicUsize,
}

impl<T: Clone> Clone for EmbeddingTable<T> {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            index: self.index.clone(),
            data: self.data.clone(),
            oov: AtomicUsize::new(self.oov.load(Ordering::Relaxed)),
        }
    }
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            index: HashMap::new(),
            data: Vec::new(),
            oov: AtomicUsize::new(0),
        }
    }

    /// Inserts or replaces `word`'s vector; returns `true` when it replaced one.
    pub fn insert(&mut self, word: &str, vector: &[T]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::shape(
                "EmbeddingTable::insert",
                format!("dimension {}", self.dim),
                format!("vector of length {}", vector.len()),
            ));
        }
        if let Some(&slot) = self.index.get(word) {
            self.data[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(vector);
            return Ok(true);
        }
        self.index.insert(word.to_owned(), self.index.len());
        self.data.extend_from_slice(vector);
        Ok(false)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct words.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[T]> {
        self.index
            .get(word)
            .map(|&slot| &self.data[slot * self.dim..(slot + 1) * self.dim])
    }

    /// Out-of-vocabulary lookups performed by [`embed`] so far.
    pub fn oov_count(&self) -> usize {
        self.oov.load(Ordering::Relaxed)
    }

    pub fn reset_oov_count(&self) {
        self.oov.store(0, Ordering::Relaxed);
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }
}

/// Reads a GloVe text file of [`GLOVE_DIM`]-wide vectors.
pub fn load_glove<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingTable<T>> {
    load_glove_dim(path, GLOVE_DIM)
}

/// Reads `word v1 … v_dim` lines. A repeated word keeps its last vector.
pub fn load_glove_dim<T: Scalar>(path: impl AsRef<Path>, dim: usize) -> Result<EmbeddingTable<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::with_capacity(1 << 20, file);
    let mut table = EmbeddingTable::new(dim);
    let mut values: Vec<T> = Vec::with_capacity(dim);
    let mut lines = 0usize;
    for (n, line) in reader.split(b'\n').enumerate() {
        let lineno = n + 1;
        let bytes = line.map_err(|e| Error::io(path, e))?;
        let line = String::from_utf8_lossy(&bytes);
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        lines += 1;
        let mut fields = line.split(' ');
        let word = fields.next().unwrap_or_default();
        values.clear();
        for field in fields {
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            values.push(T::of(v));
        }
        if values.len() != dim || word.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("expected a word followed by {dim} values, found {} values", values.len()),
            });
        }
        if table.insert(word, &values)? {
            warn!("{}:{lineno}: duplicate entry for {word:?}, keeping the later vector", path.display());
        }
    }
    if lines == 0 {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
            message: "no embeddings found".into(),
        });
    }
    Ok(table)
}

/// Looks up each token; unknown tokens map to the zero vector and bump the
/// table's OOV counter.
pub fn embed<T: Scalar, S: AsRef<str>>(table: &EmbeddingTable<T>, tokens: &[S]) -> Vec<Vector<T>> {
    tokens
        .iter()
        .map(|tok| match table.get(tok.as_ref()) {
            Some(v) => Vector::from_vec(v.to_vec()),
            None => {
                table.oov.fetch_add(1, Ordering::Relaxed);
                Vector::zeros(table.dim)
            }
        })
        .collect()
}
