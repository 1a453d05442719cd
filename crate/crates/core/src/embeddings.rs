//! Token- and text-level vector sources.
//!
//! Two whitespace-delimited text formats are read here:
//!
//! * word vectors: `token v1 v2 ... vD` per line (GloVe text format),
//! * precomputed text embeddings: `record-id v1 v2 ... vD` per line.
//!
//! All values are kept as `f64`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{fold_case, normalize_text, NormalizeOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EmbeddingSource {
    WordTable,
    Precomputed,
    Pseudo,
}

/// Dense `key -> vector` table with a fixed dimension, preserving file order.
#[derive(Debug, Clone, PartialEq)]
struct VectorTable {
    dim: usize,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
}

impl VectorTable {
    fn get(&self, key: &str) -> Option<&[f64]> {
        self.index
            .get(key)
            .map(|&i| &self.values[i * self.dim..(i + 1) * self.dim])
    }

    fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.keys
            .iter()
            .zip(self.values.chunks_exact(self.dim))
            .map(|(k, v)| (k.as_str(), v))
    }

    fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut table: Option<VectorTable> = None;
        for (index, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = index + 1;
            let mut fields = line.split_whitespace();
            let Some(key) = fields.next() else {
                continue;
            };
            let row = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("unparseable value {f:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let table = table.get_or_insert_with(|| VectorTable {
                dim: row.len(),
                keys: Vec::new(),
                index: HashMap::new(),
                values: Vec::new(),
            });
            if row.is_empty() || row.len() != table.dim {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} values", table.dim.max(1)),
                });
            }
            if table
                .index
                .insert(key.to_string(), table.keys.len())
                .is_some()
            {
                return Err(Error::DuplicateId(key.to_string()));
            }
            table.keys.push(key.to_string());
            table.values.extend(row);
        }
        table.ok_or(Error::EmptyVectorFile)
    }

    fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (key, vector) in self.iter() {
            write!(out, "{key}")?;
            for v in vector {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Token embeddings, e.g. a GloVe table.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable(VectorTable);

impl WordVectorTable {
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn len(&self) -> usize {
        self.0.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.keys.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.0.get(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.0.iter()
    }

    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(Error::Config("vector dimension must be positive".into()));
        }
        let mut table = VectorTable {
            dim,
            keys: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
        };
        for (token, vector) in entries {
            let token = token.into();
            if token.is_empty() {
                return Err(Error::Config("empty token".into()));
            }
            if vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: vector.len(),
                });
            }
            if table
                .index
                .insert(token.clone(), table.keys.len())
                .is_some()
            {
                return Err(Error::DuplicateId(token));
            }
            table.keys.push(token);
            table.values.extend(vector);
        }
        Ok(WordVectorTable(table))
    }

    /// A synthetic table giving every token in `vocabulary` a pseudo-random unit vector.
    pub fn pseudo<I, S>(vocabulary: I, dim: usize, seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokens: Vec<String> = vocabulary
            .into_iter()
            .map(|t| t.as_ref().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        tokens.sort();
        tokens.dedup();
        let entries: Vec<(String, Vec<f64>)> = tokens
            .into_iter()
            .map(|t| {
                let v = pseudo_embed(&t, dim, seed);
                (t, v)
            })
            .collect();
        Self::from_entries(dim, entries)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        self.0.write(out)
    }
}

/// Parses a word-vector file; the dimension is taken from the first line.
pub fn load_word_vectors<R: BufRead>(reader: R) -> Result<WordVectorTable> {
    VectorTable::parse(reader).map(WordVectorTable)
}

pub fn load_word_vectors_file(path: &Path) -> Result<WordVectorTable> {
    let file = std::fs::File::open(path)?;
    load_word_vectors(std::io::BufReader::new(file))
}

/// Per-record text embeddings produced by an external encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedTextEmbeddings(VectorTable);

impl PrecomputedTextEmbeddings {
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn len(&self) -> usize {
        self.0.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.keys.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&[f64]> {
        self.0
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        self.0.write(out)
    }
}

pub fn load_precomputed<R: BufRead>(reader: R) -> Result<PrecomputedTextEmbeddings> {
    VectorTable::parse(reader).map(PrecomputedTextEmbeddings)
}

pub fn load_precomputed_file(path: &Path) -> Result<PrecomputedTextEmbeddings> {
    let file = std::fs::File::open(path)?;
    load_precomputed(std::io::BufReader::new(file))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    fn next_signed(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

/// Deterministic unit-norm embedding: the normalized sum of one hashed
/// random vector per case-folded whitespace token.
///
/// # Panics
///
/// If `dim` is zero.
pub fn pseudo_embed(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim > 0, "pseudo_embed requires dim > 0");
    let folded = fold_case(text);
    let mut tokens: Vec<&str> = folded.split_whitespace().collect();
    if tokens.is_empty() {
        tokens.push("");
    }
    let mut sum = vec![0.0; dim];
    for token in tokens {
        let mut rng =
            SplitMix64(fnv1a(token.as_bytes()) ^ seed.wrapping_mul(0x2545_f491_4f6c_dd1d));
        for x in sum.iter_mut() {
            *x += rng.next_signed();
        }
    }
    let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        sum[0] = 1.0;
        return sum;
    }
    sum.iter().map(|x| x / norm).collect()
}

/// A source of fixed-dimension text vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn source(&self) -> EmbeddingSource;

    /// Embeds one record. The result always has length [`dim`](Self::dim).
    fn embed_text(&self, id: &str, text: &str) -> Result<Vec<f64>>;
}

/// Pools token vectors from a word table: the mean over all tokens, where
/// tokens missing from the table contribute zero vectors.
#[derive(Debug, Clone)]
pub struct WordTableProvider {
    table: Arc<WordVectorTable>,
    options: NormalizeOptions,
}

impl WordTableProvider {
    pub fn new(table: Arc<WordVectorTable>, options: NormalizeOptions) -> Self {
        WordTableProvider { table, options }
    }

    pub fn table(&self) -> &WordVectorTable {
        &self.table
    }
}

impl EmbeddingProvider for WordTableProvider {
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn source(&self) -> EmbeddingSource {
        EmbeddingSource::WordTable
    }

    fn embed_text(&self, _id: &str, text: &str) -> Result<Vec<f64>> {
        let dim = self.dim();
        let tokens = normalize_text(text, &self.options);
        let mut sum = vec![0.0; dim];
        for token in &tokens {
            if let Some(v) = self.table.get(token) {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            }
        }
        if !tokens.is_empty() {
            let n = tokens.len() as f64;
            sum.iter_mut().for_each(|s| *s /= n);
        }
        Ok(sum)
    }
}

#[derive(Debug, Clone)]
pub struct PrecomputedProvider {
    table: Arc<PrecomputedTextEmbeddings>,
}

impl PrecomputedProvider {
    pub fn new(table: Arc<PrecomputedTextEmbeddings>) -> Self {
        PrecomputedProvider { table }
    }
}

impl EmbeddingProvider for PrecomputedProvider {
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn source(&self) -> EmbeddingSource {
        EmbeddingSource::Precomputed
    }

    fn embed_text(&self, id: &str, _text: &str) -> Result<Vec<f64>> {
        self.table.get(id).map(<[f64]>::to_vec)
    }
}

/// Hash-based stand-in for a contextual encoder, for tests and demos.
#[derive(Debug, Clone, Copy)]
pub struct PseudoProvider {
    dim: usize,
    seed: u64,
}

impl PseudoProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config(
                "pseudo embedding dimension must be positive".into(),
            ));
        }
        Ok(PseudoProvider { dim, seed })
    }
}

impl EmbeddingProvider for PseudoProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn source(&self) -> EmbeddingSource {
        EmbeddingSource::Pseudo
    }

    fn embed_text(&self, _id: &str, text: &str) -> Result<Vec<f64>> {
        Ok(pseudo_embed(text, self.dim, self.seed))
    }
}
