//! Record featurization: one-hot heuristic strings, mean word embeddings,
//! document pooling and stacking.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{fold_case, normalize_text, NormalizeOptions, TweetRecord};
use crate::embeddings::{EmbeddingProvider, WordVectorTable};
use crate::error::{Error, Result};
use crate::heuristics::{FeatureTerm, RuleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureScheme {
    OneHot,
    MeanWord,
    DocPool,
    Stacked,
}

impl FeatureScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureScheme::OneHot => "ONE_HOT",
            FeatureScheme::MeanWord => "MEAN_WORD",
            FeatureScheme::DocPool => "DOC_POOL",
            FeatureScheme::Stacked => "STACKED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            FeatureScheme::OneHot,
            FeatureScheme::MeanWord,
            FeatureScheme::DocPool,
            FeatureScheme::Stacked,
        ]
        .into_iter()
        .find(|scheme| scheme.as_str() == s)
    }
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub scheme: FeatureScheme,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, scheme: FeatureScheme) -> Self {
        FeatureVector { values, scheme }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Presence (+1) / absence (−1) of each heuristic string, in rule-file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHotEncoder {
    terms: Vec<FeatureTerm>,
}

impl OneHotEncoder {
    pub fn new(rules: &RuleSet) -> Self {
        OneHotEncoder {
            terms: rules.feature_terms(),
        }
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[FeatureTerm] {
        &self.terms
    }

    pub fn encode(&self, text: &str) -> FeatureVector {
        let folded = fold_case(text);
        let values = self
            .terms
            .iter()
            .map(|t| if t.occurs_in(&folded) { 1.0 } else { -1.0 })
            .collect();
        FeatureVector::new(values, FeatureScheme::OneHot)
    }
}

pub fn one_hot_encode(text: &str, rules: &RuleSet) -> FeatureVector {
    OneHotEncoder::new(rules).encode(text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanEmbedding {
    pub vector: FeatureVector,
    /// No token was found in the table; `vector` is all zeros.
    pub all_oov: bool,
}

/// Mean of the vectors of in-vocabulary tokens. Repeated tokens count repeatedly;
/// out-of-vocabulary tokens are skipped.
pub fn mean_word_embedding<S: AsRef<str>>(tokens: &[S], table: &WordVectorTable) -> MeanEmbedding {
    let mut sum = vec![0.0; table.dim()];
    let mut found = 0usize;
    for token in tokens {
        if let Some(v) = table.get(token.as_ref()) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            found += 1;
        }
    }
    if found > 0 {
        let n = found as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    MeanEmbedding {
        vector: FeatureVector::new(sum, FeatureScheme::MeanWord),
        all_oov: found == 0,
    }
}

/// Element-wise arithmetic mean.
pub fn document_pool(vectors: &[Vec<f64>]) -> Result<FeatureVector> {
    let first = vectors.first().ok_or(Error::EmptyPool)?;
    let dim = first.len();
    let mut sum = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
    }
    let n = vectors.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(FeatureVector::new(sum, FeatureScheme::DocPool))
}

/// Concatenates parts in order.
pub fn stack(parts: &[FeatureVector]) -> Result<FeatureVector> {
    if parts.len() < 2 {
        return Err(Error::StackArity);
    }
    let values = parts
        .iter()
        .flat_map(|p| p.values.iter().copied())
        .collect();
    Ok(FeatureVector::new(values, FeatureScheme::Stacked))
}

pub fn l2_normalize(vector: &mut FeatureVector) {
    let norm = vector.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        vector.values.iter_mut().for_each(|x| *x /= norm);
    }
}

#[derive(Clone)]
pub enum FeaturizerKind {
    OneHot(OneHotEncoder),
    MeanWord {
        table: Arc<WordVectorTable>,
        options: NormalizeOptions,
    },
    /// One pooled vector per provider; several providers are stacked in order.
    Pooled(Vec<Arc<dyn EmbeddingProvider>>),
}

/// Maps a record to its feature vector under one scheme.
#[derive(Clone)]
pub struct Featurizer {
    kind: FeaturizerKind,
    l2_normalize: bool,
}

impl fmt::Debug for Featurizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Featurizer")
            .field("scheme", &self.scheme())
            .field("dim", &self.dim())
            .field("l2_normalize", &self.l2_normalize)
            .finish()
    }
}

impl Featurizer {
    pub fn new(kind: FeaturizerKind) -> Result<Self> {
        if let FeaturizerKind::Pooled(providers) = &kind {
            if providers.is_empty() {
                return Err(Error::Config("pooled featurizer needs a provider".into()));
            }
        }
        Ok(Featurizer {
            kind,
            l2_normalize: false,
        })
    }

    pub fn one_hot(rules: &RuleSet) -> Self {
        Featurizer {
            kind: FeaturizerKind::OneHot(OneHotEncoder::new(rules)),
            l2_normalize: false,
        }
    }

    pub fn with_l2_normalize(mut self, on: bool) -> Self {
        self.l2_normalize = on;
        self
    }

    pub fn kind(&self) -> &FeaturizerKind {
        &self.kind
    }

    pub fn scheme(&self) -> FeatureScheme {
        match &self.kind {
            FeaturizerKind::OneHot(_) => FeatureScheme::OneHot,
            FeaturizerKind::MeanWord { .. } => FeatureScheme::MeanWord,
            FeaturizerKind::Pooled(p) if p.len() == 1 => FeatureScheme::DocPool,
            FeaturizerKind::Pooled(_) => FeatureScheme::Stacked,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            FeaturizerKind::OneHot(enc) => enc.dim(),
            FeaturizerKind::MeanWord { table, .. } => table.dim(),
            FeaturizerKind::Pooled(p) => p.iter().map(|p| p.dim()).sum(),
        }
    }

    /// Ordered feature names, for schemes whose coordinates are named.
    pub fn feature_names(&self) -> Option<Vec<String>> {
        match &self.kind {
            FeaturizerKind::OneHot(enc) => {
                Some(enc.terms().iter().map(|t| t.text.clone()).collect())
            }
            _ => None,
        }
    }

    pub fn featurize(&self, record: &TweetRecord) -> Result<FeatureVector> {
        let text = record.effective_text();
        let mut vector = match &self.kind {
            FeaturizerKind::OneHot(enc) => enc.encode(&text),
            FeaturizerKind::MeanWord { table, options } => {
                mean_word_embedding(&normalize_text(&text, options), table).vector
            }
            FeaturizerKind::Pooled(providers) => {
                let parts = providers
                    .iter()
                    .map(|p| {
                        let values = p.embed_text(&record.id, &text)?;
                        if values.len() != p.dim() {
                            return Err(Error::DimensionMismatch {
                                expected: p.dim(),
                                actual: values.len(),
                            });
                        }
                        Ok(FeatureVector::new(values, FeatureScheme::DocPool))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if parts.len() == 1 {
                    parts.into_iter().next().expect("one part")
                } else {
                    stack(&parts)?
                }
            }
        };
        if self.l2_normalize {
            l2_normalize(&mut vector);
        }
        Ok(vector)
    }

    pub fn featurize_all(
        &self,
        records: &[TweetRecord],
        parallel: bool,
    ) -> Result<Vec<FeatureVector>> {
        if parallel {
            records.par_iter().map(|r| self.featurize(r)).collect()
        } else {
            records.iter().map(|r| self.featurize(r)).collect()
        }
    }
}

/// Writes `dim=<d> rows=<n> scheme=<S>` then one `id v1 ... vd` line per row.
pub fn write_feature_matrix<W: Write>(
    ids: &[&str],
    rows: &[FeatureVector],
    mut out: W,
) -> Result<()> {
    if ids.len() != rows.len() {
        return Err(Error::LengthMismatch {
            left: ids.len(),
            right: rows.len(),
        });
    }
    let dim = rows.first().map_or(0, FeatureVector::dim);
    let scheme = rows.first().map_or("NONE", |r| r.scheme.as_str());
    writeln!(out, "dim={dim} rows={} scheme={scheme}", rows.len())?;
    for (id, row) in ids.iter().zip(rows) {
        if row.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: row.dim(),
            });
        }
        write!(out, "{id}")?;
        for v in &row.values {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
