//! Record data model, corpus ingestion and text normalization.
//!
//! Corpora are stored as JSON Lines: one [`TweetRecord`] object per line.
//! See `docs/corpus-format.md` for the field-level schema.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Earliest plausible account creation year.
pub const FIRST_ACCOUNT_YEAR: i32 = 2006;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "SSN")]
    Ssn,
    #[serde(rename = "IP")]
    Ip,
}

impl Category {
    pub const ALL: [Category; 2] = [Category::Ssn, Category::Ip];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Ssn => "SSN",
            Category::Ip => "IP",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary class. `Positive` marks a second-/third-party disclosure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn from_sign(value: f64) -> Label {
        if value > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "POSITIVE",
            Label::Negative => "NEGATIVE",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthorProfile {
    /// Stable account identifier, used to count unique users.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<String>,
    pub followers_count: u64,
    pub friends_count: u64,
    pub statuses_count: u64,
    pub favourites_count: u64,
    pub created_year: i32,
    #[serde(default)]
    pub verified: bool,
    #[serde(default)]
    pub default_profile_image: bool,
    #[serde(default)]
    pub has_banner: bool,
    #[serde(default)]
    pub customized_theme: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quoted_text: Option<String>,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<AuthorProfile>,
}

impl TweetRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, category: Category) -> Self {
        TweetRecord {
            id: id.into(),
            text: text.into(),
            quoted_text: None,
            category,
            label: None,
            author: None,
        }
    }

    pub fn with_quote(mut self, quoted: impl Into<String>) -> Self {
        self.quoted_text = Some(quoted.into());
        self
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_author(mut self, author: AuthorProfile) -> Self {
        self.author = Some(author);
        self
    }

    /// The analyzed text: the record text, then a space and the quoted text if any.
    pub fn effective_text(&self) -> String {
        match &self.quoted_text {
            Some(quoted) => format!("{} {}", self.text, quoted),
            None => self.text.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let invalid = |message: &str| Error::InvalidRecord {
            id: self.id.clone(),
            message: message.to_string(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if self.text.is_empty() {
            return Err(invalid("empty text"));
        }
        if let Some(author) = &self.author {
            let current = chrono::Utc::now().year();
            if !(FIRST_ACCOUNT_YEAR..=current).contains(&author.created_year) {
                return Err(invalid(&format!(
                    "created_year {} outside [{FIRST_ACCOUNT_YEAR}, {current}]",
                    author.created_year
                )));
            }
        }
        Ok(())
    }
}

/// Free-function form of [`TweetRecord::effective_text`].
pub fn effective_text(record: &TweetRecord) -> String {
    record.effective_text()
}

/// An ordered, id-unique collection of records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCorpus {
    records: Vec<TweetRecord>,
    positive_count: usize,
    negative_count: usize,
}

impl LabeledCorpus {
    pub fn from_records(records: Vec<TweetRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            record.validate()?;
            if !seen.insert(record.id.as_str()) {
                return Err(Error::DuplicateId(record.id.clone()));
            }
        }
        Ok(Self::from_validated(records))
    }

    fn from_validated(records: Vec<TweetRecord>) -> Self {
        let positive_count = records
            .iter()
            .filter(|r| r.label == Some(Label::Positive))
            .count();
        let negative_count = records
            .iter()
            .filter(|r| r.label == Some(Label::Negative))
            .count();
        LabeledCorpus {
            records,
            positive_count,
            negative_count,
        }
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.positive_count
    }

    pub fn negative_count(&self) -> usize {
        self.negative_count
    }

    /// Labels of every record, failing on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.records
            .iter()
            .map(|r| {
                r.label.ok_or_else(|| Error::InvalidRecord {
                    id: r.id.clone(),
                    message: "missing label".into(),
                })
            })
            .collect()
    }

    /// Keeps the records accepted by `keep`, preserving order.
    pub fn retain(&self, mut keep: impl FnMut(&TweetRecord) -> bool) -> LabeledCorpus {
        let records = self.records.iter().filter(|r| keep(r)).cloned().collect();
        Self::from_validated(records)
    }

    pub fn into_records(self) -> Vec<TweetRecord> {
        self.records
    }
}

/// Reads a JSON Lines corpus. Blank lines are ignored.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<LabeledCorpus> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: TweetRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate().map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(LabeledCorpus::from_validated(records))
}

pub fn write_corpus<W: Write>(corpus: &LabeledCorpus, mut out: W) -> Result<()> {
    for record in corpus.records() {
        let line = serde_json::to_string(record).map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Case-insensitive substring test over the effective text. `keywords` must be lowercase.
pub fn keyword_filter<S: AsRef<str>>(record: &TweetRecord, keywords: &[S]) -> bool {
    let folded = fold_case(&record.effective_text());
    keywords.iter().any(|k| folded.contains(k.as_ref()))
}

/// Unicode lowercase mapping used for every case-insensitive comparison.
pub fn fold_case(text: &str) -> String {
    text.to_lowercase()
}

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// The bundled English stopword list.
pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizeOptions {
    pub lowercase: bool,
    pub strip_handles: bool,
    pub strip_urls: bool,
    /// Removes every non-alphabetic character inside tokens, digits included.
    pub strip_non_alphabetic: bool,
    /// Compared case-insensitively against tokens. Empty disables removal.
    pub stopwords: BTreeSet<String>,
}

impl NormalizeOptions {
    /// Preprocessing used before similarity-based annotation sampling:
    /// handles dropped, every non-alphabetic character removed.
    pub fn annotation() -> Self {
        NormalizeOptions {
            lowercase: true,
            strip_handles: true,
            strip_urls: true,
            strip_non_alphabetic: true,
            stopwords: BTreeSet::new(),
        }
    }

    /// Preprocessing used before embedding lookup for classification.
    pub fn classifier() -> Self {
        NormalizeOptions {
            lowercase: true,
            strip_handles: false,
            strip_urls: true,
            strip_non_alphabetic: false,
            stopwords: default_stopwords(),
        }
    }
}

fn is_url(token: &str) -> bool {
    let folded = token.to_ascii_lowercase();
    folded.starts_with("http://") || folded.starts_with("https://") || folded.starts_with("www.")
}

fn is_handle(token: &str) -> bool {
    token.starts_with('@') && token.len() > 1
}

/// Splits `text` into whitespace tokens after the configured stripping.
pub fn normalize_text(text: &str, options: &NormalizeOptions) -> Vec<String> {
    let mut tokens = Vec::new();
    for raw in text.split_whitespace() {
        if options.strip_urls && is_url(raw) {
            continue;
        }
        if options.strip_handles && is_handle(raw) {
            continue;
        }
        let mut token = if options.lowercase {
            fold_case(raw)
        } else {
            raw.to_string()
        };
        if options.strip_non_alphabetic {
            token.retain(char::is_alphabetic);
        }
        if token.is_empty() {
            continue;
        }
        if !options.stopwords.is_empty() && options.stopwords.contains(&fold_case(&token)) {
            continue;
        }
        tokens.push(token);
    }
    tokens
}
