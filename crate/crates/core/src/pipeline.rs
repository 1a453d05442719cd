//! End-to-end runs of named detection configurations: filter, featurize,
//! train and predict per fold (or label by rules), then report.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_text, LabeledCorpus, NormalizeOptions};
use crate::embeddings::{
    load_precomputed_file, load_word_vectors_file, EmbeddingProvider, PrecomputedProvider,
    PseudoProvider, WordTableProvider, WordVectorTable,
};
use crate::error::{Error, Result};
use crate::eval::{
    comparison_table, cross_validate_detector, evaluate_whole, five_by_two_errors,
    five_by_two_from_errors, Detector, EvalReport, FixedDetector, LinearDetector, TTestResult,
};
use crate::features::{Featurizer, FeaturizerKind};
use crate::heuristics::{
    contains_invalid_ssn, heuristic_label, match_rules, rule_decision, RuleSet,
};
use crate::svm::TrainConfig;
use crate::validators::{find_ipv4_candidates, find_ssn_candidates, has_valid_candidate};

/// Names of the shipped configurations, in table order.
pub const NAMED_CONFIGS: [&str; 9] = [
    "Heuristics",
    "1-HotEH",
    "1-HotEH_Heuristics",
    "Mean_GloVe_Twitter",
    "DP_GloVe_Wiki",
    "DP_FlairFW",
    "DP_FlairFW_Cleaned",
    "DP_FlairFW_Heuristics",
    "DP_FlairFW_GloVe_Wiki",
];

const NAMED_SOURCES: [&str; 9] = [
    include_str!("../data/configs/Heuristics.toml"),
    include_str!("../data/configs/1-HotEH.toml"),
    include_str!("../data/configs/1-HotEH_Heuristics.toml"),
    include_str!("../data/configs/Mean_GloVe_Twitter.toml"),
    include_str!("../data/configs/DP_GloVe_Wiki.toml"),
    include_str!("../data/configs/DP_FlairFW.toml"),
    include_str!("../data/configs/DP_FlairFW_Cleaned.toml"),
    include_str!("../data/configs/DP_FlairFW_Heuristics.toml"),
    include_str!("../data/configs/DP_FlairFW_GloVe_Wiki.toml"),
];

const BUNDLED_MANIFEST: &str = include_str!("../data/resources.toml");

pub const DEFAULT_BASELINE: &str = "1-HotEH";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeaturizerSpec {
    /// No classifier: rules label the whole corpus.
    Heuristics,
    OneHot,
    /// Mean of in-vocabulary word vectors from a word-table slot.
    MeanWord {
        source: String,
    },
    /// Document pooling over one or more slots, stacked in order.
    DocPool {
        sources: Vec<String>,
    },
}

fn default_k() -> usize {
    10
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub name: String,
    pub featurizer: FeaturizerSpec,
    /// Rule decisions override the classifier whenever a rule matches.
    #[serde(default)]
    pub overrule: bool,
    /// Drop records containing an invalid-looking SSN before folding.
    #[serde(default)]
    pub cleaned: bool,
    /// Drop records without a valid identifier of their category.
    #[serde(default = "default_true")]
    pub structural_filter: bool,
    /// Adds pronoun features to the one-hot scheme.
    #[serde(default)]
    pub pronouns: bool,
    #[serde(default)]
    pub l2_normalize: bool,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(source: &str) -> Result<Self> {
        let config: PipelineConfig =
            toml::from_str(source).map_err(|e| Error::Config(e.to_string()))?;
        config.train.validate()?;
        if config.k < 2 {
            return Err(Error::Config(format!(
                "k must be at least 2, got {}",
                config.k
            )));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// One of the shipped configurations, by exact name.
    pub fn named(name: &str) -> Option<Self> {
        NAMED_CONFIGS
            .iter()
            .position(|n| *n == name)
            .map(|i| Self::from_toml_str(NAMED_SOURCES[i]).expect("shipped configs are valid"))
    }

    pub fn all_named() -> Vec<Self> {
        NAMED_CONFIGS
            .iter()
            .map(|n| Self::named(n).expect("named"))
            .collect()
    }

    /// Resource slots this configuration reads.
    pub fn required_slots(&self) -> Vec<&str> {
        match &self.featurizer {
            FeaturizerSpec::Heuristics | FeaturizerSpec::OneHot => Vec::new(),
            FeaturizerSpec::MeanWord { source } => vec![source.as_str()],
            FeaturizerSpec::DocPool { sources } => sources.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// Token → vector table.
    WordTable,
    /// Record id → vector table, or a text encoder.
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    pub kind: SlotKind,
    pub dim: usize,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceManifest {
    pub slots: BTreeMap<String, SlotSpec>,
}

impl ResourceManifest {
    pub fn bundled() -> Self {
        toml::from_str(BUNDLED_MANIFEST).expect("bundled manifest is valid")
    }

    pub fn from_toml_str(source: &str) -> Result<Self> {
        toml::from_str(source).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone)]
enum Slot {
    Word(Arc<WordVectorTable>),
    Text(Arc<dyn EmbeddingProvider>),
}

/// Rules plus whatever embedding slots have been filled.
#[derive(Clone)]
pub struct Resources {
    rules: RuleSet,
    manifest: ResourceManifest,
    filled: BTreeMap<String, Slot>,
}

impl std::fmt::Debug for Resources {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Resources")
            .field("ruleset_hash", &self.rules.version_hash())
            .field("filled", &self.filled.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Resources {
    pub fn new(rules: RuleSet, manifest: ResourceManifest) -> Self {
        Resources {
            rules,
            manifest,
            filled: BTreeMap::new(),
        }
    }

    /// Bundled rules and manifest with every slot empty.
    pub fn bundled() -> Self {
        Self::new(RuleSet::bundled(), ResourceManifest::bundled())
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn manifest(&self) -> &ResourceManifest {
        &self.manifest
    }

    fn spec(&self, name: &str, kind: SlotKind) -> Result<&SlotSpec> {
        let spec = self
            .manifest
            .slots
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown resource slot {name:?}")))?;
        if spec.kind != kind {
            return Err(Error::Config(format!(
                "slot {name:?} holds {:?} data",
                spec.kind
            )));
        }
        Ok(spec)
    }

    pub fn set_word_table(&mut self, name: &str, table: WordVectorTable) -> Result<()> {
        self.spec(name, SlotKind::WordTable)?;
        self.filled
            .insert(name.to_string(), Slot::Word(Arc::new(table)));
        Ok(())
    }

    pub fn set_text_provider(
        &mut self,
        name: &str,
        provider: Arc<dyn EmbeddingProvider>,
    ) -> Result<()> {
        self.spec(name, SlotKind::Text)?;
        self.filled.insert(name.to_string(), Slot::Text(provider));
        Ok(())
    }

    pub fn load_word_vectors(&mut self, name: &str, path: &Path) -> Result<()> {
        self.set_word_table(name, load_word_vectors_file(path)?)
    }

    pub fn load_precomputed(&mut self, name: &str, path: &Path) -> Result<()> {
        let table = load_precomputed_file(path)?;
        self.set_text_provider(name, Arc::new(PrecomputedProvider::new(Arc::new(table))))
    }

    /// Fills every empty slot with a deterministic stand-in of the manifest
    /// dimension: a pseudo word table over the corpus vocabulary, or a
    /// hash-based text encoder.
    pub fn fill_pseudo(&mut self, corpus: &LabeledCorpus, seed: u64) -> Result<()> {
        let options = NormalizeOptions::classifier();
        let mut vocabulary: Option<BTreeSet<String>> = None;
        let empty: Vec<(String, SlotSpec)> = self
            .manifest
            .slots
            .iter()
            .filter(|(name, _)| !self.filled.contains_key(*name))
            .map(|(n, s)| (n.clone(), s.clone()))
            .collect();
        for (name, spec) in empty {
            match spec.kind {
                SlotKind::WordTable => {
                    let vocab = vocabulary.get_or_insert_with(|| {
                        corpus
                            .records()
                            .iter()
                            .flat_map(|r| normalize_text(&r.effective_text(), &options))
                            .collect()
                    });
                    let table = if vocab.is_empty() {
                        WordVectorTable::from_entries(spec.dim, Vec::<(String, Vec<f64>)>::new())?
                    } else {
                        WordVectorTable::pseudo(vocab.iter(), spec.dim, slot_seed(seed, &name))?
                    };
                    self.set_word_table(&name, table)?;
                }
                SlotKind::Text => {
                    let provider = PseudoProvider::new(spec.dim, slot_seed(seed, &name))?;
                    self.set_text_provider(&name, Arc::new(provider))?;
                }
            }
        }
        Ok(())
    }

    /// Slots a configuration needs that are still empty, described for the user.
    pub fn missing_for(&self, config: &PipelineConfig) -> Vec<String> {
        config
            .required_slots()
            .into_iter()
            .filter(|name| !self.filled.contains_key(*name))
            .map(|name| match self.manifest.slots.get(name) {
                Some(spec) => {
                    let flag = match spec.kind {
                        SlotKind::WordTable => "--word-vectors",
                        SlotKind::Text => "--precomputed",
                    };
                    format!(
                        "{name} ({}, dim {}): pass {flag} {name}=PATH",
                        spec.description, spec.dim
                    )
                }
                None => format!("{name}: not declared in the resource manifest"),
            })
            .collect()
    }

    fn featurizer(&self, config: &PipelineConfig) -> Result<Option<Featurizer>> {
        let missing = self.missing_for(config);
        if !missing.is_empty() {
            return Err(Error::MissingResources(missing));
        }
        let options = NormalizeOptions::classifier();
        let featurizer = match &config.featurizer {
            FeaturizerSpec::Heuristics => return Ok(None),
            FeaturizerSpec::OneHot => {
                Featurizer::one_hot(&self.rules.clone().with_pronouns(config.pronouns))
            }
            FeaturizerSpec::MeanWord { source } => match &self.filled[source] {
                Slot::Word(table) => Featurizer::new(FeaturizerKind::MeanWord {
                    table: Arc::clone(table),
                    options,
                })?,
                Slot::Text(_) => {
                    return Err(Error::Config(format!(
                        "mean_word needs a word table, {source:?} is text"
                    )))
                }
            },
            FeaturizerSpec::DocPool { sources } => {
                let providers = sources
                    .iter()
                    .map(|s| -> Arc<dyn EmbeddingProvider> {
                        match &self.filled[s] {
                            Slot::Word(table) => {
                                Arc::new(WordTableProvider::new(Arc::clone(table), options.clone()))
                            }
                            Slot::Text(p) => Arc::clone(p),
                        }
                    })
                    .collect();
                Featurizer::new(FeaturizerKind::Pooled(providers))?
            }
        };
        Ok(Some(featurizer.with_l2_normalize(config.l2_normalize)))
    }
}

fn slot_seed(seed: u64, name: &str) -> u64 {
    name.bytes().fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub parallel_folds: bool,
    /// Featurize records on the rayon pool.
    pub parallel_features: bool,
}

/// Corpus, labels and ready detector for one configuration.
pub struct PreparedRun {
    pub corpus: LabeledCorpus,
    pub labels: Vec<crate::corpus::Label>,
    pub detector: Box<dyn Detector>,
    featurizer: Option<Featurizer>,
    ruleset_hash: String,
}

impl PreparedRun {
    /// `None` for the rule-only configuration.
    pub fn featurizer(&self) -> Option<&Featurizer> {
        self.featurizer.as_ref()
    }

    pub fn ruleset_hash(&self) -> &str {
        &self.ruleset_hash
    }
}

impl std::fmt::Debug for PreparedRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreparedRun")
            .field("records", &self.corpus.len())
            .field("featurizer", &self.featurizer)
            .finish()
    }
}

/// Records that survive the configuration's filters, in input order.
pub fn filter_corpus(
    config: &PipelineConfig,
    corpus: &LabeledCorpus,
    rules: &RuleSet,
) -> LabeledCorpus {
    corpus.retain(|r| {
        let text = r.effective_text();
        (!config.structural_filter || has_valid_candidate(&text, r.category.into()))
            && (!config.cleaned || !contains_invalid_ssn(&text, rules))
    })
}

pub fn prepare(
    config: &PipelineConfig,
    corpus: &LabeledCorpus,
    resources: &Resources,
    options: RunOptions,
) -> Result<PreparedRun> {
    let featurizer = resources.featurizer(config)?;
    let rules = resources.rules();
    let corpus = filter_corpus(config, corpus, rules);
    let labels = corpus.labels()?;
    let reports: Vec<_> = corpus
        .records()
        .iter()
        .map(|r| match_rules(&r.effective_text(), rules))
        .collect();
    let (detector, ruleset_hash): (Box<dyn Detector>, String) = match &featurizer {
        None => (
            Box::new(FixedDetector {
                labels: reports.iter().map(heuristic_label).collect(),
            }),
            rules.version_hash().to_string(),
        ),
        Some(f) => {
            let hash = match f.kind() {
                FeaturizerKind::OneHot(_) => rules
                    .clone()
                    .with_pronouns(config.pronouns)
                    .version_hash()
                    .to_string(),
                _ => rules.version_hash().to_string(),
            };
            let detector = LinearDetector {
                features: f.featurize_all(corpus.records(), options.parallel_features)?,
                labels: labels.clone(),
                config: config.train,
                overrule: config
                    .overrule
                    .then(|| reports.iter().map(rule_decision).collect()),
            };
            (Box::new(detector), hash)
        }
    };
    Ok(PreparedRun {
        corpus,
        labels,
        detector,
        featurizer,
        ruleset_hash,
    })
}

/// Runs one configuration. The rule-only configuration uses the whole
/// corpus as its test set; the others use stratified k-fold CV.
pub fn run_config(
    config: &PipelineConfig,
    corpus: &LabeledCorpus,
    resources: &Resources,
) -> Result<EvalReport> {
    run_config_with(config, corpus, resources, RunOptions::default())
}

pub fn run_config_with(
    config: &PipelineConfig,
    corpus: &LabeledCorpus,
    resources: &Resources,
    options: RunOptions,
) -> Result<EvalReport> {
    let prepared = prepare(config, corpus, resources, options)?;
    report_for(config, &prepared, options)
}

fn report_for(
    config: &PipelineConfig,
    prepared: &PreparedRun,
    options: RunOptions,
) -> Result<EvalReport> {
    let mut report = match &prepared.featurizer {
        None => evaluate_whole(
            &config.name,
            prepared.detector.as_ref(),
            &prepared.labels,
            config.seed,
        )?,
        Some(_) => cross_validate_detector(
            &config.name,
            prepared.detector.as_ref(),
            &prepared.labels,
            config.k,
            config.seed,
            options.parallel_folds,
        )?,
    };
    if let Some(f) = &prepared.featurizer {
        report.scheme = Some(f.scheme());
        report.feature_dim = Some(f.dim());
    }
    report.ruleset_hash = Some(prepared.ruleset_hash.clone());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub config: String,
    pub baseline: String,
    /// `None` when the test was not run; see `note`.
    pub result: Option<TTestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub seed: u64,
    pub baseline: String,
    pub reports: Vec<EvalReport>,
    pub paired_tests: Vec<PairedTest>,
    pub table: String,
}

impl CompareReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Runs each configuration, then a 5x2cv paired t-test of each against the
/// baseline. Tests are skipped for configurations whose filtered corpus
/// differs from the baseline's, since the pairing would be meaningless.
pub fn compare(
    configs: &[PipelineConfig],
    corpus: &LabeledCorpus,
    resources: &Resources,
    baseline: &str,
    seed: u64,
    options: RunOptions,
) -> Result<CompareReport> {
    if !configs.iter().any(|c| c.name == baseline) {
        return Err(Error::Config(format!(
            "baseline {baseline:?} is not among the compared configs"
        )));
    }
    let mut prepared = Vec::with_capacity(configs.len());
    let mut reports = Vec::with_capacity(configs.len());
    for config in configs {
        let run = prepare(config, corpus, resources, options)?;
        reports.push(report_for(config, &run, options)?);
        prepared.push(run);
    }
    let base_idx = configs
        .iter()
        .position(|c| c.name == baseline)
        .expect("checked");
    let base = &prepared[base_idx];
    let base_errors = five_by_two_errors(base.detector.as_ref(), &base.labels, seed)?;
    let base_ids: Vec<&str> = base
        .corpus
        .records()
        .iter()
        .map(|r| r.id.as_str())
        .collect();

    let mut paired_tests = Vec::new();
    for (config, run) in configs.iter().zip(&prepared) {
        if config.name == baseline {
            continue;
        }
        let same_corpus = run
            .corpus
            .records()
            .iter()
            .map(|r| r.id.as_str())
            .eq(base_ids.iter().copied());
        let (result, note) = if !same_corpus {
            (
                None,
                Some("skipped: filtered corpus differs from the baseline's".to_string()),
            )
        } else {
            let errors = five_by_two_errors(run.detector.as_ref(), &run.labels, seed)?;
            match five_by_two_from_errors(&errors, &base_errors) {
                Ok(t) => (Some(t), None),
                Err(Error::DegenerateVariance) => (None, Some("degenerate variance".to_string())),
                Err(e) => return Err(e),
            }
        };
        paired_tests.push(PairedTest {
            config: config.name.clone(),
            baseline: baseline.to_string(),
            result,
            note,
        });
    }
    Ok(CompareReport {
        seed,
        baseline: baseline.to_string(),
        table: comparison_table(&reports),
        reports,
        paired_tests,
    })
}

/// Masks every valid SSN as `***-**-****` and every valid IPv4 address as `*.*.*.*`.
pub fn redact(text: &str) -> String {
    let mut spans: Vec<(std::ops::Range<usize>, &str)> = find_ssn_candidates(text)
        .into_iter()
        .filter(|m| m.is_valid())
        .map(|m| (m.span, "***-**-****"))
        .chain(
            find_ipv4_candidates(text)
                .into_iter()
                .filter(|m| m.is_valid())
                .map(|m| (m.span, "*.*.*.*")),
        )
        .collect();
    if spans.is_empty() {
        return text.to_string();
    }
    spans.sort_by_key(|(s, _)| s.start);
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for (span, mask) in spans {
        if span.start < pos {
            continue;
        }
        out.extend(&chars[pos..span.start]);
        out.push_str(mask);
        pos = span.end;
    }
    out.extend(&chars[pos..]);
    out
}

/// Parses `NAME=PATH`, as used by resource override flags.
pub fn parse_slot_assignment(arg: &str) -> Result<(String, PathBuf)> {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(Error::Config(format!("expected NAME=PATH, got {arg:?}"))),
    }
}
