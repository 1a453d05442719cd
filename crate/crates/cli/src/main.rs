use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use doxwatch::corpus::{parse_corpus, write_corpus, Label, LabeledCorpus};
use doxwatch::eval::{cohen_kappa, fleiss_kappa, select_annotation_sample, user_attribute_report};
use doxwatch::features::write_feature_matrix;
use doxwatch::heuristics::{heuristic_label, match_rules, rule_decision, RuleSet};
use doxwatch::pipeline::{
    compare, filter_corpus, parse_slot_assignment, prepare, redact, run_config_with,
    PipelineConfig, Resources, RunOptions, DEFAULT_BASELINE, NAMED_CONFIGS,
};
use doxwatch::svm::train;
use doxwatch::synthetic::{bundled_corpus, generate_corpus, separable_corpus, SyntheticSpec};

#[derive(Parser, Debug)]
#[command(
    name = "doxwatch",
    version,
    about = "Detect malicious disclosures of SSNs and IP addresses in short texts"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Corpus in JSON Lines; the bundled synthetic corpus when omitted.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Rule table in TOML; the bundled rules when omitted.
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    /// Seed override for folds, solvers and generators.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Word-vector file for a resource slot, as NAME=PATH. Repeatable.
    #[arg(long = "word-vectors", value_name = "NAME=PATH", global = true)]
    word_vectors: Vec<String>,
    /// Per-record vector file for a resource slot, as NAME=PATH. Repeatable.
    #[arg(long, value_name = "NAME=PATH", global = true)]
    precomputed: Vec<String>,
    /// Fill slots without files with deterministic stand-in vectors.
    #[arg(long, global = true)]
    pseudo_embeddings: bool,
    /// Print identifiers unmasked.
    #[arg(long, global = true)]
    no_redact: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Keep records holding a valid identifier of their category.
    Filter {
        /// Also drop records containing an invalid-looking SSN.
        #[arg(long)]
        cleaned: bool,
    },
    /// Show rule matches per record, or the rule table summary.
    Rules {
        /// Texts to check instead of a corpus.
        texts: Vec<String>,
        /// Print the rule table summary.
        #[arg(long)]
        list: bool,
    },
    /// Write the feature matrix of a configuration.
    Featurize {
        #[arg(long)]
        config: String,
    },
    /// Train on the whole filtered corpus and write the model.
    Train {
        #[arg(long)]
        config: String,
    },
    /// Cross-validate one configuration.
    Evaluate {
        #[arg(long)]
        config: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        parallel_folds: bool,
    },
    /// Run several configurations and 5x2cv paired t-tests against a baseline.
    Compare {
        /// Configurations to run; all nine named ones when omitted.
        #[arg(long = "config")]
        configs: Vec<String>,
        #[arg(long, default_value = DEFAULT_BASELINE)]
        baseline: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        parallel_folds: bool,
        /// Print only the comparison table.
        #[arg(long)]
        table: bool,
    },
    /// Inter-annotator agreement.
    Kappa {
        #[arg(value_enum)]
        method: KappaMethod,
        /// Fleiss: one item per line, whitespace-separated category counts.
        /// Cohen: two files, one POSITIVE/NEGATIVE label per line.
        files: Vec<PathBuf>,
    },
    /// Pick the least typical records of each category for annotation.
    SampleAnnotation {
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Per-class author statistics.
    UserStats {
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic corpus.
    Synth {
        /// Generate a label-from-rule-presence corpus of this size instead.
        #[arg(long)]
        separable: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KappaMethod {
    Fleiss,
    Cohen,
}

struct Ctx {
    global: Global,
}

impl Ctx {
    fn rules(&self) -> Result<RuleSet> {
        match &self.global.rules {
            Some(path) => {
                RuleSet::load(path).with_context(|| format!("loading rules {}", path.display()))
            }
            None => Ok(RuleSet::bundled()),
        }
    }

    fn corpus(&self) -> Result<LabeledCorpus> {
        match &self.global.corpus {
            Some(path) => {
                let file =
                    File::open(path).with_context(|| format!("opening {}", path.display()))?;
                parse_corpus(BufReader::new(file))
                    .with_context(|| format!("reading {}", path.display()))
            }
            None => Ok(bundled_corpus()?),
        }
    }

    fn resources(&self, corpus: &LabeledCorpus) -> Result<Resources> {
        let mut resources = Resources::new(self.rules()?, Resources::bundled().manifest().clone());
        for arg in &self.global.word_vectors {
            let (name, path) = parse_slot_assignment(arg)?;
            resources
                .load_word_vectors(&name, &path)
                .with_context(|| format!("loading word vectors {}", path.display()))?;
        }
        for arg in &self.global.precomputed {
            let (name, path) = parse_slot_assignment(arg)?;
            resources
                .load_precomputed(&name, &path)
                .with_context(|| format!("loading vectors {}", path.display()))?;
        }
        if self.global.pseudo_embeddings {
            resources.fill_pseudo(corpus, self.global.seed.unwrap_or(0))?;
        }
        Ok(resources)
    }

    fn config(&self, spec: &str, k: Option<usize>) -> Result<PipelineConfig> {
        let mut config = match PipelineConfig::named(spec) {
            Some(c) => c,
            None if Path::new(spec).exists() => PipelineConfig::load(Path::new(spec))?,
            None => bail!(
                "unknown config {spec:?}; named configs: {}",
                NAMED_CONFIGS.join(", ")
            ),
        };
        if let Some(seed) = self.global.seed {
            config.seed = seed;
            config.train.seed = seed;
        }
        if let Some(k) = k {
            config.k = k;
        }
        Ok(config)
    }

    fn emit(&self, text: &str) -> Result<()> {
        let text = if self.global.no_redact {
            text.to_string()
        } else {
            redact(text)
        };
        match &self.global.out {
            Some(path) => {
                std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

fn corpus_jsonl(corpus: &LabeledCorpus) -> Result<String> {
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_string(&mut s)?;
    Ok(s)
}

fn parse_label(line: &str) -> Result<Label> {
    match line.trim().to_ascii_uppercase().as_str() {
        "POSITIVE" | "P" | "1" => Ok(Label::Positive),
        "NEGATIVE" | "N" | "0" => Ok(Label::Negative),
        other => bail!("unrecognized label {other:?}"),
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx { global: cli.global };
    match cli.command {
        Command::Filter { cleaned } => {
            let config = PipelineConfig {
                cleaned,
                ..PipelineConfig::named(DEFAULT_BASELINE).expect("named")
            };
            let kept = filter_corpus(&config, &ctx.corpus()?, &ctx.rules()?);
            ctx.emit(&corpus_jsonl(&kept)?)
        }
        Command::Rules { texts, list } => {
            let rules = ctx.rules()?;
            if list {
                let summary = serde_json::json!({
                    "version_hash": rules.version_hash(),
                    "positive_phrases": rules.positive_phrases().collect::<Vec<_>>(),
                    "negative_phrases": rules.negative_phrases().collect::<Vec<_>>(),
                    "invalid_ssns": rules.invalid_ssns(),
                    "feature_count": rules.feature_terms().len(),
                });
                return ctx.emit(&format!("{}\n", serde_json::to_string_pretty(&summary)?));
            }
            let items: Vec<(String, String)> = if texts.is_empty() {
                ctx.corpus()?
                    .records()
                    .iter()
                    .map(|r| (r.id.clone(), r.effective_text()))
                    .collect()
            } else {
                texts
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| (i.to_string(), t))
                    .collect()
            };
            let mut out = String::new();
            for (id, text) in items {
                let report = match_rules(&text, &rules);
                let line = serde_json::json!({
                    "id": id,
                    "label": heuristic_label(&report),
                    "decision": rule_decision(&report),
                    "matched_positive": report.matched_positive,
                    "matched_negative": report.matched_negative,
                    "matched_invalid_ssn": report.matched_invalid_ssn,
                    "compound": report.compound_hits,
                });
                out.push_str(&serde_json::to_string(&line)?);
                out.push('\n');
            }
            ctx.emit(&out)
        }
        Command::Featurize { config } => {
            let config = ctx.config(&config, None)?;
            let corpus = ctx.corpus()?;
            let resources = ctx.resources(&corpus)?;
            let prepared = prepare(&config, &corpus, &resources, RunOptions::default())?;
            let Some(featurizer) = prepared.featurizer() else {
                bail!("config {} has no features", config.name);
            };
            let rows = featurizer.featurize_all(prepared.corpus.records(), true)?;
            let ids: Vec<&str> = prepared
                .corpus
                .records()
                .iter()
                .map(|r| r.id.as_str())
                .collect();
            let mut buf = Vec::new();
            write_feature_matrix(&ids, &rows, &mut buf)?;
            ctx.emit(&String::from_utf8(buf)?)
        }
        Command::Train { config } => {
            let config = ctx.config(&config, None)?;
            let corpus = ctx.corpus()?;
            let resources = ctx.resources(&corpus)?;
            let prepared = prepare(&config, &corpus, &resources, RunOptions::default())?;
            let Some(featurizer) = prepared.featurizer() else {
                bail!("config {} does not train a model", config.name);
            };
            let rows = featurizer.featurize_all(prepared.corpus.records(), true)?;
            let x: Vec<&[f64]> = rows.iter().map(|r| r.values.as_slice()).collect();
            let mut outcome = train(&x, &prepared.labels, featurizer.scheme(), &config.train)?;
            outcome.model.ruleset_hash = Some(prepared.ruleset_hash().to_string());
            outcome.model.feature_names = featurizer.feature_names();
            if !outcome.converged {
                eprintln!(
                    "warning: solver stopped after {} epochs without converging",
                    outcome.epochs
                );
            }
            let mut buf = Vec::new();
            outcome.model.write(&mut buf)?;
            ctx.emit(&String::from_utf8(buf)?)
        }
        Command::Evaluate {
            config,
            k,
            parallel_folds,
        } => {
            let config = ctx.config(&config, k)?;
            let corpus = ctx.corpus()?;
            let resources = ctx.resources(&corpus)?;
            let options = RunOptions {
                parallel_folds,
                parallel_features: true,
            };
            let report = run_config_with(&config, &corpus, &resources, options)?;
            ctx.emit(&report.to_json())
        }
        Command::Compare {
            configs,
            baseline,
            k,
            parallel_folds,
            table,
        } => {
            let names: Vec<String> = if configs.is_empty() {
                NAMED_CONFIGS.iter().map(|s| s.to_string()).collect()
            } else {
                configs
            };
            let configs = names
                .iter()
                .map(|n| ctx.config(n, k))
                .collect::<Result<Vec<_>>>()?;
            let corpus = ctx.corpus()?;
            let resources = ctx.resources(&corpus)?;
            let options = RunOptions {
                parallel_folds,
                parallel_features: true,
            };
            let seed = ctx.global.seed.unwrap_or(0);
            let report = compare(&configs, &corpus, &resources, &baseline, seed, options)?;
            if table {
                ctx.emit(&report.table)
            } else {
                ctx.emit(&report.to_json())
            }
        }
        Command::Kappa { method, files } => {
            let value = match method {
                KappaMethod::Fleiss => {
                    let [path] = files.as_slice() else {
                        bail!("fleiss takes exactly one ratings file");
                    };
                    let ratings = read_to_string(path)?
                        .lines()
                        .filter(|l| !l.trim().is_empty())
                        .map(|l| {
                            l.split_whitespace()
                                .map(str::parse)
                                .collect::<std::result::Result<Vec<usize>, _>>()
                        })
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .context("ratings must be non-negative integers")?;
                    fleiss_kappa(&ratings)?
                }
                KappaMethod::Cohen => {
                    let [a, b] = files.as_slice() else {
                        bail!("cohen takes exactly two label files");
                    };
                    let load = |p: &Path| -> Result<Vec<Label>> {
                        read_to_string(p)?
                            .lines()
                            .filter(|l| !l.trim().is_empty())
                            .map(parse_label)
                            .collect()
                    };
                    cohen_kappa(&load(a)?, &load(b)?)?
                }
            };
            ctx.emit(&format!("{value}\n"))
        }
        Command::SampleAnnotation { n } => {
            let ids = select_annotation_sample(&ctx.corpus()?, n)?;
            ctx.emit(&(ids.join("\n") + "\n"))
        }
        Command::UserStats { json } => {
            let table = user_attribute_report(&ctx.corpus()?);
            if json {
                ctx.emit(&format!("{}\n", serde_json::to_string_pretty(&table)?))
            } else {
                ctx.emit(&table.render())
            }
        }
        Command::Synth { separable } => {
            let rules = ctx.rules()?;
            let corpus = match separable {
                Some(n) => separable_corpus(&rules, n, ctx.global.seed.unwrap_or(0))?,
                None => {
                    let mut spec = SyntheticSpec::default();
                    if let Some(seed) = ctx.global.seed {
                        spec.seed = seed;
                    }
                    generate_corpus(&spec, &rules)?
                }
            };
            // Synthetic identifiers are random, so they are written as generated.
            let text = corpus_jsonl(&corpus)?;
            match &ctx.global.out {
                Some(path) => std::fs::write(path, text)?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {}", redact(&format!("{e:#}")));
        std::process::exit(1);
    }
}
