//! String-matching rule engine.
//!
//! Rules are case-folded substring tests. Negative rules (negative phrases and
//! invalid-looking SSNs) take precedence over positive ones, and a text that
//! matches nothing defaults to [`Label::Negative`].
//!
//! Matching is deliberately substring-based, not token-based: `"ass"` fires
//! inside `"class"`. The one-hot featurizer inherits the same behavior.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{fold_case, Label};
use crate::error::{Error, Result};
use crate::validators::{find_ipv4_candidates, find_ssn_candidates, CandidateMatch};

const BUNDLED_RULES: &str = include_str!("../data/rules.toml");

pub const YOU_LIVE_IN_IP: &str = "you_live_in_ip";
pub const USER_GEO_IP: &str = "user_geo_ip";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhraseRule {
    pub text: String,
    pub polarity: Polarity,
    /// Whether the phrase is part of the one-hot feature list.
    #[serde(default = "default_true")]
    pub feature: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompoundToggles {
    #[serde(default = "default_true")]
    pub you_live_in_ip: bool,
    #[serde(default = "default_true")]
    pub user_geo_ip: bool,
}

impl Default for CompoundToggles {
    fn default() -> Self {
        CompoundToggles {
            you_live_in_ip: true,
            user_geo_ip: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PronounExtension {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Extensions {
    #[serde(default)]
    pronouns: PronounExtension,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    format: u32,
    #[serde(default)]
    invalid_ssns: Vec<String>,
    #[serde(default)]
    compound: CompoundToggles,
    #[serde(default)]
    extensions: Extensions,
    #[serde(default)]
    phrases: Vec<PhraseRule>,
}

/// How a one-hot feature term is located in text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermMatch {
    Substring,
    Word,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTerm {
    pub text: String,
    pub matching: TermMatch,
}

impl FeatureTerm {
    /// `folded` must already be case-folded.
    pub fn occurs_in(&self, folded: &str) -> bool {
        match self.matching {
            TermMatch::Substring => folded.contains(&self.text),
            TermMatch::Word => words(folded).any(|w| w == self.text),
        }
    }
}

/// Immutable, content-addressed rule set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    phrases: Vec<PhraseRule>,
    invalid_ssns: Vec<String>,
    compound: CompoundToggles,
    pronouns: PronounExtension,
    version_hash: String,
}

impl RuleSet {
    pub fn new(
        phrases: Vec<PhraseRule>,
        invalid_ssns: Vec<String>,
        compound: CompoundToggles,
        pronouns: PronounExtension,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::RuleFormat(m));
        for polarity in [Polarity::Positive, Polarity::Negative] {
            if !phrases.iter().any(|p| p.polarity == polarity) {
                return bad(format!("no {polarity:?} phrases").to_lowercase());
            }
        }
        let mut seen = HashSet::new();
        for phrase in &phrases {
            if phrase.text.is_empty() || phrase.text != fold_case(&phrase.text) {
                return bad(format!(
                    "phrase {:?} must be non-empty lowercase",
                    phrase.text
                ));
            }
            if !seen.insert(phrase.text.as_str()) {
                return bad(format!("duplicate phrase {:?}", phrase.text));
            }
        }
        let mut seen = HashSet::new();
        for ssn in &invalid_ssns {
            let structured = find_ssn_candidates(ssn)
                .first()
                .is_some_and(|m| m.raw == *ssn);
            if !structured {
                return bad(format!("{ssn:?} is not a ddd-dd-dddd number"));
            }
            if !seen.insert(ssn.as_str()) {
                return bad(format!("duplicate invalid ssn {ssn:?}"));
            }
        }
        for token in &pronouns.tokens {
            if token.is_empty() || *token != fold_case(token) {
                return bad(format!("pronoun {token:?} must be non-empty lowercase"));
            }
        }
        let mut rules = RuleSet {
            phrases,
            invalid_ssns,
            compound,
            pronouns,
            version_hash: String::new(),
        };
        rules.version_hash = rules.digest();
        Ok(rules)
    }

    pub fn from_toml_str(source: &str) -> Result<Self> {
        let file: RuleFile =
            toml::from_str(source).map_err(|e| Error::RuleFormat(e.to_string()))?;
        if file.format != 1 {
            return Err(Error::RuleFormat(format!(
                "unsupported format {}",
                file.format
            )));
        }
        RuleSet::new(
            file.phrases,
            file.invalid_ssns,
            file.compound,
            file.extensions.pronouns,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// The rule table shipped with the crate.
    pub fn bundled() -> Self {
        static RULES: OnceLock<RuleSet> = OnceLock::new();
        RULES
            .get_or_init(|| RuleSet::from_toml_str(BUNDLED_RULES).expect("bundled rules are valid"))
            .clone()
    }

    pub fn with_pronouns(mut self, enabled: bool) -> Self {
        self.pronouns.enabled = enabled;
        self.version_hash = self.digest();
        self
    }

    fn digest(&self) -> String {
        let mut canonical = String::new();
        for p in &self.phrases {
            let _ = writeln!(
                canonical,
                "phrase\t{:?}\t{}\t{}",
                p.polarity, p.feature, p.text
            );
        }
        for s in &self.invalid_ssns {
            let _ = writeln!(canonical, "ssn\t{s}");
        }
        let _ = writeln!(
            canonical,
            "compound\t{}\t{}",
            self.compound.you_live_in_ip, self.compound.user_geo_ip
        );
        let _ = writeln!(
            canonical,
            "pronouns\t{}\t{}",
            self.pronouns.enabled,
            self.pronouns.tokens.join(",")
        );
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn version_hash(&self) -> &str {
        &self.version_hash
    }

    pub fn phrases(&self) -> &[PhraseRule] {
        &self.phrases
    }

    pub fn positive_phrases(&self) -> impl Iterator<Item = &str> {
        self.phrases_with(Polarity::Positive)
    }

    pub fn negative_phrases(&self) -> impl Iterator<Item = &str> {
        self.phrases_with(Polarity::Negative)
    }

    fn phrases_with(&self, polarity: Polarity) -> impl Iterator<Item = &str> {
        self.phrases
            .iter()
            .filter(move |p| p.polarity == polarity)
            .map(|p| p.text.as_str())
    }

    pub fn invalid_ssns(&self) -> &[String] {
        &self.invalid_ssns
    }

    pub fn compound(&self) -> CompoundToggles {
        self.compound
    }

    pub fn pronouns(&self) -> &PronounExtension {
        &self.pronouns
    }

    /// Ordered one-hot feature terms.
    pub fn feature_terms(&self) -> Vec<FeatureTerm> {
        let substring = |text: &str| FeatureTerm {
            text: text.to_string(),
            matching: TermMatch::Substring,
        };
        let mut terms: Vec<FeatureTerm> = self
            .phrases
            .iter()
            .filter(|p| p.feature)
            .map(|p| substring(&p.text))
            .chain(self.invalid_ssns.iter().map(|s| substring(s)))
            .collect();
        if self.pronouns.enabled {
            terms.extend(self.pronouns.tokens.iter().map(|t| FeatureTerm {
                text: t.clone(),
                matching: TermMatch::Word,
            }));
        }
        terms
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMatchReport {
    pub matched_positive: Vec<String>,
    pub matched_negative: Vec<String>,
    pub matched_invalid_ssn: Vec<String>,
    pub compound_hits: Vec<String>,
}

impl RuleMatchReport {
    pub fn is_empty(&self) -> bool {
        self.matched_positive.is_empty()
            && self.matched_negative.is_empty()
            && self.matched_invalid_ssn.is_empty()
            && self.compound_hits.is_empty()
    }
}

fn words(folded: &str) -> impl Iterator<Item = &str> {
    folded
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
}

fn has_mention(text: &str) -> bool {
    let chars: Vec<char> = text.chars().collect();
    chars.iter().enumerate().any(|(i, &c)| {
        c == '@'
            && (i == 0 || !chars[i - 1].is_alphanumeric())
            && chars
                .get(i + 1)
                .is_some_and(|n| n.is_alphanumeric() || *n == '_')
    })
}

fn decimal_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"[+-]?\d{1,3}\.(\d+)").expect("static pattern"))
}

/// Finds a latitude/longitude-like pair: two signed decimals with at least
/// three fractional digits, in [-90, 90] and [-180, 180], separated by a comma
/// and/or whitespace.
pub fn has_coordinate_pair(text: &str) -> bool {
    let bytes = text.as_bytes();
    let digit_at = |i: usize| bytes.get(i).is_some_and(u8::is_ascii_digit);
    let mut decimals: Vec<(usize, usize, f64)> = Vec::new();
    for caps in decimal_pattern().captures_iter(text) {
        let m = caps.get(0).expect("whole match");
        let (start, end) = (m.start(), m.end());
        let glued_before = start > 0
            && (digit_at(start - 1)
                || (bytes[start - 1] == b'.' && start > 1 && digit_at(start - 2)));
        let glued_after = digit_at(end) || (bytes.get(end) == Some(&b'.') && digit_at(end + 1));
        if glued_before || glued_after || caps[1].len() < 3 {
            continue;
        }
        if let Ok(value) = m.as_str().parse::<f64>() {
            decimals.push((start, end, value));
        }
    }
    decimals.windows(2).any(|pair| {
        let (_, first_end, lat) = pair[0];
        let (second_start, _, lon) = pair[1];
        let gap = &text[first_end..second_start];
        let separated = !gap.is_empty()
            && gap.chars().all(|c| c == ',' || c.is_whitespace())
            && gap.matches(',').count() <= 1;
        separated && lat.abs() <= 90.0 && lon.abs() <= 180.0
    })
}

/// Scans `text` against every rule. Deterministic for a given `(text, rules)`.
pub fn match_rules(text: &str, rules: &RuleSet) -> RuleMatchReport {
    let folded = fold_case(text);
    let collect = |items: &mut dyn Iterator<Item = &str>| -> Vec<String> {
        items
            .filter(|p| folded.contains(*p))
            .map(str::to_string)
            .collect()
    };
    let matched_positive = collect(&mut rules.positive_phrases());
    let matched_negative = collect(&mut rules.negative_phrases());
    let matched_invalid_ssn = collect(&mut rules.invalid_ssns.iter().map(String::as_str));

    let mut compound_hits = Vec::new();
    let toggles = rules.compound();
    if toggles.you_live_in_ip || toggles.user_geo_ip {
        let has_ip = find_ipv4_candidates(text)
            .iter()
            .any(CandidateMatch::is_valid);
        if has_ip {
            if toggles.you_live_in_ip && folded.contains("you live in") {
                compound_hits.push(YOU_LIVE_IN_IP.to_string());
            }
            let addressed = words(&folded).any(|w| w == "user") || has_mention(text);
            if toggles.user_geo_ip && addressed && has_coordinate_pair(text) {
                compound_hits.push(USER_GEO_IP.to_string());
            }
        }
    }

    RuleMatchReport {
        matched_positive,
        matched_negative,
        matched_invalid_ssn,
        compound_hits,
    }
}

/// Baseline label: negatives overrule positives; no match means negative.
pub fn heuristic_label(report: &RuleMatchReport) -> Label {
    rule_decision(report).unwrap_or(Label::Negative)
}

/// Label when at least one rule fired, `None` otherwise.
pub fn rule_decision(report: &RuleMatchReport) -> Option<Label> {
    if !report.matched_negative.is_empty() || !report.matched_invalid_ssn.is_empty() {
        Some(Label::Negative)
    } else if !report.matched_positive.is_empty() || !report.compound_hits.is_empty() {
        Some(Label::Positive)
    } else {
        None
    }
}

/// Whether `text` contains any of the rule set's invalid-looking SSNs.
pub fn contains_invalid_ssn(text: &str, rules: &RuleSet) -> bool {
    rules.invalid_ssns.iter().any(|s| text.contains(s.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bundled_rules_have_expected_shape() {
        let rules = RuleSet::bundled();
        assert_eq!(rules.positive_phrases().count(), 29);
        assert_eq!(
            rules.negative_phrases().collect::<Vec<_>>(),
            vec!["[fail2ban] postfix-neelix"]
        );
        assert_eq!(rules.invalid_ssns().len(), 24);
        assert_eq!(rules.feature_terms().len(), 53);
        assert_eq!(rules.clone().with_pronouns(true).feature_terms().len(), 67);
        assert_eq!(rules.version_hash().len(), 64);
    }

    #[test]
    fn version_hash_tracks_content() {
        let rules = RuleSet::bundled();
        assert_eq!(rules.version_hash(), RuleSet::bundled().version_hash());
        assert_ne!(
            rules.version_hash(),
            rules.clone().with_pronouns(true).version_hash()
        );
    }

    #[test]
    fn rejects_malformed_rule_files() {
        let base = r#"
format = 1
invalid_ssns = ["111-11-1111"]
[[phrases]]
text = "dox"
polarity = "positive"
[[phrases]]
text = "ok"
polarity = "negative"
"#;
        assert!(RuleSet::from_toml_str(base).is_ok());
        assert!(RuleSet::from_toml_str(&base.replace("dox", "DOX")).is_err());
        assert!(RuleSet::from_toml_str(&base.replace("111-11-1111", "11-111-1111")).is_err());
        assert!(RuleSet::from_toml_str(&base.replace("\"ok\"", "\"dox\"")).is_err());
        assert!(RuleSet::from_toml_str(&base.replace("format = 1", "format = 2")).is_err());
        assert!(RuleSet::from_toml_str(&base.replace("\"negative\"", "\"positive\"")).is_err());
    }

    #[test]
    fn match_rules_examples() {
        let rules = RuleSet::bundled();
        let report = match_rules("i have your ip address 203.0.113.7", &rules);
        assert_eq!(report.matched_positive, vec!["i have your ip address"]);

        let report = match_rules("[Fail2Ban] POSTFIX-neelix banned 203.0.113.7", &rules);
        assert_eq!(report.matched_negative, vec!["[fail2ban] postfix-neelix"]);

        let report = match_rules("you live in ohio 203.0.113.7", &rules);
        assert_eq!(report.compound_hits, vec![YOU_LIVE_IN_IP]);
    }

    #[test]
    fn you_live_in_needs_a_valid_address() {
        let rules = RuleSet::bundled();
        assert!(match_rules("you live in ohio", &rules)
            .compound_hits
            .is_empty());
        assert!(match_rules("you live in 192.168.0.4", &rules)
            .compound_hits
            .is_empty());
    }

    #[test]
    fn user_geo_compound_rule() {
        let rules = RuleSet::bundled();
        let hit = match_rules("user 203.0.113.7 at 40.7128, -74.0060", &rules);
        assert_eq!(hit.compound_hits, vec![USER_GEO_IP]);
        let hit = match_rules("@victim 203.0.113.7 40.712 -74.006", &rules);
        assert_eq!(hit.compound_hits, vec![USER_GEO_IP]);
        // No addressee.
        let miss = match_rules("203.0.113.7 at 40.7128, -74.0060", &rules);
        assert!(miss.compound_hits.is_empty());
        // Email addresses are not mentions.
        let miss = match_rules("a@b.com 203.0.113.7 40.7128, -74.0060", &rules);
        assert!(miss.compound_hits.is_empty());
    }

    #[test]
    fn coordinate_pairs() {
        assert!(has_coordinate_pair("40.7128, -74.0060."));
        assert!(has_coordinate_pair("+40.712 +74.006"));
        assert!(!has_coordinate_pair("40.71, -74.00"));
        assert!(!has_coordinate_pair("95.0001, 10.0001"));
        assert!(!has_coordinate_pair("40.0001, 190.0001"));
        assert!(!has_coordinate_pair("40.7128,, -74.0060"));
        assert!(!has_coordinate_pair("203.0.113.7 10.200.100.5"));
        assert!(!has_coordinate_pair("40.7128-74.0060"));
    }

    #[test]
    fn substring_matching_is_not_token_matching() {
        let report = match_rules("first class service", &RuleSet::bundled());
        assert_eq!(report.matched_positive, vec!["ass"]);
    }

    #[test]
    fn label_examples() {
        let report = RuleMatchReport {
            matched_invalid_ssn: vec!["111-11-1111".into()],
            matched_positive: vec!["dox".into()],
            ..Default::default()
        };
        assert_eq!(heuristic_label(&report), Label::Negative);

        let report = RuleMatchReport {
            matched_positive: vec!["your ssn is".into()],
            ..Default::default()
        };
        assert_eq!(heuristic_label(&report), Label::Positive);

        assert_eq!(
            heuristic_label(&RuleMatchReport::default()),
            Label::Negative
        );
        assert_eq!(rule_decision(&RuleMatchReport::default()), None);
    }

    #[test]
    fn words_split_on_punctuation() {
        let w: Vec<&str> = words("hey user, you're @me!").collect();
        assert_eq!(w, vec!["hey", "user", "you're", "me"]);
    }

    fn arb_report() -> impl Strategy<Value = RuleMatchReport> {
        let list = || proptest::collection::vec("[a-z]{1,4}", 0..3);
        (list(), list(), list(), list()).prop_map(|(p, n, s, c)| RuleMatchReport {
            matched_positive: p,
            matched_negative: n,
            matched_invalid_ssn: s,
            compound_hits: c,
        })
    }

    proptest! {
        #[test]
        fn negative_matches_never_flip_to_positive(mut report in arb_report(), extra in "[a-z]{1,4}", ssn in any::<bool>()) {
            if ssn {
                report.matched_invalid_ssn.push(extra);
            } else {
                report.matched_negative.push(extra);
            }
            prop_assert_eq!(heuristic_label(&report), Label::Negative);
        }

        #[test]
        fn label_ignores_match_order(mut report in arb_report()) {
            let before = heuristic_label(&report);
            report.matched_positive.reverse();
            report.matched_negative.reverse();
            report.matched_invalid_ssn.reverse();
            report.compound_hits.reverse();
            prop_assert_eq!(heuristic_label(&report), before);
        }

        #[test]
        fn matching_is_deterministic(text in "[ a-zA-Z0-9.@,\\-]{0,80}") {
            let rules = RuleSet::bundled();
            prop_assert_eq!(match_rules(&text, &rules), match_rules(&text, &rules));
        }

        #[test]
        fn reported_strings_occur_in_text(text in "(dox|troll|111-11-1111|you live in|[ a-z0-9.])*") {
            let rules = RuleSet::bundled();
            let folded = fold_case(&text);
            let report = match_rules(&text, &rules);
            for s in report.matched_positive.iter().chain(&report.matched_negative).chain(&report.matched_invalid_ssn) {
                prop_assert!(folded.contains(s.as_str()));
            }
        }
    }
}
