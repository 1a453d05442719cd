//! Seeded corpus generators for demos and tests. Nothing here resembles a
//! real person: names, handles and places come from small fixed lists and
//! identifiers are drawn at random.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{fold_case, AuthorProfile, Category, Label, LabeledCorpus, TweetRecord};
use crate::error::Result;
use crate::heuristics::{Polarity, RuleSet};
use crate::validators::{
    has_valid_candidate, ipv4_reject_reason, ssn_reject_reason, CandidateKind,
};

const HANDLES: &[&str] = &[
    "@quietfox",
    "@blue_heron",
    "@tinkerpaw",
    "@moss_lane",
    "@eastwind",
    "@sable_kit",
];
const NAMES: &[&str] = &[
    "jordan", "casey", "riley", "morgan", "avery", "quinn", "rowan", "sage",
];
const CITIES: &[&str] = &[
    "springfield",
    "riverton",
    "lakeside",
    "fairview",
    "oakdale",
    "millbrook",
];
const FILLER: &[&str] = &[
    "today",
    "again",
    "tonight",
    "really",
    "seriously",
    "everyone",
    "literally",
    "anyway",
    "honestly",
    "lol",
];

const BUNDLED_CORPUS: &str = include_str!("../data/synthetic_corpus.jsonl");

/// The demo corpus shipped with the crate; equal to `generate_corpus` with default settings.
pub fn bundled_corpus() -> Result<LabeledCorpus> {
    crate::corpus::parse_corpus(BUNDLED_CORPUS.as_bytes())
}

/// Generator settings for the demo corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub ssn_records: usize,
    pub ip_records: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            ssn_records: 80,
            ip_records: 160,
            seed: 2021,
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty list")
}

/// A structurally valid SSN that is not on the invalid-looking list.
pub fn random_valid_ssn(rng: &mut impl Rng, rules: &RuleSet) -> String {
    loop {
        let (a, g, s) = (
            rng.gen_range(1..900),
            rng.gen_range(1..100),
            rng.gen_range(1..10000),
        );
        let text = format!("{a:03}-{g:02}-{s:04}");
        if ssn_reject_reason(a, g, s).is_none() && !rules.invalid_ssns().contains(&text) {
            return text;
        }
    }
}

/// An invalid-looking SSN from the rule list that still passes structural validation.
pub fn random_joke_ssn(rng: &mut impl Rng, rules: &RuleSet) -> String {
    let usable: Vec<&String> = rules
        .invalid_ssns()
        .iter()
        .filter(|s| has_valid_candidate(s, CandidateKind::Ssn))
        .collect();
    usable
        .choose(rng)
        .map_or_else(|| random_valid_ssn(rng, rules), |s| (*s).clone())
}

pub fn random_valid_ipv4(rng: &mut impl Rng) -> String {
    loop {
        let o = [
            rng.gen_range(1..=255),
            rng.gen_range(0..=255),
            rng.gen_range(0..=255),
            rng.gen_range(1..=254),
        ];
        if ipv4_reject_reason(o).is_none() {
            return format!("{}.{}.{}.{}", o[0], o[1], o[2], o[3]);
        }
    }
}

fn author(rng: &mut ChaCha8Rng, label: Label, index: usize) -> AuthorProfile {
    // Disclosing accounts skew new and sparse; others skew established.
    let fresh = match label {
        Label::Positive => rng.gen_bool(0.6),
        Label::Negative => rng.gen_bool(0.15),
    };
    let name_len = if fresh {
        rng.gen_range(1..=24)
    } else {
        rng.gen_range(4..=14)
    };
    let name: String = (0..name_len)
        .map(|i| (b'a' + ((index + i * 7) % 26) as u8) as char)
        .collect();
    AuthorProfile {
        user_id: Some(format!("u{:04}", index / 2)),
        followers_count: if fresh {
            rng.gen_range(0..5)
        } else {
            rng.gen_range(20..5000)
        },
        friends_count: if fresh {
            rng.gen_range(0..8)
        } else {
            rng.gen_range(30..900)
        },
        statuses_count: if fresh {
            rng.gen_range(0..60)
        } else {
            rng.gen_range(200..40000)
        },
        favourites_count: if fresh {
            rng.gen_range(0..3)
        } else {
            rng.gen_range(10..9000)
        },
        created_year: if fresh {
            rng.gen_range(2019..=2021)
        } else {
            rng.gen_range(2008..=2018)
        },
        verified: !fresh && rng.gen_bool(0.03),
        default_profile_image: fresh && rng.gen_bool(0.5),
        has_banner: !fresh && rng.gen_bool(0.7),
        customized_theme: !fresh && rng.gen_bool(0.3),
        name: Some(name),
        location: (!fresh || rng.gen_bool(0.2)).then(|| pick(rng, CITIES).to_string()),
        url: (!fresh && rng.gen_bool(0.4)).then(|| format!("https://example.org/{index}")),
    }
}

fn coordinates(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{:.5}, {:.5}",
        rng.gen_range(-60.0..60.0),
        rng.gen_range(-170.0..170.0)
    )
}

fn ssn_text(rng: &mut ChaCha8Rng, rules: &RuleSet, label: Label) -> String {
    let ssn = random_valid_ssn(rng, rules);
    let joke = random_joke_ssn(rng, rules);
    let (h, n, f) = (pick(rng, HANDLES), pick(rng, NAMES), pick(rng, FILLER));
    match (label, rng.gen_range(0..6)) {
        (Label::Positive, 0) => format!("{h} your ssn is {ssn} now everyone has it"),
        (Label::Positive, 1) => format!("{n} full name and ssn {ssn} dropping the rest {f}"),
        (Label::Positive, 2) => format!("{h} delete this or i post more. ssn {ssn}"),
        (Label::Positive, 3) => format!("you wanted this {h}? {ssn} enjoy the credit checks"),
        (Label::Positive, 4) => format!("{n} lives in {} and the ssn is {ssn}", pick(rng, CITIES)),
        (Label::Positive, _) => format!("exposing {n} for what they did: {ssn} {f}"),
        (Label::Negative, 0) => format!("my ssn is {joke} lmao good luck {f}"),
        (Label::Negative, 1) => format!("new card came, ssn {joke} obviously {f}"),
        (Label::Negative, 2) => format!("reminder: never share numbers like {ssn} with callers"),
        (Label::Negative, 3) => format!("scam call asked for my ssn, gave them {joke}"),
        (Label::Negative, 4) => format!("example format on the form was {ssn}, weird {f}"),
        (Label::Negative, _) => format!("i hate paperwork. typed {ssn} on my own tax form {f}"),
    }
}

fn ip_text(rng: &mut ChaCha8Rng, label: Label) -> String {
    let ip = random_valid_ipv4(rng);
    let (h, n, f) = (pick(rng, HANDLES), pick(rng, NAMES), pick(rng, FILLER));
    match (label, rng.gen_range(0..7)) {
        (Label::Positive, 0) => format!("{h} your ip address is {ip} watch out"),
        (Label::Positive, 1) => format!("{h} i have your ip address {ip} {f}"),
        (Label::Positive, 2) => format!("so you live in {}? {ip}", pick(rng, CITIES)),
        (Label::Positive, 3) => format!("{h} {} {ip} see you soon", coordinates(rng)),
        (Label::Positive, 4) => format!("{n} keeps talking, here is their router {ip} go wild"),
        (Label::Positive, 5) => format!("{h} this you? {ip} what a loser"),
        (Label::Positive, _) => format!("everyone ddos {ip} that is {n} at home {f}"),
        (Label::Negative, 0) => format!("[Fail2Ban] postfix-neelix: banned {ip} after 5 attempts"),
        (Label::Negative, 1) => format!("my minecraft server is up at {ip} come play {f}"),
        (Label::Negative, 2) => format!("switched dns to {ip} and pages load faster"),
        (Label::Negative, 3) => format!("blocked {ip} scanning port 22 all night"),
        (Label::Negative, 4) => format!("router admin page lives at {ip} for most models"),
        (Label::Negative, 5) => format!("i hate lag, my ip is {ip} and ping is awful"),
        (Label::Negative, _) => format!("new vpn exit node {ip} works great {f}"),
    }
}

/// Demo corpus of SSN and IP disclosures, about two thirds positive.
/// Labels follow the template's intent, so rules alone misclassify some.
pub fn generate_corpus(spec: &SyntheticSpec, rules: &RuleSet) -> Result<LabeledCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.ssn_records + spec.ip_records);
    let plan = std::iter::repeat_n(Category::Ssn, spec.ssn_records)
        .chain(std::iter::repeat_n(Category::Ip, spec.ip_records));
    for (i, category) in plan.enumerate() {
        let label = if rng.gen_bool(2.0 / 3.0) {
            Label::Positive
        } else {
            Label::Negative
        };
        let text = match category {
            Category::Ssn => ssn_text(&mut rng, rules, label),
            Category::Ip => ip_text(&mut rng, label),
        };
        let mut record = TweetRecord::new(format!("syn-{i:04}"), text, category)
            .with_label(label)
            .with_author(author(&mut rng, label, i));
        if rng.gen_bool(0.05) {
            record = record.with_quote(pick(&mut rng, FILLER));
        }
        records.push(record);
    }
    LabeledCorpus::from_records(records)
}

/// The label implied by phrase presence: positive iff some positive
/// phrase occurs and no invalid-looking SSN does.
pub fn presence_label(text: &str, rules: &RuleSet) -> Label {
    let folded = fold_case(text);
    let positive = rules
        .phrases()
        .iter()
        .any(|p| p.polarity == Polarity::Positive && p.feature && folded.contains(&p.text));
    let invalid = rules
        .invalid_ssns()
        .iter()
        .any(|s| folded.contains(s.as_str()));
    if positive && !invalid {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Corpus whose labels are a deterministic function of rule-string presence,
/// so a one-hot linear classifier can fit it exactly.
pub fn separable_corpus(rules: &RuleSet, n: usize, seed: u64) -> Result<LabeledCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phrases: Vec<&str> = rules
        .phrases()
        .iter()
        .filter(|p| p.polarity == Polarity::Positive && p.feature)
        .map(|p| p.text.as_str())
        .collect();
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut parts: Vec<String> = (0..rng.gen_range(2..6))
            .map(|_| pick(&mut rng, FILLER).to_string())
            .collect();
        if rng.gen_bool(0.5) {
            for _ in 0..rng.gen_range(1..=2) {
                parts.push(pick(&mut rng, &phrases).to_string());
            }
        }
        if rng.gen_bool(0.2) {
            parts.push(
                rules
                    .invalid_ssns()
                    .choose(&mut rng)
                    .expect("invalid list")
                    .clone(),
            );
        }
        let category = if rng.gen_bool(0.5) {
            Category::Ssn
        } else {
            Category::Ip
        };
        parts.push(match category {
            Category::Ssn => random_valid_ssn(&mut rng, rules),
            Category::Ip => random_valid_ipv4(&mut rng),
        });
        parts.shuffle(&mut rng);
        let text = parts.join(" ");
        if !seen.insert(text.clone()) {
            continue;
        }
        let label = presence_label(&text, rules);
        records.push(TweetRecord::new(format!("sep-{i:05}"), text, category).with_label(label));
    }
    LabeledCorpus::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_corpus_is_seeded_and_structured() {
        let rules = RuleSet::bundled();
        let a = generate_corpus(&SyntheticSpec::default(), &rules).unwrap();
        let b = generate_corpus(&SyntheticSpec::default(), &rules).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 240);
        assert!(a.positive_count() > a.negative_count());
        assert!(a.negative_count() >= 40);
        for r in a.records() {
            assert!(
                has_valid_candidate(&r.effective_text(), r.category.into()),
                "{}",
                r.text
            );
        }
    }

    #[test]
    fn bundled_corpus_file_matches_generator() {
        let rules = RuleSet::bundled();
        let corpus = generate_corpus(&SyntheticSpec::default(), &rules).unwrap();
        let mut out = Vec::new();
        crate::corpus::write_corpus(&corpus, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), BUNDLED_CORPUS);
        assert_eq!(bundled_corpus().unwrap(), corpus);
    }

    #[test]
    fn presence_label_rules() {
        let rules = RuleSet::bundled();
        assert_eq!(presence_label("watch out 1.2.3.4", &rules), Label::Positive);
        assert_eq!(
            presence_label("watch out 111-11-1111", &rules),
            Label::Negative
        );
        assert_eq!(presence_label("nothing 1.2.3.4", &rules), Label::Negative);
    }

    #[test]
    fn separable_labels_follow_presence() {
        let rules = RuleSet::bundled();
        let corpus = separable_corpus(&rules, 300, 4).unwrap();
        assert!(corpus.len() > 250);
        assert!(corpus.positive_count() > 50 && corpus.negative_count() > 50);
        for r in corpus.records() {
            assert_eq!(r.label, Some(presence_label(&r.text, &rules)));
            assert!(has_valid_candidate(&r.text, r.category.into()));
        }
    }

    #[test]
    fn random_identifiers_are_valid() {
        let rules = RuleSet::bundled();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert!(has_valid_candidate(
                &random_valid_ssn(&mut rng, &rules),
                Category::Ssn.into()
            ));
            assert!(has_valid_candidate(
                &random_valid_ipv4(&mut rng),
                Category::Ip.into()
            ));
        }
    }
}
