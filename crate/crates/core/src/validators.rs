//! Structural detection of SSN and IPv4 candidates.
//!
//! A candidate is any `ddd-dd-dddd` (SSN) or dotted-quad (IPv4) substring
//! bounded by non-digits on both sides. Each candidate is then validated:
//!
//! * SSN: area may not be 666 or 900–999, and no segment may be all zeros.
//! * IPv4: no octet above 255, `0.0.0.0` and `8.8.8.8` are trivial, and
//!   `192.168.*` / `127.0.0.*` are private.
//!
//! Spans are `[start, end)` offsets counted in `char`s, not bytes.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{Category, LabeledCorpus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CandidateKind {
    Ssn,
    Ipv4,
}

impl From<Category> for CandidateKind {
    fn from(category: Category) -> Self {
        match category {
            Category::Ssn => CandidateKind::Ssn,
            Category::Ip => CandidateKind::Ipv4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    Area666,
    Area900To999,
    ZeroSegment,
    OctetGt255,
    TrivialAddress,
    PrivatePrefix,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Area666 => "AREA_666",
            RejectReason::Area900To999 => "AREA_900_999",
            RejectReason::ZeroSegment => "ZERO_SEGMENT",
            RejectReason::OctetGt255 => "OCTET_GT_255",
            RejectReason::TrivialAddress => "TRIVIAL_ADDRESS",
            RejectReason::PrivatePrefix => "PRIVATE_PREFIX",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateMatch {
    pub kind: CandidateKind,
    pub raw: String,
    /// Character offsets into the scanned text.
    pub span: Range<usize>,
    pub reject_reason: Option<RejectReason>,
}

impl CandidateMatch {
    pub fn is_valid(&self) -> bool {
        self.reject_reason.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SsnOptions {
    /// Also match bare nine-digit runs. Off by default: such runs are
    /// mostly phone numbers, order ids and timestamps.
    pub allow_bare: bool,
}

/// Checks the area/group/serial segments of a structurally matched SSN.
pub fn ssn_reject_reason(area: u32, group: u32, serial: u32) -> Option<RejectReason> {
    if area == 666 {
        Some(RejectReason::Area666)
    } else if (900..=999).contains(&area) {
        Some(RejectReason::Area900To999)
    } else if area == 0 || group == 0 || serial == 0 {
        Some(RejectReason::ZeroSegment)
    } else {
        None
    }
}

/// Checks the parsed octets of a structurally matched dotted quad.
pub fn ipv4_reject_reason(octets: [u32; 4]) -> Option<RejectReason> {
    if octets.iter().any(|&o| o > 255) {
        Some(RejectReason::OctetGt255)
    } else if octets == [0, 0, 0, 0] || octets == [8, 8, 8, 8] {
        Some(RejectReason::TrivialAddress)
    } else if octets[..2] == [192, 168] || octets[..3] == [127, 0, 0] {
        Some(RejectReason::PrivatePrefix)
    } else {
        None
    }
}

/// Text as a char vector, so spans are char offsets.
struct Scan {
    chars: Vec<char>,
}

impl Scan {
    fn new(text: &str) -> Self {
        Scan {
            chars: text.chars().collect(),
        }
    }

    fn is_digit(&self, i: usize) -> bool {
        self.chars.get(i).is_some_and(char::is_ascii_digit)
    }

    fn is_char(&self, i: usize, c: char) -> bool {
        self.chars.get(i) == Some(&c)
    }

    /// Length of the digit run starting at `i`.
    fn run(&self, i: usize) -> usize {
        self.chars[i.min(self.chars.len())..]
            .iter()
            .take_while(|c| c.is_ascii_digit())
            .count()
    }

    fn value(&self, range: Range<usize>) -> u32 {
        self.chars[range]
            .iter()
            .fold(0, |acc, c| acc * 10 + c.to_digit(10).unwrap_or(0))
    }

    fn slice(&self, range: Range<usize>) -> String {
        self.chars[range].iter().collect()
    }

    /// Starting positions of maximal digit runs.
    fn run_starts(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.chars.len()).filter(|&i| self.is_digit(i) && (i == 0 || !self.is_digit(i - 1)))
    }
}

pub fn find_ssn_candidates(text: &str) -> Vec<CandidateMatch> {
    find_ssn_candidates_with(text, SsnOptions::default())
}

pub fn find_ssn_candidates_with(text: &str, options: SsnOptions) -> Vec<CandidateMatch> {
    let scan = Scan::new(text);
    let mut out = Vec::new();
    let mut resume = 0;
    for start in scan.run_starts().collect::<Vec<_>>() {
        if start < resume {
            continue;
        }
        let hyphenated = scan.run(start) == 3
            && scan.is_char(start + 3, '-')
            && scan.run(start + 4) == 2
            && scan.is_char(start + 6, '-')
            && scan.run(start + 7) == 4;
        let (area, group, serial, end) = if hyphenated {
            (
                start..start + 3,
                start + 4..start + 6,
                start + 7..start + 11,
                start + 11,
            )
        } else if options.allow_bare && scan.run(start) == 9 {
            (
                start..start + 3,
                start + 3..start + 5,
                start + 5..start + 9,
                start + 9,
            )
        } else {
            continue;
        };
        out.push(CandidateMatch {
            kind: CandidateKind::Ssn,
            raw: scan.slice(start..end),
            span: start..end,
            reject_reason: ssn_reject_reason(
                scan.value(area),
                scan.value(group),
                scan.value(serial),
            ),
        });
        resume = end;
    }
    out
}

pub fn find_ipv4_candidates(text: &str) -> Vec<CandidateMatch> {
    let scan = Scan::new(text);
    let mut out = Vec::new();
    let mut resume = 0;
    'starts: for start in scan.run_starts().collect::<Vec<_>>() {
        if start < resume {
            continue;
        }
        let mut octets = [0u32; 4];
        let mut pos = start;
        for (n, octet) in octets.iter_mut().enumerate() {
            if n > 0 {
                if !scan.is_char(pos, '.') {
                    continue 'starts;
                }
                pos += 1;
            }
            let len = scan.run(pos);
            if !(1..=3).contains(&len) {
                continue 'starts;
            }
            *octet = scan.value(pos..pos + len);
            pos += len;
        }
        out.push(CandidateMatch {
            kind: CandidateKind::Ipv4,
            raw: scan.slice(start..pos),
            span: start..pos,
            reject_reason: ipv4_reject_reason(octets),
        });
        resume = pos;
    }
    out
}

pub fn find_candidates(text: &str, kind: CandidateKind) -> Vec<CandidateMatch> {
    match kind {
        CandidateKind::Ssn => find_ssn_candidates(text),
        CandidateKind::Ipv4 => find_ipv4_candidates(text),
    }
}

pub fn has_valid_candidate(text: &str, kind: CandidateKind) -> bool {
    find_candidates(text, kind)
        .iter()
        .any(CandidateMatch::is_valid)
}

/// Keeps the records whose effective text holds at least one valid candidate of `kind`.
pub fn structural_filter(corpus: &LabeledCorpus, kind: CandidateKind) -> LabeledCorpus {
    corpus.retain(|r| has_valid_candidate(&r.effective_text(), kind))
}
