//! Parsing of raw model text into labels, certainty values, and reasoning
//! traces.
//!
//! All parse functions are total: malformed input yields `Unparsed` or
//! `Missing` values, never an error.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::prompts::AnswerFormat;

/// Whether the answer matched the whole response or was scanned out of
/// surrounding prose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strictness {
    Strict,
    Lenient,
}

/// Result of parsing one classification answer. `label: None` means the
/// response could not be reduced to exactly one allowed token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub label: Option<Label>,
    /// The exact substring that matched; empty when unparsed.
    pub matched_token: String,
    pub strictness: Strictness,
}

impl ParsedAnswer {
    fn unparsed() -> Self {
        ParsedAnswer {
            label: None,
            matched_token: String::new(),
            strictness: Strictness::Lenient,
        }
    }
}

/// Elicited confidence in a previous answer, normalized to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "Option<f64>", into = "Option<f64>")]
pub enum Certainty {
    Value(f64),
    Missing,
}

impl Certainty {
    /// Weight contributed to a certainty-weighted sum; a missing value
    /// carries no weight.
    pub fn weight(&self) -> f64 {
        match self {
            Certainty::Value(v) => *v,
            Certainty::Missing => 0.0,
        }
    }
}

impl From<Option<f64>> for Certainty {
    fn from(v: Option<f64>) -> Self {
        match v {
            Some(v) => Certainty::Value(v.clamp(0.0, 1.0)),
            None => Certainty::Missing,
        }
    }
}

impl From<Certainty> for Option<f64> {
    fn from(c: Certainty) -> Self {
        match c {
            Certainty::Value(v) => Some(v),
            Certainty::Missing => None,
        }
    }
}

/// One parsed step of a reasoning table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotStep {
    pub number: i64,
    pub subquestion: String,
    pub process: String,
    pub result: String,
}

/// Parsed reasoning-table response: the step rows plus the final label taken
/// from the result cell of the last well-formed row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotTrace {
    pub steps: Vec<CotStep>,
    pub final_label: Option<Label>,
}

/// A word occurrence: lowercased text plus byte range in the raw input.
struct Word {
    lower: String,
    start: usize,
    end: usize,
}

fn words(raw: &str) -> Vec<Word> {
    let mut out = Vec::new();
    let mut current_start: Option<usize> = None;
    let mut current = String::new();
    for (i, c) in raw.char_indices() {
        if c.is_alphanumeric() {
            if current_start.is_none() {
                current_start = Some(i);
            }
            current.extend(c.to_lowercase());
        } else if let Some(start) = current_start.take() {
            out.push(Word {
                lower: std::mem::take(&mut current),
                start,
                end: i,
            });
        }
    }
    if let Some(start) = current_start {
        out.push(Word {
            lower: current,
            start,
            end: raw.len(),
        });
    }
    out
}

/// Tokens allowed for a given answer format, in label order. Each token is a
/// sequence of words that must appear standalone.
fn allowed_tokens(
    format: AnswerFormat,
    allows_no_argument: bool,
) -> Vec<(Vec<&'static str>, Label)> {
    let mut tokens: Vec<(Vec<&'static str>, Label)> = match format {
        AnswerFormat::Verbal | AnswerFormat::CotTable => vec![
            (vec!["for"], Label::For),
            (vec!["against"], Label::Against),
            (vec!["no", "argument"], Label::NoArgument),
        ],
        AnswerFormat::Letter => vec![
            (vec!["f"], Label::For),
            (vec!["a"], Label::Against),
            (vec!["n"], Label::NoArgument),
        ],
    };
    if !allows_no_argument {
        tokens.retain(|(_, label)| *label != Label::NoArgument);
    }
    tokens
}

/// Two-pass answer parse.
///
/// Strict: after trimming and case-folding, the whole response must equal one
/// allowed token. Lenient: the response must contain exactly one distinct
/// allowed token as a standalone word sequence; zero or several distinct
/// matches yield `Unparsed`.
pub fn parse_label(raw: &str, format: AnswerFormat, allows_no_argument: bool) -> ParsedAnswer {
    let tokens = allowed_tokens(format, allows_no_argument);

    let trimmed = raw.trim();
    let folded = trimmed.to_lowercase();
    for (token_words, label) in &tokens {
        if folded == token_words.join(" ") {
            return ParsedAnswer {
                label: Some(*label),
                matched_token: trimmed.to_string(),
                strictness: Strictness::Strict,
            };
        }
    }

    let word_list = words(raw);
    let mut found: Option<(Label, String)> = None;
    for (token_words, label) in &tokens {
        for window_start in 0..word_list.len() {
            if window_start + token_words.len() > word_list.len() {
                break;
            }
            let matches = token_words
                .iter()
                .zip(&word_list[window_start..])
                .all(|(t, w)| w.lower == *t);
            if matches {
                match &found {
                    Some((prev, _)) if *prev != *label => return ParsedAnswer::unparsed(),
                    Some(_) => {}
                    None => {
                        let start = word_list[window_start].start;
                        let end = word_list[window_start + token_words.len() - 1].end;
                        found = Some((*label, raw[start..end].to_string()));
                    }
                }
            }
        }
    }

    match found {
        Some((label, matched_token)) => ParsedAnswer {
            label: Some(label),
            matched_token,
            strictness: Strictness::Lenient,
        },
        None => ParsedAnswer::unparsed(),
    }
}

/// Finds the first numeric literal in the text.
fn first_number(raw: &str) -> Option<f64> {
    let chars: Vec<(usize, char)> = raw.char_indices().collect();
    for (pos, &(i, c)) in chars.iter().enumerate() {
        if !c.is_ascii_digit() {
            continue;
        }
        let mut start = i;
        if pos > 0 && chars[pos - 1].1 == '-' {
            start = chars[pos - 1].0;
        }
        let mut end_pos = pos;
        while end_pos + 1 < chars.len() && chars[end_pos + 1].1.is_ascii_digit() {
            end_pos += 1;
        }
        // Optional fraction part: a dot followed by at least one digit.
        if end_pos + 2 < chars.len()
            && chars[end_pos + 1].1 == '.'
            && chars[end_pos + 2].1.is_ascii_digit()
        {
            end_pos += 2;
            while end_pos + 1 < chars.len() && chars[end_pos + 1].1.is_ascii_digit() {
                end_pos += 1;
            }
        }
        let end = chars[end_pos].0 + chars[end_pos].1.len_utf8();
        return raw[start..end].parse().ok();
    }
    None
}

/// Reads a certainty statement: the first numeric literal, interpreted as a
/// percentage, clamped to [0, 100] and scaled to [0, 1]. No number means
/// `Missing`.
pub fn parse_certainty(raw: &str) -> Certainty {
    match first_number(raw) {
        Some(n) => Certainty::Value(n.clamp(0.0, 100.0) / 100.0),
        None => Certainty::Missing,
    }
}

/// Splits a markdown table line into trimmed cell strings.
fn table_cells(line: &str) -> Option<Vec<String>> {
    let trimmed = line.trim();
    if !trimmed.starts_with('|') {
        return None;
    }
    let mut cells: Vec<&str> = trimmed.split('|').collect();
    // Leading and trailing pipes produce empty boundary segments.
    if cells.first() == Some(&"") {
        cells.remove(0);
    }
    if cells.last().map(|c| c.trim().is_empty()) == Some(true) {
        cells.pop();
    }
    Some(cells.into_iter().map(|c| c.trim().to_string()).collect())
}

/// Parses a reasoning-table response. Well-formed rows have at least four
/// cells and an integer step number; header and separator rows fail that test
/// and are skipped. Without any well-formed row the final label falls back to
/// a lenient scan of the whole text.
pub fn parse_cot(raw: &str, allows_no_argument: bool) -> CotTrace {
    let mut steps = Vec::new();
    for line in raw.lines() {
        let Some(cells) = table_cells(line) else {
            continue;
        };
        if cells.len() < 4 {
            continue;
        }
        let Ok(number) = cells[0].parse::<i64>() else {
            continue;
        };
        steps.push(CotStep {
            number,
            subquestion: cells[1].clone(),
            process: cells[2].clone(),
            result: cells[3].clone(),
        });
    }
    let final_label = match steps.last() {
        Some(last) => parse_label(&last.result, AnswerFormat::Verbal, allows_no_argument).label,
        None => parse_label(raw, AnswerFormat::Verbal, allows_no_argument).label,
    };
    CotTrace { steps, final_label }
}
