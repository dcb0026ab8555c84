//! Prompt rendering for the six classification prompt designs plus the
//! certainty follow-up.
//!
//! Rendering is a pure function of (prompt kind, record, topic table): equal
//! inputs produce byte-identical prompt text. Record text is embedded
//! verbatim. Records from PRO/CON-only corpora get minimally adapted variants
//! with the neutral option removed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ArgumentRecord, Dataset, TopicSpec};

/// The six prompt designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptKind {
    P1,
    P2,
    P3,
    P4,
    CoT,
    FewShot,
}

impl PromptKind {
    /// The four rephrased base prompts, in vote order.
    pub const BASE: [PromptKind; 4] = [
        PromptKind::P1,
        PromptKind::P2,
        PromptKind::P3,
        PromptKind::P4,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PromptKind::P1 => "P1",
            PromptKind::P2 => "P2",
            PromptKind::P3 => "P3",
            PromptKind::P4 => "P4",
            PromptKind::CoT => "CoT",
            PromptKind::FewShot => "FewShot",
        }
    }

    /// The answer format each design demands.
    pub fn format(&self) -> AnswerFormat {
        match self {
            PromptKind::P1 | PromptKind::P3 | PromptKind::FewShot => AnswerFormat::Verbal,
            PromptKind::P2 | PromptKind::P4 => AnswerFormat::Letter,
            PromptKind::CoT => AnswerFormat::CotTable,
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_uppercase().as_str() {
            "P1" => Ok(PromptKind::P1),
            "P2" => Ok(PromptKind::P2),
            "P3" => Ok(PromptKind::P3),
            "P4" => Ok(PromptKind::P4),
            "COT" => Ok(PromptKind::CoT),
            "FEWSHOT" | "FEW_SHOT" | "FEW-SHOT" => Ok(PromptKind::FewShot),
            _ => Err(format!("unknown prompt kind: {s:?}")),
        }
    }
}

/// How the model is told to answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerFormat {
    /// "For" / "Against" / "No argument".
    Verbal,
    /// Single letter F / A / N.
    Letter,
    /// Markdown reasoning table; final result cell is verbal.
    CotTable,
}

/// A concrete prompt instance ready to send.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub kind: PromptKind,
    pub text: String,
    pub format: AnswerFormat,
    /// False for PRO/CON-only records, whose prompts omit the neutral option.
    pub allows_no_argument: bool,
}

/// The follow-up sent after a classification answer to elicit certainty.
pub const CERTAINTY_FOLLOW_UP: &str = "On a scale of 0 to 100, what is your certainty, \
expressed as a percentage, in your previous classification? Answer with the number only.";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("no topic configuration for {0:?}")]
    MissingTopicSpec(String),
    #[error("prompt kind {kind} not renderable: {reason}")]
    UnsupportedKind { kind: PromptKind, reason: String },
    #[error("failed to read topic table {path}: {detail}")]
    BadTopicTable { path: String, detail: String },
}

/// Topic key -> prompt configuration, loaded from `topics.json` or built in.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TopicTable {
    topics: BTreeMap<String, TopicSpec>,
}

fn normalize_key(key: &str) -> String {
    key.trim().to_lowercase().replace([' ', '-'], "_")
}

impl TopicTable {
    /// The shipped table covering the eight standard debate topics.
    pub fn builtin() -> Self {
        let topics: BTreeMap<String, TopicSpec> =
            serde_json::from_str(include_str!("../data/topics.json"))
                .expect("bundled topic table parses");
        TopicTable { topics }
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let data = std::fs::read_to_string(path).map_err(|e| PromptError::BadTopicTable {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let topics: BTreeMap<String, TopicSpec> =
            serde_json::from_str(&data).map_err(|e| PromptError::BadTopicTable {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        Ok(TopicTable { topics })
    }

    pub fn get(&self, key: &str) -> Option<&TopicSpec> {
        self.topics.get(&normalize_key(key))
    }

    pub fn insert(&mut self, key: &str, spec: TopicSpec) {
        self.topics.insert(normalize_key(key), spec);
    }
}

/// Resolves the thesis slot for a record: PRO/CON records carry their own
/// conclusion verbatim; topic-file records use the configured short form
/// (elaborate thesis for P2).
pub fn thesis_for(
    record: &ArgumentRecord,
    topics: &TopicTable,
    kind: PromptKind,
) -> Result<String, PromptError> {
    match record.dataset {
        Dataset::ArgsMe => Ok(record.thesis.clone()),
        Dataset::Ukp => {
            let spec = topics
                .get(&record.topic)
                .ok_or_else(|| PromptError::MissingTopicSpec(record.topic.clone()))?;
            Ok(match kind {
                PromptKind::P2 => spec.thesis.clone(),
                _ => spec.short.clone(),
            })
        }
    }
}

/// Renders one prompt for one record.
pub fn render(
    kind: PromptKind,
    record: &ArgumentRecord,
    topics: &TopicTable,
) -> Result<RenderedPrompt, PromptError> {
    let thesis = thesis_for(record, topics, kind)?;
    let text = &record.text;
    let neutral = record.dataset == Dataset::Ukp;

    let body = match kind {
        PromptKind::P1 => {
            if neutral {
                format!(
                    "Is the sentence: \"{text}\" an argument for or against \"{thesis}\", \
                     or is it no argument? Return one of the expressions: \"For\", \"Against\" \
                     or \"No argument\", without any additional commentary."
                )
            } else {
                format!(
                    "Is the sentence: \"{text}\" an argument for or against \"{thesis}\"? \
                     Return one of the expressions: \"For\" or \"Against\", without any \
                     additional commentary."
                )
            }
        }
        PromptKind::P2 => {
            if neutral {
                format!(
                    "The thesis is: \"{thesis}\" Indicate if the argument \"{text}\" is for \
                     this thesis (F), against this thesis (A), or neutral (N). Please respond \
                     with only one letter: F, A, or N, without any additional commentary."
                )
            } else {
                format!(
                    "The thesis is: \"{thesis}\" Indicate if the argument \"{text}\" is for \
                     this thesis (F) or against this thesis (A). Please respond with only one \
                     letter: F or A, without any additional commentary."
                )
            }
        }
        PromptKind::P3 => {
            if neutral {
                format!(
                    "In the context of the ongoing public debate, evaluate whether the text \
                     \"{text}\" represents an argument supporting or opposing \"{thesis}\", \
                     or whether it does not qualify as an argument at all. Respond with one \
                     of the expressions: \"For\", \"Against\" or \"No argument\"."
                )
            } else {
                format!(
                    "In the context of the ongoing public debate, evaluate whether the text \
                     \"{text}\" represents an argument supporting or opposing \"{thesis}\". \
                     Respond with one of the expressions: \"For\" or \"Against\"."
                )
            }
        }
        PromptKind::P4 => {
            if neutral {
                format!(
                    "Is the sentence: \"{text}\" an argument for (F) or against (A) \
                     \"{thesis}\" or is it no argument (N)? Return a single letter: F, A, \
                     or N, without any additional commentary."
                )
            } else {
                format!(
                    "Is the sentence: \"{text}\" an argument for (F) or against (A) \
                     \"{thesis}\"? Return a single letter: F or A, without any additional \
                     commentary."
                )
            }
        }
        PromptKind::CoT => {
            let question = if neutral {
                format!(
                    "Is the sentence: \"{text}\" an argument for or against \"{thesis}\", \
                     or is it no argument?"
                )
            } else {
                format!("Is the sentence: \"{text}\" an argument for or against \"{thesis}\"?")
            };
            let options = if neutral {
                "\"For\", \"Against\" or \"No Argument\""
            } else {
                "\"For\" or \"Against\""
            };
            format!(
                "{question}\nSolve the argument classification problem. Think through the \
                 problem step by step to solve it. At each step, you have to figure out:\n\
                 - the step number,\n\
                 - the sub - question to be answered in that step,\n\
                 - the thought process of solving that step, and\n\
                 - the result of solving that step.\n\
                 Respond in the following markdown table format for each step: \
                 \"| step | subquestion | process | result |\". The result should be one of \
                 the expressions: {options}, without any additional commentary."
            )
        }
        PromptKind::FewShot => {
            if !neutral {
                return Err(PromptError::UnsupportedKind {
                    kind,
                    reason: "few-shot exemplars are defined for topic-file corpora only"
                        .to_string(),
                });
            }
            let spec = topics
                .get(&record.topic)
                .ok_or_else(|| PromptError::MissingTopicSpec(record.topic.clone()))?;
            let examples = spec
                .examples
                .as_ref()
                .ok_or_else(|| PromptError::UnsupportedKind {
                    kind,
                    reason: format!(
                        "no few-shot exemplars configured for topic {:?}",
                        record.topic
                    ),
                })?;
            format!(
                "Is the sentence: \"{text}\" an argument for or against \"{thesis}\", or is \
                 it no argument? Return one of the expressions: \"For\", \"Against\" or \
                 \"No argument\", without any additional commentary. Here are some examples:\n\
                 Sentence: {} Answer: For\n\
                 Sentence: {} Answer: Against\n\
                 Sentence: {} Answer: No argument",
                examples.for_example, examples.against_example, examples.no_argument_example
            )
        }
    };

    Ok(RenderedPrompt {
        kind,
        text: body,
        format: kind.format(),
        allows_no_argument: neutral,
    })
}

/// The certainty follow-up question. Constant across records and prompt
/// kinds: the conversation history carries the answer being rated.
pub fn render_certainty(_previous: &RenderedPrompt) -> String {
    CERTAINTY_FOLLOW_UP.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn ukp_record(topic: &str) -> ArgumentRecord {
        ArgumentRecord {
            id: "r1".to_string(),
            dataset: Dataset::Ukp,
            topic: topic.to_string(),
            thesis: String::new(),
            text: "Capital punishment deters crime .".to_string(),
            gold: Label::For,
        }
    }

    fn argsme_record() -> ArgumentRecord {
        ArgumentRecord {
            id: "d1/0".to_string(),
            dataset: Dataset::ArgsMe,
            topic: "idebate".to_string(),
            thesis: "We should ban homework".to_string(),
            text: "Homework causes stress".to_string(),
            gold: Label::Against,
        }
    }

    #[test]
    fn p2_uses_the_elaborate_thesis() {
        let topics = TopicTable::builtin();
        let record = ukp_record("death_penalty");
        assert_eq!(
            thesis_for(&record, &topics, PromptKind::P2).unwrap(),
            "The death penalty should be allowed"
        );
        assert_eq!(
            thesis_for(&record, &topics, PromptKind::P1).unwrap(),
            "the death penalty"
        );
        let wage = ukp_record("minimum_wage");
        assert_eq!(
            thesis_for(&wage, &topics, PromptKind::P2).unwrap(),
            "The minimum wage is justified and should be increased"
        );
    }

    #[test]
    fn argsme_thesis_is_the_conclusion_verbatim() {
        let topics = TopicTable::builtin();
        let record = argsme_record();
        for kind in [PromptKind::P1, PromptKind::P2, PromptKind::P4] {
            assert_eq!(
                thesis_for(&record, &topics, kind).unwrap(),
                "We should ban homework"
            );
        }
    }

    #[test]
    fn missing_topic_spec_is_an_error() {
        let topics = TopicTable::builtin();
        let record = ukp_record("flat_earth");
        assert!(matches!(
            thesis_for(&record, &topics, PromptKind::P1),
            Err(PromptError::MissingTopicSpec(t)) if t == "flat_earth"
        ));
    }

    #[test]
    fn p4_ends_with_the_single_letter_instruction() {
        let topics = TopicTable::builtin();
        let rendered = render(PromptKind::P4, &ukp_record("abortion"), &topics).unwrap();
        assert!(rendered
            .text
            .ends_with("Return a single letter: F, A, or N, without any additional commentary."));
        assert_eq!(rendered.format, AnswerFormat::Letter);
        assert!(rendered.allows_no_argument);
    }

    #[test]
    fn argsme_prompts_omit_the_neutral_option() {
        let topics = TopicTable::builtin();
        let record = argsme_record();
        for kind in [
            PromptKind::P1,
            PromptKind::P2,
            PromptKind::P3,
            PromptKind::P4,
            PromptKind::CoT,
        ] {
            let rendered = render(kind, &record, &topics).unwrap();
            assert!(!rendered.allows_no_argument);
            let lower = rendered.text.to_lowercase();
            assert!(!lower.contains("no argument"), "{kind}: {}", rendered.text);
            assert!(!lower.contains("neutral"), "{kind}");
            assert!(rendered.text.contains(&record.text));
            assert!(rendered.text.contains(&record.thesis));
        }
    }

    #[test]
    fn ukp_prompts_offer_three_options() {
        let topics = TopicTable::builtin();
        let record = ukp_record("cloning");
        for kind in [PromptKind::P1, PromptKind::P3, PromptKind::FewShot] {
            let rendered = render(kind, &record, &topics).unwrap();
            let lower = rendered.text.to_lowercase();
            assert!(lower.contains("\"for\""));
            assert!(lower.contains("\"against\""));
            assert!(lower.contains("no argument"));
        }
        let p2 = render(PromptKind::P2, &record, &topics).unwrap();
        assert!(p2.text.contains("(F)") && p2.text.contains("(A)") && p2.text.contains("(N)"));
    }

    #[test]
    fn cot_contains_the_table_contract() {
        let topics = TopicTable::builtin();
        let rendered = render(PromptKind::CoT, &ukp_record("abortion"), &topics).unwrap();
        assert!(rendered
            .text
            .contains("| step | subquestion | process | result |"));
        assert!(rendered.text.contains("step by step"));
        assert_eq!(rendered.format, AnswerFormat::CotTable);
    }

    #[test]
    fn fewshot_embeds_the_cloning_exemplars() {
        let topics = TopicTable::builtin();
        let rendered = render(PromptKind::FewShot, &ukp_record("cloning"), &topics).unwrap();
        assert!(rendered.text.contains("Here are some examples:"));
        assert!(rendered.text.contains("So ... is cloning good or bad ?"));
        assert!(rendered.text.contains("Answer: No argument"));
    }

    #[test]
    fn fewshot_without_exemplars_is_unsupported() {
        let mut topics = TopicTable::builtin();
        topics.insert(
            "widgets",
            TopicSpec {
                short: "widgets".to_string(),
                thesis: "Widgets are good".to_string(),
                examples: None,
            },
        );
        let err = render(PromptKind::FewShot, &ukp_record("widgets"), &topics).unwrap_err();
        assert!(matches!(
            err,
            PromptError::UnsupportedKind {
                kind: PromptKind::FewShot,
                ..
            }
        ));

        let err = render(PromptKind::FewShot, &argsme_record(), &topics).unwrap_err();
        assert!(matches!(err, PromptError::UnsupportedKind { .. }));
    }

    #[test]
    fn rendering_is_pure() {
        let topics = TopicTable::builtin();
        let record = ukp_record("gun_control");
        for kind in [
            PromptKind::P1,
            PromptKind::P2,
            PromptKind::P3,
            PromptKind::P4,
            PromptKind::CoT,
            PromptKind::FewShot,
        ] {
            let a = render(kind, &record, &topics).unwrap();
            let b = render(kind, &record, &topics).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn record_text_is_embedded_verbatim() {
        let topics = TopicTable::builtin();
        let mut record = ukp_record("abortion");
        record.text = "Messy \"quoted\" text  with   spacing , and commas .".to_string();
        for kind in PromptKind::BASE {
            let rendered = render(kind, &record, &topics).unwrap();
            assert!(rendered.text.contains(&record.text));
        }
    }

    #[test]
    fn certainty_follow_up_is_constant() {
        let topics = TopicTable::builtin();
        let a = render(PromptKind::P1, &ukp_record("abortion"), &topics).unwrap();
        let b = render(PromptKind::P4, &argsme_record(), &topics).unwrap();
        let fa = render_certainty(&a);
        let fb = render_certainty(&b);
        assert_eq!(fa, fb);
        assert!(fa.contains("percentage"));
        assert_eq!(fa, render_certainty(&a));
    }

    #[test]
    fn builtin_table_covers_all_eight_topics_with_exemplars() {
        let topics = TopicTable::builtin();
        for key in [
            "abortion",
            "cloning",
            "death_penalty",
            "gun_control",
            "marijuana_legalization",
            "minimum_wage",
            "nuclear_energy",
            "school_uniforms",
        ] {
            let spec = topics.get(key).unwrap_or_else(|| panic!("missing {key}"));
            assert!(spec.examples.is_some(), "{key} lacks exemplars");
            assert!(!spec.short.is_empty());
            assert!(!spec.thesis.is_empty());
        }
    }

    #[test]
    fn key_lookup_is_normalized() {
        let topics = TopicTable::builtin();
        assert!(topics.get("Death Penalty").is_some());
        assert!(topics.get("death-penalty").is_some());
    }
}
