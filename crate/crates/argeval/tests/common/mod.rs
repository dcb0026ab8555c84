//! Shared helpers for integration tests: an independent transcription of the
//! certainty-weighted decision procedure used as an oracle, plus fixture
//! builders for synthetic corpora, mock scripts, and configs.

#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};

use argeval::config::{DatasetSpec, GatewaySettings, Mode, Policies, RunConfig, Sampling};
use argeval::corpus::{Dataset, Label};
use argeval::gateway::ModelSpec;

/// Literal, standalone transcription of the per-model decision pseudocode:
/// count answers per label, and when two or more labels tie at the maximum
/// count, sum each answer's certainty into the one-hot position of its label
/// and take the argmax (For, then Against, then NoArgument on exact ties).
/// Unparsed answers feed no counter and carry no weight.
pub fn algorithm1_oracle(labels: &[Option<Label>], certainties: &[f64]) -> Option<Label> {
    assert_eq!(labels.len(), certainties.len());
    let mut delta_f = 0usize;
    let mut delta_a = 0usize;
    let mut delta_n = 0usize;
    for label in labels {
        if *label == Some(Label::For) {
            delta_f += 1;
        } else if *label == Some(Label::Against) {
            delta_a += 1;
        } else if *label == Some(Label::NoArgument) {
            delta_n += 1;
        }
    }
    if delta_f + delta_a + delta_n == 0 {
        return None;
    }
    let delta = delta_f.max(delta_a).max(delta_n);
    let tie = (delta_f == delta_a && delta_a == delta)
        || (delta_f == delta_n && delta_n == delta)
        || (delta_n == delta_a && delta_a == delta);
    if tie {
        let mut out = [0.0f64; 3];
        for (label, kappa) in labels.iter().zip(certainties) {
            match label {
                Some(Label::For) => out[0] += kappa,
                Some(Label::Against) => out[1] += kappa,
                Some(Label::NoArgument) => out[2] += kappa,
                None => {}
            }
        }
        let mut best = 0usize;
        if out[1] > out[best] {
            best = 1;
        }
        if out[2] > out[best] {
            best = 2;
        }
        Some([Label::For, Label::Against, Label::NoArgument][best])
    } else if delta_f == delta {
        Some(Label::For)
    } else if delta_a == delta {
        Some(Label::Against)
    } else {
        Some(Label::NoArgument)
    }
}

pub fn write_ukp_tsv(path: &Path, rows: &[(String, Label)]) {
    let mut file = std::fs::File::create(path).unwrap();
    writeln!(file, "topic\tsentence\tannotation").unwrap();
    for (sentence, label) in rows {
        let annotation = match label {
            Label::For => "Argument_for",
            Label::Against => "Argument_against",
            Label::NoArgument => "NoArgument",
        };
        writeln!(file, "t\t{sentence}\t{annotation}").unwrap();
    }
}

pub fn write_mock_script(path: &Path, rules: &[(&str, &str)]) {
    let script: Vec<serde_json::Value> = rules
        .iter()
        .map(|(pattern, response)| serde_json::json!({"match": pattern, "response": response}))
        .collect();
    std::fs::write(path, serde_json::to_string_pretty(&script).unwrap()).unwrap();
}

/// Topic table holding one synthetic topic with exemplars.
pub fn write_topics_json(path: &Path, topic: &str) {
    let table = serde_json::json!({
        topic: {
            "short": "synthetic widgets",
            "thesis": "Synthetic widgets should be regulated",
            "examples": {
                "for_example": "Widgets demonstrably improve safety .",
                "against_example": "Widgets are too expensive to justify .",
                "no_argument_example": "The widget factory opened in 1989 ."
            }
        }
    });
    std::fs::write(path, serde_json::to_string_pretty(&table).unwrap()).unwrap();
}

pub fn mock_model(name: &str, script: &Path) -> ModelSpec {
    ModelSpec::mock(name, script)
}

pub struct ConfigBuilder {
    pub config: RunConfig,
}

impl ConfigBuilder {
    pub fn new(corpus_path: &Path, topic: &str, models: Vec<ModelSpec>) -> Self {
        ConfigBuilder {
            config: RunConfig {
                datasets: vec![DatasetSpec {
                    kind: Dataset::Ukp,
                    topic: topic.to_string(),
                    path: corpus_path.to_path_buf(),
                }],
                topics: None,
                models,
                prompts: argeval::PromptKind::BASE.to_vec(),
                modes: vec![Mode::PerPrompt, Mode::CertaintyVote],
                sampling: Sampling {
                    n: 10,
                    seed: 7,
                    uniform: false,
                },
                gateway: GatewaySettings::default(),
                policies: Policies::default(),
                output_dir: None,
            },
        }
    }

    pub fn topics(mut self, path: &Path) -> Self {
        self.config.topics = Some(path.to_path_buf());
        self
    }

    pub fn cache(mut self, path: &Path) -> Self {
        self.config.gateway.cache = Some(path.to_path_buf());
        self
    }

    pub fn modes(mut self, modes: Vec<Mode>) -> Self {
        self.config.modes = modes;
        self
    }

    pub fn prompts(mut self, prompts: Vec<argeval::PromptKind>) -> Self {
        self.config.prompts = prompts;
        self
    }

    pub fn sample(mut self, n: usize, seed: u64) -> Self {
        self.config.sampling.n = n;
        self.config.sampling.seed = seed;
        self
    }

    pub fn add_dataset(mut self, kind: Dataset, topic: &str, path: &Path) -> Self {
        self.config.datasets.push(DatasetSpec {
            kind,
            topic: topic.to_string(),
            path: path.to_path_buf(),
        });
        self
    }

    pub fn build(self) -> RunConfig {
        self.config
    }
}

/// Path to a bundled fixture under `tests/fixtures/`.
pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Marker leading a mock model to the wrong label for this gold class.
fn wrong_marker(label: Label) -> &'static str {
    match label {
        Label::For => "marker-against",
        Label::Against => "marker-neutral",
        Label::NoArgument => "marker-for",
    }
}

fn right_marker(label: Label) -> &'static str {
    match label {
        Label::For => "marker-for",
        Label::Against => "marker-against",
        Label::NoArgument => "marker-neutral",
    }
}

/// Mock rule list covering all six prompt designs plus the certainty
/// follow-up. Record markers come first so marked records answer the same
/// way under every prompt; unmarked records fall through to per-template
/// defaults.
fn e2e_rules<'a>(
    certainty: &'a str,
    p2_default: &'a str,
    p3_default: &'a str,
    p1_default: &'a str,
) -> Vec<(&'a str, &'a str)> {
    vec![
        ("what is your certainty", certainty),
        ("marker-unparse", "I really cannot tell."),
        ("marker-for", "For (F)"),
        ("marker-against", "Against (A)"),
        ("marker-neutral", "No argument (N)"),
        ("only one letter", p2_default),
        ("single letter", "A"),
        (
            "markdown table",
            "| step | subquestion | process | result |\n|---|---|---|---|\n| 1 | relevant? | the sentence is about the topic | yes |\n| 2 | stance? | it supports the thesis | For |",
        ),
        ("Here are some examples", "No argument"),
        ("ongoing public debate", p3_default),
        ("Is the sentence", p1_default),
    ]
}

/// Builds a 300-record synthetic corpus, a two-model mock script pair, and a
/// full-mode config sampling 200 records. Per gold class: 70% of records
/// carry a marker matching gold, 10% a wrong marker, 5% an unparseable
/// marker, and 15% no marker (answered by per-template defaults, which
/// produce a 2-2 prompt split and exercise the weighted tie-break).
pub fn build_e2e_fixture(root: &Path) -> RunConfig {
    let mut rows: Vec<(String, Label)> = Vec::new();
    for (label, count) in [
        (Label::For, 90usize),
        (Label::Against, 90),
        (Label::NoArgument, 120),
    ] {
        for i in 0..count {
            let fraction = i as f64 / count as f64;
            let marker = if fraction < 0.70 {
                right_marker(label)
            } else if fraction < 0.80 {
                wrong_marker(label)
            } else if fraction < 0.85 {
                "marker-unparse"
            } else {
                ""
            };
            rows.push((
                format!("Record {label}-{i} about synthetic widgets {marker} ."),
                label,
            ));
        }
    }
    let corpus_path = root.join("corpus.tsv");
    write_ukp_tsv(&corpus_path, &rows);

    let topics_path = root.join("topics.json");
    write_topics_json(&topics_path, "synthetic_widgets");

    let script_a = root.join("model-a.json");
    write_mock_script(
        &script_a,
        &e2e_rules("85", "F", "Against", "The stance is For."),
    );
    let script_b = root.join("model-b.json");
    write_mock_script(
        &script_b,
        &e2e_rules("60", "A", "For", "The stance is Against."),
    );

    ConfigBuilder::new(
        &corpus_path,
        "synthetic_widgets",
        vec![
            mock_model("model-a", &script_a),
            mock_model("model-b", &script_b),
        ],
    )
    .topics(&topics_path)
    .cache(&root.join("cache.jsonl"))
    .modes(vec![
        Mode::PerPrompt,
        Mode::CertaintyVote,
        Mode::CoT,
        Mode::FewShot,
        Mode::Ensemble,
    ])
    .sample(200, 7)
    .build()
}
