//! Argument corpus loading, validation, sampling, and statistics.
//!
//! Two source schemas are supported: topic-file TSV exports (one sentence per
//! row with a three-way annotation) and debate-portal JSON exports (debates
//! holding a conclusion plus PRO/CON premises). Loaded records are normalized
//! into [`ArgumentRecord`] and can be persisted to a line-delimited JSON
//! format that round-trips exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stance of a sentence relative to a thesis.
///
/// The ordering (`For < Against < NoArgument`) is the fixed label order used
/// for deterministic tie-breaking throughout the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    For,
    Against,
    NoArgument,
}

impl Label {
    /// All labels in tie-break order.
    pub const ALL: [Label; 3] = [Label::For, Label::Against, Label::NoArgument];

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::For => "For",
            Label::Against => "Against",
            Label::NoArgument => "NoArgument",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    /// Case-normalized parse accepting the serialized forms seen in source
    /// corpora and harness files ("For", "AGAINST", "no argument", ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        match norm.as_str() {
            "for" => Ok(Label::For),
            "against" => Ok(Label::Against),
            "noargument" => Ok(Label::NoArgument),
            _ => Err(format!("unknown label: {s:?}")),
        }
    }
}

/// Source corpus family a record was loaded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Ukp,
    ArgsMe,
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dataset::Ukp => f.write_str("ukp"),
            Dataset::ArgsMe => f.write_str("argsme"),
        }
    }
}

/// One classified sentence or premise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentRecord {
    /// Opaque identifier, unique within a loaded corpus.
    pub id: String,
    pub dataset: Dataset,
    /// Topic key for UKP sources, portal name for Args.me sources.
    pub topic: String,
    /// Full-sentence claim the text is judged against. Empty for UKP records
    /// at load time; the prompt renderer synthesizes it from the topic table.
    pub thesis: String,
    pub text: String,
    pub gold: Label,
}

/// Three exemplar sentences used to build in-context examples for a topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExamples {
    pub for_example: String,
    pub against_example: String,
    pub no_argument_example: String,
}

/// Per-topic prompt configuration: the short topic phrase, the elaborate
/// thesis sentence, and the few-shot exemplars.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSpec {
    /// Short form used in straightforward thesis slots (e.g. "the death penalty").
    pub short: String,
    /// Elaborate thesis sentence (e.g. "The death penalty should be allowed").
    pub thesis: String,
    #[serde(default)]
    pub examples: Option<FewShotExamples>,
}

/// Label counts for one topic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub for_count: usize,
    pub against_count: usize,
    pub no_argument_count: usize,
}

impl LabelCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::For => self.for_count,
            Label::Against => self.against_count,
            Label::NoArgument => self.no_argument_count,
        }
    }

    fn bump(&mut self, label: Label) {
        match label {
            Label::For => self.for_count += 1,
            Label::Against => self.against_count += 1,
            Label::NoArgument => self.no_argument_count += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.for_count + self.against_count + self.no_argument_count
    }
}

/// Per-topic, per-label record counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_topic: BTreeMap<String, LabelCounts>,
    pub total: usize,
}

impl CorpusStats {
    /// Counts summed over all topics.
    pub fn combined(&self) -> LabelCounts {
        let mut all = LabelCounts::default();
        for counts in self.per_topic.values() {
            all.for_count += counts.for_count;
            all.against_count += counts.against_count;
            all.no_argument_count += counts.no_argument_count;
        }
        all
    }

    /// Rows of `topic,label,count` in topic order then label order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("topic,label,count\n");
        for (topic, counts) in &self.per_topic {
            for label in Label::ALL {
                out.push_str(&format!("{topic},{label},{}\n", counts.get(label)));
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing required column {column:?} in {path}")]
    MissingColumn { path: String, column: String },
    #[error("unknown annotation {value:?} at {path} row {row}")]
    UnknownAnnotation {
        path: String,
        row: usize,
        value: String,
    },
    #[error("empty sentence at {path} row {row}")]
    EmptySentence { path: String, row: usize },
    #[error("malformed json in {path}: {detail}")]
    MalformedJson { path: String, detail: String },
    #[error("debate {index} in {path} has no conclusion")]
    MissingConclusion { path: String, index: usize },
    #[error("unknown stance {value:?} in {path} debate {index}")]
    UnknownStance {
        path: String,
        index: usize,
        value: String,
    },
    #[error("sample of {requested} requested from {available} records")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("malformed record at {path} line {line}: {detail}")]
    MalformedRecord {
        path: String,
        line: usize,
        detail: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads a topic-file TSV export: tab-separated with a header row that must
/// contain at least `sentence` and `annotation` columns. Extra columns are
/// ignored. Annotations map `Argument_for` -> For, `Argument_against` ->
/// Against, `NoArgument` -> NoArgument.
pub fn load_ukp(path: &Path, topic: &str) -> Result<Vec<ArgumentRecord>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| CorpusError::MalformedJson {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?
        .clone();
    let column = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CorpusError::MissingColumn {
                path: path.display().to_string(),
                column: name.to_string(),
            })
    };
    let sentence_idx = column("sentence")?;
    let annotation_idx = column("annotation")?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 2; // 1-based, counting the header row
        let row = row.map_err(|e| CorpusError::MalformedRecord {
            path: path.display().to_string(),
            line: row_number,
            detail: e.to_string(),
        })?;
        let sentence = row.get(sentence_idx).unwrap_or("").trim();
        let annotation = row.get(annotation_idx).unwrap_or("").trim();
        if sentence.is_empty() {
            return Err(CorpusError::EmptySentence {
                path: path.display().to_string(),
                row: row_number,
            });
        }
        let gold = match annotation {
            "Argument_for" => Label::For,
            "Argument_against" => Label::Against,
            "NoArgument" => Label::NoArgument,
            other => {
                return Err(CorpusError::UnknownAnnotation {
                    path: path.display().to_string(),
                    row: row_number,
                    value: other.to_string(),
                })
            }
        };
        records.push(ArgumentRecord {
            id: format!("{topic}-{}", i + 1),
            dataset: Dataset::Ukp,
            topic: topic.to_string(),
            thesis: String::new(),
            text: sentence.to_string(),
            gold,
        });
    }
    Ok(records)
}

/// Loads a debate-portal JSON export: an array (or an object wrapping one) of
/// debates, each with a `conclusion` string and `premises` carrying `text`
/// and a PRO/CON `stance`. One record per premise; the debate conclusion
/// becomes the record thesis.
pub fn load_argsme(path: &Path, portal: &str) -> Result<Vec<ArgumentRecord>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let value: serde_json::Value =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| CorpusError::MalformedJson {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;

    let debates = match &value {
        serde_json::Value::Array(items) => items.as_slice(),
        serde_json::Value::Object(map) => map
            .values()
            .find_map(|v| v.as_array())
            .map(|a| a.as_slice())
            .ok_or_else(|| CorpusError::MalformedJson {
                path: path.display().to_string(),
                detail: "object contains no debate array".to_string(),
            })?,
        _ => {
            return Err(CorpusError::MalformedJson {
                path: path.display().to_string(),
                detail: "expected a json array of debates".to_string(),
            })
        }
    };

    let mut records = Vec::new();
    for (index, debate) in debates.iter().enumerate() {
        let conclusion = debate
            .get("conclusion")
            .and_then(|c| c.as_str())
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .ok_or_else(|| CorpusError::MissingConclusion {
                path: path.display().to_string(),
                index,
            })?;
        let debate_id = debate
            .get("id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("{portal}-{index}"));
        let premises = debate
            .get("premises")
            .and_then(|p| p.as_array())
            .cloned()
            .unwrap_or_default();
        for (pi, premise) in premises.iter().enumerate() {
            let text = premise
                .get("text")
                .and_then(|t| t.as_str())
                .map(str::trim)
                .unwrap_or("");
            if text.is_empty() {
                return Err(CorpusError::EmptySentence {
                    path: path.display().to_string(),
                    row: index,
                });
            }
            let stance = premise.get("stance").and_then(|s| s.as_str()).unwrap_or("");
            let gold = match stance.to_uppercase().as_str() {
                "PRO" => Label::For,
                "CON" => Label::Against,
                other => {
                    return Err(CorpusError::UnknownStance {
                        path: path.display().to_string(),
                        index,
                        value: other.to_string(),
                    })
                }
            };
            records.push(ArgumentRecord {
                id: format!("{debate_id}/{pi}"),
                dataset: Dataset::ArgsMe,
                topic: portal.to_string(),
                thesis: conclusion.to_string(),
                text: text.to_string(),
                gold,
            });
        }
    }
    Ok(records)
}

/// Exact label counts per topic.
pub fn corpus_stats(records: &[ArgumentRecord]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for record in records {
        stats
            .per_topic
            .entry(record.topic.clone())
            .or_default()
            .bump(record.gold);
        stats.total += 1;
    }
    stats
}

/// Largest-remainder apportionment of `n` slots over the label counts.
/// Remainder ties go to the earlier label in tie-break order.
fn apportion(counts: &LabelCounts, n: usize) -> [usize; 3] {
    let total = counts.total();
    let mut alloc = [0usize; 3];
    let mut remainders: Vec<(usize, f64)> = Vec::new();
    for (i, label) in Label::ALL.iter().enumerate() {
        let quota = (n as f64) * (counts.get(*label) as f64) / (total as f64);
        alloc[i] = quota.floor() as usize;
        remainders.push((i, quota - quota.floor()));
    }
    let assigned: usize = alloc.iter().sum();
    // Stable sort keeps the For < Against < NoArgument order on ties.
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for (i, _) in remainders.iter().take(n - assigned) {
        alloc[*i] += 1;
    }
    alloc
}

/// Label-stratified subsample: per-label allocation by largest-remainder
/// apportionment, selection within each stratum by a seeded uniform shuffle.
/// Output lists the For stratum first, then Against, then NoArgument.
pub fn stratified_sample(
    records: &[ArgumentRecord],
    n: usize,
    seed: u64,
) -> Result<Vec<ArgumentRecord>, CorpusError> {
    if n > records.len() {
        return Err(CorpusError::SampleTooLarge {
            requested: n,
            available: records.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let counts = corpus_stats(records).combined();
    let alloc = apportion(&counts, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = Vec::with_capacity(n);
    for (i, label) in Label::ALL.iter().enumerate() {
        let mut stratum: Vec<&ArgumentRecord> =
            records.iter().filter(|r| r.gold == *label).collect();
        stratum.shuffle(&mut rng);
        sample.extend(stratum.into_iter().take(alloc[i]).cloned());
    }
    Ok(sample)
}

/// Non-stratified variant: a seeded uniform shuffle of the whole list,
/// truncated to `n`.
pub fn uniform_sample(
    records: &[ArgumentRecord],
    n: usize,
    seed: u64,
) -> Result<Vec<ArgumentRecord>, CorpusError> {
    if n > records.len() {
        return Err(CorpusError::SampleTooLarge {
            requested: n,
            available: records.len(),
        });
    }
    let mut shuffled: Vec<ArgumentRecord> = records.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    shuffled.truncate(n);
    Ok(shuffled)
}

/// Writes records in the canonical one-record-per-line JSON format.
pub fn write_jsonl(records: &[ArgumentRecord], path: &Path) -> Result<(), CorpusError> {
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    for record in records {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(file, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Reads records back from the canonical JSONL format, checking id uniqueness.
pub fn read_jsonl(path: &Path) -> Result<Vec<ArgumentRecord>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ArgumentRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                path: path.display().to_string(),
                line: i + 1,
                detail: e.to_string(),
            })?;
        if record.text.trim().is_empty() {
            return Err(CorpusError::MalformedRecord {
                path: path.display().to_string(),
                line: i + 1,
                detail: "record text is empty".to_string(),
            });
        }
        if record.dataset == Dataset::ArgsMe && record.gold == Label::NoArgument {
            return Err(CorpusError::MalformedRecord {
                path: path.display().to_string(),
                line: i + 1,
                detail: "debate-portal records never carry gold NoArgument".to_string(),
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}
