//! Experiment driver: renders prompts for sampled records, collects answers
//! and certainties through the gateway, votes, scores, and persists a run
//! directory.
//!
//! A run directory holds `config.json`, `sample.jsonl`, `votes.jsonl`,
//! `decisions.jsonl`, `metrics.csv`, `errors.csv`, and `provenance.json`.
//! Everything except `provenance.json` is a pure function of (config, cache):
//! rerunning against a warm cache reproduces those files byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, DatasetSpec, Mode, RunConfig};
use crate::corpus::{self, ArgumentRecord, CorpusError, Dataset, Label};
use crate::gateway::{Conversation, Gateway, GatewayError, GatewayStats, Message, ModelSpec};
use crate::metrics::{
    confusion, error_breakdown, metrics, ErrorType, MetricsError, UnparsedPolicy,
};
use crate::parse::{parse_certainty, parse_cot, parse_label, Certainty};
use crate::prompts::{render, PromptError, PromptKind, TopicTable, CERTAINTY_FOLLOW_UP};
use crate::voting::{decide_algorithm1, ensemble_decide, LabelScores, ModelDecision, PromptVote};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error at {path}: {detail}")]
    Io { path: String, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    }
}

/// One metrics table row, keyed by (dataset, topic, model, mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub dataset: String,
    pub topic: String,
    pub model: String,
    pub mode: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Error-type proportions for the predictions behind one metrics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub dataset: String,
    pub topic: String,
    pub model: String,
    pub mode: String,
    pub af: f64,
    pub an: f64,
    pub fa: f64,
    pub fn_: f64,
    pub na: f64,
    pub nf: f64,
}

/// One line of `votes.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteLine {
    pub record_id: String,
    pub model: String,
    pub kind: PromptKind,
    pub label: Option<Label>,
    pub certainty: Certainty,
}

/// One line of `decisions.jsonl`. `label: None` marks a record whose votes
/// were all unparsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLine {
    pub record_id: String,
    pub model: String,
    pub label: Option<Label>,
    pub method: String,
    pub scores: Option<LabelScores>,
}

/// Run metadata; the one run-directory file allowed to differ between
/// reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub gateway: GatewayStats,
    pub cache_entries: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// In-memory result of a full experiment.
#[derive(Debug)]
pub struct RunResult {
    pub out_dir: PathBuf,
    pub metrics: Vec<MetricsRow>,
    pub errors: Vec<ErrorRow>,
    pub failures: Vec<String>,
    pub provenance: Provenance,
}

/// One ablation table row: accuracy of each leave-one-out prompt triple and
/// of the full four-prompt vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub dataset: String,
    pub topic: String,
    pub model: String,
    #[serde(rename = "P2_3_4")]
    pub p2_3_4: f64,
    #[serde(rename = "P1_3_4")]
    pub p1_3_4: f64,
    #[serde(rename = "P1_2_4")]
    pub p1_2_4: f64,
    #[serde(rename = "P1_2_3")]
    pub p1_2_3: f64,
    pub avg: f64,
    #[serde(rename = "P1_2_3_4")]
    pub p1_2_3_4: f64,
}

#[derive(Debug)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
    pub failures: Vec<String>,
    pub gateway_stats: GatewayStats,
}

/// One paired few-shot/zero-shot accuracy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewshotRow {
    pub dataset: String,
    pub topic: String,
    pub model: String,
    pub fewshot_accuracy: f64,
    pub zeroshot_accuracy: f64,
    pub better: String,
}

#[derive(Debug)]
pub struct FewshotResult {
    pub rows: Vec<FewshotRow>,
    pub failures: Vec<String>,
    pub gateway_stats: GatewayStats,
}

struct Group {
    dataset: Dataset,
    topic: String,
    records: Vec<ArgumentRecord>,
}

impl Group {
    fn key(&self) -> String {
        format!("{}/{}", self.dataset, self.topic)
    }
}

fn load_records(spec: &DatasetSpec) -> Result<Vec<ArgumentRecord>, CorpusError> {
    match spec.kind {
        Dataset::Ukp => corpus::load_ukp(&spec.path, &spec.topic),
        Dataset::ArgsMe => corpus::load_argsme(&spec.path, &spec.topic),
    }
}

/// Loads and subsamples every configured group. The sample is fixed before
/// any model is queried so that all models and modes see identical records.
fn sample_groups(config: &RunConfig) -> Result<Vec<Group>, RunError> {
    let mut groups = Vec::new();
    for spec in &config.datasets {
        let records = load_records(spec)?;
        let n = config.sampling.n.min(records.len());
        let sampled = if config.sampling.uniform {
            corpus::uniform_sample(&records, n, config.sampling.seed)?
        } else {
            corpus::stratified_sample(&records, n, config.sampling.seed)?
        };
        groups.push(Group {
            dataset: spec.kind,
            topic: spec.topic.clone(),
            records: sampled,
        });
    }
    Ok(groups)
}

fn load_topics(config: &RunConfig) -> Result<TopicTable, RunError> {
    Ok(match &config.topics {
        Some(path) => TopicTable::load(path)?,
        None => TopicTable::builtin(),
    })
}

/// Votes per record for the prompt kinds that could be collected.
type GroupVotes = Vec<BTreeMap<PromptKind, PromptVote>>;

/// Queries one model with one prompt kind over a whole group: a
/// classification call per record, then a certainty follow-up carrying the
/// classification turn back in the conversation.
///
/// Per-record gateway failures degrade to unparsed votes and are listed in
/// `failures`; a cache miss in replay-only mode aborts, since nothing live
/// can be queried.
fn collect_kind(
    gateway: &Gateway,
    model: &ModelSpec,
    topics: &TopicTable,
    group: &Group,
    kind: PromptKind,
    failures: &mut Vec<String>,
) -> Result<Option<Vec<PromptVote>>, RunError> {
    let mut prompts = Vec::with_capacity(group.records.len());
    for record in &group.records {
        match render(kind, record, topics) {
            Ok(prompt) => prompts.push(prompt),
            Err(e @ (PromptError::MissingTopicSpec(_) | PromptError::UnsupportedKind { .. })) => {
                failures.push(format!(
                    "group={} model={} kind={kind}: {e}",
                    group.key(),
                    model.name
                ));
                return Ok(None);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let conversations: Vec<Conversation> = prompts
        .iter()
        .map(|p| vec![Message::user(p.text.clone())])
        .collect();
    let answers = gateway.complete_batch(model, &conversations);

    let mut raw_answers: Vec<Option<String>> = Vec::with_capacity(answers.len());
    for (record, answer) in group.records.iter().zip(answers) {
        match answer {
            Ok(exchange) => raw_answers.push(Some(exchange.raw_response)),
            Err(GatewayError::CacheMissInReplayOnlyMode) => {
                return Err(GatewayError::CacheMissInReplayOnlyMode.into())
            }
            Err(e) => {
                failures.push(format!(
                    "record={} model={} kind={kind}: {e}",
                    record.id, model.name
                ));
                raw_answers.push(None);
            }
        }
    }

    // Certainty is elicited for every answered prompt, unconditionally, so
    // tie-breaking never needs a second pass over the network.
    let answered: Vec<usize> = (0..raw_answers.len())
        .filter(|&i| raw_answers[i].is_some())
        .collect();
    let certainty_conversations: Vec<Conversation> = answered
        .iter()
        .map(|&i| {
            vec![
                Message::user(prompts[i].text.clone()),
                Message::assistant(raw_answers[i].clone().unwrap()),
                Message::user(CERTAINTY_FOLLOW_UP.to_string()),
            ]
        })
        .collect();
    let certainty_answers = gateway.complete_batch(model, &certainty_conversations);

    let mut certainties = vec![Certainty::Missing; group.records.len()];
    for (&i, outcome) in answered.iter().zip(certainty_answers) {
        match outcome {
            Ok(exchange) => certainties[i] = parse_certainty(&exchange.raw_response),
            Err(GatewayError::CacheMissInReplayOnlyMode) => {
                return Err(GatewayError::CacheMissInReplayOnlyMode.into())
            }
            Err(e) => {
                failures.push(format!(
                    "record={} model={} kind={kind} certainty: {e}",
                    group.records[i].id, model.name
                ));
            }
        }
    }

    let votes = group
        .records
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let label = raw_answers[i].as_deref().and_then(|raw| match kind {
                PromptKind::CoT => parse_cot(raw, prompts[i].allows_no_argument).final_label,
                _ => parse_label(raw, prompts[i].format, prompts[i].allows_no_argument).label,
            });
            PromptVote {
                kind,
                label,
                certainty: certainties[i],
            }
        })
        .collect();
    Ok(Some(votes))
}

/// Collects votes for every (model, group, kind) combination.
fn collect_votes(
    gateway: &Gateway,
    config: &RunConfig,
    topics: &TopicTable,
    groups: &[Group],
    kinds: &[PromptKind],
    failures: &mut Vec<String>,
) -> Result<Vec<Vec<GroupVotes>>, RunError> {
    let mut all = Vec::with_capacity(config.models.len());
    for model in &config.models {
        let mut per_group = Vec::with_capacity(groups.len());
        for group in groups {
            let mut group_votes: GroupVotes =
                group.records.iter().map(|_| BTreeMap::new()).collect();
            for &kind in kinds {
                if let Some(votes) = collect_kind(gateway, model, topics, group, kind, failures)? {
                    for (slot, vote) in group_votes.iter_mut().zip(votes) {
                        slot.insert(kind, vote);
                    }
                }
            }
            per_group.push(group_votes);
        }
        all.push(per_group);
    }
    Ok(all)
}

fn accuracy_of(
    golds: &[Label],
    preds: &[Option<Label>],
    policy: UnparsedPolicy,
) -> Result<f64, MetricsError> {
    Ok(confusion(golds, preds, policy)?.accuracy())
}

fn metrics_row(
    group: &Group,
    model: &str,
    mode: &str,
    preds: &[Option<Label>],
    policy: UnparsedPolicy,
) -> Result<Option<(MetricsRow, ErrorRow)>, RunError> {
    let golds: Vec<Label> = group.records.iter().map(|r| r.gold).collect();
    let matrix = confusion(&golds, preds, policy)?;
    let report = match metrics(&matrix) {
        Ok(report) => report,
        Err(MetricsError::EmptyMatrix) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let breakdown = error_breakdown(&golds, preds)?;
    let row = MetricsRow {
        dataset: group.dataset.to_string(),
        topic: group.topic.clone(),
        model: model.to_string(),
        mode: mode.to_string(),
        accuracy: report.accuracy,
        precision: report.macro_precision,
        recall: report.macro_recall,
        f1: report.macro_f1,
    };
    let errors = ErrorRow {
        dataset: group.dataset.to_string(),
        topic: group.topic.clone(),
        model: model.to_string(),
        mode: mode.to_string(),
        af: breakdown.proportion(ErrorType::AF),
        an: breakdown.proportion(ErrorType::AN),
        fa: breakdown.proportion(ErrorType::FA),
        fn_: breakdown.proportion(ErrorType::FN),
        na: breakdown.proportion(ErrorType::NA),
        nf: breakdown.proportion(ErrorType::NF),
    };
    Ok(Some((row, errors)))
}

fn write_jsonl_lines<T: Serialize>(items: &[T], path: &Path) -> Result<(), RunError> {
    let mut file = File::create(path).map_err(io_err(path))?;
    for item in items {
        let line = serde_json::to_string(item).expect("line serializes");
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<(), RunError> {
    let mut writer = csv::WriterBuilder::new()
        .from_path(path)
        .map_err(|e| RunError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    for row in rows {
        writer.serialize(row).map_err(|e| RunError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

// csv headers come from serde field names; `fn` is a keyword, so ErrorRow
// uses fn_ and needs a rename on write.
impl ErrorRow {
    fn header() -> [&'static str; 10] {
        [
            "dataset", "topic", "model", "mode", "AF", "AN", "FA", "FN", "NA", "NF",
        ]
    }

    fn fields(&self) -> [String; 10] {
        [
            self.dataset.clone(),
            self.topic.clone(),
            self.model.clone(),
            self.mode.clone(),
            format_f64(self.af),
            format_f64(self.an),
            format_f64(self.fa),
            format_f64(self.fn_),
            format_f64(self.na),
            format_f64(self.nf),
        ]
    }
}

fn format_f64(v: f64) -> String {
    let mut buffer = ryu_format(v);
    if buffer.ends_with(".0") {
        buffer.truncate(buffer.len() - 2);
    }
    buffer
}

fn ryu_format(v: f64) -> String {
    // serde_json's float formatting (ryu) is the shortest round-trip form;
    // reuse it for csv cells written by hand.
    serde_json::to_string(&v).expect("float serializes")
}

fn write_error_rows(rows: &[ErrorRow], path: &Path) -> Result<(), RunError> {
    let mut writer = csv::WriterBuilder::new()
        .from_path(path)
        .map_err(|e| RunError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    writer
        .write_record(ErrorRow::header())
        .and_then(|_| {
            for row in rows {
                writer.write_record(row.fields())?;
            }
            writer.flush()?;
            Ok(())
        })
        .map_err(|e| RunError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// The persisted config omits the output directory so that runs into
/// different directories stay byte-comparable.
fn persistable(config: &RunConfig) -> RunConfig {
    let mut persisted = config.clone();
    persisted.output_dir = None;
    persisted
}

/// Prompt kinds the configured modes require.
fn kinds_for(config: &RunConfig) -> Vec<PromptKind> {
    let mut kinds = config.prompts.clone();
    if config.modes.contains(&Mode::CoT) {
        kinds.push(PromptKind::CoT);
    }
    if config.modes.contains(&Mode::FewShot) {
        kinds.push(PromptKind::FewShot);
    }
    kinds
}

/// Runs the full experiment described by `config`, persisting the run
/// directory at `out_dir`.
pub fn run_experiment(config: &RunConfig, out_dir: &Path) -> Result<RunResult, RunError> {
    config.validate()?;
    let started = unix_now();
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let persisted = persistable(config);
    let config_json = serde_json::to_string_pretty(&persisted).expect("config serializes") + "\n";
    std::fs::write(out_dir.join("config.json"), config_json)
        .map_err(io_err(&out_dir.join("config.json")))?;

    let topics = load_topics(config)?;
    let gateway = Gateway::new(config.gateway.cache.as_deref(), config.gateway.offline)?;
    let groups = sample_groups(config)?;

    let sample: Vec<ArgumentRecord> = groups
        .iter()
        .flat_map(|g| g.records.iter().cloned())
        .collect();
    corpus::write_jsonl(&sample, &out_dir.join("sample.jsonl"))?;

    let mut failures = Vec::new();
    let kinds = kinds_for(config);
    let votes = collect_votes(&gateway, config, &topics, &groups, &kinds, &mut failures)?;

    // votes.jsonl: group -> model -> record -> kind, all in fixed order.
    let mut vote_lines = Vec::new();
    for (gi, group) in groups.iter().enumerate() {
        for (mi, model) in config.models.iter().enumerate() {
            for (ri, record) in group.records.iter().enumerate() {
                for vote in votes[mi][gi][ri].values() {
                    vote_lines.push(VoteLine {
                        record_id: record.id.clone(),
                        model: model.name.clone(),
                        kind: vote.kind,
                        label: vote.label,
                        certainty: vote.certainty,
                    });
                }
            }
        }
    }
    write_jsonl_lines(&vote_lines, &out_dir.join("votes.jsonl"))?;

    // Per-model decisions over the base prompt set.
    let needs_decisions =
        config.modes.contains(&Mode::CertaintyVote) || config.modes.contains(&Mode::Ensemble);
    let gamma = config.policies.gamma;
    let mut decision_lines = Vec::new();
    // decisions[mi][gi][ri]
    let mut decisions: Vec<Vec<Vec<Option<ModelDecision>>>> = Vec::new();
    if needs_decisions {
        for (mi, model) in config.models.iter().enumerate() {
            let mut per_group = Vec::new();
            for (gi, _) in groups.iter().enumerate() {
                let mut per_record = Vec::new();
                for record_votes_by_kind in &votes[mi][gi] {
                    let record_votes: Vec<PromptVote> = config
                        .prompts
                        .iter()
                        .filter_map(|kind| record_votes_by_kind.get(kind).cloned())
                        .collect();
                    let decision = decide_algorithm1(&model.name, &record_votes, gamma).ok();
                    per_record.push(decision);
                }
                per_group.push(per_record);
            }
            decisions.push(per_group);
        }
        for (gi, group) in groups.iter().enumerate() {
            for (mi, model) in config.models.iter().enumerate() {
                for (ri, record) in group.records.iter().enumerate() {
                    let line = match &decisions[mi][gi][ri] {
                        Some(decision) => DecisionLine {
                            record_id: record.id.clone(),
                            model: model.name.clone(),
                            label: Some(decision.label),
                            method: format!("{:?}", decision.method),
                            scores: decision.weighted_scores,
                        },
                        None => DecisionLine {
                            record_id: record.id.clone(),
                            model: model.name.clone(),
                            label: None,
                            method: "AllUnparsed".to_string(),
                            scores: None,
                        },
                    };
                    decision_lines.push(line);
                }
            }
        }
    }

    // Ensemble decisions across models.
    let mut ensemble_preds: Vec<Vec<Option<Label>>> = Vec::new();
    if config.modes.contains(&Mode::Ensemble) {
        let strategy = config.policies.ensemble_strategy;
        for (gi, group) in groups.iter().enumerate() {
            let mut preds = Vec::new();
            for (ri, record) in group.records.iter().enumerate() {
                let present: Vec<ModelDecision> = (0..config.models.len())
                    .filter_map(|mi| decisions[mi][gi][ri].clone())
                    .collect();
                let label = if present.is_empty() {
                    None
                } else {
                    let ensemble = ensemble_decide(&present, strategy);
                    Some(ensemble.label)
                };
                preds.push(label);
                decision_lines.push(DecisionLine {
                    record_id: record.id.clone(),
                    model: "ensemble".to_string(),
                    label,
                    method: format!("Ensemble:{}", strategy.as_str()),
                    scores: None,
                });
            }
            ensemble_preds.push(preds);
        }
    }
    write_jsonl_lines(&decision_lines, &out_dir.join("decisions.jsonl"))?;

    // Metric rows: group -> model -> mode, then the group's ensemble row.
    let policy = config.policies.unparsed;
    let mut metric_rows = Vec::new();
    let mut error_rows = Vec::new();
    let mut push_row = |row: Option<(MetricsRow, ErrorRow)>,
                        failures: &mut Vec<String>,
                        context: String| {
        match row {
            Some((m, e)) => {
                metric_rows.push(m);
                error_rows.push(e);
            }
            None => failures.push(format!("{context}: no scoreable records")),
        }
    };
    for (gi, group) in groups.iter().enumerate() {
        for (mi, model) in config.models.iter().enumerate() {
            if config.modes.contains(&Mode::PerPrompt) {
                for kind in &config.prompts {
                    if votes[mi][gi].iter().all(|v| !v.contains_key(kind)) {
                        continue;
                    }
                    let preds: Vec<Option<Label>> = votes[mi][gi]
                        .iter()
                        .map(|v| v.get(kind).and_then(|vote| vote.label))
                        .collect();
                    let row = metrics_row(group, &model.name, kind.as_str(), &preds, policy)?;
                    push_row(
                        row,
                        &mut failures,
                        format!("group={} model={} mode={kind}", group.key(), model.name),
                    );
                }
            }
            if config.modes.contains(&Mode::CertaintyVote) {
                let preds: Vec<Option<Label>> = decisions[mi][gi]
                    .iter()
                    .map(|d| d.as_ref().map(|d| d.label))
                    .collect();
                let row = metrics_row(group, &model.name, "Certainty", &preds, policy)?;
                push_row(
                    row,
                    &mut failures,
                    format!("group={} model={} mode=Certainty", group.key(), model.name),
                );
            }
            for (mode, kind) in [
                (Mode::CoT, PromptKind::CoT),
                (Mode::FewShot, PromptKind::FewShot),
            ] {
                if !config.modes.contains(&mode) {
                    continue;
                }
                if votes[mi][gi].iter().all(|v| !v.contains_key(&kind)) {
                    continue; // kind skipped for this group; already reported
                }
                let preds: Vec<Option<Label>> = votes[mi][gi]
                    .iter()
                    .map(|v| v.get(&kind).and_then(|vote| vote.label))
                    .collect();
                let row = metrics_row(group, &model.name, kind.as_str(), &preds, policy)?;
                push_row(
                    row,
                    &mut failures,
                    format!("group={} model={} mode={kind}", group.key(), model.name),
                );
            }
        }
        if config.modes.contains(&Mode::Ensemble) {
            let row = metrics_row(group, "ensemble", "Ensemble", &ensemble_preds[gi], policy)?;
            push_row(
                row,
                &mut failures,
                format!("group={} model=ensemble mode=Ensemble", group.key()),
            );
        }
    }

    write_csv(&metric_rows, &out_dir.join("metrics.csv"))?;
    write_error_rows(&error_rows, &out_dir.join("errors.csv"))?;

    let provenance = Provenance {
        config_hash: persisted.hash(),
        gateway: gateway.stats(),
        cache_entries: gateway.cache_len(),
        started_unix: started,
        finished_unix: unix_now(),
    };
    let provenance_json =
        serde_json::to_string_pretty(&provenance).expect("provenance serializes") + "\n";
    std::fs::write(out_dir.join("provenance.json"), provenance_json)
        .map_err(io_err(&out_dir.join("provenance.json")))?;

    Ok(RunResult {
        out_dir: out_dir.to_path_buf(),
        metrics: metric_rows,
        errors: error_rows,
        failures,
        provenance,
    })
}

/// Leave-one-out prompt ablation over the four base prompts. Reuses cached
/// answers: after a full run against the same cache this makes no new
/// backend calls.
pub fn run_ablation(config: &RunConfig, out_dir: &Path) -> Result<AblationResult, RunError> {
    config.validate()?;
    if config.prompts.len() != 4 {
        return Err(
            ConfigError::Invalid("ablation requires the full four-prompt set".to_string()).into(),
        );
    }
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let topics = load_topics(config)?;
    let gateway = Gateway::new(config.gateway.cache.as_deref(), config.gateway.offline)?;
    let groups = sample_groups(config)?;
    let mut failures = Vec::new();
    let votes = collect_votes(
        &gateway,
        config,
        &topics,
        &groups,
        &PromptKind::BASE,
        &mut failures,
    )?;

    let subsets: [Vec<PromptKind>; 5] = [
        vec![PromptKind::P2, PromptKind::P3, PromptKind::P4],
        vec![PromptKind::P1, PromptKind::P3, PromptKind::P4],
        vec![PromptKind::P1, PromptKind::P2, PromptKind::P4],
        vec![PromptKind::P1, PromptKind::P2, PromptKind::P3],
        PromptKind::BASE.to_vec(),
    ];
    let policy = config.policies.unparsed;
    let gamma = config.policies.gamma;

    let mut rows = Vec::new();
    let mut per_model_columns: Vec<Vec<[f64; 5]>> = vec![Vec::new(); config.models.len()];
    for (gi, group) in groups.iter().enumerate() {
        let golds: Vec<Label> = group.records.iter().map(|r| r.gold).collect();
        for (mi, model) in config.models.iter().enumerate() {
            let mut columns = [0.0f64; 5];
            for (si, subset) in subsets.iter().enumerate() {
                let preds: Vec<Option<Label>> = (0..group.records.len())
                    .map(|ri| {
                        let subset_votes: Vec<PromptVote> = subset
                            .iter()
                            .filter_map(|kind| votes[mi][gi][ri].get(kind).cloned())
                            .collect();
                        decide_algorithm1(&model.name, &subset_votes, gamma)
                            .ok()
                            .map(|d| d.label)
                    })
                    .collect();
                columns[si] = accuracy_of(&golds, &preds, policy)?;
            }
            let leave_one_out_avg = columns[..4].iter().sum::<f64>() / 4.0;
            rows.push(AblationRow {
                dataset: group.dataset.to_string(),
                topic: group.topic.clone(),
                model: model.name.clone(),
                p2_3_4: columns[0],
                p1_3_4: columns[1],
                p1_2_4: columns[2],
                p1_2_3: columns[3],
                avg: leave_one_out_avg,
                p1_2_3_4: columns[4],
            });
            per_model_columns[mi].push(columns);
        }
    }
    // Per-model summary over all groups, mirroring a one-row-per-model table.
    for (mi, model) in config.models.iter().enumerate() {
        let group_columns = &per_model_columns[mi];
        if group_columns.is_empty() {
            continue;
        }
        let mut mean = [0.0f64; 5];
        for columns in group_columns {
            for (m, c) in mean.iter_mut().zip(columns) {
                *m += c;
            }
        }
        for m in &mut mean {
            *m /= group_columns.len() as f64;
        }
        rows.push(AblationRow {
            dataset: "all".to_string(),
            topic: "all".to_string(),
            model: model.name.clone(),
            p2_3_4: mean[0],
            p1_3_4: mean[1],
            p1_2_4: mean[2],
            p1_2_3: mean[3],
            avg: mean[..4].iter().sum::<f64>() / 4.0,
            p1_2_3_4: mean[4],
        });
    }

    write_csv(&rows, &out_dir.join("ablation.csv"))?;
    Ok(AblationResult {
        rows,
        failures,
        gateway_stats: gateway.stats(),
    })
}

/// Paired few-shot versus zero-shot comparison; the zero-shot side is the
/// plain P1 prompt the few-shot variant extends.
pub fn compare_fewshot(config: &RunConfig, out_dir: &Path) -> Result<FewshotResult, RunError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let topics = load_topics(config)?;
    let gateway = Gateway::new(config.gateway.cache.as_deref(), config.gateway.offline)?;
    let groups = sample_groups(config)?;
    let mut failures = Vec::new();
    let kinds = [PromptKind::P1, PromptKind::FewShot];
    let votes = collect_votes(&gateway, config, &topics, &groups, &kinds, &mut failures)?;

    let policy = config.policies.unparsed;
    let mut rows = Vec::new();
    for (gi, group) in groups.iter().enumerate() {
        let golds: Vec<Label> = group.records.iter().map(|r| r.gold).collect();
        for (mi, model) in config.models.iter().enumerate() {
            // A group whose few-shot rendering failed has no FewShot votes.
            if votes[mi][gi]
                .iter()
                .all(|v| !v.contains_key(&PromptKind::FewShot))
            {
                continue;
            }
            let few: Vec<Option<Label>> = votes[mi][gi]
                .iter()
                .map(|v| v.get(&PromptKind::FewShot).and_then(|vote| vote.label))
                .collect();
            let zero: Vec<Option<Label>> = votes[mi][gi]
                .iter()
                .map(|v| v.get(&PromptKind::P1).and_then(|vote| vote.label))
                .collect();
            let fewshot_accuracy = accuracy_of(&golds, &few, policy)?;
            let zeroshot_accuracy = accuracy_of(&golds, &zero, policy)?;
            let better = if fewshot_accuracy > zeroshot_accuracy {
                "fewshot"
            } else if zeroshot_accuracy > fewshot_accuracy {
                "zeroshot"
            } else {
                "tie"
            };
            rows.push(FewshotRow {
                dataset: group.dataset.to_string(),
                topic: group.topic.clone(),
                model: model.name.clone(),
                fewshot_accuracy,
                zeroshot_accuracy,
                better: better.to_string(),
            });
        }
    }

    write_csv(&rows, &out_dir.join("fewshot.csv"))?;
    Ok(FewshotResult {
        rows,
        failures,
        gateway_stats: gateway.stats(),
    })
}
