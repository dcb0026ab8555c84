//! Per-model multi-prompt decisions and the cross-model ensemble vote.
//!
//! A model answers every prompt in the set; answers are tallied per label.
//! A unique most-frequent label wins outright. When two or more labels tie at
//! the maximum count, each vote's elicited certainty is summed into the
//! one-hot position of its label and the argmax of those weighted scores
//! decides. Residual ties fall back to the fixed precedence
//! For > Against > NoArgument.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::parse::Certainty;
use crate::prompts::PromptKind;

/// One model's parsed answer to one prompt, plus its elicited certainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptVote {
    pub kind: PromptKind,
    /// `None` when the response could not be parsed; such votes are excluded
    /// from tallies and carry no weight.
    pub label: Option<Label>,
    pub certainty: Certainty,
}

/// Per-label answer counts over the parsed votes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub delta_for: usize,
    pub delta_against: usize,
    pub delta_no: usize,
    /// Maximum of the three counts.
    pub delta_max: usize,
}

impl VoteTally {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::For => self.delta_for,
            Label::Against => self.delta_against,
            Label::NoArgument => self.delta_no,
        }
    }

    /// Number of parsed votes.
    pub fn parsed_total(&self) -> usize {
        self.delta_for + self.delta_against + self.delta_no
    }

    /// Labels holding the maximum count.
    pub fn leaders(&self) -> Vec<Label> {
        Label::ALL
            .into_iter()
            .filter(|l| self.get(*l) == self.delta_max)
            .collect()
    }
}

/// Per-label real-valued scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    #[serde(rename = "For")]
    pub for_score: f64,
    #[serde(rename = "Against")]
    pub against_score: f64,
    #[serde(rename = "NoArgument")]
    pub no_argument_score: f64,
}

impl LabelScores {
    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::For => self.for_score,
            Label::Against => self.against_score,
            Label::NoArgument => self.no_argument_score,
        }
    }

    pub fn add(&mut self, label: Label, weight: f64) {
        match label {
            Label::For => self.for_score += weight,
            Label::Against => self.against_score += weight,
            Label::NoArgument => self.no_argument_score += weight,
        }
    }

    /// Argmax with ties resolved by the fixed precedence order.
    pub fn argmax(&self) -> Label {
        let mut best = Label::For;
        for label in [Label::Against, Label::NoArgument] {
            if self.get(label) > self.get(best) {
                best = label;
            }
        }
        best
    }
}

/// How a per-model decision was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionMethod {
    /// One label's count strictly exceeded both others.
    Majority,
    /// A tie at the maximum count was broken by certainty-weighted scores.
    CertaintyWeighted,
}

/// A model's final label for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDecision {
    pub model: String,
    pub label: Label,
    pub method: DecisionMethod,
    /// Present exactly when the decision went through the weighted branch.
    pub weighted_scores: Option<LabelScores>,
    pub tally: VoteTally,
}

/// Cross-model vote strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleStrategy {
    /// Most frequent per-model label; ties broken by summed weighted scores,
    /// then precedence.
    Plurality,
    /// Argmax of per-model weighted scores summed per label; majority
    /// decisions contribute their vote fraction as weight.
    CertaintySum,
}

impl EnsembleStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnsembleStrategy::Plurality => "Plurality",
            EnsembleStrategy::CertaintySum => "CertaintySum",
        }
    }
}

/// Combined decision over several models' outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecision {
    pub label: Label,
    pub strategy: EnsembleStrategy,
    pub per_model: Vec<ModelDecision>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VotingError {
    #[error("no vote carries a parsed label")]
    AllUnparsed,
}

/// Counts parsed votes per label. Unparsed votes contribute to no counter.
pub fn tally(votes: &[PromptVote]) -> Result<VoteTally, VotingError> {
    let mut tally = VoteTally::default();
    for vote in votes {
        match vote.label {
            Some(Label::For) => tally.delta_for += 1,
            Some(Label::Against) => tally.delta_against += 1,
            Some(Label::NoArgument) => tally.delta_no += 1,
            None => {}
        }
    }
    if tally.parsed_total() == 0 {
        return Err(VotingError::AllUnparsed);
    }
    tally.delta_max = tally.delta_for.max(tally.delta_against).max(tally.delta_no);
    Ok(tally)
}

/// Decides one model's label from its votes over the prompt set.
///
/// `min_weighted_score` is an optional floor: when the weighted branch runs
/// and the winning score falls below it, the decision degrades to
/// NoArgument. Disabled by default.
pub fn decide_algorithm1(
    model: &str,
    votes: &[PromptVote],
    min_weighted_score: Option<f64>,
) -> Result<ModelDecision, VotingError> {
    let tally = tally(votes)?;
    let leaders = tally.leaders();

    if leaders.len() == 1 {
        return Ok(ModelDecision {
            model: model.to_string(),
            label: leaders[0],
            method: DecisionMethod::Majority,
            weighted_scores: None,
            tally,
        });
    }

    let mut scores = LabelScores::default();
    for vote in votes {
        if let Some(label) = vote.label {
            scores.add(label, vote.certainty.weight());
        }
    }
    let mut label = scores.argmax();
    if let Some(floor) = min_weighted_score {
        if scores.get(label) < floor {
            label = Label::NoArgument;
        }
    }
    Ok(ModelDecision {
        model: model.to_string(),
        label,
        method: DecisionMethod::CertaintyWeighted,
        weighted_scores: Some(scores),
        tally,
    })
}

/// Combines per-model decisions into one ensemble label.
pub fn ensemble_decide(
    decisions: &[ModelDecision],
    strategy: EnsembleStrategy,
) -> EnsembleDecision {
    assert!(!decisions.is_empty(), "ensemble over zero decisions");
    let label = match strategy {
        EnsembleStrategy::Plurality => {
            let mut counts = LabelScores::default();
            for decision in decisions {
                counts.add(decision.label, 1.0);
            }
            let top = Label::ALL
                .iter()
                .map(|l| counts.get(*l))
                .fold(f64::MIN, f64::max);
            let tied: Vec<Label> = Label::ALL
                .into_iter()
                .filter(|l| counts.get(*l) == top)
                .collect();
            if tied.len() == 1 {
                tied[0]
            } else {
                let mut sums = LabelScores::default();
                for decision in decisions {
                    if let Some(scores) = &decision.weighted_scores {
                        for label in Label::ALL {
                            sums.add(label, scores.get(label));
                        }
                    }
                }
                let mut best = tied[0];
                for label in &tied[1..] {
                    if sums.get(*label) > sums.get(best) {
                        best = *label;
                    }
                }
                best
            }
        }
        EnsembleStrategy::CertaintySum => {
            let mut sums = LabelScores::default();
            for decision in decisions {
                match &decision.weighted_scores {
                    Some(scores) => {
                        for label in Label::ALL {
                            sums.add(label, scores.get(label));
                        }
                    }
                    None => {
                        let fraction =
                            decision.tally.delta_max as f64 / decision.tally.parsed_total() as f64;
                        sums.add(decision.label, fraction);
                    }
                }
            }
            sums.argmax()
        }
    };
    EnsembleDecision {
        label,
        strategy,
        per_model: decisions.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vote(label: Option<Label>, certainty: f64) -> PromptVote {
        PromptVote {
            kind: PromptKind::P1,
            label,
            certainty: Certainty::Value(certainty),
        }
    }

    fn votes(labels: &[Option<Label>], certainties: &[f64]) -> Vec<PromptVote> {
        labels
            .iter()
            .zip(certainties)
            .map(|(l, c)| vote(*l, *c))
            .collect()
    }

    const F: Option<Label> = Some(Label::For);
    const A: Option<Label> = Some(Label::Against);
    const N: Option<Label> = Some(Label::NoArgument);
    const U: Option<Label> = None;

    #[test]
    fn tally_counts_and_max() {
        let t = tally(&votes(&[F, F, A, N], &[0.5; 4])).unwrap();
        assert_eq!((t.delta_for, t.delta_against, t.delta_no), (2, 1, 1));
        assert_eq!(t.delta_max, 2);
    }

    #[test]
    fn tally_excludes_unparsed() {
        let t = tally(&votes(&[F, U, A, A], &[0.5; 4])).unwrap();
        assert_eq!((t.delta_for, t.delta_against, t.delta_no), (1, 2, 0));
        assert_eq!(t.delta_max, 2);
        assert_eq!(t.parsed_total(), 3);
    }

    #[test]
    fn tally_unanimous_neutral() {
        let t = tally(&votes(&[N, N, N, N], &[0.5; 4])).unwrap();
        assert_eq!((t.delta_for, t.delta_against, t.delta_no), (0, 0, 4));
        assert_eq!(t.delta_max, 4);
    }

    #[test]
    fn tally_all_unparsed_is_an_error() {
        assert_eq!(
            tally(&votes(&[U, U], &[0.5; 2])).unwrap_err(),
            VotingError::AllUnparsed
        );
        assert_eq!(tally(&[]).unwrap_err(), VotingError::AllUnparsed);
    }

    #[test]
    fn strict_majority_ignores_certainties() {
        let d =
            decide_algorithm1("m", &votes(&[F, F, F, A], &[0.1, 0.2, 0.3, 0.99]), None).unwrap();
        assert_eq!(d.label, Label::For);
        assert_eq!(d.method, DecisionMethod::Majority);
        assert!(d.weighted_scores.is_none());
    }

    #[test]
    fn two_way_tie_uses_weighted_scores() {
        let d = decide_algorithm1("m", &votes(&[F, A, F, A], &[0.9, 0.6, 0.8, 0.5]), None).unwrap();
        assert_eq!(d.label, Label::For);
        assert_eq!(d.method, DecisionMethod::CertaintyWeighted);
        let scores = d.weighted_scores.unwrap();
        assert!((scores.for_score - 1.7).abs() < 1e-12);
        assert!((scores.against_score - 1.1).abs() < 1e-12);
    }

    #[test]
    fn three_way_tie_uses_weighted_scores() {
        let d = decide_algorithm1("m", &votes(&[F, A, N], &[0.5, 0.9, 0.3]), None).unwrap();
        assert_eq!(d.label, Label::Against);
        assert_eq!(d.method, DecisionMethod::CertaintyWeighted);
    }

    #[test]
    fn weighted_tie_falls_back_to_precedence() {
        let d = decide_algorithm1("m", &votes(&[F, A], &[0.5, 0.5]), None).unwrap();
        assert_eq!(d.label, Label::For);
        let d = decide_algorithm1("m", &votes(&[A, N], &[0.5, 0.5]), None).unwrap();
        assert_eq!(d.label, Label::Against);
    }

    #[test]
    fn missing_certainty_carries_no_weight() {
        let mut vs = votes(&[F, A], &[0.2, 0.0]);
        vs[1].certainty = Certainty::Missing;
        let d = decide_algorithm1("m", &vs, None).unwrap();
        assert_eq!(d.label, Label::For);
        assert_eq!(d.weighted_scores.unwrap().against_score, 0.0);
    }

    #[test]
    fn min_weighted_score_degrades_to_neutral() {
        let vs = votes(&[F, A], &[0.2, 0.1]);
        let d = decide_algorithm1("m", &vs, Some(0.5)).unwrap();
        assert_eq!(d.label, Label::NoArgument);
        let d = decide_algorithm1("m", &vs, Some(0.1)).unwrap();
        assert_eq!(d.label, Label::For);
        // The floor never touches majority decisions.
        let d = decide_algorithm1("m", &votes(&[F, F, A], &[0.0; 3]), Some(5.0)).unwrap();
        assert_eq!(d.label, Label::For);
    }

    #[test]
    fn unparsed_votes_carry_zero_weight_in_ties() {
        let d = decide_algorithm1("m", &votes(&[F, A, U, U], &[0.3, 0.4, 0.9, 0.9]), None).unwrap();
        assert_eq!(d.label, Label::Against);
    }

    fn decision(label: Label, scores: Option<LabelScores>) -> ModelDecision {
        ModelDecision {
            model: "m".to_string(),
            label,
            method: if scores.is_some() {
                DecisionMethod::CertaintyWeighted
            } else {
                DecisionMethod::Majority
            },
            weighted_scores: scores,
            tally: VoteTally {
                delta_for: if label == Label::For { 3 } else { 1 },
                delta_against: if label == Label::Against { 3 } else { 1 },
                delta_no: if label == Label::NoArgument { 3 } else { 0 },
                delta_max: 3,
            },
        }
    }

    #[test]
    fn ensemble_plurality() {
        let ds = vec![
            decision(Label::For, None),
            decision(Label::For, None),
            decision(Label::Against, None),
        ];
        assert_eq!(
            ensemble_decide(&ds, EnsembleStrategy::Plurality).label,
            Label::For
        );
    }

    #[test]
    fn ensemble_certainty_sum() {
        let ds = vec![
            decision(
                Label::For,
                Some(LabelScores {
                    for_score: 1.7,
                    ..Default::default()
                }),
            ),
            decision(
                Label::Against,
                Some(LabelScores {
                    against_score: 2.0,
                    ..Default::default()
                }),
            ),
        ];
        assert_eq!(
            ensemble_decide(&ds, EnsembleStrategy::CertaintySum).label,
            Label::Against
        );
    }

    #[test]
    fn ensemble_single_model_is_identity() {
        for strategy in [EnsembleStrategy::Plurality, EnsembleStrategy::CertaintySum] {
            let ds = vec![decision(Label::NoArgument, None)];
            assert_eq!(ensemble_decide(&ds, strategy).label, Label::NoArgument);
        }
    }

    #[test]
    fn ensemble_plurality_tie_uses_scores_then_precedence() {
        let ds = vec![
            decision(
                Label::Against,
                Some(LabelScores {
                    against_score: 2.5,
                    ..Default::default()
                }),
            ),
            decision(
                Label::For,
                Some(LabelScores {
                    for_score: 0.5,
                    ..Default::default()
                }),
            ),
        ];
        assert_eq!(
            ensemble_decide(&ds, EnsembleStrategy::Plurality).label,
            Label::Against
        );
        // No scores anywhere: fixed precedence.
        let ds = vec![decision(Label::Against, None), decision(Label::For, None)];
        assert_eq!(
            ensemble_decide(&ds, EnsembleStrategy::Plurality).label,
            Label::For
        );
    }

    #[test]
    fn ensemble_majority_contributes_vote_fraction() {
        // Majority decision 3/4 for NoArgument outweighs a weighted 0.6.
        let mut majority = decision(Label::NoArgument, None);
        majority.tally = VoteTally {
            delta_for: 1,
            delta_against: 0,
            delta_no: 3,
            delta_max: 3,
        };
        let weighted = decision(
            Label::For,
            Some(LabelScores {
                for_score: 0.6,
                ..Default::default()
            }),
        );
        let result = ensemble_decide(&[majority, weighted], EnsembleStrategy::CertaintySum);
        assert_eq!(result.label, Label::NoArgument);
    }

    fn label_strategy() -> impl Strategy<Value = Option<Label>> {
        prop_oneof![Just(F), Just(A), Just(N), Just(U)]
    }

    proptest! {
        #[test]
        fn permutation_invariance(
            labels in proptest::collection::vec(label_strategy(), 2..6),
            certainties in proptest::collection::vec(0.0f64..=1.0, 6),
            shift in 0usize..6,
        ) {
            let vs = votes(&labels, &certainties[..labels.len()]);
            let mut rotated = vs.clone();
            rotated.rotate_left(shift % vs.len());
            let a = decide_algorithm1("m", &vs, None);
            let b = decide_algorithm1("m", &rotated, None);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.label, b.label),
                (Err(e1), Err(e2)) => prop_assert_eq!(e1, e2),
                _ => prop_assert!(false, "one order decided, the other errored"),
            }
        }

        #[test]
        fn positive_scaling_keeps_the_weighted_argmax(
            labels in proptest::collection::vec(label_strategy(), 2..6),
            certainties in proptest::collection::vec(0.05f64..=1.0, 6),
            scale in 0.1f64..=1.0,
        ) {
            let vs = votes(&labels, &certainties[..labels.len()]);
            let scaled: Vec<PromptVote> = vs
                .iter()
                .map(|v| PromptVote {
                    kind: v.kind,
                    label: v.label,
                    certainty: Certainty::Value(v.certainty.weight() * scale),
                })
                .collect();
            if let (Ok(a), Ok(b)) = (
                decide_algorithm1("m", &vs, None),
                decide_algorithm1("m", &scaled, None),
            ) {
                prop_assert_eq!(a.label, b.label);
                prop_assert_eq!(a.method, b.method);
            }
        }

        #[test]
        fn majority_dominance(
            labels in proptest::collection::vec(label_strategy(), 2..6),
            c1 in proptest::collection::vec(0.0f64..=1.0, 6),
            c2 in proptest::collection::vec(0.0f64..=1.0, 6),
        ) {
            let first = votes(&labels, &c1[..labels.len()]);
            let second = votes(&labels, &c2[..labels.len()]);
            if let (Ok(a), Ok(b)) = (
                decide_algorithm1("m", &first, None),
                decide_algorithm1("m", &second, None),
            ) {
                if a.method == DecisionMethod::Majority {
                    prop_assert_eq!(b.method, DecisionMethod::Majority);
                    prop_assert_eq!(a.label, b.label);
                }
            }
        }
    }
}
