//! The pluggable boundary for all language-model-shaped work: candidate
//! extraction, the add/update/delete/noop decision, reflection digests,
//! distillation summaries, contradiction flags, and causal-edge mining.
//!
//! Every implementation used in tests must be deterministic given identical
//! inputs and seed. [`MockExtractor`] is the rule-based implementation that
//! ships with the substrate; a model-backed implementation is an extension
//! point and never runs in CI.

use std::collections::BTreeSet;

use regex::Regex;
use thiserror::Error;

use crate::graph::NodeKind;
use crate::record::{MemoryRecord, UpdateOp};
use crate::tokenize::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum ExtractorError {
    #[error("extractor failure: {0}")]
    Failure(String),
}

/// Hint from extraction about where a candidate belongs. Tier assignment
/// still goes through the entropy gate; the hint only shapes id generation
/// and logging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindHint {
    Attempt,
    Note,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMemory {
    pub content: String,
    pub kind_hint: KindHint,
}

/// One mined interventional relationship: do(cause) => effect.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalFinding {
    pub cause_label: String,
    pub cause_kind: NodeKind,
    pub effect_label: String,
    pub effect_kind: NodeKind,
    pub do_label: String,
    pub strength: f64,
}

pub trait Extractor {
    /// Propose candidate memories from one (user turn, agent turn) pair with
    /// running summary and recent-turn history.
    fn extract(
        &self,
        user_turn: &str,
        agent_turn: &str,
        summary: &str,
        recent: &[String],
    ) -> Result<Vec<CandidateMemory>, ExtractorError>;

    /// Choose the protocol operation for a candidate given its ranked
    /// nearest neighbors (cosine-descending). Never returns Update/Delete
    /// targeting a record outside `neighbors`.
    fn decide(
        &self,
        candidate: &CandidateMemory,
        neighbors: &[(f64, &MemoryRecord)],
    ) -> Result<UpdateOp, ExtractorError>;

    /// Produce a reflection note digest from recent turns.
    fn reflect(&self, recent_turns: &[String]) -> Result<String, ExtractorError>;

    /// Summarize a cluster of note contents into a candidate skill.
    fn summarize(&self, cluster: &[&str]) -> Result<String, ExtractorError>;

    /// Flag whether two contents contradict each other.
    fn contradicts(&self, a: &str, b: &str) -> Result<bool, ExtractorError>;

    /// Mine interventional relationships from content.
    fn mine_causal(&self, content: &str) -> Result<Vec<CausalFinding>, ExtractorError>;

    fn tag(&self) -> &'static str;
}

const TRIGGERS: [&str; 5] = ["score=", "improved", "failed", "because", "do("];
const NEGATIONS: [&str; 3] = ["not", "never", "no_longer"];

/// Deterministic rule-based extractor used by every test and by the scripted
/// optimizer harness.
#[derive(Debug, Clone)]
pub struct MockExtractor {
    pub seed: u64,
    /// Cosine at or above which a candidate is a duplicate (Noop).
    pub noop_threshold: f64,
    /// Cosine at or above which a same-subject candidate updates its
    /// nearest neighbor.
    pub update_threshold: f64,
}

impl Default for MockExtractor {
    fn default() -> Self {
        Self {
            seed: 0,
            noop_threshold: 0.95,
            update_threshold: 0.80,
        }
    }
}

fn split_sentences(text: &str) -> impl Iterator<Item = &str> {
    text.split(['.', '!', '?', ';', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

fn negation_markers(text: &str) -> BTreeSet<&'static str> {
    let tokens: BTreeSet<String> = tokenize(text).into_iter().collect();
    NEGATIONS
        .iter()
        .copied()
        .filter(|n| tokens.contains(*n))
        .collect()
}

impl MockExtractor {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn do_pattern(&self) -> Regex {
        // do(X=x) => Y
        Regex::new(r"do\(\s*([A-Za-z0-9_]+)\s*=\s*([A-Za-z0-9_.\-]+)\s*\)\s*=>\s*([A-Za-z0-9_]+)")
            .expect("static regex")
    }
}

impl Extractor for MockExtractor {
    /// Rule: sentences containing any trigger template become candidates.
    /// Sentences with "score=" are attempt-flavored, everything else is a
    /// note.
    fn extract(
        &self,
        user_turn: &str,
        agent_turn: &str,
        _summary: &str,
        _recent: &[String],
    ) -> Result<Vec<CandidateMemory>, ExtractorError> {
        let mut out = Vec::new();
        for source in [user_turn, agent_turn] {
            for sentence in split_sentences(source) {
                let lower = sentence.to_ascii_lowercase();
                if TRIGGERS.iter().any(|t| lower.contains(t)) {
                    let kind_hint = if lower.contains("score=") {
                        KindHint::Attempt
                    } else {
                        KindHint::Note
                    };
                    out.push(CandidateMemory {
                        content: sentence.to_string(),
                        kind_hint,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Rule: max cosine >= noop threshold -> Noop; in [update, noop) with a
    /// contradiction against the nearest -> Delete(nearest) (the write
    /// pipeline follows a Delete decision with the candidate's Add); in the
    /// same band with a shared subject token -> Update(nearest); else Add.
    fn decide(
        &self,
        candidate: &CandidateMemory,
        neighbors: &[(f64, &MemoryRecord)],
    ) -> Result<UpdateOp, ExtractorError> {
        let Some((best_cos, nearest)) = neighbors.first() else {
            return Ok(UpdateOp::Add);
        };
        if *best_cos >= self.noop_threshold {
            return Ok(UpdateOp::Noop);
        }
        if *best_cos >= self.update_threshold {
            if self.contradicts(&candidate.content, &nearest.content)? {
                return Ok(UpdateOp::Delete {
                    target: nearest.id.clone(),
                });
            }
            let cand_subject = tokenize(&candidate.content).into_iter().next();
            let near_subject = tokenize(&nearest.content).into_iter().next();
            if cand_subject.is_some() && cand_subject == near_subject {
                return Ok(UpdateOp::Update {
                    target: nearest.id.clone(),
                });
            }
        }
        Ok(UpdateOp::Add)
    }

    /// Fixed-template digest: best score seen, last action kind, trigger
    /// tokens encountered.
    fn reflect(&self, recent_turns: &[String]) -> Result<String, ExtractorError> {
        let score_re = Regex::new(r"score=([0-9]+(?:\.[0-9]+)?)").expect("static regex");
        let mut best: Option<f64> = None;
        let mut last_action: Option<&str> = None;
        let mut triggers_seen: Vec<&str> = Vec::new();
        for turn in recent_turns {
            let lower = turn.to_ascii_lowercase();
            for cap in score_re.captures_iter(&lower) {
                if let Ok(v) = cap[1].parse::<f64>() {
                    best = Some(match best {
                        Some(b) if b >= v => b,
                        _ => v,
                    });
                }
            }
            for action in ["improved", "failed"] {
                if lower.contains(action) {
                    last_action = Some(action);
                }
            }
            for t in TRIGGERS {
                let tok = t.trim_end_matches(['=', '(']);
                if lower.contains(t) && !triggers_seen.contains(&tok) {
                    triggers_seen.push(tok);
                }
            }
        }
        let best_str = best.map_or_else(|| "none".to_string(), |b| format!("{b}"));
        let action_str = last_action.unwrap_or("none");
        let trigger_str = if triggers_seen.is_empty() {
            "none".to_string()
        } else {
            triggers_seen.join(" ")
        };
        Ok(format!(
            "reflection best_score={best_str} last_action={action_str} triggers={trigger_str}"
        ))
    }

    /// Cluster summary: the deduplicated intersection-then-union token core.
    /// Tokens shared by every member come first (ordered by appearance in
    /// the first member); if no token is shared by all, fall back to tokens
    /// shared by a majority, then to the deduplicated union.
    fn summarize(&self, cluster: &[&str]) -> Result<String, ExtractorError> {
        if cluster.is_empty() {
            return Ok(String::new());
        }
        let token_sets: Vec<BTreeSet<String>> = cluster
            .iter()
            .map(|c| tokenize(c).into_iter().collect())
            .collect();
        let first_order = tokenize(cluster[0]);
        let mut seen = BTreeSet::new();
        let all = |tok: &String| token_sets.iter().all(|s| s.contains(tok));
        let majority = |tok: &String| {
            token_sets.iter().filter(|s| s.contains(tok)).count() * 2 > token_sets.len()
        };

        let mut core: Vec<String> = first_order
            .iter()
            .filter(|t| all(t) && seen.insert((*t).clone()))
            .cloned()
            .collect();
        if core.is_empty() {
            seen.clear();
            core = first_order
                .iter()
                .filter(|t| majority(t) && seen.insert((*t).clone()))
                .cloned()
                .collect();
        }
        if core.is_empty() {
            seen.clear();
            for c in cluster {
                for t in tokenize(c) {
                    if seen.insert(t.clone()) {
                        core.push(t);
                    }
                }
            }
        }
        Ok(core.join(" "))
    }

    /// Rule: identical token cores that differ only in negation markers
    /// contradict each other.
    fn contradicts(&self, a: &str, b: &str) -> Result<bool, ExtractorError> {
        let neg_a = negation_markers(a);
        let neg_b = negation_markers(b);
        if neg_a == neg_b {
            return Ok(false);
        }
        let strip = |text: &str| -> BTreeSet<String> {
            tokenize(text)
                .into_iter()
                .filter(|t| !NEGATIONS.contains(&t.as_str()))
                .collect()
        };
        Ok(strip(a) == strip(b))
    }

    /// Literal pattern match on "do(X=x) => Y": X=x becomes a decision node,
    /// Y an outcome node, joined by a causal edge at full strength.
    fn mine_causal(&self, content: &str) -> Result<Vec<CausalFinding>, ExtractorError> {
        let re = self.do_pattern();
        let mut out = Vec::new();
        for cap in re.captures_iter(content) {
            let cause = format!("{}={}", &cap[1], &cap[2]);
            let effect = cap[3].to_string();
            out.push(CausalFinding {
                do_label: format!("do({cause}) => {effect}"),
                cause_label: cause,
                cause_kind: NodeKind::Decision,
                effect_label: effect,
                effect_kind: NodeKind::Outcome,
                strength: 1.0,
            });
        }
        Ok(out)
    }

    fn tag(&self) -> &'static str {
        "mock"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{AgentId, FitnessWindow, RecordId, Tier};

    fn mock() -> MockExtractor {
        MockExtractor::new(7)
    }

    fn rec(id: &str, content: &str) -> MemoryRecord {
        MemoryRecord {
            id: RecordId::from(id),
            content: content.to_string(),
            embedding: vec![1.0],
            entropy: 3.0,
            tier: Tier::Notes,
            confidence: 0.5,
            provenance: AgentId::from("a0"),
            fitness_window: FitnessWindow::new(),
            retrieval_frequency: 0,
            created_at: 0,
            updated_at: 0,
        }
    }

    #[test]
    fn extract_no_trigger_is_empty() {
        let m = mock();
        let out = m
            .extract("nothing interesting here", "just chatting", "", &[])
            .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn extract_attempt_candidate() {
        let m = mock();
        let out = m
            .extract("", "tour score=4200 improved via segment reversal", "", &[])
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].kind_hint, KindHint::Attempt);
        assert!(out[0].content.contains("score=4200"));
    }

    #[test]
    fn extract_count_matches_scan_oracle() {
        // 200 synthetic turns; oracle is an independent per-sentence scan
        let m = mock();
        let mut turns = Vec::new();
        for i in 0..200 {
            let turn = match i % 5 {
                0 => format!("move {i} score={i} logged"),
                1 => format!("this improved the layout at step {i}"),
                2 => format!("attempt {i} was neutral"),
                3 => format!("we pivot because plateau at {i}"),
                _ => format!("idle turn {i}"),
            };
            turns.push(turn);
        }
        let mut oracle = 0usize;
        for t in &turns {
            let lower = t.to_ascii_lowercase();
            if ["score=", "improved", "failed", "because", "do("]
                .iter()
                .any(|p| lower.contains(p))
            {
                oracle += 1;
            }
        }
        let mut extracted = 0usize;
        for t in &turns {
            extracted += m.extract(t, "", "", &[]).unwrap().len();
        }
        assert_eq!(extracted, oracle);
        assert_eq!(extracted, 120);
    }

    #[test]
    fn decide_empty_neighbors_adds() {
        let m = mock();
        let cand = CandidateMemory {
            content: "new fact because reasons".into(),
            kind_hint: KindHint::Note,
        };
        assert_eq!(m.decide(&cand, &[]).unwrap(), UpdateOp::Add);
    }

    #[test]
    fn decide_byte_identical_is_noop() {
        let m = mock();
        let near = rec("m1", "segment reversal improved");
        let cand = CandidateMemory {
            content: "segment reversal improved".into(),
            kind_hint: KindHint::Note,
        };
        assert_eq!(m.decide(&cand, &[(1.0, &near)]).unwrap(), UpdateOp::Noop);
    }

    #[test]
    fn decide_near_duplicate_shared_subject_updates() {
        let m = mock();
        let near = rec("m1", "segment reversal improved score=10");
        let cand = CandidateMemory {
            content: "segment reversal improved score=12".into(),
            kind_hint: KindHint::Note,
        };
        assert_eq!(
            m.decide(&cand, &[(0.9, &near)]).unwrap(),
            UpdateOp::Update {
                target: RecordId::from("m1")
            }
        );
    }

    #[test]
    fn decide_contradiction_deletes_nearest() {
        let m = mock();
        let near = rec("m1", "long reversals improved");
        let cand = CandidateMemory {
            content: "long reversals not improved".into(),
            kind_hint: KindHint::Note,
        };
        assert_eq!(
            m.decide(&cand, &[(0.9, &near)]).unwrap(),
            UpdateOp::Delete {
                target: RecordId::from("m1")
            }
        );
    }

    #[test]
    fn reflect_empty_input_template() {
        let m = mock();
        assert_eq!(
            m.reflect(&[]).unwrap(),
            "reflection best_score=none last_action=none triggers=none"
        );
    }

    #[test]
    fn reflect_known_log_exact_template() {
        let m = mock();
        let turns = vec![
            "tried reversal score=4200 improved".to_string(),
            "tried long segment score=4350 failed".to_string(),
            "pivot because stagnation".to_string(),
        ];
        assert_eq!(
            m.reflect(&turns).unwrap(),
            "reflection best_score=4350 last_action=failed triggers=score improved failed because"
        );
    }

    #[test]
    fn reflect_tokens_subset_of_inputs_and_template() {
        let m = mock();
        let turns = vec![
            "alpha score=7 improved".to_string(),
            "beta failed because gamma".to_string(),
        ];
        let digest = m.reflect(&turns).unwrap();
        let mut allowed: BTreeSet<String> = turns.iter().flat_map(|t| tokenize(t)).collect();
        for t in tokenize("reflection best_score last_action triggers none score improved failed because do 7") {
            allowed.insert(t);
        }
        for tok in tokenize(&digest) {
            assert!(allowed.contains(&tok), "unexpected digest token {tok}");
        }
    }

    #[test]
    fn summarize_extracts_shared_core() {
        let m = mock();
        let cluster = [
            "segment_len 12 improved tour alpha",
            "segment_len 12 improved tour beta",
            "segment_len 12 improved tour gamma run",
        ];
        assert_eq!(
            m.summarize(&cluster).unwrap(),
            "segment_len 12 improved tour"
        );
    }

    #[test]
    fn contradicts_negation_rule() {
        let m = mock();
        assert!(m
            .contradicts("long reversals improved", "long reversals not improved")
            .unwrap());
        assert!(!m
            .contradicts("long reversals improved", "long reversals improved")
            .unwrap());
        assert!(!m
            .contradicts("short reversals improved", "long reversals not improved")
            .unwrap());
    }

    #[test]
    fn mine_causal_literal_pattern() {
        let m = mock();
        let found = m
            .mine_causal("we observed do(price=low) => share_up in round 3")
            .unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].do_label, "do(price=low) => share_up");
        assert_eq!(found[0].cause_label, "price=low");
        assert_eq!(found[0].effect_label, "share_up");
        assert!(m.mine_causal("no pattern here").unwrap().is_empty());
    }
}
