//! Memory records and the four-operation update vocabulary.
//!
//! Timestamps throughout the substrate are logical turn counters, never
//! wall-clock, so identical inputs replay identically.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tokenize::token_count;

/// Logical turn counter.
pub type Turn = u64;

/// Opaque record identifier. Ordering is lexicographic and is the
/// deterministic tie-breaker everywhere ranked results can tie.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(pub String);

impl RecordId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RecordId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Contributing agent identifier (the provenance tag carried by every
/// record and graph edge).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// The tri-partite hub tiers.
///
/// Skills are low-entropy, frequently retrieved, and always loaded into
/// context. Notes are mid-entropy observations reached by similarity search.
/// Attempts are high-entropy raw logs reached only by substring search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Skills,
    Notes,
    Attempts,
}

impl Tier {
    pub fn rank(self) -> u8 {
        match self {
            Tier::Skills => 1,
            Tier::Notes => 2,
            Tier::Attempts => 3,
        }
    }

    pub fn from_rank(rank: u8) -> Option<Tier> {
        match rank {
            1 => Some(Tier::Skills),
            2 => Some(Tier::Notes),
            3 => Some(Tier::Attempts),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tier::Skills => "skills",
            Tier::Notes => "notes",
            Tier::Attempts => "attempts",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one retrieval of a memory, judged by the downstream reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RetrievalOutcome {
    Success,
    Failure,
}

/// Sliding window of (turn, outcome) retrieval events backing the fitness
/// signal. Events with timestamp >= now - w count; older events are lazily
/// expired. Runtime-only state: it is not part of the persisted form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitnessWindow {
    events: VecDeque<(Turn, RetrievalOutcome)>,
}

impl FitnessWindow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, turn: Turn, outcome: RetrievalOutcome) {
        self.events.push_back((turn, outcome));
    }

    /// Drop events that left the window. Keeps memory bounded; the counting
    /// accessors filter by timestamp anyway.
    pub fn expire(&mut self, now: Turn, w: Turn) {
        let cutoff = now.saturating_sub(w);
        while let Some(&(t, _)) = self.events.front() {
            if t < cutoff {
                self.events.pop_front();
            } else {
                break;
            }
        }
    }

    fn in_window<'a>(
        &'a self,
        now: Turn,
        w: Turn,
    ) -> impl Iterator<Item = &'a (Turn, RetrievalOutcome)> + 'a {
        let cutoff = now.saturating_sub(w);
        self.events.iter().filter(move |(t, _)| *t >= cutoff && *t <= now)
    }

    /// Total retrievals within [now - w, now].
    pub fn count_in(&self, now: Turn, w: Turn) -> u64 {
        self.in_window(now, w).count() as u64
    }

    /// Successful retrievals within [now - w, now].
    pub fn successes_in(&self, now: Turn, w: Turn) -> u64 {
        self.in_window(now, w)
            .filter(|(_, o)| *o == RetrievalOutcome::Success)
            .count() as u64
    }

    /// Timestamp-ordered union of two windows, truncated to the window span.
    /// Used by the Update operation, which merges the retrieval history of
    /// the replaced record with the candidate's.
    pub fn merged(a: &FitnessWindow, b: &FitnessWindow, now: Turn, w: Turn) -> FitnessWindow {
        let cutoff = now.saturating_sub(w);
        let mut events: Vec<(Turn, RetrievalOutcome)> = a
            .events
            .iter()
            .chain(b.events.iter())
            .filter(|(t, _)| *t >= cutoff)
            .copied()
            .collect();
        events.sort_by_key(|(t, _)| *t);
        FitnessWindow {
            events: events.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Turn, RetrievalOutcome)> {
        self.events.iter()
    }
}

/// One memory in the shared store.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryRecord {
    pub id: RecordId,
    pub content: String,
    /// Unit-norm embedding, recomputed deterministically on load.
    pub embedding: Vec<f64>,
    /// Information content of the content in bits.
    pub entropy: f64,
    pub tier: Tier,
    /// Evolutionary confidence in [0, 1].
    pub confidence: f64,
    /// Agent that contributed this memory. Never changes across updates.
    pub provenance: AgentId,
    pub fitness_window: FitnessWindow,
    /// Retrievals counted over the current fitness window. Refreshed by the
    /// per-turn re-stratification pass and by retrieval closes.
    pub retrieval_frequency: u64,
    pub created_at: Turn,
    pub updated_at: Turn,
}

impl MemoryRecord {
    /// Token count of the content; the |m| cost used by budget checks and
    /// the retrieval gain denominator.
    pub fn token_count(&self) -> usize {
        token_count(&self.content)
    }

    /// Windowed success rate: successes / (total + epsilon) over
    /// [now - w, now]; zero when the window holds no retrievals.
    pub fn fitness(&self, now: Turn, w: Turn, epsilon: f64) -> f64 {
        let total = self.fitness_window.count_in(now, w);
        if total == 0 {
            return 0.0;
        }
        let successes = self.fitness_window.successes_in(now, w);
        successes as f64 / (total as f64 + epsilon)
    }

    pub fn record_retrieval(&mut self, now: Turn, w: Turn, outcome: RetrievalOutcome) {
        self.fitness_window.push(now, outcome);
        self.fitness_window.expire(now, w);
        self.retrieval_frequency = self.fitness_window.count_in(now, w);
    }
}

/// The four-operation update protocol. Target requirements are encoded in
/// the variants; the candidate record supplies new content for Add/Update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateOp {
    Add,
    Update { target: RecordId },
    Delete { target: RecordId },
    Noop,
}

impl UpdateOp {
    pub fn kind(&self) -> &'static str {
        match self {
            UpdateOp::Add => "add",
            UpdateOp::Update { .. } => "update",
            UpdateOp::Delete { .. } => "delete",
            UpdateOp::Noop => "noop",
        }
    }
}

/// Ids touched by one applied update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreDelta {
    pub created: Vec<RecordId>,
    pub modified: Vec<RecordId>,
    pub removed: Vec<RecordId>,
}

impl StoreDelta {
    pub fn is_empty(&self) -> bool {
        self.created.is_empty() && self.modified.is_empty() && self.removed.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_counts_respect_boundaries() {
        let mut win = FitnessWindow::new();
        win.push(5, RetrievalOutcome::Success);
        win.push(10, RetrievalOutcome::Failure);
        win.push(20, RetrievalOutcome::Success);
        // window [10, 20]: the event at turn 5 is outside
        assert_eq!(win.count_in(20, 10), 2);
        assert_eq!(win.successes_in(20, 10), 1);
        // event exactly at now - w counts
        assert_eq!(win.count_in(15, 10), 2);
    }

    #[test]
    fn window_event_older_than_w_excluded() {
        let mut win = FitnessWindow::new();
        let now = 100;
        let w = 10;
        win.push(now - w - 1, RetrievalOutcome::Success);
        assert_eq!(win.count_in(now, w), 0);
        win.push(now - w, RetrievalOutcome::Success);
        assert_eq!(win.count_in(now, w), 1);
    }

    #[test]
    fn merged_window_is_sorted_union_truncated() {
        let mut a = FitnessWindow::new();
        a.push(1, RetrievalOutcome::Success);
        a.push(8, RetrievalOutcome::Failure);
        let mut b = FitnessWindow::new();
        b.push(5, RetrievalOutcome::Success);
        let m = FitnessWindow::merged(&a, &b, 10, 5);
        let turns: Vec<Turn> = m.iter().map(|(t, _)| *t).collect();
        assert_eq!(turns, vec![5, 8]); // turn 1 fell outside [5, 10]
    }

    #[test]
    fn fitness_matches_direct_arithmetic() {
        let mut rec = MemoryRecord {
            id: RecordId::from("m1"),
            content: "x".into(),
            embedding: vec![1.0],
            entropy: 1.0,
            tier: Tier::Notes,
            confidence: 0.5,
            provenance: AgentId::from("a0"),
            fitness_window: FitnessWindow::new(),
            retrieval_frequency: 0,
            created_at: 0,
            updated_at: 0,
        };
        assert_eq!(rec.fitness(10, 5, 0.1), 0.0);
        for t in [8, 9, 10] {
            rec.record_retrieval(t, 5, RetrievalOutcome::Success);
        }
        // 3 successes of 3 retrievals, epsilon 0.1 -> 3/3.1
        let f = rec.fitness(10, 5, 0.1);
        assert!((f - 3.0 / 3.1).abs() < 1e-12);
        assert_eq!(rec.retrieval_frequency, 3);
    }
}
