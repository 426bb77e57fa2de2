//! The shared tri-partite store: record lifecycle, the four-operation update
//! protocol, entropy-gated tier assignment, pruning, and the context-budget
//! monitor.
//!
//! Concurrency contract: single writer, many readers. All mutation goes
//! through one `&mut Store` path (the harness's writer loop); readers work
//! on snapshots. Re-stratification runs once per turn after the dynamics
//! step, not per mutation, which keeps tier flapping bounded.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::record::{
    FitnessWindow, MemoryRecord, RecordId, StoreDelta, Tier, Turn, UpdateOp,
};

#[derive(Debug, Error, PartialEq)]
pub enum StoreError {
    #[error("target not found: {0}")]
    TargetNotFound(RecordId),
    #[error("duplicate id: {0}")]
    DuplicateId(RecordId),
    #[error("invalid store config: {0}")]
    ConfigInvalid(String),
}

/// Thresholds governing tier assignment, pruning, and the context budget.
///
/// Units: tau1/tau2 are in bits (summed per-token surprisal), matching the
/// entropy implementation; the experiment sections quoting these values in
/// nats are inconsistent with their own log-base-2 definition, and we do not
/// guess which was intended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoreConfig {
    /// Entropy below which a frequently-retrieved memory is a skill.
    pub tau1: f64,
    /// Entropy at or above which a memory is an attempt.
    pub tau2: f64,
    /// Minimum windowed retrieval count for skill residency.
    pub phi1: u64,
    /// Windowed retrieval count below which a memory is demoted to attempts.
    pub phi3: u64,
    /// Confidence below which records are pruned.
    pub epsilon_prune: f64,
    /// Context token budget C for the always-loaded tier.
    pub context_budget: u64,
    pub embedding_dim: usize,
    /// Initial confidence assigned on Add. The formalism never states one;
    /// 0.5 is the uninformative midpoint and coincides with the decay ~
    /// mutation fixed point when mu/lambda = 0.5.
    pub kappa0: f64,
    /// When set, skills are exempt from confidence pruning.
    pub protect_skills: bool,
    /// Compression factor beta, reported by the budget monitor only.
    pub beta_compression: f64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            tau1: 2.5,
            tau2: 5.0,
            phi1: 3,
            phi3: 0,
            epsilon_prune: 0.01,
            context_budget: 1000,
            embedding_dim: 64,
            kappa0: 0.5,
            protect_skills: false,
            beta_compression: 1.0,
        }
    }
}

impl StoreConfig {
    pub fn validate(&self) -> Result<(), StoreError> {
        if !(self.tau1 > 0.0 && self.tau1 < self.tau2) {
            return Err(StoreError::ConfigInvalid(format!(
                "need 0 < tau1 < tau2, got tau1={} tau2={}",
                self.tau1, self.tau2
            )));
        }
        if self.phi1 <= self.phi3 {
            return Err(StoreError::ConfigInvalid(format!(
                "need phi1 > phi3 >= 0, got phi1={} phi3={}",
                self.phi1, self.phi3
            )));
        }
        if !(self.epsilon_prune > 0.0 && self.epsilon_prune < 1.0) {
            return Err(StoreError::ConfigInvalid(format!(
                "epsilon_prune must be in (0,1), got {}",
                self.epsilon_prune
            )));
        }
        if self.embedding_dim == 0 {
            return Err(StoreError::ConfigInvalid("embedding_dim must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.kappa0) {
            return Err(StoreError::ConfigInvalid(format!(
                "kappa0 must be in [0,1], got {}",
                self.kappa0
            )));
        }
        Ok(())
    }
}

/// Tier assignment. Clause precedence when both demotion and promotion
/// conditions hold (low entropy but windowed frequency under phi3): the
/// attempts clause wins — a memory that is never retrieved should not occupy
/// always-loaded budget. The formal statement leaves the clauses unordered.
pub fn assign_tier(entropy: f64, frequency: u64, cfg: &StoreConfig) -> Tier {
    if entropy >= cfg.tau2 || frequency < cfg.phi3 {
        Tier::Attempts
    } else if entropy < cfg.tau1 && frequency >= cfg.phi1 {
        Tier::Skills
    } else {
        Tier::Notes
    }
}

/// Advisory report from the always-loaded-tier budget monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub skills_tokens: u64,
    pub bound: f64,
    pub within_bound: bool,
    pub beta_compression: f64,
}

#[derive(Debug, Clone)]
pub struct Store {
    records: BTreeMap<RecordId, MemoryRecord>,
    pub cfg: StoreConfig,
    /// Current logical turn; advanced by the episode loop.
    pub turn: Turn,
    /// Bumped by each consolidation's index synchronization phase.
    pub index_version: u64,
}

impl Store {
    pub fn new(cfg: StoreConfig) -> Result<Self, StoreError> {
        cfg.validate()?;
        Ok(Self {
            records: BTreeMap::new(),
            cfg,
            turn: 0,
            index_version: 0,
        })
    }

    /// Apply one protocol operation. The candidate supplies content,
    /// embedding, entropy, and provenance for Add/Update; Delete and Noop
    /// ignore it.
    ///
    /// Add initializes confidence to kappa0 with an empty fitness window.
    /// Update preserves the original provenance, creation turn, and
    /// confidence, and merges the fitness windows (timestamp-ordered union
    /// truncated to `w`).
    pub fn apply_update(
        &mut self,
        op: &UpdateOp,
        candidate: &MemoryRecord,
        w: Turn,
    ) -> Result<StoreDelta, StoreError> {
        let now = self.turn;
        let mut delta = StoreDelta::default();
        match op {
            UpdateOp::Noop => {}
            UpdateOp::Add => {
                if self.records.contains_key(&candidate.id) {
                    return Err(StoreError::DuplicateId(candidate.id.clone()));
                }
                let mut rec = candidate.clone();
                rec.confidence = self.cfg.kappa0;
                rec.fitness_window = FitnessWindow::new();
                rec.retrieval_frequency = 0;
                rec.created_at = now;
                rec.updated_at = now;
                rec.tier = assign_tier(rec.entropy, 0, &self.cfg);
                delta.created.push(rec.id.clone());
                self.records.insert(rec.id.clone(), rec);
            }
            UpdateOp::Update { target } => {
                let existing = self
                    .records
                    .get_mut(target)
                    .ok_or_else(|| StoreError::TargetNotFound(target.clone()))?;
                existing.content = candidate.content.clone();
                existing.embedding = candidate.embedding.clone();
                existing.entropy = candidate.entropy;
                existing.fitness_window = FitnessWindow::merged(
                    &existing.fitness_window,
                    &candidate.fitness_window,
                    now,
                    w,
                );
                existing.retrieval_frequency = existing.fitness_window.count_in(now, w);
                existing.updated_at = now;
                existing.tier =
                    assign_tier(existing.entropy, existing.retrieval_frequency, &self.cfg);
                delta.modified.push(target.clone());
            }
            UpdateOp::Delete { target } => {
                if self.records.remove(target).is_none() {
                    return Err(StoreError::TargetNotFound(target.clone()));
                }
                delta.removed.push(target.clone());
            }
        }
        Ok(delta)
    }

    /// Insert a fully-built record, bypassing the Add initialization. Used
    /// for seeding, reflection notes (which carry a forced tier), distilled
    /// skills, and synthetic test populations.
    pub fn insert_raw(&mut self, record: MemoryRecord) -> Result<(), StoreError> {
        if self.records.contains_key(&record.id) {
            return Err(StoreError::DuplicateId(record.id.clone()));
        }
        self.records.insert(record.id.clone(), record);
        Ok(())
    }

    /// Re-derive windowed frequency and tier for every record. Runs once per
    /// turn after the dynamics step.
    pub fn restratify(&mut self, w: Turn) {
        let now = self.turn;
        for rec in self.records.values_mut() {
            rec.fitness_window.expire(now, w);
            rec.retrieval_frequency = rec.fitness_window.count_in(now, w);
            rec.tier = assign_tier(rec.entropy, rec.retrieval_frequency, &self.cfg);
        }
    }

    /// Token cost of the always-loaded tier against C * tau1 / mean_entropy.
    /// Advisory only; never mutates.
    pub fn tier1_token_budget_check(&self, mean_entropy: f64) -> BudgetReport {
        let skills_tokens: u64 = self
            .tier_members(Tier::Skills)
            .map(|r| r.token_count() as u64)
            .sum();
        let bound = self.cfg.context_budget as f64 * self.cfg.tau1 / mean_entropy;
        BudgetReport {
            skills_tokens,
            bound,
            within_bound: (skills_tokens as f64) <= bound,
            beta_compression: self.cfg.beta_compression,
        }
    }

    /// Remove every record with confidence below `epsilon`; returns the
    /// removed ids in ascending order. Skills are exempt only when
    /// `protect_skills` is set.
    pub fn prune_below_threshold(&mut self, epsilon: f64) -> Vec<RecordId> {
        let protect = self.cfg.protect_skills;
        let doomed: Vec<RecordId> = self
            .records
            .values()
            .filter(|r| r.confidence < epsilon && !(protect && r.tier == Tier::Skills))
            .map(|r| r.id.clone())
            .collect();
        for id in &doomed {
            self.records.remove(id);
        }
        doomed
    }

    pub fn remove(&mut self, id: &RecordId) -> Option<MemoryRecord> {
        self.records.remove(id)
    }

    pub fn get(&self, id: &RecordId) -> Option<&MemoryRecord> {
        self.records.get(id)
    }

    pub fn get_mut(&mut self, id: &RecordId) -> Option<&mut MemoryRecord> {
        self.records.get_mut(id)
    }

    pub fn contains(&self, id: &RecordId) -> bool {
        self.records.contains_key(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &MemoryRecord> {
        self.records.values()
    }

    pub fn records_mut(&mut self) -> impl Iterator<Item = &mut MemoryRecord> {
        self.records.values_mut()
    }

    pub fn tier_members(&self, tier: Tier) -> impl Iterator<Item = &MemoryRecord> {
        self.records.values().filter(move |r| r.tier == tier)
    }

    pub fn tier_count(&self, tier: Tier) -> usize {
        self.tier_members(tier).count()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Mean entropy across the whole store; 0 when empty.
    pub fn mean_entropy(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.values().map(|r| r.entropy).sum::<f64>() / self.records.len() as f64
    }

    /// Mean confidence across the whole store; 0 when empty.
    pub fn mean_confidence(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.values().map(|r| r.confidence).sum::<f64>() / self.records.len() as f64
    }

    /// Immutable snapshot for readers.
    pub fn snapshot(&self) -> Store {
        self.clone()
    }

    /// SHA-256 over the canonical persisted form of every record, in id
    /// order. Two stores hash equal iff their persisted forms are
    /// byte-identical.
    pub fn state_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for rec in self.records.values() {
            hasher.update(crate::persist::record_line(rec).as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}
