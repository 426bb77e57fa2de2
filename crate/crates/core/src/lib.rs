//! Evolutionary memory substrate for multi-agent open-ended optimization.
//!
//! The substrate is a shared tri-partite memory hub plus the machinery that
//! keeps it alive:
//!
//! - [`store`] — the record store with entropy-gated tier assignment
//!   (skills / notes / attempts), the four-operation update protocol
//!   (add / update / delete / noop), pruning, and a context-budget monitor.
//! - [`entropy`] — unigram token-probability model supplying per-memory
//!   information content in bits and mutual-information redundancy scores.
//! - [`embed`] — deterministic signed feature-hash embeddings and exact
//!   top-k cosine retrieval.
//! - [`graph`] — provenance-attributed causal graph with do-labeled edges,
//!   2-hop expansion for retrieval, and exploration-divergence metrics.
//! - [`dynamics`] — replicator-decay confidence evolution, windowed fitness,
//!   Lyapunov diagnostics, and stability checks with invasion tests.
//! - [`retrieval`] — five-stage value-of-information retrieval driven by an
//!   exponential-weight population of retrieval strategies, plus prompt
//!   assembly.
//! - [`consolidate`] — five-phase background consolidation: fork,
//!   distillation of note clusters into skills, conflict resolution,
//!   mutual-information pruning, index synchronization.
//! - [`heartbeat`] — the per-turn controller firing reflection (periodic),
//!   consolidation (notes threshold), and redirection (confidence plateau).
//! - [`persist`] — layered file persistence: always-loaded skill mirrors,
//!   per-record files, substring search over attempts, crash-safe index.
//! - [`extract`] — the pluggable boundary for extraction / update decisions /
//!   reflection / summarization, with a deterministic rule-based
//!   implementation used by every test.
//! - [`pipeline`] — the per-turn write pipeline tying the above together.
//!
//! All randomness is seeded, timestamps are logical turn counters, and every
//! component is deterministic given identical inputs, so whole experiment
//! runs replay bit-for-bit.

pub mod config;
pub mod consolidate;
pub mod dynamics;
pub mod embed;
pub mod entropy;
pub mod extract;
pub mod graph;
pub mod heartbeat;
pub mod persist;
pub mod pipeline;
pub mod record;
pub mod retrieval;
pub mod store;
pub mod tokenize;

pub use record::{AgentId, FitnessWindow, MemoryRecord, RecordId, RetrievalOutcome, StoreDelta, Tier, Turn, UpdateOp};
pub use store::{assign_tier, BudgetReport, Store, StoreConfig, StoreError};
