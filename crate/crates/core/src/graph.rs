//! Provenance-attributed causal graph: entity nodes, relational and
//! do-labeled interventional edges (each stamped with the contributing
//! agent), a node-to-memory link table bridging graph expansion into the
//! store, and the exploration-divergence machinery built on retrieval
//! distributions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::Extractor;
use crate::record::{AgentId, MemoryRecord, RecordId};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge endpoint missing from graph: {0}")]
    MissingEndpoint(NodeId),
    #[error("node not found: {0}")]
    NodeNotFound(NodeId),
    #[error("retrieval distributions have mismatched supports")]
    SupportMismatch,
    #[error("cannot construct distributions with pairwise divergence >= {requested} bits over {support} memories (max achievable {achievable:.4})")]
    InfeasibleDmin {
        requested: f64,
        support: usize,
        achievable: f64,
    },
    #[error("extractor failure: {0}")]
    ExtractorFailure(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Person,
    Concept,
    Decision,
    Outcome,
    SolutionRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: NodeId,
    pub label: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelEdge {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub label: String,
    pub provenance: AgentId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEdge {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    /// Interventional label of the form "do(X=x) => Y".
    pub do_label: String,
    pub strength: f64,
    pub provenance: AgentId,
}

/// The shared graph. Mutations go through the store's writer path; metric
/// computations run on snapshots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CausalGraph {
    nodes: BTreeMap<NodeId, Entity>,
    rel_edges: Vec<RelEdge>,
    causal_edges: Vec<CausalEdge>,
    /// node -> memories mentioning it (maintained at causal-extract time;
    /// the bridge retrieval's graph expansion walks).
    links: BTreeMap<NodeId, BTreeSet<RecordId>>,
    next_edge_id: u64,
}

impl CausalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, label: &str, kind: NodeKind) -> NodeId {
        let id = NodeId::new(label.to_ascii_lowercase());
        self.nodes.entry(id.clone()).or_insert_with(|| Entity {
            id: id.clone(),
            label: label.to_string(),
            kind,
        });
        id
    }

    pub fn node(&self, id: &NodeId) -> Option<&Entity> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Entity> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn rel_edges(&self) -> &[RelEdge] {
        &self.rel_edges
    }

    pub fn causal_edges(&self) -> &[CausalEdge] {
        &self.causal_edges
    }

    fn require_node(&self, id: &NodeId) -> Result<(), GraphError> {
        if self.nodes.contains_key(id) {
            Ok(())
        } else {
            Err(GraphError::MissingEndpoint(id.clone()))
        }
    }

    /// Add a relational edge. Duplicate (src, dst, label) edges merge,
    /// keeping the first writer's provenance.
    pub fn add_rel_edge(
        &mut self,
        src: &NodeId,
        dst: &NodeId,
        label: &str,
        provenance: AgentId,
    ) -> Result<bool, GraphError> {
        self.require_node(src)?;
        self.require_node(dst)?;
        if self
            .rel_edges
            .iter()
            .any(|e| &e.src == src && &e.dst == dst && e.label == label)
        {
            return Ok(false);
        }
        self.next_edge_id += 1;
        self.rel_edges.push(RelEdge {
            id: self.next_edge_id,
            src: src.clone(),
            dst: dst.clone(),
            label: label.to_string(),
            provenance,
        });
        Ok(true)
    }

    /// Add a causal edge. Duplicate (src, dst, do_label) edges merge, keeping
    /// the earlier provenance (first-discoverer credit) and the max strength.
    pub fn add_causal_edge(
        &mut self,
        src: &NodeId,
        dst: &NodeId,
        do_label: &str,
        strength: f64,
        provenance: AgentId,
    ) -> Result<bool, GraphError> {
        self.require_node(src)?;
        self.require_node(dst)?;
        if let Some(existing) = self
            .causal_edges
            .iter_mut()
            .find(|e| &e.src == src && &e.dst == dst && e.do_label == do_label)
        {
            existing.strength = existing.strength.max(strength);
            return Ok(false);
        }
        self.next_edge_id += 1;
        self.causal_edges.push(CausalEdge {
            id: self.next_edge_id,
            src: src.clone(),
            dst: dst.clone(),
            do_label: do_label.to_string(),
            strength,
            provenance,
        });
        Ok(true)
    }

    pub fn link(&mut self, node: &NodeId, record: &RecordId) {
        self.links
            .entry(node.clone())
            .or_default()
            .insert(record.clone());
    }

    /// Drop every link pointing at a removed record.
    pub fn unlink_record(&mut self, record: &RecordId) {
        for members in self.links.values_mut() {
            members.remove(record);
        }
        self.links.retain(|_, members| !members.is_empty());
    }

    pub fn memories_of(&self, node: &NodeId) -> impl Iterator<Item = &RecordId> {
        self.links.get(node).into_iter().flatten()
    }

    pub fn nodes_linking(&self, record: &RecordId) -> Vec<NodeId> {
        self.links
            .iter()
            .filter(|(_, members)| members.contains(record))
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// Adjacent nodes over both edge sets, traversed in both directions.
    pub fn neighbors_of(&self, node: &NodeId) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        for e in &self.rel_edges {
            if &e.src == node {
                out.insert(e.dst.clone());
            }
            if &e.dst == node {
                out.insert(e.src.clone());
            }
        }
        for e in &self.causal_edges {
            if &e.src == node {
                out.insert(e.dst.clone());
            }
            if &e.dst == node {
                out.insert(e.src.clone());
            }
        }
        out
    }

    /// Mine interventional edges from a record's content, stamping every new
    /// edge with the submitting agent's provenance and linking the record to
    /// every node it mentions. Returns the newly created edges (duplicates
    /// merge silently).
    pub fn causal_extract(
        &mut self,
        record: &MemoryRecord,
        agent: &AgentId,
        extractor: &dyn Extractor,
    ) -> Result<Vec<CausalEdge>, GraphError> {
        let findings = extractor
            .mine_causal(&record.content)
            .map_err(|e| GraphError::ExtractorFailure(e.to_string()))?;
        let mut new_edges = Vec::new();
        for f in findings {
            let src = self.add_node(&f.cause_label, f.cause_kind);
            let dst = self.add_node(&f.effect_label, f.effect_kind);
            let created =
                self.add_causal_edge(&src, &dst, &f.do_label, f.strength, agent.clone())?;
            self.link(&src, &record.id);
            self.link(&dst, &record.id);
            if created {
                new_edges.push(
                    self.causal_edges
                        .last()
                        .expect("edge just pushed")
                        .clone(),
                );
            }
        }
        Ok(new_edges)
    }

    /// Breadth-first expansion over both edge sets up to `hops`, returning
    /// the memories linked to every visited node. hops = 0 returns the
    /// memories of the seed nodes only. Monotone in hops.
    pub fn graph_neighbors(&self, seeds: &BTreeSet<NodeId>, hops: usize) -> BTreeSet<RecordId> {
        let mut visited: BTreeSet<NodeId> = seeds
            .iter()
            .filter(|n| self.nodes.contains_key(*n))
            .cloned()
            .collect();
        let mut frontier: VecDeque<(NodeId, usize)> =
            visited.iter().map(|n| (n.clone(), 0)).collect();
        while let Some((node, depth)) = frontier.pop_front() {
            if depth >= hops {
                continue;
            }
            for next in self.neighbors_of(&node) {
                if visited.insert(next.clone()) {
                    frontier.push_back((next, depth + 1));
                }
            }
        }
        let mut out = BTreeSet::new();
        for node in &visited {
            out.extend(self.memories_of(node).cloned());
        }
        out
    }

    /// Nodes whose label occurs in `text` (case-insensitive substring over
    /// the raw label). The entity-extraction step of query-time graph
    /// expansion.
    pub fn entities_in_text(&self, text: &str) -> BTreeSet<NodeId> {
        let lower = text.to_ascii_lowercase();
        self.nodes
            .values()
            .filter(|e| lower.contains(&e.label.to_ascii_lowercase()))
            .map(|e| e.id.clone())
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Retrieval distributions and exploration divergence
// ---------------------------------------------------------------------------

/// Per-agent retrieval distribution over memory ids, additively smoothed so
/// every probability is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalDistribution {
    pub agent: AgentId,
    probs: BTreeMap<RecordId, f64>,
    pub smoothing: f64,
}

impl RetrievalDistribution {
    /// Build from retrieval counts over an explicit support. `smoothing` is
    /// the total extra mass spread uniformly before renormalization
    /// (default 1e-6); the cited divergence definition requires strictly
    /// positive denominators and never addresses zero-probability memories.
    pub fn from_counts(
        agent: AgentId,
        counts: &BTreeMap<RecordId, u64>,
        support: &BTreeSet<RecordId>,
        smoothing: f64,
    ) -> Self {
        let n = support.len().max(1) as f64;
        let total: u64 = support.iter().map(|id| counts.get(id).copied().unwrap_or(0)).sum();
        let total = total as f64;
        let mut probs = BTreeMap::new();
        for id in support {
            let c = counts.get(id).copied().unwrap_or(0) as f64;
            let raw = if total > 0.0 { c / total } else { 1.0 / n };
            probs.insert(id.clone(), (raw + smoothing / n) / (1.0 + smoothing));
        }
        Self {
            agent,
            probs,
            smoothing,
        }
    }

    pub fn from_probs(
        agent: AgentId,
        raw: &BTreeMap<RecordId, f64>,
        smoothing: f64,
    ) -> Self {
        let n = raw.len().max(1) as f64;
        let total: f64 = raw.values().sum();
        let mut probs = BTreeMap::new();
        for (id, p) in raw {
            let p = if total > 0.0 { p / total } else { 1.0 / n };
            probs.insert(id.clone(), (p + smoothing / n) / (1.0 + smoothing));
        }
        Self {
            agent,
            probs,
            smoothing,
        }
    }

    pub fn probability(&self, id: &RecordId) -> Option<f64> {
        self.probs.get(id).copied()
    }

    pub fn support(&self) -> impl Iterator<Item = &RecordId> {
        self.probs.keys()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.values().sum()
    }
}

/// D_KL(r_i || r_j) in bits. Requires identical supports after smoothing;
/// zero iff the distributions are equal, asymmetric in general.
pub fn exploration_divergence(
    ri: &RetrievalDistribution,
    rj: &RetrievalDistribution,
) -> Result<f64, GraphError> {
    if ri.probs.len() != rj.probs.len()
        || !ri.probs.keys().zip(rj.probs.keys()).all(|(a, b)| a == b)
    {
        return Err(GraphError::SupportMismatch);
    }
    let mut kl = 0.0;
    for (id, p) in &ri.probs {
        let q = rj.probs[id];
        if *p > 0.0 {
            kl += p * (p / q).log2();
        }
    }
    Ok(kl.max(0.0))
}

// ---------------------------------------------------------------------------
// Coverage experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub rounds: u64,
    pub empirical_mean_distinct: f64,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n_agents: usize,
    pub per_agent_budget: usize,
    pub mem_count: usize,
    pub dmin_requested: f64,
    /// Minimum pairwise divergence actually achieved by the constructed
    /// distributions (infinite when n = 1: no pairs).
    pub dmin_achieved: f64,
    pub seeds: usize,
    pub points: Vec<CoveragePoint>,
    pub all_satisfied: bool,
}

/// Construct block-concentrated distributions over `mem_count` memories with
/// pairwise divergence >= dmin bits: agent i places mass 1 - beta uniformly
/// on its own block and beta on the rest. Smaller beta concentrates harder
/// and raises the divergence; we take the largest beta that still meets
/// dmin (most spread, hence richest coverage, while honoring the promise).
fn block_distributions(
    n: usize,
    mem_count: usize,
    dmin: f64,
) -> Result<(Vec<Vec<f64>>, f64), GraphError> {
    if n == 1 {
        return Ok((vec![vec![1.0 / mem_count as f64; mem_count]], f64::INFINITY));
    }
    let betas = [
        0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001,
    ];
    let mut best_achievable = 0.0f64;
    for &beta in &betas {
        let dists = build_blocks(n, mem_count, beta);
        let min_kl = min_pairwise_kl(&dists);
        best_achievable = best_achievable.max(min_kl);
        if min_kl >= dmin {
            return Ok((dists, min_kl));
        }
    }
    Err(GraphError::InfeasibleDmin {
        requested: dmin,
        support: mem_count,
        achievable: best_achievable,
    })
}

fn build_blocks(n: usize, mem_count: usize, beta: f64) -> Vec<Vec<f64>> {
    let block = mem_count / n;
    let mut dists = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i * block;
        let hi = if i == n - 1 { mem_count } else { lo + block };
        let inside = (hi - lo) as f64;
        let outside = (mem_count - (hi - lo)) as f64;
        let mut p = vec![0.0f64; mem_count];
        for (m, slot) in p.iter_mut().enumerate() {
            *slot = if m >= lo && m < hi {
                (1.0 - beta) / inside
            } else {
                beta / outside
            };
        }
        dists.push(p);
    }
    dists
}

fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).log2())
        .sum()
}

fn min_pairwise_kl(dists: &[Vec<f64>]) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..dists.len() {
        for j in 0..dists.len() {
            if i != j {
                min = min.min(kl_bits(&dists[i], &dists[j]));
            }
        }
    }
    min
}

fn sample_from(cdf: &[f64], u: f64) -> usize {
    match cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
        Ok(i) => (i + 1).min(cdf.len() - 1),
        Err(i) => i.min(cdf.len() - 1),
    }
}

/// Monte Carlo check of the coverage bound: n agents, each drawing k
/// memories per round from divergence-separated distributions, counted
/// distinct across all agents and rounds, against
/// n * k * (1 - e^{-dmin * T / |M|}) at each requested horizon.
pub fn coverage_experiment(
    n_agents: usize,
    per_agent_budget: usize,
    horizons: &[u64],
    dmin: f64,
    mem_count: usize,
    seeds: usize,
) -> Result<CoverageReport, GraphError> {
    let (dists, dmin_achieved) = block_distributions(n_agents, mem_count, dmin)?;
    let cdfs: Vec<Vec<f64>> = dists
        .iter()
        .map(|p| {
            let mut acc = 0.0;
            p.iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect()
        })
        .collect();

    let max_t = horizons.iter().copied().max().unwrap_or(0);
    let mut sums: BTreeMap<u64, f64> = horizons.iter().map(|t| (*t, 0.0)).collect();
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(0x00c0ffee ^ seed as u64);
        let mut seen = vec![false; mem_count];
        let mut distinct = 0usize;
        for t in 1..=max_t {
            for cdf in &cdfs {
                for _ in 0..per_agent_budget {
                    let u: f64 = rng.random();
                    let m = sample_from(cdf, u);
                    if !seen[m] {
                        seen[m] = true;
                        distinct += 1;
                    }
                }
            }
            if let Some(slot) = sums.get_mut(&t) {
                *slot += distinct as f64;
            }
        }
    }

    let mut points = Vec::new();
    let mut all_satisfied = true;
    for t in horizons {
        let empirical = sums[t] / seeds as f64;
        let bound = n_agents as f64
            * per_agent_budget as f64
            * (1.0 - (-dmin * *t as f64 / mem_count as f64).exp());
        let satisfied = empirical >= bound;
        all_satisfied &= satisfied;
        points.push(CoveragePoint {
            rounds: *t,
            empirical_mean_distinct: empirical,
            bound,
            satisfied,
        });
    }
    Ok(CoverageReport {
        n_agents,
        per_agent_budget,
        mem_count,
        dmin_requested: dmin,
        dmin_achieved,
        seeds,
        points,
        all_satisfied,
    })
}

// ---------------------------------------------------------------------------
// Line-delimited serialization (stable field order)
// ---------------------------------------------------------------------------

impl CausalGraph {
    /// One node or edge per line with a stable field order; reload gives an
    /// identical graph.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for e in self.nodes.values() {
            out.push_str(&format!(
                "node\t{}\t{}\t{}\n",
                e.id,
                serde_json::to_string(&e.kind).expect("kind serializes"),
                e.label
            ));
        }
        for e in &self.rel_edges {
            out.push_str(&format!(
                "rel\t{}\t{}\t{}\t{}\t{}\n",
                e.id, e.src, e.dst, e.label, e.provenance
            ));
        }
        for e in &self.causal_edges {
            out.push_str(&format!(
                "causal\t{}\t{}\t{}\t{}\t{}\t{}\n",
                e.id, e.src, e.dst, e.strength, e.provenance, e.do_label
            ));
        }
        for (node, members) in &self.links {
            for m in members {
                out.push_str(&format!("link\t{node}\t{m}\n"));
            }
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self, String> {
        let mut g = CausalGraph::new();
        let mut max_edge_id = 0u64;
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let fail = |msg: &str| format!("graph line {}: {msg}", i + 1);
            match fields[0] {
                "node" if fields.len() == 4 => {
                    let kind: NodeKind =
                        serde_json::from_str(fields[2]).map_err(|e| fail(&e.to_string()))?;
                    g.nodes.insert(
                        NodeId::from(fields[1]),
                        Entity {
                            id: NodeId::from(fields[1]),
                            label: fields[3].to_string(),
                            kind,
                        },
                    );
                }
                "rel" if fields.len() == 6 => {
                    let id: u64 = fields[1].parse().map_err(|_| fail("bad edge id"))?;
                    max_edge_id = max_edge_id.max(id);
                    g.rel_edges.push(RelEdge {
                        id,
                        src: NodeId::from(fields[2]),
                        dst: NodeId::from(fields[3]),
                        label: fields[4].to_string(),
                        provenance: AgentId::from(fields[5]),
                    });
                }
                "causal" if fields.len() == 7 => {
                    let id: u64 = fields[1].parse().map_err(|_| fail("bad edge id"))?;
                    let strength: f64 = fields[4].parse().map_err(|_| fail("bad strength"))?;
                    max_edge_id = max_edge_id.max(id);
                    g.causal_edges.push(CausalEdge {
                        id,
                        src: NodeId::from(fields[2]),
                        dst: NodeId::from(fields[3]),
                        strength,
                        provenance: AgentId::from(fields[5]),
                        do_label: fields[6].to_string(),
                    });
                }
                "link" if fields.len() == 3 => {
                    g.links
                        .entry(NodeId::from(fields[1]))
                        .or_default()
                        .insert(RecordId::from(fields[2]));
                }
                other => return Err(fail(&format!("unrecognized line kind {other:?}"))),
            }
        }
        g.next_edge_id = max_edge_id;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::MockExtractor;
    use crate::record::{FitnessWindow, Tier};

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
    fn causal_extract_no_pattern_is_empty() {
        let mut g = CausalGraph::new();
        let m = MockExtractor::new(1);
        let edges = g
            .causal_extract(&rec("m1", "plain observation"), &AgentId::from("a1"), &m)
            .unwrap();
        assert!(edges.is_empty());
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn causal_extract_do_pattern_and_idempotence() {
        let mut g = CausalGraph::new();
        let m = MockExtractor::new(1);
        let record = rec("m1", "we saw do(price=low) => share_up today");
        let edges = g
            .causal_extract(&record, &AgentId::from("a2"), &m)
            .unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].do_label, "do(price=low) => share_up");
        assert_eq!(edges[0].provenance, AgentId::from("a2"));
        assert_eq!(g.node_count(), 2);

        // resubmission: zero net new edges
        let again = g
            .causal_extract(&record, &AgentId::from("a3"), &m)
            .unwrap();
        assert!(again.is_empty());
        assert_eq!(g.causal_edges().len(), 1);
        // first-writer provenance preserved by the merge
        assert_eq!(g.causal_edges()[0].provenance, AgentId::from("a2"));
    }

    #[test]
    fn dedup_keeps_max_strength() {
        let mut g = CausalGraph::new();
        let a = g.add_node("x=1", NodeKind::Decision);
        let b = g.add_node("y", NodeKind::Outcome);
        g.add_causal_edge(&a, &b, "do(x=1) => y", 0.4, AgentId::from("a1"))
            .unwrap();
        g.add_causal_edge(&a, &b, "do(x=1) => y", 0.9, AgentId::from("a2"))
            .unwrap();
        assert_eq!(g.causal_edges().len(), 1);
        assert_eq!(g.causal_edges()[0].strength, 0.9);
        assert_eq!(g.causal_edges()[0].provenance, AgentId::from("a1"));
    }

    #[test]
    fn edge_endpoints_must_exist() {
        let mut g = CausalGraph::new();
        let a = g.add_node("a", NodeKind::Concept);
        let ghost = NodeId::from("ghost");
        assert!(g
            .add_rel_edge(&a, &ghost, "points", AgentId::from("a1"))
            .is_err());
    }

    #[test]
    fn graph_neighbors_chain() {
        let mut g = CausalGraph::new();
        let a = g.add_node("a", NodeKind::Concept);
        let b = g.add_node("b", NodeKind::Concept);
        let c = g.add_node("c", NodeKind::Concept);
        g.add_rel_edge(&a, &b, "rel", AgentId::from("a1")).unwrap();
        g.add_rel_edge(&b, &c, "rel", AgentId::from("a1")).unwrap();
        g.link(&a, &RecordId::from("ma"));
        g.link(&b, &RecordId::from("mb"));
        g.link(&c, &RecordId::from("mc"));

        let seeds: BTreeSet<NodeId> = [a.clone()].into();
        assert!(g.graph_neighbors(&BTreeSet::new(), 2).is_empty());
        let h0 = g.graph_neighbors(&seeds, 0);
        assert_eq!(h0, [RecordId::from("ma")].into());
        let h1 = g.graph_neighbors(&seeds, 1);
        assert_eq!(h1, [RecordId::from("ma"), RecordId::from("mb")].into());
        let h2 = g.graph_neighbors(&seeds, 2);
        assert_eq!(
            h2,
            [
                RecordId::from("ma"),
                RecordId::from("mb"),
                RecordId::from("mc")
            ]
            .into()
        );
        // monotone in hops
        assert!(h0.is_subset(&h1) && h1.is_subset(&h2));
    }

    #[test]
    fn graph_neighbors_matches_bfs_oracle() {
        // random-ish 30-node graph, deterministic construction
        let mut g = CausalGraph::new();
        let nodes: Vec<NodeId> = (0..30)
            .map(|i| g.add_node(&format!("n{i:02}"), NodeKind::Concept))
            .collect();
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for i in 0..30usize {
            let j = (i * 7 + 3) % 30;
            let k = (i * 13 + 11) % 30;
            for other in [j, k] {
                if other != i {
                    g.add_rel_edge(&nodes[i], &nodes[other], "rel", AgentId::from("a1"))
                        .unwrap();
                    adj.entry(nodes[i].clone()).or_default().insert(nodes[other].clone());
                    adj.entry(nodes[other].clone()).or_default().insert(nodes[i].clone());
                }
            }
            g.link(&nodes[i], &RecordId::from(format!("m{i:02}").as_str()));
        }

        // independent BFS implementation
        let seeds: BTreeSet<NodeId> = [nodes[0].clone(), nodes[17].clone()].into();
        let mut oracle_nodes: BTreeSet<NodeId> = seeds.clone();
        let mut frontier = seeds.clone();
        for _ in 0..2 {
            let mut next = BTreeSet::new();
            for n in &frontier {
                for nb in adj.get(n).into_iter().flatten() {
                    if !oracle_nodes.contains(nb) {
                        next.insert(nb.clone());
                    }
                }
            }
            oracle_nodes.extend(next.iter().cloned());
            frontier = next;
        }
        let oracle_mems: BTreeSet<RecordId> = oracle_nodes
            .iter()
            .map(|n| RecordId::from(format!("m{}", &n.as_str()[1..]).as_str()))
            .collect();

        assert_eq!(g.graph_neighbors(&seeds, 2), oracle_mems);
    }

    fn dist(agent: &str, pairs: &[(&str, f64)]) -> RetrievalDistribution {
        let raw: BTreeMap<RecordId, f64> = pairs
            .iter()
            .map(|(id, p)| (RecordId::from(*id), *p))
            .collect();
        RetrievalDistribution::from_probs(AgentId::from(agent), &raw, 0.0)
    }

    #[test]
    fn kl_self_divergence_zero() {
        let r = dist("a1", &[("m1", 0.5), ("m2", 0.5)]);
        assert!(exploration_divergence(&r, &r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_two_term_hand_computation() {
        // D((0.5,0.5) || (0.9,0.1)) = 0.5*log2(0.5/0.9) + 0.5*log2(0.5/0.1)
        let ri = dist("a1", &[("m1", 0.5), ("m2", 0.5)]);
        let rj = dist("a2", &[("m1", 0.9), ("m2", 0.1)]);
        let oracle = 0.5 * (0.5f64 / 0.9).log2() + 0.5 * (0.5f64 / 0.1).log2();
        assert!((oracle - 0.7369655941662062).abs() < 1e-10);
        let d = exploration_divergence(&ri, &rj).unwrap();
        assert!((d - oracle).abs() < 1e-12);
    }

    #[test]
    fn kl_asymmetric_witness() {
        // same pair reversed: 0.9*log2(0.9/0.5) + 0.1*log2(0.1/0.5)
        let ri = dist("a1", &[("m1", 0.5), ("m2", 0.5)]);
        let rj = dist("a2", &[("m1", 0.9), ("m2", 0.1)]);
        let reversed_oracle = 0.9 * (0.9f64 / 0.5).log2() + 0.1 * (0.1f64 / 0.5).log2();
        assert!((reversed_oracle - 0.5310044064107188).abs() < 1e-10);
        let fwd = exploration_divergence(&ri, &rj).unwrap();
        let rev = exploration_divergence(&rj, &ri).unwrap();
        assert!((rev - reversed_oracle).abs() < 1e-12);
        assert!((fwd - rev).abs() > 0.1, "KL must witness asymmetry");
    }

    #[test]
    fn kl_support_mismatch() {
        let ri = dist("a1", &[("m1", 0.5), ("m2", 0.5)]);
        let rj = dist("a2", &[("m1", 0.5), ("m3", 0.5)]);
        assert_eq!(
            exploration_divergence(&ri, &rj).unwrap_err(),
            GraphError::SupportMismatch
        );
    }

    #[test]
    fn smoothing_makes_all_probs_positive() {
        let counts: BTreeMap<RecordId, u64> = [(RecordId::from("m1"), 10)].into();
        let support: BTreeSet<RecordId> = [RecordId::from("m1"), RecordId::from("m2")].into();
        let r = RetrievalDistribution::from_counts(AgentId::from("a1"), &counts, &support, 1e-6);
        assert!((r.total_mass() - 1.0).abs() < 1e-9);
        assert!(r.probability(&RecordId::from("m2")).unwrap() > 0.0);
    }

    #[test]
    fn coverage_single_agent_bound_holds() {
        let report = coverage_experiment(1, 5, &[10, 50], 0.3, 50, 100).unwrap();
        assert!(report.all_satisfied);
        assert!(report.dmin_achieved.is_infinite());
    }

    #[test]
    fn coverage_saturates_at_universe() {
        let report = coverage_experiment(2, 5, &[500], 0.3, 10, 20).unwrap();
        let last = report.points.last().unwrap();
        assert!(last.empirical_mean_distinct <= 10.0 + 1e-9);
        assert!(last.empirical_mean_distinct > 9.0);
    }

    #[test]
    fn coverage_infeasible_dmin() {
        let err = coverage_experiment(2, 1, &[10], 30.0, 4, 5).unwrap_err();
        assert!(matches!(err, GraphError::InfeasibleDmin { .. }));
    }

    #[test]
    fn graph_lines_roundtrip() {
        let mut g = CausalGraph::new();
        let a = g.add_node("price=low", NodeKind::Decision);
        let b = g.add_node("share_up", NodeKind::Outcome);
        g.add_causal_edge(&a, &b, "do(price=low) => share_up", 0.8, AgentId::from("a1"))
            .unwrap();
        g.add_rel_edge(&a, &b, "observed_with", AgentId::from("a2"))
            .unwrap();
        g.link(&a, &RecordId::from("m1"));
        let text = g.to_lines();
        let g2 = CausalGraph::from_lines(&text).unwrap();
        assert_eq!(g, g2);
        assert_eq!(text, g2.to_lines());
    }
}
