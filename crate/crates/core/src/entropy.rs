//! Unigram token-probability model: per-memory information content in bits
//! and mutual-information redundancy scores.
//!
//! The conditional model the formalism assumes is approximated by a
//! Laplace-smoothed unigram fit; the model is a plain value type so a
//! stronger scorer can be swapped in behind the same calls. Entropies are
//! in bits (log base 2) everywhere; the threshold configuration documents
//! the unit.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::tokenize::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum EntropyError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("content has no tokens")]
    EmptyContent,
    #[error("invalid smoothing alpha {0}: must be > 0")]
    InvalidAlpha(f64),
    #[error("malformed model table at line {line}: {msg}")]
    MalformedTable { line: usize, msg: String },
}

/// Laplace-smoothed unigram model. Immutable after `fit`; shared reads are
/// unrestricted.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenModel {
    counts: BTreeMap<String, u64>,
    total_tokens: u64,
    smoothing_alpha: f64,
}

/// Fit a unigram model on a corpus of texts. Deterministic for identical
/// corpus order (and in fact for any order, counts being order-free).
pub fn fit<S: AsRef<str>>(corpus: &[S], smoothing_alpha: f64) -> Result<TokenModel, EntropyError> {
    if !(smoothing_alpha > 0.0) {
        return Err(EntropyError::InvalidAlpha(smoothing_alpha));
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for text in corpus {
        for tok in tokenize(text.as_ref()) {
            *counts.entry(tok).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(EntropyError::EmptyCorpus);
    }
    Ok(TokenModel {
        counts,
        total_tokens: total,
        smoothing_alpha,
    })
}

impl TokenModel {
    /// p(w) = (c(w) + alpha) / (N + alpha * V). Unseen tokens score the
    /// pseudo-count alpha alone; probabilities over the observed vocabulary
    /// sum to exactly 1.
    pub fn probability(&self, token: &str) -> f64 {
        let c = self.counts.get(token).copied().unwrap_or(0);
        let v = self.counts.len() as f64;
        (c as f64 + self.smoothing_alpha) / (self.total_tokens as f64 + self.smoothing_alpha * v)
    }

    /// -log2 p(w).
    pub fn surprisal_bits(&self, token: &str) -> f64 {
        -self.probability(token).log2()
    }

    /// Information content of a token sequence: the sum of per-token
    /// surprisals, in bits. Additive over concatenation by construction.
    pub fn entropy_bits(&self, content: &str) -> Result<f64, EntropyError> {
        let tokens = tokenize(content);
        if tokens.is_empty() {
            return Err(EntropyError::EmptyContent);
        }
        Ok(tokens.iter().map(|t| self.surprisal_bits(t)).sum())
    }

    /// Entropy of the deduplicated token set of `content`. This is the
    /// marginal used by the mutual-information computation, where the joint
    /// is defined on the deduplicated token union — set-based marginals make
    /// I(m, m) = H(m) hold exactly.
    pub fn set_entropy_bits(&self, content: &str) -> Result<f64, EntropyError> {
        let tokens = tokenize(content);
        if tokens.is_empty() {
            return Err(EntropyError::EmptyContent);
        }
        let set: BTreeSet<String> = tokens.into_iter().collect();
        Ok(set.iter().map(|t| self.surprisal_bits(t)).sum())
    }

    /// I(a; b) = H(a) + H(b) - H(a, b), with the joint taken as the entropy
    /// of the deduplicated token union and the marginals set-based to match.
    /// Clamped to >= 0.
    pub fn mutual_information_bits(&self, a: &str, b: &str) -> Result<f64, EntropyError> {
        let ha = self.set_entropy_bits(a)?;
        let hb = self.set_entropy_bits(b)?;
        let mut union: BTreeSet<String> = tokenize(a).into_iter().collect();
        union.extend(tokenize(b));
        let h_joint: f64 = union.iter().map(|t| self.surprisal_bits(t)).sum();
        Ok((ha + hb - h_joint).max(0.0))
    }

    /// Redundancy of `a` given `b`: I(a; b) / H(a), set-based. Ratio 1 means
    /// `a` is entirely derivable from `b` under this model.
    pub fn redundancy_ratio(&self, a: &str, b: &str) -> Result<f64, EntropyError> {
        let ha = self.set_entropy_bits(a)?;
        if ha == 0.0 {
            return Ok(1.0);
        }
        Ok(self.mutual_information_bits(a, b)? / ha)
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn smoothing_alpha(&self) -> f64 {
        self.smoothing_alpha
    }

    /// Sorted token -> count table in line-delimited text, for bit-exact
    /// reload. First line carries totals and alpha.
    pub fn to_table_string(&self) -> String {
        let mut out = format!(
            "#model total={} alpha={}\n",
            self.total_tokens, self.smoothing_alpha
        );
        for (tok, c) in &self.counts {
            out.push_str(tok);
            out.push('\t');
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_table_string(table: &str) -> Result<TokenModel, EntropyError> {
        let mut lines = table.lines().enumerate();
        let (_, header) = lines.next().ok_or(EntropyError::EmptyCorpus)?;
        let mut total: Option<u64> = None;
        let mut alpha: Option<f64> = None;
        for part in header.trim_start_matches("#model").split_whitespace() {
            if let Some(v) = part.strip_prefix("total=") {
                total = v.parse().ok();
            } else if let Some(v) = part.strip_prefix("alpha=") {
                alpha = v.parse().ok();
            }
        }
        let (total, alpha) = match (total, alpha) {
            (Some(t), Some(a)) => (t, a),
            _ => {
                return Err(EntropyError::MalformedTable {
                    line: 1,
                    msg: "missing total= or alpha= in header".into(),
                })
            }
        };
        let mut counts = BTreeMap::new();
        let mut sum = 0u64;
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (tok, c) = line.split_once('\t').ok_or(EntropyError::MalformedTable {
                line: i + 1,
                msg: "expected token<TAB>count".into(),
            })?;
            let c: u64 = c.parse().map_err(|_| EntropyError::MalformedTable {
                line: i + 1,
                msg: format!("bad count {c:?}"),
            })?;
            counts.insert(tok.to_string(), c);
            sum += c;
        }
        if sum != total {
            return Err(EntropyError::MalformedTable {
                line: 1,
                msg: format!("header total {total} != summed counts {sum}"),
            });
        }
        Ok(TokenModel {
            counts,
            total_tokens: total,
            smoothing_alpha: alpha,
        })
    }
}
