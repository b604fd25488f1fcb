//! Three-valued outcomes with a proof tier and the evidence behind them.
//!
//! `Exact` verdicts rest on a closed-form rule (finite exhaustion, the
//! asymptotic oracle, the power-series radius rule, a curated fact).
//! `Empirical` verdicts only ever say `Unknown`, except for a `Fails` backed by
//! a provably monotone divergence.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::logvalue::LogValue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Holds,
    Fails,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Exact,
    Empirical,
}

/// The rule a step of evidence rests on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofRule {
    /// Finitely many indices: every supremum and sum is a finite maximum or sum.
    FiniteIndexSet,
    /// Every level of a finite family was examined.
    FiniteLevels,
    /// The oracle found the limit of the ratio.
    Limit,
    /// The oracle decided convergence of the series.
    Series,
    /// Power-series grid comparison of radii.
    Radius,
    /// All weights are at least one, so `p ≤ p²` pointwise.
    PointwiseBound,
    /// Weights monotone in the index: `α_ij p_i p_j ≤ p_j²` with `C = 1`, `q = p`.
    MonotoneFamily,
    /// Chaining two certificates.
    Composed,
    /// A fact shipped with a builtin family.
    Curated,
    /// Implied by the unital condition.
    Propagated,
    /// Observed on the prefix only.
    Prefix,
}

impl ProofRule {
    pub fn is_exact(self) -> bool {
        !matches!(self, ProofRule::Prefix)
    }
}

/// `p^(source) ≤ C · q^(target)` on the verified prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationStep {
    pub source_level: u64,
    pub target_level: u64,
    #[serde(rename = "logC")]
    pub log_c: f64,
    pub proof_rule: ProofRule,
    pub depth: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DominationCertificate {
    pub steps: Vec<DominationStep>,
}

impl DominationCertificate {
    pub fn step_for(&self, source_level: u64) -> Option<&DominationStep> {
        self.steps.iter().find(|s| s.source_level == source_level)
    }

    /// Chains `P ≺ Q` with `Q ≺ R`. Source levels whose target has no step in
    /// `next` are dropped.
    pub fn compose(&self, next: &DominationCertificate) -> DominationCertificate {
        let steps = self
            .steps
            .iter()
            .filter_map(|s| {
                let t = next.step_for(s.target_level)?;
                let rule = if s.proof_rule.is_exact() && t.proof_rule.is_exact() {
                    ProofRule::Composed
                } else {
                    ProofRule::Prefix
                };
                Some(DominationStep {
                    source_level: s.source_level,
                    target_level: t.target_level,
                    log_c: s.log_c + t.log_c,
                    proof_rule: rule,
                    depth: s.depth.min(t.depth),
                })
            })
            .collect();
        DominationCertificate { steps }
    }
}

/// A summable ratio `Σ_i p^(source)_i / q^(target)_i` (or `Σ_i p_i` without a target).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummationStep {
    pub source_level: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_level: Option<u64>,
    /// Sum over the prefix.
    pub partial: LogValue,
    pub proof_rule: ProofRule,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Certificate {
    Domination(DominationCertificate),
    Equivalence { forward: DominationCertificate, backward: DominationCertificate },
    Summation { steps: Vec<SummationStep> },
    /// (M2)/(M3) verified with `q = p` and the given constant on a square prefix.
    Matrices { side: u64, levels: u64, #[serde(rename = "logC")] log_c: f64, proof_rule: ProofRule },
    /// `sup_n log n / log p_n` at one level, over the prefix.
    LogCriterion { level: u64, prefix_sup: LogValue, proof_rule: ProofRule },
    Citation { text: String },
    /// (P1) and (P2) verified for pointwise-ordered levels on the prefix.
    Axioms { levels_checked: u64 },
}

/// Why a condition fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureWitness {
    pub level: u64,
    pub proof_rule: ProofRule,
    pub detail: String,
}

/// A partial quantity observed at a prefix length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub depth: usize,
    pub value: LogValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub tier: Tier,
    pub depth: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<FailureWitness>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trend: Vec<TrendPoint>,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub note: String,
}

impl Verdict {
    pub fn holds(depth: usize, certificate: Certificate) -> Verdict {
        Verdict {
            outcome: Outcome::Holds,
            tier: Tier::Exact,
            depth,
            certificate: Some(certificate),
            witness: None,
            trend: Vec::new(),
            note: String::new(),
        }
    }

    pub fn fails(depth: usize, witness: FailureWitness) -> Verdict {
        Verdict {
            outcome: Outcome::Fails,
            tier: Tier::Exact,
            depth,
            certificate: None,
            witness: Some(witness),
            trend: Vec::new(),
            note: String::new(),
        }
    }

    /// Empirical failure: partial sums that grow without bound by a monotone argument.
    pub fn fails_divergent(depth: usize, witness: FailureWitness, trend: Vec<TrendPoint>) -> Verdict {
        Verdict { tier: Tier::Empirical, trend, ..Verdict::fails(depth, witness) }
    }

    pub fn unknown(depth: usize, note: impl Into<String>) -> Verdict {
        Verdict {
            outcome: Outcome::Unknown,
            tier: Tier::Empirical,
            depth,
            certificate: None,
            witness: None,
            trend: Vec::new(),
            note: note.into(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Verdict {
        self.note = note.into();
        self
    }

    pub fn with_trend(mut self, trend: Vec<TrendPoint>) -> Verdict {
        self.trend = trend;
        self
    }

    /// Attaches partial evidence to an `Unknown` verdict.
    pub fn with_certificate(mut self, certificate: Certificate) -> Verdict {
        self.certificate = Some(certificate);
        self
    }

    pub fn is_holds(&self) -> bool {
        self.outcome == Outcome::Holds
    }

    pub fn is_fails(&self) -> bool {
        self.outcome == Outcome::Fails
    }

    pub fn is_exact(&self) -> bool {
        self.tier == Tier::Exact
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(s: u64, t: u64, c: f64) -> DominationStep {
        DominationStep { source_level: s, target_level: t, log_c: c, proof_rule: ProofRule::Limit, depth: 100 }
    }

    #[test]
    fn composition_chains_levels_and_adds_constants() {
        let pq = DominationCertificate { steps: alloc::vec![step(1, 2, 0.5), step(2, 3, 0.0)] };
        let qr = DominationCertificate { steps: alloc::vec![step(2, 5, 1.0)] };
        let pr = pq.compose(&qr);
        assert_eq!(pr.steps.len(), 1);
        assert_eq!(pr.steps[0].target_level, 5);
        assert_eq!(pr.steps[0].log_c, 1.5);
        assert_eq!(pr.steps[0].proof_rule, ProofRule::Composed);
    }

    #[test]
    fn certificate_json_uses_log_c_key() {
        let c = Certificate::Domination(DominationCertificate { steps: alloc::vec![step(1, 1, 0.0)] });
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"logC\":0.0"), "{s}");
        assert!(s.contains("\"proof_rule\":\"limit\""));
        let back: Certificate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
