//! Approximate identities built from (B) and (N), the `A = A²` criterion via
//! square roots, and the non-idempotence counterexample.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, Limit};
use crate::conditions::{check_b, check_log_criterion, check_n};
use crate::error::{Error, Result};
use crate::expr::{Env, Node, Var, WeightExpr};
use crate::index::{Index, IndexSet};
use crate::logvalue::{LogSumExp, LogValue};
use crate::sequences::{membership, pointwise_mul, seminorm_l1, seminorm_sup, Coeff, SeqElement};
use crate::verdict::{Certificate, Outcome, Verdict};
use crate::weights::{Level, Monotone, WeightFamily};

/// Levels `p ≤ q` with `p/q ∈ ℓ¹`, taken from the (B) and (N) certificates.
#[derive(Clone, Debug)]
pub struct ApproxSetup {
    family: WeightFamily,
    p_level: u64,
    q_level: u64,
    depth: usize,
    /// `I' = {p_i > 1}` lies inside the prefix.
    i_prime_finite: bool,
}

impl ApproxSetup {
    pub fn new(p: &WeightFamily, p_level: u64, depth: usize, level_budget: u64) -> Result<ApproxSetup> {
        let depth = p.index_set().prefix_len(depth.max(1));
        if !check_b(p, depth, level_budget)?.is_holds() {
            return Err(Error::Precondition("(B) is not certified".into()));
        }
        let n = check_n(p, depth, level_budget.max(p_level));
        let target = match (&n.certificate, n.is_holds()) {
            (Some(Certificate::Summation { steps }), true) => {
                steps.iter().find(|s| s.source_level == p_level).and_then(|s| s.target_level)
            }
            _ => None,
        }
        .ok_or_else(|| Error::Precondition(format!("(N) has no certificate for level {p_level}")))?;
        let family = p.running_max();
        let index_set = family.index_set();
        let i_prime_finite = index_set.is_finite() || {
            let lv = family.level(p_level)?;
            family.flags().monotone_in_index == Monotone::Nonincreasing
                && index_set.prefix(depth).any(|idx| lv.eval(idx).is_ok_and(|v| v <= LogValue::ONE))
        };
        Ok(ApproxSetup { q_level: target.max(p_level), family, p_level, depth, i_prime_finite })
    }

    pub fn p_level(&self) -> u64 {
        self.p_level
    }

    pub fn q_level(&self) -> u64 {
        self.q_level
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    fn levels(&self) -> Result<(Level, Level)> {
        Ok((self.family.level(self.p_level)?, self.family.level(self.q_level)?))
    }

    /// `u_n` for `a`: the indicator of `J'_n ∪ J''_n`.
    pub fn step(&self, a: &SeqElement, n: u64) -> Result<ApproxIdentityStep> {
        if n == 0 {
            return Err(Error::InvalidParameter("n starts at 1".into()));
        }
        let a = extend(a, self.depth)?;
        let (lp, lq) = self.levels()?;
        let index_set = self.family.index_set();
        let log_n = LogValue::from_log((n as f64).ln());
        let bound = LogValue::from_log(-2.0 * (n as f64).ln());
        let (mut j_prime, mut j_doubleprime) = (Vec::new(), Vec::new());
        let mut last_q = LogValue::ZERO;
        for (r, idx) in index_set.prefix(self.depth).enumerate() {
            let rank = r as u64 + 1;
            let p = lp.eval(idx)?;
            last_q = lq.eval(idx)?;
            if p > LogValue::ONE {
                // q_i ≤ n, with slack for ln rounding at exact powers
                if last_q.ln() <= log_n.ln() + 1e-12 * log_n.ln().abs().max(1.0) {
                    j_prime.push(rank);
                }
            } else if a.get(rank).log_abs * p >= bound {
                j_doubleprime.push(rank);
            }
        }
        let closed = self.i_prime_finite
            || (self.family.flags().monotone_in_index == Monotone::Nondecreasing && last_q > log_n);
        if !closed {
            return Err(Error::Budget(format!("J'_{n} is not closed at depth {}", self.depth)));
        }
        let tail = outside_tail_sup(&a, &self.family, self.p_level)?;
        if !a.has_zero_tail() && tail.is_none_or(|t| t >= bound) {
            return Err(Error::Budget(format!("the tail bound beyond depth {} does not reach 1/n² for n = {n}", self.depth)));
        }
        ApproxIdentityStep::from_sets(index_set, self.depth as u64, n, self.q_level, j_prime, j_doubleprime)
    }
}

/// `a` with explicit entries up to `depth`, filled from its tail rule.
fn extend(a: &SeqElement, depth: usize) -> Result<SeqElement> {
    let depth = depth as u64;
    if a.n() >= depth {
        return Ok(a.truncate(depth));
    }
    if a.has_zero_tail() {
        return SeqElement::sparse(a.index_set(), depth, a.entries().iter().copied(), a.tail_rule().cloned());
    }
    let tail = a.tail_rule().ok_or_else(|| Error::Precondition("the element needs a tail rule".into()))?;
    let mut entries = a.entries().to_vec();
    for r in a.n() + 1..=depth {
        let idx = a.index_set().index_at(r).expect("rank in range");
        let v = tail.eval(1, idx).map_err(|source| Error::Eval { k: 1, index: idx, source })?;
        entries.push((r, Coeff::positive(v)));
    }
    SeqElement::sparse(a.index_set(), depth, entries, Some(tail.clone()))
}

/// Bound on `sup_{i beyond depth} |a_i| p_i`.
fn outside_tail_sup(a: &SeqElement, p: &WeightFamily, k: u64) -> Result<Option<LogValue>> {
    Ok(if a.has_zero_tail() { Some(LogValue::ZERO) } else { seminorm_sup(a, p, k)?.tail_bound })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxIdentityStep {
    pub n: u64,
    pub q_level: u64,
    /// Ranks in `J'_n`.
    pub j_prime: Vec<u64>,
    /// Ranks in `J''_n`.
    pub j_doubleprime: Vec<u64>,
    pub u: SeqElement,
}

impl ApproxIdentityStep {
    pub fn from_sets(
        index_set: IndexSet,
        depth: u64,
        n: u64,
        q_level: u64,
        j_prime: Vec<u64>,
        j_doubleprime: Vec<u64>,
    ) -> Result<ApproxIdentityStep> {
        if j_prime.iter().any(|r| j_doubleprime.contains(r)) {
            return Err(Error::InvalidParameter("J' and J'' overlap".into()));
        }
        let support = j_prime.iter().chain(&j_doubleprime).map(|&r| (r, Coeff::ONE));
        let u = SeqElement::sparse(index_set, depth, support, Some(WeightExpr::from_node(Node::num(0.0))))?;
        Ok(ApproxIdentityStep { n, q_level, j_prime, j_doubleprime, u })
    }

    pub fn in_support(&self, rank: u64) -> bool {
        !self.u.get(rank).is_zero()
    }
}

pub fn build_un(a: &SeqElement, p: &WeightFamily, p_level: u64, n: u64, depth: usize) -> Result<ApproxIdentityStep> {
    ApproxSetup::new(p, p_level, depth, crate::weights::SAMPLED_LEVELS)?.step(a, n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    /// `n ‖a − a u_n‖_p^∞`, tail included.
    pub value: LogValue,
    /// `n sup_{I''∖J''_n} |a_i| p_i < 1/n`.
    pub branch_bound_ipp: LogValue,
    /// `sup_{I'∖J'_n} |a_i| q_i²` on the prefix.
    pub branch_bound_ip: LogValue,
    /// `‖u_n‖_p^∞`.
    pub u_sup: LogValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub p_level: u64,
    pub q_level: u64,
    pub rows: Vec<ConvergenceRow>,
    /// Steps `n` whose value exceeds the previous one.
    pub increases: Vec<u64>,
}

impl ConvergenceReport {
    pub fn below_from(&self, n0: u64, epsilon: f64) -> bool {
        let eps = LogValue::from_value(epsilon).unwrap_or(LogValue::ZERO);
        self.rows.iter().filter(|r| r.n >= n0).all(|r| r.value <= eps)
    }

    pub fn nonincreasing_from(&self, n0: u64) -> bool {
        self.increases.iter().all(|&n| n <= n0)
    }

    /// Smallest `n0` with every later value at most `epsilon`.
    pub fn first_below(&self, epsilon: f64) -> Option<u64> {
        let eps = LogValue::from_value(epsilon).unwrap_or(LogValue::ZERO);
        let last_bad = self.rows.iter().rev().find(|r| r.value > eps).map(|r| r.n);
        match last_bad {
            None => self.rows.first().map(|r| r.n),
            Some(n) => self.rows.iter().find(|r| r.n > n).map(|r| r.n),
        }
    }
}

/// Sup of `|a_i| w_i` over prefix ranks outside the step's support, restricted by `keep`.
fn sup_outside(
    a: &SeqElement,
    step: &ApproxIdentityStep,
    w: &Level,
    keep: impl Fn(u64) -> bool,
) -> Result<LogValue> {
    let index_set = a.index_set();
    let mut sup = LogValue::ZERO;
    for &(r, c) in a.entries() {
        if step.in_support(r) || !keep(r) {
            continue;
        }
        sup = sup.max(c.log_abs * w.eval(index_set.index_at(r).expect("rank in range"))?);
    }
    Ok(sup)
}

pub fn verify_convergence(a: &SeqElement, setup: &ApproxSetup, steps: &[ApproxIdentityStep]) -> Result<ConvergenceReport> {
    let a = extend(a, setup.depth)?;
    let (lp, lq) = setup.levels()?;
    let index_set = a.index_set();
    let in_i_prime = |r: u64| lp.eval(index_set.index_at(r).expect("rank in range")).is_ok_and(|v| v > LogValue::ONE);
    let tail = outside_tail_sup(&a, &setup.family, setup.p_level)?.unwrap_or(LogValue::INFINITY);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(steps.len());
    let mut increases = Vec::new();
    for step in steps {
        let log_n = LogValue::from_log((step.n as f64).ln());
        let outside = sup_outside(&a, step, &lp, |_| true)?.max(tail);
        let value = log_n * outside;
        let ip = {
            let mut sup = LogValue::ZERO;
            for &(r, c) in a.entries() {
                if step.in_support(r) || !in_i_prime(r) {
                    continue;
                }
                let q = lq.eval(index_set.index_at(r).expect("rank in range"))?;
                sup = sup.max(c.log_abs * q * q);
            }
            sup
        };
        let u_sup = LogValue::sup(
            step.u.entries().iter().map(|&(r, _)| lp.eval(index_set.index_at(r).expect("rank in range"))).collect::<Result<Vec<_>>>()?,
        );
        if rows.last().is_some_and(|prev| value > prev.value) {
            increases.push(step.n);
        }
        rows.push(ConvergenceRow { n: step.n, value, branch_bound_ipp: LogValue::ONE / log_n, branch_bound_ip: ip, u_sup });
    }
    Ok(ConvergenceReport { p_level: setup.p_level, q_level: setup.q_level, rows, increases })
}

/// Steps for `n = 1..=n_max`.
pub fn build_steps(a: &SeqElement, setup: &ApproxSetup, n_max: u64) -> Result<Vec<ApproxIdentityStep>> {
    (1..=n_max).map(|n| setup.step(a, n)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawsonReadRow {
    pub n: u64,
    /// `max_a ‖a − a u_n‖_p`; `None` when some tail is not bounded.
    pub approx_identity: Option<LogValue>,
    /// `max_a ‖a − a u_n‖_p ‖u_n‖_p`.
    pub product: Option<LogValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawsonReadReport {
    pub rows: Vec<LawsonReadRow>,
    /// `u² = u` for every step, so `π(d) = 2u − u²` holds with `d = Σ_{i∈J} e_i ⊗ e_i`.
    pub diagonal_exact: bool,
    /// `a·u = u·a` for every sample and step.
    pub commutes_exact: bool,
}

impl LawsonReadReport {
    /// Conditions (i) and (ii) at step `n` below `epsilon`.
    pub fn passes_at(&self, n: u64, epsilon: f64) -> bool {
        let eps = LogValue::from_value(epsilon).unwrap_or(LogValue::ZERO);
        self.rows
            .iter()
            .find(|r| r.n == n)
            .is_some_and(|r| r.approx_identity.is_some_and(|v| v <= eps) && r.product.is_some_and(|v| v <= eps))
    }
}

pub fn verify_lawson_read(samples: &[SeqElement], setup: &ApproxSetup, steps: &[ApproxIdentityStep]) -> Result<LawsonReadReport> {
    let lp = setup.family.level(setup.p_level)?;
    let extended = samples.iter().map(|a| extend(a, setup.depth)).collect::<Result<Vec<_>>>()?;
    let tails = extended
        .iter()
        .map(|a| {
            if a.has_zero_tail() {
                Ok(Some(LogValue::ZERO))
            } else {
                Ok(seminorm_l1(a, &setup.family, setup.p_level)?.tail_bound)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut diagonal_exact = true;
    let mut commutes_exact = true;
    for step in steps {
        let u = &step.u;
        diagonal_exact &= pointwise_mul(u, u)? == *u;
        let u_norm = seminorm_l1(u, &setup.family, setup.p_level)?.partial;
        let (mut worst, mut worst_product) = (Some(LogValue::ZERO), Some(LogValue::ZERO));
        for (a, tail) in extended.iter().zip(&tails) {
            commutes_exact &= pointwise_mul(a, u)? == pointwise_mul(u, a)?;
            let mut acc = LogSumExp::default();
            for &(r, c) in a.entries() {
                if !step.in_support(r) {
                    acc.push(c.log_abs * lp.eval(a.index_set().index_at(r).expect("rank in range"))?);
                }
            }
            let v = tail.map(|t| acc.total().add(t));
            worst = worst.zip(v).map(|(w, v)| w.max(v));
            worst_product = worst_product.zip(v).map(|(w, v)| w.max(v * u_norm));
        }
        rows.push(LawsonReadRow { n: step.n, approx_identity: worst, product: worst_product });
    }
    Ok(LawsonReadReport { rows, diagonal_exact, commutes_exact })
}

/// `b` with `b² = a`: principal square roots, `√` of the tail rule.
pub fn square_decompose(a: &SeqElement) -> SeqElement {
    let entries = a.entries().iter().map(|&(r, c)| (r, c.sqrt()));
    let tail = a.tail_rule().map(|t| WeightExpr::from_node(Node::Sqrt(alloc::boxed::Box::new(t.node().clone())).fold()));
    SeqElement::sparse(a.index_set(), a.n(), entries, tail).expect("square roots keep entries finite")
}

/// `a ∈ A²` decided as `√|a| ∈ A`.
pub fn sqrt_membership(a: &SeqElement, p: &WeightFamily, depth: usize) -> Verdict {
    let v = membership(&square_decompose(a), p, depth);
    let note = match v.outcome {
        Outcome::Holds => "√|a| ∈ A, so a ∈ A²",
        Outcome::Fails => "√|a| ∉ A, so a ∉ A²",
        Outcome::Unknown => return v,
    };
    v.with_note(note)
}

/// One element of the randomized battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub expr: String,
    pub in_a: Outcome,
    pub in_a_squared: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdempotenceReport {
    pub family: String,
    /// (i) `A` nuclear, i.e. (N).
    pub nuclear: Verdict,
    /// (ii) nuclearity of the Köthe–Toeplitz dual has no finite check here.
    pub dual_nuclear: String,
    /// (iv) the log criterion.
    pub log_criterion: Verdict,
    /// (iii) sampled: `a ∈ A` against `a ∈ A²`.
    pub samples: Vec<SampleResult>,
    pub contradictions: Vec<String>,
}

const SAMPLE_DEPTH: u64 = 1000;

/// Random elements with geometric, power, or stretched-exponential decay.
/// The first sample is always `i^(-2)`.
pub fn random_battery(index_set: IndexSet, count: usize, seed: u64) -> Result<Vec<SeqElement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let n = index_set.len().map_or(SAMPLE_DEPTH, |l| l.min(SAMPLE_DEPTH));
    for s in 0..count {
        let text = match (s, rng.gen_range(0..3)) {
            (0, _) => "i^(-2)".to_string(),
            (_, 0) => format!("{:.4}^i", rng.gen_range(0.05..0.95)),
            (_, 1) => format!("i^(-{:.4})", rng.gen_range(1.05..6.0)),
            _ => format!("exp(-{:.4} * i^{:.4})", rng.gen_range(0.1..2.0), rng.gen_range(0.3..2.0)),
        };
        out.push(SeqElement::from_text(index_set, n, &text)?);
    }
    Ok(out)
}

/// Evaluates conditions (i), (iii) and (iv) for `1 ≤ p_n ≤ p_{n+1}` with (B).
pub fn idempotence_profile(
    p: &WeightFamily,
    depth: usize,
    level_budget: u64,
    seed: u64,
    samples: usize,
) -> Result<IdempotenceReport> {
    let flags = p.flags();
    if p.index_set() != IndexSet::Naturals
        || !flags.all_weights_ge_one
        || flags.monotone_in_index != Monotone::Nondecreasing
    {
        return Err(Error::Precondition("needs weights 1 ≤ p_n ≤ p_{n+1} on the naturals".into()));
    }
    if !check_b(p, depth, level_budget)?.is_holds() {
        return Err(Error::Precondition("(B) is not certified".into()));
    }
    let nuclear = check_n(p, depth, level_budget);
    let log_criterion = check_log_criterion(p, depth)?;
    let mut contradictions = Vec::new();
    let pair = (nuclear.outcome, log_criterion.outcome);
    if matches!(pair, (Outcome::Holds, Outcome::Fails) | (Outcome::Fails, Outcome::Holds)) {
        contradictions.push(format!("(i) is {:?} but (iv) is {:?}", pair.0, pair.1));
    }
    let mut results = Vec::new();
    for a in random_battery(p.index_set(), samples, seed)? {
        let in_a = membership(&a, p, depth).outcome;
        let in_a_squared = sqrt_membership(&a, p, depth).outcome;
        let expr = a.tail_rule().map(|t| t.to_string()).unwrap_or_default();
        if in_a == Outcome::Holds && in_a_squared == Outcome::Fails && nuclear.is_holds() {
            contradictions.push(format!("{expr} lies in A but not in A² although A is nuclear"));
        }
        results.push(SampleResult { expr, in_a, in_a_squared });
    }
    Ok(IdempotenceReport {
        family: p.name(),
        nuclear,
        dual_nuclear: "not decided: no finite check for nuclearity of the dual".into(),
        log_criterion,
        samples: results,
        contradictions,
    })
}

/// Block structure of the counterexample `a_m = 1/k_n³` for `k_{n−1} < m ≤ k_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonIdempotentWitness {
    /// `k_1 < k_2 < …` with `k_{n+1} ≥ 2 k_n` and `p^(n)_{k_n} ≤ k_n^{1/n}`.
    pub k: Vec<u64>,
    /// `Σ_{n≥i} (k_n − k_{n−1}) k_n^{−3} p^(i)_{k_n}` over the found blocks, per level `i`.
    pub level_sums: Vec<LogValue>,
    /// `Σ_{n≥i} k_n^{1/n − 2}` over the found blocks.
    pub level_bounds: Vec<LogValue>,
    /// Partial sums of `|a_m|^{1/4}` after each block.
    pub fourth_root_sums: Vec<f64>,
    /// Explicit entries on the first `depth` ranks.
    pub a: SeqElement,
}

impl NonIdempotentWitness {
    /// `a ∈ A` evidence: every block sum sits under the bound.
    pub fn levels_bounded(&self) -> bool {
        self.level_sums.iter().zip(&self.level_bounds).all(|(s, b)| s.ln() <= b.ln() + 1e-12)
    }

    /// Divergence evidence: partial fourth-root sums reach half the block count.
    pub fn fourth_roots_grow(&self) -> bool {
        self.fourth_root_sums.iter().enumerate().all(|(b, s)| *s >= (b + 1) as f64 / 2.0 - 1e-12)
    }
}

/// `lim log n / log p_n` at one level, by the oracle.
fn log_criterion_level(level: &Level) -> Option<bool> {
    if level.expr().node().fold() == Node::num(1.0) {
        return Some(false);
    }
    let ratio = Node::div(Node::log(Node::var(Var::I)), Node::log(level.expr().node().clone()));
    match asymptotic::analyze(&ratio, Var::I, &Env::at(1, Index::Single(1)))?.limit()? {
        Limit::Infinite => Some(false),
        _ => Some(true),
    }
}

/// Scans `k_n` with `p^(n)_{k_n} ≤ k_n^{1/n}` for `n ≤ level_budget`, `k_n ≤ k_limit`.
pub fn non_idempotent_witness(p: &WeightFamily, depth: usize, level_budget: u64, k_limit: u64) -> Result<NonIdempotentWitness> {
    if p.index_set() != IndexSet::Naturals || p.flags().monotone_in_index != Monotone::Nondecreasing {
        return Err(Error::Precondition("needs nondecreasing weights on the naturals".into()));
    }
    let fam = p.running_max();
    let count = fam.levels_within(level_budget);
    // a finite family is read as p^(n) = p^(count) for n ≥ count
    let levels = level_budget;
    for k in 1..=count {
        if log_criterion_level(&fam.level(k)?) == Some(true) {
            return Err(Error::Precondition(format!("the log criterion holds at level {k}")));
        }
    }
    let mut ks: Vec<u64> = Vec::new();
    for n in 1..=levels {
        let lv = fam.level(n.min(count))?;
        let ok = |k: u64| -> Result<bool> {
            let v = lv.eval(Index::Single(k))?;
            Ok(v.ln() <= (k as f64).ln() / n as f64)
        };
        let start = ks.last().map_or(1, |&k| 2 * k);
        let mut found = None;
        let linear_end = k_limit.min(start.saturating_add(1 << 20));
        let mut k = start;
        while k <= linear_end {
            if ok(k)? {
                found = Some(k);
                break;
            }
            k += 1;
        }
        while found.is_none() && k <= k_limit / 2 {
            k *= 2;
            if ok(k)? {
                found = Some(k);
            }
        }
        match found {
            Some(k) => ks.push(k),
            None => break,
        }
    }
    if ks.len() < 2 {
        return Err(Error::Budget(format!("only {} block(s) found below k = {k_limit}", ks.len())));
    }
    let prev = |b: usize| if b == 0 { 0 } else { ks[b - 1] };
    let mut level_sums = Vec::new();
    let mut level_bounds = Vec::new();
    for i in 1..=ks.len() as u64 {
        let lv = fam.level(i.min(count))?;
        let mut sum = LogSumExp::default();
        let mut bound = LogSumExp::default();
        for b in (i as usize - 1)..ks.len() {
            let (kn, n) = (ks[b] as f64, b as f64 + 1.0);
            let len = (ks[b] - prev(b)) as f64;
            // p^(i)_m ≤ p^(i)_{k_n} on the block
            sum.push(LogValue::from_log(len.ln() - 3.0 * kn.ln()) * lv.eval(Index::Single(ks[b]))?);
            bound.push(LogValue::from_log((1.0 / n - 2.0) * kn.ln()));
        }
        level_sums.push(sum.total());
        level_bounds.push(bound.total());
    }
    let mut fourth_root_sums = Vec::new();
    let mut acc = 0.0;
    for b in 0..ks.len() {
        let kn = ks[b] as f64;
        acc += (ks[b] - prev(b)) as f64 * kn.powf(-0.75);
        fourth_root_sums.push(acc);
    }
    let n = (depth as u64).min(*ks.last().expect("two blocks"));
    let mut entries = Vec::new();
    let mut b = 0;
    for m in 1..=n {
        while ks[b] < m {
            b += 1;
        }
        entries.push((m, Coeff::positive(LogValue::from_log(-3.0 * (ks[b] as f64).ln()))));
    }
    let a = SeqElement::sparse(IndexSet::Naturals, n, entries, None)?;
    Ok(NonIdempotentWitness { k: ks, level_sums, level_bounds, fourth_root_sums, a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_weight_expr;
    use crate::weights::{make_builtin, Builtin, Levels};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn fam(id: &str) -> WeightFamily {
        make_builtin(&Builtin::from_id(id).unwrap()).unwrap()
    }

    fn uniform(text: &str) -> WeightFamily {
        WeightFamily::from_dsl(IndexSet::Naturals, Levels::Uniform(parse_weight_expr(text).unwrap()), None).unwrap()
    }

    fn geometric(depth: u64) -> SeqElement {
        SeqElement::from_text(IndexSet::Naturals, depth, "2^(-i)").unwrap()
    }

    #[test]
    fn setup_for_s_uses_the_first_summable_target() {
        let setup = ApproxSetup::new(&fam("s"), 1, 1000, 8).unwrap();
        assert_eq!((setup.p_level(), setup.q_level()), (1, 3));
    }

    #[test]
    fn steps_on_s() {
        let setup = ApproxSetup::new(&fam("s"), 1, 1000, 8).unwrap();
        let a = geometric(50);
        let s1 = setup.step(&a, 1).unwrap();
        assert!(s1.j_prime.is_empty() && s1.j_doubleprime.is_empty());
        // J'_n = {i ≥ 2 : i³ ≤ n}, J''_n = {1} for n ≥ 2
        let s30 = setup.step(&a, 30).unwrap();
        assert_eq!(s30.j_prime, [2, 3]);
        assert_eq!(s30.j_doubleprime, [1]);
        let s64 = setup.step(&a, 64).unwrap();
        assert_eq!(s64.j_prime, [2, 3, 4]);
    }

    #[test]
    fn steps_on_the_unital_disk() {
        let setup = ApproxSetup::new(&fam("hadamard_disk(1)"), 1, 500, 8).unwrap();
        let a = geometric(100);
        for n in [1, 5, 50] {
            assert!(setup.step(&a, n).unwrap().j_prime.is_empty());
        }
    }

    #[test]
    fn step_invariants() {
        let p = fam("s");
        let setup = ApproxSetup::new(&p, 1, 1000, 8).unwrap();
        let a = geometric(60);
        let steps = build_steps(&a, &setup, 40).unwrap();
        let report = verify_convergence(&a, &setup, &steps).unwrap();
        let lp = p.level(1).unwrap();
        let ext = extend(&a, setup.depth()).unwrap();
        for (step, row) in steps.iter().zip(&report.rows) {
            assert!(pointwise_mul(&step.u, &step.u).unwrap() == step.u);
            // ‖u_n‖_p^∞ ≤ n
            assert!(row.u_sup <= LogValue::from_log((step.n as f64).ln()));
            // value ≤ max of the branch bounds
            assert!(row.value <= row.branch_bound_ipp.max(row.branch_bound_ip));
            // ‖a − a u_n‖^∞ equals the sup outside J on the prefix
            let diff: Vec<_> = ext.entries().iter().filter(|(r, _)| !step.in_support(*r)).collect();
            let direct = LogValue::sup(diff.iter().map(|(r, c)| c.log_abs * lp.eval(Index::Single(*r)).unwrap()));
            assert!(LogValue::from_log((step.n as f64).ln()) * direct <= row.value);
        }
    }

    #[test]
    fn finite_support_is_absorbed() {
        let setup = ApproxSetup::new(&fam("s"), 1, 200, 8).unwrap();
        let e1 = SeqElement::unit(IndexSet::Naturals, 1).unwrap();
        let steps = build_steps(&e1, &setup, 10).unwrap();
        let report = verify_convergence(&e1, &setup, &steps).unwrap();
        assert!(report.rows.iter().skip(1).all(|r| r.value.is_zero()));
        let zero = SeqElement::zero(IndexSet::Naturals);
        let report = verify_convergence(&zero, &setup, &build_steps(&zero, &setup, 5).unwrap()).unwrap();
        assert!(report.rows.iter().all(|r| r.value.is_zero()));
    }

    #[test]
    fn lawson_read_exact_parts() {
        let setup = ApproxSetup::new(&fam("s"), 1, 500, 8).unwrap();
        let a = geometric(100);
        let steps = build_steps(&a, &setup, 20).unwrap();
        let r = verify_lawson_read(&[a.clone(), SeqElement::unit(IndexSet::Naturals, 3).unwrap()], &setup, &steps).unwrap();
        assert!(r.diagonal_exact && r.commutes_exact);
        // full indicator on a finite support gives exact zero
        let full = ApproxIdentityStep::from_sets(IndexSet::Naturals, 500, 1, 3, (1..=10).collect(), Vec::new()).unwrap();
        let r = verify_lawson_read(&[SeqElement::unit(IndexSet::Naturals, 4).unwrap()], &setup, &[full]).unwrap();
        assert_eq!(r.rows[0].approx_identity, Some(LogValue::ZERO));
    }

    #[test]
    fn lawson_read_product_fails_without_j_doubleprime() {
        let setup = ApproxSetup::new(&fam("hadamard_disk(1)"), 1, 400, 8).unwrap();
        let ones = SeqElement::from_text(IndexSet::Naturals, 100, "1").unwrap();
        let steps: Vec<_> = (1..=20u64)
            .map(|n| ApproxIdentityStep::from_sets(IndexSet::Naturals, 400, n, 1, Vec::new(), Vec::new()).unwrap())
            .collect();
        let r = verify_lawson_read(&[ones], &setup, &steps).unwrap();
        assert!(!r.passes_at(20, 1e-6));
    }

    #[test]
    fn square_roots() {
        let a = SeqElement::from_text(IndexSet::Naturals, 20, "4^(-i)").unwrap();
        let b = square_decompose(&a);
        for &(r, c) in b.entries() {
            assert!((c.to_complex().re - 0.5f64.powi(r as i32)).abs() < 1e-15);
        }
        let neg = SeqElement::from_fn(IndexSet::Naturals, 1, |_| Complex64::new(-1.0, 0.0), None).unwrap();
        let b = square_decompose(&neg).get(1).to_complex();
        assert!((b - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(square_decompose(&SeqElement::zero(IndexSet::Naturals)).entries().is_empty());
    }

    #[test]
    fn a_squared_criterion() {
        let l1 = fam("l1");
        let a = SeqElement::from_text(IndexSet::Naturals, 200, "4^(-i)").unwrap();
        assert!(sqrt_membership(&a, &l1, 200).is_holds());
        let h = SeqElement::from_text(IndexSet::Naturals, 200, "i^(-2)").unwrap();
        assert!(membership(&h, &l1, 200).is_holds());
        assert!(sqrt_membership(&h, &l1, 200).is_fails());
        assert!(sqrt_membership(&SeqElement::unit(IndexSet::Naturals, 1).unwrap(), &l1, 200).is_holds());
    }

    #[test]
    fn idempotence_on_s_and_l1() {
        let r = idempotence_profile(&fam("s"), 1000, 8, 0, 12).unwrap();
        assert!(r.nuclear.is_holds() && r.log_criterion.is_holds() && r.contradictions.is_empty());
        assert!(r.samples.iter().all(|s| s.in_a != Outcome::Holds || s.in_a_squared == Outcome::Holds));
        let r = idempotence_profile(&fam("l1"), 1000, 8, 0, 12).unwrap();
        assert!(r.nuclear.is_fails() && r.log_criterion.is_fails() && r.contradictions.is_empty());
        let h = &r.samples[0];
        assert_eq!((h.in_a, h.in_a_squared), (Outcome::Holds, Outcome::Fails));
        assert!(idempotence_profile(&fam("hadamard_disk(1)"), 100, 8, 0, 1).is_err());
    }

    #[test]
    fn polynomial_weights_meet_the_log_criterion() {
        let r = idempotence_profile(&uniform("i^(0.5*k)"), 1000, 8, 3, 4).unwrap();
        assert!(r.log_criterion.is_holds());
    }

    #[test]
    fn non_idempotent_witness_blocks() {
        let w = non_idempotent_witness(&fam("l1"), 1000, 8, 1 << 40).unwrap();
        assert_eq!(w.k, [1, 2, 4, 8, 16, 32, 64, 128]);
        assert!(w.levels_bounded() && w.fourth_roots_grow());
        let w = non_idempotent_witness(&uniform("log(i+1)^k"), 1000, 6, 1 << 60).unwrap();
        assert!(w.k.len() >= 2 && w.levels_bounded() && w.fourth_roots_grow());
        assert!(w.k.windows(2).all(|p| p[1] >= 2 * p[0]));
        assert!(matches!(non_idempotent_witness(&fam("s"), 1000, 8, 1 << 20), Err(Error::Precondition(_))));
    }

    proptest! {
        #[test]
        fn square_decompose_round_trip(re in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40)) {
            let a = SeqElement::from_fn(IndexSet::Naturals, re.len() as u64, |idx| {
                let (x, y) = re[idx.i() as usize - 1];
                Complex64::new(x, y)
            }, None).unwrap();
            let b = square_decompose(&a);
            let bb = pointwise_mul(&b, &b).unwrap();
            for r in 1..=a.n() {
                let (x, y) = (a.get(r).to_complex(), bb.get(r).to_complex());
                prop_assert!((x - y).norm() <= 1e-12 * x.norm().max(1e-300));
            }
        }
    }
}
