//! Truncated elements of `λ(P)`: seminorms with tail bounds, pointwise products,
//! membership, and Taylor-coefficient (Hadamard) products.
//!
//! Coefficients are stored sparsely in log-polar form, so entries such as
//! `1/(k² p_i)` with `p_i = 4^{-10⁷}` stay representable.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, Key, Limit};
use crate::error::{Error, Result};
use crate::expr::{parse_weight_expr, Env, Node, Var, WeightExpr};
use crate::index::{Index, IndexSet};
use crate::logvalue::{LogSumExp, LogValue};
use crate::relations;
use crate::verdict::{Certificate, FailureWitness, Outcome, ProofRule, SummationStep, Tier, TrendPoint, Verdict};
use crate::weights::{Level, WeightFamily, SAMPLED_LEVELS};

/// A complex number as `exp(log_abs) · e^{i phase}`, `phase ∈ (-π, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coeff {
    pub log_abs: LogValue,
    pub phase: f64,
}

fn normalize_phase(mut p: f64) -> f64 {
    while p > PI {
        p -= 2.0 * PI;
    }
    while p <= -PI {
        p += 2.0 * PI;
    }
    p
}

impl Coeff {
    pub const ZERO: Coeff = Coeff { log_abs: LogValue::ZERO, phase: 0.0 };
    pub const ONE: Coeff = Coeff { log_abs: LogValue::ONE, phase: 0.0 };

    pub fn positive(log_abs: LogValue) -> Coeff {
        Coeff { log_abs, phase: 0.0 }
    }

    pub fn from_complex(z: Complex64) -> Coeff {
        if z == Complex64::new(0.0, 0.0) {
            return Coeff::ZERO;
        }
        let phase = if z.im == 0.0 {
            if z.re > 0.0 { 0.0 } else { PI }
        } else {
            z.im.atan2(z.re)
        };
        Coeff { log_abs: LogValue::from_log(z.norm().ln()), phase }
    }

    pub fn from_real(x: f64) -> Coeff {
        Coeff::from_complex(Complex64::new(x, 0.0))
    }

    /// May overflow to infinity.
    pub fn to_complex(self) -> Complex64 {
        let r = self.log_abs.value();
        if r == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        // exact on the axes
        match self.phase {
            p if p == 0.0 => Complex64::new(r, 0.0),
            p if p == PI => Complex64::new(-r, 0.0),
            p if p == FRAC_PI_2 => Complex64::new(0.0, r),
            p if p == -FRAC_PI_2 => Complex64::new(0.0, -r),
            p => Complex64::from_polar(r, p),
        }
    }

    pub fn is_zero(self) -> bool {
        self.log_abs.is_zero()
    }

    pub fn mul(self, other: Coeff) -> Coeff {
        if self.is_zero() || other.is_zero() {
            return Coeff::ZERO;
        }
        Coeff { log_abs: self.log_abs * other.log_abs, phase: normalize_phase(self.phase + other.phase) }
    }

    /// Principal square root: phase halved into `(-π/2, π/2]`.
    pub fn sqrt(self) -> Coeff {
        if self.is_zero() {
            return Coeff::ZERO;
        }
        Coeff { log_abs: self.log_abs.sqrt(), phase: self.phase / 2.0 }
    }
}

/// A truncated element: coefficients on ranks `1..=n` of the enumeration, and
/// optionally `|x_i|` beyond `n` as an expression.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqElement {
    index_set: IndexSet,
    n: u64,
    /// Nonzero entries, sorted by rank.
    entries: Vec<(u64, Coeff)>,
    tail_rule: Option<WeightExpr>,
}

fn zero_expr() -> WeightExpr {
    WeightExpr::from_node(Node::num(0.0))
}

fn is_zero_node(n: &Node) -> bool {
    matches!(n, Node::Num(v) if *v == 0.0)
}

impl SeqElement {
    pub fn sparse(
        index_set: IndexSet,
        n: u64,
        entries: impl IntoIterator<Item = (u64, Coeff)>,
        tail_rule: Option<WeightExpr>,
    ) -> Result<SeqElement> {
        let mut entries: Vec<(u64, Coeff)> = entries.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        entries.sort_by_key(|(r, _)| *r);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate rank in sequence".into()));
        }
        if let Some(&(r, _)) = entries.iter().find(|(r, _)| *r == 0 || *r > n) {
            return Err(Error::InvalidParameter(format!("rank {r} outside 1..={n}")));
        }
        if let Some(len) = index_set.len() {
            if n > len {
                return Err(Error::InvalidParameter(format!("depth {n} exceeds the index set size {len}")));
            }
        }
        if entries.iter().any(|(_, c)| c.log_abs.is_infinite() || !c.phase.is_finite()) {
            return Err(Error::InvalidParameter("coefficients must be finite".into()));
        }
        Ok(SeqElement { index_set, n, entries, tail_rule })
    }

    /// Dense complex coefficients on the first `n` indices.
    pub fn from_fn(
        index_set: IndexSet,
        n: u64,
        f: impl Fn(Index) -> Complex64,
        tail_rule: Option<WeightExpr>,
    ) -> Result<SeqElement> {
        let entries: Vec<(u64, Coeff)> =
            index_set.prefix(n as usize).enumerate().map(|(r, idx)| (r as u64 + 1, Coeff::from_complex(f(idx)))).collect();
        SeqElement::sparse(index_set, n, entries, tail_rule)
    }

    /// `x_i = e(i)` on the first `n` indices and as the tail rule.
    pub fn from_expr(index_set: IndexSet, n: u64, e: &WeightExpr) -> Result<SeqElement> {
        let entries = index_set
            .prefix(n as usize)
            .enumerate()
            .map(|(r, idx)| {
                let v = e.eval(1, idx).map_err(|source| Error::Eval { k: 1, index: idx, source })?;
                Ok((r as u64 + 1, Coeff::positive(v)))
            })
            .collect::<Result<Vec<_>>>()?;
        SeqElement::sparse(index_set, n, entries, Some(e.clone()))
    }

    /// Parses `text` and calls [`SeqElement::from_expr`].
    pub fn from_text(index_set: IndexSet, n: u64, text: &str) -> Result<SeqElement> {
        SeqElement::from_expr(index_set, n, &parse_weight_expr(text)?)
    }

    /// The unit vector at `rank`.
    pub fn unit(index_set: IndexSet, rank: u64) -> Result<SeqElement> {
        SeqElement::sparse(index_set, rank, [(rank, Coeff::ONE)], Some(zero_expr()))
    }

    pub fn zero(index_set: IndexSet) -> SeqElement {
        SeqElement { index_set, n: 0, entries: Vec::new(), tail_rule: Some(zero_expr()) }
    }

    pub fn index_set(&self) -> IndexSet {
        self.index_set
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn entries(&self) -> &[(u64, Coeff)] {
        &self.entries
    }

    pub fn tail_rule(&self) -> Option<&WeightExpr> {
        self.tail_rule.as_ref()
    }

    pub fn with_tail_rule(mut self, tail: Option<WeightExpr>) -> SeqElement {
        self.tail_rule = tail;
        self
    }

    pub fn get(&self, rank: u64) -> Coeff {
        match self.entries.binary_search_by_key(&rank, |(r, _)| *r) {
            Ok(p) => self.entries[p].1,
            Err(_) => Coeff::ZERO,
        }
    }

    /// Whether the element vanishes beyond `n`.
    pub fn has_zero_tail(&self) -> bool {
        self.covers_index_set() || self.tail_rule.as_ref().is_some_and(|t| is_zero_node(t.node()))
    }

    fn covers_index_set(&self) -> bool {
        self.index_set.len().is_some_and(|len| self.n >= len)
    }

    /// Keeps ranks `1..=n`; the tail rule still describes ranks beyond the old depth.
    pub fn truncate(&self, n: u64) -> SeqElement {
        if n >= self.n {
            return self.clone();
        }
        let entries = self.entries.iter().copied().filter(|(r, _)| *r <= n).collect();
        // the tail rule survives when it also describes the dropped ranks
        let tail_rule = self.tail_rule.clone().filter(|t| {
            (n + 1..=self.n).all(|r| {
                let idx = self.index_set.index_at(r).expect("rank in range");
                let Ok(v) = t.eval(1, idx) else { return false };
                let have = self.get(r).log_abs;
                have == v || (have.ln() - v.ln()).abs() <= 1e-12 * v.ln().abs().max(1.0)
            })
        });
        SeqElement { index_set: self.index_set, n, entries, tail_rule }
    }

    /// `|x_i| p_i` for the stored entries, in rank order.
    fn weighted(&self, level: &Level) -> Result<Vec<(u64, LogValue)>> {
        self.entries
            .iter()
            .map(|&(r, c)| {
                let idx = self.index_set.index_at(r).expect("rank in range");
                Ok((r, c.log_abs * level.eval(idx)?))
            })
            .collect()
    }

    /// `|x_i| p_i` beyond the truncation, as an expression in `i`.
    fn tail_term(&self, level: &Level) -> Option<Node> {
        let t = self.tail_rule.as_ref()?;
        Some(Node::mul(t.node().clone(), level.expr().node().clone()).fold())
    }
}

/// `x·y` coefficientwise, truncated to the shorter depth.
pub fn pointwise_mul(x: &SeqElement, y: &SeqElement) -> Result<SeqElement> {
    if x.index_set != y.index_set {
        return Err(Error::IndexSetMismatch(x.index_set, y.index_set));
    }
    let n = x.n.min(y.n);
    let (a, b) = (x.truncate(n), y.truncate(n));
    let mut entries = Vec::new();
    let (mut p, mut q) = (0, 0);
    while p < a.entries.len() && q < b.entries.len() {
        let ((ra, ca), (rb, cb)) = (a.entries[p], b.entries[q]);
        match ra.cmp(&rb) {
            Ordering::Less => p += 1,
            Ordering::Greater => q += 1,
            Ordering::Equal => {
                entries.push((ra, ca.mul(cb)));
                p += 1;
                q += 1;
            }
        }
    }
    let tail_rule = if a.has_zero_tail() || b.has_zero_tail() {
        Some(zero_expr())
    } else {
        match (&a.tail_rule, &b.tail_rule) {
            (Some(s), Some(t)) => Some(WeightExpr::from_node(Node::mul(s.node().clone(), t.node().clone()).fold())),
            _ => None,
        }
    };
    SeqElement::sparse(x.index_set, n, entries, tail_rule)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum SeminormStatus {
    /// Finite; `bound` is partial plus the tail bound when one is available.
    Converged { bound: Option<LogValue>, proof_rule: ProofRule },
    Diverging { trend: Vec<TrendPoint>, proof_rule: ProofRule },
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormValue {
    pub partial: LogValue,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tail_bound: Option<LogValue>,
    #[serde(flatten)]
    pub status: SeminormStatus,
}

impl SeminormValue {
    pub fn is_converged(&self) -> bool {
        matches!(self.status, SeminormStatus::Converged { .. })
    }

    pub fn is_diverging(&self) -> bool {
        matches!(self.status, SeminormStatus::Diverging { .. })
    }
}

fn var_env() -> Env {
    Env::at(1, Index::Single(1))
}

fn eval_node(node: &Node, i: u64) -> Option<LogValue> {
    WeightExpr::from_node(node.clone()).eval(1, Index::Single(i)).ok()
}

/// Tail estimate for a convergent series `Σ_{i>n} t_i`: geometric when the
/// term ratio at `n` is clearly below one, p-series from the local decay
/// exponent otherwise.
fn tail_estimate(term: &Node, n: u64) -> Option<LogValue> {
    let t1 = eval_node(term, n + 1)?;
    if t1.is_zero() {
        return Some(LogValue::ZERO);
    }
    let t2 = eval_node(term, n + 2)?;
    let log_rho = t2.ln() - t1.ln();
    if log_rho < -1e-3 {
        // t1 / (1 - ρ)
        return Some(t1 / LogValue::from_log((-log_rho.exp_m1()).ln()));
    }
    let far = eval_node(term, 2 * (n + 1))?;
    let s = (t1.ln() - far.ln()) / core::f64::consts::LN_2;
    if s > 1.0 + 1e-9 {
        // t1 + t1 (n+1)/(s-1)
        let integral = t1 * LogValue::from_log(((n + 1) as f64).ln() - (s - 1.0).ln());
        return Some(t1.add(integral));
    }
    None
}

/// `Some(true)` when `f` is eventually nonincreasing by its leading behavior.
fn eventually_nonincreasing(node: &Node) -> Option<bool> {
    let g = asymptotic::analyze(node, Var::I, &var_env())?;
    let log = g.log?.without_vanishing();
    let &(key, c) = log.terms().iter().find(|(k, _)| k.cmp(Key::ONE) != Ordering::Equal)?;
    Some(c < 0.0 && key.cmp(Key::ONE) == Ordering::Greater)
}

fn checkpoints(n: usize) -> [usize; 4] {
    [n.div_ceil(8), n.div_ceil(4), n.div_ceil(2), n]
}

/// `‖x‖_p = Σ_i |x_i| p_i` at level `k`.
pub fn seminorm_l1(x: &SeqElement, p: &WeightFamily, k: u64) -> Result<SeminormValue> {
    if x.index_set != p.index_set() {
        return Err(Error::IndexSetMismatch(x.index_set, p.index_set()));
    }
    let level = p.level(k)?;
    let terms = x.weighted(&level)?;
    let mut acc = LogSumExp::default();
    let marks = checkpoints(x.n as usize);
    let mut trend = Vec::new();
    let mut it = terms.iter().peekable();
    for &m in &marks {
        while let Some(&&(r, v)) = it.peek() {
            if r as usize > m {
                break;
            }
            acc.push(v);
            it.next();
        }
        if trend.last().is_none_or(|t: &TrendPoint| t.depth != m) {
            trend.push(TrendPoint { depth: m, value: acc.total() });
        }
    }
    let partial = acc.total();
    if x.has_zero_tail() {
        let rule = if x.covers_index_set() { ProofRule::FiniteIndexSet } else { ProofRule::Series };
        return Ok(SeminormValue {
            partial,
            tail_bound: Some(LogValue::ZERO),
            status: SeminormStatus::Converged { bound: Some(partial), proof_rule: rule },
        });
    }
    let Some(term) = x.tail_term(&level).filter(|_| !x.index_set.is_pairs()) else {
        return Ok(SeminormValue { partial, tail_bound: None, status: SeminormStatus::Unknown });
    };
    Ok(match asymptotic::series_converges(&term, Var::I, &var_env()) {
        Some(true) => {
            let tail = tail_estimate(&term, x.n);
            SeminormValue {
                partial,
                tail_bound: tail,
                status: SeminormStatus::Converged { bound: tail.map(|t| partial.add(t)), proof_rule: ProofRule::Series },
            }
        }
        Some(false) => {
            SeminormValue { partial, tail_bound: None, status: SeminormStatus::Diverging { trend, proof_rule: ProofRule::Series } }
        }
        None => SeminormValue { partial, tail_bound: None, status: SeminormStatus::Unknown },
    })
}

/// `‖x‖_p^∞ = sup_i |x_i| p_i` at level `k`.
pub fn seminorm_sup(x: &SeqElement, p: &WeightFamily, k: u64) -> Result<SeminormValue> {
    if x.index_set != p.index_set() {
        return Err(Error::IndexSetMismatch(x.index_set, p.index_set()));
    }
    let level = p.level(k)?;
    let partial = LogValue::sup(x.weighted(&level)?.into_iter().map(|(_, v)| v));
    if x.has_zero_tail() {
        let rule = if x.covers_index_set() { ProofRule::FiniteIndexSet } else { ProofRule::Limit };
        return Ok(SeminormValue {
            partial,
            tail_bound: Some(LogValue::ZERO),
            status: SeminormStatus::Converged { bound: Some(partial), proof_rule: rule },
        });
    }
    let Some(term) = x.tail_term(&level).filter(|_| !x.index_set.is_pairs()) else {
        return Ok(SeminormValue { partial, tail_bound: None, status: SeminormStatus::Unknown });
    };
    let growth = asymptotic::analyze(&term, Var::I, &var_env());
    Ok(match growth.and_then(|g| g.limit()) {
        Some(Limit::Infinite) => SeminormValue {
            partial,
            tail_bound: None,
            status: SeminormStatus::Diverging { trend: Vec::new(), proof_rule: ProofRule::Limit },
        },
        Some(_) => {
            let tail = if eventually_nonincreasing(&term) == Some(true) { eval_node(&term, x.n + 1) } else { None };
            SeminormValue {
                partial,
                tail_bound: tail,
                status: SeminormStatus::Converged { bound: tail.map(|t| partial.max(t)), proof_rule: ProofRule::Limit },
            }
        }
        None => SeminormValue { partial, tail_bound: None, status: SeminormStatus::Unknown },
    })
}

/// Both sides of `‖xy‖_p ≤ C ‖x‖_q ‖y‖_q` on the prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MulBoundReport {
    pub level: u64,
    pub target_level: u64,
    #[serde(rename = "logC")]
    pub log_c: f64,
    pub lhs: LogValue,
    pub rhs: LogValue,
    pub holds: bool,
}

/// Checks the multiplication bound with `(q, C)` taken from the algebra certificate.
pub fn mul_bound_check(
    x: &SeqElement,
    y: &SeqElement,
    p: &WeightFamily,
    k: u64,
    depth: usize,
) -> Result<MulBoundReport> {
    let verdict = relations::is_algebra(p, depth, SAMPLED_LEVELS.max(k));
    let step = match &verdict.certificate {
        Some(Certificate::Domination(c)) if verdict.is_holds() => c.step_for(k).cloned(),
        _ => None,
    }
    .ok_or_else(|| Error::Precondition(format!("no algebra certificate for level {k}")))?;
    let (x, y) = (x.truncate(depth as u64), y.truncate(depth as u64));
    let xy = pointwise_mul(&x, &y)?;
    let lhs = seminorm_l1(&xy, p, k)?.partial;
    let q = step.target_level;
    let rhs = LogValue::from_log(step.log_c) * seminorm_l1(&x, p, q)?.partial * seminorm_l1(&y, p, q)?.partial;
    let holds = lhs <= rhs || (lhs.ln() - rhs.ln()).abs() <= 1e-12 * rhs.ln().abs().max(1.0);
    Ok(MulBoundReport { level: k, target_level: q, log_c: step.log_c, lhs, rhs, holds })
}

/// Highest level probed by the doubling ladder in [`membership`].
pub const LADDER_TOP: u64 = 1 << 20;

/// `x ∈ λ(P)`. Levels `1..=8` are summed one by one, then levels 16, 32, …,
/// [`LADDER_TOP`] of an ordered family. `Holds` is exact when every level is
/// covered (finitely many levels, the top level of an ordered finite family,
/// or the radius rule for power series); otherwise it is empirical.
pub fn membership(x: &SeqElement, p: &WeightFamily, depth: usize) -> Verdict {
    match membership_inner(x, p, depth) {
        Ok(v) => v,
        Err(e) => Verdict::unknown(depth, e.to_string()),
    }
}

fn diverges_at(x: &SeqElement, p: &WeightFamily, k: u64, depth: usize) -> Result<Option<Verdict>> {
    Ok(match seminorm_l1(x, p, k)?.status {
        SeminormStatus::Diverging { trend, proof_rule } => Some(
            Verdict::fails(depth, FailureWitness { level: k, proof_rule, detail: format!("Σ |x_i| p^({k})_i diverges") })
                .with_trend(trend),
        ),
        _ => None,
    })
}

fn membership_inner(x: &SeqElement, p: &WeightFamily, depth: usize) -> Result<Verdict> {
    let x = x.truncate(depth as u64);
    let levels = p.levels_within(SAMPLED_LEVELS);
    let mut steps = Vec::new();
    let mut unknown = None;
    for k in 1..=levels {
        let v = seminorm_l1(&x, p, k)?;
        match v.status {
            SeminormStatus::Diverging { trend, proof_rule } => {
                return Ok(Verdict::fails(
                    depth,
                    FailureWitness { level: k, proof_rule, detail: format!("Σ |x_i| p^({k})_i diverges") },
                )
                .with_trend(trend));
            }
            SeminormStatus::Converged { proof_rule, .. } => steps.push(SummationStep {
                source_level: k,
                target_level: None,
                partial: v.partial,
                proof_rule,
                depth,
            }),
            SeminormStatus::Unknown => {
                unknown.get_or_insert(k);
            }
        }
    }
    let certificate = Certificate::Summation { steps };
    if let Some(k) = unknown {
        return Ok(Verdict::unknown(depth, format!("no tail information at level {k}")).with_certificate(certificate));
    }
    let count = p.level_count();
    if count.is_some_and(|c| c <= levels) {
        return Ok(Verdict::holds(depth, certificate));
    }
    if p.flags().pointwise_ordered {
        let mut k = 16;
        while k <= LADDER_TOP && count.is_none_or(|c| k < c) {
            match diverges_at(&x, p, k, depth) {
                Ok(Some(v)) => return Ok(v),
                Ok(None) => k *= 2,
                // weights beyond f64 range: stop probing
                Err(_) => break,
            }
        }
        if let Some(c) = count {
            // every level is below the last one
            return Ok(match diverges_at(&x, p, c, depth)? {
                Some(v) => v,
                None => Verdict::holds(depth, certificate).with_note(format!("levels ≤ {c} are dominated by level {c}")),
            });
        }
    }
    Ok(match radius_rule(&x, p) {
        Some(Some(m)) => Verdict::fails(
            depth,
            FailureWitness {
                level: m,
                proof_rule: ProofRule::Radius,
                detail: format!("|x_i| decays slower than level {m} grows"),
            },
        ),
        Some(None) => Verdict::holds(depth, certificate).with_note("all levels by the radius rule"),
        None => Verdict { tier: Tier::Empirical, ..Verdict::holds(depth, certificate) }
            .with_note(format!("converges on levels 1..={levels} and the ladder up to {LADDER_TOP}")),
    })
}

/// All levels of a power-series family at once. With `c = lim −ln|x_i| / α_i`,
/// level `m` has terms `exp(α_i (ln r_m − c + o(1)))`. `Some(Some(m))` is a
/// divergent level, `Some(None)` means every level converges.
fn radius_rule(x: &SeqElement, p: &WeightFamily) -> Option<Option<u64>> {
    let shape = p.shape()?;
    let t = x.tail_rule()?.node().clone();
    let env = var_env();
    let c = match asymptotic::ratio_limit(&Node::Neg(alloc::boxed::Box::new(Node::log(t))), &shape.alpha, Var::I, &env)? {
        Limit::Zero => 0.0,
        Limit::Finite(l) => l.exp(),
        Limit::Infinite => f64::INFINITY,
    };
    if c < shape.log_sup() {
        let m = shape.first_level_reaching(c)?;
        return Some(Some(if shape.log_effective(m) > c { m } else { m + 1 }));
    }
    // Σ e^{−δ α_i} converges when δ > L = lim ln i / α_i
    let l = match asymptotic::ratio_limit(&Node::log(Node::var(Var::I)), &shape.alpha, Var::I, &env)? {
        Limit::Zero => 0.0,
        Limit::Finite(l) => l.exp(),
        Limit::Infinite => return None,
    };
    let margin = if c == f64::INFINITY { f64::INFINITY } else { c - shape.log_sup() };
    (margin > l).then_some(None)
}

/// `Σ |y_i x_i| < ∞` for each generator `x`. A `Holds` only means "holds
/// against this sample", never full membership in the dual.
pub fn dual_membership(y: &SeqElement, generators: &[SeqElement]) -> Result<Verdict> {
    if generators.is_empty() {
        return Err(Error::Precondition("at least one generator is required".into()));
    }
    let ones = WeightFamily::from_dsl(
        y.index_set,
        crate::weights::Levels::List(alloc::vec![parse_weight_expr("1")?]),
        None,
    )?;
    let mut steps = Vec::new();
    let mut unknown = None;
    for (g, x) in generators.iter().enumerate() {
        let v = seminorm_l1(&pointwise_mul(y, x)?, &ones, 1)?;
        match v.status {
            SeminormStatus::Diverging { trend, proof_rule } => {
                return Ok(Verdict::fails(
                    y.n as usize,
                    FailureWitness { level: 1, proof_rule, detail: format!("Σ |y_i x_i| diverges for generator {g}") },
                )
                .with_trend(trend));
            }
            SeminormStatus::Converged { proof_rule, .. } => steps.push(SummationStep {
                source_level: g as u64 + 1,
                target_level: None,
                partial: v.partial,
                proof_rule,
                depth: y.n as usize,
            }),
            SeminormStatus::Unknown => {
                unknown.get_or_insert(g);
            }
        }
    }
    let certificate = Certificate::Summation { steps };
    let n = generators.len();
    Ok(match unknown {
        None => Verdict::holds(y.n as usize, certificate).with_note(format!("holds against a sample of {n} generators")),
        Some(g) => Verdict::unknown(y.n as usize, format!("no tail information for generator {g}")).with_certificate(certificate),
    })
}

/// Sparse JSON form: dense `re/im` pairs when every entry fits in an `f64`,
/// log-polar entries otherwise.
#[derive(Serialize, Deserialize)]
struct SeqDoc {
    index_set: IndexSet,
    #[serde(rename = "N")]
    n: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    coeffs: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    entries: Option<Vec<(u64, Coeff)>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    tail_rule: Option<WeightExpr>,
}

/// Dense coefficients are written only below this depth.
const DENSE_JSON_LIMIT: u64 = 1 << 16;

impl Serialize for SeqElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        let dense: Option<Vec<[f64; 2]>> = (self.n <= DENSE_JSON_LIMIT)
            .then(|| {
                (1..=self.n)
                    .map(|r| {
                        let c = self.get(r);
                        let z = c.to_complex();
                        let back = Coeff::from_complex(z);
                        (z.re.is_finite() && z.im.is_finite() && back.is_zero() == c.is_zero()).then_some([z.re, z.im])
                    })
                    .collect()
            })
            .flatten();
        let doc = SeqDoc {
            index_set: self.index_set,
            n: self.n,
            entries: if dense.is_none() { Some(self.entries.clone()) } else { None },
            coeffs: dense,
            tail_rule: self.tail_rule.clone(),
        };
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SeqElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<SeqElement, D::Error> {
        let doc = SeqDoc::deserialize(d)?;
        let entries: Vec<(u64, Coeff)> = match (doc.coeffs, doc.entries) {
            (Some(c), None) => {
                if c.len() as u64 != doc.n {
                    return Err(serde::de::Error::custom("coeffs length differs from N"));
                }
                c.iter().enumerate().map(|(r, z)| (r as u64 + 1, Coeff::from_complex(Complex64::new(z[0], z[1])))).collect()
            }
            (None, Some(e)) => e,
            (None, None) => Vec::new(),
            _ => return Err(serde::de::Error::custom("give either coeffs or entries")),
        };
        SeqElement::sparse(doc.index_set, doc.n, entries, doc.tail_rule).map_err(serde::de::Error::custom)
    }
}

/// Taylor coefficients `c_0, c_1, …` of a power series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients(pub Vec<Complex64>);

impl Coefficients {
    /// `1/n!`
    pub fn exp(n: usize) -> Coefficients {
        let mut c = Vec::with_capacity(n);
        let mut v = 1.0;
        for m in 0..n {
            if m > 0 {
                v /= m as f64;
            }
            c.push(Complex64::new(v, 0.0));
        }
        Coefficients(c)
    }

    /// Coefficients of `(1 - z)^{-1}`, all ones.
    pub fn geometric(n: usize) -> Coefficients {
        Coefficients(alloc::vec![Complex64::new(1.0, 0.0); n])
    }

    /// A polynomial padded with zeros to length `n`.
    pub fn polynomial(coeffs: &[Complex64], n: usize) -> Coefficients {
        let mut c: Vec<Complex64> = coeffs.iter().copied().take(n).collect();
        c.resize(n, Complex64::new(0.0, 0.0));
        Coefficients(c)
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> Complex64) -> Coefficients {
        Coefficients((0..n).map(f).collect())
    }

    /// Builtin series by name: `exp`, `geometric` (alias `ones`).
    pub fn named(name: &str, n: usize) -> Result<Coefficients> {
        match name {
            "exp" => Ok(Coefficients::exp(n)),
            "geometric" | "ones" => Ok(Coefficients::geometric(n)),
            _ => Err(Error::UnknownFamily(name.to_string())),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Componentwise product of the first `n` Taylor coefficients.
pub fn hadamard_mul(f: &Coefficients, g: &Coefficients, n: usize) -> Result<Coefficients> {
    if n == 0 {
        return Err(Error::Precondition("hadamard_mul needs N ≥ 1".into()));
    }
    if f.len() < n || g.len() < n {
        return Err(Error::InvalidParameter(format!("need {n} coefficients, got {} and {}", f.len(), g.len())));
    }
    Ok(Coefficients(f.0[..n].iter().zip(&g.0[..n]).map(|(a, b)| a * b).collect()))
}

/// `Outcome` of a seminorm status, for reports.
pub fn status_outcome(s: &SeminormStatus) -> Outcome {
    match s {
        SeminormStatus::Converged { .. } => Outcome::Holds,
        SeminormStatus::Diverging { .. } => Outcome::Fails,
        SeminormStatus::Unknown => Outcome::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{make_builtin, Builtin};
    use proptest::prelude::*;

    fn fam(id: &str) -> WeightFamily {
        make_builtin(&Builtin::from_id(id).unwrap()).unwrap()
    }

    fn seq(n: u64, text: &str) -> SeqElement {
        SeqElement::from_text(IndexSet::Naturals, n, text).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn l1_of_geometric_against_s() {
        // Σ i 2^{-i} = 2
        let v = seminorm_l1(&seq(200, "(1/2)^i"), &fam("s"), 1).unwrap();
        assert!(close(v.partial.value(), 2.0, 1e-12));
        assert!(v.is_converged());
        let tail = v.tail_bound.unwrap().value();
        // Σ_{i>200} i/2^i = 202/2^200
        assert!(tail > 0.0 && tail < 1e-50);
    }

    #[test]
    fn unit_vector_picks_the_weight() {
        let e1 = SeqElement::unit(IndexSet::Naturals, 1).unwrap();
        for id in ["s", "entire", "hadamard_disk(2)"] {
            let p = fam(id);
            let v = seminorm_l1(&e1, &p, 3).unwrap();
            assert_eq!(v.partial, p.eval_weight(3, Index::Single(1)).unwrap());
            assert!(v.is_converged());
        }
    }

    #[test]
    fn ones_diverge_in_l1() {
        let v = seminorm_l1(&seq(100, "1"), &fam("l1"), 1).unwrap();
        assert!(v.is_diverging());
        assert!(close(v.partial.value(), 100.0, 1e-12));
    }

    #[test]
    fn sup_seminorms() {
        let v = seminorm_sup(&seq(1000, "1/i"), &fam("s"), 1).unwrap();
        assert!(close(v.partial.ln(), 0.0, 1e-12));
        let z = seminorm_sup(&SeqElement::zero(IndexSet::Naturals), &fam("s"), 1).unwrap();
        assert!(z.partial.is_zero());
        let d = seminorm_sup(&seq(50, "(1/2)^i"), &fam("entire"), 3).unwrap();
        assert!(d.is_diverging());
        let c = seminorm_sup(&seq(50, "(1/2)^i"), &fam("s"), 3).unwrap();
        assert!(c.is_converged() && c.tail_bound.is_some());
    }

    #[test]
    fn pointwise_products() {
        let x = seq(100, "(1/2)^i");
        let ones = seq(100, "1");
        assert_eq!(pointwise_mul(&x, &ones).unwrap().entries(), x.entries());
        let xx = pointwise_mul(&x, &x).unwrap();
        let four = seq(100, "(1/4)^i");
        for r in 1..=100 {
            assert!(close(xx.get(r).log_abs.ln(), four.get(r).log_abs.ln(), 1e-12));
        }
        let e1 = SeqElement::unit(IndexSet::Naturals, 1).unwrap();
        let e2 = SeqElement::unit(IndexSet::Naturals, 2).unwrap();
        let p = pointwise_mul(&e1, &e2).unwrap();
        assert!(p.entries().is_empty() && p.has_zero_tail());
    }

    #[test]
    fn membership_cases() {
        assert!(membership(&seq(500, "(1/2)^i"), &fam("s"), 500).is_holds());
        // level 1 already diverges (harmonic); level 2 has constant terms
        let x = seq(500, "1/i^2");
        let v = membership(&x, &fam("s"), 500);
        assert!(v.is_fails());
        assert_eq!(v.witness.unwrap().level, 1);
        assert!(seminorm_l1(&x, &fam("s"), 2).unwrap().is_diverging());
        let bare = seq(500, "(1/2)^i").with_tail_rule(None);
        assert_eq!(membership(&bare, &fam("s"), 500).outcome, Outcome::Unknown);
    }

    #[test]
    fn membership_beyond_sampled_levels() {
        let uniform = |t: &str| {
            WeightFamily::from_dsl(IndexSet::Naturals, crate::weights::Levels::Uniform(parse_weight_expr(t).unwrap()), None).unwrap()
        };
        // converges on levels 1..=8, diverges from level 16 on
        let v = membership(&seq(500, "i^(-5)"), &uniform("i^(0.25*k)"), 500);
        assert!(v.is_fails() && v.is_exact());
        assert_eq!(v.witness.unwrap().level, 16);
        // no all-level argument for a DSL family
        let v = membership(&seq(500, "(1/2)^i"), &uniform("i^(0.25*k)"), 500);
        assert!(v.is_holds() && !v.is_exact());
        // radius rule: R = ∞ needs decay beyond every r^i
        let v = membership(&seq(500, "(1/2)^i"), &fam("entire"), 500);
        assert!(v.is_fails() && v.is_exact() && v.witness.unwrap().level == 2);
        let v = membership(&seq(500, "exp(-i^2)"), &fam("entire"), 500);
        assert!(v.is_holds() && v.is_exact());
        // R = 1: 2^{-i} beats every r < 1; i^{-2} sits on the boundary of the rule
        let v = membership(&seq(500, "(1/2)^i"), &fam("hadamard_disk(1)"), 500);
        assert!(v.is_holds() && v.is_exact());
        let v = membership(&seq(500, "i^(-2)"), &fam("hadamard_disk(1)"), 500);
        assert!(v.is_holds() && !v.is_exact());
        // r_k = 2k/(k+1) reaches 3/2 at k = 3
        let v = membership(&seq(500, "(2/3)^i"), &fam("hadamard_disk(2)"), 500);
        assert!(v.is_fails() && v.is_exact() && v.witness.unwrap().level == 3);
        assert!(membership(&seq(500, "(1/2)^i"), &fam("hadamard_disk(2)"), 500).is_holds());
        let v = membership(&seq(500, "(1/3)^i"), &fam("hadamard_disk(2)"), 500);
        assert!(v.is_holds() && v.is_exact());
    }

    #[test]
    fn multiplication_bound() {
        let x = seq(1000, "(1/2)^i");
        let r = mul_bound_check(&x, &x, &fam("s"), 1, 1000).unwrap();
        assert!(r.holds && r.lhs < r.rhs);
        assert_eq!((r.target_level, r.log_c), (1, 0.0));
        let z = SeqElement::zero(IndexSet::Naturals);
        let r = mul_bound_check(&z, &z, &fam("s"), 1, 1000).unwrap();
        assert!(r.holds && r.lhs.is_zero() && r.rhs.is_zero());
        let e1 = SeqElement::unit(IndexSet::Naturals, 1).unwrap();
        let r = mul_bound_check(&e1, &e1, &fam("l1"), 1, 1000).unwrap();
        assert!(r.holds && r.lhs == LogValue::ONE && r.rhs == LogValue::ONE);
        assert!(mul_bound_check(&e1, &e1, &fam("hadamard_disk(1/2)"), 1, 100).is_err());
    }

    #[test]
    fn hadamard_products() {
        let n = 64;
        let e = Coefficients::exp(n);
        assert_eq!(hadamard_mul(&e, &Coefficients::geometric(n), n).unwrap(), e);
        let g = Coefficients::geometric(n);
        assert_eq!(hadamard_mul(&g, &g, n).unwrap(), g);
        let lin = Coefficients::from_fn(n, |m| Complex64::new(m as f64, 0.0));
        let z_exp = hadamard_mul(&lin, &e, n).unwrap();
        assert_eq!(z_exp.0[0], Complex64::new(0.0, 0.0));
        let mut fact = 1.0f64;
        for m in 1..n {
            if m > 1 {
                fact *= (m - 1) as f64;
            }
            assert!(close(z_exp.0[m].re, 1.0 / fact, 1e-14));
        }
        assert!(hadamard_mul(&e, &g, 0).is_err());
    }

    #[test]
    fn dual_samples() {
        let x = seq(200, "(1/2)^i");
        assert!(dual_membership(&seq(200, "1"), &[x.clone()]).unwrap().is_holds());
        assert!(dual_membership(&seq(200, "2^i"), &[x.clone()]).unwrap().is_fails());
        let e5 = SeqElement::unit(IndexSet::Naturals, 5).unwrap();
        let v = dual_membership(&e5, &[x.with_tail_rule(None)]).unwrap();
        assert!(v.is_holds() && v.note.contains("sample"));
    }

    #[test]
    fn complex_phases_survive_products() {
        let i = Coeff::from_complex(Complex64::new(0.0, 1.0));
        assert_eq!(i.mul(i).to_complex(), Complex64::new(-1.0, 0.0));
        assert_eq!(Coeff::from_real(-1.0).sqrt().to_complex(), Complex64::new(0.0, 1.0));
    }

    #[test]
    fn json_forms() {
        let x = SeqElement::from_fn(IndexSet::Naturals, 3, |i| Complex64::new(-(i.i() as f64), 0.0), None).unwrap();
        let x = pointwise_mul(&x, &SeqElement::from_fn(IndexSet::Naturals, 3, |_| Complex64::new(0.0, 1.0), None).unwrap()).unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert!(s.contains("\"N\":3") && s.contains("[0.0,-2.0]"), "{s}");
        assert_eq!(serde_json::from_str::<SeqElement>(&s).unwrap(), x);
        let huge = SeqElement::sparse(IndexSet::Naturals, 10, [(7, Coeff::positive(LogValue::from_log(1e6)))], None).unwrap();
        let s = serde_json::to_string(&huge).unwrap();
        assert!(s.contains("entries"));
        assert_eq!(serde_json::from_str::<SeqElement>(&s).unwrap(), huge);
    }

    proptest! {
        #[test]
        fn log_sum_matches_direct_sum(c in 0.05f64..0.95, n in 1u64..2000) {
            let x = SeqElement::from_fn(IndexSet::Naturals, n, |i| Complex64::new(c.powi(i.i() as i32), 0.0), None).unwrap();
            let v = seminorm_l1(&x, &fam("s"), 2).unwrap();
            let direct: f64 = (1..=n).map(|i| c.powi(i as i32) * (i * i) as f64).sum();
            prop_assert!(close(v.partial.value(), direct, 1e-10));
        }

        #[test]
        fn hadamard_ones_is_identity(v in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..256)) {
            let f = Coefficients(v.iter().map(|&(a, b)| Complex64::new(a, b)).collect());
            let n = f.len();
            prop_assert_eq!(hadamard_mul(&f, &Coefficients::geometric(n), n).unwrap(), f);
        }

        #[test]
        fn submultiplicative_when_weights_ge_one(n in 1u64..300, a in 0.1f64..0.9, b in 0.1f64..0.9, k in 1u64..5) {
            let x = SeqElement::from_fn(IndexSet::Naturals, n, |i| Complex64::new(a.powi(i.i() as i32), 0.0), None).unwrap();
            let y = SeqElement::from_fn(IndexSet::Naturals, n, |i| Complex64::new(0.0, b.powi(i.i() as i32)), None).unwrap();
            for id in ["s", "entire", "l1"] {
                let p = fam(id);
                let lhs = seminorm_l1(&pointwise_mul(&x, &y).unwrap(), &p, k.min(p.levels_within(8))).unwrap().partial;
                let kk = k.min(p.levels_within(8));
                let rhs = seminorm_l1(&x, &p, kk).unwrap().partial * seminorm_l1(&y, &p, kk).unwrap().partial;
                prop_assert!(lhs.ln() <= rhs.ln() + 1e-12 * rhs.ln().abs().max(1.0));
            }
        }
    }
}
