//! Conditions (U), (N), (B), (M) and the log criterion.
//!
//! * (U) every weight is summable.
//! * (N) every weight is an ℓ¹-multiple of another.
//! * (B) `P ∼ P²`.
//! * (M) matrices `α + β = 1` with `sup_i α_ij p_i p_j ≤ C q_j²` and
//!   `sup_j β_ij p_i p_j ≤ C q_i²`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, Limit};
use crate::error::{Error, Result};
use crate::expr::{Env, Node, Var};
use crate::index::{Index, IndexSet};
use crate::logvalue::{LogSumExp, LogValue};
use crate::relations::{equivalent, is_algebra};
use crate::verdict::{Certificate, FailureWitness, Outcome, ProofRule, SummationStep, TrendPoint, Verdict};
use crate::weights::{square, Level, Monotone, PowerShape, WeightFamily, SAMPLED_LEVELS};

fn var_env() -> Env {
    Env::at(1, Index::Single(1))
}

fn citation(depth: usize, outcome: bool, text: &str, level: u64) -> Verdict {
    if outcome {
        Verdict::holds(depth, Certificate::Citation { text: text.to_string() })
    } else {
        Verdict::fails(depth, FailureWitness { level, proof_rule: ProofRule::Curated, detail: text.to_string() })
            .with_certificate(Certificate::Citation { text: text.to_string() })
    }
}

/// Partial sums of `Σ_i p_i` at a few prefix lengths.
fn sum_trend(level: &Level, index_set: IndexSet, depth: usize) -> Result<(LogValue, Vec<TrendPoint>)> {
    let marks = [depth.div_ceil(8), depth.div_ceil(4), depth.div_ceil(2), depth];
    let mut acc = LogSumExp::default();
    let mut trend = Vec::new();
    for (r, idx) in index_set.prefix(depth).enumerate() {
        acc.push(level.eval(idx)?);
        if marks.contains(&(r + 1)) && trend.last().is_none_or(|t: &TrendPoint| t.depth != r + 1) {
            trend.push(TrendPoint { depth: r + 1, value: acc.total() });
        }
    }
    Ok((acc.total(), trend))
}

/// (U): `Σ_i p_i < ∞` for every level.
pub fn check_u(p: &WeightFamily, depth: usize) -> Verdict {
    check_u_inner(p, depth).unwrap_or_else(|e| Verdict::unknown(depth, e.to_string()))
}

fn check_u_inner(p: &WeightFamily, depth: usize) -> Result<Verdict> {
    let index_set = p.index_set();
    let depth = index_set.prefix_len(depth.max(1));
    let levels = p.levels_within(SAMPLED_LEVELS);
    if index_set.is_finite() {
        let steps = (1..=levels)
            .map(|k| {
                let (partial, _) = sum_trend(&p.level(k)?, index_set, depth)?;
                Ok(SummationStep { source_level: k, target_level: None, partial, proof_rule: ProofRule::FiniteIndexSet, depth })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Verdict::holds(depth, Certificate::Summation { steps }));
    }
    if p.flags().all_weights_ge_one {
        return Ok(Verdict::fails(
            depth,
            FailureWitness {
                level: 1,
                proof_rule: ProofRule::PointwiseBound,
                detail: "every weight is at least 1 on an infinite index set".into(),
            },
        ));
    }
    if let Some(shape) = p.shape() {
        let growth = asymptotic::ratio_limit(&Node::log(Node::var(Var::I)), &shape.alpha, Var::I, &var_env());
        if shape.log_sup() > 0.0 {
            let k = shape.first_level_reaching(0.0).expect("below the supremum");
            return Ok(Verdict::fails(
                depth,
                FailureWitness {
                    level: k,
                    proof_rule: ProofRule::Radius,
                    detail: format!("level {k} has grid value r ≥ 1, so its terms do not tend to 0"),
                },
            ));
        }
        // terms behave like i^{ln r_k / L} with L = lim ln i / α_i
        let diverging = match growth {
            Some(Limit::Infinite) => Some(1),
            Some(Limit::Finite(ln_l)) => shape
                .first_level_reaching(-ln_l.exp())
                .filter(|&k| shape.log_effective(k) > -ln_l.exp()),
            _ => None,
        };
        if let Some(k) = diverging {
            return Ok(Verdict::fails(
                depth,
                FailureWitness {
                    level: k,
                    proof_rule: ProofRule::Radius,
                    detail: format!("level {k} decays no faster than a divergent power of i"),
                },
            ));
        }
        let converging = match growth {
            Some(Limit::Zero) => true,
            Some(Limit::Finite(ln_l)) => shape.log_sup() <= -ln_l.exp() && shape.first_level_reaching(-ln_l.exp()).is_none(),
            _ => false,
        };
        if converging {
            let steps = (1..=levels)
                .map(|k| {
                    let (partial, _) = sum_trend(&p.level(k)?, index_set, depth)?;
                    Ok(SummationStep { source_level: k, target_level: None, partial, proof_rule: ProofRule::Radius, depth })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(Verdict::holds(depth, Certificate::Summation { steps }));
        }
    }
    let mut steps = Vec::new();
    let mut open: Option<(u64, Vec<TrendPoint>)> = None;
    for k in 1..=levels {
        let level = p.level(k)?;
        let (partial, trend) = sum_trend(&level, index_set, depth)?;
        let verdict = if index_set.is_pairs() {
            None
        } else {
            asymptotic::series_converges(level.expr().node(), Var::I, &var_env())
        };
        match verdict {
            Some(true) => {
                steps.push(SummationStep { source_level: k, target_level: None, partial, proof_rule: ProofRule::Series, depth })
            }
            Some(false) => {
                return Ok(Verdict::fails(
                    depth,
                    FailureWitness { level: k, proof_rule: ProofRule::Series, detail: format!("Σ_i p^({k})_i diverges") },
                )
                .with_trend(trend));
            }
            None => {
                open.get_or_insert((k, trend));
            }
        }
    }
    let certificate = Certificate::Summation { steps };
    Ok(match open {
        None => Verdict::holds(depth, certificate),
        Some((k, trend)) => Verdict::unknown(depth, format!("series at level {k} not decided"))
            .with_trend(trend)
            .with_certificate(certificate),
    })
}

enum SumSearch {
    Found(SummationStep),
    NoTarget(ProofRule),
    Open(Vec<TrendPoint>),
}

/// Smallest target `m` with `Σ_i p^(k)_i / p^(m)_i < ∞`.
fn nuclear_target(
    p: &WeightFamily,
    k: u64,
    targets: u64,
    depth: usize,
    cache: &mut Vec<(Level, Vec<LogValue>)>,
) -> Result<SumSearch> {
    let index_set = p.index_set();
    let source = p.level(k)?;
    let pv: Vec<LogValue> = index_set.prefix(depth).map(|idx| source.eval(idx)).collect::<Result<_>>()?;
    while (cache.len() as u64) < targets {
        let lv = p.level(cache.len() as u64 + 1)?;
        let vals = index_set.prefix(depth).map(|idx| lv.eval(idx)).collect::<Result<_>>()?;
        cache.push((lv, vals));
    }
    let mut rule = ProofRule::FiniteLevels;
    let mut open: Option<Vec<TrendPoint>> = None;
    for m in 1..=targets {
        let (target, qv) = &cache[(m - 1) as usize];
        let mut acc = LogSumExp::default();
        let marks = [depth.div_ceil(8), depth.div_ceil(4), depth.div_ceil(2), depth];
        let mut trend = Vec::new();
        for (r, (a, b)) in pv.iter().zip(qv).enumerate() {
            if !a.is_zero() {
                acc.push(*a / *b);
            }
            if marks.contains(&(r + 1)) && trend.last().is_none_or(|t: &TrendPoint| t.depth != r + 1) {
                trend.push(TrendPoint { depth: r + 1, value: acc.total() });
            }
        }
        let partial = acc.total();
        if partial == LogValue::INFINITY {
            continue;
        }
        let decided = if index_set.is_pairs() {
            None
        } else {
            let ratio = Node::div(source.expr().node().clone(), target.expr().node().clone());
            asymptotic::series_converges(&ratio, Var::I, &var_env())
        };
        match decided {
            Some(true) => {
                return Ok(SumSearch::Found(SummationStep {
                    source_level: k,
                    target_level: Some(m),
                    partial,
                    proof_rule: ProofRule::Series,
                    depth,
                }))
            }
            Some(false) => rule = ProofRule::Series,
            None => {
                open.get_or_insert(trend);
            }
        }
    }
    Ok(match open {
        Some(trend) => SumSearch::Open(trend),
        None => SumSearch::NoTarget(rule),
    })
}

/// Outcome of the radius rule for (N) on a power-series shape.
fn shape_nuclear(shape: &PowerShape) -> Option<bool> {
    let l = asymptotic::ratio_limit(&Node::log(Node::var(Var::I)), &shape.alpha, Var::I, &var_env())?;
    Some(match l {
        Limit::Zero => true,
        Limit::Finite(_) => shape.radius == crate::weights::Radius::Infinite,
        Limit::Infinite => false,
    })
}

/// (N): for each level `p` some level `q` with `Σ_i p_i / q_i < ∞`.
pub fn check_n(p: &WeightFamily, depth: usize, level_budget: u64) -> Verdict {
    check_n_inner(p, depth, level_budget).unwrap_or_else(|e| Verdict::unknown(depth, e.to_string()))
}

fn check_n_inner(p: &WeightFamily, depth: usize, level_budget: u64) -> Result<Verdict> {
    let index_set = p.index_set();
    let depth = index_set.prefix_len(depth.max(1));
    if let Some(n) = p.curated().and_then(|c| c.n.map(|n| (n, c.citation))) {
        return Ok(citation(depth, n.0, n.1, 1));
    }
    let p = p.running_max();
    let sources = p.levels_within(level_budget);
    if index_set.is_finite() {
        // q = p: the ratio is 1 on the support
        let steps = (1..=sources)
            .map(|k| {
                let (partial, _) = sum_trend(&p.level(k)?, index_set, 0)?;
                let _ = partial;
                let count = index_set.prefix(depth).filter(|idx| p.level(k).and_then(|l| l.eval(*idx)).is_ok_and(|v| !v.is_zero())).count();
                Ok(SummationStep {
                    source_level: k,
                    target_level: Some(k),
                    partial: LogValue::from_log((count as f64).ln()),
                    proof_rule: ProofRule::FiniteIndexSet,
                    depth,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Verdict::holds(depth, Certificate::Summation { steps }));
    }
    let shape_says = p.shape().and_then(shape_nuclear);
    if shape_says == Some(false) {
        return Ok(Verdict::fails(
            depth,
            FailureWitness {
                level: 1,
                proof_rule: ProofRule::Radius,
                detail: "log n / α_n does not meet the growth requirement for this radius".into(),
            },
        ));
    }
    let targets = p.levels_within(level_budget.saturating_mul(level_budget));
    let all_targets = p.level_count().is_some_and(|n| n <= targets);
    let mut cache = Vec::new();
    let mut steps = Vec::new();
    let mut open: Option<(u64, Vec<TrendPoint>)> = None;
    for k in 1..=sources {
        match nuclear_target(&p, k, targets, depth, &mut cache)? {
            SumSearch::Found(s) => steps.push(s),
            SumSearch::NoTarget(rule) if all_targets && shape_says.is_none() => {
                return Ok(Verdict::fails(
                    depth,
                    FailureWitness {
                        level: k,
                        proof_rule: rule,
                        detail: format!("Σ_i p^({k})_i / q_i diverges for every level q"),
                    },
                ));
            }
            SumSearch::NoTarget(_) => {
                open.get_or_insert((k, Vec::new()));
            }
            SumSearch::Open(trend) => {
                open.get_or_insert((k, trend));
            }
        }
    }
    let certificate = Certificate::Summation { steps };
    Ok(match (open, shape_says) {
        (None, _) => Verdict::holds(depth, certificate),
        (Some(_), Some(true)) => Verdict::holds(depth, certificate).with_note("radius rule; some targets lie beyond the budget"),
        (Some((k, trend)), None) => Verdict::unknown(depth, format!("no summable ratio found for level {k}"))
            .with_trend(trend)
            .with_certificate(certificate),
        (Some(_), Some(false)) => unreachable!("handled above"),
    })
}

/// (B): `P ∼ P²`. Requires `P` to be an algebra.
pub fn check_b(p: &WeightFamily, depth: usize, level_budget: u64) -> Result<Verdict> {
    let algebra = is_algebra(p, depth, level_budget);
    match algebra.outcome {
        Outcome::Fails => return Err(Error::Precondition(format!("{} is not an algebra", p.name()))),
        Outcome::Unknown => {
            return Ok(Verdict::unknown(algebra.depth, "the algebra condition P ≺ P² is not decided").with_trend(algebra.trend))
        }
        Outcome::Holds => {}
    }
    let depth = p.index_set().prefix_len(depth.max(1));
    if let Some(b) = p.curated().and_then(|c| c.b.map(|b| (b, c.citation))) {
        return Ok(citation(depth, b.0, b.1, 1));
    }
    equivalent(p, &square(p), depth, level_budget)
}

/// The matrices `α_ij = min{1, inf_k p^(k)_j / p^(k)_i}`, `β = 1 − α`.
#[derive(Clone, Debug, PartialEq)]
pub struct MMatrices {
    kind: MatrixKind,
}

#[derive(Clone, Debug, PartialEq)]
enum MatrixKind {
    /// Built from a monotone family; the infimum runs over levels
    /// `first..first + cap` plus the limit `k → ∞` when it is known.
    Monotone { family: WeightFamily, first: u64, cap: u64 },
    /// `α_ij = e^{log_alpha}` everywhere.
    Constant { log_alpha: f64 },
}

impl MMatrices {
    /// Constant matrices, for experiments with hand-picked splittings.
    pub fn constant(alpha: f64) -> Result<MMatrices> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("α = {alpha} outside [0, 1]")));
        }
        Ok(MMatrices { kind: MatrixKind::Constant { log_alpha: alpha.ln() } })
    }

    /// First level used by the construction; lower levels are dominated by it.
    pub fn first_level(&self) -> Option<u64> {
        match self.kind {
            MatrixKind::Monotone { first, .. } => Some(first),
            MatrixKind::Constant { .. } => None,
        }
    }

    /// `ln α_ij`.
    pub fn alpha_log(&self, i: u64, j: u64) -> Result<LogValue> {
        let (family, first, cap) = match &self.kind {
            MatrixKind::Constant { log_alpha } => return Ok(LogValue::from_log(*log_alpha)),
            MatrixKind::Monotone { family, first, cap } => (family, *first, *cap),
        };
        if i == j {
            return Ok(LogValue::ONE);
        }
        let (ii, jj) = (Index::Single(i), Index::Single(j));
        let mut alpha = LogValue::ONE;
        for k in first..first + cap {
            let lv = family.level(k)?;
            let (pi, pj) = (lv.eval(ii)?, lv.eval(jj)?);
            if pi.is_zero() {
                continue;
            }
            alpha = alpha.min(pj / pi);
        }
        if family.level_count().is_none_or(|n| n >= first + cap) {
            alpha = alpha.min(tail_limit(family, i, j).unwrap_or(LogValue::INFINITY));
        }
        Ok(alpha)
    }

    pub fn alpha(&self, i: u64, j: u64) -> Result<f64> {
        Ok(self.alpha_log(i, j)?.value())
    }

    /// `1 − α_ij` in `f64`, so that `α + β == 1` holds exactly.
    pub fn beta(&self, i: u64, j: u64) -> Result<f64> {
        Ok(1.0 - self.alpha(i, j)?)
    }

    pub fn beta_log(&self, i: u64, j: u64) -> Result<LogValue> {
        let b = self.beta(i, j)?;
        Ok(LogValue::from_value(b).unwrap_or(LogValue::ZERO))
    }
}

/// `lim_k p^(k)_j / p^(k)_i` when known in closed form.
fn tail_limit(family: &WeightFamily, i: u64, j: u64) -> Option<LogValue> {
    if let Some(shape) = family.shape() {
        // ratio r_k^{g (α_j − α_i)}; r_k ↑ R
        let a = |n: u64| {
            crate::expr::WeightExpr::from_node(shape.alpha.clone()).eval(1, Index::Single(n)).ok()
        };
        let d = a(j)?.value() - a(i)?.value();
        let log_sup = shape.log_sup();
        return Some(if d == 0.0 {
            LogValue::ONE
        } else {
            LogValue::from_log(log_sup * d)
        });
    }
    let crate::weights::Levels::Uniform(e) = family.levels() else { return None };
    let (pi, pj) = (e.node().substitute(Var::I, i as f64), e.node().substitute(Var::I, j as f64));
    match asymptotic::ratio_limit(&pj, &pi, Var::K, &var_env())? {
        Limit::Zero => Some(LogValue::ZERO),
        Limit::Finite(l) => Some(LogValue::from_log(l)),
        Limit::Infinite => Some(LogValue::INFINITY),
    }
}

/// Matrices from the monotone-family construction.
pub fn construct_m_matrices(p: &WeightFamily) -> Result<MMatrices> {
    if p.index_set() != IndexSet::Naturals {
        return Err(Error::Precondition("(M)-matrices need the index set naturals".into()));
    }
    let family = p.running_max();
    // a power series with R > 1 is equivalent to its levels with r ≥ 1, which are nondecreasing
    let first = match (p.flags().monotone_in_index, family.shape()) {
        (Monotone::None, Some(shape)) if shape.log_sup() > 0.0 => shape.first_level_reaching(0.0).expect("below the supremum"),
        (Monotone::None, _) => return Err(Error::Precondition("weights are not monotone in the index".into())),
        _ => 1,
    };
    let cap = family.levels_within(SAMPLED_LEVELS);
    Ok(MMatrices { kind: MatrixKind::Monotone { family, first, cap } })
}

/// Required `log C` for target level `m` on a square prefix, or `None` when some
/// bound needs `C = ∞`.
fn m_constant(
    alpha: &[Vec<LogValue>],
    beta: &[Vec<LogValue>],
    lp: &[LogValue],
    lq: &[LogValue],
) -> LogValue {
    let side = lp.len();
    let mut need = LogValue::ZERO;
    for i in 0..side {
        for j in 0..side {
            let pp = lp[i] * lp[j];
            // (M2): α_ij p_i p_j ≤ C q_j², i.e. log C ≥ log α + lp_i + lp_j − 2 lq_j
            need = need.max(alpha[i][j] * pp / (lq[j] * lq[j]));
            // (M3): β_ij p_i p_j ≤ C q_i²
            need = need.max(beta[i][j] * pp / (lq[i] * lq[i]));
        }
    }
    need
}

const M_SLACK: f64 = 1e-9;

/// (M) for the given matrices on the `side × side` prefix, `side = ⌊√depth⌋`.
pub fn check_m(p: &WeightFamily, matrices: &MMatrices, depth: usize, level_budget: u64) -> Verdict {
    check_m_inner(p, matrices, depth, level_budget).unwrap_or_else(|e| Verdict::unknown(depth, e.to_string()))
}

fn check_m_inner(p: &WeightFamily, matrices: &MMatrices, depth: usize, level_budget: u64) -> Result<Verdict> {
    if let Some(m) = p.curated().and_then(|c| c.m.map(|m| (m, c.citation))) {
        return Ok(citation(depth, m.0, m.1, 1));
    }
    if p.index_set() != IndexSet::Naturals {
        return Ok(Verdict::unknown(depth, "(M) is only searched on the index set naturals"));
    }
    let side = (depth as f64).sqrt().floor().max(1.0) as u64;
    let mut alpha = Vec::with_capacity(side as usize);
    let mut beta = Vec::with_capacity(side as usize);
    for i in 1..=side {
        let mut ra = Vec::with_capacity(side as usize);
        let mut rb = Vec::with_capacity(side as usize);
        for j in 1..=side {
            let a = matrices.alpha(i, j)?;
            let b = matrices.beta(i, j)?;
            // (M1), exactly in f64
            if a + b != 1.0 || !(0.0..=1.0).contains(&a) {
                return Ok(Verdict::fails(
                    side as usize,
                    FailureWitness {
                        level: 0,
                        proof_rule: ProofRule::FiniteIndexSet,
                        detail: format!("(M1) fails at ({i}, {j}): α + β = {}", a + b),
                    },
                ));
            }
            ra.push(matrices.alpha_log(i, j)?);
            rb.push(matrices.beta_log(i, j)?);
        }
        alpha.push(ra);
        beta.push(rb);
    }
    let fam = p.running_max();
    let levels = fam.levels_within(level_budget);
    let targets = fam.levels_within(level_budget.saturating_mul(level_budget));
    let values = |k: u64| -> Result<Vec<LogValue>> {
        let lv = fam.level(k)?;
        (1..=side).map(|i| lv.eval(Index::Single(i))).collect()
    };
    // constructed matrices: q = max(p, first constructed level) with C = 1
    let first = matrices.first_level().filter(|_| fam.flags().pointwise_ordered);
    let mut worst = 0.0f64;
    let mut open = None;
    for k in 1..=levels {
        let lp = values(k)?;
        if let Some(first) = first {
            let need = m_constant(&alpha, &beta, &lp, &values(k.max(first))?);
            // log-domain rounding: equality cases such as α_ij = p_j / p_i land within a few ulps
            if need.ln() <= M_SLACK {
                continue;
            }
        }
        // otherwise the smallest target with a finite constant on the prefix
        for m in 1..=targets {
            let need = m_constant(&alpha, &beta, &lp, &values(m)?);
            if need.is_finite() {
                worst = worst.max(need.ln());
                break;
            }
        }
        open.get_or_insert(k);
    }
    let certificate = Certificate::Matrices { side, levels, log_c: worst, proof_rule: ProofRule::MonotoneFamily };
    Ok(match open {
        None if first.is_some() => Verdict::holds(side as usize, certificate),
        None => Verdict::unknown(side as usize, "bounds hold on the prefix only").with_certificate(
            Certificate::Matrices { side, levels, log_c: worst, proof_rule: ProofRule::Prefix },
        ),
        Some(k) => Verdict::unknown(side as usize, format!("no C = 1 bound at level {k} on the prefix")).with_certificate(
            Certificate::Matrices { side, levels, log_c: worst, proof_rule: ProofRule::Prefix },
        ),
    })
}

/// `sup_n log n / log p_n < ∞` at some level.
pub fn check_log_criterion(p: &WeightFamily, depth: usize) -> Result<Verdict> {
    if p.index_set() != IndexSet::Naturals {
        return Err(Error::Precondition("the log criterion needs the index set naturals".into()));
    }
    if !p.flags().all_weights_ge_one {
        return Err(Error::Precondition("the log criterion needs all weights ≥ 1".into()));
    }
    let depth = depth.max(1);
    let fam = p.running_max();
    let levels = fam.levels_within(SAMPLED_LEVELS);
    let mut all_fail = true;
    let mut fail_rule = ProofRule::FiniteLevels;
    let mut best: Option<(u64, LogValue)> = None;
    let shape_limit = fam
        .shape()
        .and_then(|s| asymptotic::ratio_limit(&Node::log(Node::var(Var::I)), &s.alpha, Var::I, &var_env()));
    for k in 1..=levels {
        let lv = fam.level(k)?;
        let mut sup = 0.0f64;
        for n in 1..=depth as u64 {
            // the n = 1 term is 0 by convention
            if n == 1 {
                continue;
            }
            let lp = lv.eval(Index::Single(n))?.ln();
            let r = (n as f64).ln() / lp;
            sup = if lp == 0.0 { f64::INFINITY } else { sup.max(r) };
            if sup.is_infinite() {
                break;
            }
        }
        let prefix_sup = LogValue::from_value(sup).unwrap_or(LogValue::INFINITY);
        if sup.is_infinite() {
            // log p_n = 0 at some n ≥ 2: this level fails outright
            continue;
        }
        let limit = match (fam.shape(), shape_limit) {
            (Some(s), Some(l)) if s.log_effective(k) > 0.0 => Some(l),
            _ => {
                let ratio = Node::div(Node::log(Node::var(Var::I)), Node::log(lv.expr().node().clone()));
                asymptotic::analyze(&ratio, Var::I, &var_env()).and_then(|g| g.limit())
            }
        };
        match limit {
            Some(Limit::Zero | Limit::Finite(_)) => {
                return Ok(Verdict::holds(
                    depth,
                    Certificate::LogCriterion { level: k, prefix_sup, proof_rule: ProofRule::Limit },
                ))
            }
            Some(Limit::Infinite) => fail_rule = ProofRule::Limit,
            None => {
                all_fail = false;
                if best.is_none_or(|(_, b)| prefix_sup < b) {
                    best = Some((k, prefix_sup));
                }
            }
        }
    }
    let exhaustive = fam.level_count().is_some_and(|n| n <= levels) || (fam.shape().is_some() && shape_limit == Some(Limit::Infinite));
    if all_fail && exhaustive {
        let rule = if fam.shape().is_some() && fam.level_count().is_none() { ProofRule::Radius } else { fail_rule };
        return Ok(Verdict::fails(
            depth,
            FailureWitness { level: levels, proof_rule: rule, detail: "log n / log p_n is unbounded at every level".into() },
        ));
    }
    let note = match best {
        Some((k, s)) => format!("undecided; smallest prefix sup {s} at level {k}"),
        None => format!("every level 1..={levels} fails; more levels exist"),
    };
    Ok(Verdict::unknown(depth, note))
}

/// The four condition verdicts of one family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionProfile {
    pub family: String,
    pub depth: usize,
    pub level_budget: u64,
    #[serde(rename = "U")]
    pub u: Verdict,
    #[serde(rename = "N")]
    pub n: Verdict,
    #[serde(rename = "B")]
    pub b: Verdict,
    #[serde(rename = "M")]
    pub m: Verdict,
    /// Shipped approximate-contractibility fact for the family, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approximately_contractible: Option<bool>,
}

impl ConditionProfile {
    /// Applies "(U) implies (B), (N), (M)". A proved failure of one of them
    /// next to (U) is an error.
    pub fn new(family: String, depth: usize, level_budget: u64, u: Verdict, n: Verdict, b: Verdict, m: Verdict) -> Result<ConditionProfile> {
        let mut cp = ConditionProfile { family, depth, level_budget, u, n, b, m, approximately_contractible: None };
        if cp.u.is_holds() {
            let text = "implied by (U)";
            for (name, v) in [("N", &mut cp.n), ("B", &mut cp.b), ("M", &mut cp.m)] {
                if v.is_fails() {
                    return Err(Error::Precondition(format!("(U) holds but ({name}) fails")));
                }
                if !v.is_holds() {
                    *v = Verdict::holds(v.depth, Certificate::Citation { text: text.into() });
                }
            }
        }
        Ok(cp)
    }
}

/// Outcomes only, for table lookups and tests.
pub fn outcomes(cp: &ConditionProfile) -> [Outcome; 4] {
    [cp.u.outcome, cp.n.outcome, cp.b.outcome, cp.m.outcome]
}
