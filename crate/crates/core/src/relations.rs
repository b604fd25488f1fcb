//! Domination `P ≺ Q`, equivalence, the algebra condition `P ≺ P²`, and the
//! non-algebra witness sequence.
//!
//! Search order for a source level `k`: targets `m = 1, 2, …` up to
//! `level_budget²`; the first target with an exact bound wins, and its
//! constant is the smallest one valid on the prefix.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, Limit};
use crate::error::{Error, Result};
use crate::expr::{Env, Var, WeightExpr};
use crate::index::{Index, IndexSet};
use crate::logvalue::LogValue;
use crate::sequences::{Coeff, SeqElement};
use crate::verdict::{
    Certificate, DominationCertificate, DominationStep, FailureWitness, ProofRule, TrendPoint, Verdict,
};
use crate::weights::{square, Level, WeightFamily};

/// Default number of indices scanned by [`non_algebra_witness`].
pub const WITNESS_SCAN_BUDGET: u64 = 1 << 27;

/// Relative slack when replaying a certificate.
const REPLAY_TOL: f64 = 1e-12;

fn sup_log_ratio(num: &[LogValue], den: &[LogValue]) -> LogValue {
    let mut sup = LogValue::ZERO;
    for (a, b) in num.iter().zip(den) {
        if a.is_zero() {
            continue;
        }
        sup = sup.max(*a / *b);
    }
    sup
}

fn level_values(level: &Level, index_set: IndexSet, depth: usize) -> Result<Vec<LogValue>> {
    index_set.prefix(depth).map(|idx| level.eval(idx)).collect()
}

enum Search {
    Found(DominationStep),
    /// Every target within the budget provably fails.
    NoTarget { rule: ProofRule, checked: u64 },
    Open { trend: Vec<TrendPoint> },
}

struct Searcher<'a> {
    p: &'a WeightFamily,
    q: &'a WeightFamily,
    depth: usize,
    targets: u64,
    cache: Vec<Option<(Level, Vec<LogValue>)>>,
}

impl Searcher<'_> {
    fn target(&mut self, m: u64) -> Result<&(Level, Vec<LogValue>)> {
        let slot = (m - 1) as usize;
        if self.cache.len() <= slot {
            self.cache.resize_with(slot + 1, || None);
        }
        if self.cache[slot].is_none() {
            let lv = self.q.level(m)?;
            let vals = level_values(&lv, self.q.index_set(), self.depth)?;
            self.cache[slot] = Some((lv, vals));
        }
        Ok(self.cache[slot].as_ref().expect("filled"))
    }

    fn search(&mut self, k: u64) -> Result<Search> {
        let index_set = self.p.index_set();
        let covers = index_set.len().is_some_and(|n| self.depth as u64 >= n);
        let plevel = self.p.level(k)?;
        let pv = level_values(&plevel, index_set, self.depth)?;
        let env = Env::at(1, Index::Single(1));
        let mut all_fail = true;
        let mut fail_rule = ProofRule::FiniteLevels;
        let mut best: Option<(LogValue, u64)> = None;
        for m in 1..=self.targets {
            let depth = self.depth;
            let (qlevel, qv) = self.target(m)?;
            let sup = sup_log_ratio(&pv, qv);
            if sup == LogValue::INFINITY {
                // p_i > 0 = q_i somewhere: no constant works
                continue;
            }
            let step = |log_c: f64, rule| DominationStep {
                source_level: k,
                target_level: m,
                log_c: if log_c.is_finite() { log_c } else { 0.0 },
                proof_rule: rule,
                depth,
            };
            if covers {
                return Ok(Search::Found(step(sup.ln(), ProofRule::FiniteIndexSet)));
            }
            let limit = if index_set.is_pairs() {
                None
            } else {
                asymptotic::ratio_limit(plevel.expr().node(), qlevel.expr().node(), Var::I, &env)
            };
            match limit {
                Some(Limit::Zero) => return Ok(Search::Found(step(sup.ln(), ProofRule::Limit))),
                Some(Limit::Finite(l)) => return Ok(Search::Found(step(sup.ln().max(l), ProofRule::Limit))),
                Some(Limit::Infinite) => fail_rule = ProofRule::Limit,
                None => {
                    all_fail = false;
                    if best.is_none_or(|(b, _)| sup < b) {
                        best = Some((sup, m));
                    }
                }
            }
        }
        if all_fail {
            return Ok(Search::NoTarget { rule: fail_rule, checked: self.targets });
        }
        let (_, m) = best.expect("an open target");
        let (_, qv) = self.target(m)?;
        let n = pv.len();
        let trend = [n.div_ceil(8), n.div_ceil(4), n.div_ceil(2), n]
            .iter()
            .map(|&d| TrendPoint { depth: d, value: sup_log_ratio(&pv[..d], &qv[..d]) })
            .collect();
        Ok(Search::Open { trend })
    }
}

/// Same-α power-series shapes: `p^(k) ≤ q^(m)` iff `r_k^g ≤ r'_m^{g'}`.
fn shape_rule(p: &WeightFamily, q: &WeightFamily, depth: usize, sources: u64) -> Option<Verdict> {
    let (a, b) = (p.shape()?, q.shape()?);
    if !a.same_alpha(b) {
        return None;
    }
    // r_k ↑ R without reaching it, so some level fails iff sup a > sup b
    if a.log_sup() > b.log_sup() {
        let k = a.first_level_reaching(b.log_sup())?;
        return Some(Verdict::fails(
            depth,
            FailureWitness {
                level: k,
                proof_rule: ProofRule::Radius,
                detail: format!("level {k} reaches the supremum of the target grid"),
            },
        ));
    }
    let mut steps = Vec::new();
    for k in 1..=sources {
        let m = b.first_level_reaching(a.log_effective(k))?;
        steps.push(DominationStep { source_level: k, target_level: m, log_c: 0.0, proof_rule: ProofRule::Radius, depth });
    }
    Some(Verdict::holds(depth, Certificate::Domination(DominationCertificate { steps })))
}

/// Semi-decides `P ≺ Q`.
pub fn dominates(p: &WeightFamily, q: &WeightFamily, depth: usize, level_budget: u64) -> Result<Verdict> {
    if p.index_set() != q.index_set() {
        return Err(Error::IndexSetMismatch(p.index_set(), q.index_set()));
    }
    let depth = p.index_set().prefix_len(depth.max(1));
    let sources = p.levels_within(level_budget);
    if let Some(v) = shape_rule(p, q, depth, sources) {
        return Ok(v);
    }
    let (p, q) = (p.running_max(), q.running_max());
    if p == q {
        let steps = (1..=sources)
            .map(|k| DominationStep {
                source_level: k,
                target_level: k,
                log_c: 0.0,
                proof_rule: ProofRule::PointwiseBound,
                depth,
            })
            .collect();
        return Ok(Verdict::holds(depth, Certificate::Domination(DominationCertificate { steps })));
    }
    let targets = q.levels_within(level_budget.saturating_mul(level_budget));
    let all_targets = q.level_count().is_some_and(|n| n <= targets);
    let mut searcher = Searcher { p: &p, q: &q, depth, targets, cache: Vec::new() };
    let mut steps = Vec::new();
    let mut open: Option<(u64, Vec<TrendPoint>)> = None;
    for k in 1..=sources {
        match searcher.search(k)? {
            Search::Found(s) => steps.push(s),
            Search::NoTarget { rule, checked } if all_targets => {
                return Ok(Verdict::fails(
                    depth,
                    FailureWitness {
                        level: k,
                        proof_rule: rule,
                        detail: format!("p^({k}) / q^(m) is unbounded for every level m ≤ {checked}"),
                    },
                ));
            }
            Search::NoTarget { checked, .. } => {
                open.get_or_insert((k, Vec::new()));
                let _ = checked;
            }
            Search::Open { trend } => {
                open.get_or_insert((k, trend));
            }
        }
    }
    let certificate = Certificate::Domination(DominationCertificate { steps });
    Ok(match open {
        None => Verdict::holds(depth, certificate),
        Some((k, trend)) => Verdict::unknown(depth, format!("no exact bound for source level {k}"))
            .with_trend(trend)
            .with_certificate(certificate),
    })
}

fn domination_of(v: &Verdict) -> DominationCertificate {
    match &v.certificate {
        Some(Certificate::Domination(c)) => c.clone(),
        _ => DominationCertificate::default(),
    }
}

/// `P ∼ Q`: both dominations.
pub fn equivalent(p: &WeightFamily, q: &WeightFamily, depth: usize, level_budget: u64) -> Result<Verdict> {
    let forward = dominates(p, q, depth, level_budget)?;
    if forward.is_fails() {
        return Ok(forward.with_note("P does not dominate into Q"));
    }
    let backward = dominates(q, p, depth, level_budget)?;
    if backward.is_fails() {
        return Ok(backward.with_note("Q does not dominate into P"));
    }
    let certificate = Certificate::Equivalence { forward: domination_of(&forward), backward: domination_of(&backward) };
    if forward.is_holds() && backward.is_holds() {
        return Ok(Verdict::holds(forward.depth, certificate));
    }
    let open = if forward.is_holds() { backward } else { forward };
    Ok(Verdict::unknown(open.depth, open.note).with_trend(open.trend).with_certificate(certificate))
}

/// `P ≺ P²`.
pub fn is_algebra(p: &WeightFamily, depth: usize, level_budget: u64) -> Verdict {
    if p.flags().all_weights_ge_one {
        let depth = p.index_set().prefix_len(depth.max(1));
        let steps = (1..=p.levels_within(level_budget))
            .map(|k| DominationStep {
                source_level: k,
                target_level: k,
                log_c: 0.0,
                proof_rule: ProofRule::PointwiseBound,
                depth,
            })
            .collect();
        return Verdict::holds(depth, Certificate::Domination(DominationCertificate { steps }))
            .with_note("every weight is at least 1, so p ≤ p² pointwise");
    }
    match dominates(p, &square(p), depth, level_budget) {
        Ok(v) => v,
        Err(e) => Verdict::unknown(depth, e.to_string()),
    }
}

/// First index of the prefix where a step of `cert` is violated.
pub fn replay(
    cert: &DominationCertificate,
    p: &WeightFamily,
    q: &WeightFamily,
    depth: usize,
) -> Result<Option<(u64, Index)>> {
    let (p, q) = (p.running_max(), q.running_max());
    for s in &cert.steps {
        let (a, b) = (p.level(s.source_level)?, q.level(s.target_level)?);
        for idx in p.index_set().prefix(depth) {
            let lhs = a.eval(idx)?;
            if lhs.is_zero() {
                continue;
            }
            let rhs = LogValue::from_log(s.log_c) * b.eval(idx)?;
            if lhs > rhs && (lhs.ln() - rhs.ln()).abs() > REPLAY_TOL * rhs.ln().abs().max(1.0) {
                return Ok(Some((s.source_level, idx)));
            }
        }
    }
    Ok(None)
}

/// One chosen index of the non-algebra witness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    /// Block number, `1..=k_max`.
    pub k: u64,
    pub rank: u64,
    /// Level `m + k - 1` of the ordered family.
    pub level: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessScan {
    /// Smallest level `m` with `p^(m)` not dominated by `P²`.
    pub failing_level: u64,
    pub picks: Vec<Pick>,
    pub x: SeqElement,
}

/// Scans for `i_1 < i_2 < …` with `p^(m)_{i_k} > k⁴ (p^(m+k-1)_{i_k})²` and sets
/// `x_{i_k} = 1 / (k² p^(m+k-1)_{i_k})`.
pub fn non_algebra_scan(p: &WeightFamily, k_max: u64, scan_budget: u64) -> Result<WitnessScan> {
    let verdict = is_algebra(p, 1000, crate::weights::SAMPLED_LEVELS);
    let m = match (&verdict.outcome, &verdict.witness) {
        (crate::verdict::Outcome::Fails, Some(w)) => w.level,
        (crate::verdict::Outcome::Holds, _) => return Err(Error::Precondition("is_algebra holds".into())),
        _ => return Err(Error::Precondition("is_algebra is not known to fail".into())),
    };
    let ordered = p.running_max();
    let index_set = ordered.index_set();
    let count = ordered.level_count();
    let base = ordered.level(m)?;
    let mut picks = Vec::with_capacity(k_max as usize);
    let mut entries = Vec::with_capacity(k_max as usize);
    let mut rank = 0u64;
    let mut scanned = 0u64;
    for k in 1..=k_max {
        let level = count.map_or(m + k - 1, |n| (m + k - 1).min(n));
        let top = ordered.level(level)?;
        let threshold = 4.0 * (k as f64).ln();
        loop {
            rank += 1;
            scanned += 1;
            let idx = index_set.index_at(rank);
            if scanned > scan_budget || idx.is_none() {
                return Err(Error::Budget(format!(
                    "no index for block {k} after scanning {} indices (failing level m = {m})",
                    scanned - 1
                )));
            }
            let idx = idx.expect("checked");
            let (lb, lt) = (base.eval(idx)?, top.eval(idx)?);
            if lb.is_zero() || lt.is_zero() {
                continue;
            }
            if lb.ln() - 2.0 * lt.ln() > threshold {
                picks.push(Pick { k, rank, level });
                let x = LogValue::from_log(-(2.0 * (k as f64).ln() + lt.ln()));
                entries.push((rank, Coeff::positive(x)));
                break;
            }
        }
    }
    let zero = WeightExpr::from_node(crate::expr::Node::num(0.0));
    let x = SeqElement::sparse(index_set, rank, entries, Some(zero))?;
    Ok(WitnessScan { failing_level: m, picks, x })
}

/// The truncated witness `x ∈ λ(P)` with `x² ∉ λ(P)`.
pub fn non_algebra_witness(p: &WeightFamily, k_max: u64) -> Result<SeqElement> {
    Ok(non_algebra_scan(p, k_max, WITNESS_SCAN_BUDGET)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_weight_expr;
    use crate::verdict::Outcome;
    use crate::weights::{bar_family, make_builtin, Builtin, Levels};
    use proptest::prelude::*;

    fn fam(id: &str) -> WeightFamily {
        make_builtin(&Builtin::from_id(id).unwrap()).unwrap()
    }

    fn dsl(levels: &[&str]) -> WeightFamily {
        let l = levels.iter().map(|t| parse_weight_expr(t).unwrap()).collect();
        WeightFamily::from_dsl(IndexSet::Naturals, Levels::List(l), None).unwrap()
    }

    fn uniform(text: &str) -> WeightFamily {
        WeightFamily::from_dsl(IndexSet::Naturals, Levels::Uniform(parse_weight_expr(text).unwrap()), None).unwrap()
    }

    fn steps(v: &Verdict) -> Vec<DominationStep> {
        domination_of(v).steps
    }

    #[test]
    fn l1_into_s() {
        let v = dominates(&fam("l1"), &fam("s"), 1000, 8).unwrap();
        assert!(v.is_holds() && v.is_exact());
        let s = &steps(&v)[0];
        assert_eq!((s.target_level, s.log_c), (1, 0.0));
    }

    #[test]
    fn s_not_into_l1() {
        let v = dominates(&fam("s"), &fam("l1"), 1000, 8).unwrap();
        assert!(v.is_fails() && v.is_exact());
        assert_eq!(v.witness.unwrap().level, 1);
    }

    #[test]
    fn power_series_into_its_square() {
        let p = fam("power_series(2, i)");
        let v = dominates(&p, &square(&p), 1000, 8).unwrap();
        assert!(v.is_holds());
        for s in steps(&v) {
            // r_k ≤ r'_m² with r = 2k/(k+1)
            let r = |k: u64| 2.0 * k as f64 / (k as f64 + 1.0);
            assert!(r(s.source_level) <= r(s.target_level).powi(2));
            assert!(s.target_level == 1 || r(s.source_level) > r(s.target_level - 1).powi(2));
        }
    }

    #[test]
    fn equivalences() {
        let l1 = fam("l1");
        assert!(equivalent(&l1, &l1, 100, 8).unwrap().is_holds());
        let s = fam("s");
        let v = equivalent(&s, &square(&s), 1000, 8).unwrap();
        assert!(v.is_holds() && v.is_exact());
        let h = fam("hadamard_disk(2)");
        let v = equivalent(&h, &square(&h), 1000, 8).unwrap();
        assert!(v.is_fails() && v.is_exact());
        let e = fam("entire");
        assert!(equivalent(&e, &square(&e), 1000, 8).unwrap().is_holds());
        let h1 = fam("hadamard_disk(1)");
        assert!(equivalent(&h1, &square(&h1), 1000, 8).unwrap().is_holds());
    }

    #[test]
    fn algebra_condition() {
        let v = is_algebra(&fam("s"), 100, 8);
        assert!(v.is_holds());
        assert_eq!(steps(&v)[0].log_c, 0.0);
        assert!(is_algebra(&fam("l1"), 100, 8).is_holds());
        let v = is_algebra(&fam("hadamard_disk(1/2)"), 100, 8);
        assert!(v.is_fails() && v.is_exact());
        assert!(is_algebra(&fam("hadamard_disk(1)"), 100, 8).is_holds());
        assert!(is_algebra(&fam("hadamard_disk(3)"), 100, 8).is_holds());
    }

    #[test]
    fn dsl_domination_via_limits() {
        // log i against i^k: ratio → 0
        let v = dominates(&dsl(&["log(i+1)"]), &uniform("i^k"), 500, 4).unwrap();
        assert!(v.is_holds() && steps(&v)[0].proof_rule == ProofRule::Limit);
        // 2^i against polynomials: unbounded for every target, but infinitely many targets
        let v = dominates(&dsl(&["2^i"]), &uniform("i^k"), 500, 2).unwrap();
        assert_eq!(v.outcome, Outcome::Unknown);
        // finitely many targets: exact failure
        let v = dominates(&dsl(&["2^i"]), &dsl(&["i", "i^2"]), 500, 2).unwrap();
        assert!(v.is_fails());
    }

    #[test]
    fn finite_index_sets_are_exhaustive() {
        let p = WeightFamily::from_dsl(
            IndexSet::Finite(5),
            Levels::List(alloc::vec![parse_weight_expr("i").unwrap()]),
            None,
        )
        .unwrap();
        let q = make_builtin(&Builtin::FiniteDim { n: 5 }).unwrap();
        let v = dominates(&p, &q, 100, 8).unwrap();
        assert!(v.is_holds());
        assert!((steps(&v)[0].log_c - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mismatched_index_sets() {
        assert!(matches!(
            dominates(&fam("l1"), &fam("matrix_example"), 10, 2),
            Err(Error::IndexSetMismatch(..))
        ));
    }

    #[test]
    fn composition_of_exact_chains() {
        let (l1, s, e) = (fam("l1"), fam("s"), fam("entire"));
        let ab = dominates(&l1, &s, 500, 4).unwrap();
        let bc = dominates(&s, &e, 500, 4).unwrap();
        assert!(ab.is_holds() && bc.is_holds());
        let ac = domination_of(&ab).compose(&domination_of(&bc));
        assert_eq!(ac.steps.len(), 1);
        assert_eq!(replay(&ac, &l1, &e, 1000).unwrap(), None);
        assert!(dominates(&l1, &e, 500, 4).unwrap().is_holds());
    }

    #[test]
    fn bar_of_s_is_l1() {
        let v = equivalent(&bar_family(&fam("s")), &fam("l1"), 500, 8).unwrap();
        assert!(v.is_holds());
    }

    #[test]
    fn witness_guard() {
        assert!(matches!(non_algebra_witness(&fam("s"), 10), Err(Error::Precondition(_))));
    }

    #[test]
    fn witness_bounds() {
        for id in ["hadamard_disk(1/2)", "hadamard_disk(1/4)"] {
            let p = fam(id);
            let scan = non_algebra_scan(&p, 300, WITNESS_SCAN_BUDGET).unwrap();
            assert_eq!(scan.failing_level, 1);
            let m = scan.failing_level;
            // renumbered level l is m + l - 1; Σ_{l ≤ k ≤ K} |x_{i_k}| p^(l)_{i_k} ≤ Σ_{k=l}^K 1/k²
            for l in 1..=6u64 {
                let level = p.level(m + l - 1).unwrap();
                let mut lhs = LogValue::ZERO;
                let mut rhs = 0.0;
                for (pick, (rank, c)) in scan.picks.iter().zip(scan.x.entries()) {
                    if pick.k >= l {
                        lhs = lhs.add(c.log_abs * level.eval(Index::Single(*rank)).unwrap());
                        rhs += 1.0 / (pick.k * pick.k) as f64;
                    }
                }
                assert!(lhs.value() <= rhs * (1.0 + 1e-12), "{id} l={l}: {} > {rhs}", lhs.value());
            }
            // each block contributes more than 1 to ‖x²‖ at the failing level
            let base = p.level(m).unwrap();
            for (rank, c) in scan.x.entries() {
                let t = c.log_abs * c.log_abs * base.eval(Index::Single(*rank)).unwrap();
                assert!(t.ln() > 0.0);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn holds_certificates_replay_at_twice_depth(a in 0u32..4, b in 0u32..4, r in 1u32..4) {
            let families = [fam("l1"), fam("s"), fam("entire"), fam(&alloc::format!("hadamard_disk({r})"))];
            let (p, q) = (&families[a as usize], &families[b as usize]);
            let depth = 200;
            let v = dominates(p, q, depth, 4).unwrap();
            if v.is_holds() {
                prop_assert_eq!(replay(&domination_of(&v), p, q, 2 * depth).unwrap(), None);
            }
            let e = equivalent(p, q, depth, 4).unwrap();
            let back = dominates(q, p, depth, 4).unwrap();
            if v.is_fails() || back.is_fails() {
                prop_assert!(e.is_fails());
            }
        }

        #[test]
        fn power_series_algebra_iff_radius_at_least_one(r in 0.05f64..4.0) {
            let p = make_builtin(&Builtin::HadamardDisk { radius: crate::weights::Radius::Finite(r) }).unwrap();
            let v = is_algebra(&p, 200, 8);
            prop_assert_eq!(v.is_holds(), r >= 1.0);
            prop_assert_eq!(v.is_fails(), r < 1.0);
        }
    }
}
