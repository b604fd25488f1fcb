//! Köthe sets on countable index sets: builtin catalog, DSL families, and the
//! derived families `P·Q`, `P²`, `P̄`.
//!
//! Levels are ranked `1, 2, …`. A family with a [`Levels::Uniform`] rule has
//! infinitely many levels; every other rule derives its count from its parts.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, Limit};
use crate::error::{Error, Result};
use crate::expr::{parse_weight_expr, Env, Node, Var, WeightExpr, VALIDATION_PREFIX};
use crate::index::{Index, IndexSet};
use crate::logvalue::LogValue;
use crate::verdict::{Certificate, FailureWitness, ProofRule, Verdict};

/// Levels examined by the axiom check and flag validation when a family has more.
pub const SAMPLED_LEVELS: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotone {
    Nondecreasing,
    Nonincreasing,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// `p^(k) ≤ p^(k+1)` pointwise.
    pub pointwise_ordered: bool,
    pub monotone_in_index: Monotone,
    pub all_weights_ge_one: bool,
}

/// `R ∈ (0, ∞]`. Serialized as a number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "RadiusRepr", try_from = "RadiusRepr")]
pub enum Radius {
    Finite(f64),
    Infinite,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RadiusRepr {
    Num(f64),
    Text(String),
}

impl From<Radius> for RadiusRepr {
    fn from(r: Radius) -> RadiusRepr {
        match r {
            Radius::Finite(v) => RadiusRepr::Num(v),
            Radius::Infinite => RadiusRepr::Text("inf".to_string()),
        }
    }
}

impl TryFrom<RadiusRepr> for Radius {
    type Error = String;

    fn try_from(r: RadiusRepr) -> core::result::Result<Radius, String> {
        match r {
            RadiusRepr::Num(v) if v.is_infinite() && v > 0.0 => Ok(Radius::Infinite),
            RadiusRepr::Num(v) => Ok(Radius::Finite(v)),
            RadiusRepr::Text(s) if s == "inf" || s == "infinity" => Ok(Radius::Infinite),
            RadiusRepr::Text(s) => Err(format!("radius must be a number or \"inf\", got `{s}`")),
        }
    }
}

impl Radius {
    pub fn ln(self) -> f64 {
        match self {
            Radius::Finite(r) => r.ln(),
            Radius::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Finite(r) => write!(f, "{r}"),
            Radius::Infinite => write!(f, "inf"),
        }
    }
}

/// The builtin catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Builtin {
    L1,
    FiniteDim { n: u64 },
    S,
    Entire,
    PowerSeries { radius: Radius, alpha: WeightExpr },
    HadamardDisk { radius: Radius },
    MatrixExample,
}

impl Builtin {
    /// Parses catalog ids such as `s`, `finite_dim(64)`, `hadamard_disk(1/2)`,
    /// `power_series(inf, i^2)`.
    pub fn from_id(id: &str) -> Result<Builtin> {
        let id = id.trim();
        let (head, args) = match id.find('(') {
            Some(p) if id.ends_with(')') => (&id[..p], Some(&id[p + 1..id.len() - 1])),
            Some(_) => return Err(Error::UnknownFamily(id.to_string())),
            None => (id, None),
        };
        let radius = |s: &str| -> Result<Radius> {
            let s = s.trim();
            if s == "inf" || s == "infinity" {
                return Ok(Radius::Infinite);
            }
            let v = parse_weight_expr(s)
                .ok()
                .filter(|e| ![Var::I, Var::J, Var::K].iter().any(|&v| e.uses(v)))
                .and_then(|e| e.eval(1, Index::Single(1)).ok())
                .ok_or_else(|| Error::InvalidParameter(format!("radius `{s}`")))?;
            Ok(Radius::Finite(v.value()))
        };
        Ok(match (head, args) {
            ("l1", None) => Builtin::L1,
            ("s", None) => Builtin::S,
            ("entire", None) => Builtin::Entire,
            ("matrix_example", None) => Builtin::MatrixExample,
            ("finite_dim", Some(a)) => Builtin::FiniteDim {
                n: a.trim().parse().map_err(|_| Error::InvalidParameter(format!("dimension `{a}`")))?,
            },
            ("hadamard_disk", Some(a)) => Builtin::HadamardDisk { radius: radius(a)? },
            ("power_series", Some(a)) => {
                let (r, alpha) =
                    a.split_once(',').ok_or_else(|| Error::InvalidParameter("power_series(R, alpha)".into()))?;
                Builtin::PowerSeries { radius: radius(r)?, alpha: parse_weight_expr(alpha.trim())? }
            }
            _ => return Err(Error::UnknownFamily(id.to_string())),
        })
    }

    pub fn id(&self) -> String {
        match self {
            Builtin::L1 => "l1".into(),
            Builtin::FiniteDim { n } => format!("finite_dim({n})"),
            Builtin::S => "s".into(),
            Builtin::Entire => "entire".into(),
            Builtin::PowerSeries { radius, alpha } => format!("power_series({radius}, {alpha})"),
            Builtin::HadamardDisk { radius } => format!("hadamard_disk({radius})"),
            Builtin::MatrixExample => "matrix_example".into(),
        }
    }
}

/// Facts about a builtin that the oracle cannot derive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CuratedFacts {
    pub b: Option<bool>,
    pub n: Option<bool>,
    pub m: Option<bool>,
    pub approximately_contractible: Option<bool>,
    pub citation: &'static str,
}

const MATRIX_FACTS: CuratedFacts = CuratedFacts {
    b: Some(true),
    n: Some(true),
    m: Some(false),
    approximately_contractible: None,
    citation: "shipped fact for the weights 2^((kj)^i) (i+j)^k on N x N: (B) and (N) hold, \
               no splitting alpha + beta = 1 meets the two (M) sup-bounds",
};

const L1_FACTS: CuratedFacts = CuratedFacts {
    b: None,
    n: None,
    m: None,
    approximately_contractible: Some(false),
    citation: "shipped fact: l1 under pointwise multiplication is not approximately contractible",
};

/// Level grid `r_m` of a power-series family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    /// `r_m = m`
    Linear,
    /// `r_m = R m / (m + 1)`
    Fraction,
    /// `r_m = e^m`
    Exponential,
}

/// Levels `p^(m)_i = (r_m)^(power · α(i))` with `r_m ↑ R`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerShape {
    pub radius: Radius,
    pub grid: Grid,
    pub power: f64,
    /// `α` as an expression in `i`: nondecreasing, nonnegative, unbounded.
    pub alpha: Node,
}

impl PowerShape {
    pub fn log_r(&self, m: u64) -> f64 {
        let m = m as f64;
        match self.grid {
            Grid::Linear => m.ln(),
            Grid::Fraction => self.radius.ln() + m.ln() - (m + 1.0).ln(),
            Grid::Exponential => m,
        }
    }

    /// `ln r_m^power`.
    pub fn log_effective(&self, m: u64) -> f64 {
        self.power * self.log_r(m)
    }

    /// `ln R^power`, never attained by a level.
    pub fn log_sup(&self) -> f64 {
        self.power * self.radius.ln()
    }

    /// Smallest level `m` with `r_m^power ≥ e^target`, if any.
    pub fn first_level_reaching(&self, target: f64) -> Option<u64> {
        if target >= self.log_sup() {
            return None;
        }
        let per = target / self.power;
        let guess = match self.grid {
            Grid::Linear => per.exp(),
            Grid::Exponential => per,
            // R m / (m+1) ≥ r  ⟺  m ≥ r / (R - r)
            Grid::Fraction => {
                let r = per.exp();
                let Radius::Finite(big) = self.radius else { return None };
                r / (big - r)
            }
        };
        let mut m = if guess.is_finite() { guess.ceil().clamp(1.0, 1e18) as u64 } else { 1 };
        while m > 1 && self.log_effective(m - 1) >= target {
            m -= 1;
        }
        while self.log_effective(m) < target {
            m += 1;
        }
        Some(m)
    }

    pub fn same_alpha(&self, other: &PowerShape) -> bool {
        self.alpha == other.alpha
    }

    fn squared(&self) -> PowerShape {
        PowerShape { power: self.power * 2.0, ..self.clone() }
    }
}

/// Pairing of levels in a product family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Level `k` pairs `(k, k)`, clamped to the shorter family.
    Diagonal,
    /// Every pair of levels once.
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Levels {
    /// One expression in `i` (and `j`) parameterized by the level `k`.
    Uniform(WeightExpr),
    /// Finitely many levels.
    List(Vec<WeightExpr>),
    Product { left: Box<Levels>, right: Box<Levels>, pairing: Pairing },
    Square(Box<Levels>),
    Bar(Box<Levels>),
    RunningMax(Box<Levels>),
}

impl Levels {
    /// Number of levels, `None` when infinite.
    pub fn count(&self) -> Option<u64> {
        match self {
            Levels::Uniform(_) => None,
            Levels::List(v) => Some(v.len() as u64),
            Levels::Product { left, right, pairing } => match (left.count(), right.count()) {
                (Some(a), Some(b)) => Some(if *pairing == Pairing::Diagonal { a.max(b) } else { a * b }),
                _ => None,
            },
            Levels::Square(x) | Levels::Bar(x) | Levels::RunningMax(x) => x.count(),
        }
    }

    fn pair(&self, k: u64) -> (u64, u64) {
        let Levels::Product { left, right, pairing } = self else { unreachable!() };
        let (n1, n2) = (left.count(), right.count());
        match pairing {
            Pairing::Diagonal => (n1.map_or(k, |n| k.min(n)), n2.map_or(k, |n| k.min(n))),
            Pairing::Grid => match (n1, n2) {
                (_, Some(b)) => ((k - 1) / b + 1, (k - 1) % b + 1),
                (Some(a), None) => ((k - 1) % a + 1, (k - 1) / a + 1),
                (None, None) => {
                    let idx = IndexSet::NaturalPairs.index_at(k).expect("k ≥ 1");
                    (idx.i(), idx.j().unwrap_or(1))
                }
            },
        }
    }

    /// The weight of level `k` as an expression in the index variables.
    pub fn expr_at(&self, k: u64) -> WeightExpr {
        match self {
            Levels::Uniform(e) => e.at_level(k),
            Levels::List(v) => v[(k - 1) as usize].at_level(k),
            Levels::Product { left, right, .. } => {
                let (a, b) = self.pair(k);
                let n = Node::mul(left.expr_at(a).node().clone(), right.expr_at(b).node().clone());
                WeightExpr::from_node(n.fold())
            }
            Levels::Square(x) => WeightExpr::from_node(Node::pow(x.expr_at(k).node().clone(), Node::num(2.0))),
            Levels::Bar(x) => WeightExpr::from_node(Node::min(x.expr_at(k).node().clone(), Node::num(1.0))),
            Levels::RunningMax(x) => {
                let mut n = x.expr_at(1).node().clone();
                for l in 2..=k {
                    n = Node::max(n, x.expr_at(l).node().clone());
                }
                WeightExpr::from_node(n)
            }
        }
    }
}

/// Where a family came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Builtin(Builtin),
    UserDsl,
    Derived(String),
}

/// One level of a family, ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Level {
    pub k: u64,
    expr: WeightExpr,
}

impl Level {
    pub fn eval(&self, idx: Index) -> Result<LogValue> {
        self.expr.eval(self.k, idx).map_err(|source| Error::Eval { k: self.k, index: idx, source })
    }

    pub fn expr(&self) -> &WeightExpr {
        &self.expr
    }
}

/// A countable Köthe set.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFamily {
    index_set: IndexSet,
    levels: Levels,
    flags: Flags,
    provenance: Provenance,
    shape: Option<PowerShape>,
}

fn expr(text: &str) -> WeightExpr {
    parse_weight_expr(text).expect("builtin expression")
}

const ORDERED_UP: Flags =
    Flags { pointwise_ordered: true, monotone_in_index: Monotone::Nondecreasing, all_weights_ge_one: true };

/// Builds a family from the catalog.
pub fn make_builtin(b: &Builtin) -> Result<WeightFamily> {
    let fam = |index_set, levels, flags, shape| WeightFamily {
        index_set,
        levels,
        flags,
        provenance: Provenance::Builtin(b.clone()),
        shape,
    };
    Ok(match b {
        Builtin::L1 => fam(IndexSet::Naturals, Levels::List(alloc::vec![expr("1")]), ORDERED_UP, None),
        Builtin::FiniteDim { n } => {
            if *n == 0 {
                return Err(Error::InvalidParameter("finite_dim needs n ≥ 1".into()));
            }
            fam(IndexSet::Finite(*n), Levels::List(alloc::vec![expr("1")]), ORDERED_UP, None)
        }
        Builtin::S => {
            let shape = PowerShape {
                radius: Radius::Infinite,
                grid: Grid::Exponential,
                power: 1.0,
                alpha: Node::log(Node::var(Var::I)),
            };
            fam(IndexSet::Naturals, Levels::Uniform(expr("i^k")), ORDERED_UP, Some(shape))
        }
        Builtin::Entire => {
            let shape =
                PowerShape { radius: Radius::Infinite, grid: Grid::Linear, power: 1.0, alpha: Node::var(Var::I) };
            fam(IndexSet::Naturals, Levels::Uniform(expr("k^i")), ORDERED_UP, Some(shape))
        }
        Builtin::PowerSeries { radius, alpha } => power_series(b, *radius, alpha)?,
        Builtin::HadamardDisk { radius } => power_series(b, *radius, &expr("i"))?,
        Builtin::MatrixExample => fam(
            IndexSet::NaturalPairs,
            Levels::Uniform(expr("if(i <= k, 2^((k*j)^i) * (i+j)^k, (i+j)^k)")),
            Flags { pointwise_ordered: true, monotone_in_index: Monotone::None, all_weights_ge_one: true },
            None,
        ),
    })
}

fn power_series(b: &Builtin, radius: Radius, alpha: &WeightExpr) -> Result<WeightFamily> {
    if let Radius::Finite(r) = radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must lie in (0, inf], got {r}")));
        }
    }
    if alpha.uses(Var::J) || alpha.uses(Var::K) {
        return Err(Error::InvalidParameter("alpha may only use i".into()));
    }
    let mut prev = LogValue::ZERO;
    for i in 1..=VALIDATION_PREFIX as u64 {
        let a = alpha.eval(1, Index::Single(i)).map_err(|source| Error::Eval { k: 1, index: Index::Single(i), source })?;
        if a.is_zero() || a < prev {
            return Err(Error::InvalidParameter(format!("alpha must be positive and nondecreasing (index {i})")));
        }
        prev = a;
    }
    let env = Env::at(1, Index::Single(1));
    if asymptotic::analyze(alpha.node(), Var::I, &env).and_then(|g| g.limit()) != Some(Limit::Infinite) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} is not provably unbounded")));
    }
    let a = alpha.node().clone();
    let (grid, base) = match radius {
        Radius::Infinite => (Grid::Linear, Node::var(Var::K)),
        Radius::Finite(r) => (
            Grid::Fraction,
            Node::div(
                Node::mul(Node::num(r), Node::var(Var::K)),
                Node::Add(Box::new(Node::var(Var::K)), Box::new(Node::num(1.0))),
            ),
        ),
    };
    let shape = PowerShape { radius, grid, power: 1.0, alpha: a.clone() };
    let log_r1 = shape.log_r(1);
    let log_sup = shape.log_sup();
    let monotone = if log_sup <= 0.0 {
        Monotone::Nonincreasing
    } else if log_r1 >= 0.0 {
        Monotone::Nondecreasing
    } else {
        Monotone::None
    };
    Ok(WeightFamily {
        index_set: IndexSet::Naturals,
        levels: Levels::Uniform(WeightExpr::from_node(Node::pow(base, a))),
        flags: Flags { pointwise_ordered: true, monotone_in_index: monotone, all_weights_ge_one: log_r1 >= 0.0 },
        provenance: Provenance::Builtin(b.clone()),
        shape: Some(shape),
    })
}

impl WeightFamily {
    /// A user family. Flags are inferred from the sampled prefix when absent,
    /// and checked against it when given.
    pub fn from_dsl(index_set: IndexSet, levels: Levels, flags: Option<Flags>) -> Result<WeightFamily> {
        if levels.count() == Some(0) {
            return Err(Error::InvalidParameter("a family needs at least one level".into()));
        }
        let mut fam = WeightFamily {
            index_set,
            levels,
            flags: Flags { pointwise_ordered: false, monotone_in_index: Monotone::None, all_weights_ge_one: false },
            provenance: Provenance::UserDsl,
            shape: None,
        };
        if fam.uses_j() && !index_set.is_pairs() {
            return Err(Error::InvalidParameter("weights use j but the index set is not natural_pairs".into()));
        }
        let inferred = fam.observed_flags(VALIDATION_PREFIX)?;
        match flags {
            None => fam.flags = inferred,
            Some(f) => {
                fam.flags = f;
                fam.check_flags(VALIDATION_PREFIX).map_err(Error::InvalidParameter)?;
            }
        }
        Ok(fam)
    }

    fn uses_j(&self) -> bool {
        let n = self.sampled_levels();
        (1..=n).any(|k| self.levels.expr_at(k).uses(Var::J))
    }

    pub fn index_set(&self) -> IndexSet {
        self.index_set
    }

    pub fn levels(&self) -> &Levels {
        &self.levels
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn shape(&self) -> Option<&PowerShape> {
        self.shape.as_ref()
    }

    pub fn builtin(&self) -> Option<&Builtin> {
        match &self.provenance {
            Provenance::Builtin(b) => Some(b),
            _ => None,
        }
    }

    pub fn curated(&self) -> Option<&'static CuratedFacts> {
        match self.builtin()? {
            Builtin::MatrixExample => Some(&MATRIX_FACTS),
            Builtin::L1 => Some(&L1_FACTS),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match &self.provenance {
            Provenance::Builtin(b) => b.id(),
            Provenance::UserDsl => "dsl".into(),
            Provenance::Derived(d) => d.clone(),
        }
    }

    pub fn level_count(&self) -> Option<u64> {
        self.levels.count()
    }

    /// Levels `1..=n` examined under a budget: all of them when there are fewer.
    pub fn levels_within(&self, budget: u64) -> u64 {
        self.level_count().map_or(budget, |n| n.min(budget))
    }

    fn sampled_levels(&self) -> u64 {
        self.levels_within(SAMPLED_LEVELS)
    }

    pub fn level(&self, k: u64) -> Result<Level> {
        if k == 0 || self.level_count().is_some_and(|n| k > n) {
            return Err(Error::NoSuchLevel(k));
        }
        Ok(Level { k, expr: self.levels.expr_at(k) })
    }

    /// `ln p^(k)_idx`; `-∞` for a zero weight.
    pub fn eval_weight(&self, k: u64, idx: Index) -> Result<LogValue> {
        self.level(k)?.eval(idx)
    }

    fn derived(&self, levels: Levels, flags: Flags, name: String, shape: Option<PowerShape>) -> WeightFamily {
        WeightFamily { index_set: self.index_set, levels, flags, provenance: Provenance::Derived(name), shape }
    }

    /// Replaces levels by running maxima so that they are pointwise ordered.
    pub fn running_max(&self) -> WeightFamily {
        if self.flags.pointwise_ordered {
            return self.clone();
        }
        let flags = Flags { pointwise_ordered: true, ..self.flags };
        let mut out = self.derived(
            Levels::RunningMax(Box::new(self.levels.clone())),
            flags,
            format!("running_max({})", self.name()),
            None,
        );
        if let Provenance::Builtin(_) = self.provenance {
            out.provenance = self.provenance.clone();
        }
        out
    }

    /// Observed flags on the first `depth` indices of the sampled levels.
    pub fn observed_flags(&self, depth: usize) -> Result<Flags> {
        let n = self.sampled_levels();
        let levels: Vec<Level> = (1..=n).map(|k| self.level(k)).collect::<Result<_>>()?;
        let mut ordered = true;
        let mut up = !self.index_set.is_pairs();
        let mut down = up;
        let mut ge_one = true;
        for lv in &levels {
            let mut prev: Option<LogValue> = None;
            for idx in self.index_set.prefix(depth) {
                let v = lv.eval(idx)?;
                ge_one &= v >= LogValue::ONE;
                if let Some(p) = prev {
                    up &= v >= p;
                    down &= v <= p;
                }
                prev = Some(v);
            }
        }
        for w in levels.windows(2) {
            for idx in self.index_set.prefix(depth) {
                ordered &= w[0].eval(idx)? <= w[1].eval(idx)?;
            }
        }
        let monotone = if up {
            Monotone::Nondecreasing
        } else if down {
            Monotone::Nonincreasing
        } else {
            Monotone::None
        };
        Ok(Flags { pointwise_ordered: ordered, monotone_in_index: monotone, all_weights_ge_one: ge_one })
    }

    /// Checks that the declared flags agree with evaluation on the prefix.
    pub fn check_flags(&self, depth: usize) -> core::result::Result<(), String> {
        let seen = self.observed_flags(depth).map_err(|e| e.to_string())?;
        let f = self.flags;
        if f.pointwise_ordered && !seen.pointwise_ordered {
            return Err("declared pointwise_ordered, but a level exceeds its successor".into());
        }
        if f.all_weights_ge_one && !seen.all_weights_ge_one {
            return Err("declared all_weights_ge_one, but a weight is below 1".into());
        }
        let mono_ok = match f.monotone_in_index {
            Monotone::None => true,
            // a constant family is monotone both ways
            m => seen.monotone_in_index == m || (seen.monotone_in_index != Monotone::None && self.is_flat(depth)),
        };
        if !mono_ok {
            return Err(format!("declared monotone_in_index = {:?}, not observed", f.monotone_in_index));
        }
        Ok(())
    }

    fn is_flat(&self, depth: usize) -> bool {
        (1..=self.sampled_levels()).all(|k| {
            let Ok(lv) = self.level(k) else { return false };
            let first = lv.eval(Index::Single(1)).ok();
            self.index_set.prefix(depth).all(|idx| lv.eval(idx).ok() == first)
        })
    }

    /// Checks (P1) and (P2) on the first `depth` indices.
    pub fn axioms_check(&self, depth: usize) -> Verdict {
        match self.axioms_inner(depth) {
            Ok(v) => v,
            Err(e) => Verdict::unknown(depth, e.to_string()),
        }
    }

    fn axioms_inner(&self, depth: usize) -> Result<Verdict> {
        let n = self.sampled_levels();
        let levels: Vec<Level> = (1..=n).map(|k| self.level(k)).collect::<Result<_>>()?;
        let finite_levels = self.level_count().is_some_and(|c| c <= SAMPLED_LEVELS);
        for idx in self.index_set.prefix(depth) {
            let mut positive = false;
            for lv in &levels {
                positive |= !lv.eval(idx)?.is_zero();
            }
            if !positive {
                if finite_levels {
                    return Ok(Verdict::fails(
                        depth,
                        FailureWitness {
                            level: n,
                            proof_rule: ProofRule::FiniteLevels,
                            detail: format!("(P1): every level vanishes at index {idx}"),
                        },
                    ));
                }
                return Ok(Verdict::unknown(depth, format!("(P1): levels 1..={n} vanish at index {idx}")));
            }
        }
        let certificate = Certificate::Axioms { levels_checked: n };
        if self.flags.pointwise_ordered {
            return Ok(Verdict::holds(depth, certificate));
        }
        let values: Vec<Vec<LogValue>> = levels
            .iter()
            .map(|lv| self.index_set.prefix(depth).map(|idx| lv.eval(idx)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        for a in 0..values.len() {
            for b in a + 1..values.len() {
                let found = values.iter().any(|r| {
                    r.iter().zip(values[a].iter().zip(&values[b])).all(|(rv, (x, y))| x.max(*y) <= *rv)
                });
                if !found {
                    return Ok(Verdict::unknown(
                        depth,
                        format!("(P2): no level among 1..={n} dominates levels {} and {}", a + 1, b + 1),
                    ));
                }
            }
        }
        Ok(Verdict::unknown(depth, "(P1), (P2) hold on the prefix; levels are not declared ordered"))
    }
}

/// `P·Q = {p q}`. Pointwise-ordered factors pair levels diagonally, which is
/// equivalent to taking all products.
pub fn product_family(p: &WeightFamily, q: &WeightFamily) -> Result<WeightFamily> {
    if p.index_set != q.index_set {
        return Err(Error::IndexSetMismatch(p.index_set, q.index_set));
    }
    let ordered = p.flags.pointwise_ordered && q.flags.pointwise_ordered;
    let pairing = if ordered { Pairing::Diagonal } else { Pairing::Grid };
    let monotone = if p.flags.monotone_in_index == q.flags.monotone_in_index {
        p.flags.monotone_in_index
    } else {
        Monotone::None
    };
    let flags = Flags {
        pointwise_ordered: ordered,
        monotone_in_index: monotone,
        all_weights_ge_one: p.flags.all_weights_ge_one && q.flags.all_weights_ge_one,
    };
    let levels =
        Levels::Product { left: Box::new(p.levels.clone()), right: Box::new(q.levels.clone()), pairing };
    Ok(p.derived(levels, flags, format!("product({}, {})", p.name(), q.name()), None))
}

/// `P² = {p² : p ∈ P}`.
pub fn square(p: &WeightFamily) -> WeightFamily {
    let shape = p.shape.as_ref().map(PowerShape::squared);
    p.derived(Levels::Square(Box::new(p.levels.clone())), p.flags, format!("square({})", p.name()), shape)
}

/// `P̄ = {min(p, 1)}`.
pub fn bar_family(p: &WeightFamily) -> WeightFamily {
    if let Levels::Bar(_) = p.levels {
        return p.clone();
    }
    let flags = Flags {
        monotone_in_index: if p.flags.all_weights_ge_one { Monotone::Nondecreasing } else { p.flags.monotone_in_index },
        ..p.flags
    };
    p.derived(Levels::Bar(Box::new(p.levels.clone())), flags, format!("bar({})", p.name()), None)
}

/// JSON document for a family: `{index_set, builtin | levels, flags}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyDoc {
    pub index_set: IndexSet,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub builtin: Option<Builtin>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub levels: Option<Levels>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub flags: Option<Flags>,
}

impl FamilyDoc {
    pub fn build(&self) -> Result<WeightFamily> {
        match (&self.builtin, &self.levels) {
            (Some(b), None) => {
                let fam = make_builtin(b)?;
                if fam.index_set != self.index_set {
                    return Err(Error::IndexSetMismatch(fam.index_set, self.index_set));
                }
                if let Some(f) = self.flags {
                    if f != fam.flags {
                        return Err(Error::InvalidParameter(format!("flags {f:?} disagree with builtin {}", b.id())));
                    }
                }
                Ok(fam)
            }
            (None, Some(l)) => WeightFamily::from_dsl(self.index_set, l.clone(), self.flags),
            _ => Err(Error::InvalidParameter("exactly one of `builtin` and `levels` is required".into())),
        }
    }
}

impl From<&WeightFamily> for FamilyDoc {
    fn from(f: &WeightFamily) -> FamilyDoc {
        match &f.provenance {
            Provenance::Builtin(b) if !matches!(f.levels, Levels::RunningMax(_)) => {
                FamilyDoc { index_set: f.index_set, builtin: Some(b.clone()), levels: None, flags: Some(f.flags) }
            }
            _ => FamilyDoc { index_set: f.index_set, builtin: None, levels: Some(f.levels.clone()), flags: Some(f.flags) },
        }
    }
}

impl Serialize for WeightFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        FamilyDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<WeightFamily, D::Error> {
        FamilyDoc::deserialize(d)?.build().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(id: &str) -> WeightFamily {
        make_builtin(&Builtin::from_id(id).unwrap()).unwrap()
    }

    fn w(f: &WeightFamily, k: u64, i: u64) -> f64 {
        f.eval_weight(k, Index::Single(i)).unwrap().ln()
    }

    #[test]
    fn catalog_values() {
        assert_eq!(w(&b("l1"), 1, 1_000_000), 0.0);
        assert!((w(&b("s"), 2, 3) - 9f64.ln()).abs() < 1e-12);
        assert!((w(&b("entire"), 3, 4) - 4.0 * 3f64.ln()).abs() < 1e-12);
        let m = b("matrix_example");
        assert!((m.eval_weight(1, Index::Pair(1, 1)).unwrap().ln() - 4f64.ln()).abs() < 1e-12);
        assert!((m.eval_weight(2, Index::Pair(3, 1)).unwrap().ln() - 16f64.ln()).abs() < 1e-12);
        // r_m = R m/(m+1): level 3 of hadamard_disk(2) at i = 5 is (3/2)^5
        assert!((w(&b("hadamard_disk(2)"), 3, 5) - 5.0 * 1.5f64.ln()).abs() < 1e-12);
        assert!((w(&b("power_series(inf, i^2)"), 2, 3) - 9.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn builtin_flags_match_prefix() {
        for id in ["l1", "finite_dim(64)", "s", "entire", "hadamard_disk(1)", "hadamard_disk(2)",
                   "hadamard_disk(1/2)", "hadamard_disk(3)", "power_series(inf, i)", "matrix_example"] {
            let f = b(id);
            f.check_flags(200).unwrap_or_else(|e| panic!("{id}: {e}"));
        }
        assert_eq!(b("hadamard_disk(1)").flags().monotone_in_index, Monotone::Nonincreasing);
        assert_eq!(b("hadamard_disk(3/2)").flags().monotone_in_index, Monotone::None);
        assert!(!b("hadamard_disk(1)").flags().all_weights_ge_one);
    }

    #[test]
    fn bad_parameters() {
        assert!(matches!(Builtin::from_id("nope"), Err(Error::UnknownFamily(_))));
        assert!(make_builtin(&Builtin::HadamardDisk { radius: Radius::Finite(0.0) }).is_err());
        assert!(Builtin::from_id("power_series(2, log(i))").and_then(|b| make_builtin(&b)).is_err());
        assert!(Builtin::from_id("power_series(2, 3)").and_then(|b| make_builtin(&b)).is_err());
    }

    #[test]
    fn derived_families() {
        let l1 = b("l1");
        let ll = product_family(&l1, &l1).unwrap();
        assert_eq!(ll.level_count(), Some(1));
        assert_eq!(w(&ll, 1, 7), 0.0);
        let s2 = square(&b("s"));
        assert!((w(&s2, 3, 5) - 6.0 * 5f64.ln()).abs() < 1e-12);
        let bs = bar_family(&b("s"));
        assert_eq!(w(&bs, 4, 9), 0.0);
        let bh = bar_family(&b("hadamard_disk(1)"));
        assert!((w(&bh, 3, 4) - 4.0 * 0.75f64.ln()).abs() < 1e-12);
        assert!(matches!(product_family(&l1, &b("matrix_example")), Err(Error::IndexSetMismatch(..))));
    }

    #[test]
    fn square_shape_grid() {
        let h = b("power_series(inf, i)");
        let sq = square(&h);
        let sh = sq.shape().unwrap();
        assert_eq!(sh.power, 2.0);
        assert!((sh.log_effective(3) - 2.0 * 3f64.ln()).abs() < 1e-15);
        assert!((w(&sq, 3, 2) - 2.0 * 2.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn first_level_reaching_is_minimal() {
        let h = b("hadamard_disk(2)");
        let sh = h.shape().unwrap();
        assert_eq!(sh.first_level_reaching(2f64.ln()), None);
        let m = sh.first_level_reaching(1.5f64.ln()).unwrap();
        assert_eq!(m, 3);
        let s = b("s");
        assert_eq!(s.shape().unwrap().first_level_reaching(4.5), Some(5));
    }

    #[test]
    fn axioms() {
        assert!(b("s").axioms_check(1000).is_holds());
        let zero_at_two =
            WeightFamily::from_dsl(IndexSet::Naturals, Levels::List(alloc::vec![expr("if(i == 2, 0, 1)")]), None)
                .unwrap();
        let v = zero_at_two.axioms_check(10);
        assert!(v.is_fails());
        assert!(v.witness.unwrap().detail.contains("index 2"));
        let crossing = WeightFamily::from_dsl(
            IndexSet::Naturals,
            Levels::List(alloc::vec![expr("i"), expr("10/i")]),
            None,
        )
        .unwrap();
        let v = crossing.axioms_check(20);
        assert_eq!(v.outcome, crate::verdict::Outcome::Unknown);
        assert!(v.note.contains("(P2)"));
    }

    #[test]
    fn declared_flags_are_checked() {
        let bad = Flags { pointwise_ordered: true, monotone_in_index: Monotone::None, all_weights_ge_one: false };
        let r = WeightFamily::from_dsl(IndexSet::Naturals, Levels::Uniform(expr("i^(-k)")), Some(bad));
        assert!(r.is_err());
        let inferred = WeightFamily::from_dsl(IndexSet::Naturals, Levels::Uniform(expr("(i+1)^k")), None).unwrap();
        assert_eq!(inferred.flags(), ORDERED_UP);
    }

    #[test]
    fn json_round_trip() {
        for id in ["s", "hadamard_disk(inf)", "power_series(2, i^2)", "matrix_example", "finite_dim(3)"] {
            let f = b(id);
            let text = serde_json::to_string(&f).unwrap();
            let back: WeightFamily = serde_json::from_str(&text).unwrap();
            assert_eq!(back, f, "{text}");
        }
        let d = square(&b("s"));
        let text = serde_json::to_string(&d).unwrap();
        let back: WeightFamily = serde_json::from_str(&text).unwrap();
        assert_eq!(w(&back, 2, 5), w(&d, 2, 5));
    }

    proptest! {
        #[test]
        fn product_adds_logs(k in 1u64..6, i in 1u64..10_000) {
            let (s, e) = (b("s"), b("entire"));
            let p = product_family(&s, &e).unwrap();
            let lhs = w(&p, k, i);
            let rhs = w(&s, k, i) + w(&e, k, i);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn bar_is_idempotent(k in 1u64..6, i in 1u64..500, r in 0.1f64..4.0) {
            let h = make_builtin(&Builtin::HadamardDisk { radius: Radius::Finite(r) }).unwrap();
            let once = bar_family(&h);
            let twice = bar_family(&once);
            prop_assert_eq!(w(&once, k, i), w(&twice, k, i));
            prop_assert!(w(&once, k, i) <= 0.0);
        }

        #[test]
        fn builtin_matches_direct_formula(k in 1u64..9, i in 1u64..10_000) {
            // direct formulas in f64, compared in log-domain
            let s = (i as f64).ln() * k as f64;
            prop_assert!((w(&b("s"), k, i) - s).abs() <= 1e-12 * s.abs().max(1.0));
            let e = (k as f64).ln() * i as f64;
            prop_assert!((w(&b("entire"), k, i) - e).abs() <= 1e-12 * e.abs().max(1.0));
            let r = 0.5 * k as f64 / (k as f64 + 1.0);
            let h = r.ln() * i as f64;
            prop_assert!((w(&b("hadamard_disk(1/2)"), k, i) - h).abs() <= 1e-12 * h.abs().max(1.0));
        }
    }
}
