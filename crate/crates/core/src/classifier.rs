//! Homological dimensions and triviality flags from a [`ConditionProfile`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::conditions::{check_b, check_m, check_n, check_u, construct_m_matrices, ConditionProfile, MMatrices};
use crate::error::{Error, Result};
use crate::relations::is_algebra;
use crate::verdict::{Outcome, Verdict};
use crate::weights::WeightFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Infinite,
    #[serde(rename = "unknown")]
    Unknown,
}

impl Dimension {
    pub fn is_known(self) -> bool {
        self != Dimension::Unknown
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Zero => "0",
            Dimension::One => "1",
            Dimension::Two => "2",
            Dimension::Infinite => "∞",
            Dimension::Unknown => "unknown",
        })
    }
}

/// The module whose (weak) homological dimension realizes the value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessModule {
    #[serde(rename = "C")]
    Trivial,
    #[serde(rename = "lambda_inf(P)")]
    LambdaInfinity,
    #[serde(rename = "lambda(P_bar)")]
    LambdaBar,
}

impl fmt::Display for WitnessModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WitnessModule::Trivial => "ℂ",
            WitnessModule::LambdaInfinity => "λ∞(P)",
            WitnessModule::LambdaBar => "λ(P̄)",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    U,
    N,
    B,
    M,
}

/// Table row that fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Unital,
    BNotU,
    BNotN,
    NotB,
    BNMNotU,
    BNNotM,
    Blocked,
}

impl Case {
    /// One-line explanation for reports.
    pub fn text(self) -> &'static str {
        match self {
            Case::Unital => "(U): every weight is summable, so the sequence of ones is an identity and the algebra is contractible",
            Case::BNotU => "(B) and (N) without (U): C is not flat, and one flat step resolves it",
            Case::BNotN => "(B) without (N): lambda_inf(P) reaches dimension 2",
            Case::NotB => "no (B): C has infinite dimension",
            Case::BNMNotU => "(B), (N) and (M) without (U): C is not projective, and one projective step resolves it",
            Case::BNNotM => "(B) and (N) without (M): lambda(P_bar) reaches projective dimension 2",
            Case::Blocked => "a needed condition is undecided",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub dimension: Dimension,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessModule>,
    pub case: Case,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocked_by: Option<Condition>,
}

impl Classification {
    fn decided(dimension: Dimension, witness: Option<WitnessModule>, case: Case) -> Classification {
        Classification { dimension, witness, case, blocked_by: None }
    }

    fn blocked(c: Condition) -> Classification {
        Classification { dimension: Dimension::Unknown, witness: None, case: Case::Blocked, blocked_by: Some(c) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl From<Outcome> for Tri {
    fn from(o: Outcome) -> Tri {
        match o {
            Outcome::Holds => Tri::True,
            Outcome::Fails => Tri::False,
            Outcome::Unknown => Tri::Unknown,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrivialityFlags {
    pub unital: Tri,
    pub contractible: Tri,
    pub amenable: Tri,
    pub biprojective: Tri,
    pub biflat: Tri,
    pub approximately_contractible: Tri,
}

fn outcomes(cp: &ConditionProfile) -> Result<(Outcome, Outcome, Outcome, Outcome)> {
    let mut o = (cp.u.outcome, cp.n.outcome, cp.b.outcome, cp.m.outcome);
    if o.0 == Outcome::Holds && [o.1, o.2, o.3].contains(&Outcome::Fails) {
        return Err(Error::Precondition("inconsistent profile: (U) holds but one of (N), (B), (M) fails".into()));
    }
    if [o.0, o.1, o.2, o.3].iter().all(|x| *x == Outcome::Unknown) {
        return Err(Error::Precondition("no condition is decided".into()));
    }
    // (U) implies the other three
    if [o.1, o.2, o.3].contains(&Outcome::Fails) {
        o.0 = Outcome::Fails;
    }
    Ok(o)
}

/// `wdg = wdb`.
pub fn classify_weak(cp: &ConditionProfile) -> Result<Classification> {
    use Outcome::*;
    let (u, n, b, _) = outcomes(cp)?;
    Ok(match (u, b, n) {
        (Holds, _, _) => Classification::decided(Dimension::Zero, Some(WitnessModule::Trivial), Case::Unital),
        (_, Fails, _) => Classification::decided(Dimension::Infinite, Some(WitnessModule::Trivial), Case::NotB),
        (_, Unknown, _) => Classification::blocked(Condition::B),
        (_, Holds, Fails) => Classification::decided(Dimension::Two, Some(WitnessModule::LambdaInfinity), Case::BNotN),
        (_, Holds, Unknown) => Classification::blocked(Condition::N),
        (Fails, Holds, Holds) => Classification::decided(Dimension::One, Some(WitnessModule::Trivial), Case::BNotU),
        (Unknown, Holds, Holds) => Classification::blocked(Condition::U),
    })
}

/// `dg = db`.
pub fn classify_strong(cp: &ConditionProfile) -> Result<Classification> {
    use Outcome::*;
    let (u, n, b, m) = outcomes(cp)?;
    Ok(match (u, b, n, m) {
        (Holds, ..) => Classification::decided(Dimension::Zero, Some(WitnessModule::Trivial), Case::Unital),
        (_, Fails, ..) => Classification::decided(Dimension::Infinite, Some(WitnessModule::Trivial), Case::NotB),
        (_, Unknown, ..) => Classification::blocked(Condition::B),
        (_, Holds, Fails, _) => Classification::decided(Dimension::Two, Some(WitnessModule::LambdaInfinity), Case::BNotN),
        (_, Holds, Unknown, _) => Classification::blocked(Condition::N),
        (_, Holds, Holds, Fails) => Classification::decided(Dimension::Two, Some(WitnessModule::LambdaBar), Case::BNNotM),
        (Fails, Holds, Holds, Holds) => Classification::decided(Dimension::One, Some(WitnessModule::Trivial), Case::BNMNotU),
        (Unknown, Holds, Holds, _) => Classification::blocked(Condition::U),
        (Fails, Holds, Holds, Unknown) => Classification::blocked(Condition::M),
    })
}

pub fn triviality_flags(cp: &ConditionProfile) -> TrivialityFlags {
    let u = Tri::from(cp.u.outcome);
    let b = Tri::from(cp.b.outcome);
    let ac = if u == Tri::True || (cp.b.is_holds() && cp.n.is_holds()) {
        Tri::True
    } else {
        match cp.approximately_contractible {
            Some(true) => Tri::True,
            Some(false) => Tri::False,
            None => Tri::Unknown,
        }
    };
    TrivialityFlags { unital: u, contractible: u, amenable: u, biprojective: b, biflat: b, approximately_contractible: ac }
}

/// (M) with the constructed matrices, or with `α = 1` when the construction
/// does not apply (only shipped facts decide that case).
pub fn check_m_constructed(p: &WeightFamily, depth: usize, level_budget: u64) -> Verdict {
    match construct_m_matrices(p) {
        Ok(matrices) => check_m(p, &matrices, depth, level_budget),
        Err(e) => {
            let v = check_m(p, &MMatrices::constant(1.0).expect("1 is in [0, 1]"), depth, level_budget);
            if v.outcome == Outcome::Unknown {
                Verdict::unknown(v.depth, format!("no (M)-matrices: {e}"))
            } else {
                v
            }
        }
    }
}

/// All four verdicts, propagation applied.
pub fn profile_conditions(p: &WeightFamily, depth: usize, level_budget: u64) -> Result<ConditionProfile> {
    if is_algebra(p, depth, level_budget).is_fails() {
        return Err(Error::Precondition(format!("{} is not an algebra", p.name())));
    }
    let u = check_u(p, depth);
    let n = check_n(p, depth, level_budget);
    let b = check_b(p, depth, level_budget)?;
    let m = check_m_constructed(p, depth, level_budget);
    let mut cp = ConditionProfile::new(p.name(), depth, level_budget, u, n, b, m)?;
    cp.approximately_contractible = p.curated().and_then(|c| c.approximately_contractible);
    Ok(cp)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomologicalProfile {
    pub family: String,
    pub dg: Dimension,
    pub db: Dimension,
    pub wdg: Dimension,
    pub wdb: Dimension,
    /// Keyed by `"dg"`, `"db"`, `"wdg"`, `"wdb"`.
    pub witnesses: BTreeMap<String, WitnessModule>,
    pub flags: TrivialityFlags,
    pub strong: Classification,
    pub weak: Classification,
}

impl HomologicalProfile {
    pub fn from_conditions(cp: &ConditionProfile) -> Result<HomologicalProfile> {
        let strong = classify_strong(cp)?;
        let weak = classify_weak(cp)?;
        let mut witnesses = BTreeMap::new();
        for (key, c) in [("dg", &strong), ("db", &strong), ("wdg", &weak), ("wdb", &weak)] {
            if let Some(w) = c.witness {
                witnesses.insert(key.to_string(), w);
            }
        }
        Ok(HomologicalProfile {
            family: cp.family.clone(),
            dg: strong.dimension,
            db: strong.dimension,
            wdg: weak.dimension,
            wdb: weak.dimension,
            witnesses,
            flags: triviality_flags(cp),
            strong,
            weak,
        })
    }

    /// Plain-text summary with the cases applied.
    pub fn report(&self) -> String {
        let mut out = format!("{}\n", self.family);
        for (name, c) in [("dg = db", &self.strong), ("wdg = wdb", &self.weak)] {
            out += &format!("  {name} = {}", c.dimension);
            if let Some(w) = c.witness {
                out += &format!(" (witness {w})");
            }
            if let Some(b) = c.blocked_by {
                out += &format!(" (blocked by ({b:?}))");
            }
            out += &format!("\n    {}\n", c.case.text());
        }
        let f = &self.flags;
        out += &format!(
            "  unital/contractible/amenable: {:?}\n  biprojective/biflat: {:?}\n  approximately contractible: {:?}\n",
            f.unital, f.biprojective, f.approximately_contractible
        );
        out
    }
}

pub fn classify(p: &WeightFamily, depth: usize, level_budget: u64) -> Result<(ConditionProfile, HomologicalProfile)> {
    let cp = profile_conditions(p, depth, level_budget)?;
    let hp = HomologicalProfile::from_conditions(&cp)?;
    Ok((cp, hp))
}

/// Violated relations among the four dimensions and the flags.
pub fn consistency_check(hp: &HomologicalProfile) -> Vec<String> {
    let mut out = Vec::new();
    let known = |a: Dimension, b: Dimension| a.is_known() && b.is_known();
    if known(hp.dg, hp.db) && hp.dg != hp.db {
        out.push(format!("dg = db: {} ≠ {}", hp.dg, hp.db));
    }
    if known(hp.wdg, hp.wdb) && hp.wdg != hp.wdb {
        out.push(format!("wdg = wdb: {} ≠ {}", hp.wdg, hp.wdb));
    }
    if known(hp.wdg, hp.dg) && hp.wdg > hp.dg {
        out.push(format!("wdg ≤ dg: {} > {}", hp.wdg, hp.dg));
    }
    if known(hp.wdb, hp.db) && hp.wdb > hp.db {
        out.push(format!("wdb ≤ db: {} > {}", hp.wdb, hp.db));
    }
    if hp.flags.biprojective == Tri::True && hp.db.is_known() && hp.db > Dimension::Two {
        out.push(format!("db ≤ 2 for biprojective: db = {}", hp.db));
    }
    if hp.flags.biflat == Tri::True && hp.wdg.is_known() && hp.wdg > Dimension::Two {
        out.push(format!("wdg ≤ 2 for biflat: wdg = {}", hp.wdg));
    }
    out
}
