//! Eventual behavior of closed-form expressions in one variable.
//!
//! A function of `x → ∞` is described through finite sums over the monomial
//! basis `x^a (ln x)^b (ln ln x)^c (ln ln ln x)^d`. [`Growth`] carries the sign of the
//! function, `ln |f|` up to an `o(1)` error, and (when available) the exact
//! additive form of `f` itself. Exact forms are what make exponents usable:
//! `a^e` and `exp(e)` are only analyzed when `e` is known exactly.
//!
//! Every query returns `None` when the rules do not apply. Nothing is
//! guessed from sampled values.

use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::expr::{Env, Node, Pred, Var};

const KEY_TOL: f64 = 1e-12;
const CANCEL_TOL: f64 = 1e-9;

/// Exponents of the monomial `x^a (ln x)^b (ln ln x)^c (ln ln ln x)^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Key(pub [f64; 4]);

impl Key {
    pub const ONE: Key = Key([0.0; 4]);
    pub const X: Key = Key([1.0, 0.0, 0.0, 0.0]);
    pub const LN: Key = Key([0.0, 1.0, 0.0, 0.0]);
    pub const LN2: Key = Key([0.0, 0.0, 1.0, 0.0]);
    pub const LN3: Key = Key([0.0, 0.0, 0.0, 1.0]);

    /// Order of growth; components equal within [`KEY_TOL`].
    pub fn cmp(self, other: Key) -> Ordering {
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            if (a - b).abs() > KEY_TOL {
                return if a < b { Ordering::Less } else { Ordering::Greater };
            }
        }
        Ordering::Equal
    }

    fn add(self, o: Key) -> Key {
        Key(core::array::from_fn(|n| self.0[n] + o.0[n]))
    }

    fn scale(self, s: f64) -> Key {
        Key(self.0.map(|v| v * s))
    }

    /// Monomials strictly below a constant tend to zero.
    fn vanishes(self) -> bool {
        self.cmp(Key::ONE) == Ordering::Less
    }
}

/// A finite sum of basis monomials with real coefficients, keys strictly decreasing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expansion {
    terms: Vec<(Key, f64)>,
}

impl Expansion {
    pub fn zero() -> Expansion {
        Expansion::default()
    }

    pub fn monomial(key: Key, coeff: f64) -> Expansion {
        let mut e = Expansion::zero();
        e.push(key, coeff);
        e
    }

    pub fn constant(c: f64) -> Expansion {
        Expansion::monomial(Key::ONE, c)
    }

    pub fn terms(&self) -> &[(Key, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn leading(&self) -> Option<(Key, f64)> {
        self.terms.first().copied()
    }

    /// The value when the expansion is a constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [] => Some(0.0),
            [(k, c)] if k.cmp(Key::ONE) == Ordering::Equal => Some(*c),
            _ => None,
        }
    }

    fn push(&mut self, key: Key, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        match self.terms.binary_search_by(|(k, _)| key.cmp(*k)) {
            Ok(pos) => {
                let old = self.terms[pos].1;
                let sum = old + coeff;
                if sum.abs() <= CANCEL_TOL * old.abs().max(coeff.abs()) {
                    self.terms.remove(pos);
                } else {
                    self.terms[pos].1 = sum;
                }
            }
            Err(pos) => self.terms.insert(pos, (key, coeff)),
        }
    }

    pub fn add(&self, other: &Expansion) -> Expansion {
        let mut out = self.clone();
        for &(k, c) in &other.terms {
            out.push(k, c);
        }
        out
    }

    pub fn neg(&self) -> Expansion {
        self.scale(-1.0)
    }

    pub fn sub(&self, other: &Expansion) -> Expansion {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: f64) -> Expansion {
        let mut out = Expansion::zero();
        for &(k, c) in &self.terms {
            out.push(k, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Expansion) -> Expansion {
        let mut out = Expansion::zero();
        for &(k1, c1) in &self.terms {
            for &(k2, c2) in &other.terms {
                out.push(k1.add(k2), c1 * c2);
            }
        }
        out
    }

    /// Drops the terms that tend to zero.
    pub fn without_vanishing(&self) -> Expansion {
        Expansion { terms: self.terms.iter().copied().filter(|(k, _)| !k.vanishes()).collect() }
    }

    fn without_key(&self, key: Key) -> Expansion {
        Expansion { terms: self.terms.iter().copied().filter(|(k, _)| k.cmp(key) != Ordering::Equal).collect() }
    }

    /// Eventual sign of the function; `Equal` for the zero function.
    fn sign(&self) -> Ordering {
        match self.leading() {
            None => Ordering::Equal,
            Some((_, c)) if c > 0.0 => Ordering::Greater,
            Some(_) => Ordering::Less,
        }
    }

    /// `ln |γ m|` for a monomial `γ m`; needs a zero `ln ln ln` exponent.
    fn log_of_monomial(key: Key, coeff: f64) -> Option<Expansion> {
        let [a, b, c, d] = key.0;
        if d.abs() > KEY_TOL {
            return None;
        }
        let mut out = Expansion::constant(coeff.abs().ln());
        out.push(Key::LN, a);
        out.push(Key::LN2, b);
        out.push(Key::LN3, c);
        Some(out)
    }
}

/// Eventual sign of a function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Zero,
    Pos,
    Neg,
}

/// What is known about `f(x)` for large `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Growth {
    pub sign: Sign,
    /// `ln |f| + o(1)`; `None` for the zero function or when not representable.
    pub log: Option<Expansion>,
    /// Whether `log` carries no `o(1)` error.
    pub log_exact: bool,
    /// `f` itself, when it is exactly a finite sum of basis monomials.
    pub exact: Option<Expansion>,
}

/// Limit of a nonnegative function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Limit {
    Zero,
    /// Positive finite limit, given by its natural logarithm.
    Finite(f64),
    Infinite,
}

impl Growth {
    pub fn zero() -> Growth {
        Growth { sign: Sign::Zero, log: None, log_exact: true, exact: Some(Expansion::zero()) }
    }

    pub fn constant(v: f64) -> Growth {
        Growth::from_exact(Expansion::constant(v))
    }

    /// Growth of an exactly known function.
    pub fn from_exact(s: Expansion) -> Growth {
        let Some((key, coeff)) = s.leading() else {
            return Growth::zero();
        };
        let sign = if coeff > 0.0 { Sign::Pos } else { Sign::Neg };
        let log = Expansion::log_of_monomial(key, coeff);
        let single = s.terms.len() == 1;
        Growth { sign, log_exact: single && log.is_some(), log, exact: Some(s) }
    }

    /// Growth of `f = s + o(1)`, valid only when `s` does not vanish.
    fn from_approx(s: Expansion) -> Option<Growth> {
        let (key, coeff) = s.leading()?;
        let sign = if coeff > 0.0 { Sign::Pos } else { Sign::Neg };
        let log = Expansion::log_of_monomial(key, coeff)?;
        Some(Growth { sign, log: Some(log), log_exact: false, exact: None })
    }

    fn positive_log(log: Expansion, exact: bool) -> Growth {
        Growth { sign: Sign::Pos, log: Some(log), log_exact: exact, exact: None }
    }

    fn neg(self) -> Growth {
        let sign = match self.sign {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
            Sign::Zero => Sign::Zero,
        };
        Growth { sign, exact: self.exact.map(|e| e.neg()), ..self }
    }

    /// Limit of `f`, which must be eventually nonnegative.
    pub fn limit(&self) -> Option<Limit> {
        match self.sign {
            Sign::Zero => Some(Limit::Zero),
            Sign::Neg => None,
            Sign::Pos => {
                let log = self.log.as_ref()?.without_vanishing();
                Some(match log.leading() {
                    None => Limit::Finite(0.0),
                    Some((k, c)) if k.cmp(Key::ONE) == Ordering::Equal => Limit::Finite(c),
                    Some((_, c)) if c > 0.0 => Limit::Infinite,
                    Some(_) => Limit::Zero,
                })
            }
        }
    }

    /// Whether `Σ_x f(x)` converges, for eventually nonnegative `f`.
    pub fn series_converges(&self) -> Option<bool> {
        match self.sign {
            Sign::Zero => Some(true),
            Sign::Neg => None,
            Sign::Pos => Some(log_series_converges(&self.log.as_ref()?.without_vanishing())),
        }
    }
}

/// Convergence of `Σ exp(L(x))` for an expansion without vanishing terms.
fn log_series_converges(log: &Expansion) -> bool {
    let Some((key, coeff)) = log.leading() else {
        return false;
    };
    match key.cmp(Key::LN) {
        // Faster than any power of x, in either direction.
        Ordering::Greater => coeff < 0.0,
        // x^{o(1)} terms: bounded below by x^{-ε}.
        Ordering::Less => false,
        Ordering::Equal => {
            if (coeff + 1.0).abs() <= CANCEL_TOL {
                // Σ (1/x) g(x) ~ ∫ g(e^t) dt: re-express the rest in t = ln x.
                let mut rest = Expansion::zero();
                for &(k, c) in &log.without_key(Key::LN).terms {
                    let [_, b, c2, d] = k.0;
                    rest.push(Key([b, c2, d, 0.0]), c);
                }
                log_series_converges(&rest.without_vanishing())
            } else {
                coeff < -1.0
            }
        }
    }
}

/// Compares two eventual values; `None` when the rules cannot separate them.
fn compare(a: &Growth, b: &Growth) -> Option<Ordering> {
    if let (Some(x), Some(y)) = (&a.exact, &b.exact) {
        return Some(x.sub(y).sign());
    }
    let rank = |s: Sign| match s {
        Sign::Neg => 0,
        Sign::Zero => 1,
        Sign::Pos => 2,
    };
    if a.sign != b.sign || a.sign == Sign::Zero {
        return Some(rank(a.sign).cmp(&rank(b.sign)));
    }
    let d = a.log.as_ref()?.sub(b.log.as_ref()?).without_vanishing();
    let (_, c) = d.leading()?;
    let mag = if c > 0.0 { Ordering::Greater } else { Ordering::Less };
    Some(if a.sign == Sign::Pos { mag } else { mag.reverse() })
}

fn add(a: Growth, b: Growth) -> Option<Growth> {
    if let (Some(x), Some(y)) = (&a.exact, &b.exact) {
        return Some(Growth::from_exact(x.add(y)));
    }
    if a.sign == Sign::Zero {
        return Some(Growth { exact: None, ..b });
    }
    if b.sign == Sign::Zero {
        return Some(Growth { exact: None, ..a });
    }
    let (la, lb) = (a.log.clone()?, b.log.clone()?);
    let d = la.sub(&lb).without_vanishing();
    let same = a.sign == b.sign;
    let lead = d.leading();
    let out = match lead {
        None if same => Growth { sign: a.sign, log: Some(la.add(&Expansion::constant(2f64.ln()))), log_exact: false, exact: None },
        None => return None,
        Some((k, c)) if k.cmp(Key::ONE) == Ordering::Equal => {
            // |b|/|a| → e^{-c}
            let r = (-c).exp();
            if same {
                Growth { sign: a.sign, log: Some(la.add(&Expansion::constant(r.ln_1p()))), log_exact: false, exact: None }
            } else if c > 0.0 {
                Growth { sign: a.sign, log: Some(la.add(&Expansion::constant((-r).ln_1p()))), log_exact: false, exact: None }
            } else {
                let r = c.exp();
                Growth { sign: b.sign, log: Some(lb.add(&Expansion::constant((-r).ln_1p()))), log_exact: false, exact: None }
            }
        }
        Some((_, c)) if c > 0.0 => Growth { exact: None, log_exact: false, ..a },
        Some(_) => Growth { exact: None, log_exact: false, ..b },
    };
    Some(out)
}

fn mul(a: Growth, b: Growth) -> Option<Growth> {
    if a.sign == Sign::Zero || b.sign == Sign::Zero {
        return Some(Growth::zero());
    }
    let sign = if a.sign == b.sign { Sign::Pos } else { Sign::Neg };
    let exact = match (&a.exact, &b.exact) {
        (Some(x), Some(y)) => Some(x.mul(y)),
        _ => None,
    };
    if let Some(e) = exact {
        return Some(Growth::from_exact(e));
    }
    Some(Growth { sign, log: Some(a.log?.add(&b.log?)), log_exact: a.log_exact && b.log_exact, exact: None })
}

fn recip(b: Growth) -> Option<Growth> {
    if b.sign == Sign::Zero {
        return None;
    }
    let exact = match b.exact.as_ref().map(|e| e.terms.as_slice()) {
        Some([(k, c)]) => Some(Expansion::monomial(k.scale(-1.0), 1.0 / c)),
        _ => None,
    };
    if let Some(e) = exact {
        return Some(Growth::from_exact(e));
    }
    Some(Growth { sign: b.sign, log: Some(b.log?.neg()), log_exact: b.log_exact, exact: None })
}

fn power(a: Growth, e: Growth) -> Option<Growth> {
    if let Some(v) = e.exact.as_ref().and_then(Expansion::as_constant) {
        return power_const(a, v);
    }
    // Varying exponent: a^e = exp(e · ln a) needs both factors exactly.
    if a.sign != Sign::Pos || !a.log_exact {
        return None;
    }
    let log = e.exact?.mul(a.log.as_ref()?);
    Some(exp_of(log))
}

fn power_const(a: Growth, v: f64) -> Option<Growth> {
    if v == 0.0 {
        return Some(Growth::constant(1.0));
    }
    let sign = match a.sign {
        Sign::Zero => return if v > 0.0 { Some(Growth::zero()) } else { None },
        Sign::Pos => Sign::Pos,
        Sign::Neg => {
            if v.fract() != 0.0 {
                return None;
            }
            if (v / 2.0).fract() != 0.0 {
                Sign::Neg
            } else {
                Sign::Pos
            }
        }
    };
    if let Some(s) = &a.exact {
        if let [(k, c)] = s.terms.as_slice() {
            let coeff = if *c < 0.0 && sign == Sign::Pos { c.abs().powf(v) } else { c.signum() * c.abs().powf(v) };
            return Some(Growth::from_exact(Expansion::monomial(k.scale(v), coeff)));
        }
        if v.fract() == 0.0 && (1.0..=8.0).contains(&v) {
            let mut out = s.clone();
            for _ in 1..(v as u32) {
                out = out.mul(s);
            }
            return Some(Growth::from_exact(out));
        }
    }
    Some(Growth { sign, log: Some(a.log?.scale(v)), log_exact: a.log_exact, exact: None })
}

fn exp_of(log: Expansion) -> Growth {
    match log.as_constant() {
        Some(c) => Growth::constant(c.exp()),
        None => Growth::positive_log(log, true),
    }
}

fn ln_of(a: Growth) -> Option<Growth> {
    if a.sign != Sign::Pos {
        return None;
    }
    let log = a.log?;
    if a.log_exact {
        return Some(Growth::from_exact(log));
    }
    Growth::from_approx(log.without_vanishing())
}

fn pick(a: Growth, b: Growth, want: Ordering) -> Option<Growth> {
    match compare(&a, &b) {
        Some(o) if o == want => Some(a),
        Some(Ordering::Equal) => Some(a),
        Some(_) => Some(b),
        // Equal up to o(1) in the log: either side describes the result.
        None if a.sign == b.sign && a.sign != Sign::Zero => Some(Growth { exact: None, log_exact: false, ..a }),
        None => None,
    }
}

/// Analyzes `node` as a function of `var`, with the other variables bound by `env`.
pub fn analyze(node: &Node, var: Var, env: &Env) -> Option<Growth> {
    let rec = |n: &Node| analyze(n, var, env);
    match node {
        Node::Num(v) => Some(Growth::constant(*v)),
        Node::Var(v) if *v == var => Some(Growth::from_exact(Expansion::monomial(Key::X, 1.0))),
        Node::Var(Var::I) => Some(Growth::constant(env.i)),
        Node::Var(Var::J) => env.j.map(Growth::constant),
        Node::Var(Var::K) => Some(Growth::constant(env.k)),
        Node::Neg(a) => Some(rec(a)?.neg()),
        Node::Add(a, b) => add(rec(a)?, rec(b)?),
        Node::Sub(a, b) => add(rec(a)?, rec(b)?.neg()),
        Node::Mul(a, b) => mul(rec(a)?, rec(b)?),
        Node::Div(a, b) => mul(rec(a)?, recip(rec(b)?)?),
        Node::Pow(a, e) => power(rec(a)?, rec(e)?),
        Node::Exp(a) => Some(exp_of(rec(a)?.exact?)),
        Node::Log(a) => ln_of(rec(a)?),
        Node::Sqrt(a) => power_const(rec(a)?, 0.5),
        Node::Min(a, b) => pick(rec(a)?, rec(b)?, Ordering::Less),
        Node::Max(a, b) => pick(rec(a)?, rec(b)?, Ordering::Greater),
        Node::If(p, a, b) => {
            if eventually(p, var, env)? {
                rec(a)
            } else {
                rec(b)
            }
        }
    }
}

/// Eventual truth value of a predicate.
pub fn eventually(p: &Pred, var: Var, env: &Env) -> Option<bool> {
    match p {
        Pred::Cmp(a, op, b) => {
            let o = compare(&analyze(a, var, env)?, &analyze(b, var, env)?)?;
            Some(op.holds(o))
        }
        Pred::And(a, b) => Some(eventually(a, var, env)? && eventually(b, var, env)?),
        Pred::Or(a, b) => Some(eventually(a, var, env)? || eventually(b, var, env)?),
    }
}

/// Limit of `num / den` in `var`.
pub fn ratio_limit(num: &Node, den: &Node, var: Var, env: &Env) -> Option<Limit> {
    let n = analyze(num, var, env)?;
    if n.sign == Sign::Zero {
        return Some(Limit::Zero);
    }
    let d = analyze(den, var, env)?;
    if d.sign == Sign::Zero {
        return (n.sign == Sign::Pos).then_some(Limit::Infinite);
    }
    mul(n, recip(d)?)?.limit()
}

/// Whether `Σ_var node` converges.
pub fn series_converges(node: &Node, var: Var, env: &Env) -> Option<bool> {
    analyze(node, var, env)?.series_converges()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_node;
    use proptest::prelude::*;

    fn env(k: f64) -> Env {
        Env { i: 0.0, j: None, k }
    }

    fn lim(num: &str, den: &str, k: f64) -> Option<Limit> {
        ratio_limit(&parse_node(num).unwrap(), &parse_node(den).unwrap(), Var::I, &env(k))
    }

    fn sums(e: &str, k: f64) -> Option<bool> {
        series_converges(&parse_node(e).unwrap(), Var::I, &env(k))
    }

    #[test]
    fn polynomial_against_exponential() {
        assert_eq!(lim("i^k", "2^i", 5.0), Some(Limit::Zero));
        assert_eq!(lim("k^i", "i^k", 3.0), Some(Limit::Infinite));
        assert_eq!(lim("i^k", "i^(2*k)", 2.0), Some(Limit::Zero));
        assert_eq!(lim("1", "i^k", 1.0), Some(Limit::Zero));
        assert_eq!(lim("i^k", "1", 1.0), Some(Limit::Infinite));
    }

    #[test]
    fn constant_ratios() {
        let Some(Limit::Finite(l)) = lim("3*i^2 + i", "i^2", 1.0) else { panic!() };
        assert!((l - 3f64.ln()).abs() < 1e-12);
        let Some(Limit::Finite(l)) = lim("(i+1)^k", "i^k", 4.0) else { panic!() };
        assert!(l.abs() < 1e-12);
        let Some(Limit::Finite(l)) = lim("(2*i)^3", "i^3", 1.0) else { panic!() };
        assert!((l - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn logarithmic_ratios() {
        assert_eq!(lim("log(i)", "log(k^i)", 3.0), Some(Limit::Zero));
        let Some(Limit::Finite(l)) = lim("log(i)", "log(i^k)", 4.0) else { panic!() };
        assert!((l - 0.25f64.ln()).abs() < 1e-12);
        assert_eq!(lim("log(i)", "log(log(i+1)^k)", 2.0), Some(Limit::Infinite));
    }

    #[test]
    fn piecewise_and_min() {
        assert_eq!(lim("if(i <= k, 2^i, i^k)", "i^(k+1)", 3.0), Some(Limit::Zero));
        assert_eq!(lim("min(i^k, 1)", "1", 2.0), Some(Limit::Finite(0.0)));
        assert_eq!(lim("max(i, 2^i)", "2^i", 1.0), Some(Limit::Finite(0.0)));
    }

    #[test]
    fn cancellation_is_unknown() {
        assert_eq!(lim("(i+1)^2 - i^2 - 2*i", "1", 1.0), Some(Limit::Finite(0.0)));
        assert_eq!(lim("sqrt(i+1) - sqrt(i)", "1", 1.0), None);
    }

    #[test]
    fn series_tests() {
        assert_eq!(sums("i^(-2)", 1.0), Some(true));
        assert_eq!(sums("1/i", 1.0), Some(false));
        assert_eq!(sums("1", 1.0), Some(false));
        assert_eq!(sums("2^(-i) * i^k", 7.0), Some(true));
        assert_eq!(sums("1/(i*log(i)^2)", 1.0), Some(true));
        assert_eq!(sums("1/(i*log(i))", 1.0), Some(false));
        assert_eq!(sums("1/(i*log(i)*log(log(i))^2)", 1.0), Some(true));
        assert_eq!(sums("exp(-sqrt(i))", 1.0), Some(true));
        assert_eq!(sums("exp(-log(i)^(1/2))", 1.0), Some(false));
        assert_eq!(sums("(log(i+1))^k / (log(i+1))^(k+3)", 2.0), Some(false));
        assert_eq!(sums("(0.5*k/(k+1))^i", 9.0), Some(true));
        assert_eq!(sums("i^k / i^(k+2)", 3.0), Some(true));
    }

    #[test]
    fn varying_exponent_needs_exact_parts() {
        // (ln x)^{ln ln x} decays slower than any power once inverted
        assert_eq!(sums("log(i)^(-log(log(i)))", 1.0), Some(false));
        assert_eq!(sums("i^(-log(i))", 1.0), Some(true));
        assert_eq!(lim("2^(k^i)", "1", 2.0), None);
    }

    proptest! {
        // Against the textbook p-series / power comparison.
        #[test]
        fn monomial_ratio_matches_exponent_sign(a in -5i32..5, b in -5i32..5, c in 1u32..9) {
            let num = alloc::format!("{c}*i^{a}");
            let den = alloc::format!("i^{b}");
            let got = lim(&num, &den, 1.0).unwrap();
            let want = match a.cmp(&b) {
                Ordering::Less => Limit::Zero,
                Ordering::Greater => Limit::Infinite,
                Ordering::Equal => Limit::Finite((c as f64).ln()),
            };
            prop_assert_eq!(got, want);
        }

        #[test]
        fn p_series_threshold(num in -40i32..40, den in 1i32..8) {
            let p = num as f64 / den as f64;
            let got = sums(&alloc::format!("i^({num}/{den})"), 1.0).unwrap();
            prop_assert_eq!(got, p < -1.0);
        }

        #[test]
        fn geometric_threshold(r in 0.01f64..3.0) {
            let got = sums(&alloc::format!("{r}^i"), 1.0).unwrap();
            prop_assert_eq!(got, r < 1.0);
        }
    }
}
