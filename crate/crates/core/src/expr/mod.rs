//! Closed-form weight expressions in the index variables `i`, `j` and the level `k`.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 'i' | 'j' | 'k' | '(' expr ')'
//!          | ('log' | 'exp' | 'sqrt') '(' expr ')'
//!          | ('min' | 'max') '(' expr ',' expr ')'
//!          | 'if' '(' pred ',' expr ',' expr ')'
//! pred    := cmp (('and' | 'or') cmp)*
//! cmp     := expr ('<' | '<=' | '>' | '>=' | '==' | '!=') expr
//! ```
//!
//! `^` is right-associative. `and` binds tighter than `or`.

mod eval;
mod parse;

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use core::fmt;

use serde::{Deserialize, Serialize};

pub use eval::{Env, EvalError, Signed};
pub use parse::ParseError;

use crate::index::{Index, IndexSet};
use crate::logvalue::LogValue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    I,
    J,
    K,
}

impl Var {
    fn name(self) -> char {
        match self {
            Var::I => 'i',
            Var::J => 'j',
            Var::K => 'k',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn holds(self, ord: core::cmp::Ordering) -> bool {
        use core::cmp::Ordering::*;
        match self {
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pred {
    Cmp(Box<Node>, CmpOp, Box<Node>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Exp(Box<Node>),
    Log(Box<Node>),
    Sqrt(Box<Node>),
    Min(Box<Node>, Box<Node>),
    Max(Box<Node>, Box<Node>),
    If(Box<Pred>, Box<Node>, Box<Node>),
}

impl Node {
    pub fn num(x: f64) -> Node {
        Node::Num(x)
    }

    pub fn var(v: Var) -> Node {
        Node::Var(v)
    }

    pub fn mul(a: Node, b: Node) -> Node {
        Node::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Node, b: Node) -> Node {
        Node::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Node, b: Node) -> Node {
        Node::Pow(Box::new(a), Box::new(b))
    }

    pub fn min(a: Node, b: Node) -> Node {
        Node::Min(Box::new(a), Box::new(b))
    }

    pub fn max(a: Node, b: Node) -> Node {
        Node::Max(Box::new(a), Box::new(b))
    }

    pub fn log(a: Node) -> Node {
        Node::Log(Box::new(a))
    }

    /// Whether `v` occurs anywhere in the tree.
    pub fn uses(&self, v: Var) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(w) => *w == v,
            Node::Neg(a) | Node::Exp(a) | Node::Log(a) | Node::Sqrt(a) => a.uses(v),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b)
            | Node::Min(a, b)
            | Node::Max(a, b) => a.uses(v) || b.uses(v),
            Node::If(p, a, b) => p.uses(v) || a.uses(v) || b.uses(v),
        }
    }

    /// Replaces every occurrence of `v` by the constant `value`.
    pub fn substitute(&self, v: Var, value: f64) -> Node {
        let s = |n: &Node| Box::new(n.substitute(v, value));
        match self {
            Node::Num(x) => Node::Num(*x),
            Node::Var(w) if *w == v => Node::Num(value),
            Node::Var(w) => Node::Var(*w),
            Node::Neg(a) => Node::Neg(s(a)),
            Node::Exp(a) => Node::Exp(s(a)),
            Node::Log(a) => Node::Log(s(a)),
            Node::Sqrt(a) => Node::Sqrt(s(a)),
            Node::Add(a, b) => Node::Add(s(a), s(b)),
            Node::Sub(a, b) => Node::Sub(s(a), s(b)),
            Node::Mul(a, b) => Node::Mul(s(a), s(b)),
            Node::Div(a, b) => Node::Div(s(a), s(b)),
            Node::Pow(a, b) => Node::Pow(s(a), s(b)),
            Node::Min(a, b) => Node::Min(s(a), s(b)),
            Node::Max(a, b) => Node::Max(s(a), s(b)),
            Node::If(p, a, b) => Node::If(Box::new(p.substitute(v, value)), s(a), s(b)),
        }
    }

    /// Replaces variable-free subtrees by their value when it fits in an `f64`.
    pub fn fold(&self) -> Node {
        let f = |n: &Node| Box::new(n.fold());
        let folded = match self {
            Node::Num(_) | Node::Var(_) => return self.clone(),
            Node::Neg(a) => Node::Neg(f(a)),
            Node::Exp(a) => Node::Exp(f(a)),
            Node::Log(a) => Node::Log(f(a)),
            Node::Sqrt(a) => Node::Sqrt(f(a)),
            Node::Add(a, b) => Node::Add(f(a), f(b)),
            Node::Sub(a, b) => Node::Sub(f(a), f(b)),
            Node::Mul(a, b) => Node::Mul(f(a), f(b)),
            Node::Div(a, b) => Node::Div(f(a), f(b)),
            Node::Pow(a, b) => Node::Pow(f(a), f(b)),
            Node::Min(a, b) => Node::Min(f(a), f(b)),
            Node::Max(a, b) => Node::Max(f(a), f(b)),
            Node::If(p, a, b) => Node::If(p.clone(), f(a), f(b)),
        };
        if [Var::I, Var::J, Var::K].iter().any(|&v| folded.uses(v)) {
            return folded;
        }
        let env = Env { i: 0.0, j: None, k: 0.0 };
        match eval::eval(&folded, &env) {
            Ok(v) if v.to_f64().is_finite() && (v.to_f64() != 0.0 || v.magnitude().is_zero()) => {
                Node::Num(v.to_f64())
            }
            _ => folded,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(..) => 3,
            Node::Pow(..) => 4,
            Node::Num(x) if *x < 0.0 => 3,
            _ => 5,
        }
    }
}

impl Pred {
    pub fn uses(&self, v: Var) -> bool {
        match self {
            Pred::Cmp(a, _, b) => a.uses(v) || b.uses(v),
            Pred::And(a, b) | Pred::Or(a, b) => a.uses(v) || b.uses(v),
        }
    }

    pub fn substitute(&self, v: Var, value: f64) -> Pred {
        match self {
            Pred::Cmp(a, op, b) => {
                Pred::Cmp(Box::new(a.substitute(v, value)), *op, Box::new(b.substitute(v, value)))
            }
            Pred::And(a, b) => {
                Pred::And(Box::new(a.substitute(v, value)), Box::new(b.substitute(v, value)))
            }
            Pred::Or(a, b) => {
                Pred::Or(Box::new(a.substitute(v, value)), Box::new(b.substitute(v, value)))
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, n: &Node, min_prec: u8) -> fmt::Result {
    if n.precedence() < min_prec {
        write!(f, "({n})")
    } else {
        write!(f, "{n}")
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(x) => {
                if *x < 0.0 {
                    write!(f, "-{}", -x)
                } else {
                    write!(f, "{x}")
                }
            }
            Node::Var(v) => write!(f, "{}", v.name()),
            Node::Neg(a) => {
                write!(f, "-")?;
                write_operand(f, a, 4)
            }
            Node::Add(a, b) | Node::Sub(a, b) => {
                let op = if matches!(self, Node::Add(..)) { "+" } else { "-" };
                write_operand(f, a, 1)?;
                write!(f, " {op} ")?;
                write_operand(f, b, 2)
            }
            Node::Mul(a, b) | Node::Div(a, b) => {
                let op = if matches!(self, Node::Mul(..)) { "*" } else { "/" };
                write_operand(f, a, 2)?;
                write!(f, "{op}")?;
                write_operand(f, b, 3)
            }
            Node::Pow(a, b) => {
                write_operand(f, a, 5)?;
                write!(f, "^")?;
                write_operand(f, b, 4)
            }
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Log(a) => write!(f, "log({a})"),
            Node::Sqrt(a) => write!(f, "sqrt({a})"),
            Node::Min(a, b) => write!(f, "min({a}, {b})"),
            Node::Max(a, b) => write!(f, "max({a}, {b})"),
            Node::If(p, a, b) => write!(f, "if({p}, {a}, {b})"),
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::Cmp(a, op, b) => write!(f, "{a} {} {b}", op.symbol()),
            Pred::And(a, b) => write!(f, "{a} and {b}"),
            Pred::Or(a, b) => write!(f, "{a} or {b}"),
        }
    }
}

/// Errors from [`parse_weight_expr`].
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DslError {
    #[error("syntax error at byte {}: {}", .0.position, .0.message)]
    Syntax(ParseError),
    #[error("expression is negative at k = {k}, index {index}")]
    Negative { k: u64, index: Index },
    #[error("expression is undefined at k = {k}, index {index}: {source}")]
    Undefined { k: u64, index: Index, source: EvalError },
}

/// Levels and prefix used to reject expressions that go negative.
pub const VALIDATION_LEVELS: u64 = 8;
pub const VALIDATION_PREFIX: usize = 64;

/// A validated weight expression: nonnegative on the sampled prefix, variables among `i`, `j`, `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct WeightExpr {
    root: Node,
}

impl WeightExpr {
    /// Wraps a tree built in code. The caller vouches for nonnegativity.
    pub fn from_node(root: Node) -> WeightExpr {
        WeightExpr { root }
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn uses(&self, v: Var) -> bool {
        self.root.uses(v)
    }

    /// Fixes the level variable.
    pub fn at_level(&self, k: u64) -> WeightExpr {
        WeightExpr { root: self.root.substitute(Var::K, k as f64).fold() }
    }

    /// The index set this expression is naturally sampled on.
    pub fn natural_index_set(&self) -> IndexSet {
        if self.uses(Var::J) {
            IndexSet::NaturalPairs
        } else {
            IndexSet::Naturals
        }
    }

    /// Signed evaluation (intermediate forms of a weight may be negative).
    pub fn eval_signed(&self, env: &Env) -> Result<Signed, EvalError> {
        eval::eval(&self.root, env)
    }

    /// Evaluates the weight at level `k`, index `idx`.
    pub fn eval(&self, k: u64, idx: Index) -> Result<LogValue, EvalError> {
        let env = Env::at(k, idx);
        let v = eval::eval(&self.root, &env)?;
        if v.is_negative() {
            Err(EvalError::Negative)
        } else {
            Ok(v.magnitude())
        }
    }

    /// Checks nonnegativity on levels `1..=VALIDATION_LEVELS` and the first
    /// [`VALIDATION_PREFIX`] indices of `index_set`.
    pub fn validate_on(&self, index_set: IndexSet) -> Result<(), DslError> {
        for k in 1..=VALIDATION_LEVELS {
            for idx in index_set.prefix(VALIDATION_PREFIX) {
                match self.eval(k, idx) {
                    Ok(_) => {}
                    Err(EvalError::Negative) => return Err(DslError::Negative { k, index: idx }),
                    Err(source) => return Err(DslError::Undefined { k, index: idx, source }),
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for WeightExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl From<WeightExpr> for String {
    fn from(e: WeightExpr) -> String {
        e.to_string()
    }
}

impl TryFrom<String> for WeightExpr {
    type Error = DslError;

    fn try_from(s: String) -> Result<WeightExpr, DslError> {
        parse_weight_expr(&s)
    }
}

/// Parses and validates a weight expression.
pub fn parse_weight_expr(text: &str) -> Result<WeightExpr, DslError> {
    let root = parse::parse(text).map_err(DslError::Syntax)?;
    let expr = WeightExpr { root };
    expr.validate_on(expr.natural_index_set())?;
    Ok(expr)
}

/// Parses without the nonnegativity check (for sub-expressions such as exponents).
pub fn parse_node(text: &str) -> Result<Node, ParseError> {
    parse::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn val(e: &WeightExpr, k: u64, i: u64) -> f64 {
        e.eval(k, Index::Single(i)).unwrap().value()
    }

    #[test]
    fn catalog_expressions() {
        let s = parse_weight_expr("i^k").unwrap();
        assert!((val(&s, 2, 3) - 9.0).abs() < 1e-12);
        let entire = parse_weight_expr("k^i").unwrap();
        assert!((entire.eval(3, Index::Single(4)).unwrap().ln() - 4.0 * 3f64.ln()).abs() < 1e-12);
        let inv = parse_weight_expr("i^(-1)").unwrap();
        assert!((val(&inv, 1, 4) - 0.25).abs() < 1e-15);
        assert!(matches!(parse_weight_expr("0 - i"), Err(DslError::Negative { .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_weight_expr("1 + 2*3^2^1").unwrap();
        assert!((val(&e, 1, 1) - 19.0).abs() < 1e-12);
        let e = parse_weight_expr("2^-i").unwrap();
        assert!((val(&e, 1, 3) - 0.125).abs() < 1e-15);
        let e = parse_weight_expr("-i^2 + 2*i^2").unwrap();
        assert!((val(&e, 1, 3) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_matrix_weight() {
        let e = parse_weight_expr("if(i <= k, 2^((k*j)^i)*(i+j)^k, (i+j)^k)").unwrap();
        assert_eq!(e.natural_index_set(), IndexSet::NaturalPairs);
        let v = e.eval(1, Index::Pair(1, 1)).unwrap().value();
        assert!((v - 4.0).abs() < 1e-12);
        let v = e.eval(2, Index::Pair(3, 1)).unwrap().ln();
        assert!((v - 2.0 * 4f64.ln()).abs() < 1e-12);
        // overflow-free in log domain
        let v = e.eval(8, Index::Pair(8, 8)).unwrap().ln();
        assert!((v - (64f64.powi(8) * 2f64.ln() + 8.0 * 16f64.ln())).abs() < 1e-3 * v);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_weight_expr("i + * 2") {
            Err(DslError::Syntax(e)) => assert_eq!(e.position, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_weight_expr("x"), Err(DslError::Syntax(_))));
        assert!(matches!(parse_weight_expr("min(i)"), Err(DslError::Syntax(_))));
        assert!(matches!(parse_weight_expr("(i"), Err(DslError::Syntax(_))));
        assert!(matches!(parse_weight_expr("i j"), Err(DslError::Syntax(_))));
    }

    #[test]
    fn log_of_zero_is_rejected_when_it_goes_negative() {
        assert!(parse_weight_expr("log(i/2)").is_err());
        assert!(parse_weight_expr("log(i)").is_ok());
        assert!(parse_weight_expr("log(i+1)").is_ok());
    }

    fn arb_node() -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0u32..50).prop_map(|x| Node::Num(x as f64 / 4.0)),
            Just(Node::Var(Var::I)),
            Just(Node::Var(Var::K)),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::mul(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::div(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::pow(a, b)),
                inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
                inner.clone().prop_map(|a| Node::Exp(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::min(a, b)),
                (inner.clone(), inner.clone(), inner.clone()).prop_map(|(a, b, c)| Node::If(
                    Box::new(Pred::Cmp(Box::new(a), CmpOp::Le, Box::new(b))),
                    Box::new(c.clone()),
                    Box::new(c)
                )),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trips(node in arb_node()) {
            let text = node.to_string();
            let back = parse_node(&text).unwrap();
            // Same value everywhere we sample, including errors.
            for k in 1..4u64 {
                for i in 1..6u64 {
                    let env = Env::at(k, Index::Single(i));
                    let (a, b) = (eval::eval(&node, &env), eval::eval(&back, &env));
                    prop_assert_eq!(a.is_ok(), b.is_ok());
                    if let (Ok(a), Ok(b)) = (a, b) {
                        prop_assert_eq!(a.is_negative(), b.is_negative());
                        let (la, lb) = (a.magnitude().ln(), b.magnitude().ln());
                        prop_assert!(la == lb || (la - lb).abs() <= 1e-9 * (1.0 + la.abs()));
                    }
                }
            }
        }
    }
}
