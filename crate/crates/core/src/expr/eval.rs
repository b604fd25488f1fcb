#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use core::cmp::Ordering;


use super::{Node, Pred, Var};
use crate::index::Index;
use crate::logvalue::LogValue;

/// Variable bindings for evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Env {
    pub i: f64,
    pub j: Option<f64>,
    pub k: f64,
}

impl Env {
    pub fn at(k: u64, idx: Index) -> Env {
        Env { i: idx.i() as f64, j: idx.j().map(|j| j as f64), k: k as f64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("variable j is not bound on this index set")]
    UnboundJ,
    #[error("non-integer power of a negative number")]
    NegativeBase,
    #[error("logarithm of a negative number")]
    NegativeLog,
    #[error("indeterminate form")]
    Indeterminate,
    #[error("negative weight value")]
    Negative,
}

/// A signed extended real: sign flag plus log-magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Signed {
    neg: bool,
    mag: LogValue,
}

impl Signed {
    pub const ZERO: Signed = Signed { neg: false, mag: LogValue::ZERO };

    pub fn positive(mag: LogValue) -> Signed {
        Signed { neg: false, mag }
    }

    pub fn from_f64(x: f64) -> Signed {
        Signed { neg: x < 0.0, mag: LogValue::from_value(x.abs()).unwrap_or(LogValue::ZERO) }
    }

    pub fn is_negative(self) -> bool {
        self.neg && !self.mag.is_zero()
    }

    pub fn magnitude(self) -> LogValue {
        self.mag
    }

    pub fn to_f64(self) -> f64 {
        let v = self.mag.value();
        if self.neg {
            -v
        } else {
            v
        }
    }

    fn negate(self) -> Signed {
        if self.mag.is_zero() {
            self
        } else {
            Signed { neg: !self.neg, mag: self.mag }
        }
    }

    fn add(self, other: Signed) -> Result<Signed, EvalError> {
        if self.neg == other.neg || self.mag.is_zero() || other.mag.is_zero() {
            let neg = if self.mag.is_zero() { other.neg } else { self.neg };
            return Ok(Signed { neg, mag: self.mag.add(other.mag) });
        }
        match self.mag.total_cmp(&other.mag) {
            Ordering::Equal if self.mag.is_infinite() => Err(EvalError::Indeterminate),
            Ordering::Equal => Ok(Signed::ZERO),
            Ordering::Greater => {
                Ok(Signed { neg: self.neg, mag: self.mag.checked_sub(other.mag).unwrap_or(LogValue::ZERO) })
            }
            Ordering::Less => {
                Ok(Signed { neg: other.neg, mag: other.mag.checked_sub(self.mag).unwrap_or(LogValue::ZERO) })
            }
        }
    }

    fn mul(self, other: Signed) -> Signed {
        Signed { neg: self.neg != other.neg, mag: self.mag * other.mag }.normalized()
    }

    fn div(self, other: Signed) -> Signed {
        Signed { neg: self.neg != other.neg, mag: self.mag / other.mag }.normalized()
    }

    fn normalized(self) -> Signed {
        if self.mag.is_zero() {
            Signed::ZERO
        } else {
            self
        }
    }

    pub fn cmp(self, other: Signed) -> Ordering {
        let (a, b) = (self.normalized(), other.normalized());
        match (a.neg, b.neg) {
            (false, true) => Ordering::Greater,
            (true, false) => Ordering::Less,
            (false, false) => a.mag.total_cmp(&b.mag),
            (true, true) => b.mag.total_cmp(&a.mag),
        }
    }
}

pub(crate) fn eval(node: &Node, env: &Env) -> Result<Signed, EvalError> {
    Ok(match node {
        Node::Num(x) => Signed::from_f64(*x),
        Node::Var(Var::I) => Signed::from_f64(env.i),
        Node::Var(Var::J) => Signed::from_f64(env.j.ok_or(EvalError::UnboundJ)?),
        Node::Var(Var::K) => Signed::from_f64(env.k),
        Node::Neg(a) => eval(a, env)?.negate(),
        Node::Add(a, b) => eval(a, env)?.add(eval(b, env)?)?,
        Node::Sub(a, b) => eval(a, env)?.add(eval(b, env)?.negate())?,
        Node::Mul(a, b) => eval(a, env)?.mul(eval(b, env)?),
        Node::Div(a, b) => eval(a, env)?.div(eval(b, env)?),
        Node::Pow(a, b) => power(eval(a, env)?, eval(b, env)?)?,
        Node::Exp(a) => {
            let x = eval(a, env)?;
            Signed::positive(LogValue::from_log(x.to_f64()))
        }
        Node::Log(a) => {
            let x = eval(a, env)?;
            if x.is_negative() {
                return Err(EvalError::NegativeLog);
            }
            Signed::from_f64(x.mag.ln())
        }
        Node::Sqrt(a) => {
            let x = eval(a, env)?;
            if x.is_negative() {
                return Err(EvalError::NegativeBase);
            }
            Signed::positive(x.mag.sqrt())
        }
        Node::Min(a, b) => {
            let (x, y) = (eval(a, env)?, eval(b, env)?);
            if y.cmp(x) == Ordering::Less {
                y
            } else {
                x
            }
        }
        Node::Max(a, b) => {
            let (x, y) = (eval(a, env)?, eval(b, env)?);
            if y.cmp(x) == Ordering::Greater {
                y
            } else {
                x
            }
        }
        Node::If(p, a, b) => {
            if eval_pred(p, env)? {
                eval(a, env)?
            } else {
                eval(b, env)?
            }
        }
    })
}

pub(crate) fn eval_pred(p: &Pred, env: &Env) -> Result<bool, EvalError> {
    Ok(match p {
        Pred::Cmp(a, op, b) => op.holds(eval(a, env)?.cmp(eval(b, env)?)),
        Pred::And(a, b) => eval_pred(a, env)? && eval_pred(b, env)?,
        Pred::Or(a, b) => eval_pred(a, env)? || eval_pred(b, env)?,
    })
}

fn power(base: Signed, expo: Signed) -> Result<Signed, EvalError> {
    let e = expo.to_f64();
    if e == 0.0 {
        return Ok(Signed::positive(LogValue::ONE));
    }
    if base.mag.is_zero() {
        return Ok(if e > 0.0 { Signed::ZERO } else { Signed::positive(LogValue::INFINITY) });
    }
    // 1^e = 1 even for infinite e
    if base.mag == LogValue::ONE && !base.neg {
        return Ok(Signed::positive(LogValue::ONE));
    }
    let mag = base.mag.powf(e);
    if !base.neg {
        return Ok(Signed::positive(mag));
    }
    if !e.is_finite() || e.fract() != 0.0 {
        return Err(EvalError::NegativeBase);
    }
    let odd = (e / 2.0).fract() != 0.0;
    Ok(Signed { neg: odd, mag }.normalized())
}
