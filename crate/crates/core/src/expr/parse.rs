use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{CmpOp, Node, Pred, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the source.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: {}", self.position, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

struct Lexed {
    tok: Tok,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let c = bytes[p];
        let start = p;
        if c.is_ascii_whitespace() {
            p += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(p + 1).is_some_and(u8::is_ascii_digit)) {
            while p < bytes.len() && (bytes[p].is_ascii_digit() || bytes[p] == b'.') {
                p += 1;
            }
            if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
                let mut q = p + 1;
                if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                    q += 1;
                }
                if q < bytes.len() && bytes[q].is_ascii_digit() {
                    while q < bytes.len() && bytes[q].is_ascii_digit() {
                        q += 1;
                    }
                    p = q;
                }
            }
            let text = &src[start..p];
            let v: f64 = text.parse().map_err(|_| ParseError {
                position: start,
                message: alloc::format!("malformed number `{text}`"),
            })?;
            out.push(Lexed { tok: Tok::Num(v), pos: start });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while p < bytes.len() && (bytes[p].is_ascii_alphanumeric() || bytes[p] == b'_') {
                p += 1;
            }
            out.push(Lexed { tok: Tok::Ident(src[start..p].to_string()), pos: start });
            continue;
        }
        let two = if p + 1 < bytes.len() { &src[p..p + 2] } else { "" };
        let tok = match two {
            "<=" => Some(Tok::Op("<=")),
            ">=" => Some(Tok::Op(">=")),
            "==" => Some(Tok::Op("==")),
            "!=" => Some(Tok::Op("!=")),
            _ => None,
        };
        if let Some(tok) = tok {
            out.push(Lexed { tok, pos: start });
            p += 2;
            continue;
        }
        let tok = match c {
            b'+' => Tok::Op("+"),
            b'-' => Tok::Op("-"),
            b'*' => Tok::Op("*"),
            b'/' => Tok::Op("/"),
            b'^' => Tok::Op("^"),
            b'<' => Tok::Op("<"),
            b'>' => Tok::Op(">"),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            _ => {
                let ch = src[p..].chars().next().unwrap_or('?');
                return Err(ParseError { position: p, message: alloc::format!("unexpected character `{ch}`") });
            }
        };
        out.push(Lexed { tok, pos: start });
        p += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    at: usize,
    end: usize,
}

pub(crate) fn parse(src: &str) -> Result<Node, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, at: 0, end: src.len() };
    let node = p.expr()?;
    if p.at < p.toks.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(node)
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|l| &l.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |l| l.pos)
    }

    fn error(&self, message: &str) -> ParseError {
        ParseError { position: self.pos(), message: message.to_string() }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Op(o)) if *o == op) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.error(&alloc::format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat_op("+") {
                lhs = Node::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat_op("-") {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op("*") {
                lhs = Node::mul(lhs, self.unary()?);
            } else if self.eat_op("/") {
                lhs = Node::div(lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat_op("-") {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat_op("^") {
            let expo = self.unary()?;
            return Ok(Node::pow(base, expo));
        }
        Ok(base)
    }

    fn args(&mut self, n: usize) -> Result<Vec<Node>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut out = Vec::with_capacity(n);
        for a in 0..n {
            if a > 0 {
                self.expect(Tok::Comma, "`,`")?;
            }
            out.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(out)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let start = self.pos();
        let tok = match self.toks.get(self.at) {
            Some(l) => l.tok.clone(),
            None => return Err(self.error("unexpected end of input")),
        };
        self.at += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "i" => Ok(Node::Var(Var::I)),
                "j" => Ok(Node::Var(Var::J)),
                "k" => Ok(Node::Var(Var::K)),
                "log" | "exp" | "sqrt" => {
                    let a = self.args(1)?.pop().unwrap();
                    Ok(match name.as_str() {
                        "log" => Node::Log(Box::new(a)),
                        "exp" => Node::Exp(Box::new(a)),
                        _ => Node::Sqrt(Box::new(a)),
                    })
                }
                "min" | "max" => {
                    let mut a = self.args(2)?;
                    let (y, x) = (a.pop().unwrap(), a.pop().unwrap());
                    Ok(if name == "min" { Node::min(x, y) } else { Node::max(x, y) })
                }
                "if" => {
                    self.expect(Tok::LParen, "`(`")?;
                    let p = self.pred()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let a = self.expr()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let b = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Node::If(Box::new(p), Box::new(a), Box::new(b)))
                }
                other => Err(ParseError { position: start, message: alloc::format!("unknown identifier `{other}`") }),
            },
            _ => {
                self.at -= 1;
                Err(self.error("expected a number, variable, function or `(`"))
            }
        }
    }

    fn pred(&mut self) -> Result<Pred, ParseError> {
        let mut lhs = self.conj()?;
        while matches!(self.peek(), Some(Tok::Ident(s)) if s == "or") {
            self.at += 1;
            lhs = Pred::Or(Box::new(lhs), Box::new(self.conj()?));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Pred, ParseError> {
        let mut lhs = self.cmp()?;
        while matches!(self.peek(), Some(Tok::Ident(s)) if s == "and") {
            self.at += 1;
            lhs = Pred::And(Box::new(lhs), Box::new(self.cmp()?));
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<Pred, ParseError> {
        let a = self.expr()?;
        let op = match self.peek() {
            Some(Tok::Op("<")) => CmpOp::Lt,
            Some(Tok::Op("<=")) => CmpOp::Le,
            Some(Tok::Op(">")) => CmpOp::Gt,
            Some(Tok::Op(">=")) => CmpOp::Ge,
            Some(Tok::Op("==")) => CmpOp::Eq,
            Some(Tok::Op("!=")) => CmpOp::Ne,
            _ => return Err(self.error("expected a comparison operator")),
        };
        self.at += 1;
        let b = self.expr()?;
        Ok(Pred::Cmp(Box::new(a), op, Box::new(b)))
    }
}
