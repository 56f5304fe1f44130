//! A small arithmetic expression language for config-driven analytic fields.
//!
//! Grammar (documented in the README):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?          // right associative
//! atom   := number | var | const | func '(' expr ')' | '(' expr ')'
//! var    := 'x' | 'y' | 'z' | 't'
//! const  := 'pi'
//! func   := 'exp' | 'log' | 'sin' | 'cos' | 'sqrt' | 'step'
//! ```
//!
//! `step(u)` is 1 for u >= 0 and 0 otherwise; products of steps express the
//! indicator data used in box-supported initial conditions and fixed charges.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize), // 0..2 -> x,y,z; 3 -> t
    Pi,
    Func(Func),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Step,
}

impl Func {
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Sqrt => v.sqrt(),
            Func::Step => {
                if v >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression in the variables x, y, z, t.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    /// Parse an expression string.
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = tokenize(src)?;
        let mut p = Parser { toks, pos: 0, src };
        let root = p.expr()?;
        if p.peek() != Tok::End {
            return Err(Error::Expr(format!(
                "trailing input after expression in `{src}`"
            )));
        }
        Ok(Expr {
            root,
            source: src.to_string(),
        })
    }

    /// Evaluate at a point. Coordinates beyond the grid dimension are 0.
    pub fn eval(&self, x: [f64; 3], t: f64) -> f64 {
        eval_node(&self.root, &[x[0], x[1], x[2], t])
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

fn eval_node(n: &Node, vars: &[f64; 4]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(i) => vars[*i],
        Node::Neg(a) => -eval_node(a, vars),
        Node::Add(a, b) => eval_node(a, vars) + eval_node(b, vars),
        Node::Sub(a, b) => eval_node(a, vars) - eval_node(b, vars),
        Node::Mul(a, b) => eval_node(a, vars) * eval_node(b, vars),
        Node::Div(a, b) => eval_node(a, vars) / eval_node(b, vars),
        Node::Pow(a, b) => eval_node(a, vars).powf(eval_node(b, vars)),
        Node::Call(f, a) => f.apply(eval_node(a, vars)),
    }
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // exponent part
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad number `{text}` in `{src}`")))?;
                out.push(Tok::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                let name = &src[start..i];
                let tok = match name {
                    "x" => Tok::Var(0),
                    "y" => Tok::Var(1),
                    "z" => Tok::Var(2),
                    "t" => Tok::Var(3),
                    "pi" => Tok::Pi,
                    "exp" => Tok::Func(Func::Exp),
                    "log" => Tok::Func(Func::Log),
                    "sin" => Tok::Func(Func::Sin),
                    "cos" => Tok::Func(Func::Cos),
                    "sqrt" => Tok::Func(Func::Sqrt),
                    "step" => Tok::Func(Func::Step),
                    _ => {
                        return Err(Error::Expr(format!(
                            "unknown identifier `{name}` in `{src}`"
                        )))
                    }
                };
                out.push(tok);
            }
            _ => {
                return Err(Error::Expr(format!(
                    "unexpected character `{c}` at byte {i} in `{src}`"
                )))
            }
        }
    }
    out.push(Tok::End);
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Tok {
        self.toks[self.pos]
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos];
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(Error::Expr(format!("expected {what} in `{}`", self.src)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Node> {
        if self.peek() == Tok::Minus {
            self.bump();
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.bump() {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Var(i) => Ok(Node::Var(i)),
            Tok::Pi => Ok(Node::Num(std::f64::consts::PI)),
            Tok::Func(f) => {
                self.expect(Tok::LParen, "`(` after function name")?;
                let arg = self.expr()?;
                self.expect(Tok::RParen, "closing `)`")?;
                Ok(Node::Call(f, Box::new(arg)))
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "closing `)`")?;
                Ok(inner)
            }
            _ => Err(Error::Expr(format!(
                "expected a value in `{}`",
                self.src
            ))),
        }
    }
}
