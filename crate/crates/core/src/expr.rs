//! Coefficient expressions.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := number | ident | func '(' expr ')' | '(' expr ')' | '-' factor
//! func   := sin | cos | exp | frac | step
//! ```
//!
//! Identifiers come from a fixed variable set chosen by the caller:
//! [`COEFF_VARS`] for material and profile fields, [`CHART_VARS`] for
//! parametrized charts and immersions.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Variables of coefficient fields: macroscopic point, fast cells, thickness.
pub const COEFF_VARS: &[&str] = &["x1", "x2", "y1", "y2", "z1", "z2", "t"];
/// Variables of chart / immersion expressions (parameter coordinates).
pub const CHART_VARS: &[&str] = &["u", "v"];

pub const X1: usize = 0;
pub const X2: usize = 1;
pub const Y1: usize = 2;
pub const Y2: usize = 3;
pub const Z1: usize = 4;
pub const Z2: usize = 5;
pub const T: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {position}: expected {}", expected.join(" | "))]
    Syntax { position: usize, expected: Vec<String> },
    #[error("unknown identifier `{name}` at {position}")]
    UnknownIdentifier { name: String, position: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Frac,
    Step,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Frac => "frac",
            Func::Step => "step",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "frac" => Func::Frac,
            "step" => Func::Step,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn eval(&self, vars: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Node::Num(v) => *v,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars)?,
            Node::Add(a, b) => a.eval(vars)? + b.eval(vars)?,
            Node::Sub(a, b) => a.eval(vars)? - b.eval(vars)?,
            Node::Mul(a, b) => a.eval(vars)? * b.eval(vars)?,
            Node::Div(a, b) => {
                let d = b.eval(vars)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(vars)? / d
            }
            Node::Call(f, a) => {
                let x = a.eval(vars)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Frac => x - x.floor(),
                    Func::Step => {
                        if x >= 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        })
    }

    fn uses(&self, var: usize) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(i) => *i == var,
            Node::Neg(a) | Node::Call(_, a) => a.uses(var),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.uses(var) || b.uses(var)
            }
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Node::Num(v) if *v == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Node::Num(v) if *v == 1.0)
    }

    // Smart constructors with constant folding, so derivatives stay small.
    fn add(a: Node, b: Node) -> Node {
        match (a, b) {
            (a, b) if a.is_zero() => b,
            (a, b) if b.is_zero() => a,
            (Node::Num(x), Node::Num(y)) => Node::Num(x + y),
            (a, b) => Node::Add(Box::new(a), Box::new(b)),
        }
    }

    fn sub(a: Node, b: Node) -> Node {
        match (a, b) {
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => Node::neg(b),
            (Node::Num(x), Node::Num(y)) => Node::Num(x - y),
            (a, b) => Node::Sub(Box::new(a), Box::new(b)),
        }
    }

    fn mul(a: Node, b: Node) -> Node {
        match (a, b) {
            (a, b) if a.is_zero() || b.is_zero() => Node::Num(0.0),
            (a, b) if a.is_one() => b,
            (a, b) if b.is_one() => a,
            (Node::Num(x), Node::Num(y)) => Node::Num(x * y),
            (a, b) => Node::Mul(Box::new(a), Box::new(b)),
        }
    }

    fn div(a: Node, b: Node) -> Node {
        match (a, b) {
            (a, _) if a.is_zero() => Node::Num(0.0),
            (a, b) if b.is_one() => a,
            (a, b) => Node::Div(Box::new(a), Box::new(b)),
        }
    }

    fn neg(a: Node) -> Node {
        match a {
            Node::Num(x) => Node::Num(-x),
            Node::Neg(inner) => *inner,
            a => Node::Neg(Box::new(a)),
        }
    }

    fn call(f: Func, a: Node) -> Node {
        Node::Call(f, Box::new(a))
    }

    /// Symbolic derivative. `frac` has slope one and `step` slope zero away
    /// from their jumps.
    pub fn derivative(&self, var: usize) -> Node {
        match self {
            Node::Num(_) => Node::Num(0.0),
            Node::Var(i) => Node::Num(if *i == var { 1.0 } else { 0.0 }),
            Node::Neg(a) => Node::neg(a.derivative(var)),
            Node::Add(a, b) => Node::add(a.derivative(var), b.derivative(var)),
            Node::Sub(a, b) => Node::sub(a.derivative(var), b.derivative(var)),
            Node::Mul(a, b) => Node::add(
                Node::mul(a.derivative(var), (**b).clone()),
                Node::mul((**a).clone(), b.derivative(var)),
            ),
            Node::Div(a, b) => {
                let num = Node::sub(
                    Node::mul(a.derivative(var), (**b).clone()),
                    Node::mul((**a).clone(), b.derivative(var)),
                );
                if num.is_zero() {
                    return Node::Num(0.0);
                }
                Node::div(num, Node::mul((**b).clone(), (**b).clone()))
            }
            Node::Call(f, a) => {
                let da = a.derivative(var);
                if da.is_zero() {
                    return Node::Num(0.0);
                }
                match f {
                    Func::Sin => Node::mul(Node::call(Func::Cos, (**a).clone()), da),
                    Func::Cos => Node::neg(Node::mul(Node::call(Func::Sin, (**a).clone()), da)),
                    Func::Exp => Node::mul(Node::call(Func::Exp, (**a).clone()), da),
                    Func::Frac => da,
                    Func::Step => Node::Num(0.0),
                }
            }
        }
    }

    fn fmt_with(&self, names: &[&str], f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var(i) => write!(f, "{}", names[*i]),
            Node::Neg(a) => {
                write!(f, "-(")?;
                a.fmt_with(names, f)?;
                write!(f, ")")
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                let op = match self {
                    Node::Add(..) => '+',
                    Node::Sub(..) => '-',
                    Node::Mul(..) => '*',
                    _ => '/',
                };
                write!(f, "(")?;
                a.fmt_with(names, f)?;
                write!(f, "{op}")?;
                b.fmt_with(names, f)?;
                write!(f, ")")
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_with(names, f)?;
                write!(f, ")")
            }
        }
    }
}

/// A parsed expression together with its variable set.
#[derive(Clone, Debug)]
pub struct CoeffExpr {
    root: Arc<Node>,
    vars: &'static [&'static str],
    source: Arc<str>,
}

impl PartialEq for CoeffExpr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.vars == other.vars
    }
}

impl fmt::Display for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl CoeffExpr {
    pub fn parse(text: &str) -> Result<CoeffExpr, ParseError> {
        Self::parse_with(text, COEFF_VARS)
    }

    pub fn parse_with(text: &str, vars: &'static [&'static str]) -> Result<CoeffExpr, ParseError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0, vars };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(ParseError::Syntax {
                position: p.pos,
                expected: vec!["operator".into(), "end of input".into()],
            });
        }
        Ok(CoeffExpr { root: Arc::new(root), vars, source: text.into() })
    }

    pub fn constant(value: f64) -> CoeffExpr {
        CoeffExpr {
            root: Arc::new(Node::Num(value)),
            vars: COEFF_VARS,
            source: format!("{value:?}").into(),
        }
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn var_names(&self) -> &'static [&'static str] {
        self.vars
    }

    pub fn eval(&self, vars: &[f64]) -> Result<f64, EvalError> {
        debug_assert_eq!(vars.len(), self.vars.len());
        self.root.eval(vars)
    }

    pub fn uses(&self, var: usize) -> bool {
        self.root.uses(var)
    }

    pub fn is_constant(&self) -> bool {
        (0..self.vars.len()).all(|v| !self.uses(v))
    }

    pub fn derivative(&self, var: usize) -> CoeffExpr {
        let d = self.root.derivative(var);
        let source = DisplayNode(&d, self.vars).to_string();
        CoeffExpr { root: Arc::new(d), vars: self.vars, source: source.into() }
    }
}

struct DisplayNode<'a>(&'a Node, &'a [&'a str]);

impl fmt::Display for DisplayNode<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_with(self.1, f)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'static [&'static str],
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::Syntax { position: self.pos, expected: vec![format!("'{}'", c as char)] })
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.factor()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(ParseError::Syntax {
                position: self.pos,
                expected: vec!["number".into(), "identifier".into(), "function".into(), "'('".into(), "'-'".into()],
            }),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > b
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if p < s.len() && s[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            return Err(ParseError::Syntax { position: start, expected: vec!["digit".into()] });
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            } else {
                return Err(ParseError::Syntax { position: q, expected: vec!["exponent digits".into()] });
            }
        }
        let text = std::str::from_utf8(&s[start..p]).expect("ascii");
        self.pos = p;
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| ParseError::Syntax { position: start, expected: vec!["number".into()] })
    }

    fn ident(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if let Some(f) = Func::from_name(name) {
            self.expect(b'(')?;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Node::Call(f, Box::new(arg)));
        }
        match self.vars.iter().position(|v| *v == name) {
            Some(i) => Ok(Node::Var(i)),
            None => Err(ParseError::UnknownIdentifier { name: name.to_string(), position: start }),
        }
    }
}

/// Evaluation point for coefficient fields.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellPoint {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub t: f64,
}

impl CellPoint {
    pub fn new(x: [f64; 2], y: [f64; 2], z: [f64; 2], t: f64) -> Self {
        CellPoint { x, y, z, t }
    }

    pub fn vars(&self) -> [f64; 7] {
        [self.x[0], self.x[1], self.y[0], self.y[1], self.z[0], self.z[1], self.t]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, p: CellPoint) -> f64 {
        CoeffExpr::parse(s).unwrap().eval(&p.vars()).unwrap()
    }

    #[test]
    fn constants_and_precedence() {
        let p = CellPoint::default();
        assert_eq!(ev("1", p), 1.0);
        assert_eq!(ev("2+3*4", p), 14.0);
        assert_eq!(ev("(2+3)*4", p), 20.0);
        assert_eq!(ev("8/2/2", p), 2.0);
        assert_eq!(ev("--3", p), 3.0);
        assert_eq!(ev("2-3-4", p), -5.0);
        assert_eq!(ev("1.5e2 + .5", p), 150.5);
    }

    #[test]
    fn step_discontinuity() {
        let e = CoeffExpr::parse("2+sin(6.2831853*y1)*step(z1-0.5)").unwrap();
        let at = |y1: f64, z1: f64| e.eval(&CellPoint::new([0.0; 2], [y1, 0.0], [z1, 0.0], 0.0).vars()).unwrap();
        assert_eq!(at(0.25, 0.49), 2.0);
        assert!((at(0.25, 0.5) - 3.0).abs() < 1e-12);
        assert!(e.uses(Y1) && e.uses(Z1) && !e.uses(T));
    }

    #[test]
    fn division_by_zero_is_a_runtime_error() {
        let e = CoeffExpr::parse("1/(y1-y1)").unwrap();
        assert_eq!(e.eval(&[0.0; 7]), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match CoeffExpr::parse("1 + * 2") {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        match CoeffExpr::parse("sin(y1") {
            Err(ParseError::Syntax { expected, .. }) => assert_eq!(expected, vec!["')'".to_string()]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(CoeffExpr::parse("2 3"), Err(ParseError::Syntax { position: 2, .. })));
        assert!(matches!(CoeffExpr::parse(""), Err(ParseError::Syntax { position: 0, .. })));
    }

    #[test]
    fn unknown_identifiers() {
        assert_eq!(
            CoeffExpr::parse("2*w1"),
            Err(ParseError::UnknownIdentifier { name: "w1".into(), position: 2 })
        );
        assert!(matches!(CoeffExpr::parse("pi"), Err(ParseError::UnknownIdentifier { .. })));
        assert!(CoeffExpr::parse_with("u*v", CHART_VARS).is_ok());
        assert!(CoeffExpr::parse_with("y1", CHART_VARS).is_err());
    }

    #[test]
    fn frac_is_periodic() {
        let e = CoeffExpr::parse("frac(y1)").unwrap();
        for k in -3..4 {
            let a = e.eval(&CellPoint::new([0.0; 2], [0.3 + k as f64, 0.0], [0.0; 2], 0.0).vars()).unwrap();
            assert!((a - 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let e = CoeffExpr::parse("exp(-y1)*sin(3*y2) / (2 + cos(y1*y2)) - t*t*x1").unwrap();
        let p = [0.2, -0.4, 0.3, 0.7, 0.0, 0.0, 0.15];
        for var in 0..7 {
            let d = e.derivative(var);
            let h = 1e-6;
            let mut pp = p;
            let mut pm = p;
            pp[var] += h;
            pm[var] -= h;
            let fd = (e.eval(&pp).unwrap() - e.eval(&pm).unwrap()) / (2.0 * h);
            assert!((d.eval(&p).unwrap() - fd).abs() < 1e-8, "var {var}");
        }
    }
}
