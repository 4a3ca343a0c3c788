//! Complex-analytic expressions in `z1..z_{n-1}`, `w` and their formal
//! conjugates `cz1..`, `cw`.
//!
//! Holomorphic and antiholomorphic variables are independent symbols: an
//! expression such as `w - cw*exp(2*i*z1*cz1)` is the complexification
//! `rho(Z, conj(W))` and is evaluated with both arguments supplied by the
//! caller. Nothing in this module conjugates numerically.
//!
//! The reserved symbol `Lw` stands for a tracked logarithm of `w`; germs use
//! it to carry branch information that a principal `log(w)` cannot.

mod eval;
mod parse;

use std::fmt;

pub use eval::{Assignment, Jet};
pub use parse::parse;

use crate::error::{Error, Result};

/// A variable slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// `z_j`, 1-based.
    Z(usize),
    W,
    /// `cz_j`, the formal conjugate of `z_j`.
    Cz(usize),
    Cw,
    /// Tracked `log w`.
    Lw,
}

impl Var {
    /// Position of this variable in an assignment of dimension `n`.
    ///
    /// Layout: `z_1..z_{n-1}, w, cz_1..cz_{n-1}, cw`. `Lw` has no slot; it is
    /// derived from `w` and the assignment's branch state.
    pub fn slot(self, n: usize) -> Option<usize> {
        match self {
            Var::Z(j) if j >= 1 && j < n => Some(j - 1),
            Var::W => Some(n - 1),
            Var::Cz(j) if j >= 1 && j < n => Some(n + j - 1),
            Var::Cw => Some(2 * n - 1),
            _ => None,
        }
    }

    pub fn conjugate(self) -> Var {
        match self {
            Var::Z(j) => Var::Cz(j),
            Var::Cz(j) => Var::Z(j),
            Var::W => Var::Cw,
            Var::Cw => Var::W,
            Var::Lw => Var::Lw,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Z(j) => write!(f, "z{j}"),
            Var::W => write!(f, "w"),
            Var::Cz(j) => write!(f, "cz{j}"),
            Var::Cw => write!(f, "cw"),
            Var::Lw => write!(f, "Lw"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
        }
    }

    pub(crate) fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Expression tree. Numeric literals are non-negative reals; negation is a
/// separate node so that printing and parsing are exact inverses.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    I,
    Pi,
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn num(x: f64) -> Node {
        if x < 0.0 {
            Node::Neg(Box::new(Node::Num(-x)))
        } else {
            Node::Num(x)
        }
    }

    pub fn var(v: Var) -> Node {
        Node::Var(v)
    }

    pub fn bin(op: BinOp, a: Node, b: Node) -> Node {
        Node::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Node) -> Node {
        Node::Call(f, Box::new(a))
    }

    fn visit_vars(&self, out: &mut Vec<Var>) {
        match self {
            Node::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Node::Neg(a) | Node::Call(_, a) => a.visit_vars(out),
            Node::Bin(_, a, b) => {
                a.visit_vars(out);
                b.visit_vars(out);
            }
            Node::Num(_) | Node::I | Node::Pi => {}
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Node::Var(_) => false,
            Node::Neg(a) | Node::Call(_, a) => a.is_constant(),
            Node::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            Node::Num(_) | Node::I | Node::Pi => true,
        }
    }

    fn map_vars(&self, f: &dyn Fn(Var) -> Node) -> Node {
        match self {
            Node::Var(v) => f(*v),
            Node::Neg(a) => Node::Neg(Box::new(a.map_vars(f))),
            Node::Call(g, a) => Node::Call(*g, Box::new(a.map_vars(f))),
            Node::Bin(op, a, b) => Node::Bin(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
            other => other.clone(),
        }
    }

    fn conjugate(&self) -> Node {
        match self {
            Node::Var(v) => Node::Var(v.conjugate()),
            Node::I => Node::Neg(Box::new(Node::I)),
            Node::Neg(a) => Node::Neg(Box::new(a.conjugate())),
            Node::Call(g, a) => Node::Call(*g, Box::new(a.conjugate())),
            Node::Bin(op, a, b) => Node::Bin(*op, Box::new(a.conjugate()), Box::new(b.conjugate())),
            other => other.clone(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Neg(a) | Node::Call(_, a) => 1 + a.depth(),
            Node::Bin(_, a, b) => 1 + a.depth().max(b.depth()),
            _ => 1,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(x) => write!(f, "{x:?}"),
            Node::I => write!(f, "i"),
            Node::Pi => write!(f, "pi"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

/// A parsed complex-analytic expression.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticExpr {
    root: Node,
}

impl AnalyticExpr {
    pub fn new(root: Node) -> Self {
        AnalyticExpr { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.root.visit_vars(&mut out);
        out
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn is_constant(&self) -> bool {
        self.root.is_constant()
    }

    /// Checks that every `z_j`/`cz_j` satisfies `1 <= j <= n-1`.
    pub fn check_dimension(&self, n: usize) -> Result<()> {
        for v in self.variables() {
            if v != Var::Lw && v.slot(n).is_none() {
                return Err(Error::BadVariable(v.to_string(), n));
            }
        }
        Ok(())
    }

    /// The bar operation: swaps every variable with its conjugate and
    /// conjugates the coefficients. For a real-valued function of `(Z, conj Z)`
    /// this returns the same function.
    pub fn conjugate(&self) -> AnalyticExpr {
        AnalyticExpr::new(self.root.conjugate())
    }

    /// Replaces every occurrence of each variable by an expression.
    pub fn substitute(&self, f: impl Fn(Var) -> Option<Node>) -> AnalyticExpr {
        AnalyticExpr::new(self.root.map_vars(&|v| f(v).unwrap_or(Node::Var(v))))
    }

    pub fn eval(&self, at: &Assignment) -> Result<num_complex::Complex64> {
        eval::eval_node(&self.root, at)
    }

    pub fn eval_jet(&self, at: &Assignment, order: u8) -> Result<Jet> {
        eval::eval_jet(&self.root, at, order)
    }
}

impl fmt::Display for AnalyticExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

impl std::str::FromStr for AnalyticExpr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

impl serde::Serialize for AnalyticExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for AnalyticExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_swaps_and_flips_i() {
        let e = parse("i*z1*cw").unwrap();
        assert_eq!(e.conjugate(), parse("(-i)*cz1*w").unwrap());
        let real = parse("z1*cz1").unwrap();
        // |z|^2 is real, but the bar operation reorders the factors.
        assert_eq!(real.conjugate(), parse("cz1*z1").unwrap());
    }

    #[test]
    fn dimension_check() {
        let e = parse("z2 + cz1").unwrap();
        assert!(e.check_dimension(3).is_ok());
        assert!(matches!(e.check_dimension(2), Err(Error::BadVariable(..))));
    }

    #[test]
    fn substitution() {
        let e = parse("cw*exp(z1)").unwrap();
        let s = e.substitute(|v| (v == Var::Cw).then(|| Node::bin(BinOp::Pow, Node::Var(Var::Cw), Node::Num(2.0))));
        assert_eq!(s, parse("cw^2*exp(z1)").unwrap());
    }
}
