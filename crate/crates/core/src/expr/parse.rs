//! Recursive-descent parser for the expression DSL.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := base ('^' unary)?
//! base   := number | 'i' | 'pi' | ident | func '(' expr ')' | 'conj' '(' expr ')' | '(' expr ')'
//! ident  := 'z'<digits> | 'w' | 'cz'<digits> | 'cw' | 'Lw'
//! ```

use super::{AnalyticExpr, BinOp, Func, Node, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let x: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    expected: vec!["number".into()],
                    found: format!("`{text}`"),
                })?;
                out.push((Tok::Num(x), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: start,
                    expected: vec!["expression".into()],
                    found: format!("`{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

fn ident_var(name: &str) -> Option<Var> {
    let indexed = |prefix: &str| -> Option<usize> {
        let digits = name.strip_prefix(prefix)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok()
    };
    match name {
        "w" => Some(Var::W),
        "cw" => Some(Var::Cw),
        "Lw" => Some(Var::Lw),
        _ => indexed("cz").map(Var::Cz).or_else(|| indexed("z").map(Var::Z)),
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(Error::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, t: Tok, name: &str) -> Result<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.fail(&[name])
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.base()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Node::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Node> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Node::Num(x))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "i" => return Ok(Node::I),
                    "pi" => return Ok(Node::Pi),
                    "conj" => {
                        self.expect(Tok::LParen, "`(`")?;
                        let inner = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        return Ok(AnalyticExpr::new(inner).conjugate().root);
                    }
                    _ => {}
                }
                if let Some(f) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "`(`")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Node::call(f, arg));
                }
                if let Some(v) = ident_var(&name) {
                    return Ok(Node::Var(v));
                }
                Err(Error::UnknownIdentifier { name, offset })
            }
            _ => self.fail(&["number", "identifier", "function", "`(`"]),
        }
    }
}

/// Parses a DSL string into an expression.
pub fn parse(src: &str) -> Result<AnalyticExpr> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(AnalyticExpr::new(root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Assignment;
    use num_complex::Complex64 as C64;
    use proptest::prelude::*;

    #[test]
    fn mlog_defining_equation() {
        let e = parse("conj(w) * exp(2*i*z1*conj(z1))").unwrap();
        let want = Node::bin(
            BinOp::Mul,
            Node::Var(Var::Cw),
            Node::call(
                Func::Exp,
                Node::bin(
                    BinOp::Mul,
                    Node::bin(
                        BinOp::Mul,
                        Node::bin(BinOp::Mul, Node::Num(2.0), Node::I),
                        Node::Var(Var::Z(1)),
                    ),
                    Node::Var(Var::Cz(1)),
                ),
            ),
        );
        assert_eq!(e.root(), &want);
    }

    #[test]
    fn zero_literal() {
        assert_eq!(parse("0").unwrap().root(), &Node::Num(0.0));
    }

    #[test]
    fn unbalanced_paren_offset() {
        match parse("exp(") {
            Err(Error::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 4);
                assert!(!expected.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier() {
        assert!(matches!(
            parse("foo + 1"),
            Err(Error::UnknownIdentifier { ref name, offset: 0 }) if name == "foo"
        ));
        assert!(matches!(parse("z + 1"), Err(Error::UnknownIdentifier { .. })));
    }

    #[test]
    fn trailing_garbage() {
        assert!(matches!(parse("1 2"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse("1 $"), Err(Error::Syntax { offset: 2, .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let at = Assignment::zeros(2);
        let v = |s: &str| parse(s).unwrap().eval(&at).unwrap();
        assert_eq!(v("2+3*4"), C64::new(14.0, 0.0));
        assert_eq!(v("2^3^2"), C64::new(512.0, 0.0));
        assert_eq!(v("-2^2"), C64::new(-4.0, 0.0));
        assert_eq!(v("8/4/2"), C64::new(1.0, 0.0));
        assert_eq!(v("1.5e1 - 5E-1"), C64::new(14.5, 0.0));
    }

    fn arb_node() -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|k| Node::Num(k as f64 / 8.0)),
            Just(Node::I),
            Just(Node::Pi),
            prop_oneof![
                Just(Var::Z(1)),
                Just(Var::Z(2)),
                Just(Var::W),
                Just(Var::Cz(1)),
                Just(Var::Cw),
                Just(Var::Lw)
            ]
            .prop_map(Node::Var),
        ];
        leaf.prop_recursive(6, 64, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Node::bin(op, a, b)),
                (
                    prop_oneof![
                        Just(Func::Exp),
                        Just(Func::Log),
                        Just(Func::Sqrt),
                        Just(Func::Sin),
                        Just(Func::Cos),
                        Just(Func::Tan)
                    ],
                    inner
                )
                    .prop_map(|(f, a)| Node::call(f, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(node in arb_node()) {
            let e = AnalyticExpr::new(node);
            let back = parse(&e.to_string()).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
