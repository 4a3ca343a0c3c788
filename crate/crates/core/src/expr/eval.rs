use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::{BinOp, Func, Node, Var};
use crate::error::{Error, Result};

const TWO_PI_I: C64 = C64::new(0.0, 2.0 * PI);

/// Values for every variable slot of dimension `n`, plus branch state.
///
/// `winding` shifts every `log`, `sqrt` and non-integer power by
/// `2*pi*i*winding` in the logarithm. `Lw`, when present, is the tracked
/// logarithm of `w`; if not set explicitly it defaults to `Log w + 2*pi*i*winding`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    n: usize,
    values: Vec<C64>,
    lw: Option<C64>,
    winding: i64,
}

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Assignment {
            n,
            values: vec![C64::new(0.0, 0.0); 2 * n],
            lw: None,
            winding: 0,
        }
    }

    /// Holomorphic coordinates `hol = (z, w)` and antiholomorphic `anti = (cz, cw)`,
    /// each of length `n`.
    pub fn new(hol: &[C64], anti: &[C64]) -> Self {
        assert_eq!(hol.len(), anti.len(), "holomorphic/antiholomorphic length mismatch");
        let n = hol.len();
        let mut values = Vec::with_capacity(2 * n);
        values.extend_from_slice(hol);
        values.extend_from_slice(anti);
        Assignment {
            n,
            values,
            lw: None,
            winding: 0,
        }
    }

    /// The diagonal point `(P, conj P)`.
    pub fn real_point(p: &[C64]) -> Self {
        let anti: Vec<C64> = p.iter().map(|c| c.conj()).collect();
        Assignment::new(p, &anti)
    }

    pub fn with_winding(mut self, k: i64) -> Self {
        self.winding = k;
        self
    }

    pub fn with_lw(mut self, lw: C64) -> Self {
        self.lw = Some(lw);
        self
    }

    pub fn set(&mut self, v: Var, value: C64) -> Result<()> {
        if v == Var::Lw {
            self.lw = Some(value);
            return Ok(());
        }
        let slot = v.slot(self.n).ok_or_else(|| Error::BadVariable(v.to_string(), self.n))?;
        self.values[slot] = value;
        Ok(())
    }

    pub fn get(&self, v: Var) -> Result<C64> {
        if v == Var::Lw {
            return self.lw();
        }
        let slot = v.slot(self.n).ok_or_else(|| Error::BadVariable(v.to_string(), self.n))?;
        Ok(self.values[slot])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn winding(&self) -> i64 {
        self.winding
    }

    fn w(&self) -> C64 {
        self.values[self.n - 1]
    }

    fn lw(&self) -> Result<C64> {
        match self.lw {
            Some(l) => Ok(l),
            None => branch_log(self.w(), self.winding),
        }
    }

    fn shift(&self) -> C64 {
        TWO_PI_I * self.winding as f64
    }
}

fn branch_log(a: C64, winding: i64) -> Result<C64> {
    if a.norm() == 0.0 {
        return Err(Error::Singular("logarithm at 0".into()));
    }
    Ok(a.ln() + TWO_PI_I * winding as f64)
}

fn finite(z: C64, what: &str) -> Result<C64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::Singular(format!("non-finite value in {what}")))
    }
}

/// Returns `Some(k)` when the node is a constant integer exponent.
fn integer_exponent(node: &Node) -> Option<i32> {
    if !node.is_constant() {
        return None;
    }
    let v = eval_node(node, &Assignment::zeros(1)).ok()?;
    let k = v.re.round();
    (v.im == 0.0 && (v.re - k).abs() == 0.0 && k.abs() <= 1024.0).then_some(k as i32)
}

fn powi(a: C64, k: i32) -> Result<C64> {
    if k < 0 {
        if a.norm() == 0.0 {
            return Err(Error::Singular("negative power of 0".into()));
        }
        Ok(C64::new(1.0, 0.0) / a.powi(-k))
    } else {
        Ok(a.powi(k))
    }
}

pub(super) fn eval_node(node: &Node, at: &Assignment) -> Result<C64> {
    let v = match node {
        Node::Num(x) => C64::new(*x, 0.0),
        Node::I => C64::new(0.0, 1.0),
        Node::Pi => C64::new(PI, 0.0),
        Node::Var(v) => at.get(*v)?,
        Node::Neg(a) => -eval_node(a, at)?,
        Node::Bin(op, a, b) => {
            if *op == BinOp::Pow {
                if let Some(k) = integer_exponent(b) {
                    return finite(powi(eval_node(a, at)?, k)?, "power");
                }
            }
            let x = eval_node(a, at)?;
            let y = eval_node(b, at)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y.norm() == 0.0 {
                        return Err(Error::Singular("division by zero".into()));
                    }
                    x / y
                }
                BinOp::Pow => {
                    if x.norm() == 0.0 {
                        return Err(Error::Singular("non-integer power of 0".into()));
                    }
                    (y * (x.ln() + at.shift())).exp()
                }
            }
        }
        Node::Call(f, a) => {
            let x = eval_node(a, at)?;
            match f {
                Func::Exp => x.exp(),
                Func::Log => branch_log(x, at.winding)?,
                Func::Sqrt => (0.5 * branch_log(x, at.winding)?).exp().check_root(x)?,
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
            }
        }
    };
    finite(v, "expression")
}

trait CheckRoot {
    fn check_root(self, x: C64) -> Result<C64>;
}

impl CheckRoot for C64 {
    fn check_root(self, x: C64) -> Result<C64> {
        if x.norm() == 0.0 {
            Err(Error::Singular("square root at 0".into()))
        } else {
            Ok(self)
        }
    }
}

/// Value and partial derivatives of an expression with respect to every
/// variable slot (holomorphic and antiholomorphic alike).
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    n: usize,
    pub value: C64,
    /// First partials, indexed by [`Var::slot`].
    pub partials: Vec<C64>,
    /// Second partials, row-major `2n x 2n`; present for order-2 jets.
    pub second: Option<Vec<C64>>,
}

impl Jet {
    fn nv(&self) -> usize {
        2 * self.n
    }

    fn constant(n: usize, value: C64, order: u8) -> Jet {
        Jet {
            n,
            value,
            partials: vec![C64::new(0.0, 0.0); 2 * n],
            second: (order >= 2).then(|| vec![C64::new(0.0, 0.0); 4 * n * n]),
        }
    }

    fn variable(n: usize, value: C64, slot: usize, order: u8) -> Jet {
        let mut j = Jet::constant(n, value, order);
        j.partials[slot] = C64::new(1.0, 0.0);
        j
    }

    pub fn partial(&self, v: Var) -> C64 {
        v.slot(self.n).map(|s| self.partials[s]).unwrap_or_default()
    }

    pub fn second_partial(&self, a: Var, b: Var) -> Option<C64> {
        let h = self.second.as_ref()?;
        let (i, j) = (a.slot(self.n)?, b.slot(self.n)?);
        Some(h[i * self.nv() + j])
    }

    /// `f(self)` given `f(x0)`, `f'(x0)`, `f''(x0)`.
    fn chain(&self, f0: C64, f1: C64, f2: C64) -> Jet {
        let nv = self.nv();
        let partials: Vec<C64> = self.partials.iter().map(|g| f1 * g).collect();
        let second = self.second.as_ref().map(|h| {
            let mut out = vec![C64::new(0.0, 0.0); nv * nv];
            for i in 0..nv {
                for j in i..nv {
                    let v = f2 * self.partials[i] * self.partials[j] + f1 * h[i * nv + j];
                    out[i * nv + j] = v;
                    out[j * nv + i] = v;
                }
            }
            out
        });
        Jet {
            n: self.n,
            value: f0,
            partials,
            second,
        }
    }

    fn add(&self, o: &Jet, sign: f64) -> Jet {
        Jet {
            n: self.n,
            value: self.value + sign * o.value,
            partials: self.partials.iter().zip(&o.partials).map(|(a, b)| a + sign * b).collect(),
            second: match (&self.second, &o.second) {
                (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + sign * y).collect()),
                _ => None,
            },
        }
    }

    fn mul(&self, o: &Jet) -> Jet {
        let nv = self.nv();
        let (a, b) = (self.value, o.value);
        let partials = self
            .partials
            .iter()
            .zip(&o.partials)
            .map(|(da, db)| da * b + a * db)
            .collect();
        let second = match (&self.second, &o.second) {
            (Some(ha), Some(hb)) => {
                let mut out = vec![C64::new(0.0, 0.0); nv * nv];
                for i in 0..nv {
                    for j in i..nv {
                        let k = i * nv + j;
                        let v = ha[k] * b
                            + self.partials[i] * o.partials[j]
                            + self.partials[j] * o.partials[i]
                            + a * hb[k];
                        out[k] = v;
                        out[j * nv + i] = v;
                    }
                }
                Some(out)
            }
            _ => None,
        };
        Jet {
            n: self.n,
            value: a * b,
            partials,
            second,
        }
    }

    fn neg(&self) -> Jet {
        self.chain(-self.value, C64::new(-1.0, 0.0), C64::new(0.0, 0.0))
    }
}

pub(super) fn eval_jet(node: &Node, at: &Assignment, order: u8) -> Result<Jet> {
    let j = jet_node(node, at, order.clamp(1, 2))?;
    finite(j.value, "jet")?;
    for d in j.partials.iter().chain(j.second.iter().flatten()) {
        finite(*d, "jet derivative")?;
    }
    Ok(j)
}

fn jet_node(node: &Node, at: &Assignment, order: u8) -> Result<Jet> {
    let n = at.n;
    let one = C64::new(1.0, 0.0);
    Ok(match node {
        Node::Num(_) | Node::I | Node::Pi => Jet::constant(n, eval_node(node, at)?, order),
        Node::Var(Var::Lw) => {
            let w = at.w();
            if w.norm() == 0.0 {
                return Err(Error::Singular("Lw at w = 0".into()));
            }
            let wj = Jet::variable(n, w, n - 1, order);
            wj.chain(at.lw()?, one / w, -one / (w * w))
        }
        Node::Var(v) => {
            let slot = v.slot(n).ok_or_else(|| Error::BadVariable(v.to_string(), n))?;
            Jet::variable(n, at.values[slot], slot, order)
        }
        Node::Neg(a) => jet_node(a, at, order)?.neg(),
        Node::Bin(op, a, b) => {
            if *op == BinOp::Pow {
                if let Some(k) = integer_exponent(b) {
                    let x = jet_node(a, at, order)?;
                    let kf = k as f64;
                    let f0 = powi(x.value, k)?;
                    let f1 = if k == 0 { C64::new(0.0, 0.0) } else { kf * powi(x.value, k - 1)? };
                    let f2 = if k == 0 || k == 1 {
                        C64::new(0.0, 0.0)
                    } else {
                        kf * (kf - 1.0) * powi(x.value, k - 2)?
                    };
                    return Ok(x.chain(f0, f1, f2));
                }
            }
            let x = jet_node(a, at, order)?;
            let y = jet_node(b, at, order)?;
            match op {
                BinOp::Add => x.add(&y, 1.0),
                BinOp::Sub => x.add(&y, -1.0),
                BinOp::Mul => x.mul(&y),
                BinOp::Div => {
                    let v = y.value;
                    if v.norm() == 0.0 {
                        return Err(Error::Singular("division by zero".into()));
                    }
                    let r = y.chain(one / v, -one / (v * v), 2.0 * one / (v * v * v));
                    x.mul(&r)
                }
                BinOp::Pow => {
                    let v = x.value;
                    if v.norm() == 0.0 {
                        return Err(Error::Singular("non-integer power of 0".into()));
                    }
                    let l = x.chain(v.ln() + at.shift(), one / v, -one / (v * v));
                    let e = l.mul(&y);
                    let ev = e.value.exp();
                    e.chain(ev, ev, ev)
                }
            }
        }
        Node::Call(f, a) => {
            let x = jet_node(a, at, order)?;
            let v = x.value;
            match f {
                Func::Exp => {
                    let e = v.exp();
                    x.chain(e, e, e)
                }
                Func::Log => {
                    let l = branch_log(v, at.winding)?;
                    x.chain(l, one / v, -one / (v * v))
                }
                Func::Sqrt => {
                    let s = (0.5 * branch_log(v, at.winding)?).exp();
                    x.chain(s, 0.5 / s, -0.25 / (s * v))
                }
                Func::Sin => x.chain(v.sin(), v.cos(), -v.sin()),
                Func::Cos => x.chain(v.cos(), -v.sin(), -v.cos()),
                Func::Tan => {
                    let t = v.tan();
                    let sec2 = one + t * t;
                    x.chain(t, sec2, 2.0 * t * sec2)
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn mlog_at_segre_base_point() {
        let e = parse("conj(w) * exp(2*i*z1*conj(z1))").unwrap();
        let at = Assignment::new(&[c(0.0, 0.0), c(7.0, 3.0)], &[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(e.eval(&at).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn modulus_squared() {
        let e = parse("z1 * conj(z1)").unwrap();
        let at = Assignment::real_point(&[c(1.0, 1.0), c(0.0, 0.0)]);
        assert_eq!(e.eval(&at).unwrap(), c(2.0, 0.0));
    }

    #[test]
    fn principal_log_of_minus_one() {
        let e = parse("log(w)").unwrap();
        let at = Assignment::real_point(&[c(0.0, 0.0), c(-1.0, 0.0)]);
        let v = e.eval(&at).unwrap();
        assert_eq!(v, c(0.0, PI));
        let shifted = e.eval(&at.clone().with_winding(1)).unwrap();
        assert!((shifted - c(0.0, 3.0 * PI)).norm() < 1e-15);
    }

    #[test]
    fn singular_points_are_errors() {
        let at = Assignment::zeros(2);
        for s in ["log(w)", "sqrt(w)", "1/w", "w^0.5", "w^(-1)", "Lw"] {
            assert!(
                matches!(parse(s).unwrap().eval(&at), Err(Error::Singular(_))),
                "{s} should be singular"
            );
        }
        // integer powers of 0 are fine
        assert_eq!(parse("w^2").unwrap().eval(&at).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn complex_power_uses_winding() {
        let e = parse("w^0.5").unwrap();
        let at = Assignment::real_point(&[c(0.0, 0.0), c(4.0, 0.0)]);
        assert!((e.eval(&at).unwrap() - c(2.0, 0.0)).norm() < 1e-15);
        assert!((e.eval(&at.with_winding(1)).unwrap() - c(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn lw_overrides_principal_log() {
        let e = parse("Lw").unwrap();
        let at = Assignment::real_point(&[c(0.0, 0.0), c(1.0, 0.0)]).with_lw(c(0.0, 2.0 * PI));
        assert_eq!(e.eval(&at).unwrap(), c(0.0, 2.0 * PI));
        let j = e.eval_jet(&at, 2).unwrap();
        assert_eq!(j.partial(Var::W), c(1.0, 0.0));
        assert_eq!(j.second_partial(Var::W, Var::W), Some(c(-1.0, 0.0)));
    }

    #[test]
    fn first_and_second_partials_of_modulus() {
        let e = parse("z1*conj(z1)").unwrap();
        let at = Assignment::new(&[c(1.0, 0.0), c(0.5, 0.0)], &[c(1.0, 0.0), c(0.5, 0.0)]);
        let j = e.eval_jet(&at, 2).unwrap();
        assert_eq!(j.partial(Var::Z(1)), c(1.0, 0.0));
        for p in [c(0.3, -2.0), c(-7.0, 1.5)] {
            let at = Assignment::new(&[p, c(0.1, 0.0)], &[c(0.2, 0.9), c(0.0, 1.0)]);
            let j = e.eval_jet(&at, 2).unwrap();
            assert_eq!(j.second_partial(Var::Z(1), Var::Cz(1)), Some(c(1.0, 0.0)));
            assert_eq!(j.second_partial(Var::Cz(1), Var::Z(1)), Some(c(1.0, 0.0)));
            assert_eq!(j.second_partial(Var::Z(1), Var::Z(1)), Some(c(0.0, 0.0)));
        }
    }

    /// Central finite difference along one slot; the oracle for jet partials.
    fn central_difference(e: &crate::expr::AnalyticExpr, at: &Assignment, slot: usize, h: f64) -> C64 {
        let mut plus = at.clone();
        let mut minus = at.clone();
        plus.values[slot] += h;
        minus.values[slot] -= h;
        (e.eval(&plus).unwrap() - e.eval(&minus).unwrap()) / (2.0 * h)
    }

    fn random_assignment(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Assignment {
        let mut at = Assignment::zeros(n);
        for v in at.values.iter_mut() {
            *v = c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
        }
        at
    }

    #[test]
    fn degree_four_polynomial_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vars = ["z1", "w", "cz1", "cw"];
        for _ in 0..20 {
            // random monomials up to total degree 4
            let mut terms = Vec::new();
            for _ in 0..6 {
                let mut t = format!("({} + {}*i)", rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let deg = rng.gen_range(0..=4);
                for _ in 0..deg {
                    t.push('*');
                    t.push_str(vars[rng.gen_range(0..4)]);
                }
                terms.push(t);
            }
            let e = parse(&terms.join(" + ")).unwrap();
            let at = random_assignment(&mut rng, 2, 1.0);
            let j = e.eval_jet(&at, 2).unwrap();
            for slot in 0..4 {
                let fd = central_difference(&e, &at, slot, 1e-5);
                let exact = j.partials[slot];
                let rel = (fd - exact).norm() / exact.norm().max(1.0);
                assert!(rel < 1e-6, "slot {slot}: jet {exact} vs fd {fd}");
            }
        }
    }

    #[test]
    fn second_partials_match_differenced_first_partials() {
        let e = parse("exp(z1*cw) * sqrt(1 + w*cz1) / (2 + z1^3) + tan(0.3*w)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let at = random_assignment(&mut rng, 2, 0.5);
        let j = e.eval_jet(&at, 2).unwrap();
        let h = 1e-5;
        for a in 0..4 {
            let mut plus = at.clone();
            let mut minus = at.clone();
            plus.values[a] += h;
            minus.values[a] -= h;
            let jp = e.eval_jet(&plus, 1).unwrap();
            let jm = e.eval_jet(&minus, 1).unwrap();
            for b in 0..4 {
                let fd = (jp.partials[b] - jm.partials[b]) / (2.0 * h);
                let exact = j.second.as_ref().unwrap()[a * 4 + b];
                assert!((fd - exact).norm() < 1e-6 * exact.norm().max(1.0));
            }
        }
    }

    /// Random expression over (z1, w, cz1, cw) of bounded depth that avoids
    /// branch cuts near the evaluation region.
    fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> String {
        if depth == 0 || rng.gen_bool(0.25) {
            return match rng.gen_range(0..6) {
                0 => "z1".into(),
                1 => "w".into(),
                2 => "cz1".into(),
                3 => "cw".into(),
                4 => format!("{:.3}", rng.gen_range(0.1..2.0)),
                _ => "i".into(),
            };
        }
        let a = random_expr(rng, depth - 1);
        let b = random_expr(rng, depth - 1);
        match rng.gen_range(0..9) {
            0 => format!("({a} + {b})"),
            1 => format!("({a} - {b})"),
            2 => format!("({a} * {b})"),
            3 => format!("({a} / (2 + {b}*{b}))"),
            4 => format!("exp(0.3*{a})"),
            5 => format!("log(3 + 0.2*{a})"),
            6 => format!("sqrt(4 + 0.2*{a})"),
            7 => format!("sin(0.5*{a})"),
            _ => format!("({a})^2"),
        }
    }

    #[test]
    fn random_expressions_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 1000 {
            let src = random_expr(&mut rng, 6);
            let e = parse(&src).unwrap();
            let at = random_assignment(&mut rng, 2, 0.5);
            let Ok(j) = e.eval_jet(&at, 1) else { continue };
            if j.value.norm() > 1e6 {
                continue;
            }
            for slot in 0..4 {
                let fd = central_difference(&e, &at, slot, 1e-5);
                let exact = j.partials[slot];
                let rel = (fd - exact).norm() / exact.norm().max(1.0);
                assert!(rel < 1e-6, "{src}: slot {slot}: jet {exact} vs fd {fd}");
            }
            checked += 1;
        }
    }

    #[test]
    fn evaluation_is_bitwise_reproducible() {
        let e = parse("exp(2*i*z1*cz1) * log(1 + w) / sqrt(3 + cw) + z1^0.7").unwrap();
        let at = Assignment::new(&[c(0.3, 0.1), c(0.2, -0.4)], &[c(0.3, -0.1), c(0.2, 0.4)]);
        let a = e.eval(&at).unwrap();
        for _ in 0..10 {
            let b = e.eval(&at).unwrap();
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let e = e.clone();
                let at = at.clone();
                std::thread::spawn(move || e.eval(&at).unwrap())
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), a);
        }
    }
}
