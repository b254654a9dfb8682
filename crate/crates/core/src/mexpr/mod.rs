//! Coefficient expression language: complex-valued functions of `x` and `h`.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := ['-'] atom
//! atom   := number | 'i' | 'pi' | 'x' | 'h' | func '(' expr ')'
//!         | 'pow' '(' expr ',' int ')' | '(' expr ')'
//! func   := exp | tanh | sin | cos | log
//! ```

mod matrix;
mod parse;

pub use matrix::{builtin_registry, complex_from_json, BuiltinInfo, MatrixFunction, MatrixSpec};
pub use parse::parse;

use crate::num::C64;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Tanh,
    Sin,
    Cos,
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Log => "log",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "log" => Func::Log,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    Num(f64),
    Imag,
    Pi,
    X,
    H,
    /// State variable `u1`, `u2`, … (`u` is `u1`), zero-based.
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: Kind,
    pub span: Span,
}

/// Where branch cuts live, so contour builders can keep away from them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Domain {
    /// `log` appears: principal branch, slit along the negative real axis of its argument.
    pub has_log_cut: bool,
}

#[derive(Debug, Clone)]
pub struct Expression {
    pub ast: Node,
    source: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown identifier `{name}` at line {line}, column {col}")]
    UnknownIdentifier { name: String, line: usize, col: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("pole in `{what}` at x={x}, h={h}")]
    Pole { what: String, x: C64, h: f64 },
    #[error("overflow in `{what}` at x={x}, h={h}")]
    Overflow { what: String, x: C64, h: f64 },
    #[error("variable `u{index}` is not bound (only {bound} state variables given)")]
    Unbound { index: usize, bound: usize },
}

/// `tanh` and `1/d` are treated as poles once the denominator drops below
/// this fraction of the numerator scale.
pub const POLE_TOL: f64 = 1e-7;

impl Expression {
    pub fn parse(src: &str) -> Result<Expression, ParseError> {
        parse(src)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn domain(&self) -> Domain {
        fn walk(n: &Node) -> bool {
            match &n.kind {
                Kind::Call(Func::Log, _) => true,
                Kind::Call(_, a) | Kind::Neg(a) | Kind::Pow(a, _) => walk(a),
                Kind::Bin(_, a, b) => walk(a) || walk(b),
                _ => false,
            }
        }
        Domain { has_log_cut: walk(&self.ast) }
    }

    /// True if the expression does not depend on `x`.
    pub fn is_x_free(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match &n.kind {
                Kind::X => false,
                Kind::Call(_, a) | Kind::Neg(a) | Kind::Pow(a, _) => walk(a),
                Kind::Bin(_, a, b) => walk(a) && walk(b),
                _ => true,
            }
        }
        walk(&self.ast)
    }

    pub fn eval(&self, x: C64, h: f64) -> Result<C64, EvalError> {
        self.eval_node(&self.ast, &[], x, h)
    }

    /// Evaluates with state variables u1 = `vars[0]`, u2 = `vars[1]`, ….
    pub fn eval_vars(&self, vars: &[C64], x: C64, h: f64) -> Result<C64, EvalError> {
        self.eval_node(&self.ast, vars, x, h)
    }

    /// Number of state variables referenced (highest index used).
    pub fn var_count(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match &n.kind {
                Kind::Var(k) => k + 1,
                Kind::Call(_, a) | Kind::Neg(a) | Kind::Pow(a, _) => walk(a),
                Kind::Bin(_, a, b) => walk(a).max(walk(b)),
                _ => 0,
            }
        }
        walk(&self.ast)
    }

    fn snippet(&self, s: Span) -> String {
        self.source.get(s.start..s.end).unwrap_or("?").to_string()
    }

    fn eval_node(&self, n: &Node, vars: &[C64], x: C64, h: f64) -> Result<C64, EvalError> {
        let v = match &n.kind {
            Kind::Num(v) => C64::new(*v, 0.0),
            Kind::Imag => C64::new(0.0, 1.0),
            Kind::Pi => C64::new(std::f64::consts::PI, 0.0),
            Kind::X => x,
            Kind::H => C64::new(h, 0.0),
            Kind::Var(k) => *vars.get(*k).ok_or(EvalError::Unbound { index: k + 1, bound: vars.len() })?,
            Kind::Neg(a) => -self.eval_node(a, vars, x, h)?,
            Kind::Bin(op, a, b) => {
                let a = self.eval_node(a, vars, x, h)?;
                let b = self.eval_node(b, vars, x, h)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.norm() == 0.0 || b.norm() <= 1e-14 * a.norm() {
                            return Err(self.pole(n, x, h));
                        }
                        a / b
                    }
                }
            }
            Kind::Pow(a, k) => {
                let a = self.eval_node(a, vars, x, h)?;
                if *k < 0 && a.norm() == 0.0 {
                    return Err(self.pole(n, x, h));
                }
                a.powi(*k)
            }
            Kind::Call(f, a) => {
                let a = self.eval_node(a, vars, x, h)?;
                match f {
                    Func::Exp => a.exp(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tanh => {
                        // tanh only blows up where cosh vanishes
                        if a.re.abs() < 20.0 {
                            let ch = a.cosh();
                            if ch.norm() < POLE_TOL * a.sinh().norm().max(1.0) {
                                return Err(self.pole(n, x, h));
                            }
                        }
                        a.tanh()
                    }
                    Func::Log => {
                        if a.norm() == 0.0 {
                            return Err(self.pole(n, x, h));
                        }
                        a.ln()
                    }
                }
            }
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(EvalError::Overflow { what: self.snippet(n.span), x, h });
        }
        Ok(v)
    }

    fn pole(&self, n: &Node, x: C64, h: f64) -> EvalError {
        EvalError::Pole { what: self.snippet(n.span), x, h }
    }
}

/// Printing produces a source string that re-parses to an equivalent AST.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.ast)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, n: &Node) -> fmt::Result {
    match &n.kind {
        Kind::Num(v) => write!(f, "{v:?}"),
        Kind::Imag => write!(f, "i"),
        Kind::Pi => write!(f, "pi"),
        Kind::X => write!(f, "x"),
        Kind::H => write!(f, "h"),
        Kind::Var(k) => write!(f, "u{}", k + 1),
        Kind::Neg(a) => {
            write!(f, "-(")?;
            write_node(f, a)?;
            write!(f, ")")
        }
        Kind::Bin(op, a, b) => {
            let s = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
            };
            write!(f, "(")?;
            write_node(f, a)?;
            write!(f, " {s} ")?;
            write_node(f, b)?;
            write!(f, ")")
        }
        Kind::Pow(a, k) => {
            write!(f, "pow(")?;
            write_node(f, a)?;
            write!(f, ", {k})")
        }
        Kind::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a)?;
            write!(f, ")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::c;

    fn ev(s: &str, x: C64, h: f64) -> C64 {
        parse(s).unwrap().eval(x, h).unwrap()
    }

    #[test]
    fn arithmetic() {
        assert_eq!(ev("x*x + i*h", c(2.0, 0.0), 0.5), c(4.0, 0.5));
        assert_eq!(ev("-(x+i)", c(1.0, 0.0), 0.0), c(-1.0, -1.0));
        assert_eq!(ev("x", c(3.0, 4.0), 0.1), c(3.0, 4.0));
        assert_eq!(ev("2 - 3 - 4", c(0.0, 0.0), 0.0), c(-5.0, 0.0));
        assert_eq!(ev("8 / 4 / 2", c(0.0, 0.0), 0.0), c(1.0, 0.0));
        assert_eq!(ev("pow(x, -2)", c(2.0, 0.0), 0.0), c(0.25, 0.0));
    }

    #[test]
    fn exp_of_reciprocal_power() {
        let v = ev("exp(-1/pow(x,1))", c(2.0, 0.0), 0.0);
        assert!((v.re - (-0.5f64).exp()).abs() < 1e-15 && v.im == 0.0);
        assert!((v.re - 0.606531).abs() < 1e-6);
    }

    #[test]
    fn tanh_zero_and_pole() {
        assert_eq!(ev("tanh(x)", c(0.0, 0.0), 0.0), c(0.0, 0.0));
        let e = parse("tanh(x)").unwrap().eval(c(0.0, 1.5707963), 0.0);
        assert!(matches!(e, Err(EvalError::Pole { .. })), "{e:?}");
        // tanh(iτ) = i tan τ away from the pole
        let v = ev("tanh(x)", c(0.0, 1.0), 0.0);
        assert!((v - c(0.0, 1f64.tan())).norm() < 1e-14);
    }

    #[test]
    fn division_by_zero_is_a_pole() {
        let e = parse("1/x").unwrap().eval(c(0.0, 0.0), 0.1);
        assert!(matches!(e, Err(EvalError::Pole { ref what, .. }) if what == "1/x"));
    }

    #[test]
    fn errors_carry_positions() {
        match parse("x +\n  foo(x)") {
            Err(ParseError::UnknownIdentifier { name, line, col }) => {
                assert_eq!((name.as_str(), line, col), ("foo", 2, 3));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("x + "), Err(ParseError::Syntax { line: 1, .. })));
        assert!(matches!(parse("pow(x, 1.5)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("(x"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn log_sets_domain_cut() {
        assert!(parse("log(1+x)").unwrap().domain().has_log_cut);
        assert!(!parse("exp(x)").unwrap().domain().has_log_cut);
    }

    #[test]
    fn print_reparses() {
        for s in ["x*x + i*h", "-(x+i)", "exp(-1/pow(x,3))*sin(2*x)", "1e-7*log(x)-tanh(h/x)", "-x*-h"] {
            let e = parse(s).unwrap();
            let p = parse(&e.to_string()).unwrap();
            let z = c(0.37, -0.21);
            assert_eq!(e.eval(z, 0.3).unwrap(), p.eval(z, 0.3).unwrap(), "{s} -> {e}");
        }
    }
}
