use super::{Domain, EvalError, Expression, ParseError};
use crate::num::{fd_derivative, CMat, C64};
use crate::oscint::Symbol;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix JSON: {0}")]
    Json(String),
    #[error("expected a {want}×{want} matrix, got {got}")]
    Dimension { want: usize, got: String },
    #[error("unknown builtin `{0}` (see list-builtins)")]
    UnknownBuiltin(String),
    #[error("builtin `{name}`: {msg}")]
    BadArg { name: String, msg: String },
    #[error("entry [{row}][{col}]: {err}")]
    Parse { row: usize, col: usize, err: ParseError },
}

/// n×n complex matrix valued function of (x, h).
#[derive(Debug, Clone)]
pub enum MatrixFunction {
    Entries { n: usize, entries: Vec<Expression> },
    Builtin(Builtin),
}

#[derive(Debug, Clone)]
pub enum Builtin {
    Constant(CMat),
    /// [[x+i, h^p θ(x)], [0, -(x+i)]]
    CounterexampleTriangular { theta: Symbol, p: i32 },
    /// R(x) diag(λ1, λ2) R(x)ᵀ with R the planar rotation by angle x.
    RotationFamily { l1: C64, l2: C64 },
    /// The coefficient of z h W' = A W: [[1, h z φ(z)], [0, 0]] with polynomial φ.
    SingularExample { phi: Vec<C64> },
    /// Rotation family with angle ψ(x) = angle·(1 + tanh(rate·x))/2.
    TanhProfile { l1: C64, l2: C64, angle: f64, rate: f64 },
}

pub struct BuiltinInfo {
    pub name: &'static str,
    pub args: &'static str,
    pub about: &'static str,
}

pub fn builtin_registry() -> &'static [BuiltinInfo] {
    &[
        BuiltinInfo { name: "constant", args: "M: matrix", about: "x- and h-independent matrix M" },
        BuiltinInfo {
            name: "counterexample_triangular",
            args: "theta: symbol, p: int",
            about: "[[x+i, h^p theta(x)], [0, -(x+i)]]",
        },
        BuiltinInfo { name: "rotation_family", args: "lambda1=1, lambda2=-1", about: "R(x) diag(l1,l2) R(x)^T, R planar rotation by x" },
        BuiltinInfo { name: "singular_example", args: "phi: coefficient list", about: "z h W' = [[1, h z phi(z)], [0, 0]] W" },
        BuiltinInfo {
            name: "tanh_profile",
            args: "lambda1=1, lambda2=-1, angle=pi/4, rate=1",
            about: "rotation family with angle (1+tanh(rate x)) angle/2",
        },
    ]
}

/// The JSON form of a matrix function, kept for echoing configs.
pub type MatrixSpec = Value;

fn rot(t: C64) -> CMat {
    let (c, s) = (t.cos(), t.sin());
    CMat::from_row_slice(2, 2, &[c, -s, s, c])
}

fn rotated(t: C64, l1: C64, l2: C64) -> CMat {
    let r = rot(t);
    let d = CMat::from_row_slice(2, 2, &[l1, C64::new(0.0, 0.0), C64::new(0.0, 0.0), l2]);
    &r * d * r.transpose()
}

pub fn complex_from_json(v: &Value) -> Result<C64, String> {
    if let Some(x) = v.as_f64() {
        return Ok(C64::new(x, 0.0));
    }
    if let Some(a) = v.as_array() {
        if a.len() == 2 {
            if let (Some(r), Some(i)) = (a[0].as_f64(), a[1].as_f64()) {
                return Ok(C64::new(r, i));
            }
        }
        return Err("complex numbers are written [re, im]".into());
    }
    if let Some(s) = v.as_str() {
        let e = Expression::parse(s).map_err(|e| e.to_string())?;
        if !e.is_x_free() {
            return Err(format!("`{s}` must not depend on x"));
        }
        return e.eval(C64::new(0.0, 0.0), 0.0).map_err(|e| e.to_string());
    }
    Err(format!("not a complex number: {v}"))
}

fn matrix_from_json(v: &Value) -> Result<CMat, String> {
    let rows = v.as_array().ok_or("matrix must be an array of rows")?;
    let n = rows.len();
    let mut m = CMat::zeros(n, n);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_array().ok_or("matrix rows must be arrays")?;
        if r.len() != n {
            return Err(format!("row {i} has {} entries, expected {n}", r.len()));
        }
        for (j, e) in r.iter().enumerate() {
            m[(i, j)] = complex_from_json(e)?;
        }
    }
    Ok(m)
}

impl MatrixFunction {
    /// Parses `{"n":2,"entries":[[..],[..]]}` or `{"builtin":"..","args":{..}}`.
    pub fn parse(source: &str, n: usize) -> Result<MatrixFunction, MatrixError> {
        let v: Value = serde_json::from_str(source).map_err(|e| MatrixError::Json(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        let m = Self::from_json(&v)?;
        if m.dim() != n {
            return Err(MatrixError::Dimension { want: n, got: m.dim().to_string() });
        }
        Ok(m)
    }

    pub fn from_json(v: &Value) -> Result<MatrixFunction, MatrixError> {
        if let Some(name) = v.get("builtin").and_then(Value::as_str) {
            let args = v.get("args").cloned().unwrap_or(Value::Object(Default::default()));
            return Self::builtin(name, &args);
        }
        let rows = v.get("entries").and_then(Value::as_array).ok_or_else(|| MatrixError::Json("expected `entries` or `builtin`".into()))?;
        let n = rows.len();
        if let Some(decl) = v.get("n").and_then(Value::as_u64) {
            if decl as usize != n {
                return Err(MatrixError::Dimension { want: decl as usize, got: format!("{n} rows") });
            }
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_array().ok_or_else(|| MatrixError::Json(format!("row {i} is not an array")))?;
            if r.len() != n {
                return Err(MatrixError::Dimension { want: n, got: format!("row {i} with {} entries", r.len()) });
            }
            for (j, e) in r.iter().enumerate() {
                let src = match e {
                    Value::String(s) => s.clone(),
                    Value::Number(x) => x.to_string(),
                    _ => return Err(MatrixError::Json(format!("entry [{i}][{j}] must be a string or number"))),
                };
                entries.push(Expression::parse(&src).map_err(|err| MatrixError::Parse { row: i, col: j, err })?);
            }
        }
        Ok(MatrixFunction::Entries { n, entries })
    }

    pub fn builtin(name: &str, args: &Value) -> Result<MatrixFunction, MatrixError> {
        let bad = |msg: String| MatrixError::BadArg { name: name.to_string(), msg };
        let num = |key: &str, default: C64| -> Result<C64, MatrixError> {
            match args.get(key) {
                None => Ok(default),
                Some(v) => complex_from_json(v).map_err(|m| MatrixError::BadArg { name: name.to_string(), msg: format!("{key}: {m}") }),
            }
        };
        let b = match name {
            "constant" => {
                let m = args.get("M").ok_or_else(|| bad("needs `M`".into()))?;
                Builtin::Constant(matrix_from_json(m).map_err(bad)?)
            }
            "counterexample_triangular" => {
                let theta = match args.get("theta") {
                    Some(t) => Symbol::from_json(t).map_err(|e| bad(e.to_string()))?,
                    None => Symbol::one(),
                };
                let p = args.get("p").and_then(Value::as_i64).unwrap_or(1);
                if p < 1 {
                    return Err(bad("p must be ≥ 1".into()));
                }
                Builtin::CounterexampleTriangular { theta, p: p as i32 }
            }
            "rotation_family" => Builtin::RotationFamily { l1: num("lambda1", C64::new(1.0, 0.0))?, l2: num("lambda2", C64::new(-1.0, 0.0))? },
            "singular_example" => {
                let phi = args.get("phi").and_then(Value::as_array).ok_or_else(|| bad("needs `phi` coefficient list".into()))?;
                let phi = phi.iter().map(complex_from_json).collect::<Result<Vec<_>, _>>().map_err(bad)?;
                Builtin::SingularExample { phi }
            }
            "tanh_profile" => Builtin::TanhProfile {
                l1: num("lambda1", C64::new(1.0, 0.0))?,
                l2: num("lambda2", C64::new(-1.0, 0.0))?,
                angle: num("angle", C64::new(std::f64::consts::FRAC_PI_4, 0.0))?.re,
                rate: num("rate", C64::new(1.0, 0.0))?.re,
            },
            other => return Err(MatrixError::UnknownBuiltin(other.to_string())),
        };
        Ok(MatrixFunction::Builtin(b))
    }

    pub fn constant(m: CMat) -> MatrixFunction {
        MatrixFunction::Builtin(Builtin::Constant(m))
    }

    /// Builds an entry-wise function from row-major expression strings.
    pub fn from_strs(n: usize, src: &[&str]) -> Result<MatrixFunction, MatrixError> {
        if src.len() != n * n {
            return Err(MatrixError::Dimension { want: n, got: format!("{} entries", src.len()) });
        }
        let mut entries = Vec::with_capacity(n * n);
        for (k, s) in src.iter().enumerate() {
            entries.push(Expression::parse(s).map_err(|err| MatrixError::Parse { row: k / n, col: k % n, err })?);
        }
        Ok(MatrixFunction::Entries { n, entries })
    }

    pub fn dim(&self) -> usize {
        match self {
            MatrixFunction::Entries { n, .. } => *n,
            MatrixFunction::Builtin(Builtin::Constant(m)) => m.nrows(),
            MatrixFunction::Builtin(_) => 2,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            MatrixFunction::Entries { entries, .. } => Domain { has_log_cut: entries.iter().any(|e| e.domain().has_log_cut) },
            MatrixFunction::Builtin(Builtin::CounterexampleTriangular { theta: Symbol::Analytic(e), .. }) => e.domain(),
            _ => Domain::default(),
        }
    }

    pub fn eval(&self, x: C64, h: f64) -> Result<CMat, EvalError> {
        let z = C64::new(0.0, 0.0);
        match self {
            MatrixFunction::Entries { n, entries } => {
                let mut m = CMat::zeros(*n, *n);
                for i in 0..*n {
                    for j in 0..*n {
                        m[(i, j)] = entries[i * n + j].eval(x, h)?;
                    }
                }
                Ok(m)
            }
            MatrixFunction::Builtin(b) => Ok(match b {
                Builtin::Constant(m) => m.clone(),
                Builtin::CounterexampleTriangular { theta, p } => {
                    let l = x + C64::new(0.0, 1.0);
                    let t = theta.eval(x, h)? * h.powi(*p);
                    CMat::from_row_slice(2, 2, &[l, t, z, -l])
                }
                Builtin::RotationFamily { l1, l2 } => rotated(x, *l1, *l2),
                Builtin::SingularExample { phi } => {
                    let mut v = z;
                    for c in phi.iter().rev() {
                        v = v * x + c;
                    }
                    CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), x * v * h, z, z])
                }
                Builtin::TanhProfile { l1, l2, angle, rate } => {
                    let s = x * *rate;
                    if s.re.abs() < 20.0 && s.cosh().norm() < super::POLE_TOL {
                        return Err(EvalError::Pole { what: "tanh_profile".into(), x, h });
                    }
                    let t = (s.tanh() + 1.0) * (0.5 * angle);
                    rotated(t, *l1, *l2)
                }
            }),
        }
    }

    /// d/dx by fourth-order central differences along `dir`.
    pub fn deriv(&self, x: C64, h: f64, dir: C64) -> Result<CMat, EvalError> {
        // probe the stencil points first so a pole is reported rather than panicking
        let s = crate::num::fd_step(x);
        for k in [-2.0, -1.0, 1.0, 2.0] {
            self.eval(x + dir * (s * k), h)?;
        }
        Ok(fd_derivative(|y| self.eval(y, h).expect("probed above"), x, dir))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{c, max_abs};

    #[test]
    fn constant_builtin() {
        let m = MatrixFunction::parse(r#"{"builtin":"constant","args":{"M":[[1,0],[0,-1]]}}"#, 2).unwrap();
        for (x, h) in [(c(0.0, 0.0), 0.1), (c(3.0, -2.0), 0.7)] {
            let v = m.eval(x, h).unwrap();
            assert_eq!(v, CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]));
        }
    }

    #[test]
    fn counterexample_triangular_at_origin() {
        let m = MatrixFunction::parse(r#"{"builtin":"counterexample_triangular","args":{"theta":"1","p":1}}"#, 2).unwrap();
        let v = m.eval(c(0.0, 0.0), 0.1).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.1, 0.0), c(0.0, 0.0), c(0.0, -1.0)]);
        assert!(max_abs(&(v - want)) < 1e-16);
    }

    #[test]
    fn entries_match_triangular_diagonal() {
        let m = MatrixFunction::parse(r#"{"n":2,"entries":[["x+i","0"],["0","-(x+i)"]]}"#, 2).unwrap();
        let t = MatrixFunction::parse(r#"{"builtin":"counterexample_triangular","args":{"theta":"1","p":1}}"#, 2).unwrap();
        let x = c(0.3, 0.0);
        let (a, b) = (m.eval(x, 0.1).unwrap(), t.eval(x, 0.1).unwrap());
        assert_eq!(a[(0, 0)], b[(0, 0)]);
        assert_eq!(a[(1, 1)], b[(1, 1)]);
        assert_eq!(a[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(MatrixFunction::parse(r#"{"builtin":"nope"}"#, 2), Err(MatrixError::UnknownBuiltin(_))));
        assert!(matches!(MatrixFunction::parse(r#"{"n":2,"entries":[["x"]]}"#, 2), Err(MatrixError::Dimension { .. })));
        assert!(matches!(MatrixFunction::parse(r#"{"n":1,"entries":[["x"]]}"#, 2), Err(MatrixError::Dimension { .. })));
        assert!(matches!(MatrixFunction::parse(r#"{"n":1,"entries":[["q"]]}"#, 1), Err(MatrixError::Parse { .. })));
        assert!(matches!(MatrixFunction::parse("{", 1), Err(MatrixError::Json(_))));
    }

    #[test]
    fn rotation_family_is_similar_to_diag() {
        let m = MatrixFunction::parse(r#"{"builtin":"rotation_family"}"#, 2).unwrap();
        let v = m.eval(c(0.4, 0.0), 0.1).unwrap();
        let tr = v[(0, 0)] + v[(1, 1)];
        let det = v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)];
        assert!(tr.norm() < 1e-15 && (det + 1.0).norm() < 1e-15);
    }

    #[test]
    fn singular_example_entries() {
        let m = MatrixFunction::parse(r#"{"builtin":"singular_example","args":{"phi":[1,[0,2]]}}"#, 2).unwrap();
        let z = c(0.5, 0.0);
        let v = m.eval(z, 0.2).unwrap();
        // h z φ(z) = 0.2 · 0.5 · (1 + 2i·0.5)
        assert!((v[(0, 1)] - c(0.1, 0.1)).norm() < 1e-15);
    }
}
