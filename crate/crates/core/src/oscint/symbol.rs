use crate::mexpr::{EvalError, Expression, ParseError};
use crate::num::C64;
use serde_json::Value;

/// Amplitude a(y) of an oscillatory integral.
#[derive(Debug, Clone)]
pub enum Symbol {
    Analytic(Expression),
    /// e^{-y^{-gevrey_theta}} for y > 0, zero for y ≤ 0; Gevrey class s = 1 + 1/gevrey_theta.
    Gevrey { gevrey_theta: f64 },
    /// y^r for y > 0, zero for y ≤ 0.
    Cr { r: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolClass {
    Analytic,
    Gevrey { s: f64, gevrey_theta: f64 },
    Cr { r: u32 },
}

#[derive(Debug, thiserror::Error)]
pub enum SymbolError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("bad symbol spec: {0}")]
    Spec(String),
}

impl Symbol {
    pub fn analytic(src: &str) -> Result<Symbol, ParseError> {
        Ok(Symbol::Analytic(Expression::parse(src)?))
    }

    pub fn one() -> Symbol {
        Symbol::analytic("1").expect("literal parses")
    }

    pub fn gevrey_s(s: f64) -> Symbol {
        Symbol::Gevrey { gevrey_theta: 1.0 / (s - 1.0) }
    }

    pub fn class(&self) -> SymbolClass {
        match self {
            Symbol::Analytic(_) => SymbolClass::Analytic,
            Symbol::Gevrey { gevrey_theta } => SymbolClass::Gevrey { s: 1.0 + 1.0 / gevrey_theta, gevrey_theta: *gevrey_theta },
            Symbol::Cr { r } => SymbolClass::Cr { r: *r },
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, Symbol::Analytic(_))
    }

    /// True for the literal zero expression.
    pub fn is_zero(&self) -> bool {
        match self {
            Symbol::Analytic(e) => e.is_x_free() && e.eval(C64::new(0.3, 0.1), 0.7).map(|v| v == C64::new(0.0, 0.0)).unwrap_or(false),
            _ => false,
        }
    }

    /// Value on the real line; cutoff symbols vanish for y ≤ 0.
    pub fn eval_real(&self, y: f64, h: f64) -> Result<C64, EvalError> {
        match self {
            Symbol::Analytic(e) => e.eval(C64::new(y, 0.0), h),
            Symbol::Gevrey { gevrey_theta } => {
                Ok(if y <= 0.0 { C64::new(0.0, 0.0) } else { C64::new((-y.powf(-gevrey_theta)).exp(), 0.0) })
            }
            Symbol::Cr { r } => Ok(if y <= 0.0 { C64::new(0.0, 0.0) } else { C64::new(y.powi(*r as i32), 0.0) }),
        }
    }

    /// Analytic continuation of the y > 0 branch (principal powers).
    pub fn eval_continued(&self, z: C64, h: f64) -> Result<C64, EvalError> {
        match self {
            Symbol::Analytic(e) => e.eval(z, h),
            Symbol::Gevrey { gevrey_theta } => {
                if z.norm() == 0.0 {
                    return Ok(C64::new(0.0, 0.0));
                }
                Ok((-(z.ln() * -gevrey_theta).exp()).exp())
            }
            Symbol::Cr { r } => Ok(z.powi(*r as i32)),
        }
    }

    /// Real-axis points use the cutoff definition, everything else the continuation.
    pub fn eval(&self, z: C64, h: f64) -> Result<C64, EvalError> {
        if z.im == 0.0 {
            self.eval_real(z.re, h)
        } else {
            self.eval_continued(z, h)
        }
    }

    /// Accepts `"expr"`, `{"kind":"analytic","expr":..}`,
    /// `{"kind":"gevrey","s":..}` / `{"kind":"gevrey","gevrey_theta":..}`, `{"kind":"cr","r":..}`.
    pub fn from_json(v: &Value) -> Result<Symbol, SymbolError> {
        if let Some(s) = v.as_str() {
            return Ok(Symbol::analytic(s)?);
        }
        if let Some(x) = v.as_f64() {
            return Ok(Symbol::analytic(&format!("{x:?}"))?);
        }
        let kind = v.get("kind").and_then(Value::as_str).ok_or_else(|| SymbolError::Spec("missing `kind`".into()))?;
        match kind {
            "analytic" => {
                let e = v.get("expr").and_then(Value::as_str).ok_or_else(|| SymbolError::Spec("analytic symbol needs `expr`".into()))?;
                Ok(Symbol::analytic(e)?)
            }
            "gevrey" => {
                if let Some(t) = v.get("gevrey_theta").and_then(Value::as_f64) {
                    if t <= 0.0 {
                        return Err(SymbolError::Spec("gevrey_theta must be positive".into()));
                    }
                    Ok(Symbol::Gevrey { gevrey_theta: t })
                } else if let Some(s) = v.get("s").and_then(Value::as_f64) {
                    if s <= 1.0 {
                        return Err(SymbolError::Spec("Gevrey index s must exceed 1".into()));
                    }
                    Ok(Symbol::gevrey_s(s))
                } else {
                    Err(SymbolError::Spec("gevrey symbol needs `s` or `gevrey_theta`".into()))
                }
            }
            "cr" => {
                let r = v.get("r").and_then(Value::as_u64).ok_or_else(|| SymbolError::Spec("cr symbol needs integer `r`".into()))?;
                if r == 0 {
                    return Err(SymbolError::Spec("cr symbol needs r ≥ 1".into()));
                }
                Ok(Symbol::Cr { r: r as u32 })
            }
            k => Err(SymbolError::Spec(format!("unknown symbol kind `{k}`"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Symbol::Analytic(e) => serde_json::json!({"kind": "analytic", "expr": e.source()}),
            Symbol::Gevrey { gevrey_theta } => serde_json::json!({"kind": "gevrey", "gevrey_theta": gevrey_theta}),
            Symbol::Cr { r } => serde_json::json!({"kind": "cr", "r": r}),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_symbols() {
        let g = Symbol::gevrey_s(2.0);
        assert_eq!(g.eval_real(-0.3, 0.1).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(g.eval_real(0.0, 0.1).unwrap(), C64::new(0.0, 0.0));
        assert!((g.eval_real(0.5, 0.1).unwrap().re - (-2.0f64).exp()).abs() < 1e-15);
        let c = Symbol::Cr { r: 3 };
        assert_eq!(c.eval_real(-1.0, 0.1).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(c.eval_real(2.0, 0.1).unwrap(), C64::new(8.0, 0.0));
        let z = C64::new(0.4, -0.3);
        assert!((c.eval_continued(z, 0.1).unwrap() - z * z * z).norm() < 1e-15);
        assert!((g.eval_continued(z, 0.1).unwrap() - (-1.0 / z).exp()).norm() < 1e-14);
    }

    #[test]
    fn json_forms() {
        assert!(matches!(Symbol::from_json(&serde_json::json!("1")).unwrap(), Symbol::Analytic(_)));
        assert!(matches!(
            Symbol::from_json(&serde_json::json!({"kind":"gevrey","s":2.0})).unwrap(),
            Symbol::Gevrey { gevrey_theta } if (gevrey_theta - 1.0).abs() < 1e-15
        ));
        assert!(Symbol::from_json(&serde_json::json!({"kind":"cr","r":0})).is_err());
        assert!(Symbol::one().eval_real(3.0, 0.1).unwrap() == C64::new(1.0, 0.0));
        assert!(Symbol::analytic("0").unwrap().is_zero());
    }
}
