use crate::ast::{Expr, Func, Node};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{subexpr}`")]
    DivisionByZero { subexpr: String },
    #[error("{func} of non-positive argument {value} in `{subexpr}`")]
    Domain {
        func: &'static str,
        value: f64,
        subexpr: String,
    },
    #[error("variable slot {index} (`{name}`) has no value; {available} supplied")]
    MissingVariable {
        index: usize,
        name: String,
        available: usize,
    },
    #[error("non-finite result in `{subexpr}`")]
    NonFinite { subexpr: String },
}

/// Raw function application without subexpression context.
pub(crate) fn apply_func(func: Func, x: f64) -> Result<f64, &'static str> {
    Ok(match func {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Sinh => x.sinh(),
        Func::Cosh => x.cosh(),
        Func::Exp => x.exp(),
        Func::Ln => {
            if x <= 0.0 {
                return Err("ln");
            }
            x.ln()
        }
        Func::Sqrt => {
            if x < 0.0 {
                return Err("sqrt");
            }
            x.sqrt()
        }
        Func::Tan => x.tan(),
        Func::Tanh => x.tanh(),
    })
}

impl Expr {
    /// Evaluates the tree at `values`, indexed by variable slot.
    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        let v = match self.node() {
            Node::Const(c) => *c,
            Node::Var { index, name } => {
                *values.get(*index).ok_or_else(|| EvalError::MissingVariable {
                    index: *index,
                    name: name.to_string(),
                    available: values.len(),
                })?
            }
            Node::Add(a, b) => a.eval(values)? + b.eval(values)?,
            Node::Sub(a, b) => a.eval(values)? - b.eval(values)?,
            Node::Mul(a, b) => a.eval(values)? * b.eval(values)?,
            Node::Div(a, b) => {
                let den = b.eval(values)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero {
                        subexpr: self.to_string(),
                    });
                }
                a.eval(values)? / den
            }
            Node::Pow(a, k) => {
                let base = a.eval(values)?;
                if base == 0.0 && *k < 0 {
                    return Err(EvalError::DivisionByZero {
                        subexpr: self.to_string(),
                    });
                }
                base.powi(*k)
            }
            Node::Neg(a) => -a.eval(values)?,
            Node::Call(func, a) => {
                let x = a.eval(values)?;
                apply_func(*func, x).map_err(|name| EvalError::Domain {
                    func: name,
                    value: x,
                    subexpr: self.to_string(),
                })?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite {
                subexpr: self.to_string(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_expression;

    #[test]
    fn exp_at_zero() {
        let e = parse_expression("exp(x)", &["x"]).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn reciprocal_at_zero_is_reported() {
        let e = parse_expression("1/x", &["x"]).unwrap();
        match e.eval(&[0.0]) {
            Err(EvalError::DivisionByZero { subexpr }) => assert_eq!(subexpr, "1.0/x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_domain_names_offending_subexpression() {
        let e = parse_expression("2 + ln(x - 1)", &["x"]).unwrap();
        let err = e.eval(&[0.5]).unwrap_err();
        assert!(matches!(err, EvalError::Domain { func: "ln", .. }));
        assert!(err.to_string().contains("ln(x - 1.0)"), "{err}");
    }

    #[test]
    fn negative_power_of_zero() {
        let e = parse_expression("x^(-2)", &["x"]).unwrap();
        assert!(matches!(e.eval(&[0.0]), Err(EvalError::DivisionByZero { .. })));
    }
}
