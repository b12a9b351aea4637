use crate::ast::{Expr, Func, Node};

impl Expr {
    /// Exact partial derivative with respect to variable slot `var`.
    pub fn differentiate(&self, var: usize) -> Expr {
        match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var { index, .. } => {
                if *index == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(a, b) => Expr::add(a.differentiate(var), b.differentiate(var)),
            Node::Sub(a, b) => Expr::sub(a.differentiate(var), b.differentiate(var)),
            Node::Mul(a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                Expr::add(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db))
            }
            Node::Div(a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                if db.is_zero() {
                    return Expr::div(da, b.clone());
                }
                // (a'b - ab') / b^2
                Expr::div(
                    Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                    Expr::pow(b.clone(), 2),
                )
            }
            Node::Pow(a, k) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                Expr::mul(
                    Expr::mul(Expr::constant(*k as f64), Expr::pow(a.clone(), k - 1)),
                    da,
                )
            }
            Node::Neg(a) => Expr::neg(a.differentiate(var)),
            Node::Call(func, a) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match func {
                    Func::Sin => Expr::call(Func::Cos, a.clone()),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, a.clone())),
                    Func::Sinh => Expr::call(Func::Cosh, a.clone()),
                    Func::Cosh => Expr::call(Func::Sinh, a.clone()),
                    Func::Exp => self.clone(),
                    Func::Ln => return Expr::div(da, a.clone()),
                    Func::Sqrt => {
                        return Expr::div(da, Expr::mul(Expr::constant(2.0), self.clone()))
                    }
                    Func::Tan => Expr::add(Expr::one(), Expr::pow(self.clone(), 2)),
                    Func::Tanh => Expr::sub(Expr::one(), Expr::pow(self.clone(), 2)),
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// Applies [`Expr::differentiate`] once per entry of `vars`, left to right.
    pub fn differentiate_many(&self, vars: &[usize]) -> Expr {
        vars.iter().fold(self.clone(), |e, &v| e.differentiate(v))
    }
}

#[cfg(test)]
mod tests {
    use crate::parse_expression;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_rule() {
        let e = parse_expression("x^2", &["x"]).unwrap();
        assert_eq!(e.differentiate(0).eval(&[3.0]).unwrap(), 6.0);
    }

    #[test]
    fn third_derivative_of_sine() {
        let e = parse_expression("sin(t)", &["t"]).unwrap();
        assert_eq!(e.differentiate_many(&[0, 0, 0]).eval(&[0.0]).unwrap(), -1.0);
    }

    #[test]
    fn mixed_partial_of_phi_independent_expression() {
        let e = parse_expression("sin(theta)^2", &["theta", "phi"]).unwrap();
        let d = e.differentiate_many(&[0, 1]);
        assert!(d.is_zero());
        assert_eq!(d.eval(&[0.3, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn every_function_matches_its_known_derivative() {
        let x = 0.37_f64;
        let cases: [(&str, f64); 9] = [
            ("sin(x)", x.cos()),
            ("cos(x)", -x.sin()),
            ("sinh(x)", x.cosh()),
            ("cosh(x)", x.sinh()),
            ("exp(x)", x.exp()),
            ("ln(x)", 1.0 / x),
            ("sqrt(x)", 0.5 / x.sqrt()),
            ("tan(x)", 1.0 / x.cos().powi(2)),
            ("tanh(x)", 1.0 / x.cosh().powi(2)),
        ];
        for (src, expected) in cases {
            let e = parse_expression(src, &["x"]).unwrap();
            assert_relative_eq!(
                e.differentiate(0).eval(&[x]).unwrap(),
                expected,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn quotient_and_chain() {
        let e = parse_expression("exp(2*x)/(1 + x^2)", &["x"]).unwrap();
        let x = 0.8_f64;
        let expected =
            2.0 * (2.0 * x).exp() / (1.0 + x * x) - (2.0 * x).exp() * 2.0 * x / (1.0 + x * x).powi(2);
        assert_relative_eq!(
            e.differentiate(0).eval(&[x]).unwrap(),
            expected,
            max_relative = 1e-14
        );
    }
}
