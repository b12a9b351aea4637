use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use crate::ast::Expr;
use crate::eval::EvalError;
use thiserror::Error;

/// Highest derivative order a [`DerivativeTable`] can carry.
pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("derivative order {0} exceeds the supported maximum of {MAX_ORDER}")]
    OrderTooHigh(usize),
    #[error("evaluating partial {multi_index:?}: {source}")]
    Eval {
        multi_index: Vec<usize>,
        #[source]
        source: EvalError,
    },
}

/// All partial derivatives of one scalar up to a fixed total order, at one point.
///
/// Storage is dense and fully symmetric: `d2(i, j) == d2(j, i)` bit for bit,
/// because both read the same evaluated derivative tree.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTable {
    order: usize,
    n: usize,
    value: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    third: Vec<f64>,
}

impl DerivativeTable {
    /// A table whose value and derivatives are all zero.
    pub fn zeros(n: usize, order: usize) -> Self {
        DerivativeTable {
            order,
            n,
            value: 0.0,
            first: vec![0.0; if order >= 1 { n } else { 0 }],
            second: vec![0.0; if order >= 2 { n * n } else { 0 }],
            third: vec![0.0; if order >= 3 { n * n * n } else { 0 }],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn d1(&self, i: usize) -> f64 {
        self.first[i]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.second[i * self.n + j]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third[(i * self.n + j) * self.n + k]
    }

    pub fn gradient(&self) -> &[f64] {
        &self.first
    }

    /// Entry for an arbitrary (unsorted) multi-index; `&[]` is the plain value.
    pub fn get(&self, idx: &[usize]) -> Option<f64> {
        if idx.len() > self.order || idx.iter().any(|&i| i >= self.n) {
            return None;
        }
        Some(match idx {
            [] => self.value,
            [i] => self.d1(*i),
            [i, j] => self.d2(*i, *j),
            [i, j, k] => self.d3(*i, *j, *k),
            _ => return None,
        })
    }

    /// Sorted multi-index view of the table.
    pub fn entries(&self) -> BTreeMap<Vec<usize>, f64> {
        multi_indices(self.n, self.order)
            .into_iter()
            .map(|mi| {
                let v = self.get(&mi).expect("index in range");
                (mi, v)
            })
            .collect()
    }

    fn set(&mut self, idx: &[usize], v: f64) {
        let n = self.n;
        match idx {
            [] => self.value = v,
            [i] => self.first[*i] = v,
            [i, j] => {
                self.second[i * n + j] = v;
                self.second[j * n + i] = v;
            }
            [i, j, k] => {
                for (a, b, c) in permutations3(*i, *j, *k) {
                    self.third[(a * n + b) * n + c] = v;
                }
            }
            _ => unreachable!("order checked by caller"),
        }
    }
}

fn permutations3(i: usize, j: usize, k: usize) -> [(usize, usize, usize); 6] {
    [
        (i, j, k),
        (i, k, j),
        (j, i, k),
        (j, k, i),
        (k, i, j),
        (k, j, i),
    ]
}

/// Non-decreasing multi-indices over `n` variables of total degree `<= order`.
pub fn multi_indices(n: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..order {
        let mut next = Vec::new();
        for mi in &frontier {
            let start = mi.last().copied().unwrap_or(0);
            for v in start..n {
                let mut m = mi.clone();
                m.push(v);
                next.push(m);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// An expression together with a memo of its symbolic partial derivatives.
///
/// The memo only ever grows; a derivative, once inserted for a multi-index,
/// is never replaced, so concurrent readers always see a consistent tree.
#[derive(Debug)]
pub struct SymbolicField {
    expr: Expr,
    nvars: usize,
    deps: Vec<bool>,
    memo: RwLock<HashMap<Vec<usize>, Expr>>,
}

impl Clone for SymbolicField {
    fn clone(&self) -> Self {
        SymbolicField::new(self.expr.clone(), self.nvars)
    }
}

impl SymbolicField {
    pub fn new(expr: Expr, nvars: usize) -> Self {
        let deps = (0..nvars).map(|v| expr.depends_on(v)).collect();
        SymbolicField {
            expr,
            nvars,
            deps,
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Symbolic partial for `idx` (order-insensitive).
    pub fn partial(&self, idx: &[usize]) -> Expr {
        if idx.is_empty() {
            return self.expr.clone();
        }
        let mut key = idx.to_vec();
        key.sort_unstable();
        if let Some(e) = self.memo.read().expect("memo poisoned").get(&key) {
            return e.clone();
        }
        let (last, parent) = key.split_last().expect("non-empty");
        let d = self.partial(parent).differentiate(*last);
        self.memo
            .write()
            .expect("memo poisoned")
            .entry(key)
            .or_insert(d)
            .clone()
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64, FieldError> {
        self.expr.eval(values).map_err(|source| FieldError::Eval {
            multi_index: vec![],
            source,
        })
    }

    /// Value and every partial of total degree `<= order` at `values`.
    pub fn evaluate_with_derivatives(
        &self,
        values: &[f64],
        order: usize,
    ) -> Result<DerivativeTable, FieldError> {
        if order > MAX_ORDER {
            return Err(FieldError::OrderTooHigh(order));
        }
        let mut table = DerivativeTable::zeros(self.nvars, order);
        if self.expr.as_constant().is_some() {
            table.value = self.eval(values)?;
            return Ok(table);
        }
        for mi in multi_indices(self.nvars, order) {
            if mi.iter().any(|&v| !self.deps[v]) {
                continue;
            }
            let d = self.partial(&mi);
            let v = d.eval(values).map_err(|source| FieldError::Eval {
                multi_index: mi.clone(),
                source,
            })?;
            table.set(&mi, v);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_expression;
    use approx::assert_relative_eq;

    fn field(src: &str, coords: &[&str]) -> SymbolicField {
        SymbolicField::new(parse_expression(src, coords).unwrap(), coords.len())
    }

    #[test]
    fn square_table() {
        let t = field("x^2", &["x"])
            .evaluate_with_derivatives(&[3.0], 2)
            .unwrap();
        let expected: BTreeMap<Vec<usize>, f64> =
            [(vec![], 9.0), (vec![0], 6.0), (vec![0, 0], 2.0)].into();
        assert_eq!(t.entries(), expected);
    }

    #[test]
    fn reciprocal_at_origin_is_a_domain_error() {
        let err = field("1/x", &["x"])
            .evaluate_with_derivatives(&[0.0], 1)
            .unwrap_err();
        assert!(matches!(
            err,
            FieldError::Eval {
                source: EvalError::DivisionByZero { .. },
                ..
            }
        ));
    }

    #[test]
    fn squared_sinh_against_hand_values() {
        let t = field("sinh(r)^2", &["r"])
            .evaluate_with_derivatives(&[1.0], 1)
            .unwrap();
        let s = 1.0_f64.sinh();
        let c = 1.0_f64.cosh();
        assert_relative_eq!(t.value(), s * s, max_relative = 1e-15);
        assert_relative_eq!(t.d1(0), 2.0 * s * c, max_relative = 1e-15);
    }

    #[test]
    fn order_limit() {
        assert_eq!(
            field("x", &["x"]).evaluate_with_derivatives(&[0.0], 4),
            Err(FieldError::OrderTooHigh(4))
        );
    }

    #[test]
    fn mixed_third_partials_are_symmetric() {
        let t = field("x^2*y*exp(z) + sin(x*y*z)", &["x", "y", "z"])
            .evaluate_with_derivatives(&[0.3, -0.2, 0.9], 3)
            .unwrap();
        for (i, j, k) in permutations3(0, 1, 2) {
            assert_eq!(t.d3(i, j, k), t.d3(0, 1, 2));
        }
        assert_eq!(t.d2(0, 2), t.d2(2, 0));
        assert_eq!(t.get(&[2, 0, 0]), t.get(&[0, 0, 2]));
    }

    #[test]
    fn multi_index_count() {
        // C(n + k, k) monomials of degree <= k in n variables.
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(6, 3).len(), 84);
    }
}
