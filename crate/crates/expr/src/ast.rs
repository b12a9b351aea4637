use std::fmt;
use std::sync::Arc;

/// Elementary functions accepted by the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Exp,
    Ln,
    Sqrt,
    Tan,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Tan,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// A node of an expression tree. Children are shared through [`Expr`].
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Coordinate slot `index` of the binding chart; `name` is kept for printing.
    Var { index: usize, name: Arc<str> },
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, i32),
    Neg(Expr),
    Call(Func, Expr),
}

/// Discriminant of a [`Node`], handy for tests and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Constant,
    Variable,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Call,
}

/// Immutable, cheaply clonable expression tree.
///
/// The constructors below fold constants and drop additive zeros and
/// multiplicative ones, which keeps repeated symbolic differentiation from
/// blowing up. No other simplification is attempted.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn kind(&self) -> NodeKind {
        match self.node() {
            Node::Const(_) => NodeKind::Constant,
            Node::Var { .. } => NodeKind::Variable,
            Node::Add(..) => NodeKind::Add,
            Node::Sub(..) => NodeKind::Sub,
            Node::Mul(..) => NodeKind::Mul,
            Node::Div(..) => NodeKind::Div,
            Node::Pow(..) => NodeKind::Pow,
            Node::Neg(_) => NodeKind::Neg,
            Node::Call(..) => NodeKind::Call,
        }
    }

    /// Children in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Const(_) | Node::Var { .. } => vec![],
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => vec![a, b],
            Node::Pow(a, _) | Node::Neg(a) | Node::Call(_, a) => vec![a],
        }
    }

    fn wrap(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn constant(value: f64) -> Expr {
        Expr::wrap(Node::Const(value))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(index: usize, name: impl Into<Arc<str>>) -> Expr {
        Expr::wrap(Node::Var {
            index,
            name: name.into(),
        })
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_constant() == Some(1.0)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_constant(), b.as_constant()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::wrap(Node::Add(a, b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_constant(), b.as_constant()) {
            (Some(x), Some(y)) => Expr::constant(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::wrap(Node::Sub(a, b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        match (a.as_constant(), b.as_constant()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::wrap(Node::Mul(a, b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if a.is_zero() && !b.is_zero() {
            return Expr::zero();
        }
        match (a.as_constant(), b.as_constant()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::constant(x / y),
            _ => Expr::wrap(Node::Div(a, b)),
        }
    }

    pub fn pow(base: Expr, exp: i32) -> Expr {
        match exp {
            0 => Expr::one(),
            1 => base,
            _ => match base.as_constant() {
                Some(c) if c != 0.0 || exp > 0 => Expr::constant(c.powi(exp)),
                _ => Expr::wrap(Node::Pow(base, exp)),
            },
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::wrap(Node::Neg(a)),
        }
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        if let Some(c) = arg.as_constant() {
            let folded = crate::eval::apply_func(func, c);
            if let Ok(v) = folded {
                if v.is_finite() {
                    return Expr::constant(v);
                }
            }
        }
        Expr::wrap(Node::Call(func, arg))
    }

    pub fn scale(self, c: f64) -> Expr {
        Expr::mul(Expr::constant(c), self)
    }

    /// Largest variable slot referenced, if any.
    pub fn max_var_index(&self) -> Option<usize> {
        match self.node() {
            Node::Const(_) => None,
            Node::Var { index, .. } => Some(*index),
            _ => self
                .children()
                .into_iter()
                .filter_map(Expr::max_var_index)
                .max(),
        }
    }

    /// True if the expression depends on variable slot `index`.
    pub fn depends_on(&self, index: usize) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var { index: i, .. } => *i == index,
            _ => self.children().into_iter().any(|c| c.depends_on(index)),
        }
    }

    /// Rebinds every variable slot through `map`; used to lift factor
    /// expressions into a product chart.
    pub fn reindex(&self, map: &dyn Fn(usize) -> usize) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var { index, name } => Expr::var(map(*index), name.clone()),
            Node::Add(a, b) => Expr::add(a.reindex(map), b.reindex(map)),
            Node::Sub(a, b) => Expr::sub(a.reindex(map), b.reindex(map)),
            Node::Mul(a, b) => Expr::mul(a.reindex(map), b.reindex(map)),
            Node::Div(a, b) => Expr::div(a.reindex(map), b.reindex(map)),
            Node::Pow(a, k) => Expr::pow(a.reindex(map), *k),
            Node::Neg(a) => Expr::neg(a.reindex(map)),
            Node::Call(f, a) => Expr::call(*f, a.reindex(map)),
        }
    }

    /// Number of nodes, counting shared subtrees once per occurrence.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Pow(..) => 4,
            Node::Const(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // `{:?}` is the shortest representation that parses back to the same bits.
    if c < 0.0 {
        write!(f, "-{:?}", -c)
    } else {
        write!(f, "{c:?}")
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write_const(f, *c),
            Node::Var { name, .. } => write!(f, "{name}"),
            Node::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 2)
            }
            Node::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Node::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Node::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 3)
            }
            Node::Pow(a, k) => {
                write_child(f, a, 5)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Node::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 3)
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
