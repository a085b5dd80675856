use std::fmt;

/// Elementary functions accepted by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Arctan,
    Exp,
    Tanh,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Arctan,
        Func::Exp,
        Func::Tanh,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Arctan => "arctan",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Expression tree. Variables are referenced by slot index into the owning
/// function's variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// True when the tree does not reference variable slot `v`.
    pub fn free_of(&self, v: usize) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(k) => *k != v,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.free_of(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.free_of(v) && b.free_of(v)
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }
}

// Smart constructors with light algebraic simplification. They keep the
// derivative trees small; they never change the value of finite inputs.

pub fn cnst(c: f64) -> Expr {
    Expr::Const(c)
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => match b {
            Expr::Neg(nb) => Expr::Sub(Box::new(a), nb),
            b => Expr::Add(Box::new(a), Box::new(b)),
        },
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => match b {
            Expr::Neg(nb) => Expr::Add(Box::new(a), nb),
            b => Expr::Sub(Box::new(a), Box::new(b)),
        },
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(0.0), _) => Expr::Const(0.0),
        (_, Some(0.0)) => Expr::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (Some(-1.0), _) => neg(b),
        (_, Some(-1.0)) => neg(a),
        // keep constants on the left so they fold with each other
        (None, Some(_)) => mul(b, a),
        _ => match (a, b) {
            (Expr::Const(x), Expr::Mul(l, r)) if l.is_const() => {
                mul(Expr::Const(x * l.as_const().unwrap()), *r)
            }
            (Expr::Neg(l), r) => neg(mul(*l, r)),
            (l, Expr::Neg(r)) => neg(mul(l, *r)),
            (l, r) => Expr::Mul(Box::new(l), Box::new(r)),
        },
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(0.0), _) => Expr::Const(0.0),
        (_, Some(1.0)) => a,
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn powi(a: Expr, n: i32) -> Expr {
    match (n, a) {
        (0, _) => Expr::Const(1.0),
        (1, a) => a,
        (n, Expr::Pow(base, m)) if m.checked_mul(n).is_some() => powi(*base, m * n),
        (n, a) => Expr::Pow(Box::new(a), n),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

/// Fully parenthesised canonical form; `names[k]` is the name of slot k.
pub struct Printer<'a> {
    pub expr: &'a Expr,
    pub names: &'a [String],
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, self.names)
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // `{:?}` is the shortest representation that round-trips exactly.
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{:?}", c)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, names: &[String]) -> fmt::Result {
    match e {
        Expr::Const(c) => write_const(f, *c),
        Expr::Var(k) => f.write_str(&names[*k]),
        Expr::Neg(a) => {
            f.write_str("(-")?;
            write_expr(f, a, names)?;
            f.write_str(")")
        }
        Expr::Add(a, b) => write_bin(f, a, " + ", b, names),
        Expr::Sub(a, b) => write_bin(f, a, " - ", b, names),
        Expr::Mul(a, b) => write_bin(f, a, " * ", b, names),
        Expr::Div(a, b) => write_bin(f, a, " / ", b, names),
        Expr::Pow(a, n) => {
            f.write_str("(")?;
            write_expr(f, a, names)?;
            if *n < 0 {
                write!(f, "^(-{}))", -(*n as i64))
            } else {
                write!(f, "^{})", n)
            }
        }
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, a, names)?;
            f.write_str(")")
        }
    }
}

fn write_bin(
    f: &mut fmt::Formatter<'_>,
    a: &Expr,
    op: &str,
    b: &Expr,
    names: &[String],
) -> fmt::Result {
    f.write_str("(")?;
    write_expr(f, a, names)?;
    f.write_str(op)?;
    write_expr(f, b, names)?;
    f.write_str(")")
}
