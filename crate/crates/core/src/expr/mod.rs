//! Closed-form functions of one variable with exact derivatives up to order 3.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr    = term , { ("+" | "-") , term } ;
//! term    = unary , { ("*" | "/") , unary } ;
//! unary   = "-" , unary | power ;
//! power   = primary , [ "^" , exponent ] ;
//! exponent= integer | "-" , integer | "(" , [ "+" | "-" ] , integer , ")" ;
//! primary = number | name | func , "(" , expr , ")" | "(" , expr , ")" ;
//! func    = "sin" | "cos" | "tan" | "arctan" | "exp" | "tanh" | "sqrt" ;
//! number  = digits , [ "." , digits ] , [ ("e" | "E") , [ "+" | "-" ] , digits ] ;
//! name    = the declared variable | a declared parameter | "pi" | "e" ;
//! ```

mod ast;
mod parser;

pub use ast::{Expr, Func};

use ast::{add, call, cnst, div, mul, neg, powi, sub, Printer};
use std::fmt;
use thiserror::Error;

/// Highest derivative order kept for every function.
pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    DivisionByZero,
    SqrtOfNegative,
    NonFinite,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::SqrtOfNegative => "square root of a negative number",
            DomainKind::NonFinite => "non-finite value",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier '{name}' at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("function '{name}' at position {pos} takes {expected} argument(s), got {found}")]
    WrongArity { name: String, expected: usize, found: usize, pos: usize },
    #[error("{kind} in '{subexpr}' at {var} = {at}")]
    Domain { kind: DomainKind, subexpr: String, var: String, at: f64 },
    #[error("derivative order {0} exceeds the supported maximum of 3")]
    OrderTooHigh(usize),
    #[error("invalid name '{0}': names must be identifiers distinct from functions and constants")]
    BadName(String),
}

fn check_names(names: &[String]) -> Result<(), ExprError> {
    for (k, n) in names.iter().enumerate() {
        let ident = n
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        let reserved = n == "pi" || n == "e" || Func::from_name(n).is_some();
        if !ident || reserved || names[..k].contains(n) {
            return Err(ExprError::BadName(n.clone()));
        }
    }
    Ok(())
}

fn eval_tree<'e>(e: &'e Expr, vars: &[f64]) -> Result<f64, (DomainKind, &'e Expr)> {
    Ok(match e {
        Expr::Const(c) => *c,
        Expr::Var(k) => vars[*k],
        Expr::Neg(a) => -eval_tree(a, vars)?,
        Expr::Add(a, b) => eval_tree(a, vars)? + eval_tree(b, vars)?,
        Expr::Sub(a, b) => eval_tree(a, vars)? - eval_tree(b, vars)?,
        Expr::Mul(a, b) => eval_tree(a, vars)? * eval_tree(b, vars)?,
        Expr::Div(a, b) => {
            let num = eval_tree(a, vars)?;
            let den = eval_tree(b, vars)?;
            if den == 0.0 {
                return Err((DomainKind::DivisionByZero, e));
            }
            num / den
        }
        Expr::Pow(a, n) => {
            let base = eval_tree(a, vars)?;
            if *n < 0 && base == 0.0 {
                return Err((DomainKind::DivisionByZero, e));
            }
            base.powi(*n)
        }
        Expr::Call(func, a) => {
            let x = eval_tree(a, vars)?;
            let y = match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
                Func::Arctan => x.atan(),
                Func::Exp => x.exp(),
                Func::Tanh => x.tanh(),
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err((DomainKind::SqrtOfNegative, e));
                    }
                    x.sqrt()
                }
            };
            if x.is_finite() && !y.is_finite() {
                return Err((DomainKind::NonFinite, e));
            }
            y
        }
    })
}

/// Symbolic derivative with respect to slot `v`.
fn diff(e: &Expr, v: usize) -> Expr {
    if e.free_of(v) {
        return cnst(0.0);
    }
    match e {
        Expr::Const(_) => cnst(0.0),
        Expr::Var(k) => cnst(if *k == v { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(diff(a, v)),
        Expr::Add(a, b) => add(diff(a, v), diff(b, v)),
        Expr::Sub(a, b) => sub(diff(a, v), diff(b, v)),
        Expr::Mul(a, b) => add(
            mul(diff(a, v), (**b).clone()),
            mul((**a).clone(), diff(b, v)),
        ),
        Expr::Div(a, b) => {
            let da = diff(a, v);
            let db = diff(b, v);
            sub(
                div(da, (**b).clone()),
                div(mul((**a).clone(), db), powi((**b).clone(), 2)),
            )
        }
        Expr::Pow(a, n) => mul(
            mul(cnst(*n as f64), powi((**a).clone(), n - 1)),
            diff(a, v),
        ),
        Expr::Call(func, a) => {
            let inner = (**a).clone();
            let outer = match func {
                Func::Sin => call(Func::Cos, inner),
                Func::Cos => neg(call(Func::Sin, inner)),
                Func::Tan => add(cnst(1.0), powi(call(Func::Tan, inner), 2)),
                Func::Arctan => div(cnst(1.0), add(cnst(1.0), powi(inner, 2))),
                Func::Exp => call(Func::Exp, inner),
                Func::Tanh => sub(cnst(1.0), powi(call(Func::Tanh, inner), 2)),
                Func::Sqrt => div(cnst(0.5), call(Func::Sqrt, inner)),
            };
            mul(outer, diff(a, v))
        }
    }
}

/// Replace slot `from` by the constant `value` and shift higher slots down.
fn substitute(e: &Expr, from: usize, value: f64) -> Expr {
    match e {
        Expr::Const(c) => cnst(*c),
        Expr::Var(k) if *k == from => cnst(value),
        Expr::Var(k) if *k > from => Expr::Var(k - 1),
        Expr::Var(k) => Expr::Var(*k),
        Expr::Neg(a) => neg(substitute(a, from, value)),
        Expr::Add(a, b) => add(substitute(a, from, value), substitute(b, from, value)),
        Expr::Sub(a, b) => sub(substitute(a, from, value), substitute(b, from, value)),
        Expr::Mul(a, b) => mul(substitute(a, from, value), substitute(b, from, value)),
        Expr::Div(a, b) => div(substitute(a, from, value), substitute(b, from, value)),
        Expr::Pow(a, n) => powi(substitute(a, from, value), *n),
        Expr::Call(f, a) => call(*f, substitute(a, from, value)),
    }
}

/// A parsed function of one real variable, with its first three
/// derivatives held as symbolic trees.
#[derive(Debug, Clone)]
pub struct ScalarFunction {
    source: String,
    names: Vec<String>,
    tree: Expr,
    derivs: [Expr; MAX_ORDER],
}

/// Parse `source` as a function of `varname`.
pub fn parse_scalar_function(source: &str, varname: &str) -> Result<ScalarFunction, ExprError> {
    let names = vec![varname.to_string()];
    check_names(&names)?;
    let tree = parser::parse(source, &names)?;
    Ok(ScalarFunction::from_tree(source.to_string(), names, tree))
}

impl ScalarFunction {
    fn from_tree(source: String, names: Vec<String>, tree: Expr) -> Self {
        let d1 = diff(&tree, 0);
        let d2 = diff(&d1, 0);
        let d3 = diff(&d2, 0);
        ScalarFunction { source, names, tree, derivs: [d1, d2, d3] }
    }

    /// The constant function `value` in variable `varname`.
    pub fn constant(value: f64, varname: &str) -> Self {
        let tree = cnst(value);
        let source = Printer { expr: &tree, names: &[] }.to_string();
        Self::from_tree(source, vec![varname.to_string()], tree)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variable(&self) -> &str {
        &self.names[0]
    }

    pub fn ast(&self) -> &Expr {
        &self.tree
    }

    /// Fully parenthesised text that parses back to the same tree.
    pub fn canonical(&self) -> String {
        Printer { expr: &self.tree, names: &self.names }.to_string()
    }

    /// `Some(v)` when the tree folded to a literal.
    pub fn constant_value(&self) -> Option<f64> {
        match self.tree {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    fn domain_error(&self, (kind, sub): (DomainKind, &Expr), x: f64) -> ExprError {
        ExprError::Domain {
            kind,
            subexpr: Printer { expr: sub, names: &self.names }.to_string(),
            var: self.names[0].clone(),
            at: x,
        }
    }

    fn eval_order(&self, k: usize, x: f64) -> Result<f64, ExprError> {
        let tree = if k == 0 { &self.tree } else { &self.derivs[k - 1] };
        eval_tree(tree, &[x]).map_err(|d| self.domain_error(d, x))
    }

    pub fn eval(&self, x: f64) -> Result<f64, ExprError> {
        self.eval_order(0, x)
    }

    /// `k`-th derivative at `x`, `k <= 3`.
    pub fn eval_derivative(&self, x: f64, k: usize) -> Result<f64, ExprError> {
        if k > MAX_ORDER {
            return Err(ExprError::OrderTooHigh(k));
        }
        self.eval_order(k, x)
    }

    /// `(f(x), f'(x), ..., f^(order)(x))`.
    pub fn eval_with_derivatives(&self, x: f64, order: usize) -> Result<Vec<f64>, ExprError> {
        if order > MAX_ORDER {
            return Err(ExprError::OrderTooHigh(order));
        }
        (0..=order).map(|k| self.eval_order(k, x)).collect()
    }

    /// Value and all three derivatives.
    pub fn jet(&self, x: f64) -> Result<[f64; 4], ExprError> {
        Ok([
            self.eval_order(0, x)?,
            self.eval_order(1, x)?,
            self.eval_order(2, x)?,
            self.eval_order(3, x)?,
        ])
    }

    /// The symbolic derivative as a function in its own right.
    pub fn derivative(&self) -> ScalarFunction {
        let tree = self.derivs[0].clone();
        let source = Printer { expr: &tree, names: &self.names }.to_string();
        Self::from_tree(source, self.names.clone(), tree)
    }
}

impl fmt::Display for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// A function of one variable plus named parameters that must be bound
/// before evaluation (for example `lambda` in a one-parameter family).
#[derive(Debug, Clone)]
pub struct ParamFunction {
    source: String,
    names: Vec<String>,
    tree: Expr,
}

impl ParamFunction {
    pub fn parse(source: &str, varname: &str, params: &[&str]) -> Result<Self, ExprError> {
        let mut names = vec![varname.to_string()];
        names.extend(params.iter().map(|p| p.to_string()));
        check_names(&names)?;
        let tree = parser::parse(source, &names)?;
        Ok(ParamFunction { source: source.to_string(), names, tree })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn params(&self) -> &[String] {
        &self.names[1..]
    }

    /// True when no parameter occurs in the tree.
    pub fn is_parameter_free(&self) -> bool {
        (1..self.names.len()).all(|k| self.tree.free_of(k))
    }

    /// Bind every parameter, in declaration order.
    pub fn bind(&self, values: &[f64]) -> Result<ScalarFunction, ExprError> {
        if values.len() != self.names.len() - 1 {
            return Err(ExprError::WrongArity {
                name: self.source.clone(),
                expected: self.names.len() - 1,
                found: values.len(),
                pos: 0,
            });
        }
        let mut tree = self.tree.clone();
        for v in values {
            tree = substitute(&tree, 1, *v);
        }
        let names = vec![self.names[0].clone()];
        let bound: Vec<String> = self.names[1..]
            .iter()
            .zip(values)
            .map(|(n, v)| format!("{n}={v:?}"))
            .collect();
        let source = format!("{} [{}]", self.source, bound.join(", "));
        Ok(ScalarFunction::from_tree(source, names, tree))
    }
}
