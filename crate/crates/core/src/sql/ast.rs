//! Resolved, typed query tree. Column references are positional; names are
//! kept only so the tree can be printed back as SQL.

use std::fmt;

use crate::value::{ArithOp, CmpOp, DatePart, Value};

pub use super::syntax::JoinKind;

/// Static type of an expression. `Null` is the type of the bare NULL
/// literal, which unifies with every other type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExprType {
    Int,
    Real,
    Str,
    Date,
    Null,
}

impl ExprType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ExprType::Int | ExprType::Real)
    }

    /// Common type of two branches, if any.
    pub fn unify(self, other: ExprType) -> Option<ExprType> {
        use ExprType::*;
        match (self, other) {
            (a, b) if a == b => Some(a),
            (Null, b) => Some(b),
            (a, Null) => Some(a),
            (Int, Real) | (Real, Int) => Some(Real),
            _ => None,
        }
    }
}

impl From<crate::schema::SqlType> for ExprType {
    fn from(t: crate::schema::SqlType) -> Self {
        match t {
            crate::schema::SqlType::Int => ExprType::Int,
            crate::schema::SqlType::Str => ExprType::Str,
            crate::schema::SqlType::Date => ExprType::Date,
        }
    }
}

impl fmt::Display for ExprType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExprType::Int => "int",
            ExprType::Real => "real",
            ExprType::Str => "str",
            ExprType::Date => "date",
            ExprType::Null => "null",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnInfo {
    pub qualifier: Option<String>,
    pub name: String,
    pub ty: ExprType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollectionOp {
    Union,
    Intersect,
    Except,
    UnionAll,
    /// Listed by the grammar without a defined meaning; never produced by
    /// the parser.
    ReservedPlus,
    ReservedMinus,
}

impl CollectionOp {
    pub fn keyword(self) -> &'static str {
        match self {
            CollectionOp::Union => "UNION",
            CollectionOp::Intersect => "INTERSECT",
            CollectionOp::Except => "EXCEPT",
            CollectionOp::UnionAll => "UNION ALL",
            CollectionOp::ReservedPlus => "<reserved collection op +>",
            CollectionOp::ReservedMinus => "<reserved collection op ->",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    Min,
    Max,
    Sum,
    Avg,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attr {
    pub expr: Expr,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortKey {
    pub expr: Expr,
    pub asc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    /// Base table, by index into the schema.
    Table {
        index: usize,
        name: String,
        alias: Option<String>,
    },
    /// The one-row, zero-column relation a FROM-less SELECT reads.
    Unit,
    Project {
        input: Box<Query>,
        items: Vec<Attr>,
    },
    Filter {
        input: Box<Query>,
        pred: Pred,
    },
    Rename {
        input: Box<Query>,
        alias: String,
    },
    Collection {
        op: CollectionOp,
        lhs: Box<Query>,
        rhs: Box<Query>,
    },
    Distinct(Box<Query>),
    Join {
        kind: JoinKind,
        lhs: Box<Query>,
        rhs: Box<Query>,
        on: Option<Pred>,
    },
    /// Keys and items are evaluated over the input; items and `having` may
    /// contain aggregates. With no keys the whole input is one group.
    GroupBy {
        input: Box<Query>,
        keys: Vec<Expr>,
        items: Vec<Attr>,
        having: Option<Pred>,
    },
    /// Sorts its input; the trailing `hidden` columns exist only to carry
    /// sort keys and are dropped from the output.
    OrderBy {
        input: Box<Query>,
        keys: Vec<SortKey>,
        limit: Option<u64>,
        offset: u64,
        hidden: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Col {
        index: usize,
        qualifier: Option<String>,
        name: String,
        ty: ExprType,
    },
    Lit(Value),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Ite(Box<Pred>, Box<Expr>, Box<Expr>),
    Case {
        whens: Vec<(Pred, Expr)>,
        else_: Box<Expr>,
    },
    SubStr(Box<Expr>, Box<Expr>, Option<Box<Expr>>),
    Strftime(DatePart, Box<Expr>),
    JulianDay(Box<Expr>),
    ToInt(Box<Expr>),
    ToDate(Box<Expr>),
    ToStr(Box<Expr>),
    ToReal(Box<Expr>),
    /// Predicate used as a value: 1, 0 or NULL.
    Pred(Box<Pred>),
    Agg {
        func: AggFunc,
        distinct: bool,
        /// `None` for `COUNT(*)`.
        arg: Option<Box<Expr>>,
    },
    /// First row of a one-column query, or NULL when it is empty.
    Scalar(Box<Query>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pred {
    Bool(bool),
    Null,
    Cmp(CmpOp, Expr, Expr),
    IsNull(Expr),
    InList(Expr, Vec<Expr>),
    InQuery(Expr, Box<Query>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
    PrefixOf(String, Expr),
    SuffixOf(String, Expr),
    Like(String, Expr),
    /// Non-boolean expression in predicate position: nonzero is true.
    Truth(Expr),
}

impl Query {
    /// Output columns, derived from the schema.
    pub fn columns(&self, schema: &crate::schema::DatabaseSchema) -> Vec<ColumnInfo> {
        match self {
            Query::Table { index, name, alias } => {
                let q = alias.clone().unwrap_or_else(|| name.clone());
                schema.tables[*index]
                    .columns
                    .iter()
                    .map(|c| ColumnInfo {
                        qualifier: Some(q.clone()),
                        name: c.name.clone(),
                        ty: c.ty.into(),
                    })
                    .collect()
            }
            Query::Unit => Vec::new(),
            Query::Project { items, .. } | Query::GroupBy { items, .. } => {
                items.iter().map(Attr::column_info).collect()
            }
            Query::Filter { input, .. } | Query::Distinct(input) => input.columns(schema),
            Query::Rename { input, alias } => input
                .columns(schema)
                .into_iter()
                .map(|c| ColumnInfo {
                    qualifier: Some(alias.clone()),
                    ..c
                })
                .collect(),
            Query::Collection { lhs, rhs, .. } => lhs
                .columns(schema)
                .into_iter()
                .zip(rhs.columns(schema))
                .map(|(l, r)| ColumnInfo {
                    ty: l.ty.unify(r.ty).unwrap_or(l.ty),
                    ..l
                })
                .collect(),
            Query::Join { lhs, rhs, .. } => {
                let mut cols = lhs.columns(schema);
                cols.extend(rhs.columns(schema));
                cols
            }
            Query::OrderBy { input, hidden, .. } => {
                let mut cols = input.columns(schema);
                cols.truncate(cols.len() - hidden);
                cols
            }
        }
    }

    pub fn arity(&self, schema: &crate::schema::DatabaseSchema) -> usize {
        self.columns(schema).len()
    }
}

impl Attr {
    pub fn column_info(&self) -> ColumnInfo {
        match (&self.alias, &self.expr) {
            (Some(a), e) => ColumnInfo {
                qualifier: None,
                name: a.clone(),
                ty: e.ty(),
            },
            (None, Expr::Col { qualifier, name, ty, .. }) => ColumnInfo {
                qualifier: qualifier.clone(),
                name: name.clone(),
                ty: *ty,
            },
            (None, e) => ColumnInfo {
                qualifier: None,
                name: super::printer::expr_to_sql(e),
                ty: e.ty(),
            },
        }
    }
}

impl Expr {
    pub fn ty(&self) -> ExprType {
        match self {
            Expr::Col { ty, .. } => *ty,
            Expr::Lit(v) => match v {
                Value::Null => ExprType::Null,
                Value::Int(_) => ExprType::Int,
                Value::Real(_) => ExprType::Real,
                Value::Str(_) => ExprType::Str,
                Value::Date(_) => ExprType::Date,
            },
            Expr::Arith(_, a, b) => {
                if a.ty() == ExprType::Real || b.ty() == ExprType::Real {
                    ExprType::Real
                } else {
                    ExprType::Int
                }
            }
            Expr::Ite(_, a, b) => a.ty().unify(b.ty()).unwrap_or(ExprType::Null),
            Expr::Case { whens, else_ } => whens
                .iter()
                .map(|(_, e)| e.ty())
                .try_fold(else_.ty(), |acc, t| acc.unify(t))
                .unwrap_or(ExprType::Null),
            Expr::SubStr(..) | Expr::ToStr(_) => ExprType::Str,
            Expr::Strftime(..) | Expr::ToInt(_) | Expr::Pred(_) => ExprType::Int,
            Expr::JulianDay(_) | Expr::ToReal(_) => ExprType::Real,
            Expr::ToDate(_) => ExprType::Date,
            Expr::Agg { func, arg, .. } => match func {
                AggFunc::Count => ExprType::Int,
                AggFunc::Avg => ExprType::Real,
                AggFunc::Sum => match arg.as_deref().map(Expr::ty) {
                    Some(ExprType::Real) => ExprType::Real,
                    _ => ExprType::Int,
                },
                AggFunc::Min | AggFunc::Max => arg.as_deref().map_or(ExprType::Null, Expr::ty),
            },
            Expr::Scalar(q) => scalar_type(q),
        }
    }

    pub fn contains_agg(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::Agg { .. }));
        found
    }

    /// Pre-order walk over this expression and the expressions inside its
    /// predicates. Does not enter subqueries.
    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Col { .. } | Expr::Lit(_) | Expr::Scalar(_) => {}
            Expr::Arith(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Ite(p, a, b) => {
                p.visit_exprs(f);
                a.visit(f);
                b.visit(f);
            }
            Expr::Case { whens, else_ } => {
                for (p, e) in whens {
                    p.visit_exprs(f);
                    e.visit(f);
                }
                else_.visit(f);
            }
            Expr::SubStr(a, b, c) => {
                a.visit(f);
                b.visit(f);
                if let Some(c) = c {
                    c.visit(f);
                }
            }
            Expr::Strftime(_, e)
            | Expr::JulianDay(e)
            | Expr::ToInt(e)
            | Expr::ToDate(e)
            | Expr::ToStr(e)
            | Expr::ToReal(e) => e.visit(f),
            Expr::Pred(p) => p.visit_exprs(f),
            Expr::Agg { arg, .. } => {
                if let Some(a) = arg {
                    a.visit(f);
                }
            }
        }
    }
}

/// The type of the single column of a scalar subquery.
fn scalar_type(q: &Query) -> ExprType {
    match q {
        Query::Project { items, .. } | Query::GroupBy { items, .. } => {
            items.first().map_or(ExprType::Null, |a| a.expr.ty())
        }
        Query::Filter { input, .. }
        | Query::Distinct(input)
        | Query::Rename { input, .. }
        | Query::OrderBy { input, .. } => scalar_type(input),
        Query::Collection { lhs, rhs, .. } => {
            let (a, b) = (scalar_type(lhs), scalar_type(rhs));
            a.unify(b).unwrap_or(a)
        }
        // a base table or join as a scalar subquery is rejected when lowering
        Query::Table { .. } | Query::Join { .. } | Query::Unit => ExprType::Null,
    }
}

impl Pred {
    /// Walks every expression directly inside this predicate.
    pub fn visit_exprs(&self, f: &mut dyn FnMut(&Expr)) {
        match self {
            Pred::Bool(_) | Pred::Null => {}
            Pred::Cmp(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Pred::IsNull(e)
            | Pred::PrefixOf(_, e)
            | Pred::SuffixOf(_, e)
            | Pred::Like(_, e)
            | Pred::Truth(e)
            | Pred::InQuery(e, _) => e.visit(f),
            Pred::InList(e, list) => {
                e.visit(f);
                for x in list {
                    x.visit(f);
                }
            }
            Pred::And(a, b) | Pred::Or(a, b) => {
                a.visit_exprs(f);
                b.visit_exprs(f);
            }
            Pred::Not(p) => p.visit_exprs(f),
        }
    }
}
