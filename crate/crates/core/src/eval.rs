//! Reference evaluator over concrete databases.
//!
//! Row order is part of the result: base tables keep insertion order,
//! joins are left-major, ORDER BY is a stable sort so ties keep input
//! order, DISTINCT and GROUP BY keep first occurrences. The symbolic
//! encoding follows the same order, which is what makes LIMIT and scalar
//! subqueries agree between the two.

use std::cmp::Ordering;
use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::db::{ConcreteDb, Row};
use crate::sql::ast::{AggFunc, CollectionOp, Expr, JoinKind, Pred, Query};
use crate::value::{
    arith, cast_to_date, cast_to_int, cast_to_real, cast_to_str, compare, julian_day, like_match, sort_cmp, strftime,
    substr, truth_value, CanonValue, CmpOp, EvalError, Value,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub arity: usize,
    pub rows: Vec<Row>,
}

impl Relation {
    /// Distinct rows under result comparison (NULL equals NULL, numbers by
    /// value, dates as text).
    pub fn row_set(&self) -> HashSet<Vec<CanonValue>> {
        self.rows.iter().map(|r| canon_row(r)).collect()
    }
}

pub fn canon_row(r: &[Value]) -> Vec<CanonValue> {
    r.iter().map(Value::canon).collect()
}

pub fn eval_query(db: &ConcreteDb, q: &Query) -> Result<Relation, EvalError> {
    Evaluator { db }.query(q)
}

/// Whether two results hold the same set of rows. Results of different
/// arity only match when both are empty.
pub fn same_row_set(a: &Relation, b: &Relation) -> bool {
    if a.arity != b.arity {
        return a.rows.is_empty() && b.rows.is_empty();
    }
    a.row_set() == b.row_set()
}

/// Execution match of two queries on one database: 1 when the results
/// hold the same set of rows, else 0.
pub fn ex_metric(q1: &Query, q2: &Query, db: &ConcreteDb) -> u8 {
    match ex_compare(q1, q2, db) {
        Ok(true) => 1,
        Ok(false) => 0,
        Err(e) => {
            log::debug!("EX evaluation failed: {e}");
            0
        }
    }
}

pub fn ex_compare(q1: &Query, q2: &Query, db: &ConcreteDb) -> Result<bool, EvalError> {
    let a = eval_query(db, q1)?;
    let b = eval_query(db, q2)?;
    Ok(same_row_set(&a, &b))
}

/// Evaluation context of an expression: the current row, and for
/// aggregates the rows of the current group.
#[derive(Clone, Copy)]
struct Ctx<'r> {
    row: Option<&'r [Value]>,
    group: Option<&'r [Row]>,
}

impl<'r> Ctx<'r> {
    fn row(row: &'r [Value]) -> Ctx<'r> {
        Ctx { row: Some(row), group: None }
    }
}

struct Evaluator<'a> {
    db: &'a ConcreteDb,
}

fn kleene_and(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

fn kleene_or(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

/// Three-valued membership: true on a match, unknown when no match but a
/// NULL was involved, false otherwise (including for an empty set).
fn membership(subject: &Value, items: impl IntoIterator<Item = Value>) -> Result<Option<bool>, EvalError> {
    let mut unknown = false;
    for v in items {
        match compare(CmpOp::Eq, subject, &v)? {
            Some(true) => return Ok(Some(true)),
            Some(false) => {}
            None => unknown = true,
        }
    }
    Ok(if unknown { None } else { Some(false) })
}

fn first_occurrences(rows: Vec<Row>) -> Vec<Row> {
    let mut seen = HashSet::new();
    rows.into_iter().filter(|r| seen.insert(canon_row(r))).collect()
}

impl<'a> Evaluator<'a> {
    fn query(&self, q: &Query) -> Result<Relation, EvalError> {
        match q {
            Query::Table { index, name, .. } => {
                let t = self.db.tables.get(*index).ok_or_else(|| EvalError::UnknownRelation(name.clone()))?;
                Ok(Relation {
                    arity: t.arity,
                    rows: t.rows.clone(),
                })
            }
            Query::Unit => Ok(Relation {
                arity: 0,
                rows: vec![Vec::new()],
            }),
            Query::Project { input, items } => {
                let r = self.query(input)?;
                let mut rows = Vec::with_capacity(r.rows.len());
                for row in &r.rows {
                    let mut out = Vec::with_capacity(items.len());
                    for a in items {
                        out.push(self.expr(&a.expr, Ctx::row(row))?);
                    }
                    rows.push(out);
                }
                Ok(Relation { arity: items.len(), rows })
            }
            Query::Filter { input, pred } => {
                let r = self.query(input)?;
                let mut rows = Vec::new();
                for row in r.rows {
                    if self.pred(pred, Ctx::row(&row))? == Some(true) {
                        rows.push(row);
                    }
                }
                Ok(Relation { arity: r.arity, rows })
            }
            Query::Rename { input, .. } => self.query(input),
            Query::Distinct(input) => {
                let r = self.query(input)?;
                Ok(Relation {
                    arity: r.arity,
                    rows: first_occurrences(r.rows),
                })
            }
            Query::Collection { op, lhs, rhs } => {
                let l = self.query(lhs)?;
                let r = self.query(rhs)?;
                let arity = l.arity;
                let rows = match op {
                    CollectionOp::UnionAll => l.rows.into_iter().chain(r.rows).collect(),
                    CollectionOp::Union => first_occurrences(l.rows.into_iter().chain(r.rows).collect()),
                    CollectionOp::Intersect | CollectionOp::Except => {
                        let other = r.row_set();
                        let keep = *op == CollectionOp::Intersect;
                        first_occurrences(
                            l.rows
                                .into_iter()
                                .filter(|row| other.contains(&canon_row(row)) == keep)
                                .collect(),
                        )
                    }
                    CollectionOp::ReservedPlus | CollectionOp::ReservedMinus => {
                        return Err(EvalError::Unsupported(format!("collection operator {}", op.keyword())))
                    }
                };
                Ok(Relation { arity, rows })
            }
            Query::Join { kind, lhs, rhs, on } => self.join(*kind, lhs, rhs, on.as_ref()),
            Query::GroupBy {
                input,
                keys,
                items,
                having,
            } => self.group_by(input, keys, items, having.as_ref()),
            Query::OrderBy {
                input,
                keys,
                limit,
                offset,
                hidden,
            } => {
                let r = self.query(input)?;
                let mut keyed = Vec::with_capacity(r.rows.len());
                for row in r.rows {
                    let mut kv = Vec::with_capacity(keys.len());
                    for k in keys {
                        kv.push(self.expr(&k.expr, Ctx::row(&row))?);
                    }
                    keyed.push((kv, row));
                }
                keyed.sort_by(|(a, _), (b, _)| {
                    for ((x, y), k) in a.iter().zip(b).zip(keys) {
                        let o = sort_cmp(x, y);
                        let o = if k.asc { o } else { o.reverse() };
                        if o != Ordering::Equal {
                            return o;
                        }
                    }
                    Ordering::Equal
                });
                let arity = r.arity - hidden;
                let rows = keyed
                    .into_iter()
                    .map(|(_, mut row)| {
                        row.truncate(arity);
                        row
                    })
                    .skip(usize::try_from(*offset).unwrap_or(usize::MAX))
                    .take(limit.map_or(usize::MAX, |l| usize::try_from(l).unwrap_or(usize::MAX)))
                    .collect();
                Ok(Relation { arity, rows })
            }
        }
    }

    fn join(&self, kind: JoinKind, lhs: &Query, rhs: &Query, on: Option<&Pred>) -> Result<Relation, EvalError> {
        let l = self.query(lhs)?;
        let r = self.query(rhs)?;
        let arity = l.arity + r.arity;
        let mut rows = Vec::new();
        let mut rhs_matched = vec![false; r.rows.len()];
        for lrow in &l.rows {
            let mut matched = false;
            for (j, rrow) in r.rows.iter().enumerate() {
                let mut row = lrow.clone();
                row.extend(rrow.iter().cloned());
                let ok = match on {
                    Some(p) => self.pred(p, Ctx::row(&row))? == Some(true),
                    None => true,
                };
                if ok {
                    matched = true;
                    rhs_matched[j] = true;
                    rows.push(row);
                }
            }
            if !matched && matches!(kind, JoinKind::Left | JoinKind::Full) {
                let mut row = lrow.clone();
                row.extend(std::iter::repeat(Value::Null).take(r.arity));
                rows.push(row);
            }
        }
        if matches!(kind, JoinKind::Right | JoinKind::Full) {
            for (j, rrow) in r.rows.iter().enumerate() {
                if !rhs_matched[j] {
                    let mut row = vec![Value::Null; l.arity];
                    row.extend(rrow.iter().cloned());
                    rows.push(row);
                }
            }
        }
        Ok(Relation { arity, rows })
    }

    fn group_by(
        &self,
        input: &Query,
        keys: &[Expr],
        items: &[crate::sql::ast::Attr],
        having: Option<&Pred>,
    ) -> Result<Relation, EvalError> {
        let r = self.query(input)?;
        let groups: Vec<Vec<Row>> = if keys.is_empty() {
            vec![r.rows]
        } else {
            let mut index: Vec<(Vec<CanonValue>, Vec<Row>)> = Vec::new();
            for row in r.rows {
                let mut kv = Vec::with_capacity(keys.len());
                for k in keys {
                    kv.push(self.expr(k, Ctx::row(&row))?.canon());
                }
                match index.iter_mut().find(|(k, _)| *k == kv) {
                    Some((_, members)) => members.push(row),
                    None => index.push((kv, vec![row])),
                }
            }
            index.into_iter().map(|(_, m)| m).collect()
        };
        let mut rows = Vec::new();
        for members in &groups {
            let ctx = Ctx {
                row: members.first().map(Vec::as_slice),
                group: Some(members),
            };
            if let Some(h) = having {
                if self.pred(h, ctx)? != Some(true) {
                    continue;
                }
            }
            let mut out = Vec::with_capacity(items.len());
            for a in items {
                out.push(self.expr(&a.expr, ctx)?);
            }
            rows.push(out);
        }
        Ok(Relation {
            arity: items.len(),
            rows,
        })
    }

    fn column(&self, q: &Query) -> Result<Vec<Value>, EvalError> {
        Ok(self.query(q)?.rows.into_iter().map(|mut r| r.swap_remove(0)).collect())
    }

    fn expr(&self, e: &Expr, ctx: Ctx<'_>) -> Result<Value, EvalError> {
        Ok(match e {
            Expr::Col { index, name, .. } => {
                let row = match (ctx.row, ctx.group) {
                    (Some(row), _) => row,
                    // a bare column over an empty whole-input group
                    (None, Some(_)) => return Ok(Value::Null),
                    (None, None) => return Err(EvalError::Domain(format!("column `{name}` outside a row"))),
                };
                row.get(*index)
                    .cloned()
                    .ok_or_else(|| EvalError::Domain(format!("column `{name}` out of range")))?
            }
            Expr::Lit(v) => v.clone(),
            Expr::Arith(op, a, b) => arith(*op, &self.expr(a, ctx)?, &self.expr(b, ctx)?)?,
            Expr::Ite(p, a, b) => {
                if self.pred(p, ctx)? == Some(true) {
                    self.expr(a, ctx)?
                } else {
                    self.expr(b, ctx)?
                }
            }
            Expr::Case { whens, else_ } => {
                for (p, v) in whens {
                    if self.pred(p, ctx)? == Some(true) {
                        return self.expr(v, ctx);
                    }
                }
                self.expr(else_, ctx)?
            }
            Expr::SubStr(s, a, b) => {
                let len = match b {
                    Some(b) => Some(self.expr(b, ctx)?),
                    None => None,
                };
                substr(&self.expr(s, ctx)?, &self.expr(a, ctx)?, len.as_ref())?
            }
            Expr::Strftime(part, x) => strftime(*part, &self.expr(x, ctx)?)?,
            Expr::JulianDay(x) => match cast_to_date(&self.expr(x, ctx)?)? {
                Value::Null => Value::Null,
                d => Value::Real(julian_day(&d)?),
            },
            Expr::ToInt(x) => cast_to_int(&self.expr(x, ctx)?)?,
            Expr::ToStr(x) => cast_to_str(&self.expr(x, ctx)?)?,
            Expr::ToDate(x) => cast_to_date(&self.expr(x, ctx)?)?,
            Expr::ToReal(x) => cast_to_real(&self.expr(x, ctx)?)?,
            Expr::Pred(p) => match self.pred(p, ctx)? {
                Some(b) => Value::Int(b as i64),
                None => Value::Null,
            },
            Expr::Agg { func, distinct, arg } => {
                let group = ctx
                    .group
                    .ok_or_else(|| EvalError::Domain("aggregate outside a group".into()))?;
                self.aggregate(*func, *distinct, arg.as_deref(), group)?
            }
            Expr::Scalar(q) => self.column(q)?.into_iter().next().unwrap_or(Value::Null),
        })
    }

    fn aggregate(&self, func: AggFunc, distinct: bool, arg: Option<&Expr>, group: &[Row]) -> Result<Value, EvalError> {
        let Some(arg) = arg else {
            return Ok(Value::Int(group.len() as i64));
        };
        let mut vals = Vec::new();
        for row in group {
            let v = self.expr(arg, Ctx::row(row))?;
            if !v.is_null() {
                vals.push(v);
            }
        }
        if distinct {
            let mut seen = HashSet::new();
            vals.retain(|v| seen.insert(v.canon()));
        }
        Ok(match func {
            AggFunc::Count => Value::Int(vals.len() as i64),
            AggFunc::Min | AggFunc::Max => {
                let want = if func == AggFunc::Min { Ordering::Less } else { Ordering::Greater };
                let mut best: Option<Value> = None;
                for v in vals {
                    match &best {
                        Some(b) if sort_cmp(&v, b) != want => {}
                        _ => best = Some(v),
                    }
                }
                best.unwrap_or(Value::Null)
            }
            AggFunc::Sum | AggFunc::Avg => {
                if vals.is_empty() {
                    return Ok(Value::Null);
                }
                let real = vals.iter().any(|v| matches!(v, Value::Real(_)));
                let n = vals.len();
                let mut total = BigRational::zero();
                for v in &vals {
                    match cast_to_real(v)? {
                        Value::Real(r) => total += r,
                        _ => unreachable!("non-null value casts to a real"),
                    }
                }
                if func == AggFunc::Avg {
                    Value::Real(total / BigRational::from_integer(BigInt::from(n)))
                } else if real {
                    Value::Real(total)
                } else {
                    let i: Option<i64> = num_traits::ToPrimitive::to_i64(&total.to_integer());
                    Value::Int(i.ok_or(EvalError::Overflow("SUM"))?)
                }
            }
        })
    }

    fn pred(&self, p: &Pred, ctx: Ctx<'_>) -> Result<Option<bool>, EvalError> {
        Ok(match p {
            Pred::Bool(b) => Some(*b),
            Pred::Null => None,
            Pred::Cmp(op, a, b) => compare(*op, &self.expr(a, ctx)?, &self.expr(b, ctx)?)?,
            Pred::IsNull(e) => Some(self.expr(e, ctx)?.is_null()),
            Pred::InList(e, list) => {
                let subject = self.expr(e, ctx)?;
                let mut vals = Vec::with_capacity(list.len());
                for x in list {
                    vals.push(self.expr(x, ctx)?);
                }
                membership(&subject, vals)?
            }
            Pred::InQuery(e, q) => {
                let subject = self.expr(e, ctx)?;
                membership(&subject, self.column(q)?)?
            }
            Pred::And(a, b) => kleene_and(self.pred(a, ctx)?, self.pred(b, ctx)?),
            Pred::Or(a, b) => kleene_or(self.pred(a, ctx)?, self.pred(b, ctx)?),
            Pred::Not(a) => self.pred(a, ctx)?.map(|b| !b),
            Pred::PrefixOf(s, e) => match cast_to_str(&self.expr(e, ctx)?)? {
                Value::Str(v) => Some(v.starts_with(s.as_str())),
                _ => None,
            },
            Pred::SuffixOf(s, e) => match cast_to_str(&self.expr(e, ctx)?)? {
                Value::Str(v) => Some(v.ends_with(s.as_str())),
                _ => None,
            },
            Pred::Like(pat, e) => like_match(pat, &self.expr(e, ctx)?)?,
            Pred::Truth(e) => truth_value(&self.expr(e, ctx)?)?,
        })
    }
}
