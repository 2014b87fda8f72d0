//! Name resolution and typing: surface syntax to the query tree.
//!
//! Implicit conversions become explicit cast nodes here, so later stages
//! only ever see operands of compatible types.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::ast::{AggFunc, Attr, CollectionOp, ColumnInfo, Expr, ExprType, Pred, Query, SortKey};
use super::syntax::{self as sx, BinOp, JoinKind, Literal, SelectItem, SetExpr, TableRef};
use super::ParseError;
use crate::schema::DatabaseSchema;
use crate::value::{parse_iso_date, ArithOp, CmpOp, DatePart, Value};

type Res<T> = Result<T, ParseError>;

pub fn lower_query(q: &sx::QueryExpr, schema: &DatabaseSchema) -> Res<Query> {
    let mut l = Lowerer {
        schema,
        ctes: Vec::new(),
        outer: Vec::new(),
    };
    Ok(l.query(q)?.0)
}

struct Lowerer<'a> {
    schema: &'a DatabaseSchema,
    ctes: Vec<(String, Query, Vec<ColumnInfo>)>,
    /// Scopes of enclosing queries, consulted only to report correlation.
    outer: Vec<Vec<ColumnInfo>>,
}

fn unsupported<T>(feature: impl Into<String>, pos: usize) -> Res<T> {
    Err(ParseError::Unsupported {
        feature: feature.into(),
        pos,
    })
}

const AGGREGATES: &[&str] = &["COUNT", "SUM", "AVG", "MIN", "MAX"];

fn is_agg_call(name: &str, args: usize, star: bool) -> bool {
    AGGREGATES.contains(&name) && (star || args == 1 || !matches!(name, "MIN" | "MAX"))
}

/// Whether a surface expression contains an aggregate call outside any
/// subquery.
fn has_agg(e: &sx::Expr) -> bool {
    use sx::Expr as E;
    match e {
        E::Func { name, args, star, .. } => is_agg_call(name, args.len(), *star) || args.iter().any(has_agg),
        E::Column { .. } | E::Lit(_) | E::Subquery(_) => false,
        E::Neg(x) | E::Not(x) | E::Nested(x) | E::Cast { expr: x, .. } => has_agg(x),
        E::IsNull { expr, .. } | E::InSubquery { expr, .. } => has_agg(expr),
        E::Binary { left, right, .. } => has_agg(left) || has_agg(right),
        E::InList { expr, list, .. } => has_agg(expr) || list.iter().any(has_agg),
        E::Between { expr, low, high, .. } => has_agg(expr) || has_agg(low) || has_agg(high),
        E::Like { expr, pattern, .. } => has_agg(expr) || has_agg(pattern),
        E::Case {
            operand,
            whens,
            else_,
        } => {
            operand.as_deref().is_some_and(has_agg)
                || whens.iter().any(|(a, b)| has_agg(a) || has_agg(b))
                || else_.as_deref().is_some_and(has_agg)
        }
    }
}

fn strip(e: &sx::Expr) -> &sx::Expr {
    match e {
        sx::Expr::Nested(x) => strip(x),
        other => other,
    }
}

fn limit_value(e: &sx::Expr, what: &str, pos: usize) -> Res<i64> {
    match strip(e) {
        sx::Expr::Lit(Literal::Int(n)) => Ok(*n),
        _ => unsupported(format!("non-literal {what}"), pos),
    }
}

fn parse_decimal(text: &str) -> BigRational {
    let neg = text.starts_with('-');
    let body = text.trim_start_matches('-');
    let (int_part, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits: BigInt = format!("{int_part}{frac}").parse().unwrap_or_default();
    let scale = BigInt::from(10).pow(frac.len() as u32);
    let r = BigRational::new(digits, scale);
    if neg {
        -r
    } else {
        r
    }
}

fn to_numeric(e: Expr) -> Expr {
    match e.ty() {
        ExprType::Int | ExprType::Real | ExprType::Null => e,
        _ => Expr::ToInt(Box::new(e)),
    }
}

fn to_str(e: Expr, pos: usize) -> Res<Expr> {
    match e.ty() {
        ExprType::Str | ExprType::Null => Ok(e),
        ExprType::Real => unsupported("conversion of a real value to text", pos),
        _ => Ok(Expr::ToStr(Box::new(e))),
    }
}

fn to_date(e: Expr, pos: usize) -> Res<Expr> {
    match e.ty() {
        ExprType::Date | ExprType::Null => Ok(e),
        ExprType::Real => unsupported("conversion of a real value to a date", pos),
        _ => Ok(Expr::ToDate(Box::new(e))),
    }
}

fn is_iso_literal(e: &Expr) -> bool {
    matches!(e, Expr::Lit(Value::Str(s)) if parse_iso_date(s).is_some())
}

/// Operands of `a op b` after the implicit conversions that make their
/// types comparable.
fn comparable(a: Expr, b: Expr) -> (Expr, Expr) {
    use ExprType::*;
    match (a.ty(), b.ty()) {
        (x, y) if x == y || x == Null || y == Null => (a, b),
        (x, y) if x.is_numeric() && y.is_numeric() => (a, b),
        (x, Str) if x.is_numeric() => (a, Expr::ToInt(Box::new(b))),
        (Str, y) if y.is_numeric() => (Expr::ToInt(Box::new(a)), b),
        (Date, Str) if is_iso_literal(&b) => (a, Expr::ToDate(Box::new(b))),
        (Str, Date) if is_iso_literal(&a) => (Expr::ToDate(Box::new(a)), b),
        (Date, Str) => (Expr::ToStr(Box::new(a)), b),
        (Str, Date) => (a, Expr::ToStr(Box::new(b))),
        (Date, _) => (Expr::ToInt(Box::new(a)), b),
        (_, Date) => (a, Expr::ToInt(Box::new(b))),
        _ => (a, b),
    }
}

fn cmp_op(op: BinOp) -> Option<CmpOp> {
    Some(match op {
        BinOp::Eq => CmpOp::Eq,
        BinOp::Ne => CmpOp::Ne,
        BinOp::Lt => CmpOp::Lt,
        BinOp::Le => CmpOp::Le,
        BinOp::Gt => CmpOp::Gt,
        BinOp::Ge => CmpOp::Ge,
        _ => return None,
    })
}

fn arith_op(op: BinOp) -> Option<ArithOp> {
    Some(match op {
        BinOp::Add => ArithOp::Add,
        BinOp::Sub => ArithOp::Sub,
        BinOp::Mul => ArithOp::Mul,
        BinOp::Div => ArithOp::Div,
        BinOp::Mod => ArithOp::Mod,
        _ => return None,
    })
}

fn col_ref(index: usize, c: &ColumnInfo) -> Expr {
    Expr::Col {
        index,
        qualifier: c.qualifier.clone(),
        name: c.name.clone(),
        ty: c.ty,
    }
}

fn requalify(cols: Vec<ColumnInfo>, q: Option<&str>) -> Vec<ColumnInfo> {
    cols.into_iter()
        .map(|c| ColumnInfo {
            qualifier: q.map(str::to_string),
            ..c
        })
        .collect()
}

/// Position of the first surface expression, for error reporting.
fn expr_pos(e: &sx::Expr) -> usize {
    use sx::Expr as E;
    match e {
        E::Column { pos, .. } | E::Func { pos, .. } | E::Cast { pos, .. } => *pos,
        E::Neg(x) | E::Not(x) | E::Nested(x) => expr_pos(x),
        E::Binary { left, .. } => expr_pos(left),
        E::IsNull { expr, .. }
        | E::InList { expr, .. }
        | E::InSubquery { expr, .. }
        | E::Between { expr, .. }
        | E::Like { expr, .. } => expr_pos(expr),
        E::Subquery(q) => q.pos,
        E::Case { operand, whens, .. } => operand
            .as_deref()
            .map(expr_pos)
            .or_else(|| whens.first().map(|(w, _)| expr_pos(w)))
            .unwrap_or(0),
        E::Lit(_) => 0,
    }
}

impl<'a> Lowerer<'a> {
    fn query(&mut self, q: &sx::QueryExpr) -> Res<(Query, Vec<ColumnInfo>)> {
        let depth = self.ctes.len();
        for cte in &q.with {
            let (cq, cols) = self.query(&cte.query)?;
            self.ctes.push((cte.name.clone(), cq, cols));
        }
        let out = self.query_body(q);
        self.ctes.truncate(depth);
        out
    }

    fn query_body(&mut self, q: &sx::QueryExpr) -> Res<(Query, Vec<ColumnInfo>)> {
        let limit = match &q.limit {
            Some(e) => {
                let n = limit_value(e, "LIMIT", q.pos)?;
                (n >= 0).then_some(n as u64)
            }
            None => None,
        };
        let offset = match &q.offset {
            Some(e) => limit_value(e, "OFFSET", q.pos)?.max(0) as u64,
            None => 0,
        };
        let ordered = !q.order_by.is_empty() || limit.is_some() || offset > 0;
        if let SetExpr::Select(s) = &q.body {
            let order = ordered.then_some((q.order_by.as_slice(), limit, offset));
            return self.select(s, order);
        }
        let (body, cols) = self.set_expr(&q.body)?;
        if !ordered {
            return Ok((body, cols));
        }
        let mut keys = Vec::new();
        for item in &q.order_by {
            let idx = self.compound_order_index(&item.expr, &cols, q.pos)?;
            keys.push(SortKey {
                expr: col_ref(idx, &cols[idx]),
                asc: item.asc,
            });
        }
        Ok((
            Query::OrderBy {
                input: Box::new(body),
                keys,
                limit,
                offset,
                hidden: 0,
            },
            cols,
        ))
    }

    fn compound_order_index(&self, e: &sx::Expr, cols: &[ColumnInfo], pos: usize) -> Res<usize> {
        match strip(e) {
            sx::Expr::Lit(Literal::Int(n)) => {
                if *n >= 1 && (*n as usize) <= cols.len() {
                    Ok(*n as usize - 1)
                } else {
                    Err(ParseError::syntax(pos, format!("ORDER BY term {n} out of range")))
                }
            }
            sx::Expr::Column { qualifier, name, pos } => cols
                .iter()
                .position(|c| {
                    c.name.eq_ignore_ascii_case(name)
                        && qualifier.as_ref().is_none_or(|q| {
                            c.qualifier.as_ref().is_some_and(|cq| cq.eq_ignore_ascii_case(q))
                        })
                })
                .ok_or(ParseError::Unsupported {
                    feature: "ORDER BY term not in the compound result".into(),
                    pos: *pos,
                }),
            other => unsupported("ORDER BY term not in the compound result", expr_pos(other)),
        }
    }

    fn set_expr(&mut self, s: &SetExpr) -> Res<(Query, Vec<ColumnInfo>)> {
        match s {
            SetExpr::Select(sel) => self.select(sel, None),
            SetExpr::Nested(q) => self.query(q),
            SetExpr::SetOp { op, left, right } => {
                let (lq, lcols) = self.set_expr(left)?;
                let (rq, rcols) = self.set_expr(right)?;
                let pos = set_pos(right);
                if lcols.len() != rcols.len() {
                    return Err(ParseError::syntax(
                        pos,
                        "compound SELECT operands have different numbers of columns",
                    ));
                }
                let mut cols = Vec::with_capacity(lcols.len());
                for (l, r) in lcols.into_iter().zip(rcols) {
                    match l.ty.unify(r.ty) {
                        Some(ty) => cols.push(ColumnInfo { ty, ..l }),
                        None => return unsupported("set operation over columns of different types", pos),
                    }
                }
                let op = match op {
                    sx::SetOp::Union => CollectionOp::Union,
                    sx::SetOp::UnionAll => CollectionOp::UnionAll,
                    sx::SetOp::Intersect => CollectionOp::Intersect,
                    sx::SetOp::Except => CollectionOp::Except,
                };
                Ok((
                    Query::Collection {
                        op,
                        lhs: Box::new(lq),
                        rhs: Box::new(rq),
                    },
                    cols,
                ))
            }
        }
    }

    fn select(
        &mut self,
        s: &sx::Select,
        order: Option<(&[sx::OrderItem], Option<u64>, u64)>,
    ) -> Res<(Query, Vec<ColumnInfo>)> {
        let (mut input, scope) = match &s.from {
            Some(f) => self.from(f)?,
            None => (Query::Unit, Vec::new()),
        };
        if let Some(w) = &s.selection {
            if has_agg(w) {
                return Err(ParseError::syntax(expr_pos(w), "aggregate function in WHERE"));
            }
            let pred = self.pred(w, &scope, false)?;
            input = Query::Filter {
                input: Box::new(input),
                pred,
            };
        }
        let grouped = !s.group_by.is_empty()
            || s.having.is_some()
            || s.items.iter().any(|i| matches!(i, SelectItem::Expr { expr, .. } if has_agg(expr)))
            || order.is_some_and(|(keys, ..)| keys.iter().any(|k| has_agg(&k.expr)));

        let mut items = Vec::new();
        for item in &s.items {
            match item {
                SelectItem::Wildcard => {
                    if scope.is_empty() {
                        return Err(ParseError::syntax(s.pos, "no tables specified"));
                    }
                    items.extend(scope.iter().enumerate().map(|(i, c)| Attr {
                        expr: col_ref(i, c),
                        alias: None,
                    }))
                }
                SelectItem::QualifiedWildcard(q, pos) => {
                    let before = items.len();
                    items.extend(
                        scope
                            .iter()
                            .enumerate()
                            .filter(|(_, c)| c.qualifier.as_ref().is_some_and(|cq| cq.eq_ignore_ascii_case(q)))
                            .map(|(i, c)| Attr {
                                expr: col_ref(i, c),
                                alias: None,
                            }),
                    );
                    if items.len() == before {
                        return Err(ParseError::UnresolvedName {
                            name: format!("{q}.*"),
                            pos: *pos,
                        });
                    }
                }
                SelectItem::Expr { expr, alias } => items.push(Attr {
                    expr: self.expr(expr, &scope, grouped)?,
                    alias: alias.clone(),
                }),
            }
        }
        let visible = items.len();

        let mut keys = Vec::new();
        if let Some((order_items, ..)) = order {
            for oi in order_items {
                let idx = self.order_index(&oi.expr, &mut items, visible, &scope, grouped)?;
                keys.push((idx, oi.asc));
            }
        }
        let hidden = items.len() - visible;

        let mut node = if grouped {
            let mut gkeys = Vec::new();
            for g in &s.group_by {
                if has_agg(g) {
                    return Err(ParseError::syntax(expr_pos(g), "aggregate function in GROUP BY"));
                }
                gkeys.push(self.expr(g, &scope, false)?);
            }
            for item in &items {
                check_grouped(&item.expr, &gkeys, s.pos)?;
            }
            let having = match &s.having {
                Some(h) => {
                    let p = self.pred(h, &scope, true)?;
                    check_grouped_pred(&p, &gkeys, expr_pos(h))?;
                    Some(p)
                }
                None => None,
            };
            Query::GroupBy {
                input: Box::new(input),
                keys: gkeys,
                items: items.clone(),
                having,
            }
        } else {
            Query::Project {
                input: Box::new(input),
                items: items.clone(),
            }
        };
        if s.distinct {
            if hidden > 0 {
                return unsupported("DISTINCT with an ORDER BY term outside the select list", s.pos);
            }
            node = Query::Distinct(Box::new(node));
        }
        let all_cols: Vec<ColumnInfo> = items.iter().map(Attr::column_info).collect();
        let cols = all_cols[..visible].to_vec();
        if let Some((_, limit, offset)) = order {
            node = Query::OrderBy {
                input: Box::new(node),
                keys: keys
                    .into_iter()
                    .map(|(i, asc)| SortKey {
                        expr: col_ref(i, &all_cols[i]),
                        asc,
                    })
                    .collect(),
                limit,
                offset,
                hidden,
            };
        }
        Ok((node, cols))
    }

    /// Resolves an ORDER BY term of a simple SELECT to a column of the
    /// select list, appending a hidden column when needed.
    fn order_index(
        &mut self,
        e: &sx::Expr,
        items: &mut Vec<Attr>,
        visible: usize,
        scope: &[ColumnInfo],
        grouped: bool,
    ) -> Res<usize> {
        match strip(e) {
            sx::Expr::Lit(Literal::Int(n)) => {
                return if *n >= 1 && (*n as usize) <= visible {
                    Ok(*n as usize - 1)
                } else {
                    Err(ParseError::syntax(expr_pos(e), format!("ORDER BY term {n} out of range")))
                };
            }
            sx::Expr::Column {
                qualifier: None, name, ..
            } => {
                if let Some(i) = items[..visible]
                    .iter()
                    .position(|a| a.alias.as_ref().is_some_and(|al| al.eq_ignore_ascii_case(name)))
                {
                    return Ok(i);
                }
            }
            _ => {}
        }
        let lowered = self.expr(e, scope, grouped)?;
        if let Some(i) = items.iter().position(|a| a.expr == lowered) {
            return Ok(i);
        }
        items.push(Attr {
            expr: lowered,
            alias: None,
        });
        Ok(items.len() - 1)
    }

    fn from(&mut self, t: &TableRef) -> Res<(Query, Vec<ColumnInfo>)> {
        match t {
            TableRef::Table { name, alias, pos } => {
                if let Some((cname, cq, ccols)) = self
                    .ctes
                    .iter()
                    .rev()
                    .find(|(n, ..)| n.eq_ignore_ascii_case(name))
                {
                    let a = alias.clone().unwrap_or_else(|| cname.clone());
                    let cols = requalify(ccols.clone(), Some(&a));
                    return Ok((
                        Query::Rename {
                            input: Box::new(cq.clone()),
                            alias: a,
                        },
                        cols,
                    ));
                }
                let index = self.schema.table_index(name).ok_or_else(|| ParseError::UnresolvedName {
                    name: name.clone(),
                    pos: *pos,
                })?;
                let table = &self.schema.tables[index];
                let q = Query::Table {
                    index,
                    name: table.name.clone(),
                    alias: alias.clone(),
                };
                let cols = q.columns(self.schema);
                Ok((q, cols))
            }
            TableRef::Subquery { query, alias } => {
                let (q, cols) = self.query(query)?;
                match alias {
                    Some(a) => Ok((
                        Query::Rename {
                            input: Box::new(q),
                            alias: a.clone(),
                        },
                        requalify(cols, Some(a)),
                    )),
                    None => Ok((q, requalify(cols, None))),
                }
            }
            TableRef::Join { kind, left, right, on } => {
                let (lq, mut scope) = self.from(left)?;
                let (rq, rcols) = self.from(right)?;
                scope.extend(rcols);
                let on = match on {
                    Some(p) => {
                        if has_agg(p) {
                            return Err(ParseError::syntax(expr_pos(p), "aggregate function in ON"));
                        }
                        Some(self.pred(p, &scope, false)?)
                    }
                    None => None,
                };
                let kind = match (kind, &on) {
                    (JoinKind::Cross, Some(_)) => JoinKind::Inner,
                    (k, _) => *k,
                };
                Ok((
                    Query::Join {
                        kind,
                        lhs: Box::new(lq),
                        rhs: Box::new(rq),
                        on,
                    },
                    scope,
                ))
            }
        }
    }

    fn resolve(&self, qualifier: &Option<String>, name: &str, pos: usize, scope: &[ColumnInfo]) -> Res<Expr> {
        let matches_col = |c: &ColumnInfo| {
            c.name.eq_ignore_ascii_case(name)
                && qualifier
                    .as_ref()
                    .is_none_or(|q| c.qualifier.as_ref().is_some_and(|cq| cq.eq_ignore_ascii_case(q)))
        };
        let hits: Vec<usize> = scope
            .iter()
            .enumerate()
            .filter(|(_, c)| matches_col(c))
            .map(|(i, _)| i)
            .collect();
        let shown = match qualifier {
            Some(q) => format!("{q}.{name}"),
            None => name.to_string(),
        };
        match hits.as_slice() {
            [i] => Ok(col_ref(*i, &scope[*i])),
            [] => {
                if self.outer.iter().any(|s| s.iter().any(matches_col)) {
                    unsupported("correlated subquery", pos)
                } else {
                    Err(ParseError::UnresolvedName { name: shown, pos })
                }
            }
            _ => Err(ParseError::syntax(pos, format!("ambiguous column name {shown}"))),
        }
    }

    fn subquery(&mut self, q: &sx::QueryExpr, scope: &[ColumnInfo]) -> Res<Query> {
        self.outer.push(scope.to_vec());
        let out = self.query(q);
        self.outer.pop();
        let (query, cols) = out?;
        if cols.len() != 1 {
            return Err(ParseError::syntax(
                q.pos,
                format!("subquery returns {} columns, expected 1", cols.len()),
            ));
        }
        Ok(query)
    }

    fn expr(&mut self, e: &sx::Expr, scope: &[ColumnInfo], agg: bool) -> Res<Expr> {
        use sx::Expr as E;
        match e {
            E::Column { qualifier, name, pos } => self.resolve(qualifier, name, *pos, scope),
            E::Lit(l) => Ok(Expr::Lit(match l {
                Literal::Null => Value::Null,
                Literal::Bool(b) => Value::Int(*b as i64),
                Literal::Int(i) => Value::Int(*i),
                Literal::Decimal(d) => Value::Real(parse_decimal(d)),
                Literal::Str(s) => Value::Str(s.clone()),
            })),
            E::Nested(x) => self.expr(x, scope, agg),
            E::Neg(x) => {
                let inner = to_numeric(self.expr(x, scope, agg)?);
                Ok(Expr::Arith(ArithOp::Sub, Box::new(Expr::Lit(Value::Int(0))), Box::new(inner)))
            }
            E::Binary { op, left, right } if arith_op(*op).is_some() => {
                let a = to_numeric(self.expr(left, scope, agg)?);
                let b = to_numeric(self.expr(right, scope, agg)?);
                let op = arith_op(*op).unwrap();
                if op == ArithOp::Mod && (a.ty() == ExprType::Real || b.ty() == ExprType::Real) {
                    return unsupported("modulo on real operands", expr_pos(left));
                }
                Ok(Expr::Arith(op, Box::new(a), Box::new(b)))
            }
            E::Not(_)
            | E::Binary { .. }
            | E::IsNull { .. }
            | E::InList { .. }
            | E::InSubquery { .. }
            | E::Between { .. }
            | E::Like { .. } => Ok(Expr::Pred(Box::new(self.pred(e, scope, agg)?))),
            E::Case {
                operand,
                whens,
                else_,
            } => {
                let subject = match operand {
                    Some(o) => Some(self.expr(o, scope, agg)?),
                    None => None,
                };
                let mut arms = Vec::new();
                for (w, t) in whens {
                    let cond = match &subject {
                        Some(s) => {
                            let v = self.expr(w, scope, agg)?;
                            let (a, b) = comparable(s.clone(), v);
                            Pred::Cmp(CmpOp::Eq, a, b)
                        }
                        None => self.pred(w, scope, agg)?,
                    };
                    arms.push((cond, self.expr(t, scope, agg)?));
                }
                let else_ = match else_ {
                    Some(x) => self.expr(x, scope, agg)?,
                    None => Expr::Lit(Value::Null),
                };
                self.case(arms, else_, expr_pos(e))
            }
            E::Func {
                name,
                args,
                distinct,
                star,
                pos,
            } => self.func(name, args, *distinct, *star, *pos, scope, agg),
            E::Cast { expr, ty, pos } => {
                let inner = self.expr(expr, scope, agg)?;
                let upper = ty.to_ascii_uppercase();
                if upper.contains("INT") {
                    Ok(Expr::ToInt(Box::new(inner)))
                } else if ["TEXT", "CHAR", "CLOB", "STRING"].iter().any(|k| upper.contains(k)) {
                    if inner.ty() == ExprType::Real {
                        return unsupported("conversion of a real value to text", *pos);
                    }
                    Ok(Expr::ToStr(Box::new(inner)))
                } else if upper == "DATE" {
                    if inner.ty() == ExprType::Real {
                        return unsupported("conversion of a real value to a date", *pos);
                    }
                    Ok(Expr::ToDate(Box::new(inner)))
                } else if ["REAL", "FLOA", "DOUB", "NUMERIC", "DECIMAL"].iter().any(|k| upper.contains(k)) {
                    Ok(Expr::ToReal(Box::new(inner)))
                } else {
                    unsupported(format!("CAST AS {ty}"), *pos)
                }
            }
            E::Subquery(q) => Ok(Expr::Scalar(Box::new(self.subquery(q, scope)?))),
        }
    }

    fn case(&self, whens: Vec<(Pred, Expr)>, else_: Expr, pos: usize) -> Res<Expr> {
        let mut ty = else_.ty();
        for (_, e) in &whens {
            ty = match ty.unify(e.ty()) {
                Some(t) => t,
                None => return unsupported("CASE branches of different types", pos),
            };
        }
        Ok(Expr::Case {
            whens,
            else_: Box::new(else_),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn func(
        &mut self,
        name: &str,
        args: &[sx::Expr],
        distinct: bool,
        star: bool,
        pos: usize,
        scope: &[ColumnInfo],
        agg: bool,
    ) -> Res<Expr> {
        if is_agg_call(name, args.len(), star) {
            if !agg {
                return Err(ParseError::syntax(pos, format!("misuse of aggregate function {name}")));
            }
            let func = match name {
                "COUNT" => AggFunc::Count,
                "SUM" => AggFunc::Sum,
                "AVG" => AggFunc::Avg,
                "MIN" => AggFunc::Min,
                _ => AggFunc::Max,
            };
            if star {
                if func != AggFunc::Count || distinct || !args.is_empty() {
                    return Err(ParseError::syntax(pos, format!("{name}(*) is not allowed")));
                }
                return Ok(Expr::Agg {
                    func,
                    distinct: false,
                    arg: None,
                });
            }
            if args.len() != 1 {
                return Err(ParseError::syntax(pos, format!("wrong number of arguments to {name}")));
            }
            if has_agg(&args[0]) {
                return Err(ParseError::syntax(pos, "nested aggregate functions"));
            }
            let arg = self.expr(&args[0], scope, false)?;
            if matches!(func, AggFunc::Sum | AggFunc::Avg) && matches!(arg.ty(), ExprType::Str | ExprType::Date) {
                return unsupported(format!("{name} over non-numeric values"), pos);
            }
            return Ok(Expr::Agg {
                func,
                distinct,
                arg: Some(Box::new(arg)),
            });
        }
        if distinct || star {
            return Err(ParseError::syntax(pos, format!("{name} is not an aggregate function")));
        }
        let arity = |lo: usize, hi: usize| -> Res<()> {
            if args.len() < lo || args.len() > hi {
                Err(ParseError::syntax(pos, format!("wrong number of arguments to {name}")))
            } else {
                Ok(())
            }
        };
        match name {
            "MIN" | "MAX" => unsupported(format!("multi-argument {name}"), pos),
            "SUBSTR" | "SUBSTRING" => {
                arity(2, 3)?;
                let s = to_str(self.expr(&args[0], scope, agg)?, pos)?;
                let mut int_arg = |e: &sx::Expr| -> Res<Expr> {
                    let v = self.expr(e, scope, agg)?;
                    Ok(match v.ty() {
                        ExprType::Real | ExprType::Date => Expr::ToInt(Box::new(v)),
                        _ => v,
                    })
                };
                let start = int_arg(&args[1])?;
                let len = match args.get(2) {
                    Some(l) => Some(Box::new(int_arg(l)?)),
                    None => None,
                };
                Ok(Expr::SubStr(Box::new(s), Box::new(start), len))
            }
            "STRFTIME" => {
                if args.len() > 2 {
                    return unsupported("STRFTIME modifiers", pos);
                }
                arity(2, 2)?;
                let part = match strip(&args[0]) {
                    sx::Expr::Lit(Literal::Str(f)) => match f.as_str() {
                        "%Y" => DatePart::Year,
                        "%m" => DatePart::Month,
                        "%d" => DatePart::Day,
                        "%M" => return unsupported("STRFTIME format %M (minutes)", pos),
                        other => return unsupported(format!("STRFTIME format {other}"), pos),
                    },
                    _ => return unsupported("STRFTIME with a non-literal format", pos),
                };
                let v = to_date(self.expr(&args[1], scope, agg)?, pos)?;
                Ok(Expr::Strftime(part, Box::new(v)))
            }
            "JULIANDAY" => {
                if args.len() > 1 {
                    return unsupported("JULIANDAY modifiers", pos);
                }
                arity(1, 1)?;
                let v = to_date(self.expr(&args[0], scope, agg)?, pos)?;
                Ok(Expr::JulianDay(Box::new(v)))
            }
            "DATE" => {
                if args.len() > 1 {
                    return unsupported("DATE modifiers", pos);
                }
                arity(1, 1)?;
                to_date(self.expr(&args[0], scope, agg)?, pos)
            }
            "COALESCE" | "IFNULL" => {
                if name == "IFNULL" {
                    arity(2, 2)?;
                } else {
                    arity(2, usize::MAX)?;
                }
                let mut lowered = Vec::new();
                for a in args {
                    lowered.push(self.expr(a, scope, agg)?);
                }
                let last = lowered.pop().expect("at least two arguments");
                let whens = lowered
                    .into_iter()
                    .map(|e| (Pred::Not(Box::new(Pred::IsNull(e.clone()))), e))
                    .collect();
                self.case(whens, last, pos)
            }
            "IIF" => {
                arity(3, 3)?;
                let c = self.pred(&args[0], scope, agg)?;
                let a = self.expr(&args[1], scope, agg)?;
                let b = self.expr(&args[2], scope, agg)?;
                if a.ty().unify(b.ty()).is_none() {
                    return unsupported("IIF branches of different types", pos);
                }
                Ok(Expr::Ite(Box::new(c), Box::new(a), Box::new(b)))
            }
            other => unsupported(format!("function {other}"), pos),
        }
    }

    fn pred(&mut self, e: &sx::Expr, scope: &[ColumnInfo], agg: bool) -> Res<Pred> {
        use sx::Expr as E;
        match e {
            E::Nested(x) => self.pred(x, scope, agg),
            E::Lit(Literal::Bool(b)) => Ok(Pred::Bool(*b)),
            E::Lit(Literal::Null) => Ok(Pred::Null),
            E::Not(x) => Ok(Pred::Not(Box::new(self.pred(x, scope, agg)?))),
            E::Binary { op: BinOp::And, left, right } => Ok(Pred::And(
                Box::new(self.pred(left, scope, agg)?),
                Box::new(self.pred(right, scope, agg)?),
            )),
            E::Binary { op: BinOp::Or, left, right } => Ok(Pred::Or(
                Box::new(self.pred(left, scope, agg)?),
                Box::new(self.pred(right, scope, agg)?),
            )),
            E::Binary { op, left, right } if cmp_op(*op).is_some() => {
                let a = self.expr(left, scope, agg)?;
                let b = self.expr(right, scope, agg)?;
                let (a, b) = comparable(a, b);
                Ok(Pred::Cmp(cmp_op(*op).unwrap(), a, b))
            }
            E::IsNull { expr, negated } => {
                let p = Pred::IsNull(self.expr(expr, scope, agg)?);
                Ok(if *negated { Pred::Not(Box::new(p)) } else { p })
            }
            E::Between {
                expr,
                low,
                high,
                negated,
            } => {
                let v = self.expr(expr, scope, agg)?;
                let lo = self.expr(low, scope, agg)?;
                let hi = self.expr(high, scope, agg)?;
                let (a, b) = comparable(v.clone(), lo);
                let (c, d) = comparable(v, hi);
                let p = Pred::And(
                    Box::new(Pred::Cmp(CmpOp::Ge, a, b)),
                    Box::new(Pred::Cmp(CmpOp::Le, c, d)),
                );
                Ok(if *negated { Pred::Not(Box::new(p)) } else { p })
            }
            E::InList { expr, list, negated } => {
                let subject = self.expr(expr, scope, agg)?;
                let mut pairs = Vec::new();
                for item in list {
                    let v = self.expr(item, scope, agg)?;
                    pairs.push(comparable(subject.clone(), v));
                }
                let p = if pairs.iter().all(|(s, _)| *s == subject) {
                    Pred::InList(subject, pairs.into_iter().map(|(_, v)| v).collect())
                } else {
                    pairs
                        .into_iter()
                        .map(|(s, v)| Pred::Cmp(CmpOp::Eq, s, v))
                        .reduce(|a, b| Pred::Or(Box::new(a), Box::new(b)))
                        .expect("non-empty list")
                };
                Ok(if *negated { Pred::Not(Box::new(p)) } else { p })
            }
            E::InSubquery { expr, query, negated } => {
                let subject = self.expr(expr, scope, agg)?;
                let q = self.subquery(query, scope)?;
                let qty = Expr::Scalar(Box::new(q.clone())).ty();
                let probe = Expr::Lit(match qty {
                    ExprType::Str => Value::Str("x".into()),
                    _ => Value::Null,
                });
                // the conversion rules only ever need to touch the subject,
                // except when the subquery column is text or a date
                let subject = match (subject.ty(), qty) {
                    (s, q) if s == q || s == ExprType::Null || q == ExprType::Null => subject,
                    (s, q) if s.is_numeric() && q.is_numeric() => subject,
                    (ExprType::Str, q) if q.is_numeric() => Expr::ToInt(Box::new(subject)),
                    (ExprType::Date, q) if q.is_numeric() => Expr::ToInt(Box::new(subject)),
                    (ExprType::Date, ExprType::Str) => comparable(subject, probe).0,
                    _ => return unsupported("IN subquery needing a conversion of the subquery column", query.pos),
                };
                let p = Pred::InQuery(subject, Box::new(q));
                Ok(if *negated { Pred::Not(Box::new(p)) } else { p })
            }
            E::Like {
                expr,
                pattern,
                negated,
            } => {
                let pat = match strip(pattern) {
                    E::Lit(Literal::Str(p)) => p.clone(),
                    other => return unsupported("LIKE with a non-literal pattern", expr_pos(other)),
                };
                let subject = to_str(self.expr(expr, scope, agg)?, expr_pos(expr))?;
                let p = like_pred(pat, subject);
                Ok(if *negated { Pred::Not(Box::new(p)) } else { p })
            }
            other => {
                let v = self.expr(other, scope, agg)?;
                Ok(Pred::Truth(to_numeric(v)))
            }
        }
    }
}

fn set_pos(s: &SetExpr) -> usize {
    match s {
        SetExpr::Select(sel) => sel.pos,
        SetExpr::Nested(q) => q.pos,
        SetExpr::SetOp { left, .. } => set_pos(left),
    }
}

/// `prefix%` and `%suffix` patterns without other wildcards become the
/// dedicated string predicates.
fn like_pred(pat: String, subject: Expr) -> Pred {
    if !pat.contains('_') {
        if let Some(prefix) = pat.strip_suffix('%') {
            if !prefix.contains('%') {
                return Pred::PrefixOf(prefix.to_string(), subject);
            }
        }
        if let Some(suffix) = pat.strip_prefix('%') {
            if !suffix.contains('%') && !suffix.is_empty() {
                return Pred::SuffixOf(suffix.to_string(), subject);
            }
        }
    }
    Pred::Like(pat, subject)
}

fn grouped_error<T>(pos: usize) -> Res<T> {
    unsupported("non-aggregated column outside GROUP BY", pos)
}

/// Every column reference outside an aggregate must sit inside an
/// expression that is itself a grouping key.
fn check_grouped(e: &Expr, keys: &[Expr], pos: usize) -> Res<()> {
    if keys.contains(e) {
        return Ok(());
    }
    match e {
        Expr::Col { .. } => grouped_error(pos),
        Expr::Lit(_) | Expr::Agg { .. } | Expr::Scalar(_) => Ok(()),
        Expr::Arith(_, a, b) => {
            check_grouped(a, keys, pos)?;
            check_grouped(b, keys, pos)
        }
        Expr::Ite(p, a, b) => {
            check_grouped_pred(p, keys, pos)?;
            check_grouped(a, keys, pos)?;
            check_grouped(b, keys, pos)
        }
        Expr::Case { whens, else_ } => {
            for (p, x) in whens {
                check_grouped_pred(p, keys, pos)?;
                check_grouped(x, keys, pos)?;
            }
            check_grouped(else_, keys, pos)
        }
        Expr::SubStr(a, b, c) => {
            check_grouped(a, keys, pos)?;
            check_grouped(b, keys, pos)?;
            match c {
                Some(c) => check_grouped(c, keys, pos),
                None => Ok(()),
            }
        }
        Expr::Strftime(_, x)
        | Expr::JulianDay(x)
        | Expr::ToInt(x)
        | Expr::ToDate(x)
        | Expr::ToStr(x)
        | Expr::ToReal(x) => check_grouped(x, keys, pos),
        Expr::Pred(p) => check_grouped_pred(p, keys, pos),
    }
}

fn check_grouped_pred(p: &Pred, keys: &[Expr], pos: usize) -> Res<()> {
    match p {
        Pred::Bool(_) | Pred::Null => Ok(()),
        Pred::Cmp(_, a, b) => {
            check_grouped(a, keys, pos)?;
            check_grouped(b, keys, pos)
        }
        Pred::IsNull(e)
        | Pred::PrefixOf(_, e)
        | Pred::SuffixOf(_, e)
        | Pred::Like(_, e)
        | Pred::Truth(e)
        | Pred::InQuery(e, _) => check_grouped(e, keys, pos),
        Pred::InList(e, list) => {
            check_grouped(e, keys, pos)?;
            list.iter().try_for_each(|x| check_grouped(x, keys, pos))
        }
        Pred::And(a, b) | Pred::Or(a, b) => {
            check_grouped_pred(a, keys, pos)?;
            check_grouped_pred(b, keys, pos)
        }
        Pred::Not(a) => check_grouped_pred(a, keys, pos),
    }
}
