//! Prints the query tree back as SQL accepted by SQLite and by the parser.
//!
//! Queries built by the parser print back to text that parses to the same
//! tree. Hand-built trees of other shapes print through `SELECT *`
//! wrappers, which keeps the meaning but not the shape.

use super::ast::{Attr, CollectionOp, Expr, Pred, Query};
use super::syntax::JoinKind;
use crate::schema::quote_ident;
use crate::value::{rational_to_decimal, Value};

pub fn query_to_sql(q: &Query) -> String {
    let mut out = String::new();
    query(q, &mut out);
    out
}

pub fn expr_to_sql(e: &Expr) -> String {
    let mut out = String::new();
    expr(e, &mut out);
    out
}

pub fn pred_to_sql(p: &Pred) -> String {
    let mut out = String::new();
    pred(p, &mut out);
    out
}

fn str_lit(s: &str, out: &mut String) {
    out.push('\'');
    out.push_str(&s.replace('\'', "''"));
    out.push('\'');
}

fn value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("NULL"),
        Value::Int(i) => out.push_str(&i.to_string()),
        Value::Real(r) => out.push_str(&rational_to_decimal(r)),
        Value::Str(s) => str_lit(s, out),
        Value::Date(d) => {
            out.push_str("CAST(");
            str_lit(&crate::value::date_to_str(*d), out);
            out.push_str(" AS DATE)");
        }
    }
}

fn list<T>(items: &[T], out: &mut String, mut f: impl FnMut(&T, &mut String)) {
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        f(x, out);
    }
}

fn expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Col { qualifier, name, .. } => {
            if let Some(q) = qualifier {
                out.push_str(&quote_ident(q));
                out.push('.');
            }
            out.push_str(&quote_ident(name));
        }
        Expr::Lit(v) => value(v, out),
        Expr::Arith(op, a, b) => {
            out.push('(');
            expr(a, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            expr(b, out);
            out.push(')');
        }
        Expr::Ite(p, a, b) => {
            out.push_str("IIF(");
            pred(p, out);
            out.push_str(", ");
            expr(a, out);
            out.push_str(", ");
            expr(b, out);
            out.push(')');
        }
        Expr::Case { whens, else_ } => {
            out.push_str("CASE");
            for (p, x) in whens {
                out.push_str(" WHEN ");
                pred(p, out);
                out.push_str(" THEN ");
                expr(x, out);
            }
            out.push_str(" ELSE ");
            expr(else_, out);
            out.push_str(" END");
        }
        Expr::SubStr(s, a, b) => {
            out.push_str("SUBSTR(");
            expr(s, out);
            out.push_str(", ");
            expr(a, out);
            if let Some(b) = b {
                out.push_str(", ");
                expr(b, out);
            }
            out.push(')');
        }
        Expr::Strftime(part, x) => {
            out.push_str("STRFTIME(");
            str_lit(part.format(), out);
            out.push_str(", ");
            expr(x, out);
            out.push(')');
        }
        Expr::JulianDay(x) => call("JULIANDAY", x, out),
        Expr::ToInt(x) => cast(x, "INTEGER", out),
        Expr::ToStr(x) => cast(x, "TEXT", out),
        Expr::ToDate(x) => cast(x, "DATE", out),
        Expr::ToReal(x) => cast(x, "REAL", out),
        Expr::Pred(p) => pred(p, out),
        Expr::Agg { func, distinct, arg } => {
            out.push_str(func.name());
            out.push('(');
            match arg {
                Some(a) => {
                    if *distinct {
                        out.push_str("DISTINCT ");
                    }
                    expr(a, out);
                }
                None => out.push('*'),
            }
            out.push(')');
        }
        Expr::Scalar(q) => {
            out.push('(');
            query(q, out);
            out.push(')');
        }
    }
}

fn call(name: &str, x: &Expr, out: &mut String) {
    out.push_str(name);
    out.push('(');
    expr(x, out);
    out.push(')');
}

fn cast(x: &Expr, ty: &str, out: &mut String) {
    out.push_str("CAST(");
    expr(x, out);
    out.push_str(" AS ");
    out.push_str(ty);
    out.push(')');
}

fn pred(p: &Pred, out: &mut String) {
    match p {
        Pred::Bool(b) => out.push_str(if *b { "TRUE" } else { "FALSE" }),
        Pred::Null => out.push_str("NULL"),
        Pred::Truth(e) => expr(e, out),
        Pred::Cmp(op, a, b) => {
            out.push('(');
            expr(a, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            expr(b, out);
            out.push(')');
        }
        Pred::IsNull(e) => {
            out.push('(');
            expr(e, out);
            out.push_str(" IS NULL)");
        }
        Pred::InList(e, items) => {
            out.push('(');
            expr(e, out);
            out.push_str(" IN (");
            list(items, out, expr);
            out.push_str("))");
        }
        Pred::InQuery(e, q) => {
            out.push('(');
            expr(e, out);
            out.push_str(" IN (");
            query(q, out);
            out.push_str("))");
        }
        Pred::And(a, b) | Pred::Or(a, b) => {
            out.push('(');
            pred(a, out);
            out.push_str(if matches!(p, Pred::And(..)) { " AND " } else { " OR " });
            pred(b, out);
            out.push(')');
        }
        Pred::Not(a) => {
            out.push_str("(NOT ");
            pred(a, out);
            out.push(')');
        }
        Pred::PrefixOf(s, e) => like(e, &format!("{s}%"), out),
        Pred::SuffixOf(s, e) => like(e, &format!("%{s}"), out),
        Pred::Like(pat, e) => like(e, pat, out),
    }
}

fn like(e: &Expr, pat: &str, out: &mut String) {
    out.push('(');
    expr(e, out);
    out.push_str(" LIKE ");
    str_lit(pat, out);
    out.push(')');
}

fn attr(a: &Attr, out: &mut String) {
    expr(&a.expr, out);
    if let Some(al) = &a.alias {
        out.push_str(" AS ");
        out.push_str(&quote_ident(al));
    }
}

/// A query whose top node maps onto one SELECT block.
fn is_block(q: &Query) -> bool {
    match q {
        Query::Distinct(inner) => matches!(**inner, Query::Project { .. } | Query::GroupBy { .. }),
        Query::Project { .. } | Query::GroupBy { .. } => true,
        _ => false,
    }
}

fn query(q: &Query, out: &mut String) {
    match q {
        Query::OrderBy {
            input,
            keys,
            limit,
            offset,
            hidden,
        } => {
            let visible;
            if is_block(input) {
                let items = block(input, *hidden, out);
                visible = items.len() - hidden;
                order_tail(keys, limit, *offset, out, |i, out| {
                    if i < visible {
                        out.push_str(&(i + 1).to_string());
                    } else {
                        expr(&items[i].expr, out);
                    }
                });
            } else if *hidden == 0 && matches!(**input, Query::Collection { .. }) {
                query(input, out);
                order_tail(keys, limit, *offset, out, |i, out| out.push_str(&(i + 1).to_string()));
            } else {
                // only hidden-free inputs can be wrapped
                out.push_str("SELECT * FROM (");
                query(input, out);
                out.push(')');
                order_tail(keys, limit, *offset, out, |i, out| out.push_str(&(i + 1).to_string()));
            }
        }
        Query::Collection { op, lhs, rhs } => {
            operand(lhs, true, out);
            out.push(' ');
            out.push_str(match op {
                CollectionOp::ReservedPlus | CollectionOp::ReservedMinus => "UNION ALL",
                other => other.keyword(),
            });
            out.push(' ');
            operand(rhs, false, out);
        }
        q if is_block(q) => {
            block(q, 0, out);
        }
        Query::Unit => out.push_str("SELECT 1"),
        other => {
            out.push_str("SELECT * FROM ");
            from(other, out);
        }
    }
}

fn operand(q: &Query, left: bool, out: &mut String) {
    match q {
        Query::Collection { .. } if left => query(q, out),
        Query::Collection { .. } | Query::OrderBy { .. } => {
            out.push_str("SELECT * FROM (");
            query(q, out);
            out.push(')');
        }
        _ => query(q, out),
    }
}

fn order_tail(
    keys: &[super::ast::SortKey],
    limit: &Option<u64>,
    offset: u64,
    out: &mut String,
    mut key: impl FnMut(usize, &mut String),
) {
    if !keys.is_empty() {
        out.push_str(" ORDER BY ");
        for (n, k) in keys.iter().enumerate() {
            if n > 0 {
                out.push_str(", ");
            }
            match &k.expr {
                Expr::Col { index, .. } => key(*index, out),
                other => expr(other, out),
            }
            if !k.asc {
                out.push_str(" DESC");
            }
        }
    }
    match (limit, offset) {
        (Some(l), 0) => out.push_str(&format!(" LIMIT {l}")),
        (Some(l), o) => out.push_str(&format!(" LIMIT {l} OFFSET {o}")),
        (None, 0) => {}
        (None, o) => out.push_str(&format!(" LIMIT -1 OFFSET {o}")),
    }
}

/// Prints a SELECT block, leaving out the trailing `hidden` items. Returns
/// the full item list.
fn block<'q>(q: &'q Query, hidden: usize, out: &mut String) -> &'q [Attr] {
    let (distinct, inner) = match q {
        Query::Distinct(inner) => (true, &**inner),
        other => (false, other),
    };
    let (input, items, keys, having) = match inner {
        Query::Project { input, items } => (&**input, items.as_slice(), &[][..], None),
        Query::GroupBy {
            input,
            keys,
            items,
            having,
        } => (&**input, items.as_slice(), keys.as_slice(), having.as_ref()),
        _ => unreachable!("not a select block"),
    };
    out.push_str(if distinct { "SELECT DISTINCT " } else { "SELECT " });
    list(&items[..items.len() - hidden], out, attr);
    let (source, filter) = match input {
        Query::Filter { input, pred } => (&**input, Some(pred)),
        other => (other, None),
    };
    if !matches!(source, Query::Unit) {
        out.push_str(" FROM ");
        from(source, out);
    }
    if let Some(p) = filter {
        out.push_str(" WHERE ");
        pred(p, out);
    }
    if !keys.is_empty() {
        out.push_str(" GROUP BY ");
        list(keys, out, expr);
    }
    if let Some(h) = having {
        out.push_str(" HAVING ");
        pred(h, out);
    }
    items
}

fn from(q: &Query, out: &mut String) {
    match q {
        Query::Table { name, alias, .. } => {
            out.push_str(&quote_ident(name));
            if let Some(a) = alias {
                out.push_str(" AS ");
                out.push_str(&quote_ident(a));
            }
        }
        Query::Rename { input, alias } => {
            out.push('(');
            query(input, out);
            out.push_str(") AS ");
            out.push_str(&quote_ident(alias));
        }
        Query::Join { kind, lhs, rhs, on } => {
            from(lhs, out);
            out.push(' ');
            out.push_str(match (kind, on) {
                (JoinKind::Inner, None) => "INNER JOIN",
                (k, _) => k.keyword(),
            });
            out.push(' ');
            if matches!(**rhs, Query::Join { .. }) {
                out.push('(');
                from(rhs, out);
                out.push(')');
            } else {
                from(rhs, out);
            }
            if let Some(p) = on {
                out.push_str(" ON ");
                pred(p, out);
            }
        }
        Query::Unit => out.push_str("(SELECT 1)"),
        other => {
            out.push('(');
            query(other, out);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_sql;
    use super::*;
    use crate::schema::load_schema;

    #[test]
    fn round_trips() {
        let s = load_schema(
            r#"{"tables":[
                {"name":"R","columns":[{"name":"id","type":"int"},{"name":"dob","type":"date"},{"name":"name","type":"str"}]},
                {"name":"S","columns":[{"name":"id","type":"int"},{"name":"v","type":"int"}]}]}"#,
        )
        .unwrap();
        let cases = [
            "SELECT id FROM R WHERE id > 1",
            "SELECT DISTINCT name FROM R ORDER BY name DESC LIMIT 3 OFFSET 1",
            "SELECT id FROM R ORDER BY dob LIMIT 1",
            "SELECT R.id, COUNT(*) AS n FROM R LEFT JOIN S ON R.id = S.id GROUP BY R.id HAVING COUNT(S.v) > 1",
            "SELECT id FROM R WHERE dob BETWEEN '2000-01-01' AND '2001-01-01' AND name NOT LIKE 'a%'",
            "SELECT id FROM R UNION SELECT id FROM S ORDER BY 1",
            "SELECT id FROM R WHERE id IN (SELECT id FROM S WHERE v IS NOT NULL) OR id IN (1, 2)",
            "SELECT CASE WHEN id > 2 THEN 'x' END, COALESCE(name, 'n'), IIF(id = 1, 2.5, 3) FROM R",
            "SELECT SUBSTR(name, 1, 2), STRFTIME('%Y', dob), JULIANDAY(dob) - 2, -id FROM R",
            "SELECT t.id FROM (SELECT id FROM S) AS t",
            "WITH c AS (SELECT id FROM R) SELECT c.id FROM c CROSS JOIN S",
            "SELECT (SELECT MAX(v) FROM S), 1.25",
            "SELECT AVG(DISTINCT v) FROM S WHERE v % 2 = 0 AND id / 3 <> 1",
        ];
        for sql in cases {
            let q = parse_sql(sql, &s).unwrap_or_else(|e| panic!("{sql}: {e}"));
            let printed = query_to_sql(&q);
            let again = parse_sql(&printed, &s).unwrap_or_else(|e| panic!("{printed}: {e}"));
            assert_eq!(q, again, "{sql}\n{printed}");
        }
    }
}
