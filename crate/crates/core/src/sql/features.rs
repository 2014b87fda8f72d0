//! Static scan for constructs the encoder cannot handle even though they
//! are representable in the query tree.

use super::ast::{CollectionOp, Expr, ExprType, Pred, Query};
use crate::value::ArithOp;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SupportReport {
    Supported,
    Unsupported(Vec<String>),
}

impl SupportReport {
    pub fn is_supported(&self) -> bool {
        matches!(self, SupportReport::Supported)
    }
}

pub fn feature_scan(q: &Query) -> SupportReport {
    let mut found = Vec::new();
    scan_query(q, &mut found);
    found.sort();
    found.dedup();
    if found.is_empty() {
        SupportReport::Supported
    } else {
        SupportReport::Unsupported(found)
    }
}

fn scan_query(q: &Query, found: &mut Vec<String>) {
    match q {
        Query::Table { .. } | Query::Unit => {}
        Query::Project { input, items } => {
            scan_query(input, found);
            items.iter().for_each(|a| scan_expr(&a.expr, found));
        }
        Query::Filter { input, pred } => {
            scan_query(input, found);
            scan_pred(pred, found);
        }
        Query::Rename { input, .. } | Query::Distinct(input) => scan_query(input, found),
        Query::Collection { op, lhs, rhs } => {
            if matches!(op, CollectionOp::ReservedPlus | CollectionOp::ReservedMinus) {
                found.push(format!("collection operator {}", op.keyword()));
            }
            scan_query(lhs, found);
            scan_query(rhs, found);
        }
        Query::Join { lhs, rhs, on, .. } => {
            scan_query(lhs, found);
            scan_query(rhs, found);
            if let Some(p) = on {
                scan_pred(p, found);
            }
        }
        Query::GroupBy {
            input,
            keys,
            items,
            having,
        } => {
            scan_query(input, found);
            keys.iter().for_each(|k| scan_expr(k, found));
            items.iter().for_each(|a| scan_expr(&a.expr, found));
            if let Some(h) = having {
                scan_pred(h, found);
            }
        }
        Query::OrderBy { input, keys, .. } => {
            scan_query(input, found);
            keys.iter().for_each(|k| scan_expr(&k.expr, found));
        }
    }
}

fn scan_pred(p: &Pred, found: &mut Vec<String>) {
    p.visit_exprs(&mut |e| scan_node(e, found));
    scan_pred_queries(p, found);
}

fn scan_pred_queries(p: &Pred, found: &mut Vec<String>) {
    match p {
        Pred::InQuery(_, q) => scan_query(q, found),
        Pred::And(a, b) | Pred::Or(a, b) => {
            scan_pred_queries(a, found);
            scan_pred_queries(b, found);
        }
        Pred::Not(a) => scan_pred_queries(a, found),
        _ => {}
    }
}

fn scan_expr(e: &Expr, found: &mut Vec<String>) {
    e.visit(&mut |x| scan_node(x, found));
}

fn scan_node(e: &Expr, found: &mut Vec<String>) {
    match e {
        Expr::ToStr(x) if x.ty() == ExprType::Real => found.push("conversion of a real value to text".into()),
        Expr::ToDate(x) if x.ty() == ExprType::Real => found.push("conversion of a real value to a date".into()),
        Expr::Arith(ArithOp::Mod, a, b) if a.ty() == ExprType::Real || b.ty() == ExprType::Real => {
            found.push("modulo on real operands".into())
        }
        Expr::Scalar(q) => scan_query(q, found),
        Expr::Pred(p) => scan_pred_queries(p, found),
        Expr::Ite(p, ..) => scan_pred_queries(p, found),
        Expr::Case { whens, .. } => whens.iter().for_each(|(p, _)| scan_pred_queries(p, found)),
        _ => {}
    }
}
