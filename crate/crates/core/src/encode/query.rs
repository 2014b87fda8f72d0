//! Relational operators over symbolic tuple lists.

use std::collections::HashMap;

use super::expr::{canon_eq, rows_eq, sort_lt, SymVal};
use super::{EncodeError, EncodeOptions, SymDb, SymRelation, SymTuple, TieMode};
use crate::smt::{Sort, Store, Term};
use crate::sql::ast::{Attr, CollectionOp, Expr, JoinKind, Pred, Query, SortKey};

type Res<T> = Result<T, EncodeError>;

/// What an expression may read: the current tuple, and inside a group the
/// group's input relation with one membership flag per input tuple.
#[derive(Clone, Copy, Default)]
pub(crate) struct Scope<'s> {
    pub row: Option<&'s [SymVal]>,
    pub group: Option<(&'s SymRelation, &'s [Term])>,
}

pub(crate) struct Encoder<'a> {
    pub store: &'a mut Store,
    pub db: &'a SymDb,
    pub opts: &'a EncodeOptions,
    /// Uncorrelated subqueries, encoded once per query node.
    cache: HashMap<*const Query, SymRelation>,
    choices: usize,
    /// Prefix for tie-choice variable names, so two encodings sharing a
    /// store never collide.
    tag: String,
}

#[derive(Debug, Clone)]
pub struct EncodingResult {
    pub result: SymRelation,
    /// Side conditions beyond the database's own; the encoding defines
    /// every result cell as a term over the database variables, so this is
    /// empty unless a construct needed fresh variables.
    pub constraints: Vec<Term>,
}

/// Encodes `q` over `db`. `tag` distinguishes the fresh variables of
/// separate encodings in one store.
pub fn encode_query(
    store: &mut Store,
    db: &SymDb,
    q: &Query,
    opts: &EncodeOptions,
    tag: &str,
) -> Result<EncodingResult, EncodeError> {
    let mut enc = Encoder {
        store,
        db,
        opts,
        cache: HashMap::new(),
        choices: 0,
        tag: tag.to_string(),
    };
    let result = enc.query(q)?;
    Ok(EncodingResult {
        result,
        constraints: Vec::new(),
    })
}

impl Encoder<'_> {
    fn check_size(&self, n: usize) -> Res<()> {
        if n > self.opts.ceiling {
            Err(EncodeError::BoundOverflow {
                size: n,
                ceiling: self.opts.ceiling,
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn subquery(&mut self, q: &Query) -> Res<SymRelation> {
        let key = q as *const Query;
        if let Some(r) = self.cache.get(&key) {
            return Ok(r.clone());
        }
        let r = self.query(q)?;
        self.cache.insert(key, r.clone());
        Ok(r)
    }

    /// Flags marking the first present tuple of `rel` in result order.
    pub(crate) fn first_flags(&mut self, rel: &SymRelation) -> Vec<Term> {
        let s = &mut *self.store;
        (0..rel.len())
            .map(|i| {
                let mut conj = vec![rel.tuples[i].alive];
                for j in 0..rel.len() {
                    if j != i {
                        let ahead = s.implies(rel.tuples[j].alive, rel.prec[i][j]);
                        conj.push(ahead);
                    }
                }
                s.and(conj)
            })
            .collect()
    }

    pub(crate) fn query(&mut self, q: &Query) -> Res<SymRelation> {
        let rel = match q {
            Query::Table { index, .. } => self.db.tables[*index].rel.clone(),
            Query::Unit => {
                let s = &mut *self.store;
                SymRelation {
                    arity: 0,
                    tuples: vec![SymTuple {
                        vals: Vec::new(),
                        alive: s.tt(),
                    }],
                    prec: vec![vec![s.ff()]],
                }
            }
            Query::Project { input, items } => {
                let r = self.query(input)?;
                self.project(&r, items)?
            }
            Query::Filter { input, pred } => {
                let r = self.query(input)?;
                self.filter(r, pred)?
            }
            Query::Rename { input, .. } => self.query(input)?,
            Query::Distinct(input) => {
                let r = self.query(input)?;
                self.distinct(r)
            }
            Query::Collection { op, lhs, rhs } => {
                let l = self.query(lhs)?;
                let r = self.query(rhs)?;
                self.collection(*op, l, r)?
            }
            Query::Join { kind, lhs, rhs, on } => {
                let l = self.query(lhs)?;
                let r = self.query(rhs)?;
                self.join(*kind, &l, &r, on.as_ref())?
            }
            Query::GroupBy {
                input,
                keys,
                items,
                having,
            } => {
                let r = self.query(input)?;
                self.group_by(&r, keys, items, having.as_ref())?
            }
            Query::OrderBy {
                input,
                keys,
                limit,
                offset,
                hidden,
            } => {
                let r = self.query(input)?;
                self.order_by(r, keys, *limit, *offset, *hidden)?
            }
        };
        self.check_size(rel.len())?;
        Ok(rel)
    }

    fn project(&mut self, r: &SymRelation, items: &[Attr]) -> Res<SymRelation> {
        let mut tuples = Vec::with_capacity(r.len());
        for t in &r.tuples {
            let scope = Scope {
                row: Some(&t.vals),
                group: None,
            };
            let mut vals = Vec::with_capacity(items.len());
            for a in items {
                vals.push(self.expr(&a.expr, &scope)?);
            }
            tuples.push(SymTuple { vals, alive: t.alive });
        }
        Ok(SymRelation {
            arity: items.len(),
            tuples,
            prec: r.prec.clone(),
        })
    }

    fn filter(&mut self, mut r: SymRelation, pred: &Pred) -> Res<SymRelation> {
        for t in &mut r.tuples {
            let scope = Scope {
                row: Some(&t.vals),
                group: None,
            };
            let c = self.pred(pred, &scope)?;
            t.alive = self.store.and2(t.alive, c.t);
        }
        Ok(r)
    }

    /// Keeps the first occurrence of every row.
    fn distinct(&mut self, mut r: SymRelation) -> SymRelation {
        let s = &mut *self.store;
        let alive: Vec<Term> = r.tuples.iter().map(|t| t.alive).collect();
        for i in 0..r.len() {
            let mut earlier_dup = Vec::new();
            for j in 0..r.len() {
                if j == i || s.const_bool(r.prec[j][i]) == Some(false) {
                    continue;
                }
                let eq = rows_eq(s, &r.tuples[j].vals, &r.tuples[i].vals);
                earlier_dup.push(s.and(vec![r.prec[j][i], alive[j], eq]));
            }
            let dup = s.or(earlier_dup);
            let fresh = s.not(dup);
            r.tuples[i].alive = s.and2(alive[i], fresh);
        }
        r
    }

    fn collection(&mut self, op: CollectionOp, l: SymRelation, r: SymRelation) -> Res<SymRelation> {
        if l.arity != r.arity {
            return Err(EncodeError::ArityMismatch(l.arity, r.arity));
        }
        match op {
            CollectionOp::UnionAll | CollectionOp::Union => {
                let both = self.concat(l, r)?;
                Ok(if op == CollectionOp::Union {
                    self.distinct(both)
                } else {
                    both
                })
            }
            CollectionOp::Intersect | CollectionOp::Except => {
                let mut out = l;
                let s = &mut *self.store;
                for t in &mut out.tuples {
                    let hits: Vec<Term> = r
                        .tuples
                        .iter()
                        .map(|u| {
                            let eq = rows_eq(s, &t.vals, &u.vals);
                            s.and2(u.alive, eq)
                        })
                        .collect();
                    let found = s.or(hits);
                    let keep = if op == CollectionOp::Intersect { found } else { s.not(found) };
                    t.alive = s.and2(t.alive, keep);
                }
                Ok(self.distinct(out))
            }
            CollectionOp::ReservedPlus | CollectionOp::ReservedMinus => Err(EncodeError::Unsupported(format!(
                "collection operator {}",
                op.keyword()
            ))),
        }
    }

    /// `l` followed by `r`.
    fn concat(&mut self, l: SymRelation, r: SymRelation) -> Res<SymRelation> {
        let n = l.len() + r.len();
        self.check_size(n)?;
        let (t, f) = (self.store.tt(), self.store.ff());
        let mut prec = vec![vec![f; n]; n];
        for i in 0..n {
            for j in 0..n {
                prec[i][j] = match (i < l.len(), j < l.len()) {
                    (true, true) => l.prec[i][j],
                    (false, false) => r.prec[i - l.len()][j - l.len()],
                    (true, false) => t,
                    (false, true) => f,
                };
            }
        }
        let mut tuples = l.tuples;
        tuples.extend(r.tuples);
        Ok(SymRelation {
            arity: l.arity,
            tuples,
            prec,
        })
    }

    fn join(&mut self, kind: JoinKind, l: &SymRelation, r: &SymRelation, on: Option<&Pred>) -> Res<SymRelation> {
        #[derive(Clone, Copy)]
        enum Origin {
            Pair(usize, usize),
            LeftPad(usize),
            RightPad(usize),
        }
        let left_pad = matches!(kind, JoinKind::Left | JoinKind::Full);
        let right_pad = matches!(kind, JoinKind::Right | JoinKind::Full);
        let n = l.len() * r.len() + if left_pad { l.len() } else { 0 } + if right_pad { r.len() } else { 0 };
        self.check_size(n)?;
        // on[a][b]: the pair matches
        let mut matches = vec![vec![self.store.ff(); r.len()]; l.len()];
        let mut origins = Vec::with_capacity(n);
        let mut tuples = Vec::with_capacity(n);
        for (a, lt) in l.tuples.iter().enumerate() {
            for (b, rt) in r.tuples.iter().enumerate() {
                let mut vals = lt.vals.clone();
                vals.extend(rt.vals.iter().cloned());
                let both = self.store.and2(lt.alive, rt.alive);
                let ok = match on {
                    Some(p) => {
                        let scope = Scope {
                            row: Some(&vals),
                            group: None,
                        };
                        self.pred(p, &scope)?.t
                    }
                    None => self.store.tt(),
                };
                let alive = self.store.and2(both, ok);
                matches[a][b] = alive;
                origins.push(Origin::Pair(a, b));
                tuples.push(SymTuple { vals, alive });
            }
            if left_pad {
                let s = &mut *self.store;
                let any = s.or(matches[a].clone());
                let none = s.not(any);
                let alive = s.and2(lt.alive, none);
                let mut vals = lt.vals.clone();
                for _ in 0..r.arity {
                    vals.push(super::expr::null_val(s));
                }
                origins.push(Origin::LeftPad(a));
                tuples.push(SymTuple { vals, alive });
            }
        }
        if right_pad {
            for (b, rt) in r.tuples.iter().enumerate() {
                let s = &mut *self.store;
                let col: Vec<Term> = (0..l.len()).map(|a| matches[a][b]).collect();
                let any = s.or(col);
                let none = s.not(any);
                let alive = s.and2(rt.alive, none);
                let mut vals: Vec<SymVal> = (0..l.arity).map(|_| super::expr::null_val(s)).collect();
                vals.extend(rt.vals.iter().cloned());
                origins.push(Origin::RightPad(b));
                tuples.push(SymTuple { vals, alive });
            }
        }
        let (t, f) = (self.store.tt(), self.store.ff());
        let lhs_row = |o: Origin| match o {
            Origin::Pair(a, _) | Origin::LeftPad(a) => Some(a),
            Origin::RightPad(_) => None,
        };
        let mut prec = vec![vec![f; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                prec[i][j] = match (origins[i], origins[j]) {
                    (Origin::RightPad(b), Origin::RightPad(d)) => r.prec[b][d],
                    (_, Origin::RightPad(_)) => t,
                    (Origin::RightPad(_), _) => f,
                    (x, y) => {
                        let (a, c) = (lhs_row(x).unwrap(), lhs_row(y).unwrap());
                        if a != c {
                            l.prec[a][c]
                        } else {
                            match (x, y) {
                                (Origin::Pair(_, b), Origin::Pair(_, d)) => r.prec[b][d],
                                (Origin::Pair(..), Origin::LeftPad(_)) => t,
                                _ => f,
                            }
                        }
                    }
                };
            }
        }
        Ok(SymRelation {
            arity: l.arity + r.arity,
            tuples,
            prec,
        })
    }

    fn group_by(
        &mut self,
        r: &SymRelation,
        keys: &[Expr],
        items: &[Attr],
        having: Option<&Pred>,
    ) -> Res<SymRelation> {
        if keys.is_empty() {
            // one group over the whole input, read through its first row
            let members: Vec<Term> = r.tuples.iter().map(|t| t.alive).collect();
            let firsts = self.first_flags(r);
            let mut row = Vec::with_capacity(r.arity);
            for c in 0..r.arity {
                let choices: Vec<(Term, SymVal)> =
                    r.tuples.iter().zip(&firsts).map(|(t, &f)| (f, t.vals[c].clone())).collect();
                let ty = choices
                    .iter()
                    .map(|(_, v)| super::expr::pay_type(&v.pay))
                    .find(|t| *t != crate::sql::ast::ExprType::Null)
                    .unwrap_or(crate::sql::ast::ExprType::Null);
                row.push(super::expr::select_val(self.store, &choices, ty)?);
            }
            let scope = Scope {
                row: Some(&row),
                group: Some((r, &members)),
            };
            let alive = match having {
                Some(h) => self.pred(h, &scope)?.t,
                None => self.store.tt(),
            };
            let mut vals = Vec::with_capacity(items.len());
            for a in items {
                vals.push(self.expr(&a.expr, &scope)?);
            }
            let f = self.store.ff();
            return Ok(SymRelation {
                arity: items.len(),
                tuples: vec![SymTuple { vals, alive }],
                prec: vec![vec![f]],
            });
        }
        let mut key_vals = Vec::with_capacity(r.len());
        for t in &r.tuples {
            let scope = Scope {
                row: Some(&t.vals),
                group: None,
            };
            let mut kv = Vec::with_capacity(keys.len());
            for k in keys {
                kv.push(self.expr(k, &scope)?);
            }
            key_vals.push(kv);
        }
        let n = r.len();
        let mut same = vec![vec![self.store.tt(); n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let eq = rows_eq(self.store, &key_vals[i], &key_vals[j]);
                same[i][j] = eq;
                same[j][i] = eq;
            }
        }
        let mut tuples = Vec::with_capacity(n);
        for i in 0..n {
            let s = &mut *self.store;
            let members: Vec<Term> = (0..n).map(|j| s.and2(r.tuples[j].alive, same[i][j])).collect();
            let mut earlier = Vec::new();
            for j in 0..n {
                if j != i {
                    earlier.push(s.and(vec![r.prec[j][i], members[j]]));
                }
            }
            let shadowed = s.or(earlier);
            let not_shadowed = s.not(shadowed);
            let rep = s.and2(r.tuples[i].alive, not_shadowed);
            let scope = Scope {
                row: Some(&r.tuples[i].vals),
                group: Some((r, &members)),
            };
            let alive = match having {
                Some(h) => {
                    let c = self.pred(h, &scope)?;
                    self.store.and2(rep, c.t)
                }
                None => rep,
            };
            let mut vals = Vec::with_capacity(items.len());
            for a in items {
                vals.push(self.expr(&a.expr, &scope)?);
            }
            tuples.push(SymTuple { vals, alive });
        }
        Ok(SymRelation {
            arity: items.len(),
            tuples,
            prec: r.prec.clone(),
        })
    }

    fn order_by(
        &mut self,
        r: SymRelation,
        keys: &[SortKey],
        limit: Option<u64>,
        offset: u64,
        hidden: usize,
    ) -> Res<SymRelation> {
        let n = r.len();
        let mut key_vals = Vec::with_capacity(n);
        for t in &r.tuples {
            let scope = Scope {
                row: Some(&t.vals),
                group: None,
            };
            let mut kv = Vec::with_capacity(keys.len());
            for k in keys {
                kv.push(self.expr(&k.expr, &scope)?);
            }
            key_vals.push(kv);
        }
        let f = self.store.ff();
        let mut prec = vec![vec![f; n]; n];
        let mut choice: HashMap<(usize, usize), Term> = HashMap::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let s = &mut *self.store;
                // lexicographic: strictly ahead on some key, equal on all before it
                let mut ahead = s.ff();
                for (k, key) in keys.iter().enumerate().rev() {
                    let (a, b) = (&key_vals[i][k], &key_vals[j][k]);
                    let lt = if key.asc { sort_lt(s, a, b) } else { sort_lt(s, b, a) };
                    let eq = canon_eq(s, a, b);
                    let rest = s.and2(eq, ahead);
                    ahead = s.or2(lt, rest);
                }
                let tie = rows_eq(s, &key_vals[i], &key_vals[j]);
                let tie_order = match self.opts.ties {
                    TieMode::InputOrder => r.prec[i][j],
                    TieMode::Arbitrary => {
                        if i < j {
                            let name = format!("o_{}_{}", self.tag, self.choices);
                            self.choices += 1;
                            let c = self.store.var(name, Sort::Bool);
                            choice.insert((i, j), c);
                            c
                        } else {
                            let c = choice[&(j, i)];
                            self.store.not(c)
                        }
                    }
                };
                let s = &mut *self.store;
                let tied = s.and2(tie, tie_order);
                prec[i][j] = s.or2(ahead, tied);
            }
        }
        let mut out = SymRelation {
            arity: r.arity - hidden,
            tuples: r.tuples,
            prec,
        };
        if limit.is_some() || offset > 0 {
            let s = &mut *self.store;
            let alive: Vec<Term> = out.tuples.iter().map(|t| t.alive).collect();
            let (one, zero) = (s.int(1), s.int(0));
            for i in 0..n {
                let before: Vec<Term> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let c = s.and2(alive[j], out.prec[j][i]);
                        s.ite(c, one, zero)
                    })
                    .collect();
                let rank = s.add(before);
                let off = s.int(offset);
                let mut conj = vec![alive[i], s.le(off, rank)];
                if let Some(l) = limit {
                    let end = s.int(offset.saturating_add(l));
                    conj.push(s.lt(rank, end));
                }
                out.tuples[i].alive = s.and(conj);
            }
        }
        for t in &mut out.tuples {
            t.vals.truncate(out.arity);
        }
        Ok(out)
    }
}
