//! Symbolic encoding of queries over a bounded symbolic database.
//!
//! Every table holds `k` symbolic tuples, each with an `alive` flag (the
//! negation of the deletion predicate). Query operators produce lists of
//! symbolic tuples whose cells are terms over the database variables, so
//! the only side conditions are the ones on the database itself.
//!
//! Each relation also carries a precedence matrix `prec[i][j]`: tuple `i`
//! comes before tuple `j` in the result order. It mirrors the order the
//! reference evaluator produces and is what LIMIT, OFFSET and scalar
//! subqueries select on.

mod expr;
mod formula;
mod query;

use thiserror::Error;

use crate::db::ConcreteDb;
use crate::oracle::DomainSpec;
use crate::schema::{DatabaseSchema, SqlType};
use crate::smt::{Assignment, Lit, Regex, Sort, Store, Term};
use crate::value::{Date, MAX_YEAR, MIN_YEAR};

pub use expr::{Payload, SymVal, Truth3};
pub use formula::{
    decode_database, decode_relation, nonequivalence_formula, set_equiv_constraint, DecodeError, Formula,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("symbolic relation of {size} tuples exceeds the ceiling of {ceiling}")]
    BoundOverflow { size: usize, ceiling: usize },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("bound must be at least 1")]
    ZeroBound,
}

/// How rows that tie under ORDER BY are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieMode {
    /// Ties keep their input order, exactly as the reference evaluator.
    #[default]
    InputOrder,
    /// Ties are ordered by fresh solver choices; models relying on a
    /// particular choice are caught by validation.
    Arbitrary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOptions {
    /// Largest symbolic relation any operator may produce.
    pub ceiling: usize,
    pub ties: TieMode,
    pub exclude_degenerate: bool,
    /// Integer cells stay within `[-int_limit, int_limit]`.
    pub int_limit: i64,
    pub max_str_len: usize,
    /// Restricts every cell to a finite pool (NULL always allowed).
    pub pools: Option<DomainSpec>,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            ceiling: 64,
            ties: TieMode::InputOrder,
            exclude_degenerate: true,
            int_limit: 1 << 31,
            max_str_len: 16,
            pools: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymTuple {
    pub vals: Vec<SymVal>,
    /// True when the tuple is present; the deletion predicate negated.
    pub alive: Term,
}

#[derive(Debug, Clone)]
pub struct SymRelation {
    pub arity: usize,
    pub tuples: Vec<SymTuple>,
    /// `prec[i][j]`: tuple `i` precedes tuple `j`. Irreflexive.
    pub prec: Vec<Vec<Term>>,
}

impl SymRelation {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Precedence by list position.
    pub fn positional_prec(store: &mut Store, n: usize) -> Vec<Vec<Term>> {
        let (t, f) = (store.tt(), store.ff());
        (0..n).map(|i| (0..n).map(|j| if i < j { t } else { f }).collect()).collect()
    }
}

/// Cell variables of one base-table tuple.
#[derive(Debug, Clone)]
pub struct CellVars {
    pub null: Term,
    /// Payload variables: one for int and str cells, three for dates.
    pub payload: Vec<Term>,
}

#[derive(Debug, Clone)]
pub struct SymTable {
    pub alive: Vec<Term>,
    pub cells: Vec<Vec<CellVars>>,
    pub rel: SymRelation,
}

/// The symbolic database: `k` tuples per table plus the constraints every
/// interpretation must satisfy.
#[derive(Debug, Clone)]
pub struct SymDb {
    pub k: usize,
    pub tables: Vec<SymTable>,
    pub constraints: Vec<Term>,
}

impl SymDb {
    pub fn tuple_count(&self) -> usize {
        self.tables.iter().map(|t| t.alive.len()).sum()
    }

    /// Every variable that determines the decoded database.
    pub fn vars(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for t in &self.tables {
            for (a, row) in t.alive.iter().zip(&t.cells) {
                out.push(*a);
                for c in row {
                    out.push(c.null);
                    out.extend(c.payload.iter().copied());
                }
            }
        }
        out
    }
}

pub(crate) fn date_valid(s: &mut Store, y: Term, m: Term, d: Term) -> Term {
    let (lo_y, hi_y) = (s.int(MIN_YEAR), s.int(MAX_YEAR));
    let (one, twelve) = (s.int(1), s.int(12));
    let mut conj = vec![s.le(lo_y, y), s.le(y, hi_y), s.le(one, m), s.le(m, twelve), s.le(one, d)];
    let dim = days_in_month_term(s, y, m);
    conj.push(s.le(d, dim));
    s.and(conj)
}

fn days_in_month_term(s: &mut Store, y: Term, m: Term) -> Term {
    let (four, hundred, four_hundred, zero) = (s.int(4), s.int(100), s.int(400), s.int(0));
    let r4 = s.modulo(y, four);
    let r100 = s.modulo(y, hundred);
    let r400 = s.modulo(y, four_hundred);
    let div4 = s.eq(r4, zero);
    let c100 = s.eq(r100, zero);
    let not100 = s.not(c100);
    let div400 = s.eq(r400, zero);
    let century_ok = s.or2(not100, div400);
    let leap = s.and2(div4, century_ok);
    let (n28, n29, n30, n31) = (s.int(28), s.int(29), s.int(30), s.int(31));
    let feb = s.ite(leap, n29, n28);
    let thirty: Vec<Term> = [4, 6, 9, 11]
        .iter()
        .map(|&mm| {
            let c = s.int(mm);
            s.eq(m, c)
        })
        .collect();
    let is30 = s.or(thirty);
    let two = s.int(2);
    let is_feb = s.eq(m, two);
    let other = s.ite(is30, n30, n31);
    s.ite(is_feb, feb, other)
}

/// Characters string cells may hold: printable ASCII without the backslash,
/// which the solver does not escape in its replies.
pub fn cell_char_class() -> Regex {
    Regex::Union(vec![Regex::Range(' ', '['), Regex::Range(']', '~')])
}

/// Allocates `k` symbolic tuples per table with their domain constraints.
pub fn alloc_symbolic_db(
    store: &mut Store,
    schema: &DatabaseSchema,
    k: usize,
    opts: &EncodeOptions,
) -> Result<SymDb, EncodeError> {
    if k == 0 {
        return Err(EncodeError::ZeroBound);
    }
    let mut tables = Vec::new();
    let mut constraints = Vec::new();
    for (ti, t) in schema.tables.iter().enumerate() {
        let mut alive = Vec::with_capacity(k);
        let mut cells = Vec::with_capacity(k);
        let mut tuples = Vec::with_capacity(k);
        for ri in 0..k {
            let a = store.var(format!("a_{ti}_{ri}"), Sort::Bool);
            if let Some(&prev) = alive.last() {
                // present tuples form a prefix
                let c = store.implies(a, prev);
                constraints.push(c);
            }
            alive.push(a);
            let mut row = Vec::with_capacity(t.columns.len());
            let mut vals = Vec::with_capacity(t.columns.len());
            for (ci, col) in t.columns.iter().enumerate() {
                let null = store.var(format!("n_{ti}_{ri}_{ci}"), Sort::Bool);
                let (payload, pay) = match col.ty {
                    SqlType::Int => {
                        let v = store.var(format!("i_{ti}_{ri}_{ci}"), Sort::Int);
                        let (lo, hi) = (store.int(-opts.int_limit), store.int(opts.int_limit));
                        let c1 = store.le(lo, v);
                        let c2 = store.le(v, hi);
                        constraints.push(c1);
                        constraints.push(c2);
                        (vec![v], Payload::Int(v))
                    }
                    SqlType::Str => {
                        let v = store.var(format!("s_{ti}_{ri}_{ci}"), Sort::Str);
                        let len = store.str_len(v);
                        let max = store.int(opts.max_str_len as i64);
                        let c1 = store.le(len, max);
                        let c2 = store.in_re(v, Regex::Star(Box::new(cell_char_class())));
                        constraints.push(c1);
                        constraints.push(c2);
                        (vec![v], Payload::Str(v))
                    }
                    SqlType::Date => {
                        let y = store.var(format!("y_{ti}_{ri}_{ci}"), Sort::Int);
                        let m = store.var(format!("m_{ti}_{ri}_{ci}"), Sort::Int);
                        let d = store.var(format!("d_{ti}_{ri}_{ci}"), Sort::Int);
                        let phi = date_valid(store, y, m, d);
                        constraints.push(phi);
                        (vec![y, m, d], Payload::Date { y, m, d })
                    }
                };
                if let Some(p) = &opts.pools {
                    let c = pool_constraint(store, p, col.ty, null, &pay);
                    constraints.push(c);
                }
                row.push(CellVars { null, payload });
                vals.push(SymVal { null, pay });
            }
            cells.push(row);
            tuples.push(SymTuple { vals, alive: a });
        }
        if !t.primary_key.is_empty() {
            for i in 0..k {
                for &c in &t.primary_key {
                    let nn = store.not(tuples[i].vals[c].null);
                    let g = store.implies(alive[i], nn);
                    constraints.push(g);
                }
                for j in i + 1..k {
                    let same: Vec<Term> = t
                        .primary_key
                        .iter()
                        .map(|&c| {
                            let (a, b) = (tuples[i].vals[c].clone(), tuples[j].vals[c].clone());
                            expr::canon_eq(store, &a, &b)
                        })
                        .collect();
                    let all_same = store.and(same);
                    let both = store.and2(alive[i], alive[j]);
                    let dup = store.and2(both, all_same);
                    let c = store.not(dup);
                    constraints.push(c);
                }
            }
        }
        let prec = SymRelation::positional_prec(store, k);
        tables.push(SymTable {
            alive,
            cells,
            rel: SymRelation {
                arity: t.columns.len(),
                tuples,
                prec,
            },
        });
    }
    Ok(SymDb { k, tables, constraints })
}

fn pool_constraint(store: &mut Store, pools: &DomainSpec, ty: SqlType, null: Term, pay: &Payload) -> Term {
    let mut alts = vec![null];
    match (ty, pay) {
        (SqlType::Int, Payload::Int(v)) => {
            for &i in &pools.ints {
                let c = store.int(i);
                alts.push(store.eq(*v, c));
            }
        }
        (SqlType::Str, Payload::Str(v)) => {
            for s in &pools.strs {
                let c = store.string(s.clone());
                alts.push(store.eq(*v, c));
            }
        }
        (SqlType::Date, Payload::Date { y, m, d }) => {
            for dt in &pools.dates {
                let (cy, cm, cd) = (store.int(dt.year()), store.int(dt.month()), store.int(dt.day()));
                let conj = vec![store.eq(*y, cy), store.eq(*m, cm), store.eq(*d, cd)];
                alts.push(store.and(conj));
            }
        }
        _ => unreachable!("payload shape follows the column type"),
    }
    store.or(alts)
}

/// The interpretation under which the symbolic database denotes `db`.
/// Absent tuples get NULL cells. Fails when a table holds more than `k`
/// rows.
pub fn assignment_for_db(symdb: &SymDb, db: &ConcreteDb) -> Option<Assignment> {
    use crate::value::Value;
    let mut asg = Assignment::new();
    for (st, t) in symdb.tables.iter().zip(&db.tables) {
        if t.rows.len() > st.alive.len() {
            return None;
        }
        for (ri, (&a, cells)) in st.alive.iter().zip(&st.cells).enumerate() {
            let row = t.rows.get(ri);
            asg.insert(a, Lit::Bool(row.is_some()));
            for (ci, c) in cells.iter().enumerate() {
                let v = row.map_or(&Value::Null, |r| &r[ci]);
                asg.insert(c.null, Lit::Bool(v.is_null()));
                match (v, c.payload.as_slice()) {
                    (Value::Int(i), [p]) => {
                        asg.insert(*p, Lit::Int((*i).into()));
                    }
                    (Value::Str(s), [p]) => {
                        asg.insert(*p, Lit::Str(s.clone()));
                    }
                    (Value::Date(d), [y, m, dd]) => {
                        asg.insert(*y, Lit::Int(d.year().into()));
                        asg.insert(*m, Lit::Int(d.month().into()));
                        asg.insert(*dd, Lit::Int(d.day().into()));
                    }
                    (Value::Null, [y, m, dd]) => {
                        let d = Date::new(2000, 1, 1).expect("valid date");
                        asg.insert(*y, Lit::Int(d.year().into()));
                        asg.insert(*m, Lit::Int(d.month().into()));
                        asg.insert(*dd, Lit::Int(d.day().into()));
                    }
                    (Value::Null, _) => {}
                    _ => return None,
                }
            }
        }
    }
    Some(asg)
}

pub use query::{encode_query, EncodingResult};
