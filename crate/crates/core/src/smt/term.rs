//! Hash-consed term store over booleans, integers and strings.
//!
//! Constructors fold constants, so a term whose leaves are all constants
//! is itself a constant. The same folding function evaluates terms under
//! a concrete assignment of the variables.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term(u32);

impl Term {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Bool,
    Int,
    Str,
}

impl Sort {
    pub fn smt_name(self) -> &'static str {
        match self {
            Sort::Bool => "Bool",
            Sort::Int => "Int",
            Sort::Str => "String",
        }
    }
}

/// A concrete scalar.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Lit {
    Bool(bool),
    Int(BigInt),
    Str(String),
}

impl Lit {
    pub fn sort(&self) -> Sort {
        match self {
            Lit::Bool(_) => Sort::Bool,
            Lit::Int(_) => Sort::Int,
            Lit::Str(_) => Sort::Str,
        }
    }

    pub fn as_bool(&self) -> bool {
        match self {
            Lit::Bool(b) => *b,
            other => panic!("expected a boolean, found {other}"),
        }
    }

    pub fn as_int(&self) -> &BigInt {
        match self {
            Lit::Int(i) => i,
            other => panic!("expected an integer, found {other}"),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Lit::Str(s) => s,
            other => panic!("expected a string, found {other}"),
        }
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lit::Bool(b) => write!(f, "{b}"),
            Lit::Int(i) => write!(f, "{i}"),
            Lit::Str(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Const(Lit),
    Var(String, Sort),
    Not(Term),
    And(Vec<Term>),
    Or(Vec<Term>),
    Ite(Term, Term, Term),
    Eq(Term, Term),
    Lt(Term, Term),
    Le(Term, Term),
    Add(Vec<Term>),
    Neg(Term),
    Mul(Term, Term),
    /// Euclidean division and remainder, as in SMT-LIB.
    Div(Term, Term),
    Mod(Term, Term),
    StrLen(Term),
    StrConcat(Vec<Term>),
    StrSubstr(Term, Term, Term),
    StrPrefixOf(Term, Term),
    StrSuffixOf(Term, Term),
    StrLt(Term, Term),
    StrLe(Term, Term),
    StrToInt(Term),
    StrFromInt(Term),
    InRe(Term, Regex),
}

impl Node {
    pub fn children(&self) -> Vec<Term> {
        match self {
            Node::Const(_) | Node::Var(..) => Vec::new(),
            Node::Not(a) | Node::Neg(a) | Node::StrLen(a) | Node::StrToInt(a) | Node::StrFromInt(a) | Node::InRe(a, _) => {
                vec![*a]
            }
            Node::And(v) | Node::Or(v) | Node::Add(v) | Node::StrConcat(v) => v.clone(),
            Node::Ite(a, b, c) | Node::StrSubstr(a, b, c) => vec![*a, *b, *c],
            Node::Eq(a, b)
            | Node::Lt(a, b)
            | Node::Le(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Mod(a, b)
            | Node::StrPrefixOf(a, b)
            | Node::StrSuffixOf(a, b)
            | Node::StrLt(a, b)
            | Node::StrLe(a, b) => vec![*a, *b],
        }
    }
}

/// Euclidean quotient and remainder; a zero divisor gives (0, x).
pub fn euclid(x: &BigInt, y: &BigInt) -> (BigInt, BigInt) {
    if y.is_zero() {
        return (BigInt::zero(), x.clone());
    }
    let r = x.mod_floor(&y.abs());
    let q = (x - &r) / y;
    (q, r)
}

pub fn smt_substr(s: &str, i: &BigInt, n: &BigInt) -> String {
    let chars: Vec<char> = s.chars().collect();
    let len = BigInt::from(chars.len());
    if i.is_negative() || *i >= len || !n.is_positive() {
        return String::new();
    }
    let from = i.to_usize().unwrap_or(usize::MAX);
    let end = (i + n).min(len).to_usize().unwrap_or(chars.len());
    chars[from..end].iter().collect()
}

pub fn smt_str_to_int(s: &str) -> BigInt {
    if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
        s.parse().expect("digit string")
    } else {
        BigInt::from(-1)
    }
}

pub fn smt_str_from_int(i: &BigInt) -> String {
    if i.is_negative() {
        String::new()
    } else {
        i.to_string()
    }
}

/// Applies an operator to concrete arguments given in `children()` order.
fn apply(node: &Node, args: &[Lit]) -> Lit {
    use Lit::*;
    let int = |i: usize| args[i].as_int();
    let st = |i: usize| args[i].as_str();
    match node {
        Node::Const(l) => l.clone(),
        Node::Var(..) => unreachable!("variables have no folding rule"),
        Node::Not(_) => Bool(!args[0].as_bool()),
        Node::And(_) => Bool(args.iter().all(Lit::as_bool)),
        Node::Or(_) => Bool(args.iter().any(Lit::as_bool)),
        Node::Ite(..) => {
            if args[0].as_bool() {
                args[1].clone()
            } else {
                args[2].clone()
            }
        }
        Node::Eq(..) => Bool(args[0] == args[1]),
        Node::Lt(..) => Bool(int(0) < int(1)),
        Node::Le(..) => Bool(int(0) <= int(1)),
        Node::Add(_) => Int(args.iter().map(Lit::as_int).sum()),
        Node::Neg(_) => Int(-int(0)),
        Node::Mul(..) => Int(int(0) * int(1)),
        Node::Div(..) => Int(euclid(int(0), int(1)).0),
        Node::Mod(..) => Int(euclid(int(0), int(1)).1),
        Node::StrLen(_) => Int(BigInt::from(st(0).chars().count())),
        Node::StrConcat(_) => Str(args.iter().map(Lit::as_str).collect()),
        Node::StrSubstr(..) => Str(smt_substr(st(0), int(1), int(2))),
        Node::StrPrefixOf(..) => Bool(st(1).starts_with(st(0))),
        Node::StrSuffixOf(..) => Bool(st(1).ends_with(st(0))),
        Node::StrLt(..) => Bool(st(0) < st(1)),
        Node::StrLe(..) => Bool(st(0) <= st(1)),
        Node::StrToInt(_) => Int(smt_str_to_int(st(0))),
        Node::StrFromInt(_) => Str(smt_str_from_int(int(0))),
        Node::InRe(_, re) => Bool(re.is_match(st(0))),
    }
}

#[derive(Debug, Default, Clone)]
pub struct Store {
    nodes: Vec<Node>,
    sorts: Vec<Sort>,
    index: HashMap<Node, Term>,
    vars: Vec<Term>,
}

/// Values of variables, by term.
pub type Assignment = HashMap<Term, Lit>;

impl Store {
    pub fn new() -> Store {
        Store::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn term_at(&self, i: usize) -> Term {
        assert!(i < self.nodes.len(), "term index out of range");
        Term(i as u32)
    }

    pub fn node(&self, t: Term) -> &Node {
        &self.nodes[t.index()]
    }

    pub fn sort(&self, t: Term) -> Sort {
        self.sorts[t.index()]
    }

    /// Every variable, in creation order.
    pub fn vars(&self) -> &[Term] {
        &self.vars
    }

    pub fn constant(&self, t: Term) -> Option<&Lit> {
        match self.node(t) {
            Node::Const(l) => Some(l),
            _ => None,
        }
    }

    pub fn const_bool(&self, t: Term) -> Option<bool> {
        self.constant(t).map(Lit::as_bool)
    }

    pub fn const_int(&self, t: Term) -> Option<&BigInt> {
        self.constant(t).map(Lit::as_int)
    }

    fn intern(&mut self, node: Node, sort: Sort) -> Term {
        if let Some(&t) = self.index.get(&node) {
            return t;
        }
        let t = Term(u32::try_from(self.nodes.len()).expect("term store overflow"));
        if matches!(node, Node::Var(..)) {
            self.vars.push(t);
        }
        self.nodes.push(node.clone());
        self.sorts.push(sort);
        self.index.insert(node, t);
        t
    }

    /// Interns `node`, folding it to a constant when every child is one.
    fn mk(&mut self, node: Node, sort: Sort) -> Term {
        let kids = node.children();
        if !kids.is_empty() {
            let lits: Option<Vec<Lit>> = kids.iter().map(|&k| self.constant(k).cloned()).collect();
            if let Some(lits) = lits {
                let v = apply(&node, &lits);
                return self.lit(v);
            }
        }
        self.intern(node, sort)
    }

    pub fn lit(&mut self, l: Lit) -> Term {
        let s = l.sort();
        self.intern(Node::Const(l), s)
    }

    pub fn bool(&mut self, b: bool) -> Term {
        self.lit(Lit::Bool(b))
    }

    pub fn tt(&mut self) -> Term {
        self.bool(true)
    }

    pub fn ff(&mut self) -> Term {
        self.bool(false)
    }

    pub fn int(&mut self, i: impl Into<BigInt>) -> Term {
        self.lit(Lit::Int(i.into()))
    }

    pub fn string(&mut self, s: impl Into<String>) -> Term {
        self.lit(Lit::Str(s.into()))
    }

    /// A fresh variable. Names must be unique within the store.
    pub fn var(&mut self, name: impl Into<String>, sort: Sort) -> Term {
        let name = name.into();
        let n = self.nodes.len();
        let t = self.intern(Node::Var(name.clone(), sort), sort);
        assert_eq!(t.index(), n, "duplicate variable name `{name}`");
        t
    }

    pub fn not(&mut self, a: Term) -> Term {
        if let Node::Not(inner) = self.node(a) {
            return *inner;
        }
        self.mk(Node::Not(a), Sort::Bool)
    }

    fn junction(&mut self, args: Vec<Term>, is_and: bool) -> Term {
        let mut kept = Vec::with_capacity(args.len());
        for a in args {
            let nested = match self.node(a) {
                Node::And(v) if is_and => Some(v.clone()),
                Node::Or(v) if !is_and => Some(v.clone()),
                _ => None,
            };
            for b in nested.unwrap_or_else(|| vec![a]) {
                match self.const_bool(b) {
                    Some(v) if v == is_and => {}
                    Some(_) => return self.bool(!is_and),
                    None => kept.push(b),
                }
            }
        }
        kept.sort();
        kept.dedup();
        match kept.len() {
            0 => self.bool(is_and),
            1 => kept[0],
            _ => {
                let node = if is_and { Node::And(kept) } else { Node::Or(kept) };
                self.intern(node, Sort::Bool)
            }
        }
    }

    pub fn and(&mut self, args: Vec<Term>) -> Term {
        self.junction(args, true)
    }

    pub fn or(&mut self, args: Vec<Term>) -> Term {
        self.junction(args, false)
    }

    pub fn and2(&mut self, a: Term, b: Term) -> Term {
        self.and(vec![a, b])
    }

    pub fn or2(&mut self, a: Term, b: Term) -> Term {
        self.or(vec![a, b])
    }

    pub fn implies(&mut self, a: Term, b: Term) -> Term {
        let na = self.not(a);
        self.or2(na, b)
    }

    pub fn ite(&mut self, c: Term, a: Term, b: Term) -> Term {
        if let Some(v) = self.const_bool(c) {
            return if v { a } else { b };
        }
        if a == b {
            return a;
        }
        if self.sort(a) == Sort::Bool {
            match (self.const_bool(a), self.const_bool(b)) {
                (Some(true), Some(false)) => return c,
                (Some(false), Some(true)) => return self.not(c),
                (Some(true), _) => return self.or2(c, b),
                (Some(false), _) => {
                    let nc = self.not(c);
                    return self.and2(nc, b);
                }
                (_, Some(true)) => return self.implies(c, a),
                (_, Some(false)) => return self.and2(c, a),
                _ => {}
            }
        }
        let s = self.sort(a);
        self.mk(Node::Ite(c, a, b), s)
    }

    pub fn eq(&mut self, a: Term, b: Term) -> Term {
        debug_assert_eq!(self.sort(a), self.sort(b), "equality across sorts");
        if a == b {
            return self.tt();
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.mk(Node::Eq(a, b), Sort::Bool)
    }

    pub fn lt(&mut self, a: Term, b: Term) -> Term {
        if a == b {
            return self.ff();
        }
        self.mk(Node::Lt(a, b), Sort::Bool)
    }

    pub fn le(&mut self, a: Term, b: Term) -> Term {
        if a == b {
            return self.tt();
        }
        self.mk(Node::Le(a, b), Sort::Bool)
    }

    pub fn gt(&mut self, a: Term, b: Term) -> Term {
        self.lt(b, a)
    }

    pub fn ge(&mut self, a: Term, b: Term) -> Term {
        self.le(b, a)
    }

    pub fn add(&mut self, args: Vec<Term>) -> Term {
        let mut total = BigInt::zero();
        let mut kept = Vec::new();
        for a in args {
            match self.const_int(a) {
                Some(c) => total += c,
                None => kept.push(a),
            }
        }
        if kept.is_empty() {
            return self.int(total);
        }
        if !total.is_zero() {
            let c = self.int(total);
            kept.push(c);
        }
        if kept.len() == 1 {
            return kept[0];
        }
        self.intern(Node::Add(kept), Sort::Int)
    }

    pub fn add2(&mut self, a: Term, b: Term) -> Term {
        self.add(vec![a, b])
    }

    pub fn neg(&mut self, a: Term) -> Term {
        if let Node::Neg(inner) = self.node(a) {
            return *inner;
        }
        self.mk(Node::Neg(a), Sort::Int)
    }

    pub fn sub(&mut self, a: Term, b: Term) -> Term {
        let nb = self.neg(b);
        self.add2(a, nb)
    }

    pub fn mul(&mut self, a: Term, b: Term) -> Term {
        for (x, y) in [(a, b), (b, a)] {
            if let Some(c) = self.const_int(x) {
                if c.is_zero() {
                    return self.int(0);
                }
                if c.is_one() {
                    return y;
                }
            }
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.mk(Node::Mul(a, b), Sort::Int)
    }

    pub fn div(&mut self, a: Term, b: Term) -> Term {
        if self.const_int(b).is_some_and(|c| c.is_one()) {
            return a;
        }
        self.mk(Node::Div(a, b), Sort::Int)
    }

    pub fn modulo(&mut self, a: Term, b: Term) -> Term {
        self.mk(Node::Mod(a, b), Sort::Int)
    }

    pub fn str_len(&mut self, a: Term) -> Term {
        self.mk(Node::StrLen(a), Sort::Int)
    }

    pub fn concat(&mut self, args: Vec<Term>) -> Term {
        let mut kept: Vec<Term> = Vec::new();
        for a in args {
            if let Some(Lit::Str(s)) = self.constant(a) {
                if s.is_empty() {
                    continue;
                }
                if let Some(&last) = kept.last() {
                    if let Some(Lit::Str(p)) = self.constant(last) {
                        let joined = format!("{p}{s}");
                        kept.pop();
                        let t = self.string(joined);
                        kept.push(t);
                        continue;
                    }
                }
            }
            kept.push(a);
        }
        match kept.len() {
            0 => self.string(""),
            1 => kept[0],
            _ => self.intern(Node::StrConcat(kept), Sort::Str),
        }
    }

    pub fn substr(&mut self, s: Term, i: Term, n: Term) -> Term {
        self.mk(Node::StrSubstr(s, i, n), Sort::Str)
    }

    pub fn prefix_of(&mut self, pre: Term, s: Term) -> Term {
        self.mk(Node::StrPrefixOf(pre, s), Sort::Bool)
    }

    pub fn suffix_of(&mut self, suf: Term, s: Term) -> Term {
        self.mk(Node::StrSuffixOf(suf, s), Sort::Bool)
    }

    pub fn str_lt(&mut self, a: Term, b: Term) -> Term {
        if a == b {
            return self.ff();
        }
        self.mk(Node::StrLt(a, b), Sort::Bool)
    }

    pub fn str_le(&mut self, a: Term, b: Term) -> Term {
        if a == b {
            return self.tt();
        }
        self.mk(Node::StrLe(a, b), Sort::Bool)
    }

    pub fn str_to_int(&mut self, a: Term) -> Term {
        self.mk(Node::StrToInt(a), Sort::Int)
    }

    pub fn str_from_int(&mut self, a: Term) -> Term {
        self.mk(Node::StrFromInt(a), Sort::Str)
    }

    pub fn in_re(&mut self, s: Term, re: Regex) -> Term {
        self.mk(Node::InRe(s, re), Sort::Bool)
    }

    /// Value of `t` when every variable takes its value from `asg`.
    /// Variables missing from `asg` take a default of their sort.
    pub fn eval(&self, t: Term, asg: &Assignment) -> Lit {
        let mut memo: HashMap<Term, Lit> = HashMap::new();
        self.eval_memo(t, asg, &mut memo)
    }

    pub fn eval_memo(&self, t: Term, asg: &Assignment, memo: &mut HashMap<Term, Lit>) -> Lit {
        // iterative post-order to stay clear of deep recursion
        let mut stack = vec![(t, false)];
        while let Some((u, expanded)) = stack.pop() {
            if memo.contains_key(&u) {
                continue;
            }
            let node = self.node(u);
            match node {
                Node::Const(l) => {
                    memo.insert(u, l.clone());
                }
                Node::Var(_, sort) => {
                    let v = asg.get(&u).cloned().unwrap_or_else(|| default_lit(*sort));
                    memo.insert(u, v);
                }
                _ if !expanded => {
                    stack.push((u, true));
                    for k in node.children() {
                        if !memo.contains_key(&k) {
                            stack.push((k, false));
                        }
                    }
                }
                _ => {
                    let args: Vec<Lit> = node.children().iter().map(|k| memo[k].clone()).collect();
                    memo.insert(u, apply(node, &args));
                }
            }
        }
        memo[&t].clone()
    }
}

pub fn default_lit(sort: Sort) -> Lit {
    match sort {
        Sort::Bool => Lit::Bool(false),
        Sort::Int => Lit::Int(BigInt::zero()),
        Sort::Str => Lit::Str(String::new()),
    }
}
