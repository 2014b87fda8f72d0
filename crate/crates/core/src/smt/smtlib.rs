//! SMT-LIB2 text for a term store: declarations, one definition per shared
//! node, assertions, and the reply parser for `get-value`.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::Signed;

use super::regex::Regex;
use super::term::{Lit, Node, Sort, Store, Term};

/// Escapes a string literal. Everything outside printable ASCII, and the
/// backslash, goes through `\u{..}`.
pub fn quote_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\"\""),
            ' '..='~' if c != '\\' => out.push(c),
            _ => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
        }
    }
    out.push('"');
    out
}

fn int_literal(i: &BigInt) -> String {
    if i.is_negative() {
        format!("(- {})", -i)
    } else {
        i.to_string()
    }
}

fn lit_text(l: &Lit) -> String {
    match l {
        Lit::Bool(b) => b.to_string(),
        Lit::Int(i) => int_literal(i),
        Lit::Str(s) => quote_string(s),
    }
}

fn regex_text(re: &Regex) -> String {
    match re {
        Regex::Lit(s) => format!("(str.to_re {})", quote_string(s)),
        Regex::AnyChar => "re.allchar".into(),
        Regex::Range(a, b) => format!(
            "(re.range {} {})",
            quote_string(&a.to_string()),
            quote_string(&b.to_string())
        ),
        Regex::Concat(parts) => match parts.len() {
            0 => "(str.to_re \"\")".into(),
            1 => regex_text(&parts[0]),
            _ => format!("(re.++ {})", parts.iter().map(regex_text).collect::<Vec<_>>().join(" ")),
        },
        Regex::Union(alts) => match alts.len() {
            0 => "re.none".into(),
            1 => regex_text(&alts[0]),
            _ => format!("(re.union {})", alts.iter().map(regex_text).collect::<Vec<_>>().join(" ")),
        },
        Regex::Star(r) => {
            if **r == Regex::AnyChar {
                "re.all".into()
            } else {
                format!("(re.* {})", regex_text(r))
            }
        }
    }
}

/// How a term is referred to in the emitted script: constants inline,
/// variables by name, everything else through its definition.
fn reference(store: &Store, t: Term) -> String {
    match store.node(t) {
        Node::Const(l) => lit_text(l),
        Node::Var(name, _) => name.clone(),
        _ => format!("t!{}", t.index()),
    }
}

fn app(op: &str, args: &[Term], name: &dyn Fn(Term) -> String) -> String {
    let mut s = format!("({op}");
    for &a in args {
        s.push(' ');
        s.push_str(&name(a));
    }
    s.push(')');
    s
}

fn node_text(node: &Node, name: &dyn Fn(Term) -> String) -> String {
    match node {
        Node::Const(l) => lit_text(l),
        Node::Var(n, _) => n.clone(),
        Node::Not(a) => app("not", &[*a], name),
        Node::And(v) => app("and", v, name),
        Node::Or(v) => app("or", v, name),
        Node::Ite(a, b, c) => app("ite", &[*a, *b, *c], name),
        Node::Eq(a, b) => app("=", &[*a, *b], name),
        Node::Lt(a, b) => app("<", &[*a, *b], name),
        Node::Le(a, b) => app("<=", &[*a, *b], name),
        Node::Add(v) => app("+", v, name),
        Node::Neg(a) => app("-", &[*a], name),
        Node::Mul(a, b) => app("*", &[*a, *b], name),
        Node::Div(a, b) => app("div", &[*a, *b], name),
        Node::Mod(a, b) => app("mod", &[*a, *b], name),
        Node::StrLen(a) => app("str.len", &[*a], name),
        Node::StrConcat(v) => app("str.++", v, name),
        Node::StrSubstr(a, b, c) => app("str.substr", &[*a, *b, *c], name),
        Node::StrPrefixOf(a, b) => app("str.prefixof", &[*a, *b], name),
        Node::StrSuffixOf(a, b) => app("str.suffixof", &[*a, *b], name),
        Node::StrLt(a, b) => app("str.<", &[*a, *b], name),
        Node::StrLe(a, b) => app("str.<=", &[*a, *b], name),
        Node::StrToInt(a) => app("str.to_int", &[*a], name),
        Node::StrFromInt(a) => app("str.from_int", &[*a], name),
        Node::InRe(a, re) => format!("(str.in_re {} {})", name(*a), regex_text(re)),
    }
}

/// A complete script: declarations for `vars`, definitions for every
/// composite node reachable from `assertions`, the assertions, `check-sat`
/// and a `get-value` over `vars`.
pub fn script(store: &Store, assertions: &[Term], vars: &[Term]) -> String {
    let mut reach = vec![false; store.len()];
    let mut stack: Vec<Term> = assertions.to_vec();
    while let Some(t) = stack.pop() {
        if std::mem::replace(&mut reach[t.index()], true) {
            continue;
        }
        stack.extend(store.node(t).children());
    }
    let mut out = String::new();
    out.push_str("(set-option :produce-models true)\n");
    let mut declared = vec![false; store.len()];
    for &v in vars.iter().chain(store.vars().iter().filter(|v| reach[v.index()])) {
        if let Node::Var(name, sort) = store.node(v) {
            if !std::mem::replace(&mut declared[v.index()], true) {
                let _ = writeln!(out, "(declare-fun {name} () {})", sort.smt_name());
            }
        }
    }
    let name = |t: Term| reference(store, t);
    // children always precede parents in the store, so index order is a
    // valid definition order
    for (i, &r) in reach.iter().enumerate() {
        if !r {
            continue;
        }
        let t = store.term_at(i);
        let node = store.node(t);
        if matches!(node, Node::Const(_) | Node::Var(..)) {
            continue;
        }
        let _ = writeln!(
            out,
            "(define-fun {} () {} {})",
            name(t),
            store.sort(t).smt_name(),
            node_text(node, &name)
        );
    }
    for &a in assertions {
        let _ = writeln!(out, "(assert {})", name(a));
    }
    out.push_str("(check-sat)\n");
    if !vars.is_empty() {
        let names: Vec<String> = vars.iter().map(|&v| name(v)).collect();
        let _ = writeln!(out, "(get-value ({}))", names.join(" "));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    Str(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed solver output: {0}")]
pub struct SexpError(pub String);

/// Parses every s-expression in `text`.
pub fn parse_sexps(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut out = Vec::new();
    loop {
        skip_ws(&chars, &mut pos);
        if pos >= chars.len() {
            return Ok(out);
        }
        out.push(parse_one(&chars, &mut pos)?);
    }
}

fn skip_ws(c: &[char], pos: &mut usize) {
    while *pos < c.len() {
        if c[*pos].is_whitespace() {
            *pos += 1;
        } else if c[*pos] == ';' {
            while *pos < c.len() && c[*pos] != '\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn parse_one(c: &[char], pos: &mut usize) -> Result<Sexp, SexpError> {
    skip_ws(c, pos);
    match c.get(*pos) {
        None => Err(SexpError("unexpected end of input".into())),
        Some('(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(c, pos);
                match c.get(*pos) {
                    None => return Err(SexpError("unclosed list".into())),
                    Some(')') => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(parse_one(c, pos)?),
                }
            }
        }
        Some(')') => Err(SexpError(format!("unexpected `)` at {}", *pos))),
        Some('"') => {
            *pos += 1;
            let mut raw = String::new();
            loop {
                match c.get(*pos) {
                    None => return Err(SexpError("unterminated string".into())),
                    Some('"') if c.get(*pos + 1) == Some(&'"') => {
                        raw.push('"');
                        *pos += 2;
                    }
                    Some('"') => {
                        *pos += 1;
                        return Ok(Sexp::Str(unescape(&raw)));
                    }
                    Some(&ch) => {
                        raw.push(ch);
                        *pos += 1;
                    }
                }
            }
        }
        Some('|') => {
            *pos += 1;
            let start = *pos;
            while *pos < c.len() && c[*pos] != '|' {
                *pos += 1;
            }
            let s: String = c[start..*pos].iter().collect();
            *pos += 1;
            Ok(Sexp::Atom(s))
        }
        Some(_) => {
            let start = *pos;
            while *pos < c.len() && !c[*pos].is_whitespace() && !matches!(c[*pos], '(' | ')' | '"' | ';') {
                *pos += 1;
            }
            Ok(Sexp::Atom(c[start..*pos].iter().collect()))
        }
    }
}

/// Resolves `\u{..}` and `\uXXXX` escapes; any other backslash is literal.
fn unescape(raw: &str) -> String {
    let c: Vec<char> = raw.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < c.len() {
        if c[i] == '\\' && c.get(i + 1) == Some(&'u') {
            if c.get(i + 2) == Some(&'{') {
                if let Some(close) = c[i + 3..].iter().position(|&x| x == '}') {
                    let hex: String = c[i + 3..i + 3 + close].iter().collect();
                    if let Some(ch) = u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                        out.push(ch);
                        i += 4 + close;
                        continue;
                    }
                }
            } else if i + 6 <= c.len() {
                let hex: String = c[i + 2..i + 6].iter().collect();
                if hex.chars().all(|x| x.is_ascii_hexdigit()) {
                    if let Some(ch) = u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                        out.push(ch);
                        i += 6;
                        continue;
                    }
                }
            }
        }
        out.push(c[i]);
        i += 1;
    }
    out
}

/// Reads a model value of the given sort.
pub fn sexp_value(s: &Sexp, sort: Sort) -> Result<Lit, SexpError> {
    let bad = || SexpError(format!("cannot read {s:?} as {}", sort.smt_name()));
    match (sort, s) {
        (Sort::Bool, Sexp::Atom(a)) if a == "true" => Ok(Lit::Bool(true)),
        (Sort::Bool, Sexp::Atom(a)) if a == "false" => Ok(Lit::Bool(false)),
        (Sort::Int, Sexp::Atom(a)) => a.parse().map(Lit::Int).map_err(|_| bad()),
        (Sort::Int, Sexp::List(items)) => match items.as_slice() {
            [Sexp::Atom(op), inner] if op == "-" => match sexp_value(inner, Sort::Int)? {
                Lit::Int(i) => Ok(Lit::Int(-i)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        },
        (Sort::Str, Sexp::Str(x)) => Ok(Lit::Str(x.clone())),
        _ => Err(bad()),
    }
}

/// Maps the reply to `(get-value (v1 v2 ..))` back to the variables.
pub fn parse_values(store: &Store, reply: &Sexp) -> Result<HashMap<Term, Lit>, SexpError> {
    let mut by_name: HashMap<&str, Term> = HashMap::new();
    for &v in store.vars() {
        if let Node::Var(n, _) = store.node(v) {
            by_name.insert(n.as_str(), v);
        }
    }
    let Sexp::List(pairs) = reply else {
        return Err(SexpError("value reply is not a list".into()));
    };
    let mut out = HashMap::new();
    for p in pairs {
        match p {
            Sexp::List(kv) if kv.len() == 2 => {
                let Sexp::Atom(name) = &kv[0] else {
                    return Err(SexpError(format!("unexpected key {:?}", kv[0])));
                };
                let &t = by_name
                    .get(name.as_str())
                    .ok_or_else(|| SexpError(format!("unknown variable `{name}`")))?;
                out.insert(t, sexp_value(&kv[1], store.sort(t))?);
            }
            other => return Err(SexpError(format!("unexpected entry {other:?}"))),
        }
    }
    Ok(out)
}
