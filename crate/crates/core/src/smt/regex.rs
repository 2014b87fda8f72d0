//! The small regular-expression language used by pattern predicates and
//! cell domains, with a concrete matcher.

use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Regex {
    Lit(String),
    AnyChar,
    /// Inclusive character range.
    Range(char, char),
    Concat(Vec<Regex>),
    Union(Vec<Regex>),
    Star(Box<Regex>),
}

impl Regex {
    pub fn all() -> Regex {
        Regex::Star(Box::new(Regex::AnyChar))
    }

    /// Compiles a LIKE pattern: `%` is any sequence, `_` any character.
    pub fn from_like(pattern: &str) -> Regex {
        let mut parts = Vec::new();
        let mut lit = String::new();
        for c in pattern.chars() {
            match c {
                '%' | '_' => {
                    if !lit.is_empty() {
                        parts.push(Regex::Lit(std::mem::take(&mut lit)));
                    }
                    parts.push(if c == '%' { Regex::all() } else { Regex::AnyChar });
                }
                _ => lit.push(c),
            }
        }
        if !lit.is_empty() {
            parts.push(Regex::Lit(lit));
        }
        match parts.len() {
            0 => Regex::Lit(String::new()),
            1 => parts.pop().unwrap(),
            _ => Regex::Concat(parts),
        }
    }

    pub fn is_match(&self, s: &str) -> bool {
        let chars: Vec<char> = s.chars().collect();
        let start = BTreeSet::from([0]);
        self.step(&chars, &start).contains(&chars.len())
    }

    /// End positions reachable by matching `self` from any of `from`.
    fn step(&self, s: &[char], from: &BTreeSet<usize>) -> BTreeSet<usize> {
        match self {
            Regex::Lit(l) => {
                let l: Vec<char> = l.chars().collect();
                from.iter()
                    .filter(|&&i| s.len() >= i + l.len() && s[i..i + l.len()] == l[..])
                    .map(|&i| i + l.len())
                    .collect()
            }
            Regex::AnyChar => from.iter().filter(|&&i| i < s.len()).map(|&i| i + 1).collect(),
            Regex::Range(lo, hi) => from
                .iter()
                .filter(|&&i| i < s.len() && (*lo..=*hi).contains(&s[i]))
                .map(|&i| i + 1)
                .collect(),
            Regex::Concat(parts) => parts.iter().fold(from.clone(), |acc, p| p.step(s, &acc)),
            Regex::Union(alts) => alts.iter().flat_map(|a| a.step(s, from)).collect(),
            Regex::Star(r) => {
                let mut seen = from.clone();
                let mut frontier = from.clone();
                while !frontier.is_empty() {
                    let next: BTreeSet<usize> = r.step(s, &frontier).difference(&seen).copied().collect();
                    seen.extend(next.iter().copied());
                    frontier = next;
                }
                seen
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::like_matches;

    #[test]
    fn like_translation_agrees_with_reference() {
        let pats = ["", "%", "_", "a%", "%a", "a_c", "%b%", "a%%b", "_%_", "ab"];
        let subjects = ["", "a", "ab", "abc", "ba", "aab", "b", "acb"];
        for p in pats {
            let re = Regex::from_like(p);
            for s in subjects {
                assert_eq!(re.is_match(s), like_matches(p, s), "{p} on {s}");
            }
        }
    }

    #[test]
    fn ranges_and_unions() {
        let r = Regex::Star(Box::new(Regex::Union(vec![Regex::Range('a', 'c'), Regex::Lit("xy".into())])));
        assert!(r.is_match(""));
        assert!(r.is_match("abxyc"));
        assert!(!r.is_match("abx"));
    }
}
