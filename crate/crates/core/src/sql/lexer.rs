use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Bare word; keywords are recognised by the parser.
    Word(String),
    /// Identifier in double quotes or backticks.
    Quoted(String),
    Number(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Semi,
    Star,
    Plus,
    Minus,
    Slash,
    Percent,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Concat,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            match src[i + 2..].find("*/") {
                Some(end) => i += end + 4,
                None => return Err(ParseError::syntax(start, "unterminated comment")),
            }
            continue;
        }
        let tok = match c {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b';' => Tok::Semi,
            b'*' => Tok::Star,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'/' => Tok::Slash,
            b'%' => Tok::Percent,
            b'=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                }
                Tok::Eq
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 1;
                Tok::Ne
            }
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 1;
                    Tok::Le
                }
                Some(b'>') => {
                    i += 1;
                    Tok::Ne
                }
                _ => Tok::Lt,
            },
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            b'|' if bytes.get(i + 1) == Some(&b'|') => {
                i += 1;
                Tok::Concat
            }
            b'\'' => {
                let (s, next) = quoted(src, i, '\'')?;
                i = next;
                out.push(Token { tok: Tok::Str(s), pos: start });
                continue;
            }
            b'"' | b'`' => {
                let (s, next) = quoted(src, i, c as char)?;
                i = next;
                out.push(Token { tok: Tok::Quoted(s), pos: start });
                continue;
            }
            b'[' => {
                return Err(ParseError::Unsupported {
                    feature: "bracket-quoted identifier".into(),
                    pos: start,
                })
            }
            b'.' if !bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()) => Tok::Dot,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    return Err(ParseError::Unsupported {
                        feature: "exponent notation".into(),
                        pos: start,
                    });
                }
                let text = &src[start..i];
                if text.matches('.').count() > 1 {
                    return Err(ParseError::syntax(start, "malformed number"));
                }
                out.push(Token { tok: Tok::Number(text.to_string()), pos: start });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Word(src[start..i].to_string()), pos: start });
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::syntax(start, format!("unexpected character `{ch}`")));
            }
        };
        i += 1;
        out.push(Token { tok, pos: start });
    }
    out.push(Token { tok: Tok::Eof, pos: src.len() });
    Ok(out)
}

/// Reads a quoted run starting at `start` (which holds the quote); a doubled
/// quote stands for itself.
fn quoted(src: &str, start: usize, q: char) -> Result<(String, usize), ParseError> {
    let mut out = String::new();
    let mut it = src[start + 1..].char_indices().peekable();
    while let Some((off, ch)) = it.next() {
        if ch == q {
            if it.peek().map(|&(_, c)| c) == Some(q) {
                it.next();
                out.push(q);
                continue;
            }
            return Ok((out, start + 1 + off + ch.len_utf8()));
        }
        out.push(ch);
    }
    Err(ParseError::syntax(start, "unterminated quoted text"))
}
