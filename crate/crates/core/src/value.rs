//! Concrete values and the scalar operations over them: casts, date
//! arithmetic, substring, pattern matching and comparisons.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

pub const MIN_YEAR: i64 = 0;
pub const MAX_YEAR: i64 = 9999;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported during evaluation: {0}")]
    Unsupported(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
}

pub fn is_leap_year(y: i64) -> bool {
    y % 4 == 0 && (y % 100 != 0 || y % 400 == 0)
}

pub fn days_in_month(y: i64, m: i64) -> i64 {
    match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => 28 + is_leap_year(y) as i64,
        _ => 0,
    }
}

pub fn is_valid_date(y: i64, m: i64, d: i64) -> bool {
    (MIN_YEAR..=MAX_YEAR).contains(&y) && (1..=12).contains(&m) && d >= 1 && d <= days_in_month(y, m)
}

/// A calendar date inside the supported range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Date {
    year: i16,
    month: u8,
    day: u8,
}

impl Date {
    pub fn new(y: i64, m: i64, d: i64) -> Option<Date> {
        is_valid_date(y, m, d).then(|| Date {
            year: y as i16,
            month: m as u8,
            day: d as u8,
        })
    }

    pub fn year(self) -> i64 {
        self.year as i64
    }

    pub fn month(self) -> i64 {
        self.month as i64
    }

    pub fn day(self) -> i64 {
        self.day as i64
    }

    /// The following calendar day, if still inside the range.
    pub fn succ(self) -> Option<Date> {
        let (y, m, d) = (self.year(), self.month(), self.day());
        if d < days_in_month(y, m) {
            Date::new(y, m, d + 1)
        } else if m < 12 {
            Date::new(y, m + 1, 1)
        } else {
            Date::new(y + 1, 1, 1)
        }
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Null,
    Int(i64),
    /// Exact rational; only produced by decimal literals, AVG and JULIANDAY.
    Real(BigRational),
    Str(String),
    Date(Date),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn date(y: i64, m: i64, d: i64) -> Value {
        Value::Date(Date::new(y, m, d).expect("valid date literal"))
    }

    pub fn real(num: i64, den: i64) -> Value {
        Value::Real(BigRational::new(num.into(), den.into()))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Int(_) => "int",
            Value::Real(_) => "real",
            Value::Str(_) => "str",
            Value::Date(_) => "date",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => f.write_str(&rational_to_decimal(r)),
            Value::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Value::Date(d) => write!(f, "'{d}'"),
        }
    }
}

/// Decimal rendering of a rational. Terminating expansions are exact;
/// others are cut at 15 fractional digits.
pub fn rational_to_decimal(r: &BigRational) -> String {
    if r.is_integer() {
        return format!("{}.0", r.to_integer());
    }
    let neg = r.is_negative();
    let a = r.abs();
    let int_part = a.to_integer();
    let mut frac = a - BigRational::from_integer(int_part.clone());
    let mut digits = String::new();
    let ten = BigInt::from(10);
    while !frac.is_zero() && digits.len() < 15 {
        frac *= BigRational::from_integer(ten.clone());
        let dgt = frac.to_integer();
        digits.push_str(&dgt.to_string());
        frac -= BigRational::from_integer(dgt);
    }
    format!("{}{}.{}", if neg { "-" } else { "" }, int_part, digits)
}

/// Floor division for a positive divisor.
pub fn fdiv(x: i64, y: i64) -> i64 {
    Integer::div_floor(&x, &y)
}

pub fn date_to_int(d: Date) -> i64 {
    d.year() * 10_000 + d.month() * 100 + d.day()
}

pub fn int_to_date(v: i64) -> Option<Date> {
    let y = fdiv(v, 10_000);
    let m = fdiv(v.mod_floor(&10_000), 100);
    let d = v.mod_floor(&100);
    Date::new(y, m, d)
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// Digits give their value, `-` followed by digits gives the negation,
/// anything else is 0.
pub fn str_to_int(s: &str) -> Result<i64, EvalError> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) if all_digits(rest) => (true, rest),
        _ if all_digits(s) => (false, s),
        _ => return Ok(0),
    };
    let trimmed = body.trim_start_matches('0');
    let mag: i64 = if trimmed.is_empty() {
        0
    } else {
        trimmed.parse().map_err(|_| EvalError::Overflow("string to integer"))?
    };
    Ok(if neg { -mag } else { mag })
}

pub fn date_to_str(d: Date) -> String {
    d.to_string()
}

fn parse_iso(s: &str) -> Option<(i64, i64, i64)> {
    let b = s.as_bytes();
    if b.len() != 10 || !s.is_ascii() || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    let num = |r: std::ops::Range<usize>| -> Option<i64> {
        let part = &s[r];
        all_digits(part).then(|| part.parse().ok()).flatten()
    };
    Some((num(0..4)?, num(5..7)?, num(8..10)?))
}

/// A valid date written as `YYYY-MM-DD`.
pub fn parse_iso_date(s: &str) -> Option<Date> {
    parse_iso(s).and_then(|(y, m, d)| Date::new(y, m, d))
}

/// ISO `YYYY-MM-DD` strings parse component-wise; every other string goes
/// through the integer path.
pub fn str_to_date(s: &str) -> Result<Option<Date>, EvalError> {
    if let Some((y, m, d)) = parse_iso(s) {
        return Ok(Date::new(y, m, d));
    }
    Ok(int_to_date(str_to_int(s)?))
}

fn real_to_int(r: &BigRational) -> Result<i64, EvalError> {
    r.to_integer().to_i64().ok_or(EvalError::Overflow("real to integer"))
}

pub fn cast_to_int(v: &Value) -> Result<Value, EvalError> {
    Ok(match v {
        Value::Null => Value::Null,
        Value::Int(i) => Value::Int(*i),
        Value::Real(r) => Value::Int(real_to_int(r)?),
        Value::Str(s) => Value::Int(str_to_int(s)?),
        Value::Date(d) => Value::Int(date_to_int(*d)),
    })
}

pub fn cast_to_real(v: &Value) -> Result<Value, EvalError> {
    Ok(match v {
        Value::Null => Value::Null,
        Value::Real(r) => Value::Real(r.clone()),
        other => match cast_to_int(other)? {
            Value::Int(i) => Value::Real(BigRational::from_integer(i.into())),
            _ => unreachable!("cast_to_int yields Int or Null"),
        },
    })
}

pub fn cast_to_str(v: &Value) -> Result<Value, EvalError> {
    Ok(match v {
        Value::Null => Value::Null,
        Value::Str(s) => Value::Str(s.clone()),
        Value::Int(i) => Value::Str(i.to_string()),
        Value::Date(d) => Value::Str(date_to_str(*d)),
        Value::Real(_) => return Err(EvalError::Unsupported("real to string".into())),
    })
}

pub fn cast_to_date(v: &Value) -> Result<Value, EvalError> {
    Ok(match v {
        Value::Null => Value::Null,
        Value::Date(d) => Value::Date(*d),
        Value::Int(i) => int_to_date(*i).map_or(Value::Null, Value::Date),
        Value::Str(s) => str_to_date(s)?.map_or(Value::Null, Value::Date),
        Value::Real(_) => return Err(EvalError::Unsupported("real to date".into())),
    })
}

/// Length `substr` assumes when called with two arguments.
pub const SUBSTR_NO_LENGTH: i64 = 1_000_000_000;

/// SQLite `substr`. A non-positive length yields the empty string; string
/// typed start or length yields NULL.
pub fn substr(s: &Value, start: &Value, len: Option<&Value>) -> Result<Value, EvalError> {
    if matches!(start, Value::Str(_)) || matches!(len, Some(Value::Str(_))) {
        return Ok(Value::Null);
    }
    let text = match cast_to_str(s)? {
        Value::Str(t) => t,
        _ => return Ok(Value::Null),
    };
    let p1 = match cast_to_int(start)? {
        Value::Int(i) => i,
        _ => return Ok(Value::Null),
    };
    let chars: Vec<char> = text.chars().collect();
    let l = chars.len() as i64;
    let p2 = match len {
        None => SUBSTR_NO_LENGTH,
        Some(v) => match cast_to_int(v)? {
            Value::Int(i) => i,
            _ => return Ok(Value::Null),
        },
    };
    let (from, count) = substr_bounds(l, p1, p2);
    Ok(Value::Str(
        chars[from as usize..(from + count) as usize].iter().collect(),
    ))
}

/// Start offset and character count selected by `substr` on a string of
/// length `l`.
pub fn substr_bounds(l: i64, start: i64, len: i64) -> (i64, i64) {
    if len <= 0 {
        return (0, 0);
    }
    let (mut p1, mut p2) = (start, len);
    if p1 < 0 {
        p1 += l;
        if p1 < 0 {
            p2 += p1;
            if p2 < 0 {
                p2 = 0;
            }
            p1 = 0;
        }
    } else if p1 > 0 {
        p1 -= 1;
    } else {
        p2 -= 1;
    }
    if p1 + p2 > l {
        p2 = (l - p1).max(0);
    }
    if p1 > l {
        return (0, 0);
    }
    (p1, p2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatePart {
    Year,
    Month,
    Day,
}

impl DatePart {
    /// The SQL format string.
    pub fn format(self) -> &'static str {
        match self {
            DatePart::Year => "%Y",
            DatePart::Month => "%m",
            DatePart::Day => "%d",
        }
    }
}

pub fn strftime(part: DatePart, v: &Value) -> Result<Value, EvalError> {
    Ok(match cast_to_date(v)? {
        Value::Date(d) => Value::Int(match part {
            DatePart::Year => d.year(),
            DatePart::Month => d.month(),
            DatePart::Day => d.day(),
        }),
        _ => Value::Null,
    })
}

/// Twice the Julian day number; always an odd integer.
pub fn julian_day_twice(d: Date) -> i64 {
    let (mut y, mut m) = (d.year(), d.month());
    if m <= 2 {
        y -= 1;
        m += 12;
    }
    let c = 2 - fdiv(y, 100) + fdiv(y, 400);
    let a1 = fdiv(36525 * (y + 4716), 100);
    let a2 = fdiv(306001 * (m + 1), 10_000);
    2 * (a1 + a2 + d.day() + c) - 3049
}

pub fn julian_day(v: &Value) -> Result<BigRational, EvalError> {
    match v {
        Value::Date(d) => Ok(BigRational::new(julian_day_twice(*d).into(), 2.into())),
        other => Err(EvalError::Domain(format!(
            "julian day of non-date {}",
            other.kind_name()
        ))),
    }
}

/// SQL LIKE: `%` matches any sequence, `_` any single character, everything
/// else literally (case-sensitive).
pub fn like_matches(pattern: &str, subject: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let s: Vec<char> = subject.chars().collect();
    // reach[j]: pattern prefix consumed so far can end at subject position j
    let mut reach = vec![false; s.len() + 1];
    reach[0] = true;
    for &pc in &p {
        let mut next = vec![false; s.len() + 1];
        match pc {
            '%' => {
                let mut any = false;
                for j in 0..=s.len() {
                    any |= reach[j];
                    next[j] = any;
                }
            }
            _ => {
                for j in 0..s.len() {
                    if reach[j] && (pc == '_' || pc == s[j]) {
                        next[j + 1] = true;
                    }
                }
            }
        }
        reach = next;
    }
    reach[s.len()]
}

pub fn like_match(pattern: &str, v: &Value) -> Result<Option<bool>, EvalError> {
    Ok(match cast_to_str(v)? {
        Value::Str(s) => Some(like_matches(pattern, &s)),
        _ => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

fn as_rational(v: &Value) -> Option<BigRational> {
    match v {
        Value::Int(i) => Some(BigRational::from_integer((*i).into())),
        Value::Real(r) => Some(r.clone()),
        _ => None,
    }
}

/// `v1 op v2` for operands of matching kinds. NULL on either side gives
/// `None` (unknown).
pub fn compare(op: CmpOp, a: &Value, b: &Value) -> Result<Option<bool>, EvalError> {
    let ord = match (a, b) {
        (Value::Null, _) | (_, Value::Null) => return Ok(None),
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::Date(x), Value::Date(y)) => x.cmp(y),
        (x, y) => match (as_rational(x), as_rational(y)) {
            (Some(p), Some(q)) => p.cmp(&q),
            _ => {
                return Err(EvalError::TypeMismatch(format!(
                    "cannot compare {} with {}",
                    x.kind_name(),
                    y.kind_name()
                )))
            }
        },
    };
    Ok(Some(op.holds(ord)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Mod => "%",
        }
    }
}

/// Arithmetic with integer coercion of non-numeric operands. Integer `/` and
/// `%` truncate toward zero as in SQLite; a zero divisor yields NULL.
pub fn arith(op: ArithOp, a: &Value, b: &Value) -> Result<Value, EvalError> {
    if a.is_null() || b.is_null() {
        return Ok(Value::Null);
    }
    if matches!(a, Value::Real(_)) || matches!(b, Value::Real(_)) {
        let x = match cast_to_real(a)? {
            Value::Real(r) => r,
            _ => return Ok(Value::Null),
        };
        let y = match cast_to_real(b)? {
            Value::Real(r) => r,
            _ => return Ok(Value::Null),
        };
        return Ok(match op {
            ArithOp::Add => Value::Real(x + y),
            ArithOp::Sub => Value::Real(x - y),
            ArithOp::Mul => Value::Real(x * y),
            ArithOp::Div if y.is_zero() => Value::Null,
            ArithOp::Div => Value::Real(x / y),
            ArithOp::Mod => return Err(EvalError::Unsupported("modulo on real operands".into())),
        });
    }
    let (x, y) = match (cast_to_int(a)?, cast_to_int(b)?) {
        (Value::Int(x), Value::Int(y)) => (x, y),
        _ => return Ok(Value::Null),
    };
    let r = match op {
        ArithOp::Add => x.checked_add(y),
        ArithOp::Sub => x.checked_sub(y),
        ArithOp::Mul => x.checked_mul(y),
        ArithOp::Div | ArithOp::Mod if y == 0 => return Ok(Value::Null),
        ArithOp::Div => x.checked_div(y),
        ArithOp::Mod => x.checked_rem(y),
    };
    r.map(Value::Int).ok_or(EvalError::Overflow("arithmetic"))
}

/// Truthiness of a value used as a predicate: integer coercion, nonzero is
/// true, NULL is unknown.
pub fn truth_value(v: &Value) -> Result<Option<bool>, EvalError> {
    Ok(match v {
        Value::Real(r) => Some(!r.is_zero()),
        other => match cast_to_int(other)? {
            Value::Int(i) => Some(i != 0),
            _ => None,
        },
    })
}

/// How a value compares when result rows are matched against each other:
/// numbers by numeric value, dates by their ISO text (SQLite stores dates as
/// text), NULL equal to NULL.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CanonValue {
    Null,
    Num(BigRational),
    Text(String),
}

impl Value {
    pub fn canon(&self) -> CanonValue {
        match self {
            Value::Null => CanonValue::Null,
            Value::Int(i) => CanonValue::Num(BigRational::from_integer((*i).into())),
            Value::Real(r) => CanonValue::Num(r.clone()),
            Value::Str(s) => CanonValue::Text(s.clone()),
            Value::Date(d) => CanonValue::Text(date_to_str(*d)),
        }
    }
}

/// Ordering used by ORDER BY: NULL first, then numbers, then text.
pub fn sort_cmp(a: &Value, b: &Value) -> Ordering {
    a.canon().cmp(&b.canon())
}
