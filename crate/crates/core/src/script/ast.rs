//! Syntax tree for the audio-editing language.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Lexical class of a [`Token`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Number,
    String,
    Punct,
    Comment,
    Newline,
}

/// A token with its position in the source.
///
/// `offset` is the byte offset of the first character, so
/// `&source[offset..offset + text.len()] == text` always holds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    pub col: usize,
    pub offset: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOpKind {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl BinOpKind {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOpKind::Add => "+",
            BinOpKind::Sub => "-",
            BinOpKind::Mul => "*",
            BinOpKind::Div => "/",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOpKind::Add | BinOpKind::Sub => 1,
            BinOpKind::Mul | BinOpKind::Div => 2,
        }
    }
}

/// An exact numeric literal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Number(pub BigRational);

impl Number {
    pub fn from_integer(value: i64) -> Number {
        Number(BigRational::from_integer(BigInt::from(value)))
    }

    /// Exact value of the shortest decimal that round-trips `value`.
    ///
    /// Returns `None` for NaN and infinities.
    pub fn from_f64(value: f64) -> Option<Number> {
        if !value.is_finite() {
            return None;
        }
        parse_decimal(&format!("{value}"))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// Decimal rendering. Every literal the lexer accepts has a terminating
    /// decimal expansion; other rationals fall back to a parenthesised
    /// division.
    pub fn to_decimal_string(&self) -> String {
        let value = &self.0;
        if value.is_integer() {
            return value.numer().to_string();
        }
        let mut denom = value.denom().clone();
        let two = BigInt::from(2);
        let five = BigInt::from(5);
        let (mut twos, mut fives) = (0u32, 0u32);
        while (&denom % &two).is_zero() {
            denom /= &two;
            twos += 1;
        }
        while (&denom % &five).is_zero() {
            denom /= &five;
            fives += 1;
        }
        if !denom.is_one() {
            return format!("({} / {})", value.numer(), value.denom());
        }
        let digits = twos.max(fives);
        let scale = num_traits::pow(BigInt::from(10), digits as usize);
        let scaled = (value * BigRational::from_integer(scale)).to_integer();
        let negative = scaled.is_negative();
        let mut text = scaled.abs().to_string();
        let width = digits as usize + 1;
        if text.len() < width {
            text = format!("{}{}", "0".repeat(width - text.len()), text);
        }
        let split = text.len() - digits as usize;
        let sign = if negative { "-" } else { "" };
        format!("{sign}{}.{}", &text[..split], &text[split..])
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl Serialize for Number {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_decimal_string())
    }
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_decimal(&text).ok_or_else(|| serde::de::Error::custom(format!("bad number {text:?}")))
    }
}

/// Largest decimal exponent accepted in a literal.
pub(crate) const MAX_EXPONENT: i64 = 400;

/// Parses `[-]digits[.digits][e[+-]digits]` into an exact rational.
pub(crate) fn parse_decimal(text: &str) -> Option<Number> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(idx) => (&body[..idx], body[idx + 1..].parse::<i64>().ok()?),
        None => (body, 0),
    };
    if exponent.abs() > MAX_EXPONENT {
        return None;
    }
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(idx) => (&mantissa[..idx], &mantissa[idx + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    if negative {
        numer = -numer;
    }
    let shift = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let value = if shift >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, shift as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-shift) as usize))
    };
    Some(Number(value))
}

/// Expression node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    Var { name: String },
    Num { value: Number },
    Str { value: String },
    List { items: Vec<Expr> },
    Tuple { items: Vec<Expr> },
    Call { op: String, positional: Vec<Expr>, keyword: Vec<(String, Expr)> },
    BinOp { op: BinOpKind, lhs: Box<Expr>, rhs: Box<Expr> },
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var { name: name.into() }
    }

    pub fn num(value: f64) -> Expr {
        Expr::Num { value: Number::from_f64(value).expect("finite literal") }
    }

    pub fn int(value: i64) -> Expr {
        Expr::Num { value: Number::from_integer(value) }
    }

    pub fn string(value: impl Into<String>) -> Expr {
        Expr::Str { value: value.into() }
    }

    pub fn call(op: impl Into<String>, positional: Vec<Expr>, keyword: Vec<(&str, Expr)>) -> Expr {
        Expr::Call {
            op: op.into(),
            positional,
            keyword: keyword.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    /// Visits this expression and every sub-expression, parents first.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::List { items } | Expr::Tuple { items } => {
                items.iter().for_each(|item| item.walk(visit));
            }
            Expr::Call { positional, keyword, .. } => {
                positional.iter().for_each(|arg| arg.walk(visit));
                keyword.iter().for_each(|(_, arg)| arg.walk(visit));
            }
            Expr::BinOp { lhs, rhs, .. } => {
                lhs.walk(visit);
                rhs.walk(visit);
            }
            Expr::Var { .. } | Expr::Num { .. } | Expr::Str { .. } => {}
        }
    }
}

/// Assignment target. `_` discards its position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Name(String),
    Wildcard,
}

impl Target {
    pub fn name(&self) -> Option<&str> {
        match self {
            Target::Name(name) => Some(name),
            Target::Wildcard => None,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Name(name) => f.write_str(name),
            Target::Wildcard => f.write_str("_"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stmt {
    pub targets: Vec<Target>,
    pub value: Expr,
    /// Text of the `#` lines directly above the statement, one entry per
    /// line joined with `\n`.
    pub comment: Option<String>,
    pub line: usize,
}

impl Stmt {
    pub fn new(targets: Vec<Target>, value: Expr) -> Stmt {
        Stmt { targets, value, comment: None, line: 0 }
    }

    pub fn with_comment(mut self, comment: impl Into<String>) -> Stmt {
        self.comment = Some(comment.into());
        self
    }

    /// The operation name of a top-level call, if the value is one.
    pub fn op(&self) -> Option<&str> {
        match &self.value {
            Expr::Call { op, .. } => Some(op),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub statements: Vec<Stmt>,
    pub source: String,
}

impl Program {
    /// Builds a program from statements, numbering lines and rendering the
    /// canonical source text.
    pub fn from_statements(statements: Vec<Stmt>) -> Program {
        let mut program = Program { statements, source: String::new() };
        program.source = super::format(&program);
        let mut line = 1;
        for stmt in &mut program.statements {
            line += stmt.comment.as_ref().map_or(0, |c| c.lines().count());
            stmt.line = line;
            line += 1;
        }
        program
    }

    /// Equality ignoring line numbers and the original source text.
    pub fn same_structure(&self, other: &Program) -> bool {
        self.statements.len() == other.statements.len()
            && self
                .statements
                .iter()
                .zip(&other.statements)
                .all(|(a, b)| a.targets == b.targets && a.value == b.value && a.comment == b.comment)
    }

    /// Names read by the program before any assignment binds them.
    pub fn free_variables(&self) -> std::collections::BTreeSet<String> {
        let mut bound = std::collections::HashSet::new();
        let mut free = std::collections::BTreeSet::new();
        for stmt in &self.statements {
            stmt.value.walk(&mut |expr| {
                if let Expr::Var { name } = expr {
                    if !bound.contains(name.as_str()) {
                        free.insert(name.clone());
                    }
                }
            });
            for target in &stmt.targets {
                if let Target::Name(name) = target {
                    bound.insert(name.as_str());
                }
            }
        }
        free
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        let n = parse_decimal("0.1").unwrap();
        assert_eq!(n.0, BigRational::new(BigInt::from(1), BigInt::from(10)));
        assert_eq!(parse_decimal("300.0").unwrap(), Number::from_integer(300));
        assert_eq!(parse_decimal("1.5e2").unwrap(), Number::from_integer(150));
        assert_eq!(parse_decimal("-2.5").unwrap().to_f64(), -2.5);
        assert!(parse_decimal("1e9999").is_none());
        assert!(parse_decimal(".").is_none());
    }

    #[test]
    fn decimal_rendering() {
        for text in ["0.5", "-0.125", "12.75", "0.001", "42", "-3"] {
            assert_eq!(parse_decimal(text).unwrap().to_decimal_string(), text);
        }
        assert_eq!(Number::from_f64(1.0).unwrap().to_decimal_string(), "1");
        let third = Number(BigRational::new(BigInt::from(1), BigInt::from(3)));
        assert_eq!(third.to_decimal_string(), "(1 / 3)");
    }

    #[test]
    fn free_variables_skip_bound_names() {
        let program = Program::from_statements(vec![
            Stmt::new(vec![Target::Name("A".into())], Expr::var("INPUT_WAV0")),
            Stmt::new(vec![Target::Name("B".into())], Expr::var("A")),
            Stmt::new(vec![Target::Name("C".into())], Expr::var("X")),
        ]);
        let free: Vec<_> = program.free_variables().into_iter().collect();
        assert_eq!(free, vec!["INPUT_WAV0".to_string(), "X".to_string()]);
    }
}
