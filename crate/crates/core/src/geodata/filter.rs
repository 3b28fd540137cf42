//! Attribute predicates for the feature catalog.
//!
//! A small SQL-flavoured language over a feature's string attributes:
//!
//! ```text
//! expr    := and ("OR" and)*
//! and     := unary ("AND" unary)*
//! unary   := "NOT" unary | "(" expr ")" | "all" | test
//! test    := ident "IS" ["NOT"] value
//!          | ident ["NOT"] "IN" "(" value ("," value)* ")"
//!          | ident                      -- truthiness
//! value   := 'quoted' | number | null | bare-word
//! ```
//!
//! `_geom_type` is bound to the geometry kind (`Point`, `LineString`,
//! `Polygon`). Missing attributes compare unequal to every value and are
//! falsy.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("filter syntax error at byte {offset}: {message}")]
pub struct FilterError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Text(String),
    Number(f64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Text(s) => write!(f, "'{s}'"),
            Value::Number(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    All,
    Truthy(String),
    Is { attr: String, negated: bool, value: Value },
    In { attr: String, negated: bool, values: Vec<Value> },
    Not(Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

/// What a predicate is evaluated against.
pub trait AttributeSource {
    fn attribute(&self, name: &str) -> Option<&str>;
}

impl AttributeSource for BTreeMap<String, String> {
    fn attribute(&self, name: &str) -> Option<&str> {
        self.get(name).map(String::as_str)
    }
}

fn is_null_text(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("null")
}

fn matches_value(attr: Option<&str>, value: &Value) -> bool {
    match (attr, value) {
        (None, Value::Null) => true,
        (Some(a), Value::Null) => is_null_text(a),
        (None, _) => false,
        (Some(a), Value::Text(t)) => a == t,
        (Some(a), Value::Number(n)) => a.trim().parse::<f64>().map(|v| v == *n).unwrap_or(false),
    }
}

impl Predicate {
    pub fn parse(src: &str) -> Result<Predicate, FilterError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, len: src.len() };
        let expr = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(expr)
    }

    pub fn eval(&self, src: &impl AttributeSource) -> bool {
        match self {
            Predicate::All => true,
            Predicate::Truthy(attr) => match src.attribute(attr) {
                None => false,
                Some(v) => {
                    !(is_null_text(v) || v == "0" || v.eq_ignore_ascii_case("false"))
                }
            },
            Predicate::Is { attr, negated, value } => {
                matches_value(src.attribute(attr), value) != *negated
            }
            Predicate::In { attr, negated, values } => {
                let a = src.attribute(attr);
                values.iter().any(|v| matches_value(a, v)) != *negated
            }
            Predicate::Not(p) => !p.eval(src),
            Predicate::And(a, b) => a.eval(src) && b.eval(src),
            Predicate::Or(a, b) => a.eval(src) || b.eval(src),
        }
    }

    /// Attribute names the predicate reads.
    pub fn attributes(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Predicate::All => {}
            Predicate::Truthy(a) | Predicate::Is { attr: a, .. } | Predicate::In { attr: a, .. } => {
                out.push(a)
            }
            Predicate::Not(p) => p.collect(out),
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::All => f.write_str("all"),
            Predicate::Truthy(a) => f.write_str(a),
            Predicate::Is { attr, negated, value } => {
                write!(f, "{attr} IS {}{value}", if *negated { "NOT " } else { "" })
            }
            Predicate::In { attr, negated, values } => {
                write!(f, "{attr} {}IN (", if *negated { "NOT " } else { "" })?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
            Predicate::Not(p) => write!(f, "NOT ({p})"),
            Predicate::And(a, b) => write!(f, "({a}) AND ({b})"),
            Predicate::Or(a, b) => write!(f, "({a}) OR ({b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Comma,
    Word(String),
    Str(String),
    Num(f64),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, FilterError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            b',' => {
                out.push((i, Tok::Comma));
                i += 1;
            }
            b'\'' => {
                let start = i;
                i += 1;
                let body = i;
                while i < bytes.len() && bytes[i] != b'\'' {
                    i += 1;
                }
                if i >= bytes.len() {
                    return Err(FilterError { offset: start, message: "unterminated string".into() });
                }
                out.push((start, Tok::Str(src[body..i].to_string())));
                i += 1;
            }
            b'0'..=b'9' | b'-' | b'.' => {
                let start = i;
                i += 1;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                let text = &src[start..i];
                let n = text.parse::<f64>().map_err(|_| FilterError {
                    offset: start,
                    message: format!("bad number {text:?}"),
                })?;
                out.push((start, Tok::Num(n)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Word(src[start..i].to_string())));
            }
            _ => {
                return Err(FilterError {
                    offset: i,
                    message: format!("unexpected character {:?}", src[i..].chars().next().unwrap_or('?')),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn error(&self, message: &str) -> FilterError {
        let offset = self.tokens.get(self.pos).map(|t| t.0).unwrap_or(self.len);
        FilterError { offset, message: message.to_string() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.1)
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FilterError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Predicate, FilterError> {
        let mut lhs = self.and()?;
        while self.eat_keyword("OR") {
            let rhs = self.and()?;
            lhs = Predicate::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Predicate, FilterError> {
        let mut lhs = self.unary()?;
        while self.eat_keyword("AND") {
            let rhs = self.unary()?;
            lhs = Predicate::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Predicate, FilterError> {
        if self.eat_keyword("NOT") {
            return Ok(Predicate::Not(Box::new(self.unary()?)));
        }
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("all") => {
                self.pos += 1;
                Ok(Predicate::All)
            }
            Some(Tok::Word(w)) if is_keyword(&w) => Err(self.error("expected attribute name")),
            Some(Tok::Word(attr)) => {
                self.pos += 1;
                self.test(attr)
            }
            _ => Err(self.error("expected expression")),
        }
    }

    fn test(&mut self, attr: String) -> Result<Predicate, FilterError> {
        if self.eat_keyword("IS") {
            let negated = self.eat_keyword("NOT");
            let value = self.value()?;
            return Ok(Predicate::Is { attr, negated, value });
        }
        let save = self.pos;
        let negated = self.eat_keyword("NOT");
        if self.eat_keyword("IN") {
            self.expect(Tok::LParen, "'(' after IN")?;
            let mut values = vec![self.value()?];
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                values.push(self.value()?);
            }
            self.expect(Tok::RParen, "')' closing IN list")?;
            return Ok(Predicate::In { attr, negated, values });
        }
        self.pos = save;
        Ok(Predicate::Truthy(attr))
    }

    fn value(&mut self) -> Result<Value, FilterError> {
        let v = match self.peek().cloned() {
            Some(Tok::Str(s)) => Value::Text(s),
            Some(Tok::Num(n)) => Value::Number(n),
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("null") => Value::Null,
            Some(Tok::Word(w)) if !is_keyword(&w) => Value::Text(w),
            _ => return Err(self.error("expected value")),
        };
        self.pos += 1;
        Ok(v)
    }
}

fn is_keyword(w: &str) -> bool {
    ["AND", "OR", "NOT", "IS", "IN"].iter().any(|k| w.eq_ignore_ascii_case(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn membership_and_equality() {
        let p = Predicate::parse("(class IN ('residential','suburb','neighborhood'))").unwrap();
        assert!(p.eval(&attrs(&[("class", "suburb")])));
        assert!(!p.eval(&attrs(&[("class", "farmland")])));
        assert!(!p.eval(&attrs(&[])));

        let p = Predicate::parse("(class IS 'grass')").unwrap();
        assert!(p.eval(&attrs(&[("class", "grass")])));
    }

    #[test]
    fn water_filter() {
        let p = Predicate::parse("NOT (intermittent) AND (brunnel IS NOT 'tunnel')").unwrap();
        assert!(p.eval(&attrs(&[])));
        assert!(p.eval(&attrs(&[("intermittent", "0")])));
        assert!(!p.eval(&attrs(&[("intermittent", "1")])));
        assert!(!p.eval(&attrs(&[("brunnel", "tunnel")])));
    }

    #[test]
    fn null_checks_and_numbers() {
        let p = Predicate::parse(
            "(brunnel IS null) OR (brunnel NOT IN ('tunnel','bridge') AND NOT (intermittent))",
        )
        .unwrap();
        assert!(p.eval(&attrs(&[])));
        assert!(p.eval(&attrs(&[("brunnel", "ford")])));
        assert!(!p.eval(&attrs(&[("brunnel", "bridge")])));

        let p = Predicate::parse("admin_level IN (4,6,8)").unwrap();
        assert!(p.eval(&attrs(&[("admin_level", "6")])));
        assert!(!p.eval(&attrs(&[("admin_level", "2")])));

        let p = Predicate::parse("iata IS NOT null").unwrap();
        assert!(p.eval(&attrs(&[("iata", "CDG")])));
        assert!(!p.eval(&attrs(&[])));
    }

    #[test]
    fn geometry_type_words() {
        let p = Predicate::parse("(_geom_type IN (Polygon,LineString))").unwrap();
        assert!(p.eval(&attrs(&[("_geom_type", "Polygon")])));
        assert!(!p.eval(&attrs(&[("_geom_type", "Point")])));
        assert_eq!(p.attributes(), vec!["_geom_type"]);
    }

    #[test]
    fn all_and_errors() {
        assert_eq!(Predicate::parse("(all)").unwrap(), Predicate::All);
        let e = Predicate::parse("class IS").unwrap_err();
        assert_eq!(e.offset, 8);
        assert!(Predicate::parse("class IN ('a'").is_err());
        assert!(Predicate::parse("'x").is_err());
        assert!(Predicate::parse("a b").is_err());
        assert!(Predicate::parse("").is_err());
    }

    #[test]
    fn display_reparses_to_same_predicate() {
        let src = "NOT (a) AND (b IS NOT 'x' OR c NOT IN (1,'y',null))";
        let p = Predicate::parse(src).unwrap();
        assert_eq!(Predicate::parse(&p.to_string()).unwrap(), p);
    }
}
