//! Cross-column consistency rules.
//!
//! Grammar (keywords are case-insensitive):
//!
//! ```text
//! rule    := clause ( "and" clause )*
//! clause  := operand cmp operand
//!          | ident "in" "{" literal ( "," literal )* "}"
//!          | ident "between" literal "and" literal
//! cmp     := "==" | "=" | "!=" | "<" | "<=" | ">" | ">=" | "≤" | "≥" | "≠"
//! operand := ident | literal
//! ident   := [A-Za-z_][A-Za-z0-9_.]* | "`" any "`"
//! literal := number | "'" any "'" | "\"" any "\""
//! ```
//!
//! Comparisons are numeric when both sides are numeric (timestamps count
//! as epoch seconds and booleans as 0/1; a string literal compared with a
//! numeric cell is read as a number or an ISO date). Otherwise they compare
//! rendered text lexicographically.

use std::cmp::Ordering;

use crate::error::{DqiError, Result};
use crate::tabular::parse::parse_number;
use crate::tabular::{format_number, CellValue, Dataset, TimestampPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn holds(self, ord: Ordering) -> bool {
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

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    Str(String),
}

impl Literal {
    fn render(&self) -> String {
        match self {
            Literal::Number(v) => format_number(*v),
            Literal::Str(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Column(usize),
    Literal(Literal),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Clause {
    Compare { lhs: Operand, op: CmpOp, rhs: Operand },
    In { column: usize, values: Vec<String> },
    Between { column: usize, low: Literal, high: Literal },
}

/// A parsed rule bound to a dataset's column positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub source: String,
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Str(String),
    Op(CmpOp),
    LBrace,
    RBrace,
    Comma,
}

fn tokenize(src: &str) -> std::result::Result<Vec<Token>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            _ if c.is_whitespace() => i += 1,
            '{' => {
                out.push(Token::LBrace);
                i += 1;
            }
            '}' => {
                out.push(Token::RBrace);
                i += 1;
            }
            ',' => {
                out.push(Token::Comma);
                i += 1;
            }
            '≤' | '≥' | '≠' => {
                out.push(Token::Op(match c {
                    '≤' => CmpOp::Le,
                    '≥' => CmpOp::Ge,
                    _ => CmpOp::Ne,
                }));
                i += 1;
            }
            '<' | '>' | '=' | '!' => {
                let next_eq = chars.get(i + 1) == Some(&'=');
                let op = match (c, next_eq) {
                    ('<', true) => CmpOp::Le,
                    ('<', false) => CmpOp::Lt,
                    ('>', true) => CmpOp::Ge,
                    ('>', false) => CmpOp::Gt,
                    ('=', _) => CmpOp::Eq,
                    ('!', true) => CmpOp::Ne,
                    _ => return Err(format!("unexpected `!` at offset {i}")),
                };
                out.push(Token::Op(op));
                i += if next_eq { 2 } else { 1 };
            }
            '`' | '\'' | '"' => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|&d| d == c)
                    .ok_or_else(|| format!("unterminated {c} quote"))?;
                let text: String = chars[i + 1..i + 1 + end].iter().collect();
                out.push(if c == '`' { Token::Ident(text) } else { Token::Str(text) });
                i += end + 2;
            }
            _ if c.is_ascii_digit() || ((c == '-' || c == '+' || c == '.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.')) => {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = parse_number(&text).ok_or_else(|| format!("bad number `{text}`"))?;
                out.push(Token::Number(v));
            }
            _ if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            _ => return Err(format!("unexpected character `{c}`")),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    ds: &'a Dataset,
}

fn is_keyword(tok: Option<&Token>, kw: &str) -> bool {
    matches!(tok, Some(Token::Ident(s)) if s.eq_ignore_ascii_case(kw))
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn column(&self, name: &str) -> std::result::Result<usize, String> {
        self.ds.column_index(name).map_err(|_| format!("unknown column `{name}`"))
    }

    fn literal(&mut self) -> std::result::Result<Literal, String> {
        match self.next() {
            Some(Token::Number(v)) => Ok(Literal::Number(v)),
            Some(Token::Str(s)) => Ok(Literal::Str(s)),
            other => Err(format!("expected a literal, found {}", describe(other.as_ref()))),
        }
    }

    fn operand(&mut self) -> std::result::Result<Operand, String> {
        match self.next() {
            Some(Token::Ident(name)) => Ok(Operand::Column(self.column(&name)?)),
            Some(Token::Number(v)) => Ok(Operand::Literal(Literal::Number(v))),
            Some(Token::Str(s)) => Ok(Operand::Literal(Literal::Str(s))),
            other => Err(format!("expected a column or literal, found {}", describe(other.as_ref()))),
        }
    }

    fn clause(&mut self) -> std::result::Result<Clause, String> {
        let lhs = self.operand()?;
        if is_keyword(self.peek(), "in") || is_keyword(self.peek(), "between") {
            let Operand::Column(column) = lhs else {
                return Err("`in` and `between` need a column on the left".into());
            };
            if is_keyword(self.next().as_ref(), "in") {
                if self.next() != Some(Token::LBrace) {
                    return Err("expected `{` after `in`".into());
                }
                let mut values = vec![self.literal()?.render()];
                loop {
                    match self.next() {
                        Some(Token::Comma) => values.push(self.literal()?.render()),
                        Some(Token::RBrace) => break,
                        other => return Err(format!("expected `,` or `}}`, found {}", describe(other.as_ref()))),
                    }
                }
                return Ok(Clause::In { column, values });
            }
            let low = self.literal()?;
            if !is_keyword(self.next().as_ref(), "and") {
                return Err("expected `and` in `between`".into());
            }
            let high = self.literal()?;
            return Ok(Clause::Between { column, low, high });
        }
        let op = match self.next() {
            Some(Token::Op(op)) => op,
            other => return Err(format!("expected a comparison operator, found {}", describe(other.as_ref()))),
        };
        let rhs = self.operand()?;
        if !matches!(lhs, Operand::Column(_)) && !matches!(rhs, Operand::Column(_)) {
            return Err("a comparison must reference at least one column".into());
        }
        Ok(Clause::Compare { lhs, op, rhs })
    }
}

fn describe(tok: Option<&Token>) -> String {
    match tok {
        None => "end of rule".into(),
        Some(Token::Ident(s)) => format!("`{s}`"),
        Some(Token::Number(v)) => format_number(*v),
        Some(Token::Str(s)) => format!("'{s}'"),
        Some(Token::Op(op)) => format!("{op:?}"),
        Some(Token::LBrace) => "`{`".into(),
        Some(Token::RBrace) => "`}`".into(),
        Some(Token::Comma) => "`,`".into(),
    }
}

impl Rule {
    /// Parses `src` against the columns of `ds`. `index` is reported in
    /// errors.
    pub fn parse(src: &str, index: usize, ds: &Dataset) -> Result<Rule> {
        let fail = |message: String| DqiError::InvalidRule { index, message };
        let tokens = tokenize(src).map_err(fail)?;
        if tokens.is_empty() {
            return Err(fail("rule is empty".into()));
        }
        let mut p = Parser { tokens, pos: 0, ds };
        let mut clauses = vec![p.clause().map_err(fail)?];
        while p.peek().is_some() {
            if !is_keyword(p.next().as_ref(), "and") {
                return Err(fail(format!("expected `and` between clauses in `{src}`")));
            }
            clauses.push(p.clause().map_err(fail)?);
        }
        Ok(Rule {
            source: src.to_string(),
            clauses,
        })
    }

    /// Column positions the rule reads.
    pub fn columns(&self) -> Vec<usize> {
        let mut cols = Vec::new();
        for c in &self.clauses {
            match c {
                Clause::Compare { lhs, rhs, .. } => {
                    for o in [lhs, rhs] {
                        if let Operand::Column(i) = o {
                            cols.push(*i);
                        }
                    }
                }
                Clause::In { column, .. } | Clause::Between { column, .. } => cols.push(*column),
            }
        }
        cols.sort_unstable();
        cols.dedup();
        cols
    }

    /// `None` when a referenced cell is missing.
    pub fn eval(&self, row: &[CellValue]) -> Option<bool> {
        if self.columns().iter().any(|&c| row[c].is_missing()) {
            return None;
        }
        Some(self.clauses.iter().all(|c| eval_clause(c, row)))
    }
}

enum Val {
    Num(f64),
    Str(String),
}

fn cell_val(cell: &CellValue) -> Val {
    match cell {
        CellValue::Text(s) => Val::Str(s.clone()),
        other => Val::Num(other.as_f64().expect("observed non-text cells are numeric")),
    }
}

fn lit_val(lit: &Literal) -> Val {
    match lit {
        Literal::Number(v) => Val::Num(*v),
        Literal::Str(s) => Val::Str(s.clone()),
    }
}

fn as_number(s: &str) -> Option<f64> {
    parse_number(s).or_else(|| TimestampPattern::Iso.parse(s).map(|t| t as f64))
}

fn compare(a: &Val, b: &Val) -> Option<Ordering> {
    match (a, b) {
        (Val::Num(x), Val::Num(y)) => x.partial_cmp(y),
        (Val::Str(x), Val::Str(y)) => Some(x.cmp(y)),
        (Val::Num(x), Val::Str(s)) => as_number(s).and_then(|y| x.partial_cmp(&y)),
        (Val::Str(s), Val::Num(y)) => as_number(s).and_then(|x| x.partial_cmp(y)),
    }
}

fn eval_clause(clause: &Clause, row: &[CellValue]) -> bool {
    let operand = |o: &Operand| match o {
        Operand::Column(c) => cell_val(&row[*c]),
        Operand::Literal(l) => lit_val(l),
    };
    match clause {
        Clause::Compare { lhs, op, rhs } => compare(&operand(lhs), &operand(rhs)).is_some_and(|ord| op.holds(ord)),
        Clause::In { column, values } => {
            let cell = row[*column].render().expect("observed cell");
            values.iter().any(|v| v.as_str() == cell.as_ref())
        }
        Clause::Between { column, low, high } => {
            let v = cell_val(&row[*column]);
            compare(&v, &lit_val(low)).is_some_and(|o| o != Ordering::Less)
                && compare(&v, &lit_val(high)).is_some_and(|o| o != Ordering::Greater)
        }
    }
}
