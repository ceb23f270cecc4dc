//! A small guarded-clause language for combining projected scores and raw
//! attribute values into one metric.
//!
//! Source form (keywords are case-insensitive):
//!
//! ```text
//! if phi(payInDays) < 0.5 and phi(paymentReceived) < 0.5 then 0
//! if val(payInDays) >= 40 then 0.1
//! else 1
//! ```
//!
//! `phi(name)` reads the projected score of an attribute (or of a dimension,
//! when a rule drives dimension- or trace-level aggregation); `val(name)`
//! reads the raw numeric value. Clauses are tried in order and the first
//! whose condition holds supplies the result; without a match the optional
//! `else` result applies, otherwise the rule yields Null. Conditions do not
//! short-circuit, so every referenced name must be bound.
//!
//! Grammar:
//!
//! ```text
//! rule    := clause+ default?
//! clause  := "if" expr "then" result
//! default := "else" result
//! expr    := expr ("and" | "or") expr | "not" expr | "(" expr ")" | ref cmp number
//! ref     := ("phi" | "val") "(" ident ")"
//! cmp     := "<" | "<=" | "=" | "==" | ">=" | ">" | "!="
//! result  := number | "null"
//! ```

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::{approx_eq, approx_ge, approx_gt, approx_le, approx_lt, Metric};

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("PARSE_ERROR: line {line}, column {column}: {message}; expected {expected}")]
    Parse {
        line: u32,
        column: u32,
        message: String,
        expected: String,
    },
    #[error("RANGE_ERROR: line {line}, column {column}: clause result {value} is outside [0, 1]")]
    Range { line: u32, column: u32, value: f64 },
    #[error("UNBOUND_REFERENCE: {kind}({name}) has no binding")]
    Unbound { kind: &'static str, name: String },
}

/// A parsed rule: ordered guarded clauses plus an optional default result.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleAst {
    pub clauses: Vec<Clause>,
    pub default: Option<Metric>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub condition: Expr,
    pub result: Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Cmp {
        reference: Reference,
        op: CmpOp,
        literal: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Projected score of an attribute or dimension.
    Phi(String),
    /// Raw numeric attribute value.
    Val(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
    Ne,
}

impl CmpOp {
    fn as_str(&self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Ne => "!=",
        }
    }

    /// All comparisons are tolerance-snapped with [`crate::model::EPSILON`].
    fn holds(&self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => approx_lt(lhs, rhs),
            CmpOp::Le => approx_le(lhs, rhs),
            CmpOp::Eq => approx_eq(lhs, rhs),
            CmpOp::Ge => approx_ge(lhs, rhs),
            CmpOp::Gt => approx_gt(lhs, rhs),
            CmpOp::Ne => !approx_eq(lhs, rhs),
        }
    }
}

/// Name-to-value environment a rule is evaluated against. A name can carry a
/// raw numeric value, a projected score, or both; Null scores are simply not
/// bound, so referencing them surfaces as `UNBOUND_REFERENCE`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    entries: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Entry {
    raw: Option<f64>,
    projected: Option<f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn bind_raw(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.entries.entry(name.into()).or_default().raw = Some(value);
        self
    }

    pub fn bind_projected(&mut self, name: impl Into<String>, score: f64) -> &mut Self {
        self.entries.entry(name.into()).or_default().projected = Some(score);
        self
    }

    pub fn raw(&self, name: &str) -> Option<f64> {
        self.entries.get(name).and_then(|e| e.raw)
    }

    pub fn projected(&self, name: &str) -> Option<f64> {
        self.entries.get(name).and_then(|e| e.projected)
    }
}

/// Evaluates a rule against bindings: first matching clause wins, then the
/// default, then Null.
pub fn evaluate(ast: &RuleAst, bindings: &Bindings) -> Result<Metric, RuleError> {
    for clause in &ast.clauses {
        if eval_expr(&clause.condition, bindings)? {
            return Ok(clause.result);
        }
    }
    Ok(ast.default.unwrap_or(Metric::NULL))
}

fn eval_expr(expr: &Expr, bindings: &Bindings) -> Result<bool, RuleError> {
    match expr {
        Expr::And(lhs, rhs) => {
            let l = eval_expr(lhs, bindings)?;
            let r = eval_expr(rhs, bindings)?;
            Ok(l && r)
        }
        Expr::Or(lhs, rhs) => {
            let l = eval_expr(lhs, bindings)?;
            let r = eval_expr(rhs, bindings)?;
            Ok(l || r)
        }
        Expr::Not(inner) => Ok(!eval_expr(inner, bindings)?),
        Expr::Cmp {
            reference,
            op,
            literal,
        } => {
            let lhs = match reference {
                Reference::Phi(name) => {
                    bindings.projected(name).ok_or_else(|| RuleError::Unbound {
                        kind: "phi",
                        name: name.clone(),
                    })?
                }
                Reference::Val(name) => bindings.raw(name).ok_or_else(|| RuleError::Unbound {
                    kind: "val",
                    name: name.clone(),
                })?,
            };
            Ok(op.holds(lhs, *literal))
        }
    }
}

// --- lexer ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    If,
    Then,
    Else,
    And,
    Or,
    Not,
    Phi,
    Val,
    Null,
    LParen,
    RParen,
    Cmp(CmpOp),
    Number(f64),
    Ident(String),
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::If => "'if'".into(),
            Token::Then => "'then'".into(),
            Token::Else => "'else'".into(),
            Token::And => "'and'".into(),
            Token::Or => "'or'".into(),
            Token::Not => "'not'".into(),
            Token::Phi => "'phi'".into(),
            Token::Val => "'val'".into(),
            Token::Null => "'null'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::Cmp(op) => format!("'{}'", op.as_str()),
            Token::Number(n) => format!("number {n}"),
            Token::Ident(id) => format!("identifier '{id}'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    line: u32,
    column: u32,
}

struct Lexer {
    chars: Vec<char>,
    index: usize,
    line: u32,
    column: u32,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.index).copied()
    }

    fn bump(&mut self) -> char {
        let c = self.chars[self.index];
        self.index += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        c
    }

    fn bump_if(&mut self, expected: char) -> bool {
        if self.peek() == Some(expected) {
            self.bump();
            true
        } else {
            false
        }
    }
}

fn lex(source: &str) -> Result<Vec<Spanned>, RuleError> {
    let mut lexer = Lexer {
        chars: source.chars().collect(),
        index: 0,
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();

    while let Some(c) = lexer.peek() {
        if c.is_whitespace() {
            lexer.bump();
            continue;
        }
        let (tok_line, tok_col) = (lexer.line, lexer.column);

        let token = match c {
            '(' => {
                lexer.bump();
                Token::LParen
            }
            ')' => {
                lexer.bump();
                Token::RParen
            }
            '<' => {
                lexer.bump();
                if lexer.bump_if('=') {
                    Token::Cmp(CmpOp::Le)
                } else {
                    Token::Cmp(CmpOp::Lt)
                }
            }
            '>' => {
                lexer.bump();
                if lexer.bump_if('=') {
                    Token::Cmp(CmpOp::Ge)
                } else {
                    Token::Cmp(CmpOp::Gt)
                }
            }
            '=' => {
                lexer.bump();
                lexer.bump_if('=');
                Token::Cmp(CmpOp::Eq)
            }
            '!' => {
                lexer.bump();
                if lexer.bump_if('=') {
                    Token::Cmp(CmpOp::Ne)
                } else {
                    return Err(RuleError::Parse {
                        line: tok_line,
                        column: tok_col,
                        message: "stray '!'".into(),
                        expected: "'!='".into(),
                    });
                }
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let mut text = String::new();
                if c == '-' {
                    text.push(lexer.bump());
                }
                while let Some(d) = lexer.peek() {
                    if d.is_ascii_digit() || d == '.' {
                        text.push(lexer.bump());
                    } else {
                        break;
                    }
                }
                match text.parse::<f64>() {
                    Ok(n) => Token::Number(n),
                    Err(_) => {
                        return Err(RuleError::Parse {
                            line: tok_line,
                            column: tok_col,
                            message: format!("malformed number '{text}'"),
                            expected: "a decimal number".into(),
                        })
                    }
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(d) = lexer.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        word.push(lexer.bump());
                    } else {
                        break;
                    }
                }
                match word.to_ascii_lowercase().as_str() {
                    "if" => Token::If,
                    "then" => Token::Then,
                    "else" => Token::Else,
                    "and" => Token::And,
                    "or" => Token::Or,
                    "not" => Token::Not,
                    "phi" => Token::Phi,
                    "val" => Token::Val,
                    "null" => Token::Null,
                    _ => Token::Ident(word),
                }
            }
            other => {
                return Err(RuleError::Parse {
                    line: tok_line,
                    column: tok_col,
                    message: format!("unexpected character '{other}'"),
                    expected: "a keyword, reference, comparison or number".into(),
                })
            }
        };
        tokens.push(Spanned {
            token,
            line: tok_line,
            column: tok_col,
        });
    }
    Ok(tokens)
}

// --- parser --------------------------------------------------------------

struct Parser {
    tokens: Vec<Spanned>,
    index: usize,
    end_line: u32,
    end_column: u32,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.index).map(|s| &s.token)
    }

    fn next(&mut self) -> Option<Spanned> {
        let spanned = self.tokens.get(self.index).cloned();
        if spanned.is_some() {
            self.index += 1;
        }
        spanned
    }

    fn here(&self) -> (u32, u32) {
        self.tokens
            .get(self.index)
            .map(|s| (s.line, s.column))
            .unwrap_or((self.end_line, self.end_column))
    }

    fn fail<T>(&self, expected: &str) -> Result<T, RuleError> {
        let (line, column) = self.here();
        let message = match self.tokens.get(self.index) {
            Some(s) => format!("unexpected {}", s.token.describe()),
            None => "unexpected end of rule".into(),
        };
        Err(RuleError::Parse {
            line,
            column,
            message,
            expected: expected.into(),
        })
    }

    fn expect(&mut self, token: Token, expected: &str) -> Result<Spanned, RuleError> {
        match self.peek() {
            Some(t) if *t == token => Ok(self.next().unwrap()),
            _ => self.fail(expected),
        }
    }

    fn parse_rule(&mut self) -> Result<RuleAst, RuleError> {
        let mut clauses = Vec::new();
        while self.peek() == Some(&Token::If) {
            self.next();
            let condition = self.parse_expr()?;
            self.expect(Token::Then, "'then'")?;
            let result = self.parse_result()?;
            clauses.push(Clause { condition, result });
        }
        if clauses.is_empty() && self.peek() != Some(&Token::Else) {
            return self.fail("'if' or 'else'");
        }
        let default = if self.peek() == Some(&Token::Else) {
            self.next();
            Some(self.parse_result()?)
        } else {
            None
        };
        if self.index != self.tokens.len() {
            return self.fail("'if', 'else' or end of rule");
        }
        Ok(RuleAst { clauses, default })
    }

    fn parse_result(&mut self) -> Result<Metric, RuleError> {
        let (line, column) = self.here();
        match self.peek() {
            Some(Token::Number(_)) => {
                let Some(Spanned {
                    token: Token::Number(value),
                    ..
                }) = self.next()
                else {
                    unreachable!()
                };
                Metric::new(value).map_err(|_| RuleError::Range {
                    line,
                    column,
                    value,
                })
            }
            Some(Token::Null) => {
                self.next();
                Ok(Metric::NULL)
            }
            _ => self.fail("a result in [0, 1] or 'null'"),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.parse_and()?;
        while self.peek() == Some(&Token::Or) {
            self.next();
            let rhs = self.parse_and()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.parse_unary()?;
        while self.peek() == Some(&Token::And) {
            self.next();
            let rhs = self.parse_unary()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, RuleError> {
        match self.peek() {
            Some(Token::Not) => {
                self.next();
                Ok(Expr::Not(Box::new(self.parse_unary()?)))
            }
            Some(Token::LParen) => {
                self.next();
                let inner = self.parse_expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(inner)
            }
            Some(Token::Phi) | Some(Token::Val) => self.parse_comparison(),
            _ => self.fail("'not', '(', 'phi' or 'val'"),
        }
    }

    fn parse_comparison(&mut self) -> Result<Expr, RuleError> {
        let kind = self.next().unwrap().token;
        self.expect(Token::LParen, "'('")?;
        let name = match self.peek() {
            Some(Token::Ident(_)) => {
                let Some(Spanned {
                    token: Token::Ident(name),
                    ..
                }) = self.next()
                else {
                    unreachable!()
                };
                name
            }
            _ => return self.fail("an attribute name"),
        };
        self.expect(Token::RParen, "')'")?;
        let op = match self.peek() {
            Some(Token::Cmp(_)) => {
                let Some(Spanned {
                    token: Token::Cmp(op),
                    ..
                }) = self.next()
                else {
                    unreachable!()
                };
                op
            }
            _ => return self.fail("a comparison operator"),
        };
        let literal = match self.peek() {
            Some(Token::Number(_)) => {
                let Some(Spanned {
                    token: Token::Number(n),
                    ..
                }) = self.next()
                else {
                    unreachable!()
                };
                n
            }
            _ => return self.fail("a number literal"),
        };
        let reference = match kind {
            Token::Phi => Reference::Phi(name),
            _ => Reference::Val(name),
        };
        Ok(Expr::Cmp {
            reference,
            op,
            literal,
        })
    }
}

/// Parses rule source into an AST. Clause results outside `[0, 1]` are
/// rejected with `RANGE_ERROR`.
pub fn parse(source: &str) -> Result<RuleAst, RuleError> {
    let tokens = lex(source)?;
    let end_line = source.lines().count().max(1) as u32;
    let end_column = source.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1) as u32;
    let mut parser = Parser {
        tokens,
        index: 0,
        end_line,
        end_column,
    };
    parser.parse_rule()
}

// --- printer -------------------------------------------------------------

impl fmt::Display for RuleAst {
    /// Canonical source form; parsing it back yields a structurally equal AST.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for clause in &self.clauses {
            if !first {
                f.write_str("\n")?;
            }
            first = false;
            write!(f, "if {} then {}", clause.condition, clause.result)?;
        }
        if let Some(default) = &self.default {
            if !first {
                f.write_str("\n")?;
            }
            write!(f, "else {default}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn needs_parens(child: &Expr, parent_is_and: bool) -> bool {
            match child {
                Expr::Or(..) => parent_is_and,
                _ => false,
            }
        }
        fn write_child(
            f: &mut fmt::Formatter<'_>,
            child: &Expr,
            parent_is_and: bool,
        ) -> fmt::Result {
            if needs_parens(child, parent_is_and) {
                write!(f, "({child})")
            } else {
                write!(f, "{child}")
            }
        }
        match self {
            Expr::And(lhs, rhs) => {
                write_child(f, lhs, true)?;
                f.write_str(" and ")?;
                // right operand parenthesized when it is itself a binary op,
                // so printing re-parses to the same left-leaning tree
                match rhs.as_ref() {
                    Expr::And(..) | Expr::Or(..) => write!(f, "({rhs})"),
                    _ => write!(f, "{rhs}"),
                }
            }
            Expr::Or(lhs, rhs) => {
                write_child(f, lhs, false)?;
                f.write_str(" or ")?;
                match rhs.as_ref() {
                    Expr::Or(..) => write!(f, "({rhs})"),
                    _ => write!(f, "{rhs}"),
                }
            }
            Expr::Not(inner) => match inner.as_ref() {
                Expr::And(..) | Expr::Or(..) => write!(f, "not ({inner})"),
                _ => write!(f, "not {inner}"),
            },
            Expr::Cmp {
                reference,
                op,
                literal,
            } => {
                let (kind, name) = match reference {
                    Reference::Phi(name) => ("phi", name),
                    Reference::Val(name) => ("val", name),
                };
                write!(f, "{kind}({name}) {} {literal}", op.as_str())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi_lt(name: &str, x: f64) -> Expr {
        Expr::Cmp {
            reference: Reference::Phi(name.into()),
            op: CmpOp::Lt,
            literal: x,
        }
    }

    #[test]
    fn parses_two_armed_rule() {
        let ast = parse("if phi(a1) < 0.5 and phi(a2) < 0.5 then 0 else 1").unwrap();
        assert_eq!(ast.clauses.len(), 1);
        assert_eq!(ast.default, Some(Metric::new(1.0).unwrap()));
        assert_eq!(
            ast.clauses[0].condition,
            Expr::And(Box::new(phi_lt("a1", 0.5)), Box::new(phi_lt("a2", 0.5)))
        );
        assert_eq!(ast.clauses[0].result, Metric::new(0.0).unwrap());
    }

    #[test]
    fn parses_single_clause_without_default() {
        let ast = parse("if val(x) >= 10 then 1").unwrap();
        assert_eq!(ast.clauses.len(), 1);
        assert!(ast.default.is_none());
        assert_eq!(
            ast.clauses[0].condition,
            Expr::Cmp {
                reference: Reference::Val("x".into()),
                op: CmpOp::Ge,
                literal: 10.0,
            }
        );
    }

    #[test]
    fn reports_unbalanced_paren_position() {
        let err = parse("if phi(a1 < 0.5 then 0").unwrap_err();
        match err {
            RuleError::Parse { line, column, expected, .. } => {
                assert_eq!(line, 1);
                assert_eq!(column, 11); // the '<' where ')' was expected
                assert!(expected.contains(")"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_results_outside_unit_interval() {
        let err = parse("if val(x) > 1 then 2").unwrap_err();
        assert!(matches!(err, RuleError::Range { value, .. } if value == 2.0));
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let a = parse("IF phi(a) < 0.5 THEN 0 ELSE 1").unwrap();
        let b = parse("if phi(a) < 0.5 then 0 else 1").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evaluates_first_match_then_default_then_null() {
        let ast = parse("if phi(a1) < 0.5 and phi(a2) < 0.5 then 0 else 1").unwrap();
        let mut bindings = Bindings::new();
        bindings.bind_projected("a1", 0.4).bind_projected("a2", 0.3);
        assert_eq!(evaluate(&ast, &bindings).unwrap().value(), Some(0.0));

        bindings.bind_projected("a1", 0.6);
        assert_eq!(evaluate(&ast, &bindings).unwrap().value(), Some(1.0));

        let no_default = parse("if phi(a1) < 0.5 and phi(a2) < 0.5 then 0").unwrap();
        bindings.bind_projected("a1", 0.6);
        assert!(evaluate(&no_default, &bindings).unwrap().is_null());
    }

    #[test]
    fn unbound_reference_is_an_error() {
        let ast = parse("if phi(missing) < 0.5 then 0").unwrap();
        let err = evaluate(&ast, &Bindings::new()).unwrap_err();
        assert_eq!(
            err,
            RuleError::Unbound {
                kind: "phi",
                name: "missing".into()
            }
        );
    }

    #[test]
    fn raw_and_projected_bindings_are_separate_namespaces() {
        let ast = parse("if val(x) >= 10 and phi(x) < 0.5 then 0 else 1").unwrap();
        let mut bindings = Bindings::new();
        bindings.bind_raw("x", 12.0).bind_projected("x", 0.3);
        assert_eq!(evaluate(&ast, &bindings).unwrap().value(), Some(0.0));
    }

    #[test]
    fn earlier_clause_wins_on_overlap() {
        let ast = parse("if val(x) >= 0 then 0.2 if val(x) >= 0 then 0.9").unwrap();
        let mut bindings = Bindings::new();
        bindings.bind_raw("x", 1.0);
        assert_eq!(evaluate(&ast, &bindings).unwrap().value(), Some(0.2));
    }

    #[test]
    fn disjoint_clauses_commute() {
        let a = parse("if val(x) < 0 then 0.1 if val(x) >= 0 then 0.9").unwrap();
        let b = parse("if val(x) >= 0 then 0.9 if val(x) < 0 then 0.1").unwrap();
        for raw in [-5.0, -0.5, 0.5, 5.0] {
            let mut bindings = Bindings::new();
            bindings.bind_raw("x", raw);
            assert_eq!(
                evaluate(&a, &bindings).unwrap(),
                evaluate(&b, &bindings).unwrap()
            );
        }
    }

    #[test]
    fn print_then_parse_is_identity() {
        let sources = [
            "if phi(a1) < 0.5 and phi(a2) < 0.5 then 0 else 1",
            "if not (phi(a) >= 0.25 or val(b) != 3) and phi(c) = 1 then 0.75",
            "if val(x) >= 10 then 1",
            "else 0.5",
            "if phi(a) < 0.1 or phi(b) < 0.2 and val(c) > 3 then 0.25 else null",
        ];
        for source in sources {
            let ast = parse(source).unwrap();
            let printed = ast.to_string();
            let reparsed = parse(&printed).unwrap();
            assert_eq!(ast, reparsed, "printing {source:?} as {printed:?}");
        }
    }

    #[test]
    fn comparisons_are_tolerance_snapped() {
        let ast = parse("if phi(a) >= 0.7 then 1 else 0").unwrap();
        let mut bindings = Bindings::new();
        bindings.bind_projected("a", 0.7 - 1e-12);
        assert_eq!(evaluate(&ast, &bindings).unwrap().value(), Some(1.0));
    }
}
