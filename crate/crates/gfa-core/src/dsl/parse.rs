//! Recursive-descent parser and printer for family expressions.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' exponent)?
//! exponent := '-'? number | '(' expr ')'
//! base   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! A bare exponent must be a numeric literal. A parenthesized exponent that
//! folds to a rational constant is stored as a rational power; any other
//! parenthesized exponent becomes a general power `exp(g·log f)`.

use super::ast::{Expr, Func, Rational, Var, E};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown identifier `{name}` at {line}:{col}")]
    UnknownIdent { line: usize, col: usize, name: String },
    #[error("non-constant exponent at {line}:{col} (parenthesize general exponents)")]
    NonConstantExponent { line: usize, col: usize },
    #[error("`{name}` takes {want} argument(s), got {got} at {line}:{col}")]
    Arity { line: usize, col: usize, name: String, want: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut out = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = (line, col);
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let j0 = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    i = k;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[j0..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                line: start.0,
                col: start.1,
                msg: format!("bad number `{text}`"),
            })?;
            col += i - j0;
            out.push(Token { tok: Tok::Num(v, text), line: start.0, col: start.1 });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let j0 = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - j0;
            out.push(Token {
                tok: Tok::Ident(chars[j0..i].iter().collect()),
                line: start.0,
                col: start.1,
            });
            continue;
        }
        if "+-*/^(),".contains(c) {
            out.push(Token { tok: Tok::Sym(c), line, col });
            i += 1;
            col += 1;
            continue;
        }
        return Err(ParseError::Syntax { line, col, msg: format!("unexpected character `{c}`") });
    }
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: &str) -> Result<T, ParseError> {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Num(_, s) => format!("`{s}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        };
        Err(ParseError::Syntax { line: t.line, col: t.col, msg: format!("{msg}, found {found}") })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek().tok == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.err(&format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<E, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Sym('+') => {
                    self.bump();
                    lhs = Arc::new(Expr::Add(lhs, self.term()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    lhs = Arc::new(Expr::Sub(lhs, self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<E, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Sym('*') => {
                    self.bump();
                    lhs = Arc::new(Expr::Mul(lhs, self.factor()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    lhs = Arc::new(Expr::Div(lhs, self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<E, ParseError> {
        if self.peek().tok == Tok::Sym('-') {
            self.bump();
            // A negative literal folds unless it is the base of a power.
            if let Tok::Num(v, _) = *self.peek_at(0) {
                if *self.peek_at(1) != Tok::Sym('^') {
                    self.bump();
                    return Ok(Expr::num(-v));
                }
            }
            return Ok(Arc::new(Expr::Neg(self.factor()?)));
        }
        let base = self.base()?;
        if self.peek().tok != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let at = self.peek().clone();
        match at.tok {
            Tok::Sym('-') | Tok::Num(..) => {
                let neg = if at.tok == Tok::Sym('-') {
                    self.bump();
                    true
                } else {
                    false
                };
                let Tok::Num(v, _) = self.peek().tok else {
                    return Err(ParseError::NonConstantExponent { line: at.line, col: at.col });
                };
                self.bump();
                let r = Rational::from_f64(if neg { -v } else { v })
                    .ok_or(ParseError::NonConstantExponent { line: at.line, col: at.col })?;
                Ok(Arc::new(Expr::Pow(base, r)))
            }
            Tok::Sym('(') => {
                self.bump();
                let g = self.expr()?;
                self.expect(')')?;
                Ok(match g.const_rational() {
                    Some(r) => Arc::new(Expr::Pow(base, r)),
                    None => Arc::new(Expr::PowE(base, g)),
                })
            }
            Tok::End => self.err("expected exponent"),
            _ => Err(ParseError::NonConstantExponent { line: at.line, col: at.col }),
        }
    }

    fn base(&mut self) -> Result<E, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v, _) => {
                self.bump();
                Ok(Expr::num(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek().tok == Tok::Sym('(') {
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while self.peek().tok == Tok::Sym(',') {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    let f = Func::from_name(&name).ok_or(ParseError::UnknownIdent {
                        line: t.line,
                        col: t.col,
                        name: name.clone(),
                    })?;
                    if args.len() != 1 {
                        return Err(ParseError::Arity {
                            line: t.line,
                            col: t.col,
                            name,
                            want: 1,
                            got: args.len(),
                        });
                    }
                    return Ok(Arc::new(Expr::Call(f, args.pop().unwrap())));
                }
                match name.as_str() {
                    "eps" => Ok(Expr::var(Var::Eps)),
                    "i" => Ok(Arc::new(Expr::Imag)),
                    _ => match name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                        Some(k) if k >= 1 && !name[1..].starts_with('0') => Ok(Expr::var(Var::X(k - 1))),
                        _ => Err(ParseError::UnknownIdent { line: t.line, col: t.col, name }),
                    },
                }
            }
            _ => self.err("expected a number, identifier or `(`"),
        }
    }
}

/// Parse an expression.
pub fn parse(src: &str) -> Result<E, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
        Expr::Pow(..) | Expr::PowE(..) => 4,
        _ => 5,
    }
}

fn write_expr(e: &Expr, ctx: u8, out: &mut String) {
    let p = prec(e);
    let paren = p < ctx;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Num(v) => out.push_str(&fmt_num(*v)),
        Expr::Imag => out.push('i'),
        Expr::Var(Var::Eps) => out.push_str("eps"),
        Expr::Var(Var::X(k)) => out.push_str(&format!("x{}", k + 1)),
        Expr::Neg(a) => {
            out.push('-');
            // `-3` would re-parse as a literal, so keep the operand wrapped.
            if matches!(**a, Expr::Num(_)) {
                out.push('(');
                write_expr(a, 0, out);
                out.push(')');
            } else {
                write_expr(a, 3, out);
            }
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            write_expr(a, 1, out);
            out.push(if matches!(e, Expr::Add(..)) { '+' } else { '-' });
            write_expr(b, 2, out);
        }
        Expr::Mul(a, b) | Expr::Div(a, b) => {
            write_expr(a, 2, out);
            out.push(if matches!(e, Expr::Mul(..)) { '*' } else { '/' });
            write_expr(b, 3, out);
        }
        Expr::Pow(a, r) => {
            write_expr(a, 5, out);
            out.push('^');
            if r.is_integer() {
                out.push_str(&r.num.to_string());
            } else {
                out.push_str(&format!("({r})"));
            }
        }
        Expr::PowE(a, g) => {
            write_expr(a, 5, out);
            out.push_str("^(");
            write_expr(g, 0, out);
            out.push(')');
        }
        Expr::Call(f, a) => {
            out.push_str(&f.name());
            out.push('(');
            write_expr(a, 0, out);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

/// Print an expression so that `parse(print(e)) == e` for parsed trees.
pub fn print(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(e, 0, &mut s);
    s
}

/// A family definition read from a text file.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyDef {
    pub name: String,
    pub dim: usize,
    pub expr: E,
}

/// Parse the `dim = / name = / u =` family file format; `#` starts a comment.
pub fn parse_family_file(text: &str) -> Result<FamilyDef, ParseError> {
    let (mut name, mut dim, mut expr) = (None, None, None);
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| ParseError::Syntax { line: n + 1, col: 1, msg: msg.into() };
        let (key, val) = line.split_once('=').ok_or_else(|| bad("expected `key = value`"))?;
        let val = val.trim();
        match key.trim() {
            "dim" => dim = Some(val.parse::<usize>().map_err(|_| bad("dim must be a positive integer"))?),
            "name" => name = Some(val.trim_matches('"').to_string()),
            "u" => {
                expr = Some(parse(val).map_err(|e| match e {
                    ParseError::Syntax { col, msg, .. } => ParseError::Syntax { line: n + 1, col, msg },
                    ParseError::UnknownIdent { col, name, .. } => {
                        ParseError::UnknownIdent { line: n + 1, col, name }
                    }
                    ParseError::NonConstantExponent { col, .. } => {
                        ParseError::NonConstantExponent { line: n + 1, col }
                    }
                    ParseError::Arity { col, name, want, got, .. } => {
                        ParseError::Arity { line: n + 1, col, name, want, got }
                    }
                })?)
            }
            k => return Err(bad(&format!("unknown key `{k}`"))),
        }
    }
    let missing = |k: &str| ParseError::Syntax { line: 0, col: 0, msg: format!("missing `{k} =`") };
    let dim = dim.ok_or_else(|| missing("dim"))?;
    if dim == 0 {
        return Err(ParseError::Syntax { line: 0, col: 0, msg: "dim must be positive".into() });
    }
    let expr = expr.ok_or_else(|| missing("u"))?;
    if expr.coord_count() > dim {
        return Err(ParseError::UnknownIdent {
            line: 0,
            col: 0,
            name: format!("x{}", expr.coord_count()),
        });
    }
    Ok(FamilyDef { name: name.unwrap_or_else(|| "unnamed".into()), dim, expr })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        let m = parse("eps^-1 * bump(x1/eps)").unwrap();
        let want = Expr::Mul(
            Arc::new(Expr::Pow(Expr::var(Var::Eps), Rational::int(-1))),
            Arc::new(Expr::Call(
                Func::Bump(0),
                Arc::new(Expr::Div(Expr::var(Var::X(0)), Expr::var(Var::Eps))),
            )),
        );
        assert_eq!(*m, want);
        let p = parse("(1+x1^2)^(log(1+x1^2)/log(1/eps))").unwrap();
        assert!(matches!(*p, Expr::PowE(..)));
        assert!(matches!(*parse("bump(x1) * sin(x1/eps)").unwrap(), Expr::Mul(..)));
        assert!(matches!(parse("x1 +"), Err(ParseError::Syntax { line: 1, col: 5, .. })));
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("foo(x1)"), Err(ParseError::UnknownIdent { .. })));
        assert!(matches!(parse("y + 1"), Err(ParseError::UnknownIdent { .. })));
        assert!(matches!(parse("x0"), Err(ParseError::UnknownIdent { .. })));
        assert!(matches!(parse("x1^eps"), Err(ParseError::NonConstantExponent { .. })));
        assert!(matches!(parse("sin(x1, x2)"), Err(ParseError::Arity { got: 2, .. })));
        assert!(matches!(parse("x1 $ 2"), Err(ParseError::Syntax { col: 4, .. })));
        assert!(matches!(parse("x1\n  + )"), Err(ParseError::Syntax { line: 2, col: 5, .. })));
    }

    #[test]
    fn exponent_forms() {
        assert_eq!(*parse("x1^(1/2)").unwrap(), Expr::Pow(Expr::var(Var::X(0)), Rational::new(1, 2).unwrap()));
        assert_eq!(parse("x1^0.5").unwrap(), parse("x1^(1/2)").unwrap());
        assert_eq!(*parse("x1^(2)").unwrap(), Expr::Pow(Expr::var(Var::X(0)), Rational::int(2)));
        assert!(matches!(*parse("x1^(log(2))").unwrap(), Expr::PowE(..)));
        assert!(matches!(*parse("-2^2").unwrap(), Expr::Neg(_)));
        assert_eq!(*parse("-2*x1").unwrap(), Expr::Mul(Expr::num(-2.0), Expr::var(Var::X(0))));
    }

    #[test]
    fn family_file() {
        let src = "# log-power family\nname = prop34\ndim = 1\nu = (1+x1^2)^(log(1+x1^2)/log(1/eps))  # log-growth\n";
        let f = parse_family_file(src).unwrap();
        assert_eq!((f.name.as_str(), f.dim), ("prop34", 1));
        assert!(parse_family_file("dim = 1\nu = x2").is_err());
        assert!(matches!(
            parse_family_file("dim = 1\n\nu = x1 +"),
            Err(ParseError::Syntax { line: 3, .. })
        ));
        assert!(parse_family_file("u = x1").is_err());
    }
}
