//! Lexer and parser for constraint programs.

use crate::error::{Error, Result};

use super::{Binding, PAtom, PTerm, Populate, Rule};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64, String),
    LParen,
    RParen,
    Comma,
    Dot,
    Implies,
    Amp,
    Arrow,
    Slash,
    Question,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(_, s) => format!("number {s}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Implies => "`:-`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Arrow => "`<-`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Question => "`?`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l, k) = (line, col);
        let single = |tok| Spanned {
            tok,
            line: l,
            column: k,
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '(' => out.push(single(Tok::LParen)),
            ')' => out.push(single(Tok::RParen)),
            ',' => out.push(single(Tok::Comma)),
            '.' => out.push(single(Tok::Dot)),
            '&' => out.push(single(Tok::Amp)),
            '/' => out.push(single(Tok::Slash)),
            '?' => out.push(single(Tok::Question)),
            ':' if chars.get(i + 1) == Some(&'-') => {
                out.push(single(Tok::Implies));
                i += 2;
                col += 2;
                continue;
            }
            '<' if chars.get(i + 1) == Some(&'-') => {
                out.push(single(Tok::Arrow));
                i += 2;
                col += 2;
                continue;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                // digits followed by letters form a constant such as `1st`
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                col += i - start;
                let tok = match text.parse::<f64>() {
                    Ok(v) => Tok::Number(v, text),
                    Err(_) => Tok::Ident(text),
                };
                out.push(Spanned {
                    tok,
                    line: l,
                    column: k,
                });
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
                {
                    i += 1;
                }
                col += i - start;
                out.push(Spanned {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line: l,
                    column: k,
                });
                continue;
            }
            other => return Err(err(l, k, format!("unexpected character `{other}`"))),
        }
        i += 1;
        col += 1;
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

/// One parsed statement, with the position of its first token.
#[derive(Clone, Debug)]
pub(super) enum Statement {
    Fact(PAtom),
    Choice(Option<f64>, PAtom),
    Rule(Rule),
    Binding(String, Binding),
    Populate(Populate),
}

pub(super) struct Located {
    pub statement: Statement,
    pub line: usize,
    pub column: usize,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        &self.toks[(self.pos + offset).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T> {
        let t = self.peek();
        Err(err(
            t.line,
            t.column,
            format!("expected {expected}, found {}", t.tok.describe()),
        ))
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            self.fail(&tok.describe())
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => self.fail(what),
        }
    }

    fn term(&mut self) -> Result<PTerm> {
        match self.peek().tok.clone() {
            Tok::Ident(s) => {
                self.next();
                let first = s.chars().next().unwrap();
                Ok(if first.is_uppercase() || first == '_' {
                    PTerm::Var(s)
                } else {
                    PTerm::Const(s)
                })
            }
            Tok::Number(_, text) => {
                self.next();
                Ok(PTerm::Const(text))
            }
            _ => self.fail("a variable or constant"),
        }
    }

    fn atom(&mut self) -> Result<PAtom> {
        let t = self.peek().clone();
        let pred = self.ident("a predicate")?;
        if pred.chars().next().unwrap().is_uppercase() {
            return Err(err(
                t.line,
                t.column,
                format!("predicate `{pred}` must start with a lowercase letter"),
            ));
        }
        let mut terms = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.next();
            loop {
                terms.push(self.term()?);
                match self.peek().tok {
                    Tok::Comma => {
                        self.next();
                    }
                    Tok::RParen => {
                        self.next();
                        break;
                    }
                    _ => return self.fail("`,` or `)`"),
                }
            }
        }
        Ok(PAtom { pred, terms })
    }

    fn statement(&mut self) -> Result<Statement> {
        let is_word = |t: &Tok, w: &str| matches!(t, Tok::Ident(s) if s == w);
        let head = self.peek().tok.clone();
        if is_word(&head, "constraint") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.next();
            let id = self.ident("a parfactor name")?;
            self.expect(Tok::Arrow)?;
            let binding = if is_word(&self.peek().tok, "top") && *self.peek_at(1) == Tok::Dot {
                self.next();
                Binding::Top
            } else {
                Binding::Query(self.atom()?)
            };
            self.expect(Tok::Dot)?;
            return Ok(Statement::Binding(id, binding));
        }
        if is_word(&head, "populate") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.next();
            let pred = self.ident("a predicate")?;
            self.expect(Tok::Slash)?;
            let t = self.peek().clone();
            match t.tok {
                Tok::Number(1.0, _) => {
                    self.next();
                }
                _ => {
                    return Err(err(
                        t.line,
                        t.column,
                        "populate needs a unary predicate (`/1`)",
                    ))
                }
            }
            let from = self.ident("`from`")?;
            if from != "from" {
                return Err(err(t.line, t.column + 2, "expected `from`"));
            }
            let logvar = self.ident("a logvar")?;
            self.expect(Tok::Dot)?;
            return Ok(Statement::Populate(Populate { pred, logvar }));
        }
        match head {
            Tok::Question => {
                self.next();
                let a = self.atom()?;
                self.expect(Tok::Dot)?;
                Ok(Statement::Choice(None, a))
            }
            Tok::Number(p, _) => {
                self.next();
                let a = self.atom()?;
                self.expect(Tok::Dot)?;
                Ok(Statement::Choice(Some(p), a))
            }
            Tok::Ident(_) => {
                let head = self.atom()?;
                match self.peek().tok {
                    Tok::Dot => {
                        self.next();
                        Ok(Statement::Fact(head))
                    }
                    Tok::Implies => {
                        self.next();
                        let mut body = vec![self.atom()?];
                        while matches!(self.peek().tok, Tok::Amp | Tok::Comma) {
                            self.next();
                            body.push(self.atom()?);
                        }
                        self.expect(Tok::Dot)?;
                        Ok(Statement::Rule(Rule { head, body }))
                    }
                    _ => self.fail("`.` or `:-`"),
                }
            }
            _ => self.fail("a statement"),
        }
    }
}

pub(super) fn statements(text: &str) -> Result<Vec<Located>> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut out = Vec::new();
    while p.peek().tok != Tok::Eof {
        let (line, column) = (p.peek().line, p.peek().column);
        let statement = p.statement()?;
        out.push(Located {
            statement,
            line,
            column,
        });
    }
    Ok(out)
}
