//! Event-semantics formula fragment: AST, parser, and printing.
//!
//! Grammar (ASCII):
//!
//! ```text
//! formula := quant | impl
//! quant   := ("exists" | "forall") var+ "." formula
//! impl    := conj ["->" formula]
//! conj    := unary {"&" unary}
//! unary   := "~" unary | atom | "(" formula ")"
//! atom    := ident "(" term {"," term} ")"
//! ```
//!
//! Identifiers match `[a-z_][a-z0-9_-]*`. Every identifier in term position
//! must be bound by an enclosing quantifier; constants (such as skolem
//! witnesses) only enter formulas programmatically, never from source text.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogicError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unbound variable `{name}`")]
    UnboundVariable { line: usize, col: usize, name: String },
    #[error("predicate `{name}` used with arity {second} after arity {first}")]
    ArityConflict { name: String, first: usize, second: usize },
    #[error("{line}:{col}: predicate `{name}` has arity {arity}; only 1 or 2 supported")]
    ArityUnsupported { line: usize, col: usize, name: String, arity: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn name(&self) -> &str {
        match self {
            Term::Var(n) | Term::Const(n) => n,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Pred(String, Vec<Term>),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<String>, Box<Formula>),
    Forall(Vec<String>, Box<Formula>),
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn exists<S: Into<String>>(vars: Vec<S>, body: Formula) -> Formula {
        Formula::Exists(vars.into_iter().map(Into::into).collect(), Box::new(body))
    }

    pub fn pred1(name: impl Into<String>, arg: Term) -> Formula {
        Formula::Pred(name.into(), vec![arg])
    }

    pub fn pred2(name: impl Into<String>, a: Term, b: Term) -> Formula {
        Formula::Pred(name.into(), vec![a, b])
    }

    /// Conjoins a nonempty list left to right.
    pub fn conjoin(mut parts: Vec<Formula>) -> Formula {
        let mut acc = parts.remove(0);
        for p in parts {
            acc = Formula::and(acc, p);
        }
        acc
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Pred(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Formula::Not(inner) => match **inner {
                Formula::Pred(..) | Formula::Not(..) => write!(f, "~{inner}"),
                _ => write!(f, "~({inner})"),
            },
            Formula::And(a, b) => {
                let wrap = |g: &Formula| !matches!(g, Formula::Pred(..) | Formula::Not(..) | Formula::And(..));
                if wrap(a) {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " & ")?;
                if wrap(b) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Formula::Implies(a, b) => {
                if matches!(**a, Formula::Implies(..) | Formula::Exists(..) | Formula::Forall(..)) {
                    write!(f, "({a}) -> {b}")
                } else {
                    write!(f, "{a} -> {b}")
                }
            }
            Formula::Exists(vars, body) => write!(f, "exists {}. {body}", vars.join(" ")),
            Formula::Forall(vars, body) => write!(f, "forall {}. {body}", vars.join(" ")),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Exists,
    Forall,
    Dot,
    Arrow,
    Amp,
    Tilde,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Exists => write!(f, "`exists`"),
            Tok::Forall => write!(f, "`forall`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Amp => write!(f, "`&`"),
            Tok::Tilde => write!(f, "`~`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, LogicError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let mut advance = |i: &mut usize, line: &mut usize, col: &mut usize| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => advance(&mut i, &mut line, &mut col),
            '.' => {
                out.push(Spanned { tok: Tok::Dot, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col);
            }
            '&' => {
                out.push(Spanned { tok: Tok::Amp, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col);
            }
            '~' => {
                out.push(Spanned { tok: Tok::Tilde, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col);
            }
            '(' => {
                out.push(Spanned { tok: Tok::LParen, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col);
            }
            ')' => {
                out.push(Spanned { tok: Tok::RParen, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col);
            }
            ',' => {
                out.push(Spanned { tok: Tok::Comma, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col);
            }
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    out.push(Spanned { tok: Tok::Arrow, line: tline, col: tcol });
                    advance(&mut i, &mut line, &mut col);
                    advance(&mut i, &mut line, &mut col);
                } else {
                    return Err(LogicError::Syntax {
                        line: tline,
                        col: tcol,
                        msg: "stray `-` (expected `->`)".into(),
                    });
                }
            }
            'a'..='z' | '_' => {
                let mut name = String::new();
                while i < chars.len() {
                    let c = chars[i];
                    let ident_char = matches!(c, 'a'..='z' | '0'..='9' | '_')
                        || (c == '-' && chars.get(i + 1) != Some(&'>'));
                    if !ident_char {
                        break;
                    }
                    name.push(c);
                    advance(&mut i, &mut line, &mut col);
                }
                let tok = match name.as_str() {
                    "exists" => Tok::Exists,
                    "forall" => Tok::Forall,
                    _ => Tok::Ident(name),
                };
                out.push(Spanned { tok, line: tline, col: tcol });
            }
            other => {
                return Err(LogicError::Syntax {
                    line: tline,
                    col: tcol,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    /// scope stack of (source name, internal name)
    scopes: Vec<Vec<(String, String)>>,
    /// how many binders have used each source name, for renaming apart
    bound_counts: HashMap<String, usize>,
    arities: HashMap<String, usize>,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<Spanned, LogicError> {
        let got = self.next();
        if &got.tok == want {
            Ok(got)
        } else {
            Err(LogicError::Syntax {
                line: got.line,
                col: got.col,
                msg: format!("expected {want}, found {}", got.tok),
            })
        }
    }

    fn err(&self, msg: impl Into<String>) -> LogicError {
        let t = self.peek();
        LogicError::Syntax { line: t.line, col: t.col, msg: msg.into() }
    }

    /// Pushes binders, renaming apart when a source name was bound before.
    fn bind(&mut self, vars: &[String]) -> Vec<String> {
        let mut scope = Vec::with_capacity(vars.len());
        let mut internal = Vec::with_capacity(vars.len());
        for v in vars {
            let count = self.bound_counts.entry(v.clone()).or_insert(0);
            let name = if *count == 0 { v.clone() } else { format!("{v}__{count}") };
            *count += 1;
            scope.push((v.clone(), name.clone()));
            internal.push(name);
        }
        self.scopes.push(scope);
        internal
    }

    fn lookup(&self, name: &str) -> Option<&str> {
        for scope in self.scopes.iter().rev() {
            for (source, internal) in scope.iter().rev() {
                if source == name {
                    return Some(internal);
                }
            }
        }
        None
    }

    fn formula(&mut self) -> Result<Formula, LogicError> {
        match self.peek().tok {
            Tok::Exists | Tok::Forall => self.quantified(),
            _ => self.implication(),
        }
    }

    fn quantified(&mut self) -> Result<Formula, LogicError> {
        let quant = self.next();
        let mut vars = Vec::new();
        while let Tok::Ident(name) = &self.peek().tok {
            vars.push(name.clone());
            self.next();
        }
        if vars.is_empty() {
            return Err(self.err("quantifier needs at least one variable"));
        }
        self.expect(&Tok::Dot)?;
        let internal = self.bind(&vars);
        let body = self.formula()?;
        self.scopes.pop();
        Ok(match quant.tok {
            Tok::Exists => Formula::Exists(internal, Box::new(body)),
            Tok::Forall => Formula::Forall(internal, Box::new(body)),
            _ => unreachable!("caller checked quantifier token"),
        })
    }

    fn implication(&mut self) -> Result<Formula, LogicError> {
        let lhs = self.conjunction()?;
        if self.peek().tok == Tok::Arrow {
            self.next();
            let rhs = self.formula()?;
            Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn conjunction(&mut self) -> Result<Formula, LogicError> {
        let mut acc = self.unary()?;
        while self.peek().tok == Tok::Amp {
            self.next();
            let rhs = self.unary()?;
            acc = Formula::and(acc, rhs);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Formula, LogicError> {
        match &self.peek().tok {
            Tok::Tilde => {
                self.next();
                Ok(Formula::not(self.unary()?))
            }
            Tok::LParen => {
                self.next();
                let inner = self.formula()?;
                self.expect(&Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(_) => self.atom(),
            _ => Err(self.err(format!("expected a formula, found {}", self.peek().tok))),
        }
    }

    fn atom(&mut self) -> Result<Formula, LogicError> {
        let head = self.next();
        let Tok::Ident(name) = head.tok else {
            return Err(LogicError::Syntax {
                line: head.line,
                col: head.col,
                msg: "expected a predicate name".into(),
            });
        };
        self.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        loop {
            let t = self.next();
            let arg = match t.tok {
                Tok::Ident(arg) => arg,
                other => {
                    return Err(LogicError::Syntax {
                        line: t.line,
                        col: t.col,
                        msg: format!("expected a term, found {other}"),
                    })
                }
            };
            match self.lookup(&arg) {
                Some(internal) => args.push(Term::Var(internal.to_owned())),
                None => {
                    return Err(LogicError::UnboundVariable { line: t.line, col: t.col, name: arg })
                }
            }
            match self.next() {
                Spanned { tok: Tok::Comma, .. } => continue,
                Spanned { tok: Tok::RParen, .. } => break,
                other => {
                    return Err(LogicError::Syntax {
                        line: other.line,
                        col: other.col,
                        msg: format!("expected `,` or `)`, found {}", other.tok),
                    })
                }
            }
        }
        if args.len() > 2 {
            return Err(LogicError::ArityUnsupported {
                line: head.line,
                col: head.col,
                name,
                arity: args.len(),
            });
        }
        match self.arities.get(&name) {
            Some(&first) if first != args.len() => {
                return Err(LogicError::ArityConflict { name, first, second: args.len() })
            }
            _ => {
                self.arities.insert(name.clone(), args.len());
            }
        }
        Ok(Formula::Pred(name, args))
    }
}

/// Parses one closed formula; bound variables are alpha-renamed apart.
pub fn parse_formula(text: &str) -> Result<Formula, LogicError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        scopes: Vec::new(),
        bound_counts: HashMap::new(),
        arities: HashMap::new(),
    };
    let formula = parser.formula()?;
    let end = parser.peek().clone();
    if end.tok != Tok::Eof {
        return Err(LogicError::Syntax {
            line: end.line,
            col: end.col,
            msg: format!("unexpected {} after formula", end.tok),
        });
    }
    Ok(formula)
}

/// Checks arity consistency for a group of formulas that share a problem.
pub fn check_arities(formulas: &[&Formula]) -> Result<(), LogicError> {
    fn walk(f: &Formula, arities: &mut HashMap<String, usize>) -> Result<(), LogicError> {
        match f {
            Formula::Pred(name, args) => match arities.get(name) {
                Some(&first) if first != args.len() => Err(LogicError::ArityConflict {
                    name: name.clone(),
                    first,
                    second: args.len(),
                }),
                _ => {
                    arities.insert(name.clone(), args.len());
                    Ok(())
                }
            },
            Formula::Not(inner) => walk(inner, arities),
            Formula::And(a, b) | Formula::Implies(a, b) => {
                walk(a, arities)?;
                walk(b, arities)
            }
            Formula::Exists(_, body) | Formula::Forall(_, body) => walk(body, arities),
        }
    }
    let mut arities = HashMap::new();
    for f in formulas {
        walk(f, &mut arities)?;
    }
    Ok(())
}
