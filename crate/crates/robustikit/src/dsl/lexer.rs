//! Tokenizer for the model description language.
//!
//! Notation: `//` starts a line comment; `^name` is a perceived copy,
//! `~name` a quantifier-bound variable, and a trailing `'` (immediately
//! after the name) the post-state value. Keywords double as statement
//! terminators, so the format needs no semicolons.

use std::fmt;

use crate::model::expr::Span;
use crate::model::{Diagnostic, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Machine,
    End,
    Const,
    Var,
    Init,
    Safety,
    Uncertain,
    Plant,
    Ctrl,
    Event,
    Param,
    Guard,
    Action,
    Uncertainty,
    For,
    Perceives,
    Exactly,
    Within,
    Relation,
    Int,
    Bot,
    True,
    False,
    Not,
    And,
    Or,
    Forall,
    Exists,
    In,
}

impl Kw {
    pub fn as_str(self) -> &'static str {
        match self {
            Kw::Machine => "machine",
            Kw::End => "end",
            Kw::Const => "const",
            Kw::Var => "var",
            Kw::Init => "init",
            Kw::Safety => "safety",
            Kw::Uncertain => "uncertain",
            Kw::Plant => "plant",
            Kw::Ctrl => "ctrl",
            Kw::Event => "event",
            Kw::Param => "param",
            Kw::Guard => "guard",
            Kw::Action => "action",
            Kw::Uncertainty => "uncertainty",
            Kw::For => "for",
            Kw::Perceives => "perceives",
            Kw::Exactly => "exactly",
            Kw::Within => "within",
            Kw::Relation => "relation",
            Kw::Int => "int",
            Kw::Bot => "bot",
            Kw::True => "true",
            Kw::False => "false",
            Kw::Not => "not",
            Kw::And => "and",
            Kw::Or => "or",
            Kw::Forall => "forall",
            Kw::Exists => "exists",
            Kw::In => "in",
        }
    }

    fn from_str(s: &str) -> Option<Kw> {
        Some(match s {
            "machine" => Kw::Machine,
            "end" => Kw::End,
            "const" => Kw::Const,
            "var" => Kw::Var,
            "init" => Kw::Init,
            "safety" => Kw::Safety,
            "uncertain" => Kw::Uncertain,
            "plant" => Kw::Plant,
            "ctrl" => Kw::Ctrl,
            "event" => Kw::Event,
            "param" => Kw::Param,
            "guard" => Kw::Guard,
            "action" => Kw::Action,
            "uncertainty" => Kw::Uncertainty,
            "for" => Kw::For,
            "perceives" => Kw::Perceives,
            "exactly" => Kw::Exactly,
            "within" => Kw::Within,
            "relation" => Kw::Relation,
            "int" => Kw::Int,
            "bot" => Kw::Bot,
            "true" => Kw::True,
            "false" => Kw::False,
            "not" => Kw::Not,
            "and" => Kw::And,
            "or" => Kw::Or,
            "forall" => Kw::Forall,
            "exists" => Kw::Exists,
            "in" => Kw::In,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sigil {
    None,
    Hat,
    Tilde,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Name { sigil: Sigil, text: String, primed: bool },
    Int(i64),
    Kw(Kw),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
    DotDot,
    Pipe,
    Plus,
    Minus,
    Star,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Arrow,
    DoubleArrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name { sigil, text, primed } => {
                let s = match sigil {
                    Sigil::None => "",
                    Sigil::Hat => "^",
                    Sigil::Tilde => "~",
                };
                write!(f, "`{s}{text}{}`", if *primed { "'" } else { "" })
            }
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Kw(k) => write!(f, "`{}`", k.as_str()),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::DotDot => f.write_str("`..`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Ne => f.write_str("`!=`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Ge => f.write_str("`>=`"),
            Tok::Arrow => f.write_str("`=>`"),
            Tok::DoubleArrow => f.write_str("`<=>`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut toks = Vec::new();
    let mut diags = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($tok:expr, $span:expr) => {
            toks.push(Token { tok: $tok, span: $span })
        };
    }

    while i < bytes.len() {
        let c = bytes[i];
        let span = Span { line, col };
        let advance = |i: &mut usize, col: &mut u32| {
            *i += 1;
            *col += 1;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => advance(&mut i, &mut col),
            '/' => {
                if bytes.get(i + 1) == Some(&'/') {
                    while i < bytes.len() && bytes[i] != '\n' {
                        i += 1;
                    }
                } else {
                    diags.push(Diagnostic {
                        severity: Severity::Error,
                        span,
                        message: "unexpected `/` (comments start with `//`)".into(),
                    });
                    advance(&mut i, &mut col);
                }
            }
            '(' => {
                push!(Tok::LParen, span);
                advance(&mut i, &mut col);
            }
            ')' => {
                push!(Tok::RParen, span);
                advance(&mut i, &mut col);
            }
            '[' => {
                push!(Tok::LBracket, span);
                advance(&mut i, &mut col);
            }
            ']' => {
                push!(Tok::RBracket, span);
                advance(&mut i, &mut col);
            }
            '{' => {
                push!(Tok::LBrace, span);
                advance(&mut i, &mut col);
            }
            '}' => {
                push!(Tok::RBrace, span);
                advance(&mut i, &mut col);
            }
            ',' => {
                push!(Tok::Comma, span);
                advance(&mut i, &mut col);
            }
            ':' => {
                push!(Tok::Colon, span);
                advance(&mut i, &mut col);
            }
            '|' => {
                push!(Tok::Pipe, span);
                advance(&mut i, &mut col);
            }
            '+' => {
                push!(Tok::Plus, span);
                advance(&mut i, &mut col);
            }
            '-' => {
                push!(Tok::Minus, span);
                advance(&mut i, &mut col);
            }
            '*' => {
                push!(Tok::Star, span);
                advance(&mut i, &mut col);
            }
            '.' => {
                if bytes.get(i + 1) == Some(&'.') {
                    push!(Tok::DotDot, span);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Dot, span);
                    advance(&mut i, &mut col);
                }
            }
            '=' => {
                if bytes.get(i + 1) == Some(&'>') {
                    push!(Tok::Arrow, span);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Eq, span);
                    advance(&mut i, &mut col);
                }
            }
            '!' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::Ne, span);
                    i += 2;
                    col += 2;
                } else {
                    diags.push(Diagnostic {
                        severity: Severity::Error,
                        span,
                        message: "unexpected `!` (did you mean `!=` or `not`?)".into(),
                    });
                    advance(&mut i, &mut col);
                }
            }
            '<' => {
                if bytes.get(i + 1) == Some(&'=') && bytes.get(i + 2) == Some(&'>') {
                    push!(Tok::DoubleArrow, span);
                    i += 3;
                    col += 3;
                } else if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::Le, span);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Lt, span);
                    advance(&mut i, &mut col);
                }
            }
            '>' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::Ge, span);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Gt, span);
                    advance(&mut i, &mut col);
                }
            }
            '^' | '~' => {
                let sigil = if c == '^' { Sigil::Hat } else { Sigil::Tilde };
                i += 1;
                col += 1;
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                    col += 1;
                }
                if start == i || bytes[start].is_ascii_digit() {
                    diags.push(Diagnostic {
                        severity: Severity::Error,
                        span,
                        message: format!("`{c}` must be followed by a name"),
                    });
                    continue;
                }
                let text: String = bytes[start..i].iter().collect();
                let mut primed = false;
                if sigil == Sigil::Hat && bytes.get(i) == Some(&'\'') {
                    primed = true;
                    i += 1;
                    col += 1;
                }
                if Kw::from_str(&text).is_some() {
                    diags.push(Diagnostic {
                        severity: Severity::Error,
                        span,
                        message: format!("keyword `{text}` cannot be used as a name"),
                    });
                    continue;
                }
                push!(Tok::Name { sigil, text, primed }, span);
            }
            '\'' => {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    span,
                    message: "stray `'` (post-state marks attach directly to a name)".into(),
                });
                advance(&mut i, &mut col);
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                match text.parse::<i64>() {
                    Ok(n) => push!(Tok::Int(n), span),
                    Err(_) => diags.push(Diagnostic {
                        severity: Severity::Error,
                        span,
                        message: format!("integer literal `{text}` is out of range"),
                    }),
                }
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                    col += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                if let Some(kw) = Kw::from_str(&text) {
                    push!(Tok::Kw(kw), span);
                } else {
                    let mut primed = false;
                    if bytes.get(i) == Some(&'\'') {
                        primed = true;
                        i += 1;
                        col += 1;
                    }
                    push!(Tok::Name { sigil: Sigil::None, text, primed }, span);
                }
            }
            _ => {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    span,
                    message: format!("unexpected character `{c}`"),
                });
                advance(&mut i, &mut col);
            }
        }
    }
    toks.push(Token { tok: Tok::Eof, span: Span { line, col } });
    (toks, diags)
}
