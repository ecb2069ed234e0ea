//! Recursive-descent parser for the model description language.
//!
//! Operator precedence, loosest to tightest:
//! `<=>` (left), `=>` (right), `or`, `and`, `not`, comparisons,
//! `+`/`-`, `*`. Quantifier bodies extend as far right as possible, so a
//! quantifier used as an operand must be parenthesized. `a > b` and
//! `a >= b` are accepted and normalised to `b < a` / `b <= a`.

use crate::model::expr::{Expr, Span};
use crate::model::{
    has_errors, sort_diagnostics, validate_machine, validate_spec, Clause, ConstDecl, Diagnostic,
    Domain, EventDef, EventKind, Machine, ParamDecl, Radius, SymbolTable, UncertaintySpec, VarDecl,
};

use super::lexer::{lex, Kw, Sigil, Tok, Token};

/// Everything found in one source text.
#[derive(Debug, Default)]
pub struct SourceFile {
    pub machines: Vec<Machine>,
    pub uncertainties: Vec<UncertaintySpec>,
    pub diagnostics: Vec<Diagnostic>,
}

impl SourceFile {
    pub fn machine(&self, name: &str) -> Option<&Machine> {
        self.machines.iter().find(|m| m.name == name)
    }

    pub fn uncertainty(&self, name: &str) -> Option<&UncertaintySpec> {
        self.uncertainties.iter().find(|u| u.name == name)
    }
}

/// Parses without validating; diagnostics contain syntax errors only.
pub fn parse_source(text: &str) -> SourceFile {
    let (tokens, mut diags) = lex(text);
    let mut parser = Parser { toks: &tokens, pos: 0, diags: Vec::new() };
    let mut machines = Vec::new();
    let mut uncertainties = Vec::new();
    loop {
        match parser.peek() {
            Tok::Eof => break,
            Tok::Kw(Kw::Machine) => {
                if let Some(m) = parser.machine() {
                    machines.push(m);
                } else {
                    parser.recover_to_top_level();
                }
            }
            Tok::Kw(Kw::Uncertainty) => {
                if let Some(u) = parser.uncertainty() {
                    uncertainties.push(u);
                } else {
                    parser.recover_to_top_level();
                }
            }
            other => {
                let msg = format!("expected `machine` or `uncertainty`, found {other}");
                let span = parser.span();
                parser.diags.push(Diagnostic::error(span, msg));
                parser.recover_to_top_level();
            }
        }
    }
    diags.extend(parser.diags);
    sort_diagnostics(&mut diags);
    SourceFile { machines, uncertainties, diagnostics: diags }
}

/// Parses and validates. Entities are only returned when the text is free
/// of errors (warnings pass through).
pub fn load_source(text: &str) -> Result<SourceFile, Vec<Diagnostic>> {
    let mut file = parse_source(text);
    if has_errors(&file.diagnostics) {
        return Err(file.diagnostics);
    }
    for m in &file.machines {
        file.diagnostics.extend(validate_machine(m));
    }
    for u in &file.uncertainties {
        if let Some(m) = file.machines.iter().find(|m| m.name == u.machine) {
            file.diagnostics.extend(validate_spec(u, m));
        }
    }
    sort_diagnostics(&mut file.diagnostics);
    if has_errors(&file.diagnostics) {
        return Err(file.diagnostics);
    }
    Ok(file)
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    diags: Vec<Diagnostic>,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> &'t Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> &'t Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&mut self, msg: impl Into<String>) {
        let span = self.span();
        self.diags.push(Diagnostic::error(span, msg));
    }

    fn expect(&mut self, tok: Tok) -> Option<Span> {
        if *self.peek() == tok {
            Some(self.bump().span)
        } else {
            let found = self.peek().clone();
            self.error_here(format!("expected {tok}, found {found}"));
            None
        }
    }

    fn expect_kw(&mut self, kw: Kw) -> Option<Span> {
        self.expect(Tok::Kw(kw))
    }

    /// A plain (sigil-free, unprimed) name.
    fn plain_name(&mut self, what: &str) -> Option<(String, Span)> {
        match self.peek() {
            Tok::Name { sigil: Sigil::None, text, primed: false } => {
                let text = text.clone();
                let span = self.bump().span;
                Some((text, span))
            }
            other => {
                let msg = format!("expected {what}, found {other}");
                self.error_here(msg);
                None
            }
        }
    }

    fn recover_to_top_level(&mut self) {
        loop {
            match self.peek() {
                Tok::Eof | Tok::Kw(Kw::Machine) | Tok::Kw(Kw::Uncertainty) => break,
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn int_lit(&mut self) -> Option<i64> {
        match *self.peek() {
            Tok::Int(n) => {
                self.bump();
                Some(n)
            }
            Tok::Minus => {
                self.bump();
                match *self.peek() {
                    Tok::Int(n) => {
                        self.bump();
                        Some(-n)
                    }
                    ref other => {
                        let msg = format!("expected an integer after `-`, found {other}");
                        self.error_here(msg);
                        None
                    }
                }
            }
            ref other => {
                let msg = format!("expected an integer, found {other}");
                self.error_here(msg);
                None
            }
        }
    }

    fn int_range(&mut self) -> Option<(i64, i64)> {
        self.expect(Tok::LBracket)?;
        let lo = self.int_lit()?;
        self.expect(Tok::DotDot)?;
        let hi = self.int_lit()?;
        self.expect(Tok::RBracket)?;
        Some((lo, hi))
    }

    fn domain(&mut self, symbols: &mut SymbolTable) -> Option<Domain> {
        match self.peek() {
            Tok::Kw(Kw::Int) => {
                self.bump();
                let (lo, hi) = self.int_range()?;
                Some(Domain::Int { lo, hi })
            }
            Tok::LBrace => {
                self.bump();
                let mut vals = Vec::new();
                loop {
                    let (name, _) = self.plain_name("an enumeration value")?;
                    vals.push(symbols.intern(&name));
                    match self.peek() {
                        Tok::Comma => {
                            self.bump();
                        }
                        Tok::RBrace => {
                            self.bump();
                            break;
                        }
                        other => {
                            let msg = format!("expected `,` or `}}`, found {other}");
                            self.error_here(msg);
                            return None;
                        }
                    }
                }
                Some(Domain::Enum(vals))
            }
            other => {
                let msg = format!("expected a domain (`int[lo..hi]` or `{{ .. }}`), found {other}");
                self.error_here(msg);
                None
            }
        }
    }

    fn const_decl(&mut self) -> Option<ConstDecl> {
        let span = self.expect_kw(Kw::Const)?;
        let (name, _) = self.plain_name("a constant name")?;
        self.expect(Tok::Colon)?;
        self.expect_kw(Kw::Int)?;
        let (lo, hi) = self.int_range()?;
        Some(ConstDecl { name, lo, hi, span })
    }

    fn machine(&mut self) -> Option<Machine> {
        self.expect_kw(Kw::Machine)?;
        let (name, _) = self.plain_name("a machine name")?;
        let mut symbols = SymbolTable::new();
        let mut vars: Vec<VarDecl> = Vec::new();
        let mut consts: Vec<ConstDecl> = Vec::new();
        let mut init: Option<Expr> = None;
        let mut safety: Option<Expr> = None;
        let mut uncertain: Option<Expr> = None;
        let mut events: Vec<EventDef> = Vec::new();
        loop {
            match self.peek() {
                Tok::Kw(Kw::End) => {
                    self.bump();
                    break;
                }
                Tok::Kw(Kw::Const) => {
                    consts.push(self.const_decl()?);
                }
                Tok::Kw(Kw::Var) => {
                    let span = self.bump().span;
                    let (vname, _) = self.var_name()?;
                    self.expect(Tok::Colon)?;
                    let domain = self.domain(&mut symbols)?;
                    vars.push(VarDecl { name: vname, domain, span });
                }
                Tok::Kw(Kw::Init) => {
                    let span = self.bump().span;
                    let e = self.expr()?;
                    if init.replace(e).is_some() {
                        self.diags.push(Diagnostic::error(span, "duplicate `init` section"));
                    }
                }
                Tok::Kw(Kw::Safety) => {
                    let span = self.bump().span;
                    let e = self.expr()?;
                    if safety.replace(e).is_some() {
                        self.diags.push(Diagnostic::error(span, "duplicate `safety` section"));
                    }
                }
                Tok::Kw(Kw::Uncertain) => {
                    let span = self.bump().span;
                    let e = self.expr()?;
                    if uncertain.replace(e).is_some() {
                        self.diags.push(Diagnostic::error(span, "duplicate `uncertain` section"));
                    }
                }
                Tok::Kw(k @ (Kw::Plant | Kw::Ctrl)) => {
                    let kind = if *k == Kw::Plant { EventKind::Plant } else { EventKind::Ctrl };
                    events.push(self.event(kind, &mut symbols)?);
                }
                other => {
                    let msg = format!(
                        "expected `const`, `var`, `init`, `safety`, `uncertain`, `plant`, `ctrl`, or `end`, found {other}"
                    );
                    self.error_here(msg);
                    return None;
                }
            }
        }
        if vars.is_empty() {
            self.diags.push(Diagnostic::error(self.span(), format!("machine `{name}` declares no variables")));
            return None;
        }
        let Some(init) = init else {
            self.diags.push(Diagnostic::error(self.span(), format!("machine `{name}` has no `init` section")));
            return None;
        };
        let Some(safety) = safety else {
            self.diags.push(Diagnostic::error(self.span(), format!("machine `{name}` has no `safety` section")));
            return None;
        };
        Some(Machine { name, vars, consts, init, safety, uncertain, events, symbols })
    }

    /// Variable declarations admit `^`-prefixed names (perceived copies in a
    /// generated paired machine) in addition to plain names.
    fn var_name(&mut self) -> Option<(String, Span)> {
        match self.peek() {
            Tok::Name { sigil: Sigil::Hat, text, primed: false } => {
                let text = format!("^{text}");
                let span = self.bump().span;
                Some((text, span))
            }
            _ => self.plain_name("a variable name"),
        }
    }

    fn event(&mut self, kind: EventKind, symbols: &mut SymbolTable) -> Option<EventDef> {
        self.bump(); // plant | ctrl
        let span = self.expect_kw(Kw::Event)?;
        let (name, _) = self.plain_name("an event name")?;
        let mut params = Vec::new();
        while *self.peek() == Tok::Kw(Kw::Param) {
            let pspan = self.bump().span;
            let (pname, _) = self.plain_name("a parameter name")?;
            self.expect(Tok::Colon)?;
            let domain = self.domain(symbols)?;
            let mut with_bot = false;
            if *self.peek() == Tok::Pipe {
                self.bump();
                self.expect_kw(Kw::Bot)?;
                with_bot = true;
            }
            params.push(ParamDecl { name: pname, domain, with_bot, span: pspan });
        }
        self.expect_kw(Kw::Guard)?;
        let guard = self.expr()?;
        self.expect_kw(Kw::Action)?;
        let action = self.expr()?;
        self.expect_kw(Kw::End)?;
        Some(EventDef { kind, name, params, guard, action, span })
    }

    fn uncertainty(&mut self) -> Option<UncertaintySpec> {
        let span = self.expect_kw(Kw::Uncertainty)?;
        let (name, _) = self.plain_name("an uncertainty name")?;
        self.expect_kw(Kw::For)?;
        let (machine, _) = self.plain_name("a machine name")?;
        let mut consts = Vec::new();
        let mut clauses = Vec::new();
        let mut relation: Option<Expr> = None;
        loop {
            match self.peek() {
                Tok::Kw(Kw::End) => {
                    self.bump();
                    break;
                }
                Tok::Kw(Kw::Const) => {
                    consts.push(self.const_decl()?);
                }
                Tok::Kw(Kw::Perceives) => {
                    self.bump();
                    let (var, _) = self.plain_name("a variable name")?;
                    match self.peek() {
                        Tok::Kw(Kw::Exactly) => {
                            self.bump();
                            clauses.push((var, Clause::Exact));
                        }
                        Tok::Kw(Kw::Within) => {
                            self.bump();
                            let radius = match self.peek() {
                                Tok::Name { sigil: Sigil::None, text, primed: false } => {
                                    let text = text.clone();
                                    self.bump();
                                    Radius::Const(text)
                                }
                                _ => Radius::Lit(self.int_lit()?),
                            };
                            clauses.push((var, Clause::Within(radius)));
                        }
                        other => {
                            let msg = format!("expected `exactly` or `within`, found {other}");
                            self.error_here(msg);
                            return None;
                        }
                    }
                }
                Tok::Kw(Kw::Relation) => {
                    let rspan = self.bump().span;
                    let e = self.expr()?;
                    if relation.replace(e).is_some() {
                        self.diags.push(Diagnostic::error(rspan, "duplicate `relation` section"));
                    }
                }
                other => {
                    let msg = format!("expected `const`, `perceives`, `relation`, or `end`, found {other}");
                    self.error_here(msg);
                    return None;
                }
            }
        }
        Some(UncertaintySpec { name, machine, consts, clauses, relation, span })
    }

    // ---- expressions ----

    fn expr(&mut self) -> Option<Expr> {
        self.iff_expr()
    }

    fn iff_expr(&mut self) -> Option<Expr> {
        let mut lhs = self.impl_expr()?;
        while *self.peek() == Tok::DoubleArrow {
            let span = self.bump().span;
            let rhs = self.impl_expr()?;
            lhs = Expr {
                kind: crate::model::ExprKind::Bin(crate::model::BoolOp::Iff, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Some(lhs)
    }

    fn impl_expr(&mut self) -> Option<Expr> {
        let lhs = self.or_expr()?;
        if *self.peek() == Tok::Arrow {
            let span = self.bump().span;
            let rhs = self.impl_expr()?;
            return Some(Expr {
                kind: crate::model::ExprKind::Bin(crate::model::BoolOp::Implies, Box::new(lhs), Box::new(rhs)),
                span,
            });
        }
        Some(lhs)
    }

    fn or_expr(&mut self) -> Option<Expr> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::Kw(Kw::Or) {
            let span = self.bump().span;
            let rhs = self.and_expr()?;
            lhs = Expr {
                kind: crate::model::ExprKind::Bin(crate::model::BoolOp::Or, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Some(lhs)
    }

    fn and_expr(&mut self) -> Option<Expr> {
        let mut lhs = self.not_expr()?;
        while *self.peek() == Tok::Kw(Kw::And) {
            let span = self.bump().span;
            let rhs = self.not_expr()?;
            lhs = Expr {
                kind: crate::model::ExprKind::Bin(crate::model::BoolOp::And, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Some(lhs)
    }

    fn not_expr(&mut self) -> Option<Expr> {
        match self.peek() {
            Tok::Kw(Kw::Not) => {
                let span = self.bump().span;
                let inner = self.not_expr()?;
                Some(Expr { kind: crate::model::ExprKind::Not(Box::new(inner)), span })
            }
            Tok::Kw(Kw::Forall | Kw::Exists) => self.quantifier(),
            _ => self.cmp_expr(),
        }
    }

    fn quantifier(&mut self) -> Option<Expr> {
        let (kind, span) = match self.peek() {
            Tok::Kw(Kw::Forall) => (crate::model::QuantKind::Forall, self.bump().span),
            _ => (crate::model::QuantKind::Exists, self.bump().span),
        };
        let var = match self.peek() {
            Tok::Name { sigil: Sigil::Tilde, text, .. } => {
                let v = format!("~{text}");
                self.bump();
                v
            }
            other => {
                let msg = format!("expected a `~`-prefixed bound variable, found {other}");
                self.error_here(msg);
                return None;
            }
        };
        self.expect_kw(Kw::In)?;
        self.expect(Tok::LBracket)?;
        let lo = self.expr()?;
        self.expect(Tok::DotDot)?;
        let hi = self.expr()?;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::Dot)?;
        let body = self.expr()?;
        Some(Expr {
            kind: crate::model::ExprKind::Quant {
                kind,
                var,
                lo: Box::new(lo),
                hi: Box::new(hi),
                body: Box::new(body),
            },
            span,
        })
    }

    fn cmp_expr(&mut self) -> Option<Expr> {
        let lhs = self.arith_expr()?;
        let op = match self.peek() {
            Tok::Eq => Some((crate::model::CmpOp::Eq, false)),
            Tok::Ne => Some((crate::model::CmpOp::Ne, false)),
            Tok::Lt => Some((crate::model::CmpOp::Lt, false)),
            Tok::Le => Some((crate::model::CmpOp::Le, false)),
            Tok::Gt => Some((crate::model::CmpOp::Lt, true)),
            Tok::Ge => Some((crate::model::CmpOp::Le, true)),
            _ => None,
        };
        if let Some((op, swap)) = op {
            let span = self.bump().span;
            let rhs = self.arith_expr()?;
            let (a, b) = if swap { (rhs, lhs) } else { (lhs, rhs) };
            return Some(Expr { kind: crate::model::ExprKind::Cmp(op, Box::new(a), Box::new(b)), span });
        }
        Some(lhs)
    }

    fn arith_expr(&mut self) -> Option<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => crate::model::ArithOp::Add,
                Tok::Minus => crate::model::ArithOp::Sub,
                _ => break,
            };
            let span = self.bump().span;
            let rhs = self.term()?;
            lhs = Expr { kind: crate::model::ExprKind::Arith(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Some(lhs)
    }

    fn term(&mut self) -> Option<Expr> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            let span = self.bump().span;
            let rhs = self.factor()?;
            lhs = Expr {
                kind: crate::model::ExprKind::Arith(crate::model::ArithOp::Mul, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Some(lhs)
    }

    fn factor(&mut self) -> Option<Expr> {
        let span = self.span();
        match self.peek() {
            Tok::Int(n) => {
                let n = *n;
                self.bump();
                Some(Expr { kind: crate::model::ExprKind::Int(n), span })
            }
            Tok::Minus => {
                self.bump();
                match *self.peek() {
                    Tok::Int(n) => {
                        self.bump();
                        Some(Expr { kind: crate::model::ExprKind::Int(-n), span })
                    }
                    ref other => {
                        let msg =
                            format!("`-` may only prefix an integer literal here, found {other}");
                        self.error_here(msg);
                        None
                    }
                }
            }
            Tok::Kw(Kw::True) => {
                self.bump();
                Some(Expr { kind: crate::model::ExprKind::Bool(true), span })
            }
            Tok::Kw(Kw::False) => {
                self.bump();
                Some(Expr { kind: crate::model::ExprKind::Bool(false), span })
            }
            Tok::Kw(Kw::Bot) => {
                self.bump();
                Some(Expr { kind: crate::model::ExprKind::Bot, span })
            }
            Tok::Name { sigil, text, primed } => {
                let name = match sigil {
                    Sigil::None => text.clone(),
                    Sigil::Hat => format!("^{text}"),
                    Sigil::Tilde => format!("~{text}"),
                };
                let primed = *primed;
                self.bump();
                Some(Expr { kind: crate::model::ExprKind::Ref { name, primed }, span })
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                // Keep the inner expression; parentheses are re-derived by
                // the printer from precedence.
                Some(e)
            }
            other => {
                let msg = format!("expected an expression, found {other}");
                self.error_here(msg);
                None
            }
        }
    }
}

/// Convenience: parse a single expression (used by tests and tools).
pub fn parse_expr(text: &str) -> Result<Expr, Vec<Diagnostic>> {
    let (tokens, diags) = lex(text);
    if !diags.is_empty() {
        return Err(diags);
    }
    let mut parser = Parser { toks: &tokens, pos: 0, diags: Vec::new() };
    let e = parser.expr();
    if *parser.peek() != Tok::Eof {
        parser.error_here(format!("unexpected trailing {}", parser.peek()));
    }
    match (e, parser.diags.is_empty()) {
        (Some(e), true) => Ok(e),
        (_, _) => Err(parser.diags),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ExprKind;

    #[test]
    fn precedence_and_normalisation() {
        let e = parse_expr("tn = c => 30 <= temp and temp <= 40").unwrap();
        // top is =>
        match &e.kind {
            ExprKind::Bin(crate::model::BoolOp::Implies, lhs, rhs) => {
                assert!(matches!(lhs.kind, ExprKind::Cmp(crate::model::CmpOp::Eq, _, _)));
                assert!(matches!(rhs.kind, ExprKind::Bin(crate::model::BoolOp::And, _, _)));
            }
            other => panic!("unexpected {other:?}"),
        }
        // > and >= swap operands
        let e = parse_expr("temp > 40").unwrap();
        match &e.kind {
            ExprKind::Cmp(crate::model::CmpOp::Lt, a, b) => {
                assert!(matches!(a.kind, ExprKind::Int(40)));
                assert!(matches!(b.kind, ExprKind::Ref { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quantifier_body_is_maximal() {
        let e = parse_expr("forall ~t in [0..3] . ~t <= 2 and true").unwrap();
        match &e.kind {
            ExprKind::Quant { var, body, .. } => {
                assert_eq!(var, "~t");
                assert!(matches!(body.kind, ExprKind::Bin(crate::model::BoolOp::And, _, _)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_full_machine() {
        let text = "\
machine m
  var tn : { p, c }
  var temp : int[-20..80]
  init tn = c and temp = 30
  safety tn = c => 30 <= temp and temp <= 40
  plant event drift
    param dt : int[-2..2]
    guard true
    action tn' = p and temp' = temp + dt
  end
  ctrl event fix
    param dh : int[0..5] | bot
    guard tn = p
    action tn' = c and temp' = temp
  end
end
";
        let f = load_source(text).unwrap();
        assert_eq!(f.machines.len(), 1);
        let m = &f.machines[0];
        assert_eq!(m.vars.len(), 2);
        assert_eq!(m.events.len(), 2);
        assert!(m.events[1].params[0].with_bot);
    }

    #[test]
    fn parses_uncertainty_block() {
        let text = "\
uncertainty eps for m
  const Delta : int[0..10]
  perceives tn exactly
  perceives temp within Delta
  relation ^temp <= temp + Delta
end
";
        let f = parse_source(text);
        assert!(f.diagnostics.is_empty(), "{:?}", f.diagnostics);
        let u = &f.uncertainties[0];
        assert_eq!(u.consts[0].name, "Delta");
        assert_eq!(u.clauses.len(), 2);
        assert!(u.relation.is_some());
    }

    #[test]
    fn error_recovery_reaches_second_machine() {
        let text = "\
machine broken
  var x : int[0..bad]
machine ok
  var x : int[0..1]
  init x = 0
  safety true
  ctrl event go
    guard true
    action x' = x
  end
end
";
        let f = parse_source(text);
        assert!(!f.diagnostics.is_empty());
        assert_eq!(f.machines.len(), 1);
        assert_eq!(f.machines[0].name, "ok");
    }

    #[test]
    fn load_rejects_validation_errors() {
        let text = "\
machine m
  var x : int[0..1]
  init x = 0
  safety true
  ctrl event go
    guard x' = 1
    action x' = x
  end
end
";
        let err = load_source(text).unwrap_err();
        assert!(err.iter().any(|d| d.message.contains("primed reference")));
    }
}
