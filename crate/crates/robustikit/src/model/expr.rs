//! Expression trees shared by guards, actions, invariants, and uncertainty relations.
//!
//! Expressions are first-order boolean formulas over integer and enumeration
//! values: comparisons, linear-ish arithmetic, boolean connectives, and
//! bounded integer quantifiers. References are resolved by name at evaluation
//! time against the evaluation context (bound quantifier variables, event
//! parameters, state variables, symbolic constants, enumeration literals).

use serde::Serialize;

/// Source position of a syntax node (1-based). Synthetic nodes use 0:0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const SYNTH: Span = Span { line: 0, col: 0 };

    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoolOp {
    And,
    Or,
    Implies,
    Iff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuantKind {
    Forall,
    Exists,
}

/// An expression node. Structural equality ignores source spans so that a
/// pretty-printed and re-parsed tree compares equal to the original.
#[derive(Debug, Clone, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    /// The "no parameter" sentinel admitted by lifted parameter domains.
    Bot,
    /// A named reference; `primed` selects the post-state copy of a variable.
    Ref { name: String, primed: bool },
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Bin(BoolOp, Box<Expr>, Box<Expr>),
    /// Bounded integer quantifier: `forall v in [lo..hi] . body`.
    Quant {
        kind: QuantKind,
        var: String,
        lo: Box<Expr>,
        hi: Box<Expr>,
        body: Box<Expr>,
    },
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn synth(kind: ExprKind) -> Self {
        Expr::new(kind, Span::SYNTH)
    }

    pub fn int(v: i64) -> Self {
        Expr::synth(ExprKind::Int(v))
    }

    pub fn bool(v: bool) -> Self {
        Expr::synth(ExprKind::Bool(v))
    }

    pub fn bot() -> Self {
        Expr::synth(ExprKind::Bot)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::synth(ExprKind::Ref { name: name.into(), primed: false })
    }

    pub fn primed(name: impl Into<String>) -> Self {
        Expr::synth(ExprKind::Ref { name: name.into(), primed: true })
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Self {
        Expr::synth(ExprKind::Cmp(op, Box::new(a), Box::new(b)))
    }

    pub fn eq(a: Expr, b: Expr) -> Self {
        Expr::cmp(CmpOp::Eq, a, b)
    }

    pub fn ne(a: Expr, b: Expr) -> Self {
        Expr::cmp(CmpOp::Ne, a, b)
    }

    pub fn le(a: Expr, b: Expr) -> Self {
        Expr::cmp(CmpOp::Le, a, b)
    }

    pub fn lt(a: Expr, b: Expr) -> Self {
        Expr::cmp(CmpOp::Lt, a, b)
    }

    pub fn arith(op: ArithOp, a: Expr, b: Expr) -> Self {
        Expr::synth(ExprKind::Arith(op, Box::new(a), Box::new(b)))
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::arith(ArithOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::arith(ArithOp::Sub, a, b)
    }

    pub fn not(a: Expr) -> Self {
        Expr::synth(ExprKind::Not(Box::new(a)))
    }

    pub fn bin(op: BoolOp, a: Expr, b: Expr) -> Self {
        Expr::synth(ExprKind::Bin(op, Box::new(a), Box::new(b)))
    }

    pub fn and(a: Expr, b: Expr) -> Self {
        Expr::bin(BoolOp::And, a, b)
    }

    pub fn or(a: Expr, b: Expr) -> Self {
        Expr::bin(BoolOp::Or, a, b)
    }

    pub fn implies(a: Expr, b: Expr) -> Self {
        Expr::bin(BoolOp::Implies, a, b)
    }

    /// Right-leaning conjunction of all expressions; `true` when empty.
    pub fn and_all(mut es: Vec<Expr>) -> Expr {
        match es.len() {
            0 => Expr::bool(true),
            1 => es.pop().unwrap(),
            _ => {
                let mut acc = es.pop().unwrap();
                while let Some(e) = es.pop() {
                    acc = Expr::and(e, acc);
                }
                acc
            }
        }
    }

    /// Right-leaning disjunction of all expressions; `false` when empty.
    pub fn or_all(mut es: Vec<Expr>) -> Expr {
        match es.len() {
            0 => Expr::bool(false),
            1 => es.pop().unwrap(),
            _ => {
                let mut acc = es.pop().unwrap();
                while let Some(e) = es.pop() {
                    acc = Expr::or(e, acc);
                }
                acc
            }
        }
    }

    pub fn forall(var: impl Into<String>, lo: Expr, hi: Expr, body: Expr) -> Expr {
        Expr::synth(ExprKind::Quant {
            kind: QuantKind::Forall,
            var: var.into(),
            lo: Box::new(lo),
            hi: Box::new(hi),
            body: Box::new(body),
        })
    }

    pub fn exists(var: impl Into<String>, lo: Expr, hi: Expr, body: Expr) -> Expr {
        Expr::synth(ExprKind::Quant {
            kind: QuantKind::Exists,
            var: var.into(),
            lo: Box::new(lo),
            hi: Box::new(hi),
            body: Box::new(body),
        })
    }

    /// Flattens a top-level conjunction into its conjuncts (singleton for
    /// non-conjunctions). Borrowed view, no clones.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            match &e.kind {
                ExprKind::Bin(BoolOp::And, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                _ => out.push(e),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Flattens a top-level disjunction into its disjuncts.
    pub fn disjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            match &e.kind {
                ExprKind::Bin(BoolOp::Or, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                _ => out.push(e),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Calls `f(name, primed)` for every free reference in the expression.
    /// Quantifier-bound names are not reported.
    pub fn for_each_free_ref<F: FnMut(&str, bool)>(&self, f: &mut F) {
        fn walk<'a>(e: &'a Expr, bound: &mut Vec<&'a str>, f: &mut impl FnMut(&str, bool)) {
            match &e.kind {
                ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Bot => {}
                ExprKind::Ref { name, primed } => {
                    if *primed || !bound.iter().any(|b| b == name) {
                        f(name, *primed);
                    }
                }
                ExprKind::Cmp(_, a, b) | ExprKind::Arith(_, a, b) | ExprKind::Bin(_, a, b) => {
                    walk(a, bound, f);
                    walk(b, bound, f);
                }
                ExprKind::Not(a) => walk(a, bound, f),
                ExprKind::Quant { var, lo, hi, body, .. } => {
                    walk(lo, bound, f);
                    walk(hi, bound, f);
                    bound.push(var);
                    walk(body, bound, f);
                    bound.pop();
                }
            }
        }
        let mut bound = Vec::new();
        walk(self, &mut bound, f);
    }

    /// True when the expression contains a primed reference.
    pub fn has_primed_ref(&self) -> bool {
        let mut found = false;
        self.for_each_free_ref(&mut |_, primed| found |= primed);
        found
    }

    /// Substitutes free references by replacement expressions. Keys are
    /// `(name, primed)` pairs; quantifier bindings shadow unprimed keys.
    pub fn subst(&self, map: &dyn Fn(&str, bool) -> Option<Expr>) -> Expr {
        fn walk(e: &Expr, bound: &mut Vec<String>, map: &dyn Fn(&str, bool) -> Option<Expr>) -> Expr {
            let kind = match &e.kind {
                ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Bot => e.kind.clone(),
                ExprKind::Ref { name, primed } => {
                    if !*primed && bound.iter().any(|b| b == name) {
                        e.kind.clone()
                    } else if let Some(rep) = map(name, *primed) {
                        return rep;
                    } else {
                        e.kind.clone()
                    }
                }
                ExprKind::Cmp(op, a, b) => ExprKind::Cmp(
                    *op,
                    Box::new(walk(a, bound, map)),
                    Box::new(walk(b, bound, map)),
                ),
                ExprKind::Arith(op, a, b) => ExprKind::Arith(
                    *op,
                    Box::new(walk(a, bound, map)),
                    Box::new(walk(b, bound, map)),
                ),
                ExprKind::Not(a) => ExprKind::Not(Box::new(walk(a, bound, map))),
                ExprKind::Bin(op, a, b) => ExprKind::Bin(
                    *op,
                    Box::new(walk(a, bound, map)),
                    Box::new(walk(b, bound, map)),
                ),
                ExprKind::Quant { kind, var, lo, hi, body } => {
                    let lo = Box::new(walk(lo, bound, map));
                    let hi = Box::new(walk(hi, bound, map));
                    bound.push(var.clone());
                    let body = Box::new(walk(body, bound, map));
                    bound.pop();
                    ExprKind::Quant { kind: *kind, var: var.clone(), lo, hi, body }
                }
            };
            Expr::new(kind, e.span)
        }
        let mut bound = Vec::new();
        walk(self, &mut bound, map)
    }

    /// Conservative constant folding used when synthesizing model text:
    /// literal arithmetic and comparisons, boolean identities, neutral
    /// elements, and collapse of empty or singleton quantifier ranges.
    /// Folding `false and e` to `false` (and dually for `or`) matches the
    /// evaluator's absorption semantics.
    pub fn simplify(&self) -> Expr {
        let span = self.span;
        let kind = match &self.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Bot | ExprKind::Ref { .. } => {
                self.kind.clone()
            }
            ExprKind::Cmp(op, a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                match (&a.kind, &b.kind) {
                    (ExprKind::Int(x), ExprKind::Int(y)) => ExprKind::Bool(match op {
                        CmpOp::Eq => x == y,
                        CmpOp::Ne => x != y,
                        CmpOp::Lt => x < y,
                        CmpOp::Le => x <= y,
                    }),
                    (ExprKind::Bot, ExprKind::Bot) if *op == CmpOp::Eq => ExprKind::Bool(true),
                    (ExprKind::Bot, ExprKind::Bot) if *op == CmpOp::Ne => ExprKind::Bool(false),
                    (ExprKind::Bot, ExprKind::Int(_)) | (ExprKind::Int(_), ExprKind::Bot)
                        if *op == CmpOp::Eq =>
                    {
                        ExprKind::Bool(false)
                    }
                    (ExprKind::Bot, ExprKind::Int(_)) | (ExprKind::Int(_), ExprKind::Bot)
                        if *op == CmpOp::Ne =>
                    {
                        ExprKind::Bool(true)
                    }
                    _ => ExprKind::Cmp(*op, Box::new(a), Box::new(b)),
                }
            }
            ExprKind::Arith(op, a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                match (op, &a.kind, &b.kind) {
                    (ArithOp::Add, ExprKind::Int(x), ExprKind::Int(y)) => {
                        match x.checked_add(*y) {
                            Some(v) => ExprKind::Int(v),
                            None => ExprKind::Arith(*op, Box::new(a), Box::new(b)),
                        }
                    }
                    (ArithOp::Sub, ExprKind::Int(x), ExprKind::Int(y)) => {
                        match x.checked_sub(*y) {
                            Some(v) => ExprKind::Int(v),
                            None => ExprKind::Arith(*op, Box::new(a), Box::new(b)),
                        }
                    }
                    (ArithOp::Mul, ExprKind::Int(x), ExprKind::Int(y)) => {
                        match x.checked_mul(*y) {
                            Some(v) => ExprKind::Int(v),
                            None => ExprKind::Arith(*op, Box::new(a), Box::new(b)),
                        }
                    }
                    (ArithOp::Add, _, ExprKind::Int(0)) | (ArithOp::Sub, _, ExprKind::Int(0)) => {
                        return a;
                    }
                    (ArithOp::Add, ExprKind::Int(0), _) => return b,
                    (ArithOp::Mul, _, ExprKind::Int(1)) => return a,
                    (ArithOp::Mul, ExprKind::Int(1), _) => return b,
                    (ArithOp::Mul, ExprKind::Int(0), _) | (ArithOp::Mul, _, ExprKind::Int(0)) => {
                        ExprKind::Int(0)
                    }
                    _ => ExprKind::Arith(*op, Box::new(a), Box::new(b)),
                }
            }
            ExprKind::Not(a) => {
                let a = a.simplify();
                match a.kind {
                    ExprKind::Bool(v) => ExprKind::Bool(!v),
                    ExprKind::Not(inner) => return *inner,
                    _ => ExprKind::Not(Box::new(a)),
                }
            }
            ExprKind::Bin(op, a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                match (op, &a.kind, &b.kind) {
                    (BoolOp::And, ExprKind::Bool(true), _) => return b,
                    (BoolOp::And, _, ExprKind::Bool(true)) => return a,
                    (BoolOp::And, ExprKind::Bool(false), _)
                    | (BoolOp::And, _, ExprKind::Bool(false)) => ExprKind::Bool(false),
                    (BoolOp::Or, ExprKind::Bool(false), _) => return b,
                    (BoolOp::Or, _, ExprKind::Bool(false)) => return a,
                    (BoolOp::Or, ExprKind::Bool(true), _)
                    | (BoolOp::Or, _, ExprKind::Bool(true)) => ExprKind::Bool(true),
                    (BoolOp::Implies, ExprKind::Bool(true), _) => return b,
                    (BoolOp::Implies, ExprKind::Bool(false), _) => ExprKind::Bool(true),
                    (BoolOp::Implies, _, ExprKind::Bool(true)) => ExprKind::Bool(true),
                    (BoolOp::Iff, ExprKind::Bool(true), _) => return b,
                    (BoolOp::Iff, _, ExprKind::Bool(true)) => return a,
                    _ => ExprKind::Bin(*op, Box::new(a), Box::new(b)),
                }
            }
            ExprKind::Quant { kind, var, lo, hi, body } => {
                let lo = lo.simplify();
                let hi = hi.simplify();
                let body = body.simplify();
                match (&lo.kind, &hi.kind) {
                    (ExprKind::Int(a), ExprKind::Int(b)) if a > b => {
                        ExprKind::Bool(*kind == QuantKind::Forall)
                    }
                    _ if lo == hi => {
                        // Singleton range: replace the bound variable by the
                        // (identical) bound expression.
                        let v = var.clone();
                        let rep = lo.clone();
                        return body
                            .subst(&|name, primed| {
                                (!primed && name == v).then(|| rep.clone())
                            })
                            .simplify();
                    }
                    _ => {
                        if let ExprKind::Bool(v) = body.kind {
                            // Range is nonempty in every remaining case only
                            // when bounds are literals; otherwise keep the
                            // quantifier (an empty symbolic range must still
                            // evaluate correctly).
                            if let (ExprKind::Int(a), ExprKind::Int(b)) = (&lo.kind, &hi.kind) {
                                if a <= b {
                                    ExprKind::Bool(v)
                                } else {
                                    unreachable!("covered by the a > b arm")
                                }
                            } else {
                                ExprKind::Quant {
                                    kind: *kind,
                                    var: var.clone(),
                                    lo: Box::new(lo),
                                    hi: Box::new(hi),
                                    body: Box::new(body),
                                }
                            }
                        } else {
                            ExprKind::Quant {
                                kind: *kind,
                                var: var.clone(),
                                lo: Box::new(lo),
                                hi: Box::new(hi),
                                body: Box::new(body),
                            }
                        }
                    }
                }
            }
        };
        Expr::new(kind, span)
    }
}
