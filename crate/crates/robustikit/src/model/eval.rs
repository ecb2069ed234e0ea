//! Expression evaluation over concrete states, parameters, and constant
//! bindings.
//!
//! Resolution order for a bare name: quantifier-bound variables (innermost
//! first), event parameters, extra bindings supplied by the caller, state
//! variables, symbolic constants, enumeration constants. Validation rejects
//! models where these namespaces collide, so the order is a formality.
//!
//! `and`/`or` evaluate with absorption: a `false` conjunct makes the
//! conjunction false (and dually `true` for disjunctions) even when a sibling
//! operand fails to evaluate. This keeps verdicts independent of conjunct
//! evaluation order, which the checkers exploit to evaluate cheap
//! state-dependent conjuncts before parameter-dependent ones.

use thiserror::Error;

use super::expr::{ArithOp, BoolOp, CmpOp, Expr, ExprKind, QuantKind};
use super::{ConstBinding, Machine, State, SymId, Value};

/// Runtime value of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Val {
    Int(i64),
    Sym(SymId),
    Bool(bool),
    Bot,
}

impl Val {
    pub fn from_value(v: Value) -> Val {
        match v {
            Value::Int(i) => Val::Int(i),
            Value::Sym(s) => Val::Sym(s),
            Value::Bot => Val::Bot,
        }
    }

    pub fn to_value(self) -> Option<Value> {
        match self {
            Val::Int(i) => Some(Value::Int(i)),
            Val::Sym(s) => Some(Value::Sym(s)),
            Val::Bot => Some(Value::Bot),
            Val::Bool(_) => None,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("unknown identifier `{name}`")]
    Unbound { name: String },
    #[error("primed reference `{name}'` outside an action context")]
    PrimedOutsideAction { name: String },
    #[error("type mismatch in {context}")]
    Type { context: String },
    #[error("arithmetic on `bot`")]
    BotArith,
    #[error("integer overflow during evaluation")]
    Overflow,
    #[error("quantifier range of size {size} exceeds the evaluation limit {max}")]
    QuantRange { size: u128, max: u128 },
    #[error("symbolic constant `{name}` has no concrete value; bind it with --set {name}=<value>")]
    UnboundConst { name: String },
    #[error("`{name}` is not a declared symbolic constant")]
    UnknownConst { name: String },
    #[error("value {value} for symbolic constant `{name}` is outside its domain [{lo}..{hi}]")]
    ConstOutOfDomain { name: String, value: i64, lo: i64, hi: i64 },
}

/// Evaluation limits; guards against runaway quantifier ranges when symbolic
/// bounds produce huge intervals.
#[derive(Debug, Clone, Copy)]
pub struct EvalLimits {
    pub max_quant_range: u128,
}

impl Default for EvalLimits {
    fn default() -> Self {
        EvalLimits { max_quant_range: 1_000_000 }
    }
}

/// Evaluation context. All slices borrow from the caller; `bound` is the
/// quantifier stack managed during evaluation.
pub struct EvalCtx<'a> {
    pub machine: &'a Machine,
    pub state: Option<&'a State>,
    pub primed: Option<&'a State>,
    pub params: &'a [(&'a str, Value)],
    pub consts: &'a ConstBinding,
    /// Extra named bindings checked after parameters (used e.g. to bind
    /// perceived-copy names when evaluating an uncertainty relation against
    /// an unpaired machine).
    pub extra: &'a [(&'a str, Value)],
    pub limits: EvalLimits,
    bound: Vec<(String, i64)>,
}

impl<'a> EvalCtx<'a> {
    pub fn new(machine: &'a Machine, consts: &'a ConstBinding) -> Self {
        EvalCtx {
            machine,
            state: None,
            primed: None,
            params: &[],
            consts,
            extra: &[],
            limits: EvalLimits::default(),
            bound: Vec::new(),
        }
    }

    pub fn with_state(mut self, s: &'a State) -> Self {
        self.state = Some(s);
        self
    }

    pub fn with_primed(mut self, s: &'a State) -> Self {
        self.primed = Some(s);
        self
    }

    pub fn with_params(mut self, params: &'a [(&'a str, Value)]) -> Self {
        self.params = params;
        self
    }

    pub fn with_extra(mut self, extra: &'a [(&'a str, Value)]) -> Self {
        self.extra = extra;
        self
    }

    fn lookup(&self, name: &str, primed: bool) -> Result<Val, EvalError> {
        if primed {
            return match self.machine.var_index(name) {
                Some(i) => match self.primed {
                    Some(p) => Ok(Val::from_value(p.0[i])),
                    None => Err(EvalError::PrimedOutsideAction { name: name.to_string() }),
                },
                None => Err(EvalError::Unbound { name: format!("{name}'") }),
            };
        }
        for (n, v) in self.bound.iter().rev() {
            if n == name {
                return Ok(Val::Int(*v));
            }
        }
        for (n, v) in self.params {
            if *n == name {
                return Ok(Val::from_value(*v));
            }
        }
        for (n, v) in self.extra {
            if *n == name {
                return Ok(Val::from_value(*v));
            }
        }
        if let Some(i) = self.machine.var_index(name) {
            return match self.state {
                Some(s) => Ok(Val::from_value(s.0[i])),
                None => Err(EvalError::Unbound { name: name.to_string() }),
            };
        }
        if self.machine.const_decl(name).is_some() || self.consts.contains_key(name) {
            return match self.consts.get(name) {
                Some(v) => Ok(Val::Int(*v)),
                None => Err(EvalError::UnboundConst { name: name.to_string() }),
            };
        }
        if let Some(id) = self.machine.symbols.lookup(name) {
            return Ok(Val::Sym(id));
        }
        Err(EvalError::Unbound { name: name.to_string() })
    }
}

fn as_int(v: Val, context: &str) -> Result<i64, EvalError> {
    match v {
        Val::Int(i) => Ok(i),
        Val::Bot => Err(EvalError::BotArith),
        _ => Err(EvalError::Type { context: context.to_string() }),
    }
}

fn as_bool(v: Val, context: &str) -> Result<bool, EvalError> {
    match v {
        Val::Bool(b) => Ok(b),
        _ => Err(EvalError::Type { context: context.to_string() }),
    }
}

/// Evaluates an expression to a runtime value.
pub fn eval(ctx: &mut EvalCtx, e: &Expr) -> Result<Val, EvalError> {
    match &e.kind {
        ExprKind::Int(v) => Ok(Val::Int(*v)),
        ExprKind::Bool(v) => Ok(Val::Bool(*v)),
        ExprKind::Bot => Ok(Val::Bot),
        ExprKind::Ref { name, primed } => ctx.lookup(name, *primed),
        ExprKind::Arith(op, a, b) => {
            let x = as_int(eval(ctx, a)?, "arithmetic")?;
            let y = as_int(eval(ctx, b)?, "arithmetic")?;
            let r = match op {
                ArithOp::Add => x.checked_add(y),
                ArithOp::Sub => x.checked_sub(y),
                ArithOp::Mul => x.checked_mul(y),
            };
            r.map(Val::Int).ok_or(EvalError::Overflow)
        }
        ExprKind::Cmp(op, a, b) => {
            let x = eval(ctx, a)?;
            let y = eval(ctx, b)?;
            let r = match op {
                CmpOp::Eq | CmpOp::Ne => {
                    let eq = match (x, y) {
                        (Val::Int(i), Val::Int(j)) => i == j,
                        (Val::Sym(i), Val::Sym(j)) => i == j,
                        (Val::Bot, Val::Bot) => true,
                        (Val::Bot, Val::Int(_) | Val::Sym(_)) => false,
                        (Val::Int(_) | Val::Sym(_), Val::Bot) => false,
                        _ => return Err(EvalError::Type { context: "equality".to_string() }),
                    };
                    if *op == CmpOp::Eq {
                        eq
                    } else {
                        !eq
                    }
                }
                CmpOp::Lt => as_int(x, "comparison")? < as_int(y, "comparison")?,
                CmpOp::Le => as_int(x, "comparison")? <= as_int(y, "comparison")?,
            };
            Ok(Val::Bool(r))
        }
        ExprKind::Not(a) => Ok(Val::Bool(!as_bool(eval(ctx, a)?, "not")?)),
        ExprKind::Bin(op, a, b) => match op {
            BoolOp::And => {
                match eval(ctx, a) {
                    Ok(Val::Bool(false)) => Ok(Val::Bool(false)),
                    Ok(Val::Bool(true)) => Ok(Val::Bool(as_bool(eval(ctx, b)?, "and")?)),
                    Ok(_) => Err(EvalError::Type { context: "and".to_string() }),
                    Err(err) => match eval(ctx, b) {
                        // Absorption: a false operand decides the conjunction
                        // even when the other operand fails to evaluate.
                        Ok(Val::Bool(false)) => Ok(Val::Bool(false)),
                        _ => Err(err),
                    },
                }
            }
            BoolOp::Or => match eval(ctx, a) {
                Ok(Val::Bool(true)) => Ok(Val::Bool(true)),
                Ok(Val::Bool(false)) => Ok(Val::Bool(as_bool(eval(ctx, b)?, "or")?)),
                Ok(_) => Err(EvalError::Type { context: "or".to_string() }),
                Err(err) => match eval(ctx, b) {
                    Ok(Val::Bool(true)) => Ok(Val::Bool(true)),
                    _ => Err(err),
                },
            },
            BoolOp::Implies => match eval(ctx, a) {
                Ok(Val::Bool(false)) => Ok(Val::Bool(true)),
                Ok(Val::Bool(true)) => Ok(Val::Bool(as_bool(eval(ctx, b)?, "implies")?)),
                Ok(_) => Err(EvalError::Type { context: "implies".to_string() }),
                Err(err) => match eval(ctx, b) {
                    Ok(Val::Bool(true)) => Ok(Val::Bool(true)),
                    _ => Err(err),
                },
            },
            BoolOp::Iff => {
                let x = as_bool(eval(ctx, a)?, "iff")?;
                let y = as_bool(eval(ctx, b)?, "iff")?;
                Ok(Val::Bool(x == y))
            }
        },
        ExprKind::Quant { kind, var, lo, hi, body } => {
            let lo = as_int(eval(ctx, lo)?, "quantifier bound")?;
            let hi = as_int(eval(ctx, hi)?, "quantifier bound")?;
            if lo > hi {
                return Ok(Val::Bool(*kind == QuantKind::Forall));
            }
            let size = (hi as i128 - lo as i128 + 1) as u128;
            if size > ctx.limits.max_quant_range {
                return Err(EvalError::QuantRange { size, max: ctx.limits.max_quant_range });
            }
            let mut pending_err: Option<EvalError> = None;
            ctx.bound.push((var.clone(), lo));
            let idx = ctx.bound.len() - 1;
            let mut result = *kind == QuantKind::Forall;
            for v in lo..=hi {
                ctx.bound[idx].1 = v;
                match eval(ctx, body) {
                    Ok(Val::Bool(b)) => {
                        if b != (*kind == QuantKind::Forall) {
                            // Witness (exists) or countercase (forall)
                            // decides, absorbing sibling errors.
                            result = b;
                            pending_err = None;
                            break;
                        }
                    }
                    Ok(_) => {
                        pending_err.get_or_insert(EvalError::Type {
                            context: "quantifier body".to_string(),
                        });
                    }
                    Err(err) => {
                        pending_err.get_or_insert(err);
                    }
                }
            }
            ctx.bound.pop();
            match pending_err {
                Some(err) => Err(err),
                None => Ok(Val::Bool(result)),
            }
        }
    }
}

/// Evaluates an expression expected to be boolean.
pub fn eval_bool(ctx: &mut EvalCtx, e: &Expr) -> Result<bool, EvalError> {
    as_bool(eval(ctx, e)?, "formula")
}

/// Evaluates an expression expected to be a storable value (int/enum/bot).
pub fn eval_value(ctx: &mut EvalCtx, e: &Expr) -> Result<Value, EvalError> {
    eval(ctx, e)?
        .to_value()
        .ok_or(EvalError::Type { context: "value expression".to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstDecl, Domain, EventDef, EventKind, VarDecl};
    use crate::model::expr::Span;

    fn toy_machine() -> Machine {
        let mut symbols = crate::model::SymbolTable::new();
        let p = symbols.intern("p");
        let c = symbols.intern("c");
        Machine {
            name: "toy".to_string(),
            vars: vec![
                VarDecl {
                    name: "tn".to_string(),
                    domain: Domain::Enum(vec![p, c]),
                    span: Span::SYNTH,
                },
                VarDecl {
                    name: "temp".to_string(),
                    domain: Domain::Int { lo: -20, hi: 80 },
                    span: Span::SYNTH,
                },
            ],
            consts: vec![ConstDecl { name: "D".to_string(), lo: 0, hi: 9, span: Span::SYNTH }],
            init: Expr::bool(true),
            safety: Expr::bool(true),
            uncertain: None,
            events: Vec::<EventDef>::new(),
            symbols,
        }
    }

    fn _assert_kinds(_: EventKind) {}

    #[test]
    fn resolves_state_params_consts_and_enums() {
        let m = toy_machine();
        let c_id = m.symbols.lookup("c").unwrap();
        let state = State(vec![Value::Sym(c_id), Value::Int(35)]);
        let consts: ConstBinding = [("D".to_string(), 3)].into_iter().collect();
        let params = [("dh", Value::Int(5))];
        let mut ctx = EvalCtx::new(&m, &consts).with_state(&state).with_params(&params);

        // tn = c and temp + dh <= 40 + D
        let e = Expr::and(
            Expr::eq(Expr::var("tn"), Expr::var("c")),
            Expr::le(
                Expr::add(Expr::var("temp"), Expr::var("dh")),
                Expr::add(Expr::int(40), Expr::var("D")),
            ),
        );
        assert_eq!(eval_bool(&mut ctx, &e), Ok(true));
    }

    #[test]
    fn bounded_quantifiers() {
        let m = toy_machine();
        let consts = ConstBinding::new();
        let state = State(vec![Value::Sym(0), Value::Int(29)]);
        let mut ctx = EvalCtx::new(&m, &consts).with_state(&state);

        // forall q in [temp-3 .. temp+3] . q <= 32
        let e = Expr::forall(
            "~q",
            Expr::sub(Expr::var("temp"), Expr::int(3)),
            Expr::add(Expr::var("temp"), Expr::int(3)),
            Expr::le(Expr::var("~q"), Expr::int(32)),
        );
        assert_eq!(eval_bool(&mut ctx, &e), Ok(true));

        let e = Expr::exists(
            "~q",
            Expr::sub(Expr::var("temp"), Expr::int(3)),
            Expr::add(Expr::var("temp"), Expr::int(3)),
            Expr::lt(Expr::int(31), Expr::var("~q")),
        );
        assert_eq!(eval_bool(&mut ctx, &e), Ok(true));

        // Empty range: forall holds, exists fails.
        let e = Expr::forall("~q", Expr::int(5), Expr::int(4), Expr::bool(false));
        assert_eq!(eval_bool(&mut ctx, &e), Ok(true));
        let e = Expr::exists("~q", Expr::int(5), Expr::int(4), Expr::bool(true));
        assert_eq!(eval_bool(&mut ctx, &e), Ok(false));
    }

    #[test]
    fn absorption_masks_sibling_errors() {
        let m = toy_machine();
        let consts = ConstBinding::new();
        let state = State(vec![Value::Sym(0), Value::Int(0)]);
        let mut ctx = EvalCtx::new(&m, &consts).with_state(&state);

        // `unknown` fails to evaluate, but the false conjunct decides.
        let e = Expr::and(Expr::var("nonexistent"), Expr::bool(false));
        assert_eq!(eval_bool(&mut ctx, &e), Ok(false));
        let e = Expr::or(Expr::var("nonexistent"), Expr::bool(true));
        assert_eq!(eval_bool(&mut ctx, &e), Ok(true));
        // Without a deciding operand the error surfaces.
        let e = Expr::and(Expr::var("nonexistent"), Expr::bool(true));
        assert!(eval_bool(&mut ctx, &e).is_err());
    }

    #[test]
    fn bot_equality_and_arith() {
        let m = toy_machine();
        let consts = ConstBinding::new();
        let params = [("dh", Value::Bot)];
        let mut ctx = EvalCtx::new(&m, &consts).with_params(&params);

        assert_eq!(eval_bool(&mut ctx, &Expr::eq(Expr::var("dh"), Expr::bot())), Ok(true));
        assert_eq!(eval_bool(&mut ctx, &Expr::ne(Expr::var("dh"), Expr::bot())), Ok(false));
        assert_eq!(eval_bool(&mut ctx, &Expr::eq(Expr::var("dh"), Expr::int(3))), Ok(false));
        // Arithmetic on bot errors unless absorbed.
        let guarded = Expr::and(
            Expr::ne(Expr::var("dh"), Expr::bot()),
            Expr::le(Expr::add(Expr::var("dh"), Expr::int(1)), Expr::int(10)),
        );
        assert_eq!(eval_bool(&mut ctx, &guarded), Ok(false));
    }

    #[test]
    fn quantifier_range_cap() {
        let m = toy_machine();
        let consts = ConstBinding::new();
        let mut ctx = EvalCtx::new(&m, &consts);
        ctx.limits = EvalLimits { max_quant_range: 10 };
        let e = Expr::forall("~q", Expr::int(0), Expr::int(100), Expr::bool(true));
        assert!(matches!(eval_bool(&mut ctx, &e), Err(EvalError::QuantRange { .. })));
    }
}
