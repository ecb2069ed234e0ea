//! Core model types: finite-domain guarded transition systems with a
//! plant/controller event split, plus perceptual-uncertainty descriptions.
//!
//! A machine declares variables over finite domains (integer intervals or
//! enumerations), an initial-states predicate, a safety invariant, optional
//! symbolic integer constants, and guarded parameterized events. Everything
//! downstream (checking, robustification, exploration) consumes this
//! representation immutably.

pub mod enumerate;
pub mod eval;
pub mod expr;
pub mod validate;

use std::collections::HashMap;

pub use enumerate::{
    ball, bind_params, domain_values, enabled_controller_events, enumerate_states, param_values,
    state_rank, state_space_size, state_unrank, successors, ActionPlan, ModelError, Odometer,
    DEFAULT_STATE_CAP,
};
pub use eval::{eval_bool, eval_value, EvalCtx, EvalError, EvalLimits, Val};
pub use validate::{
    has_errors, sort_diagnostics, validate_machine, validate_spec, Diagnostic, Severity,
};
pub use expr::{ArithOp, BoolOp, CmpOp, Expr, ExprKind, QuantKind, Span};

use serde::Serialize;
use std::collections::BTreeMap;

/// Index into a machine's enumeration-constant table.
pub type SymId = u32;

/// Interner for enumeration constants declared in variable/parameter domains.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SymbolTable {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, SymId>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> SymId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as SymId;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<SymId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: SymId) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A single model value: an integer, an enumeration constant, or the lifted
/// "no parameter" sentinel (only ever held by event parameters).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Sym(SymId),
    Bot,
}

impl Value {
    /// Human-readable rendering; enumeration constants need the machine's
    /// symbol table.
    pub fn display(&self, symbols: &SymbolTable) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Sym(id) => symbols.name(*id).to_string(),
            Value::Bot => "bot".to_string(),
        }
    }
}

/// A full valuation of a machine's variables, slot-indexed in declaration
/// order. Ordering is structural and only used for set containers; the
/// canonical enumeration order lives in [`enumerate::enumerate_states`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State(pub Vec<Value>);

impl State {
    /// Renders the state as a name → printed-value map in declaration order.
    pub fn to_named(&self, m: &Machine) -> Vec<(String, String)> {
        self.0
            .iter()
            .zip(&m.vars)
            .map(|(v, d)| (d.name.clone(), v.display(&m.symbols)))
            .collect()
    }
}

/// A finite variable or parameter domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Domain {
    Int { lo: i64, hi: i64 },
    Enum(Vec<SymId>),
}

impl Domain {
    pub fn size(&self) -> u128 {
        match self {
            Domain::Int { lo, hi } => {
                if lo > hi {
                    0
                } else {
                    (*hi as i128 - *lo as i128 + 1) as u128
                }
            }
            Domain::Enum(vs) => vs.len() as u128,
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Domain::Int { lo, hi }, Value::Int(x)) => lo <= x && x <= hi,
            (Domain::Enum(vs), Value::Sym(s)) => vs.contains(s),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub domain: Domain,
    pub span: Span,
}

/// Event parameter declaration. `with_bot` lifts the domain with the "no
/// parameter" sentinel; it only appears on synthesized heterogeneous events
/// (or hand-written models imitating them).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub domain: Domain,
    pub with_bot: bool,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Plant,
    Ctrl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventDef {
    pub kind: EventKind,
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub guard: Expr,
    pub action: Expr,
    pub span: Span,
}

/// Symbolic integer constant declaration with its admissible interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
    pub span: Span,
}

/// A controller-plant model over finite domains.
///
/// `uncertain` carries the perception-consistency invariant of a paired
/// (true ⨯ perceived) machine produced by uncertainty injection; it is `None`
/// for ordinary models. Checks treat the conjunction of `safety` and
/// `uncertain` as the invariant to restrict to and to preserve.
#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub consts: Vec<ConstDecl>,
    pub init: Expr,
    pub safety: Expr,
    pub uncertain: Option<Expr>,
    pub events: Vec<EventDef>,
    pub symbols: SymbolTable,
}

impl Machine {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn const_decl(&self, name: &str) -> Option<&ConstDecl> {
        self.consts.iter().find(|c| c.name == name)
    }

    pub fn event(&self, name: &str) -> Option<&EventDef> {
        self.events.iter().find(|e| e.name == name)
    }

    /// Controller events in declaration order (1-based indexing is used in
    /// reports and compartment sets).
    pub fn controller_events(&self) -> Vec<&EventDef> {
        self.events.iter().filter(|e| e.kind == EventKind::Ctrl).collect()
    }

    pub fn plant_events(&self) -> Vec<&EventDef> {
        self.events.iter().filter(|e| e.kind == EventKind::Plant).collect()
    }

    /// All invariants that states are expected to satisfy: safety plus, for
    /// paired machines, the perception-consistency invariant.
    pub fn invariants(&self) -> Vec<&Expr> {
        let mut out = vec![&self.safety];
        if let Some(u) = &self.uncertain {
            out.push(u);
        }
        out
    }
}

/// Radius of a per-variable uncertainty clause: a literal or a reference to a
/// symbolic constant (bound at analysis time).
#[derive(Debug, Clone, PartialEq)]
pub enum Radius {
    Lit(i64),
    Const(String),
}

impl Radius {
    pub fn resolve(&self, consts: &ConstBinding) -> Result<i64, EvalError> {
        match self {
            Radius::Lit(v) => Ok(*v),
            Radius::Const(name) => consts
                .get(name)
                .copied()
                .ok_or_else(|| EvalError::UnboundConst { name: name.clone() }),
        }
    }
}

/// Per-variable perception clause: the perceived copy is either exact or
/// within a symmetric integer radius. Variables without a clause default to
/// exact.
#[derive(Debug, Clone, PartialEq)]
pub enum Clause {
    Exact,
    Within(Radius),
}

/// A perceptual-uncertainty description for one machine: per-variable
/// clauses, optional extra symbolic constants, and an optional general
/// relation over (perceived, true) variable pairs — the perceived copies are
/// written with a `^` prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySpec {
    pub name: String,
    pub machine: String,
    pub consts: Vec<ConstDecl>,
    pub clauses: Vec<(String, Clause)>,
    pub relation: Option<Expr>,
    pub span: Span,
}

impl UncertaintySpec {
    pub fn clause_for(&self, var: &str) -> &Clause {
        self.clauses
            .iter()
            .find(|(n, _)| n == var)
            .map(|(_, c)| c)
            .unwrap_or(&Clause::Exact)
    }

    pub fn const_decl(&self, name: &str) -> Option<&ConstDecl> {
        self.consts.iter().find(|c| c.name == name)
    }

    /// The pairing condition tying each variable of `original` to its
    /// perceived copy: exact clauses pin the two equal, within clauses bound
    /// the gap by the radius, and the extra relation (if any) is conjoined.
    /// The returned expression mentions both `v` and `^v` names.
    pub fn invariant_expr(&self, original: &Machine) -> Expr {
        let mut parts = Vec::new();
        for v in &original.vars {
            if unhat(&v.name).is_some() {
                continue;
            }
            let hat = hat_name(&v.name);
            match self.clause_for(&v.name) {
                Clause::Exact => {
                    parts.push(Expr::eq(Expr::var(&v.name), Expr::var(&hat)));
                }
                Clause::Within(r) => {
                    let radius = match r {
                        Radius::Lit(k) => Expr::int(*k),
                        Radius::Const(name) => Expr::var(name),
                    };
                    parts.push(Expr::le(
                        Expr::sub(Expr::var(&hat), radius.clone()),
                        Expr::var(&v.name),
                    ));
                    parts.push(Expr::le(
                        Expr::var(&v.name),
                        Expr::add(Expr::var(&hat), radius),
                    ));
                }
            }
        }
        if let Some(rel) = &self.relation {
            parts.push(rel.clone());
        }
        Expr::and_all(parts)
    }
}

/// Concrete values for symbolic constants, e.g. from `--set name=value`.
pub type ConstBinding = BTreeMap<String, i64>;

/// Validates a binding against the constant declarations in scope (machine
/// plus, optionally, an uncertainty description).
pub fn check_binding(
    m: &Machine,
    spec: Option<&UncertaintySpec>,
    binding: &ConstBinding,
) -> Result<(), EvalError> {
    for (name, value) in binding {
        let decl = m
            .const_decl(name)
            .or_else(|| spec.and_then(|s| s.const_decl(name)));
        match decl {
            None => {
                return Err(EvalError::UnknownConst { name: name.clone() });
            }
            Some(d) => {
                if *value < d.lo || *value > d.hi {
                    return Err(EvalError::ConstOutOfDomain {
                        name: name.clone(),
                        value: *value,
                        lo: d.lo,
                        hi: d.hi,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Name of the perceived copy of a variable.
pub fn hat_name(var: &str) -> String {
    format!("^{var}")
}

/// True when `name` is a perceived-copy name, returning the underlying one.
pub fn unhat(name: &str) -> Option<&str> {
    name.strip_prefix('^')
}
