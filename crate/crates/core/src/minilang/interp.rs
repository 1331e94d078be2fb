//! Fuel-bounded interpreter over a slot-resolved IR, recording statement
//! coverage.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::check::{self, Sig, Ty, TypeError};
use crate::grammar::{Ast, NodeId};

pub const DEFAULT_FUEL: u64 = 1_000_000;
const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn ty(self) -> Ty {
        match self {
            Value::Int(_) => Ty::Int,
            Value::Bool(_) => Ty::Bool,
        }
    }

    fn int(self) -> i64 {
        match self {
            Value::Int(v) => v,
            Value::Bool(b) => b as i64,
        }
    }

    fn bool(self) -> bool {
        match self {
            Value::Bool(b) => b,
            Value::Int(v) => v != 0,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub entry: String,
    pub args: Vec<Value>,
    pub expect: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    WrongValue { got: Value },
    Timeout,
    Runtime { reason: String },
    /// The test does not fit the program (unknown entry, bad arity or
    /// argument types).
    Invalid { reason: String },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageRecord {
    /// `Stmt` node ids executed at least once, ascending.
    pub covered: Vec<NodeId>,
    pub verdict: Verdict,
}

impl CoverageRecord {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub(crate) fn from_token(t: &str) -> Option<BinOp> {
        use BinOp::*;
        Some(match t {
            "+" => Add,
            "-" => Sub,
            "*" => Mul,
            "/" => Div,
            "%" => Rem,
            "<" => Lt,
            "<=" => Le,
            ">" => Gt,
            ">=" => Ge,
            "==" => Eq,
            "!=" => Ne,
            "&&" => And,
            "||" => Or,
            _ => return None,
        })
    }

    /// (required operand type, `None` meaning "both equal"; result type)
    pub(crate) fn signature(self) -> (Option<Ty>, Ty) {
        use BinOp::*;
        match self {
            Add | Sub | Mul | Div | Rem => (Some(Ty::Int), Ty::Int),
            Lt | Le | Gt | Ge => (Some(Ty::Int), Ty::Bool),
            Eq | Ne => (None, Ty::Bool),
            And | Or => (Some(Ty::Bool), Ty::Bool),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Ex {
    Int(i64),
    Bool(bool),
    Var(u32),
    Bin(BinOp, Box<Ex>, Box<Ex>),
    Neg(Box<Ex>),
    Not(Box<Ex>),
    Call(u32, Vec<Ex>),
}

#[derive(Debug, Clone)]
pub(crate) enum St {
    Set { id: NodeId, slot: u32, e: Ex },
    If { id: NodeId, c: Ex, then: Vec<St>, els: Vec<St> },
    While { id: NodeId, c: Ex, body: Vec<St> },
    Return { id: NodeId, e: Ex },
    Expr { id: NodeId, e: Ex },
}

#[derive(Debug, Clone)]
pub(crate) struct FnIr {
    pub name: String,
    pub nparams: usize,
    pub nslots: usize,
    pub body: Vec<St>,
}

/// A typechecked program ready to run tests.
#[derive(Debug, Clone)]
pub struct CompiledProgram {
    funcs: Vec<FnIr>,
    sigs: HashMap<String, Sig>,
    ast_len: usize,
}

enum Stop {
    Return(Value),
    Timeout,
    Runtime(String),
}

struct Machine<'a> {
    prog: &'a CompiledProgram,
    fuel: u64,
    covered: Vec<bool>,
    depth: usize,
}

impl CompiledProgram {
    pub(crate) fn new(funcs: Vec<FnIr>, sigs: HashMap<String, Sig>, ast_len: usize) -> Self {
        Self {
            funcs,
            sigs,
            ast_len,
        }
    }

    /// Typechecks and lowers `ast`.
    pub fn compile(ast: &Ast) -> Result<Self, Vec<TypeError>> {
        check::compile(ast)
    }

    pub fn function_names(&self) -> impl Iterator<Item = &str> {
        self.funcs.iter().map(|f| f.name.as_str())
    }

    pub fn signature(&self, name: &str) -> Option<(&[Ty], Ty)> {
        self.sigs.get(name).map(|s| (s.params.as_slice(), s.ret))
    }

    pub fn run(&self, test: &TestCase, fuel: u64) -> CoverageRecord {
        let invalid = |reason: String| CoverageRecord {
            covered: Vec::new(),
            verdict: Verdict::Invalid { reason },
        };
        let Some(sig) = self.sigs.get(&test.entry) else {
            return invalid(format!("no function `{}`", test.entry));
        };
        if sig.params.len() != test.args.len()
            || sig.params.iter().zip(&test.args).any(|(t, a)| *t != a.ty())
        {
            return invalid(format!("arguments do not match `{}`", test.entry));
        }
        let mut m = Machine {
            prog: self,
            fuel,
            covered: vec![false; self.ast_len + 1],
            depth: 0,
        };
        let verdict = match m.call(sig.index, test.args.clone()) {
            Ok(v) if v == test.expect => Verdict::Pass,
            Ok(got) => Verdict::WrongValue { got },
            Err(Stop::Timeout) => Verdict::Timeout,
            Err(Stop::Runtime(reason)) => Verdict::Runtime { reason },
            Err(Stop::Return(_)) => unreachable!("returns are caught at call boundaries"),
        };
        let covered = m
            .covered
            .iter()
            .enumerate()
            .filter(|(_, c)| **c)
            .map(|(i, _)| NodeId(i as u32))
            .collect();
        CoverageRecord { covered, verdict }
    }
}

/// Compiles `ast` and runs one test. Type errors yield an `Invalid` verdict.
pub fn run(ast: &Ast, test: &TestCase, fuel: u64) -> CoverageRecord {
    match CompiledProgram::compile(ast) {
        Ok(p) => p.run(test, fuel),
        Err(errs) => CoverageRecord {
            covered: Vec::new(),
            verdict: Verdict::Invalid {
                reason: format!("{} type errors", errs.len()),
            },
        },
    }
}

pub fn run_all(prog: &CompiledProgram, tests: &[TestCase], fuel: u64) -> Vec<CoverageRecord> {
    tests.iter().map(|t| prog.run(t, fuel)).collect()
}

impl Machine<'_> {
    fn tick(&mut self) -> Result<(), Stop> {
        if self.fuel == 0 {
            return Err(Stop::Timeout);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn call(&mut self, index: u32, args: Vec<Value>) -> Result<Value, Stop> {
        self.tick()?;
        if self.depth >= MAX_DEPTH {
            return Err(Stop::Runtime("call depth exceeded".into()));
        }
        let f = &self.prog.funcs[index as usize];
        let mut frame = args;
        frame.resize(f.nslots.max(f.nparams), Value::Int(0));
        self.depth += 1;
        let r = self.block(&f.body, &mut frame);
        self.depth -= 1;
        match r {
            Ok(()) => Err(Stop::Runtime(format!("`{}` ended without returning", f.name))),
            Err(Stop::Return(v)) => Ok(v),
            Err(e) => Err(e),
        }
    }

    fn block(&mut self, body: &[St], frame: &mut [Value]) -> Result<(), Stop> {
        body.iter().try_for_each(|s| self.stmt(s, frame))
    }

    fn mark(&mut self, id: NodeId) {
        self.covered[id.0 as usize] = true;
    }

    fn stmt(&mut self, s: &St, frame: &mut [Value]) -> Result<(), Stop> {
        self.tick()?;
        match s {
            St::Set { id, slot, e } => {
                self.mark(*id);
                frame[*slot as usize] = self.eval(e, frame)?;
            }
            St::If { id, c, then, els } => {
                self.mark(*id);
                if self.eval(c, frame)?.bool() {
                    self.block(then, frame)?;
                } else {
                    self.block(els, frame)?;
                }
            }
            St::While { id, c, body } => {
                self.mark(*id);
                while self.eval(c, frame)?.bool() {
                    self.tick()?;
                    self.block(body, frame)?;
                }
            }
            St::Return { id, e } => {
                self.mark(*id);
                return Err(Stop::Return(self.eval(e, frame)?));
            }
            St::Expr { id, e } => {
                self.mark(*id);
                self.eval(e, frame)?;
            }
        }
        Ok(())
    }

    fn eval(&mut self, e: &Ex, frame: &[Value]) -> Result<Value, Stop> {
        Ok(match e {
            Ex::Int(v) => Value::Int(*v),
            Ex::Bool(b) => Value::Bool(*b),
            Ex::Var(s) => frame[*s as usize],
            Ex::Neg(x) => Value::Int(self.eval(x, frame)?.int().wrapping_neg()),
            Ex::Not(x) => Value::Bool(!self.eval(x, frame)?.bool()),
            Ex::Bin(BinOp::And, l, r) => {
                Value::Bool(self.eval(l, frame)?.bool() && self.eval(r, frame)?.bool())
            }
            Ex::Bin(BinOp::Or, l, r) => {
                Value::Bool(self.eval(l, frame)?.bool() || self.eval(r, frame)?.bool())
            }
            Ex::Bin(op, l, r) => {
                let a = self.eval(l, frame)?;
                let b = self.eval(r, frame)?;
                binary(*op, a, b)?
            }
            Ex::Call(index, args) => {
                let vals = args
                    .iter()
                    .map(|a| self.eval(a, frame))
                    .collect::<Result<Vec<_>, _>>()?;
                self.call(*index, vals)?
            }
        })
    }
}

fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, Stop> {
    use BinOp::*;
    let (x, y) = (a.int(), b.int());
    Ok(match op {
        Add => Value::Int(x.wrapping_add(y)),
        Sub => Value::Int(x.wrapping_sub(y)),
        Mul => Value::Int(x.wrapping_mul(y)),
        Div | Rem if y == 0 => return Err(Stop::Runtime("division by zero".into())),
        Div => Value::Int(x.wrapping_div(y)),
        Rem => Value::Int(x.wrapping_rem(y)),
        Lt => Value::Bool(x < y),
        Le => Value::Bool(x <= y),
        Gt => Value::Bool(x > y),
        Ge => Value::Bool(x >= y),
        Eq => Value::Bool(a == b),
        Ne => Value::Bool(a != b),
        And | Or => unreachable!("short-circuit handled by caller"),
    })
}
