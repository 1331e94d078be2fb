//! Type checking, identifier scoping, and lowering to the interpreter IR.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::interp::{BinOp, CompiledProgram, Ex, FnIr, St};
use super::{minilang, Syms, PLACEHOLDER};
use crate::grammar::{Ast, GrammarError, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ty {
    Int,
    Bool,
    /// Type of an expression that already produced a diagnostic; compatible
    /// with everything so one mistake yields one error.
    Error,
}

impl Ty {
    fn from_name(s: &str) -> Ty {
        match s {
            "int" => Ty::Int,
            "bool" => Ty::Bool,
            _ => Ty::Error,
        }
    }

    fn compatible(self, other: Ty) -> bool {
        self == other || self == Ty::Error || other == Ty::Error
    }
}

impl std::fmt::Display for Ty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ty::Int => "int",
            Ty::Bool => "bool",
            Ty::Error => "<error>",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdentType {
    Var(Ty),
    Func { params: Vec<Ty>, ret: Ty },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeclKind {
    Param,
    Local,
    Function,
}

/// An identifier visible at some statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identifier {
    pub name: String,
    pub ty: IdentType,
    pub kind: DeclKind,
    /// `HLIdentifier` node of the declaration.
    pub decl: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("node {node}: {message}")]
pub struct TypeError {
    pub node: NodeId,
    pub message: String,
}

pub fn typecheck(ast: &Ast) -> Result<(), Vec<TypeError>> {
    CompiledProgram::compile(ast).map(|_| ())
}

/// Identifiers accessible at statement `at` (or the statement enclosing
/// `at`): every function plus the innermost binding of each variable name
/// in scope. Sorted by declaration position, then name.
pub fn collect_identifiers(ast: &Ast, at: NodeId) -> Result<Vec<Identifier>, GrammarError> {
    let s = minilang().syms;
    ast.node(at)?;
    let stmt = std::iter::once(at)
        .chain(ast.ancestors(at))
        .find(|id| ast.get(*id).symbol == s.stmt)
        .ok_or_else(|| GrammarError::Malformed {
            id: at.0,
            reason: "not inside a statement".into(),
        })?;
    let mut c = Checker::new(ast);
    c.snapshot_at = Some(stmt);
    c.program();
    Ok(c.snapshot.unwrap_or_default())
}

pub(crate) fn compile(ast: &Ast) -> Result<CompiledProgram, Vec<TypeError>> {
    let mut c = Checker::new(ast);
    let funcs = c.program();
    if c.errors.is_empty() {
        Ok(CompiledProgram::new(funcs, c.sigs, ast.len()))
    } else {
        Err(c.errors)
    }
}

struct VarBinding {
    name: String,
    ty: Ty,
    slot: u32,
    kind: DeclKind,
    decl: NodeId,
}

#[derive(Debug, Clone)]
pub(crate) struct Sig {
    pub index: u32,
    pub params: Vec<Ty>,
    pub ret: Ty,
    pub decl: NodeId,
}

struct Checker<'a> {
    ast: &'a Ast,
    s: Syms,
    sigs: HashMap<String, Sig>,
    scopes: Vec<Vec<VarBinding>>,
    next_slot: u32,
    ret: Ty,
    errors: Vec<TypeError>,
    snapshot_at: Option<NodeId>,
    snapshot: Option<Vec<Identifier>>,
}

impl<'a> Checker<'a> {
    fn new(ast: &'a Ast) -> Self {
        Self {
            ast,
            s: minilang().syms,
            sigs: HashMap::new(),
            scopes: Vec::new(),
            next_slot: 0,
            ret: Ty::Int,
            errors: Vec::new(),
            snapshot_at: None,
            snapshot: None,
        }
    }

    fn kids(&self, id: NodeId) -> &'a [NodeId] {
        &self.ast.get(id).children
    }

    fn list(&self, mut id: NodeId) -> Vec<NodeId> {
        let mut items = Vec::new();
        while let [item, rest] = self.kids(id) {
            items.push(*item);
            id = *rest;
        }
        items
    }

    fn token(&self, wrapper: NodeId) -> &'a str {
        self.kids(wrapper)
            .first()
            .and_then(|l| self.ast.get(*l).token.as_deref())
            .unwrap_or("")
    }

    fn error(&mut self, node: NodeId, message: impl Into<String>) {
        self.errors.push(TypeError {
            node,
            message: message.into(),
        });
    }

    fn name(&mut self, hl: NodeId) -> &'a str {
        let n = self.token(hl);
        if n == PLACEHOLDER {
            self.error(hl, "uninstantiated placeholder");
        }
        n
    }

    fn program(&mut self) -> Vec<FnIr> {
        let root = self.ast.root();
        if self.ast.get(root).symbol != self.s.program {
            self.error(root, "not a program");
            return Vec::new();
        }
        let funcs = self.list(self.kids(root)[0]);
        for (i, f) in funcs.iter().enumerate() {
            let [name, params, ret, _] = self.kids(*f) else {
                continue;
            };
            let fname = self.name(*name).to_string();
            let ptys = self
                .list(*params)
                .into_iter()
                .map(|p| Ty::from_name(self.token(self.kids(p)[1])))
                .collect();
            let sig = Sig {
                index: i as u32,
                params: ptys,
                ret: Ty::from_name(self.token(*ret)),
                decl: *name,
            };
            if self.sigs.contains_key(&fname) {
                self.error(*name, format!("function `{fname}` defined twice"));
            } else {
                self.sigs.insert(fname, sig);
            }
        }
        funcs.into_iter().map(|f| self.func(f)).collect()
    }

    fn func(&mut self, id: NodeId) -> FnIr {
        let [name, params, ret, body] = *self.kids(id) else {
            unreachable!("Func has four children")
        };
        self.next_slot = 0;
        self.ret = Ty::from_name(self.token(ret));
        self.scopes.push(Vec::new());
        let params = self.list(params);
        for p in &params {
            let [pn, pt] = *self.kids(*p) else { continue };
            let ty = Ty::from_name(self.token(pt));
            self.declare(pn, ty, DeclKind::Param);
        }
        let body = self.block(body);
        self.scopes.pop();
        FnIr {
            name: self.token(name).to_string(),
            nparams: params.len(),
            nslots: self.next_slot as usize,
            body,
        }
    }

    fn declare(&mut self, hl: NodeId, ty: Ty, kind: DeclKind) -> u32 {
        let name = self.name(hl).to_string();
        let scope = self.scopes.last().expect("inside a scope");
        if scope.iter().any(|b| b.name == name) {
            self.error(hl, format!("`{name}` declared twice in the same scope"));
        }
        let slot = self.next_slot;
        self.next_slot += 1;
        self.scopes.last_mut().expect("inside a scope").push(VarBinding {
            name,
            ty,
            slot,
            kind,
            decl: hl,
        });
        slot
    }

    fn lookup(&self, name: &str) -> Option<&VarBinding> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|b| b.name == name)
    }

    fn take_snapshot(&mut self) {
        let mut out: Vec<Identifier> = self
            .sigs
            .iter()
            .map(|(n, sig)| Identifier {
                name: n.clone(),
                ty: IdentType::Func {
                    params: sig.params.clone(),
                    ret: sig.ret,
                },
                kind: DeclKind::Function,
                decl: sig.decl,
            })
            .collect();
        let mut seen = std::collections::HashSet::new();
        for b in self.scopes.iter().rev().flat_map(|s| s.iter().rev()) {
            if seen.insert(b.name.clone()) {
                out.push(Identifier {
                    name: b.name.clone(),
                    ty: IdentType::Var(b.ty),
                    kind: b.kind,
                    decl: b.decl,
                });
            }
        }
        out.sort_by(|a, b| (a.decl, &a.name).cmp(&(b.decl, &b.name)));
        self.snapshot = Some(out);
    }

    fn block(&mut self, id: NodeId) -> Vec<St> {
        self.scopes.push(Vec::new());
        let stmts = self.list(self.kids(id)[0]);
        let out = stmts.into_iter().map(|s| self.stmt(s)).collect();
        self.scopes.pop();
        out
    }

    fn stmt(&mut self, id: NodeId) -> St {
        if self.snapshot_at == Some(id) {
            self.take_snapshot();
        }
        let s = self.s;
        let inner = self.kids(id)[0];
        let sym = self.ast.get(inner).symbol;
        let k = self.kids(inner);
        if sym == s.var_decl {
            let ty = Ty::from_name(self.token(k[1]));
            let e = self.expect(k[2], ty);
            let slot = self.declare(k[0], ty, DeclKind::Local);
            St::Set { id, slot, e }
        } else if sym == s.assign {
            let name = self.name(k[0]);
            let (slot, ty) = match self.lookup(name) {
                Some(b) => (b.slot, b.ty),
                None => {
                    if name != PLACEHOLDER {
                        self.error(k[0], format!("unknown variable `{name}`"));
                    }
                    (0, Ty::Error)
                }
            };
            let e = self.expect(k[1], ty);
            St::Set { id, slot, e }
        } else if sym == s.if_ {
            let c = self.expect(k[0], Ty::Bool);
            let then = self.block(k[1]);
            let els = self.block(k[2]);
            St::If { id, c, then, els }
        } else if sym == s.while_ {
            let c = self.expect(k[0], Ty::Bool);
            let body = self.block(k[1]);
            St::While { id, c, body }
        } else if sym == s.ret {
            let e = self.expect(k[0], self.ret);
            St::Return { id, e }
        } else {
            let (_, e) = self.expr(k[0]);
            St::Expr { id, e }
        }
    }

    fn expect(&mut self, id: NodeId, want: Ty) -> Ex {
        let (got, e) = self.expr(id);
        if !got.compatible(want) {
            self.error(id, format!("expected {want}, found {got}"));
        }
        e
    }

    fn expr(&mut self, id: NodeId) -> (Ty, Ex) {
        let s = self.s;
        match *self.kids(id) {
            [l, op, r] => {
                let op_tok = self.token(op);
                let (lt, le) = self.expr(l);
                let (rt, re) = self.expr(r);
                let Some(bop) = BinOp::from_token(op_tok) else {
                    self.error(op, format!("unknown operator `{op_tok}`"));
                    return (Ty::Error, Ex::Int(0));
                };
                let (operand, result) = bop.signature();
                let ok = match operand {
                    Some(t) => lt.compatible(t) && rt.compatible(t),
                    None => lt.compatible(rt),
                };
                if !ok {
                    self.error(id, format!("operator `{op_tok}` applied to {lt} and {rt}"));
                    return (Ty::Error, Ex::Int(0));
                }
                (result, Ex::Bin(bop, Box::new(le), Box::new(re)))
            }
            [op, e] => {
                let op_tok = self.token(op);
                let (t, ex) = self.expr(e);
                let want = if op_tok == "!" { Ty::Bool } else { Ty::Int };
                if !t.compatible(want) {
                    self.error(id, format!("operator `{op_tok}` applied to {t}"));
                    return (Ty::Error, Ex::Int(0));
                }
                let ex = if op_tok == "!" {
                    Ex::Not(Box::new(ex))
                } else {
                    Ex::Neg(Box::new(ex))
                };
                (want, ex)
            }
            [inner] => {
                let sym = self.ast.get(inner).symbol;
                if sym == s.int_lit {
                    match self.token(inner).parse::<i64>() {
                        Ok(v) => (Ty::Int, Ex::Int(v)),
                        Err(_) => {
                            self.error(inner, "malformed integer literal");
                            (Ty::Error, Ex::Int(0))
                        }
                    }
                } else if sym == s.bool_lit {
                    (Ty::Bool, Ex::Bool(self.token(inner) == "true"))
                } else if sym == s.hl_ident {
                    let name = self.name(inner);
                    match self.lookup(name) {
                        Some(b) => (b.ty, Ex::Var(b.slot)),
                        None => {
                            if name != PLACEHOLDER {
                                self.error(inner, format!("unknown variable `{name}`"));
                            }
                            (Ty::Error, Ex::Int(0))
                        }
                    }
                } else if sym == s.call {
                    self.call(inner)
                } else {
                    self.error(inner, "not an expression");
                    (Ty::Error, Ex::Int(0))
                }
            }
            _ => {
                self.error(id, "malformed expression");
                (Ty::Error, Ex::Int(0))
            }
        }
    }

    fn call(&mut self, id: NodeId) -> (Ty, Ex) {
        let [callee, args] = *self.kids(id) else {
            unreachable!("Call has two children")
        };
        let name = self.name(callee);
        let args = self.list(args);
        let typed: Vec<(Ty, Ex)> = args.iter().map(|a| self.expr(*a)).collect();
        let Some(sig) = self.sigs.get(name) else {
            if name != PLACEHOLDER {
                self.error(callee, format!("unknown function `{name}`"));
            }
            return (Ty::Error, Ex::Int(0));
        };
        let (index, params, ret) = (sig.index, sig.params.clone(), sig.ret);
        if params.len() != typed.len() {
            self.error(
                id,
                format!("`{name}` takes {} arguments, {} given", params.len(), typed.len()),
            );
            return (ret, Ex::Int(0));
        }
        for ((t, _), (want, a)) in typed.iter().zip(params.iter().zip(&args)) {
            if !t.compatible(*want) {
                self.error(*a, format!("argument: expected {want}, found {t}"));
            }
        }
        (ret, Ex::Call(index, typed.into_iter().map(|(_, e)| e).collect()))
    }
}
