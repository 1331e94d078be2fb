use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EditContext, EditGrammar, RuleKind};
use crate::grammar::{Ast, GrammarError, NodeId, SymbolId, Tree};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    Malformed(String),
    BadNodeId(String),
    UnknownTarget(u32),
    ModifyOutsideFaultyStatement(u32),
    ModifyTooSmall(u32),
    ModifySymbolMismatch(u32),
    OverlappingModify(u32),
    CopyOutsideMethod(u32),
    CopyTooSmall(u32),
    CopySymbolMismatch(u32),
}

/// A broken constraint, located at a node of the script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: NodeId,
    pub kind: ViolationKind,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ApplyError {
    #[error("invalid script: {0:?}")]
    Invalid(Vec<Violation>),
}

/// Nonterminal nodes of the faulty statement with more than one node, in
/// pre-order.
pub fn enumerate_modifiable(ctx: &EditContext) -> Vec<NodeId> {
    ctx.program
        .descendants(ctx.faulty)
        .filter(|n| ctx.program.get(*n).size > 1)
        .collect()
}

/// Nodes of the surrounding method rooted at `symbol` with more than one
/// node, in pre-order.
pub fn enumerate_copyable(
    eg: &EditGrammar,
    ctx: &EditContext,
    symbol: SymbolId,
) -> Result<Vec<NodeId>, GrammarError> {
    if !eg.is_host_nonterminal(symbol) {
        return Err(GrammarError::UnknownSymbol(format!("#{} (not a host nonterminal)", symbol.0)));
    }
    Ok(ctx
        .program
        .descendants(ctx.method)
        .filter(|n| {
            let node = ctx.program.get(*n);
            node.symbol == symbol && node.size > 1
        })
        .collect())
}

fn node_ref(script: &Ast, leaf: NodeId) -> Result<u32, ViolationKind> {
    let tok = script.get(leaf).token.as_deref().unwrap_or("");
    tok.parse::<u32>()
        .map_err(|_| ViolationKind::BadNodeId(tok.to_string()))
}

/// Checks a script against the structural constraints for `ctx`.
pub fn validate_script(eg: &EditGrammar, script: &Ast, ctx: &EditContext) -> Result<(), Vec<Violation>> {
    if let Err(e) = eg.check_script(script) {
        let node = match &e {
            GrammarError::Nonconforming { id, .. } | GrammarError::Malformed { id, .. } => NodeId(*id),
            _ => NodeId(1),
        };
        return Err(vec![Violation {
            node,
            kind: ViolationKind::Malformed(e.to_string()),
        }]);
    }
    let prog = &ctx.program;
    let mut out = Vec::new();
    let mut modified: Vec<NodeId> = Vec::new();
    for n in script.nodes() {
        let is_copy = eg.is_host_nonterminal(n.symbol)
            && n.children.len() == 1
            && script.get(n.children[0]).symbol == eg.node_id;
        if n.symbol != eg.modify && !is_copy {
            continue;
        }
        let target = match node_ref(script, n.children[0]) {
            Ok(t) => NodeId(t),
            Err(kind) => {
                out.push(Violation { node: n.id, kind });
                continue;
            }
        };
        let mut bad = |kind| out.push(Violation { node: n.id, kind });
        if !prog.contains(target) {
            bad(ViolationKind::UnknownTarget(target.0));
            continue;
        }
        let t = prog.get(target);
        if n.symbol == eg.modify {
            let gen_sym = script.get(n.children[1]).symbol;
            if !prog.is_ancestor_or_self(ctx.faulty, target) {
                bad(ViolationKind::ModifyOutsideFaultyStatement(target.0));
            } else if t.size <= 1 {
                bad(ViolationKind::ModifyTooSmall(target.0));
            } else if t.symbol != gen_sym {
                bad(ViolationKind::ModifySymbolMismatch(target.0));
            } else if modified
                .iter()
                .any(|m| prog.is_ancestor_or_self(*m, target) || prog.is_ancestor_or_self(target, *m))
            {
                bad(ViolationKind::OverlappingModify(target.0));
            } else {
                modified.push(target);
            }
        } else if !prog.is_ancestor_or_self(ctx.method, target) {
            bad(ViolationKind::CopyOutsideMethod(target.0));
        } else if t.size <= 1 {
            bad(ViolationKind::CopyTooSmall(target.0));
        } else if t.symbol != n.symbol {
            bad(ViolationKind::CopySymbolMismatch(target.0));
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Host tree of script subtree `id`, with copies replaced by the referenced
/// program subtrees.
pub fn resolve_copies(eg: &EditGrammar, script: &Ast, id: NodeId, program: &Ast) -> Tree {
    let n = script.get(id);
    if n.children.len() == 1 && eg.is_host_nonterminal(n.symbol) {
        let child = script.get(n.children[0]);
        if child.symbol == eg.node_id {
            let target = NodeId(child.token.as_deref().and_then(|t| t.parse().ok()).unwrap_or(0));
            return program.to_tree(target).expect("validated copy target");
        }
    }
    Tree {
        symbol: n.symbol,
        token: n.token.clone(),
        children: n
            .children
            .iter()
            .map(|c| resolve_copies(eg, script, *c, program))
            .collect(),
    }
}

/// Applies a validated script: modifications replace their targets,
/// insertions go immediately before the faulty statement (in script order).
/// All references use the original ids of `ctx.program`.
pub fn apply(eg: &EditGrammar, script: &Ast, ctx: &EditContext) -> Result<Ast, ApplyError> {
    validate_script(eg, script, ctx).map_err(ApplyError::Invalid)?;
    let mut inserts = Vec::new();
    let mut modifies: HashMap<NodeId, Tree> = HashMap::new();
    for n in script.nodes() {
        if n.symbol == eg.insert {
            inserts.push(resolve_copies(eg, script, n.children[0], &ctx.program));
        } else if n.symbol == eg.modify {
            let target = NodeId(node_ref(script, n.children[0]).expect("validated"));
            modifies.insert(target, resolve_copies(eg, script, n.children[1], &ctx.program));
        }
    }
    let seq = ctx.program.get(ctx.faulty).parent;
    let tree = rebuild(eg, &ctx.program, ctx.program.root(), &modifies, seq, inserts);
    Ok(Ast::from_tree(&tree))
}

fn rebuild(
    eg: &EditGrammar,
    prog: &Ast,
    id: NodeId,
    modifies: &HashMap<NodeId, Tree>,
    seq: Option<NodeId>,
    mut inserts: Vec<Tree>,
) -> Tree {
    if let Some(t) = modifies.get(&id) {
        return t.clone();
    }
    let n = prog.get(id);
    let splice_here = Some(id) == seq && !inserts.is_empty();
    let children: Vec<Tree> = n
        .children
        .iter()
        .map(|c| {
            // Inserts travel down only towards the sequence node.
            let pass = if seq.is_some_and(|s| prog.is_ancestor_or_self(*c, s)) && !splice_here {
                std::mem::take(&mut inserts)
            } else {
                Vec::new()
            };
            rebuild(eg, prog, *c, modifies, seq, pass)
        })
        .collect();
    let mut t = Tree {
        symbol: n.symbol,
        token: n.token.clone(),
        children,
    };
    if splice_here {
        for ins in inserts.into_iter().rev() {
            t = Tree::node(n.symbol, vec![ins, t]);
        }
    }
    t
}

impl EditGrammar {
    /// Whether `rule` emits a placeholder.
    pub fn is_placeholder_rule(&self, rule: usize) -> bool {
        self.kind(rule) == RuleKind::Placeholder
    }
}
