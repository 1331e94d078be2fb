//! Leftmost depth-first construction of edit scripts, one expansion at a
//! time. Shared by oracle linearization, training and beam search.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{enumerate_modifiable, EditContext, EditError, EditGrammar, RuleKind};
use crate::grammar::{Ast, NodeId, SymbolId, Tree};

/// One expansion of the leftmost pending nonterminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    /// Expand with an edit-grammar production (chosen by the rule predictor).
    Rule(usize),
    /// Copy a program subtree with the frontier's symbol (tree copier).
    Copy(NodeId),
    /// Expand `Modify` against a faulty-statement subtree (subtree locator).
    Modify(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provider {
    Rule = 0,
    Copy = 1,
    Locate = 2,
}

impl Action {
    pub fn provider(self) -> Provider {
        match self {
            Action::Rule(_) => Provider::Rule,
            Action::Copy(_) => Provider::Copy,
            Action::Modify(_) => Provider::Locate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PNode {
    pub symbol: SymbolId,
    pub token: Option<String>,
    pub children: Vec<u32>,
    pub parent: Option<u32>,
    /// Position among the parent's children.
    pub slot: u16,
    /// Expansion step that expanded this node, once expanded.
    pub step: Option<u32>,
}

/// Record of one expansion, as consumed by the AST reader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    pub node: u32,
    pub action: Action,
    /// Production id, including copy and modify productions.
    pub rule: usize,
    /// Step that expanded the parent node.
    pub parent_step: Option<u32>,
    /// Step that expanded the nearest expanded left sibling.
    pub left_step: Option<u32>,
}

/// Per-context candidate sets.
#[derive(Debug, Clone)]
pub struct ContextIndex {
    pub modifiable: Vec<NodeId>,
    copyable: HashMap<SymbolId, Vec<NodeId>>,
    sizes: HashMap<NodeId, u32>,
}

impl ContextIndex {
    pub fn new(ctx: &EditContext) -> Self {
        let mut copyable: HashMap<SymbolId, Vec<NodeId>> = HashMap::new();
        for n in ctx.program.descendants(ctx.method) {
            let node = ctx.program.get(n);
            if node.size > 1 {
                copyable.entry(node.symbol).or_default().push(n);
            }
        }
        let modifiable = enumerate_modifiable(ctx);
        let sizes = modifiable.iter().map(|n| (*n, ctx.program.get(*n).size)).collect();
        Self {
            modifiable,
            copyable,
            sizes,
        }
    }

    /// Subtree size of modifiable node `n`.
    fn span(&self, n: NodeId) -> u32 {
        self.sizes.get(&n).copied().unwrap_or(1)
    }

    pub fn copyable(&self, symbol: SymbolId) -> &[NodeId] {
        self.copyable.get(&symbol).map_or(&[], |v| v.as_slice())
    }
}

/// Generation limits applied on top of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodePolicy {
    pub max_inserts: u8,
    pub max_modifies: u8,
    pub max_placeholders: u8,
    pub placeholder_enabled: bool,
}

impl Default for DecodePolicy {
    fn default() -> Self {
        Self {
            max_inserts: 1,
            max_modifies: 1,
            max_placeholders: 1,
            placeholder_enabled: true,
        }
    }
}

/// Legal choices at the current frontier, per provider.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Legal {
    pub rules: Vec<usize>,
    pub copies: Vec<NodeId>,
    pub modifies: Vec<NodeId>,
}

impl Legal {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.copies.is_empty() && self.modifies.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len() + self.copies.len() + self.modifies.len()
    }

    pub fn contains(&self, a: Action) -> bool {
        match a {
            Action::Rule(r) => self.rules.contains(&r),
            Action::Copy(n) => self.copies.contains(&n),
            Action::Modify(n) => self.modifies.contains(&n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialScript {
    nodes: Vec<PNode>,
    stack: Vec<u32>,
    steps: Vec<StepInfo>,
    inserts: u8,
    modifies: u8,
    placeholders: u8,
    /// Targets of completed `Modify` expansions.
    targets: Vec<NodeId>,
}

impl PartialScript {
    pub fn new(eg: &EditGrammar) -> Self {
        Self {
            nodes: vec![PNode {
                symbol: eg.edits,
                token: None,
                children: Vec::new(),
                parent: None,
                slot: 0,
                step: None,
            }],
            stack: vec![0],
            steps: Vec::new(),
            inserts: 0,
            modifies: 0,
            placeholders: 0,
            targets: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[PNode] {
        &self.nodes
    }

    pub fn steps(&self) -> &[StepInfo] {
        &self.steps
    }

    pub fn is_complete(&self) -> bool {
        self.stack.is_empty()
    }

    pub fn placeholders(&self) -> u8 {
        self.placeholders
    }

    pub fn frontier(&self) -> Option<u32> {
        self.stack.last().copied()
    }

    pub fn frontier_symbol(&self) -> Option<SymbolId> {
        self.frontier().map(|f| self.nodes[f as usize].symbol)
    }

    /// Root-to-frontier path as (symbol, slot among parent's children).
    pub fn path(&self) -> Vec<(SymbolId, u16)> {
        let mut out = Vec::new();
        let mut cur = self.frontier();
        while let Some(n) = cur {
            let node = &self.nodes[n as usize];
            out.push((node.symbol, node.slot));
            cur = node.parent;
        }
        out.reverse();
        out
    }

    /// Legal actions at the frontier under `policy`.
    pub fn legal(&self, eg: &EditGrammar, idx: &ContextIndex, policy: &DecodePolicy) -> Legal {
        let Some(sym) = self.frontier_symbol() else {
            return Legal::default();
        };
        let free: Vec<NodeId> = idx
            .modifiable
            .iter()
            .copied()
            .filter(|n| {
                self.targets.iter().all(|t| {
                    let (a, b) = (n.0.min(t.0), n.0.max(t.0));
                    // pre-order ids: overlap iff one lies inside the other's range
                    a != b && idx.span(NodeId(a)) <= b - a
                })
            })
            .collect();
        let can_insert = self.inserts < policy.max_inserts && self.modifies == 0;
        let can_modify = self.modifies < policy.max_modifies && !free.is_empty();
        let [by_rule, by_copy, by_locate] = eg.responsible(sym);
        let mut legal = Legal::default();
        if by_rule {
            legal.rules = eg
                .generatable_rules(sym)
                .filter(|r| {
                    let r = *r;
                    if r == eg.edits_more {
                        can_insert || can_modify
                    } else if r == eg.edit_insert {
                        can_insert
                    } else if r == eg.edit_modify {
                        can_modify
                    } else if eg.kind(r) == RuleKind::Placeholder {
                        policy.placeholder_enabled && self.placeholders < policy.max_placeholders
                    } else {
                        true
                    }
                })
                .collect();
        }
        if by_copy {
            legal.copies = idx.copyable(sym).to_vec();
        }
        if by_locate {
            legal.modifies = free;
        }
        legal
    }

    /// Performs `action` at the frontier. Only grammar shape is checked
    /// here; caps and context membership are the caller's business.
    pub fn apply(&mut self, eg: &EditGrammar, ctx: &EditContext, action: Action) -> Result<(), EditError> {
        let frontier = self.frontier().ok_or(EditError::Complete)?;
        let sym = self.nodes[frontier as usize].symbol;
        let illegal = || EditError::IllegalAction {
            action,
            symbol: eg.grammar.name(sym).to_string(),
        };
        let (rule, node_token) = match action {
            Action::Rule(r) => {
                if r >= eg.num_rules()
                    || eg.grammar.production(r).lhs != sym
                    || matches!(eg.kind(r), RuleKind::Copy | RuleKind::Modify | RuleKind::Open)
                {
                    return Err(illegal());
                }
                (r, None)
            }
            Action::Copy(n) => {
                let r = eg.copy_rule(sym).ok_or_else(illegal)?;
                if !ctx.program.contains(n) || ctx.program.get(n).symbol != sym {
                    return Err(illegal());
                }
                (r, Some(n))
            }
            Action::Modify(n) => {
                if sym != eg.modify || !ctx.program.contains(n) {
                    return Err(illegal());
                }
                let r = eg.modify_rule(ctx.program.get(n).symbol).ok_or_else(illegal)?;
                (r, Some(n))
            }
        };
        self.stack.pop();
        let step = self.steps.len() as u32;
        let parent_step = self.nodes[frontier as usize]
            .parent
            .and_then(|p| self.nodes[p as usize].step);
        let left_step = self.nodes[frontier as usize].parent.and_then(|p| {
            let slot = self.nodes[frontier as usize].slot as usize;
            self.nodes[p as usize].children[..slot]
                .iter()
                .rev()
                .find_map(|c| self.nodes[*c as usize].step)
        });
        self.nodes[frontier as usize].step = Some(step);
        self.steps.push(StepInfo {
            node: frontier,
            action,
            rule,
            parent_step,
            left_step,
        });

        let prod = eg.grammar.production(rule);
        let mut pending = Vec::new();
        for (slot, (s, pin)) in prod.rhs.iter().zip(&prod.tokens).enumerate() {
            let id = self.nodes.len() as u32;
            let token = if eg.grammar.is_terminal(*s) {
                Some(match pin {
                    Some(t) => t.clone(),
                    None => node_token.map(|n| n.0.to_string()).unwrap_or_default(),
                })
            } else {
                pending.push(id);
                None
            };
            self.nodes.push(PNode {
                symbol: *s,
                token,
                children: Vec::new(),
                parent: Some(frontier),
                slot: slot as u16,
                step: None,
            });
            self.nodes[frontier as usize].children.push(id);
        }
        self.stack.extend(pending.into_iter().rev());
        if let Action::Modify(n) = action {
            self.targets.push(n);
        }
        if rule == eg.edit_insert {
            self.inserts += 1;
        } else if rule == eg.edit_modify {
            self.modifies += 1;
        } else if eg.kind(rule) == RuleKind::Placeholder {
            self.placeholders += 1;
        }
        Ok(())
    }

    /// Tree of the script so far; pending nonterminals appear childless.
    pub fn to_tree(&self) -> Tree {
        fn go(nodes: &[PNode], i: u32) -> Tree {
            let n = &nodes[i as usize];
            Tree {
                symbol: n.symbol,
                token: n.token.clone(),
                children: n.children.iter().map(|c| go(nodes, *c)).collect(),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn to_ast(&self) -> Ast {
        Ast::from_tree(&self.to_tree())
    }
}

/// Oracle action sequence of a complete script: one action per nonterminal
/// node, in pre-order.
pub fn linearize(eg: &EditGrammar, script: &Ast) -> Result<Vec<Action>, crate::grammar::GrammarError> {
    let mut out = Vec::new();
    for n in script.nodes() {
        if eg.grammar.is_terminal(n.symbol) {
            continue;
        }
        let rule = eg.script_production(script, n.id)?;
        let target = || {
            let leaf = script.get(n.children[0]);
            NodeId(leaf.token.as_deref().and_then(|t| t.parse().ok()).unwrap_or(0))
        };
        out.push(match eg.kind(rule) {
            RuleKind::Copy => Action::Copy(target()),
            RuleKind::Modify => Action::Modify(target()),
            _ => Action::Rule(rule),
        });
    }
    Ok(out)
}

/// Rebuilds a script from its action sequence.
pub fn replay(eg: &EditGrammar, ctx: &EditContext, actions: &[Action]) -> Result<PartialScript, EditError> {
    let mut ps = PartialScript::new(eg);
    for a in actions {
        ps.apply(eg, ctx, *a)?;
    }
    Ok(ps)
}
