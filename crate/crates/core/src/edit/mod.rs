//! Edit scripts over a host grammar.
//!
//! The edit grammar extends the host grammar (whose symbols and productions
//! keep their ids) with:
//!
//! ```text
//! Edits  → Edit Edits | End:"end"
//! Edit   → Insert | Modify
//! Insert → <statement>
//! Modify → NodeID X                 for every host nonterminal X
//! X      → NodeID                   copy, for every host nonterminal X
//! <identifier> → <ident>:"placeholder" | <ident>:"<frequent id>" ...
//! <literal>    → <lit>:"<frequent literal>" ...
//! ```
//!
//! `NodeID` tokens are pre-order ids into the program being edited.

mod apply;
mod expand;
mod random;

pub use apply::{
    apply, enumerate_copyable, enumerate_modifiable, resolve_copies, validate_script, ApplyError,
    Violation, ViolationKind,
};
pub use expand::{linearize, replay, Action, ContextIndex, DecodePolicy, Legal, PNode, PartialScript, Provider, StepInfo};
pub use random::{random_host_tree, random_script};

use serde::{Deserialize, Serialize};

use crate::grammar::{Ast, Grammar, GrammarBuilder, GrammarError, NodeId, SymbolId, SymbolKind};
use crate::minilang::{self, PLACEHOLDER};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EditError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("host grammar has no `{0}` nonterminal")]
    MissingRole(String),
    #[error("`{0}` needs a production with a single unpinned terminal")]
    NoOpenTerminal(String),
    #[error("faulty statement {faulty} is not inside method {method}")]
    FaultyOutsideMethod { faulty: u32, method: u32 },
    #[error("node {0} is not a `{1}`")]
    WrongSymbol(u32, String),
    #[error("action {action:?} does not apply at `{symbol}`")]
    IllegalAction { action: Action, symbol: String },
    #[error("script is already complete")]
    Complete,
}

/// Origin of an edit-grammar production.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleKind {
    /// Host production whose terminals are all pinned.
    Host,
    /// Host production with an unpinned terminal; cannot be generated.
    Open,
    /// `Edits`, `Edit`, `Insert` productions.
    Structural,
    Copy,
    Modify,
    Placeholder,
    FrequentIdent,
    FrequentLiteral,
}

/// Host nonterminals with special roles.
#[derive(Debug, Clone, Copy)]
pub struct HostRoles<'a> {
    pub statement: &'a str,
    pub identifier: &'a str,
    pub literal: Option<&'a str>,
    pub method: &'a str,
}

pub const MINILANG_ROLES: HostRoles<'static> = HostRoles {
    statement: "Stmt",
    identifier: "HLIdentifier",
    literal: Some("IntLit"),
    method: "Func",
};

#[derive(Debug, Clone)]
pub struct EditGrammar {
    pub grammar: Grammar,
    pub host_symbols: usize,
    pub host_productions: usize,
    pub edits: SymbolId,
    pub edit: SymbolId,
    pub insert: SymbolId,
    pub modify: SymbolId,
    pub node_id: SymbolId,
    pub end: SymbolId,
    pub statement: SymbolId,
    pub identifier: SymbolId,
    pub literal: Option<SymbolId>,
    pub method: SymbolId,
    pub placeholder_rule: usize,
    pub edits_more: usize,
    pub edits_end: usize,
    pub edit_insert: usize,
    pub edit_modify: usize,
    pub frequent_ids: Vec<String>,
    pub frequent_literals: Vec<String>,
    kinds: Vec<RuleKind>,
    copy_rule: Vec<Option<usize>>,
    modify_rule: Vec<Option<usize>>,
}

fn open_terminal(host: &Grammar, nt: SymbolId) -> Result<SymbolId, EditError> {
    host.productions_for(nt)
        .iter()
        .map(|p| host.production(*p))
        .find(|p| p.rhs.len() == 1 && host.is_terminal(p.rhs[0]) && p.tokens[0].is_none())
        .map(|p| p.rhs[0])
        .ok_or_else(|| EditError::NoOpenTerminal(host.name(nt).to_string()))
}

fn dedup(items: &[String], skip: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if s != skip && !out.contains(s) {
            out.push(s.clone());
        }
    }
    out
}

/// Derives the edit grammar of `host`.
pub fn derive_edit_grammar(
    host: &Grammar,
    roles: HostRoles<'_>,
    frequent_ids: &[String],
    frequent_literals: &[String],
) -> Result<EditGrammar, EditError> {
    let role = |name: &str| {
        host.lookup(name)
            .ok()
            .filter(|s| !host.is_terminal(*s))
            .ok_or_else(|| EditError::MissingRole(name.to_string()))
    };
    let statement = role(roles.statement)?;
    let identifier = role(roles.identifier)?;
    let method = role(roles.method)?;
    let literal = roles.literal.map(role).transpose()?;
    let ident_terminal = open_terminal(host, identifier)?;
    let literal_terminal = literal.map(|l| open_terminal(host, l)).transpose()?;
    let frequent_ids = dedup(frequent_ids, PLACEHOLDER);
    let frequent_literals = dedup(frequent_literals, "");

    let mut b = GrammarBuilder::with_symbols_of(host);
    let mut kinds = Vec::new();
    for p in host.productions() {
        let open = p
            .rhs
            .iter()
            .zip(&p.tokens)
            .any(|(s, t)| host.is_terminal(*s) && t.is_none());
        b.rule_ids(p.lhs, p.rhs.iter().copied().zip(p.tokens.iter().cloned()).collect());
        kinds.push(if open { RuleKind::Open } else { RuleKind::Host });
    }
    let host_productions = kinds.len();
    let host_nts: Vec<SymbolId> = host.nonterminals().collect();

    let edits = b.nonterminal("Edits")?;
    let edit = b.nonterminal("Edit")?;
    let insert = b.nonterminal("Insert")?;
    let modify = b.nonterminal("Modify")?;
    let node_id = b.terminal("NodeID")?;
    let end = b.terminal("End")?;

    let mut push = |b: &mut GrammarBuilder, lhs, rhs, kind| {
        b.rule_ids(lhs, rhs);
        kinds.push(kind);
        kinds.len() - 1
    };
    let edits_more = push(&mut b, edits, vec![(edit, None), (edits, None)], RuleKind::Structural);
    let edits_end = push(&mut b, edits, vec![(end, Some("end".into()))], RuleKind::Structural);
    let edit_insert = push(&mut b, edit, vec![(insert, None)], RuleKind::Structural);
    let edit_modify = push(&mut b, edit, vec![(modify, None)], RuleKind::Structural);
    push(&mut b, insert, vec![(statement, None)], RuleKind::Structural);

    let n_symbols = host.symbols().len() + 6;
    let mut modify_rule = vec![None; n_symbols];
    let mut copy_rule = vec![None; n_symbols];
    for x in &host_nts {
        modify_rule[x.0 as usize] =
            Some(push(&mut b, modify, vec![(node_id, None), (*x, None)], RuleKind::Modify));
    }
    for x in &host_nts {
        copy_rule[x.0 as usize] = Some(push(&mut b, *x, vec![(node_id, None)], RuleKind::Copy));
    }
    let placeholder_rule = push(
        &mut b,
        identifier,
        vec![(ident_terminal, Some(PLACEHOLDER.into()))],
        RuleKind::Placeholder,
    );
    for id in &frequent_ids {
        push(&mut b, identifier, vec![(ident_terminal, Some(id.clone()))], RuleKind::FrequentIdent);
    }
    if let (Some(lit), Some(term)) = (literal, literal_terminal) {
        for l in &frequent_literals {
            push(&mut b, lit, vec![(term, Some(l.clone()))], RuleKind::FrequentLiteral);
        }
    }
    let grammar = b.build("Edits")?;
    debug_assert_eq!(grammar.num_productions(), kinds.len());
    Ok(EditGrammar {
        grammar,
        host_symbols: host.symbols().len(),
        host_productions,
        edits,
        edit,
        insert,
        modify,
        node_id,
        end,
        statement,
        identifier,
        literal,
        method,
        placeholder_rule,
        edits_more,
        edits_end,
        edit_insert,
        edit_modify,
        frequent_ids,
        frequent_literals,
        kinds,
        copy_rule,
        modify_rule,
    })
}

impl EditGrammar {
    pub fn for_minilang(frequent_ids: &[String], frequent_literals: &[String]) -> Self {
        derive_edit_grammar(minilang::grammar(), MINILANG_ROLES, frequent_ids, frequent_literals)
            .expect("MiniLang has all roles")
    }

    pub fn num_rules(&self) -> usize {
        self.grammar.num_productions()
    }

    pub fn kind(&self, rule: usize) -> RuleKind {
        self.kinds[rule]
    }

    pub fn is_host_symbol(&self, s: SymbolId) -> bool {
        (s.0 as usize) < self.host_symbols
    }

    pub fn is_host_nonterminal(&self, s: SymbolId) -> bool {
        self.is_host_symbol(s) && !self.grammar.is_terminal(s)
    }

    pub fn copy_rule(&self, x: SymbolId) -> Option<usize> {
        self.copy_rule.get(x.0 as usize).copied().flatten()
    }

    pub fn modify_rule(&self, x: SymbolId) -> Option<usize> {
        self.modify_rule.get(x.0 as usize).copied().flatten()
    }

    /// Rules the rule predictor may choose at a `symbol` frontier: not a
    /// copy, not a modify, not an open host production.
    pub fn generatable_rules(&self, symbol: SymbolId) -> impl Iterator<Item = usize> + '_ {
        self.grammar
            .productions_for(symbol)
            .iter()
            .copied()
            .filter(|p| !matches!(self.kinds[*p], RuleKind::Copy | RuleKind::Modify | RuleKind::Open))
    }

    /// Which providers may expand `symbol`.
    pub fn responsible(&self, symbol: SymbolId) -> [bool; 3] {
        if symbol == self.modify {
            [false, false, true]
        } else if symbol == self.identifier || !self.is_host_symbol(symbol) {
            [true, false, false]
        } else {
            [true, true, false]
        }
    }

    /// The production that built node `id` of an edit script.
    pub fn script_production(&self, script: &Ast, id: NodeId) -> Result<usize, GrammarError> {
        let node = script.node(id)?;
        let kids: Vec<_> = node.children.iter().map(|c| script.get(*c)).collect();
        let nonconforming = |matches| GrammarError::Nonconforming {
            id: id.0,
            symbol: self.grammar.name(node.symbol).to_string(),
            matches,
        };
        if node.symbol == self.modify {
            return match kids.as_slice() {
                [n, x] if n.symbol == self.node_id => self.modify_rule(x.symbol).ok_or(nonconforming(0)),
                _ => Err(nonconforming(0)),
            };
        }
        if let [n] = kids.as_slice() {
            if n.symbol == self.node_id {
                return self.copy_rule(node.symbol).ok_or(nonconforming(0));
            }
        }
        let sig: Vec<(SymbolId, Option<&str>)> =
            kids.iter().map(|k| (k.symbol, k.token.as_deref())).collect();
        let matches: Vec<usize> = self.grammar.matching_productions(node.symbol, &sig).collect();
        let pinned: Vec<usize> = matches
            .iter()
            .copied()
            .filter(|p| self.kinds[*p] != RuleKind::Open)
            .collect();
        match (pinned.as_slice(), matches.as_slice()) {
            ([p], _) => Ok(*p),
            ([], [p]) => Ok(*p),
            _ => Err(nonconforming(matches.len())),
        }
    }

    /// Conformance of a script: terminals carry tokens, every nonterminal
    /// node resolves to one production, root is `Edits`.
    pub fn check_script(&self, script: &Ast) -> Result<(), GrammarError> {
        if script.is_empty() || script.get(script.root()).symbol != self.edits {
            return Err(GrammarError::Malformed {
                id: 1,
                reason: "script root is not `Edits`".into(),
            });
        }
        for n in script.nodes() {
            if n.symbol.0 as usize >= self.grammar.symbols().len() {
                return Err(GrammarError::Malformed {
                    id: n.id.0,
                    reason: "symbol outside edit grammar".into(),
                });
            }
            match self.grammar.symbol(n.symbol).kind {
                SymbolKind::Terminal => {
                    if n.token.is_none() || !n.children.is_empty() {
                        return Err(GrammarError::Malformed {
                            id: n.id.0,
                            reason: "terminal without token".into(),
                        });
                    }
                }
                SymbolKind::Nonterminal => {
                    if n.token.is_some() {
                        return Err(GrammarError::Malformed {
                            id: n.id.0,
                            reason: "nonterminal with token".into(),
                        });
                    }
                    self.script_production(script, n.id)?;
                }
            }
        }
        Ok(())
    }
}

/// Program plus the statement to repair and its enclosing method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditContext {
    pub program: Ast,
    pub faulty: NodeId,
    pub method: NodeId,
}

impl EditContext {
    pub fn new(program: Ast, faulty: NodeId, method: NodeId) -> Result<Self, EditError> {
        program.node(faulty)?;
        program.node(method)?;
        if !program.is_ancestor_or_self(method, faulty) {
            return Err(EditError::FaultyOutsideMethod {
                faulty: faulty.0,
                method: method.0,
            });
        }
        Ok(Self {
            program,
            faulty,
            method,
        })
    }

    /// Context for MiniLang statement `faulty`; the method is its enclosing
    /// `Func`.
    pub fn for_minilang(program: Ast, faulty: NodeId) -> Result<Self, EditError> {
        let s = minilang::minilang().syms;
        if program.node(faulty)?.symbol != s.stmt {
            return Err(EditError::WrongSymbol(faulty.0, "Stmt".into()));
        }
        let method = program
            .ancestors(faulty)
            .find(|a| program.get(*a).symbol == s.func)
            .ok_or(EditError::WrongSymbol(faulty.0, "Stmt inside a Func".into()))?;
        Self::new(program, faulty, method)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minilang_edit_grammar_shape() {
        let host = minilang::grammar();
        let k = host.nonterminals().count();
        let eg = EditGrammar::for_minilang(&["a".into(), "b".into()], &["0".into(), "1".into()]);
        let copies = (0..eg.num_rules()).filter(|r| eg.kind(*r) == RuleKind::Copy).count();
        let modifies = (0..eg.num_rules()).filter(|r| eg.kind(*r) == RuleKind::Modify).count();
        assert_eq!(copies, k);
        assert_eq!(modifies, k);
        // host productions keep their ids
        for (i, p) in host.productions().iter().enumerate() {
            assert_eq!(eg.grammar.production(i), p);
        }
        let insert = eg.grammar.production(eg.edit_insert + 2);
        assert_eq!((insert.lhs, insert.rhs.as_slice()), (eg.insert, &[eg.statement][..]));
        let generatable: Vec<_> = eg.generatable_rules(eg.identifier).collect();
        assert_eq!(generatable.len(), 3);
        assert_eq!(generatable[0], eg.placeholder_rule);
    }

    #[test]
    fn frequent_lists_are_deduplicated() {
        let eg = EditGrammar::for_minilang(
            &["a".into(), "a".into(), PLACEHOLDER.into()],
            &["0".into(), "0".into()],
        );
        assert_eq!(eg.frequent_ids, vec!["a".to_string()]);
        assert_eq!(eg.frequent_literals, vec!["0".to_string()]);
    }

    #[test]
    fn missing_role() {
        let err = derive_edit_grammar(
            minilang::grammar(),
            HostRoles {
                statement: "Statement",
                ..MINILANG_ROLES
            },
            &[],
            &[],
        )
        .unwrap_err();
        assert_eq!(err, EditError::MissingRole("Statement".into()));
    }

    #[test]
    fn provider_routing() {
        let eg = EditGrammar::for_minilang(&[], &[]);
        let s = minilang::minilang().syms;
        assert_eq!(eg.responsible(eg.modify), [false, false, true]);
        assert_eq!(eg.responsible(eg.edit), [true, false, false]);
        assert_eq!(eg.responsible(eg.edits), [true, false, false]);
        assert_eq!(eg.responsible(eg.insert), [true, false, false]);
        assert_eq!(eg.responsible(s.hl_ident), [true, false, false]);
        assert_eq!(eg.responsible(s.expr), [true, true, false]);
        assert_eq!(eg.responsible(s.int_lit), [true, true, false]);
    }
}
