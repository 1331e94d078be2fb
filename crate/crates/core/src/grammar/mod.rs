//! Language-independent grammars and symbol-typed trees.
//!
//! A [`Grammar`] is a set of symbols plus productions. Productions may pin
//! the token of a terminal on their right-hand side (`BinOp → Op:"+"`);
//! unpinned terminals accept any token. [`Ast`] stores a tree flattened in
//! pre-order with 1-based ids, so a node's subtree is the contiguous id
//! range `id .. id + size`.

mod ast;
mod sexp;

pub use ast::{Ast, AstNode, NodeId, Tree};
pub use sexp::SexpError;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymbolKind {
    Terminal,
    Nonterminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Production {
    pub id: usize,
    pub lhs: SymbolId,
    pub rhs: Vec<SymbolId>,
    /// Pinned token per rhs position; `Some` only for terminals.
    pub tokens: Vec<Option<String>>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("production lhs `{0}` is a terminal")]
    TerminalLhs(String),
    #[error("pinned token on nonterminal `{0}`")]
    TokenOnNonterminal(String),
    #[error("nonterminal `{0}` has no production")]
    NoProduction(String),
    #[error("duplicate production for `{0}`")]
    DuplicateProduction(String),
    #[error("unknown node id {0}")]
    UnknownNode(u32),
    #[error("node {id} (`{symbol}`) conforms to {matches} productions")]
    Nonconforming { id: u32, symbol: String, matches: usize },
    #[error("node {id}: {reason}")]
    Malformed { id: u32, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grammar {
    symbols: Vec<Symbol>,
    productions: Vec<Production>,
    start: SymbolId,
    #[serde(skip)]
    by_name: HashMap<String, SymbolId>,
    #[serde(skip)]
    by_lhs: Vec<Vec<usize>>,
}

impl Grammar {
    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id.0 as usize]
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.symbols[id.0 as usize].name
    }

    pub fn is_terminal(&self, id: SymbolId) -> bool {
        self.symbol(id).kind == SymbolKind::Terminal
    }

    pub fn lookup(&self, name: &str) -> Result<SymbolId, GrammarError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| GrammarError::UnknownSymbol(name.to_string()))
    }

    pub fn start(&self) -> SymbolId {
        self.start
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn production(&self, id: usize) -> &Production {
        &self.productions[id]
    }

    pub fn num_productions(&self) -> usize {
        self.productions.len()
    }

    /// Production ids whose lhs is `sym`.
    pub fn productions_for(&self, sym: SymbolId) -> &[usize] {
        &self.by_lhs[sym.0 as usize]
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == SymbolKind::Nonterminal)
            .map(|(i, _)| SymbolId(i as u16))
    }

    /// Productions matching a node with the given symbol and children
    /// `(symbol, token)`.
    pub fn matching_productions<'a>(
        &'a self,
        lhs: SymbolId,
        children: &'a [(SymbolId, Option<&'a str>)],
    ) -> impl Iterator<Item = usize> + 'a {
        self.productions_for(lhs).iter().copied().filter(move |&p| {
            let prod = &self.productions[p];
            prod.rhs.len() == children.len()
                && prod
                    .rhs
                    .iter()
                    .zip(&prod.tokens)
                    .zip(children)
                    .all(|((s, pin), (cs, ct))| {
                        s == cs && pin.as_deref().is_none_or(|pin| Some(pin) == *ct)
                    })
        })
    }

    /// The unique production a nonterminal node of `tree` was built with.
    pub fn production_of(&self, tree: &Ast, id: NodeId) -> Result<usize, GrammarError> {
        let node = tree.node(id)?;
        let children: Vec<(SymbolId, Option<&str>)> = node
            .children
            .iter()
            .map(|c| {
                let n = tree.node(*c).expect("child ids are valid");
                (n.symbol, n.token.as_deref())
            })
            .collect();
        let matches: Vec<usize> = self.matching_productions(node.symbol, &children).collect();
        match matches.as_slice() {
            [p] => Ok(*p),
            _ => Err(GrammarError::Nonconforming {
                id: id.0,
                symbol: self.name(node.symbol).to_string(),
                matches: matches.len(),
            }),
        }
    }

    /// Checks that every node of `tree` conforms to exactly one production
    /// and that tokens appear exactly on terminals.
    pub fn check(&self, tree: &Ast) -> Result<(), GrammarError> {
        for node in tree.nodes() {
            if node.symbol.0 as usize >= self.symbols.len() {
                return Err(GrammarError::Malformed {
                    id: node.id.0,
                    reason: format!("symbol id {} outside grammar", node.symbol.0),
                });
            }
            if self.is_terminal(node.symbol) {
                if node.token.is_none() || !node.children.is_empty() {
                    return Err(GrammarError::Malformed {
                        id: node.id.0,
                        reason: format!("terminal `{}` needs a token and no children", self.name(node.symbol)),
                    });
                }
            } else {
                if node.token.is_some() {
                    return Err(GrammarError::Malformed {
                        id: node.id.0,
                        reason: format!("nonterminal `{}` carries a token", self.name(node.symbol)),
                    });
                }
                self.production_of(tree, node.id)?;
            }
        }
        Ok(())
    }

    fn reindex(&mut self) {
        self.by_name = self
            .symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), SymbolId(i as u16)))
            .collect();
        self.by_lhs = vec![Vec::new(); self.symbols.len()];
        for p in &self.productions {
            self.by_lhs[p.lhs.0 as usize].push(p.id);
        }
    }

    /// Restores lookup tables after deserialization.
    pub fn rebuild_index(mut self) -> Self {
        self.reindex();
        self
    }
}

/// Incremental construction with invariant checks in [`GrammarBuilder::build`].
#[derive(Debug, Clone, Default)]
pub struct GrammarBuilder {
    symbols: Vec<Symbol>,
    by_name: HashMap<String, SymbolId>,
    productions: Vec<(SymbolId, Vec<(SymbolId, Option<String>)>)>,
}

impl GrammarBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from an existing grammar's symbol table (same ids) without
    /// its productions.
    pub fn with_symbols_of(g: &Grammar) -> Self {
        Self {
            symbols: g.symbols.clone(),
            by_name: g.by_name.clone(),
            productions: Vec::new(),
        }
    }

    pub fn symbol(&mut self, name: &str, kind: SymbolKind) -> Result<SymbolId, GrammarError> {
        if self.by_name.contains_key(name) {
            return Err(GrammarError::DuplicateSymbol(name.to_string()));
        }
        let id = SymbolId(self.symbols.len() as u16);
        self.symbols.push(Symbol {
            name: name.to_string(),
            kind,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn nonterminal(&mut self, name: &str) -> Result<SymbolId, GrammarError> {
        self.symbol(name, SymbolKind::Nonterminal)
    }

    pub fn terminal(&mut self, name: &str) -> Result<SymbolId, GrammarError> {
        self.symbol(name, SymbolKind::Terminal)
    }

    pub fn id(&self, name: &str) -> Result<SymbolId, GrammarError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| GrammarError::UnknownSymbol(name.to_string()))
    }

    /// Adds `lhs → rhs...`; an rhs item `Op:+` pins the terminal `Op` to
    /// the token `+`.
    pub fn rule(&mut self, lhs: &str, rhs: &[&str]) -> Result<(), GrammarError> {
        let lhs = self.id(lhs)?;
        let mut items = Vec::with_capacity(rhs.len());
        for item in rhs {
            let (name, token) = match item.split_once(':') {
                Some((n, t)) => (n, Some(t.to_string())),
                None => (*item, None),
            };
            items.push((self.id(name)?, token));
        }
        self.productions.push((lhs, items));
        Ok(())
    }

    pub fn rule_ids(&mut self, lhs: SymbolId, rhs: Vec<(SymbolId, Option<String>)>) {
        self.productions.push((lhs, rhs));
    }

    pub fn build(self, start: &str) -> Result<Grammar, GrammarError> {
        let start = self.id(start)?;
        let mut productions = Vec::with_capacity(self.productions.len());
        for (i, (lhs, items)) in self.productions.into_iter().enumerate() {
            let lhs_sym = &self.symbols[lhs.0 as usize];
            if lhs_sym.kind == SymbolKind::Terminal {
                return Err(GrammarError::TerminalLhs(lhs_sym.name.clone()));
            }
            for (s, t) in &items {
                if t.is_some() && self.symbols[s.0 as usize].kind == SymbolKind::Nonterminal {
                    return Err(GrammarError::TokenOnNonterminal(
                        self.symbols[s.0 as usize].name.clone(),
                    ));
                }
            }
            let (rhs, tokens) = items.into_iter().unzip();
            productions.push(Production {
                id: i,
                lhs,
                rhs,
                tokens,
            });
        }
        let mut g = Grammar {
            symbols: self.symbols,
            productions,
            start,
            by_name: HashMap::new(),
            by_lhs: Vec::new(),
        };
        g.reindex();
        for nt in g.nonterminals().collect::<Vec<_>>() {
            let prods = g.productions_for(nt);
            if prods.is_empty() {
                return Err(GrammarError::NoProduction(g.name(nt).to_string()));
            }
            for (i, a) in prods.iter().enumerate() {
                for b in &prods[i + 1..] {
                    let (pa, pb) = (&g.productions[*a], &g.productions[*b]);
                    if pa.rhs == pb.rhs && pa.tokens == pb.tokens {
                        return Err(GrammarError::DuplicateProduction(g.name(nt).to_string()));
                    }
                }
            }
        }
        Ok(g)
    }
}
