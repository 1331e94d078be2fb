//! Code reader input: the surrounding method flattened in pre-order, with
//! token ids, statement tags and the normalized AST graph.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use editrepair_core::edit::{EditContext, EditGrammar, RuleKind};
use editrepair_core::grammar::{Ast, NodeId};

/// Position of a node relative to the faulty statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Faulty = 0,
    Before = 1,
    After = 2,
    Other = 3,
}

pub const NUM_TAGS: usize = 4;

const NONE: &str = "<none>";
const UNK: &str = "<unk>";

/// Terminal tokens the code reader can tell apart. Identifiers outside the
/// frequent set are renamed per method to `local_k` in order of first
/// occurrence, so equal names stay equal without growing the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    first_local: usize,
    locals: usize,
}

fn key(symbol: &str, token: &str) -> String {
    format!("{symbol}:{token}")
}

impl TokenVocab {
    pub fn new(eg: &EditGrammar, max_locals: usize) -> Self {
        let g = &eg.grammar;
        let mut tokens = vec![NONE.to_string(), UNK.to_string()];
        for (i, p) in g.productions().iter().enumerate() {
            if !matches!(eg.kind(i), RuleKind::Host | RuleKind::FrequentIdent | RuleKind::FrequentLiteral) {
                continue;
            }
            for (s, t) in p.rhs.iter().zip(&p.tokens) {
                if let Some(t) = t {
                    let k = key(g.name(*s), t);
                    if !tokens.contains(&k) {
                        tokens.push(k);
                    }
                }
            }
        }
        let first_local = tokens.len();
        tokens.extend((0..max_locals).map(|k| format!("<local_{k}>")));
        let mut v = Self {
            tokens,
            index: HashMap::new(),
            first_local,
            locals: max_locals,
        };
        v.reindex();
        v
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    fn lookup(&self, symbol: &str, token: &str) -> Option<usize> {
        self.index.get(&key(symbol, token)).copied()
    }
}

/// Featurized method around a faulty statement. Index `i` is node
/// `method + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeInput {
    pub method: NodeId,
    pub symbols: Vec<usize>,
    pub tokens: Vec<usize>,
    pub tags: Vec<usize>,
    /// Nonzero entries `(i, j, Â_ij)` of the normalized adjacency.
    pub edges: Vec<(u32, u32, f64)>,
}

impl CodeInput {
    pub fn new(eg: &EditGrammar, vocab: &TokenVocab, ctx: &EditContext) -> Self {
        let prog = &ctx.program;
        let g = &eg.grammar;
        let ids: Vec<NodeId> = prog.descendants(ctx.method).collect();
        let base = ctx.method.0;
        let (before, after) = neighbours(eg, prog, ctx.faulty);
        let inside = |s: Option<NodeId>, n: NodeId| s.is_some_and(|s| prog.is_ancestor_or_self(s, n));

        let mut locals: HashMap<&str, usize> = HashMap::new();
        let mut tokens = Vec::with_capacity(ids.len());
        let mut tags = Vec::with_capacity(ids.len());
        let mut symbols = Vec::with_capacity(ids.len());
        for &n in &ids {
            let node = prog.get(n);
            symbols.push(node.symbol.0 as usize);
            let tok = match &node.token {
                None => 0,
                Some(t) => {
                    let sym = g.name(node.symbol);
                    let is_ident = node.parent.is_some_and(|p| prog.get(p).symbol == eg.identifier);
                    match vocab.lookup(sym, t) {
                        Some(i) => i,
                        None if is_ident => {
                            let next = locals.len();
                            let k = *locals.entry(t.as_str()).or_insert(next);
                            if k < vocab.locals {
                                vocab.first_local + k
                            } else {
                                1
                            }
                        }
                        None => 1,
                    }
                }
            };
            tokens.push(tok);
            let tag = if prog.is_ancestor_or_self(ctx.faulty, n) {
                Tag::Faulty
            } else if inside(before, n) {
                Tag::Before
            } else if inside(after, n) {
                Tag::After
            } else {
                Tag::Other
            };
            tags.push(tag as usize);
        }

        // edges to each child and to the left sibling
        let mut raw: Vec<(u32, u32)> = Vec::new();
        for &n in &ids {
            let i = n.0 - base;
            let node = prog.get(n);
            for c in &node.children {
                raw.push((i, c.0 - base));
            }
            if n != ctx.method {
                if let (Some(p), Some(k)) = (node.parent, prog.child_index(n)) {
                    if k > 0 {
                        raw.push((i, prog.get(p).children[k - 1].0 - base));
                    }
                }
            }
        }
        let edges = normalize(ids.len(), &raw);
        Self {
            method: ctx.method,
            symbols,
            tokens,
            tags,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Position of program node `n` in the sequence.
    pub fn position(&self, n: NodeId) -> Option<usize> {
        let i = n.0.checked_sub(self.method.0)? as usize;
        (i < self.len()).then_some(i)
    }

    /// Dense row-major `Â`.
    pub fn dense_adjacency(&self) -> Vec<f64> {
        let l = self.len();
        let mut a = vec![0.0; l * l];
        for &(i, j, w) in &self.edges {
            a[i as usize * l + j as usize] = w;
        }
        a
    }
}

/// `Â = S₁^{-1/2} A S₂^{-1/2}` with row degrees `S₁` and column degrees
/// `S₂`, each at least 1.
pub fn normalize(n: usize, edges: &[(u32, u32)]) -> Vec<(u32, u32, f64)> {
    let mut out_deg = vec![0usize; n];
    let mut in_deg = vec![0usize; n];
    for &(i, j) in edges {
        out_deg[i as usize] += 1;
        in_deg[j as usize] += 1;
    }
    edges
        .iter()
        .map(|&(i, j)| {
            let s1 = out_deg[i as usize].max(1) as f64;
            let s2 = in_deg[j as usize].max(1) as f64;
            (i, j, 1.0 / (s1 * s2).sqrt())
        })
        .collect()
}

/// Statements immediately before and after `stmt` in its enclosing list.
fn neighbours(eg: &EditGrammar, prog: &Ast, stmt: NodeId) -> (Option<NodeId>, Option<NodeId>) {
    let Some(list) = prog.get(stmt).parent else {
        return (None, None);
    };
    let list_sym = prog.get(list).symbol;
    let is_stmt = |n: NodeId| prog.get(n).symbol == eg.statement;
    let before = prog
        .get(list)
        .parent
        .filter(|p| prog.get(*p).symbol == list_sym)
        .and_then(|p| prog.get(p).children.first().copied())
        .filter(|s| *s != stmt && is_stmt(*s));
    let after = prog
        .get(list)
        .children
        .iter()
        .find(|c| prog.get(**c).symbol == list_sym)
        .and_then(|tail| prog.get(*tail).children.first().copied())
        .filter(|s| is_stmt(*s));
    (before, after)
}

#[cfg(test)]
mod tests {
    use super::*;
    use editrepair_core::minilang::{minilang, parse};

    fn ctx(src: &str, nth: usize) -> EditContext {
        let ast = parse(src).unwrap();
        let s = ast.ids().filter(|i| ast.get(*i).symbol == minilang().syms.stmt).nth(nth).unwrap();
        EditContext::for_minilang(ast, s).unwrap()
    }

    #[test]
    fn tags_follow_statement_order() {
        let c = ctx("fn f(a: int): int { var x: int = 1; x = x + a; var y: int = 2; return x; }", 1);
        let eg = EditGrammar::for_minilang(&[], &[]);
        let v = TokenVocab::new(&eg, 4);
        let inp = CodeInput::new(&eg, &v, &c);
        let stmts: Vec<NodeId> =
            c.program.ids().filter(|i| c.program.get(*i).symbol == minilang().syms.stmt).collect();
        let tag_of = |n: NodeId| inp.tags[inp.position(n).unwrap()];
        assert_eq!(tag_of(stmts[0]), Tag::Before as usize);
        assert_eq!(tag_of(stmts[1]), Tag::Faulty as usize);
        assert_eq!(tag_of(stmts[2]), Tag::After as usize);
        assert_eq!(tag_of(stmts[3]), Tag::Other as usize);
        assert_eq!(tag_of(c.method), Tag::Other as usize);
        assert_eq!(inp.len(), c.program.get(c.method).size as usize);
    }

    #[test]
    fn rare_identifiers_become_locals_in_order() {
        let c = ctx("fn f(zed: int): int { var q: int = zed; return q + zed; }", 0);
        let eg = EditGrammar::for_minilang(&["q".into()], &[]);
        let v = TokenVocab::new(&eg, 1);
        let inp = CodeInput::new(&eg, &v, &c);
        let names: Vec<&str> = inp
            .tokens
            .iter()
            .zip(c.program.descendants(c.method))
            .filter(|(_, n)| c.program.get(*n).symbol == minilang().syms.ident)
            .map(|(t, _)| v.token(*t))
            .collect();
        // f is the first rare name, zed the second and past the cap
        assert_eq!(names, vec!["<local_0>", "<unk>", "Ident:q", "<unk>", "Ident:q", "<unk>"]);
        let op = inp.tokens.iter().find(|t| v.token(**t) == "Op:+");
        assert!(op.is_some());
    }

    #[test]
    fn two_node_path_normalization() {
        // 0 -> 1 only: row degree 1, column degree 1
        assert_eq!(normalize(2, &[(0, 1)]), vec![(0, 1, 1.0)]);
        let e = normalize(3, &[(0, 1), (0, 2), (2, 1)]);
        assert!((e[0].2 - 1.0 / 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-12);
        assert!((e[1].2 - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn edges_are_children_and_left_siblings() {
        let c = ctx("fn f(a: int): int { return a; }", 0);
        let eg = EditGrammar::for_minilang(&[], &[]);
        let inp = CodeInput::new(&eg, &TokenVocab::new(&eg, 4), &c);
        let base = c.method.0;
        let mut expect = 0;
        for n in c.program.descendants(c.method) {
            let node = c.program.get(n);
            expect += node.children.len();
            if n != c.method && c.program.child_index(n).unwrap() > 0 {
                expect += 1;
                let left = c.program.get(node.parent.unwrap()).children[c.program.child_index(n).unwrap() - 1];
                assert!(inp.edges.iter().any(|e| (e.0, e.1) == (n.0 - base, left.0 - base)));
            }
        }
        assert_eq!(inp.edges.len(), expect);
    }
}
