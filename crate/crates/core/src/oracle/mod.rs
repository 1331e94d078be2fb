//! Training data: hunk detection on (buggy, fixed) pairs, oracle edit
//! scripts, identifier abstraction, synthetic corpora and the dataset file.

mod mutate;
mod seed;

pub use mutate::{mutate_corpus, mutate_once, MutationKind, SINGLE_TOKEN_MUTATIONS};
pub use seed::{generate_seeds, Seed, SeedConfig};

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::edit::{apply, linearize, Action, EditContext, EditGrammar};
use crate::grammar::{Ast, NodeId, Tree};
use crate::minilang::{self, minilang, parse, print, ParseError, TestCase};
use crate::placeholder::{find_placeholders, instantiate_all};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HunkKind {
    Insert,
    Modify,
}

/// The single change between a buggy and a fixed program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hunk {
    pub kind: HunkKind,
    /// Statement of the buggy program to repair. For insertions, the
    /// statement the new one goes in front of.
    pub faulty: NodeId,
    /// Buggy node replaced by a modification (the faulty statement for
    /// insertions).
    pub target: NodeId,
    /// Fixed-program node that is generated: the replacement subtree, or the
    /// inserted statement.
    pub replacement: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum Reject {
    #[error("programs are identical")]
    Identical,
    #[error("change spans more than one statement")]
    MultiHunk,
    #[error("change is outside any statement")]
    OutsideStatement,
    #[error("insertion at the end of a block")]
    InsertAtEnd,
    #[error("fix needs more than one placeholder")]
    TooManyPlaceholders,
    #[error("literal {0} is neither frequent nor copyable")]
    UnrepresentableLiteral(String),
    #[error("identifier {0} is not in scope for the placeholder")]
    UnreachableIdentifier(String),
    #[error("oracle script does not reproduce the fix")]
    RoundTrip,
}

impl Reject {
    pub fn label(&self) -> &'static str {
        match self {
            Reject::Identical => "identical",
            Reject::MultiHunk => "multi_hunk",
            Reject::OutsideStatement => "outside_statement",
            Reject::InsertAtEnd => "insert_at_end",
            Reject::TooManyPlaceholders => "too_many_placeholders",
            Reject::UnrepresentableLiteral(_) => "unrepresentable_literal",
            Reject::UnreachableIdentifier(_) => "unreachable_identifier",
            Reject::RoundTrip => "round_trip",
        }
    }
}

/// Locates the single differing statement of `buggy` and `fixed`.
pub fn diff_single_hunk(buggy: &Ast, fixed: &Ast) -> Result<Hunk, Reject> {
    if buggy.structural_equal(fixed) {
        return Err(Reject::Identical);
    }
    let s = minilang().syms;
    let mut path = Vec::new();
    let (mut b, mut f) = (buggy.root(), fixed.root());
    loop {
        path.push((b, f));
        let (bn, fn_) = (buggy.get(b), fixed.get(f));
        if bn.symbol == s.stmts && fn_.symbol == s.stmts && fn_.children.len() == 2 {
            if fixed.subtree_equal(fn_.children[1], buggy, b) {
                return match bn.children.first() {
                    Some(stmt) => Ok(Hunk {
                        kind: HunkKind::Insert,
                        faulty: *stmt,
                        target: *stmt,
                        replacement: fn_.children[0],
                    }),
                    None => Err(Reject::InsertAtEnd),
                };
            }
        }
        if bn.symbol != fn_.symbol || bn.token != fn_.token || bn.children.len() != fn_.children.len() {
            break;
        }
        let mut differing = bn
            .children
            .iter()
            .zip(&fn_.children)
            .filter(|(x, y)| !buggy.subtree_equal(**x, fixed, **y));
        match (differing.next(), differing.next()) {
            (Some((x, y)), None) => {
                b = *x;
                f = *y;
            }
            _ => break,
        }
    }
    // Widen until the pair is a replaceable subtree of a common symbol.
    while let Some(&(b, f)) = path.last() {
        if buggy.get(b).symbol == fixed.get(f).symbol && buggy.get(b).size > 1 {
            break;
        }
        path.pop();
    }
    let &(target, replacement) = path.last().ok_or(Reject::MultiHunk)?;
    let mut cur = target;
    loop {
        let sym = buggy.get(cur).symbol;
        if sym == s.stmt {
            return Ok(Hunk {
                kind: HunkKind::Modify,
                faulty: cur,
                target,
                replacement,
            });
        }
        if sym == s.stmts || sym == s.block {
            return Err(Reject::MultiHunk);
        }
        match buggy.get(cur).parent {
            Some(p) => cur = p,
            None => return Err(Reject::OutsideStatement),
        }
    }
}

/// A (buggy, fixed) program pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchPair {
    pub id: String,
    pub buggy: Ast,
    pub fixed: Ast,
    pub tests: Vec<TestCase>,
    pub mutation: Option<MutationKind>,
}

/// An accepted pair with its oracle script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub id: String,
    pub kind: HunkKind,
    pub ctx: EditContext,
    pub script: Ast,
    pub actions: Vec<Action>,
    /// Identifier abstracted to the placeholder, if any.
    pub placeholder_value: Option<String>,
}

impl TrainingExample {
    /// Puts the recorded identifier back in place of the placeholder.
    pub fn reconcretize(&self, applied: &Ast) -> Ast {
        match (&self.placeholder_value, find_placeholders(applied).first()) {
            (Some(v), Some(hole)) => applied.with_token(*hole, v.clone()).expect("placeholder is a terminal"),
            _ => applied.clone(),
        }
    }
}

struct Encoder<'a> {
    eg: &'a EditGrammar,
    fixed: &'a Ast,
    ctx: &'a EditContext,
    copy_enabled: bool,
    placeholder_value: Option<String>,
}

impl Encoder<'_> {
    fn copy_source(&self, node: NodeId) -> Option<NodeId> {
        let n = self.fixed.get(node);
        if !self.copy_enabled || n.size <= 1 || !self.eg.responsible(n.symbol)[1] {
            return None;
        }
        let prog = &self.ctx.program;
        prog.descendants(self.ctx.method).find(|m| {
            let mn = prog.get(*m);
            mn.symbol == n.symbol && mn.size == n.size && prog.subtree_equal(*m, self.fixed, node)
        })
    }

    fn encode(&mut self, node: NodeId) -> Result<Tree, Reject> {
        let eg = self.eg;
        if let Some(src) = self.copy_source(node) {
            let sym = self.fixed.get(node).symbol;
            return Ok(Tree::node(sym, vec![Tree::leaf(eg.node_id, src.0.to_string())]));
        }
        let n = self.fixed.get(node);
        if n.symbol == eg.identifier {
            let leaf = self.fixed.get(n.children[0]);
            let name = leaf.token.clone().unwrap_or_default();
            if eg.frequent_ids.contains(&name) {
                return Ok(Tree::node(n.symbol, vec![Tree::leaf(leaf.symbol, name)]));
            }
            if self.placeholder_value.is_some() {
                return Err(Reject::TooManyPlaceholders);
            }
            self.placeholder_value = Some(name);
            return Ok(Tree::node(n.symbol, vec![Tree::leaf(leaf.symbol, minilang::PLACEHOLDER)]));
        }
        if Some(n.symbol) == eg.literal {
            let leaf = self.fixed.get(n.children[0]);
            let lit = leaf.token.clone().unwrap_or_default();
            if eg.frequent_literals.contains(&lit) {
                return Ok(Tree::node(n.symbol, vec![Tree::leaf(leaf.symbol, lit)]));
            }
            return Err(Reject::UnrepresentableLiteral(lit));
        }
        if n.children.is_empty() {
            return Ok(match &n.token {
                Some(t) => Tree::leaf(n.symbol, t.clone()),
                None => Tree::node(n.symbol, vec![]),
            });
        }
        let children = n
            .children
            .clone()
            .into_iter()
            .map(|c| self.encode(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Tree::node(n.symbol, children))
    }
}

/// Builds the minimal oracle script for `pair`.
///
/// Generated subtrees reuse method subtrees through copies when
/// `copy_enabled` (largest match first, earliest id on ties); identifiers
/// outside the frequent set become the placeholder.
pub fn extract_oracle(eg: &EditGrammar, pair: &PatchPair, copy_enabled: bool) -> Result<TrainingExample, Reject> {
    let hunk = diff_single_hunk(&pair.buggy, &pair.fixed)?;
    let ctx = EditContext::for_minilang(pair.buggy.clone(), hunk.faulty).map_err(|_| Reject::OutsideStatement)?;
    let mut enc = Encoder {
        eg,
        fixed: &pair.fixed,
        ctx: &ctx,
        copy_enabled,
        placeholder_value: None,
    };
    let generated = enc.encode(hunk.replacement)?;
    let placeholder_value = enc.placeholder_value;
    let edit = match hunk.kind {
        HunkKind::Insert => Tree::node(eg.insert, vec![generated]),
        HunkKind::Modify => Tree::node(
            eg.modify,
            vec![Tree::leaf(eg.node_id, hunk.target.0.to_string()), generated],
        ),
    };
    let end = Tree::node(eg.edits, vec![Tree::leaf(eg.end, "end")]);
    let script = Ast::from_tree(&Tree::node(
        eg.edits,
        vec![Tree::node(eg.edit, vec![edit]), end],
    ));
    let actions = linearize(eg, &script).map_err(|_| Reject::RoundTrip)?;
    let example = TrainingExample {
        id: pair.id.clone(),
        kind: hunk.kind,
        ctx,
        script,
        actions,
        placeholder_value,
    };
    let applied = apply(eg, &example.script, &example.ctx).map_err(|_| Reject::RoundTrip)?;
    if !example.reconcretize(&applied).structural_equal(&pair.fixed) {
        return Err(Reject::RoundTrip);
    }
    // e.g. a fresh local declared by the fix: no instantiation can name it
    if let Some(v) = &example.placeholder_value {
        let reachable = instantiate_all(&applied, &example.ctx)
            .is_ok_and(|all| all.iter().any(|i| i.program.structural_equal(&pair.fixed)));
        if !reachable {
            return Err(Reject::UnreachableIdentifier(v.clone()));
        }
    }
    Ok(example)
}

/// Identifier and literal tokens that occur in generated fix subtrees more
/// than `threshold` times, most frequent first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub identifiers: Vec<String>,
    pub literals: Vec<String>,
}

impl Vocabulary {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a PatchPair>, threshold: usize) -> Self {
        let s = minilang().syms;
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut lits: HashMap<String, usize> = HashMap::new();
        for p in pairs {
            let Ok(h) = diff_single_hunk(&p.buggy, &p.fixed) else {
                continue;
            };
            for n in p.fixed.descendants(h.replacement) {
                let node = p.fixed.get(n);
                let Some(tok) = &node.token else { continue };
                if node.symbol == s.ident {
                    *ids.entry(tok.clone()).or_default() += 1;
                } else if node.symbol == s.int {
                    *lits.entry(tok.clone()).or_default() += 1;
                }
            }
        }
        let ranked = |m: HashMap<String, usize>| {
            let mut v: Vec<(String, usize)> = m.into_iter().filter(|(_, c)| *c > threshold).collect();
            v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            v.into_iter().map(|(t, _)| t).collect()
        };
        Self {
            identifiers: ranked(ids),
            literals: ranked(lits),
        }
    }

    pub fn edit_grammar(&self) -> EditGrammar {
        EditGrammar::for_minilang(&self.identifiers, &self.literals)
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Stable 80/20 train/validation assignment by id hash.
pub fn is_validation(id: &str) -> bool {
    fnv1a(id) % 5 == 0
}

/// One line of the dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub buggy_source: String,
    pub fixed_source: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<TestCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<MutationKind>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("pair {id}: {source}")]
    Parse { id: String, source: ParseError },
    #[error("pair {id}: program contains a placeholder")]
    Print { id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PatchPair {
    pub fn to_record(&self) -> Result<PairRecord, DatasetError> {
        let pr = |a: &Ast| print(a).map_err(|_| DatasetError::Print { id: self.id.clone() });
        Ok(PairRecord {
            id: self.id.clone(),
            buggy_source: pr(&self.buggy)?,
            fixed_source: pr(&self.fixed)?,
            tests: self.tests.clone(),
            mutation: self.mutation,
        })
    }

    pub fn from_record(r: &PairRecord) -> Result<Self, DatasetError> {
        let p = |src: &str| {
            parse(src).map_err(|source| DatasetError::Parse {
                id: r.id.clone(),
                source,
            })
        };
        Ok(Self {
            id: r.id.clone(),
            buggy: p(&r.buggy_source)?,
            fixed: p(&r.fixed_source)?,
            tests: r.tests.clone(),
            mutation: r.mutation,
        })
    }
}

pub fn write_jsonl<W: Write>(mut w: W, pairs: &[PatchPair]) -> Result<(), DatasetError> {
    for p in pairs {
        let line = serde_json::to_string(&p.to_record()?).map_err(|source| DatasetError::Json { line: 0, source })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<PatchPair>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord =
            serde_json::from_str(&line).map_err(|source| DatasetError::Json { line: i + 1, source })?;
        out.push(PatchPair::from_record(&rec)?);
    }
    Ok(out)
}
