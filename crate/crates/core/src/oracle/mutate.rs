//! Inverse-edit mutations: each turns a fixed program into a buggy one whose
//! repair is a single-statement edit.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{diff_single_hunk, HunkKind, PatchPair, Seed};
use crate::grammar::{Ast, NodeId, Tree};
use crate::minilang::{collect_identifiers, minilang, print, CompiledProgram, IdentType, DEFAULT_FUEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    OperatorSwap,
    LiteralChange,
    IdentifierSwap,
    ArgumentChange,
    StatementDeletion,
}

impl MutationKind {
    pub const ALL: [MutationKind; 5] = [
        MutationKind::OperatorSwap,
        MutationKind::LiteralChange,
        MutationKind::IdentifierSwap,
        MutationKind::ArgumentChange,
        MutationKind::StatementDeletion,
    ];
}

/// Mutations that change exactly one token.
pub const SINGLE_TOKEN_MUTATIONS: [MutationKind; 4] = [
    MutationKind::OperatorSwap,
    MutationKind::LiteralChange,
    MutationKind::IdentifierSwap,
    MutationKind::ArgumentChange,
];

const OP_GROUPS: [&[&str]; 3] = [&["+", "-", "*"], &["<", "<=", ">", ">=", "==", "!="], &["&&", "||"]];

fn nodes_of(ast: &Ast, sym: crate::grammar::SymbolId) -> Vec<NodeId> {
    ast.ids().filter(|i| ast.get(*i).symbol == sym).collect()
}

fn replace(ast: &Ast, id: NodeId, with: &Tree) -> Tree {
    fn go(ast: &Ast, cur: NodeId, id: NodeId, with: &Tree) -> Tree {
        if cur == id {
            return with.clone();
        }
        if !ast.is_ancestor_or_self(cur, id) {
            return ast.to_tree(cur).expect("node exists");
        }
        let n = ast.get(cur);
        Tree {
            symbol: n.symbol,
            token: n.token.clone(),
            children: n.children.iter().map(|c| go(ast, *c, id, with)).collect(),
        }
    }
    go(ast, ast.root(), id, with)
}

fn operator_swap<R: Rng + ?Sized>(ast: &Ast, rng: &mut R) -> Option<Ast> {
    let s = minilang().syms;
    let op = *nodes_of(ast, s.bin_op).choose(rng)?;
    let leaf = ast.get(op).children[0];
    let tok = ast.get(leaf).token.as_deref()?;
    let group = OP_GROUPS.iter().find(|g| g.contains(&tok))?;
    let alt: Vec<&&str> = group.iter().filter(|o| **o != tok).collect();
    ast.with_token(leaf, **alt.choose(rng)?).ok()
}

fn literal_change<R: Rng + ?Sized>(ast: &Ast, rng: &mut R) -> Option<Ast> {
    let s = minilang().syms;
    let lit = *nodes_of(ast, s.int_lit).choose(rng)?;
    let leaf = ast.get(lit).children[0];
    let v: i64 = ast.get(leaf).token.as_deref()?.parse().ok()?;
    let new = match rng.gen_range(0..3) {
        0 => v + 1,
        1 if v > 0 => v - 1,
        _ => rng.gen_range(0..10),
    };
    (new != v).then(|| ast.with_token(leaf, new.to_string()).ok()).flatten()
}

/// Enclosing statement of `id`.
fn stmt_of(ast: &Ast, id: NodeId) -> Option<NodeId> {
    let s = minilang().syms;
    ast.ancestors(id).find(|a| ast.get(*a).symbol == s.stmt)
}

fn identifier_swap<R: Rng + ?Sized>(ast: &Ast, rng: &mut R) -> Option<Ast> {
    let s = minilang().syms;
    let uses: Vec<NodeId> = nodes_of(ast, s.hl_ident)
        .into_iter()
        .filter(|i| {
            let p = ast.get(*i).parent.map(|p| ast.get(p).symbol);
            p == Some(s.expr) || p == Some(s.call) || p == Some(s.assign)
        })
        .collect();
    let node = *uses.choose(rng)?;
    let leaf = ast.get(node).children[0];
    let name = ast.get(leaf).token.clone()?;
    let visible = collect_identifiers(ast, stmt_of(ast, node)?).ok()?;
    let own = visible.iter().find(|i| i.name == name)?.ty.clone();
    let is_call = ast.get(ast.get(node).parent?).symbol == s.call;
    let alts: Vec<&str> = visible
        .iter()
        .filter(|i| i.name != name && i.ty == own && matches!(i.ty, IdentType::Func { .. }) == is_call)
        .map(|i| i.name.as_str())
        .collect();
    ast.with_token(leaf, *alts.choose(rng)?).ok()
}

fn argument_change<R: Rng + ?Sized>(ast: &Ast, rng: &mut R) -> Option<Ast> {
    let s = minilang().syms;
    let m = minilang();
    // argument expressions that are a single variable or literal
    let args: Vec<NodeId> = nodes_of(ast, s.args)
        .into_iter()
        .filter_map(|a| ast.get(a).children.first().copied())
        .filter(|e| {
            let n = ast.get(*e);
            n.size == 3 && {
                let inner = ast.get(n.children[0]).symbol;
                inner == s.hl_ident || inner == s.int_lit
            }
        })
        .collect();
    let arg = *args.choose(rng)?;
    let visible = collect_identifiers(ast, stmt_of(ast, arg)?).ok()?;
    let current = ast.get(ast.get(ast.get(arg).children[0]).children[0]).token.clone()?;
    let mut options: Vec<Tree> = visible
        .iter()
        .filter(|i| i.ty == IdentType::Var(crate::minilang::Ty::Int) && i.name != current)
        .map(|i| m.expr_ident(&i.name))
        .collect();
    options.extend((0..10).filter(|v| v.to_string() != current).map(|v| m.expr_int(v)));
    let with = options.choose(rng)?;
    Some(Ast::from_tree(&replace(ast, arg, with)))
}

fn statement_deletion<R: Rng + ?Sized>(ast: &Ast, rng: &mut R) -> Option<Ast> {
    let s = minilang().syms;
    // statements followed by another one in the same block
    let cands: Vec<NodeId> = nodes_of(ast, s.stmts)
        .into_iter()
        .filter(|seq| {
            let n = ast.get(*seq);
            n.children.len() == 2
                && !ast.get(n.children[1]).children.is_empty()
                && ast.get(ast.get(n.children[0]).children[0]).symbol != s.ret
        })
        .collect();
    let seq = *cands.choose(rng)?;
    let rest = ast.to_tree(ast.get(seq).children[1]).ok()?;
    Some(Ast::from_tree(&replace(ast, seq, &rest)))
}

/// One mutant of `fixed`, unfiltered.
pub fn mutate_once<R: Rng + ?Sized>(fixed: &Ast, kind: MutationKind, rng: &mut R) -> Option<Ast> {
    match kind {
        MutationKind::OperatorSwap => operator_swap(fixed, rng),
        MutationKind::LiteralChange => literal_change(fixed, rng),
        MutationKind::IdentifierSwap => identifier_swap(fixed, rng),
        MutationKind::ArgumentChange => argument_change(fixed, rng),
        MutationKind::StatementDeletion => statement_deletion(fixed, rng),
    }
}

/// `n` distinct pairs built by mutating random seeds with random `kinds`.
/// Buggy programs typecheck, differ from the seed in a single hunk, and fail
/// at least one seed test. Returns fewer pairs only if the seeds run out of
/// distinct mutants.
pub fn mutate_corpus(seeds: &[Seed], n: usize, kinds: &[MutationKind], rng_seed: u64) -> Vec<PatchPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(n);
    if seeds.is_empty() || kinds.is_empty() {
        return out;
    }
    let compiled: Vec<Option<CompiledProgram>> =
        seeds.iter().map(|s| CompiledProgram::compile(&s.program).ok()).collect();
    let mut seen = HashSet::new();
    let mut attempts = 0usize;
    while out.len() < n && attempts < n.saturating_mul(200).max(1000) {
        attempts += 1;
        let si = rng.gen_range(0..seeds.len());
        let seed = &seeds[si];
        if compiled[si].is_none() {
            continue;
        }
        let kind = *kinds.choose(&mut rng).expect("non-empty");
        let Some(buggy) = mutate_once(&seed.program, kind, &mut rng) else {
            continue;
        };
        let Ok(prog) = CompiledProgram::compile(&buggy) else {
            continue;
        };
        let Ok(hunk) = diff_single_hunk(&buggy, &seed.program) else {
            continue;
        };
        if (kind == MutationKind::StatementDeletion) != (hunk.kind == HunkKind::Insert) {
            continue;
        }
        if !seed.tests.is_empty() && seed.tests.iter().all(|t| prog.run(t, DEFAULT_FUEL).passed()) {
            continue;
        }
        let Ok(text) = print(&buggy) else { continue };
        if !seen.insert(text) {
            continue;
        }
        out.push(PatchPair {
            id: format!("p{rng_seed}-{:05}", out.len()),
            buggy,
            fixed: seed.program.clone(),
            tests: seed.tests.clone(),
            mutation: Some(kind),
        });
    }
    out
}
