//! Random generation of edit scripts and host trees, for fuzzing.

use rand::Rng;

use super::expand::{Action, ContextIndex, DecodePolicy, PartialScript};
use super::{EditContext, EditGrammar};
use crate::grammar::{Grammar, SymbolId, Tree};

/// Minimum expansion height per symbol using the productions `allowed`.
fn min_heights(g: &Grammar, allowed: impl Fn(usize) -> bool) -> Vec<usize> {
    let n = g.symbols().len();
    let mut h: Vec<usize> = (0..n)
        .map(|i| if g.is_terminal(SymbolId(i as u16)) { 0 } else { usize::MAX })
        .collect();
    loop {
        let mut changed = false;
        for p in g.productions() {
            if !allowed(p.id) {
                continue;
            }
            let kid_max = p.rhs.iter().map(|s| h[s.0 as usize]).max().unwrap_or(0);
            if kid_max != usize::MAX && kid_max + 1 < h[p.lhs.0 as usize] {
                h[p.lhs.0 as usize] = kid_max + 1;
                changed = true;
            }
        }
        if !changed {
            return h;
        }
    }
}

/// A random complete script, legal under `policy` for `ctx`. After
/// `soft_budget` expansions every choice heads for the shortest completion.
/// `None` when generation reaches a frontier with no legal action (e.g. an
/// identifier after the placeholder budget is spent and no frequent ids).
pub fn random_script<R: Rng + ?Sized>(
    eg: &EditGrammar,
    ctx: &EditContext,
    policy: &DecodePolicy,
    rng: &mut R,
    soft_budget: usize,
) -> Option<PartialScript> {
    let idx = ContextIndex::new(ctx);
    let heights = min_heights(&eg.grammar, |r| eg.generatable_rules(eg.grammar.production(r).lhs).any(|x| x == r));
    let rule_height = |r: usize| {
        1 + eg
            .grammar
            .production(r)
            .rhs
            .iter()
            .map(|s| heights[s.0 as usize])
            .max()
            .unwrap_or(0)
    };
    let mut ps = PartialScript::new(eg);
    while !ps.is_complete() {
        let legal = ps.legal(eg, &idx, policy);
        let action = if ps.steps().len() >= soft_budget {
            let best_rule = legal.rules.iter().copied().min_by_key(|r| rule_height(*r));
            match (legal.copies.first(), legal.modifies.first(), best_rule) {
                (Some(c), _, _) => Action::Copy(*c),
                (_, Some(m), _) => Action::Modify(*m),
                (_, _, Some(r)) => Action::Rule(r),
                _ => return None,
            }
        } else {
            let groups: Vec<usize> = [legal.rules.len(), legal.copies.len(), legal.modifies.len()]
                .iter()
                .enumerate()
                .filter(|(_, n)| **n > 0)
                .map(|(i, _)| i)
                .collect();
            if groups.is_empty() {
                return None;
            }
            match groups[rng.gen_range(0..groups.len())] {
                0 => Action::Rule(legal.rules[rng.gen_range(0..legal.rules.len())]),
                1 => Action::Copy(legal.copies[rng.gen_range(0..legal.copies.len())]),
                _ => Action::Modify(legal.modifies[rng.gen_range(0..legal.modifies.len())]),
            }
        };
        ps.apply(eg, ctx, action).expect("legal action applies");
    }
    Some(ps)
}

/// A random tree of `g` rooted at `symbol`. Unpinned terminals get tokens
/// from `token`. Beyond `depth` levels the shallowest production is used.
pub fn random_host_tree<R: Rng + ?Sized>(
    g: &Grammar,
    symbol: SymbolId,
    rng: &mut R,
    depth: usize,
    token: &mut dyn FnMut(&mut R, SymbolId) -> String,
) -> Tree {
    let heights = min_heights(g, |_| true);
    fn go<R: Rng + ?Sized>(
        g: &Grammar,
        heights: &[usize],
        sym: SymbolId,
        rng: &mut R,
        depth: usize,
        token: &mut dyn FnMut(&mut R, SymbolId) -> String,
    ) -> Tree {
        let prods = g.productions_for(sym);
        let height = |p: usize| {
            g.production(p)
                .rhs
                .iter()
                .map(|s| heights[s.0 as usize])
                .max()
                .unwrap_or(0)
        };
        let p = if depth == 0 {
            *prods.iter().min_by_key(|p| height(**p)).expect("nonterminal has a production")
        } else {
            prods[rng.gen_range(0..prods.len())]
        };
        let prod = g.production(p);
        let children = prod
            .rhs
            .iter()
            .zip(&prod.tokens)
            .map(|(s, pin)| {
                if g.is_terminal(*s) {
                    let t = match pin {
                        Some(t) => t.clone(),
                        None => token(rng, *s),
                    };
                    Tree::leaf(*s, t)
                } else {
                    go(g, heights, *s, rng, depth.saturating_sub(1), token)
                }
            })
            .collect();
        Tree::node(sym, children)
    }
    go(g, &heights, symbol, rng, depth, token)
}
