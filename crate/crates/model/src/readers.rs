//! The three readers and the provider heads, with the batched forward pass
//! used for training: one graph per example, all expansion steps at once.

use std::rc::Rc;

use editrepair_core::edit::{Action, EditContext, EditError, EditGrammar, PartialScript, Provider};
use editrepair_tensor::{Graph, Init, ParamId, Scalar, TensorError, Var};

use crate::config::ModelConfig;
use crate::features::{CodeInput, TokenVocab, NUM_TAGS};
use crate::layers::{
    constant_f64, positions, Attention, Dropout, FeedForward, Gating, Linear, Pointer, Registry, TreeConv,
};

#[derive(Debug, Clone, Copy)]
pub struct CodeBlock {
    pub att: Attention,
    pub gate: Gating,
    pub conv: TreeConv,
}

#[derive(Debug, Clone, Copy)]
pub struct AstBlock {
    pub att: Attention,
    pub gate: Gating,
    pub cross: Attention,
    pub conv: TreeConv,
}

#[derive(Debug, Clone, Copy)]
pub struct PathBlock {
    pub att: Attention,
    pub ast: Attention,
    pub code: Attention,
    pub ffn: FeedForward,
}

/// Parameter handles of the whole network.
#[derive(Debug, Clone)]
pub struct Net {
    pub d: usize,
    pub num_rules: usize,
    pub num_symbols: usize,
    pub max_slots: usize,
    pub position_offset: usize,
    pub code_sym: ParamId,
    pub code_tok: ParamId,
    pub code_tag: ParamId,
    pub code_blocks: Vec<CodeBlock>,
    /// Rows `0..num_rules` are productions, the last row is the start token.
    pub rule_emb: ParamId,
    /// Left-hand-side symbol of each rule; the last row is the start token.
    pub lhs_emb: ParamId,
    pub target: Linear,
    pub ast_blocks: Vec<AstBlock>,
    pub path_sym: ParamId,
    pub path_slot: ParamId,
    pub path_blocks: Vec<PathBlock>,
    pub rule_out: Linear,
    pub copier: Pointer,
    pub locator: Pointer,
    pub decider: Linear,
}

impl Net {
    pub fn new<T: Scalar>(
        r: &mut Registry<'_, T>,
        cfg: &ModelConfig,
        eg: &EditGrammar,
        vocab: &TokenVocab,
    ) -> Result<Self, TensorError> {
        let d = cfg.d_model;
        let h = cfg.heads;
        let emb = Init::Normal((1.0 / d as f64).sqrt());
        let num_rules = eg.num_rules();
        let num_symbols = eg.grammar.symbols().len();
        let code_sym = r.param("code.sym", num_symbols, d, emb)?;
        let code_tok = r.param("code.tok", vocab.len(), d, emb)?;
        let code_tag = r.param("code.tag", NUM_TAGS, d, emb)?;
        let code_blocks = (0..cfg.code_blocks)
            .map(|b| {
                let p = format!("code.{b}");
                Ok(CodeBlock {
                    att: Attention::new(r, &format!("{p}.att"), d, h)?,
                    gate: Gating::new(r, &format!("{p}.gate"), d)?,
                    conv: TreeConv::new(r, &format!("{p}.conv"), d)?,
                })
            })
            .collect::<Result<_, TensorError>>()?;
        let rule_emb = r.param("ast.rule", num_rules + 1, d, emb)?;
        let lhs_emb = r.param("ast.lhs", num_symbols + 1, d, emb)?;
        let target = Linear::new(r, "ast.target", d, d, false)?;
        let ast_blocks = (0..cfg.ast_blocks)
            .map(|b| {
                let p = format!("ast.{b}");
                Ok(AstBlock {
                    att: Attention::new(r, &format!("{p}.att"), d, h)?,
                    gate: Gating::new(r, &format!("{p}.gate"), d)?,
                    cross: Attention::new(r, &format!("{p}.cross"), d, h)?,
                    conv: TreeConv::new(r, &format!("{p}.conv"), d)?,
                })
            })
            .collect::<Result<_, TensorError>>()?;
        let path_sym = r.param("path.sym", num_symbols, d, emb)?;
        let path_slot = r.param("path.slot", cfg.max_slots, d, emb)?;
        let path_blocks = (0..cfg.path_blocks)
            .map(|b| {
                let p = format!("path.{b}");
                Ok(PathBlock {
                    att: Attention::new(r, &format!("{p}.att"), d, h)?,
                    ast: Attention::new(r, &format!("{p}.ast"), d, h)?,
                    code: Attention::new(r, &format!("{p}.code"), d, h)?,
                    ffn: FeedForward::new(r, &format!("{p}.ffn"), d, 4 * d)?,
                })
            })
            .collect::<Result<_, TensorError>>()?;
        Ok(Self {
            d,
            num_rules,
            num_symbols,
            max_slots: cfg.max_slots,
            position_offset: cfg.position_offset,
            code_sym,
            code_tok,
            code_tag,
            code_blocks,
            rule_emb,
            lhs_emb,
            target,
            ast_blocks,
            path_sym,
            path_slot,
            path_blocks,
            rule_out: Linear::new(r, "decode.rule", d, num_rules, true)?,
            copier: Pointer::new(r, "decode.copy", d)?,
            locator: Pointer::new(r, "decode.locate", d)?,
            decider: Linear::new(r, "decode.decider", d, 3, true)?,
        })
    }

    fn pos<T: Scalar>(&self, g: &mut Graph<'_, T>, p: impl Iterator<Item = usize>) -> Result<Var, TensorError> {
        let p: Vec<usize> = p.map(|i| i + self.position_offset).collect();
        positions(g, &p, self.d)
    }

    /// Code features, `L × d`.
    pub fn code_reader<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        input: &CodeInput,
        drop: &mut Dropout<'_>,
    ) -> Result<Var, TensorError> {
        let l = input.len();
        let sym = g.param_by_id(self.code_sym);
        let tok = g.param_by_id(self.code_tok);
        let tag = g.param_by_id(self.code_tag);
        let s = g.embedding_lookup(sym, &input.symbols)?;
        let t = g.embedding_lookup(tok, &input.tokens)?;
        let p = self.pos(g, 0..l)?;
        let x = g.add(s, t)?;
        let mut x = g.add(x, p)?;
        let tags = g.embedding_lookup(tag, &input.tags)?;
        let adj = constant_f64(g, l, l, &input.dense_adjacency())?;
        for b in &self.code_blocks {
            let a = b.att.forward(g, x, x, None)?;
            let a = drop.apply(g, a);
            let a = g.add(x, a)?;
            let u = b.gate.forward(g, a, a, tags)?;
            let u = drop.apply(g, u);
            let u = g.add(a, u)?;
            let c = b.conv.forward(g, adj, u)?;
            let c = drop.apply(g, c);
            x = g.add(u, c)?;
        }
        Ok(x)
    }

    /// Input embedding and rule encoding of AST reader rows.
    pub(crate) fn ast_inputs<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        rows: &[AstRow],
        first: usize,
        target_rows: Var,
    ) -> Result<(Var, Var), TensorError> {
        let re = g.param_by_id(self.rule_emb);
        let le = g.param_by_id(self.lhs_emb);
        let rules: Vec<usize> = rows.iter().map(|r| r.rule).collect();
        let lhs: Vec<usize> = rows.iter().map(|r| r.lhs).collect();
        let x = g.embedding_lookup(re, &rules)?;
        let p = self.pos(g, first..first + rows.len())?;
        let x = g.add(x, p)?;
        let c2 = g.embedding_lookup(le, &lhs)?;
        let t = self.target.forward(g, target_rows)?;
        let c2 = g.add(c2, t)?;
        Ok((x, c2))
    }

    /// AST reader features for every row, `S × d`. Row `i` only depends on
    /// rows `0..=i`.
    pub fn ast_reader<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        rows: &[AstRow],
        code: Var,
        drop: &mut Dropout<'_>,
    ) -> Result<Var, TensorError> {
        let s = rows.len();
        let (l, d) = g.shape(code);
        let zero = g.constant(1, d, vec![T::zero(); d])?;
        let padded = g.concat_rows(&[code, zero])?;
        let tgt: Vec<usize> = rows.iter().map(|r| r.target.unwrap_or(l)).collect();
        let tgt = g.gather_rows(padded, &tgt)?;
        let (mut x, c2) = self.ast_inputs(g, rows, 0, tgt)?;
        let causal: Rc<[bool]> = (0..s * s).map(|k| k % s > k / s).collect::<Vec<_>>().into();
        let adj = constant_f64(g, s, s, &ast_adjacency(rows))?;
        for b in &self.ast_blocks {
            let a = b.att.forward(g, x, x, Some(&causal))?;
            let a = drop.apply(g, a);
            let a = g.add(x, a)?;
            let u = b.gate.forward(g, a, a, c2)?;
            let u = drop.apply(g, u);
            let u = g.add(a, u)?;
            let c = b.cross.forward(g, u, code, None)?;
            let c = drop.apply(g, c);
            let c = g.add(u, c)?;
            let t = b.conv.forward(g, adj, c)?;
            let t = drop.apply(g, t);
            x = g.add(c, t)?;
        }
        Ok(x)
    }

    /// Embedded path rows.
    pub(crate) fn path_inputs<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        paths: &[&[(usize, usize)]],
    ) -> Result<Var, TensorError> {
        let ps = g.param_by_id(self.path_sym);
        let pl = g.param_by_id(self.path_slot);
        let syms: Vec<usize> = paths.iter().flat_map(|p| p.iter().map(|x| x.0)).collect();
        let slots: Vec<usize> = paths
            .iter()
            .flat_map(|p| p.iter().map(|x| x.1.min(self.max_slots - 1)))
            .collect();
        let x = g.embedding_lookup(ps, &syms)?;
        let sl = g.embedding_lookup(pl, &slots)?;
        let x = g.add(x, sl)?;
        let p = self.pos(g, paths.iter().flat_map(|p| 0..p.len()))?;
        g.add(x, p)
    }

    /// One decoder block over stacked path rows. `self_mask`/`ast_mask` are
    /// absent when every row belongs to the same step.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn path_block<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        b: &PathBlock,
        x: Var,
        self_mask: Option<&Rc<[bool]>>,
        ast_kv: (Var, Var),
        ast_mask: Option<&Rc<[bool]>>,
        code_kv: (Var, Var),
        drop: &mut Dropout<'_>,
    ) -> Result<Var, TensorError> {
        let a = b.att.forward(g, x, x, self_mask)?;
        let a = drop.apply(g, a);
        let a = g.add(x, a)?;
        let c = b.ast.attend(g, a, ast_kv.0, ast_kv.1, ast_mask)?;
        let c = drop.apply(g, c);
        let c = g.add(a, c)?;
        let e = b.code.attend(g, c, code_kv.0, code_kv.1, None)?;
        let e = drop.apply(g, e);
        let e = g.add(c, e)?;
        let f = b.ffn.forward(g, e)?;
        let f = drop.apply(g, f);
        g.add(e, f)
    }

    /// `d_t` for every step, `S × d`: the last path row of each step.
    pub fn path_reader<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        paths: &[Vec<(usize, usize)>],
        ast: Var,
        code: Var,
        drop: &mut Dropout<'_>,
    ) -> Result<Var, TensorError> {
        let s_ast = g.shape(ast).0;
        let owner: Vec<usize> = paths.iter().enumerate().flat_map(|(t, p)| std::iter::repeat(t).take(p.len())).collect();
        let n = owner.len();
        let self_mask: Rc<[bool]> = (0..n * n).map(|k| owner[k / n] != owner[k % n]).collect::<Vec<_>>().into();
        let ast_mask: Rc<[bool]> = (0..n * s_ast).map(|k| k % s_ast > owner[k / s_ast]).collect::<Vec<_>>().into();
        let refs: Vec<&[(usize, usize)]> = paths.iter().map(|p| p.as_slice()).collect();
        let mut x = self.path_inputs(g, &refs)?;
        for b in &self.path_blocks {
            let ast_kv = b.ast.memory(g, ast)?;
            let code_kv = b.code.memory(g, code)?;
            x = self.path_block(g, b, x, Some(&self_mask), ast_kv, Some(&ast_mask), code_kv, drop)?;
        }
        let mut last = Vec::with_capacity(paths.len());
        let mut end = 0;
        for p in paths {
            end += p.len();
            last.push(end - 1);
        }
        g.gather_rows(x, &last)
    }

    /// Log-probability of each oracle choice without logic masks, `S × 1`.
    pub fn step_log_probs<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        ex: &Prepared,
        drop: &mut Dropout<'_>,
    ) -> Result<Var, TensorError> {
        let code = self.code_reader(g, &ex.code, drop)?;
        let ast = self.ast_reader(g, &ex.rows, code, drop)?;
        let dmat = self.path_reader(g, &ex.paths, ast, code, drop)?;
        let lam = self.decider.forward(g, dmat)?;
        let lam = g.log_softmax(lam);
        let providers: Vec<usize> = ex.targets.iter().map(|t| t.provider as usize).collect();
        let lam = g.pick_cols(lam, &providers)?;

        let mut order = Vec::new();
        let mut parts = Vec::new();
        for p in [Provider::Rule, Provider::Copy, Provider::Locate] {
            let steps: Vec<usize> = (0..ex.targets.len()).filter(|t| ex.targets[*t].provider == p).collect();
            if steps.is_empty() {
                continue;
            }
            let idx: Vec<usize> = steps.iter().map(|t| ex.targets[*t].index).collect();
            let rows = g.gather_rows(dmat, &steps)?;
            let scores = match p {
                Provider::Rule => self.rule_out.forward(g, rows)?,
                Provider::Copy => {
                    let pm = self.copier.memory(g, code)?;
                    self.copier.scores(g, rows, pm)?
                }
                Provider::Locate => {
                    let pm = self.locator.memory(g, code)?;
                    self.locator.scores(g, rows, pm)?
                }
            };
            let lp = g.log_softmax(scores);
            parts.push(g.pick_cols(lp, &idx)?);
            order.extend(steps);
        }
        let picked = if parts.len() == 1 { parts[0] } else { g.concat_rows(&parts)? };
        // back to step order
        let mut inv = vec![0; order.len()];
        for (k, t) in order.iter().enumerate() {
            inv[*t] = k;
        }
        let picked = g.gather_rows(picked, &inv)?;
        g.add(lam, picked)
    }

    /// Summed negative log-likelihood of the oracle choices.
    pub fn loss<T: Scalar>(&self, g: &mut Graph<'_, T>, ex: &Prepared, drop: &mut Dropout<'_>) -> Result<Var, TensorError> {
        let lp = self.step_log_probs(g, ex, drop)?;
        let s = g.reduce_sum(lp);
        Ok(g.scale(s, -1.0))
    }
}

/// One row of the AST reader: the start token or an applied expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AstRow {
    /// Production id, or `num_rules` for the start token.
    pub rule: usize,
    /// Left-hand-side symbol, or `num_symbols` for the start token.
    pub lhs: usize,
    /// Code position of a copy source or modify target.
    pub target: Option<usize>,
    pub parent: Option<usize>,
    pub left: Option<usize>,
}

impl AstRow {
    pub fn start(net: &Net) -> Self {
        Self {
            rule: net.num_rules,
            lhs: net.num_symbols,
            target: None,
            parent: None,
            left: None,
        }
    }

    /// Row for step `k` of `ps`.
    pub fn for_step(eg: &EditGrammar, code: &CodeInput, ps: &PartialScript, k: usize) -> Self {
        let s = &ps.steps()[k];
        let target = match s.action {
            Action::Rule(_) => None,
            Action::Copy(n) | Action::Modify(n) => code.position(n),
        };
        Self {
            rule: s.rule,
            lhs: eg.grammar.production(s.rule).lhs.0 as usize,
            target,
            parent: Some(s.parent_step.map_or(0, |p| p as usize + 1)),
            left: s.left_step.map(|p| p as usize + 1),
        }
    }

    fn neighbours(&self) -> impl Iterator<Item = usize> {
        self.parent.into_iter().chain(self.left)
    }

    fn degree(&self) -> usize {
        self.neighbours().count()
    }
}

/// Normalized weights of row `i`'s edges to its parent and left sibling.
/// Both degrees are out-degrees, fixed when a row is created, so earlier
/// rows never change as the script grows.
pub fn ast_edge_weights(rows: &[AstRow], i: usize) -> Vec<(usize, f64)> {
    let di = rows[i].degree().max(1) as f64;
    rows[i]
        .neighbours()
        .map(|j| (j, 1.0 / (di * rows[j].degree().max(1) as f64).sqrt()))
        .collect()
}

fn ast_adjacency(rows: &[AstRow]) -> Vec<f64> {
    let s = rows.len();
    let mut a = vec![0.0; s * s];
    for i in 0..s {
        for (j, w) in ast_edge_weights(rows, i) {
            a[i * s + j] += w;
        }
    }
    a
}

/// Which provider makes an oracle choice, and the index of that choice in
/// its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Target {
    pub provider: Provider,
    pub index: usize,
}

/// A training example in network form.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub code: CodeInput,
    /// Start row plus all but the last expansion.
    pub rows: Vec<AstRow>,
    /// Root-to-frontier `(symbol, slot)` path before each expansion.
    pub paths: Vec<Vec<(usize, usize)>>,
    pub targets: Vec<Target>,
}

#[derive(Debug, thiserror::Error)]
pub enum PrepareError {
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error("empty action sequence")]
    Empty,
    #[error("choice {0:?} lies outside the surrounding method")]
    OutsideMethod(Action),
}

impl Prepared {
    pub fn new(
        net: &Net,
        eg: &EditGrammar,
        vocab: &TokenVocab,
        ctx: &EditContext,
        actions: &[Action],
    ) -> Result<Self, PrepareError> {
        if actions.is_empty() {
            return Err(PrepareError::Empty);
        }
        let code = CodeInput::new(eg, vocab, ctx);
        let mut ps = PartialScript::new(eg);
        let mut paths = Vec::with_capacity(actions.len());
        let mut targets = Vec::with_capacity(actions.len());
        for a in actions {
            paths.push(ps.path().iter().map(|(s, k)| (s.0 as usize, *k as usize)).collect());
            let index = match *a {
                Action::Rule(r) => r,
                Action::Copy(n) | Action::Modify(n) => code.position(n).ok_or(PrepareError::OutsideMethod(*a))?,
            };
            targets.push(Target {
                provider: a.provider(),
                index,
            });
            ps.apply(eg, ctx, *a)?;
        }
        let mut rows = vec![AstRow::start(net)];
        rows.extend((0..actions.len() - 1).map(|k| AstRow::for_step(eg, &code, &ps, k)));
        Ok(Self {
            code,
            rows,
            paths,
            targets,
        })
    }

    pub fn steps(&self) -> usize {
        self.targets.len()
    }
}
