//! Inference: per-context precomputation, incremental AST reader state and
//! the masked choice distribution of one expansion step.

use std::rc::Rc;

use editrepair_core::edit::{Action, ContextIndex, DecodePolicy, EditContext, EditError, Legal, PartialScript};
use editrepair_core::grammar::NodeId;
use editrepair_tensor::{Graph, Scalar, TensorError, Var};

use crate::features::CodeInput;
use crate::layers::{constant_f64, Dropout};
use crate::model::Model;
use crate::readers::{ast_edge_weights, AstRow};

/// AST reader activations of the rows computed so far, per block.
#[derive(Debug, Clone)]
pub struct AstCache<T> {
    rows: Vec<AstRow>,
    self_k: Vec<Vec<T>>,
    self_v: Vec<Vec<T>>,
    conv_in: Vec<Vec<T>>,
    /// Keys/values of the final features, per path block.
    out_k: Vec<Vec<T>>,
    out_v: Vec<Vec<T>>,
}

impl<T: Scalar> AstCache<T> {
    pub fn new(ast_blocks: usize, path_blocks: usize) -> Self {
        Self {
            rows: Vec::new(),
            self_k: vec![Vec::new(); ast_blocks],
            self_v: vec![Vec::new(); ast_blocks],
            conv_in: vec![Vec::new(); ast_blocks],
            out_k: vec![Vec::new(); path_blocks],
            out_v: vec![Vec::new(); path_blocks],
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// A partial script with its score and reader state.
#[derive(Debug, Clone)]
pub struct Hypothesis<T> {
    pub script: PartialScript,
    pub log_prob: f64,
    pub cache: AstCache<T>,
}

/// Distribution over the choices at one frontier. Log-probabilities; masked
/// entries are `-inf`.
#[derive(Debug, Clone)]
pub struct StepScores {
    /// `log λ` for rule predictor, tree copier, subtree locator.
    pub log_lambda: [f64; 3],
    pub rules: Vec<f64>,
    /// Over code positions (method pre-order).
    pub copies: Vec<f64>,
    pub locates: Vec<f64>,
    pub legal: Legal,
}

impl StepScores {
    /// The combined vector `[λʳ pʳ; λᵗ pᵗ; λˢ pˢ]` as probabilities.
    pub fn combined(&self) -> Vec<f64> {
        let part = |k: usize, v: &[f64]| {
            v.iter()
                .map(move |x| (self.log_lambda[k] + x).exp())
                .collect::<Vec<_>>()
        };
        let mut o = part(0, &self.rules);
        o.extend(part(1, &self.copies));
        o.extend(part(2, &self.locates));
        o
    }

    /// Log-probability of `a` at this step.
    pub fn score(&self, a: Action, method: NodeId) -> f64 {
        let (k, v, i) = match a {
            Action::Rule(r) => (0, &self.rules, r),
            Action::Copy(n) => (1, &self.copies, (n.0 - method.0) as usize),
            Action::Modify(n) => (2, &self.locates, (n.0 - method.0) as usize),
        };
        self.log_lambda[k] + v.get(i).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// Legal actions with finite scores, in legal-set order.
    pub fn choices(&self, method: NodeId) -> Vec<(Action, f64)> {
        let acts = self
            .legal
            .rules
            .iter()
            .map(|r| Action::Rule(*r))
            .chain(self.legal.copies.iter().map(|n| Action::Copy(*n)))
            .chain(self.legal.modifies.iter().map(|n| Action::Modify(*n)));
        acts.map(|a| (a, self.score(a, method)))
            .filter(|(_, s)| s.is_finite())
            .collect()
    }
}

/// Code-side constants inserted once per step graph.
struct CodeConsts {
    ast: Vec<(Var, Var)>,
    path: Vec<(Var, Var)>,
    copy: Var,
    locate: Var,
}

/// A model bound to one repair context. Code features and everything
/// derived from them are computed once.
pub struct Session<'m, T: Scalar> {
    pub model: &'m Model<T>,
    pub ctx: &'m EditContext,
    pub index: ContextIndex,
    pub code: CodeInput,
    d: usize,
    features: Vec<T>,
    ast_code: Vec<(Vec<T>, Vec<T>)>,
    path_code: Vec<(Vec<T>, Vec<T>)>,
    copy_mem: Vec<T>,
    locate_mem: Vec<T>,
}

/// Normalization in f64 so that an f32 model still sums to 1 closely.
fn log_softmax_f64<T: Scalar>(row: &[T]) -> Vec<f64> {
    let x: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

impl<'m, T: Scalar> Session<'m, T> {
    pub fn new(model: &'m Model<T>, ctx: &'m EditContext) -> Result<Self, TensorError> {
        let net = &model.net;
        let code = CodeInput::new(&model.eg, &model.vocab, ctx);
        let mut g = Graph::no_grad(&model.params);
        let feats = net.code_reader(&mut g, &code, &mut Dropout::off())?;
        let kv = |g: &mut Graph<'_, T>, att: &crate::layers::Attention| -> Result<(Vec<T>, Vec<T>), TensorError> {
            let (k, v) = att.memory(g, feats)?;
            Ok((g.to_vec(k), g.to_vec(v)))
        };
        let ast_code = net
            .ast_blocks
            .iter()
            .map(|b| kv(&mut g, &b.cross))
            .collect::<Result<_, _>>()?;
        let path_code = net
            .path_blocks
            .iter()
            .map(|b| kv(&mut g, &b.code))
            .collect::<Result<_, _>>()?;
        let copy = net.copier.memory(&mut g, feats)?;
        let locate = net.locator.memory(&mut g, feats)?;
        Ok(Self {
            model,
            ctx,
            index: ContextIndex::new(ctx),
            d: net.d,
            features: g.to_vec(feats),
            ast_code,
            path_code,
            copy_mem: g.to_vec(copy),
            locate_mem: g.to_vec(locate),
            code,
        })
    }

    pub fn initial(&self) -> Hypothesis<T> {
        Hypothesis {
            script: PartialScript::new(&self.model.eg),
            log_prob: 0.0,
            cache: AstCache::new(self.model.net.ast_blocks.len(), self.model.net.path_blocks.len()),
        }
    }

    fn consts(&self, g: &mut Graph<'_, T>) -> Result<CodeConsts, TensorError> {
        let l = self.code.len();
        let d = self.d;
        let pair = |g: &mut Graph<'_, T>, kv: &(Vec<T>, Vec<T>)| -> Result<(Var, Var), TensorError> {
            Ok((g.constant(l, d, kv.0.clone())?, g.constant(l, d, kv.1.clone())?))
        };
        let ast = self.ast_code.iter().map(|kv| pair(g, kv)).collect::<Result<_, _>>()?;
        let path = self.path_code.iter().map(|kv| pair(g, kv)).collect::<Result<_, _>>()?;
        Ok(CodeConsts {
            ast,
            path,
            copy: g.constant(l, d, self.copy_mem.clone())?,
            locate: g.constant(l, d, self.locate_mem.clone())?,
        })
    }

    /// Appends one AST reader row to `cache`.
    fn extend(&self, g: &mut Graph<'_, T>, cc: &CodeConsts, cache: &mut AstCache<T>, row: AstRow) -> Result<(), TensorError> {
        let net = &self.model.net;
        let d = self.d;
        let i = cache.rows.len();
        cache.rows.push(row);
        let tgt = match row.target {
            Some(p) => self.features[p * d..(p + 1) * d].to_vec(),
            None => vec![T::zero(); d],
        };
        let tgt = g.constant(1, d, tgt)?;
        let (mut x, c2) = net.ast_inputs(g, &[row], i, tgt)?;
        let weights = ast_edge_weights(&cache.rows, i);
        for (b, blk) in net.ast_blocks.iter().enumerate() {
            let (k, v) = blk.att.memory(g, x)?;
            let (keys, values) = if i == 0 {
                (k, v)
            } else {
                let ck = g.constant(i, d, cache.self_k[b].clone())?;
                let cv = g.constant(i, d, cache.self_v[b].clone())?;
                (g.concat_rows(&[ck, k])?, g.concat_rows(&[cv, v])?)
            };
            cache.self_k[b].extend_from_slice(g.value(k));
            cache.self_v[b].extend_from_slice(g.value(v));
            let a = blk.att.attend(g, x, keys, values, None)?;
            let a = g.add(x, a)?;
            let u = blk.gate.forward(g, a, a, c2)?;
            let u = g.add(a, u)?;
            let c = blk.cross.attend(g, u, cc.ast[b].0, cc.ast[b].1, None)?;
            let c = g.add(u, c)?;
            x = if weights.is_empty() {
                c
            } else {
                let mut adj = vec![0.0; i];
                for (j, w) in &weights {
                    adj[*j] += w;
                }
                let adj = constant_f64(g, 1, i, &adj)?;
                let mem = g.constant(i, d, cache.conv_in[b].clone())?;
                let t = blk.conv.forward(g, adj, mem)?;
                g.add(c, t)?
            };
            cache.conv_in[b].extend_from_slice(g.value(c));
        }
        for (b, blk) in net.path_blocks.iter().enumerate() {
            let (k, v) = blk.ast.memory(g, x)?;
            cache.out_k[b].extend_from_slice(g.value(k));
            cache.out_v[b].extend_from_slice(g.value(v));
        }
        Ok(())
    }

    /// Brings the reader state up to date with the script's expansions.
    fn sync(&self, g: &mut Graph<'_, T>, cc: &CodeConsts, h: &mut Hypothesis<T>) -> Result<(), TensorError> {
        let eg = &self.model.eg;
        while h.cache.len() < h.script.steps().len() + 1 {
            let row = match h.cache.len() {
                0 => AstRow::start(&self.model.net),
                n => AstRow::for_step(eg, &self.code, &h.script, n - 1),
            };
            self.extend(g, cc, &mut h.cache, row)?;
        }
        Ok(())
    }

    fn scores_in(
        &self,
        g: &mut Graph<'_, T>,
        cc: &CodeConsts,
        h: &mut Hypothesis<T>,
        policy: &DecodePolicy,
        masked: bool,
    ) -> Result<Option<StepScores>, TensorError> {
        let eg = &self.model.eg;
        let net = &self.model.net;
        let Some(sym) = h.script.frontier_symbol() else {
            return Ok(None);
        };
        self.sync(g, cc, h)?;
        let d = self.d;
        let s = h.cache.len();
        let path: Vec<(usize, usize)> = h.script.path().iter().map(|(s, k)| (s.0 as usize, *k as usize)).collect();
        let mut x = net.path_inputs(g, &[&path])?;
        for (b, blk) in net.path_blocks.iter().enumerate() {
            let ak = g.constant(s, d, h.cache.out_k[b].clone())?;
            let av = g.constant(s, d, h.cache.out_v[b].clone())?;
            x = net.path_block(g, blk, x, None, (ak, av), None, cc.path[b], &mut Dropout::off())?;
        }
        let dv = g.gather_rows(x, &[path.len() - 1])?;

        let legal = h.script.legal(eg, &self.index, policy);
        let l = self.code.len();
        let resp = eg.responsible(sym);
        let mut lam_mask = [false; 3];
        if masked {
            let nonempty = [!legal.rules.is_empty(), !legal.copies.is_empty(), !legal.modifies.is_empty()];
            for k in 0..3 {
                lam_mask[k] = !(resp[k] && nonempty[k]);
            }
            if lam_mask.iter().all(|m| *m) {
                return Ok(None);
            }
        }
        let lam = net.decider.forward(g, dv)?;
        let lam = g.masked_fill(lam, lam_mask.to_vec().into())?;
        let lv = log_softmax_f64(g.value(lam));
        let log_lambda = [lv[0], lv[1], lv[2]];

        let positions = |nodes: &[NodeId]| -> Rc<[bool]> {
            let mut m = vec![true; l];
            for n in nodes {
                if let Some(p) = self.code.position(*n) {
                    m[p] = false;
                }
            }
            m.into()
        };
        let dist = |g: &mut Graph<'_, T>, scores: Var, mask: Option<Rc<[bool]>>| -> Result<Vec<f64>, TensorError> {
            let s = match mask {
                Some(m) => g.masked_fill(scores, m)?,
                None => scores,
            };
            Ok(log_softmax_f64(g.value(s)))
        };
        let skip = |k: usize| masked && lam_mask[k];
        let rules = if skip(0) {
            vec![f64::NEG_INFINITY; net.num_rules]
        } else {
            let sc = net.rule_out.forward(g, dv)?;
            let mask = masked.then(|| {
                let mut m = vec![true; net.num_rules];
                for r in &legal.rules {
                    m[*r] = false;
                }
                Rc::<[bool]>::from(m)
            });
            dist(g, sc, mask)?
        };
        let copies = if skip(1) {
            vec![f64::NEG_INFINITY; l]
        } else {
            let sc = net.copier.scores(g, dv, cc.copy)?;
            dist(g, sc, masked.then(|| positions(&legal.copies)))?
        };
        let locates = if skip(2) {
            vec![f64::NEG_INFINITY; l]
        } else {
            let sc = net.locator.scores(g, dv, cc.locate)?;
            dist(g, sc, masked.then(|| positions(&legal.modifies)))?
        };
        Ok(Some(StepScores {
            log_lambda,
            rules,
            copies,
            locates,
            legal,
        }))
    }

    /// Scores for each hypothesis on one shared graph; `None` for complete
    /// scripts and dead ends.
    pub fn step(
        &self,
        hyps: &mut [Hypothesis<T>],
        policy: &DecodePolicy,
        masked: bool,
    ) -> Result<Vec<Option<StepScores>>, TensorError> {
        let mut g = Graph::no_grad(&self.model.params);
        let cc = self.consts(&mut g)?;
        hyps.iter_mut().map(|h| self.scores_in(&mut g, &cc, h, policy, masked)).collect()
    }

    /// Successor of `h` after `action`, already scored at `score`.
    pub fn advance(&self, h: &Hypothesis<T>, action: Action, score: f64) -> Result<Hypothesis<T>, EditError> {
        let mut next = h.clone();
        next.script.apply(&self.model.eg, self.ctx, action)?;
        next.log_prob += score;
        Ok(next)
    }
}
