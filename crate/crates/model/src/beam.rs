//! Beam search over edit scripts.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use editrepair_core::edit::{Action, DecodePolicy, EditContext};
use editrepair_core::grammar::Ast;
use editrepair_tensor::Scalar;

use crate::decoder::{Hypothesis, Session};
use crate::model::Model;
use crate::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamConfig {
    /// Partial scripts kept per step.
    pub beam: usize,
    /// Completed scripts to collect.
    pub candidates: usize,
    /// Expansion steps before giving up.
    pub max_steps: usize,
    pub policy: DecodePolicy,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam: 100,
            candidates: 100,
            max_steps: 128,
            policy: DecodePolicy::default(),
        }
    }
}

impl BeamConfig {
    pub fn greedy() -> Self {
        Self {
            beam: 1,
            candidates: 1,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub script: Ast,
    /// S-expression of the script; also the de-duplication key.
    pub text: String,
    pub log_prob: f64,
}

/// Completed scripts in descending log-probability (ties by text).
/// A script that completes leaves the beam and does not take a slot. The
/// search stops once `candidates` scripts are collected and no live partial
/// script can still outscore the worst of them.
pub fn beam_search<T: Scalar>(model: &Model<T>, ctx: &EditContext, cfg: &BeamConfig) -> Result<Vec<Candidate>, ModelError> {
    let session = Session::new(model, ctx)?;
    search(&session, cfg)
}

pub fn search<T: Scalar>(session: &Session<'_, T>, cfg: &BeamConfig) -> Result<Vec<Candidate>, ModelError> {
    let eg = &session.model.eg;
    let method = session.ctx.method;
    let mut beam = vec![session.initial()];
    let mut done: Vec<Candidate> = Vec::new();
    let mut seen = HashSet::new();
    let order = |a: &Candidate, b: &Candidate| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.text.cmp(&b.text));
    for _ in 0..cfg.max_steps {
        // scores only decrease, so nothing below the k-th best can enter
        let floor = if done.len() >= cfg.candidates {
            done.sort_by(order);
            done.truncate(cfg.candidates);
            done.last().map_or(f64::NEG_INFINITY, |c| c.log_prob)
        } else {
            f64::NEG_INFINITY
        };
        beam.retain(|h| h.log_prob > floor);
        if beam.is_empty() || cfg.candidates == 0 {
            break;
        }
        let scores = session.step(&mut beam, &cfg.policy, true)?;
        let mut expansions: Vec<(f64, usize, usize, Action)> = Vec::new();
        for (hi, s) in scores.iter().enumerate() {
            let Some(s) = s else { continue };
            for (k, (a, lp)) in s.choices(method).into_iter().enumerate() {
                let total = beam[hi].log_prob + lp;
                if total > floor {
                    expansions.push((total, hi, k, a));
                }
            }
        }
        expansions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut next: Vec<Hypothesis<T>> = Vec::with_capacity(cfg.beam);
        for (total, hi, _, a) in expansions {
            if next.len() >= cfg.beam {
                break;
            }
            let mut child = session.advance(&beam[hi], a, 0.0)?;
            child.log_prob = total;
            if child.script.is_complete() {
                if child.script.placeholders() > cfg.policy.max_placeholders {
                    continue;
                }
                let script = child.script.to_ast();
                let text = script.to_sexp(&eg.grammar);
                if seen.insert(text.clone()) {
                    done.push(Candidate {
                        script,
                        text,
                        log_prob: total,
                    });
                }
            } else {
                next.push(child);
            }
        }
        beam = next;
    }
    done.sort_by(order);
    done.truncate(cfg.candidates);
    Ok(done)
}

/// Most likely action at every step.
pub fn greedy<T: Scalar>(model: &Model<T>, ctx: &EditContext, policy: DecodePolicy) -> Result<Option<Candidate>, ModelError> {
    let cfg = BeamConfig {
        policy,
        ..BeamConfig::greedy()
    };
    Ok(beam_search(model, ctx, &cfg)?.into_iter().next())
}
