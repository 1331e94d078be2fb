mod common;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use common::*;
use editrepair_core::edit::{validate_script, Action, DecodePolicy, EditContext};
use editrepair_core::oracle::TrainingExample;
use editrepair_model::layers::Dropout;
use editrepair_model::{beam_search, greedy, BeamConfig, Candidate, Hypothesis, Model, Session};
use editrepair_tensor::Graph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A tiny model overfit on four examples, shared by the decoding tests.
fn trained() -> &'static (Model<f64>, Vec<TrainingExample>) {
    static CELL: OnceLock<(Model<f64>, Vec<TrainingExample>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let ps = pairs(10, 40, 11);
        let mut model: Model<f64> = tiny(&ps, 1);
        let exs = examples(&model, &ps);
        let mut picked: Vec<TrainingExample> = Vec::new();
        picked.push(smallest(&exs, has_copy).clone());
        picked.push(smallest(&exs, |e| has_modify(e) && !has_copy(e)).clone());
        picked.push(smallest(&exs, |e| e.placeholder_value.is_some()).clone());
        picked.push(smallest(&exs, |e| !has_modify(e)).clone());
        let prep: Vec<_> = picked.iter().map(|e| model.prepare_example(e).unwrap()).collect();
        fit(&mut model, &prep, 1e-2, 3000, 0.05);
        (model, picked)
    })
}

#[test]
fn training_scores_match_unmasked_inference() {
    let ps = pairs(10, 30, 4);
    let model: Model<f64> = tiny(&ps, 2);
    let policy = DecodePolicy::default();
    for ex in examples(&model, &ps).iter().take(6) {
        let prep = model.prepare_example(ex).unwrap();
        let mut g = Graph::no_grad(&model.params);
        let lp = model.net.step_log_probs(&mut g, &prep, &mut Dropout::off()).unwrap();
        let lp = g.to_vec(lp);
        let session = Session::new(&model, &ex.ctx).unwrap();
        let mut h = vec![session.initial()];
        for (k, a) in ex.actions.iter().enumerate() {
            let s = session.step(&mut h, &policy, false).unwrap()[0].clone().unwrap();
            let got = s.score(*a, ex.ctx.method);
            assert!((got - lp[k]).abs() < 1e-9, "{}: step {k}: {got} vs {}", ex.id, lp[k]);
            h = vec![session.advance(&h[0], *a, 0.0).unwrap()];
        }
        assert!(h[0].script.is_complete());
    }
}

#[test]
fn masking_laws_on_random_trajectories() {
    let ps = pairs(10, 30, 5);
    let model: Model<f32> = tiny(&ps, 4);
    let eg = &model.eg;
    let policy = DecodePolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut steps = 0;
    while steps < 2000 {
        let p = ps.choose(&mut rng).unwrap();
        let stmts: Vec<_> = p.buggy.ids().filter(|i| p.buggy.get(*i).symbol == eg.statement).collect();
        let ctx = EditContext::for_minilang(p.buggy.clone(), *stmts.choose(&mut rng).unwrap()).unwrap();
        let session = Session::new(&model, &ctx).unwrap();
        let mut h = vec![session.initial()];
        for _ in 0..48 {
            let sym = h[0].script.frontier_symbol().unwrap();
            let Some(s) = session.step(&mut h, &policy, true).unwrap().remove(0) else {
                break;
            };
            steps += 1;
            let o = s.combined();
            assert!(o.iter().all(|x| x.is_finite() && *x >= 0.0));
            assert!((o.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let lam: Vec<f64> = s.log_lambda.iter().map(|x| x.exp()).collect();
            let resp = eg.responsible(sym);
            for k in 0..3 {
                if !resp[k] {
                    assert_eq!(lam[k], 0.0);
                }
            }
            if sym == eg.modify {
                assert_eq!(lam, vec![0.0, 0.0, 1.0]);
            }
            if sym == eg.edit {
                assert_eq!(lam, vec![1.0, 0.0, 0.0]);
            }
            let base = ctx.method.0;
            for (r, x) in s.rules.iter().enumerate() {
                if !s.legal.rules.contains(&r) {
                    assert_eq!(x.exp(), 0.0);
                }
            }
            for (i, x) in s.copies.iter().enumerate() {
                if !s.legal.copies.iter().any(|n| (n.0 - base) as usize == i) {
                    assert_eq!(x.exp(), 0.0);
                }
            }
            for (i, x) in s.locates.iter().enumerate() {
                if !s.legal.modifies.iter().any(|n| (n.0 - base) as usize == i) {
                    assert_eq!(x.exp(), 0.0);
                }
            }
            let choices = s.choices(ctx.method);
            let (a, _) = choices[rng.gen_range(0..choices.len())];
            h = vec![session.advance(&h[0], a, 0.0).unwrap()];
            if h[0].script.is_complete() {
                assert!(validate_script(eg, &h[0].script.to_ast(), &ctx).is_ok());
                break;
            }
        }
    }
}

#[test]
fn single_rule_frontier_is_certain() {
    let ps = pairs(6, 10, 6);
    let model: Model<f64> = tiny(&ps, 4);
    let ex = &examples(&model, &ps)[0];
    let session = Session::new(&model, &ex.ctx).unwrap();
    let policy = DecodePolicy::default();
    let mut h = vec![session.initial()];
    for a in &ex.actions {
        let s = session.step(&mut h, &policy, true).unwrap().remove(0).unwrap();
        let choices = s.choices(ex.ctx.method);
        if choices.len() == 1 {
            assert_eq!(choices[0].1, 0.0);
        }
        h = vec![session.advance(&h[0], *a, 0.0).unwrap()];
    }
}

#[test]
fn faulty_statement_changes_code_features() {
    let ps = pairs(6, 10, 8);
    let model: Model<f64> = tiny(&ps, 4);
    let p = &ps[0];
    let stmts: Vec<_> = p.buggy.ids().filter(|i| p.buggy.get(*i).symbol == model.eg.statement).collect();
    let feats = |s| {
        let ctx = EditContext::for_minilang(p.buggy.clone(), s).unwrap();
        let prep = model.prepare(&ctx, &[]).err();
        assert!(prep.is_some(), "an empty trajectory is rejected");
        let code = editrepair_model::CodeInput::new(&model.eg, &model.vocab, &ctx);
        let mut g = Graph::no_grad(&model.params);
        let c = model.net.code_reader(&mut g, &code, &mut Dropout::off()).unwrap();
        (ctx.method, g.to_vec(c))
    };
    let (m0, a) = feats(stmts[0]);
    let (m1, b) = feats(stmts[1]);
    if m0 == m1 {
        assert_ne!(a, b);
    }
}

#[test]
fn beam_scripts_are_valid_sorted_and_distinct() {
    let (model, exs) = trained();
    for ex in exs {
        let cfg = BeamConfig {
            beam: 20,
            candidates: 20,
            ..BeamConfig::default()
        };
        let cands = beam_search(model, &ex.ctx, &cfg).unwrap();
        assert!(!cands.is_empty());
        for w in cands.windows(2) {
            assert!(w[0].log_prob >= w[1].log_prob);
            assert_ne!(w[0].text, w[1].text);
        }
        for c in &cands {
            assert!(validate_script(&model.eg, &c.script, &ex.ctx).is_ok());
            assert!(editrepair_core::placeholder::find_placeholders(&c.script).len() <= 1);
            assert!((rescore(model, &ex.ctx, c) - c.log_prob).abs() < 1e-9);
        }
        let again = beam_search(model, &ex.ctx, &cfg).unwrap();
        assert_eq!(cands, again);
    }
}

fn rescore(model: &Model<f64>, ctx: &EditContext, c: &Candidate) -> f64 {
    let actions = editrepair_core::edit::linearize(&model.eg, &c.script).unwrap();
    let session = Session::new(model, ctx).unwrap();
    let mut h = vec![session.initial()];
    let mut total = 0.0;
    for a in actions {
        let s = session.step(&mut h, &DecodePolicy::default(), true).unwrap().remove(0).unwrap();
        total += s.score(a, ctx.method);
        h = vec![session.advance(&h[0], a, 0.0).unwrap()];
    }
    total
}

#[test]
fn overfit_model_decodes_oracle_greedily() {
    let (model, exs) = trained();
    for ex in exs {
        let c = greedy(model, &ex.ctx, DecodePolicy::default()).unwrap().expect("a complete script");
        assert!(c.script.structural_equal(&ex.script), "{}: {}", ex.id, c.text);
    }
}

#[test]
fn beam_of_one_is_argmax_walk() {
    let (model, exs) = trained();
    let policy = DecodePolicy::default();
    for ex in exs {
        let session = Session::new(model, &ex.ctx).unwrap();
        let mut h = vec![session.initial()];
        while !h[0].script.is_complete() {
            let s = session.step(&mut h, &policy, true).unwrap().remove(0).unwrap();
            let best = s
                .choices(ex.ctx.method)
                .into_iter()
                .fold(None::<(Action, f64)>, |b, c| match b {
                    Some(b) if b.1 >= c.1 => Some(b),
                    _ => Some(c),
                })
                .unwrap();
            h = vec![session.advance(&h[0], best.0, best.1).unwrap()];
        }
        let walk = h[0].script.to_ast();
        let g = greedy(model, &ex.ctx, policy).unwrap().unwrap();
        assert!(g.script.structural_equal(&walk));
        assert!((g.log_prob - h[0].log_prob).abs() < 1e-12);
    }
}

struct Entry(f64, usize, Hypothesis<f64>);
impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then(o.1.cmp(&self.1))
    }
}

/// Exact top-`k` complete scripts by best-first search: log-probabilities
/// never increase along a trajectory, so completions pop in order.
fn exact_top(model: &Model<f64>, ctx: &EditContext, k: usize, budget: usize) -> Vec<(String, f64)> {
    let session = Session::new(model, ctx).unwrap();
    let policy = DecodePolicy::default();
    let mut heap = BinaryHeap::new();
    heap.push(Entry(0.0, 0, session.initial()));
    let mut out = Vec::new();
    let mut counter = 1;
    while let Some(Entry(lp, _, h)) = heap.pop() {
        if h.script.is_complete() {
            let text = h.script.to_ast().to_sexp(&model.eg.grammar);
            if !out.iter().any(|(t, _)| *t == text) {
                out.push((text, lp));
            }
            if out.len() == k {
                break;
            }
            continue;
        }
        counter += 1;
        assert!(counter < budget, "enumeration budget exhausted");
        let mut hs = vec![h];
        let Some(s) = session.step(&mut hs, &policy, true).unwrap().remove(0) else {
            continue;
        };
        for (a, x) in s.choices(ctx.method) {
            let next = session.advance(&hs[0], a, x).unwrap();
            counter += 1;
            heap.push(Entry(next.log_prob, counter, next));
        }
    }
    out
}

#[test]
fn wide_beam_matches_exhaustive_enumeration() {
    let (model, exs) = trained();
    for ex in exs.iter().take(2) {
        let exact = exact_top(model, &ex.ctx, 3, 20_000);
        let cfg = BeamConfig {
            beam: 100,
            candidates: 3,
            ..BeamConfig::default()
        };
        let beam: Vec<(String, f64)> = beam_search(model, &ex.ctx, &cfg)
            .unwrap()
            .into_iter()
            .map(|c| (c.text, c.log_prob))
            .collect();
        assert_eq!(beam.len(), exact.len());
        for (b, e) in beam.iter().zip(&exact) {
            assert_eq!(b.0, e.0);
            assert!((b.1 - e.1).abs() < 1e-9);
        }
    }
}

#[test]
fn top_candidate_does_not_get_worse_with_wider_beams() {
    let (model, exs) = trained();
    for ex in exs {
        let mut last = f64::NEG_INFINITY;
        for b in [1, 2, 5, 20] {
            let cfg = BeamConfig {
                beam: b,
                candidates: 5,
                ..BeamConfig::default()
            };
            let top = beam_search(model, &ex.ctx, &cfg).unwrap()[0].log_prob;
            assert!(top >= last - 1e-12, "{}: beam {b}: {top} < {last}", ex.id);
            last = top;
        }
    }
}

#[test]
fn checkpoint_round_trip_preserves_decoding() {
    let (model, exs) = trained();
    // checkpoints hold f32 payloads
    let model: Model<f32> = model.cast();
    let model = &model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt");
    model.save(&path, serde_json::json!({"epoch": 3})).unwrap();
    let (back, meta) = Model::<f32>::load(&path).unwrap();
    assert_eq!(meta["epoch"], 3);
    assert_eq!(back.hyperparameters(), model.hyperparameters());
    for ex in exs {
        let a = model.nll(&model.prepare_example(ex).unwrap()).unwrap();
        let b = back.nll(&back.prepare_example(ex).unwrap()).unwrap();
        assert_eq!(a, b);
        let cfg = BeamConfig {
            beam: 5,
            candidates: 5,
            ..BeamConfig::default()
        };
        assert_eq!(beam_search(model, &ex.ctx, &cfg).unwrap(), beam_search(&back, &ex.ctx, &cfg).unwrap());
    }
}

#[test]
fn untrained_outputs_stay_finite() {
    let ps = pairs(8, 20, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let policy = DecodePolicy::default();
    let mut trials = 0;
    for seed in 0..5 {
        let model: Model<f32> = tiny(&ps, 100 + seed);
        while trials < 2000 * (seed as usize + 1) {
            let p = ps.choose(&mut rng).unwrap();
            let stmts: Vec<_> = p.buggy.ids().filter(|i| p.buggy.get(*i).symbol == model.eg.statement).collect();
            let ctx = EditContext::for_minilang(p.buggy.clone(), *stmts.choose(&mut rng).unwrap()).unwrap();
            let session = Session::new(&model, &ctx).unwrap();
            let mut h = vec![session.initial()];
            while trials < 2000 * (seed as usize + 1) {
                let Some(s) = session.step(&mut h, &policy, true).unwrap().remove(0) else {
                    break;
                };
                trials += 1;
                assert!(s.log_lambda.iter().chain(&s.rules).chain(&s.copies).chain(&s.locates).all(|x| !x.is_nan()));
                let choices = s.choices(ctx.method);
                let a = choices[rng.gen_range(0..choices.len())].0;
                h = vec![session.advance(&h[0], a, 0.0).unwrap()];
                if h[0].script.is_complete() || h[0].script.steps().len() > 40 {
                    break;
                }
            }
        }
    }
    assert_eq!(trials, 10_000);
}
