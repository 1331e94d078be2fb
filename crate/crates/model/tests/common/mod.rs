#![allow(dead_code)]

use editrepair_core::edit::Action;
use editrepair_core::oracle::*;
use editrepair_model::layers::Dropout;
use editrepair_model::{Model, ModelConfig, Prepared};
use editrepair_tensor::{Adam, Graph, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn pairs(seeds: usize, n: usize, seed: u64) -> Vec<PatchPair> {
    let seeds = generate_seeds(seeds, SeedConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed));
    mutate_corpus(&seeds, n, &MutationKind::ALL, seed)
}

pub fn tiny<T: Scalar>(pairs: &[PatchPair], seed: u64) -> Model<T> {
    Model::new(ModelConfig::tiny(), Vocabulary::from_pairs(pairs, 2), seed).unwrap()
}

pub fn examples<T: Scalar>(model: &Model<T>, pairs: &[PatchPair]) -> Vec<TrainingExample> {
    pairs.iter().filter_map(|p| extract_oracle(&model.eg, p, true).ok()).collect()
}

pub fn has_copy(ex: &TrainingExample) -> bool {
    ex.actions.iter().any(|a| matches!(a, Action::Copy(_)))
}

pub fn has_modify(ex: &TrainingExample) -> bool {
    ex.actions.iter().any(|a| matches!(a, Action::Modify(_)))
}

/// Smallest example (by method size) satisfying `f`.
pub fn smallest<'a>(exs: &'a [TrainingExample], f: impl Fn(&TrainingExample) -> bool) -> &'a TrainingExample {
    exs.iter()
        .filter(|e| f(e))
        .min_by_key(|e| e.ctx.program.get(e.ctx.method).size)
        .expect("an example with the requested shape")
}

/// Full-batch Adam on `exs` until every summed NLL is below `target`.
pub fn fit<T: Scalar>(model: &mut Model<T>, exs: &[Prepared], lr: f64, max_steps: usize, target: f64) -> usize {
    let mut adam = Adam::new(lr);
    for step in 0..max_steps {
        let mut g = Graph::new(&model.params);
        let mut total = None;
        for ex in exs {
            let l = model.loss(&mut g, ex, &mut Dropout::off()).unwrap();
            total = Some(match total {
                None => l,
                Some(t) => g.add(t, l).unwrap(),
            });
        }
        let total = total.unwrap();
        let grads = g.backward(total).unwrap();
        drop(g);
        adam.step(&mut model.params, &grads);
        if step % 10 == 9 && exs.iter().all(|e| model.nll(e).unwrap() < target) {
            return step + 1;
        }
    }
    max_steps
}
