use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use editrepair_core::edit::{Action, EditContext, EditGrammar};
use editrepair_core::oracle::{TrainingExample, Vocabulary};
use editrepair_tensor::{checkpoint, Graph, ParamStore, Scalar, TensorError, Var};

use crate::config::ModelConfig;
use crate::features::TokenVocab;
use crate::layers::{Dropout, Registry};
use crate::readers::{Net, Prepared, PrepareError};
use crate::ModelError;

/// Everything needed to rebuild a model around a parameter store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub config: ModelConfig,
    pub vocabulary: Vocabulary,
}

/// Network, edit grammar and token vocabulary, tied to one parameter store.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar = f32> {
    pub config: ModelConfig,
    pub vocabulary: Vocabulary,
    pub eg: EditGrammar,
    pub vocab: TokenVocab,
    pub params: ParamStore<T>,
    pub net: Net,
}

impl<T: Scalar> Model<T> {
    /// Fresh model with parameters drawn from `seed`.
    pub fn new(config: ModelConfig, vocabulary: Vocabulary, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let eg = vocabulary.edit_grammar();
        let vocab = TokenVocab::new(&eg, config.max_locals);
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Net::new(&mut Registry::init(&mut params, &mut rng), &config, &eg, &vocab)?;
        Ok(Self {
            config,
            vocabulary,
            eg,
            vocab,
            params,
            net,
        })
    }

    /// Wraps an existing store; every parameter must be present.
    pub fn from_parts(hp: Hyperparameters, mut params: ParamStore<T>) -> Result<Self, ModelError> {
        hp.config.validate()?;
        let eg = hp.vocabulary.edit_grammar();
        let vocab = TokenVocab::new(&eg, hp.config.max_locals);
        let net = Net::new(&mut Registry::resolve(&mut params), &hp.config, &eg, &vocab)?;
        Ok(Self {
            config: hp.config,
            vocabulary: hp.vocabulary,
            eg,
            vocab,
            params,
            net,
        })
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            config: self.config.clone(),
            vocabulary: self.vocabulary.clone(),
        }
    }

    pub fn save(&self, path: &Path, metadata: serde_json::Value) -> Result<(), ModelError> {
        let hp = serde_json::to_value(self.hyperparameters()).map_err(TensorError::from)?;
        checkpoint::save(path, &self.params, hp, metadata)?;
        Ok(())
    }

    /// Loads a checkpoint; returns the model and the stored metadata.
    pub fn load(path: &Path) -> Result<(Self, serde_json::Value), ModelError> {
        let (manifest, params) = checkpoint::load::<T>(path)?;
        let hp: Hyperparameters = serde_json::from_value(manifest.hyperparameters).map_err(TensorError::from)?;
        Ok((Self::from_parts(hp, params)?, manifest.metadata))
    }

    /// Same model over another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            vocabulary: self.vocabulary.clone(),
            eg: self.eg.clone(),
            vocab: self.vocab.clone(),
            params: self.params.cast(),
            net: self.net.clone(),
        }
    }

    pub fn prepare(&self, ctx: &EditContext, actions: &[Action]) -> Result<Prepared, PrepareError> {
        Prepared::new(&self.net, &self.eg, &self.vocab, ctx, actions)
    }

    pub fn prepare_example(&self, ex: &TrainingExample) -> Result<Prepared, PrepareError> {
        self.prepare(&ex.ctx, &ex.actions)
    }

    /// Summed NLL of the oracle choices of `ex` on graph `g`.
    pub fn loss(&self, g: &mut Graph<'_, T>, ex: &Prepared, drop: &mut Dropout<'_>) -> Result<Var, TensorError> {
        self.net.loss(g, ex, drop)
    }

    /// NLL of `ex` with dropout off.
    pub fn nll(&self, ex: &Prepared) -> Result<f64, TensorError> {
        let mut g = Graph::no_grad(&self.params);
        let l = self.net.loss(&mut g, ex, &mut Dropout::off())?;
        Ok(g.scalar(l).as_f64())
    }
}
