//! Named parameter registry shared by the forward graph, the optimizer and
//! checkpoints.

use std::collections::HashMap;

use rand::Rng;

use crate::{Scalar, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct ParamEntry<T> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<T>,
}

/// Initialization scheme for a freshly registered parameter.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    /// Glorot/Xavier uniform over `fan_in = rows`, `fan_out = cols`.
    Xavier,
    Normal(f64),
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    entries: Vec<ParamEntry<T>>,
    index: HashMap<String, ParamId>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut R,
    ) -> Result<ParamId, TensorError> {
        let n = rows * cols;
        let value = match init {
            Init::Zeros => vec![T::zero(); n],
            Init::Xavier => {
                let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
                (0..n)
                    .map(|_| T::from_f64_lossy(rng.gen_range(-bound..=bound)))
                    .collect()
            }
            Init::Normal(std) => (0..n)
                .map(|_| {
                    // Box-Muller; two uniforms per sample keeps the stream simple.
                    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                    let u2: f64 = rng.gen::<f64>();
                    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                    T::from_f64_lossy(z * std)
                })
                .collect(),
        };
        self.insert(name, rows, cols, value)
    }

    pub fn insert(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        value: Vec<T>,
    ) -> Result<ParamId, TensorError> {
        if self.index.contains_key(name) {
            return Err(TensorError::DuplicateParam(name.to_string()));
        }
        if value.len() != rows * cols {
            return Err(TensorError::Shape(format!(
                "parameter {name}: {} values for shape {rows}x{cols}",
                value.len()
            )));
        }
        let id = ParamId(self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            rows,
            cols,
            value,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId, TensorError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry<T> {
        &self.entries[id.0]
    }

    pub fn get(&self, name: &str) -> Result<&ParamEntry<T>, TensorError> {
        Ok(self.entry(self.id(name)?))
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Vec<T> {
        &mut self.entries[id.0].value
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry<T>)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Converts every parameter to another element type.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    rows: e.rows,
                    cols: e.cols,
                    value: e.value.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }
}

/// Per-parameter gradient accumulators, indexed like the owning store.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Self {
            grads: vec![None; store.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn accumulate(&mut self, id: ParamId, grad: &[T]) {
        if self.grads.len() <= id.0 {
            self.grads.resize(id.0 + 1, None);
        }
        match &mut self.grads[id.0] {
            Some(g) => g.iter_mut().zip(grad).for_each(|(a, b)| *a = *a + *b),
            slot @ None => *slot = Some(grad.to_vec()),
        }
    }

    pub fn merge(&mut self, other: &Gradients<T>) {
        for (i, g) in other.grads.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.grads.iter_mut().flatten() {
            g.iter_mut().for_each(|x| *x = *x * factor);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .map(|x| x.as_f64() * x.as_f64())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.grads
            .iter()
            .flatten()
            .all(|g| g.iter().all(|x| x.is_finite()))
    }

    pub fn populated(&self) -> impl Iterator<Item = (ParamId, &[T])> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_deref().map(|g| (ParamId(i), g)))
    }
}
