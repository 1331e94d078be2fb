use crate::params::{Gradients, ParamStore};
use crate::Scalar;

/// Adam with bias correction. Moments are kept per parameter and persist
/// across steps.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step<T: Scalar>(&mut self, params: &mut ParamStore<T>, grads: &Gradients<T>) {
        if self.m.len() < params.len() {
            let sizes: Vec<usize> = params.iter().map(|(_, e)| e.value.len()).collect();
            for (i, n) in sizes.into_iter().enumerate().skip(self.m.len()) {
                debug_assert_eq!(i, self.m.len());
                self.m.push(vec![0.0; n]);
                self.v.push(vec![0.0; n]);
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let ids: Vec<_> = params.iter().map(|(id, _)| id).collect();
        for id in ids {
            // Parameters without a gradient still see their moments decay.
            let g = grads.get(id);
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let w = params.value_mut(id);
            for i in 0..w.len() {
                let gi = g.map_or(0.0, |g| g[i].as_f64());
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                let upd = self.lr * mh / (vh.sqrt() + self.eps);
                w[i] = T::from_f64_lossy(w[i].as_f64() - upd);
            }
        }
    }
}
