//! Building blocks shared by the readers and the decoder. Every layer works
//! on `rows × d` matrices; queries and memories are passed separately so the
//! same code serves full-sequence training and one-row incremental decoding.

use std::rc::Rc;

use rand::RngCore;

use editrepair_tensor::{Graph, Init, ParamId, ParamStore, Scalar, TensorError, Var};

/// Creates parameters on first use, or resolves them by name in an existing
/// store (checkpoint loading).
pub struct Registry<'a, T: Scalar> {
    store: &'a mut ParamStore<T>,
    rng: Option<&'a mut dyn RngCore>,
}

impl<'a, T: Scalar> Registry<'a, T> {
    pub fn init(store: &'a mut ParamStore<T>, rng: &'a mut dyn RngCore) -> Self {
        Self { store, rng: Some(rng) }
    }

    pub fn resolve(store: &'a mut ParamStore<T>) -> Self {
        Self { store, rng: None }
    }

    pub fn param(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> Result<ParamId, TensorError> {
        match self.rng.as_deref_mut() {
            Some(rng) => self.store.add(name, rows, cols, init, rng),
            None => {
                let id = self.store.id(name)?;
                let e = self.store.entry(id);
                if (e.rows, e.cols) != (rows, cols) {
                    return Err(TensorError::Shape(format!(
                        "parameter {name}: stored {}x{}, expected {rows}x{cols}",
                        e.rows, e.cols
                    )));
                }
                Ok(id)
            }
        }
    }
}

/// Dropout with an optional RNG; `None` means evaluation mode.
pub struct Dropout<'r> {
    pub rate: f64,
    pub rng: Option<&'r mut dyn RngCore>,
}

impl<'r> Dropout<'r> {
    pub fn off() -> Self {
        Self { rate: 0.0, rng: None }
    }

    pub fn apply<T: Scalar>(&mut self, g: &mut Graph<'_, T>, x: Var) -> Var {
        match self.rng.as_deref_mut() {
            Some(r) => g.dropout(x, self.rate, Some(r)),
            None => x,
        }
    }
}

/// `p(pos, 2j) = sin(pos / 10000^{2j/d})`, `p(pos, 2j+1) = cos(...)`.
pub fn sinusoid(pos: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|k| {
            let j = k / 2;
            let angle = pos as f64 / 10000f64.powf(2.0 * j as f64 / d as f64);
            if k % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

pub fn positions<T: Scalar>(g: &mut Graph<'_, T>, pos: &[usize], d: usize) -> Result<Var, TensorError> {
    let data = pos
        .iter()
        .flat_map(|p| sinusoid(*p, d))
        .map(T::from_f64_lossy)
        .collect();
    g.constant(pos.len(), d, data)
}

pub fn constant_f64<T: Scalar>(g: &mut Graph<'_, T>, rows: usize, cols: usize, v: &[f64]) -> Result<Var, TensorError> {
    g.constant(rows, cols, v.iter().map(|x| T::from_f64_lossy(*x)).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new<T: Scalar>(
        r: &mut Registry<'_, T>,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
    ) -> Result<Self, TensorError> {
        let w = r.param(&format!("{name}.w"), d_in, d_out, Init::Xavier)?;
        let b = bias
            .then(|| r.param(&format!("{name}.b"), 1, d_out, Init::Zeros))
            .transpose()?;
        Ok(Self { w, b })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var, TensorError> {
        let w = g.param_by_id(self.w);
        let y = g.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = g.param_by_id(b);
                g.add_row(y, b)
            }
            None => Ok(y),
        }
    }
}

/// Multi-head scaled dot-product attention with output projection.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

impl Attention {
    pub fn new<T: Scalar>(r: &mut Registry<'_, T>, name: &str, d: usize, heads: usize) -> Result<Self, TensorError> {
        Ok(Self {
            q: Linear::new(r, &format!("{name}.q"), d, d, false)?,
            k: Linear::new(r, &format!("{name}.k"), d, d, false)?,
            v: Linear::new(r, &format!("{name}.v"), d, d, false)?,
            o: Linear::new(r, &format!("{name}.o"), d, d, false)?,
            heads,
        })
    }

    /// Projected keys and values of `mem`.
    pub fn memory<T: Scalar>(&self, g: &mut Graph<'_, T>, mem: Var) -> Result<(Var, Var), TensorError> {
        Ok((self.k.forward(g, mem)?, self.v.forward(g, mem)?))
    }

    /// `[head_1; …; head_H] W_o` with `head_j = softmax(Q_j K_jᵀ / √d_k) V_j`.
    /// `mask[i·m + j]` hides key `j` from query `i`.
    pub fn attend<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        x: Var,
        keys: Var,
        values: Var,
        mask: Option<&Rc<[bool]>>,
    ) -> Result<Var, TensorError> {
        let q = self.q.forward(g, x)?;
        let d = g.shape(q).1;
        let dk = d / self.heads;
        let mut heads = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (qh, kh, vh) = if self.heads == 1 {
                (q, keys, values)
            } else {
                (
                    g.slice_cols(q, h * dk, dk)?,
                    g.slice_cols(keys, h * dk, dk)?,
                    g.slice_cols(values, h * dk, dk)?,
                )
            };
            let s = g.matmul_t(qh, false, kh, true)?;
            let s = g.scale(s, 1.0 / (dk as f64).sqrt());
            let s = match mask {
                Some(m) => g.masked_fill(s, m.clone())?,
                None => s,
            };
            let a = g.softmax(s);
            heads.push(g.matmul(a, vh)?);
        }
        let cat = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads)? };
        self.o.forward(g, cat)
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        x: Var,
        mem: Var,
        mask: Option<&Rc<[bool]>>,
    ) -> Result<Var, TensorError> {
        let (k, v) = self.memory(g, mem)?;
        self.attend(g, x, k, v, mask)
    }
}

/// Per-position soft choice between two sources:
/// `h = α₁ v₁ + α₂ v₂` with `α = softmax(q·k₁/√d, q·k₂/√d)`.
#[derive(Debug, Clone, Copy)]
pub struct Gating {
    pub q: Linear,
    pub k1: Linear,
    pub v1: Linear,
    pub k2: Linear,
    pub v2: Linear,
}

impl Gating {
    pub fn new<T: Scalar>(r: &mut Registry<'_, T>, name: &str, d: usize) -> Result<Self, TensorError> {
        Ok(Self {
            q: Linear::new(r, &format!("{name}.q"), d, d, false)?,
            k1: Linear::new(r, &format!("{name}.k1"), d, d, false)?,
            v1: Linear::new(r, &format!("{name}.v1"), d, d, false)?,
            k2: Linear::new(r, &format!("{name}.k2"), d, d, false)?,
            v2: Linear::new(r, &format!("{name}.v2"), d, d, false)?,
        })
    }

    /// Returns `h` and the `rows × 2` weights.
    pub fn forward_with_weights<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        q: Var,
        c1: Var,
        c2: Var,
    ) -> Result<(Var, Var), TensorError> {
        let d = g.shape(q).1;
        let q = self.q.forward(g, q)?;
        let k1 = self.k1.forward(g, c1)?;
        let v1 = self.v1.forward(g, c1)?;
        let k2 = self.k2.forward(g, c2)?;
        let v2 = self.v2.forward(g, c2)?;
        let s1 = g.mul(q, k1)?;
        let s1 = g.sum_cols(s1);
        let s2 = g.mul(q, k2)?;
        let s2 = g.sum_cols(s2);
        let s = g.concat_cols(&[s1, s2])?;
        let s = g.scale(s, 1.0 / (d as f64).sqrt());
        let w = g.softmax(s);
        let w1 = g.slice_cols(w, 0, 1)?;
        let w2 = g.slice_cols(w, 1, 1)?;
        let a = g.mul_col(v1, w1)?;
        let b = g.mul_col(v2, w2)?;
        Ok((g.add(a, b)?, w))
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, q: Var, c1: Var, c2: Var) -> Result<Var, TensorError> {
        Ok(self.forward_with_weights(g, q, c1, c2)?.0)
    }
}

/// Graph convolution `g_i = W_g Σ_j Â_ij u_j`.
#[derive(Debug, Clone, Copy)]
pub struct TreeConv {
    pub w: Linear,
}

impl TreeConv {
    pub fn new<T: Scalar>(r: &mut Registry<'_, T>, name: &str, d: usize) -> Result<Self, TensorError> {
        Ok(Self {
            w: Linear::new(r, name, d, d, false)?,
        })
    }

    /// `adj` is `rows × m`, `mem` is `m × d`.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, adj: Var, mem: Var) -> Result<Var, TensorError> {
        let agg = g.matmul(adj, mem)?;
        self.w.forward(g, agg)
    }
}

/// Two fully connected layers, GELU after the first.
#[derive(Debug, Clone, Copy)]
pub struct FeedForward {
    pub l1: Linear,
    pub l2: Linear,
}

impl FeedForward {
    pub fn new<T: Scalar>(r: &mut Registry<'_, T>, name: &str, d: usize, hidden: usize) -> Result<Self, TensorError> {
        Ok(Self {
            l1: Linear::new(r, &format!("{name}.1"), d, hidden, true)?,
            l2: Linear::new(r, &format!("{name}.2"), hidden, d, true)?,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<Var, TensorError> {
        let h = self.l1.forward(g, x)?;
        let h = g.gelu(h);
        self.l2.forward(g, h)
    }
}

/// Additive pointer scores `θ_ij = vᵀ tanh(W₁ d_i + W₂ t_j)`.
#[derive(Debug, Clone, Copy)]
pub struct Pointer {
    pub w1: Linear,
    pub w2: Linear,
    pub v: Linear,
}

impl Pointer {
    pub fn new<T: Scalar>(r: &mut Registry<'_, T>, name: &str, d: usize) -> Result<Self, TensorError> {
        Ok(Self {
            w1: Linear::new(r, &format!("{name}.w1"), d, d, false)?,
            w2: Linear::new(r, &format!("{name}.w2"), d, d, false)?,
            v: Linear::new(r, &format!("{name}.v"), d, 1, false)?,
        })
    }

    /// `W₂ t_j` for every memory row; reusable across queries.
    pub fn memory<T: Scalar>(&self, g: &mut Graph<'_, T>, mem: Var) -> Result<Var, TensorError> {
        self.w2.forward(g, mem)
    }

    /// `rows × m` scores against projected memory `pm`.
    pub fn scores<T: Scalar>(&self, g: &mut Graph<'_, T>, d: Var, pm: Var) -> Result<Var, TensorError> {
        let n = g.shape(d).0;
        let m = g.shape(pm).0;
        let a = self.w1.forward(g, d)?;
        let s = g.outer_add(a, pm)?;
        let s = g.tanh(s);
        let s = self.v.forward(g, s)?;
        g.reshape(s, n, m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use editrepair_tensor::gradcheck;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-5;
    const TOL: f64 = 1e-4;

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn assert_grads(store: &mut ParamStore<f64>, f: impl Fn(&mut Graph<f64>) -> Result<Var, TensorError>) {
        let checks = gradcheck::check(store, EPS, f).unwrap();
        assert!(!checks.is_empty());
        for c in checks {
            assert!(c.relative_error < TOL, "{}: {}", c.name, c.relative_error);
            assert!(c.analytic_norm > 0.0, "{} got no gradient", c.name);
        }
    }

    /// Random projection to a scalar, so every output entry matters.
    fn probe(g: &mut Graph<f64>, y: Var, seed: u64) -> Result<Var, TensorError> {
        let (r, c) = g.shape(y);
        let w = random(&mut ChaCha8Rng::seed_from_u64(seed), r * c);
        let w = g.constant(r, c, w)?;
        let p = g.mul(y, w)?;
        Ok(g.reduce_sum(p))
    }

    #[test]
    fn sinusoid_values() {
        let p0 = sinusoid(0, 8);
        for k in 0..8 {
            assert_eq!(p0[k], if k % 2 == 0 { 0.0 } else { 1.0 });
        }
        assert!((sinusoid(7, 8)[0] - 7f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn sinusoid_rotation_identity() {
        // p(pos+k) is p(pos) rotated per frequency pair by the angle of p(k)
        let d = 16;
        for (pos, k) in [(3, 5), (0, 9), (40, 2)] {
            let a = sinusoid(pos, d);
            let b = sinusoid(k, d);
            let c = sinusoid(pos + k, d);
            for j in 0..d / 2 {
                let (s1, c1, s2, c2) = (a[2 * j], a[2 * j + 1], b[2 * j], b[2 * j + 1]);
                assert!((c[2 * j] - (s1 * c2 + c1 * s2)).abs() < 1e-9);
                assert!((c[2 * j + 1] - (c1 * c2 - s1 * s2)).abs() < 1e-9);
            }
        }
    }

    fn setup() -> (ParamStore<f64>, ChaCha8Rng) {
        (ParamStore::new(), ChaCha8Rng::seed_from_u64(11))
    }

    #[test]
    fn attention_single_key_is_linear_in_value() {
        let (mut store, mut rng) = setup();
        let att = Attention::new(&mut Registry::init(&mut store, &mut rng), "a", 4, 2).unwrap();
        let x = random(&mut rng, 3 * 4);
        let m = random(&mut rng, 4);
        let mut g = Graph::no_grad(&store);
        let xv = g.constant(3, 4, x).unwrap();
        let mv = g.constant(1, 4, m).unwrap();
        let out = att.forward(&mut g, xv, mv, None).unwrap();
        // with one key each query gets exactly (m W_v) W_o
        let v = att.v.forward(&mut g, mv).unwrap();
        let expect = att.o.forward(&mut g, v).unwrap();
        let e = g.to_vec(expect);
        for row in g.value(out).chunks(4) {
            for (a, b) in row.iter().zip(&e) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_matches_hand_rolled_reference() {
        let (mut store, mut rng) = setup();
        let (d, h, n) = (8, 2, 3);
        let att = Attention::new(&mut Registry::init(&mut store, &mut rng), "a", d, h).unwrap();
        let x = random(&mut rng, n * d);
        let mut g = Graph::no_grad(&store);
        let xv = g.constant(n, d, x.clone()).unwrap();
        let out = att.forward(&mut g, xv, xv, None).unwrap();
        let out = g.to_vec(out);

        let w = |id: ParamId| store.entry(id).value.clone();
        let mm = |a: &[f64], b: &[f64], r: usize, k: usize, c: usize| {
            let mut o = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    o[i * c + j] = (0..k).map(|t| a[i * k + t] * b[t * c + j]).sum();
                }
            }
            o
        };
        let (q, k, v) = (mm(&x, &w(att.q.w), n, d, d), mm(&x, &w(att.k.w), n, d, d), mm(&x, &w(att.v.w), n, d, d));
        let dk = d / h;
        let mut cat = vec![0.0; n * d];
        for head in 0..h {
            for i in 0..n {
                let s: Vec<f64> = (0..n)
                    .map(|j| (0..dk).map(|t| q[i * d + head * dk + t] * k[j * d + head * dk + t]).sum::<f64>() / (dk as f64).sqrt())
                    .collect();
                let mx = s.iter().cloned().fold(f64::MIN, f64::max);
                let z: f64 = s.iter().map(|x| (x - mx).exp()).sum();
                for t in 0..dk {
                    cat[i * d + head * dk + t] = (0..n).map(|j| (s[j] - mx).exp() / z * v[j * d + head * dk + t]).sum();
                }
            }
        }
        let expect = mm(&cat, &w(att.o.w), n, d, d);
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn attention_uniform_keys_average_values() {
        let (mut store, mut rng) = setup();
        let att = Attention::new(&mut Registry::init(&mut store, &mut rng), "a", 4, 1).unwrap();
        let row = random(&mut rng, 4);
        let vals = random(&mut rng, 5 * 4);
        let mut g = Graph::no_grad(&store);
        let x = g.constant(1, 4, row.clone()).unwrap();
        let keys = g.constant(5, 4, row.repeat(5)).unwrap();
        let v = g.constant(5, 4, vals.clone()).unwrap();
        let out = att.attend(&mut g, x, keys, v, None).unwrap();
        let mean: Vec<f64> = (0..4).map(|j| (0..5).map(|i| vals[i * 4 + j]).sum::<f64>() / 5.0).collect();
        let mean_v = g.constant(1, 4, mean).unwrap();
        let expect = att.o.forward(&mut g, mean_v).unwrap();
        for (a, b) in g.value(out).iter().zip(g.value(expect)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gating_equal_sources_returns_first_value() {
        let (mut store, mut rng) = setup();
        let gate = Gating::new(&mut Registry::init(&mut store, &mut rng), "g", 4).unwrap();
        // same projections for both sources
        let k1 = store.entry(gate.k1.w).value.clone();
        let v1 = store.entry(gate.v1.w).value.clone();
        *store.value_mut(gate.k2.w) = k1;
        *store.value_mut(gate.v2.w) = v1;
        let x = random(&mut rng, 2 * 4);
        let c = random(&mut rng, 2 * 4);
        let mut g = Graph::no_grad(&store);
        let xv = g.constant(2, 4, x).unwrap();
        let cv = g.constant(2, 4, c).unwrap();
        let (h, w) = gate.forward_with_weights(&mut g, xv, cv, cv).unwrap();
        let v = gate.v1.forward(&mut g, cv).unwrap();
        for (a, b) in g.value(h).iter().zip(g.value(v)) {
            assert!((a - b).abs() < 1e-12);
        }
        for pair in g.value(w).chunks(2) {
            assert!((pair[0] - 0.5).abs() < 1e-12 && (pair[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gating_hand_calculation() {
        // d = 2, one position, identity-like weights
        let (mut store, mut rng) = setup();
        let gate = Gating::new(&mut Registry::init(&mut store, &mut rng), "g", 2).unwrap();
        let set = |s: &mut ParamStore<f64>, id: ParamId, v: [f64; 4]| *s.value_mut(id) = v.to_vec();
        set(&mut store, gate.q.w, [1.0, 0.0, 0.0, 1.0]);
        set(&mut store, gate.k1.w, [1.0, 0.0, 0.0, 1.0]);
        set(&mut store, gate.v1.w, [1.0, 0.0, 0.0, 1.0]);
        set(&mut store, gate.k2.w, [2.0, 0.0, 0.0, 0.0]);
        set(&mut store, gate.v2.w, [0.0, 1.0, 1.0, 0.0]);
        let mut g = Graph::no_grad(&store);
        let q = g.constant(1, 2, vec![1.0, 2.0]).unwrap();
        let c1 = g.constant(1, 2, vec![0.5, -1.0]).unwrap();
        let c2 = g.constant(1, 2, vec![3.0, 4.0]).unwrap();
        let (h, w) = gate.forward_with_weights(&mut g, q, c1, c2).unwrap();
        // q·k1 = 0.5 - 2 = -1.5; k2 = (6, 0) so q·k2 = 6
        let (s1, s2) = (-1.5 / 2f64.sqrt(), 6.0 / 2f64.sqrt());
        let a1 = s1.exp() / (s1.exp() + s2.exp());
        let a2 = 1.0 - a1;
        let expect = [a1 * 0.5 + a2 * 4.0, a1 * -1.0 + a2 * 3.0];
        assert!((g.value(w)[0] - a1).abs() < 1e-12);
        for (a, b) in g.value(h).iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tree_conv_identity() {
        let (mut store, mut rng) = setup();
        let conv = TreeConv::new(&mut Registry::init(&mut store, &mut rng), "c", 3).unwrap();
        *store.value_mut(conv.w.w) = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let u = random(&mut rng, 2 * 3);
        let mut g = Graph::no_grad(&store);
        let uv = g.constant(2, 3, u.clone()).unwrap();
        let eye = g.constant(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = conv.forward(&mut g, eye, uv).unwrap();
        assert_eq!(g.to_vec(out), u);
        let res = g.add(out, uv).unwrap();
        assert_eq!(g.to_vec(res), u.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
    }

    #[test]
    fn gradcheck_attention_with_mask() {
        let (mut store, mut rng) = setup();
        let att = Attention::new(&mut Registry::init(&mut store, &mut rng), "a", 6, 3).unwrap();
        let x = random(&mut rng, 4 * 6);
        let m = random(&mut rng, 3 * 6);
        let mask: Rc<[bool]> = (0..12).map(|i| i % 3 == 2 && i < 6).collect::<Vec<_>>().into();
        assert_grads(&mut store, |g| {
            let xv = g.constant(4, 6, x.clone())?;
            let mv = g.constant(3, 6, m.clone())?;
            let y = att.forward(g, xv, mv, Some(&mask))?;
            probe(g, y, 1)
        });
    }

    #[test]
    fn gradcheck_gating() {
        let (mut store, mut rng) = setup();
        let gate = Gating::new(&mut Registry::init(&mut store, &mut rng), "g", 4).unwrap();
        let q = random(&mut rng, 3 * 4);
        let c = random(&mut rng, 3 * 4);
        assert_grads(&mut store, |g| {
            let qv = g.constant(3, 4, q.clone())?;
            let cv = g.constant(3, 4, c.clone())?;
            let y = gate.forward(g, qv, qv, cv)?;
            probe(g, y, 2)
        });
    }

    #[test]
    fn gradcheck_tree_conv_feed_forward_pointer() {
        let (mut store, mut rng) = setup();
        let mut reg = Registry::init(&mut store, &mut rng);
        let conv = TreeConv::new(&mut reg, "c", 4).unwrap();
        let ff = FeedForward::new(&mut reg, "f", 4, 8).unwrap();
        let ptr = Pointer::new(&mut reg, "p", 4).unwrap();
        let u = random(&mut rng, 3 * 4);
        let adj = random(&mut rng, 3 * 3);
        let mem = random(&mut rng, 5 * 4);
        assert_grads(&mut store, |g| {
            let uv = g.constant(3, 4, u.clone())?;
            let av = g.constant(3, 3, adj.clone())?;
            let mv = g.constant(5, 4, mem.clone())?;
            let h = conv.forward(g, av, uv)?;
            let h = g.add(h, uv)?;
            let h = ff.forward(g, h)?;
            let pm = ptr.memory(g, mv)?;
            let s = ptr.scores(g, h, pm)?;
            let s = g.log_softmax(s);
            probe(g, s, 3)
        });
    }

    #[test]
    fn registry_resolves_existing_parameters() {
        let (mut store, mut rng) = setup();
        let a = Attention::new(&mut Registry::init(&mut store, &mut rng), "a", 4, 2).unwrap();
        let b = Attention::new(&mut Registry::resolve(&mut store), "a", 4, 2).unwrap();
        assert_eq!(a.o.w, b.o.w);
        assert!(Attention::new(&mut Registry::resolve(&mut store), "a", 6, 2).is_err());
    }
}
