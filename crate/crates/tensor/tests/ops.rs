use std::rc::Rc;

use editrepair_tensor::gradcheck;
use editrepair_tensor::{Graph, Init, ParamStore, TensorError, Var};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn store(shapes: &[(&str, usize, usize)], seed: u64) -> ParamStore<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    for (name, r, c) in shapes {
        s.add(name, *r, *c, Init::Normal(0.8), &mut rng).unwrap();
    }
    s
}

/// Weighted sum against fixed pseudo-random coefficients, so every output
/// element carries a distinct upstream gradient.
fn probe(g: &mut Graph<f64>, v: Var) -> Result<Var, TensorError> {
    let (r, c) = g.shape(v);
    let w: Vec<f64> = (0..r * c).map(|i| ((i as f64) * 0.731 + 0.3).sin()).collect();
    let w = g.constant(r, c, w)?;
    let p = g.mul(v, w)?;
    Ok(g.reduce_sum(p))
}

fn assert_grads<F>(shapes: &[(&str, usize, usize)], f: F)
where
    F: Fn(&mut Graph<f64>) -> Result<Var, TensorError>,
{
    let mut s = store(shapes, 11);
    let checks = gradcheck::check(&mut s, 1e-5, |g| {
        let out = f(g)?;
        probe(g, out)
    })
    .unwrap();
    for c in checks {
        assert!(
            c.relative_error < 1e-6,
            "{}: relative error {}",
            c.name,
            c.relative_error
        );
    }
}

#[test]
fn gradcheck_matmul_variants() {
    for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
        let a = if ta { ("a", 4, 3) } else { ("a", 3, 4) };
        let b = if tb { ("b", 5, 4) } else { ("b", 4, 5) };
        assert_grads(&[a, b], |g| {
            let a = g.param("a")?;
            let b = g.param("b")?;
            g.matmul_t(a, ta, b, tb)
        });
    }
}

#[test]
fn gradcheck_elementwise() {
    let shapes = [("a", 3, 4), ("b", 3, 4), ("r", 1, 4), ("c", 3, 1)];
    assert_grads(&shapes, |g| {
        let (a, b) = (g.param("a")?, g.param("b")?);
        g.add(a, b)
    });
    assert_grads(&shapes, |g| {
        let (a, b) = (g.param("a")?, g.param("b")?);
        g.mul(a, b)
    });
    assert_grads(&shapes, |g| {
        let (a, r) = (g.param("a")?, g.param("r")?);
        g.add_row(a, r)
    });
    assert_grads(&shapes, |g| {
        let (a, c) = (g.param("a")?, g.param("c")?);
        g.mul_col(a, c)
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        Ok(g.scale(a, -1.7))
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        Ok(g.tanh(a))
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        Ok(g.gelu(a))
    });
}

#[test]
fn gradcheck_structural() {
    let shapes = [("a", 3, 4), ("b", 3, 2), ("e", 6, 4)];
    assert_grads(&shapes, |g| {
        let (a, b) = (g.param("a")?, g.param("b")?);
        g.concat_cols(&[a, b, a])
    });
    assert_grads(&shapes, |g| {
        let (a, e) = (g.param("a")?, g.param("e")?);
        g.concat_rows(&[e, a])
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        g.slice_cols(a, 1, 2)
    });
    assert_grads(&shapes, |g| {
        let e = g.param("e")?;
        g.embedding_lookup(e, &[5, 0, 5, 2])
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        g.pick_cols(a, &[3, 0, 1])
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        Ok(g.transpose(a))
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        g.reshape(a, 2, 6)
    });
    assert_grads(&shapes, |g| {
        let (a, e) = (g.param("a")?, g.param("e")?);
        g.outer_add(a, e)
    });
}

#[test]
fn gradcheck_reductions_and_masks() {
    let shapes = [("a", 3, 5)];
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        Ok(g.softmax(a))
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        Ok(g.log_softmax(a))
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        Ok(g.sum_cols(a))
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        let mask: Rc<[bool]> = (0..15).map(|i| i % 4 == 1).collect::<Vec<_>>().into();
        let m = g.masked_fill(a, mask)?;
        Ok(g.softmax(m))
    });
    assert_grads(&shapes, |g| {
        let a = g.param("a")?;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        Ok(g.dropout(a, 0.3, Some(&mut rng)))
    });
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let s = ParamStore::<f64>::new();
    let mut g = Graph::new(&s);
    let x = g.constant(1, 2, vec![0.0, 0.0]).unwrap();
    let y = g.softmax(x);
    assert_eq!(g.value(y), &[0.5, 0.5]);
}

#[test]
fn masked_entries_receive_exactly_zero_mass() {
    let s = ParamStore::<f32>::new();
    let mut g = Graph::new(&s);
    let x = g.constant(1, 4, vec![3.0, -1.0, 8.0, 0.5]).unwrap();
    let m = g
        .masked_fill(x, vec![false, true, true, false].into())
        .unwrap();
    let y = g.softmax(m);
    let v = g.value(y);
    assert_eq!(v[1], 0.0);
    assert_eq!(v[2], 0.0);
    assert!((v[0] + v[3] - 1.0).abs() < 1e-6);
}

#[test]
fn gelu_at_zero_is_zero() {
    let s = ParamStore::<f64>::new();
    let mut g = Graph::new(&s);
    let x = g.constant(1, 1, vec![0.0]).unwrap();
    let y = g.gelu(x);
    assert_eq!(g.scalar(y), 0.0);
}

#[test]
fn sum_loss_gives_ones_and_product_gives_partner() {
    let mut s = ParamStore::<f64>::new();
    s.insert("w", 2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, 7.0]).unwrap();
    s.insert("x", 1, 3, vec![1.0, 2.0, 3.0]).unwrap();
    s.insert("y", 1, 3, vec![-4.0, 0.5, 9.0]).unwrap();
    let mut g = Graph::new(&s);
    let w = g.param("w").unwrap();
    let loss = g.reduce_sum(w);
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(s.id("w").unwrap()).unwrap(), &[1.0; 6]);

    let mut g = Graph::new(&s);
    let x = g.param("x").unwrap();
    let y = g.param("y").unwrap();
    let xy = g.mul(x, y).unwrap();
    let loss = g.reduce_sum(xy);
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(s.id("x").unwrap()).unwrap(), &[-4.0, 0.5, 9.0]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut s = ParamStore::<f64>::new();
    s.insert("w", 2, 2, vec![1.0; 4]).unwrap();
    let mut g = Graph::new(&s);
    let w = g.param("w").unwrap();
    assert!(matches!(g.backward(w), Err(TensorError::NonScalarLoss((2, 2)))));
}

#[test]
fn shape_mismatch_is_an_error() {
    let s = ParamStore::<f32>::new();
    let mut g = Graph::new(&s);
    let a = g.constant(2, 3, vec![0.0; 6]).unwrap();
    let b = g.constant(2, 3, vec![0.0; 6]).unwrap();
    assert!(g.matmul(a, b).is_err());
    let c = g.constant(3, 2, vec![0.0; 6]).unwrap();
    assert!(g.add(a, c).is_err());
}

#[test]
fn no_grad_graph_matches_forward_values() {
    let s = store(&[("a", 4, 4), ("b", 4, 4)], 5);
    let run = |g: &mut Graph<f64>| {
        let a = g.param("a").unwrap();
        let b = g.param("b").unwrap();
        let m = g.matmul(a, b).unwrap();
        let t = g.tanh(m);
        let y = g.softmax(t);
        g.to_vec(y)
    };
    let with = run(&mut Graph::new(&s));
    let without = run(&mut Graph::no_grad(&s));
    assert_eq!(with, without);
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(values in proptest::collection::vec(-30.0f32..30.0, 1..40)) {
        let s = ParamStore::<f32>::new();
        let mut g = Graph::new(&s);
        let n = values.len();
        let x = g.constant(1, n, values).unwrap();
        let y = g.softmax(x);
        let total: f32 = g.value(y).iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-6);
    }
}
