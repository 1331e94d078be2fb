//! Central finite-difference gradient checking.

use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::TensorError;

/// Agreement between analytic and numeric gradients for one parameter.
#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂)`, or 0 when
    /// both are (numerically) zero.
    pub relative_error: f64,
    pub analytic_norm: f64,
}

/// Compares the gradient of the scalar built by `f` against central
/// differences with step `eps`, for every parameter in `store`.
pub fn check<F>(store: &mut ParamStore<f64>, eps: f64, f: F) -> Result<Vec<ParamCheck>, TensorError>
where
    F: Fn(&mut Graph<f64>) -> Result<Var, TensorError>,
{
    let analytic = {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        g.backward(loss)?
    };
    let eval = |store: &ParamStore<f64>| -> Result<f64, TensorError> {
        let mut g = Graph::no_grad(store);
        let loss = f(&mut g)?;
        Ok(g.scalar(loss))
    };
    let ids: Vec<(ParamId, String, usize)> = store
        .iter()
        .map(|(id, e)| (id, e.name.clone(), e.value.len()))
        .collect();
    let mut out = Vec::with_capacity(ids.len());
    for (id, name, n) in ids {
        let mut diff2 = 0.0;
        let mut an2 = 0.0;
        let mut nu2 = 0.0;
        for i in 0..n {
            let orig = store.value_mut(id)[i];
            store.value_mut(id)[i] = orig + eps;
            let up = eval(store)?;
            store.value_mut(id)[i] = orig - eps;
            let down = eval(store)?;
            store.value_mut(id)[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.get(id).map_or(0.0, |g| g[i]);
            diff2 += (a - numeric).powi(2);
            an2 += a * a;
            nu2 += numeric * numeric;
        }
        let denom = an2.sqrt().max(nu2.sqrt());
        let relative_error = if denom < 1e-10 { 0.0 } else { diff2.sqrt() / denom };
        out.push(ParamCheck {
            name,
            relative_error,
            analytic_norm: an2.sqrt(),
        });
    }
    Ok(out)
}
