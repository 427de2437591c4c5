use super::{Graph, Tensor, Var};
use crate::error::Result;

/// Largest relative disagreement between backward gradients of `f` at `x`
/// and central differences with step `h`.
///
/// `f` receives a fresh graph and `x` registered as a parameter and must
/// return a scalar. Relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&Graph, Var) -> Result<Var>,
{
    let g = Graph::new();
    let xv = g.param(x.clone());
    let loss = f(&g, xv)?;
    g.backward(loss)?;
    let analytic = g.grad(xv);

    let eval = |t: Tensor| -> Result<f64> {
        let g = Graph::new();
        let v = g.constant(t);
        let out = f(&g, v)?;
        Ok(g.scalar_value(out))
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    Ok(worst)
}
