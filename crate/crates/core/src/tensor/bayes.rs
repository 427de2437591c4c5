//! Bayesian convolution weights: a factorized Gaussian posterior per weight,
//! sampled with the reparameterization `w = mu + softplus(rho) * eps`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{softplus, Graph, Tensor, Var};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct BayesConvParams {
    pub mu: Tensor,
    pub rho: Tensor,
    pub bias_mu: Tensor,
    pub bias_rho: Tensor,
}

/// [`BayesConvParams`] registered on a graph.
#[derive(Clone, Copy, Debug)]
pub struct BayesConvVars {
    pub mu: Var,
    pub rho: Var,
    pub bias_mu: Var,
    pub bias_rho: Var,
}

impl BayesConvParams {
    /// Means drawn uniformly in `±1/sqrt(fan_in)`, zero bias means, and every
    /// scale parameter set to `rho`.
    pub fn init<R: Rng + ?Sized>(c_out: usize, c_in: usize, k: usize, rho: f64, rng: &mut R) -> Self {
        let bound = 1.0 / ((c_in * k * k) as f64).sqrt();
        let n = c_out * c_in * k * k;
        let mu = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        Self {
            mu: Tensor::from_vec(vec![c_out, c_in, k, k], mu).expect("kernel shape"),
            rho: Tensor::full(&[c_out, c_in, k, k], rho),
            bias_mu: Tensor::zeros(&[c_out]),
            bias_rho: Tensor::full(&[c_out], rho),
        }
    }

    pub fn register(&self, g: &Graph, requires_grad: bool) -> BayesConvVars {
        BayesConvVars {
            mu: g.leaf(self.mu.clone(), requires_grad),
            rho: g.leaf(self.rho.clone(), requires_grad),
            bias_mu: g.leaf(self.bias_mu.clone(), requires_grad),
            bias_rho: g.leaf(self.bias_rho.clone(), requires_grad),
        }
    }

    /// Effective posterior standard deviations of the kernel.
    pub fn kernel_std(&self) -> Tensor {
        self.rho.map(softplus)
    }
}

fn reparameterize<R: Rng + ?Sized>(g: &Graph, mu: Var, rho: Var, rng: &mut R) -> Result<Var> {
    let shape = g.shape(mu);
    let n = shape.iter().product();
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let eps = g.constant(Tensor::from_vec(shape, eps)?);
    let noise = g.hadamard(g.softplus(rho), eps)?;
    g.add(mu, noise)
}

/// Draws one `(kernel, bias)` sample, differentiable with respect to the
/// means and scales. Kernel noise is drawn before bias noise.
pub fn sample_bayes_kernel<R: Rng + ?Sized>(g: &Graph, p: &BayesConvVars, rng: &mut R) -> Result<(Var, Var)> {
    let kernel = reparameterize(g, p.mu, p.rho, rng)?;
    let bias = reparameterize(g, p.bias_mu, p.bias_rho, rng)?;
    Ok((kernel, bias))
}
