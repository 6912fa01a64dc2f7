use rand::Rng;
use rand_distr::StandardNormal;

use super::model::{ForwardCache, VaeModel};
use super::VaeError;

/// Batch-mean loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub loss: f64,
    pub recon: f64,
    pub kl: f64,
}

/// `0.5 * sum(mu^2 + exp(logvar) - logvar - 1)`.
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - lv - 1.0)
        .sum::<f64>()
}

/// One standard normal vector of length `latent_dim` per batch row.
pub fn draw_noise(rng: &mut impl Rng, rows: usize, latent_dim: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..latent_dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

fn check_batch(model: &VaeModel, batch: &[Vec<f64>], noise: &[Vec<f64>]) -> Result<(), VaeError> {
    if batch.is_empty() {
        return Err(VaeError::TooFewSamples { got: 0, needed: 1 });
    }
    if noise.len() != batch.len() {
        return Err(VaeError::DimMismatch {
            expected: batch.len(),
            got: noise.len(),
        });
    }
    for (x, e) in batch.iter().zip(noise) {
        if x.len() != model.input_dim {
            return Err(VaeError::DimMismatch {
                expected: model.input_dim,
                got: x.len(),
            });
        }
        if e.len() != model.hyper.latent_dim {
            return Err(VaeError::DimMismatch {
                expected: model.hyper.latent_dim,
                got: e.len(),
            });
        }
    }
    Ok(())
}

fn terms_of(cache: &ForwardCache) -> (f64, f64) {
    let recon = cache.y.iter().zip(&cache.x).map(|(y, x)| (y - x).powi(2)).sum::<f64>();
    (recon, kl_divergence(&cache.mu, &cache.logvar))
}

/// Loss over an already normalized batch with explicit noise.
///
/// The reconstruction term is the squared error summed over input dimensions;
/// both terms are averaged over the batch.
pub fn elbo_loss_with_noise(model: &VaeModel, batch: &[Vec<f64>], noise: &[Vec<f64>]) -> Result<LossTerms, VaeError> {
    check_batch(model, batch, noise)?;
    let n = batch.len() as f64;
    let (mut recon, mut kl) = (0.0, 0.0);
    for (x, e) in batch.iter().zip(noise) {
        let (r, k) = terms_of(&model.forward_normalized(x, e));
        recon += r / n;
        kl += k / n;
    }
    finite_terms(recon, kl, model.hyper.beta)
}

fn finite_terms(recon: f64, kl: f64, beta: f64) -> Result<LossTerms, VaeError> {
    let loss = recon + beta * kl;
    if !(loss.is_finite() && recon.is_finite() && kl.is_finite()) {
        return Err(VaeError::NonFinite("loss".into()));
    }
    Ok(LossTerms { loss, recon, kl })
}

/// Analytic gradient of [`elbo_loss_with_noise`] with respect to every weight and bias.
/// The returned model holds gradients in place of parameters.
pub fn backward_with_noise(
    model: &VaeModel,
    batch: &[Vec<f64>],
    noise: &[Vec<f64>],
) -> Result<(LossTerms, VaeModel), VaeError> {
    check_batch(model, batch, noise)?;
    let n = batch.len() as f64;
    let beta = model.hyper.beta;
    let mut g = model.zeros_like();
    let (mut recon, mut kl) = (0.0, 0.0);
    for (x, e) in batch.iter().zip(noise) {
        let c = model.forward_normalized(x, e);
        let (r, k) = terms_of(&c);
        recon += r / n;
        kl += k / n;

        let dy: Vec<f64> = c.y.iter().zip(&c.x).map(|(y, x)| 2.0 * (y - x) / n).collect();
        g.dec_out.accumulate(&dy, &c.h3);
        let da3 = tanh_back(&model.dec_out.backward_input(&dy), &c.h3);
        g.dec1.accumulate(&da3, &c.z);
        let dz = model.dec1.backward_input(&da3);

        let dmu: Vec<f64> = dz.iter().zip(&c.mu).map(|(d, m)| d + beta * m / n).collect();
        let dlv: Vec<f64> = (0..dz.len())
            .map(|j| {
                if !c.logvar_free[j] {
                    return 0.0;
                }
                let sigma = (0.5 * c.logvar[j]).exp();
                dz[j] * c.eps[j] * 0.5 * sigma + beta * 0.5 * (c.logvar[j].exp() - 1.0) / n
            })
            .collect();
        g.mu_head.accumulate(&dmu, &c.h2);
        g.logvar_head.accumulate(&dlv, &c.h2);
        let mut dh2 = model.mu_head.backward_input(&dmu);
        for (a, b) in dh2.iter_mut().zip(model.logvar_head.backward_input(&dlv)) {
            *a += b;
        }
        let da2 = tanh_back(&dh2, &c.h2);
        g.enc2.accumulate(&da2, &c.h1);
        let da1 = tanh_back(&model.enc2.backward_input(&da2), &c.h1);
        g.enc1.accumulate(&da1, &c.x);
    }
    let terms = finite_terms(recon, kl, beta)?;
    if !g.is_finite() {
        return Err(VaeError::NonFinite("gradient".into()));
    }
    Ok((terms, g))
}

fn tanh_back(grad: &[f64], activated: &[f64]) -> Vec<f64> {
    grad.iter().zip(activated).map(|(g, h)| g * (1.0 - h * h)).collect()
}

fn normalized_batch(model: &VaeModel, batch: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, VaeError> {
    batch.iter().map(|x| model.normalize(x)).collect()
}

/// Loss of a raw (unnormalized) batch; draws one noise vector per row from `rng`.
pub fn elbo_loss(model: &VaeModel, batch: &[Vec<f64>], rng: &mut impl Rng) -> Result<LossTerms, VaeError> {
    let xs = normalized_batch(model, batch)?;
    let noise = draw_noise(rng, xs.len(), model.hyper.latent_dim);
    elbo_loss_with_noise(model, &xs, &noise)
}

/// Gradients of a raw batch. Consumes exactly the same draws as [`elbo_loss`],
/// so equally seeded rngs give a matching forward/backward pair.
pub fn backward(model: &VaeModel, batch: &[Vec<f64>], rng: &mut impl Rng) -> Result<(LossTerms, VaeModel), VaeError> {
    let xs = normalized_batch(model, batch)?;
    let noise = draw_noise(rng, xs.len(), model.hyper.latent_dim);
    backward_with_noise(model, &xs, &noise)
}
