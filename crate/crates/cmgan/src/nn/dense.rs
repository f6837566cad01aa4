use ndarray::{Array1, Axis};

use super::loss::softmax_rows;
use super::store::{GradStore, ParamId, ParamStore};
use super::{Tensor2, BN_EPS, BN_MOMENTUM, SCORE_EPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics updated; caches produced.
    Train,
    /// Batch statistics and caches, but running statistics untouched. Used
    /// when forwarding through the frozen side of the adversarial boundary,
    /// where a bitwise no-change guarantee must hold.
    TrainFrozen,
    /// Running statistics; no caches.
    Infer,
}

/// Layer descriptor: shape, activation, and the parameter entry it reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseLayer {
    pub param: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Intermediates cached by a train-mode forward, consumed by [`dense_backward`].
#[derive(Debug, Clone)]
pub struct DenseCache {
    x: Tensor2,
    bn: Option<BnCache>,
    y: Tensor2,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Tensor2,
    inv_std: Array1<f64>,
}

impl DenseCache {
    pub fn output(&self) -> &Tensor2 {
        &self.y
    }
}

fn check_in_dim(x: &Tensor2, layer: &DenseLayer, context: &'static str) -> Result<()> {
    if x.ncols() != layer.in_dim {
        return Err(Error::Shape {
            context,
            expected: format!("{} columns", layer.in_dim),
            got: format!("{} columns", x.ncols()),
        });
    }
    Ok(())
}

/// x·W + b, then batch norm if configured, then the activation.
///
/// In train mode batch statistics are used (and running statistics updated);
/// a cache for the backward pass is returned. In infer mode running statistics
/// are used and no cache is produced.
pub fn dense_forward(
    x: &Tensor2,
    layer: &DenseLayer,
    store: &mut ParamStore,
    mode: Mode,
) -> Result<(Tensor2, Option<DenseCache>)> {
    check_in_dim(x, layer, "dense_forward")?;
    let params = store.get_mut(layer.param);
    let mut z = x.dot(&params.weight);
    z += &params.bias;

    let mut bn_cache = None;
    if let Some(bn) = &mut params.batch_norm {
        match mode {
            Mode::Train | Mode::TrainFrozen => {
                let n = z.nrows();
                if n == 0 {
                    return Err(Error::DegenerateBatch);
                }
                let mean = z.mean_axis(Axis(0)).expect("nonempty batch");
                let var = z.map_axis(Axis(0), |col| {
                    let m = col.sum() / n as f64;
                    col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64
                });
                let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                let mut xhat = z;
                for mut row in xhat.rows_mut() {
                    row -= &mean;
                    row *= &inv_std;
                }
                let mut out = xhat.clone();
                for mut row in out.rows_mut() {
                    row *= &bn.gamma;
                    row += &bn.beta;
                }
                if mode == Mode::Train {
                    bn.running_mean =
                        &bn.running_mean * BN_MOMENTUM + &(&mean * (1.0 - BN_MOMENTUM));
                    bn.running_var = &bn.running_var * BN_MOMENTUM + &(&var * (1.0 - BN_MOMENTUM));
                }
                bn_cache = Some(BnCache { xhat, inv_std });
                z = out;
            }
            Mode::Infer => {
                let inv_std = bn.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                for mut row in z.rows_mut() {
                    row -= &bn.running_mean;
                    row *= &inv_std;
                    row *= &bn.gamma;
                    row += &bn.beta;
                }
            }
        }
    }

    let y = match layer.activation {
        Activation::Identity => z,
        Activation::Relu => z.mapv_into(|v| v.max(0.0)),
        // Clamped so downstream logarithms stay finite.
        Activation::Sigmoid => z.mapv_into(|v| {
            (1.0 / (1.0 + (-v).exp())).clamp(SCORE_EPS, 1.0 - SCORE_EPS)
        }),
        Activation::Softmax => softmax_rows(&z),
    };

    let cache = match mode {
        Mode::Train | Mode::TrainFrozen => Some(DenseCache {
            x: x.clone(),
            bn: bn_cache,
            y: y.clone(),
        }),
        Mode::Infer => None,
    };
    Ok((y, cache))
}

/// Backward pass through a layer. Accumulates parameter gradients into `grads`
/// (additively) and returns the gradient with respect to the input.
pub fn dense_backward(
    grad_out: &Tensor2,
    cache: &DenseCache,
    layer: &DenseLayer,
    store: &ParamStore,
    grads: &mut GradStore,
) -> Result<Tensor2> {
    if grad_out.dim() != cache.y.dim() {
        return Err(Error::Shape {
            context: "dense_backward",
            expected: format!("{:?}", cache.y.dim()),
            got: format!("{:?}", grad_out.dim()),
        });
    }
    let params = store.get(layer.param);

    // Activation backward, using the cached activated output.
    let mut dz = match layer.activation {
        Activation::Identity => grad_out.clone(),
        Activation::Relu => {
            let mut d = grad_out.clone();
            d.zip_mut_with(&cache.y, |g, &y| {
                if y <= 0.0 {
                    *g = 0.0
                }
            });
            d
        }
        Activation::Sigmoid => {
            let mut d = grad_out.clone();
            d.zip_mut_with(&cache.y, |g, &y| *g *= y * (1.0 - y));
            d
        }
        Activation::Softmax => {
            // dz = y ⊙ (g − <g, y>) per row
            let mut d = grad_out.clone();
            for (mut drow, yrow) in d.rows_mut().into_iter().zip(cache.y.rows()) {
                let dot: f64 = drow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum();
                drow.zip_mut_with(&yrow, |g, &y| *g = y * (*g - dot));
            }
            d
        }
    };

    // Batch-norm backward (train-mode batch statistics).
    if let Some(bn) = &params.batch_norm {
        let bc = cache.bn.as_ref().expect("cache from a batch-norm forward");
        let n = dz.nrows() as f64;
        let g = grads.get_mut(layer.param);
        let dgamma = (&dz * &bc.xhat).sum_axis(Axis(0));
        let dbeta = dz.sum_axis(Axis(0));
        *g.bn_gamma.as_mut().expect("bn grad buffer") += &dgamma;
        *g.bn_beta.as_mut().expect("bn grad buffer") += &dbeta;

        // d/dz of the normalization itself
        let mut dxhat = dz;
        for mut row in dxhat.rows_mut() {
            row *= &bn.gamma;
        }
        let sum_dxhat = dxhat.sum_axis(Axis(0));
        let sum_dxhat_xhat = (&dxhat * &bc.xhat).sum_axis(Axis(0));
        let mut out = dxhat;
        for mut row in out.rows_mut() {
            row.zip_mut_with(&sum_dxhat, |v, &s| *v = n * *v - s);
        }
        // subtract xhat * sum(dxhat*xhat) and scale by inv_std / n
        for (mut row, xrow) in out.rows_mut().into_iter().zip(bc.xhat.rows()) {
            for ((v, &xh), (&sxx, &istd)) in row
                .iter_mut()
                .zip(xrow.iter())
                .zip(sum_dxhat_xhat.iter().zip(bc.inv_std.iter()))
            {
                *v = (*v - xh * sxx) * istd / n;
            }
        }
        dz = out;
    }

    let g = grads.get_mut(layer.param);
    g.weight += &cache.x.t().dot(&dz);
    g.bias += &dz.sum_axis(Axis(0));
    Ok(dz.dot(&params.weight.t()))
}
