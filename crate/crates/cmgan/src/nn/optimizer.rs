use ndarray::{Array1, Array2};

use super::store::{GradStore, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Per-parameter velocity buffers for the optional momentum term.
#[derive(Debug, Clone, Default)]
pub struct SgdState {
    velocity: std::collections::HashMap<usize, Velocity>,
}

#[derive(Debug, Clone)]
struct Velocity {
    weight: Array2<f64>,
    bias: Array1<f64>,
    bn_gamma: Option<Array1<f64>>,
    bn_beta: Option<Array1<f64>>,
}

impl SgdState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One SGD step over the listed parameter entries: p ← p − α·v with
/// v ← momentum·v + g. Ascent (for discriminator objectives) negates the
/// applied direction. A shared parameter appears once in `ids`, so it is
/// updated exactly once using its accumulated gradient.
pub fn sgd_step(
    store: &mut ParamStore,
    grads: &GradStore,
    ids: &[ParamId],
    learning_rate: f64,
    momentum: f64,
    state: &mut SgdState,
    ascend: bool,
) -> Result<()> {
    let sign = if ascend { -1.0 } else { 1.0 };
    for &id in ids {
        let g = grads.get(id);
        if !g.is_finite() {
            return Err(Error::Divergence {
                epoch: 0,
                step: 0,
                detail: format!("non-finite gradient in parameter entry {}", id.index()),
            });
        }
        let params = store.get_mut(id);
        if momentum == 0.0 {
            let step = learning_rate * sign;
            params.weight.scaled_add(-step, &g.weight);
            params.bias.scaled_add(-step, &g.bias);
            if let Some(bn) = &mut params.batch_norm {
                bn.gamma.scaled_add(-step, g.bn_gamma.as_ref().unwrap());
                bn.beta.scaled_add(-step, g.bn_beta.as_ref().unwrap());
            }
        } else {
            let v = state.velocity.entry(id.index()).or_insert_with(|| Velocity {
                weight: Array2::zeros(g.weight.raw_dim()),
                bias: Array1::zeros(g.bias.raw_dim()),
                bn_gamma: g.bn_gamma.as_ref().map(|x| Array1::zeros(x.raw_dim())),
                bn_beta: g.bn_beta.as_ref().map(|x| Array1::zeros(x.raw_dim())),
            });
            v.weight.mapv_inplace(|x| x * momentum);
            v.weight += &g.weight;
            v.bias.mapv_inplace(|x| x * momentum);
            v.bias += &g.bias;
            let step = learning_rate * sign;
            params.weight.scaled_add(-step, &v.weight);
            params.bias.scaled_add(-step, &v.bias);
            if let Some(bn) = &mut params.batch_norm {
                let vg = v.bn_gamma.as_mut().unwrap();
                vg.mapv_inplace(|x| x * momentum);
                *vg += g.bn_gamma.as_ref().unwrap();
                bn.gamma.scaled_add(-step, vg);
                let vb = v.bn_beta.as_mut().unwrap();
                vb.mapv_inplace(|x| x * momentum);
                *vb += g.bn_beta.as_ref().unwrap();
                bn.beta.scaled_add(-step, vb);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::store::DenseParams;
    use crate::nn::{dense_backward, dense_forward, Activation, DenseLayer, Mode, Tensor2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn scalar_store(value: f64) -> (ParamStore, ParamId) {
        let mut store = ParamStore::new();
        let mut p = DenseParams::zeros(1, 1, false);
        p.weight[[0, 0]] = value;
        let id = store.add(p);
        (store, id)
    }

    #[test]
    fn plain_step_arithmetic() {
        let (mut store, id) = scalar_store(1.0);
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(id).weight[[0, 0]] = 2.0;
        let mut state = SgdState::new();
        sgd_step(&mut store, &grads, &[id], 0.1, 0.0, &mut state, false).unwrap();
        assert!((store.get(id).weight[[0, 0]] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (mut store, id) = scalar_store(1.234);
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(id).weight[[0, 0]] = 7.0;
        let before = store.get(id).clone();
        sgd_step(&mut store, &grads, &[id], 0.0, 0.0, &mut SgdState::new(), false).unwrap();
        assert_eq!(&before, store.get(id));
    }

    #[test]
    fn ascend_negates_the_direction() {
        let (mut store, id) = scalar_store(1.0);
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(id).weight[[0, 0]] = 2.0;
        sgd_step(&mut store, &grads, &[id], 0.1, 0.0, &mut SgdState::new(), true).unwrap();
        assert!((store.get(id).weight[[0, 0]] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let (mut store, id) = scalar_store(0.0);
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(id).weight[[0, 0]] = f64::NAN;
        let err = sgd_step(&mut store, &grads, &[id], 0.1, 0.0, &mut SgdState::new(), false)
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    /// A layer referenced by two pathways gets one update with the summed
    /// gradient — identical to an independent copy updated with g1 + g2.
    #[test]
    fn shared_entry_updates_once_with_summed_gradient() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let shared = store.add(DenseParams::glorot(3, 2, false, &mut rng));
        let layer = DenseLayer {
            param: shared,
            in_dim: 3,
            out_dim: 2,
            activation: Activation::Identity,
        };

        let x1 = Tensor2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
        let x2 = Tensor2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
        let g1 = Tensor2::from_shape_fn((4, 2), |_| rng.gen_range(-1.0..1.0));
        let g2 = Tensor2::from_shape_fn((4, 2), |_| rng.gen_range(-1.0..1.0));

        // Shared store: both "pathways" backprop into one entry.
        let mut grads = GradStore::zeros_like(&store);
        let (_, c1) = dense_forward(&x1, &layer, &mut store, Mode::Train).unwrap();
        let (_, c2) = dense_forward(&x2, &layer, &mut store, Mode::Train).unwrap();
        dense_backward(&g1, c1.as_ref().unwrap(), &layer, &store, &mut grads).unwrap();
        dense_backward(&g2, c2.as_ref().unwrap(), &layer, &store, &mut grads).unwrap();
        let mut shared_store = store.clone();
        sgd_step(&mut shared_store, &grads, &[shared], 0.05, 0.0, &mut SgdState::new(), false)
            .unwrap();

        // Independent copy receiving the explicit sum.
        let mut copy = store.clone();
        let mut summed = GradStore::zeros_like(&copy);
        {
            let e = summed.get_mut(shared);
            e.weight = &x1.t().dot(&g1) + &x2.t().dot(&g2);
            e.bias = &g1.sum_axis(ndarray::Axis(0)) + &g2.sum_axis(ndarray::Axis(0));
        }
        sgd_step(&mut copy, &summed, &[shared], 0.05, 0.0, &mut SgdState::new(), false).unwrap();

        assert_eq!(shared_store.get(shared).weight, copy.get(shared).weight);
        assert_eq!(shared_store.get(shared).bias, copy.get(shared).bias);
    }

    #[test]
    fn momentum_accumulates_velocity() {
        let (mut store, id) = scalar_store(0.0);
        let mut grads = GradStore::zeros_like(&store);
        grads.get_mut(id).weight[[0, 0]] = 1.0;
        let mut state = SgdState::new();
        // v1 = 1, v2 = 0.9 + 1 = 1.9; p = -(0.1)(1) - (0.1)(1.9)
        sgd_step(&mut store, &grads, &[id], 0.1, 0.9, &mut state, false).unwrap();
        sgd_step(&mut store, &grads, &[id], 0.1, 0.9, &mut state, false).unwrap();
        assert!((store.get(id).weight[[0, 0]] + 0.29).abs() < 1e-12);
    }
}
