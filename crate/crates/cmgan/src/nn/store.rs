use ndarray::{Array1, Array2};
use rand::Rng;

/// Handle into a [`ParamStore`]. Layers holding the same id share storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Learnable batch-norm scale/shift plus running statistics for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNormState {
    pub fn new(dim: usize) -> Self {
        BatchNormState {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
        }
    }
}

/// Parameters of one dense layer: weight (in_dim x out_dim), bias, optional batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub batch_norm: Option<BatchNormState>,
}

impl DenseParams {
    /// Glorot-uniform weights, zero bias: w ~ U(-a, a) with a = sqrt(6/(in+out)).
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, batch_norm: bool, rng: &mut R) -> Self {
        let a = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weight = Array2::from_shape_fn((in_dim, out_dim), |_| rng.gen_range(-a..a));
        DenseParams {
            weight,
            bias: Array1::zeros(out_dim),
            batch_norm: if batch_norm {
                Some(BatchNormState::new(out_dim))
            } else {
                None
            },
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, batch_norm: bool) -> Self {
        DenseParams {
            weight: Array2::zeros((in_dim, out_dim)),
            bias: Array1::zeros(out_dim),
            batch_norm: if batch_norm {
                Some(BatchNormState::new(out_dim))
            } else {
                None
            },
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }
}

/// Flat store of every parameter tensor in a model. Sharing a layer between
/// two pathways means both layer descriptors carry the same [`ParamId`], so
/// reads and gradient writes hit the same entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<DenseParams>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, params: DenseParams) -> ParamId {
        self.entries.push(params);
        ParamId(self.entries.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &DenseParams {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseParams {
        &mut self.entries[id.0]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }
}

/// Gradient buffers for one dense layer, shapes mirroring [`DenseParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub bn_gamma: Option<Array1<f64>>,
    pub bn_beta: Option<Array1<f64>>,
}

impl DenseGrads {
    fn zeros_like(params: &DenseParams) -> Self {
        DenseGrads {
            weight: Array2::zeros(params.weight.raw_dim()),
            bias: Array1::zeros(params.bias.raw_dim()),
            bn_gamma: params
                .batch_norm
                .as_ref()
                .map(|bn| Array1::zeros(bn.gamma.raw_dim())),
            bn_beta: params
                .batch_norm
                .as_ref()
                .map(|bn| Array1::zeros(bn.beta.raw_dim())),
        }
    }

    fn reset(&mut self) {
        self.weight.fill(0.0);
        self.bias.fill(0.0);
        if let Some(g) = &mut self.bn_gamma {
            g.fill(0.0);
        }
        if let Some(b) = &mut self.bn_beta {
            b.fill(0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().all(|v| v.is_finite())
            && self.bias.iter().all(|v| v.is_finite())
            && self.bn_gamma.iter().flatten().all(|v| v.is_finite())
            && self.bn_beta.iter().flatten().all(|v| v.is_finite())
    }
}

/// Per-parameter gradient buffers mirroring a [`ParamStore`]. Backward passes
/// accumulate additively; call [`GradStore::reset`] between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct GradStore {
    entries: Vec<DenseGrads>,
}

impl GradStore {
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradStore {
            entries: store.entries.iter().map(DenseGrads::zeros_like).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &DenseGrads {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseGrads {
        &mut self.entries[id.0]
    }

    pub fn reset(&mut self) {
        for g in &mut self.entries {
            g.reset();
        }
    }
}
