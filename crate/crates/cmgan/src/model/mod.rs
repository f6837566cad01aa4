//! The network family: two generator pathways (encoder/decoder halves) with a
//! weight-shared second encoder layer, a shared semantic softmax head, two
//! intra-modality discriminators and two inter-modality discriminators.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use ndarray::concatenate;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    dense_forward, softmax_rows, Activation, DenseCache, DenseLayer, DenseParams, GradStore, Mode,
    ParamId, ParamStore, Tensor2,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Image,
    Text,
}

/// Dimensions of a model instance. Paper-scale widths are hidden = 1024 and
/// inter_hidden = 512; desk-scale runs shrink them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub d_img: usize,
    pub d_txt: usize,
    pub classes: usize,
    pub hidden: usize,
    pub inter_hidden: usize,
}

impl ModelDims {
    pub fn new(d_img: usize, d_txt: usize, classes: usize) -> Self {
        ModelDims {
            d_img,
            d_txt,
            classes,
            hidden: 1024,
            inter_hidden: 512,
        }
    }

    pub fn with_hidden(mut self, hidden: usize, inter_hidden: usize) -> Self {
        self.hidden = hidden;
        self.inter_hidden = inter_hidden;
        self
    }

    pub fn feature_dim(&self, modality: Modality) -> usize {
        match modality {
            Modality::Image => self.d_img,
            Modality::Text => self.d_txt,
        }
    }
}

/// Encoder/decoder stack for one modality: d_m → hidden → hidden (common
/// representation), then hidden → hidden → d_m (reconstruction).
#[derive(Debug, Clone)]
pub struct GeneratorPathway {
    pub enc1: DenseLayer,
    pub enc2: DenseLayer,
    pub dec1: DenseLayer,
    pub dec2: DenseLayer,
}

/// Two dense layers over the concatenation [common, original].
#[derive(Debug, Clone)]
pub struct InterDiscriminator {
    pub layer1: DenseLayer,
    pub layer2: DenseLayer,
}

#[derive(Debug, Clone)]
pub struct CmGanModel {
    pub dims: ModelDims,
    pub store: ParamStore,
    pub image_pathway: GeneratorPathway,
    pub text_pathway: GeneratorPathway,
    pub semantic: DenseLayer,
    pub d_img: DenseLayer,
    pub d_txt: DenseLayer,
    pub d_ci: InterDiscriminator,
    pub d_ct: InterDiscriminator,
    /// When true, both pathways' second encoder layers are one storage entry.
    pub weight_sharing: bool,
}

fn bn_relu(param: ParamId, in_dim: usize, out_dim: usize) -> DenseLayer {
    DenseLayer {
        param,
        in_dim,
        out_dim,
        activation: Activation::Relu,
    }
}

impl CmGanModel {
    /// Builds a freshly initialized model. `weight_sharing` controls whether
    /// the second encoder layer is one shared entry or two independent draws.
    pub fn new<R: Rng>(dims: ModelDims, weight_sharing: bool, rng: &mut R) -> Self {
        let h = dims.hidden;
        let mut store = ParamStore::new();
        let glorot =
            |store: &mut ParamStore, i: usize, o: usize, bn: bool, rng: &mut R| -> ParamId {
                store.add(DenseParams::glorot(i, o, bn, rng))
            };

        let img_enc1 = glorot(&mut store, dims.d_img, h, true, rng);
        let shared_enc2 = glorot(&mut store, h, h, true, rng);
        let txt_enc1 = glorot(&mut store, dims.d_txt, h, true, rng);
        let txt_enc2 = if weight_sharing {
            shared_enc2
        } else {
            glorot(&mut store, h, h, true, rng)
        };
        let img_dec1 = glorot(&mut store, h, h, true, rng);
        let img_dec2 = glorot(&mut store, h, dims.d_img, false, rng);
        let txt_dec1 = glorot(&mut store, h, h, true, rng);
        let txt_dec2 = glorot(&mut store, h, dims.d_txt, false, rng);
        let semantic = glorot(&mut store, h, dims.classes, false, rng);
        let d_img = glorot(&mut store, dims.d_img, 1, false, rng);
        let d_txt = glorot(&mut store, dims.d_txt, 1, false, rng);
        let d_ci1 = glorot(&mut store, h + dims.d_img, dims.inter_hidden, true, rng);
        let d_ci2 = glorot(&mut store, dims.inter_hidden, 1, false, rng);
        let d_ct1 = glorot(&mut store, h + dims.d_txt, dims.inter_hidden, true, rng);
        let d_ct2 = glorot(&mut store, dims.inter_hidden, 1, false, rng);

        let image_pathway = GeneratorPathway {
            enc1: bn_relu(img_enc1, dims.d_img, h),
            enc2: bn_relu(shared_enc2, h, h),
            dec1: bn_relu(img_dec1, h, h),
            dec2: DenseLayer {
                param: img_dec2,
                in_dim: h,
                out_dim: dims.d_img,
                activation: Activation::Identity,
            },
        };
        let text_pathway = GeneratorPathway {
            enc1: bn_relu(txt_enc1, dims.d_txt, h),
            enc2: bn_relu(txt_enc2, h, h),
            dec1: bn_relu(txt_dec1, h, h),
            dec2: DenseLayer {
                param: txt_dec2,
                in_dim: h,
                out_dim: dims.d_txt,
                activation: Activation::Identity,
            },
        };
        CmGanModel {
            dims,
            store,
            image_pathway,
            text_pathway,
            semantic: DenseLayer {
                param: semantic,
                in_dim: h,
                out_dim: dims.classes,
                activation: Activation::Identity,
            },
            d_img: DenseLayer {
                param: d_img,
                in_dim: dims.d_img,
                out_dim: 1,
                activation: Activation::Sigmoid,
            },
            d_txt: DenseLayer {
                param: d_txt,
                in_dim: dims.d_txt,
                out_dim: 1,
                activation: Activation::Sigmoid,
            },
            d_ci: InterDiscriminator {
                layer1: bn_relu(d_ci1, h + dims.d_img, dims.inter_hidden),
                layer2: DenseLayer {
                    param: d_ci2,
                    in_dim: dims.inter_hidden,
                    out_dim: 1,
                    activation: Activation::Sigmoid,
                },
            },
            d_ct: InterDiscriminator {
                layer1: bn_relu(d_ct1, h + dims.d_txt, dims.inter_hidden),
                layer2: DenseLayer {
                    param: d_ct2,
                    in_dim: dims.inter_hidden,
                    out_dim: 1,
                    activation: Activation::Sigmoid,
                },
            },
            weight_sharing,
        }
    }

    pub fn pathway(&self, modality: Modality) -> &GeneratorPathway {
        match modality {
            Modality::Image => &self.image_pathway,
            Modality::Text => &self.text_pathway,
        }
    }

    /// Parameter entries on the generator side of the adversarial boundary:
    /// both pathways plus the semantic head. The shared entry appears once.
    pub fn generator_params(&self) -> Vec<ParamId> {
        let mut ids = vec![
            self.image_pathway.enc1.param,
            self.image_pathway.enc2.param,
            self.image_pathway.dec1.param,
            self.image_pathway.dec2.param,
            self.text_pathway.enc1.param,
            self.text_pathway.enc2.param,
            self.text_pathway.dec1.param,
            self.text_pathway.dec2.param,
            self.semantic.param,
        ];
        ids.sort_by_key(|id| id.index());
        ids.dedup_by_key(|id| id.index());
        ids
    }

    pub fn discriminator_params(&self) -> Vec<ParamId> {
        vec![
            self.d_img.param,
            self.d_txt.param,
            self.d_ci.layer1.param,
            self.d_ci.layer2.param,
            self.d_ct.layer1.param,
            self.d_ct.layer2.param,
        ]
    }

    /// Maps original features to the common representation.
    pub fn encode(&mut self, modality: Modality, h: &Tensor2, mode: Mode) -> Result<Tensor2> {
        Ok(self.encode_cached(modality, h, mode)?.0)
    }

    /// As [`CmGanModel::encode`], returning layer caches in train mode.
    pub fn encode_cached(
        &mut self,
        modality: Modality,
        h: &Tensor2,
        mode: Mode,
    ) -> Result<(Tensor2, EncoderCaches)> {
        let pathway = self.pathway(modality).clone();
        let (a, c1) = dense_forward(h, &pathway.enc1, &mut self.store, mode)?;
        let (s, c2) = dense_forward(&a, &pathway.enc2, &mut self.store, mode)?;
        Ok((s, EncoderCaches { enc1: c1, enc2: c2 }))
    }

    /// Maps a common representation back to the modality's feature space.
    pub fn decode(&mut self, modality: Modality, s: &Tensor2, mode: Mode) -> Result<Tensor2> {
        Ok(self.decode_cached(modality, s, mode)?.0)
    }

    pub fn decode_cached(
        &mut self,
        modality: Modality,
        s: &Tensor2,
        mode: Mode,
    ) -> Result<(Tensor2, DecoderCaches)> {
        let pathway = self.pathway(modality).clone();
        let (a, c1) = dense_forward(s, &pathway.dec1, &mut self.store, mode)?;
        let (r, c2) = dense_forward(&a, &pathway.dec2, &mut self.store, mode)?;
        Ok((r, DecoderCaches { dec1: c1, dec2: c2 }))
    }

    /// One score per row, distinguishing original features from reconstructions.
    pub fn discriminate_intra(
        &mut self,
        modality: Modality,
        x: &Tensor2,
        mode: Mode,
    ) -> Result<Tensor2> {
        let layer = match modality {
            Modality::Image => self.d_img,
            Modality::Text => self.d_txt,
        };
        let (scores, _) = dense_forward(x, &layer, &mut self.store, mode)?;
        Ok(scores)
    }

    /// One score per row on the concatenation [common, original].
    pub fn discriminate_inter(
        &mut self,
        pathway: Modality,
        s: &Tensor2,
        h: &Tensor2,
        mode: Mode,
    ) -> Result<Tensor2> {
        let disc = match pathway {
            Modality::Image => self.d_ci.clone(),
            Modality::Text => self.d_ct.clone(),
        };
        let input = concat_inter(s, h)?;
        let (a, _) = dense_forward(&input, &disc.layer1, &mut self.store, mode)?;
        let (scores, _) = dense_forward(&a, &disc.layer2, &mut self.store, mode)?;
        Ok(scores)
    }

    /// Class probabilities of common representations under the shared head.
    pub fn classify(&mut self, s: &Tensor2, mode: Mode) -> Result<Tensor2> {
        let layer = self.semantic;
        let (logits, _) = dense_forward(s, &layer, &mut self.store, mode)?;
        Ok(softmax_rows(&logits))
    }
}

/// Caches from an encoder forward, in pathway order.
pub struct EncoderCaches {
    pub enc1: Option<DenseCache>,
    pub enc2: Option<DenseCache>,
}

/// Caches from a decoder forward, in pathway order.
pub struct DecoderCaches {
    pub dec1: Option<DenseCache>,
    pub dec2: Option<DenseCache>,
}

/// Concatenates [common, original] along the feature axis.
pub fn concat_inter(s: &Tensor2, h: &Tensor2) -> Result<Tensor2> {
    if s.nrows() != h.nrows() {
        return Err(Error::Shape {
            context: "discriminate_inter",
            expected: format!("{} rows", s.nrows()),
            got: format!("{} rows", h.nrows()),
        });
    }
    Ok(concatenate(ndarray::Axis(1), &[s.view(), h.view()]).expect("matching row counts"))
}

/// Convenience: deep snapshot of every parameter for best-epoch bookkeeping.
pub fn snapshot(model: &CmGanModel) -> ParamStore {
    model.store.clone()
}

/// Zeroed gradient buffers sized to a model's store.
pub fn grads_for(model: &CmGanModel) -> GradStore {
    GradStore::zeros_like(&model.store)
}
