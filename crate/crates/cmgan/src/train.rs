//! Alternating adversarial optimization: discriminator updates, K generator
//! steps with semantic and reconstruction terms, loss monitoring, and
//! best-validation model selection.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::eval::bimodal_retrieval;
use crate::model::{concat_inter, CmGanModel, Modality};
use crate::nn::{
    dense_backward, dense_forward, log_one_minus_score, log_score, mse, mse_grad, sgd_step,
    softmax_xent, GradStore, Mode, SgdState, Tensor2,
};

/// Which components of the full objective are active. All true is the full
/// model; the flags map onto the published baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub weight_sharing: bool,
    pub semantic_constraint: bool,
    pub intra_discrimination: bool,
    pub adversarial: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation {
            weight_sharing: true,
            semantic_constraint: true,
            intra_discrimination: true,
            adversarial: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub generator_steps: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub semantic_weight: f64,
    pub reconstruction_weight: f64,
    pub momentum: f64,
    pub seed: u64,
    pub ablation: Ablation,
    /// Debug switch: use the printed descent direction for the generator
    /// instead of the standard non-saturating fooling loss.
    pub literal_generator_sign: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            generator_steps: 2,
            learning_rate: 1e-3,
            epochs: 200,
            semantic_weight: 1.0,
            reconstruction_weight: 0.0,
            momentum: 0.0,
            seed: 0,
            ablation: Ablation::default(),
            literal_generator_sign: false,
        }
    }
}

impl TrainConfig {
    /// Effective config for the non-adversarial autoencoder baseline:
    /// reconstruction learning on top of the two decoders.
    pub fn cae_defaults(mut self) -> Self {
        self.ablation.adversarial = false;
        self.reconstruction_weight = 1.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(
                "batch_size must be >= 2 (mismatch sampling needs an alternative category)".into(),
            ));
        }
        if self.generator_steps < 1 {
            return Err(Error::Config("generator_steps must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.semantic_weight < 0.0 || self.reconstruction_weight < 0.0 {
            return Err(Error::Config("loss weights must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One sampled training batch: N matched pairs plus, per pair and modality,
/// a mismatched instance from a different category.
#[derive(Debug, Clone)]
pub struct Batch {
    pub image: Tensor2,
    pub text: Tensor2,
    pub labels: Vec<usize>,
    pub image_mismatch: Tensor2,
    pub text_mismatch: Tensor2,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn gather(block: &Tensor2, indices: &[usize]) -> Tensor2 {
    let mut out = Array2::zeros((indices.len(), block.ncols()));
    for (row, &i) in indices.iter().enumerate() {
        out.row_mut(row).assign(&block.row(i));
    }
    out
}

/// Uniform sample of N matched pairs without replacement within the batch;
/// mismatched instances drawn uniformly from instances of any other category.
pub fn sample_batch<R: Rng>(ds: &FeatureDataset, n: usize, rng: &mut R) -> Result<Batch> {
    if ds.distinct_categories() < 2 {
        return Err(Error::MismatchUnsatisfiable);
    }
    if n > ds.len() {
        return Err(Error::Config(format!(
            "batch size {n} exceeds dataset size {}",
            ds.len()
        )));
    }
    let picked = rand::seq::index::sample(rng, ds.len(), n).into_vec();

    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); ds.classes()];
    for (i, &label) in ds.labels().iter().enumerate() {
        by_label[label].push(i);
    }

    let draw_mismatch = |label: usize, rng: &mut R| -> usize {
        let pool = ds.len() - by_label[label].len();
        let mut k = rng.gen_range(0..pool);
        for (c, members) in by_label.iter().enumerate() {
            if c == label {
                continue;
            }
            if k < members.len() {
                return members[k];
            }
            k -= members.len();
        }
        unreachable!("pool size accounts for every other category")
    };

    let labels: Vec<usize> = picked.iter().map(|&i| ds.labels()[i]).collect();
    let img_mis: Vec<usize> = labels.iter().map(|&l| draw_mismatch(l, rng)).collect();
    let txt_mis: Vec<usize> = labels.iter().map(|&l| draw_mismatch(l, rng)).collect();

    Ok(Batch {
        image: gather(ds.image(), &picked),
        text: gather(ds.text(), &picked),
        labels,
        image_mismatch: gather(ds.image(), &img_mis),
        text_mismatch: gather(ds.text(), &txt_mis),
    })
}

/// Gradient of −(1/N)·Σ ln s with respect to the (clamped) scores.
fn grad_neg_mean_log(scores: &Tensor2) -> Tensor2 {
    let n = scores.nrows() as f64;
    scores.mapv(|s| -1.0 / (n * s.clamp(crate::nn::SCORE_EPS, 1.0 - crate::nn::SCORE_EPS)))
}

/// Gradient of −(coeff/N)·Σ ln(1−s) with respect to the scores.
fn grad_neg_mean_log_one_minus(scores: &Tensor2, coeff: f64) -> Tensor2 {
    let n = scores.nrows() as f64;
    scores.mapv(|s| coeff / (n * (1.0 - s.clamp(crate::nn::SCORE_EPS, 1.0 - crate::nn::SCORE_EPS))))
}

fn mean_log(scores: &Tensor2) -> f64 {
    scores.iter().map(|&s| log_score(s)).sum::<f64>() / scores.nrows() as f64
}

fn mean_log_one_minus(scores: &Tensor2) -> f64 {
    scores.iter().map(|&s| log_one_minus_score(s)).sum::<f64>() / scores.nrows() as f64
}

fn frac_above(scores: &Tensor2, threshold: f64) -> f64 {
    scores.iter().filter(|&&s| s > threshold).count() as f64 / scores.len() as f64
}

#[derive(Debug, Clone, Default)]
pub struct DiscStepStats {
    /// Value of the intra-modality ascent objective (Eqs. of the update rules).
    pub intra_objective: f64,
    /// Value of the inter-modality ascent objective.
    pub inter_objective: f64,
    pub acc_intra: f64,
    pub acc_inter: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GenStepStats {
    pub adversarial_loss: f64,
    pub semantic_loss: f64,
    pub reconstruction_loss: f64,
}

/// Forward pass of one generator pathway with every cache needed to backprop.
struct PathwayForward {
    common: Tensor2,
    reconstruction: Tensor2,
    enc1: crate::nn::DenseCache,
    enc2: crate::nn::DenseCache,
    dec1: crate::nn::DenseCache,
    dec2: crate::nn::DenseCache,
}

fn pathway_forward(
    model: &mut CmGanModel,
    modality: Modality,
    h: &Tensor2,
) -> Result<PathwayForward> {
    let (common, enc) = model.encode_cached(modality, h, Mode::Train)?;
    let (reconstruction, dec) = model.decode_cached(modality, &common, Mode::Train)?;
    Ok(PathwayForward {
        common,
        reconstruction,
        enc1: enc.enc1.expect("train mode caches"),
        enc2: enc.enc2.expect("train mode caches"),
        dec1: dec.dec1.expect("train mode caches"),
        dec2: dec.dec2.expect("train mode caches"),
    })
}

/// Forward through an inter-modality discriminator with caches.
struct InterForward {
    scores: Tensor2,
    input_cols_common: usize,
    layer1: crate::nn::DenseCache,
    layer2: crate::nn::DenseCache,
}

fn inter_forward(
    model: &mut CmGanModel,
    pathway: Modality,
    s: &Tensor2,
    h: &Tensor2,
    mode: Mode,
) -> Result<InterForward> {
    let disc = match pathway {
        Modality::Image => model.d_ci.clone(),
        Modality::Text => model.d_ct.clone(),
    };
    let input = concat_inter(s, h)?;
    let (a, c1) = dense_forward(&input, &disc.layer1, &mut model.store, mode)?;
    let (scores, c2) = dense_forward(&a, &disc.layer2, &mut model.store, mode)?;
    Ok(InterForward {
        scores,
        input_cols_common: s.ncols(),
        layer1: c1.expect("train mode caches"),
        layer2: c2.expect("train mode caches"),
    })
}

/// Backprop a score gradient through an inter discriminator; returns the
/// gradient with respect to the common-representation block of the input.
fn inter_backward(
    model: &CmGanModel,
    pathway: Modality,
    fwd: &InterForward,
    grad_scores: &Tensor2,
    grads: &mut GradStore,
) -> Result<Tensor2> {
    let disc = match pathway {
        Modality::Image => &model.d_ci,
        Modality::Text => &model.d_ct,
    };
    let da = dense_backward(grad_scores, &fwd.layer2, &disc.layer2, &model.store, grads)?;
    let dinput = dense_backward(&da, &fwd.layer1, &disc.layer1, &model.store, grads)?;
    Ok(dinput
        .slice_axis(Axis(1), ndarray::Slice::from(0..fwd.input_cols_common))
        .to_owned())
}

/// Fills `grads` with the gradient of the negated discriminator ascent
/// objective, without applying any update. Only discriminator parameters
/// receive gradient (the generator is a frozen input here), so descent on
/// these gradients realizes the published ascent rules.
pub fn discriminator_backward(
    model: &mut CmGanModel,
    batch: &Batch,
    cfg: &TrainConfig,
    grads: &mut GradStore,
) -> Result<DiscStepStats> {
    // Generator is frozen here: batch-stat forwards without touching its
    // running statistics, so the adversarial boundary holds bitwise.
    let s_img = model.encode(Modality::Image, &batch.image, Mode::TrainFrozen)?;
    let r_img = model.decode(Modality::Image, &s_img, Mode::TrainFrozen)?;
    let s_txt = model.encode(Modality::Text, &batch.text, Mode::TrainFrozen)?;
    let r_txt = model.decode(Modality::Text, &s_txt, Mode::TrainFrozen)?;
    let s_img_mis = model.encode(Modality::Image, &batch.image_mismatch, Mode::TrainFrozen)?;
    let s_txt_mis = model.encode(Modality::Text, &batch.text_mismatch, Mode::TrainFrozen)?;

    grads.reset();
    let mut stats = DiscStepStats::default();

    // Intra-modality: original features real, reconstructions fake.
    if cfg.ablation.intra_discrimination {
        let mut acc = 0.0;
        for (modality, real, fake) in [
            (Modality::Image, &batch.image, &r_img),
            (Modality::Text, &batch.text, &r_txt),
        ] {
            let layer = match modality {
                Modality::Image => model.d_img,
                Modality::Text => model.d_txt,
            };
            let (s_real, c_real) = dense_forward(real, &layer, &mut model.store, Mode::Train)?;
            let (s_fake, c_fake) = dense_forward(fake, &layer, &mut model.store, Mode::Train)?;
            stats.intra_objective += mean_log(&s_real) + mean_log_one_minus(&s_fake);
            acc += frac_above(&s_real, 0.5) + (1.0 - frac_above(&s_fake, 0.5));

            dense_backward(
                &grad_neg_mean_log(&s_real),
                c_real.as_ref().unwrap(),
                &layer,
                &model.store,
                grads,
            )?;
            dense_backward(
                &grad_neg_mean_log_one_minus(&s_fake, 1.0),
                c_fake.as_ref().unwrap(),
                &layer,
                &model.store,
                grads,
            )?;
        }
        stats.acc_intra = acc / 4.0;
    }

    // Inter-modality: own-modality common representation real; the other
    // modality's and the mismatched instance's are fake at half weight.
    let mut inter_acc = 0.0;
    for (pathway, real_s, real_h, cross_s, mis_s, mis_h) in [
        (
            Modality::Image,
            &s_img,
            &batch.image,
            &s_txt,
            &s_img_mis,
            &batch.image_mismatch,
        ),
        (
            Modality::Text,
            &s_txt,
            &batch.text,
            &s_img,
            &s_txt_mis,
            &batch.text_mismatch,
        ),
    ] {
        let real = inter_forward(model, pathway, real_s, real_h, Mode::Train)?;
        let cross = inter_forward(model, pathway, cross_s, real_h, Mode::Train)?;
        let mismatched = inter_forward(model, pathway, mis_s, mis_h, Mode::Train)?;
        stats.inter_objective += mean_log(&real.scores)
            + (mean_log_one_minus(&cross.scores) + mean_log_one_minus(&mismatched.scores)) / 2.0;
        inter_acc += frac_above(&real.scores, 0.5)
            + (1.0 - frac_above(&cross.scores, 0.5))
            + (1.0 - frac_above(&mismatched.scores, 0.5));

        inter_backward(model, pathway, &real, &grad_neg_mean_log(&real.scores), grads)?;
        inter_backward(
            model,
            pathway,
            &cross,
            &grad_neg_mean_log_one_minus(&cross.scores, 0.5),
            grads,
        )?;
        inter_backward(
            model,
            pathway,
            &mismatched,
            &grad_neg_mean_log_one_minus(&mismatched.scores, 0.5),
            grads,
        )?;
    }
    stats.acc_inter = inter_acc / 6.0;

    if !stats.intra_objective.is_finite() || !stats.inter_objective.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            step: 0,
            detail: "non-finite discriminator objective".into(),
        });
    }
    Ok(stats)
}

/// One discriminator update phase. Generator parameters are read-only here:
/// reconstructions and common representations are computed with the generator
/// frozen.
pub fn discriminator_step(
    model: &mut CmGanModel,
    batch: &Batch,
    cfg: &TrainConfig,
    grads: &mut GradStore,
    state: &mut SgdState,
) -> Result<DiscStepStats> {
    let stats = discriminator_backward(model, batch, cfg, grads)?;
    let ids = model.discriminator_params();
    sgd_step(
        &mut model.store,
        grads,
        &ids,
        cfg.learning_rate,
        cfg.momentum,
        state,
        false,
    )?;
    grads.reset();
    Ok(stats)
}

/// Fills `grads` with the gradient of the full generator loss — the
/// non-saturating adversarial terms plus the semantic and reconstruction
/// constraints — without applying any update. Every traversed layer
/// accumulates its true gradient (including the discriminators', which the
/// update phase then ignores); the shared encoder entry receives the sum of
/// both pathways' contributions.
pub fn generator_backward(
    model: &mut CmGanModel,
    batch: &Batch,
    cfg: &TrainConfig,
    grads: &mut GradStore,
) -> Result<GenStepStats> {
    grads.reset();
    let img = pathway_forward(model, Modality::Image, &batch.image)?;
    let txt = pathway_forward(model, Modality::Text, &batch.text)?;

    let mut stats = GenStepStats::default();
    // +1 descends the printed direction; −1 is the standard fooling loss.
    let adv_sign = if cfg.literal_generator_sign { 1.0 } else { -1.0 };

    let mut ds_img: Tensor2 = Array2::zeros(img.common.raw_dim());
    let mut ds_txt: Tensor2 = Array2::zeros(txt.common.raw_dim());
    let mut dr_img: Tensor2 = Array2::zeros(img.reconstruction.raw_dim());
    let mut dr_txt: Tensor2 = Array2::zeros(txt.reconstruction.raw_dim());

    if cfg.ablation.adversarial {
        // Image pathway fools D_Ct via (s^i, h^t) and D_I via r^i; the text
        // pathway symmetrically fools D_Ci and D_T. Discriminator forwards are
        // frozen-side: batch statistics, running statistics untouched.
        let ct = inter_forward(model, Modality::Text, &img.common, &batch.text, Mode::TrainFrozen)?;
        stats.adversarial_loss += adv_sign * mean_log(&ct.scores);
        let g = grad_neg_mean_log(&ct.scores).mapv_into(|v| v * -adv_sign);
        ds_img += &inter_backward(model, Modality::Text, &ct, &g, grads)?;

        let ci = inter_forward(model, Modality::Image, &txt.common, &batch.image, Mode::TrainFrozen)?;
        stats.adversarial_loss += adv_sign * mean_log(&ci.scores);
        let g = grad_neg_mean_log(&ci.scores).mapv_into(|v| v * -adv_sign);
        ds_txt += &inter_backward(model, Modality::Image, &ci, &g, grads)?;

        for (modality, recon, dr) in [
            (Modality::Image, &img.reconstruction, &mut dr_img),
            (Modality::Text, &txt.reconstruction, &mut dr_txt),
        ] {
            let layer = match modality {
                Modality::Image => model.d_img,
                Modality::Text => model.d_txt,
            };
            let (scores, cache) =
                dense_forward(recon, &layer, &mut model.store, Mode::TrainFrozen)?;
            stats.adversarial_loss += adv_sign * mean_log(&scores);
            let g = grad_neg_mean_log(&scores).mapv_into(|v| v * -adv_sign);
            *dr += &dense_backward(&g, cache.as_ref().unwrap(), &layer, &model.store, grads)?;
        }
    }

    if cfg.ablation.semantic_constraint && cfg.semantic_weight > 0.0 {
        let sem = model.semantic;
        for (common, enc_ds) in [(&img.common, &mut ds_img), (&txt.common, &mut ds_txt)] {
            let (logits, cache) = dense_forward(common, &sem, &mut model.store, Mode::Train)?;
            let (ce, mut dlogits) = softmax_xent(&logits, &batch.labels)?;
            stats.semantic_loss += cfg.semantic_weight * ce;
            dlogits.mapv_inplace(|v| v * cfg.semantic_weight);
            *enc_ds +=
                &dense_backward(&dlogits, cache.as_ref().unwrap(), &sem, &model.store, grads)?;
        }
    }

    if cfg.reconstruction_weight > 0.0 {
        for (recon, target, dr) in [
            (&img.reconstruction, &batch.image, &mut dr_img),
            (&txt.reconstruction, &batch.text, &mut dr_txt),
        ] {
            stats.reconstruction_loss += cfg.reconstruction_weight * mse(recon, target)?;
            let mut g = mse_grad(recon, target);
            g.mapv_inplace(|v| v * cfg.reconstruction_weight);
            *dr += &g;
        }
    }

    let total = stats.adversarial_loss + stats.semantic_loss + stats.reconstruction_loss;
    if !total.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            step: 0,
            detail: "non-finite generator loss".into(),
        });
    }

    // Decoder backward feeds its input gradient into the common representation.
    for (pathway_ref, fwd, dr, ds) in [
        (Modality::Image, &img, &dr_img, &mut ds_img),
        (Modality::Text, &txt, &dr_txt, &mut ds_txt),
    ] {
        let pathway = model.pathway(pathway_ref).clone();
        let da = dense_backward(dr, &fwd.dec2, &pathway.dec2, &model.store, grads)?;
        *ds += &dense_backward(&da, &fwd.dec1, &pathway.dec1, &model.store, grads)?;
    }
    for (pathway_ref, fwd, ds) in [
        (Modality::Image, &img, &ds_img),
        (Modality::Text, &txt, &ds_txt),
    ] {
        let pathway = model.pathway(pathway_ref).clone();
        let da = dense_backward(ds, &fwd.enc2, &pathway.enc2, &model.store, grads)?;
        dense_backward(&da, &fwd.enc1, &pathway.enc1, &model.store, grads)?;
    }
    Ok(stats)
}

/// One generator update phase. Discriminator parameters are untouched; the
/// shared encoder layer receives summed gradients and is updated once.
pub fn generator_step(
    model: &mut CmGanModel,
    batch: &Batch,
    cfg: &TrainConfig,
    grads: &mut GradStore,
    state: &mut SgdState,
) -> Result<GenStepStats> {
    let stats = generator_backward(model, batch, cfg, grads)?;
    let ids = model.generator_params();
    sgd_step(
        &mut model.store,
        grads,
        &ids,
        cfg.learning_rate,
        cfg.momentum,
        state,
        false,
    )?;
    grads.reset();
    Ok(stats)
}

/// Monitoring values of the two minimax objectives, exactly as written:
/// difference-of-scores for the intra pair, with the ½ coefficients for the
/// inter pair. Observational only; inference-mode forwards, no updates.
pub fn eval_losses(model: &mut CmGanModel, batch: &Batch) -> Result<(f64, f64)> {
    let s_img = model.encode(Modality::Image, &batch.image, Mode::Infer)?;
    let r_img = model.decode(Modality::Image, &s_img, Mode::Infer)?;
    let s_txt = model.encode(Modality::Text, &batch.text, Mode::Infer)?;
    let r_txt = model.decode(Modality::Text, &s_txt, Mode::Infer)?;
    let s_img_mis = model.encode(Modality::Image, &batch.image_mismatch, Mode::Infer)?;
    let s_txt_mis = model.encode(Modality::Text, &batch.text_mismatch, Mode::Infer)?;

    let mean = |t: &Tensor2| t.sum() / t.nrows() as f64;

    let l_gan1 = mean(&model.discriminate_intra(Modality::Image, &batch.image, Mode::Infer)?)
        - mean(&model.discriminate_intra(Modality::Image, &r_img, Mode::Infer)?)
        + mean(&model.discriminate_intra(Modality::Text, &batch.text, Mode::Infer)?)
        - mean(&model.discriminate_intra(Modality::Text, &r_txt, Mode::Infer)?);

    let l_gan2 = mean(&model.discriminate_inter(Modality::Image, &s_img, &batch.image, Mode::Infer)?)
        - 0.5 * mean(&model.discriminate_inter(Modality::Image, &s_txt, &batch.image, Mode::Infer)?)
        - 0.5
            * mean(&model.discriminate_inter(
                Modality::Image,
                &s_img_mis,
                &batch.image_mismatch,
                Mode::Infer,
            )?)
        + mean(&model.discriminate_inter(Modality::Text, &s_txt, &batch.text, Mode::Infer)?)
        - 0.5 * mean(&model.discriminate_inter(Modality::Text, &s_img, &batch.text, Mode::Infer)?)
        - 0.5
            * mean(&model.discriminate_inter(
                Modality::Text,
                &s_txt_mis,
                &batch.text_mismatch,
                Mode::Infer,
            )?);

    Ok((l_gan1, l_gan2))
}

/// One row of the training log.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_gan1: f64,
    pub l_gan2: f64,
    pub sem_loss: f64,
    pub d_acc_intra: f64,
    pub d_acc_inter: f64,
    pub val_map_i2t: f64,
    pub val_map_t2i: f64,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str =
        "epoch,l_gan1,l_gan2,sem_loss,d_acc_intra,d_acc_inter,val_map_i2t,val_map_t2i";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.epoch,
            self.l_gan1,
            self.l_gan2,
            self.sem_loss,
            self.d_acc_intra,
            self.d_acc_inter,
            self.val_map_i2t,
            self.val_map_t2i
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub discriminator_steps: usize,
    pub generator_steps: usize,
}

/// Runs the alternating training procedure and returns the model restored to
/// its best-validation epoch. `epochs == 0` returns the input model unchanged.
pub fn train(
    model: &mut CmGanModel,
    train_ds: &FeatureDataset,
    val_ds: &FeatureDataset,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    train_with(model, train_ds, val_ds, cfg, |_| {})
}

/// As [`train`], invoking `on_epoch` after each epoch record so callers can
/// stream the log (and keep a partial log on divergence).
pub fn train_with<F>(
    model: &mut CmGanModel,
    train_ds: &FeatureDataset,
    val_ds: &FeatureDataset,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainLog>
where
    F: FnMut(&EpochRecord),
{
    cfg.validate()?;
    let mut log = TrainLog::default();
    if cfg.epochs == 0 {
        return Ok(log);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut grads = GradStore::zeros_like(&model.store);
    let mut state = SgdState::new();
    let iterations = (train_ds.len() / cfg.batch_size).max(1);

    // Frozen discriminators carry no signal; report their accuracy once.
    let init_disc_acc = if cfg.ablation.adversarial { None } else { Some(0.5) };

    let mut best_map = f64::NEG_INFINITY;
    let mut best_store = model.store.clone();
    let mut best_epoch = 0usize;

    let located = |e: Error, epoch: usize, step: usize| match e {
        Error::Divergence { detail, .. } => Error::Divergence { epoch, step, detail },
        other => other,
    };

    for epoch in 0..cfg.epochs {
        let mut last_disc = DiscStepStats::default();
        let mut last_gen = GenStepStats::default();
        for iter in 0..iterations {
            let batch = sample_batch(train_ds, cfg.batch_size, &mut rng)?;
            if cfg.ablation.adversarial {
                last_disc = discriminator_step(model, &batch, cfg, &mut grads, &mut state)
                    .map_err(|e| located(e, epoch, iter))?;
                log.discriminator_steps += 1;
            }
            for k in 0..cfg.generator_steps {
                let gen_batch = sample_batch(train_ds, cfg.batch_size, &mut rng)?;
                last_gen = generator_step(model, &gen_batch, cfg, &mut grads, &mut state)
                    .map_err(|e| located(e, epoch, iter * cfg.generator_steps + k))?;
                log.generator_steps += 1;
            }
        }

        let monitor = sample_batch(train_ds, cfg.batch_size, &mut rng)?;
        let (l_gan1, l_gan2) = eval_losses(model, &monitor)?;
        let (val_map_i2t, val_map_t2i, _) = bimodal_retrieval(model, val_ds)?;

        let record = EpochRecord {
            epoch,
            l_gan1,
            l_gan2,
            sem_loss: last_gen.semantic_loss,
            d_acc_intra: init_disc_acc.unwrap_or(last_disc.acc_intra),
            d_acc_inter: init_disc_acc.unwrap_or(last_disc.acc_inter),
            val_map_i2t,
            val_map_t2i,
        };
        if !(l_gan1.is_finite() && l_gan2.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                step: 0,
                detail: "non-finite monitoring loss".into(),
            });
        }
        on_epoch(&record);
        log.epochs.push(record);

        let val_avg = (val_map_i2t + val_map_t2i) / 2.0;
        if val_avg > best_map {
            best_map = val_avg;
            best_store = model.store.clone();
            best_epoch = epoch;
        }
    }

    model.store = best_store;
    log.best_epoch = Some(best_epoch);
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthSpec};
    use crate::model::{grads_for, snapshot, ModelDims};
    use crate::nn::Tensor2 as T2;

    const LN_HALF: f64 = -std::f64::consts::LN_2;

    fn tiny_dataset(classes: usize, per_class: usize) -> FeatureDataset {
        generate_synthetic(&SynthSpec {
            classes,
            per_class,
            d_img: 10,
            d_txt: 12,
            latent_dim: 4,
            ..SynthSpec::default()
        })
        .unwrap()
    }

    fn tiny_model(ds: &FeatureDataset, seed: u64) -> CmGanModel {
        let dims = ModelDims::new(ds.image().ncols(), ds.text().ncols(), ds.classes())
            .with_hidden(8, 6);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        CmGanModel::new(dims, true, &mut rng)
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 6,
            epochs: 2,
            ..TrainConfig::default()
        }
    }

    /// Zero every discriminator layer so all scores come out exactly 0.5:
    /// zero weights make the batch-norm input identically zero, and zero
    /// bias/shift keep the sigmoid logit at zero.
    fn zero_discriminators(model: &mut CmGanModel) {
        for id in model.discriminator_params() {
            let p = model.store.get_mut(id);
            p.weight.fill(0.0);
            p.bias.fill(0.0);
            if let Some(bn) = &mut p.batch_norm {
                bn.beta.fill(0.0);
            }
        }
    }

    #[test]
    fn zero_epochs_leaves_the_model_bitwise_unchanged() {
        let ds = tiny_dataset(3, 8);
        let mut model = tiny_model(&ds, 1);
        let before = snapshot(&model);
        let cfg = TrainConfig {
            epochs: 0,
            ..tiny_cfg()
        };
        let log = train(&mut model, &ds, &ds, &cfg).unwrap();
        assert!(log.epochs.is_empty());
        assert_eq!(log.best_epoch, None);
        assert_eq!(before, snapshot(&model));
    }

    #[test]
    fn same_seed_same_config_is_deterministic() {
        let ds = tiny_dataset(3, 8);
        let cfg = tiny_cfg();
        let mut a = tiny_model(&ds, 1);
        let mut b = tiny_model(&ds, 1);
        let log_a = train(&mut a, &ds, &ds, &cfg).unwrap();
        let log_b = train(&mut b, &ds, &ds, &cfg).unwrap();
        assert_eq!(snapshot(&a), snapshot(&b));
        let rows_a: Vec<String> = log_a.epochs.iter().map(|r| r.csv_row()).collect();
        let rows_b: Vec<String> = log_b.epochs.iter().map(|r| r.csv_row()).collect();
        assert_eq!(rows_a, rows_b);
    }

    #[test]
    fn step_counters_follow_the_update_ratio() {
        let ds = tiny_dataset(3, 8); // 24 rows, batch 6 → 4 iterations
        let mut model = tiny_model(&ds, 1);
        let cfg = TrainConfig {
            generator_steps: 3,
            ..tiny_cfg()
        };
        let log = train(&mut model, &ds, &ds, &cfg).unwrap();
        assert_eq!(log.discriminator_steps, 2 * 4);
        assert_eq!(log.generator_steps, 2 * 4 * 3);
    }

    #[test]
    fn sampled_mismatches_come_from_other_categories() {
        let ds = tiny_dataset(4, 10);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..20 {
            let batch = sample_batch(&ds, 8, &mut rng).unwrap();
            assert_eq!(batch.len(), 8);
            for (row, &label) in batch.labels.iter().enumerate() {
                // A mismatched image must not reproduce any same-category row.
                for (i, &l) in ds.labels().iter().enumerate() {
                    if l == label {
                        assert_ne!(batch.image_mismatch.row(row), ds.image().row(i));
                        assert_ne!(batch.text_mismatch.row(row), ds.text().row(i));
                    }
                }
            }
        }
    }

    #[test]
    fn mismatch_draws_are_roughly_uniform_over_other_categories() {
        let ds = tiny_dataset(4, 10);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut counts = vec![0usize; 4];
        let mut total = 0usize;
        for _ in 0..500 {
            let batch = sample_batch(&ds, 10, &mut rng).unwrap();
            for row in 0..batch.len() {
                let mis = batch.image_mismatch.row(row);
                let idx = (0..ds.len())
                    .find(|&i| ds.image().row(i) == mis)
                    .expect("mismatch row must exist in the dataset");
                counts[ds.labels()[idx]] += 1;
                total += 1;
            }
        }
        // Each category is excluded for a quarter of the draws, so expected
        // share is 1/4 of the (3/4-weighted) total; allow a generous band.
        for &c in &counts {
            let share = c as f64 / total as f64;
            assert!((share - 0.25).abs() < 0.03, "share {share}");
        }
    }

    #[test]
    fn single_category_dataset_cannot_supply_mismatches() {
        let ds = FeatureDataset::new(
            T2::ones((4, 3)),
            T2::ones((4, 3)),
            vec![0, 0, 0, 0],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(matches!(
            sample_batch(&ds, 2, &mut rng),
            Err(Error::MismatchUnsatisfiable)
        ));
    }

    #[test]
    fn zeroed_discriminators_give_the_closed_form_objectives() {
        let ds = tiny_dataset(3, 8);
        let mut model = tiny_model(&ds, 2);
        zero_discriminators(&mut model);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let batch = sample_batch(&ds, 6, &mut rng).unwrap();
        let cfg = tiny_cfg();
        let mut grads = grads_for(&model);

        // Intra: two modalities x (ln 1/2 + ln 1/2); inter: two pathways x
        // (ln 1/2 + (ln 1/2 + ln 1/2) / 2).
        let stats = discriminator_backward(&mut model, &batch, &cfg, &mut grads).unwrap();
        assert!((stats.intra_objective - 4.0 * LN_HALF).abs() < 1e-12);
        assert!((stats.inter_objective - 4.0 * LN_HALF).abs() < 1e-12);
        assert!((stats.acc_intra - 0.5).abs() < 1e-12);
        // Scores sit exactly at the 0.5 threshold: "real" forwards count as
        // misses, "fake" forwards as hits → 4 of 6 terms.
        assert!((stats.acc_inter - 2.0 / 3.0).abs() < 1e-12);

        // Generator fooling loss with only adversarial terms active:
        // −(4 · ln 1/2) across the four fooled scores.
        let cfg_adv = TrainConfig {
            semantic_weight: 0.0,
            reconstruction_weight: 0.0,
            ..tiny_cfg()
        };
        let gen = generator_backward(&mut model, &batch, &cfg_adv, &mut grads).unwrap();
        assert!((gen.adversarial_loss + 4.0 * LN_HALF).abs() < 1e-12);
        assert_eq!(gen.semantic_loss, 0.0);
        assert_eq!(gen.reconstruction_loss, 0.0);
    }

    #[test]
    fn discriminator_step_improves_its_own_objective() {
        let ds = tiny_dataset(3, 8);
        let mut model = tiny_model(&ds, 4);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let batch = sample_batch(&ds, 6, &mut rng).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            ..tiny_cfg()
        };
        let mut grads = grads_for(&model);
        let mut state = SgdState::new();

        let before = discriminator_step(&mut model, &batch, &cfg, &mut grads, &mut state).unwrap();
        let after = discriminator_backward(&mut model, &batch, &cfg, &mut grads).unwrap();
        assert!(
            after.intra_objective + after.inter_objective
                > before.intra_objective + before.inter_objective
        );
    }

    #[test]
    fn monitoring_losses_vanish_at_the_half_point() {
        let ds = tiny_dataset(3, 8);
        let mut model = tiny_model(&ds, 5);
        zero_discriminators(&mut model);
        // Inference mode normalizes with running stats (variance 1), so the
        // zeroed layers still emit exactly 0.5 for every instance.
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let batch = sample_batch(&ds, 6, &mut rng).unwrap();
        let (l_gan1, l_gan2) = eval_losses(&mut model, &batch).unwrap();
        assert_eq!(l_gan1, 0.0);
        assert_eq!(l_gan2, 0.0);
    }

    #[test]
    fn monitoring_loss_ranges() {
        let ds = tiny_dataset(3, 8);
        let mut model = tiny_model(&ds, 6);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let batch = sample_batch(&ds, 6, &mut rng).unwrap();
        let (l_gan1, l_gan2) = eval_losses(&mut model, &batch).unwrap();
        // Scores live in (0, 1): the difference-of-scores forms are bounded.
        assert!((-2.0..=2.0).contains(&l_gan1));
        assert!((-2.0..=2.0).contains(&l_gan2));
    }

    #[test]
    fn autoencoder_defaults_disable_adversarial_terms() {
        let cfg = TrainConfig::default().cae_defaults();
        assert!(!cfg.ablation.adversarial);
        assert_eq!(cfg.reconstruction_weight, 1.0);
        assert!(cfg.ablation.semantic_constraint);
    }

    #[test]
    fn non_adversarial_training_reports_constant_half_accuracy() {
        let ds = tiny_dataset(3, 8);
        let mut model = tiny_model(&ds, 7);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 6,
            ..TrainConfig::default()
        }
        .cae_defaults();
        let log = train(&mut model, &ds, &ds, &cfg).unwrap();
        assert_eq!(log.discriminator_steps, 0);
        assert!(log
            .epochs
            .iter()
            .all(|r| r.d_acc_intra == 0.5 && r.d_acc_inter == 0.5));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let base = TrainConfig::default();
        for bad in [
            TrainConfig { batch_size: 1, ..base.clone() },
            TrainConfig { generator_steps: 0, ..base.clone() },
            TrainConfig { learning_rate: 0.0, ..base.clone() },
            TrainConfig { semantic_weight: -1.0, ..base.clone() },
            TrainConfig { momentum: 1.0, ..base.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
        assert!(base.validate().is_ok());
    }
}
