//! Verify the hand-derived backward passes against central finite differences
//! on a shrunken model: both the discriminator ascent objective and the full
//! generator loss.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use cmgan::data::{generate_synthetic, SynthSpec};
use cmgan::model::{CmGanModel, Modality, ModelDims};
use cmgan::nn::{gradient_check_ids, GradStore, Mode};
use cmgan::train::{
    discriminator_backward, generator_backward, sample_batch, Batch, TrainConfig,
};

/// Scalar the discriminator gradients descend: the negated ascent objective.
fn disc_loss(model: &mut CmGanModel, batch: &Batch, cfg: &TrainConfig) -> f64 {
    let mut grads = GradStore::zeros_like(&model.store);
    let stats = discriminator_backward(model, batch, cfg, &mut grads).unwrap();
    -(stats.intra_objective + stats.inter_objective)
}

fn gen_loss(model: &mut CmGanModel, batch: &Batch, cfg: &TrainConfig) -> f64 {
    let mut grads = GradStore::zeros_like(&model.store);
    let stats = generator_backward(model, batch, cfg, &mut grads).unwrap();
    stats.adversarial_loss + stats.semantic_loss + stats.reconstruction_loss
}

fn main() -> cmgan::Result<()> {
    let spec = SynthSpec {
        classes: 3,
        per_class: 4,
        d_img: 8,
        d_txt: 12,
        ..SynthSpec::default()
    };
    let dataset = generate_synthetic(&spec)?;
    let dims = ModelDims::new(spec.d_img, spec.d_txt, spec.classes).with_hidden(8, 8);
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let mut model = CmGanModel::new(dims, true, &mut rng);
    let cfg = TrainConfig {
        reconstruction_weight: 0.5,
        ..TrainConfig::default()
    };
    let batch = sample_batch(&dataset, 4, &mut rng)?;

    // Discriminator side: the generator is a frozen input, so only the
    // discriminator entries carry gradient.
    let mut grads = GradStore::zeros_like(&model.store);
    discriminator_backward(&mut model, &batch, &cfg, &mut grads)?;
    let ids = model.discriminator_params();
    let report = {
        let batch = batch.clone();
        let cfg = cfg.clone();
        let mut probe = model.clone();
        gradient_check_ids(
            &mut model.store,
            &grads,
            &ids,
            move |store| {
                probe.store = store.clone();
                disc_loss(&mut probe, &batch, &cfg)
            },
            1e-5,
        )
    };
    println!(
        "discriminator objective: {} entries checked, max rel err {:.3e}",
        report.entries_checked, report.max_rel_err
    );
    assert!(report.passes(1e-4));

    // Generator side: every traversed layer accumulates, so check them all.
    let mut grads = GradStore::zeros_like(&model.store);
    generator_backward(&mut model, &batch, &cfg, &mut grads)?;
    let ids: Vec<_> = model.store.ids().collect();
    let report = {
        let batch = batch.clone();
        let cfg = cfg.clone();
        let mut probe = model.clone();
        gradient_check_ids(
            &mut model.store,
            &grads,
            &ids,
            move |store| {
                probe.store = store.clone();
                gen_loss(&mut probe, &batch, &cfg)
            },
            1e-5,
        )
    };
    println!(
        "generator loss: {} entries checked, max rel err {:.3e}",
        report.entries_checked, report.max_rel_err
    );
    assert!(report.passes(1e-4));

    // Sanity that the frozen-side forwards leave inference untouched is part
    // of the test suite; here just show the common space is live.
    let s = model.encode(Modality::Image, &batch.image, Mode::Infer)?;
    println!("common representation: {} x {}", s.nrows(), s.ncols());
    Ok(())
}
