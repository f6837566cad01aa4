//! Train the full model on a small synthetic benchmark and evaluate bi-modal
//! and all-modal retrieval in the learned common space.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use cmgan::data::{generate_synthetic, split, SynthSpec};
use cmgan::eval::full_report;
use cmgan::model::{CmGanModel, ModelDims};
use cmgan::report::report_markdown;
use cmgan::train::{train, TrainConfig};

fn main() -> cmgan::Result<()> {
    let spec = SynthSpec {
        classes: 5,
        per_class: 150,
        ..SynthSpec::default()
    };
    let dataset = generate_synthetic(&spec)?;
    let subsets = split(&dataset, &[0.8, 0.1, 0.1], 0)?;
    let (train_ds, val_ds, test_ds) = (&subsets[0], &subsets[1], &subsets[2]);

    let dims = ModelDims::new(train_ds.d_img(), train_ds.d_txt(), train_ds.classes())
        .with_hidden(32, 32);
    let cfg = TrainConfig::default();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut model = CmGanModel::new(dims, cfg.ablation.weight_sharing, &mut rng);

    let log = train(&mut model, train_ds, val_ds, &cfg)?;
    println!(
        "trained {} epochs; best validation at epoch {}",
        log.epochs.len(),
        log.best_epoch.unwrap()
    );
    for record in log.epochs.iter().step_by(10) {
        println!(
            "  epoch {:3}  L_GAN1 {:+.4}  L_GAN2 {:+.4}  val MAP {:.3}",
            record.epoch,
            record.l_gan1,
            record.l_gan2,
            (record.val_map_i2t + record.val_map_t2i) / 2.0
        );
    }

    let report = full_report(&mut model, test_ds, true)?;
    println!("\n{}", report_markdown(&report));
    Ok(())
}
