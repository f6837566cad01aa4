//! Paired-feature datasets: in-memory representation, the CMGF binary and CSV
//! file formats, stratified splits, and a seeded synthetic generator.
//!
//! All randomness flows through `ChaCha20Rng` (rand_chacha), a documented,
//! platform-independent generator; the OS entropy source is never used.

mod dataset;
mod formats;
mod split;
mod synth;

pub use dataset::FeatureDataset;
pub use formats::{
    load_csv_modality, load_dataset, read_cmgf, save_dataset, write_cmgf, write_csv_modality,
    FileFormat,
};
pub use split::{split, split_with_indices};
pub use synth::{generate_synthetic, generate_synthetic_detailed, SynthSpec, SynthDetails};
