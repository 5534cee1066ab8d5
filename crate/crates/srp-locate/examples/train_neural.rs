//! Train the pairwise network in two stages — anechoic first, then
//! reverberant — on a miniature synthetic dataset, printing the loss curves.
//!
//! Desk-scale knob settings keep this to about a minute; the real presets
//! use 200+ scenes per split.

use srp_locate::config::RunConfig;
use srp_locate::neural::{
    build_training_items, transfer_learn, ModelWeights, TrainConfig,
};
use srp_locate::sim::{generate_dataset, ManifestEntry, SimConfig, Split};

fn split(entries: &[ManifestEntry], which: Split) -> Vec<ManifestEntry> {
    entries.iter().filter(|e| e.split == which).cloned().collect()
}

fn main() -> srp_locate::Result<()> {
    let run = RunConfig::default();
    let small = |base: SimConfig| SimConfig {
        n_train: 8,
        n_val: 3,
        n_test: 1,
        mic_count: 3,
        ..base
    };

    let dir_a = tempfile::tempdir().expect("tempdir");
    let dir_r = tempfile::tempdir().expect("tempdir");
    let anechoic = generate_dataset(&small(SimConfig::anechoic_desk()), dir_a.path(), 5)?;
    let reverb = generate_dataset(&small(SimConfig::reverb_desk()), dir_r.path(), 6)?;

    let items = |dir: &std::path::Path, entries: &[ManifestEntry], s| {
        build_training_items(dir, &split(entries, s), &run.model, &run.targets)
    };
    let a_train = items(dir_a.path(), &anechoic, Split::Train)?;
    let a_val = items(dir_a.path(), &anechoic, Split::Val)?;
    let r_train = items(dir_r.path(), &reverb, Split::Train)?;
    let r_val = items(dir_r.path(), &reverb, Split::Val)?;
    println!(
        "pair items: {} anechoic train, {} reverberant train",
        a_train.item_count(),
        r_train.item_count()
    );

    let init = ModelWeights::<f32>::init(run.model.clone(), 0);
    println!("model parameters: {}", init.param_count());

    let config = TrainConfig {
        max_epochs: 3,
        patience: 3,
        seed: 1,
        ..TrainConfig::default()
    };
    let (weights, histories) = transfer_learn(
        &init,
        (&a_train, &a_val),
        (&r_train, &r_val),
        &config,
    )?;

    for h in &histories {
        println!("stage {}:", h.stage);
        for (e, (t, v)) in h.train_loss.iter().zip(&h.val_loss).enumerate() {
            println!("  epoch {e}: train {t:.4}  val {v:.4}");
        }
        println!("  best epoch {}", h.best_epoch);
    }

    let out = std::env::temp_dir().join("train_neural_weights.bin");
    srp_locate::neural::save_weights(&weights, &out)?;
    println!("weights saved to {}", out.display());
    Ok(())
}
