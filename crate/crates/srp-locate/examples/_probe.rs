use std::time::Instant;

use srp_locate::config::RunConfig;
use srp_locate::neural::{
    build_training_items, train_stage, AdamConfig, ModelWeights, Stage, TrainConfig,
};
use srp_locate::sim::{generate_dataset, ManifestEntry, SimConfig, Split};

fn filt(entries: &[ManifestEntry], split: Split) -> Vec<ManifestEntry> {
    entries.iter().filter(|e| e.split == split).cloned().collect()
}

fn main() {
    let dir_r = tempfile::tempdir().unwrap();
    let sim_r = SimConfig {
        n_train: 200,
        n_val: 50,
        n_test: 1,
        mic_count: 4,
        ..SimConfig::reverb_desk()
    };
    let er = generate_dataset(&sim_r, dir_r.path(), 12).unwrap();
    let run = RunConfig::default();
    let r_train =
        build_training_items(dir_r.path(), &filt(&er, Split::Train), &run.model, &run.targets)
            .unwrap();
    let r_val = build_training_items(dir_r.path(), &filt(&er, Split::Val), &run.model, &run.targets)
        .unwrap();
    let init = ModelWeights::<f32>::init(run.model.clone(), 7);

    for (lr, batch) in [(2e-3, 16usize), (5e-3, 16), (2e-3, 4), (1e-2, 16)] {
        let config = TrainConfig {
            batch_size: batch,
            max_epochs: 8,
            patience: 8,
            adam: AdamConfig { lr, ..AdamConfig::default() },
            seed: 99,
        };
        let t0 = Instant::now();
        match train_stage(&init, &r_train, &r_val, &config, Stage::Reverberant) {
            Ok((_, h)) => {
                let drop = 1.0 - h.train_loss.last().unwrap() / h.train_loss[0];
                println!(
                    "lr {lr:.0e} batch {batch}: drop {:.1}% in {:.0?}",
                    100.0 * drop,
                    t0.elapsed()
                );
                println!("  train {:?}", h.train_loss);
                println!("  val   {:?}", h.val_loss);
            }
            Err(e) => println!("lr {lr:.0e} batch {batch}: FAILED {e}"),
        }
    }
}
