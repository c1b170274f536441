//! End to end: train, checkpoint, benchmark, write CSVs, reload and summarize.
//! A scaled-down version of what `qaoa-bench` does with default settings.
//!
//! cargo run --release --example pipeline -- /tmp/qaoa-pipeline

use std::path::PathBuf;

use qaoa_init::bench::{self, ExperimentConfig, ExperimentKind, TrainConfig};

fn main() -> qaoa_init::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qaoa-pipeline"));
    let mut train = TrainConfig {
        graphs: 12,
        nodes: [4, 7],
        ..TrainConfig::default()
    };
    train.gru.epochs = 5;
    train.labels.restarts = 5;
    let art = bench::train_models(&train, &dir)?;
    println!("checkpoints: {} {}", art.gru_checkpoint.display(), art.cnn_checkpoint.display());

    for kind in ExperimentKind::ALL {
        let cfg = ExperimentConfig {
            nodes: vec![4, 6],
            probabilities: vec![0.6],
            instances: 3,
            depth: 4,
            gru_checkpoint: Some(art.gru_checkpoint.clone()),
            cnn_checkpoint: Some(art.cnn_checkpoint.clone()),
            ..ExperimentConfig::preset(kind)
        };
        let records = bench::run_experiment(&cfg)?;
        let path = dir.join(format!("{kind}.csv"));
        let agg = bench::write_results(&records, &path)?;

        let text = std::fs::read_to_string(&path).map_err(|source| qaoa_init::Error::Io {
            path: path.clone(),
            source,
        })?;
        let back = bench::parse_records_csv(&text)?;
        println!("== {kind}: {} records, aggregate in {}", back.len(), agg.display());
        print!("{}", bench::report(&bench::aggregate(&back)));
    }
    Ok(())
}
