//! Depth-progressive initialization: GRU at depth 1, CNN at depth 2, bilinear
//! extrapolation beyond, against random starts with the same refinement.
//!
//! Uses checkpoints from `qaoa-bench train-gru` / `train-cnn` when given a
//! directory, otherwise trains small models first. The small models give
//! rough depth-1 and depth-2 starts, and the chain inherits whatever basin
//! they pick; with default-trained checkpoints the ratio rises steadily
//! with depth.
//!
//! cargo run --release --example bilinear -- results

use std::path::PathBuf;

use qaoa_init::bench::{train_models, TrainConfig, CNN_CHECKPOINT, GRU_CHECKPOINT};
use qaoa_init::bilinear::{bilinear_extrapolate, depth_progressive_run, random_init_run, DepthRunConfig};
use qaoa_init::checkpoint::{gru_hidden_size, load_cnn, load_gru};
use qaoa_init::{generate_erdos_renyi, QaoaParams, QaoaProblem};

fn main() -> qaoa_init::Result<()> {
    let a = QaoaParams::new(vec![0.2], vec![0.5])?;
    let b = QaoaParams::new(vec![0.3, 0.6], vec![0.4, 0.2])?;
    println!("extrapolating {:?} and {:?} gives {:?}", a.to_flat(), b.to_flat(), bilinear_extrapolate(&b, &a)?.to_flat());

    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            let dir = std::env::temp_dir().join("qaoa-bilinear-example");
            let mut cfg = TrainConfig {
                graphs: 40,
                nodes: [4, 10],
                ..TrainConfig::default()
            };
            cfg.gru.epochs = 30;
            cfg.labels.restarts = 20;
            println!("training small models in {}", dir.display());
            train_models(&cfg, &dir)?;
            dir
        }
    };
    let gru_path = dir.join(GRU_CHECKPOINT);
    let hidden = gru_hidden_size(&gru_path)?;
    let (gru, _) = load_gru(&gru_path, hidden)?;
    let (cnn, _) = load_cnn(dir.join(CNN_CHECKPOINT))?;
    let mut cfg = DepthRunConfig::default();
    cfg.gru.hidden = hidden;

    let problem = QaoaProblem::new(generate_erdos_renyi(8, 0.6, 11)?)?;
    let schedule = depth_progressive_run(&problem, 8, &gru, &cnn, &cfg)?;
    for e in &schedule.entries {
        let random = random_init_run(&problem, e.depth, 11, &cfg.refine)?;
        println!(
            "depth {:>2}: start R {:.4} -> refined {:.4} ({} steps); random start {:.4}",
            e.depth,
            problem.ratio(e.initial_energy)?,
            e.ratio,
            e.iters,
            random.ratio
        );
    }
    Ok(())
}
