//! Depth-2 labels, CNN training, and depth-2 predictions from depth-1 angles.
//!
//! cargo run --release --example depth2_cnn

use qaoa_init::bench::training_graphs;
use qaoa_init::cnn::{cnn_forward, make_depth2_labels, train_cnn, CnnWeights, LabelConfig, TrainCnnConfig};
use qaoa_init::meta_gru::{train_gru, GruConfig, GruWeights, TrainGruConfig};
use qaoa_init::{QaoaParams, QaoaProblem};

fn main() -> qaoa_init::Result<()> {
    let graphs = training_graphs(3, 1, 24, [4, 8], [0.5, 1.0])?;
    let gru_cfg = GruConfig {
        hidden: 8,
        ..GruConfig::default()
    };
    let gru = train_gru(
        &GruWeights::random(8, 0.08, 1),
        &graphs,
        &TrainGruConfig {
            gru: gru_cfg,
            epochs: 5,
            ..TrainGruConfig::default()
        },
    )?
    .weights;

    let labels = make_depth2_labels(
        &graphs,
        &gru,
        &LabelConfig {
            restarts: 10,
            gru: gru_cfg,
            ..LabelConfig::default()
        },
    )?;
    println!("{} labelled graphs", labels.len());

    let trained = train_cnn(
        &CnnWeights::random(4),
        &labels,
        &TrainCnnConfig {
            epochs: 200,
            lr: 1e-3,
            ..TrainCnnConfig::default()
        },
    )?;
    let h = &trained.loss_history;
    println!("loss {:.4} -> {:.4} over {} epochs", h[0], h[h.len() - 1], h.len());

    for s in labels.samples.iter().take(5) {
        let problem = QaoaProblem::new(s.graph.clone())?;
        let pred = QaoaParams::from_flat(&cnn_forward(&trained.weights, s.theta1)?)?;
        println!(
            "n={:>2} theta1 {:.3?} -> predicted {:.3?} (R {:.4}); label R {:.4}",
            s.graph.n_nodes(),
            s.theta1,
            pred.to_flat(),
            problem.ratio(problem.energy(&pred)?)?,
            problem.ratio(s.label_energy)?
        );
    }
    Ok(())
}
