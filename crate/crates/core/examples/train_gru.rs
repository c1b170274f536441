//! Trains a small GRU meta-optimizer and compares its depth-1 proposals with
//! plain Adam on unseen graphs.
//!
//! cargo run --release --example train_gru

use qaoa_init::bench::training_graphs;
use qaoa_init::meta_gru::{gru_depth1, train_gru, GruConfig, GruWeights, TrainGruConfig};
use qaoa_init::optimizers::{maximize, MaximizeConfig, Method};
use qaoa_init::{generate_erdos_renyi, QaoaParams, QaoaProblem};

fn main() -> qaoa_init::Result<()> {
    let graphs = training_graphs(1, 1, 30, [4, 10], [0.5, 1.0])?;
    let cfg = TrainGruConfig {
        gru: GruConfig {
            hidden: 16,
            ..GruConfig::default()
        },
        epochs: 20,
        ..TrainGruConfig::default()
    };
    let trained = train_gru(&GruWeights::random(16, 0.08, 2), &graphs, &cfg)?;
    for (epoch, loss) in trained.loss_history.iter().enumerate().step_by(5) {
        println!("epoch {:>3}: loss {loss:.5}", epoch + 1);
    }

    let refine = MaximizeConfig::baseline(Method::Adam);
    for n in [6, 9, 12] {
        let problem = QaoaProblem::new(generate_erdos_renyi(n, 0.6, 100 + n as u64)?)?;
        let d = gru_depth1(&trained.weights, &problem, 5, &cfg.gru, &refine)?;
        let adam = maximize(&problem, &QaoaParams::random(1, 5), &refine)?;
        println!(
            "n={n:>2}: GRU proposal R {:.4}, refined {:.4}; Adam from random {:.4}",
            problem.ratio(d.episode.best_energy())?,
            problem.ratio(d.energy())?,
            problem.ratio(adam.best().energy)?
        );
    }
    Ok(())
}
