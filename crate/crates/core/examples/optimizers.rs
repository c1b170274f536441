//! Adam, RMSProp and Adagrad from the same random depth-1 start.
//!
//! cargo run --example optimizers

use qaoa_init::optimizers::{maximize, MaximizeConfig, Method};
use qaoa_init::{generate_erdos_renyi, QaoaParams, QaoaProblem};

fn main() -> qaoa_init::Result<()> {
    let problem = QaoaProblem::new(generate_erdos_renyi(10, 0.5, 3)?)?;
    for seed in 0..3 {
        let init = QaoaParams::random(1, seed);
        println!("start {:?}", init.to_flat());
        for method in [Method::Adam, Method::RmsProp, Method::Adagrad] {
            let trace = maximize(&problem, &init, &MaximizeConfig::baseline(method))?;
            let best = trace.best();
            println!(
                "  {:<8} R = {:.4} after {:>3} steps, best {:?}",
                method.name(),
                problem.ratio(best.energy)?,
                trace.iterations(),
                best.params.canonical().to_flat()
            );
        }
    }
    Ok(())
}
