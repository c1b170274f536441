//! Depth-1 energy landscape of a small graph and the three gradient methods.
//!
//! cargo run --example landscape

use std::f64::consts::PI;

use qaoa_init::{generate_erdos_renyi, GradientMethod, QaoaParams, QaoaProblem};

fn main() -> qaoa_init::Result<()> {
    let problem = QaoaProblem::new(generate_erdos_renyi(6, 0.5, 7)?)?;
    println!("{} edges, c_max {}", problem.n_edges(), problem.c_max());

    let (rows, cols) = (12, 24);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    println!("ratio on gamma in [0, 2pi) (columns) x beta in [0, pi/2) (rows):");
    for i in 0..rows {
        let beta = 0.5 * PI * i as f64 / rows as f64;
        let line: String = (0..cols)
            .map(|j| {
                let gamma = 2.0 * PI * j as f64 / cols as f64;
                let e = problem.energy(&QaoaParams::new(vec![gamma], vec![beta]).unwrap()).unwrap();
                if e > best.0 {
                    best = (e, gamma, beta);
                }
                let r = problem.ratio(e).unwrap();
                b" .:-=+*#%@"[((r * 10.0) as usize).min(9)] as char
            })
            .collect();
        println!("  {line}");
    }
    println!("grid maximum E = {:.4} at gamma {:.3}, beta {:.3}", best.0, best.1, best.2);

    let params = QaoaParams::new(vec![0.4, 0.9], vec![0.3, 0.1])?;
    for method in [GradientMethod::Adjoint, GradientMethod::ParameterShift, GradientMethod::FiniteDifference] {
        let g = problem.gradient(&params, method)?;
        println!("{method:?}: {:?}", g.to_flat());
    }
    Ok(())
}
