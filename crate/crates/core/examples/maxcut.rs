//! Random graphs, the text format, and exact MaxCut by enumeration.
//!
//! cargo run --example maxcut -- 8 0.6 42

use qaoa_init::graph::{brute_force_max_cut, cut_value, Graph};
use qaoa_init::generate_erdos_renyi;

fn main() -> qaoa_init::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(8, |s| s.parse().expect("node count"));
    let p: f64 = args.get(1).map_or(0.6, |s| s.parse().expect("edge probability"));
    let seed: u64 = args.get(2).map_or(42, |s| s.parse().expect("seed"));

    let g = generate_erdos_renyi(n, p, seed)?;
    print!("{}", g.to_text());
    assert_eq!(Graph::from_text(&g.to_text())?, g);

    let best = brute_force_max_cut(&g)?;
    println!("c_max = {} ({} optimal cuts up to global flip)", best.c_max, best.witnesses.len());
    let z = &best.witnesses[0];
    println!("witness {:?} cuts {} edges", z.labels(), cut_value(&g, z)?);

    for k in 4..=8 {
        let c = brute_force_max_cut(&Graph::complete(k)?)?.c_max;
        println!("K{k}: c_max = {c}");
    }
    Ok(())
}
