// scratch probe for ladder feasibility; not part of the deliverable API
use carnot_core::algebra::{QuasiNorm, StratifiedAlgebra};
use carnot_core::hardy::{kappa_on_lattice, optimal_constant, weighted_positivity, HardyOpts, HardyWeight};
use carnot_core::lattice::{box_laplacian_op, Lattice, LatticeSpec};
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let opts = HardyOpts::default();
    let alg = Arc::new(StratifiedAlgebra::abelian(3));
    for &h in &[0.5f64, 0.25] {
        let t = Instant::now();
        let latt = Lattice::build(alg.clone(), LatticeSpec::new(8.0, h).with_budget(1 << 23)).unwrap();
        let k = kappa_on_lattice(&latt, 1.0, &QuasiNorm::Euclidean, &opts).unwrap();
        println!("kappa(h={h}): {k:.6}  (n={}, {:.1}s)", latt.node_count(), t.elapsed().as_secs_f64());
        let w = HardyWeight::QuasiNormPower { alpha: 2.0 }.diagonal(&latt, &QuasiNorm::Euclidean).unwrap();
        let op = box_laplacian_op(&latt).unwrap();
        let t = Instant::now();
        let m225 = weighted_positivity(&op, &w.values, 0.225, &opts).unwrap();
        let m50 = weighted_positivity(&op, &w.values, 0.5, &opts).unwrap();
        println!("  margin(c=0.225) = {m225:.6e}, margin(c=0.5) = {m50:.6e}  ({:.1}s)", t.elapsed().as_secs_f64());
        let t = Instant::now();
        let (copt, br) = optimal_constant(&op, &w.values, &opts).unwrap();
        println!("  discrete c* = {copt:.6} bracket ({:.6},{:.6})  ({:.1}s)", br.0, br.1, t.elapsed().as_secs_f64());
    }
}
