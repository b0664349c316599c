//! Benchmark fixtures shared by the criterion targets.

use qsap_core::{build_model, generate_random, QsapModel};

/// Seeded mid-size instance model: n positions, l rotamers each.
pub fn bench_model(n: usize, l: usize, density: f64, seed: u64) -> QsapModel {
    let inst = generate_random(n, l, l, 10_000, density, seed).expect("valid generator arguments");
    build_model(&inst)
}
