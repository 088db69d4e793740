//! Regenerates the checked-in fuzz corpus seeds (binary path dumps).
//!
//! Usage: cargo run -p formkac --example make_fuzz_corpus -- <out_dir>

use formkac::development::sample_path;
use formkac::geometry::{ManifoldModel, ModelKind};
use formkac::pathdump::write_path;
use nalgebra::DVector;
use std::collections::BTreeMap;

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fuzz/corpus/pathdump_decode".to_string());
    std::fs::create_dir_all(&out).unwrap();
    let cases: Vec<(ModelKind, usize, Vec<f64>)> = vec![
        (ModelKind::EuclideanHalfspace, 2, vec![0.0, 0.1]),
        (ModelKind::EuclideanBall, 3, vec![0.5, 0.0, 0.0]),
        (ModelKind::HyperbolicTube, 3, vec![0.0, 0.4, 0.0]),
        (ModelKind::SphereCap, 4, vec![0.1, 0.0, 0.0, 0.0]),
    ];
    for (kind, dim, x0) in cases {
        let model = ManifoldModel::new(kind, dim, BTreeMap::new()).unwrap();
        let x0 = DVector::from_vec(x0);
        let path = sample_path(&model, &x0, None, 0.02, 1e-3, 9, 0).unwrap();
        let bytes = write_path(&path);
        let name = format!("{}/{}_{}d.bin", out, kind.id(), dim);
        std::fs::write(&name, bytes).unwrap();
        println!("wrote {name}");
    }
}
