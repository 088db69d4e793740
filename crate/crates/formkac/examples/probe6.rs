use formkac::geometry::{ManifoldModel, ModelKind};
use formkac::oracles::{hessian_identity_check, ProductBumpForm, QuadSpec, ScalarField};
use formkac::rng::PathRng;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

fn main() {
    let m = ManifoldModel::new(ModelKind::EuclideanBall, 3, BTreeMap::new()).unwrap();
    let n = 3;
    let radius = 0.45;
    let omega = ProductBumpForm::seeded(n, 1, DVector::zeros(n), radius, 9_003);
    let mut rng = PathRng::new(333, 3);
    let mut qm = DMatrix::zeros(n, n);
    for i in 0..n { for j in 0..=i { let v = rng.normal(); qm[(i,j)] = v; qm[(j,i)] = v; } }
    let f = ScalarField::quadratic(qm, DVector::from_fn(n, |_, _| rng.normal()));
    let spec = QuadSpec {
        lo: DVector::from_element(n, -radius),
        hi: DVector::from_element(n, radius),
        cells: 8, order: 8, fd_h: 1e-3,
    };
    let t0 = std::time::Instant::now();
    let rep = hessian_identity_check(&m, &f, &omega, &spec).unwrap();
    println!("one call (262k nodes): {:.2}s residual {:.2e}", t0.elapsed().as_secs_f64(), rep.residual);
}
