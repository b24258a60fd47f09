//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use nalgebra::DVector;
use sdcolloc::harness::{continue_in_y0, hopf_seed, refine};
use sdcolloc::{builtin, AffineConstraints, Mesh, NewtonConfig, NodeFamily, SdProto};

/// Converged prototype solution at `y0 = 0.75` on a uniform `(L, m)` mesh,
/// as flat collocation unknowns.
pub fn prototype_point(l: usize, m: usize) -> (Arc<Mesh>, AffineConstraints, DVector<f64>) {
    let (prob, family) = builtin("sd_proto").expect("builtin problem");
    let cfg = NewtonConfig::default();
    let base_mesh = Arc::new(Mesh::uniform(10, 5, NodeFamily::GaussLegendre).expect("mesh"));
    let base = continue_in_y0(prob.as_ref(), &family, 0.1, 0.75, 14, &base_mesh, hopf_seed(0.1, &base_mesh), &cfg)
        .expect("continuation");
    let mesh = Arc::new(Mesh::uniform(l, m, NodeFamily::GaussLegendre).expect("mesh"));
    let cons = SdProto.constraints(0.75);
    let sol = refine(&SdProto, &cons, &mesh, &base, &cfg).expect("refined solve");
    (mesh, cons, sol.flat())
}
