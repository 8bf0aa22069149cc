//! Constant-curvature metrics are fixed points: integrate the round sphere
//! and the flat torus and watch every diagnostic stay put.
//!
//! Run with: cargo run --release --example fixed_points

use rgflow::{flow, FlowParams, SurfaceDomain};
use std::sync::Arc;

fn main() -> rgflow::Result<()> {
    let params = FlowParams {
        alpha_prime: 0.5,
        t_end: 0.5,
        sample_stride: 50,
        ..FlowParams::default()
    };

    for domain in [
        Arc::new(SurfaceDomain::build_sphere(3, 1.0)?),
        Arc::new(SurfaceDomain::build_sphere(3, 2.0)?),
        Arc::new(SurfaceDomain::build_torus(32, 32, 1.0, 1.0)?),
    ] {
        let traj = flow::run(&domain, vec![0.0; domain.node_count()], &params)?;
        let first = &traj.samples.first().unwrap().1;
        let last = &traj.samples.last().unwrap().1;
        let drift = traj
            .samples
            .last()
            .map(|(s, _)| s.u.iter().fold(0.0_f64, |m, &v| m.max(v.abs())))
            .unwrap();
        println!(
            "{:<8} {} nodes: R = {:.6} .. {:.6}, r = {:.6}, |u(T)|_inf = {:.2e}, |dVol| = {:.2e}",
            domain.kind().label(),
            domain.node_count(),
            last.min_r,
            last.max_r,
            last.r,
            drift,
            (last.volume - first.volume).abs()
        );
    }
    Ok(())
}
