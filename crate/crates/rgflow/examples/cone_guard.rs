//! The parabolic-cone guard: states with 1 + a'R/2 <= 0 somewhere are
//! classified Mixed and never integrated (the flow would be backward
//! parabolic there).
//!
//! Run with: cargo run --release --example cone_guard

use rgflow::curvature::{cone_classify, scalar_curvature, ConformalState};
use rgflow::validation::sinusoid_torus;
use rgflow::{flow, FlowParams, SurfaceDomain, Termination};
use std::sync::Arc;

fn main() -> rgflow::Result<()> {
    let domain = Arc::new(SurfaceDomain::build_torus(32, 32, 1.0, 1.0)?);
    let params = FlowParams {
        alpha_prime: 1.0,
        t_end: 0.1,
        ..FlowParams::default()
    };

    for amplitude in [0.01, 0.05, 0.1, 0.2] {
        let u0 = sinusoid_torus(&domain, amplitude);
        let state = ConformalState::new(u0.clone(), 0.0)?;
        let r = scalar_curvature(&domain, &state);
        let (min_c, max_c) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            let c = 1.0 + params.alpha_prime * v / 2.0;
            (lo.min(c), hi.max(c))
        });
        let cone = cone_classify(&domain, &state, &params);
        let traj = flow::run(&domain, u0, &params)?;
        println!(
            "amplitude {amplitude:<5}: 1 + a'R/2 in [{min_c:7.3}, {max_c:6.3}]  -> {cone:?}, run {}",
            match traj.termination {
                Termination::Completed => format!("completed to t = {}", traj.final_time),
                Termination::ConeExit => format!("refused at t = {}", traj.final_time),
                Termination::StepUnderflow => "underflowed".to_string(),
            }
        );
    }
    Ok(())
}
