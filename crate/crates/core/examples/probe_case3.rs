//! Scratch probe: solve the 3-bus Jacobian-singularity relaxation across γ.

use pfcert_core::acpf::{LimitOverrides, OperationalLimits};
use pfcert_core::conic::{solve_feasibility, ConicStatus, Hint, SolveOptions};
use pfcert_core::moment::relax;
use pfcert_core::netmodel::case3;
use pfcert_core::poly::build_jacobian_system;

fn main() {
    let net = case3();
    for gamma in [0.4, 0.7, 0.9, 1.0, 1.1, 1.3, 1.6, 2.0] {
        let lims = OperationalLimits::with_overrides(
            &net,
            gamma,
            &LimitOverrides {
                slack_p: Some((-2.0, 2.0)),
                slack_q: Some((-2.0, 2.0)),
                pv_q: Some((-2.0, 2.0)),
                ..Default::default()
            },
        );
        let sys = build_jacobian_system(&net, &lims);
        let t0 = std::time::Instant::now();
        let prob = relax(&sys).unwrap();
        let t_relax = t0.elapsed();
        let t0 = std::time::Instant::now();
        let opts = SolveOptions { hint: Hint::ExpectInfeasible, max_iters: 60_000, ..Default::default() };
        let status = solve_feasibility(&prob, &opts);
        let dt = t0.elapsed();
        let m = prob.m();
        let what = match &status {
            ConicStatus::Infeasible { certificate } => {
                format!("INFEASIBLE r={:.2e}", certificate.residual)
            }
            ConicStatus::Feasible { max_eq_residual, min_psd_eig, .. } => {
                format!("feasible eq={max_eq_residual:.2e} eig={min_psd_eig:.2e}")
            }
            ConicStatus::Unknown { diagnostics } => format!(
                "UNKNOWN p={:.2e} c={:.2e} it=({},{})",
                diagnostics.best_primal_residual,
                diagnostics.best_certificate_residual,
                diagnostics.primal_iterations,
                diagnostics.certificate_iterations
            ),
        };
        println!(
            "gamma {gamma:>4}: m={m} relax {:>6.1?} solve {:>8.1?}  {what}",
            t_relax, dt
        );
    }
}
