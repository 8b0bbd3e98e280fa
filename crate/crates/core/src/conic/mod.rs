//! Conic feasibility solving with verifiable infeasibility certificates.
//!
//! A moment problem asks for a vector `y` with `A y = b` and a family of
//! PSD-constrained matrices `M_l(y) ⪰ 0`. This module answers with one of
//! three outcomes:
//!
//! * `Feasible(y)` — a moment vector is in hand whose equality residuals and
//!   block eigenvalues pass tolerance;
//! * `Infeasible(certificate)` — a Farkas-type dual ray `(μ, Z_l ⪰ 0)` with
//!   `Aᵀμ + Σ_l adjoint(Z_l) ≈ 0` and `bᵀμ > 0` proves no `y` exists; the
//!   certificate re-verifies by pure linear algebra, independent of the
//!   solve path;
//! * `Unknown` — neither side converged within budget; never coerced into a
//!   verdict.
//!
//! Internally the problem is presolved by affine substitution, then both the
//! primal and the certificate question are attacked simultaneously by an
//! operator-splitting engine (see [`engine`]); whichever side produces a
//! verifiable answer first wins.

mod engine;
mod presolve;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{min_eig, smat};
use crate::moment::MomentProblem;
use engine::{DrState, Instance};
use presolve::{presolve, complete_multipliers, Reduced};

pub type Result<T> = std::result::Result<T, ConicError>;

#[derive(Debug, thiserror::Error)]
pub enum ConicError {
    #[error("json error: {0}")]
    Json(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Default feasibility residual tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Default certificate residual tolerance.
pub const EPS_RES: f64 = 1e-7;
/// Default certificate PSD tolerance.
pub const EPS_PSD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hint {
    None,
    ExpectFeasible,
    ExpectInfeasible,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Residual tolerance for declaring a moment vector feasible.
    pub tol: f64,
    pub eps_res: f64,
    pub eps_psd: f64,
    /// Iteration budget per side.
    pub max_iters: usize,
    pub time_budget: Option<std::time::Duration>,
    pub hint: Hint,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: FEAS_TOL,
            eps_res: EPS_RES,
            eps_psd: EPS_PSD,
            max_iters: 40_000,
            time_budget: None,
            hint: Hint::None,
        }
    }
}

/// One PSD multiplier of a certificate, stored as a packed lower triangle
/// (plain entries, row-major `j ≤ i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdMultiplier {
    pub label: String,
    pub side: usize,
    pub lower_triangle: Vec<f64>,
}

impl PsdMultiplier {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.side, self.side);
        let mut idx = 0;
        for i in 0..self.side {
            for j in 0..=i {
                a[(i, j)] = self.lower_triangle[idx];
                a[(j, i)] = self.lower_triangle[idx];
                idx += 1;
            }
        }
        a
    }

    fn from_matrix(label: String, a: &DMatrix<f64>) -> Self {
        let side = a.nrows();
        let mut lower = Vec::with_capacity(side * (side + 1) / 2);
        for i in 0..side {
            for j in 0..=i {
                lower.push(a[(i, j)]);
            }
        }
        PsdMultiplier { label, side, lower_triangle: lower }
    }
}

/// A Farkas-type infeasibility certificate: equality multipliers `μ` and PSD
/// multipliers `Z_l ⪰ 0` with `Aᵀμ + Σ_l adjoint(Z_l) = 0` (residual `r`)
/// and positive gap `g = bᵀμ`. Emitted certificates are normalized to
/// `g = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasCertificate {
    pub mu: Vec<f64>,
    pub psd_multipliers: Vec<PsdMultiplier>,
    pub gap: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub best_primal_residual: f64,
    pub best_certificate_residual: f64,
    pub primal_iterations: usize,
    pub certificate_iterations: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub enum ConicStatus {
    Feasible { y: Vec<f64>, max_eq_residual: f64, min_psd_eig: f64 },
    Infeasible { certificate: InfeasCertificate },
    Unknown { diagnostics: SolveDiagnostics },
}

impl ConicStatus {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, ConicStatus::Infeasible { .. })
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, ConicStatus::Feasible { .. })
    }
}

/// Opaque warm-start data reusable across nearby problems with identical
/// structure (for example the same active constraint at a different region
/// scale).
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    sig: u64,
    primal_w: Vec<f64>,
    cert_w: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Instance construction
// ---------------------------------------------------------------------------

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn svec_weight(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        SQRT2
    }
}

/// Primal instance over `w = (ỹ, svec(S_1), ..)`: rows impose `Ã ỹ = b̃` and
/// `M̃_l(ỹ) − S_l = 0`; cones make each `S_l` PSD.
fn primal_instance(red: &Reduced) -> Instance {
    let m = red.m_red;
    let mut offsets = Vec::with_capacity(red.blocks.len());
    let mut nvar = m;
    for b in &red.blocks {
        offsets.push(nvar);
        nvar += b.side * (b.side + 1) / 2;
    }
    let mut rows = Vec::new();
    let mut d = Vec::new();
    for row in &red.rows {
        rows.push(row.terms.iter().map(|&(j, c)| (j as usize, c)).collect());
        d.push(row.rhs);
    }
    for (bi, b) in red.blocks.iter().enumerate() {
        let mut idx = 0;
        for i in 0..b.side {
            for j in 0..=i {
                let e = &b.entries[idx];
                let w = svec_weight(i, j);
                let mut r: Vec<(usize, f64)> =
                    e.terms.iter().map(|&(v, c)| (v as usize, c * w)).collect();
                r.push((offsets[bi] + idx, -1.0));
                rows.push(r);
                d.push(-e.constant * w);
                idx += 1;
            }
        }
    }
    let blocks = red.blocks.iter().enumerate().map(|(bi, b)| (offsets[bi], b.side)).collect();
    Instance::new(nvar, blocks, rows, d)
}

/// Certificate instance over `w = (μ, svec(Z_1), ..)`: rows impose
/// `Ãᵀμ + Σ_l adjoint(Z_l) = 0` coordinate-wise plus the normalization
/// `b̃ᵀμ − Σ_l ⟨Z_l, C_l⟩ = 1`; cones make each `Z_l` PSD.
fn certificate_instance(red: &Reduced) -> Instance {
    let p = red.rows.len();
    let mut offsets = Vec::with_capacity(red.blocks.len());
    let mut nvar = p;
    for b in &red.blocks {
        offsets.push(nvar);
        nvar += b.side * (b.side + 1) / 2;
    }
    let m = red.m_red;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m + 1];
    for (ri, row) in red.rows.iter().enumerate() {
        for &(j, c) in &row.terms {
            rows[j as usize].push((ri, c));
        }
        if row.rhs != 0.0 {
            rows[m].push((ri, row.rhs));
        }
    }
    for (bi, b) in red.blocks.iter().enumerate() {
        let mut idx = 0;
        for i in 0..b.side {
            for j in 0..=i {
                let e = &b.entries[idx];
                let w = svec_weight(i, j);
                for &(v, c) in &e.terms {
                    rows[v as usize].push((offsets[bi] + idx, c * w));
                }
                if e.constant != 0.0 {
                    rows[m].push((offsets[bi] + idx, -e.constant * w));
                }
                idx += 1;
            }
        }
    }
    let mut d = vec![0.0; m + 1];
    d[m] = 1.0;
    let blocks = red.blocks.iter().enumerate().map(|(bi, b)| (offsets[bi], b.side)).collect();
    Instance::new(nvar, blocks, rows, d)
}

// ---------------------------------------------------------------------------
// Certificate lifting and verification
// ---------------------------------------------------------------------------

/// Residual functional `Σ_r μ_r a_r + Σ_l adjoint(Z_l)` over the original
/// moment coordinates.
fn residual_vector(prob: &MomentProblem, mu: &[f64], zs: &[DMatrix<f64>]) -> Vec<f64> {
    let m = prob.m();
    let mut res = vec![0.0; m];
    for (r, row) in prob.eq_rows.iter().enumerate() {
        let w = mu[r];
        if w != 0.0 {
            for &(j, c) in &row.terms {
                res[j as usize] += w * c;
            }
        }
    }
    for (bi, block) in prob.psd_blocks.iter().enumerate() {
        let z = &zs[bi];
        if z.nrows() == 0 {
            continue;
        }
        let mut idx = 0;
        for i in 0..block.side {
            for j in 0..=i {
                let zij = z[(i, j)];
                if zij != 0.0 {
                    let w = if i == j { 1.0 } else { 2.0 };
                    for &(v, c) in &block.entries[idx].0 {
                        res[v as usize] += w * c * zij;
                    }
                }
                idx += 1;
            }
        }
    }
    res
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Builds an original-problem certificate from a cone-exact point of the
/// certificate instance.
fn lift_certificate(
    prob: &MomentProblem,
    red: &Reduced,
    point: &[f64],
) -> Option<InfeasCertificate> {
    let p = red.rows.len();
    let mut mu = vec![0.0; prob.eq_rows.len()];
    for (ri, row) in red.rows.iter().enumerate() {
        mu[row.origin] = point[ri];
    }
    let mut zs: Vec<DMatrix<f64>> =
        prob.psd_blocks.iter().map(|b| DMatrix::zeros(b.side, b.side)).collect();
    let mut off = p;
    for b in &red.blocks {
        let len = b.side * (b.side + 1) / 2;
        let zred = smat(&point[off..off + len], b.side);
        off += len;
        let target = &mut zs[b.orig_block];
        for (pi, &oi) in b.kept.iter().enumerate() {
            for (pj, &oj) in b.kept.iter().enumerate() {
                target[(oi as usize, oj as usize)] = zred[(pi, pj)];
            }
        }
    }
    let res = residual_vector(prob, &mu, &zs);
    let (mu, gap) = complete_multipliers(prob, &red.elim_rows, mu, res);
    if !(gap > 1e-12) {
        return None;
    }
    // normalize to unit gap
    let inv = 1.0 / gap;
    let mu: Vec<f64> = mu.iter().map(|v| v * inv).collect();
    let zs: Vec<DMatrix<f64>> = zs.iter().map(|z| z * inv).collect();
    let res = residual_vector(prob, &mu, &zs);
    let residual = inf_norm(&res);
    let psd_multipliers = prob
        .psd_blocks
        .iter()
        .zip(&zs)
        .map(|(b, z)| PsdMultiplier::from_matrix(b.label.clone(), z))
        .collect();
    Some(InfeasCertificate { mu, psd_multipliers, gap: 1.0, residual })
}

/// Checks a certificate against the problem data by pure linear algebra:
/// positive gap, PSD multipliers to `eps_psd`, residual to `eps_res`
/// (after normalizing the certificate to unit gap).
pub fn verify_certificate(
    prob: &MomentProblem,
    cert: &InfeasCertificate,
    eps_psd: f64,
    eps_res: f64,
) -> bool {
    if cert.mu.len() != prob.eq_rows.len() || cert.psd_multipliers.len() != prob.psd_blocks.len() {
        return false;
    }
    for (z, b) in cert.psd_multipliers.iter().zip(&prob.psd_blocks) {
        if z.side != b.side || z.lower_triangle.len() != b.side * (b.side + 1) / 2 {
            return false;
        }
    }
    let gap: f64 = cert.mu.iter().zip(&prob.eq_rows).map(|(m, r)| m * r.rhs).sum();
    if !(gap > 0.0) {
        return false;
    }
    let inv = 1.0 / gap;
    let zs: Vec<DMatrix<f64>> =
        cert.psd_multipliers.iter().map(|z| z.to_matrix() * inv).collect();
    for z in &zs {
        if z.nrows() > 0 && min_eig(z) < -eps_psd {
            return false;
        }
    }
    let mu: Vec<f64> = cert.mu.iter().map(|v| v * inv).collect();
    let res = residual_vector(prob, &mu, &zs);
    inf_norm(&res) <= eps_res
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Solves the conic feasibility problem posed by a moment relaxation.
///
/// `Feasible` is returned only with a moment vector whose residuals pass
/// `opts.tol`; `Infeasible` only with a certificate that passes
/// [`verify_certificate`]; anything else is `Unknown`.
pub fn solve_feasibility(prob: &MomentProblem, opts: &SolveOptions) -> ConicStatus {
    solve_with_warm(prob, opts, None).0
}

/// Like [`solve_feasibility`], with warm-start data from a structurally
/// identical previous solve.
pub fn solve_with_warm(
    prob: &MomentProblem,
    opts: &SolveOptions,
    warm: Option<&WarmStart>,
) -> (ConicStatus, WarmStart) {
    let start = std::time::Instant::now();
    let red = presolve(prob);

    // Contradiction among the linear rows alone: emit the trivial
    // certificate supported on the offending row and the substitution rows.
    if let Some(ri) = red.linear_contradiction {
        for tau in [1.0, -1.0] {
            let mut mu = vec![0.0; prob.eq_rows.len()];
            mu[ri] = tau;
            let zs: Vec<DMatrix<f64>> =
                prob.psd_blocks.iter().map(|b| DMatrix::zeros(b.side, b.side)).collect();
            let res = residual_vector(prob, &mu, &zs);
            let (mu2, gap) = complete_multipliers(prob, &red.elim_rows, mu, res);
            if gap > 1e-12 {
                let inv = 1.0 / gap;
                let mu3: Vec<f64> = mu2.iter().map(|v| v * inv).collect();
                let res = residual_vector(prob, &mu3, &zs);
                let cert = InfeasCertificate {
                    mu: mu3,
                    psd_multipliers: prob
                        .psd_blocks
                        .iter()
                        .zip(&zs)
                        .map(|(b, z)| PsdMultiplier::from_matrix(b.label.clone(), z))
                        .collect(),
                    gap: 1.0,
                    residual: inf_norm(&res),
                };
                if verify_certificate(prob, &cert, opts.eps_psd, opts.eps_res) {
                    return (ConicStatus::Infeasible { certificate: cert }, WarmStart::default());
                }
            }
        }
        // fall through to the engine if the quick construction failed
    }

    let primal_inst = primal_instance(&red);
    let cert_inst = certificate_instance(&red);
    let sig = {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        (red.m_red, red.rows.len(), primal_inst.nvar, cert_inst.nvar).hash(&mut h);
        h.finish()
    };
    let (warm_p, warm_c) = match warm {
        Some(w) if w.sig == sig => (Some(w.primal_w.clone()), Some(w.cert_w.clone())),
        _ => (None, None),
    };
    let mut primal = DrState::new(&primal_inst, warm_p);
    let mut cert = DrState::new(&cert_inst, warm_c);

    let mut internal_tol = (opts.eps_res * 0.25).min(opts.tol * 0.25);
    let mut primal_tol = opts.tol * 0.5;
    let stall_window = 600;
    let (mut slice_cert, mut slice_primal) = match opts.hint {
        Hint::ExpectInfeasible => (160, 40),
        Hint::ExpectFeasible => (40, 160),
        Hint::None => (100, 100),
    };

    let budget_left = |start: std::time::Instant| match opts.time_budget {
        Some(b) => start.elapsed() < b,
        None => true,
    };

    while (primal.total_iters < opts.max_iters || cert.total_iters < opts.max_iters)
        && budget_left(start)
    {
        // certificate side
        if cert.total_iters < opts.max_iters {
            let iters = if cert.stalled(stall_window) { 24 } else { slice_cert };
            if let Some(point) = cert.run(&cert_inst, iters, internal_tol) {
                if let Some(c) = lift_certificate(prob, &red, &point) {
                    if verify_certificate(prob, &c, opts.eps_psd, opts.eps_res) {
                        let w = WarmStart {
                            sig,
                            primal_w: primal.w.clone(),
                            cert_w: cert.w.clone(),
                        };
                        return (ConicStatus::Infeasible { certificate: c }, w);
                    }
                }
                // lifted residual too large: tighten and keep going
                internal_tol *= 0.2;
                if internal_tol < 1e-13 {
                    break;
                }
            }
        }
        // primal side
        if primal.total_iters < opts.max_iters {
            let iters = if primal.stalled(stall_window) { 24 } else { slice_primal };
            if let Some(point) = primal.run(&primal_inst, iters, primal_tol) {
                let y = red.lift_point(&point[..red.m_red]);
                let max_eq = prob.max_eq_residual(&y);
                let min_eig_val = prob.min_block_eig(&y);
                if max_eq <= opts.tol && min_eig_val >= -opts.tol {
                    let w = WarmStart { sig, primal_w: primal.w.clone(), cert_w: cert.w.clone() };
                    return (
                        ConicStatus::Feasible {
                            y,
                            max_eq_residual: max_eq,
                            min_psd_eig: min_eig_val,
                        },
                        w,
                    );
                }
                primal_tol *= 0.2;
                if primal_tol < 1e-13 {
                    break;
                }
            }
        }
        // rebalance budget toward the side that is making progress
        if cert.stalled(stall_window) && !primal.stalled(stall_window) {
            slice_primal = 160;
            slice_cert = 24;
        } else if primal.stalled(stall_window) && !cert.stalled(stall_window) {
            slice_cert = 160;
            slice_primal = 24;
        }
    }

    let diag = SolveDiagnostics {
        best_primal_residual: primal.best_res,
        best_certificate_residual: cert.best_res,
        primal_iterations: primal.total_iters,
        certificate_iterations: cert.total_iters,
        message: "iteration or time budget exhausted".to_string(),
    };
    let w = WarmStart { sig, primal_w: primal.w.clone(), cert_w: cert.w.clone() };
    (ConicStatus::Unknown { diagnostics: diag }, w)
}

// ---------------------------------------------------------------------------
// JSON interface (problem export, certificate exchange, external statuses)
// ---------------------------------------------------------------------------

pub const CERTIFICATE_SCHEMA_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct CertificateJson {
    schema_version: String,
    mu: Vec<f64>,
    psd_multipliers: Vec<PsdMultiplier>,
    gap: f64,
    residual: f64,
}

pub fn certificate_to_json(cert: &InfeasCertificate) -> String {
    serde_json::to_string(&CertificateJson {
        schema_version: CERTIFICATE_SCHEMA_VERSION.to_string(),
        mu: cert.mu.clone(),
        psd_multipliers: cert.psd_multipliers.clone(),
        gap: cert.gap,
        residual: cert.residual,
    })
    .expect("certificate serialization cannot fail")
}

pub fn certificate_from_json(text: &str) -> Result<InfeasCertificate> {
    let doc: CertificateJson =
        serde_json::from_str(text).map_err(|e| ConicError::Json(e.to_string()))?;
    if doc.schema_version != CERTIFICATE_SCHEMA_VERSION {
        return Err(ConicError::Json("unsupported certificate schema_version".into()));
    }
    Ok(InfeasCertificate {
        mu: doc.mu,
        psd_multipliers: doc.psd_multipliers,
        gap: doc.gap,
        residual: doc.residual,
    })
}

/// Sparse conic problem export for external solvers; same format as
/// [`crate::moment::to_json`].
pub fn export_problem_json(prob: &MomentProblem) -> String {
    crate::moment::to_json(prob)
}

#[derive(Serialize, Deserialize)]
struct ExternalStatusJson {
    schema_version: String,
    /// "feasible" | "infeasible" | "unknown"
    status: String,
    y: Option<Vec<f64>>,
    certificate: Option<CertificateJson>,
    message: Option<String>,
}

/// Imports an external solver's status and re-verifies it against the
/// problem before accepting. An unverifiable verdict degrades to an error;
/// external `unknown` passes through.
pub fn import_status_json(
    prob: &MomentProblem,
    text: &str,
    opts: &SolveOptions,
) -> Result<ConicStatus> {
    let doc: ExternalStatusJson =
        serde_json::from_str(text).map_err(|e| ConicError::Json(e.to_string()))?;
    if doc.schema_version != CERTIFICATE_SCHEMA_VERSION {
        return Err(ConicError::Json("unsupported status schema_version".into()));
    }
    match doc.status.as_str() {
        "feasible" => {
            let y = doc.y.ok_or_else(|| ConicError::Shape("feasible status without y".into()))?;
            if y.len() != prob.m() {
                return Err(ConicError::Shape("y length mismatch".into()));
            }
            let max_eq = prob.max_eq_residual(&y);
            let min_eig_val = prob.min_block_eig(&y);
            if max_eq <= opts.tol && min_eig_val >= -opts.tol {
                Ok(ConicStatus::Feasible { y, max_eq_residual: max_eq, min_psd_eig: min_eig_val })
            } else {
                Err(ConicError::Shape(format!(
                    "imported point fails verification: eq residual {max_eq:.3e}, min eig {min_eig_val:.3e}"
                )))
            }
        }
        "infeasible" => {
            let cj = doc
                .certificate
                .ok_or_else(|| ConicError::Shape("infeasible status without certificate".into()))?;
            let cert = InfeasCertificate {
                mu: cj.mu,
                psd_multipliers: cj.psd_multipliers,
                gap: cj.gap,
                residual: cj.residual,
            };
            if verify_certificate(prob, &cert, opts.eps_psd, opts.eps_res) {
                Ok(ConicStatus::Infeasible { certificate: cert })
            } else {
                Err(ConicError::Shape("imported certificate fails verification".into()))
            }
        }
        "unknown" => Ok(ConicStatus::Unknown {
            diagnostics: SolveDiagnostics {
                best_primal_residual: f64::NAN,
                best_certificate_residual: f64::NAN,
                primal_iterations: 0,
                certificate_iterations: 0,
                message: doc.message.unwrap_or_else(|| "external unknown".to_string()),
            },
        }),
        other => Err(ConicError::Json(format!("unrecognized status {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::relax;
    use crate::poly::{LabeledPoly, Monomial, Polynomial, PolySystem};

    fn one_var(eqs: Vec<(&str, Vec<(u8, f64)>)>, ineqs: Vec<(&str, Vec<(u8, f64)>)>) -> PolySystem {
        let build = |spec: Vec<(&str, Vec<(u8, f64)>)>| {
            spec.into_iter()
                .map(|(label, terms)| {
                    let mut p = Polynomial::zero(1);
                    for (e, c) in terms {
                        p.add_term(Monomial(vec![e]), c);
                    }
                    LabeledPoly { label: label.to_string(), poly: p }
                })
                .collect::<Vec<_>>()
        };
        PolySystem { var_names: vec!["x".into()], equalities: build(eqs), inequalities: build(ineqs) }
    }

    #[test]
    fn contradictory_linear_rows_give_trivial_certificate() {
        // x = 1 and x = 2 simultaneously
        let sys = one_var(
            vec![
                ("x_is_1", vec![(1, 1.0), (0, -1.0)]),
                ("x_is_2", vec![(1, 1.0), (0, -2.0)]),
            ],
            vec![],
        );
        let prob = relax(&sys).unwrap();
        let status = solve_feasibility(&prob, &SolveOptions::default());
        match status {
            ConicStatus::Infeasible { certificate } => {
                assert!(verify_certificate(&prob, &certificate, EPS_PSD, EPS_RES));
                assert!(certificate.residual <= EPS_RES);
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn negative_square_is_infeasible() {
        let sys = one_var(vec![("xx", vec![(2, 1.0), (0, 1.0)])], vec![]);
        let prob = relax(&sys).unwrap();
        let status = solve_feasibility(&prob, &SolveOptions::default());
        match status {
            ConicStatus::Infeasible { certificate } => {
                assert!(verify_certificate(&prob, &certificate, EPS_PSD, EPS_RES));
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn feasible_square_system_returns_point() {
        // {x² = 1, x ≥ 0}: x = 1 feasible
        let sys = one_var(vec![("xx", vec![(2, 1.0), (0, -1.0)])], vec![("pos", vec![(1, 1.0)])]);
        let prob = relax(&sys).unwrap();
        let status = solve_feasibility(&prob, &SolveOptions::default());
        match status {
            ConicStatus::Feasible { y, max_eq_residual, min_psd_eig } => {
                assert!(max_eq_residual <= FEAS_TOL);
                assert!(min_psd_eig >= -FEAS_TOL);
                assert!(prob.max_eq_residual(&y) <= FEAS_TOL);
            }
            other => panic!("expected Feasible, got {other:?}"),
        }
    }

    #[test]
    fn certificate_survives_json_roundtrip_and_reverification() {
        let sys = one_var(vec![("xx", vec![(2, 1.0), (0, 1.0)])], vec![]);
        let prob = relax(&sys).unwrap();
        let ConicStatus::Infeasible { certificate } =
            solve_feasibility(&prob, &SolveOptions::default())
        else {
            panic!("expected Infeasible");
        };
        let json = certificate_to_json(&certificate);
        let back = certificate_from_json(&json).unwrap();
        assert!(verify_certificate(&prob, &back, EPS_PSD, EPS_RES));
    }

    #[test]
    fn tampered_certificate_fails_verification() {
        let sys = one_var(vec![("xx", vec![(2, 1.0), (0, 1.0)])], vec![]);
        let prob = relax(&sys).unwrap();
        let ConicStatus::Infeasible { certificate } =
            solve_feasibility(&prob, &SolveOptions::default())
        else {
            panic!("expected Infeasible");
        };
        // negate an eigenvalue: make some Z entry strongly negative-definite
        let mut bad = certificate.clone();
        if let Some(z) = bad.psd_multipliers.iter_mut().find(|z| z.side > 0) {
            z.lower_triangle[0] = -1.0;
        }
        assert!(!verify_certificate(&prob, &bad, EPS_PSD, EPS_RES));
        // perturb μ so the residual blows past tolerance
        let mut bad2 = certificate.clone();
        if !bad2.mu.is_empty() {
            bad2.mu[0] += 1e-3;
        }
        assert!(!verify_certificate(&prob, &bad2, EPS_PSD, 1e-7));
    }

    #[test]
    fn external_status_import_verifies() {
        let sys = one_var(vec![("xx", vec![(2, 1.0), (0, -1.0)])], vec![("pos", vec![(1, 1.0)])]);
        let prob = relax(&sys).unwrap();
        let y = crate::moment::lift_point(&prob, &[1.0]);
        let doc = format!(
            "{{\"schema_version\":\"1\",\"status\":\"feasible\",\"y\":{},\"certificate\":null,\"message\":null}}",
            serde_json::to_string(&y).unwrap()
        );
        let st = import_status_json(&prob, &doc, &SolveOptions::default()).unwrap();
        assert!(st.is_feasible());
        // a corrupted point is rejected
        let mut y_bad = y.clone();
        y_bad[1] += 0.5;
        let doc_bad = format!(
            "{{\"schema_version\":\"1\",\"status\":\"feasible\",\"y\":{},\"certificate\":null,\"message\":null}}",
            serde_json::to_string(&y_bad).unwrap()
        );
        assert!(import_status_json(&prob, &doc_bad, &SolveOptions::default()).is_err());
    }

    #[test]
    fn no_false_infeasibility_on_lifted_feasible_problems() {
        // x free cube: {x³ = 0.5 x} with x ≥ 0 — x = √0.5 hmm keep simple:
        // {x² = 2} feasible at √2.
        let sys = one_var(vec![("xx", vec![(2, 1.0), (0, -2.0)])], vec![]);
        let prob = relax(&sys).unwrap();
        let status = solve_feasibility(&prob, &SolveOptions::default());
        assert!(!status.is_infeasible(), "feasible-by-construction problem");
    }
}
