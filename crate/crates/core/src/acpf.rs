//! Power flow operator, Jacobians, Newton solver and operational constraints.
//!
//! Voltages are handled in log-polar coordinates `V_i = exp(ρ_i + jθ_i)`.
//! The power flow unknowns are stacked as `(θ_1..θ_n, ρ_pq)`; injection
//! vectors stack active power at buses `1..n` followed by reactive power at
//! the PQ buses, so Jacobian rows align with injection coordinates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::netmodel::{BusKind, Network};

pub type Result<T> = std::result::Result<T, AcpfError>;

#[derive(Debug, thiserror::Error)]
pub enum AcpfError {
    #[error("invalid voltage state: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Tolerance for the validity constraints in [`VoltageState`].
pub const STATE_TOL: f64 = 1e-12;

/// A valid voltage phasor vector: the slack phasor is pinned and PV
/// magnitudes sit at their set-points.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageState {
    theta: Vec<f64>,
    rho: Vec<f64>,
}

impl VoltageState {
    /// Flat start: zero angles everywhere, unit magnitude at PQ buses,
    /// set-point magnitudes elsewhere.
    pub fn flat(net: &Network) -> Self {
        let nb = net.n_bus();
        let mut rho = vec![0.0; nb];
        for b in &net.buses {
            if let Some(v) = b.v_set {
                rho[b.index] = v.ln();
            }
        }
        VoltageState { theta: vec![0.0; nb], rho }
    }

    /// Builds a state from full angle/log-magnitude vectors, checking the
    /// validity constraints.
    pub fn new(net: &Network, theta: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if theta.len() != net.n_bus() || rho.len() != net.n_bus() {
            return Err(AcpfError::Dimension("theta/rho length".into()));
        }
        let st = VoltageState { theta, rho };
        st.check_valid(net)?;
        Ok(st)
    }

    /// Builds a state from the unknown vector `(θ_1..θ_n, ρ_pq)`.
    pub fn from_unknowns(net: &Network, u: &[f64]) -> Self {
        debug_assert_eq!(u.len(), net.k());
        let mut st = VoltageState::flat(net);
        let n = net.n();
        for i in 1..=n {
            st.theta[i] = u[i - 1];
        }
        for (p, &bus) in net.pq().iter().enumerate() {
            st.rho[bus] = u[n + p];
        }
        st
    }

    /// The unknown vector `(θ_1..θ_n, ρ_pq)`.
    pub fn unknowns(&self, net: &Network) -> Vec<f64> {
        let mut u = Vec::with_capacity(net.k());
        u.extend_from_slice(&self.theta[1..]);
        for &bus in net.pq() {
            u.push(self.rho[bus]);
        }
        u
    }

    /// Reconstructs a valid state from rectangular coordinates, verifying
    /// the two forms agree.
    pub fn from_rect(net: &Network, rect: &[Complex64], tol: f64) -> Result<Self> {
        if rect.len() != net.n_bus() {
            return Err(AcpfError::Dimension("rectangular vector length".into()));
        }
        let mut theta = Vec::with_capacity(rect.len());
        let mut rho = Vec::with_capacity(rect.len());
        for v in rect {
            if v.norm() <= 0.0 {
                return Err(AcpfError::InvalidState("zero-magnitude phasor".into()));
            }
            theta.push(v.arg());
            rho.push(v.norm().ln());
        }
        let st = VoltageState { theta, rho };
        let v0 = net.buses[0].v_set.expect("slack has set-point");
        if st.theta[0].abs() > tol || (st.rho[0] - v0.ln()).abs() > tol {
            return Err(AcpfError::InvalidState("slack phasor off reference".into()));
        }
        for &i in net.pv() {
            let v = net.buses[i].v_set.expect("pv has set-point");
            if (st.rho[i] - v.ln()).abs() > tol {
                return Err(AcpfError::InvalidState(format!("PV bus {i} magnitude off set-point")));
            }
        }
        // snap the pinned coordinates exactly
        let mut st = st;
        st.theta[0] = 0.0;
        st.rho[0] = v0.ln();
        for &i in net.pv() {
            st.rho[i] = net.buses[i].v_set.unwrap().ln();
        }
        Ok(st)
    }

    fn check_valid(&self, net: &Network) -> Result<()> {
        let v0 = net.buses[0].v_set.expect("slack has set-point");
        if self.theta[0].abs() > STATE_TOL {
            return Err(AcpfError::InvalidState("slack angle must be 0".into()));
        }
        if (self.rho[0] - v0.ln()).abs() > STATE_TOL {
            return Err(AcpfError::InvalidState("slack magnitude off set-point".into()));
        }
        for &i in net.pv() {
            let v = net.buses[i].v_set.expect("pv has set-point");
            if (self.rho[i] - v.ln()).abs() > STATE_TOL {
                return Err(AcpfError::InvalidState(format!("PV bus {i} magnitude off set-point")));
            }
        }
        Ok(())
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn magnitude(&self, i: usize) -> f64 {
        self.rho[i].exp()
    }

    fn rect_at(&self, i: usize) -> Complex64 {
        Complex64::from_polar(self.rho[i].exp(), self.theta[i])
    }

    /// Rectangular form of the state.
    pub fn rect(&self) -> Vec<Complex64> {
        (0..self.theta.len()).map(|i| self.rect_at(i)).collect()
    }
}

/// Injection vector: active power at buses `1..n`, then reactive power at
/// PQ buses, per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection(pub Vec<f64>);

impl Injection {
    pub fn zero(net: &Network) -> Self {
        Injection(vec![0.0; net.k()])
    }

    pub fn active(&self, bus: usize) -> f64 {
        self.0[bus - 1]
    }

    pub fn reactive(&self, net: &Network, bus: usize) -> f64 {
        let pos = net.pq_position(bus).expect("reactive coordinate exists only for PQ buses");
        self.0[net.n() + pos]
    }
}

/// Nominal injection vector from the case data (generation minus load).
pub fn nominal_injection(net: &Network) -> Injection {
    let n = net.n();
    let mut s = vec![0.0; net.k()];
    for i in 1..=n {
        s[i - 1] = net.buses[i].p_nom;
    }
    for (p, &bus) in net.pq().iter().enumerate() {
        s[n + p] = net.buses[bus].q_nom;
    }
    Injection(s)
}

/// Net complex injection `V_i · conj((YV)_i)` at every bus.
pub fn bus_power(net: &Network, rect: &[Complex64]) -> Vec<Complex64> {
    (0..net.n_bus()).map(|i| bus_power_at(net, rect, i)).collect()
}

fn bus_power_at(net: &Network, rect: &[Complex64], i: usize) -> Complex64 {
    let nb = net.n_bus();
    let mut yv = Complex64::new(0.0, 0.0);
    for j in 0..nb {
        yv += net.y(i, j) * rect[j];
    }
    rect[i] * yv.conj()
}

/// The power flow operator: active injections at buses `1..n`, then
/// reactive injections at PQ buses, evaluated in log-polar form.
pub fn evaluate_f(net: &Network, v: &VoltageState) -> Injection {
    let n = net.n();
    let (theta, rho) = (v.theta(), v.rho());
    let nb = net.n_bus();
    let mut s = Vec::with_capacity(net.k());
    for i in 1..=n {
        let mut acc = 0.0;
        for j in 0..nb {
            let t = (rho[i] + rho[j]).exp();
            let a = theta[i] - theta[j];
            acc += t * (net.b(i, j) * a.sin() + net.g(i, j) * a.cos());
        }
        s.push(acc);
    }
    for &i in net.pq() {
        let mut acc = 0.0;
        for j in 0..nb {
            let t = (rho[i] + rho[j]).exp();
            let a = theta[i] - theta[j];
            acc += t * (net.g(i, j) * a.sin() - net.b(i, j) * a.cos());
        }
        s.push(acc);
    }
    Injection(s)
}

/// Exact Jacobian of the power flow operator with respect to
/// `(θ_1..θ_n, ρ_pq)`.
pub fn jacobian_analytic(net: &Network, v: &VoltageState) -> DMatrix<f64> {
    let n = net.n();
    let k = net.k();
    let nb = net.n_bus();
    let (theta, rho) = (v.theta(), v.rho());
    let mut jac = DMatrix::zeros(k, k);

    for (row, i) in (1..=n).enumerate() {
        // active power row of bus i
        let mut dtheta_ii = 0.0;
        let mut drho_ii = 0.0;
        for l in 0..nb {
            if l == i {
                continue;
            }
            let (g, b) = (net.g(i, l), net.b(i, l));
            if g == 0.0 && b == 0.0 {
                continue;
            }
            let t = (rho[i] + rho[l]).exp();
            let a = theta[i] - theta[l];
            let (c, s) = (a.cos(), a.sin());
            dtheta_ii += t * (-g * s + b * c);
            drho_ii += t * (g * c + b * s);
            if l >= 1 {
                jac[(row, l - 1)] = t * (g * s - b * c);
            }
            if let Some(p) = net.pq_position(l) {
                jac[(row, n + p)] = t * (g * c + b * s);
            }
        }
        jac[(row, i - 1)] = dtheta_ii;
        if let Some(p) = net.pq_position(i) {
            jac[(row, n + p)] = drho_ii + 2.0 * (2.0 * rho[i]).exp() * net.g(i, i);
        }
    }

    for (p_row, &i) in net.pq().iter().enumerate() {
        // reactive power row of PQ bus i
        let row = n + p_row;
        let mut dtheta_ii = 0.0;
        let mut drho_ii = 0.0;
        for l in 0..nb {
            if l == i {
                continue;
            }
            let (g, b) = (net.g(i, l), net.b(i, l));
            if g == 0.0 && b == 0.0 {
                continue;
            }
            let t = (rho[i] + rho[l]).exp();
            let a = theta[i] - theta[l];
            let (c, s) = (a.cos(), a.sin());
            dtheta_ii += t * (g * c + b * s);
            drho_ii += t * (g * s - b * c);
            if l >= 1 {
                jac[(row, l - 1)] = -t * (g * c + b * s);
            }
            if let Some(p) = net.pq_position(l) {
                jac[(row, n + p)] = t * (g * s - b * c);
            }
        }
        jac[(row, i - 1)] = dtheta_ii;
        jac[(row, n + p_row)] = drho_ii - 2.0 * (2.0 * rho[i]).exp() * net.b(i, i);
    }
    jac
}

/// The Jacobian as a quadratic matrix function of the voltage phasors:
/// `J(V) = Σ_{i∈pq} Δ_i |V_i|² + Σ_{(a,b)} Γ_ab Re(V_a V̄_b) + Ψ_ab Im(V_a V̄_b)`,
/// with one (Γ, Ψ) pair per unordered bus pair coupled by the admittance
/// matrix. The coefficient matrices depend only on `Y`.
#[derive(Debug, Clone)]
pub struct JacobianQuadForm {
    pub k: usize,
    /// PQ bus per Δ matrix.
    pub pq_buses: Vec<usize>,
    pub delta: Vec<DMatrix<f64>>,
    /// Canonical bus pairs (a < b) with nonzero off-diagonal admittance.
    pub pairs: Vec<(usize, usize)>,
    pub gamma_re: Vec<DMatrix<f64>>,
    pub psi_im: Vec<DMatrix<f64>>,
}

impl JacobianQuadForm {
    /// Evaluates the quadratic form at a rectangular voltage vector.
    pub fn evaluate(&self, rect: &[Complex64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.k, self.k);
        for (m, &bus) in self.pq_buses.iter().enumerate() {
            let u = rect[bus].norm_sqr();
            j += &self.delta[m] * u;
        }
        for (m, &(a, b)) in self.pairs.iter().enumerate() {
            let prod = rect[a] * rect[b].conj();
            j += &self.gamma_re[m] * prod.re;
            j += &self.psi_im[m] * prod.im;
        }
        j
    }
}

/// Derives the quadratic-form coefficient matrices by differentiating the
/// power flow operator and collecting the bilinear voltage monomials
/// `|V_i|²`, `Re(V_i V̄_j)`, `Im(V_i V̄_j)`.
pub fn jacobian_quadform(net: &Network) -> JacobianQuadForm {
    let n = net.n();
    let k = net.k();
    let nb = net.n_bus();

    let mut pairs = Vec::new();
    let mut pair_pos = std::collections::HashMap::new();
    for a in 0..nb {
        for b in (a + 1)..nb {
            if net.y(a, b).norm() != 0.0 {
                pair_pos.insert((a, b), pairs.len());
                pairs.push((a, b));
            }
        }
    }
    let mut gamma_re = vec![DMatrix::zeros(k, k); pairs.len()];
    let mut psi_im = vec![DMatrix::zeros(k, k); pairs.len()];
    let pq_buses: Vec<usize> = net.pq().to_vec();
    let mut delta = vec![DMatrix::zeros(k, k); pq_buses.len()];

    // Adds `re_coef·Re(V_i V̄_l) + im_coef·Im(V_i V̄_l)` at entry (row, col);
    // the Im part flips sign when (i, l) is stored canonically as (l, i).
    let add = |gamma_re: &mut [DMatrix<f64>],
                   psi_im: &mut [DMatrix<f64>],
                   i: usize,
                   l: usize,
                   row: usize,
                   col: usize,
                   re_coef: f64,
                   im_coef: f64| {
        let (key, sign) = if i < l { ((i, l), 1.0) } else { ((l, i), -1.0) };
        if let Some(&m) = pair_pos.get(&key) {
            gamma_re[m][(row, col)] += re_coef;
            psi_im[m][(row, col)] += sign * im_coef;
        }
    };

    for (row, i) in (1..=n).enumerate() {
        for l in 0..nb {
            if l == i {
                continue;
            }
            let (g, b) = (net.g(i, l), net.b(i, l));
            if g == 0.0 && b == 0.0 {
                continue;
            }
            // ∂P_i/∂θ_l = G Im − B Re; the opposite accrues on θ_i
            if l >= 1 {
                add(&mut gamma_re, &mut psi_im, i, l, row, l - 1, -b, g);
            }
            add(&mut gamma_re, &mut psi_im, i, l, row, i - 1, b, -g);
            // ∂P_i/∂ρ_l = G Re + B Im; the same term accrues on ρ_i
            if let Some(p) = net.pq_position(l) {
                add(&mut gamma_re, &mut psi_im, i, l, row, n + p, g, b);
            }
            if let Some(p) = net.pq_position(i) {
                add(&mut gamma_re, &mut psi_im, i, l, row, n + p, g, b);
            }
        }
        if let Some(p) = net.pq_position(i) {
            let m = pq_buses.iter().position(|&x| x == i).unwrap();
            delta[m][(row, n + p)] += 2.0 * net.g(i, i);
        }
    }

    for (p_row, &i) in net.pq().iter().enumerate() {
        let row = n + p_row;
        for l in 0..nb {
            if l == i {
                continue;
            }
            let (g, b) = (net.g(i, l), net.b(i, l));
            if g == 0.0 && b == 0.0 {
                continue;
            }
            // ∂Q_i/∂θ_l = −(G Re + B Im); the opposite accrues on θ_i
            if l >= 1 {
                add(&mut gamma_re, &mut psi_im, i, l, row, l - 1, -g, -b);
            }
            add(&mut gamma_re, &mut psi_im, i, l, row, i - 1, g, b);
            // ∂Q_i/∂ρ_l = G Im − B Re; the same term accrues on ρ_i
            if let Some(p) = net.pq_position(l) {
                add(&mut gamma_re, &mut psi_im, i, l, row, n + p, -b, g);
            }
            if let Some(p) = net.pq_position(i) {
                add(&mut gamma_re, &mut psi_im, i, l, row, n + p, -b, g);
            }
        }
        delta[p_row][(row, n + p_row)] += -2.0 * net.b(i, i);
    }

    JacobianQuadForm { k, pq_buses, delta, pairs, gamma_re, psi_im }
}

// ---------------------------------------------------------------------------
// Newton solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub v: VoltageState,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("newton did not converge: residual {residual:.3e} after {iterations} iterations{}", if *.singular { " (singular Jacobian)" } else { "" })]
pub struct NoConvergence {
    pub residual: f64,
    pub iterations: usize,
    pub singular: bool,
}

pub const NEWTON_TOL: f64 = 1e-8;
pub const NEWTON_MAX_ITER: usize = 50;

/// Damped Newton iteration on `F(V) = s`, updating only `(θ_nsb, ρ_pq)`.
/// Full step first, then simple halving on the residual norm.
pub fn newton_solve(
    net: &Network,
    s: &Injection,
    v0: &VoltageState,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<NewtonSolution, NoConvergence> {
    let k = net.k();
    let mut u = v0.unknowns(net);
    let mut v = VoltageState::from_unknowns(net, &u);
    let mut r = residual(net, &v, s);
    let mut rnorm = inf_norm(&r);
    for it in 0..max_iter {
        if rnorm <= tol {
            return Ok(NewtonSolution { v, iterations: it, residual: rnorm });
        }
        let jac = jacobian_analytic(net, &v);
        let lu = jac.lu();
        let rhs = DVector::from_column_slice(&r);
        let step = match lu.solve(&rhs) {
            Some(d) if d.iter().all(|x| x.is_finite()) => d,
            _ => return Err(NoConvergence { residual: rnorm, iterations: it, singular: true }),
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut u_try = u.clone();
            for c in 0..k {
                u_try[c] -= alpha * step[c];
            }
            let v_try = VoltageState::from_unknowns(net, &u_try);
            let r_try = residual(net, &v_try, s);
            let rn_try = inf_norm(&r_try);
            if rn_try < rnorm {
                u = u_try;
                v = v_try;
                r = r_try;
                rnorm = rn_try;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(NoConvergence { residual: rnorm, iterations: it, singular: false });
        }
    }
    if rnorm <= tol {
        return Ok(NewtonSolution { v, iterations: max_iter, residual: rnorm });
    }
    Err(NoConvergence { residual: rnorm, iterations: max_iter, singular: false })
}

fn residual(net: &Network, v: &VoltageState, s: &Injection) -> Vec<f64> {
    let f = evaluate_f(net, v);
    f.0.iter().zip(&s.0).map(|(a, b)| a - b).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// ---------------------------------------------------------------------------
// Operational constraints
// ---------------------------------------------------------------------------

/// One scalar inequality of the operational constraint set, `slack ≥ 0`.
/// Quadratic constraints are kept in their squared form so numeric slacks
/// agree with the polynomial encodings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum OpConstraint {
    /// `v_max² − |V_bus|² ≥ 0`
    VmagUpper { bus: usize, bound: f64 },
    /// `|V_bus|² − v_min² ≥ 0`
    VmagLower { bus: usize, bound: f64 },
    /// `min(γ, f̄)² − |V_from − V_to|² ≥ 0`
    FlowUpper { branch: usize, from: usize, to: usize, bound: f64 },
    /// `q̄ − q_bus(V) ≥ 0` (PV or slack bus)
    ReactiveUpper { bus: usize, bound: f64 },
    /// `q_bus(V) − q̲ ≥ 0`
    ReactiveLower { bus: usize, bound: f64 },
    /// `p̄₀ − p₀(V) ≥ 0`
    ActiveUpper { bus: usize, bound: f64 },
    /// `p₀(V) − p̲₀ ≥ 0`
    ActiveLower { bus: usize, bound: f64 },
}

impl OpConstraint {
    /// Human-readable label using original case bus numbers.
    pub fn label(&self, net: &Network) -> String {
        let o = |i: usize| net.original_number(i);
        match *self {
            OpConstraint::VmagUpper { bus, .. } => format!("vmag({}) upper", o(bus)),
            OpConstraint::VmagLower { bus, .. } => format!("vmag({}) lower", o(bus)),
            OpConstraint::FlowUpper { from, to, .. } => format!("flow({},{}) upper", o(from), o(to)),
            OpConstraint::ReactiveUpper { bus, .. } => format!("q({}) upper", o(bus)),
            OpConstraint::ReactiveLower { bus, .. } => format!("q({}) lower", o(bus)),
            OpConstraint::ActiveUpper { bus, .. } => format!("p({}) upper", o(bus)),
            OpConstraint::ActiveLower { bus, .. } => format!("p({}) lower", o(bus)),
        }
    }

    /// Slack at a rectangular voltage point; positive means strict.
    pub fn slack(&self, net: &Network, rect: &[Complex64]) -> f64 {
        match *self {
            OpConstraint::VmagUpper { bus, bound } => bound * bound - rect[bus].norm_sqr(),
            OpConstraint::VmagLower { bus, bound } => rect[bus].norm_sqr() - bound * bound,
            OpConstraint::FlowUpper { from, to, bound, .. } => {
                bound * bound - (rect[from] - rect[to]).norm_sqr()
            }
            OpConstraint::ReactiveUpper { bus, bound } => bound - bus_power_at(net, rect, bus).im,
            OpConstraint::ReactiveLower { bus, bound } => bus_power_at(net, rect, bus).im - bound,
            OpConstraint::ActiveUpper { bus, bound } => bound - bus_power_at(net, rect, bus).re,
            OpConstraint::ActiveLower { bus, bound } => bus_power_at(net, rect, bus).re - bound,
        }
    }
}

/// Operational limits together with the line-limit tightening parameter γ.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OperationalLimits {
    /// Per-bus magnitude bounds, indexed by internal bus index.
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
    /// Per-branch `f̄`; `None` leaves only the γ bound.
    pub flow_limit: Vec<Option<f64>>,
    /// Reactive bounds for PV buses and the slack, by internal index.
    pub q_bounds: Vec<Option<(f64, f64)>>,
    /// Active bounds at the slack bus.
    pub p0_bounds: Option<(f64, f64)>,
    /// Uniform tightening of the line limits to `min(γ, f̄)`.
    pub gamma: f64,
}

/// Overrides applied on top of the case data when building limits.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LimitOverrides {
    /// Uniform `f̄` for every branch (replaces case flow limits).
    pub uniform_flow_limit: Option<f64>,
    pub slack_p: Option<(f64, f64)>,
    pub slack_q: Option<(f64, f64)>,
    /// Uniform reactive bounds at every PV bus.
    pub pv_q: Option<(f64, f64)>,
    /// Magnitude band applied to every PQ bus.
    pub v_band_pq: Option<(f64, f64)>,
}

impl OperationalLimits {
    pub fn from_network(net: &Network, gamma: f64) -> Self {
        Self::with_overrides(net, gamma, &LimitOverrides::default())
    }

    pub fn with_overrides(net: &Network, gamma: f64, ov: &LimitOverrides) -> Self {
        let nb = net.n_bus();
        let mut v_min = Vec::with_capacity(nb);
        let mut v_max = Vec::with_capacity(nb);
        let mut q_bounds = vec![None; nb];
        for b in &net.buses {
            let (lo, hi) = match (b.kind, ov.v_band_pq) {
                (BusKind::Pq, Some(band)) => band,
                _ => (b.v_min, b.v_max),
            };
            v_min.push(lo);
            v_max.push(hi);
            match b.kind {
                BusKind::Pv => q_bounds[b.index] = ov.pv_q.or(b.q_min.zip(b.q_max)),
                BusKind::Slack => q_bounds[b.index] = ov.slack_q.or(b.q_min.zip(b.q_max)),
                BusKind::Pq => {}
            }
        }
        let flow_limit =
            net.branches.iter().map(|br| ov.uniform_flow_limit.or(br.flow_limit)).collect();
        let p0_bounds = ov.slack_p.or(net.buses[0].p_min.zip(net.buses[0].p_max));
        OperationalLimits { v_min, v_max, flow_limit, q_bounds, p0_bounds, gamma }
    }

    /// Same limits with a different tightening parameter.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut lims = self.clone();
        lims.gamma = gamma;
        lims
    }

    /// The ordered scalar constraint list: magnitudes, flows, PV reactive,
    /// slack reactive, slack active. Within each group upper precedes lower.
    ///
    /// Magnitude constraints at PV buses whose pinned set-point does not sit
    /// strictly inside the band are vacuous (the magnitude is fixed by the
    /// validity constraints) and are dropped.
    pub fn constraints(&self, net: &Network) -> Vec<OpConstraint> {
        let mut out = Vec::new();
        for i in net.nsb() {
            let keep = match net.buses[i].kind {
                BusKind::Pq => true,
                _ => {
                    let v = net.buses[i].v_set.unwrap_or(1.0);
                    self.v_min[i] < v && v < self.v_max[i]
                }
            };
            if keep {
                out.push(OpConstraint::VmagUpper { bus: i, bound: self.v_max[i] });
                out.push(OpConstraint::VmagLower { bus: i, bound: self.v_min[i] });
            }
        }
        for (bi, br) in net.branches.iter().enumerate() {
            let bound = match self.flow_limit[bi] {
                Some(f) => self.gamma.min(f),
                None => self.gamma,
            };
            if bound.is_finite() {
                out.push(OpConstraint::FlowUpper { branch: bi, from: br.from, to: br.to, bound });
            }
        }
        for &i in net.pv() {
            if let Some((lo, hi)) = self.q_bounds[i] {
                out.push(OpConstraint::ReactiveUpper { bus: i, bound: hi });
                out.push(OpConstraint::ReactiveLower { bus: i, bound: lo });
            }
        }
        if let Some((lo, hi)) = self.q_bounds[0] {
            out.push(OpConstraint::ReactiveUpper { bus: 0, bound: hi });
            out.push(OpConstraint::ReactiveLower { bus: 0, bound: lo });
        }
        if let Some((lo, hi)) = self.p0_bounds {
            out.push(OpConstraint::ActiveUpper { bus: 0, bound: hi });
            out.push(OpConstraint::ActiveLower { bus: 0, bound: lo });
        }
        out
    }
}

/// Evaluates all operational constraint slacks at a voltage state, in the
/// order of [`OperationalLimits::constraints`].
pub fn eval_operational(net: &Network, lims: &OperationalLimits, v: &VoltageState) -> Vec<f64> {
    let rect = v.rect();
    lims.constraints(net).iter().map(|c| c.slack(net, &rect)).collect()
}

#[cfg(test)]
pub(crate) fn random_valid_state(net: &Network, rng: &mut impl rand::Rng) -> VoltageState {
    let mut u = Vec::with_capacity(net.k());
    for _ in 0..net.n() {
        u.push(rng.gen_range(-0.5..0.5));
    }
    for _ in 0..net.pq().len() {
        u.push(rng.gen_range(-0.15..0.15));
    }
    VoltageState::from_unknowns(net, &u)
}
