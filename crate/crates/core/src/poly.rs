//! Multivariate polynomial machinery and assembly of the two polynomial
//! infeasibility systems in rectangular voltage coordinates.
//!
//! Both systems share the stacked variable vector `(lead, Re V, Im V)` where
//! `lead` is either the Jacobian null-vector `z` (singularity system) or the
//! injection vector `s` (per-constraint strict-feasibility system). Voltage
//! coordinates are written `e_i = Re V_i`, `f_i = Im V_i`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::acpf::{jacobian_quadform, OpConstraint, OperationalLimits};
use crate::netmodel::Network;

pub type Result<T> = std::result::Result<T, PolyError>;

#[derive(Debug, thiserror::Error)]
pub enum PolyError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid constraint index {0}")]
    InvalidConstraint(usize),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("json error: {0}")]
    Json(String),
}

// ---------------------------------------------------------------------------
// Monomials and polynomials
// ---------------------------------------------------------------------------

/// Exponent multi-index over a fixed variable vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial(pub Vec<u8>);

impl Monomial {
    pub fn one(dim: usize) -> Self {
        Monomial(vec![0; dim])
    }

    pub fn var(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.dim(), other.dim());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 1.0;
        for (i, &e) in self.0.iter().enumerate() {
            if e > 0 {
                acc *= x[i].powi(e as i32);
            }
        }
        acc
    }
}

// Graded lexicographic order: lower total degree first; within a degree the
// monomial with the larger exponent on the earliest variable comes first
// (1, x₁, x₂, ..., x₁², x₁x₂, ...).
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial with real coefficients; zero coefficients are never
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Polynomial::zero(dim);
        p.add_term(Monomial::one(dim), c);
        p
    }

    pub fn var(dim: usize, i: usize) -> Self {
        let mut p = Polynomial::zero(dim);
        p.add_term(Monomial::var(dim, i), 1.0);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.dim(), self.dim);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0.0 {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn scale(&self, a: f64) -> Polynomial {
        if a == 0.0 {
            return Polynomial::zero(self.dim);
        }
        let mut out = Polynomial::zero(self.dim);
        for (m, c) in self.terms() {
            out.add_term(m.clone(), a * c);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.dim);
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.terms().map(|(m, c)| c * m.eval(x)).sum()
    }
}

/// `coef · x_i · x_j` as a term.
fn quad(dim: usize, i: usize, j: usize, coef: f64) -> (Monomial, f64) {
    let mut e = vec![0u8; dim];
    e[i] += 1;
    e[j] += 1;
    (Monomial(e), coef)
}

// ---------------------------------------------------------------------------
// Polynomial systems
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoly {
    pub label: String,
    pub poly: Polynomial,
}

/// A set of polynomial equalities (`p = 0`) and inequalities (`p ≥ 0`) over
/// a named variable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySystem {
    pub var_names: Vec<String>,
    pub equalities: Vec<LabeledPoly>,
    pub inequalities: Vec<LabeledPoly>,
}

impl PolySystem {
    pub fn dim(&self) -> usize {
        self.var_names.len()
    }

    /// Largest equality residual magnitude at a point.
    pub fn max_equality_residual(&self, x: &[f64]) -> f64 {
        self.equalities.iter().map(|p| p.poly.eval(x).abs()).fold(0.0, f64::max)
    }

    /// Smallest inequality value at a point (negative: violated).
    pub fn min_inequality_slack(&self, x: &[f64]) -> f64 {
        self.inequalities.iter().map(|p| p.poly.eval(x)).fold(f64::INFINITY, f64::min)
    }
}

/// Variable layout of the stacked vector `(lead₀.., e_0..e_n, f_0..f_n)`.
#[derive(Debug, Clone, Copy)]
pub struct RectVars {
    pub lead: usize,
    pub n_bus: usize,
}

impl RectVars {
    pub fn dim(&self) -> usize {
        self.lead + 2 * self.n_bus
    }

    pub fn e(&self, bus: usize) -> usize {
        self.lead + bus
    }

    pub fn f(&self, bus: usize) -> usize {
        self.lead + self.n_bus + bus
    }

    /// Splits a point into (lead, rectangular voltages).
    pub fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<Complex64>) {
        let lead = x[..self.lead].to_vec();
        let rect =
            (0..self.n_bus).map(|i| Complex64::new(x[self.e(i)], x[self.f(i)])).collect();
        (lead, rect)
    }

    /// Stacks (lead, rectangular voltages) into a point.
    pub fn join(&self, lead: &[f64], rect: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(lead.len(), self.lead);
        debug_assert_eq!(rect.len(), self.n_bus);
        let mut x = Vec::with_capacity(self.dim());
        x.extend_from_slice(lead);
        x.extend(rect.iter().map(|v| v.re));
        x.extend(rect.iter().map(|v| v.im));
        x
    }
}

fn var_names(net: &Network, lead_prefix: &str, lead: usize) -> Vec<String> {
    let mut names = Vec::new();
    for c in 0..lead {
        names.push(format!("{lead_prefix}{c}"));
    }
    for i in 0..net.n_bus() {
        names.push(format!("eV{i}"));
    }
    for i in 0..net.n_bus() {
        names.push(format!("fV{i}"));
    }
    names
}

/// `Σ_j (G_ij e_j − B_ij f_j)` — the real part of `(YV)_i` — as a polynomial.
fn yv_re(net: &Network, vars: RectVars, i: usize) -> Polynomial {
    let mut p = Polynomial::zero(vars.dim());
    for j in 0..net.n_bus() {
        p.add_term(Monomial::var(vars.dim(), vars.e(j)), net.g(i, j));
        p.add_term(Monomial::var(vars.dim(), vars.f(j)), -net.b(i, j));
    }
    p
}

/// `Σ_j (G_ij f_j + B_ij e_j)` — the imaginary part of `(YV)_i`.
fn yv_im(net: &Network, vars: RectVars, i: usize) -> Polynomial {
    let mut p = Polynomial::zero(vars.dim());
    for j in 0..net.n_bus() {
        p.add_term(Monomial::var(vars.dim(), vars.f(j)), net.g(i, j));
        p.add_term(Monomial::var(vars.dim(), vars.e(j)), net.b(i, j));
    }
    p
}

/// Active injection `p_i(V) = e_i·Re(YV)_i + f_i·Im(YV)_i` as a quadratic.
pub fn active_injection_poly(net: &Network, vars: RectVars, i: usize) -> Polynomial {
    let a = yv_re(net, vars, i);
    let b = yv_im(net, vars, i);
    let ei = Polynomial::var(vars.dim(), vars.e(i));
    let fi = Polynomial::var(vars.dim(), vars.f(i));
    ei.mul(&a).add(&fi.mul(&b))
}

/// Reactive injection `q_i(V) = f_i·Re(YV)_i − e_i·Im(YV)_i` as a quadratic.
pub fn reactive_injection_poly(net: &Network, vars: RectVars, i: usize) -> Polynomial {
    let a = yv_re(net, vars, i);
    let b = yv_im(net, vars, i);
    let ei = Polynomial::var(vars.dim(), vars.e(i));
    let fi = Polynomial::var(vars.dim(), vars.f(i));
    fi.mul(&a).add(&ei.mul(&b).scale(-1.0))
}

/// The polynomial form of one operational constraint (`poly ≥ 0`).
pub fn op_constraint_poly(net: &Network, vars: RectVars, con: &OpConstraint) -> Polynomial {
    let dim = vars.dim();
    match *con {
        OpConstraint::VmagUpper { bus, bound } => {
            let mut p = Polynomial::constant(dim, bound * bound);
            let (m, c) = quad(dim, vars.e(bus), vars.e(bus), -1.0);
            p.add_term(m, c);
            let (m, c) = quad(dim, vars.f(bus), vars.f(bus), -1.0);
            p.add_term(m, c);
            p
        }
        OpConstraint::VmagLower { bus, bound } => {
            let mut p = Polynomial::constant(dim, -bound * bound);
            let (m, c) = quad(dim, vars.e(bus), vars.e(bus), 1.0);
            p.add_term(m, c);
            let (m, c) = quad(dim, vars.f(bus), vars.f(bus), 1.0);
            p.add_term(m, c);
            p
        }
        OpConstraint::FlowUpper { from, to, bound, .. } => {
            // bound² − (e_f−e_t)² − (f_f−f_t)²
            let mut p = Polynomial::constant(dim, bound * bound);
            for (a, b) in [(vars.e(from), vars.e(to)), (vars.f(from), vars.f(to))] {
                let (m, c) = quad(dim, a, a, -1.0);
                p.add_term(m, c);
                let (m, c) = quad(dim, b, b, -1.0);
                p.add_term(m, c);
                let (m, c) = quad(dim, a, b, 2.0);
                p.add_term(m, c);
            }
            p
        }
        OpConstraint::ReactiveUpper { bus, bound } => Polynomial::constant(dim, bound)
            .add(&reactive_injection_poly(net, vars, bus).scale(-1.0)),
        OpConstraint::ReactiveLower { bus, bound } => {
            reactive_injection_poly(net, vars, bus).add(&Polynomial::constant(dim, -bound))
        }
        OpConstraint::ActiveUpper { bus, bound } => Polynomial::constant(dim, bound)
            .add(&active_injection_poly(net, vars, bus).scale(-1.0)),
        OpConstraint::ActiveLower { bus, bound } => {
            active_injection_poly(net, vars, bus).add(&Polynomial::constant(dim, -bound))
        }
    }
}

/// Validity constraints: PV magnitudes as quadratics, the slack phasor as
/// two linear equalities (`Re V_0 = v_0`, `Im V_0 = 0`).
fn validity_polys(net: &Network, vars: RectVars) -> Vec<LabeledPoly> {
    let dim = vars.dim();
    let mut out = Vec::new();
    for &i in net.pv() {
        let v = net.buses[i].v_set.unwrap();
        let mut p = Polynomial::constant(dim, -v * v);
        let (m, c) = quad(dim, vars.e(i), vars.e(i), 1.0);
        p.add_term(m, c);
        let (m, c) = quad(dim, vars.f(i), vars.f(i), 1.0);
        p.add_term(m, c);
        out.push(LabeledPoly { label: format!("Heq: vmag({})", net.original_number(i)), poly: p });
    }
    let v0 = net.buses[0].v_set.unwrap();
    let mut re0 = Polynomial::var(dim, vars.e(0));
    re0.add_term(Monomial::one(dim), -v0);
    out.push(LabeledPoly { label: "Heq: slack re".into(), poly: re0 });
    out.push(LabeledPoly { label: "Heq: slack im".into(), poly: Polynomial::var(dim, vars.f(0)) });
    out
}

fn op_polys(net: &Network, lims: &OperationalLimits, vars: RectVars) -> Vec<LabeledPoly> {
    lims.constraints(net)
        .iter()
        .map(|c| LabeledPoly {
            label: format!("Hop: {}", c.label(net)),
            poly: op_constraint_poly(net, vars, c),
        })
        .collect()
}

/// The Jacobian-singularity system over `(z, Re V, Im V)`: find a valid,
/// operationally admissible voltage and a unit vector annihilated by the
/// Jacobian. Infeasibility certifies a nonsingular Jacobian everywhere on
/// the constraint set.
pub fn build_jacobian_system(net: &Network, lims: &OperationalLimits) -> PolySystem {
    let k = net.k();
    let vars = RectVars { lead: k, n_bus: net.n_bus() };
    let dim = vars.dim();
    let qf = jacobian_quadform(net);

    let mut equalities = Vec::new();
    // J(V) z = 0, one cubic row each: quadratic-in-V entries times z.
    for r in 0..k {
        let mut p = Polynomial::zero(dim);
        for c in 0..k {
            for (m_idx, &bus) in qf.pq_buses.iter().enumerate() {
                let coef = qf.delta[m_idx][(r, c)];
                if coef != 0.0 {
                    // |V_bus|² = e² + f²
                    for v in [vars.e(bus), vars.f(bus)] {
                        let mut e = vec![0u8; dim];
                        e[v] += 2;
                        e[c] += 1;
                        p.add_term(Monomial(e), coef);
                    }
                }
            }
            for (m_idx, &(a, b)) in qf.pairs.iter().enumerate() {
                let g = qf.gamma_re[m_idx][(r, c)];
                if g != 0.0 {
                    // Re(V_a V̄_b) = e_a e_b + f_a f_b
                    for (va, vb) in [(vars.e(a), vars.e(b)), (vars.f(a), vars.f(b))] {
                        let mut e = vec![0u8; dim];
                        e[va] += 1;
                        e[vb] += 1;
                        e[c] += 1;
                        p.add_term(Monomial(e), g);
                    }
                }
                let ps = qf.psi_im[m_idx][(r, c)];
                if ps != 0.0 {
                    // Im(V_a V̄_b) = f_a e_b − e_a f_b
                    let mut e = vec![0u8; dim];
                    e[vars.f(a)] += 1;
                    e[vars.e(b)] += 1;
                    e[c] += 1;
                    p.add_term(Monomial(e), ps);
                    let mut e = vec![0u8; dim];
                    e[vars.e(a)] += 1;
                    e[vars.f(b)] += 1;
                    e[c] += 1;
                    p.add_term(Monomial(e), -ps);
                }
            }
        }
        equalities.push(LabeledPoly { label: format!("jacobian_null row {r}"), poly: p });
    }
    // zᵀz = 1
    let mut znorm = Polynomial::constant(dim, -1.0);
    for c in 0..k {
        let (m, co) = quad(dim, c, c, 1.0);
        znorm.add_term(m, co);
    }
    equalities.push(LabeledPoly { label: "z_unit".into(), poly: znorm });
    equalities.extend(validity_polys(net, vars));

    PolySystem {
        var_names: var_names(net, "z", k),
        equalities,
        inequalities: op_polys(net, lims, vars),
    }
}

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

/// A scalable region template in injection space, instantiated at scale δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegionSpec {
    /// `s⁰ ± δ·w` componentwise.
    Box { center: Vec<f64>, half_widths: Vec<f64> },
    /// `(s−s⁰)ᵀ Q (s−s⁰) ≤ δ²` with `Q ≻ 0` (row-major).
    Ellipsoid { center: Vec<f64>, q: Vec<Vec<f64>> },
}

impl RegionSpec {
    pub fn unit_box(dim: usize) -> Self {
        RegionSpec::Box { center: vec![0.0; dim], half_widths: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        match self {
            RegionSpec::Box { center, .. } | RegionSpec::Ellipsoid { center, .. } => center.len(),
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            RegionSpec::Box { center, .. } | RegionSpec::Ellipsoid { center, .. } => center,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegionSpec::Box { center, half_widths } => {
                if center.len() != half_widths.len() {
                    return Err(PolyError::InvalidRegion("center/width length mismatch".into()));
                }
                if half_widths.iter().any(|&w| !(w > 0.0)) {
                    return Err(PolyError::InvalidRegion("half-widths must be positive".into()));
                }
            }
            RegionSpec::Ellipsoid { center, q } => {
                let d = center.len();
                if q.len() != d || q.iter().any(|row| row.len() != d) {
                    return Err(PolyError::InvalidRegion("Q shape mismatch".into()));
                }
                for i in 0..d {
                    for j in 0..d {
                        if (q[i][j] - q[j][i]).abs() > 1e-10 {
                            return Err(PolyError::InvalidRegion("Q must be symmetric".into()));
                        }
                    }
                }
                let qm = nalgebra::DMatrix::from_fn(d, d, |i, j| q[i][j]);
                if crate::linalg::min_eig(&qm) <= 0.0 {
                    return Err(PolyError::InvalidRegion("Q must be positive definite".into()));
                }
            }
        }
        Ok(())
    }

    /// Membership test at scale δ.
    pub fn contains(&self, delta: f64, s: &[f64]) -> bool {
        match self {
            RegionSpec::Box { center, half_widths } => center
                .iter()
                .zip(half_widths)
                .zip(s)
                .all(|((c, w), x)| (x - c).abs() <= delta * w + 1e-12),
            RegionSpec::Ellipsoid { center, q } => {
                let d = center.len();
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        acc += q[i][j] * (s[i] - center[i]) * (s[j] - center[j]);
                    }
                }
                acc <= delta * delta + 1e-12
            }
        }
    }

    /// Membership polynomials (each `≥ 0`) over the stacked variables, with
    /// the injection coordinates in the lead block.
    pub fn membership_polys(&self, delta: f64, vars: RectVars) -> Vec<LabeledPoly> {
        let dim = vars.dim();
        match self {
            RegionSpec::Box { center, half_widths } => {
                let mut out = Vec::new();
                for (c, (s0, w)) in center.iter().zip(half_widths).enumerate() {
                    let mut hi = Polynomial::constant(dim, s0 + delta * w);
                    hi.add_term(Monomial::var(dim, c), -1.0);
                    out.push(LabeledPoly { label: format!("region: box upper s{c}"), poly: hi });
                    let mut lo = Polynomial::var(dim, c);
                    lo.add_term(Monomial::one(dim), -(s0 - delta * w));
                    out.push(LabeledPoly { label: format!("region: box lower s{c}"), poly: lo });
                }
                out
            }
            RegionSpec::Ellipsoid { center, q } => {
                let d = center.len();
                let mut p = Polynomial::constant(dim, delta * delta);
                for i in 0..d {
                    for j in 0..d {
                        let coef = -q[i][j];
                        if coef == 0.0 {
                            continue;
                        }
                        let (m, c2) = quad(dim, i, j, coef);
                        p.add_term(m, c2);
                        p.add_term(Monomial::var(dim, i), -coef * center[j]);
                        p.add_term(Monomial::var(dim, j), -coef * center[i]);
                        p.add_term(Monomial::one(dim), coef * center[i] * center[j]);
                    }
                }
                vec![LabeledPoly { label: "region: ellipsoid".into(), poly: p }]
            }
        }
    }
}

/// The strict-feasibility system for constraint `active_index` over
/// `(s, Re V, Im V)`: the chosen constraint holds with equality while the
/// voltage solves the power flow for some injection in the region and every
/// other constraint holds. Infeasibility certifies the constraint cannot
/// become active anywhere over the region.
pub fn build_feasibility_system(
    net: &Network,
    lims: &OperationalLimits,
    region: &RegionSpec,
    delta: f64,
    active_index: usize,
) -> Result<PolySystem> {
    let k = net.k();
    let n = net.n();
    if region.dim() != k {
        return Err(PolyError::Dimension(format!(
            "region dimension {} does not match k = {}",
            region.dim(),
            k
        )));
    }
    region.validate()?;
    let vars = RectVars { lead: k, n_bus: net.n_bus() };
    let cons = lims.constraints(net);
    if active_index >= cons.len() {
        return Err(PolyError::InvalidConstraint(active_index));
    }

    let mut equalities = Vec::new();
    let active = &cons[active_index];
    equalities.push(LabeledPoly {
        label: format!("active: Hop: {}", active.label(net)),
        poly: op_constraint_poly(net, vars, active),
    });
    // F(V) = s
    for i in 1..=n {
        let mut p = active_injection_poly(net, vars, i);
        p.add_term(Monomial::var(vars.dim(), i - 1), -1.0);
        equalities
            .push(LabeledPoly { label: format!("pf: p({})", net.original_number(i)), poly: p });
    }
    for (pos, &b) in net.pq().iter().enumerate() {
        let mut p = reactive_injection_poly(net, vars, b);
        p.add_term(Monomial::var(vars.dim(), n + pos), -1.0);
        equalities
            .push(LabeledPoly { label: format!("pf: q({})", net.original_number(b)), poly: p });
    }
    equalities.extend(validity_polys(net, vars));

    let mut inequalities = Vec::new();
    for (ci, c) in cons.iter().enumerate() {
        if ci != active_index {
            inequalities.push(LabeledPoly {
                label: format!("Hop: {}", c.label(net)),
                poly: op_constraint_poly(net, vars, c),
            });
        }
    }
    inequalities.extend(region.membership_polys(delta, vars));

    Ok(PolySystem { var_names: var_names(net, "s", k), equalities, inequalities })
}

/// Exact pointwise evaluation, the backbone of every oracle check.
pub fn eval_poly(p: &Polynomial, x: &[f64]) -> f64 {
    p.eval(x)
}

// ---------------------------------------------------------------------------
// JSON export (debugging / cross-implementation diffing)
// ---------------------------------------------------------------------------

pub const POLYSYSTEM_SCHEMA_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct PolyJson {
    label: String,
    terms: Vec<(Vec<u8>, f64)>,
}

#[derive(Serialize, Deserialize)]
struct SystemJson {
    schema_version: String,
    var_names: Vec<String>,
    equalities: Vec<PolyJson>,
    inequalities: Vec<PolyJson>,
}

fn poly_to_json(lp: &LabeledPoly) -> PolyJson {
    PolyJson {
        label: lp.label.clone(),
        terms: lp.poly.terms().map(|(m, c)| (m.0.clone(), c)).collect(),
    }
}

fn poly_from_json(dim: usize, pj: &PolyJson) -> Result<LabeledPoly> {
    let mut poly = Polynomial::zero(dim);
    for (e, c) in &pj.terms {
        if e.len() != dim {
            return Err(PolyError::Json("monomial dimension mismatch".into()));
        }
        poly.add_term(Monomial(e.clone()), *c);
    }
    Ok(LabeledPoly { label: pj.label.clone(), poly })
}

pub fn system_to_json(sys: &PolySystem) -> String {
    let doc = SystemJson {
        schema_version: POLYSYSTEM_SCHEMA_VERSION.to_string(),
        var_names: sys.var_names.clone(),
        equalities: sys.equalities.iter().map(poly_to_json).collect(),
        inequalities: sys.inequalities.iter().map(poly_to_json).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("system serialization cannot fail")
}

pub fn system_from_json(text: &str) -> Result<PolySystem> {
    let doc: SystemJson = serde_json::from_str(text).map_err(|e| PolyError::Json(e.to_string()))?;
    if doc.schema_version != POLYSYSTEM_SCHEMA_VERSION {
        return Err(PolyError::Json("unsupported schema_version".into()));
    }
    let dim = doc.var_names.len();
    Ok(PolySystem {
        var_names: doc.var_names.clone(),
        equalities: doc.equalities.iter().map(|p| poly_from_json(dim, p)).collect::<Result<_>>()?,
        inequalities: doc
            .inequalities
            .iter()
            .map(|p| poly_from_json(dim, p))
            .collect::<Result<_>>()?,
    })
}

/// Checks that a rectangular point satisfies the validity equalities.
pub fn satisfies_validity(net: &Network, rect: &[Complex64], tol: f64) -> bool {
    crate::acpf::VoltageState::from_rect(net, rect, tol).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acpf::{
        evaluate_f, jacobian_analytic, newton_solve, nominal_injection, random_valid_state,
        LimitOverrides, VoltageState,
    };
    use crate::netmodel::{case3, case6ww};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn test_limits(net: &Network, gamma: f64) -> OperationalLimits {
        OperationalLimits::with_overrides(
            net,
            gamma,
            &LimitOverrides {
                slack_p: Some((-3.0, 3.0)),
                slack_q: Some((-3.0, 3.0)),
                v_band_pq: Some((0.9, 1.1)),
                ..Default::default()
            },
        )
    }

    #[test]
    fn eval_constant_and_simple_monomials() {
        let one = Polynomial::constant(2, 1.0);
        assert_eq!(eval_poly(&one, &[5.0, -3.0]), 1.0);
        // x₁²x₂ at (2,3) = 12
        let mut p = Polynomial::zero(2);
        p.add_term(Monomial(vec![2, 1]), 1.0);
        assert_eq!(eval_poly(&p, &[2.0, 3.0]), 12.0);
    }

    #[test]
    fn grlex_order_enumeration() {
        let m1 = Monomial(vec![0, 0]);
        let x1 = Monomial(vec![1, 0]);
        let x2 = Monomial(vec![0, 1]);
        let x1sq = Monomial(vec![2, 0]);
        let x1x2 = Monomial(vec![1, 1]);
        let x2sq = Monomial(vec![0, 2]);
        let mut v =
            vec![x2sq.clone(), x1x2.clone(), m1.clone(), x1sq.clone(), x2.clone(), x1.clone()];
        v.sort();
        assert_eq!(v, vec![m1, x1, x2, x1sq, x1x2, x2sq]);
    }

    #[test]
    fn jacobian_system_degrees() {
        let net = case3();
        let lims = test_limits(&net, 1.0);
        let sys = build_jacobian_system(&net, &lims);
        for eq in &sys.equalities {
            if eq.label.starts_with("jacobian_null") {
                assert_eq!(eq.poly.degree(), 3, "{}", eq.label);
            } else {
                assert!(eq.poly.degree() <= 2, "{}", eq.label);
            }
        }
        for iq in &sys.inequalities {
            assert!(iq.poly.degree() <= 2, "{}", iq.label);
        }
    }

    #[test]
    fn jacobian_rows_match_matrix_form() {
        // Oracle: the analytic Jacobian times z, evaluated directly.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for net in [case3(), case6ww()] {
            let lims = test_limits(&net, 1.0);
            let sys = build_jacobian_system(&net, &lims);
            let k = net.k();
            let vars = RectVars { lead: k, n_bus: net.n_bus() };
            for _ in 0..50 {
                let v = random_valid_state(&net, &mut rng);
                let z: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let x = vars.join(&z, &v.rect());
                let jz = jacobian_analytic(&net, &v) * nalgebra::DVector::from_column_slice(&z);
                for r in 0..k {
                    let got = sys.equalities[r].poly.eval(&x);
                    assert!(
                        (got - jz[r]).abs() <= 1e-9 * (1.0 + jz[r].abs()),
                        "row {r}: {got} vs {}",
                        jz[r]
                    );
                }
            }
        }
    }

    #[test]
    fn nonsingular_point_leaves_some_equality_nonzero() {
        let net = case6ww();
        let lims = test_limits(&net, 1.0);
        let sys = build_jacobian_system(&net, &lims);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random_valid_state(&net, &mut rng);
        let k = net.k();
        let mut z: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = z.iter().map(|a| a * a).sum::<f64>().sqrt();
        for zi in &mut z {
            *zi /= norm;
        }
        let vars = RectVars { lead: k, n_bus: net.n_bus() };
        let x = vars.join(&z, &v.rect());
        let max_row = (0..k).map(|r| sys.equalities[r].poly.eval(&x).abs()).fold(0.0, f64::max);
        assert!(max_row > 1e-6, "unit z should not be in the null space generically");
    }

    #[test]
    fn feasibility_system_consistent_with_newton_solution() {
        let net = case6ww();
        let lims = test_limits(&net, 0.4);
        let region = RegionSpec::unit_box(net.k());
        let sys = build_feasibility_system(&net, &lims, &region, 0.5, 0).unwrap();
        let s = nominal_injection(&net);
        // scale the nominal injection into the region
        let smax = s.0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let scale = 0.4 / smax;
        let s = crate::acpf::Injection(s.0.iter().map(|x| x * scale).collect());
        let sol = newton_solve(&net, &s, &VoltageState::flat(&net), 1e-12, 50).unwrap();
        let vars = RectVars { lead: net.k(), n_bus: net.n_bus() };
        let x = vars.join(&s.0, &sol.v.rect());
        for eq in &sys.equalities {
            if eq.label.starts_with("pf:") {
                assert!(eq.poly.eval(&x).abs() <= 1e-8, "{}: {}", eq.label, eq.poly.eval(&x));
            }
        }
    }

    #[test]
    fn all_system_polys_match_direct_evaluation() {
        // Symbolic polynomials at random stacked points agree with direct
        // matrix-form evaluation of J(V)z, F(V) − s and the slack values.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for net in [case3(), case6ww()] {
            let k = net.k();
            let lims = test_limits(&net, 0.7);
            let region = RegionSpec::unit_box(k);
            let vars = RectVars { lead: k, n_bus: net.n_bus() };
            let jac_sys = build_jacobian_system(&net, &lims);
            let feas_sys = build_feasibility_system(&net, &lims, &region, 0.8, 2).unwrap();
            let cons = lims.constraints(&net);
            for _ in 0..100 {
                let v = random_valid_state(&net, &mut rng);
                let rect = v.rect();
                let lead: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let x = vars.join(&lead, &rect);
                // operational constraint slacks
                for (lp, c) in jac_sys.inequalities.iter().zip(&cons) {
                    let direct = c.slack(&net, &rect);
                    let sym = lp.poly.eval(&x);
                    assert!(
                        (direct - sym).abs() <= 1e-9 * (1.0 + direct.abs()),
                        "{}: {direct} vs {sym}",
                        lp.label
                    );
                }
                // power flow rows of the feasibility system
                let f = evaluate_f(&net, &v);
                for (r, eq) in feas_sys.equalities.iter().skip(1).take(k).enumerate() {
                    let direct = f.0[r] - lead[r];
                    let sym = eq.poly.eval(&x);
                    assert!(
                        (direct - sym).abs() <= 1e-9 * (1.0 + direct.abs()),
                        "{}: {direct} vs {sym}",
                        eq.label
                    );
                }
            }
        }
    }

    #[test]
    fn validity_satisfying_points_map_to_valid_states() {
        let net = case6ww();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v = random_valid_state(&net, &mut rng);
        let rect = v.rect();
        assert!(satisfies_validity(&net, &rect, 1e-9));
        let back = VoltageState::from_rect(&net, &rect, 1e-9).unwrap();
        for i in 0..net.n_bus() {
            assert!((back.theta()[i] - v.theta()[i]).abs() < 1e-12);
            assert!((back.rho()[i] - v.rho()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_active_index_is_an_error() {
        let net = case3();
        let lims = test_limits(&net, 1.0);
        let region = RegionSpec::unit_box(net.k());
        assert!(matches!(
            build_feasibility_system(&net, &lims, &region, 0.5, 10_000),
            Err(PolyError::InvalidConstraint(_))
        ));
    }

    #[test]
    fn region_membership_polys_match_contains() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let boxr = RegionSpec::Box { center: vec![0.1, -0.2], half_widths: vec![1.0, 2.0] };
        let ell = RegionSpec::Ellipsoid {
            center: vec![0.1, -0.2],
            q: vec![vec![2.0, 0.3], vec![0.3, 1.0]],
        };
        let vars = RectVars { lead: 2, n_bus: 0 };
        for region in [boxr, ell] {
            region.validate().unwrap();
            let polys = region.membership_polys(0.7, vars);
            for _ in 0..200 {
                let s = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let inside = region.contains(0.7, &s);
                let all_nonneg = polys.iter().all(|p| p.poly.eval(&s) >= -1e-9);
                assert_eq!(inside, all_nonneg, "s = {s:?}");
            }
        }
    }

    #[test]
    fn system_json_roundtrip() {
        let net = case3();
        let lims = test_limits(&net, 1.0);
        let sys = build_jacobian_system(&net, &lims);
        let json = system_to_json(&sys);
        let back = system_from_json(&json).unwrap();
        assert_eq!(sys, back);
    }

    proptest::proptest! {
        #[test]
        fn product_evaluation_is_multiplicative(
            a in proptest::collection::vec(-2.0f64..2.0, 3),
            b in proptest::collection::vec(-2.0f64..2.0, 3),
            x in proptest::collection::vec(-1.5f64..1.5, 3),
        ) {
            let mut p = Polynomial::constant(3, a[0]);
            p.add_term(Monomial(vec![1, 0, 0]), a[1]);
            p.add_term(Monomial(vec![0, 1, 1]), a[2]);
            let mut q = Polynomial::constant(3, b[0]);
            q.add_term(Monomial(vec![0, 0, 1]), b[1]);
            q.add_term(Monomial(vec![2, 0, 0]), b[2]);
            let pq = p.mul(&q);
            let lhs = pq.eval(&x);
            let rhs = p.eval(&x) * q.eval(&x);
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
