//! Order-2 moment relaxation of polynomial feasibility systems.
//!
//! A moment vector `y` carries one pseudo-moment per monomial of degree ≤ 4
//! over the system variables, indexed in graded lexicographic order with
//! `y[0]` the constant monomial. Equalities are localized against all
//! monomials that keep the product degree ≤ 4; each inequality `g ≥ 0`
//! contributes a localizing matrix over the degree-1 monomial basis; the
//! moment matrix itself ranges over the degree-2 basis.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::poly::{Monomial, PolySystem};

pub type Result<T> = std::result::Result<T, MomentError>;

#[derive(Debug, thiserror::Error)]
pub enum MomentError {
    #[error("degree overflow: {0}")]
    Degree(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("json error: {0}")]
    Json(String),
}

/// Relaxation order is fixed at 2: degree-4 moments.
pub const MOMENT_DEGREE: usize = 4;

/// Bijection between monomials of degree ≤ 4 and positions in the moment
/// vector.
#[derive(Debug, Clone)]
pub struct MomentIndex {
    dim: usize,
    monos: Vec<Monomial>,
    rank: HashMap<Monomial, u32>,
    /// Number of monomials of degree ≤ 1 (localizing basis size).
    pub n_deg1: usize,
    /// Number of monomials of degree ≤ 2 (moment matrix side).
    pub n_deg2: usize,
}

fn enumerate_monomials(dim: usize, max_deg: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut exps = vec![0u8; dim];
    fn rec(exps: &mut Vec<u8>, pos: usize, budget: usize, out: &mut Vec<Monomial>) {
        if pos == exps.len() {
            out.push(Monomial(exps.clone()));
            return;
        }
        for e in 0..=budget {
            exps[pos] = e as u8;
            rec(exps, pos + 1, budget - e, out);
        }
        exps[pos] = 0;
    }
    rec(&mut exps, 0, max_deg, &mut out);
    out.sort();
    out
}

impl MomentIndex {
    pub fn new(dim: usize) -> Self {
        let monos = enumerate_monomials(dim, MOMENT_DEGREE);
        let mut rank = HashMap::with_capacity(monos.len());
        for (i, m) in monos.iter().enumerate() {
            rank.insert(m.clone(), i as u32);
        }
        let n_deg1 = monos.iter().take_while(|m| m.degree() <= 1).count();
        let n_deg2 = monos.iter().take_while(|m| m.degree() <= 2).count();
        MomentIndex { dim, monos, rank, n_deg1, n_deg2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Size of the moment vector.
    pub fn m(&self) -> usize {
        self.monos.len()
    }

    pub fn monomial(&self, j: usize) -> &Monomial {
        &self.monos[j]
    }

    pub fn rank(&self, m: &Monomial) -> u32 {
        *self.rank.get(m).expect("monomial within degree bound")
    }

    /// Lifts a point to its moment vector: `y_j = monomial_j(x)`.
    pub fn lift_point(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "point dimension");
        self.monos.iter().map(|m| m.eval(x)).collect()
    }
}

/// A linear functional of the moment vector: `Σ coef · y[idx]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinExpr(pub Vec<(u32, f64)>);

impl LinExpr {
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.0.iter().map(|&(j, c)| c * y[j as usize]).sum()
    }
}

/// A symmetric matrix-valued linear map of `y`, stored as packed lower
/// triangle (row-major, `j ≤ i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub label: String,
    pub side: usize,
    pub entries: Vec<LinExpr>,
}

impl PsdBlock {
    pub fn entry(&self, i: usize, j: usize) -> &LinExpr {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        &self.entries[i * (i + 1) / 2 + j]
    }

    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.side, self.side);
        let mut idx = 0;
        for i in 0..self.side {
            for j in 0..=i {
                let v = self.entries[idx].eval(y);
                idx += 1;
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }
}

/// One linear equality row `Σ terms = rhs`, labelled by the source equality
/// polynomial and the localizing monomial it was multiplied with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqRow {
    /// Index into [`MomentProblem::eq_labels`].
    pub source: u32,
    /// Rank of the multiplier monomial.
    pub multiplier_rank: u32,
    pub terms: Vec<(u32, f64)>,
    pub rhs: f64,
}

/// The order-2 moment relaxation as a conic feasibility problem: find `y`
/// with `A y = b` and every PSD block positive semidefinite.
#[derive(Debug, Clone)]
pub struct MomentProblem {
    pub index: MomentIndex,
    pub eq_labels: Vec<String>,
    pub eq_rows: Vec<EqRow>,
    pub psd_blocks: Vec<PsdBlock>,
}

impl MomentProblem {
    pub fn m(&self) -> usize {
        self.index.m()
    }

    /// Largest equality residual of a moment vector.
    pub fn max_eq_residual(&self, y: &[f64]) -> f64 {
        self.eq_rows
            .iter()
            .map(|r| (r.terms.iter().map(|&(j, c)| c * y[j as usize]).sum::<f64>() - r.rhs).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue across all PSD blocks of a moment vector.
    pub fn min_block_eig(&self, y: &[f64]) -> f64 {
        self.psd_blocks
            .iter()
            .map(|b| crate::linalg::min_eig(&b.eval(y)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn row_label(&self, row: &EqRow) -> String {
        let mono = self.index.monomial(row.multiplier_rank as usize);
        if mono.degree() == 0 {
            self.eq_labels[row.source as usize].clone()
        } else {
            format!("{} × m{}", self.eq_labels[row.source as usize], row.multiplier_rank)
        }
    }
}

/// Builds the order-2 moment relaxation of a polynomial system.
///
/// Each equality of degree `d` is multiplied by every monomial of degree
/// ≤ 4−d and becomes zero rows of the linear functional; each inequality
/// becomes one localizing matrix over the degree-1 basis; the moment matrix
/// over the degree-2 basis and the normalization `y[0] = 1` complete the
/// problem. Identical systems produce identical problems.
pub fn relax(sys: &PolySystem) -> Result<MomentProblem> {
    let dim = sys.dim();
    let index = MomentIndex::new(dim);

    for eq in &sys.equalities {
        if eq.poly.degree() > 3 {
            return Err(MomentError::Degree(format!(
                "equality {} has degree {} > 3",
                eq.label,
                eq.poly.degree()
            )));
        }
    }
    for iq in &sys.inequalities {
        if iq.poly.degree() > 2 {
            return Err(MomentError::Degree(format!(
                "inequality {} has degree {} > 2",
                iq.label,
                iq.poly.degree()
            )));
        }
    }

    let mut eq_labels = Vec::with_capacity(sys.equalities.len() + 1);
    let mut eq_rows = Vec::new();

    // normalization y[0] = 1
    eq_labels.push("normalization y0 = 1".to_string());
    eq_rows.push(EqRow { source: 0, multiplier_rank: 0, terms: vec![(0, 1.0)], rhs: 1.0 });

    for eq in &sys.equalities {
        let source = eq_labels.len() as u32;
        eq_labels.push(eq.label.clone());
        let d = eq.poly.degree();
        let budget = MOMENT_DEGREE - d;
        for (mu_rank, mu) in index.monos.iter().enumerate() {
            if mu.degree() > budget {
                break;
            }
            let mut terms: Vec<(u32, f64)> = eq
                .poly
                .terms()
                .map(|(alpha, c)| (index.rank(&alpha.mul(mu)), c))
                .collect();
            terms.sort_by_key(|&(j, _)| j);
            // merge duplicate moment indices
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(terms.len());
            for (j, c) in terms {
                match merged.last_mut() {
                    Some((jl, cl)) if *jl == j => *cl += c,
                    _ => merged.push((j, c)),
                }
            }
            merged.retain(|&(_, c)| c != 0.0);
            eq_rows.push(EqRow {
                source,
                multiplier_rank: mu_rank as u32,
                terms: merged,
                rhs: 0.0,
            });
        }
    }

    let mut psd_blocks = Vec::with_capacity(sys.inequalities.len() + 1);
    // moment matrix over the degree-2 basis
    let n2 = index.n_deg2;
    let mut entries = Vec::with_capacity(n2 * (n2 + 1) / 2);
    for i in 0..n2 {
        for j in 0..=i {
            let prod = index.monos[i].mul(&index.monos[j]);
            entries.push(LinExpr(vec![(index.rank(&prod), 1.0)]));
        }
    }
    psd_blocks.push(PsdBlock { label: "moment matrix".to_string(), side: n2, entries });

    // localizing matrix per inequality over the degree-1 basis
    let n1 = index.n_deg1;
    for iq in &sys.inequalities {
        let mut entries = Vec::with_capacity(n1 * (n1 + 1) / 2);
        for i in 0..n1 {
            for j in 0..=i {
                let base = index.monos[i].mul(&index.monos[j]);
                let mut terms: Vec<(u32, f64)> = iq
                    .poly
                    .terms()
                    .map(|(alpha, c)| (index.rank(&alpha.mul(&base)), c))
                    .collect();
                terms.sort_by_key(|&(j2, _)| j2);
                let mut merged: Vec<(u32, f64)> = Vec::with_capacity(terms.len());
                for (j2, c) in terms {
                    match merged.last_mut() {
                        Some((jl, cl)) if *jl == j2 => *cl += c,
                        _ => merged.push((j2, c)),
                    }
                }
                merged.retain(|&(_, c)| c != 0.0);
                entries.push(LinExpr(merged));
            }
        }
        psd_blocks.push(PsdBlock { label: format!("localizing: {}", iq.label), side: n1, entries });
    }

    Ok(MomentProblem { index, eq_labels, eq_rows, psd_blocks })
}

/// Lifts a point of the original variable space into moment coordinates.
pub fn lift_point(prob: &MomentProblem, x: &[f64]) -> Vec<f64> {
    prob.index.lift_point(x)
}

/// Rank diagnostics of the moment matrix at a moment vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankDiagnostics {
    /// Largest and second-largest eigenvalues of the moment matrix.
    pub lambda1: f64,
    pub lambda2: f64,
    /// `λ₂/λ₁`; near zero indicates an (almost) rank-1 moment matrix.
    pub lambda_ratio: f64,
}

/// Reads the candidate point off the first-order moments and reports how
/// close the moment matrix is to rank one.
pub fn extract_candidate(prob: &MomentProblem, y: &[f64]) -> (Vec<f64>, RankDiagnostics) {
    let dim = prob.index.dim();
    let y0 = y[0];
    let scale = if y0.abs() > 1e-12 { y0 } else { 1.0 };
    // first-order moments sit right after the constant in graded order
    let x: Vec<f64> = (0..dim).map(|i| y[1 + i] / scale).collect();
    let mm = prob.psd_blocks[0].eval(y);
    let (vals, _) = crate::linalg::sym_eig(&mm);
    let n = vals.len();
    let lambda1 = vals[n - 1];
    let lambda2 = if n >= 2 { vals[n - 2] } else { 0.0 };
    let lambda_ratio = if lambda1 > 0.0 { (lambda2 / lambda1).max(0.0) } else { f64::INFINITY };
    (x, RankDiagnostics { lambda1, lambda2, lambda_ratio })
}

// ---------------------------------------------------------------------------
// Sparse conic JSON export
// ---------------------------------------------------------------------------

pub const MOMENT_SCHEMA_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct MomentJson {
    schema_version: String,
    /// Dimension of the underlying variable vector; the moment index is the
    /// graded-lexicographic enumeration of monomials of degree ≤ 4.
    dim: usize,
    m: usize,
    eq_labels: Vec<String>,
    /// Rows as (source, multiplier_rank, [[idx, coef]...], rhs).
    eq_rows: Vec<(u32, u32, Vec<(u32, f64)>, f64)>,
    /// Blocks as (label, side, packed lower-triangle entry lists).
    psd_blocks: Vec<(String, usize, Vec<Vec<(u32, f64)>>)>,
}

pub fn to_json(prob: &MomentProblem) -> String {
    let doc = MomentJson {
        schema_version: MOMENT_SCHEMA_VERSION.to_string(),
        dim: prob.index.dim(),
        m: prob.m(),
        eq_labels: prob.eq_labels.clone(),
        eq_rows: prob
            .eq_rows
            .iter()
            .map(|r| (r.source, r.multiplier_rank, r.terms.clone(), r.rhs))
            .collect(),
        psd_blocks: prob
            .psd_blocks
            .iter()
            .map(|b| (b.label.clone(), b.side, b.entries.iter().map(|e| e.0.clone()).collect()))
            .collect(),
    };
    serde_json::to_string(&doc).expect("moment problem serialization cannot fail")
}

pub fn from_json(text: &str) -> Result<MomentProblem> {
    let doc: MomentJson =
        serde_json::from_str(text).map_err(|e| MomentError::Json(e.to_string()))?;
    if doc.schema_version != MOMENT_SCHEMA_VERSION {
        return Err(MomentError::Json("unsupported schema_version".into()));
    }
    let index = MomentIndex::new(doc.dim);
    if index.m() != doc.m {
        return Err(MomentError::Json("moment vector size mismatch".into()));
    }
    Ok(MomentProblem {
        index,
        eq_labels: doc.eq_labels,
        eq_rows: doc
            .eq_rows
            .into_iter()
            .map(|(source, multiplier_rank, terms, rhs)| EqRow {
                source,
                multiplier_rank,
                terms,
                rhs,
            })
            .collect(),
        psd_blocks: doc
            .psd_blocks
            .into_iter()
            .map(|(label, side, entries)| PsdBlock {
                label,
                side,
                entries: entries.into_iter().map(LinExpr).collect(),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{LabeledPoly, Polynomial};

    fn one_var_system(equalities: Vec<(&str, Vec<(u8, f64)>)>, inequalities: Vec<(&str, Vec<(u8, f64)>)>) -> PolySystem {
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
        PolySystem {
            var_names: vec!["x".to_string()],
            equalities: build(equalities),
            inequalities: build(inequalities),
        }
    }

    #[test]
    fn index_enumerates_in_graded_order() {
        let idx = MomentIndex::new(2);
        assert_eq!(idx.m(), 15); // C(2+4,4)
        assert_eq!(idx.n_deg1, 3);
        assert_eq!(idx.n_deg2, 6);
        assert_eq!(idx.monomial(0).degree(), 0);
        assert_eq!(idx.monomial(1), &Monomial(vec![1, 0]));
        assert_eq!(idx.monomial(2), &Monomial(vec![0, 1]));
        assert_eq!(idx.monomial(3), &Monomial(vec![2, 0]));
    }

    #[test]
    fn lift_at_origin_is_indicator_of_constant() {
        let idx = MomentIndex::new(3);
        let y = idx.lift_point(&[0.0, 0.0, 0.0]);
        assert_eq!(y[0], 1.0);
        assert!(y[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lift_has_product_structure() {
        let idx = MomentIndex::new(2);
        let x = [0.7, -1.3];
        let y = idx.lift_point(&x);
        let r = |e: Vec<u8>| y[idx.rank(&Monomial(e)) as usize];
        assert!((r(vec![1, 1]) - r(vec![1, 0]) * r(vec![0, 1])).abs() < 1e-15);
        assert!((r(vec![2, 2]) - r(vec![2, 0]) * r(vec![0, 2])).abs() < 1e-12);
    }

    #[test]
    fn one_var_square_system_relaxes_as_expected() {
        // {x² = 1, x ≥ 0}: moment matrix 3×3 over (1, x, x²); x = 1 lifts to
        // a feasible moment vector.
        let sys = one_var_system(
            vec![("xx", vec![(2, 1.0), (0, -1.0)])],
            vec![("xpos", vec![(1, 1.0)])],
        );
        let prob = relax(&sys).unwrap();
        assert_eq!(prob.m(), 5);
        assert_eq!(prob.psd_blocks[0].side, 3);
        assert_eq!(prob.psd_blocks.len(), 2);
        let y = lift_point(&prob, &[1.0]);
        assert!(prob.max_eq_residual(&y) <= 1e-12);
        assert!(prob.min_block_eig(&y) >= -1e-12);
    }

    #[test]
    fn impossible_square_forces_negative_moment() {
        // {x² = −1}: the localized rows force y[x²] = −1, contradicting the
        // moment matrix diagonal.
        let sys = one_var_system(vec![("xx", vec![(2, 1.0), (0, 1.0)])], vec![]);
        let prob = relax(&sys).unwrap();
        // find the row localized by the constant monomial
        let row = prob
            .eq_rows
            .iter()
            .find(|r| r.source == 1 && r.multiplier_rank == 0)
            .unwrap();
        // y[x²] + y[1] = 0
        assert_eq!(row.terms.len(), 2);
        // any y satisfying rows + y0 = 1 has M[1,1] = y[x²] = −1
        let mut y = vec![0.0; prob.m()];
        y[0] = 1.0;
        y[2] = -1.0; // x² has rank 2 in 1 variable: (1, x, x², x³, x⁴)
        y[4] = 1.0; // x⁴ = −x² · −1
        assert!(prob.max_eq_residual(&y) <= 1e-12);
        let mm = prob.psd_blocks[0].eval(&y);
        assert!(crate::linalg::min_eig(&mm) < -0.5);
    }

    #[test]
    fn degree_overflow_is_an_error() {
        let sys = one_var_system(vec![("x4", vec![(4, 1.0)])], vec![]);
        assert!(matches!(relax(&sys), Err(MomentError::Degree(_))));
    }

    #[test]
    fn relax_is_deterministic() {
        let net = crate::netmodel::case3();
        let lims = crate::acpf::OperationalLimits::with_overrides(
            &net,
            1.0,
            &crate::acpf::LimitOverrides {
                slack_p: Some((-3.0, 3.0)),
                slack_q: Some((-3.0, 3.0)),
                ..Default::default()
            },
        );
        let sys = crate::poly::build_jacobian_system(&net, &lims);
        let p1 = relax(&sys).unwrap();
        let p2 = relax(&sys).unwrap();
        assert_eq!(p1.eq_rows, p2.eq_rows);
        assert_eq!(p1.psd_blocks, p2.psd_blocks);
        assert_eq!(p1.eq_labels, p2.eq_labels);
    }

    #[test]
    fn extract_candidate_returns_lifted_point_exactly() {
        let sys = one_var_system(vec![("xx", vec![(2, 1.0), (0, -1.0)])], vec![]);
        let prob = relax(&sys).unwrap();
        let y = lift_point(&prob, &[1.0]);
        let (x, diag) = extract_candidate(&prob, &y);
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!(diag.lambda_ratio < 1e-12);
    }

    #[test]
    fn rank_two_mixture_is_flagged() {
        let idx = MomentIndex::new(1);
        let y1 = idx.lift_point(&[1.0]);
        let y2 = idx.lift_point(&[-1.0]);
        let y: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| 0.5 * (a + b)).collect();
        let sys = one_var_system(vec![("xx", vec![(2, 1.0), (0, -1.0)])], vec![]);
        let prob = relax(&sys).unwrap();
        let (_, diag) = extract_candidate(&prob, &y);
        // moment matrix is diag-block [[1,1],[1,1]] ⊕ [1]: eigenvalues 2, 1, 0
        assert!(diag.lambda_ratio >= 0.4, "mixture of two lifts has rank 2");
    }

    #[test]
    fn moment_json_roundtrip() {
        let sys = one_var_system(
            vec![("xx", vec![(2, 1.0), (0, -1.0)])],
            vec![("xpos", vec![(1, 1.0)])],
        );
        let prob = relax(&sys).unwrap();
        let json = to_json(&prob);
        let back = from_json(&json).unwrap();
        assert_eq!(prob.eq_rows, back.eq_rows);
        assert_eq!(prob.psd_blocks, back.psd_blocks);
    }

    #[test]
    fn moment_matrix_of_lift_is_rank_one_psd() {
        let net = crate::netmodel::case3();
        let lims = crate::acpf::OperationalLimits::from_network(&net, 1.0);
        let sys = crate::poly::build_jacobian_system(&net, &lims);
        let prob = relax(&sys).unwrap();
        let dim = sys.dim();
        let x: Vec<f64> = (0..dim).map(|i| 0.3 * ((i as f64) * 0.7).sin()).collect();
        let y = lift_point(&prob, &x);
        let mm = prob.psd_blocks[0].eval(&y);
        let (vals, _) = crate::linalg::sym_eig(&mm);
        let n = vals.len();
        assert!(vals[0] >= -1e-9, "PSD");
        assert!(vals[n - 2] <= 1e-9 * vals[n - 1].max(1.0), "rank one");
    }
}
