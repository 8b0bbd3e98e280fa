//! Substitution presolve for moment feasibility problems.
//!
//! Singleton rows fix a moment to a constant; doubleton rows tie one moment
//! affinely to another. Closing over these substitutions shrinks both the
//! variable count and the PSD blocks (rows that become identically zero or
//! proportional to another row are dropped). Every reduction is exactly
//! invertible: feasible points map back through the substitution closure and
//! infeasibility certificates lift by a least-squares completion over the
//! eliminated rows.

use std::collections::HashMap;

use crate::linalg::pcg;
use crate::moment::MomentProblem;

const ZERO_TOL: f64 = 1e-11;

/// Affine union-find: `y_i = scale_i · y_{parent_i} + offset_i`.
/// A `scale` of zero marks a constant.
#[derive(Debug, Clone)]
pub(crate) struct Subst {
    parent: Vec<u32>,
    scale: Vec<f64>,
    offset: Vec<f64>,
}

impl Subst {
    fn identity(m: usize) -> Self {
        Subst {
            parent: (0..m as u32).collect(),
            scale: vec![1.0; m],
            offset: vec![0.0; m],
        }
    }

    /// Resolves variable `i` to `(root, a, c)` with `y_i = a·y_root + c`.
    pub(crate) fn resolve(&mut self, i: u32) -> (u32, f64, f64) {
        let p = self.parent[i as usize];
        if p == i || self.scale[i as usize] == 0.0 {
            return (i, self.scale[i as usize], self.offset[i as usize]);
        }
        let (r, a2, c2) = self.resolve(p);
        let a = self.scale[i as usize];
        let c = self.offset[i as usize];
        let (na, nc) = (a * a2, a * c2 + c);
        self.parent[i as usize] = r;
        self.scale[i as usize] = na;
        self.offset[i as usize] = nc;
        (if na == 0.0 { i } else { r }, na, nc)
    }

    fn is_root(&mut self, i: u32) -> bool {
        let (r, a, _) = self.resolve(i);
        a != 0.0 && r == i
    }

    fn set_constant(&mut self, i: u32, value: f64) -> bool {
        let (r, a, c) = self.resolve(i);
        if a == 0.0 {
            return (c - value).abs() <= ZERO_TOL * (1.0 + value.abs());
        }
        // y_i = a y_r + c = value  =>  y_r = (value − c)/a
        self.parent[r as usize] = r;
        self.scale[r as usize] = 0.0;
        self.offset[r as usize] = (value - c) / a;
        true
    }

    /// Imposes `ca·y_a + cb·y_b = rhs`; returns false on contradiction.
    fn relate(&mut self, a_var: u32, ca: f64, b_var: u32, cb: f64, rhs: f64) -> bool {
        let (ra, aa, ca0) = self.resolve(a_var);
        let (rb, ab, cb0) = self.resolve(b_var);
        // ca(aa y_ra + ca0) + cb(ab y_rb + cb0) = rhs
        let alpha = ca * aa;
        let beta = cb * ab;
        let c = rhs - ca * ca0 - cb * cb0;
        match (alpha != 0.0, beta != 0.0) {
            (false, false) => c.abs() <= ZERO_TOL * (1.0 + rhs.abs()),
            (true, false) => self.set_constant(ra, c / alpha),
            (false, true) => self.set_constant(rb, c / beta),
            (true, true) => {
                if ra == rb {
                    let coef = alpha + beta;
                    if coef.abs() <= ZERO_TOL {
                        return c.abs() <= ZERO_TOL * (1.0 + rhs.abs());
                    }
                    return self.set_constant(ra, c / coef);
                }
                // eliminate the higher-index root to keep low moments as roots
                let (elim, keep, ce, ck) =
                    if ra > rb { (ra, rb, alpha, beta) } else { (rb, ra, beta, alpha) };
                // ce·y_elim + ck·y_keep = c
                self.parent[elim as usize] = keep;
                self.scale[elim as usize] = -ck / ce;
                self.offset[elim as usize] = c / ce;
                true
            }
        }
    }
}

/// An affine functional over the reduced variables.
#[derive(Debug, Clone, Default)]
pub(crate) struct AffExpr {
    pub terms: Vec<(u32, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub(crate) fn is_zero(&self, tol: f64) -> bool {
        self.terms.is_empty() && self.constant.abs() <= tol
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RedRow {
    /// Index into the original `eq_rows`.
    pub origin: usize,
    pub terms: Vec<(u32, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct RedBlock {
    pub orig_block: usize,
    /// Original block-row indices kept, in order.
    pub kept: Vec<u32>,
    pub side: usize,
    /// Packed lower triangle over the kept rows.
    pub entries: Vec<AffExpr>,
}

#[derive(Debug)]
pub(crate) struct Reduced {
    pub m_red: usize,
    pub rows: Vec<RedRow>,
    pub blocks: Vec<RedBlock>,
    /// Original row indices consumed by substitutions.
    pub elim_rows: Vec<usize>,
    subst: Subst,
    var_to_red: Vec<i64>,
    /// Set when the linear rows alone are contradictory; holds the original
    /// index of a violated row.
    pub linear_contradiction: Option<usize>,
}

impl Reduced {
    /// Rewrites one original-variable linear term over the reduced space.
    fn push_term(&mut self, out: &mut AffExpr, var: u32, coef: f64) {
        let (r, a, c) = self.subst.resolve(var);
        if a == 0.0 {
            out.constant += coef * c;
        } else {
            out.constant += coef * c;
            let red = self.var_to_red[r as usize];
            debug_assert!(red >= 0);
            out.terms.push((red as u32, coef * a));
        }
    }

    /// Maps a reduced point back to the full moment vector.
    pub(crate) fn lift_point(&self, y_red: &[f64]) -> Vec<f64> {
        let m = self.var_to_red.len();
        let mut subst = self.subst.clone();
        let mut y = vec![0.0; m];
        for i in 0..m as u32 {
            let (r, a, c) = subst.resolve(i);
            y[i as usize] = if a == 0.0 {
                c
            } else {
                let red = self.var_to_red[r as usize];
                a * y_red[red as usize] + c
            };
        }
        y
    }
}

fn merge_terms(terms: &mut Vec<(u32, f64)>) {
    terms.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(terms.len());
    for &(j, c) in terms.iter() {
        match out.last_mut() {
            Some((jl, cl)) if *jl == j => *cl += c,
            _ => out.push((j, c)),
        }
    }
    out.retain(|&(_, c)| c.abs() > 0.0);
    *terms = out;
}

/// Runs the substitution closure and block reduction on a moment problem.
pub(crate) fn presolve(prob: &MomentProblem) -> Reduced {
    let m = prob.m();
    let mut subst = Subst::identity(m);
    let mut consumed = vec![false; prob.eq_rows.len()];
    let mut elim_rows = Vec::new();
    let mut contradiction = None;

    // Substitution fixpoint over singleton/doubleton rows.
    loop {
        let mut changed = false;
        for (ri, row) in prob.eq_rows.iter().enumerate() {
            if consumed[ri] || contradiction.is_some() {
                continue;
            }
            // rewrite over current roots
            let mut terms: Vec<(u32, f64)> = Vec::with_capacity(row.terms.len());
            let mut rhs = row.rhs;
            for &(j, c) in &row.terms {
                let (r, a, cc) = subst.resolve(j);
                rhs -= c * cc;
                if a != 0.0 {
                    terms.push((r, c * a));
                }
            }
            merge_terms(&mut terms);
            let scale = terms
                .iter()
                .map(|&(_, c)| c.abs())
                .fold(row.terms.iter().map(|&(_, c)| c.abs()).fold(1.0, f64::max), f64::max);
            terms.retain(|&(_, c)| c.abs() > ZERO_TOL * scale);
            match terms.len() {
                0 => {
                    if rhs.abs() > 1e-9 * scale.max(1.0) {
                        contradiction = Some(ri);
                    } else {
                        consumed[ri] = true;
                        elim_rows.push(ri);
                        changed = true;
                    }
                }
                1 => {
                    let (j, c) = terms[0];
                    if !subst.set_constant(j, rhs / c) {
                        contradiction = Some(ri);
                    } else {
                        consumed[ri] = true;
                        elim_rows.push(ri);
                        changed = true;
                    }
                }
                2 => {
                    let (j1, c1) = terms[0];
                    let (j2, c2) = terms[1];
                    if !subst.relate(j1, c1, j2, c2, rhs) {
                        contradiction = Some(ri);
                    } else {
                        consumed[ri] = true;
                        elim_rows.push(ri);
                        changed = true;
                    }
                }
                _ => {}
            }
        }
        if !changed || contradiction.is_some() {
            break;
        }
    }

    // Index the surviving roots.
    let mut var_to_red = vec![-1i64; m];
    let mut red_to_var = Vec::new();
    for i in 0..m as u32 {
        if subst.is_root(i) {
            var_to_red[i as usize] = red_to_var.len() as i64;
            red_to_var.push(i);
        }
    }

    let mut red = Reduced {
        m_red: red_to_var.len(),
        rows: Vec::new(),
        blocks: Vec::new(),
        elim_rows,
        subst,
        var_to_red,
        linear_contradiction: contradiction,
    };
    if contradiction.is_some() {
        return red;
    }

    // Surviving rows, rewritten; drop duplicates (proportional rows).
    let mut seen: HashMap<Vec<(u32, u64)>, usize> = HashMap::new();
    for (ri, row) in prob.eq_rows.iter().enumerate() {
        if consumed[ri] {
            continue;
        }
        let mut expr = AffExpr::default();
        for &(j, c) in &row.terms {
            red.push_term(&mut expr, j, c);
        }
        merge_terms(&mut expr.terms);
        let rhs = row.rhs - expr.constant;
        let scale = expr.terms.iter().map(|&(_, c)| c.abs()).fold(0.0, f64::max);
        if expr.terms.is_empty() {
            if rhs.abs() > 1e-9 {
                red.linear_contradiction = Some(ri);
                return red;
            }
            continue;
        }
        // proportionality signature: terms normalized by the lead coefficient
        let lead = expr.terms[0].1;
        let sig: Vec<(u32, u64)> = std::iter::once((u32::MAX, (rhs / lead).to_bits()))
            .chain(expr.terms.iter().map(|&(j, c)| (j, quantize(c / lead))))
            .collect();
        if seen.insert(sig, ri).is_some() {
            continue; // duplicate of an earlier surviving row
        }
        let mut terms = expr.terms;
        terms.retain(|&(_, c)| c.abs() > ZERO_TOL * scale);
        red.rows.push(RedRow { origin: ri, terms, rhs });
    }

    // Blocks: rewrite entries, drop zero rows and proportional duplicates.
    for (bi, block) in prob.psd_blocks.iter().enumerate() {
        let side = block.side;
        let mut entries: Vec<AffExpr> = Vec::with_capacity(side * (side + 1) / 2);
        for i in 0..side {
            for j in 0..=i {
                let le = block.entry(i, j);
                let mut expr = AffExpr::default();
                for &(v, c) in &le.0 {
                    red.push_term(&mut expr, v, c);
                }
                merge_terms(&mut expr.terms);
                entries.push(expr);
            }
        }
        let at = |i: usize, j: usize| -> &AffExpr {
            let (i, j) = if i >= j { (i, j) } else { (j, i) };
            &entries[i * (i + 1) / 2 + j]
        };
        // row signatures for zero/proportional detection
        let mut kept: Vec<u32> = Vec::new();
        let mut sig_map: HashMap<Vec<(u32, u32, u64)>, u32> = HashMap::new();
        for i in 0..side {
            let mut row_entries: Vec<(usize, &AffExpr)> = Vec::new();
            let mut lead = 0.0f64;
            for j in 0..side {
                let e = at(i, j);
                if !e.is_zero(ZERO_TOL) {
                    if lead == 0.0 {
                        lead = if e.terms.is_empty() { e.constant } else { e.terms[0].1 };
                    }
                    row_entries.push((j, e));
                }
            }
            if row_entries.is_empty() {
                continue; // identically zero row/column
            }
            let mut sig: Vec<(u32, u32, u64)> = Vec::new();
            for (j, e) in &row_entries {
                sig.push((*j as u32, u32::MAX, quantize(e.constant / lead)));
                for &(v, c) in &e.terms {
                    sig.push((*j as u32, v, quantize(c / lead)));
                }
            }
            if let Some(&_first) = sig_map.get(&sig) {
                continue; // proportional to a kept row
            }
            sig_map.insert(sig, i as u32);
            kept.push(i as u32);
        }
        if kept.is_empty() {
            continue;
        }
        let mut red_entries = Vec::with_capacity(kept.len() * (kept.len() + 1) / 2);
        for (pi, &i) in kept.iter().enumerate() {
            for &j in kept.iter().take(pi + 1) {
                red_entries.push(at(i as usize, j as usize).clone());
            }
        }
        red.blocks.push(RedBlock {
            orig_block: bi,
            side: kept.len(),
            kept,
            entries: red_entries,
        });
    }

    red
}

fn quantize(x: f64) -> u64 {
    // bucket coefficients to 1e-12 relative so exact-by-construction
    // proportionality survives float noise
    let scaled = (x * 1e12).round();
    scaled.to_bits()
}

/// Completes a certificate over the reduced problem into one over the
/// original problem: surviving multipliers keep their rows, eliminated rows
/// get multipliers from a least-squares cancellation of the residual.
///
/// Returns `(mu, gap, residual_inf)` over the original rows given the
/// residual functional `res` (length m) and gap already accumulated from the
/// surviving rows and block multipliers.
pub(crate) fn complete_multipliers(
    prob: &MomentProblem,
    elim_rows: &[usize],
    mut mu: Vec<f64>,
    mut res: Vec<f64>,
) -> (Vec<f64>, f64) {
    if !elim_rows.is_empty() {
        // Solve min_ν ‖res + A_elimᵀ ν‖₂ with PCG on the normal equations.
        let ne = elim_rows.len();
        let mut diag = vec![0.0; ne];
        for (t, &ri) in elim_rows.iter().enumerate() {
            let row = &prob.eq_rows[ri];
            diag[t] = row.terms.iter().map(|&(_, c)| c * c).sum::<f64>().max(1e-30);
        }
        let apply = |v: &[f64], out: &mut [f64]| {
            // out = A_elim (A_elimᵀ v)
            let m = prob.m();
            let mut tmp = vec![0.0; m];
            for (t, &ri) in elim_rows.iter().enumerate() {
                let vt = v[t];
                if vt != 0.0 {
                    for &(j, c) in &prob.eq_rows[ri].terms {
                        tmp[j as usize] += c * vt;
                    }
                }
            }
            for (t, &ri) in elim_rows.iter().enumerate() {
                out[t] =
                    prob.eq_rows[ri].terms.iter().map(|&(j, c)| c * tmp[j as usize]).sum::<f64>();
            }
        };
        let mut rhs = vec![0.0; ne];
        for (t, &ri) in elim_rows.iter().enumerate() {
            rhs[t] =
                -prob.eq_rows[ri].terms.iter().map(|&(j, c)| c * res[j as usize]).sum::<f64>();
        }
        let mut nu = vec![0.0; ne];
        // two rounds of iterative refinement
        for _ in 0..2 {
            let mut delta = vec![0.0; ne];
            pcg(&apply, &diag, &rhs, &mut delta, 1e-13, 400);
            for t in 0..ne {
                nu[t] += delta[t];
            }
            for (t, &ri) in elim_rows.iter().enumerate() {
                if delta[t] != 0.0 {
                    for &(j, c) in &prob.eq_rows[ri].terms {
                        res[j as usize] += c * delta[t];
                    }
                }
            }
            for (t, &ri) in elim_rows.iter().enumerate() {
                rhs[t] = -prob.eq_rows[ri]
                    .terms
                    .iter()
                    .map(|&(j, c)| c * res[j as usize])
                    .sum::<f64>();
            }
        }
        for (t, &ri) in elim_rows.iter().enumerate() {
            mu[ri] += nu[t];
        }
    }
    let gap: f64 = mu
        .iter()
        .zip(&prob.eq_rows)
        .map(|(m, r)| m * r.rhs)
        .sum();
    (mu, gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::{relax, EqRow};
    use crate::poly::{LabeledPoly, Monomial, Polynomial, PolySystem};

    fn toy_system() -> PolySystem {
        // variables (x, y); equalities: x = 0.5 (linear), x y = t style chains
        let mut lin = Polynomial::var(2, 0);
        lin.add_term(Monomial::one(2), -0.5);
        let mut quad = Polynomial::zero(2);
        quad.add_term(Monomial(vec![1, 1]), 1.0);
        quad.add_term(Monomial(vec![0, 1]), -2.0);
        PolySystem {
            var_names: vec!["x".into(), "y".into()],
            equalities: vec![
                LabeledPoly { label: "x_fix".into(), poly: lin },
                LabeledPoly { label: "xy".into(), poly: quad },
            ],
            inequalities: vec![LabeledPoly {
                label: "ypos".into(),
                poly: Polynomial::var(2, 1),
            }],
        }
    }

    #[test]
    fn presolve_eliminates_fixed_variable_chains() {
        let prob = relax(&toy_system()).unwrap();
        let red = presolve(&prob);
        assert!(red.linear_contradiction.is_none());
        // x is pinned to 0.5 and xy = 2y combined with the x-chains forces
        // every y-moment of degree ≤ 3 to zero; only the y⁴ moment (touched
        // by no localized row) survives as a variable.
        assert_eq!(red.m_red, 1);
        let y_red = vec![0.0; red.m_red];
        let y = red.lift_point(&y_red);
        assert_eq!(y[0], 1.0, "constant moment");
        assert!(prob.max_eq_residual(&y) < 1e-9);
    }

    #[test]
    fn presolve_detects_linear_contradiction() {
        // {y0 = 1 normalization} plus a row forcing y0 = 2
        let sys = PolySystem {
            var_names: vec!["x".into()],
            equalities: vec![LabeledPoly {
                label: "bad".into(),
                poly: Polynomial::constant(1, 1.0),
            }],
            inequalities: vec![],
        };
        // constant equality 1 = 0 is contradictory
        let prob = relax(&sys).unwrap();
        let red = presolve(&prob);
        assert!(red.linear_contradiction.is_some());
    }

    #[test]
    fn lift_point_respects_substitutions() {
        let prob = relax(&toy_system()).unwrap();
        let red = presolve(&prob);
        let y_red: Vec<f64> = (0..red.m_red).map(|i| 0.1 * (i as f64 + 1.0)).collect();
        let y = red.lift_point(&y_red);
        // every eliminated singleton/doubleton row must hold exactly
        for &ri in &red.elim_rows {
            let row: &EqRow = &prob.eq_rows[ri];
            let v: f64 = row.terms.iter().map(|&(j, c)| c * y[j as usize]).sum();
            assert!((v - row.rhs).abs() < 1e-9, "row {ri}");
        }
    }
}
