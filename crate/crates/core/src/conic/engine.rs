//! Dual-track operator-splitting engine for affine ∩ PSD-product feasibility.
//!
//! Both the primal question (is there a moment vector satisfying all
//! constraints?) and the certificate question (is there a Farkas-type dual
//! ray proving there is none?) are instances of the same geometric problem:
//! find a point in the intersection of an affine subspace `{E w = d}` with a
//! product of PSD cones and a free block. The engine runs Douglas–Rachford
//! splitting between the two projections, with safeguarded Anderson
//! acceleration on the fixed-point map, and hands back the cone-exact
//! iterate once its affine residual passes tolerance. On the side whose
//! problem is infeasible the iteration diverges; stall detection lets the
//! driver shift budget to the other side.

use crate::linalg::{pcg, psd_project, smat, svec, Csr};

/// One affine ∩ cone feasibility instance in product space.
pub(crate) struct Instance {
    pub nvar: usize,
    /// `(offset, side)` of each svec-packed PSD segment; coordinates outside
    /// every segment are free.
    pub blocks: Vec<(usize, usize)>,
    pub e: Csr,
    pub et: Csr,
    pub d: Vec<f64>,
    /// Jacobi diagonal of `E Eᵀ`.
    diag: Vec<f64>,
}

impl Instance {
    pub(crate) fn new(
        nvar: usize,
        blocks: Vec<(usize, usize)>,
        mut rows: Vec<Vec<(usize, f64)>>,
        mut d: Vec<f64>,
    ) -> Self {
        // Row equilibration to unit ∞-norm; pure row scaling leaves the
        // affine set unchanged.
        for (r, row) in rows.iter_mut().enumerate() {
            let s = row.iter().map(|&(_, c)| c.abs()).fold(0.0, f64::max);
            if s > 0.0 {
                for t in row.iter_mut() {
                    t.1 /= s;
                }
                d[r] /= s;
            }
        }
        let e = Csr::from_rows(rows.len(), nvar, &rows);
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nvar];
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                cols[c].push((r, v));
            }
        }
        let et = Csr::from_rows(nvar, rows.len(), &cols);
        let diag = rows
            .iter()
            .map(|row| row.iter().map(|&(_, c)| c * c).sum::<f64>().max(1e-12))
            .collect();
        Instance { nvar, blocks, e, et, d, diag }
    }

    /// Euclidean projection onto `{E w = d}` via CG on the normal equations,
    /// warm-started on the multiplier estimate.
    fn project_affine(&self, w: &mut [f64], u: &mut [f64], scratch: &mut Scratch) {
        let p = self.e.nrows;
        if p == 0 {
            return;
        }
        let r = &mut scratch.row_buf;
        self.e.mul(w, r);
        for i in 0..p {
            r[i] -= self.d[i];
        }
        let tmp = std::cell::RefCell::new(vec![0.0; self.nvar]);
        let apply = |v: &[f64], out: &mut [f64]| {
            let mut t = tmp.borrow_mut();
            self.et.mul(v, &mut t);
            self.e.mul(&t, out);
        };
        pcg(apply, &self.diag, r, u, 1e-10, 300);
        // w -= Eᵀ u
        let var = &mut scratch.var_buf;
        self.et.mul(u, var);
        for i in 0..self.nvar {
            w[i] -= var[i];
        }
    }

    /// Projection onto the cone product; free coordinates pass through.
    fn project_cone(&self, w: &[f64], out: &mut [f64]) {
        out.copy_from_slice(w);
        for &(off, side) in &self.blocks {
            let len = side * (side + 1) / 2;
            let mat = smat(&w[off..off + len], side);
            let (proj, _) = psd_project(&mat);
            let sv = svec(&proj);
            out[off..off + len].copy_from_slice(&sv);
        }
    }

    /// ∞-norm affine residual of a point.
    pub(crate) fn residual_inf(&self, w: &[f64], scratch: &mut Scratch) -> f64 {
        let r = &mut scratch.row_buf;
        self.e.mul(w, r);
        let mut m = 0.0f64;
        for i in 0..self.e.nrows {
            m = m.max((r[i] - self.d[i]).abs());
        }
        m
    }
}

pub(crate) struct Scratch {
    row_buf: Vec<f64>,
    var_buf: Vec<f64>,
}

const AA_MEMORY: usize = 8;

/// Iteration state of one instance, including the Anderson history.
pub(crate) struct DrState {
    pub w: Vec<f64>,
    u_warm: Vec<f64>,
    hist_w: Vec<Vec<f64>>,
    hist_g: Vec<Vec<f64>>,
    pub best_res: f64,
    iters_since_best: usize,
    pub total_iters: usize,
    scratch: Scratch,
    /// Cone-exact point of the best iterate seen.
    pub best_point: Vec<f64>,
}

impl DrState {
    pub(crate) fn new(inst: &Instance, warm: Option<Vec<f64>>) -> Self {
        let w = match warm {
            Some(w) if w.len() == inst.nvar => w,
            _ => vec![0.0; inst.nvar],
        };
        DrState {
            best_point: w.clone(),
            w,
            u_warm: vec![0.0; inst.e.nrows],
            hist_w: Vec::new(),
            hist_g: Vec::new(),
            best_res: f64::INFINITY,
            iters_since_best: 0,
            total_iters: 0,
            scratch: Scratch { row_buf: vec![0.0; inst.e.nrows], var_buf: vec![0.0; inst.nvar] },
        }
    }

    /// True when the residual has not improved for a long stretch.
    pub(crate) fn stalled(&self, window: usize) -> bool {
        self.iters_since_best > window
    }

    /// Runs up to `iters` Douglas–Rachford steps; returns early with the
    /// cone-exact point when its affine residual reaches `tol`.
    pub(crate) fn run(&mut self, inst: &Instance, iters: usize, tol: f64) -> Option<Vec<f64>> {
        let n = inst.nvar;
        let mut s = vec![0.0; n];
        let mut refl = vec![0.0; n];
        for _ in 0..iters {
            self.total_iters += 1;
            // s = P_K(w)
            inst.project_cone(&self.w, &mut s);
            let res = inst.residual_inf(&s, &mut self.scratch);
            if res < self.best_res {
                self.best_res = res;
                self.best_point.copy_from_slice(&s);
                self.iters_since_best = 0;
            } else {
                self.iters_since_best += 1;
            }
            if res <= tol {
                return Some(s);
            }
            // g(w) = w + P_A(2s − w) − s
            for i in 0..n {
                refl[i] = 2.0 * s[i] - self.w[i];
            }
            inst.project_affine(&mut refl, &mut self.u_warm, &mut self.scratch);
            let mut g = vec![0.0; n];
            for i in 0..n {
                g[i] = self.w[i] + refl[i] - s[i];
            }
            self.anderson_step(g);
        }
        None
    }

    fn anderson_step(&mut self, g: Vec<f64>) {
        let n = g.len();
        let f_norm = {
            let mut acc = 0.0;
            for i in 0..n {
                let d = g[i] - self.w[i];
                acc += d * d;
            }
            acc.sqrt()
        };
        let hist_min = self
            .hist_w
            .iter()
            .zip(&self.hist_g)
            .map(|(w, gg)| {
                let mut acc = 0.0;
                for i in 0..n {
                    let d = gg[i] - w[i];
                    acc += d * d;
                }
                acc.sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        if f_norm > 2.0 * hist_min {
            // acceleration went sour; restart from the plain step
            self.hist_w.clear();
            self.hist_g.clear();
            self.w = g;
            return;
        }
        self.hist_w.push(self.w.clone());
        self.hist_g.push(g);
        if self.hist_w.len() > AA_MEMORY {
            self.hist_w.remove(0);
            self.hist_g.remove(0);
        }
        let m = self.hist_w.len();
        if m == 1 {
            self.w = self.hist_g[0].clone();
            return;
        }
        // residuals f_i = g_i − w_i; minimize ‖f_last − D β‖ with
        // D columns f_last − f_i
        let last = m - 1;
        let f = |i: usize, j: usize| self.hist_g[i][j] - self.hist_w[i][j];
        let cols = last;
        let mut dtd = vec![0.0; cols * cols];
        let mut dtf = vec![0.0; cols];
        for a in 0..cols {
            for b in a..cols {
                let mut acc = 0.0;
                for j in 0..n {
                    let da = f(last, j) - f(a, j);
                    let db = f(last, j) - f(b, j);
                    acc += da * db;
                }
                dtd[a * cols + b] = acc;
                dtd[b * cols + a] = acc;
            }
            let mut acc = 0.0;
            for j in 0..n {
                acc += (f(last, j) - f(a, j)) * f(last, j);
            }
            dtf[a] = acc;
        }
        let ridge = 1e-10 * (0..cols).map(|a| dtd[a * cols + a]).fold(0.0, f64::max).max(1e-30);
        for a in 0..cols {
            dtd[a * cols + a] += ridge;
        }
        let beta = match solve_dense(&mut dtd, &mut dtf, cols) {
            Some(b) => b,
            None => {
                self.w = self.hist_g[last].clone();
                return;
            }
        };
        let mut w_next = self.hist_g[last].clone();
        for (a, &ba) in beta.iter().enumerate() {
            if ba != 0.0 {
                for j in 0..n {
                    w_next[j] -= ba * (self.hist_g[last][j] - self.hist_g[a][j]);
                }
            }
        }
        self.w = w_next;
    }
}

/// In-place Gaussian elimination with partial pivoting for the tiny Anderson
/// normal systems.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in (col + 1)..n {
            let fac = a[r * n + col] / d;
            if fac != 0.0 {
                for c in col..n {
                    a[r * n + c] -= fac * a[col * n + c];
                }
                b[r] -= fac * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in (r + 1)..n {
            acc -= a[r * n + c] * x[c];
        }
        x[r] = acc / a[r * n + r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Intersect {x : x0 + x1 = 2} with PSD 1×1 cones on both coordinates.
    #[test]
    fn finds_point_in_simple_intersection() {
        let inst = Instance::new(
            2,
            vec![(0, 1), (1, 1)],
            vec![vec![(0, 1.0), (1, 1.0)]],
            vec![2.0],
        );
        let mut st = DrState::new(&inst, None);
        let s = st.run(&inst, 200, 1e-10).expect("feasible");
        assert!(s[0] >= -1e-12 && s[1] >= -1e-12);
        assert!((s[0] + s[1] - 2.0).abs() <= 1e-9);
    }

    /// {x ⪰ 0 (1×1), x = −1} is infeasible; the iteration must stall, not
    /// return a point.
    #[test]
    fn infeasible_instance_never_verifies() {
        let inst = Instance::new(1, vec![(0, 1)], vec![vec![(0, 1.0)]], vec![-1.0]);
        let mut st = DrState::new(&inst, None);
        assert!(st.run(&inst, 500, 1e-9).is_none());
        assert!(st.best_res > 0.4);
    }

    /// 2×2 PSD block with pinned entries: find [[1, t],[t, 1]] ⪰ 0 with
    /// t = 0.5 — the projection pair must reproduce it.
    #[test]
    fn psd_block_with_affine_pins() {
        // w = svec([[a, t],[t, c]]), rows: a = 1, c = 1, t·√2 = 0.5·√2
        let s2 = std::f64::consts::SQRT_2;
        let inst = Instance::new(
            3,
            vec![(0, 2)],
            vec![vec![(0, 1.0)], vec![(2, 1.0)], vec![(1, 1.0)]],
            vec![1.0, 1.0, 0.5 * s2],
        );
        let mut st = DrState::new(&inst, None);
        let s = st.run(&inst, 300, 1e-10).expect("feasible");
        let m = smat(&s, 2);
        assert!((m[(0, 0)] - 1.0).abs() < 1e-8);
        assert!((m[(0, 1)] - 0.5).abs() < 1e-8);
        assert!(crate::linalg::min_eig(&m) >= -1e-12);
    }
}
