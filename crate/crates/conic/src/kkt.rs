//! Reduced KKT system of the interior-point iteration.
//!
//! Solves
//!
//! ```text
//! [ 0  A'  G'   ] [dx]   [r1]
//! [ A  0   0    ] [dy] = [r2]
//! [ G  0  -W'W  ] [dz]   [r3]
//! ```
//!
//! Programs without PSD blocks factor the full symmetric indefinite system
//! with a pivoted LBL' decomposition. Otherwise `dz` is eliminated, `H = G'
//! (W'W)^{-1} G` is formed densely, and `[H A'; A 0]` is factored (Cholesky
//! of `H` alone when there are no equality rows). A small static regularization keeps the factorizations well
//! defined; iterative refinement against the unregularized system removes
//! its effect.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, MatMut, Par, Side};

use crate::cone::{svec_index, Kind, Scaling};
use crate::program::CscMatrix;

/// Column structure of one cone block, fixed for the whole solve.
#[derive(Debug, Clone)]
pub(crate) enum BlockPattern {
    /// Sparse rows of the block.
    Rows(Vec<Vec<(usize, f64)>>),
    /// Dense `dim x cols.len()` slice of `G` restricted to touched columns.
    Dense { cols: Vec<usize>, block: Mat<f64> },
    /// For every touched column, its sparse entries inside the svec block.
    PsdCols(Vec<(usize, Vec<(usize, f64)>)>),
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub kind: Kind,
    pub offset: usize,
    pub dim: usize,
    pub pattern: BlockPattern,
}

impl Block {
    pub(crate) fn new(kind: Kind, offset: usize, dim: usize, g_rows: &[Vec<(usize, f64)>]) -> Self {
        let rows = &g_rows[offset..offset + dim];
        let pattern = match kind {
            Kind::NonNeg => BlockPattern::Rows(rows.to_vec()),
            Kind::Soc => {
                let mut cols: Vec<usize> = rows.iter().flatten().map(|&(c, _)| c).collect();
                cols.sort_unstable();
                cols.dedup();
                let mut block = Mat::zeros(dim, cols.len());
                for (i, row) in rows.iter().enumerate() {
                    for &(c, v) in row {
                        let j = cols.binary_search(&c).unwrap();
                        block[(i, j)] += v;
                    }
                }
                BlockPattern::Dense { cols, block }
            }
            Kind::Psd(_) => {
                let mut by_col: std::collections::BTreeMap<usize, Vec<(usize, f64)>> = Default::default();
                for (i, row) in rows.iter().enumerate() {
                    for &(c, v) in row {
                        by_col.entry(c).or_default().push((i, v));
                    }
                }
                BlockPattern::PsdCols(by_col.into_iter().collect())
            }
        };
        Self {
            kind,
            offset,
            dim,
            pattern,
        }
    }
}

pub(crate) struct Kkt<'a> {
    pub n: usize,
    pub a: &'a CscMatrix,
    pub g: &'a CscMatrix,
    pub blocks: &'a [Block],
}

/// Largest augmented system factored directly.
const AUGMENTED_MAX_DIM: usize = 400;

pub(crate) enum Factor {
    Normal {
        /// Cholesky factor of `H` when there are no equality rows.
        h: Option<faer::linalg::solvers::Llt<f64>>,
        /// LBL' factor of `[H A'; A 0]` otherwise.
        hk: Option<faer::linalg::solvers::Lblt<f64>>,
    },
    Augmented(faer::linalg::solvers::Lblt<f64>),
}

/// `out = (W'W)^{-1} v` blockwise.
pub(crate) fn apply_wtw_inv(blocks: &[Block], scalings: &[Scaling], v: &[f64], out: &mut [f64]) {
    let mut tmp = vec![0.0; v.len()];
    for (b, sc) in blocks.iter().zip(scalings) {
        let r = b.offset..b.offset + b.dim;
        sc.apply_wt_inv(&v[r.clone()], &mut tmp[r.clone()]);
        sc.apply_w_inv(&tmp[r.clone()], &mut out[r]);
    }
}

/// `out = W'W v` blockwise.
pub(crate) fn apply_wtw(blocks: &[Block], scalings: &[Scaling], v: &[f64], out: &mut [f64]) {
    let mut tmp = vec![0.0; v.len()];
    for (b, sc) in blocks.iter().zip(scalings) {
        let r = b.offset..b.offset + b.dim;
        sc.apply_w(&v[r.clone()], &mut tmp[r.clone()]);
        sc.apply_wt(&tmp[r.clone()], &mut out[r]);
    }
}

fn solve_vec(fac: &impl Solve<f64>, v: &mut [f64]) {
    let n = v.len();
    let m = MatMut::from_column_major_slice_mut(v, n, 1);
    fac.solve_in_place(m);
}

impl Kkt<'_> {
    fn assemble_h(&self, scalings: &[Scaling]) -> Mat<f64> {
        let n = self.n;
        let mut h = Mat::<f64>::zeros(n, n);
        for (blk, sc) in self.blocks.iter().zip(scalings) {
            match (&blk.pattern, sc) {
                (BlockPattern::Rows(rows), Scaling::NonNeg { w }) => {
                    for (row, wi) in rows.iter().zip(w) {
                        let f = 1.0 / (wi * wi);
                        for &(a, va) in row {
                            let fa = f * va;
                            for &(b, vb) in row {
                                if b <= a {
                                    h[(a, b)] += fa * vb;
                                }
                            }
                        }
                    }
                }
                (BlockPattern::Dense { cols, block }, sc) => {
                    let k = cols.len();
                    let mut scaled = Mat::<f64>::zeros(blk.dim, k);
                    let mut col_in = vec![0.0; blk.dim];
                    let mut col_out = vec![0.0; blk.dim];
                    for j in 0..k {
                        for i in 0..blk.dim {
                            col_in[i] = block[(i, j)];
                        }
                        sc.apply_wt_inv(&col_in, &mut col_out);
                        for i in 0..blk.dim {
                            scaled[(i, j)] = col_out[i];
                        }
                    }
                    let mut prod = Mat::<f64>::zeros(k, k);
                    matmul(
                        prod.as_mut(),
                        Accum::Replace,
                        scaled.transpose(),
                        scaled.as_ref(),
                        1.0,
                        Par::Seq,
                    );
                    for (jj, &cb) in cols.iter().enumerate() {
                        for (ii, &ca) in cols.iter().enumerate().skip(jj) {
                            h[(ca, cb)] += prod[(ii, jj)];
                        }
                    }
                }
                (BlockPattern::PsdCols(entries), Scaling::Psd { rinv, .. }) => {
                    let d = match blk.kind {
                        Kind::Psd(d) => d,
                        _ => unreachable!(),
                    };
                    psd_schur(d, rinv, entries, &mut h);
                }
                _ => unreachable!("block pattern and scaling disagree"),
            }
        }
        // mirror lower triangle
        for j in 0..n {
            for i in (j + 1)..n {
                h[(j, i)] = h[(i, j)];
            }
        }
        h
    }

    fn use_augmented(&self) -> bool {
        self.blocks.iter().all(|b| !matches!(b.kind, Kind::Psd(_)))
            && self.n + self.a.nrows + self.g.nrows <= AUGMENTED_MAX_DIM
    }

    fn factor_augmented(&self, scalings: &[Scaling]) -> Option<Factor> {
        let (n, p, m) = (self.n, self.a.nrows, self.g.nrows);
        let dim = n + p + m;
        let mut k = Mat::<f64>::zeros(dim, dim);
        for c in 0..n {
            for (r, v) in self.a.col(c) {
                k[(n + r, c)] = v;
                k[(c, n + r)] = v;
            }
            for (r, v) in self.g.col(c) {
                k[(n + p + r, c)] = v;
                k[(c, n + p + r)] = v;
            }
        }
        let mut e = Vec::new();
        let mut out = Vec::new();
        for (b, sc) in self.blocks.iter().zip(scalings) {
            e.resize(b.dim, 0.0);
            out.resize(b.dim, 0.0);
            let mut tmp = vec![0.0; b.dim];
            for j in 0..b.dim {
                e.fill(0.0);
                e[j] = 1.0;
                sc.apply_w(&e, &mut tmp);
                sc.apply_wt(&tmp, &mut out);
                for i in 0..b.dim {
                    k[(n + p + b.offset + i, n + p + b.offset + j)] = -out[i];
                }
            }
        }
        let scale = (0..dim).map(|i| k[(i, i)].abs()).fold(1.0, f64::max);
        let reg = 1e-14 * scale;
        for i in 0..n {
            k[(i, i)] += reg;
        }
        for i in n..dim {
            k[(i, i)] -= reg;
        }
        if !(0..dim).all(|i| k[(i, i)].is_finite()) {
            return None;
        }
        Some(Factor::Augmented(k.lblt(Side::Lower)))
    }

    pub(crate) fn factor(&self, scalings: &[Scaling]) -> Option<Factor> {
        if self.use_augmented() {
            return self.factor_augmented(scalings);
        }
        let mut h = self.assemble_h(scalings);
        let n = self.n;
        let max_diag = (0..n).map(|i| h[(i, i)].abs()).fold(1.0, f64::max);
        let mut reg = 1e-13 * max_diag;
        for _ in 0..8 {
            for i in 0..n {
                h[(i, i)] += reg;
            }
            if self.a.nrows > 0 {
                let p = self.a.nrows;
                let mut k2 = Mat::<f64>::zeros(n + p, n + p);
                k2.as_mut().submatrix_mut(0, 0, n, n).copy_from(&h);
                for c in 0..n {
                    for (r, v) in self.a.col(c) {
                        k2[(n + r, c)] = v;
                        k2[(c, n + r)] = v;
                    }
                }
                for i in n..n + p {
                    k2[(i, i)] = -reg;
                }
                return Some(Factor::Normal {
                    h: None,
                    hk: Some(k2.lblt(Side::Lower)),
                });
            }
            if let Ok(llt) = h.llt(Side::Lower) {
                return Some(Factor::Normal { h: Some(llt), hk: None });
            }
            reg = reg.max(1e-14) * 100.0;
        }
        None
    }

    fn solve_once(
        &self,
        f: &Factor,
        scalings: &[Scaling],
        r1: &[f64],
        r2: &[f64],
        r3: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (h, hk) = match f {
            Factor::Normal { h, hk } => (h, hk),
            Factor::Augmented(lblt) => {
                let mut v: Vec<f64> = r1.iter().chain(r2).chain(r3).copied().collect();
                solve_vec(lblt, &mut v);
                let dz = v.split_off(self.n + r2.len());
                let dy = v.split_off(self.n);
                return (v, dy, dz);
            }
        };
        let mut tmp = vec![0.0; r3.len()];
        apply_wtw_inv(self.blocks, scalings, r3, &mut tmp);
        let mut rhs = r1.to_vec();
        self.g.tr_mul_add(1.0, &tmp, &mut rhs);

        let (dx, dy) = match (h, hk) {
            (Some(llt), _) => {
                solve_vec(llt, &mut rhs);
                (rhs, Vec::new())
            }
            (None, Some(lblt)) => {
                rhs.extend_from_slice(r2);
                solve_vec(lblt, &mut rhs);
                let dy = rhs.split_off(self.n);
                (rhs, dy)
            }
            (None, None) => unreachable!("normal factor without a matrix"),
        };
        // dz = (W'W)^{-1} (G dx - r3)
        let mut gx: Vec<f64> = r3.iter().map(|v| -v).collect();
        self.g.mul_add(1.0, &dx, &mut gx);
        let mut dz = vec![0.0; r3.len()];
        apply_wtw_inv(self.blocks, scalings, &gx, &mut dz);
        (dx, dy, dz)
    }

    /// Solves the reduced system with two steps of iterative refinement.
    pub(crate) fn solve(
        &self,
        f: &Factor,
        scalings: &[Scaling],
        r1: &[f64],
        r2: &[f64],
        r3: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (mut dx, mut dy, mut dz) = self.solve_once(f, scalings, r1, r2, r3);
        let mut last = f64::INFINITY;
        for _it in 0..10 {
            // residuals of the unregularized system
            let mut e1 = r1.to_vec();
            self.a.tr_mul_add(-1.0, &dy, &mut e1);
            self.g.tr_mul_add(-1.0, &dz, &mut e1);
            let mut e2 = r2.to_vec();
            self.a.mul_add(-1.0, &dx, &mut e2);
            let mut e3 = r3.to_vec();
            self.g.mul_add(-1.0, &dx, &mut e3);
            let mut wz = vec![0.0; dz.len()];
            apply_wtw(self.blocks, scalings, &dz, &mut wz);
            for i in 0..e3.len() {
                e3[i] += wz[i];
            }
            let err = e1.iter().chain(&e2).chain(&e3).fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = r1.iter().chain(r2).chain(r3).fold(1.0f64, |m, v| m.max(v.abs()));
            if err <= 1e-14 * scale || err > 0.5 * last {
                break;
            }
            last = err;
            let (cx, cy, cz) = self.solve_once(f, scalings, &e1, &e2, &e3);
            for i in 0..dx.len() {
                dx[i] += cx[i];
            }
            for i in 0..dy.len() {
                dy[i] += cy[i];
            }
            for i in 0..dz.len() {
                dz[i] += cz[i];
            }
        }
        (dx, dy, dz)
    }
}

/// Adds `H[a, b] += <E_a, P E_b P>` for all touched columns of one PSD block,
/// where `E_a` is column `a` of the block as a symmetric matrix and
/// `P = r^{-T} r^{-1}`.
fn psd_schur(d: usize, rinv: &Mat<f64>, entries: &[(usize, Vec<(usize, f64)>)], h: &mut Mat<f64>) {
    let p = rinv.transpose() * rinv;
    // svec position -> (i, j) with i >= j
    let mut pos = Vec::with_capacity(d * (d + 1) / 2);
    for j in 0..d {
        for i in j..d {
            pos.push((i, j));
        }
    }
    debug_assert_eq!(svec_index(d, d - 1, d - 1), pos.len() - 1);
    let inv_sqrt2 = 1.0 / std::f64::consts::SQRT_2;
    let mut m = Mat::<f64>::zeros(d, d);
    for (ia, (col_a, ents_a)) in entries.iter().enumerate() {
        // M = P E_a P as a sum of rank-one terms.
        m.fill(0.0);
        if ents_a.len() <= d {
            for &(k, v) in ents_a {
                let (i, j) = pos[k];
                if i == j {
                    rank_one(&mut m, &p, i, i, v);
                } else {
                    let e = v * inv_sqrt2;
                    rank_one(&mut m, &p, i, j, e);
                    rank_one(&mut m, &p, j, i, e);
                }
            }
        } else {
            let mut ea = Mat::<f64>::zeros(d, d);
            for &(k, v) in ents_a {
                let (i, j) = pos[k];
                if i == j {
                    ea[(i, i)] += v;
                } else {
                    ea[(i, j)] += v * inv_sqrt2;
                    ea[(j, i)] += v * inv_sqrt2;
                }
            }
            m = &p * &ea * &p;
        }
        for (col_b, ents_b) in entries[..=ia].iter() {
            let mut acc = 0.0;
            for &(k, v) in ents_b {
                let (i, j) = pos[k];
                acc += if i == j {
                    v * m[(i, i)]
                } else {
                    v * inv_sqrt2 * (m[(i, j)] + m[(j, i)])
                };
            }
            let (r, c) = if col_a >= col_b {
                (*col_a, *col_b)
            } else {
                (*col_b, *col_a)
            };
            h[(r, c)] += acc;
        }
    }
}

/// `m += v * P[:, i] P[j, :]`
fn rank_one(m: &mut Mat<f64>, p: &Mat<f64>, i: usize, j: usize, v: f64) {
    let d = m.nrows();
    for c in 0..d {
        let pc = v * p[(j, c)];
        if pc == 0.0 {
            continue;
        }
        for r in 0..d {
            m[(r, c)] += p[(r, i)] * pc;
        }
    }
}
