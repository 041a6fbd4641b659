//! Standard-form conic programs.
//!
//! A program is `minimize c'x subject to A x + s = b, s in K`, where `K` is
//! an ordered product of the cones in [`Cone`]. Row blocks of `A` follow the
//! cone list in order.

use crate::error::ConicError;

/// One block of the product cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `{0}^dim`: equality rows.
    Zero(usize),
    /// Nonnegative orthant of the given dimension.
    NonNeg(usize),
    /// Lorentz cone `{(t, z): t >= ||z||}` of the given total dimension.
    Soc(usize),
    /// Rotated cone `{(u, v, z): 2 u v >= ||z||^2, u >= 0, v >= 0}`.
    RotatedSoc(usize),
    /// Symmetric PSD matrices of the given order, stored as a scaled
    /// lower-triangular vector (column major, off-diagonals times sqrt 2).
    Psd(usize),
}

impl Cone {
    /// Number of rows this block occupies.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::NonNeg(d) | Cone::Soc(d) | Cone::RotatedSoc(d) => d,
            Cone::Psd(order) => order * (order + 1) / 2,
        }
    }

    pub(crate) fn check(&self) -> Result<(), ConicError> {
        let ok = match *self {
            Cone::Zero(d) | Cone::NonNeg(d) => d >= 1,
            Cone::Soc(d) => d >= 2,
            Cone::RotatedSoc(d) => d >= 3,
            Cone::Psd(order) => order >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(ConicError::InvalidCone(*self))
        }
    }

    pub(crate) fn tag(&self) -> &'static str {
        match self {
            Cone::Zero(_) => "zero",
            Cone::NonNeg(_) => "nonneg",
            Cone::Soc(_) => "soc",
            Cone::RotatedSoc(_) => "rsoc",
            Cone::Psd(_) => "psd",
        }
    }
}

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, ConicError> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(ConicError::Dimension(format!(
                    "entry ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            if !v.is_finite() {
                return Err(ConicError::NonFinite(format!("A[{r}, {c}]")));
            }
            sorted.push((c, r, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (c, r, v) in sorted {
            if last == Some((c, r)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((c, r));
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut m = Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        };
        m.drop_zeros();
        Ok(m)
    }

    fn drop_zeros(&mut self) {
        let mut col_ptr = vec![0usize; self.ncols + 1];
        let mut row_idx = Vec::with_capacity(self.row_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.ncols {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                if self.values[p] != 0.0 {
                    row_idx.push(self.row_idx[p]);
                    values.push(self.values[p]);
                }
            }
            col_ptr[c + 1] = row_idx.len();
        }
        self.col_ptr = col_ptr;
        self.row_idx = row_idx;
        self.values = values;
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(row, value)` over column `c`.
    pub fn col(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// `y += alpha * A x`
    pub fn mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for c in 0..self.ncols {
            let xc = alpha * x[c];
            if xc == 0.0 {
                continue;
            }
            for (r, v) in self.col(c) {
                y[r] += v * xc;
            }
        }
    }

    /// `y += alpha * A' x`
    pub fn tr_mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for (r, v) in self.col(c) {
                acc += v * x[r];
            }
            y[c] += alpha * acc;
        }
    }

    /// `|A| |x|` elementwise.
    pub(crate) fn abs_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for c in 0..self.ncols {
            for (r, v) in self.col(c) {
                y[r] += (v * x[c]).abs();
            }
        }
        y
    }

    /// `|A|' |x|` elementwise.
    pub(crate) fn abs_tr_mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.ncols)
            .map(|c| self.col(c).map(|(r, v)| (v * x[r]).abs()).sum())
            .collect()
    }

    pub fn to_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for c in 0..self.ncols {
            for (r, v) in self.col(c) {
                out.push((r, c, v));
            }
        }
        out
    }

    /// Row-major copy as `(col, value)` lists, one per row.
    pub(crate) fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.nrows];
        for c in 0..self.ncols {
            for (r, v) in self.col(c) {
                rows[r].push((c, v));
            }
        }
        rows
    }
}

/// Sparse affine expression `sum_i coef_i x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(index: usize) -> Self {
        Self {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= factor;
        }
        self.constant *= factor;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>() + self.constant
    }
}

/// `minimize c'x + offset  s.t.  A x + s = b,  s in cones`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub c: Vec<f64>,
    /// Constant added to the reported objective; does not affect the solve.
    pub offset: f64,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    pub var_names: Vec<String>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn num_cones(&self) -> usize {
        self.cones.len()
    }

    /// Checks the structural invariants: cone dimensions sum to the row
    /// count, shapes agree, data is finite.
    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.c.len();
        let m = self.b.len();
        if self.a.nrows != m || self.a.ncols != n {
            return Err(ConicError::Dimension(format!(
                "A is {}x{}, expected {m}x{n}",
                self.a.nrows, self.a.ncols
            )));
        }
        for cone in &self.cones {
            cone.check()?;
        }
        let total: usize = self.cones.iter().map(Cone::dim).sum();
        if total != m {
            return Err(ConicError::Dimension(format!(
                "cone dimensions sum to {total}, but there are {m} rows"
            )));
        }
        if !self.var_names.is_empty() && self.var_names.len() != n {
            return Err(ConicError::Dimension(format!(
                "{} variable names for {n} variables",
                self.var_names.len()
            )));
        }
        if let Some(i) = self.c.iter().position(|v| !v.is_finite()) {
            return Err(ConicError::NonFinite(format!("c[{i}]")));
        }
        if let Some(i) = self.b.iter().position(|v| !v.is_finite()) {
            return Err(ConicError::NonFinite(format!("b[{i}]")));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.offset
    }

    /// `s = b - A x`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.b.clone();
        self.a.mul_add(-1.0, x, &mut s);
        s
    }

    /// Largest violation of `b - A x in K` over all blocks, measured as the
    /// distance-like quantity used by [`crate::cone_violation`].
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let s = self.slack(x);
        let mut off = 0;
        let mut worst: f64 = 0.0;
        for cone in &self.cones {
            let d = cone.dim();
            worst = worst.max(crate::cone::cone_violation(cone, &s[off..off + d]));
            off += d;
        }
        worst
    }

    /// Variable index by name, if names were recorded.
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|v| v == name)
    }
}

/// Incremental construction of a [`ConicProgram`] one cone block at a time.
#[derive(Debug, Clone)]
pub struct ProgramBuilder {
    c: Vec<f64>,
    offset: f64,
    names: Vec<String>,
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<Cone>,
}

impl ProgramBuilder {
    pub fn new(num_vars: usize) -> Self {
        Self {
            c: vec![0.0; num_vars],
            offset: 0.0,
            names: Vec::new(),
            triplets: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
        }
    }

    pub fn set_names(&mut self, names: Vec<String>) -> &mut Self {
        self.names = names;
        self
    }

    pub fn set_objective(&mut self, c: Vec<f64>, offset: f64) -> &mut Self {
        self.c = c;
        self.offset = offset;
        self
    }

    pub fn objective_mut(&mut self) -> &mut [f64] {
        &mut self.c
    }

    pub fn add_offset(&mut self, offset: f64) -> &mut Self {
        self.offset += offset;
        self
    }

    /// Appends a block requiring `(e_1(x), ..., e_d(x))` to lie in `cone`.
    /// For [`Cone::Psd`], the expressions are the scaled lower-triangular
    /// entries in storage order.
    pub fn push(&mut self, cone: Cone, exprs: Vec<AffineExpr>) -> Result<&mut Self, ConicError> {
        cone.check()?;
        if exprs.len() != cone.dim() {
            return Err(ConicError::Dimension(format!(
                "{} block of dimension {} given {} expressions",
                cone.tag(),
                cone.dim(),
                exprs.len()
            )));
        }
        for e in exprs {
            let row = self.b.len();
            for (j, a) in e.terms {
                if j >= self.c.len() {
                    return Err(ConicError::Dimension(format!(
                        "variable {j} out of range ({} variables)",
                        self.c.len()
                    )));
                }
                // s = b - A x must equal the expression.
                self.triplets.push((row, j, -a));
            }
            self.b.push(e.constant);
        }
        self.cones.push(cone);
        Ok(self)
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn build(self) -> Result<ConicProgram, ConicError> {
        let n = self.c.len();
        let m = self.b.len();
        let a = CscMatrix::from_triplets(m, n, &self.triplets)?;
        let prog = ConicProgram {
            c: self.c,
            offset: self.offset,
            a,
            b: self.b,
            cones: self.cones,
            var_names: self.names,
        };
        prog.validate()?;
        Ok(prog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 0.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        let mut y = vec![0.0; 2];
        m.mul_add(1.0, &[1.0, 5.0], &mut y);
        assert_eq!(y, vec![3.0, -1.0]);
        let mut z = vec![0.0; 2];
        m.tr_mul_add(1.0, &[1.0, 1.0], &mut z);
        assert_eq!(z, vec![2.0, 0.0]);
    }

    #[test]
    fn cone_dimensions() {
        assert_eq!(Cone::Psd(3).dim(), 6);
        assert!(Cone::Soc(1).check().is_err());
        assert!(Cone::RotatedSoc(2).check().is_err());
        assert!(Cone::Psd(1).check().is_ok());
    }

    #[test]
    fn builder_rejects_wrong_block_length() {
        let mut b = ProgramBuilder::new(1);
        assert!(b.push(Cone::Soc(3), vec![AffineExpr::var(0)]).is_err());
    }

    #[test]
    fn validate_catches_row_mismatch() {
        let mut b = ProgramBuilder::new(1);
        b.push(Cone::NonNeg(1), vec![AffineExpr::var(0)]).unwrap();
        let mut prog = b.build().unwrap();
        prog.cones.push(Cone::NonNeg(1));
        assert!(prog.validate().is_err());
    }
}
