//! Conic programs and a bundled interior-point solver.
//!
//! Programs are `minimize c'x + offset subject to A x + s = b, s in K` with
//! `K` a product of zero, nonnegative, Lorentz, rotated Lorentz and PSD
//! cones. The rotated cone is `{(u, v, z): 2 u v >= ||z||^2, u, v >= 0}`.
//! PSD blocks are stored as the lower triangle in column-major order with
//! off-diagonal entries scaled by `sqrt 2`.

mod certificate;
mod cone;
mod error;
mod format;
mod kkt;
mod program;
mod solver;

pub use certificate::{verify_certificate, verify_certificate_with, VERIFY_TOL};
pub use cone::{cone_violation, mat_to_svec, svec_index, svec_order, svec_to_mat};
pub use error::ConicError;
pub use format::{
    program_from_str, program_to_string, read_program, read_solution, solution_to_string, write_program,
    PROGRAM_HEADER, SOLUTION_HEADER,
};
pub use program::{AffineExpr, Cone, ConicProgram, CscMatrix, ProgramBuilder};
pub use solver::{solve, Settings, SolveResult, Status};
