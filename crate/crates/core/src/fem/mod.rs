//! Hexahedral finite elements: basis, quadrature, assembly and solvers.

pub mod assemble;
pub mod element;
pub mod quadrature;
pub mod shape;
pub mod solve;
pub mod sparse;

pub use assemble::{
    assemble_rhs,
    assemble, residual, solve_spd, Conduction, DofMap, ElasticProps, Elasticity, Kernel, NodalSpring, QpField, Robin,
    SparseSystem,
};
pub use shape::{shape_eval, ElementOrder};
pub use solve::{Factorization, SolveOptions, SolverKind};
pub use sparse::{parse_triplets, CsrMatrix};
