//! Finite element spaces and discrete resolvents.
//!
//! * [`LagrangeSpace`] – continuous `P₁`–`P₃` with Dirichlet dofs eliminated.
//! * [`CgResolvent`] – Galerkin resolvent `(z M − A) u = M f`.
//! * [`FoslsResolvent`] – least-squares resolvent on `RT₀ × P₁`.

pub mod fosls;
pub mod lagrange;
pub mod quadrature;
pub mod reference;
pub mod resolvent;

pub use fosls::{FoslsResolvent, Rt0};
pub use lagrange::{
    fields_to_block, inner_product, FieldVector, Forms, InnerKind, LagrangeSpace, OperatorSpec, PotentialRegion,
    Tabulation,
};
pub use resolvent::{CgResolvent, DenseResolvent, CONDITION_LIMIT};
