//! Exact SO(2,1) solutions of Hitchin's equations on the plane.
//!
//! The crate builds the radially symmetric family and its multi-particle
//! superpositions as evaluable field configurations, checks them against the
//! reduced ODE system and the full matrix equations, integrates their action,
//! and extracts the holonomy around large circles together with its winding.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod fields;
pub mod holonomy;
pub mod cli;
pub mod liealg;
pub mod numerics;
pub mod residual;
