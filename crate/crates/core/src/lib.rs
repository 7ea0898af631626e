//! Language-guided quadrotor navigation: a rigid-body model, a single-shooting
//! NMPC solved with PANOC and a quadratic penalty, a rule-based navigator with
//! spatial descriptors and trackback memory, and a closed-loop simulator.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod model;
pub mod navigator;
pub mod obstacle;
pub mod ocp;
pub mod panoc;
pub mod sim;
