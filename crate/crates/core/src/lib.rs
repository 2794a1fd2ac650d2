//! Numerical laboratory for the parabolic chemorepulsion system
//! `u_t = div(grad u + u grad v)`, `v_t = lap v - v + u` on a box with
//! no-flux walls.
//!
//! * [`grid`]: cell-centred boxes, Neumann-closed stencils, quadrature.
//! * [`solver`]: positivity- and mass-preserving IMEX time stepping.
//! * [`diagnostics`]: entropy, Fisher information and regularity criteria.
//! * [`ineqlab`]: quadrature checks of the functional inequalities.
//! * [`cli`]: configuration, file formats and the `chemorep` commands.

pub mod grid;
pub mod par;
pub mod solver;
pub mod diagnostics;
pub mod ineqlab;
pub mod cli;
