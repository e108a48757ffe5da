//! Cyclicity analysis of monodromic singular points of planar analytic
//! vector fields.
//!
//! Systems `x' = P(x, y), y' = Q(x, y)` with a singular point at the origin
//! are classified, lifted to a first-order equation on a cylinder, and
//! studied through their Poincare map and inverse integrating factors.

pub mod algebra;
pub mod bifurcation;
pub mod cylinder;
pub mod dynamics;
pub mod expr;
pub mod frame;
pub mod gentrig;
pub mod iif;
pub mod monodromy;
pub mod ode;
pub mod presets;
pub mod report;
pub mod selftest;
