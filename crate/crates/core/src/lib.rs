//! Mean-distortion bounds for quasiconformal-type maps.

pub mod bounds;
pub mod divergence;
pub mod expr;
pub mod extremal;
pub mod field;
pub mod gauge;
pub mod geometry;
pub mod quad;
pub mod report;
pub mod roots;
pub mod sphere;
