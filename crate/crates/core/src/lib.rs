pub mod expr;
pub mod operators;
pub mod rules;
pub mod random;
pub mod quadrature;
pub mod density;
pub mod propriety;
pub mod estimation;
pub mod charts;
pub mod selftest;
pub mod cli;

pub use expr::{parse, Bindings, JetPoint, QFunction, Var};
