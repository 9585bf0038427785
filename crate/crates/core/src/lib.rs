//! Template-based differential testing for a small optimizing runtime.

pub mod campaign;
pub mod corpus;
pub mod difftest;
pub mod extract;
pub mod genharness;
pub mod interp;
pub mod lang;
pub mod optvm;
pub mod runtime;
pub mod seed;
