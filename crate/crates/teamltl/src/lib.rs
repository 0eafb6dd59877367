//! Verification toolkit for LTL under synchronous team semantics over
//! finite teams of lasso traces: an exact reference evaluator, compilers
//! into HyperLTL/HyperQPTL(+) prefix fragments, automata-based model
//! checking for the decidable fragments, and generators for the
//! counter-machine hardness instances.

pub mod buchi;
pub mod formula;
pub mod hyper;
pub mod kripke;
pub mod propgen;
pub mod reduction;
pub mod team_eval;
pub mod translate;
pub mod traces;
