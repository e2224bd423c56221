//! Generative semantic grammar with hierarchical Dirichlet process rule
//! selection, and an exact k-best joint semantic/syntactic parser.

pub mod hdp;
pub mod ontology;
pub mod semantics;
pub mod grammar;
pub mod parser;
pub mod eval;
pub mod cli;
