//! Decision procedures for single-function object-creating conjunctive
//! queries (sifo CQs): oid-equivalence, logical entailment when the queries
//! are read as schema mappings, and brute-force oracles to check both.

pub mod entail;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod hom;
pub mod model;
pub mod normalize;
pub mod oid_equiv;
pub mod oracle;
pub mod parser;

pub use error::{Error, Result};
pub use model::{
    flatten, freeze, validate_sifo, Atom, ConjunctiveQuery, Const, DataTerm, ExtFact,
    ExtendedInstance, Fact, Homomorphism, Instance, SifoQuery, Symbol, Term, Valuation, Var,
    VarMap,
};
