//! Reference evaluator, chronicle generators and invariant checkers.

pub mod campaign;
pub mod check;
pub mod downsets;
pub mod enumerate;
pub mod generate;
pub mod lattice;
pub mod naive;
pub mod witness;

use crate::ids::EventId;

/// Stand-in for an identifier that names no event anywhere.
pub const UNKNOWN_ID: EventId = EventId::from_bytes([0xEE; 32]);

pub use check::{
    check_authorization_safety, check_oracle_equivalence, check_query_safety,
    check_revocation_safety, check_revocation_safety_with, CheckError, Invariant, Violation,
};
pub use enumerate::{enumerate_chronicles, Alphabet};
pub use generate::{gen_chronicle, gen_traced, GenConfig};
pub use naive::naive_authorizes;
