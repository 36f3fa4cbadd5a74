pub mod ad;
pub mod corpus;
pub mod descent;
pub mod expr;
pub mod linalg;
pub mod lp;
pub mod polyhedral;
pub mod rational;
pub mod report;
pub mod verifier;
