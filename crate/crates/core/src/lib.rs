//! k-anonymity for datasets that mix relational attributes with free text.
//!
//! A dataset is read against a [`schema::Schema`], annotated sensitive terms
//! are attached to its textual cells, tuples are grouped per person, and the
//! person records are partitioned into groups of at least `k` by either a
//! weighted Mondrian or a greedy term-driven strategy. Each group is then
//! recoded: relational values become ranges, value sets or coarser dates,
//! and terms not shared by the whole group are replaced by their type.

pub mod audit;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod pipeline;
pub mod recode;
pub mod schema;

pub use error::{Error, Result};
