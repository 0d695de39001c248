//! Exercise modeling toolkit.
//!
//! Programming exercises are represented as a question, a solution plan and a
//! knowledge basis, spread over three reasoning layers: code evaluation
//! ([`minilang`]), rule-based domain reasoning ([`rewrite`]) and template
//! generation ([`templates`]). Plans are typed into Bloom taxonomy cells by
//! [`plans`], and [`sim`] walks them with simulated students.

pub mod bloom;
pub mod finding;
pub mod minilang;
pub mod plans;
pub mod pos;
pub mod rewrite;
pub mod sim;
pub mod specdsl;
pub mod templates;

pub use pos::Pos;
