//! SPICE netlist generation benchmark toolkit.
//!
//! - [`netlist`]: parse, serialize and flatten SPICE netlists.
//! - [`lint`]: rule-based validation with repair feedback for LLM output.
//! - [`metrics`]: transistor counts and difficulty tiers.
//! - [`sim`]: MNA-based DC, sweep, transient and functional checks.
//! - [`harness`]: prompt rendering, providers, the repair loop, Pass@k scoring
//!   and the validated dataset store.

pub mod netlist;
pub mod lint;
pub mod metrics;
pub mod sim;
pub mod harness;
