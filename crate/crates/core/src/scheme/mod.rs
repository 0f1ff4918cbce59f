//! Coupling schemes: staged per-process integrations with explicit input
//! expressions.
//!
//! A scheme is an ordered list of stages. Each stage integrates one process
//! over the step, starting from `q^n` plus a rational-weighted combination
//! of increments produced by earlier stages; the step output is `q^n` plus
//! the weighted sum of all stage increments. This form spans parallel
//! splitting (no cross-stage terms), sequential splitting (each stage adds
//! all prior increments with weight 1), and the original/revised
//! three-process couplings, as well as fractional-weight variants.

mod parse;
mod step;
mod types;

pub use parse::parse_scheme;
pub use step::{step, IntegratorKind, StepOutput};
pub use types::{
    builtin_scheme, validate_consistency, BuiltinKind, InputExpr, SchemeSpec, Stage, Violation,
};
