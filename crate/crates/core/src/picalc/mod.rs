//! Applied-pi calculus: terms, equational theory, deduction, operational
//! semantics and bounded trace enumeration.

pub mod deduce;
pub mod enumerate;
pub mod process;
pub mod semantics;
pub mod syntax;
pub mod term;
pub mod theory;

pub use deduce::{deduce, Frame, Knowledge};
pub use enumerate::{enumerate_traces, Enumerator, ProtocolTrace, TraceSet};
pub use process::{Process, WellFormedError};
pub use semantics::{Bounds, Configuration, Semantics, ADVERSARY_NAME};
pub use syntax::{parse_process, parse_templates, print_process, ParseError, Template};
pub use term::{Name, Term};
pub use theory::{Theory, TheoryError};
