//! Textual formats: model files, traces, reports, and the mapping,
//! refinement and state-machine files used by the checkers. All of them are
//! S-expressions sharing one literal syntax: `true`, `false`, `(bv w n)` and
//! `(array a d default (addr value)...)`.

mod common;
mod model_file;
mod report;
mod specs;
mod trace;

pub use common::{parse_sort, parse_value, Diagnostic, Diagnostics};
pub use model_file::{parse_model, parse_raw_model, serialize_model};
pub use report::{serialize_report, serialize_reports};
pub use specs::{parse_fsm, parse_mapping, parse_refinement, MappingFile, RefinementFile};
pub use trace::{parse_trace, serialize_trace, InputTrace, TraceError};
