//! Small example designs shipped with the toolkit.

use crate::io::{parse_fsm, parse_mapping, parse_model, parse_refinement, MappingFile, RefinementFile};
use crate::model::IlaModel;
use crate::ts::TransitionSystem;

/// How the toy AES round computes its S-box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SboxStyle {
    Table,
    Logic,
}

/// Which level of the image-stream accelerator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamLevel {
    High,
    Low,
}

pub const AES_TABLE: &str = include_str!("../fixtures/aes-table.ila");
pub const AES_LOGIC: &str = include_str!("../fixtures/aes-logic.ila");
pub const AES_MAP: &str = include_str!("../fixtures/aes.map");
pub const PROC: &str = include_str!("../fixtures/proc.ila");
pub const PROC_BUGGY: &str = include_str!("../fixtures/proc-buggy.ila");
pub const PROC_MAP: &str = include_str!("../fixtures/proc.map");
pub const PIPE: &str = include_str!("../fixtures/pipe.fsm");
pub const PIPE_BUGGY: &str = include_str!("../fixtures/pipe-buggy.fsm");
pub const PIPE_REFINE: &str = include_str!("../fixtures/pipe.refine");
pub const STREAM_HIGH: &str = include_str!("../fixtures/stream-high.ila");
pub const STREAM_LOW: &str = include_str!("../fixtures/stream-low.ila");
pub const STREAM_MAP: &str = include_str!("../fixtures/stream.map");

fn model(text: &str) -> IlaModel {
    parse_model(text).unwrap_or_else(|d| panic!("bundled model does not parse:\n{d}"))
}

/// Memory-mapped block cipher with a two-level micro-ILA hierarchy.
pub fn toy_aes(style: SboxStyle) -> IlaModel {
    model(match style {
        SboxStyle::Table => AES_TABLE,
        SboxStyle::Logic => AES_LOGIC,
    })
}

/// 8-bit, four-register machine with an interrupt input. The buggy variant
/// clears the saved interrupt-enable bit on return instead of setting it.
pub fn toy_proc(buggy: bool) -> IlaModel {
    model(if buggy { PROC_BUGGY } else { PROC })
}

/// Two-stage pipelined implementation of [`toy_proc`].
pub fn toy_pipe(buggy: bool) -> TransitionSystem {
    parse_fsm(if buggy { PIPE_BUGGY } else { PIPE }).unwrap_or_else(|d| panic!("bundled state machine does not parse:\n{d}"))
}

/// Image-stream accelerator with an uninterpreted kernel.
pub fn toy_stream(level: StreamLevel) -> IlaModel {
    model(match level {
        StreamLevel::High => STREAM_HIGH,
        StreamLevel::Low => STREAM_LOW,
    })
}

/// State mapping between the two AES variants.
pub fn aes_mapping(a: &IlaModel, b: &IlaModel) -> MappingFile {
    parse_mapping(AES_MAP, a, b).unwrap_or_else(|d| panic!("bundled mapping does not parse:\n{d}"))
}

/// State mapping between the correct and buggy processors.
pub fn proc_mapping(a: &IlaModel, b: &IlaModel) -> MappingFile {
    parse_mapping(PROC_MAP, a, b).unwrap_or_else(|d| panic!("bundled mapping does not parse:\n{d}"))
}

/// State mapping between the two stream levels.
pub fn stream_mapping(a: &IlaModel, b: &IlaModel) -> MappingFile {
    parse_mapping(STREAM_MAP, a, b).unwrap_or_else(|d| panic!("bundled mapping does not parse:\n{d}"))
}

/// Refinement relation between [`toy_proc`] and [`toy_pipe`].
pub fn pipe_refinement(ila: &IlaModel, fsm: &TransitionSystem) -> RefinementFile {
    parse_refinement(PIPE_REFINE, ila, fsm).unwrap_or_else(|d| panic!("bundled refinement does not parse:\n{d}"))
}
