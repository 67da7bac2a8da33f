//! Instance files, random instances and trace export for the CLI and tests.

mod generate;
mod io;
mod trace;

pub use generate::{gen_instance, CostRanges, DemandProfile, GeneratorSpec, InvalidSpec, Range};
pub use io::{
    instance_to_json, load_instance, parse_instance, read_text, write_text, InstanceFile, IoError,
    MicrogridFile, UnitFile,
};
pub use trace::{export_trace, parse_trace, ParsedTrace, TraceRow, TRACE_HEADER};
