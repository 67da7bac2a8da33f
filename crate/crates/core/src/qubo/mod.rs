//! The master problem as a QUBO: penalty assembly, bit registry, decoding
//! and the cut-based lower bound.

mod build;
mod dump;
mod matrix;
mod registry;

pub use build::{
    build_qubo, complete_assignment, decode, lower_bound, quantize_feasibility_cut, slack_bits,
    Decoded, GroupLabel, PenaltyConfig, PenaltyForm, PenaltyGroup, QuantizedCut, QuboError,
    QuboProblem, ResolvedPenalties, DEFAULT_QUANT_BITS, MAX_VERIFIED_SUPPORT,
};
pub use dump::{parse_dump, write_dump, ParsedDump};
pub use matrix::QuboMatrix;
pub use registry::{BitMeaning, BitRegistry};
