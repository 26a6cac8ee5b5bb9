//! Memory controller: address mapping, mechanism selection, command
//! compilation and scheduling.

mod compile;
mod mapping;
mod mechanism;
mod request;
mod scheduler;
mod stats;

pub use compile::{
    compile_copy, compile_read, compile_write, compile_zero, CompileError, Op, OpData,
};
pub use mapping::{AddressMap, DramAddr, Field, MappingConfig, OutOfRange};
pub use mechanism::{
    classify_copy, decide_copy, decide_zero, row_pairs, Features, Mechanism, OpClass, ZeroRows,
};
pub use request::{BulkRequest, RequestError, RequestKind};
pub use scheduler::{
    schedule, Controller, ScheduleError, ScheduleRunError, SchedulingPolicy, SubmitError,
    QUEUE_WINDOW,
};
pub use stats::{
    CommandCounts, MechanismStats, RequestId, RequestRecord, SimStats, Timeline, TimelineEntry,
};
