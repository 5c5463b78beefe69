//! Process exit codes.

use std::fmt;

use excouple::analysis::AnalysisError;
use excouple::coupling::PlanError;
use excouple::solver::SolverError;
use excouple::MeasureError;

pub const SUCCESS: i32 = 0;
pub const FAILURE: i32 = 1;
pub const NO_OVERLAP: i32 = 2;
pub const RESOURCE_GUARD: i32 = 3;
pub const INVARIANT_VIOLATION: i32 = 4;

/// A checked property of the computed outputs failed. The outputs are still
/// written before this is returned.
#[derive(Debug)]
pub struct InvariantViolation(pub String);

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invariant violated: {}", self.0)
    }
}

impl std::error::Error for InvariantViolation {}

fn measure_code(e: &MeasureError) -> Option<i32> {
    matches!(e, MeasureError::AtomGuard { .. }).then_some(RESOURCE_GUARD)
}

fn plan_code(e: &PlanError) -> Option<i32> {
    match e {
        PlanError::NoOverlap { .. } => Some(NO_OVERLAP),
        PlanError::Invariant(_) => Some(INVARIANT_VIOLATION),
        PlanError::Measure(m) => measure_code(m),
        _ => None,
    }
}

/// Maps an error chain to an exit code. Library errors that wrap others
/// transparently are unwrapped by hand.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        let code = if let Some(e) = cause.downcast_ref::<PlanError>() {
            plan_code(e)
        } else if let Some(e) = cause.downcast_ref::<MeasureError>() {
            measure_code(e)
        } else if let Some(e) = cause.downcast_ref::<AnalysisError>() {
            match e {
                AnalysisError::Measure(m) => measure_code(m),
                _ => None,
            }
        } else if let Some(e) = cause.downcast_ref::<SolverError>() {
            match e {
                SolverError::ClosureGuard { .. } => Some(RESOURCE_GUARD),
                SolverError::Measure(m) => measure_code(m),
                _ => None,
            }
        } else if cause.downcast_ref::<InvariantViolation>().is_some() {
            Some(INVARIANT_VIOLATION)
        } else {
            None
        };
        if let Some(c) = code {
            return c;
        }
    }
    FAILURE
}
