//! Microgrid side of the decomposition. Everything about costs stays here;
//! the coordinator only sees objectives, partial cuts and dispatch values.

use crate::cuts::{partial_feasibility_cuts, partial_optimality_cut, PartialFeasibilityCut, PartialOptimalityCut};
use crate::dispatch::{solve_dispatch, solve_feasibility, DispatchError, DispatchOutcome};
use crate::model::{Dispatch, Instance, Schedule};

/// One microgrid central controller, owning its unit data.
#[derive(Debug, Clone)]
pub struct Mgcc {
    index: usize,
    offset: usize,
    units: usize,
    microgrid: crate::model::Microgrid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MgccReply {
    Optimal {
        objective: f64,
        cut: PartialOptimalityCut,
    },
    Infeasible {
        short_hours: Vec<usize>,
        cuts: Vec<PartialFeasibilityCut>,
    },
}

impl Mgcc {
    pub fn for_instance(inst: &Instance) -> Vec<Mgcc> {
        inst.microgrids()
            .iter()
            .enumerate()
            .map(|(g, mg)| Mgcc {
                index: g,
                offset: inst.unit_offset(g),
                units: mg.units.len(),
                microgrid: mg.clone(),
            })
            .collect()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Solves the local dispatch for the broadcast schedule and answers with
    /// a partial optimality cut, or with feasibility cuts when short.
    pub fn respond(&self, u: &Schedule, tol: f64) -> Result<MgccReply, DispatchError> {
        let local = u.slice_units(self.offset, self.units);
        match solve_dispatch(&self.microgrid, &local, tol)? {
            DispatchOutcome::Optimal(sol) => Ok(MgccReply::Optimal {
                objective: sol.objective,
                cut: partial_optimality_cut(&self.microgrid, self.offset, &sol),
            }),
            DispatchOutcome::Infeasible { short_hours } => {
                let res = solve_feasibility(&self.microgrid, &local)?;
                Ok(MgccReply::Infeasible {
                    short_hours,
                    cuts: partial_feasibility_cuts(&self.microgrid, self.offset, &res),
                })
            }
        }
    }

    /// Final set points for a schedule, written into the global dispatch.
    pub fn dispatch_into(&self, u: &Schedule, tol: f64, out: &mut Dispatch) -> Result<bool, DispatchError> {
        let local = u.slice_units(self.offset, self.units);
        match solve_dispatch(&self.microgrid, &local, tol)? {
            DispatchOutcome::Optimal(sol) => {
                out.write_units(self.offset, &sol.p);
                Ok(true)
            }
            DispatchOutcome::Infeasible { .. } => Ok(false),
        }
    }
}
