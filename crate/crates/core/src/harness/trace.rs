use std::fmt::Write as _;

use crate::orchestrator::{IterationRecord, RunStatus, SolveReport};

pub const TRACE_HEADER: &str = "e,ub,lb,gap,cuts_opt,cuts_feas,qubo_bits,ms_sub,ms_master";

fn row(r: &IterationRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.e, r.ub, r.lb, r.gap, r.cuts_opt, r.cuts_feas, r.master_bits, r.ms_sub, r.ms_master
    )
}

/// CSV with one row per iteration and a `#summary` block.
pub fn export_trace(report: &SolveReport) -> String {
    let mut out = String::new();
    writeln!(out, "{TRACE_HEADER}").unwrap();
    for r in &report.trace {
        writeln!(out, "{}", row(r)).unwrap();
    }
    let total: f64 = report.trace.iter().map(|r| r.ms_sub + r.ms_master).sum();
    writeln!(out, "#summary").unwrap();
    writeln!(out, "status,{}", report.status).unwrap();
    writeln!(out, "cost,{}", report.cost).unwrap();
    writeln!(out, "iterations,{}", report.trace.len()).unwrap();
    writeln!(out, "total_ms,{total}").unwrap();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub e: usize,
    pub ub: f64,
    pub lb: f64,
    pub gap: f64,
    pub cuts_opt: usize,
    pub cuts_feas: usize,
    pub qubo_bits: usize,
    pub ms_sub: f64,
    pub ms_master: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub rows: Vec<TraceRow>,
    pub status: RunStatus,
    pub cost: f64,
    pub iterations: usize,
    pub total_ms: f64,
}

pub fn parse_trace(text: &str) -> Result<ParsedTrace, String> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err("missing trace header".into());
    }
    let mut rows = Vec::new();
    for line in lines.by_ref() {
        if line == "#summary" {
            break;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("bad row `{line}`"));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| format!("`{line}`: {e}"));
        let int = |i: usize| f[i].parse::<usize>().map_err(|e| format!("`{line}`: {e}"));
        rows.push(TraceRow {
            e: int(0)?,
            ub: num(1)?,
            lb: num(2)?,
            gap: num(3)?,
            cuts_opt: int(4)?,
            cuts_feas: int(5)?,
            qubo_bits: int(6)?,
            ms_sub: num(7)?,
            ms_master: num(8)?,
        });
    }
    let mut field = |key: &str| -> Result<String, String> {
        let line = lines.next().ok_or_else(|| format!("missing {key}"))?;
        line.strip_prefix(&format!("{key},"))
            .map(str::to_string)
            .ok_or_else(|| format!("expected {key}, got `{line}`"))
    };
    let status = match field("status")?.as_str() {
        "Converged" => RunStatus::Converged,
        "MaxIters" => RunStatus::MaxIters,
        "MasterInfeasible" => RunStatus::MasterInfeasible,
        s => return Err(format!("unknown status `{s}`")),
    };
    let cost = field("cost")?.parse().map_err(|e| format!("cost: {e}"))?;
    let iterations = field("iterations")?.parse().map_err(|e| format!("iterations: {e}"))?;
    let total_ms = field("total_ms")?.parse().map_err(|e| format!("total_ms: {e}"))?;
    Ok(ParsedTrace {
        rows,
        status,
        cost,
        iterations,
        total_ms,
    })
}
