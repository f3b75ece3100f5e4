//! Command-line front end for the Grover-based bit-vector SMT solver.
//!
//! Subcommands: `solve`, `inspect`, `sweep`, `verify`, `export`. Output is
//! either a human-readable table or versioned JSON; with a fixed seed the
//! JSON output is byte-identical across runs.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qsmt_core::circuit::qasm;
use qsmt_core::oracle::{build_diffuser, build_oracle, LayoutMode, OracleLayout};
use qsmt_core::solver::{
    self, Engine, SolveOptions, SolveReport, SolverError, Status, SweepReport, VerifyReport,
};
use qsmt_core::{parse_problem, BVProblem, Circuit, Gate, ParseError, SimError};

pub const SPEC_VERSION: &str = "1.0";

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_VERIFY_FAIL: i32 = 4;
pub const EXIT_UNSAT: i32 = 20;

#[derive(Parser, Debug)]
#[command(name = "qsmt", about = "Grover-based SMT solver for bit-vector formulas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve a problem and report sampled measurements.
    Solve(SolveArgs),
    /// Print the oracle's qubit layout and gate counts.
    Inspect(CommonArgs),
    /// Exact success probability for a range of iteration counts.
    Sweep(SweepArgs),
    /// Cross-check the oracle's phase table against brute force.
    Verify(VerifyArgs),
    /// Write the oracle (or the full Grover circuit) as OpenQASM.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Problem file in the s-expression input language.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = LayoutArg::Paper)]
    pub layout: LayoutArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    pub format: FormatArg,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 1024)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the planned Grover iteration count.
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
    pub engine: EngineArg,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Inclusive iteration range, e.g. 1..8
    #[arg(long, value_parser = parse_range, default_value = "1..8")]
    pub k_range: (u64, u64),
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Test hook: flip one gate before verifying, to prove corruption is
    /// caught.
    #[arg(long, hide = true)]
    pub corrupt_gate: bool,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Export the full Grover circuit (state preparation plus planned
    /// iterations) instead of one oracle application.
    #[arg(long)]
    pub grover: bool,
    /// Lower multi-controlled gates to a ccx chain with ancillas.
    #[arg(long)]
    pub decompose_mcx: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayoutArg {
    Paper,
    Compact,
}

impl From<LayoutArg> for LayoutMode {
    fn from(v: LayoutArg) -> Self {
        match v {
            LayoutArg::Paper => LayoutMode::Paper,
            LayoutArg::Compact => LayoutMode::Compact,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineArg {
    Auto,
    Dense,
    Effective,
}

impl From<EngineArg> for Engine {
    fn from(v: EngineArg) -> Self {
        match v {
            EngineArg::Auto => Engine::Auto,
            EngineArg::Dense => Engine::Dense,
            EngineArg::Effective => Engine::Effective,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Table,
    Json,
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got '{s}'"))?;
    let lo: u64 = a.trim().parse().map_err(|_| format!("bad bound '{a}'"))?;
    let hi: u64 = b
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| format!("bad bound '{b}'"))?;
    if lo == 0 || hi < lo {
        return Err(format!("range {lo}..{hi} is empty or starts at 0"));
    }
    Ok((lo, hi))
}

/// Run a parsed command line; returns the process exit code. All normal
/// output goes to `out`, diagnostics to stderr.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> i32 {
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args, out),
        Command::Inspect(args) => cmd_inspect(args, out),
        Command::Sweep(args) => cmd_sweep(args, out),
        Command::Verify(args) => cmd_verify(args, out),
        Command::Export(args) => cmd_export(args, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

struct CmdError {
    code: i32,
    message: String,
}

impl CmdError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CmdError {
            code,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::new(1, e.to_string())
    }
}

impl From<ParseError> for CmdError {
    fn from(e: ParseError) -> Self {
        CmdError::new(EXIT_PARSE, format!("parse error: {e}"))
    }
}

impl From<SolverError> for CmdError {
    fn from(e: SolverError) -> Self {
        let code = match &e {
            SolverError::BudgetExceeded { .. } => EXIT_BUDGET,
            SolverError::Sim(SimError::DenseLimit { .. }) => EXIT_BUDGET,
            _ => 1,
        };
        CmdError::new(code, e.to_string())
    }
}

fn load_problem(path: &PathBuf) -> Result<BVProblem, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::new(1, format!("{}: {e}", path.display())))?;
    Ok(parse_problem(&text)?)
}

fn emit_json<T: serde::Serialize>(
    body: &T,
    extra: &[(&str, serde_json::Value)],
    out: &mut dyn std::io::Write,
) -> Result<(), CmdError> {
    let mut v = serde_json::to_value(body).expect("report serialization");
    let obj = v.as_object_mut().expect("reports are objects");
    obj.insert(
        "spec_version".to_string(),
        serde_json::Value::String(SPEC_VERSION.to_string()),
    );
    for (k, val) in extra {
        obj.insert(k.to_string(), val.clone());
    }
    writeln!(out, "{}", serde_json::to_string_pretty(&v).unwrap())?;
    Ok(())
}

// --- solve -----------------------------------------------------------------

fn cmd_solve(args: SolveArgs, out: &mut dyn std::io::Write) -> Result<i32, CmdError> {
    let problem = load_problem(&args.common.input)?;
    let opts = SolveOptions {
        layout: args.common.layout.into(),
        engine: args.engine.into(),
        iterations: args.iterations,
        shots: args.shots.max(1),
        seed: args.seed,
        ..Default::default()
    };
    let report = solver::solve(&problem, &opts)?;
    match args.common.format {
        FormatArg::Json => emit_json(&report, &[], out)?,
        FormatArg::Table => write_solve_table(&problem, &report, out)?,
    }
    Ok(if report.status == Status::Unsat {
        EXIT_UNSAT
    } else {
        EXIT_OK
    })
}

fn bool_tuple(bools: &[bool]) -> String {
    let inner: Vec<&str> = bools.iter().map(|b| if *b { "1" } else { "0" }).collect();
    format!("({})", inner.join(","))
}

fn write_solve_table(
    p: &BVProblem,
    r: &SolveReport,
    out: &mut dyn std::io::Write,
) -> Result<(), CmdError> {
    writeln!(out, "status      {}", match r.status {
        Status::Sat => "SAT",
        Status::Unsat => "UNSAT",
    })?;
    writeln!(out, "layout      {:?} ({} qubits)", r.layout_mode, r.total_qubits)?;
    writeln!(out, "engine      {:?}", r.engine)?;
    writeln!(out, "solutions   {} of {} states", r.solution_count, r.space_size)?;
    if r.status == Status::Unsat {
        writeln!(out, "\nno satisfying assignment exists; Grover run skipped")?;
        return Ok(());
    }
    writeln!(out, "iterations  {}", r.iterations)?;
    writeln!(out, "predicted   {:.6}", r.predicted_success)?;
    writeln!(
        out,
        "observed    {:.6} ({} shots, seed {})",
        r.observed_success, r.shots, r.seed
    )?;
    writeln!(out)?;

    let bool_hdr = format!("({})", p.bool_names.join(","));
    let mut header = format!("{:<14}{:>8}  {:>8}", "bit-string", "counts", bool_hdr);
    for (name, _) in &p.bv_vars {
        let _ = write!(header, "  {name:>4}");
    }
    writeln!(out, "{header}")?;
    let mut other = 0u64;
    for row in &r.measurements {
        if !row.solution {
            other += row.count;
            continue;
        }
        let (a, _) = decode_row(p, &row.bitstring);
        let mut line = format!(
            "{:<14}{:>8}  {:>8}",
            row.bitstring,
            row.count,
            bool_tuple(&a.bools)
        );
        for (v, (_, w)) in a.bv.iter().zip(&p.bv_vars) {
            let _ = write!(line, "  {:>4}", binary(*v, *w));
        }
        writeln!(out, "{line}")?;
    }
    if other > 0 {
        writeln!(out, "{:<14}{:>8}", "(other)", other)?;
    }
    Ok(())
}

fn binary(v: u64, width: usize) -> String {
    (0..width)
        .rev()
        .map(|b| if v >> b & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Rebuild an assignment from a presentation bit-string (booleans, then
/// each variable MSB-first).
fn decode_row(p: &BVProblem, bitstring: &str) -> (qsmt_core::Assignment, bool) {
    let bits: Vec<bool> = bitstring.chars().map(|c| c == '1').collect();
    let m = p.skeleton.var_count;
    let bools = bits[..m].to_vec();
    let mut pos = m;
    let mut bv = Vec::new();
    for (_, w) in &p.bv_vars {
        let mut v = 0u64;
        for i in 0..*w {
            if bits[pos + i] {
                v |= 1 << (w - 1 - i);
            }
        }
        bv.push(v);
        pos += w;
    }
    (qsmt_core::Assignment { bools, bv }, false)
}

// --- inspect ---------------------------------------------------------------

fn cmd_inspect(args: CommonArgs, out: &mut dyn std::io::Write) -> Result<i32, CmdError> {
    let problem = load_problem(&args.input)?;
    let (circuit, layout) =
        build_oracle(&problem, args.layout.into()).map_err(SolverError::from)?;
    match args.format {
        FormatArg::Json => {
            let rows: Vec<serde_json::Value> = layout
                .rows
                .iter()
                .map(|row| {
                    serde_json::json!({
                        "name": row.name,
                        "category": serde_json::to_value(row.category).unwrap(),
                        "module": serde_json::to_value(row.category.module()).unwrap(),
                        "qubits": row.qubits.iter().map(|q| q.0).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let modules: serde_json::Map<String, serde_json::Value> = layout
                .module_totals()
                .into_iter()
                .map(|(m, n)| {
                    let key = serde_json::to_value(m).unwrap();
                    (key.as_str().unwrap().to_string(), serde_json::json!(n))
                })
                .collect();
            let stats = circuit.stats();
            let gates: serde_json::Map<String, serde_json::Value> = stats
                .gate_counts
                .iter()
                .map(|(k, n)| (k.to_string(), serde_json::json!(n)))
                .collect();
            let body = serde_json::json!({
                "layout_mode": serde_json::to_value(layout.mode).unwrap(),
                "total_qubits": layout.total_qubits,
                "search_bits": layout.search_bits(),
                "rows": rows,
                "module_totals": modules,
                "gate_counts": gates,
                "total_gates": stats.total_gates,
            });
            emit_json(&body, &[], out)?;
        }
        FormatArg::Table => write_inspect_table(&circuit, &layout, out)?,
    }
    Ok(EXIT_OK)
}

fn write_inspect_table(
    circuit: &Circuit,
    layout: &OracleLayout,
    out: &mut dyn std::io::Write,
) -> Result<(), CmdError> {
    writeln!(
        out,
        "layout {:?}: {} qubits total, {} search bits",
        layout.mode,
        layout.total_qubits,
        layout.search_bits()
    )?;
    writeln!(out)?;
    for row in &layout.rows {
        let range = match (row.qubits.first(), row.qubits.last()) {
            (Some(a), Some(b)) if a != b => format!("q{}-q{}", a.0, b.0),
            (Some(a), _) => format!("q{}", a.0),
            _ => String::new(),
        };
        writeln!(
            out,
            "  {:<34} {:>3}  {}",
            row.name,
            row.qubits.len(),
            range
        )?;
    }
    writeln!(out)?;
    for (module, count) in layout.module_totals() {
        writeln!(out, "  {:<12} {:>3}", format!("{module:?}"), count)?;
    }
    let stats = circuit.stats();
    writeln!(out)?;
    write!(out, "  gates: {} total (", stats.total_gates)?;
    let parts: Vec<String> = stats
        .gate_counts
        .iter()
        .map(|(k, n)| format!("{k} {n}"))
        .collect();
    writeln!(out, "{})", parts.join(", "))?;
    Ok(())
}

// --- sweep -----------------------------------------------------------------

fn cmd_sweep(args: SweepArgs, out: &mut dyn std::io::Write) -> Result<i32, CmdError> {
    let problem = load_problem(&args.common.input)?;
    let (lo, hi) = args.k_range;
    let report = solver::sweep(&problem, args.common.layout.into(), lo..=hi)?;
    match args.common.format {
        FormatArg::Json => {
            let argmax = best_k(&report);
            emit_json(&report, &[("argmax_iterations", serde_json::json!(argmax))], out)?;
        }
        FormatArg::Table => {
            let argmax = best_k(&report);
            writeln!(
                out,
                "{} solutions in {} states; planned k = {}",
                report.solution_count, report.space_size, report.planned_iterations
            )?;
            writeln!(out, "{:>4}  {:>12}  {:>12}", "k", "predicted", "exact")?;
            for row in &report.rows {
                let marker = if row.iterations == argmax { "  <- best" } else { "" };
                writeln!(
                    out,
                    "{:>4}  {:>12.6}  {:>12.6}{marker}",
                    row.iterations, row.predicted_success, row.exact_success
                )?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn best_k(report: &SweepReport) -> u64 {
    report
        .rows
        .iter()
        .max_by(|a, b| a.exact_success.total_cmp(&b.exact_success))
        .map(|r| r.iterations)
        .unwrap_or(0)
}

// --- verify ----------------------------------------------------------------

fn cmd_verify(args: VerifyArgs, out: &mut dyn std::io::Write) -> Result<i32, CmdError> {
    let problem = load_problem(&args.common.input)?;
    let (mut circuit, layout) =
        build_oracle(&problem, args.common.layout.into()).map_err(SolverError::from)?;
    if args.corrupt_gate {
        let mut gates: Vec<Gate> = circuit.gates().to_vec();
        let mid = gates.len() / 2;
        gates.insert(mid, Gate::X(layout.smt_flag));
        let mut c = Circuit::new(circuit.qubit_count());
        for g in gates {
            c.append(g).expect("corrupted gate still well-formed");
        }
        circuit = c;
    }
    let report = solver::verify_circuit(&problem, &circuit, &layout)?;
    match args.common.format {
        FormatArg::Json => emit_json(&report, &[], out)?,
        FormatArg::Table => write_verify_table(&problem, &layout, &report, out)?,
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY_FAIL })
}

fn write_verify_table(
    p: &BVProblem,
    layout: &OracleLayout,
    r: &VerifyReport,
    out: &mut dyn std::io::Write,
) -> Result<(), CmdError> {
    if r.passed {
        writeln!(
            out,
            "PASS: oracle phase table matches brute force on all {} states",
            r.checked
        )?;
        return Ok(());
    }
    if let Some(e) = &r.structural_error {
        writeln!(out, "FAIL: {e}")?;
        return Ok(());
    }
    writeln!(
        out,
        "FAIL: {} of {} states disagree with brute force",
        r.mismatch_count, r.checked
    )?;
    for v in &r.first_mismatches {
        let (a, addition) = layout.value_to_assignment(*v);
        writeln!(
            out,
            "  counterexample state {v}: {} (addition={})",
            p.format_bitstring(&a),
            addition as u8
        )?;
    }
    Ok(())
}

// --- export ----------------------------------------------------------------

fn cmd_export(args: ExportArgs, out: &mut dyn std::io::Write) -> Result<i32, CmdError> {
    let problem = load_problem(&args.common.input)?;
    let (oracle, layout) =
        build_oracle(&problem, args.common.layout.into()).map_err(SolverError::from)?;
    let circuit = if args.grover {
        let solutions = solver::enumerate_solutions(&problem)?;
        let plan = solver::plan_iterations(layout.search_bits(), solutions.len() as u64)?;
        let mut c = Circuit::new(oracle.qubit_count());
        for q in &layout.search {
            c.append(Gate::H(*q)).unwrap();
        }
        let diffuser =
            build_diffuser(oracle.qubit_count(), &layout.search).map_err(SolverError::from)?;
        for _ in 0..plan.iterations {
            c = c.concat(&oracle).unwrap();
            c = c.concat(&diffuser).unwrap();
        }
        c
    } else {
        oracle
    };
    let text = qasm::export_with(&circuit, args.decompose_mcx);
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CmdError::new(1, format!("{}: {e}", path.display())))?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parser() {
        assert_eq!(parse_range("1..8").unwrap(), (1, 8));
        assert_eq!(parse_range("2..=5").unwrap(), (2, 5));
        assert!(parse_range("0..3").is_err());
        assert!(parse_range("5..2").is_err());
        assert!(parse_range("nope").is_err());
    }

    #[test]
    fn cli_parses_solve_flags() {
        let cli = Cli::try_parse_from([
            "qsmt", "solve", "--input", "x.sexp", "--shots", "64", "--seed", "9",
            "--engine", "dense", "--layout", "compact", "--format", "json",
        ])
        .unwrap();
        match cli.command {
            Command::Solve(a) => {
                assert_eq!(a.shots, 64);
                assert_eq!(a.seed, 9);
                assert_eq!(a.engine, EngineArg::Dense);
                assert_eq!(a.common.layout, LayoutArg::Compact);
                assert_eq!(a.common.format, FormatArg::Json);
            }
            _ => panic!("wrong subcommand"),
        }
    }
}
