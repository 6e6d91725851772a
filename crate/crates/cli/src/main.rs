//! `ccf` — scenario-driven funnel-control simulation from the command line.
//!
//! Exit codes: 0 success, 1 failed checks or validation, 2 I/O or parse
//! errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ccf_core::check::check_trace;
use ccf_core::scenario::{Scenario, ScenarioError};
use ccf_core::trace::SimTrace;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_IO_PARSE: u8 = 2;

#[derive(Parser)]
#[command(name = "ccf", version, about = "Constraint-consistent funnel planning and control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario; write trace.csv, report.txt and plot-data CSVs.
    Run {
        /// Scenario file path, or a bundled name (robot_kc3, robot_kc03).
        scenario: String,
        /// Override a scenario key before building, e.g. planner.k_c=0.3.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Re-run the invariant checks on an existing trace.
    Check {
        /// Trace CSV written by `run`.
        trace: PathBuf,
        /// Scenario the trace came from (path or bundled name).
        scenario: String,
        /// Overrides that were applied to that scenario, if any.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Run all static validations without simulating.
    Validate {
        /// Scenario file path or bundled name.
        scenario: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { scenario, sets, out } => cmd_run(&scenario, &sets, &out),
        Command::Check { trace, scenario, sets } => cmd_check(&trace, &scenario, &sets),
        Command::Validate { scenario, sets } => cmd_validate(&scenario, &sets),
    };
    match code {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

type CmdResult = Result<(), (u8, String)>;

fn scenario_error_code(err: &ScenarioError) -> u8 {
    match err {
        ScenarioError::Validation(_) => EXIT_CHECK_FAILED,
        _ => EXIT_IO_PARSE,
    }
}

fn load_scenario(source: &str, sets: &[String]) -> Result<Scenario, (u8, String)> {
    let result = match Scenario::bundled_source(source) {
        Some(text) => Scenario::from_toml_str_with_overrides(text, sets),
        None => Scenario::load(Path::new(source), sets),
    };
    result.map_err(|err| (scenario_error_code(&err), err.to_string()))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    std::fs::write(path, contents)
        .map_err(|err| (EXIT_IO_PARSE, format!("cannot write {}: {err}", path.display())))
}

fn cmd_run(source: &str, sets: &[String], out: &PathBuf) -> CmdResult {
    let scenario = load_scenario(source, sets)?;
    let built = scenario
        .build()
        .map_err(|err| (scenario_error_code(&err), err.to_string()))?;
    let trace = built.run();
    let report = check_trace(&trace, &built.check_context());

    std::fs::create_dir_all(out)
        .map_err(|err| (EXIT_IO_PARSE, format!("cannot create {}: {err}", out.display())))?;
    write_file(&out.join("trace.csv"), &trace.to_csv_string())?;
    write_file(&out.join("report.txt"), &render_report(&report, &trace))?;
    emit_plot_data(&trace, &scenario, out)?;

    print!("{report}");
    if trace.is_fault_free() && report.all_pass() {
        Ok(())
    } else {
        Err((EXIT_CHECK_FAILED, "checks failed; see report.txt".into()))
    }
}

fn render_report(report: &ccf_core::CheckReport, trace: &SimTrace) -> String {
    let mut text = report.to_string();
    for i in 0..trace.n_outputs {
        let max_phi_l = trace.rows.iter().map(|r| r.phi_lower[i]).fold(0.0f64, f64::max);
        let max_phi_u = trace.rows.iter().map(|r| r.phi_upper[i]).fold(0.0f64, f64::max);
        let _ = writeln!(
            text,
            "max phi output {}: lower={max_phi_l} upper={max_phi_u}",
            i + 1
        );
    }
    text
}

/// Per-figure plot data: funnel_i.csv (funnel and bands per output),
/// phi_i.csv (modification signals), plane.csv (output plane with reference
/// and hard box).
fn emit_plot_data(trace: &SimTrace, scenario: &Scenario, out: &Path) -> CmdResult {
    for i in 0..trace.n_outputs {
        let mut funnel = String::from("t,x,rho_lower,rho_upper,soft_lower,soft_upper,hard_lower,hard_upper\n");
        let mut phi = String::from("t,phi_lower,phi_upper\n");
        for row in &trace.rows {
            let _ = writeln!(
                funnel,
                "{},{},{},{},{},{},{},{}",
                row.t,
                row.x[i],
                row.rho_lower[i],
                row.rho_upper[i],
                row.soft_lower[i],
                row.soft_upper[i],
                row.hard_lower[i],
                row.hard_upper[i]
            );
            let _ = writeln!(phi, "{},{},{}", row.t, row.phi_lower[i], row.phi_upper[i]);
        }
        write_file(&out.join(format!("funnel_{}.csv", i + 1)), &funnel)?;
        write_file(&out.join(format!("phi_{}.csv", i + 1)), &phi)?;
    }

    if trace.n_outputs == 2 {
        let reference = scenario.reference.as_ref();
        let mut plane = String::from("t,x_1,x_2");
        if reference.is_some() {
            plane.push_str(",ref_1,ref_2");
        }
        plane.push_str(",hard_lower_1,hard_upper_1,hard_lower_2,hard_upper_2\n");
        for row in &trace.rows {
            let _ = write!(plane, "{},{},{}", row.t, row.x[0], row.x[1]);
            if let Some(signals) = reference {
                let _ = write!(plane, ",{},{}", signals[0].value(row.t), signals[1].value(row.t));
            }
            let _ = writeln!(
                plane,
                ",{},{},{},{}",
                row.hard_lower[0], row.hard_upper[0], row.hard_lower[1], row.hard_upper[1]
            );
        }
        write_file(&out.join("plane.csv"), &plane)?;
    }
    Ok(())
}

fn cmd_check(trace_path: &Path, source: &str, sets: &[String]) -> CmdResult {
    let text = std::fs::read_to_string(trace_path)
        .map_err(|err| (EXIT_IO_PARSE, format!("cannot read {}: {err}", trace_path.display())))?;
    let trace = SimTrace::from_csv_str(&text)
        .map_err(|err| (EXIT_IO_PARSE, format!("trace schema error: {err}")))?;
    let scenario = load_scenario(source, sets)?;
    let built = scenario
        .build()
        .map_err(|err| (scenario_error_code(&err), err.to_string()))?;
    if trace.n_outputs != built.n_outputs() {
        return Err((
            EXIT_IO_PARSE,
            format!(
                "trace has {} outputs but scenario declares {}",
                trace.n_outputs,
                built.n_outputs()
            ),
        ));
    }
    let report = check_trace(&trace, &built.check_context());
    print!("{report}");
    if report.all_pass() {
        Ok(())
    } else {
        let first_fail = report
            .items
            .iter()
            .find(|item| !item.pass)
            .map(|item| format!("{} ({})", item.name, item.detail))
            .unwrap_or_default();
        Err((EXIT_CHECK_FAILED, format!("invariant violated: {first_fail}")))
    }
}

fn cmd_validate(source: &str, sets: &[String]) -> CmdResult {
    let scenario = load_scenario(source, sets)?;
    let built = scenario
        .build()
        .map_err(|err| (scenario_error_code(&err), err.to_string()))?;
    println!(
        "scenario valid: {} outputs, t_end = {} s, h = {} s",
        built.n_outputs(),
        built.sim.t_end,
        built.sim.h
    );
    Ok(())
}
