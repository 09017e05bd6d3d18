use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use visc_nonlocal::checkers::DefinitionId;
use visc_nonlocal::error::Error;
use visc_nonlocal::functions::Mode;
use visc_nonlocal::harness::{
    epsilon_refinement_study, forge_test_function, monotone_convergence_experiment,
    run_check, run_equivalence_suite, verify_kernel,
};
use visc_nonlocal::report;
use visc_nonlocal::scenario::Scenario;

/// Verification toolkit for viscosity solutions of second-order nonlocal
/// equations with Levy-type jump kernels.
#[derive(Parser)]
#[command(name = "visc-nonlocal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise checks of one definition over the scenario grid.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        /// A | Aprime | B | Bprime | C
        #[arg(long)]
        definition: String,
        /// sub | super (overrides the scenario's mode)
        #[arg(long)]
        mode: Option<String>,
        /// Output directory or a .json file path for the report.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Five-definition equivalence run with coherence and ordering gates.
    Suite {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Gap |residual_A' - residual_B| over the eps, then delta, schedules.
    StudyEpsilon {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exterior integrals of the decreasing-sequence integrands h_n.
    StudyMonotone {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Construct psi^r and emit samples plus glue junction diagnostics.
    ForgeTestFunction {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Kernel admissibility: near second moment, tail mass, error estimate.
    VerifyKernel {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::ScenarioInvalid(_) | Error::InvalidParameters(_) => 3,
        Error::DivergentMoment(_) => 4,
        _ => 1,
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, Error> {
    let mut sc = Scenario::load(path)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    Ok(sc)
}

fn out_dir(cli_out: Option<PathBuf>, sc: &Scenario) -> PathBuf {
    cli_out
        .or_else(|| sc.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Check { scenario, definition, mode, out, seed } => {
            let sc = load_scenario(&scenario, seed)?;
            let def = DefinitionId::parse(&definition)?;
            let mode = match mode.as_deref() {
                None => sc.mode,
                Some("sub") => Mode::Sub,
                Some("super") => Mode::Super,
                Some(other) => {
                    return Err(Error::ScenarioInvalid(format!(
                        "mode must be sub|super, got {other:?}"
                    )))
                }
            };
            let reports = run_check(&sc, def, mode)?;
            for rep in &reports {
                println!(
                    "{:?} {:?} at {:?}: residual = {:.6e}, verdict = {:?}",
                    rep.definition, rep.mode, rep.point, rep.residual, rep.verdict
                );
            }
            let out = out_dir(out, &sc);
            let path = if out.extension().map_or(false, |e| e == "json") {
                if let Some(parent) = out.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
                out
            } else {
                std::fs::create_dir_all(&out)?;
                out.join("report.json")
            };
            report::write_report_json(&reports, &path)?;
            log::info!("wrote {}", path.display());
            Ok(0)
        }
        Command::Suite { scenario, out, seed } => {
            let sc = load_scenario(&scenario, seed)?;
            let outcome = run_equivalence_suite(&sc)?;
            let dir = out_dir(out, &sc);
            report::emit_reports(
                &outcome.reports,
                Some(&outcome.study),
                Some((&outcome.plot, sc.dim())),
                &dir,
            )?;
            for (row, ok) in outcome.study.rows.iter().zip(&outcome.study.monotone_flags) {
                println!(
                    "point {}: coherent = {}, residuals A/A'/B/B'/C = {:.3e} {:.3e} {:.3e} {:.3e} {:.3e}",
                    row[0] as usize,
                    ok,
                    row[sc.dim() + 1],
                    row[sc.dim() + 2],
                    row[sc.dim() + 3],
                    row[sc.dim() + 4],
                    row[sc.dim() + 5],
                );
            }
            for f in &outcome.failures {
                eprintln!("FAIL: {f}");
            }
            Ok(outcome.exit_code() as u8)
        }
        Command::StudyEpsilon { scenario, out, seed } => {
            let sc = load_scenario(&scenario, seed)?;
            let table = epsilon_refinement_study(&sc)?;
            let dir = out_dir(out, &sc);
            std::fs::create_dir_all(&dir)?;
            report::write_study_csv(&table, &dir.join("study.csv"))?;
            print!("{}", table.to_csv());
            Ok(0)
        }
        Command::StudyMonotone { scenario, out, seed } => {
            let sc = load_scenario(&scenario, seed)?;
            let table = monotone_convergence_experiment(&sc)?;
            let dir = out_dir(out, &sc);
            std::fs::create_dir_all(&dir)?;
            report::write_study_csv(&table, &dir.join("study.csv"))?;
            print!("{}", table.to_csv());
            let monotone_ok = table.monotone_flags.iter().all(|&f| f);
            Ok(if monotone_ok { 0 } else { 2 })
        }
        Command::ForgeTestFunction { scenario, out, seed } => {
            let sc = load_scenario(&scenario, seed)?;
            let forged = forge_test_function(&sc)?;
            let dir = out_dir(out, &sc);
            std::fs::create_dir_all(&dir)?;
            report::write_study_csv(&forged.samples, &dir.join("samples.csv"))?;
            let mut out_text = String::from(
                "axis,h,location,analytic,straddle_fd,left_fd,left_analytic,right_fd,right_analytic\n",
            );
            for (axis, h, d) in &forged.junctions {
                out_text.push_str(&format!(
                    "{axis},{h:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    d.location,
                    d.analytic,
                    d.straddle_fd,
                    d.left_fd,
                    d.left_analytic,
                    d.right_fd,
                    d.right_analytic
                ));
            }
            std::fs::write(dir.join("junctions.csv"), out_text)?;
            println!(
                "psi^r built: r = {}, s_r = {}, lambdas = {:?} (halved-eigenvalue convention), taylor C = {}",
                forged.psi.r(),
                forged.psi.s_r(),
                forged.psi.lambdas(),
                forged.psi.taylor_constant()
            );
            Ok(0)
        }
        Command::VerifyKernel { scenario, out, seed } => {
            let sc = load_scenario(&scenario, seed)?;
            let rep = verify_kernel(&sc)?;
            println!(
                "near_second_moment = {:.12e}\ntail_mass = {:.12e}\nquadrature_error_estimate = {:.3e}",
                rep.near_second_moment, rep.tail_mass, rep.quadrature_error_estimate
            );
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let mut text =
                    serde_json::to_string_pretty(&rep).expect("moment report serialization");
                text.push('\n');
                std::fs::write(dir.join("kernel.json"), text)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("VISC_NONLOCAL_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
