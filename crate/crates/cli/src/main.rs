use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use helmnorm::assembly::{assemble, default_n, dump_to_path, OperatorKind, DEFAULT_PPW};
use helmnorm::config::Config;
use helmnorm::fit::{fit_exponent, FitModel};
use helmnorm::geometry::Registry;
use helmnorm::norms::{oracle_n_max, oracle_norm, NormSpec};
use helmnorm::sweep::{
    load_result, read_csv, report_table, run_quasimode, run_sweep, run_witness, QuasimodeConfig,
    SweepConfig, Verdict, WitnessConfig,
};
use helmnorm::{Error, Geometry};

const EXIT_ERROR: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VERDICT: u8 = 3;
const EXIT_UNCONVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "helmnorm",
    version,
    about = "Wavenumber sweeps of Helmholtz layer-operator norms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) a sweep and compare the fitted exponent with the prediction.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit both models to every (kind, spec) group of a sweep CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Verdict table over finished sweeps (each CSV needs its .meta sidecar).
    Report {
        #[arg(long, num_args = 0..)]
        inputs: Vec<PathBuf>,
    },
    /// Lower-bound witness ratios over a k sweep.
    Witness {
        #[arg(long)]
        config: PathBuf,
    },
    /// Restriction growth of Herglotz quasimodes on a segment or arc.
    Quasimode {
        #[arg(long)]
        config: PathBuf,
    },
    /// Unit-circle norm from the Fourier symbols.
    Oracle {
        #[arg(long)]
        k: f64,
        #[arg(long)]
        kind: String,
        #[arg(long, default_value = "L2->H1k")]
        norm: String,
        /// Coupling for combined kinds (default k).
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Write an assembled matrix in the binary dump format.
    Dump {
        #[arg(long)]
        geometry: String,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        kind: String,
        /// Requested node count (default 10 points per wavelength).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("helmnorm: {e}");
            ExitCode::from(match e {
                Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_ERROR,
            })
        }
    }
}

fn run(command: Command) -> helmnorm::Result<u8> {
    match command {
        Command::Sweep { config } => {
            let cfg = SweepConfig::from_config(&Config::load(&config)?)?;
            let r = run_sweep(&cfg)?;
            for (k, reason) in &r.skipped {
                eprintln!("skipped k = {k}: {reason}");
            }
            print!("{}", report_table(std::slice::from_ref(&r)));
            if r.unconverged > 0 {
                eprintln!(
                    "{} point(s) did not converge and were left out of the fit",
                    r.unconverged
                );
                return Ok(EXIT_UNCONVERGED);
            }
            Ok(if r.verdict == Verdict::Fail {
                EXIT_VERDICT
            } else {
                0
            })
        }
        Command::Fit { input } => {
            let rows = read_csv(&input)?;
            let mut groups: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.converged) {
                groups
                    .entry((r.kind.to_string(), r.spec.clone()))
                    .or_default()
                    .push((r.k, r.norm));
            }
            println!(
                "{:<10} {:<20} {:<16} {:>10} {:>12} {:>11} {:>5}",
                "kind", "spec", "model", "p", "C", "rms", "used"
            );
            for ((kind, spec), pts) in &groups {
                for model in [FitModel::PurePower, FitModel::PowerTimesLog] {
                    match fit_exponent(pts, model) {
                        Ok(f) => println!(
                            "{kind:<10} {spec:<20} {:<16} {:>10.4} {:>12.4e} {:>11.3e} {:>5}",
                            model.to_string(),
                            f.p,
                            f.c,
                            f.rms_residual,
                            f.used
                        ),
                        Err(e) => println!("{kind:<10} {spec:<20} {:<16} {e}", model.to_string()),
                    }
                }
            }
            Ok(0)
        }
        Command::Report { inputs } => {
            let results = inputs
                .iter()
                .map(|p| load_result(p))
                .collect::<helmnorm::Result<Vec<_>>>()?;
            print!("{}", report_table(&results));
            Ok(if results.iter().any(|r| r.verdict == Verdict::Fail) {
                EXIT_VERDICT
            } else {
                0
            })
        }
        Command::Witness { config } => {
            let w = run_witness(&WitnessConfig::from_config(&Config::load(&config)?)?)?;
            println!("{:?} witness", w.kind);
            println!(
                "{:>8} {:>7} {:>12} {:>12} {:>12} {:>12} {:>12}",
                "k", "nodes", "|u|", "r_L2", "r_H1", "comp_L2", "comp_H1"
            );
            for r in &w.rows {
                println!(
                    "{:>8} {:>7} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}",
                    r.k, r.nodes, r.u_norm, r.r_l2, r.r_h1, r.compensated[0], r.compensated[1]
                );
            }
            println!(
                "spread {:.4} {:.4}  {}",
                w.spread[0],
                w.spread[1],
                if w.pass { "PASS" } else { "FAIL" }
            );
            Ok(if w.pass { 0 } else { EXIT_VERDICT })
        }
        Command::Quasimode { config } => {
            let cfg = QuasimodeConfig::from_config(&Config::load(&config)?)?;
            let q = run_quasimode(&cfg)?;
            let g = &q.growth;
            println!("{:>10} {:>14} {:>14}", "r", "trace", "normal");
            for (t, n) in g.samples.iter().zip(&g.normal_samples) {
                println!("{:>10.4} {:>14.6e} {:>14.6e}", t.r, t.trace, n.normal_trace);
            }
            let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
            println!(
                "trace exponent {:.4} (bound {:.4})  {}",
                g.trace_fit.p,
                cfg.trace_bound + cfg.tolerance,
                mark(q.trace_pass)
            );
            println!(
                "normal exponent {:.4} (bound {:.4})  {}",
                g.normal_fit.p,
                1.0 + cfg.tolerance,
                mark(q.normal_pass)
            );
            Ok(if q.trace_pass && q.normal_pass {
                0
            } else {
                EXIT_VERDICT
            })
        }
        Command::Oracle { k, kind, norm, eta } => {
            let kind = OperatorKind::parse(&kind)?;
            let spec: NormSpec<f64> = norm.parse()?;
            let r = oracle_norm(kind, k, spec, oracle_n_max(k), eta.unwrap_or(k))?;
            println!(
                "{kind} {spec} k = {k}: {:.16e} (modes |n| <= {})",
                r.norm, r.n
            );
            Ok(0)
        }
        Command::Dump {
            geometry,
            registry,
            k,
            kind,
            n,
            output,
        } => {
            let reg = match registry {
                Some(p) => Registry::parse(&std::fs::read_to_string(p)?)?,
                None => Registry::default(),
            };
            let g: Geometry = reg.build(&geometry)?;
            let n = n.unwrap_or_else(|| default_n(&g, k, DEFAULT_PPW));
            let (disc, op) = assemble(&g, k, n, OperatorKind::parse(&kind)?)?;
            dump_to_path(&op, &output)?;
            println!("wrote {} ({}x{})", output.display(), disc.len(), disc.len());
            Ok(0)
        }
    }
}
