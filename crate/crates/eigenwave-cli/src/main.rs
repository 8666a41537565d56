//! CSV report generator and verification harness for the multi-beam MIMO
//! power-allocation library.
//!
//! Every command prints CSV (standard output, or `--out <path>`) and a run
//! manifest recording the fully resolved parameter set and an output
//! checksum. With `--out`, the manifest lands next to the output as
//! `<path>.manifest`; otherwise it goes to standard error. `replay` re-runs
//! a manifest and verifies byte-identical output.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 infeasible spec,
//! 4 verification failure, 5 numeric-consistency error.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand};
use commands::{
    AtpParams, CmdError, CmdOutput, ConstraintParams, CparamParams, OptableParams, OutageFlags,
    QboundParams, SimulateParams,
};
use manifest::KvMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "eigenwave",
    version,
    about = "Outage and average-transmit-power reports for multi-beam MIMO eigen-beamforming"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Write CSV to this path (default: standard output). The run manifest
    /// goes to <path>.manifest, or to standard error for stdout output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Render floats with 17 significant digits instead of 4.
    #[arg(long, default_value_t = false)]
    exact: bool,
    /// Optional key=value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OutageArgs {
    /// SISO outage exponent (threshold of a Rayleigh SISO link with outage
    /// probability 10^-oe, shared across streams).
    #[arg(long)]
    oe: Option<f64>,
    /// Explicit eigenvalue threshold.
    #[arg(long)]
    lambda_out: Option<f64>,
    /// Target individual outage probability, inverted through the CDF.
    #[arg(long)]
    target_op: Option<f64>,
}

impl OutageArgs {
    fn flags(&self) -> OutageFlags {
        OutageFlags {
            oe: self.oe,
            lambda_out: self.lambda_out,
            target_op: self.target_op,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// BER of the exact Q function vs its Chernoff and dynamic bounds.
    Qbound {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        snr_min_db: Option<f64>,
        #[arg(long)]
        snr_max_db: Option<f64>,
        #[arg(long)]
        snr_step_db: Option<f64>,
    },
    /// Exact-Q SNR targets and tight bound constants per BER.
    Cparam {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated BER list.
        #[arg(long)]
        bers: Option<String>,
    },
    /// SISO vs MIMO individual outage across SISO outage exponents.
    Optable {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        nt: Option<u32>,
        #[arg(long)]
        nr: Option<u32>,
        /// Ordered stream index (1 = strongest; default: weakest).
        #[arg(long)]
        stream: Option<u32>,
        /// Comma-separated SISO outage exponents.
        #[arg(long)]
        oes: Option<String>,
    },
    /// Per-stream feasibility ceilings across an OE range.
    Constraint {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        nt: Option<u32>,
        #[arg(long)]
        nr: Option<u32>,
        #[arg(long)]
        oe_min: Option<f64>,
        #[arg(long)]
        oe_max: Option<f64>,
        #[arg(long)]
        oe_step: Option<f64>,
    },
    /// Closed-form average transmit power of both policies over a BER grid.
    Atp {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        nt: Option<u32>,
        #[arg(long)]
        nr: Option<u32>,
        /// Comma-separated receive-antenna counts (one output series each;
        /// overrides --nr).
        #[arg(long)]
        n_list: Option<String>,
        #[arg(long)]
        stream: Option<u32>,
        /// Comma-separated BER grid.
        #[arg(long)]
        bers: Option<String>,
        #[command(flatten)]
        outage: OutageArgs,
    },
    /// Monte Carlo estimates vs closed forms with z-scores; exits 4 when a
    /// z-gate fails.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        nt: Option<u32>,
        #[arg(long)]
        nr: Option<u32>,
        /// trad | dyn
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        ber: Option<f64>,
        #[command(flatten)]
        outage: OutageArgs,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Work-partition chunk size (part of the determinism contract).
        #[arg(long)]
        chunk: Option<u64>,
    },
    /// Re-run a recorded manifest and verify byte-identical output.
    Replay {
        #[command(flatten)]
        common: CommonArgs,
        /// Path to a .manifest file produced by a previous run.
        manifest: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<KvMap, CmdError> {
    match path {
        None => Ok(KvMap::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CmdError::invalid(format!("cannot read config {p:?}: {e}")))?;
            manifest::parse_kv(&text).map_err(CmdError::invalid)
        }
    }
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("EIGENWAVE_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n >= 1 {
                // A hint only; ignore failure if a pool already exists.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn emit(command_name: &str, out: &Option<PathBuf>, output: &CmdOutput) -> Result<(), CmdError> {
    let manifest_text = manifest::render(command_name, &output.params, &output.csv);
    match out {
        Some(path) => {
            std::fs::write(path, output.csv.as_bytes())
                .map_err(|e| CmdError::invalid(format!("cannot write {path:?}: {e}")))?;
            let mpath = PathBuf::from(format!("{}.manifest", path.display()));
            std::fs::write(&mpath, manifest_text.as_bytes())
                .map_err(|e| CmdError::invalid(format!("cannot write {mpath:?}: {e}")))?;
        }
        None => {
            std::io::stdout()
                .write_all(output.csv.as_bytes())
                .map_err(|e| CmdError::invalid(format!("stdout: {e}")))?;
            eprint!("{manifest_text}");
        }
    }
    Ok(())
}

fn run_from_kv(command: &str, kv: &KvMap) -> Result<CmdOutput, CmdError> {
    let none_outage = OutageFlags {
        oe: None,
        lambda_out: None,
        target_op: None,
    };
    match command {
        "qbound" => QboundParams::resolve(None, None, None, false, kv)?.run(),
        "cparam" => CparamParams::resolve(None, false, kv)?.run(),
        "optable" => OptableParams::resolve(None, None, None, None, false, kv)?.run(),
        "constraint" => {
            ConstraintParams::resolve(None, None, None, None, None, false, kv)?.run()
        }
        "atp" => {
            AtpParams::resolve(None, None, None, None, None, &none_outage, false, kv)?.run()
        }
        "simulate" => SimulateParams::resolve(
            None, None, None, None, &none_outage, None, None, None, false, kv,
        )?
        .run(),
        other => Err(CmdError::invalid(format!("unknown command {other:?} in manifest"))),
    }
}

fn dispatch(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::Qbound {
            common,
            snr_min_db,
            snr_max_db,
            snr_step_db,
        } => {
            let file = load_config(&common.config)?;
            let out =
                QboundParams::resolve(snr_min_db, snr_max_db, snr_step_db, common.exact, &file)?
                    .run()?;
            emit("qbound", &common.out, &out)
        }
        Command::Cparam { common, bers } => {
            let file = load_config(&common.config)?;
            let out = CparamParams::resolve(bers, common.exact, &file)?.run()?;
            emit("cparam", &common.out, &out)
        }
        Command::Optable {
            common,
            nt,
            nr,
            stream,
            oes,
        } => {
            let file = load_config(&common.config)?;
            let out = OptableParams::resolve(nt, nr, stream, oes, common.exact, &file)?.run()?;
            emit("optable", &common.out, &out)
        }
        Command::Constraint {
            common,
            nt,
            nr,
            oe_min,
            oe_max,
            oe_step,
        } => {
            let file = load_config(&common.config)?;
            let out =
                ConstraintParams::resolve(nt, nr, oe_min, oe_max, oe_step, common.exact, &file)?
                    .run()?;
            emit("constraint", &common.out, &out)
        }
        Command::Atp {
            common,
            nt,
            nr,
            n_list,
            stream,
            bers,
            outage,
        } => {
            let file = load_config(&common.config)?;
            let out = AtpParams::resolve(
                nt,
                nr,
                n_list,
                stream,
                bers,
                &outage.flags(),
                common.exact,
                &file,
            )?
            .run()?;
            emit("atp", &common.out, &out)
        }
        Command::Simulate {
            common,
            nt,
            nr,
            policy,
            ber,
            outage,
            samples,
            seed,
            chunk,
        } => {
            let file = load_config(&common.config)?;
            let out = SimulateParams::resolve(
                nt,
                nr,
                policy,
                ber,
                &outage.flags(),
                samples,
                seed,
                chunk,
                common.exact,
                &file,
            )?
            .run()?;
            emit("simulate", &common.out, &out)?;
            if !out.verified {
                return Err(CmdError {
                    message: "verification failed: a z-score gate was exceeded".to_string(),
                    code: 4,
                });
            }
            Ok(())
        }
        Command::Replay { common, manifest } => {
            let text = std::fs::read_to_string(&manifest)
                .map_err(|e| CmdError::invalid(format!("cannot read manifest {manifest:?}: {e}")))?;
            let kv = manifest::parse_kv(&text).map_err(CmdError::invalid)?;
            let command = kv
                .get("command")
                .ok_or_else(|| CmdError::invalid("manifest missing command key"))?
                .clone();
            let recorded = kv
                .get("checksum")
                .and_then(|c| c.strip_prefix("sha256:"))
                .ok_or_else(|| CmdError::invalid("manifest missing sha256 checksum"))?
                .to_string();
            let out = run_from_kv(&command, &kv)?;
            let fresh = manifest::sha256_hex(out.csv.as_bytes());
            emit(&command, &common.out, &out)?;
            if fresh != recorded {
                return Err(CmdError {
                    message: format!(
                        "replay checksum mismatch: recorded {recorded}, reproduced {fresh}"
                    ),
                    code: 4,
                });
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
