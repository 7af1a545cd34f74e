use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use pcp_rmhd::cli_io::{
    check_inequalities, check_limiter, check_weak_pcp, convergence_suite, format_convergence_table,
    parse_assignment, parse_config, run_configured, CheckReport, RunConfig,
};
use pcp_rmhd::Result;

#[derive(Parser)]
#[command(
    name = "pcp-rmhd",
    version,
    about = "Positivity-preserving DG solver for 2D relativistic MHD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Problem name: smooth_sine, alfven, orszag_tang, blast, jet.
    #[arg(long)]
    problem: Option<String>,
    /// Extra `key=value` setting (problem parameter or config key); repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// TOML or key=value configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Positivity limiter.
    #[arg(long, value_name = "on|off")]
    pcp: Option<String>,
    /// TVB constant of the oscillation limiter, or `off`.
    #[arg(long = "tvb-m")]
    tvb_m: Option<String>,
    /// Base admissibility margin of the positivity limiter.
    #[arg(long)]
    eps: Option<String>,
}

impl Common {
    fn flags(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        if let Some(p) = &self.problem {
            out.push(("problem".to_string(), p.clone()));
        }
        for p in &self.params {
            out.push(parse_assignment(p)?);
        }
        for (k, v) in [
            ("pcp", &self.pcp),
            ("tvb_m", &self.tvb_m),
            ("eps", &self.eps),
        ] {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
        Ok(out)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem, writing snapshots, a run log and the resolved config.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(short = 'o', long = "out-dir")]
        out_dir: Option<PathBuf>,
        /// Continue from a snapshot's `.modal` sidecar.
        #[arg(long)]
        restart: Option<PathBuf>,
        /// Check every stage of every step for admissibility (slow).
        #[arg(long)]
        audit: bool,
    },
    /// Convergence table for a problem with an exact solution.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated grid sizes.
        #[arg(long, default_value = "10,20,40,80,160", value_delimiter = ',')]
        grids: Vec<usize>,
        /// Output table path.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Randomized audits of the inequalities, the limiter and the
    /// cell-average positivity of one Euler step.
    Check {
        /// Samples for the inequality and convexity audits.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Random limiter invocations.
        #[arg(long, default_value_t = 1000)]
        limiter_samples: usize,
        /// Random fields for the one-step positivity audit.
        #[arg(long, default_value_t = 1000)]
        fields: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn resolve(
    common: &Common,
    extra: Vec<(String, String)>,
) -> Result<(RunConfig, pcp_rmhd::problems::ProblemSpec)> {
    let mut flags = common.flags()?;
    flags.extend(extra);
    parse_config(common.config.as_deref(), &flags)
}

fn run_cmd(
    common: &Common,
    out_dir: Option<PathBuf>,
    restart: Option<PathBuf>,
    audit: bool,
) -> Result<ExitCode> {
    let mut extra = Vec::new();
    if let Some(d) = out_dir {
        extra.push(("out_dir".to_string(), d.display().to_string()));
    }
    if audit {
        extra.push(("audit".to_string(), "on".to_string()));
    }
    let (cfg, spec) = resolve(common, extra)?;
    eprintln!(
        "{} on {}x{} (k = {}), t_end = {}",
        spec.name, cfg.nx, cfg.ny, cfg.k, cfg.t_end
    );
    let start = Instant::now();
    let summary = run_configured(&cfg, &spec, restart.as_deref())?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "{} steps to t = {} in {:.1} s; output in {}",
        summary.steps,
        summary.final_state.time,
        start.elapsed().as_secs_f64(),
        cfg.out_dir.display()
    );
    if let Some(v) = summary.audit_violations {
        eprintln!("audit: {v} violations");
    }
    match summary.breakdown {
        Some(b) => {
            eprintln!(
                "breakdown at step {} (t = {:e}): {}",
                b.step, b.time, b.message
            );
            Ok(ExitCode::from(2))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

fn converge_cmd(common: &Common, grids: &[usize], output: Option<PathBuf>) -> Result<ExitCode> {
    let (cfg, spec) = resolve(common, Vec::new())?;
    let start = Instant::now();
    let rows = convergence_suite(
        &spec,
        grids,
        cfg.t_end,
        cfg.k,
        cfg.cfl,
        &cfg.limiter(),
        |r| {
            eprintln!(
                "N = {:4}  l1 = {:.4e}  l2 = {:.4e}  ({:.1} s)",
                r.n,
                r.l1,
                r.l2,
                start.elapsed().as_secs_f64()
            );
        },
    )?;
    let table = format_convergence_table(&rows);
    print!("{table}");
    let path = output.unwrap_or_else(|| PathBuf::from(format!("convergence_{}.txt", spec.name)));
    std::fs::write(&path, table)?;
    eprintln!("table written to {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn check_cmd(samples: usize, limiter_samples: usize, fields: usize, seed: u64) -> Result<ExitCode> {
    let mut report = CheckReport::default();
    check_inequalities(samples, seed, &mut report)?;
    check_limiter(limiter_samples, seed.wrapping_add(1), &mut report)?;
    check_weak_pcp(fields, seed.wrapping_add(2), &mut report)?;
    for line in report.lines() {
        println!("{line}");
    }
    let ok = report.passed();
    println!(
        "{}",
        if ok {
            "all checks passed"
        } else {
            "CHECKS FAILED"
        }
    );
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            common,
            out_dir,
            restart,
            audit,
        } => run_cmd(common, out_dir.clone(), restart.clone(), *audit),
        Command::Converge {
            common,
            grids,
            output,
        } => converge_cmd(common, grids, output.clone()),
        Command::Check {
            samples,
            limiter_samples,
            fields,
            seed,
        } => check_cmd(*samples, *limiter_samples, *fields, *seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
