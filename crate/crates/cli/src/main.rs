use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use compound_delay::config::RunConfig;
use compound_delay::pipeline::{self, to_json};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Frequency-inequality checks for compound cocycles of delay equations.
#[derive(Parser)]
#[command(name = "cdfi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Characteristic roots, compound sums and the line report.
    Spectrum(Common),
    /// Spectrum plus frequency sweep; exit 0 verified, 1 violated, 2 inconclusive or error.
    Verify(Common),
    /// Frequency sweep only.
    Sweep(Common),
    /// Trajectory dump `t,x1..xn`.
    Simulate(Common),
    /// Adorned/twisted reconstruction residual against the grid spacing.
    StructuralCheck(Common),
    /// Cross-route test battery.
    Oracle(Common),
    /// Model presets.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
}

#[derive(Subcommand)]
enum ModelsAction {
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Directory for report files; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    json: bool,
}

struct Rendered {
    name: &'static str,
    json: String,
    csv: Option<String>,
    summary: String,
    code: u8,
}

fn emit(common: &Common, cfg: &RunConfig, r: Rendered) -> Result<()> {
    let dir = common.out.clone().or_else(|| cfg.output.clone());
    let both = !common.csv && !common.json;
    if let Some(dir) = dir {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        if common.json || both {
            write(&dir.join(format!("{}.json", r.name)), &r.json)?;
        }
        if let Some(csv) = &r.csv {
            if common.csv || both {
                write(&dir.join(format!("{}.csv", r.name)), csv)?;
            }
        }
        print!("{}", r.summary);
    } else if common.json {
        print!("{}", r.json);
    } else if common.csv {
        print!("{}", r.csv.as_deref().unwrap_or(""));
    } else {
        print!("{}", r.summary);
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(command: &Command, common: &Common) -> Result<u8> {
    let cfg = RunConfig::load(&common.config)?;
    if let Some(k) = common.jobs.or(cfg.jobs) {
        // a second call in the same process fails harmlessly
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global();
    }
    let rendered = match command {
        Command::Spectrum(_) => {
            let out = pipeline::run_spectrum(&cfg)?;
            let r = &out.report;
            let mut summary = format!(
                "{} m={}: {} roots, {} compound eigenvalues, s = {:.6}, nu0 = {} ({}), {} right of the line\n",
                out.resolved.preset,
                r.m,
                r.roots.len(),
                r.eigenvalues.len(),
                r.bound.s,
                r.nu0,
                out.resolved.nu0_source,
                r.unstable_count
            );
            for n in &out.notes {
                summary.push_str(&format!("note: {n}\n"));
            }
            Rendered {
                name: "spectrum",
                json: to_json(&out)?,
                csv: Some(out.to_csv()),
                summary,
                code: 0,
            }
        }
        Command::Verify(_) | Command::Sweep(_) => {
            let out = pipeline::run_verify(&cfg)?;
            let s = &out.sweep;
            let mut summary = format!(
                "{} tau={} m={} nu0={} lambda={:.6}: sup alpha = {:.6} at omega = {:.3}, threshold {:.6}, {}\n",
                out.resolved.preset,
                out.resolved.tau,
                out.resolved.m,
                out.resolved.nu0,
                out.resolved.lambda,
                s.sup,
                s.sup_omega,
                s.threshold,
                out.verdict
            );
            if let Some(line) = &out.interpretation {
                summary.push_str(line);
                summary.push('\n');
            }
            for n in &out.notes {
                summary.push_str(&format!("note: {n}\n"));
            }
            let (name, json) = match command {
                Command::Sweep(_) => ("sweep", to_json(&out.sweep)?),
                _ => ("verify", to_json(&out)?),
            };
            Rendered {
                name,
                json,
                csv: Some(out.to_csv()),
                summary,
                code: out.exit_code as u8,
            }
        }
        Command::Simulate(_) => {
            let csv = pipeline::run_simulate(&cfg)?;
            let json = to_json(
                &serde_json::json!({ "preset": cfg.model.name(), "simulate": cfg.simulate }),
            )?;
            Rendered {
                name: "simulate",
                summary: csv.clone(),
                json,
                csv: Some(csv),
                code: 0,
            }
        }
        Command::StructuralCheck(_) => {
            let out = pipeline::run_structural_check(&cfg)?;
            let summary = format!("{}fitted order {:.3}\n", out.to_csv(), out.order);
            Rendered {
                name: "structural",
                json: to_json(&out)?,
                csv: Some(out.to_csv()),
                summary,
                code: 0,
            }
        }
        Command::Oracle(_) => {
            let out = pipeline::run_oracle(&cfg)?;
            let mut summary = String::new();
            for r in &out.rows {
                summary.push_str(&format!(
                    "{:<32} {:<4} measured {:.3e} tolerance {:.1e}{}\n",
                    r.check,
                    if r.pass { "PASS" } else { "FAIL" },
                    r.measured,
                    r.tolerance,
                    r.detail
                        .as_deref()
                        .map(|d| format!(" ({d})"))
                        .unwrap_or_default()
                ));
            }
            Rendered {
                name: "oracle",
                json: to_json(&out)?,
                csv: Some(out.to_csv()),
                summary,
                code: out.exit_code() as u8,
            }
        }
        Command::Models { .. } => unreachable!(),
    };
    let code = rendered.code;
    emit(common, &cfg, rendered)?;
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Models {
            action: ModelsAction::List { json },
        } => {
            if *json {
                match to_json(&pipeline::preset_catalog()) {
                    Ok(s) => print!("{s}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
            } else {
                print!("{}", pipeline::models_table());
            }
            return ExitCode::SUCCESS;
        }
        Command::Spectrum(c)
        | Command::Verify(c)
        | Command::Sweep(c)
        | Command::Simulate(c)
        | Command::StructuralCheck(c)
        | Command::Oracle(c) => c,
    };
    match run(&cli.command, common) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
