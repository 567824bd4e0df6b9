//! `grp`: batch front end over JSONL files.
//!
//! Exit status: 0 on success, 2 when some record was degraded (parse
//! diagnostics, or a failed QC check), 1 on I/O, configuration or input
//! errors.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use grp_core::batch::{self, BatchOutput};
use grp_core::config::{ConfigLayer, RunConfig};
use grp_core::simulate::{simulate, AuxRange, Scenario};
use grp_core::{CounterKind, ParseMode};

#[derive(Parser, Debug)]
#[command(name = "grp", version, about = "Score, check and compare graph-structured reasoning traces")]
struct Cli {
    /// Key-value config file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads; output order does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_name = "strict|lenient")]
    mode: Option<ParseMode>,
    #[arg(long, global = true, value_name = "whitespace|chars")]
    counter: Option<CounterKind>,
    /// Omit the leading config header line.
    #[arg(long, global = true)]
    no_header: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Io {
    /// Input JSONL file; stdin when absent or `-`.
    input: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct WeightFlags {
    #[arg(long)]
    weight_fmt: Option<f64>,
    #[arg(long)]
    weight_conn: Option<f64>,
    #[arg(long)]
    weight_ers: Option<f64>,
    #[arg(long)]
    weight_reach: Option<f64>,
    #[arg(long)]
    weight_rev: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse traces and report diagnostics and canonical text.
    Validate {
        #[command(flatten)]
        io: Io,
        /// Also report style issues (dead ends, missing or misplaced answer).
        #[arg(long)]
        lint: bool,
    },
    /// Graph rewards per rollout.
    Score {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        weights: WeightFlags,
    },
    /// Stratified and vanilla advantages per group.
    Advantage {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        weights: WeightFlags,
        /// Weight of the graph-reward total in aux.
        #[arg(long)]
        aux_graph: Option<f64>,
        /// Weight of the format reward in aux.
        #[arg(long)]
        aux_format: Option<f64>,
    },
    /// Clipped policy objective per group of log-probabilities.
    Objective {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Structural quality control over a dataset.
    Qc {
        #[command(flatten)]
        io: Io,
        /// Where to write the summary JSON; stderr when absent.
        #[arg(long, value_name = "FILE")]
        summary: Option<PathBuf>,
    },
    /// Compare advantage estimators on synthetic groups with inflated aux.
    SimulateHacking {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        groups: usize,
        #[arg(long, default_value_t = 8)]
        group_size: usize,
        #[arg(long, default_value_t = 0.25)]
        frac_correct: f64,
        /// Aux range of correct samples, `low,high`.
        #[arg(long, default_value = "0.0,0.3", value_parser = parse_range)]
        correct_aux: AuxRange,
        /// Aux range of wrong samples, `low,high`.
        #[arg(long, default_value = "0.7,1.0", value_parser = parse_range)]
        wrong_aux: AuxRange,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<AuxRange, String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `low,high`")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok(AuxRange::new(num(lo)?, num(hi)?))
}

impl WeightFlags {
    fn apply(&self, layer: &mut ConfigLayer) {
        layer.weight_fmt = self.weight_fmt;
        layer.weight_conn = self.weight_conn;
        layer.weight_ers = self.weight_ers;
        layer.weight_reach = self.weight_reach;
        layer.weight_rev = self.weight_rev;
    }
}

fn flag_layer(cli: &Cli) -> ConfigLayer {
    let mut layer = ConfigLayer { jobs: cli.jobs, mode: cli.mode, counter: cli.counter, ..Default::default() };
    let io = match &cli.command {
        Command::Validate { io, .. } | Command::Qc { io, .. } => Some(io),
        Command::Score { io, weights } => {
            weights.apply(&mut layer);
            Some(io)
        }
        Command::Advantage { io, weights, aux_graph, aux_format } => {
            weights.apply(&mut layer);
            layer.aux_graph = *aux_graph;
            layer.aux_format = *aux_format;
            Some(io)
        }
        Command::Objective { io, epsilon, beta } => {
            layer.epsilon = *epsilon;
            layer.beta = *beta;
            Some(io)
        }
        Command::SimulateHacking { output, .. } => {
            layer.output = output.clone();
            None
        }
    };
    if let Some(io) = io {
        layer.input = io.input.clone();
        layer.output = io.output.clone();
    }
    layer
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
            ConfigLayer::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => ConfigLayer::default(),
    };
    Ok(RunConfig::resolve([&file, &flag_layer(cli)])?)
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display())),
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("cannot read stdin")?;
            Ok(s)
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).context("cannot write stdout")
        }
    }
}

fn render(header: Option<String>, lines: &[String]) -> String {
    let mut text = String::new();
    for line in header.iter().chain(lines) {
        text.push_str(line);
        text.push('\n');
    }
    text
}

fn run(cli: &Cli) -> Result<bool> {
    let config = load_config(cli)?;
    let (name, output) = match &cli.command {
        Command::SimulateHacking { seed, groups, group_size, frac_correct, correct_aux, wrong_aux, .. } => {
            let scenario = Scenario {
                groups: *groups,
                group_size: *group_size,
                frac_correct: *frac_correct,
                correct_aux: *correct_aux,
                wrong_aux: *wrong_aux,
                seed: *seed,
            };
            let report = simulate(&scenario)?;
            let line = serde_json::to_string(&report)?;
            write_output(config.output.as_deref(), &format!("{line}\n"))?;
            return Ok(false);
        }
        Command::Validate { lint, .. } => ("validate", run_batch(&config, |i| batch::run_validate(i, &config, *lint))?),
        Command::Score { .. } => ("score", run_batch(&config, |i| batch::run_score(i, &config))?),
        Command::Advantage { .. } => ("advantage", run_batch(&config, |i| batch::run_advantage(i, &config))?),
        Command::Objective { .. } => {
            let objective = config.objective()?;
            ("objective", run_batch(&config, |i| batch::run_objective(i, &config, &objective))?)
        }
        Command::Qc { summary, .. } => {
            let input = read_input(config.input.as_deref())?;
            let (out, totals) = batch::run_qc(&input, &config, None)?;
            let json = serde_json::to_string(&totals)?;
            match summary {
                Some(p) => fs::write(p, format!("{json}\n")).with_context(|| format!("cannot write {}", p.display()))?,
                None => eprintln!("{json}"),
            }
            ("qc", out)
        }
    };
    let header = (!cli.no_header).then(|| batch::header_line(name, &config));
    write_output(config.output.as_deref(), &render(header, &output.lines))?;
    Ok(output.degraded)
}

fn run_batch(config: &RunConfig, f: impl FnOnce(&str) -> Result<BatchOutput, batch::BatchError>) -> Result<BatchOutput> {
    let input = read_input(config.input.as_deref())?;
    Ok(f(&input)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
