use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bpsmooth::bp::{BpMatching, RunOptions};
use bpsmooth::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use bpsmooth::instance::io::read_instance;
use bpsmooth::oracles::{
    cheapest_residual_cycle, flow_delta_enumeration, matching_delta, min_cost_flow, mwm,
    ENUMERATION_EDGE_CAP,
};
use bpsmooth::{Error, Instance};

#[derive(Parser)]
#[command(name = "bpsmooth", version, about = "Belief propagation for bipartite matching and its convergence tails")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Experiment config (key = value lines)
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment
    Run(Overrides),
    /// Run BP (or min-cost flow) on one instance file
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Also run the exact oracles
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 10_000)]
        t_max: usize,
        #[arg(long, default_value_t = 4)]
        window: usize,
        /// Write per-iteration beliefs as CSV
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a lemma_checks experiment
    CheckLemmas(Overrides),
}

fn load_config(o: &Overrides) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&o.config)
        .map_err(|e| Error::Config(format!("{}: {e}", o.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(t) = o.trials {
        cfg.trials = t;
    }
    if let Some(p) = &o.out {
        cfg.out = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn experiment(o: &Overrides, lemmas_only: bool) -> Result<bool, Error> {
    let cfg = load_config(o)?;
    if lemmas_only && cfg.kind != ExperimentKind::LemmaChecks {
        return Err(Error::Config("check-lemmas needs kind = lemma_checks".into()));
    }
    let (_, summary) = run_experiment(&cfg)?;
    print!("{}", summary.text);
    Ok(summary.passed())
}

fn fmt_assignment(a: &[Option<usize>]) -> String {
    a.iter()
        .enumerate()
        .map(|(i, j)| match j {
            Some(j) => format!("u{}->v{}", i + 1, j + 1),
            None => format!("u{}->-", i + 1),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn solve(path: &Path, oracle: bool, t_max: usize, window: usize, trace: Option<&Path>) -> Result<bool, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match read_instance(&text)? {
        Instance::Bipartite(inst) => {
            let bp = BpMatching::new(&inst)?;
            let mut opts = RunOptions::new(t_max, window);
            let best = if oracle { Some(mwm(&inst)?) } else { None };
            if let Some(m) = &best {
                opts = opts.with_oracle(m, inst.n_left);
            }
            let r = match trace {
                Some(p) => {
                    let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
                    bp.run_traced(&opts, &mut f)?
                }
                None => bp.run(&opts),
            };
            match r.tau {
                Some(t) => println!("bp: converged, tau = {t}"),
                None => println!("bp: censored after {} iterations", r.last_iteration),
            }
            println!("assignment: {}", fmt_assignment(&r.final_assignment));
            println!("is_matching: {}", r.is_matching);
            if r.tie_detected {
                println!("warning: tie detected in belief decoding");
            }
            if let Some(m) = best {
                let pairs: Vec<String> = m.pairs.iter().map(|(i, j)| format!("u{}-v{}", i + 1, j + 1)).collect();
                println!("optimum: {{{}}} weight {}", pairs.join(", "), m.weight);
                println!("matched_oracle: {}", r.matched_oracle == Some(true));
                if inst.edge_count() <= ENUMERATION_EDGE_CAP {
                    let g = matching_delta(&inst)?;
                    println!("delta: {}", g.delta);
                }
            }
        }
        Instance::Flow(net) => {
            let f = min_cost_flow(&net)?;
            println!("min-cost flow: {:?} cost {}", f.flow, f.cost(&net));
            match cheapest_residual_cycle(&net, &f)? {
                Some(d) => println!("Delta: {d}"),
                None => println!("Delta: absent (no residual cycle)"),
            }
            if oracle {
                match flow_delta_enumeration(&net) {
                    Ok(g) => println!("delta: {}", g.delta),
                    Err(Error::Cap(m)) => println!("delta: skipped ({m})"),
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(o) => experiment(o, false),
        Command::CheckLemmas(o) => experiment(o, true),
        Command::Solve { instance, oracle, t_max, window, trace } => {
            solve(instance, *oracle, *t_max, *window, trace.as_deref())
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
