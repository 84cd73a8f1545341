use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gbcs_core::controllability::{analyze, Tolerances, DEFAULT_T_TOL};
use gbcs_core::linalg::RankTol;
use gbcs_core::lqgame::{
    cost, default_params, nash_deviation_check, riccati_solve, simulate, GbcsParams,
    NashCheckConfig, ParamOverrides,
};
use gbcs_core::scan::{conjecture_scan, records_to_csv, Classification, ScanConfig, MAX_AGENTS};
use gbcs_core::strategy::{coarsest_sep_traced, strategy_matrix};
use gbcs_core::topology::{load_topology, Topology};
use gbcs_core::{GbcsError, Signal, Vector};
use serde_json::json;

mod failure;

use failure::Failure;

const THREADS_VAR: &str = "GBCS_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "gbcs-lab",
    version,
    about = "Controllability and equilibrium tools for game-based control systems"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Game horizon (overrides the parameter file)
    #[arg(long, global = true)]
    tf: Option<f64>,
    /// Integration steps
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Rank threshold: `auto` or an absolute singular-value cutoff
    #[arg(long, global = true, default_value = "auto")]
    rank_tol: RankTol,
    /// Tolerance for equal rows of T within a partition cell
    #[arg(long, global = true, default_value_t = DEFAULT_T_TOL)]
    t_tol: f64,
    /// Write a machine-readable report here
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Write tabular output here
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Seed for randomised checks
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file of parameter overrides
    #[arg(long, global = true)]
    params: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Initial {
    /// Initial state, comma separated (default all ones)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Constant regulator input
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    z: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full controllability report for a graph
    Analyze { graph: PathBuf },
    /// Print the strategy matrix
    Smatrix { graph: PathBuf },
    /// Print the coarsest strategy-equivalent partition
    Sep { graph: PathBuf },
    /// Solve the per-player Riccati equations
    Riccati { graph: PathBuf },
    /// Simulate the equilibrium trajectory
    Simulate {
        graph: PathBuf,
        #[command(flatten)]
        initial: Initial,
    },
    /// Check the equilibrium against random unilateral deviations
    NashCheck {
        graph: PathBuf,
        #[command(flatten)]
        initial: Initial,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1.0e-2)]
        eps: f64,
    },
    /// Classify every graph with the given number of agents
    Scan {
        #[arg(long)]
        agents: usize,
        /// Keep one graph per isomorphism class
        #[arg(long)]
        dedup_iso: bool,
        /// Raise the agent-count guard (at most 7)
        #[arg(long)]
        max_agents: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let c = &cli.common;
    match &cli.command {
        Command::Analyze { graph } => cmd_analyze(c, graph),
        Command::Smatrix { graph } => cmd_smatrix(c, graph),
        Command::Sep { graph } => cmd_sep(c, graph),
        Command::Riccati { graph } => cmd_riccati(c, graph),
        Command::Simulate { graph, initial } => cmd_simulate(c, graph, initial),
        Command::NashCheck {
            graph,
            initial,
            trials,
            eps,
        } => cmd_nash(c, graph, initial, *trials, *eps),
        Command::Scan {
            agents,
            dedup_iso,
            max_agents,
        } => cmd_scan(c, *agents, *dedup_iso, *max_agents),
    }
}

fn read_graph(path: &Path) -> Result<Topology, Failure> {
    match load_topology(path) {
        Ok(Ok(top)) => Ok(top),
        Ok(Err(e)) => Err(Failure::parse(format!("{}: {e}", path.display()))),
        Err(e) => Err(Failure::parse(format!(
            "cannot read {}: {e}",
            path.display()
        ))),
    }
}

fn overrides(c: &Common) -> Result<ParamOverrides, Failure> {
    let mut o = match &c.params {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))?;
            ParamOverrides::from_json(&text)
                .map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?
        }
        None => ParamOverrides::default(),
    };
    if c.tf.is_some() {
        o.horizon = c.tf;
    }
    Ok(o)
}

fn params(c: &Common, top: &Topology) -> Result<GbcsParams, Failure> {
    default_params(top, &overrides(c)?).map_err(|e| match e {
        GbcsError::InvalidArgument(_) => Failure::from(e),
        other => Failure::parse(format!("parameters: {other}")),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::parse(format!("cannot write {}: {e}", path.display())))
}

fn write_json(c: &Common, value: &serde_json::Value) -> Result<(), Failure> {
    match &c.json {
        Some(path) => {
            let text = serde_json::to_string_pretty(value).expect("json value serialises");
            write_file(path, &(text + "\n"))
        }
        None => Ok(()),
    }
}

fn initial_state(p: &GbcsParams, initial: &Initial) -> Result<(Vector, Signal), Failure> {
    let x0 = match &initial.x0 {
        Some(v) if v.len() != p.n() => {
            return Err(Failure::usage(format!(
                "--x0 needs {} values (regulator then agents), got {}",
                p.n(),
                v.len()
            )))
        }
        Some(v) => Vector::from_column_slice(v),
        None => Vector::from_element(p.n(), 1.0),
    };
    let z = Signal::constant(p.horizon, initial.z)?;
    Ok((x0, z))
}

fn cmd_analyze(c: &Common, graph: &Path) -> Result<(), Failure> {
    let top = read_graph(graph)?;
    let p = params(c, &top)?;
    let tol = Tolerances {
        rank: c.rank_tol,
        t_rows: c.t_tol,
    };
    let report = analyze(&top, &p, tol)?;
    println!("agents            {}", report.agents);
    println!("edges             {}", report.edges.len());
    println!("partition         {}", format_cells(&report.sep_cells));
    println!("T row deviation   {:?}", report.t_row_deviation_per_cell);
    println!("thm2 uncontrollable {}", report.thm2_uncontrollable);
    println!("thm2 applies      {}", report.thm2_applies);
    println!("kalman rank       {}", report.kalman_rank);
    println!(
        "projected rank    {} of {} (alt {})",
        report.projected_rank,
        report.agents + 1,
        report.projected_rank_alt
    );
    println!("controllable      {}", report.controllable);
    println!("params digest     {}", report.params_digest);
    write_json(c, &report.to_json())?;
    report.check_invariants()?;
    Ok(())
}

fn format_cells(cells: &[Vec<usize>]) -> String {
    let parts: Vec<String> = cells
        .iter()
        .map(|c| {
            let m: Vec<String> = c.iter().map(usize::to_string).collect();
            format!("{{{}}}", m.join(","))
        })
        .collect();
    format!("{{{}}}", parts.join(", "))
}

fn cmd_smatrix(c: &Common, graph: &Path) -> Result<(), Failure> {
    let top = read_graph(graph)?;
    let s = strategy_matrix(&top);
    print!("{s}");
    write_json(
        c,
        &json!({ "agents": top.agents(), "strategy_matrix": s.rows() }),
    )
}

fn cmd_sep(c: &Common, graph: &Path) -> Result<(), Failure> {
    let top = read_graph(graph)?;
    let (partition, rounds) = coarsest_sep_traced(&strategy_matrix(&top));
    println!("{partition}");
    println!("refinement rounds {rounds}");
    write_json(
        c,
        &json!({ "agents": top.agents(), "sep_cells": partition.cells(), "rounds": rounds }),
    )
}

fn cmd_riccati(c: &Common, graph: &Path) -> Result<(), Failure> {
    let top = read_graph(graph)?;
    let p = params(c, &top)?;
    let sol = riccati_solve(&p, c.steps.unwrap_or(200))?;
    for i in 0..p.players() {
        println!("K_{}(0) =", i + 1);
        let k = sol.at_start(i);
        for r in 0..k.nrows() {
            let row: Vec<String> = k.row(r).iter().map(|v| format!("{v:12.6}")).collect();
            println!("  {}", row.join(" "));
        }
    }
    println!("max asymmetry {:.3e}", sol.max_asymmetry);
    if let Some(path) = &c.csv {
        let n = p.n();
        let mut header = vec!["t".to_string()];
        for i in 1..=p.players() {
            for r in 0..n {
                for col in 0..n {
                    header.push(format!("k{i}_{r}_{col}"));
                }
            }
        }
        let mut out = header.join(",") + "\n";
        for (j, t) in sol.times.iter().enumerate() {
            let mut row = vec![format!("{t:.15e}")];
            for k in &sol.k {
                row.extend(k[j].transpose().iter().map(|v| format!("{v:.15e}")));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        write_file(path, &out)?;
    }
    let start: Vec<Vec<Vec<f64>>> = (0..p.players())
        .map(|i| {
            let k = sol.at_start(i);
            (0..k.nrows())
                .map(|r| k.row(r).iter().copied().collect())
                .collect()
        })
        .collect();
    write_json(
        c,
        &json!({ "steps": sol.steps(), "k_start": start, "max_asymmetry": sol.max_asymmetry }),
    )
}

fn cmd_simulate(c: &Common, graph: &Path, initial: &Initial) -> Result<(), Failure> {
    let top = read_graph(graph)?;
    let p = params(c, &top)?;
    let (x0, z) = initial_state(&p, initial)?;
    let traj = simulate(&p, &x0, &z, c.steps.unwrap_or(400))?;
    let costs = (0..p.players())
        .map(|i| cost(&p, &traj, i))
        .collect::<gbcs_core::Result<Vec<f64>>>()?;
    let last = traj.state(traj.steps());
    let fin: Vec<String> = last.iter().map(|v| format!("{v:.6}")).collect();
    println!("x(T) = [{}]", fin.join(", "));
    for (i, j) in costs.iter().enumerate() {
        println!("J_{} = {j:.9}", i + 1);
    }
    if let Some(path) = &c.csv {
        write_file(path, &traj.to_csv())?;
    }
    write_json(
        c,
        &json!({
            "horizon": p.horizon,
            "steps": traj.steps(),
            "final_state": last.iter().copied().collect::<Vec<f64>>(),
            "costs": costs,
            "params_digest": p.digest(),
        }),
    )
}

fn cmd_nash(
    c: &Common,
    graph: &Path,
    initial: &Initial,
    trials: usize,
    eps: f64,
) -> Result<(), Failure> {
    let top = read_graph(graph)?;
    let p = params(c, &top)?;
    let (x0, z) = initial_state(&p, initial)?;
    let defaults = NashCheckConfig::default();
    let config = NashCheckConfig {
        trials,
        eps,
        steps: c.steps.unwrap_or(defaults.steps),
        seed: c.seed.unwrap_or(defaults.seed),
    };
    let report = nash_deviation_check(&p, &x0, &z, &config)?;
    println!(
        "seed {:#x}, eps {:e}, {} trials per player",
        report.seed, report.eps, report.trials
    );
    for (i, (j, d)) in report
        .equilibrium_costs
        .iter()
        .zip(&report.delta)
        .enumerate()
    {
        let worst = d.iter().copied().fold(f64::INFINITY, f64::min);
        println!("player {}: J = {j:.9}, min dJ = {worst:.3e}", i + 1);
    }
    println!("certified {}", report.certified);
    let value = serde_json::to_value(&report).expect("report serialises");
    write_json(c, &value)?;
    if report.certified {
        Ok(())
    } else {
        Err(Failure::numeric(format!(
            "a deviation lowered some cost by {:.3e}",
            -report.min_delta
        )))
    }
}

fn threads_from_env() -> Result<usize, Failure> {
    match std::env::var(THREADS_VAR) {
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| {
            Failure::usage(format!(
                "{THREADS_VAR} must be a nonnegative integer, got '{v}'"
            ))
        }),
        Err(_) => Ok(0),
    }
}

fn cmd_scan(
    c: &Common,
    agents: usize,
    dedup_iso: bool,
    max_agents: Option<usize>,
) -> Result<(), Failure> {
    let mut config = ScanConfig::new(agents);
    config.dedup_iso = dedup_iso;
    config.overrides = overrides(c)?;
    config.tolerances = Tolerances {
        rank: c.rank_tol,
        t_rows: c.t_tol,
    };
    config.threads = threads_from_env()?;
    if let Some(m) = max_agents {
        if m > MAX_AGENTS {
            return Err(Failure::usage(format!(
                "--max-agents cannot exceed {MAX_AGENTS}"
            )));
        }
        config.max_agents = m;
    }
    let result = conjecture_scan(&config)?;
    let s = &result.summary;
    println!("graphs                      {}", s.graphs);
    println!("consistent                  {}", s.consistent);
    println!("theorem violations          {}", s.theorem_violations);
    println!(
        "conjecture counterexamples  {}",
        s.conjecture_counterexamples
    );
    println!("numeric failures            {}", s.numeric_failures);
    for r in &result.records {
        if r.classification != Classification::Consistent {
            println!(
                "  graph {} [{}] {}",
                r.graph_id,
                r.edges_field(),
                r.classification
            );
        }
    }
    if let Some(path) = &c.csv {
        write_file(path, &records_to_csv(&result.records))?;
    }
    write_json(c, &json!({ "summary": s, "records": result.records }))?;
    if s.theorem_violations > 0 {
        return Err(Failure::invariant(format!(
            "{} graphs contradict the partition test",
            s.theorem_violations
        )));
    }
    Ok(())
}
