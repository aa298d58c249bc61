use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dsgda::config::{load_config, load_preset, ConfigError, ExperimentConfig, ScheduleConfig};
use dsgda::engine::run;
use dsgda::experiment::{
    check_trajectory, run_seed, stability_study, sweep_to_dir, with_workers, ExperimentError, Instance, Point, WORKERS_ENV,
};
use dsgda::problems::Family;
use dsgda::report;
use dsgda::topology::{build_mixing_matrix, Topology, TopologyKind};

#[derive(Parser)]
#[command(name = "dsgda", version, about = "Decentralized SGDA stability laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral quantities of mixing matrices as CSV.
    Topology {
        /// Topology name, or `all`.
        #[arg(long, default_value = "all")]
        topology: String,
        #[arg(long, default_value_t = 16)]
        m: usize,
        /// Decay exponent of the topology constant.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// One training run; writes trajectory.csv.
    Run {
        #[command(flatten)]
        source: ConfigArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Coupled runs on neighboring datasets; writes per-seed deltas and a JSON summary.
    Stability {
        #[command(flatten)]
        source: ConfigArgs,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluates every applicable bound at the configured point.
    Bounds {
        #[command(flatten)]
        source: ConfigArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Stability study over the Cartesian product of the sweep axes.
    Sweep {
        #[command(flatten)]
        source: ConfigArgs,
        /// Output directory; defaults to the configured one.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Joins sweep.csv with sweep_bounds.csv.
    Compare {
        #[arg(long)]
        stability: PathBuf,
        #[arg(long)]
        bounds: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Markdown,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset: scsc_quadratic, auc_cc or ncnc_sine.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "T")]
    iterations: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), ExperimentError> {
        let (mut cfg, path) = match (&self.config, &self.preset) {
            (Some(p), _) => (load_config(p)?, p.clone()),
            (None, Some(name)) => (load_preset(name)?, PathBuf::from(name)),
            (None, None) => return Err(ConfigError::new("<cli>", "config", "pass --config or --preset").into()),
        };
        if let Some(t) = &self.topology {
            cfg.topology.kind =
                t.parse::<TopologyKind>().map_err(|e| ConfigError::new(&path, "topology", e.to_string()))?;
        }
        if let Some(m) = self.m {
            cfg.data.m = m;
        }
        if let Some(n) = self.n {
            cfg.data.n = n;
        }
        if let Some(t) = self.iterations {
            cfg.iterations = t;
        }
        if let Some(eta) = self.eta {
            cfg.schedule = ScheduleConfig::Fixed { eta: Some(eta), eta_x: None, eta_y: None };
        }
        if let Some(s) = self.seed {
            cfg.data.seed = s;
        }
        cfg.validate(&path)?;
        Ok((cfg, path))
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), ExperimentError> {
    match output {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<(), ExperimentError> {
    match cmd {
        Command::Topology { topology, m, c, output } => {
            let kinds: Vec<TopologyKind> = if topology == "all" {
                TopologyKind::ALL.to_vec()
            } else {
                vec![topology.parse().map_err(|e: dsgda::topology::TopologyError| ConfigError::new("<cli>", "topology", e.to_string()))?]
            };
            let all = kinds.len() > 1;
            let mut mats = Vec::new();
            for k in kinds {
                match build_mixing_matrix(Topology::new(k, m)) {
                    Ok(mx) => mats.push((k, mx)),
                    Err(e) if all => eprintln!("skipping {k}: {e}"),
                    Err(e) => return Err(e.into()),
                }
            }
            let rows: Vec<_> = mats.iter().map(|(k, mx)| (*k, mx)).collect();
            emit(output.as_deref(), &report::topology_csv(&rows, c))
        }
        Command::Run { source, output } => {
            let (cfg, _) = source.load()?;
            let point = Point::base(&cfg);
            let inst = Instance::build(&cfg, &point)?;
            let rc = inst.run_config(&cfg, run_seed(&cfg, 0));
            let ds = &inst.draw_for(0).dataset;
            let traj = run(&rc, ds)?;
            check_trajectory(&traj, &inst.problem.domain)?;
            let saddle = match &inst.problem.family {
                Family::Quadratic(q) => q.empirical_saddle(&ds.shards, &inst.problem.domain).ok(),
                _ => None,
            };
            let text = report::trajectory_csv(&traj, saddle.as_ref().map(|s| (s.x.as_slice(), s.y.as_slice())));
            let out = output.unwrap_or_else(|| Path::new(&cfg.output_dir).join("trajectory.csv"));
            emit(Some(&out), &text)
        }
        Command::Stability { source, seeds, output } => {
            let (mut cfg, path) = source.load()?;
            if let Some(k) = seeds {
                cfg.seeds = k;
                cfg.validate(&path)?;
            }
            let study = with_workers(|| stability_study(&cfg, &Point::base(&cfg)))?;
            let out = output.unwrap_or_else(|| Path::new(&cfg.output_dir).join("stability.csv"));
            emit(Some(&out), &report::stability_csv(&study))?;
            emit(Some(&out.with_extension("json")), &report::stability_summary_json(&study))
        }
        Command::Bounds { source, format, output } => {
            let (cfg, _) = source.load()?;
            let point = Point::base(&cfg);
            let inst = Instance::build(&cfg, &point)?;
            let (reports, ..) = dsgda::experiment::family_bounds(&inst.problem.family, &inst.bound_inputs(&cfg, &point));
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n",
                _ => report::bounds_csv(&reports),
            };
            emit(output.as_deref(), &text)
        }
        Command::Sweep { source, output } => {
            let (cfg, _) = source.load()?;
            let dir = output.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            let result = sweep_to_dir(&cfg, &dir)?;
            eprintln!("{} combinations written to {}", result.rows.len(), dir.display());
            Ok(())
        }
        Command::Compare { stability, bounds, format, output } => {
            let s = std::fs::read_to_string(&stability)?;
            let b = std::fs::read_to_string(&bounds)?;
            let r = report::compare_report(&s, &b)?;
            let text = match format {
                Format::Csv => r.to_csv(),
                Format::Markdown => r.to_markdown(),
                Format::Json => serde_json::to_string_pretty(&r).expect("report serializes") + "\n",
            };
            emit(output.as_deref(), &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        if v.trim().parse::<usize>().is_err() {
            eprintln!("error: {WORKERS_ENV} must be a positive integer");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
