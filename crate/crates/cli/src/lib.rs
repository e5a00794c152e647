//! Command-line front-end: subcommands, config loading and artifact output.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use acan_core::baseline::BaselineConfig;
use acan_core::bench::{
    baseline_loading_energy, compare_designs, corner_study, linspace, optimize_frequency, scaled_config,
    scaling_study, sweep_codes, sweep_freq_duty, sweep_width_duty, BenchOptions, LoadCase, WindowProtocol,
    FULL_PROTOCOL_REPEATS,
};
use acan_core::engine::{energy_residual, SimOptions};
use acan_core::model::{CircuitConfig, Corner};
use acan_core::neuron::{run_neuron_with, InputCode};
use acan_core::units::{parse_quantity, Unit};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::load_config;
use crate::output::{config_hash, emit_outputs, write_manifest, Outputs, RunManifest, TOOL_VERSION};

#[derive(Debug, Parser)]
#[command(name = "acan", version, about = "Adiabatic capacitive neuron simulator and benchmarks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config; omitted fields take the default scenario.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Maximum concurrent simulations.
    #[arg(long, global = true, env = "ACAN_JOBS")]
    pub jobs: Option<usize>,
    /// Seed for scrambled input orders.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Also write the full sampled trace (run only).
    #[arg(long, global = true)]
    pub trace: bool,
    /// Cycles simulated per fixed-load point.
    #[arg(long, global = true, default_value_t = 600)]
    pub cycles: usize,
    /// Startup cycles excluded from energy figures.
    #[arg(long, global = true, default_value_t = 200)]
    pub skip: usize,
    /// Sliding-window length of the worst-window metric.
    #[arg(long, global = true, default_value_t = 20)]
    pub window: usize,
    /// Repeats of the five sweep orders.
    #[arg(long, global = true, default_value_t = 8)]
    pub repeats: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one input stream and record per-cycle results.
    Run {
        /// all-0, all-1, code-sweep, or sweeps (ascending plus four scrambled orders).
        #[arg(long, default_value = "sweeps")]
        load: String,
    },
    /// Worst-window energy over clock frequency × duty.
    SweepFreq {
        #[arg(long, default_value = "900kHz", value_parser = hertz)]
        f_min: f64,
        #[arg(long, default_value = "1.1MHz", value_parser = hertz)]
        f_max: f64,
        #[arg(long, default_value_t = 21)]
        f_points: usize,
        #[arg(long, value_delimiter = ',', default_value = "1%,2%,5%,10%", value_parser = ratio)]
        duties: Vec<f64>,
        #[arg(long, default_value = "all-0", value_parser = load_case)]
        load: LoadCase,
    },
    /// Worst sweep-average energy over bypass width × duty.
    SweepWidth {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "10um,20um,30um,40um,50um,60um,70um,80um,90um,100um",
            value_parser = meter
        )]
        widths: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1%,2%,5%,10%", value_parser = ratio)]
        duties: Vec<f64>,
        /// Use the full 32-repeat protocol.
        #[arg(long)]
        full_protocol: bool,
    },
    /// Optimal frequency and energies over C_E × loading.
    SweepScaling {
        #[arg(long, default_value_t = 512)]
        synapses: usize,
        #[arg(long, value_delimiter = ',', default_value = "25pF,100pF,1000pF", value_parser = farad)]
        c_e: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1", value_parser = ratio)]
        alphas: Vec<f64>,
        /// Keep switch and node parasitics (removed by default).
        #[arg(long)]
        with_parasitics: bool,
    },
    /// Search the energy-optimal clock frequency at one loading.
    OptimizeFreq {
        #[arg(long, default_value = "0", value_parser = ratio)]
        alpha: f64,
    },
    /// Process corners × temperatures at the operating frequency.
    Corners {
        #[arg(long, value_delimiter = ',', default_value = "FF,TT,SS,FS,SF")]
        corners: Vec<Corner>,
        #[arg(long, value_delimiter = ',', default_value = "0,25,50,75,100", value_parser = celsius)]
        temps: Vec<f64>,
    },
    /// Adiabatic versus conventional neuron on identical inputs.
    Compare,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run { .. } => "run",
            Command::SweepFreq { .. } => "sweep-freq",
            Command::SweepWidth { .. } => "sweep-width",
            Command::SweepScaling { .. } => "sweep-scaling",
            Command::OptimizeFreq { .. } => "optimize-freq",
            Command::Corners { .. } => "corners",
            Command::Compare => "compare",
        }
    }
}

fn quantity(s: &str, unit: Unit) -> std::result::Result<f64, String> {
    parse_quantity(s, unit).map_err(|e| e.to_string())
}

fn hertz(s: &str) -> std::result::Result<f64, String> {
    quantity(s, Unit::Hertz)
}

fn ratio(s: &str) -> std::result::Result<f64, String> {
    quantity(s, Unit::Ratio)
}

fn meter(s: &str) -> std::result::Result<f64, String> {
    quantity(s, Unit::Meter)
}

fn farad(s: &str) -> std::result::Result<f64, String> {
    quantity(s, Unit::Farad)
}

fn celsius(s: &str) -> std::result::Result<f64, String> {
    quantity(s, Unit::Celsius)
}

fn load_case(s: &str) -> std::result::Result<LoadCase, String> {
    s.parse().map_err(|e: acan_core::Error| e.to_string())
}

/// Parses `args` and runs the subcommand; returns the process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn bench_options(g: &GlobalArgs) -> Result<BenchOptions> {
    let protocol = WindowProtocol {
        cycles: g.cycles,
        skip: g.skip,
        window: g.window,
    };
    protocol.validate()?;
    anyhow::ensure!(g.repeats > 0, "--repeats must be positive");
    Ok(BenchOptions {
        protocol,
        seed: g.seed,
        repeats: g.repeats,
        ..BenchOptions::default()
    })
}

/// Runs the parsed command and writes its artifacts; returns the written paths.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let g = &cli.global;
    let cfg = match &g.config {
        Some(path) => load_config(path).with_context(|| format!("loading {}", path.display()))?,
        None => CircuitConfig::default(),
    };
    let opts = bench_options(g)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = g.jobs {
        anyhow::ensure!(j > 0, "--jobs must be positive");
        pool = pool.num_threads(j);
    }
    let pool = pool.build()?;
    let started = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let name = cli.command.name();
    log::info!("{name}: starting");
    let (outputs, results) = pool.install(|| run_command(&cli.command, &cfg, &opts, g.trace))?;
    let hash = config_hash(&cfg)?;
    let summary = json!({
        "subcommand": name,
        "config_hash": hash,
        "seed": g.seed,
        "tool_version": TOOL_VERSION,
        "protocol": opts.protocol,
        "repeats": opts.repeats,
        "results": results,
    });
    let names = emit_outputs(outputs, &summary, &g.out)?;
    let manifest = RunManifest {
        config_hash: hash,
        seed: g.seed,
        tool_version: TOOL_VERSION.to_string(),
        subcommand: name.to_string(),
        started,
        finished: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        outputs: names.clone(),
    };
    let manifest_path = write_manifest(&manifest, &g.out)?;
    let mut paths: Vec<PathBuf> = names.iter().map(|n| g.out.join(n)).collect();
    paths.push(manifest_path);
    Ok(paths)
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn run_command(
    cmd: &Command,
    cfg: &CircuitConfig,
    opts: &BenchOptions,
    trace: bool,
) -> Result<(Outputs, serde_json::Value)> {
    let mut out = Outputs::default();
    let results = match cmd {
        Command::Run { load } => {
            let n = cfg.tree.n();
            let codes: Vec<InputCode> = if load == "sweeps" {
                sweep_codes(n, opts)?
            } else {
                load.parse::<LoadCase>()?.codes(n, opts.protocol.cycles)?
            };
            let sim = SimOptions {
                record_trace: trace,
                ..SimOptions::default()
            };
            let (run, raw) = run_neuron_with(cfg, &codes, &sim)?;
            out.add_csv("neuron.csv", |b| run.write_csv(b))?;
            if let Some(tr) = &raw.trace {
                out.add_csv("trace.csv", |b| tr.write_csv(b))?;
            }
            let total = raw.ledger.total();
            json!({
                "cycles": run.len(),
                "mean_tree_energy_J": run.mean_tree_energy(),
                "worst_tree_energy_J": run.worst_tree_energy(),
                "mean_soma_energy_J": run.mean_soma_energy(),
                "total_dissipation_J": total.network_dissipation(),
                "energy_residual_J": energy_residual(&raw.ledger),
                "outputs": run.output_bits(),
            })
        }
        Command::SweepFreq {
            f_min,
            f_max,
            f_points,
            duties,
            load,
        } => {
            anyhow::ensure!(*f_points > 0 && f_max >= f_min, "need f_points > 0 and f_max >= f_min");
            let freqs = linspace(*f_min, *f_max, *f_points);
            let s = sweep_freq_duty(cfg, &freqs, duties, *load, opts)?;
            out.add_csv("surface.csv", |b| s.write_csv(b))?;
            json!({ "load": load, "points": s.energy.len(), "arg_min": s.arg_min })
        }
        Command::SweepWidth {
            widths,
            duties,
            full_protocol,
        } => {
            let o = BenchOptions {
                repeats: if *full_protocol { FULL_PROTOCOL_REPEATS } else { opts.repeats },
                ..*opts
            };
            let s = sweep_width_duty(cfg, widths, duties, &o)?;
            out.add_csv("surface.csv", |b| s.write_csv(b))?;
            json!({ "points": s.energy.len(), "repeats": o.repeats, "arg_min": s.arg_min })
        }
        Command::SweepScaling {
            synapses,
            c_e,
            alphas,
            with_parasitics,
        } => {
            let base = if *with_parasitics {
                cfg.clone()
            } else {
                cfg.clone().without_parasitics()
            };
            let table = scaling_study(&base, *synapses, c_e, alphas, opts)?;
            out.add_csv("scaling.csv", |b| table.write_csv(b))?;
            let b = BaselineConfig::from_circuit(&scaled_config(&base, *synapses)?);
            let baseline = alphas
                .iter()
                .map(|&a| Ok(json!({ "alpha": a, "energy_J": baseline_loading_energy(&b, a)? })))
                .collect::<Result<Vec<_>>>()?;
            json!({ "table": table, "baseline": baseline })
        }
        Command::OptimizeFreq { alpha } => {
            let r = optimize_frequency(cfg, *alpha, opts)?;
            out.add_csv("evaluations.csv", |b| {
                let mut w = csv::Writer::from_writer(b);
                w.write_record(["f_Hz", "energy_J"])?;
                for (f, e) in &r.evaluations {
                    w.write_record([f.to_string(), e.to_string()])?;
                }
                w.flush()?;
                Ok(())
            })?;
            to_json(&r)?
        }
        Command::Corners { corners, temps } => {
            let t = corner_study(cfg, corners, temps, opts)?;
            out.add_csv("corners.csv", |b| t.write_csv(b))?;
            json!({ "frequency": t.frequency, "tree_spread": t.tree_spread(), "rows": t.rows.len() })
        }
        Command::Compare => {
            let r = compare_designs(cfg, opts)?;
            out.add_json("savings.json", &r)?;
            to_json(&r)?
        }
    };
    Ok((out, results))
}
