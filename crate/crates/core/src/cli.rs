//! Command-line front end. Numeric records go to the `--out` sink, a
//! readable summary to standard output.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::engine::Schedule;
use crate::error::{Error, Result};
use crate::models::json::network_from_json;
use crate::models::{IceLattice, Representation};
use crate::oracles::aklt::aklt_bp_analytic;
use crate::oracles::exact::exact_log_z;
use crate::oracles::ice::{ice_gbp_analytic, IceKind};
use crate::oracles::villain::{villain_bp_analytic, villain_exact_thermo, villain_gbp_analytic};
use crate::region::{build_preset, Preset};
use crate::sweep::{
    execute, parse_preset, write_records, ExperimentPlan, Format, ModelSpec, RunRecord, RunResult, RunSettings, SeedSet,
};

/// Directory for record files when `--out` is not given.
pub const OUT_DIR_VAR: &str = "TN_GBP_OUT_DIR";

pub const DEFAULT_NOISE: f64 = 0.1;

#[derive(Parser, Debug)]
#[command(name = "tn-gbp", version, about = "Generalized belief propagation for tensor network contraction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fully frustrated Villain model on a torus of 2x2 unit cells.
    Villain {
        /// Inverse temperatures, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        beta: Vec<f64>,
        /// Unit cells per side.
        #[arg(long, default_value_t = 4)]
        cells: usize,
        #[arg(long, value_enum, default_value = "factor-graph")]
        representation: ReprArg,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Ice-rule vertex model; reports e^{s0}.
    Ice {
        #[arg(long, value_enum, default_value = "square")]
        lattice: LatticeArg,
        /// Lattice size, comma separated (square: lx,ly; diamond: l; hexagonal: lx,ly,lz). Empty picks 4,4 / 2 / 4,4,2.
        #[arg(long, value_delimiter = ',')]
        extents: Vec<usize>,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Deformed AKLT norm network on the honeycomb torus.
    Aklt {
        /// Deformation parameters, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        a: Vec<f64>,
        /// Two-site unit cells per side.
        #[arg(long, default_value_t = 4)]
        cells: usize,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Random norm networks on an open n x n square lattice.
    Random {
        /// Negative shifts of the U(0,1) ket entries, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// Ket bond dimension.
        #[arg(long, default_value_t = 3)]
        chi: usize,
        /// Number of random instances per alpha.
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Contracts a network read from a JSON file.
    Contract {
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Builds a region graph and prints it as JSON.
    Regions {
        /// Network file; without it a built-in model is used.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "villain")]
        model: ModelArg,
        #[arg(long, default_value = "simple-bp", value_parser = preset_arg)]
        preset: Preset,
        /// Write the JSON here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints reference values without running the engine.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
    /// Runs an experiment plan file.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// Exact, BP and plaquette-GBP thermodynamics of the Villain model.
    Villain {
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
    },
    /// Residual entropy references.
    Ice {
        #[arg(long, value_enum, default_value = "square")]
        lattice: LatticeArg,
    },
    /// Simple-BP fixed point and correlators of the AKLT norm network.
    Aklt {
        #[arg(long, default_value_t = 0.5)]
        a: f64,
    },
    /// Exact -ln Z of a network file.
    Exact {
        #[arg(long)]
        network: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct EngineArgs {
    /// Region presets, comma separated: simple-bp, r1-plaquettes, r2-plaquettes, r1-voxels, r2-voxels, factor-graph-plaquettes.
    #[arg(long, value_delimiter = ',', default_value = "simple-bp", value_parser = preset_arg)]
    pub preset: Vec<Preset>,
    /// Weight of the new message when mixing.
    #[arg(long, default_value_t = 0.3, value_parser = damping_arg)]
    pub damping: f64,
    /// Convergence threshold on 1 - |<m_new, m>|^2.
    #[arg(long, default_value_t = 1e-10, value_parser = positive_arg)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    /// Amplitude c of the uniform noise in the initial messages; 0 starts from all ones [default: 0.1, ice: 0]
    #[arg(long, value_parser = nonnegative_arg)]
    pub init_noise: Option<f64>,
    /// Master seed; run seeds are split from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "sequential")]
    pub schedule: ScheduleArg,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Record file. Defaults to <subcommand>.<csv|jsonl> inside $TN_GBP_OUT_DIR when that is set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Write the region graph of every preset (first grid point) as JSON.
    #[arg(long)]
    pub dump_regions: Option<PathBuf>,
    /// Write the per-sweep convergence metric of every run as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Attach reference values and report the differences.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReprArg {
    FactorGraph,
    VertexTensor,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LatticeArg {
    Square,
    Diamond,
    Hexagonal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Villain,
    IceSquare,
    IceDiamond,
    IceHexagonal,
    Aklt,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScheduleArg {
    Sequential,
    Synchronous,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

fn preset_arg(s: &str) -> std::result::Result<Preset, String> {
    parse_preset(s).map_err(|e| e.to_string())
}

fn damping_arg(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x <= 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is outside (0, 1]"))
    }
}

fn positive_arg(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} is not positive"))
    }
}

fn nonnegative_arg(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} is negative"))
    }
}

impl LatticeArg {
    fn lattice(self) -> IceLattice {
        match self {
            LatticeArg::Square => IceLattice::Square,
            LatticeArg::Diamond => IceLattice::DiamondCubic,
            LatticeArg::Hexagonal => IceLattice::HexagonalIce,
        }
    }

    fn kind(self) -> IceKind {
        match self {
            LatticeArg::Square => IceKind::Square,
            LatticeArg::Diamond => IceKind::Diamond,
            LatticeArg::Hexagonal => IceKind::Hexagonal,
        }
    }
}

impl EngineArgs {
    fn settings(&self, default_noise: f64) -> RunSettings {
        RunSettings {
            damping: self.damping,
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            init_noise: self.init_noise.unwrap_or(default_noise),
            schedule: match self.schedule {
                ScheduleArg::Sequential => Schedule::Sequential,
                ScheduleArg::Synchronous => Schedule::Synchronous,
            },
        }
    }

    fn preset_names(&self) -> Vec<String> {
        self.preset.iter().map(|p| p.name().to_string()).collect()
    }
}

/// Parses `args` (program name first), runs, and returns the exit code:
/// 0 on success, 2 on usage errors, 1 on any other failure.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e @ (Error::InvalidSetting(_) | Error::OutsideDomain(_) | Error::GeometryMissing(_))) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Villain { beta, cells, representation, engine, output } => {
            let representation = match representation {
                ReprArg::FactorGraph => Representation::FactorGraph,
                ReprArg::VertexTensor => Representation::VertexTensor,
            };
            let model = ModelSpec::Villain { cells, representation };
            run_model("villain", model, beta, 1, &engine, DEFAULT_NOISE, &output, out)
        }
        Command::Ice { lattice, extents, engine, output } => {
            let model = ModelSpec::Ice { lattice: lattice.lattice(), extents };
            // the symmetric plaquette fixed point is only reached from a symmetric start
            run_model("ice", model, vec![], 1, &engine, 0.0, &output, out)
        }
        Command::Aklt { a, cells, engine, output } => {
            run_model("aklt", ModelSpec::Aklt { cells }, a, 1, &engine, DEFAULT_NOISE, &output, out)
        }
        Command::Random { alpha, n, chi, seeds, engine, output } => {
            if n < 2 || chi == 0 {
                return Err(Error::InvalidSetting("--n must be at least 2 and --chi at least 1".into()));
            }
            run_model("random", ModelSpec::Random { n, chi }, alpha, seeds, &engine, DEFAULT_NOISE, &output, out)
        }
        Command::Contract { network, engine, output } => {
            network_from_json(&std::fs::read_to_string(&network)?)?;
            run_model("contract", ModelSpec::File { path: network }, vec![], 1, &engine, DEFAULT_NOISE, &output, out)
        }
        Command::Regions { network, model, preset, out: path } => {
            let net = match network {
                Some(p) => network_from_json(&std::fs::read_to_string(p)?)?,
                None => {
                    let (spec, grid) = builtin(model);
                    spec.build(grid, 0)?.network().clone()
                }
            };
            let g = build_preset(&net, &preset)?;
            let text = serde_json::to_string_pretty(&g.to_json())?;
            match path {
                Some(p) => {
                    std::fs::write(&p, text)?;
                    let parents = g.n_parents();
                    writeln!(out, "{} regions ({parents} parents), written to {}", g.regions.len(), p.display())?;
                }
                None => writeln!(out, "{text}")?,
            }
            Ok(())
        }
        Command::Oracle { which } => {
            let value = match which {
                OracleCommand::Villain { beta } => serde_json::json!({
                    "exact": villain_exact_thermo(beta)?,
                    "bp": villain_bp_analytic(beta),
                    "gbp_plaquettes": villain_gbp_analytic(beta),
                }),
                OracleCommand::Ice { lattice } => serde_json::to_value(ice_gbp_analytic(lattice.kind()))?,
                OracleCommand::Aklt { a } => serde_json::to_value(aklt_bp_analytic(a)?)?,
                OracleCommand::Exact { network } => {
                    let net = network_from_json(&std::fs::read_to_string(network)?)?;
                    let lz = exact_log_z(&net.tensors)?;
                    serde_json::json!({ "minus_log_z": [-lz.re, -lz.im] })
                }
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
            Ok(())
        }
        Command::Sweep { plan } => {
            let plan = ExperimentPlan::from_json(&std::fs::read_to_string(plan)?)?;
            let results = execute(&plan)?;
            let records: Vec<RunRecord> = results.iter().map(|r| r.record.clone()).collect();
            for sink in &plan.sinks {
                write_records(&records, sink.format, std::io::BufWriter::new(std::fs::File::create(&sink.path)?))?;
            }
            summarize(&records, out)
        }
    }
}

fn builtin(model: ModelArg) -> (ModelSpec, Option<f64>) {
    let ice = |lattice| (ModelSpec::Ice { lattice, extents: vec![] }, None);
    match model {
        ModelArg::Villain => (ModelSpec::Villain { cells: 4, representation: Representation::FactorGraph }, Some(0.5)),
        ModelArg::IceSquare => ice(IceLattice::Square),
        ModelArg::IceDiamond => ice(IceLattice::DiamondCubic),
        ModelArg::IceHexagonal => ice(IceLattice::HexagonalIce),
        ModelArg::Aklt => (ModelSpec::Aklt { cells: 4 }, Some(0.5)),
        ModelArg::Random => (ModelSpec::Random { n: 6, chi: 3 }, Some(0.1)),
    }
}

fn default_out(name: &str, output: &OutputArgs) -> Option<PathBuf> {
    output.out.clone().or_else(|| {
        let dir = std::env::var_os(OUT_DIR_VAR)?;
        let ext = match output.format {
            FormatArg::Csv => "csv",
            FormatArg::Json => "jsonl",
        };
        Some(Path::new(&dir).join(format!("{name}.{ext}")))
    })
}

fn run_model(
    name: &str,
    model: ModelSpec,
    grid: Vec<f64>,
    seeds: usize,
    engine: &EngineArgs,
    default_noise: f64,
    output: &OutputArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let plan = ExperimentPlan {
        model,
        grid,
        presets: engine.preset_names(),
        settings: engine.settings(default_noise),
        seeds: SeedSet { master: engine.seed, count: seeds },
        oracle: output.oracle,
        sinks: vec![],
    };
    let presets = plan.validate()?;
    if let Some(path) = &output.dump_regions {
        let built = plan.model.build(plan.grid.first().copied(), plan.seeds.seeds()[0])?;
        let mut dump = serde_json::Map::new();
        for p in &presets {
            dump.insert(p.name().into(), build_preset(built.network(), p)?.to_json());
        }
        std::fs::write(path, serde_json::to_string_pretty(&dump)?)?;
    }
    let results = execute(&plan)?;
    let records: Vec<RunRecord> = results.iter().map(|r| r.record.clone()).collect();
    if let Some(path) = default_out(name, output) {
        let format = match output.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
        write_records(&records, format, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    }
    if let Some(path) = &output.trace {
        write_trace(&results, std::fs::File::create(path)?)?;
    }
    summarize(&records, out)
}

fn write_trace<W: Write>(results: &[RunResult], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["index", "iteration", "metric"])?;
    for r in results {
        for h in &r.trace {
            csv.write_record([r.record.index.to_string(), h.iteration.to_string(), h.metric.to_string()])?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn summarize(records: &[RunRecord], out: &mut dyn Write) -> Result<()> {
    for r in records {
        let param = r.parameter.map(|p| format!(" {p}")).unwrap_or_default();
        write!(out, "[{}] {}{param} {} seed={}: ", r.index, r.model, r.preset, r.seed)?;
        if r.converged {
            write!(out, "converged in {} sweeps", r.iterations)?;
        } else {
            write!(out, "NotConverged after {} sweeps (best metric {:.3e})", r.iterations, r.best_metric)?;
        }
        if let Some(f) = r.f_re {
            write!(out, ", F = {f:.9}")?;
            if r.f_im.is_some_and(|x| x != 0.0) {
                write!(out, " {:+.3e}i", r.f_im.unwrap())?;
            }
        }
        if r.nonphysical {
            write!(out, " (nonphysical)")?;
        }
        writeln!(out)?;
        for (k, v) in &r.observables {
            write!(out, "    {k} = {v:.9}")?;
            if let Some(o) = r.oracle.get(k) {
                write!(out, "  oracle {o:.9}  diff {:.3e}", v - o)?;
            }
            writeln!(out)?;
        }
        for (k, v) in r.errors.iter().filter(|(k, _)| !r.observables.contains_key(*k)) {
            writeln!(out, "    error {k} = {v:.3e}")?;
        }
        if let Some(e) = &r.failure {
            writeln!(out, "    failure: {e}")?;
        }
    }
    Ok(())
}
