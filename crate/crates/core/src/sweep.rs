//! Batch runs over parameter grids, region presets and seeds.
//!
//! A plan expands to grid x presets x seeds in that nesting order; the
//! position in that expansion is the record's `index`, and output is always
//! in index order whatever order the runs finish in.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{is_nonphysical, EngineSettings, GbpState, InitStrategy, RunOutcome, Schedule, SweepRecord};
use crate::error::{Error, Result};
use crate::models::{
    aklt_norm_network, ice_network, json::network_from_json, random_norm_network, villain_network, Boundary,
    IceLattice, ModelInstance, Representation,
};
use crate::network::Network;
use crate::observables::{expectation, network_derivative, spin_operators, villain_densities};
use crate::oracles::aklt::aklt_bp_analytic;
use crate::oracles::exact::{exact_log_z, grid_environment};
use crate::oracles::ice::{ice_gbp_analytic, IceKind};
use crate::oracles::villain::{villain_bp_analytic, villain_exact_thermo, villain_gbp_analytic};
use crate::region::Preset;
use crate::tensor::{contract, C64};

pub const VERSION: &str = concat!("tn-gbp ", env!("CARGO_PKG_VERSION"));

/// Entry budget for the exact contractions behind oracle values.
pub const EXACT_BUDGET: f64 = 2e8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Grid parameter is beta.
    Villain {
        #[serde(default = "default_cells")]
        cells: usize,
        #[serde(default)]
        representation: Representation,
    },
    /// No grid parameter. Empty extents pick a default size per lattice.
    Ice {
        lattice: IceLattice,
        #[serde(default)]
        extents: Vec<usize>,
    },
    /// Grid parameter is the deformation a.
    Aklt {
        #[serde(default = "default_cells")]
        cells: usize,
    },
    /// Grid parameter is alpha; each seed draws a new network.
    Random {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_chi")]
        chi: usize,
    },
    /// A network file in the JSON interchange format. No grid parameter.
    File { path: PathBuf },
}

fn default_cells() -> usize {
    4
}
fn default_n() -> usize {
    6
}
fn default_chi() -> usize {
    3
}

impl ModelSpec {
    pub fn has_parameter(&self) -> bool {
        !matches!(self, ModelSpec::Ice { .. } | ModelSpec::File { .. })
    }

    pub fn name(&self) -> String {
        match self {
            ModelSpec::Villain { .. } => "villain".into(),
            ModelSpec::Ice { lattice, .. } => format!("ice_{}", serde_json::to_value(lattice).unwrap().as_str().unwrap()),
            ModelSpec::Aklt { .. } => "aklt".into(),
            ModelSpec::Random { .. } => "random_norm".into(),
            ModelSpec::File { path } => path.display().to_string(),
        }
    }

    pub fn ice_extents(lattice: IceLattice, extents: &[usize]) -> Vec<usize> {
        if !extents.is_empty() {
            return extents.to_vec();
        }
        match lattice {
            IceLattice::Square => vec![4, 4],
            IceLattice::DiamondCubic => vec![2],
            IceLattice::HexagonalIce => vec![4, 4, 2],
        }
    }

    /// Builds the model for one grid point and seed.
    pub fn build(&self, parameter: Option<f64>, seed: u64) -> Result<Built> {
        let p = parameter.unwrap_or(f64::NAN);
        Ok(match self {
            ModelSpec::Villain { cells, representation } => {
                Built::Model(villain_network(p, (*cells, *cells), *representation, Boundary::Periodic))
            }
            ModelSpec::Ice { lattice, extents } => Built::Model(ice_network(*lattice, &Self::ice_extents(*lattice, extents))),
            ModelSpec::Aklt { cells } => Built::Model(aklt_norm_network(p, (*cells, *cells))),
            ModelSpec::Random { n, chi } => Built::Model(random_norm_network(*n, *chi, p, seed)),
            ModelSpec::File { path } => Built::Network(network_from_json(&std::fs::read_to_string(path)?)?),
        })
    }
}

pub enum Built {
    Model(ModelInstance),
    Network(Network),
}

impl Built {
    pub fn network(&self) -> &Network {
        match self {
            Built::Model(m) => &m.network,
            Built::Network(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub damping: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Noise amplitude c of the initial messages; 0 starts from all ones.
    pub init_noise: f64,
    pub schedule: Schedule,
}

impl Default for RunSettings {
    fn default() -> Self {
        let e = EngineSettings::default();
        RunSettings { damping: e.damping, epsilon: e.epsilon, max_iters: e.max_iters, init_noise: 0.1, schedule: e.schedule }
    }
}

impl RunSettings {
    pub fn engine(&self) -> EngineSettings {
        EngineSettings {
            damping: self.damping,
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            schedule: self.schedule,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedSet {
    pub master: u64,
    pub count: usize,
}

impl Default for SeedSet {
    fn default() -> Self {
        SeedSet { master: 0, count: 1 }
    }
}

impl SeedSet {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.count).map(|k| split_seed(self.master, k as u64)).collect()
    }
}

/// The k-th output of a SplitMix64 stream started at `master`. Any seed of
/// an ensemble can be recomputed on its own.
pub fn split_seed(master: u64, k: u64) -> u64 {
    let mut z = master.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    /// One JSON object per line.
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sink {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub model: ModelSpec,
    #[serde(default)]
    pub grid: Vec<f64>,
    pub presets: Vec<String>,
    #[serde(default)]
    pub settings: RunSettings,
    #[serde(default)]
    pub seeds: SeedSet,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub sinks: Vec<Sink>,
}

/// Accepts `r1-plaquettes` as well as `r1_plaquettes`.
pub fn parse_preset(s: &str) -> Result<Preset> {
    Preset::parse(&s.replace('-', "_")).ok_or_else(|| Error::InvalidSetting(format!("unknown preset {s}")))
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<Vec<Preset>> {
        self.settings.engine().validate()?;
        if self.settings.init_noise < 0.0 {
            return Err(Error::InvalidSetting("init_noise must be nonnegative".into()));
        }
        if self.presets.is_empty() {
            return Err(Error::InvalidSetting("no presets".into()));
        }
        if self.seeds.count == 0 {
            return Err(Error::InvalidSetting("seed count is 0".into()));
        }
        match (self.model.has_parameter(), self.grid.is_empty()) {
            (true, true) => return Err(Error::InvalidSetting("empty parameter grid".into())),
            (false, false) => return Err(Error::InvalidSetting(format!("{} takes no grid", self.model.name()))),
            _ => {}
        }
        for &p in &self.grid {
            let ok = match self.model {
                ModelSpec::Villain { .. } => p >= 0.0,
                ModelSpec::Aklt { .. } => p > 0.0,
                ModelSpec::Random { .. } => (0.0..=1.0).contains(&p),
                _ => true,
            };
            if !ok {
                return Err(Error::OutsideDomain(format!("grid value {p} for {}", self.model.name())));
            }
        }
        let presets = self.presets.iter().map(|s| parse_preset(s)).collect::<Result<Vec<_>>>()?;
        for p in &presets {
            let voxels = matches!(p, Preset::R1Voxels | Preset::R2Voxels);
            let geometric = !matches!(p, Preset::SimpleBp | Preset::BlockBp(_));
            let ok = match &self.model {
                ModelSpec::Ice { lattice, .. } => !voxels || *lattice != IceLattice::Square,
                ModelSpec::File { .. } => !geometric || self.model.build(None, 0)?.network().geometry.is_some(),
                _ => !voxels,
            };
            if !ok {
                return Err(Error::GeometryMissing(format!("{} on {}", p.name(), self.model.name())));
            }
        }
        Ok(presets)
    }

    /// (index, parameter, preset, seed) for every run, in plan order.
    pub fn units(&self, presets: &[Preset]) -> Vec<(usize, Option<f64>, Preset, u64)> {
        let grid: Vec<Option<f64>> = if self.grid.is_empty() { vec![None] } else { self.grid.iter().map(|&g| Some(g)).collect() };
        let seeds = self.seeds.seeds();
        let mut out = Vec::new();
        for &g in &grid {
            for p in presets {
                for &s in &seeds {
                    out.push((out.len(), g, p.clone(), s));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub model: String,
    pub parameter: Option<f64>,
    pub preset: String,
    pub seed: u64,
    pub damping: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub init_noise: f64,
    pub schedule: Schedule,
    pub version: String,
    pub converged: bool,
    pub iterations: usize,
    pub best_metric: f64,
    /// Kikuchi free energy of the whole network, real and imaginary part.
    pub f_re: Option<f64>,
    pub f_im: Option<f64>,
    pub nonphysical: bool,
    pub observables: BTreeMap<String, f64>,
    pub oracle: BTreeMap<String, f64>,
    pub errors: BTreeMap<String, f64>,
    pub failure: Option<String>,
    pub wall_time_s: f64,
}

/// A finished run with its per-sweep history.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub record: RunRecord,
    pub trace: Vec<SweepRecord>,
}

pub fn run_plan(plan: &ExperimentPlan) -> Result<Vec<RunRecord>> {
    let results = execute(plan)?;
    let records: Vec<RunRecord> = results.into_iter().map(|r| r.record).collect();
    for sink in &plan.sinks {
        let file = std::io::BufWriter::new(std::fs::File::create(&sink.path)?);
        write_records(&records, sink.format, file)?;
    }
    Ok(records)
}

/// Runs every unit of the plan in parallel. Fails only if the plan itself
/// does not validate.
pub fn execute(plan: &ExperimentPlan) -> Result<Vec<RunResult>> {
    let presets = plan.validate()?;
    let units = plan.units(&presets);
    Ok(units.into_par_iter().map(|(i, g, p, s)| run_unit(plan, i, g, &p, s)).collect())
}

pub fn run_unit(plan: &ExperimentPlan, index: usize, parameter: Option<f64>, preset: &Preset, seed: u64) -> RunResult {
    let t0 = Instant::now();
    let set = &plan.settings;
    let mut record = RunRecord {
        index,
        model: plan.model.name(),
        parameter,
        preset: preset.name().into(),
        seed,
        damping: set.damping,
        epsilon: set.epsilon,
        max_iters: set.max_iters,
        init_noise: set.init_noise,
        schedule: set.schedule,
        version: VERSION.into(),
        converged: false,
        iterations: 0,
        best_metric: f64::NAN,
        f_re: None,
        f_im: None,
        nonphysical: false,
        observables: BTreeMap::new(),
        oracle: BTreeMap::new(),
        errors: BTreeMap::new(),
        failure: None,
        wall_time_s: 0.0,
    };
    let mut trace = Vec::new();
    let run = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        fill(plan, parameter, preset, seed, &mut record, &mut trace)
    }));
    match run {
        Ok(Ok(())) => {}
        Ok(Err(e)) => record.failure = Some(e.to_string()),
        Err(p) => {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            record.failure = Some(format!("panic: {}", msg.unwrap_or_default()));
        }
    }
    for (k, v) in &record.observables {
        if let Some(o) = record.oracle.get(k) {
            record.errors.insert(k.clone(), (v - o).abs());
        }
    }
    record.wall_time_s = t0.elapsed().as_secs_f64();
    RunResult { record, trace }
}

fn fill(
    plan: &ExperimentPlan,
    parameter: Option<f64>,
    preset: &Preset,
    seed: u64,
    record: &mut RunRecord,
    trace: &mut Vec<SweepRecord>,
) -> Result<()> {
    let built = plan.model.build(parameter, seed)?;
    let init = if plan.settings.init_noise > 0.0 {
        InitStrategy::Noisy { c: plan.settings.init_noise, seed }
    } else {
        InitStrategy::Uniform
    };
    let mut st = GbpState::from_preset(built.network().clone(), preset, &init, plan.settings.engine())?;
    let outcome = st.run();
    *trace = st.history.clone();
    record.best_metric = st.history.iter().map(|h| h.metric).fold(f64::INFINITY, f64::min);
    match &outcome {
        RunOutcome::Converged { iterations } => {
            record.converged = true;
            record.iterations = *iterations;
        }
        RunOutcome::NotConverged { error, .. } => {
            record.iterations = st.iteration;
            if let Some(e) = error {
                record.failure = Some(e.clone());
                return Ok(());
            }
        }
    }
    let f = st.kikuchi_free_energy()?;
    record.f_re = Some(f.re);
    record.f_im = Some(f.im);
    record.nonphysical = is_nonphysical(f);
    let p = parameter.unwrap_or(f64::NAN);
    let obs = &mut record.observables;
    let oracle = &mut record.oracle;
    match (&plan.model, &built) {
        (ModelSpec::Villain { .. }, Built::Model(m)) => {
            let th = villain_densities(&st, m, p)?;
            obs.extend([("f".into(), th.f), ("e".into(), th.e), ("s".into(), th.s)]);
            if plan.oracle {
                let exact = villain_exact_thermo(p)?;
                oracle.extend([("f".into(), exact.f), ("e".into(), exact.e), ("s".into(), exact.s)]);
                let analytic = if *preset == Preset::SimpleBp { villain_bp_analytic(p) } else { villain_gbp_analytic(p) };
                for k in ["f", "e", "s"] {
                    oracle.insert(format!("analytic_{k}"), analytic.get(k).unwrap_or(f64::NAN));
                }
            }
        }
        (ModelSpec::Ice { lattice, .. }, Built::Model(m)) => {
            obs.insert("exp_s0".into(), (-f.re / m.site_count as f64).exp());
            if plan.oracle {
                let kind = match lattice {
                    IceLattice::Square => IceKind::Square,
                    IceLattice::DiamondCubic => IceKind::Diamond,
                    IceLattice::HexagonalIce => IceKind::Hexagonal,
                };
                let a = ice_gbp_analytic(kind);
                let matching = match preset {
                    Preset::SimpleBp => a.get("bp_exp_s0"),
                    Preset::R1Plaquettes => a.get("exp_s0"),
                    _ => None,
                };
                if let Some(v) = matching {
                    oracle.insert("exp_s0".into(), v);
                }
                if let Some(v) = a.get("exact_exp_s0") {
                    oracle.insert("exact_exp_s0".into(), v);
                }
            }
        }
        (ModelSpec::Aklt { .. }, Built::Model(m)) => {
            obs.insert("f".into(), f.re / m.site_count as f64);
            let ops = spin_operators(3);
            let (v, w) = m.neighbours[0];
            let mut corr = Vec::new();
            for (k, o) in ["xx", "yy", "zz"].iter().zip(&ops) {
                let c = expectation(&st, m, &[(v, o), (w, o)])?.re;
                obs.insert(k.to_string(), c);
                corr.push(c);
            }
            obs.insert("xx_minus_yy".into(), corr[0] - corr[1]);
            obs.insert("sx_a".into(), expectation(&st, m, &[(v, &ops[0])])?.re);
            if plan.oracle {
                let a = aklt_bp_analytic(p)?;
                // the closed form is for simple BP only; other presets get it under a prefix
                let prefix = if *preset == Preset::SimpleBp { "" } else { "bp_" };
                for k in ["xx", "yy", "zz", "sx_a"] {
                    oracle.insert(format!("{prefix}{k}"), a.get(k).unwrap_or(f64::NAN));
                }
                oracle.insert(format!("{prefix}xx_minus_yy"), -a.get("xx_minus_yy").unwrap_or(f64::NAN));
            }
        }
        (ModelSpec::Random { n, .. }, Built::Model(m)) => {
            let sites = m.site_count as f64;
            obs.insert("f".into(), f.re / sites);
            if plan.oracle {
                let centre = (n / 2) * n + n / 2;
                let ts = &m.network.tensors;
                let exact = grid_environment(ts, *n, centre, EXACT_BUDGET)?;
                oracle.insert("f".into(), -contract(&exact, &ts[centre])?.log_total()?.re / sites);
                let approx = network_derivative(&st, &[centre])?.env.permute(&ts[centre].labels.iter().map(|l| l.id).collect::<Vec<_>>())?;
                record.errors.insert("env_l2".into(), environment_error(&approx.materialize(), &exact.materialize()));
            }
        }
        (ModelSpec::File { .. }, Built::Network(net)) => {
            obs.insert("f".into(), f.re);
            if plan.oracle {
                oracle.insert("f".into(), -exact_log_z(&net.tensors)?.re);
            }
        }
        _ => unreachable!("model spec and built model disagree"),
    }
    Ok(())
}

/// L2 distance between two environments after scaling each to unit L2 norm
/// and aligning the exact one's phase to the approximation.
pub fn environment_error(approx: &[C64], exact: &[C64]) -> f64 {
    let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let overlap: C64 = approx.iter().zip(exact).map(|(a, b)| a.conj() * b).sum();
    let phase = if overlap.norm() > 0.0 { overlap.conj() / overlap.norm() } else { C64::new(1.0, 0.0) };
    let (na, ne) = (norm(approx), norm(exact));
    approx.iter().zip(exact).map(|(a, b)| (a / na - b * phase / ne).norm_sqr()).sum::<f64>().sqrt()
}

const FIXED_COLUMNS: [&str; 18] = [
    "index",
    "model",
    "parameter",
    "preset",
    "seed",
    "damping",
    "epsilon",
    "max_iters",
    "init_noise",
    "schedule",
    "version",
    "converged",
    "iterations",
    "best_metric",
    "f_re",
    "f_im",
    "nonphysical",
    "failure",
];

/// CSV header: the fixed columns, then `obs_<name>`, `oracle_<name>` and
/// `err_<name>` for every name seen in any record (sorted), then
/// `wall_time_s`. Missing values are empty cells.
pub fn csv_header(records: &[RunRecord]) -> Vec<String> {
    let mut h: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    let keys = |f: fn(&RunRecord) -> &BTreeMap<String, f64>| {
        records.iter().flat_map(|r| f(r).keys().cloned()).collect::<BTreeSet<_>>()
    };
    h.extend(keys(|r| &r.observables).into_iter().map(|k| format!("obs_{k}")));
    h.extend(keys(|r| &r.oracle).into_iter().map(|k| format!("oracle_{k}")));
    h.extend(keys(|r| &r.errors).into_iter().map(|k| format!("err_{k}")));
    h.push("wall_time_s".into());
    h
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[RunRecord], w: W) -> Result<()> {
    let header = csv_header(records);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.index.to_string(),
            r.model.clone(),
            opt(r.parameter),
            r.preset.clone(),
            r.seed.to_string(),
            r.damping.to_string(),
            r.epsilon.to_string(),
            r.max_iters.to_string(),
            r.init_noise.to_string(),
            format!("{:?}", r.schedule).to_lowercase(),
            r.version.clone(),
            r.converged.to_string(),
            r.iterations.to_string(),
            r.best_metric.to_string(),
            opt(r.f_re),
            opt(r.f_im),
            r.nonphysical.to_string(),
            r.failure.clone().unwrap_or_default(),
        ];
        for col in &header[FIXED_COLUMNS.len()..header.len() - 1] {
            let v = if let Some(k) = col.strip_prefix("obs_") {
                r.observables.get(k)
            } else if let Some(k) = col.strip_prefix("oracle_") {
                r.oracle.get(k)
            } else {
                r.errors.get(&col[4..])
            };
            row.push(opt(v));
        }
        row.push(r.wall_time_s.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records<W: Write>(records: &[RunRecord], format: Format, w: W) -> Result<()> {
    match format {
        Format::Csv => write_csv(records, w),
        Format::Json => write_jsonl(records, w),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Mean of an observable.
    Mean,
    /// Median of an observable.
    Median,
    FractionConverged,
    /// Largest error against the oracle for one observable.
    MaxAbsError,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupRow {
    pub parameter: Option<f64>,
    pub preset: String,
    pub count: usize,
    pub value: f64,
}

/// Groups by (grid point, preset) in order of first appearance. Records
/// without a finite value for `field` are left out of mean, median and
/// max_abs_error; a group left with nothing is an error.
pub fn aggregate(records: &[RunRecord], stat: Statistic, field: &str) -> Result<Vec<GroupRow>> {
    if records.is_empty() {
        return Err(Error::EmptyGroup("no records".into()));
    }
    let mut groups: Vec<((Option<f64>, String), Vec<&RunRecord>)> = Vec::new();
    for r in records {
        let key = (r.parameter, r.preset.clone());
        match groups.iter_mut().find(|(k, _)| k.0.map(f64::to_bits) == key.0.map(f64::to_bits) && k.1 == key.1) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((parameter, preset), rs)| {
            let name = || format!("{preset} at {}", opt(parameter));
            let value = if stat == Statistic::FractionConverged {
                rs.iter().filter(|r| r.converged).count() as f64 / rs.len() as f64
            } else {
                let mut vals: Vec<f64> = rs
                    .iter()
                    .filter_map(|r| if stat == Statistic::MaxAbsError { r.errors.get(field) } else { r.observables.get(field) })
                    .copied()
                    .filter(|v| v.is_finite())
                    .collect();
                if vals.is_empty() {
                    return Err(Error::EmptyGroup(name()));
                }
                vals.sort_by(f64::total_cmp);
                match stat {
                    Statistic::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
                    Statistic::Median => {
                        let m = vals.len() / 2;
                        if vals.len() % 2 == 1 {
                            vals[m]
                        } else {
                            0.5 * (vals[m - 1] + vals[m])
                        }
                    }
                    _ => vals.iter().fold(0.0, |a: f64, v| a.max(v.abs())),
                }
            };
            Ok(GroupRow { parameter, preset, count: rs.len(), value })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn villain_plan(grid: Vec<f64>, presets: &[&str]) -> ExperimentPlan {
        ExperimentPlan {
            model: ModelSpec::Villain { cells: 1, representation: Representation::FactorGraph },
            grid,
            presets: presets.iter().map(|s| s.to_string()).collect(),
            settings: RunSettings { max_iters: 2000, ..Default::default() },
            seeds: SeedSet::default(),
            oracle: false,
            sinks: vec![],
        }
    }

    fn strip_wall_time(csv: &str) -> String {
        csv.lines().map(|l| l.rsplit_once(',').unwrap().0).collect::<Vec<_>>().join("\n")
    }

    #[test]
    fn cardinality_is_grid_times_presets_times_seeds() {
        let grid: Vec<f64> = (1..=30).map(|k| 0.1 * k as f64).collect();
        let plan = villain_plan(grid, &["simple-bp", "r1-plaquettes", "r2_plaquettes"]);
        let presets = plan.validate().unwrap();
        let units = plan.units(&presets);
        assert_eq!(units.len(), 90);
        assert!(units.iter().enumerate().all(|(i, u)| u.0 == i));
        let mut p = plan.clone();
        p.seeds.count = 4;
        assert_eq!(p.units(&presets).len(), 360);
    }

    #[test]
    fn validation_rejects_bad_plans() {
        assert!(villain_plan(vec![], &["bp"]).validate().is_err());
        assert!(villain_plan(vec![0.3], &[]).validate().is_err());
        assert!(villain_plan(vec![0.3], &["nope"]).validate().is_err());
        assert!(matches!(villain_plan(vec![0.3], &["r1_voxels"]).validate(), Err(Error::GeometryMissing(_))));
        let mut ice = villain_plan(vec![0.3], &["bp"]);
        ice.model = ModelSpec::Ice { lattice: IceLattice::Square, extents: vec![] };
        assert!(ice.validate().is_err());
        ice.grid.clear();
        assert!(ice.validate().is_ok());
    }

    #[test]
    fn split_seed_matches_splitmix64_reference() {
        // first outputs of SplitMix64 seeded with 1234567
        assert_eq!(split_seed(1234567, 0), 6457827717110365317);
        assert_eq!(split_seed(1234567, 1), 3203168211198807973);
        let s = SeedSet { master: 9, count: 5 }.seeds();
        assert_eq!(s.iter().collect::<BTreeSet<_>>().len(), 5);
    }

    #[test]
    fn reruns_and_thread_counts_give_identical_output() {
        let mut plan = villain_plan(vec![0.2, 0.4], &["simple_bp", "fg"]);
        plan.seeds.count = 2;
        let csv = |records: &[RunRecord]| {
            let mut buf = Vec::new();
            write_csv(records, &mut buf).unwrap();
            strip_wall_time(&String::from_utf8(buf).unwrap())
        };
        let a = run_plan(&plan).unwrap();
        let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_plan(&plan).unwrap());
        assert_eq!(a.len(), 8);
        assert_eq!(csv(&a), csv(&b));
        assert!(a.iter().all(|r| r.converged && r.failure.is_none()));
    }

    #[test]
    fn failures_are_recorded_not_raised() {
        let mut plan = villain_plan(vec![0.3], &["bp"]);
        plan.model = ModelSpec::File { path: "/nonexistent/net.json".into() };
        plan.grid.clear();
        let r = run_plan(&plan).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].failure.is_some() && !r[0].converged);
    }

    #[test]
    fn errors_only_with_oracle() {
        let mut plan = villain_plan(vec![0.3], &["fg"]);
        let r = run_plan(&plan).unwrap();
        assert!(r[0].errors.is_empty() && r[0].oracle.is_empty());
        plan.oracle = true;
        let r = run_plan(&plan).unwrap();
        assert_eq!(r[0].errors.keys().collect::<Vec<_>>(), ["e", "f", "s"]);
    }

    #[test]
    fn csv_and_jsonl_carry_the_same_numbers() {
        let mut plan = villain_plan(vec![0.3], &["bp"]);
        plan.oracle = true;
        let records = run_plan(&plan).unwrap();
        let mut c = Vec::new();
        write_csv(&records, &mut c).unwrap();
        let mut j = Vec::new();
        write_jsonl(&records, &mut j).unwrap();
        let mut reader = csv::Reader::from_reader(c.as_slice());
        let header = reader.headers().unwrap().clone();
        let row = reader.records().next().unwrap().unwrap();
        let json: RunRecord = serde_json::from_slice(&j[..j.len() - 1]).unwrap();
        assert_eq!(json, records[0]);
        for (h, v) in header.iter().zip(row.iter()) {
            if let Some(k) = h.strip_prefix("obs_") {
                assert_eq!(v.parse::<f64>().unwrap(), json.observables[k]);
            } else if let Some(k) = h.strip_prefix("err_") {
                assert_eq!(v.parse::<f64>().unwrap(), json.errors[k]);
            } else if h == "f_re" {
                assert_eq!(v.parse::<f64>().unwrap(), json.f_re.unwrap());
            }
        }
    }

    fn record(parameter: f64, preset: &str, converged: bool, f: Option<f64>) -> RunRecord {
        let mut r = run_unit(&villain_plan(vec![0.3], &["bp"]), 0, Some(0.3), &Preset::SimpleBp, 0).record;
        r.parameter = Some(parameter);
        r.preset = preset.into();
        r.converged = converged;
        r.observables = f.map(|v| [("f".to_string(), v)].into()).unwrap_or_default();
        r.errors = r.observables.clone();
        r
    }

    #[test]
    fn aggregation() {
        let rs = vec![
            record(0.1, "a", true, Some(1.0)),
            record(0.1, "a", false, Some(3.0)),
            record(0.1, "b", true, Some(-2.0)),
            record(0.2, "a", true, Some(5.0)),
            record(0.1, "a", true, Some(4.0)),
        ];
        let mean = aggregate(&rs, Statistic::Mean, "f").unwrap();
        assert_eq!(mean.len(), 3);
        assert_eq!((mean[0].count, mean[0].value), (3, 8.0 / 3.0));
        assert_eq!(mean[2].value, 5.0);
        assert_eq!(aggregate(&rs, Statistic::Median, "f").unwrap()[0].value, 3.0);
        assert_eq!(aggregate(&rs[..2], Statistic::Median, "f").unwrap()[0].value, 2.0);
        assert_eq!(aggregate(&rs, Statistic::FractionConverged, "").unwrap()[0].value, 2.0 / 3.0);
        assert_eq!(aggregate(&rs, Statistic::MaxAbsError, "f").unwrap()[1].value, 2.0);
        assert!(matches!(aggregate(&[], Statistic::Mean, "f"), Err(Error::EmptyGroup(_))));
        let missing = vec![record(0.1, "a", true, None)];
        assert!(matches!(aggregate(&missing, Statistic::Mean, "f"), Err(Error::EmptyGroup(_))));
    }

    #[test]
    fn plan_json_round_trip() {
        let text = r#"{"model": {"kind": "ice", "lattice": "diamond_cubic"}, "presets": ["r1-plaquettes"], "oracle": true,
            "settings": {"damping": 0.5}, "sinks": [{"path": "out.jsonl", "format": "json"}]}"#;
        let plan = ExperimentPlan::from_json(text).unwrap();
        assert_eq!(plan.settings.damping, 0.5);
        assert_eq!(plan.settings.epsilon, 1e-10);
        assert_eq!(plan.seeds.count, 1);
        assert_eq!(plan.sinks[0].format, Format::Json);
        let back = ExperimentPlan::from_json(&serde_json::to_string(&plan).unwrap()).unwrap();
        assert_eq!(back, plan);
    }
}
