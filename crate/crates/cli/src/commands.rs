//! Subcommands. Each writes its artifacts plus `summary.json` into the output
//! directory and maps failures onto an exit category.

use crate::aer::{self, AerFormat};
use crate::classify::{render_latency_histogram, render_report};
use crate::cnn::CLASSES;
use crate::demo::{run_demo, simulated_ms, DemoConfig};
use crate::sim::{aer_to_stimuli, build_engine, compile, raster_ids, stimulus_table, Compiled, PS_PER_MS};
use clap::{Args, Parser, Subcommand};
use dynapsim_core::compiler::{placement_report, validate, CompileError, NetworkSpec, NeuronId, PopKind};
use dynapsim_core::fabric::{ExternalEvent, FabricConfig, FabricError};
use dynapsim_core::memopt::{analyze, render_analysis, scaling_table, ScalingConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Deserialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "dynapsim", version, about = "Event-routing neuromorphic fabric simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Configuration file; its schema depends on the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Record the per-packet trace log.
    #[arg(long, global = true)]
    pub trace: bool,
    /// Cap chip input interfaces at their configured event rate.
    #[arg(long, global = true)]
    pub throttle_io: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the routing-memory model over a parameter grid.
    AnalyzeMemory,
    /// Place a netlist, emit memory images and validate them symbolically.
    Compile(NetlistArgs),
    /// Compile and simulate a netlist.
    Simulate(SimArgs),
    /// `simulate` with the packet trace always on.
    Trace(SimArgs),
    /// Build, train and evaluate the convolutional demo network.
    DemoCnn,
}

#[derive(Debug, Clone, Args)]
pub struct NetlistArgs {
    /// Netlist file (TOML).
    #[arg(long)]
    pub netlist: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub net: NetlistArgs,
    /// AER event file driving the first input population.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: AerFormat,
    /// Sensor width in pixels; defaults to the side of a square input population.
    #[arg(long)]
    pub sensor_width: Option<u16>,
    /// Input population driven by `--input` or `--poisson-hz`.
    #[arg(long)]
    pub input_pop: Option<String>,
    /// Poisson rate applied to every neuron of the input population.
    #[arg(long)]
    pub poisson_hz: Option<f64>,
    /// Simulated time; defaults to 10 ms past the last stimulus, or 100 ms.
    #[arg(long)]
    pub duration_ms: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("simulation: {0}")]
    Sim(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Parse(_) => 4,
            CliError::Compile(_) => 5,
            CliError::Sim(_) => 6,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse(_) => "parse",
            CliError::Compile(_) => "compile",
            CliError::Sim(_) => "simulation",
        }
    }
}

impl From<FabricError> for CliError {
    fn from(e: FabricError) -> Self {
        match e {
            FabricError::Config(m) => CliError::Parse(m),
            other => CliError::Sim(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Collects artifacts for one run in the output directory.
struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Output {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })?;
        log::info!("wrote {}", self.dir.join(name).display());
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `summary.json` with the common header and `fields`.
    fn finish(mut self, command: &str, seed: Option<u64>, fields: Value) -> Result<()> {
        let mut artifacts = self.written.clone();
        artifacts.push("summary.json".into());
        let mut summary = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "artifacts": artifacts,
        });
        if let (Value::Object(s), Value::Object(f)) = (&mut summary, fields) {
            s.extend(f);
        }
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        self.write("summary.json", text)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::AnalyzeMemory => analyze_memory(g),
        Command::Compile(a) => compile_cmd(g, a),
        Command::Simulate(a) => simulate(g, a, g.trace, "simulate"),
        Command::Trace(a) => simulate(g, a, true, "trace"),
        Command::DemoCnn => demo_cnn(g),
    }
}

/// Parameter grid of `analyze-memory`: the table covers the cross product of
/// the four lists. The scaling table is evaluated for `scaling_sizes`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryGrid {
    pub n: Vec<f64>,
    pub f: Vec<f64>,
    pub c: Vec<f64>,
    pub alpha: Vec<f64>,
    pub scaling_sizes: Vec<u64>,
    pub extra_bits_per_neuron: u32,
}

impl Default for MemoryGrid {
    /// The prototype design point and the large-network example.
    fn default() -> Self {
        MemoryGrid {
            n: vec![1_048_576.0, 1e10],
            f: vec![8192.0, 5000.0],
            c: vec![256.0],
            alpha: vec![1.0],
            scaling_sizes: (10..=20).step_by(2).map(|e| 1u64 << e).collect(),
            extra_bits_per_neuron: 2,
        }
    }
}

fn analyze_memory(g: &GlobalOpts) -> Result<()> {
    let grid: MemoryGrid = match &g.config {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?,
        None => MemoryGrid::default(),
    };
    let mut rows = Vec::new();
    for &n in &grid.n {
        for &f in &grid.f {
            for &c in &grid.c {
                for &alpha in &grid.alpha {
                    rows.push(analyze(n, f, c, alpha).map_err(|e| CliError::Parse(e.to_string()))?);
                }
            }
        }
    }
    let scaling_cfg = ScalingConfig {
        extra_bits_per_neuron: grid.extra_bits_per_neuron,
        ..ScalingConfig::prototype()
    };
    let scaling = scaling_table(&grid.scaling_sizes, &scaling_cfg).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut scaling_tsv = String::from("N\tbits_per_neuron\tbits_total\n");
    for r in &scaling {
        let _ = writeln!(scaling_tsv, "{}\t{:.4}\t{:.1}", r.n, r.bits_per_neuron, r.bits_total);
    }

    let table = render_analysis(&rows);
    print!("{table}");
    let mut out = Output::new(&g.out)?;
    out.write("memory.tsv", &table)?;
    out.write("scaling.tsv", &scaling_tsv)?;
    out.finish(
        "analyze-memory",
        None,
        json!({
            "rows": rows.len(),
            "infeasible_rows": rows.iter().filter(|r| !r.feasible).count(),
            "scaling_rows": scaling.len(),
        }),
    )
}

fn load_fabric(g: &GlobalOpts) -> Result<FabricConfig> {
    let mut fabric = match &g.config {
        Some(p) => FabricConfig::from_toml(&read_text(p)?).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?,
        None => FabricConfig::default(),
    };
    if let Some(s) = g.seed {
        fabric.seed = s;
    }
    fabric.throttle_io |= g.throttle_io;
    Ok(fabric)
}

fn load_netlist(a: &NetlistArgs) -> Result<NetworkSpec> {
    let text = read_text(&a.netlist)?;
    NetworkSpec::from_toml(&text).map_err(|e| CliError::Parse(format!("{}: {e}", a.netlist.display())))
}

fn inputs_tsv(c: &Compiled) -> String {
    let mut out = String::from("neuron\tchip\tcore\ttag\n");
    for (id, targets) in stimulus_table(&c.placement) {
        for (chip, core, tag) in targets {
            let _ = writeln!(out, "{id}\t{}\t{core}\t{tag}", chip.index(c.placement.grid_w));
        }
    }
    out
}

fn compile_cmd(g: &GlobalOpts, a: &NetlistArgs) -> Result<()> {
    let fabric = load_fabric(g)?;
    let spec = load_netlist(a)?;
    let seed = g.seed.unwrap_or(spec.seed);
    let c = compile(spec, &fabric, seed)?;
    let report = validate(&c.placement, &c.spec);

    let mut out = Output::new(&g.out)?;
    out.write("image.mem", c.image.render().map_err(CompileError::from)?)?;
    out.write("placement.tsv", placement_report(&c.placement, &c.spec))?;
    out.write("inputs.tsv", inputs_tsv(&c))?;
    out.write(
        "validation.json",
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    let clean = report.is_clean();
    out.finish(
        "compile",
        Some(seed),
        json!({
            "neurons": c.spec.neuron_count(),
            "cores_used": c.placement.used_cores().len(),
            "image_entries": c.image.len(),
            "validation_clean": clean,
            "missing_edges": report.missing.len(),
            "spurious_edges": report.spurious.len(),
            "type_mismatches": report.type_mismatch.len(),
            "max_bits_per_neuron": report.bits.max_used_per_neuron,
        }),
    )?;
    if clean {
        Ok(())
    } else {
        Err(CliError::Compile(CompileError::Netlist(
            "symbolic validation found connectivity or resource errors; see validation.json".into(),
        )))
    }
}

fn input_population(spec: &NetworkSpec, label: Option<&str>) -> Result<(NeuronId, u32)> {
    let offsets = spec.offsets();
    let idx = match label {
        Some(l) => spec
            .population_index(l)
            .ok_or_else(|| CliError::Usage(format!("no population `{l}`")))?,
        None => spec
            .populations
            .iter()
            .position(|p| p.kind == PopKind::Input)
            .ok_or_else(|| CliError::Usage("netlist has no input population".into()))?,
    };
    if spec.populations[idx].kind != PopKind::Input {
        return Err(CliError::Usage(format!("population `{}` is not an input", spec.populations[idx].label)));
    }
    Ok((offsets[idx], spec.populations[idx].size))
}

fn poisson_stimuli(c: &Compiled, first: NeuronId, size: u32, rate_hz: f64, end_ps: u64, seed: u64) -> Result<Vec<ExternalEvent>> {
    let exp = Exp::new(rate_hz / 1e12).map_err(|_| CliError::Usage(format!("invalid Poisson rate {rate_hz}")))?;
    let table = stimulus_table(&c.placement);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for id in first..first + size {
        let targets = &table[&id];
        let mut t: f64 = exp.sample(&mut rng);
        while t < end_ps as f64 {
            out.extend(
                targets
                    .iter()
                    .map(|&(chip, core, tag)| ExternalEvent::stimulus(t as u64, chip, core, tag)),
            );
            t += exp.sample(&mut rng);
        }
    }
    out.sort_by_key(|e| e.time_ps);
    Ok(out)
}

fn simulate(g: &GlobalOpts, a: &SimArgs, trace: bool, command: &str) -> Result<()> {
    let fabric = load_fabric(g)?;
    let spec = load_netlist(&a.net)?;
    if a.input.is_some() && a.poisson_hz.is_some() {
        return Err(CliError::Usage("--input and --poisson-hz are exclusive".into()));
    }
    let seed = g.seed.unwrap_or(spec.seed);
    let c = compile(spec, &fabric, seed)?;

    let mut stimuli = Vec::new();
    let mut skipped = 0;
    let mut events = 0;
    if a.input.is_some() || a.poisson_hz.is_some() {
        let (first, size) = input_population(&c.spec, a.input_pop.as_deref())?;
        if let Some(path) = &a.input {
            let width = match a.sensor_width {
                Some(w) => w,
                None => {
                    let side = (size as f64).sqrt().round() as u32;
                    if side * side != size {
                        return Err(CliError::Usage(format!(
                            "input population of {size} is not square; pass --sensor-width"
                        )));
                    }
                    side as u16
                }
            };
            let bytes = fs::read(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            let height = size.div_ceil(width as u32).min(u16::MAX as u32) as u16;
            let evs = aer::parse_bounded(&bytes, a.format, width, height)
                .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
            events = evs.len();
            let (s, k) = aer_to_stimuli(&evs, &stimulus_table(&c.placement), first, width);
            stimuli = s;
            skipped = k;
        } else if let Some(hz) = a.poisson_hz {
            let end = a.duration_ms.unwrap_or(100.0);
            stimuli = poisson_stimuli(&c, first, size, hz, (end * PS_PER_MS as f64) as u64, seed)?;
            events = stimuli.len();
        }
    }
    let end_ps = match a.duration_ms {
        Some(d) if d.is_finite() && d >= 0.0 => (d * PS_PER_MS as f64).round() as u64,
        Some(d) => return Err(CliError::Usage(format!("invalid duration {d} ms"))),
        None => stimuli
            .iter()
            .map(|e| e.time_ps + 10 * PS_PER_MS)
            .max()
            .unwrap_or(100 * PS_PER_MS),
    };

    let mut e = build_engine(&c, &fabric)?;
    e.set_trace(trace);
    e.set_record_deliveries(false);
    e.inject_external(&stimuli)?;
    let stats = e.run_until(end_ps)?;

    let pop_of = c.spec.population_of();
    let offsets = c.spec.offsets();
    let mut raster = String::from("time_ns\tneuron\tpopulation\tindex\n");
    for (t_ms, id) in raster_ids(&e, &c.placement) {
        let p = pop_of[id as usize];
        let t_ps = (t_ms * PS_PER_MS as f64).round() as u64;
        let _ = writeln!(
            raster,
            "{}.{:03}\t{id}\t{}\t{}",
            t_ps / 1000,
            t_ps % 1000,
            c.spec.populations[p].label,
            id - offsets[p]
        );
    }

    let mut out = Output::new(&g.out)?;
    out.write("stats.tsv", stats.to_tsv())?;
    out.write("raster.tsv", raster)?;
    if trace {
        out.write("trace.tsv", e.render_trace())?;
    }
    let faults = e.faults().len();
    out.finish(
        command,
        Some(seed),
        json!({
            "duration_ps": end_ps,
            "input_events": events,
            "skipped_events": skipped,
            "stimuli": stimuli.len(),
            "spikes": e.raster().len(),
            "faults": faults,
            "energy_fj": stats.energy_fj,
            "counters": stats.counters,
        }),
    )?;
    if faults > 0 {
        for f in e.faults().iter().take(10) {
            log::error!("fault: {f:?}");
        }
        return Err(CliError::Sim(format!("{faults} routing faults; see the log")));
    }
    Ok(())
}

fn demo_cnn(g: &GlobalOpts) -> Result<()> {
    let mut cfg: DemoConfig = match &g.config {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?,
        None => DemoConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.fabric.throttle_io |= g.throttle_io;
    let r = run_demo(&cfg).map_err(|e| match e.downcast::<CompileError>() {
        Ok(c) => CliError::Compile(c),
        Err(e) => CliError::Sim(format!("{e:#}")),
    })?;

    let names: Vec<String> = CLASSES.iter().map(|s| s.to_string()).collect();
    let mut readout = String::from("class\trank\tpool_index\n");
    for (k, w) in r.readout.wiring.iter().enumerate() {
        for (rank, i) in w.iter().enumerate() {
            let _ = writeln!(readout, "{}\t{rank}\t{i}", names[k]);
        }
    }
    let max_first = r.max_first_correct_ms;
    let mut out = Output::new(&g.out)?;
    out.write("classification.tsv", render_report(&r.decisions, &names))?;
    out.write("latency_histogram.tsv", render_latency_histogram(&r.decisions))?;
    out.write("readout.tsv", readout)?;
    out.write("events.csv", aer::write_csv(&r.test_events))?;
    let correct = r.decisions.iter().filter(|d| d.correct()).count();
    println!(
        "accuracy {correct}/{} ({:.1}%), slowest first correct decision {}",
        r.decisions.len(),
        100.0 * r.accuracy,
        max_first.map_or("never".to_string(), |t| format!("{t:.0} ms"))
    );
    out.finish(
        "demo-cnn",
        Some(cfg.seed),
        json!({
            "presentations": r.decisions.len(),
            "correct": correct,
            "accuracy": r.accuracy,
            "max_first_correct_ms": max_first,
            "window_delay_ms": cfg.window.delay_ms,
            "window_width_ms": cfg.window.width_ms,
            "readout_warnings": r.readout.warnings,
            "train_input_events": r.train.events,
            "test_input_events": r.test.events,
            "simulated_ms": simulated_ms(&r),
            "test_energy_fj": r.test.stats.energy_fj,
            "neurons": r.layout.input_size + r.layout.conv_size + r.layout.pool_size + r.layout.classes * r.layout.out_per_class,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let errs = [
            CliError::Usage(String::new()),
            CliError::Io {
                path: PathBuf::new(),
                source: std::io::Error::other("x"),
            },
            CliError::Parse(String::new()),
            CliError::Compile(CompileError::Netlist(String::new())),
            CliError::Sim(String::new()),
        ];
        let mut codes: Vec<u8> = errs.iter().map(CliError::exit_code).collect();
        codes.dedup();
        assert_eq!(codes, vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn default_grid_holds_prototype_point() {
        let g = MemoryGrid::default();
        assert!(g.n.contains(&1_048_576.0) && g.f.contains(&8192.0) && g.c.contains(&256.0));
    }

    #[test]
    fn poisson_rate() {
        let mut spec = NetworkSpec::new("p", 0);
        let i = spec.add_population("in", 50, PopKind::Input, dynapsim_core::compiler::DEFAULT_PARAM_SET);
        let n = spec.add_population("n", 1, PopKind::Neuron, dynapsim_core::compiler::DEFAULT_PARAM_SET);
        for k in 0..50 {
            spec.connect(i + k, n, dynapsim_core::packets::SynType::FastExc);
        }
        let c = compile(spec, &FabricConfig::default(), 0).unwrap();
        let s = poisson_stimuli(&c, i, 50, 200.0, 1000 * PS_PER_MS, 3).unwrap();
        let r = s.len() as f64 / 50.0;
        assert!((r - 200.0).abs() < 10.0, "{r}");
        assert!(s.windows(2).all(|w| w[0].time_ps <= w[1].time_ps));
    }
}
