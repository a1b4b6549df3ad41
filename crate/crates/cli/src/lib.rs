//! Experiment runner: expands flags into simulation variants, runs them on a
//! worker pool and writes one metrics CSV per variant plus an aggregate.

use clap::{ArgAction, Parser};
use dronereach::beliefmodel::BeliefParams;
use dronereach::graphmap::{bounds_from_extract, import_road_network, load_map, BoundingBox};
use dronereach::simharness::{run_simulation, EmaxPolicy, MapSource, RequestOrder, RunSummary, SimConfig};
use dronereach::strategies::StrategyKind;
use rayon::prelude::*;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

pub const AGGREGATE_FILE: &str = "aggregate.csv";

pub const AGGREGATE_HEADER: &str = "strategy,alpha,runs,acc_rate_mean,acc_rate_std,succ_rate_mean,succ_rate_std,\
del_rate_mean,del_rate_std,recall_mean,recall_std,precision_mean,precision_std,edge_coverage_mean,edge_coverage_std";

#[derive(Debug, Error)]
pub enum CliError {
    /// `--help` or `--version` output; not a failure.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("map error: {0}")]
    Map(#[from] dronereach::graphmap::GraphError),
}

fn usage(flag: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("--{flag}: {msg}"))
}

#[derive(Debug, Parser)]
#[command(name = "dronereach", version, about = "Runs delivery-drone reachability experiments")]
#[command(args_override_self = true)]
struct Args {
    /// file.json | random:N,K | grid:R,C | osm:file.osm
    #[arg(long, default_value = "grid:10,10")]
    map: String,
    /// Comma list of shortest-path, frontier, optimal, random
    #[arg(long, default_value = "frontier")]
    strategy: String,
    #[arg(long, default_value_t = 2000)]
    requests: usize,
    #[arg(long, default_value_t = 0.95)]
    phi: f64,
    /// Comma list
    #[arg(long, default_value = "0")]
    alpha: String,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    #[arg(long, default_value_t = 0.95)]
    kappa: f64,
    /// on | off
    #[arg(long, default_value = "off")]
    safety: String,
    /// Largest single-edge energy for the safety reserve; "auto" reads it off the beliefs
    #[arg(long = "e-max", default_value = "auto")]
    e_max: String,
    #[arg(long = "budget-fraction", default_value_t = 0.6)]
    budget_fraction: f64,
    /// Explicit budget; overrides --budget-fraction
    #[arg(long)]
    budget: Option<f64>,
    /// Comma list
    #[arg(long, default_value = "0")]
    seed: String,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// key=value file mirroring the flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Prior energy per meter
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    w0: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    /// on | off
    #[arg(long = "cross-bin")]
    cross_bin: Option<String>,
    /// random | round-robin
    #[arg(long, default_value = "random")]
    order: String,
    /// minlat,minlon,maxlat,maxlon for osm maps (default: the extract's bounds)
    #[arg(long)]
    bbox: Option<String>,
    /// Also write each run's final beliefs as JSON
    #[arg(long = "dump-beliefs", action = ArgAction::SetTrue)]
    dump_beliefs: bool,
}

#[derive(Debug, Clone)]
pub struct Variant {
    /// File stem of the variant's CSV.
    pub name: String,
    pub config: SimConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub variants: Vec<Variant>,
    pub out: PathBuf,
    pub jobs: usize,
    pub dump_beliefs: bool,
}

fn parse_list<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>, _> = raw.split(',').map(|s| s.trim().parse::<T>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        Ok(_) => Err(usage(flag, "empty list")),
        Err(e) => Err(usage(flag, format!("{raw:?}: {e}"))),
    }
}

fn on_off(flag: &str, raw: &str) -> Result<bool, CliError> {
    match raw {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(usage(flag, format!("expected on or off, got {raw:?}"))),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })
}

fn parse_pair(flag: &str, raw: &str) -> Result<(usize, usize), CliError> {
    match parse_list::<usize>(flag, raw)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err(usage(flag, format!("expected two numbers, got {raw:?}"))),
    }
}

fn parse_bbox(raw: &str) -> Result<BoundingBox, CliError> {
    match parse_list::<f64>("bbox", raw)?[..] {
        [min_lat, min_lon, max_lat, max_lon] if min_lat < max_lat && min_lon < max_lon => Ok(BoundingBox {
            min_lat,
            min_lon,
            max_lat,
            max_lon,
        }),
        _ => Err(usage("bbox", format!("expected minlat,minlon,maxlat,maxlon, got {raw:?}"))),
    }
}

fn parse_map(raw: &str, bbox: Option<&str>) -> Result<MapSource, CliError> {
    if let Some(rest) = raw.strip_prefix("random:") {
        let (n, k) = parse_pair("map", rest)?;
        return Ok(MapSource::random(n, k));
    }
    if let Some(rest) = raw.strip_prefix("grid:") {
        let (r, c) = parse_pair("map", rest)?;
        return Ok(MapSource::grid(r, c));
    }
    if let Some(file) = raw.strip_prefix("osm:") {
        let xml = read(Path::new(file))?;
        let bbox = match bbox {
            Some(b) => parse_bbox(b)?,
            None => bounds_from_extract(&xml)?
                .ok_or_else(|| usage("bbox", "the extract has no <bounds>; pass --bbox"))?,
        };
        let import = import_road_network(&xml, &bbox)?;
        log::info!(
            "imported {} nodes from {file} ({} dropped)",
            import.graph.node_count(),
            import.dropped_nodes
        );
        return Ok(MapSource::Inline(Arc::new(import.graph)));
    }
    let text = read(Path::new(raw))?;
    Ok(MapSource::Inline(Arc::new(load_map(text.as_bytes())?)))
}

/// Turns `key=value` lines into flags. Blank lines and `#` comments are skipped.
fn config_args(path: &Path) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (i, line) in read(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage("config", format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(usage("config", "config files cannot include other config files"));
        }
        let value = value.trim();
        if key == "dump-beliefs" {
            if on_off("dump-beliefs", value)? {
                out.push("--dump-beliefs".into());
            }
        } else {
            out.push(format!("--{key}").into());
            out.push(value.into());
        }
    }
    Ok(out)
}

fn clap_error(e: clap::Error) -> CliError {
    use clap::error::ErrorKind;
    let text = e.to_string().trim_end().to_string();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Help(text),
        _ => CliError::Usage(text),
    }
}

/// Parses a full argv (program name first).
pub fn parse_args<I, S>(argv: I) -> Result<ExperimentSpec, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let first = Args::try_parse_from(&argv).map_err(clap_error)?;
    let args = match &first.config {
        Some(path) => {
            let mut merged = vec![argv.first().cloned().unwrap_or_else(|| "dronereach".into())];
            merged.extend(config_args(path)?);
            merged.extend(argv.iter().skip(1).cloned());
            Args::try_parse_from(merged).map_err(clap_error)?
        }
        None => first,
    };
    build_spec(args)
}

fn build_spec(a: Args) -> Result<ExperimentSpec, CliError> {
    let strategies: Vec<StrategyKind> = parse_list("strategy", &a.strategy)?;
    let alphas: Vec<f64> = parse_list("alpha", &a.alpha)?;
    let seeds: Vec<u64> = parse_list("seed", &a.seed)?;
    let map = parse_map(&a.map, a.bbox.as_deref())?;
    let defaults = BeliefParams::default();
    let belief = BeliefParams {
        k: a.k.unwrap_or(defaults.k),
        w0: a.w0.unwrap_or(defaults.w0),
        c1: a.c1.unwrap_or(defaults.c1),
        c2: a.c2.unwrap_or(defaults.c2),
        cross_bin_transfer: match &a.cross_bin {
            Some(v) => on_off("cross-bin", v)?,
            None => defaults.cross_bin_transfer,
        },
    };
    let e_max = match a.e_max.as_str() {
        "auto" => EmaxPolicy::BeliefMax,
        raw => EmaxPolicy::Fixed(raw.parse().map_err(|_| usage("e-max", format!("bad value {raw:?}")))?),
    };
    let order = match a.order.as_str() {
        "random" => RequestOrder::Random,
        "round-robin" => RequestOrder::RoundRobin,
        other => return Err(usage("order", format!("unknown order {other:?}"))),
    };
    let safety = on_off("safety", &a.safety)?;

    let mut variants = Vec::with_capacity(strategies.len() * alphas.len() * seeds.len());
    for &strategy in &strategies {
        for &alpha in &alphas {
            for &seed in &seeds {
                let config = SimConfig {
                    map: map.clone(),
                    strategy,
                    requests: a.requests,
                    phi: a.phi,
                    alpha,
                    beta: a.beta,
                    kappa: a.kappa,
                    e_max,
                    safety,
                    budget_fraction: a.budget_fraction,
                    budget: a.budget,
                    belief,
                    seed,
                    order,
                    ..SimConfig::default()
                };
                config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
                variants.push(Variant {
                    name: format!("{strategy}_alpha{alpha}_seed{seed}"),
                    config,
                });
            }
        }
    }
    let jobs = match a.jobs {
        Some(0) => return Err(usage("jobs", "must be at least 1")),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(ExperimentSpec {
        variants,
        out: a.out,
        jobs,
        dump_beliefs: a.dump_beliefs,
    })
}

/// What became of each variant.
#[derive(Debug)]
pub struct Report {
    pub summaries: Vec<(Variant, RunSummary)>,
    pub failures: Vec<(String, String)>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.failures.is_empty())
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(&path, text).map_err(|source| CliError::Write { path, source })
}

fn run_variant(v: &Variant, out: &Path, dump: bool) -> Result<RunSummary, String> {
    let res = run_simulation(&v.config).map_err(|e| e.to_string())?;
    write(out.join(format!("{}.csv", v.name)), &res.csv()).map_err(|e| e.to_string())?;
    if dump {
        let path = out.join(format!("{}.beliefs.json", v.name));
        write(path, &res.store.snapshot_json()).map_err(|e| e.to_string())?;
    }
    Ok(res.summary())
}

/// Runs every variant, writing results under `spec.out`. Failed variants are
/// reported and do not stop the others.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report, CliError> {
    fs::create_dir_all(&spec.out).map_err(|source| CliError::Write {
        path: spec.out.clone(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    let results: Vec<Result<RunSummary, String>> = pool.install(|| {
        spec.variants
            .par_iter()
            .map(|v| {
                log::info!("running {}", v.name);
                run_variant(v, &spec.out, spec.dump_beliefs)
            })
            .collect()
    });

    let mut report = Report {
        summaries: Vec::new(),
        failures: Vec::new(),
    };
    for (v, r) in spec.variants.iter().zip(results) {
        match r {
            Ok(s) => report.summaries.push((v.clone(), s)),
            Err(e) => {
                log::error!("{} failed: {e}", v.name);
                report.failures.push((v.name.clone(), e));
            }
        }
    }
    write(spec.out.join(AGGREGATE_FILE), &aggregate_csv(&report.summaries))?;
    Ok(report)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and population standard deviation over seeds for each
/// (strategy, α), in first-seen order.
pub fn aggregate_csv(summaries: &[(Variant, RunSummary)]) -> String {
    let mut groups: Vec<((StrategyKind, f64), Vec<&RunSummary>)> = Vec::new();
    for (v, s) in summaries {
        let key = (v.config.strategy, v.config.alpha);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(s),
            None => groups.push((key, vec![s])),
        }
    }
    let fields: [fn(&RunSummary) -> f64; 6] = [
        |s| s.acc_rate,
        |s| s.succ_rate,
        |s| s.del_rate,
        |s| s.recall,
        |s| s.precision,
        |s| s.edge_coverage,
    ];
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for ((strategy, alpha), runs) in groups {
        let _ = write!(out, "{strategy},{alpha},{}", runs.len());
        for f in fields {
            let xs: Vec<f64> = runs.iter().map(|s| f(s)).collect();
            let (m, sd) = mean_std(&xs);
            let _ = write!(out, ",{m:.6},{sd:.6}");
        }
        out.push('\n');
    }
    out
}
