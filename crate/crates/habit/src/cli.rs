//! Command-line surface: `ingest`, `build`, `impute`, `eval`,
//! `export-geojson`, driven by a TOML config with flag overrides
//! (precedence: flag > file > default).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::aggregate::{aggregate_cells, aggregate_transitions};
use crate::cell::Resolution;
use crate::config::RunConfig;
use crate::eval::{render_report_text, run_benchmark, write_cases_csv, EvalConfig};
use crate::geojson;
use crate::graph::{BuildMetadata, TrafficGraph};
use crate::impute::{impute_gap, CostMode, Gap, Projection};
use crate::model::{
    parse_record, validate_record, AisRecord, RejectReason, TimedPoint, TimestampMs, TsFormat,
};
use crate::segment::{
    clean_stream, filter_micro_trips, group_by_vessel, read_trips, segment_trips, write_trips,
    Trip,
};

#[derive(Debug, Parser)]
#[command(
    name = "habit",
    version,
    about = "Impute gaps in vessel trajectories from aggregated historical traffic"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub overrides: Overrides,
}

/// Flags shared by every subcommand, overriding config-file fields.
#[derive(Debug, Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master RNG seed for splits and gap placement.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// H3 grid resolution (0-15).
    #[arg(long, global = true)]
    pub resolution: Option<u8>,
    /// Simplification tolerance in meters.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Inverse projection: cell centers (c) or data medians (w).
    #[arg(long, global = true, value_enum)]
    pub projection: Option<ProjectionArg>,
    /// Path search cost model.
    #[arg(long = "cost-mode", global = true, value_enum)]
    pub cost_mode: Option<CostModeArg>,
    /// Worker threads (0 = available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Input field delimiter (single byte).
    #[arg(long, global = true)]
    pub delimiter: Option<String>,
    /// Schema mapping entries `field=column`, e.g. `vessel_id=MMSI`;
    /// fields: vessel_id, timestamp, lon, lat, sog, cog. Repeatable.
    #[arg(long = "schema", global = true, value_name = "FIELD=COLUMN")]
    pub schema: Vec<String>,
    /// Timestamp format: rfc3339, epoch_s, epoch_ms, or a chrono pattern.
    #[arg(long = "ts-format", global = true)]
    pub ts_format: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProjectionArg {
    C,
    W,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CostModeArg {
    Hops,
    InverseFrequency,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, validate, clean, and segment raw reports into trips.
    Ingest {
        /// Input files (override the config's input.paths).
        #[arg(long)]
        input: Vec<PathBuf>,
    },
    /// Aggregate trips onto the grid and build the traffic graph.
    Build {
        /// Trips file (defaults to trips.csv in the output directory).
        #[arg(long)]
        trips: Option<PathBuf>,
        /// Also export the graph as node/edge CSV into this directory.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// Impute gaps listed in a delimited file against a built graph.
    Impute {
        /// Graph file (defaults to graph-r{resolution}.hbg in the output directory).
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Gap list: vessel_id,start_lon,start_lat,start_ts,end_lon,end_lat,end_ts.
        #[arg(long)]
        gaps: PathBuf,
    },
    /// Run the evaluation protocol on a trips file.
    Eval {
        /// Trips file (defaults to trips.csv in the output directory).
        #[arg(long)]
        trips: Option<PathBuf>,
    },
    /// Export graph cells as a GeoJSON polygon collection.
    ExportGeojson {
        /// Graph file (defaults to graph-r{resolution}.hbg in the output directory).
        #[arg(long)]
        graph: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &cli.overrides)?;
    cfg.validate()?;

    if cfg.output.workers > 0 {
        // Ignore the error if a pool already exists (tests, repeated calls).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.output.workers)
            .build_global();
    }
    fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating output directory {}", cfg.output.dir.display()))?;

    match cli.command {
        Command::Ingest { input } => cmd_ingest(&cfg, input),
        Command::Build { trips, csv_dir } => cmd_build(&cfg, trips, csv_dir),
        Command::Impute { graph, gaps } => cmd_impute(&cfg, graph, &gaps),
        Command::Eval { trips } => cmd_eval(&cfg, trips),
        Command::ExportGeojson { graph } => cmd_export_geojson(&cfg, graph),
    }
}

fn apply_overrides(cfg: &mut RunConfig, o: &Overrides) -> Result<()> {
    if let Some(seed) = o.seed {
        cfg.eval.seed = seed;
    }
    if let Some(r) = o.resolution {
        cfg.grid.resolution = r;
    }
    if let Some(t) = o.tolerance {
        cfg.impute.tolerance_m = t;
    }
    if let Some(p) = o.projection {
        cfg.impute.projection = match p {
            ProjectionArg::C => Projection::Center,
            ProjectionArg::W => Projection::Median,
        };
    }
    if let Some(m) = o.cost_mode {
        cfg.impute.cost_mode = match m {
            CostModeArg::Hops => CostMode::Hops,
            CostModeArg::InverseFrequency => CostMode::InverseFrequency,
        };
    }
    if let Some(w) = o.workers {
        cfg.output.workers = w;
    }
    if let Some(out) = &o.out {
        cfg.output.dir = out.clone();
    }
    if let Some(d) = &o.delimiter {
        cfg.input.delimiter = d.clone();
    }
    for entry in &o.schema {
        let Some((field, column)) = entry.split_once('=') else {
            bail!("--schema expects FIELD=COLUMN, got `{entry}`");
        };
        let column = column.to_string();
        match field {
            "vessel_id" => cfg.input.schema.vessel_id = column,
            "timestamp" => cfg.input.schema.timestamp = column,
            "lon" => cfg.input.schema.lon = column,
            "lat" => cfg.input.schema.lat = column,
            "sog" => cfg.input.schema.sog = Some(column),
            "cog" => cfg.input.schema.cog = Some(column),
            other => bail!("--schema: unknown field `{other}`"),
        }
    }
    if let Some(fmt) = &o.ts_format {
        cfg.input.schema.ts_format = match fmt.as_str() {
            "rfc3339" => TsFormat::Rfc3339,
            "epoch_s" => TsFormat::EpochS,
            "epoch_ms" => TsFormat::EpochMs,
            pattern => TsFormat::Custom(pattern.to_string()),
        };
    }
    Ok(())
}

fn default_graph_path(cfg: &RunConfig) -> PathBuf {
    cfg.output
        .dir
        .join(format!("graph-r{}.hbg", cfg.grid.resolution))
}

fn cmd_ingest(cfg: &RunConfig, input_flags: Vec<PathBuf>) -> Result<()> {
    let inputs = if input_flags.is_empty() {
        cfg.input.paths.clone()
    } else {
        input_flags
    };
    if inputs.is_empty() {
        bail!("no input files: set input.paths in the config or pass --input");
    }
    let delimiter = cfg.input.delimiter_byte()?;
    let resolution = Resolution::new(cfg.grid.resolution)?;

    let mut rows_read = 0u64;
    let mut rejects: BTreeMap<RejectReason, u64> = BTreeMap::new();
    let mut accepted: Vec<AisRecord> = Vec::new();

    for path in &inputs {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .flexible(true)
            .from_reader(file);
        let headers = reader
            .headers()
            .with_context(|| format!("reading header of {}", path.display()))?
            .clone();
        let schema = cfg
            .input
            .schema
            .resolve(&headers)
            .with_context(|| format!("resolving schema against {}", path.display()))?;

        for row in reader.records() {
            let row = row.with_context(|| format!("reading {}", path.display()))?;
            rows_read += 1;
            match parse_record(&row, &schema) {
                Ok(rec) => match validate_record(&rec) {
                    Ok(()) => accepted.push(rec),
                    Err(reason) => *rejects.entry(reason).or_insert(0) += 1,
                },
                Err(_) => *rejects.entry(RejectReason::MalformedField).or_insert(0) += 1,
            }
        }
    }

    // Per-vessel cleaning and segmentation; vessels are independent, the
    // merge is deterministic (group map is ordered).
    let groups = group_by_vessel(accepted);
    let n_vessels = groups.len();
    let per_vessel: Vec<(Vec<Trip>, Vec<crate::segment::RejectedRecord>)> = {
        use rayon::prelude::*;
        let groups: Vec<(String, Vec<AisRecord>)> = groups.into_iter().collect();
        groups
            .into_par_iter()
            .map(|(_, records)| {
                let (clean, rejected) = clean_stream(records, &cfg.segmenter);
                (segment_trips(&clean, &cfg.segmenter), rejected)
            })
            .collect()
    };

    let mut trips: Vec<Trip> = Vec::new();
    for (vessel_trips, rejected) in per_vessel {
        trips.extend(vessel_trips);
        for r in rejected {
            *rejects.entry(r.reason).or_insert(0) += 1;
        }
    }
    let before_filter = trips.len();
    let trips = filter_micro_trips(trips, resolution);
    let micro_removed = before_filter - trips.len();

    let trips_path = cfg.output.dir.join("trips.csv");
    let file = fs::File::create(&trips_path)
        .with_context(|| format!("creating {}", trips_path.display()))?;
    write_trips(file, &trips)?;

    let points_in_trips: usize = trips.iter().map(|t| t.points.len()).sum();
    let summary = json!({
        "rows_read": rows_read,
        "rejects": RejectReason::ALL
            .iter()
            .map(|r| (r.to_string(), rejects.get(r).copied().unwrap_or(0)))
            .collect::<BTreeMap<_, _>>(),
        "vessels": n_vessels,
        "trips": trips.len(),
        "micro_trips_removed": micro_removed,
        "points_in_trips": points_in_trips,
    });
    let rejects_path = cfg.output.dir.join("rejects.json");
    fs::write(&rejects_path, serde_json::to_string_pretty(&summary)?)?;

    println!(
        "ingest: {rows_read} rows -> {} trips ({points_in_trips} points) from {n_vessels} vessels",
        trips.len()
    );
    for reason in RejectReason::ALL {
        let n = rejects.get(&reason).copied().unwrap_or(0);
        if n > 0 {
            println!("  rejected {n} as {reason}");
        }
    }
    if micro_removed > 0 {
        println!("  removed {micro_removed} micro-trips at r{}", cfg.grid.resolution);
    }
    println!("  wrote {} and {}", trips_path.display(), rejects_path.display());
    Ok(())
}

fn cmd_build(cfg: &RunConfig, trips_flag: Option<PathBuf>, csv_dir: Option<PathBuf>) -> Result<()> {
    let trips_path = trips_flag.unwrap_or_else(|| cfg.output.dir.join("trips.csv"));
    let resolution = Resolution::new(cfg.grid.resolution)?;
    let file = fs::File::open(&trips_path)
        .with_context(|| format!("opening trips file {}", trips_path.display()))?;
    let trips = read_trips(file).map_err(|e| anyhow::anyhow!(e))?;

    let trips = filter_micro_trips(trips, resolution);
    let record_count: usize = trips.iter().map(|t| t.points.len()).sum();
    let cells = aggregate_cells(&trips, resolution, cfg.grid.distinct_mode)?;
    let (transitions, undefined_pairs) =
        aggregate_transitions(&trips, resolution, cfg.grid.distinct_mode)?;
    let graph = TrafficGraph::build(
        &cells,
        &transitions,
        BuildMetadata {
            source: trips_path.display().to_string(),
            trip_count: trips.len() as u64,
            record_count: record_count as u64,
            built_at_ms: chrono::Utc::now().timestamp_millis(),
        },
    )?;

    if graph.is_empty() {
        eprintln!("warning: empty graph (no transitions in input); writing a valid empty file");
    }
    if undefined_pairs > 0 {
        eprintln!("warning: dropped {undefined_pairs} transitions with undefined grid distance");
    }

    let graph_path = default_graph_path(cfg);
    graph.save_to_path(&graph_path)?;
    let bytes = fs::metadata(&graph_path)?.len();
    println!(
        "build: r{} graph with {} nodes, {} edges -> {} ({bytes} bytes)",
        cfg.grid.resolution,
        graph.node_count(),
        graph.edge_count(),
        graph_path.display()
    );

    if let Some(dir) = csv_dir {
        fs::create_dir_all(&dir)?;
        let nodes = fs::File::create(dir.join("nodes.csv"))?;
        let edges = fs::File::create(dir.join("edges.csv"))?;
        graph.write_csv(nodes, edges)?;
        println!("  exported node/edge CSV to {}", dir.display());
    }
    Ok(())
}

/// Accept RFC 3339 or integer epoch milliseconds.
fn parse_flexible_ts(raw: &str) -> Option<TimestampMs> {
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp_millis());
    }
    raw.parse::<i64>().ok()
}

fn cmd_impute(cfg: &RunConfig, graph_flag: Option<PathBuf>, gaps_path: &Path) -> Result<()> {
    let graph_path = graph_flag.unwrap_or_else(|| default_graph_path(cfg));
    let graph = TrafficGraph::load_from_path(&graph_path)
        .with_context(|| format!("loading graph {}", graph_path.display()))?;

    let file = fs::File::open(gaps_path)
        .with_context(|| format!("opening gaps file {}", gaps_path.display()))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("gaps file missing column `{name}`"))
    };
    let (ci_vessel, ci_slon, ci_slat, ci_sts, ci_elon, ci_elat, ci_ets) = (
        col("vessel_id")?,
        col("start_lon")?,
        col("start_lat")?,
        col("start_ts")?,
        col("end_lon")?,
        col("end_lat")?,
        col("end_ts")?,
    );
    let ci_trip = headers.iter().position(|h| h.trim() == "trip_id");

    let mut features = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let get = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        let parse_gap = || -> Result<Gap> {
            let f = |i: usize, name: &str| -> Result<f64> {
                get(i)
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| anyhow::anyhow!("gaps row {}: bad {name}", line + 2))
            };
            let ts = |i: usize, name: &str| -> Result<TimestampMs> {
                parse_flexible_ts(&get(i))
                    .ok_or_else(|| anyhow::anyhow!("gaps row {}: bad {name}", line + 2))
            };
            let start = TimedPoint::new(
                f(ci_slon, "start_lon")?,
                f(ci_slat, "start_lat")?,
                ts(ci_sts, "start_ts")?,
            );
            let end = TimedPoint::new(
                f(ci_elon, "end_lon")?,
                f(ci_elat, "end_lat")?,
                ts(ci_ets, "end_ts")?,
            );
            let trip_id = ci_trip.map(get).unwrap_or_default();
            Ok(Gap::new(get(ci_vessel), trip_id, start, end)?)
        };

        match parse_gap() {
            Ok(gap) => match impute_gap(&graph, &gap, &cfg.impute) {
                Ok(path) => {
                    features.push(geojson::imputed_path_feature(&gap.vessel_id, &gap.trip_id, &path))
                }
                // Per-gap failures become features; the batch continues.
                Err(e) => features.push(geojson::gap_error_feature(
                    &gap.vessel_id,
                    &gap.trip_id,
                    &e.to_string(),
                )),
            },
            Err(e) => features.push(geojson::gap_error_feature("", "", &e.to_string())),
        }
    }

    let out_path = cfg.output.dir.join("imputed.geojson");
    let n = features.len();
    fs::write(
        &out_path,
        serde_json::to_string_pretty(&geojson::feature_collection(features))?,
    )?;
    println!("impute: {n} features -> {}", out_path.display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, trips_flag: Option<PathBuf>) -> Result<()> {
    let trips_path = trips_flag.unwrap_or_else(|| cfg.output.dir.join("trips.csv"));
    let file = fs::File::open(&trips_path)
        .with_context(|| format!("opening trips file {}", trips_path.display()))?;
    let trips = read_trips(file).map_err(|e| anyhow::anyhow!(e))?;

    let eval_cfg = EvalConfig {
        methods: cfg.eval_methods(),
        ..cfg.eval.clone()
    };
    let report = run_benchmark(&eval_cfg, &trips)?;

    let json_path = cfg.output.dir.join("eval-report.json");
    fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
    let text = render_report_text(&report);
    let text_path = cfg.output.dir.join("eval-report.txt");
    fs::write(&text_path, &text)?;
    let csv_path = cfg.output.dir.join("eval-cases.csv");
    let csv_file = fs::File::create(&csv_path)?;
    write_cases_csv(csv_file, &report)?;

    print!("{text}");
    println!(
        "eval: wrote {}, {}, {}",
        json_path.display(),
        text_path.display(),
        csv_path.display()
    );
    std::io::stdout().flush().ok();
    Ok(())
}

fn cmd_export_geojson(cfg: &RunConfig, graph_flag: Option<PathBuf>) -> Result<()> {
    let graph_path = graph_flag.unwrap_or_else(|| default_graph_path(cfg));
    let graph = TrafficGraph::load_from_path(&graph_path)
        .with_context(|| format!("loading graph {}", graph_path.display()))?;
    let collection = geojson::graph_cells_collection(&graph);
    let out_path = cfg.output.dir.join("cells.geojson");
    fs::write(&out_path, serde_json::to_string_pretty(&collection)?)?;
    println!(
        "export-geojson: {} cell polygons -> {}",
        graph.node_count(),
        out_path.display()
    );
    Ok(())
}
