//! End-to-end runs of the `habit` binary: ingest -> build -> impute -> eval
//! -> export-geojson on synthetic corpora in temp directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use habit::eval::EvalReport;
use habit::graph::TrafficGraph;
use habit::model::{format_timestamp, CANONICAL_HEADER};
use habit::synth::{corpus_records, corridor_trips, CorridorSpec};

fn habit_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_habit"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawn habit binary");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn write_corpus_csv(path: &Path, spec: &CorridorSpec) {
    let records = corpus_records(&corridor_trips(spec));
    let mut writer = csv::Writer::from_writer(fs::File::create(path).unwrap());
    writer.write_record(CANONICAL_HEADER).unwrap();
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &records {
        writer
            .write_record([
                r.vessel_id.clone(),
                format_timestamp(r.ts),
                r.lon.to_string(),
                r.lat.to_string(),
                opt(r.sog),
                opt(r.cog),
            ])
            .unwrap();
    }
    writer.flush().unwrap();
}

fn small_spec() -> CorridorSpec {
    CorridorSpec {
        n_trips: 16,
        trip_duration_min: 80.0,
        ..CorridorSpec::default()
    }
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn out(&self) -> PathBuf {
        self.root.join("out")
    }
}

/// Ingest + build once, returning the workspace for the commands under test.
fn ingest_and_build(spec: &CorridorSpec) -> Workspace {
    let ws = Workspace::new();
    let corpus = ws.path("ais.csv");
    write_corpus_csv(&corpus, spec);
    run_ok(habit_bin()
        .args(["ingest", "--input"])
        .arg(&corpus)
        .arg("--out")
        .arg(ws.out()));
    run_ok(habit_bin().arg("build").arg("--out").arg(ws.out()));
    ws
}

#[test]
fn ingest_writes_trips_and_rejection_summary() {
    let ws = Workspace::new();
    let corpus = ws.path("ais.csv");
    write_corpus_csv(&corpus, &small_spec());

    run_ok(habit_bin()
        .args(["ingest", "--input"])
        .arg(&corpus)
        .arg("--out")
        .arg(ws.out()));

    let trips = fs::read_to_string(ws.out().join("trips.csv")).unwrap();
    assert!(trips.lines().count() > 16, "trips file has data rows");
    let rejects: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.out().join("rejects.json")).unwrap()).unwrap();
    assert_eq!(rejects["trips"], 16);
    assert_eq!(rejects["vessels"], 16);
}

#[test]
fn ingest_all_noise_corpus_is_success_with_empty_trips() {
    let ws = Workspace::new();
    let corpus = ws.path("noise.csv");
    let mut writer = csv::Writer::from_writer(fs::File::create(&corpus).unwrap());
    writer.write_record(CANONICAL_HEADER).unwrap();
    for i in 0..50 {
        writer
            .write_record([
                "999000001".to_string(),
                format_timestamp(1_704_448_800_000 + i * 60_000),
                "0".into(),
                "0".into(),
                String::new(),
                String::new(),
            ])
            .unwrap();
    }
    writer.flush().unwrap();

    run_ok(habit_bin()
        .args(["ingest", "--input"])
        .arg(&corpus)
        .arg("--out")
        .arg(ws.out()));

    let trips = fs::read_to_string(ws.out().join("trips.csv")).unwrap();
    assert_eq!(trips.lines().count(), 1, "header only");
    let rejects: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.out().join("rejects.json")).unwrap()).unwrap();
    assert_eq!(rejects["rejects"]["invalid_coordinates"], 50);
    assert_eq!(rejects["trips"], 0);
}

#[test]
fn ingest_missing_required_column_exits_nonzero() {
    let ws = Workspace::new();
    let corpus = ws.path("bad.csv");
    fs::write(&corpus, "vessel_id,ts,lon\nV1,2024-01-05T10:00:00Z,12.5\n").unwrap();
    let output = habit_bin()
        .args(["ingest", "--input"])
        .arg(&corpus)
        .arg("--out")
        .arg(ws.out())
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("lat"), "error names the missing column: {stderr}");
}

#[test]
fn build_produces_connected_graph_on_corridor() {
    let ws = ingest_and_build(&small_spec());
    let graph = TrafficGraph::load_from_path(ws.out().join("graph-r9.hbg")).unwrap();
    assert!(graph.node_count() > 10);

    // Weak connectivity: one corridor, one component.
    let nodes: Vec<_> = graph.nodes().map(|(c, _)| c).collect();
    let mut undirected: std::collections::HashMap<_, Vec<_>> = Default::default();
    for (f, t, _) in graph.edges() {
        undirected.entry(f).or_default().push(t);
        undirected.entry(t).or_default().push(f);
    }
    let mut seen = std::collections::HashSet::from([nodes[0]]);
    let mut stack = vec![nodes[0]];
    while let Some(n) = stack.pop() {
        for &next in undirected.get(&n).into_iter().flatten() {
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    assert_eq!(seen.len(), graph.node_count(), "corridor graph must be connected");
}

#[test]
fn build_at_finer_resolution_has_more_nodes() {
    let ws = Workspace::new();
    let corpus = ws.path("ais.csv");
    write_corpus_csv(&corpus, &small_spec());
    run_ok(habit_bin()
        .args(["ingest", "--input"])
        .arg(&corpus)
        .arg("--out")
        .arg(ws.out()));
    run_ok(habit_bin().args(["build", "--resolution", "6"]).arg("--out").arg(ws.out()));
    run_ok(habit_bin().args(["build", "--resolution", "10"]).arg("--out").arg(ws.out()));

    let coarse = TrafficGraph::load_from_path(ws.out().join("graph-r6.hbg")).unwrap();
    let fine = TrafficGraph::load_from_path(ws.out().join("graph-r10.hbg")).unwrap();
    assert!(
        fine.node_count() > coarse.node_count(),
        "r10 nodes {} vs r6 nodes {}",
        fine.node_count(),
        coarse.node_count()
    );
}

#[test]
fn rebuild_is_byte_identical_modulo_timestamp() {
    let ws = Workspace::new();
    let corpus = ws.path("ais.csv");
    write_corpus_csv(&corpus, &small_spec());
    run_ok(habit_bin()
        .args(["ingest", "--input"])
        .arg(&corpus)
        .arg("--out")
        .arg(ws.out()));

    run_ok(habit_bin().arg("build").arg("--out").arg(ws.out()));
    let first = ws.out().join("graph-r9.hbg");
    let saved = ws.path("first.hbg");
    fs::copy(&first, &saved).unwrap();
    run_ok(habit_bin().arg("build").arg("--out").arg(ws.out()));

    let mut a = TrafficGraph::load_from_path(&saved).unwrap();
    let mut b = TrafficGraph::load_from_path(&first).unwrap();
    a.metadata.built_at_ms = 0;
    b.metadata.built_at_ms = 0;
    let mut bytes_a = Vec::new();
    let mut bytes_b = Vec::new();
    a.save(&mut bytes_a).unwrap();
    b.save(&mut bytes_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "rebuild must be byte-identical up to the build timestamp");
}

fn write_gaps_csv(path: &Path, rows: &[[String; 7]]) {
    let mut writer = csv::Writer::from_writer(fs::File::create(path).unwrap());
    writer
        .write_record(["vessel_id", "start_lon", "start_lat", "start_ts", "end_lon", "end_lat", "end_ts"])
        .unwrap();
    for row in rows {
        writer.write_record(row).unwrap();
    }
    writer.flush().unwrap();
}

/// Three gaps along the corridor plus coordinates for an off-network one.
fn corridor_gap_rows(ws: &Workspace, include_off_network: bool) -> Vec<[String; 7]> {
    let trips = habit::segment::read_trips(fs::File::open(ws.out().join("trips.csv")).unwrap())
        .unwrap();
    let mut rows = Vec::new();
    for trip in trips.iter().take(3) {
        let a = &trip.points[5];
        let b = &trip.points[trip.points.len() - 5];
        rows.push([
            trip.vessel_id.clone(),
            a.lon.to_string(),
            a.lat.to_string(),
            format_timestamp(a.ts),
            b.lon.to_string(),
            b.lat.to_string(),
            format_timestamp(b.ts),
        ]);
    }
    if include_off_network {
        rows.push([
            "OFFNET".into(),
            "-30.0".into(),
            "40.0".into(),
            format_timestamp(1_704_448_800_000),
            "-29.5".into(),
            "40.2".into(),
            format_timestamp(1_704_452_400_000),
        ]);
    }
    rows
}

#[test]
fn impute_emits_one_feature_per_gap_with_fallback_flag() {
    let ws = ingest_and_build(&small_spec());
    let gaps = ws.path("gaps.csv");
    write_gaps_csv(&gaps, &corridor_gap_rows(&ws, true));

    run_ok(habit_bin().arg("impute").arg("--gaps").arg(&gaps).arg("--out").arg(ws.out()));

    let collection: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.out().join("imputed.geojson")).unwrap())
            .unwrap();
    assert_eq!(collection["type"], "FeatureCollection");
    let features = collection["features"].as_array().unwrap();
    assert_eq!(features.len(), 4);
    for feature in features.iter().take(3) {
        assert_eq!(feature["geometry"]["type"], "LineString");
        assert_eq!(feature["properties"]["method"], "habit");
        assert_eq!(feature["properties"]["fallback_used"], false);
        let coords = feature["geometry"]["coordinates"].as_array().unwrap();
        let times = feature["properties"]["timestamps"].as_array().unwrap();
        assert_eq!(coords.len(), times.len());
    }
    let off = &features[3];
    assert_eq!(off["properties"]["method"], "sli");
    assert_eq!(off["properties"]["fallback_used"], true);
}

#[test]
fn impute_with_fallback_error_reports_error_features() {
    let ws = ingest_and_build(&small_spec());
    let config = ws.path("strict.toml");
    fs::write(&config, "[impute]\nfallback = \"error\"\n").unwrap();
    let gaps = ws.path("gaps.csv");
    write_gaps_csv(&gaps, &corridor_gap_rows(&ws, true));

    run_ok(habit_bin()
        .arg("impute")
        .arg("--config")
        .arg(&config)
        .arg("--gaps")
        .arg(&gaps)
        .arg("--out")
        .arg(ws.out()));

    let collection: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.out().join("imputed.geojson")).unwrap())
            .unwrap();
    let features = collection["features"].as_array().unwrap();
    assert_eq!(features.len(), 4, "failed gaps still produce features");
    let off = &features[3];
    assert!(off["geometry"].is_null());
    assert!(off["properties"]["error"].as_str().unwrap().contains("off-network"));
}

#[test]
fn eval_is_deterministic_and_keyed_by_method_label() {
    let ws = Workspace::new();
    let corpus = ws.path("ais.csv");
    write_corpus_csv(&corpus, &small_spec());
    let config = ws.path("eval.toml");
    fs::write(
        &config,
        r#"
[eval]
split_ratio = 0.7
gap_durations_min = [30]
seed = 99

[[eval.methods]]
label = "habit-a"
method = "habit"
resolution = 9
tolerance_m = 250.0
projection = "w"

[[eval.methods]]
label = "habit-b"
method = "habit"
resolution = 9
tolerance_m = 1000.0
projection = "c"

[[eval.methods]]
label = "sli"
method = "sli"
"#,
    )
    .unwrap();

    run_ok(habit_bin()
        .args(["ingest", "--input"])
        .arg(&corpus)
        .arg("--out")
        .arg(ws.out()));

    let out_a = ws.path("eval-a");
    let out_b = ws.path("eval-b");
    for out in [&out_a, &out_b] {
        run_ok(habit_bin()
            .arg("eval")
            .arg("--config")
            .arg(&config)
            .arg("--trips")
            .arg(ws.out().join("trips.csv"))
            .arg("--out")
            .arg(out));
    }

    let load = |dir: &Path| -> EvalReport {
        serde_json::from_str(&fs::read_to_string(dir.join("eval-report.json")).unwrap()).unwrap()
    };
    let report_a = load(&out_a);
    let report_b = load(&out_b);
    assert_eq!(report_a.deterministic_view(), report_b.deterministic_view());

    let labels: std::collections::BTreeSet<&str> =
        report_a.summaries.iter().map(|s| s.method.as_str()).collect();
    assert_eq!(
        labels,
        ["habit-a", "habit-b", "sli"].into_iter().collect(),
        "report keyed by method label"
    );
    assert!(out_a.join("eval-report.txt").exists());
    assert!(out_a.join("eval-cases.csv").exists());
}

#[test]
fn eval_all_short_trips_reports_skips_and_exits_zero() {
    let ws = Workspace::new();
    let corpus = ws.path("ais.csv");
    write_corpus_csv(
        &corpus,
        &CorridorSpec {
            n_trips: 6,
            trip_duration_min: 20.0,
            ..CorridorSpec::default()
        },
    );
    run_ok(habit_bin()
        .args(["ingest", "--input"])
        .arg(&corpus)
        .arg("--out")
        .arg(ws.out()));
    run_ok(habit_bin()
        .arg("eval")
        .arg("--trips")
        .arg(ws.out().join("trips.csv"))
        .arg("--out")
        .arg(ws.out()));

    let report: EvalReport =
        serde_json::from_str(&fs::read_to_string(ws.out().join("eval-report.json")).unwrap())
            .unwrap();
    assert!(report.cases.is_empty());
    assert_eq!(report.skipped_cases[&60], report.test_trips);
}

#[test]
fn export_geojson_emits_one_closed_polygon_per_node() {
    let ws = ingest_and_build(&small_spec());
    run_ok(habit_bin().arg("export-geojson").arg("--out").arg(ws.out()));

    let graph = TrafficGraph::load_from_path(ws.out().join("graph-r9.hbg")).unwrap();
    let collection: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.out().join("cells.geojson")).unwrap()).unwrap();
    let features = collection["features"].as_array().unwrap();
    assert_eq!(features.len(), graph.node_count());

    for feature in features {
        let cell: habit::CellId = feature["properties"]["cell"]
            .as_str()
            .unwrap()
            .parse()
            .unwrap();
        let ring = feature["geometry"]["coordinates"][0].as_array().unwrap();
        let expected = cell.boundary();
        assert_eq!(ring.len(), expected.len() + 1, "ring closed by repeating the first vertex");
        assert_eq!(ring.first(), ring.last());
        for (pos, vertex) in ring.iter().take(expected.len()).zip(&expected) {
            assert!((pos[0].as_f64().unwrap() - vertex.lon).abs() < 1e-12);
            assert!((pos[1].as_f64().unwrap() - vertex.lat).abs() < 1e-12);
        }
        assert!(feature["properties"]["msg_count"].as_u64().unwrap() >= 1);
    }
}

#[test]
fn export_geojson_empty_graph_is_empty_collection() {
    let ws = Workspace::new();
    fs::create_dir_all(ws.out()).unwrap();
    // Build from an empty trips file.
    fs::write(
        ws.out().join("trips.csv"),
        "trip_id,vessel_id,ts,lon,lat,sog,cog\n",
    )
    .unwrap();
    run_ok(habit_bin().arg("build").arg("--out").arg(ws.out()));
    run_ok(habit_bin().arg("export-geojson").arg("--out").arg(ws.out()));

    let collection: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.out().join("cells.geojson")).unwrap()).unwrap();
    assert_eq!(collection["features"].as_array().unwrap().len(), 0);
}

#[test]
fn ingest_with_schema_flags_handles_foreign_layout() {
    let ws = Workspace::new();
    let corpus = ws.path("foreign.csv");
    // Semicolon-delimited source with its own column names and timestamp
    // format, mapped entirely from the command line.
    let mut text = String::from("# Timestamp;MMSI;Latitude;Longitude;SOG;COG\n");
    for i in 0..40 {
        text.push_str(&format!(
            "05/01/2024 10:{:02}:00;219000001;55.0;{};12.5;90.0\n",
            i,
            12.0 + i as f64 * 0.005
        ));
    }
    fs::write(&corpus, text).unwrap();

    run_ok(habit_bin()
        .args(["ingest", "--input"])
        .arg(&corpus)
        .args([
            "--delimiter", ";",
            "--schema", "vessel_id=MMSI",
            "--schema", "timestamp=# Timestamp",
            "--schema", "lat=Latitude",
            "--schema", "lon=Longitude",
            "--schema", "sog=SOG",
            "--schema", "cog=COG",
            "--ts-format", "%d/%m/%Y %H:%M:%S",
        ])
        .arg("--out")
        .arg(ws.out()));

    let trips = habit::segment::read_trips(fs::File::open(ws.out().join("trips.csv")).unwrap())
        .unwrap();
    assert_eq!(trips.len(), 1);
    assert_eq!(trips[0].points.len(), 40);
    assert_eq!(trips[0].vessel_id, "219000001");
    assert_eq!(trips[0].points[0].sog, Some(12.5));
}

#[test]
fn impute_malformed_gap_rows_become_error_features() {
    let ws = ingest_and_build(&small_spec());
    let gaps = ws.path("gaps.csv");
    let mut rows = corridor_gap_rows(&ws, false);
    rows.push([
        "BADROW".into(),
        "NaN".into(),
        "56.0".into(),
        format_timestamp(1_704_448_800_000),
        "11.5".into(),
        "56.1".into(),
        format_timestamp(1_704_452_400_000),
    ]);
    write_gaps_csv(&gaps, &rows);

    run_ok(habit_bin().arg("impute").arg("--gaps").arg(&gaps).arg("--out").arg(ws.out()));
    let collection: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.out().join("imputed.geojson")).unwrap())
            .unwrap();
    let features = collection["features"].as_array().unwrap();
    assert_eq!(features.len(), 4);
    let bad = &features[3];
    assert!(bad["geometry"].is_null());
    assert!(bad["properties"]["error"].as_str().unwrap().contains("start_lon"));
}
