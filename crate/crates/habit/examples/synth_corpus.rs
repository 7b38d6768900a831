//! Write a synthetic AIS corpus as raw delimited text, so the CLI pipeline
//! can be tried end to end without real data:
//!
//! ```text
//! cargo run --example synth_corpus -- ais.csv
//! ```

use std::env;
use std::fs::File;

use habit::model::{format_timestamp, CANONICAL_HEADER};
use habit::synth::{corpus_records, corridor_trips, CorridorSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = env::args().nth(1).unwrap_or_else(|| "ais.csv".into());
    let spec = CorridorSpec {
        n_trips: 60,
        ..CorridorSpec::default()
    };
    let records = corpus_records(&corridor_trips(&spec));

    let mut writer = csv::Writer::from_writer(File::create(&path)?);
    writer.write_record(CANONICAL_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &records {
        writer.write_record([
            r.vessel_id.clone(),
            format_timestamp(r.ts),
            r.lon.to_string(),
            r.lat.to_string(),
            opt(r.sog),
            opt(r.cog),
        ])?;
    }
    writer.flush()?;
    println!("wrote {} records to {path}", records.len());
    Ok(())
}
