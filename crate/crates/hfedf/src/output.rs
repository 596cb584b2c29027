//! Writers for the per-run output files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use hfedf_core::federation::{Algorithm, CellOutcome, RoundTrace};
use hfedf_core::metrics::{ConfidenceRecord, ResultRow};
use serde::Serialize;

use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const DIVERGENCE_FILE: &str = "divergence.csv";
pub const CONFIDENCE_FILE: &str = "confidences.jsonl";
pub const CONFIG_FILE: &str = "config.toml";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Results CSV with header `algorithm,seed,target_domain,round,id_acc,ood_acc`.
pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "algorithm",
            "seed",
            "target_domain",
            "round",
            "id_acc",
            "ood_acc",
        ])?;
    }
    w.flush().map_err(|e| Error::Format(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[derive(Serialize)]
struct TraceLine<'a> {
    algorithm: Algorithm,
    seed: u64,
    target_domain: usize,
    #[serde(flatten)]
    trace: &'a RoundTrace,
}

#[derive(Serialize)]
struct DivergenceLine {
    algorithm: Algorithm,
    seed: u64,
    target_domain: usize,
    layer: String,
    mean_distance: f64,
}

#[derive(Serialize)]
struct ConfidenceLine<'a> {
    algorithm: Algorithm,
    seed: u64,
    target_domain: usize,
    client: Option<usize>,
    #[serde(flatten)]
    record: &'a ConfidenceRecord,
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl Iterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

/// Writes every output file of a finished grid into `dir`; returns the
/// file names written.
pub fn write_run(dir: &Path, cells: &[CellOutcome], confidences: bool) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();

    let path = dir.join(RESULTS_FILE);
    let rows: Vec<ResultRow> = cells.iter().flat_map(|c| c.rows.iter().cloned()).collect();
    let w = create(&path)?;
    write_results(w, &rows)?;
    files.push(RESULTS_FILE.to_string());

    write_jsonl(
        &dir.join(TRACE_FILE),
        cells.iter().flat_map(|c| {
            c.traces.iter().map(move |trace| TraceLine {
                algorithm: c.key.algorithm,
                seed: c.key.seed,
                target_domain: c.key.target_domain,
                trace,
            })
        }),
    )?;
    files.push(TRACE_FILE.to_string());

    let path = dir.join(DIVERGENCE_FILE);
    let mut w = csv::Writer::from_writer(create(&path)?);
    let mut any = false;
    for c in cells {
        for layer in c.divergence.iter().flat_map(|d| d.layers.iter()) {
            any = true;
            w.serialize(DivergenceLine {
                algorithm: c.key.algorithm,
                seed: c.key.seed,
                target_domain: c.key.target_domain,
                layer: layer.layer.clone(),
                mean_distance: layer.mean_distance,
            })?;
        }
    }
    if !any {
        w.write_record([
            "algorithm",
            "seed",
            "target_domain",
            "layer",
            "mean_distance",
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    files.push(DIVERGENCE_FILE.to_string());

    if confidences {
        write_jsonl(
            &dir.join(CONFIDENCE_FILE),
            cells.iter().flat_map(|c| {
                c.confidences.iter().map(move |cc| ConfidenceLine {
                    algorithm: c.key.algorithm,
                    seed: c.key.seed,
                    target_domain: c.key.target_domain,
                    client: cc.client,
                    record: &cc.record,
                })
            }),
        )?;
        files.push(CONFIDENCE_FILE.to_string());
    }
    Ok(files)
}
