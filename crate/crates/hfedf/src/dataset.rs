//! Dataset export and import as JSON lines, one
//! `{"domain", "label", "features"}` record per sample.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use hfedf_core::data::{DomainDataset, Sample};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    domain: usize,
    label: usize,
    features: Vec<f64>,
}

pub fn export_dataset<W: Write>(mut out: W, domains: &[DomainDataset]) -> Result<()> {
    for d in domains {
        for s in &d.samples {
            let rec = Record {
                domain: d.domain_id,
                label: s.label,
                features: s.features.clone(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")
                .map_err(|e| Error::Format(format!("write: {e}")))?;
        }
    }
    Ok(())
}

/// Reads records back, grouped by domain id in ascending order with
/// sample order preserved within each domain.
pub fn import_dataset<R: BufRead>(input: R) -> Result<Vec<DomainDataset>> {
    let mut by_domain: BTreeMap<usize, Vec<Sample>> = BTreeMap::new();
    let mut dim = None;
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
        if *dim.get_or_insert(rec.features.len()) != rec.features.len() {
            return Err(Error::Format(format!(
                "line {}: feature length {} differs from earlier records",
                n + 1,
                rec.features.len()
            )));
        }
        by_domain.entry(rec.domain).or_default().push(Sample {
            features: rec.features,
            label: rec.label,
        });
    }
    Ok(by_domain
        .into_iter()
        .map(|(domain_id, samples)| DomainDataset { domain_id, samples })
        .collect())
}
