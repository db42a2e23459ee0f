use std::io::Write;

use serde_json::{Map, Value};

use super::DiscoveryReport;

/// One row per particle of every layer:
/// `layer,particle,w_1..w_k,score,delta`.
pub fn write_posterior_csv<W: Write>(report: &DiscoveryReport, out: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let k = report.transitions.len();
    let mut header = vec!["layer".to_string(), "particle".to_string()];
    header.extend((1..=k).map(|i| format!("w_{i}")));
    header.extend(["score".to_string(), "delta".to_string()]);
    wtr.write_record(&header)?;
    for pop in &report.populations {
        for (j, p) in pop.particles.iter().enumerate() {
            let mut row = vec![pop.layer.to_string(), (j + 1).to_string()];
            row.extend(p.w.iter().map(|w| w.to_string()));
            row.extend([p.score.to_string(), p.delta.to_string()]);
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// The best weight vector keyed by transition id.
pub fn weights_json(report: &DiscoveryReport) -> Value {
    let map: Map<String, Value> = report
        .transitions
        .iter()
        .zip(&report.best.w)
        .map(|(id, &w)| (id.clone(), Value::from(w)))
        .collect();
    Value::Object(map)
}
