//! Prints quadrature-oracle posteriors for a model as JSON.
//!
//! ```text
//! cargo run --release --example oracle_golden -- models/figure3.json X2=1
//! ```

use hybrid_mte::jointree::Evidence;
use hybrid_mte::model::parse_model;
use hybrid_mte::oracle::{quadrature_posterior, QuadratureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().ok_or("usage: oracle_golden <model> [Name=value ...]")?;
    let evidence: Vec<String> = args.collect();
    let net = parse_model(&std::fs::read_to_string(&path)?)?;
    let ev = Evidence::parse(&net, &evidence)?;
    let spec = QuadratureSpec::default();
    let mut targets = Vec::new();
    for v in net.ids().filter(|&v| ev.get(v).is_none()) {
        let q = quadrature_posterior(&net, &ev, v, &spec)?;
        targets.push(serde_json::json!({
            "name": net.name(v),
            "mean": q.mean,
            "variance": q.variance,
            "evidence_likelihood": q.evidence_weight,
        }));
    }
    let doc = serde_json::json!({
        "model": path,
        "evidence": evidence,
        "points_per_axis": spec.points_per_axis,
        "targets": targets,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}
